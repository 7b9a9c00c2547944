//! Regression scenarios for the mitigation ladder: two limits an attacker
//! gets around and the combination that holds.

use serde::{Deserialize, Serialize};

use super::{AttackRate, ScenarioConfig};
use crate::validator::MitigationPolicy;
use crate::wire::Cipher;
use crate::zonegen::AttackVectorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedLoss {
    AtLeast(f64),
    AtMost(f64),
}

impl ExpectedLoss {
    pub fn holds(self, loss: f64) -> bool {
        match self {
            ExpectedLoss::AtLeast(x) => loss >= x,
            ExpectedLoss::AtMost(x) => loss <= x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BypassScenario {
    pub name: String,
    pub policy: MitigationPolicy,
    pub attack: AttackVectorSpec,
    pub config: ScenarioConfig,
    pub expected: ExpectedLoss,
}

fn steady(profile: &str, attack: AttackVectorSpec, policy: MitigationPolicy, per_second: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(profile, 60.0);
    c.attack = Some(attack);
    c.policy = policy;
    c.attack_rate = Some(AttackRate {
        per_second,
        start: 0.0,
        end: None,
    });
    c.seed = 1;
    c
}

/// (a) a failure limit of 32 against KeySigTrap requests at 150 per second,
/// (b) a zero-failure limit against HashTrap at 10 per second, and
/// (c) the combined policy against the ANY-type zone at 10 per second.
pub fn mitigation_bypass_scenarios() -> Vec<BypassScenario> {
    let cases = [
        (
            "failure-limit-32-vs-spread-keysigtrap",
            "Akamai",
            MitigationPolicy::failures(32),
            AttackVectorSpec::keysigtrap(Cipher::EcdsaP384Sha384, 582, 340),
            150.0,
            ExpectedLoss::AtLeast(0.5),
        ),
        (
            "failure-limit-0-vs-hashtrap",
            "Bind9",
            MitigationPolicy::failures(0),
            AttackVectorSpec::hashtrap(Cipher::Ed25519, 1357, 1357),
            10.0,
            ExpectedLoss::AtLeast(0.6),
        ),
        (
            "combined-vs-anytype",
            "Akamai",
            MitigationPolicy::combined(),
            AttackVectorSpec::anytype(313),
            10.0,
            ExpectedLoss::AtMost(0.01),
        ),
    ];
    cases
        .into_iter()
        .map(|(name, profile, policy, attack, rate, expected)| BypassScenario {
            name: name.to_owned(),
            policy,
            config: steady(profile, attack.clone(), policy, rate),
            attack,
            expected,
        })
        .collect()
}

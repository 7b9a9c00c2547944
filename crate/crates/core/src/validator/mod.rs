//! Instrumented DNSSEC validation with pluggable mitigation policies.
//!
//! Validation follows the try-all behaviour resolvers implement: every RRSIG
//! covering an rrset is tried in order, and for each one every DNSKEY whose
//! (owner, algorithm, key tag) triple matches, until one pair verifies. Every
//! unit of work is counted in [`CostCounters`].

mod engine;

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use engine::{resolve_and_validate, resolve_query, Crypto, Validator};

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema,
)]
pub struct CostCounters {
    pub signature_attempts: u64,
    pub signature_failures: u64,
    pub signature_successes: u64,
    pub digest_computations: u64,
    pub keytag_computations: u64,
    /// Key-selection traversal steps.
    pub keys_scanned: u64,
    pub requery_count: u64,
}

impl CostCounters {
    /// Signature attempts plus digest computations.
    pub fn validations(&self) -> u64 {
        self.signature_attempts + self.digest_computations
    }

    fn fields(&self) -> [u64; 7] {
        [
            self.signature_attempts,
            self.signature_failures,
            self.signature_successes,
            self.digest_computations,
            self.keytag_computations,
            self.keys_scanned,
            self.requery_count,
        ]
    }

    fn from_fields(f: [u64; 7]) -> Self {
        Self {
            signature_attempts: f[0],
            signature_failures: f[1],
            signature_successes: f[2],
            digest_computations: f[3],
            keytag_computations: f[4],
            keys_scanned: f[5],
            requery_count: f[6],
        }
    }

    /// Component-wise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.fields().iter().zip(other.fields()).all(|(a, b)| *a <= b)
    }
}

impl Add for CostCounters {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.fields(), rhs.fields());
        Self::from_fields(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for CostCounters {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let (a, b) = (self.fields(), rhs.fields());
        Self::from_fields(std::array::from_fn(|i| a[i] - b[i]))
    }
}

/// Per-resolution limits. An absent limit is unlimited.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema,
)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationPolicy {
    /// SERVFAIL once this many signature failures have occurred.
    pub max_validation_failures: Option<u64>,
    /// SERVFAIL when a candidate key set is larger than this.
    pub max_colliding_keys: Option<u64>,
    /// SERVFAIL instead of starting a validation once this many have run.
    pub max_total_validations: Option<u64>,
    /// Whether digest computations count toward `max_total_validations`.
    pub count_digests_in_total: bool,
}

impl Default for MitigationPolicy {
    fn default() -> Self {
        Self::NONE
    }
}

impl MitigationPolicy {
    pub const NONE: Self = Self {
        max_validation_failures: None,
        max_colliding_keys: None,
        max_total_validations: None,
        count_digests_in_total: true,
    };

    pub fn failures(limit: u64) -> Self {
        Self {
            max_validation_failures: Some(limit),
            ..Self::NONE
        }
    }

    pub fn collisions(limit: u64) -> Self {
        Self {
            max_colliding_keys: Some(limit),
            ..Self::NONE
        }
    }

    pub fn total(limit: u64) -> Self {
        Self {
            max_total_validations: Some(limit),
            ..Self::NONE
        }
    }

    /// Failures 16, collisions 4, total 8.
    pub fn combined() -> Self {
        Self {
            max_validation_failures: Some(16),
            max_colliding_keys: Some(4),
            max_total_validations: Some(8),
            count_digests_in_total: true,
        }
    }

    pub fn is_unlimited(&self) -> bool {
        self.max_validation_failures.is_none()
            && self.max_colliding_keys.is_none()
            && self.max_total_validations.is_none()
    }
}

impl fmt::Display for MitigationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(n) = self.max_validation_failures {
            parts.push(format!("failures={n}"));
        }
        if let Some(n) = self.max_colliding_keys {
            parts.push(format!("collisions={n}"));
        }
        if let Some(n) = self.max_total_validations {
            parts.push(format!("total={n}"));
        }
        if !self.count_digests_in_total {
            parts.push("digests-in-total=false".to_owned());
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Parses `none` or a comma-separated list such as
/// `failures=16,collisions=4,total=8`, or `combined`.
impl FromStr for MitigationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "" | "none" => return Ok(Self::NONE),
            "combined" => return Ok(Self::combined()),
            _ => {}
        }
        let mut p = Self::NONE;
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let num = || {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| format!("bad number {v:?} for {k}"))
            };
            match k.trim() {
                "failures" => p.max_validation_failures = Some(num()?),
                "collisions" => p.max_colliding_keys = Some(num()?),
                "total" => p.max_total_validations = Some(num()?),
                "digests-in-total" => {
                    p.count_digests_in_total = v
                        .trim()
                        .parse()
                        .map_err(|_| format!("bad boolean {v:?}"))?
                }
                other => return Err(format!("unknown policy key {other:?}")),
            }
        }
        Ok(p)
    }
}

/// How the next candidate key is chosen.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema,
)]
#[serde(rename_all = "lowercase")]
pub enum KeySelection {
    /// One pass over the candidates.
    #[default]
    Efficient,
    /// Each selection walks the candidate list from the start until it
    /// reaches a key not yet tried, so the j-th selection scans j keys.
    Rescan,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema,
)]
#[serde(rename_all = "kebab-case")]
pub enum CryptoMode {
    /// Real signature verification.
    #[default]
    Real,
    /// Consult the graph's generation-time ground truth instead.
    Null,
}

/// Resolver behaviour that is not a mitigation policy.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema,
)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionOptions {
    pub crypto: CryptoMode,
    pub key_selection: KeySelection,
    /// Extra answer validations after a bogus result.
    pub requery_count: u32,
    /// Keys kept from an authenticated DNSKEY set, in rrset order.
    pub max_keys_per_response: Option<usize>,
}

impl ResolutionOptions {
    pub fn null_crypto() -> Self {
        Self {
            crypto: CryptoMode::Null,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
pub enum Status {
    Secure,
    Bogus,
    PolicyServfail,
    ChainBroken,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Secure => "Secure",
            Status::Bogus => "Bogus",
            Status::PolicyServfail => "PolicyServfail",
            Status::ChainBroken => "ChainBroken",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Validated,
    /// Candidate keys existed but no signature verified.
    AllSignaturesFailed,
    /// No signature named a key in the set.
    NoMatchingKey,
    Unsigned,
    FailureLimit,
    CollisionLimit,
    TotalLimit,
    NoMatchingDs,
    MissingDs,
    NoTrustAnchor,
    NameError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    DnskeyAuth,
    DsRrset,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Stage {
    pub label: String,
    pub kind: StageKind,
    pub status: Status,
    pub counters: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ValidationOutcome {
    pub status: Status,
    pub reason: Reason,
    /// Totals for the whole resolution.
    pub counters: CostCounters,
    pub stages: Vec<Stage>,
}

impl ValidationOutcome {
    pub(crate) fn new(status: Status, reason: Reason, counters: CostCounters) -> Self {
        Self {
            status,
            reason,
            counters,
            stages: Vec::new(),
        }
    }

    /// Counters of the answer validation, summed over re-queries.
    pub fn answer_counters(&self) -> CostCounters {
        self.stage_sum(StageKind::Answer)
    }

    pub fn stage_sum(&self, kind: StageKind) -> CostCounters {
        self.stages
            .iter()
            .filter(|s| s.kind == kind)
            .fold(CostCounters::default(), |acc, s| acc + s.counters)
    }

    /// Counters of the last stage, where the attack payload sits.
    pub fn payload_counters(&self) -> CostCounters {
        match self.stages.last() {
            Some(s) if s.kind == StageKind::Answer => self.answer_counters(),
            Some(s) => s.counters,
            None => CostCounters::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parse_roundtrip() {
        let p: MitigationPolicy = "failures=16,collisions=4,total=8".parse().unwrap();
        assert_eq!(p, MitigationPolicy::combined());
        assert_eq!(p.to_string().parse::<MitigationPolicy>().unwrap(), p);
        assert_eq!("none".parse::<MitigationPolicy>().unwrap(), MitigationPolicy::NONE);
        assert!("failures=x".parse::<MitigationPolicy>().is_err());
        assert!("speed=3".parse::<MitigationPolicy>().is_err());
    }

    #[test]
    fn counters_arithmetic() {
        let a = CostCounters {
            signature_attempts: 3,
            signature_failures: 2,
            signature_successes: 1,
            ..Default::default()
        };
        let b = a + a;
        assert_eq!(b.signature_attempts, 6);
        assert_eq!(b - a, a);
        assert!(a.le(&b));
        assert!(!b.le(&a));
    }
}

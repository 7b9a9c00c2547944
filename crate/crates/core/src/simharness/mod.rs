//! Discrete-event simulation of a resolver under attack.
//!
//! A benign client sends uniquely named queries at a fixed rate; an attacker
//! sends attack queries on a schedule. Worker threads serve requests in FIFO
//! order from per-thread queues fed by a shared, capacity-bounded OS buffer.
//! An attack request occupies its thread for the stall estimated from the
//! validator's counters. Simulated time is integer microseconds, so a
//! sixteen-hour stall runs in milliseconds of wall time.

mod bundled;
mod engine;
mod scenarios;

use serde::{Deserialize, Serialize};

use crate::costmodel::{builtin_profile, estimate_stall, CostError, ResolverProfile, Scheduling};
use crate::validator::{
    resolve_and_validate, CostCounters, CryptoMode, MitigationPolicy, Reason, Status,
};
use crate::zonegen::{build, AttackVectorSpec, ZonegenError};

pub use bundled::{bundled_scenario, BUNDLED_SCENARIOS};
pub use engine::{run_scenario_with_cost, Interval};
pub use scenarios::{mitigation_bypass_scenarios, BypassScenario, ExpectedLoss};

pub const MICROS: f64 = 1e6;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Zonegen(#[from] ZonegenError),
}

/// A built-in profile by name, or a full profile inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Custom(Box<ResolverProfile>),
}

impl ProfileRef {
    pub fn resolve(&self) -> Result<ResolverProfile, CostError> {
        match self {
            ProfileRef::Named(n) => builtin_profile(n),
            ProfileRef::Custom(p) => {
                p.validate()?;
                Ok((**p).clone())
            }
        }
    }
}

/// `count` attack requests and `fillers` benign-cost attacker requests sent
/// together at `time` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Batch {
    pub time: f64,
    pub count: u32,
    #[serde(default)]
    pub fillers: u32,
}

/// Attack requests evenly spaced at `per_second` over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AttackRate {
    pub per_second: f64,
    #[serde(default)]
    pub start: f64,
    /// Defaults to the scenario duration.
    pub end: Option<f64>,
}

/// The batch loop of [`continuous_attack_schedule`], starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ContinuousAttack {
    /// Single-request stall in seconds that sets the batch interval.
    pub stall_estimate: f64,
    #[serde(default)]
    pub start: f64,
}

fn default_benign_rate() -> f64 {
    10.0
}

fn default_benign_timeout() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub profile: ProfileRef,
    /// Overrides the profile's thread count.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Overrides the profile's scheduling.
    #[serde(default)]
    pub scheduling: Option<Scheduling>,
    /// Zone served to attack queries. Without one, no attack is sent.
    #[serde(default)]
    pub attack: Option<AttackVectorSpec>,
    #[serde(default)]
    pub policy: MitigationPolicy,
    #[serde(default = "null_crypto")]
    pub crypto: CryptoMode,
    #[serde(default)]
    pub schedule: Vec<Batch>,
    #[serde(default)]
    pub continuous: Option<ContinuousAttack>,
    #[serde(default)]
    pub attack_rate: Option<AttackRate>,
    /// Benign queries per second.
    #[serde(default = "default_benign_rate")]
    pub benign_rate: f64,
    /// Seconds after which an unanswered benign query counts as lost.
    #[serde(default = "default_benign_timeout")]
    pub benign_timeout: f64,
    #[serde(default)]
    pub benign_start: f64,
    /// Fraction of benign queries the resolver has cached.
    #[serde(default)]
    pub benign_cache_hit_fraction: f64,
    /// Simulated seconds of traffic. The run continues one benign timeout
    /// past this so every query is settled.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Seconds an attack request waits for the attacker's responses before
    /// validation starts. The thread serves other requests meanwhile.
    #[serde(default)]
    pub attack_io_gap: f64,
}

fn null_crypto() -> CryptoMode {
    CryptoMode::Null
}

impl ScenarioConfig {
    pub fn new(profile: &str, duration: f64) -> Self {
        Self {
            profile: ProfileRef::Named(profile.to_owned()),
            threads: None,
            scheduling: None,
            attack: None,
            policy: MitigationPolicy::NONE,
            crypto: CryptoMode::Null,
            schedule: Vec::new(),
            continuous: None,
            attack_rate: None,
            benign_rate: default_benign_rate(),
            benign_timeout: default_benign_timeout(),
            benign_start: 0.0,
            benign_cache_hit_fraction: 0.0,
            duration,
            seed: 0,
            attack_io_gap: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Invalid(m.to_owned()));
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !finite_nonneg(self.benign_rate) || !finite_nonneg(self.benign_timeout) {
            return bad("benign rate and timeout must be >= 0");
        }
        if !finite_nonneg(self.benign_start) || !finite_nonneg(self.attack_io_gap) {
            return bad("benign_start and attack_io_gap must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.benign_cache_hit_fraction) {
            return bad("benign_cache_hit_fraction must lie in [0, 1]");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        if self.schedule.iter().any(|b| !finite_nonneg(b.time)) {
            return bad("batch times must be >= 0");
        }
        if let Some(r) = &self.attack_rate {
            if !finite_nonneg(r.per_second) || !finite_nonneg(r.start) {
                return bad("attack rate and start must be >= 0");
            }
        }
        if let Some(c) = &self.continuous {
            if !(c.stall_estimate.is_finite() && c.stall_estimate > 0.0) || !finite_nonneg(c.start) {
                return bad("continuous stall_estimate must be positive");
            }
        }
        let sends_attack = self.schedule.iter().any(|b| b.count > 0)
            || self.continuous.is_some()
            || self.attack_rate.is_some_and(|r| r.per_second > 0.0);
        if sends_attack && self.attack.is_none() {
            return bad("an attack schedule needs an attack zone");
        }
        if let Some(a) = &self.attack {
            a.validate()?;
        }
        Ok(())
    }

    /// The profile with scenario overrides applied.
    pub fn effective_profile(&self) -> Result<ResolverProfile, SimError> {
        let mut p = self.profile.resolve()?;
        if let Some(t) = self.threads {
            p.thread_count = t;
        }
        if let Some(s) = self.scheduling {
            p.scheduling = s;
        }
        Ok(p)
    }

    /// Every attacker batch, from the explicit schedule, the continuous loop
    /// and the constant rate, sorted by time and cut at the duration.
    pub fn attack_batches(&self, threads: usize) -> Vec<Batch> {
        let mut out = self.schedule.clone();
        if let Some(c) = &self.continuous {
            let s = continuous_attack_schedule(threads, c.stall_estimate);
            out.extend(s.expand(c.start, self.duration));
        }
        if let Some(r) = &self.attack_rate {
            if r.per_second > 0.0 {
                let end = r.end.unwrap_or(self.duration).min(self.duration);
                let step = 1.0 / r.per_second;
                let mut i = 0u64;
                loop {
                    let t = r.start + i as f64 * step;
                    if t >= end {
                        break;
                    }
                    out.push(Batch {
                        time: t,
                        count: 1,
                        fillers: 0,
                    });
                    i += 1;
                }
            }
        }
        out.retain(|b| b.time < self.duration);
        out.sort_by(|a, b| a.time.total_cmp(&b.time));
        out
    }
}

/// What one attack request costs the resolver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct AttackCost {
    pub counters: CostCounters,
    pub status: Status,
    pub reason: Reason,
    /// Thread seconds per request.
    pub stall_seconds: f64,
}

impl AttackCost {
    /// Validates the attack zone under the scenario's policy and the
    /// profile's options. All work is costed at the payload algorithm.
    pub fn compute(
        spec: &AttackVectorSpec,
        policy: &MitigationPolicy,
        profile: &ResolverProfile,
        crypto: CryptoMode,
    ) -> Result<Self, SimError> {
        let graph = build(spec)?;
        let outcome = resolve_and_validate(&graph, policy, &profile.resolution_options(crypto));
        let stall = estimate_stall(&outcome.counters, profile, spec.algorithm.algorithm())?;
        Ok(Self {
            counters: outcome.counters,
            status: outcome.status,
            reason: outcome.reason,
            stall_seconds: stall,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct TimelineBin {
    pub time: f64,
    /// Benign queries sent in this bin, and their fates.
    pub sent: u64,
    pub answered: u64,
    pub lost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct SimulationReport {
    pub profile: String,
    pub threads: usize,
    pub benign_sent: u64,
    pub benign_answered: u64,
    pub benign_lost: u64,
    pub loss_fraction: f64,
    /// Lost benign queries by cause. They sum to `benign_lost`.
    pub benign_dropped: u64,
    pub benign_discarded: u64,
    pub benign_timed_out: u64,
    pub benign_cache_hits: u64,
    pub attack_sent: u64,
    pub attack_served: u64,
    pub attack_dropped: u64,
    pub attack_discarded: u64,
    pub fillers_sent: u64,
    pub buffer_drops: u64,
    pub attack_cost: Option<AttackCost>,
    /// Per thread, the intervals spent validating attack requests, in seconds.
    pub attack_busy: Vec<Vec<Interval>>,
    /// Intervals during which every thread was validating attack requests.
    pub stall_intervals: Vec<Interval>,
    pub timeline_bin: f64,
    pub timeline: Vec<TimelineBin>,
    /// Per bin, the fraction of each thread's time spent on attack work.
    pub thread_busy: Vec<Vec<f64>>,
    #[serde(skip)]
    benign_log: Vec<(u64, bool)>,
}

impl SimulationReport {
    pub fn total_stall_seconds(&self) -> f64 {
        self.stall_intervals.iter().map(Interval::len).sum()
    }

    pub fn longest_stall(&self) -> Option<Interval> {
        self.stall_intervals
            .iter()
            .copied()
            .max_by(|a, b| a.len().total_cmp(&b.len()))
    }

    /// Start of the first attack validation and the earliest end of any.
    pub fn first_attack_window(&self) -> Option<Interval> {
        let all = self.attack_busy.iter().flatten();
        let start = all.clone().map(|i| i.start).min_by(f64::total_cmp)?;
        let end = all.map(|i| i.end).min_by(f64::total_cmp)?;
        Some(Interval { start, end })
    }

    /// Loss fraction among benign queries sent in `[from, to)` seconds, or
    /// `None` when none were sent.
    pub fn loss_between(&self, from: f64, to: f64) -> Option<f64> {
        let (a, b) = ((from * MICROS).round() as u64, (to * MICROS).round() as u64);
        let lo = self.benign_log.partition_point(|(t, _)| *t < a);
        let hi = self.benign_log.partition_point(|(t, _)| *t < b);
        let window = &self.benign_log[lo..hi];
        if window.is_empty() {
            return None;
        }
        let lost = window.iter().filter(|(_, ok)| !ok).count();
        Some(lost as f64 / window.len() as f64)
    }

    /// `time,sent,answered,lost,busy_threads,thread_0_busy,...`
    pub fn timeline_csv(&self) -> String {
        let mut out = String::from("time,sent,answered,lost,busy_threads");
        for i in 0..self.threads {
            out.push_str(&format!(",thread_{i}_busy"));
        }
        out.push('\n');
        for (bin, busy) in self.timeline.iter().zip(&self.thread_busy) {
            let total: f64 = busy.iter().sum();
            out.push_str(&format!(
                "{},{},{},{},{:.3}",
                bin.time, bin.sent, bin.answered, bin.lost, total
            ));
            for b in busy {
                out.push_str(&format!(",{b:.3}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs a scenario, validating the attack zone once to cost its requests.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationReport, SimError> {
    config.validate()?;
    let profile = config.effective_profile()?;
    let cost = config
        .attack
        .as_ref()
        .map(|spec| AttackCost::compute(spec, &config.policy, &profile, config.crypto))
        .transpose()?;
    run_scenario_with_cost(config, cost.as_ref())
}

/// Expected attack requests until every one of `n` randomly scheduled
/// threads holds one: `n * H(n)`.
///
/// # Panics
/// When `n == 0`.
pub fn expected_requests_to_fill(n: usize) -> f64 {
    assert!(n >= 1, "at least one thread");
    match expected_requests_to_fill_exact(n) {
        Some((num, den)) => num as f64 / den as f64,
        None => n as f64 * (1..=n).map(|i| 1.0 / i as f64).sum::<f64>(),
    }
}

/// `n * H(n)` as a reduced fraction, or `None` once it overflows.
pub fn expected_requests_to_fill_exact(n: usize) -> Option<(u128, u128)> {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let (mut num, mut den) = (0u128, 1u128);
    for i in 1..=n as u128 {
        // num/den + 1/i
        let g = gcd(den, i);
        let lcm = den.checked_mul(i / g)?;
        num = num.checked_mul(lcm / den)?.checked_add(lcm / i)?;
        den = lcm;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    let num = num.checked_mul(n as u128)?;
    let g = gcd(num, den);
    Some((num / g, den / g))
}

/// The continuous-attack loop: an initial batch of `3n`, one second later a
/// batch of `3n` plus a buffer filler, then the same every `interval`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct AttackSchedule {
    pub batch: u32,
    pub fillers: u32,
    pub follow_up: f64,
    pub interval: f64,
}

impl AttackSchedule {
    /// Batches with times in `[start, end)`.
    pub fn expand(&self, start: f64, end: f64) -> Vec<Batch> {
        let mut out = vec![Batch {
            time: start,
            count: self.batch,
            fillers: 0,
        }];
        let mut t = start + self.follow_up;
        while t < end {
            out.push(Batch {
                time: t,
                count: self.batch,
                fillers: self.fillers,
            });
            t += self.interval;
        }
        out.retain(|b| b.time < end);
        out
    }
}

/// Half the single-request stall, rounded to the nearest ten seconds and
/// at least ten.
///
/// # Panics
/// When `stall_estimate` is not positive or `n_threads == 0`.
pub fn continuous_attack_schedule(n_threads: usize, stall_estimate: f64) -> AttackSchedule {
    assert!(stall_estimate > 0.0, "stall estimate must be positive");
    assert!(n_threads >= 1, "at least one thread");
    AttackSchedule {
        batch: 3 * n_threads as u32,
        fillers: 1,
        follow_up: 1.0,
        interval: ((stall_estimate / 2.0 / 10.0).round() * 10.0).max(10.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupon_collector() {
        assert_eq!(expected_requests_to_fill(1), 1.0);
        assert_eq!(expected_requests_to_fill(2), 3.0);
        assert_eq!(expected_requests_to_fill_exact(4), Some((25, 3)));
        assert_eq!(expected_requests_to_fill(4), 25.0 / 3.0);
        assert!(expected_requests_to_fill_exact(200).is_none());
        assert!((expected_requests_to_fill(200) - 1175.606).abs() < 1e-3);
    }

    #[test]
    fn continuous_schedule_shape() {
        let s = continuous_attack_schedule(4, 176.0);
        assert_eq!((s.batch, s.fillers, s.interval), (12, 1, 90.0));
        let b = s.expand(0.0, 200.0);
        let times: Vec<f64> = b.iter().map(|b| b.time).collect();
        assert_eq!(times, [0.0, 1.0, 91.0, 181.0]);
        assert_eq!(b[0].fillers, 0);
        assert_eq!(continuous_attack_schedule(1, 176.0).batch, 3);
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::new("Unbound", 10.0);
        assert!(c.validate().is_ok());
        c.schedule.push(Batch {
            time: 1.0,
            count: 1,
            fillers: 0,
        });
        assert!(c.validate().is_err());
        c.duration = 0.0;
        assert!(c.validate().is_err());
    }
}

//! Scenario files shipped with the crate, one per reproduced experiment.

/// (name, JSON text) pairs, sorted by name.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("akamai-cached-thread", include_str!("../../scenarios/akamai-cached-thread.json")),
    ("bind9-single-shot", include_str!("../../scenarios/bind9-single-shot.json")),
    ("bypass-failures-0-hashtrap", include_str!("../../scenarios/bypass-failures-0-hashtrap.json")),
    ("bypass-failures-32-keysigtrap", include_str!("../../scenarios/bypass-failures-32-keysigtrap.json")),
    ("combined-vs-anytype", include_str!("../../scenarios/combined-vs-anytype.json")),
    ("continuous-4thread", include_str!("../../scenarios/continuous-4thread.json")),
    ("empty-attack", include_str!("../../scenarios/empty-attack.json")),
    ("five-threads-five-requests", include_str!("../../scenarios/five-threads-five-requests.json")),
    ("knot-single-shot", include_str!("../../scenarios/knot-single-shot.json")),
    ("powerdns-single-shot", include_str!("../../scenarios/powerdns-single-shot.json")),
    ("sigjam-io-gap", include_str!("../../scenarios/sigjam-io-gap.json")),
    ("two-threads-one-request", include_str!("../../scenarios/two-threads-one-request.json")),
    ("unbound-single-shot", include_str!("../../scenarios/unbound-single-shot.json")),
];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

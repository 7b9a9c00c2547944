use proptest::prelude::*;

use keytrap_core::simharness::{
    run_scenario_with_cost, AttackCost, Batch, ScenarioConfig,
};
use keytrap_core::costmodel::Scheduling;
use keytrap_core::validator::{
    resolve_and_validate, CostCounters, CryptoMode, MitigationPolicy, Reason, ResolutionOptions,
    Status,
};
use keytrap_core::wire::{rtype, Cipher};
use keytrap_core::zonegen::{build, AttackVectorSpec, ZoneGraph};

const P256: Cipher = Cipher::EcdsaP256Sha256;

fn run(g: &ZoneGraph, policy: MitigationPolicy, crypto: CryptoMode) -> keytrap_core::validator::ValidationOutcome {
    let opts = ResolutionOptions {
        crypto,
        ..Default::default()
    };
    resolve_and_validate(g, &policy, &opts)
}

fn spec_strategy() -> impl Strategy<Value = AttackVectorSpec> {
    prop_oneof![
        (1usize..8).prop_map(|s| AttackVectorSpec::sigjam(P256, s)),
        (1usize..8).prop_map(|k| AttackVectorSpec::lockcram(P256, k)),
        (1usize..5, 1usize..5).prop_map(|(k, s)| AttackVectorSpec::keysigtrap(P256, k, s)),
        (1usize..5, 1usize..5).prop_map(|(d, k)| AttackVectorSpec::hashtrap(Cipher::Ed25519, d, k)),
        (1usize..6).prop_map(AttackVectorSpec::anytype),
    ]
}

fn policy_strategy() -> impl Strategy<Value = MitigationPolicy> {
    (
        proptest::option::of(0u64..20),
        proptest::option::of(0u64..6),
        proptest::option::of(0u64..30),
        any::<bool>(),
    )
        .prop_map(|(f, c, t, d)| MitigationPolicy {
            max_validation_failures: f,
            max_colliding_keys: c,
            max_total_validations: t,
            count_digests_in_total: d,
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn null_crypto_matches_real(spec in spec_strategy(), policy in policy_strategy(), seed in 0u64..1000) {
        let g = build(&AttackVectorSpec { seed, ..spec }).unwrap();
        prop_assert_eq!(run(&g, policy, CryptoMode::Real), run(&g, policy, CryptoMode::Null));
    }

    #[test]
    fn limits_only_reduce_work(spec in spec_strategy(), policy in policy_strategy()) {
        let g = build(&spec).unwrap();
        let free = run(&g, MitigationPolicy::NONE, CryptoMode::Null);
        let capped = run(&g, policy, CryptoMode::Null);
        prop_assert!(capped.counters.le(&free.counters));
        if capped.status != Status::PolicyServfail {
            prop_assert_eq!(capped.status, free.status);
        }
        if let Some(limit) = policy.max_validation_failures {
            prop_assert!(capped.counters.signature_failures <= limit.max(1));
        }
        if let Some(limit) = policy.max_total_validations {
            let counted = if policy.count_digests_in_total {
                capped.counters.validations()
            } else {
                capped.counters.signature_attempts
            };
            prop_assert!(counted <= limit);
        }
    }

    #[test]
    fn more_signatures_more_work(k in 1usize..6, s in 1usize..6) {
        let a = run(&build(&AttackVectorSpec::keysigtrap(P256, k, s)).unwrap(), MitigationPolicy::NONE, CryptoMode::Null);
        let b = run(&build(&AttackVectorSpec::keysigtrap(P256, k, s + 1)).unwrap(), MitigationPolicy::NONE, CryptoMode::Null);
        let c = run(&build(&AttackVectorSpec::keysigtrap(P256, k + 1, s)).unwrap(), MitigationPolicy::NONE, CryptoMode::Null);
        prop_assert!(a.counters.signature_attempts < b.counters.signature_attempts);
        prop_assert!(a.counters.signature_attempts < c.counters.signature_attempts);
    }

    #[test]
    fn record_order_is_irrelevant(k in 1usize..6, s in 1usize..6) {
        let g = build(&AttackVectorSpec::keysigtrap(P256, k, s)).unwrap();
        let mut h = g.clone();
        let q = h.query.clone();
        for zone in h.zones.values_mut() {
            zone.dnskeys.reverse();
            if let Some(sigs) = zone.rrsigs.get_mut(&(q.qname.clone(), q.qtype)) {
                sigs.reverse();
            }
        }
        let (a, b) = (run(&g, MitigationPolicy::NONE, CryptoMode::Null), run(&h, MitigationPolicy::NONE, CryptoMode::Null));
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.counters.signature_attempts, b.counters.signature_attempts);
        prop_assert_eq!(a.counters.digest_computations, b.counters.digest_computations);
    }
}

#[test]
fn collision_limit_trips_on_keysigtrap() {
    let g = build(&AttackVectorSpec::keysigtrap(P256, 10, 10)).unwrap();
    let out = run(&g, MitigationPolicy::collisions(4), CryptoMode::Null);
    assert_eq!((out.status, out.reason), (Status::PolicyServfail, Reason::CollisionLimit));
    assert_eq!(out.answer_counters().signature_attempts, 0);
}

#[test]
fn answer_is_the_attacked_rrset() {
    let g = build(&AttackVectorSpec::sigjam(P256, 3)).unwrap();
    assert_eq!(g.query.qtype, rtype::A);
}

fn cost(stall: f64) -> AttackCost {
    AttackCost {
        counters: CostCounters::default(),
        status: Status::Bogus,
        reason: Reason::AllSignaturesFailed,
        stall_seconds: stall,
    }
}

fn sim(threads: usize, batches: Vec<Batch>, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new("Unbound", 120.0);
    c.threads = Some(threads);
    c.attack = Some(AttackVectorSpec::sigjam(P256, 1));
    c.schedule = batches;
    c.seed = seed;
    c
}

fn batch_strategy() -> impl Strategy<Value = Vec<Batch>> {
    proptest::collection::vec(
        (0.0f64..100.0, 0u32..4, 0u32..2).prop_map(|(time, count, fillers)| Batch {
            time: time.round(),
            count,
            fillers,
        }),
        0..5,
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reports_conserve_and_repeat(threads in 1usize..5, batches in batch_strategy(), seed in any::<u64>(), stall in 0.5f64..60.0) {
        let c = sim(threads, batches, seed);
        let a = run_scenario_with_cost(&c, Some(&cost(stall))).unwrap();
        prop_assert_eq!(a.benign_sent, a.benign_answered + a.benign_lost);
        prop_assert_eq!(a.benign_lost, a.benign_dropped + a.benign_discarded + a.benign_timed_out);
        let b = run_scenario_with_cost(&c, Some(&cost(stall))).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn extra_attack_never_helps(threads in 1usize..5, batches in batch_strategy(), extra in (0.0f64..100.0, 1u32..3), seed in any::<u64>()) {
        let base = sim(threads, batches.clone(), seed);
        let mut more = batches;
        more.push(Batch { time: extra.0.round(), count: extra.1, fillers: 0 });
        let more = sim(threads, more, seed);
        let a = run_scenario_with_cost(&base, Some(&cost(20.0))).unwrap();
        let b = run_scenario_with_cost(&more, Some(&cost(20.0))).unwrap();
        prop_assert!(b.benign_lost >= a.benign_lost, "{} < {}", b.benign_lost, a.benign_lost);
    }
}

#[test]
fn load_aware_beats_random_below_thread_count() {
    let mut random = 0.0;
    let mut aware = 0.0;
    for seed in 0..20 {
        let batches = vec![Batch {
            time: 5.0,
            count: 3,
            fillers: 0,
        }];
        let mut c = sim(4, batches, seed);
        c.scheduling = Some(Scheduling::Random);
        random += run_scenario_with_cost(&c, Some(&cost(60.0))).unwrap().loss_fraction;
        c.scheduling = Some(Scheduling::LoadAware);
        aware += run_scenario_with_cost(&c, Some(&cost(60.0))).unwrap().loss_fraction;
    }
    assert!(aware < random, "load-aware {aware} vs random {random}");
    assert_eq!(aware, 0.0);
}

#[test]
fn cached_thread_keeps_hits_alive() {
    let mut c = sim(1, vec![Batch { time: 0.0, count: 1, fillers: 0 }], 7);
    c.profile = keytrap_core::simharness::ProfileRef::Named("Akamai".into());
    c.benign_cache_hit_fraction = 0.5;
    let r = run_scenario_with_cost(&c, Some(&cost(200.0))).unwrap();
    assert!(r.benign_cache_hits > 0);
    // every miss during the stall is lost, every hit answered
    assert_eq!(r.benign_answered, r.benign_cache_hits);
}

#[test]
fn zero_attack_zero_loss() {
    let c = sim(2, Vec::new(), 3);
    let r = run_scenario_with_cost(&c, None).unwrap();
    assert_eq!((r.benign_lost, r.loss_fraction), (0, 0.0));
}

use super::{
    CostCounters, CryptoMode, KeySelection, MitigationPolicy, Reason, ResolutionOptions, Stage,
    StageKind, Status, ValidationOutcome,
};
use crate::keyforge::{
    ds_digest, signed_data, verify_raw, DnskeyRecord, DsRecord, RrsigRecord, FLAG_ZONE,
};
use crate::wire::{rtype, DnsName, RrSet};
use crate::zonegen::{GroundTruth, TrustAnchor, Zone, ZoneGraph};

/// Where verification results come from.
#[derive(Debug, Clone, Copy)]
pub enum Crypto<'a> {
    Real,
    Null(&'a GroundTruth),
}

/// Signature data prepared once per RRSIG and reused for every candidate key.
enum Prepared {
    Real(Vec<u8>),
    Null(u64),
}

/// One resolution's worth of validation state. Counters and policy limits
/// are per resolution.
pub struct Validator<'a> {
    pub policy: MitigationPolicy,
    pub key_selection: KeySelection,
    pub crypto: Crypto<'a>,
    pub counters: CostCounters,
}

type Halt = (Status, Reason);

fn dedup_sigs(sigs: &[RrsigRecord]) -> Vec<&RrsigRecord> {
    let mut out: Vec<&RrsigRecord> = Vec::with_capacity(sigs.len());
    let mut seen = std::collections::HashSet::new();
    for s in sigs {
        if seen.insert(s) {
            out.push(s);
        }
    }
    out
}

fn dedup_keys(keys: &[DnskeyRecord]) -> Vec<DnskeyRecord> {
    let mut seen = std::collections::HashSet::new();
    keys.iter().filter(|k| seen.insert(*k)).cloned().collect()
}

impl<'a> Validator<'a> {
    pub fn new(policy: MitigationPolicy, crypto: Crypto<'a>) -> Self {
        Self {
            policy,
            key_selection: KeySelection::Efficient,
            crypto,
            counters: CostCounters::default(),
        }
    }

    /// Keys whose (owner, algorithm, computed tag) equal the RRSIG's triple,
    /// in rrset order. One key-tag computation is counted per key examined.
    pub fn candidate_keys<'k>(&mut self, rrsig: &RrsigRecord, keys: &'k [DnskeyRecord]) -> Vec<&'k DnskeyRecord> {
        self.counters.keytag_computations += keys.len() as u64;
        keys.iter()
            .filter(|k| {
                k.owner == rrsig.signer_name
                    && k.algorithm == rrsig.algorithm
                    && k.flags & FLAG_ZONE != 0
                    && k.key_tag() == rrsig.key_tag
            })
            .collect()
    }

    fn prepare(&self, rrsig: &RrsigRecord, rrset: &RrSet) -> Prepared {
        match self.crypto {
            Crypto::Real => Prepared::Real(signed_data(rrsig, rrset)),
            Crypto::Null(_) => Prepared::Null(GroundTruth::signature_fingerprint(rrsig, rrset)),
        }
    }

    fn check(&mut self, prepared: &Prepared, rrsig: &RrsigRecord, key: &DnskeyRecord) -> bool {
        let ok = match (prepared, self.crypto) {
            (Prepared::Real(data), _) => verify_raw(key, data, &rrsig.signature),
            (Prepared::Null(fp), Crypto::Null(truth)) => {
                truth.is_valid(*fp, GroundTruth::key_fingerprint(key))
            }
            (Prepared::Null(_), Crypto::Real) => unreachable!(),
        };
        self.counters.signature_attempts += 1;
        if ok {
            self.counters.signature_successes += 1;
        } else {
            self.counters.signature_failures += 1;
        }
        ok
    }

    /// One verification of `rrsig` over `rrset` with `key`. Malformed keys
    /// and signatures count as failed attempts.
    pub fn verify_signature(&mut self, rrsig: &RrsigRecord, key: &DnskeyRecord, rrset: &RrSet) -> bool {
        let prepared = self.prepare(rrsig, rrset);
        self.check(&prepared, rrsig, key)
    }

    fn total_exhausted(&self) -> bool {
        let used = if self.policy.count_digests_in_total {
            self.counters.validations()
        } else {
            self.counters.signature_attempts
        };
        self.policy.max_total_validations.is_some_and(|n| used >= n)
    }

    fn too_many_candidates(&self, n: usize) -> bool {
        self.policy.max_colliding_keys.is_some_and(|m| n as u64 > m)
    }

    fn try_rrset(&mut self, rrset: &RrSet, rrsigs: &[RrsigRecord], keys: &[DnskeyRecord]) -> Result<Reason, Halt> {
        let mut rrset = rrset.clone();
        rrset.dedup();
        let sigs = dedup_sigs(rrsigs);
        if sigs.is_empty() {
            return Ok(Reason::Unsigned);
        }
        let mut any_candidate = false;
        for sig in sigs {
            let candidates = self.candidate_keys(sig, keys);
            if self.too_many_candidates(candidates.len()) {
                return Err((Status::PolicyServfail, Reason::CollisionLimit));
            }
            if candidates.is_empty() {
                continue;
            }
            any_candidate = true;
            let prepared = self.prepare(sig, &rrset);
            for (j, key) in candidates.into_iter().enumerate() {
                if self.total_exhausted() {
                    return Err((Status::PolicyServfail, Reason::TotalLimit));
                }
                self.counters.keys_scanned += match self.key_selection {
                    KeySelection::Efficient => 1,
                    KeySelection::Rescan => j as u64 + 1,
                };
                if self.check(&prepared, sig, key) {
                    return Ok(Reason::Validated);
                }
                if let Some(limit) = self.policy.max_validation_failures {
                    if self.counters.signature_failures >= limit {
                        return Err((Status::PolicyServfail, Reason::FailureLimit));
                    }
                }
            }
        }
        Ok(if any_candidate {
            Reason::AllSignaturesFailed
        } else {
            Reason::NoMatchingKey
        })
    }

    /// Tries each RRSIG in order against its candidate keys until one pair
    /// verifies.
    pub fn validate_rrset(&mut self, rrset: &RrSet, rrsigs: &[RrsigRecord], keys: &[DnskeyRecord]) -> ValidationOutcome {
        let (status, reason) = match self.try_rrset(rrset, rrsigs, keys) {
            Ok(Reason::Validated) => (Status::Secure, Reason::Validated),
            Ok(r) => (Status::Bogus, r),
            Err(halt) => halt,
        };
        ValidationOutcome::new(status, reason, self.counters)
    }

    fn trusted_by_ds(&mut self, keys: &[DnskeyRecord], ds_set: &[DsRecord]) -> Result<Vec<DnskeyRecord>, Halt> {
        let mut trusted: Vec<DnskeyRecord> = Vec::new();
        for ds in ds_set {
            self.counters.keytag_computations += keys.len() as u64;
            let candidates: Vec<&DnskeyRecord> = keys
                .iter()
                .filter(|k| {
                    k.owner == ds.owner
                        && k.algorithm == ds.algorithm
                        && k.flags & FLAG_ZONE != 0
                        && k.key_tag() == ds.key_tag
                })
                .collect();
            if self.too_many_candidates(candidates.len()) {
                return Err((Status::PolicyServfail, Reason::CollisionLimit));
            }
            for key in candidates {
                if self.total_exhausted() {
                    return Err((Status::PolicyServfail, Reason::TotalLimit));
                }
                let Ok(digest) = ds_digest(key, ds.digest_type) else {
                    continue;
                };
                self.counters.digest_computations += 1;
                if digest == ds.digest {
                    if !trusted.contains(key) {
                        trusted.push(key.clone());
                    }
                    break;
                }
            }
        }
        Ok(trusted)
    }

    /// Authenticates a DNSKEY set: DS digests select trusted keys, which must
    /// then verify a signature over the whole set. Returns the set on success.
    pub fn authenticate_dnskey_set(
        &mut self,
        dnskeys: &[DnskeyRecord],
        ds_set: &[DsRecord],
        rrsigs: &[RrsigRecord],
    ) -> Result<Vec<DnskeyRecord>, ValidationOutcome> {
        let keys = dedup_keys(dnskeys);
        let trusted = match self.trusted_by_ds(&keys, ds_set) {
            Ok(t) => t,
            Err((s, r)) => return Err(ValidationOutcome::new(s, r, self.counters)),
        };
        if trusted.is_empty() {
            return Err(ValidationOutcome::new(
                Status::ChainBroken,
                Reason::NoMatchingDs,
                self.counters,
            ));
        }
        self.sign_in_keys(keys, &trusted, rrsigs)
    }

    fn sign_in_keys(
        &mut self,
        keys: Vec<DnskeyRecord>,
        trusted: &[DnskeyRecord],
        rrsigs: &[RrsigRecord],
    ) -> Result<Vec<DnskeyRecord>, ValidationOutcome> {
        let Some(set) = crate::keyforge::dnskey_rrset(&keys) else {
            return Err(ValidationOutcome::new(
                Status::ChainBroken,
                Reason::NoMatchingDs,
                self.counters,
            ));
        };
        let out = self.validate_rrset(&set, rrsigs, trusted);
        if out.status == Status::Secure {
            Ok(keys)
        } else {
            Err(out)
        }
    }

    /// Authenticates a DNSKEY set directly against anchored keys.
    fn authenticate_with_keys(
        &mut self,
        dnskeys: &[DnskeyRecord],
        anchors: &[DnskeyRecord],
        rrsigs: &[RrsigRecord],
    ) -> Result<Vec<DnskeyRecord>, ValidationOutcome> {
        let keys = dedup_keys(dnskeys);
        let trusted: Vec<DnskeyRecord> = keys.iter().filter(|k| anchors.contains(k)).cloned().collect();
        if trusted.is_empty() {
            return Err(ValidationOutcome::new(
                Status::ChainBroken,
                Reason::NoTrustAnchor,
                self.counters,
            ));
        }
        self.sign_in_keys(keys, &trusted, rrsigs)
    }
}

struct Walk<'a> {
    v: Validator<'a>,
    stages: Vec<Stage>,
    mark: CostCounters,
}

impl Walk<'_> {
    fn stage(&mut self, label: String, kind: StageKind, status: Status) {
        let now = self.v.counters;
        self.stages.push(Stage {
            label,
            kind,
            status,
            counters: now - self.mark,
        });
        self.mark = now;
    }

    fn finish(self, status: Status, reason: Reason) -> ValidationOutcome {
        ValidationOutcome {
            status,
            reason,
            counters: self.v.counters,
            stages: self.stages,
        }
    }

    fn keys_of(
        &mut self,
        zone: &Zone,
        auth: Result<Vec<DnskeyRecord>, ValidationOutcome>,
        cap: Option<usize>,
    ) -> Result<Vec<DnskeyRecord>, (Status, Reason)> {
        let label = format!("{} DNSKEY", zone.apex);
        match auth {
            Ok(mut keys) => {
                self.stage(label, StageKind::DnskeyAuth, Status::Secure);
                if let Some(n) = cap {
                    keys.truncate(n);
                }
                Ok(keys)
            }
            Err(o) => {
                self.stage(label, StageKind::DnskeyAuth, o.status);
                Err((o.status, o.reason))
            }
        }
    }
}

/// Resolves the graph's own query.
pub fn resolve_and_validate(graph: &ZoneGraph, policy: &MitigationPolicy, options: &ResolutionOptions) -> ValidationOutcome {
    resolve_query(graph, &graph.query.qname, graph.query.qtype, policy, options)
}

/// Walks the chain of trust top-down from the trust anchor, then validates
/// the answer for (`qname`, `qtype`). `ANY` validates every rrset at the name.
pub fn resolve_query(
    graph: &ZoneGraph,
    qname: &DnsName,
    qtype: u16,
    policy: &MitigationPolicy,
    options: &ResolutionOptions,
) -> ValidationOutcome {
    let crypto = match options.crypto {
        CryptoMode::Real => Crypto::Real,
        CryptoMode::Null => Crypto::Null(&graph.ground_truth),
    };
    let mut v = Validator::new(*policy, crypto);
    v.key_selection = options.key_selection;
    let mut w = Walk {
        v,
        stages: Vec::new(),
        mark: CostCounters::default(),
    };
    match walk(graph, qname, qtype, options, &mut w) {
        Ok(()) => w.finish(Status::Secure, Reason::Validated),
        Err((s, r)) => w.finish(s, r),
    }
}

fn walk(graph: &ZoneGraph, qname: &DnsName, qtype: u16, options: &ResolutionOptions, w: &mut Walk) -> Result<(), Halt> {
    let chain = graph.chain_to(qname);
    let Some(top) = chain.first() else {
        return Err((Status::ChainBroken, Reason::NameError));
    };
    if graph.trust_anchor.owner() != Some(&top.apex) {
        return Err((Status::ChainBroken, Reason::NoTrustAnchor));
    }
    let top_sigs = top.signatures(&top.apex, rtype::DNSKEY);
    let auth = match &graph.trust_anchor {
        TrustAnchor::Ds { records } => w.v.authenticate_dnskey_set(&top.dnskeys, records, top_sigs),
        TrustAnchor::Dnskey { records } => w.v.authenticate_with_keys(&top.dnskeys, records, top_sigs),
    };
    let mut keys = w.keys_of(top, auth, options.max_keys_per_response)?;

    for pair in chain.windows(2) {
        let (parent, child) = (pair[0], pair[1]);
        let Some(ds) = parent.ds_for_children.get(&child.apex) else {
            return Err((Status::ChainBroken, Reason::MissingDs));
        };
        let ds_set = crate::keyforge::ds_rrset(ds).expect("non-empty DS list");
        let out = w
            .v
            .validate_rrset(&ds_set, parent.signatures(&child.apex, rtype::DS), &keys);
        w.stage(format!("{} DS", child.apex), StageKind::DsRrset, out.status);
        if out.status != Status::Secure {
            return Err((out.status, out.reason));
        }
        let auth = w.v.authenticate_dnskey_set(
            &child.dnskeys,
            ds,
            child.signatures(&child.apex, rtype::DNSKEY),
        );
        keys = w.keys_of(child, auth, options.max_keys_per_response)?;
    }

    let zone = *chain.last().unwrap();
    let sets: Vec<&RrSet> = if qtype == rtype::ANY {
        zone.rrsets_at(qname).collect()
    } else {
        zone.rrsets.get(&(qname.clone(), qtype)).into_iter().collect()
    };
    if sets.is_empty() {
        return Err((Status::ChainBroken, Reason::NameError));
    }
    for pass in 0..=options.requery_count {
        let label = if pass == 0 {
            format!("{qname} {}", crate::zonegen::type_name(qtype))
        } else {
            w.v.counters.requery_count += 1;
            format!("{qname} {} requery {pass}", crate::zonegen::type_name(qtype))
        };
        let mut result = (Status::Secure, Reason::Validated);
        for set in &sets {
            let out = w
                .v
                .validate_rrset(set, zone.signatures(&set.owner, set.rtype), &keys);
            if out.status != Status::Secure {
                result = (out.status, out.reason);
                break;
            }
        }
        w.stage(label, StageKind::Answer, result.0);
        match result.0 {
            Status::Secure => return Ok(()),
            Status::Bogus if pass < options.requery_count => continue,
            _ => return Err(result),
        }
    }
    unreachable!("the last pass always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Cipher;
    use crate::zonegen::{build, AttackVectorSpec, Vector};

    const P384: Cipher = Cipher::EcdsaP384Sha384;

    fn run(spec: &AttackVectorSpec, policy: MitigationPolicy, crypto: CryptoMode) -> ValidationOutcome {
        let g = build(spec).unwrap();
        let opts = ResolutionOptions {
            crypto,
            ..Default::default()
        };
        resolve_and_validate(&g, &policy, &opts)
    }

    #[test]
    fn benign_is_secure_in_both_modes() {
        let spec = AttackVectorSpec::new(Vector::Benign);
        let real = run(&spec, MitigationPolicy::NONE, CryptoMode::Real);
        let null = run(&spec, MitigationPolicy::NONE, CryptoMode::Null);
        assert_eq!(real.status, Status::Secure);
        assert_eq!(real, null);
        // anchor DNSKEY, DS for the child, child DNSKEY, answer
        assert_eq!(real.counters.signature_attempts, 4);
        assert_eq!(real.counters.digest_computations, 2);
        assert_eq!(real.stages.len(), 4);
    }

    #[test]
    fn tampered_answer_is_bogus() {
        let mut g = build(&AttackVectorSpec::new(Vector::Benign)).unwrap();
        let q = g.query.clone();
        let apex = "attack.er.".parse().unwrap();
        let zone = g.zone_mut(&apex).unwrap();
        zone.rrsets.get_mut(&(q.qname.clone(), q.qtype)).unwrap().rdatas[0][3] ^= 1;
        for crypto in [CryptoMode::Real, CryptoMode::Null] {
            let opts = ResolutionOptions {
                crypto,
                ..Default::default()
            };
            let out = resolve_and_validate(&g, &MitigationPolicy::NONE, &opts);
            assert_eq!(out.status, Status::Bogus);
            assert_eq!(out.reason, Reason::AllSignaturesFailed);
        }
    }

    #[test]
    fn missing_ds_breaks_chain() {
        let mut g = build(&AttackVectorSpec::new(Vector::Benign)).unwrap();
        g.zone_mut(&"er.".parse().unwrap())
            .unwrap()
            .ds_for_children
            .clear();
        let out = resolve_and_validate(&g, &MitigationPolicy::NONE, &ResolutionOptions::default());
        assert_eq!((out.status, out.reason), (Status::ChainBroken, Reason::MissingDs));
    }

    #[test]
    fn unknown_name_is_name_error() {
        let g = build(&AttackVectorSpec::new(Vector::Benign)).unwrap();
        let out = resolve_query(
            &g,
            &"nope.example.".parse().unwrap(),
            rtype::A,
            &MitigationPolicy::NONE,
            &ResolutionOptions::default(),
        );
        assert_eq!((out.status, out.reason), (Status::ChainBroken, Reason::NameError));
        let out = resolve_query(
            &g,
            &"other.attack.er.".parse().unwrap(),
            rtype::A,
            &MitigationPolicy::NONE,
            &ResolutionOptions::default(),
        );
        assert_eq!(out.reason, Reason::NameError);
    }

    #[test]
    fn small_attack_counts() {
        let o = run(&AttackVectorSpec::sigjam(P384, 7), MitigationPolicy::NONE, CryptoMode::Real);
        assert_eq!((o.status, o.answer_counters().signature_attempts), (Status::Bogus, 7));
        let o = run(&AttackVectorSpec::lockcram(P384, 6), MitigationPolicy::NONE, CryptoMode::Real);
        assert_eq!(o.answer_counters().signature_attempts, 6);
        let o = run(&AttackVectorSpec::keysigtrap(P384, 4, 5), MitigationPolicy::NONE, CryptoMode::Real);
        assert_eq!(o.answer_counters().signature_attempts, 20);
        let o = run(&AttackVectorSpec::hashtrap(Cipher::Ed25519, 5, 7), MitigationPolicy::NONE, CryptoMode::Real);
        assert_eq!((o.status, o.reason), (Status::ChainBroken, Reason::NoMatchingDs));
        assert_eq!(o.payload_counters().digest_computations, 35);
    }

    #[test]
    fn policies_trip() {
        let spec = AttackVectorSpec::keysigtrap(P384, 10, 10);
        let o = run(&spec, MitigationPolicy::failures(16), CryptoMode::Null);
        assert_eq!((o.status, o.reason), (Status::PolicyServfail, Reason::FailureLimit));
        assert_eq!(o.answer_counters().signature_attempts, 16);
        let o = run(&spec, MitigationPolicy::collisions(4), CryptoMode::Null);
        assert_eq!(o.reason, Reason::CollisionLimit);
        assert_eq!(o.answer_counters().signature_attempts, 0);
        let o = run(&spec, MitigationPolicy::total(8), CryptoMode::Null);
        assert_eq!(o.reason, Reason::TotalLimit);
        assert_eq!(o.counters.validations(), 8);

        let any = AttackVectorSpec::anytype(20);
        let o = run(&any, MitigationPolicy::failures(0), CryptoMode::Real);
        assert_eq!(o.status, Status::Secure);
        assert_eq!(o.answer_counters().signature_attempts, 20);
        assert_eq!(o.counters.signature_failures, 0);
    }

    #[test]
    fn rescan_is_triangular() {
        let g = build(&AttackVectorSpec::keysigtrap(P384, 6, 3)).unwrap();
        let opts = ResolutionOptions {
            crypto: CryptoMode::Null,
            key_selection: KeySelection::Rescan,
            ..Default::default()
        };
        let o = resolve_and_validate(&g, &MitigationPolicy::NONE, &opts);
        assert_eq!(o.answer_counters().keys_scanned, 3 * (6 * 7 / 2));
    }

    #[test]
    fn requeries_repeat_answer() {
        let g = build(&AttackVectorSpec::keysigtrap(P384, 3, 4)).unwrap();
        let opts = ResolutionOptions {
            crypto: CryptoMode::Null,
            requery_count: 5,
            ..Default::default()
        };
        let o = resolve_and_validate(&g, &MitigationPolicy::NONE, &opts);
        assert_eq!(o.answer_counters().signature_attempts, 6 * 12);
        assert_eq!(o.counters.requery_count, 5);
    }

    #[test]
    fn key_cap_truncates_candidates() {
        let g = build(&AttackVectorSpec::keysigtrap(P384, 10, 2)).unwrap();
        let opts = ResolutionOptions {
            crypto: CryptoMode::Null,
            max_keys_per_response: Some(5),
            ..Default::default()
        };
        let o = resolve_and_validate(&g, &MitigationPolicy::NONE, &opts);
        // KSK plus four colliding keys survive the cap
        assert_eq!(o.answer_counters().signature_attempts, 2 * 4);
    }
}

use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    check_fit, derive_seed, AttackVectorSpec, GroundTruth, Query, TrustAnchor, Vector, Zone,
    ZoneGraph, ZonegenError,
};
use crate::keyforge::{
    compute_ds, dnskey_rrset, ds_rrset, fabricate_invalid_ds, fabricate_invalid_rrsig_with,
    forge_colliding_set, keypair_from_rng, sign_rrset, DnskeyRecord, RrsigRecord, SigningKey,
    DIGEST_SHA256, KSK_FLAGS, ZSK_FLAGS,
};
use crate::wire::{rtype, Cipher, DnsName, RrSet};

const BENIGN_ADDRESS: [u8; 4] = [192, 0, 2, 1];
const PRIVATE_USE_FIRST: u16 = 65280;
const PRIVATE_USE_LAST: u16 = 65534;
/// Continuation once the private-use block is exhausted; 1000 and up lies in
/// the unassigned 266..=32767 range.
const UNASSIGNED_FIRST: u16 = 1000;

/// Type code for the `i`-th rrset of an ANY-type zone.
pub fn unallocated_type(i: usize) -> u16 {
    let private = (PRIVATE_USE_LAST - PRIVATE_USE_FIRST + 1) as usize;
    if i < private {
        PRIVATE_USE_FIRST + i as u16
    } else {
        UNASSIGNED_FIRST + (i - private) as u16
    }
}

struct Builder<'a> {
    spec: &'a AttackVectorSpec,
    chain: Cipher,
    truth: GroundTruth,
    zones: BTreeMap<DnsName, Zone>,
    used_tags: HashSet<u16>,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a AttackVectorSpec) -> Result<Self, ZonegenError> {
        spec.validate()?;
        let mut used_tags = HashSet::new();
        used_tags.insert(spec.colliding_tag);
        Ok(Self {
            spec,
            chain: spec.chain_cipher(),
            truth: GroundTruth::default(),
            zones: BTreeMap::new(),
            used_tags,
        })
    }

    /// A genuine key whose tag is unique within the graph.
    fn genuine(&mut self, owner: &DnsName, flags: u16, role: &str) -> Result<SigningKey, ZonegenError> {
        for attempt in 0u32.. {
            let seed = derive_seed(self.spec.seed, &format!("{role}/{owner}/{attempt}"));
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let key = keypair_from_rng(self.chain, owner, flags, self.spec.ttl, &mut rng)?;
            if self.used_tags.insert(key.key_tag()) {
                return Ok(key);
            }
        }
        unreachable!()
    }

    fn sign(&mut self, set: &RrSet, key: &SigningKey) -> Result<RrsigRecord, ZonegenError> {
        let sig = sign_rrset(set, key, self.spec.inception, self.spec.expiration)?;
        self.truth.insert(&sig, set, key.dnskey());
        Ok(sig)
    }

    /// A zone with the given keys, its DNSKEY set signed by `ksk`.
    fn keyed_zone(&mut self, apex: &DnsName, keys: Vec<DnskeyRecord>, ksk: &SigningKey) -> Result<Zone, ZonegenError> {
        let mut zone = Zone::new(apex.clone());
        zone.dnskeys = keys;
        let set = zone.dnskey_rrset().expect("zone has keys");
        let sig = self.sign(&set, ksk)?;
        zone.rrsigs.insert((apex.clone(), rtype::DNSKEY), vec![sig]);
        Ok(zone)
    }

    fn add_signed(&mut self, zone: &mut Zone, set: RrSet, key: &SigningKey) -> Result<(), ZonegenError> {
        let sig = self.sign(&set, key)?;
        zone.rrsigs.insert((set.owner.clone(), set.rtype), vec![sig]);
        zone.rrsets.insert((set.owner.clone(), set.rtype), set);
        Ok(())
    }

    /// Template RRSIG naming the colliding triple; its signature bytes are
    /// replaced by each fabricated variant.
    fn colliding_template(&self, owner: &DnsName, covered: u16, signer: &DnsName) -> RrsigRecord {
        RrsigRecord {
            owner: owner.clone(),
            ttl: self.spec.ttl,
            type_covered: covered,
            algorithm: self.spec.algorithm.algorithm(),
            labels: owner.label_count(),
            original_ttl: self.spec.ttl,
            expiration: self.spec.expiration,
            inception: self.spec.inception,
            key_tag: self.spec.colliding_tag,
            signer_name: signer.clone(),
            signature: vec![0; self.spec.algorithm.signature_len()],
        }
    }

    fn invalid_sigs(&self, template: &RrsigRecord, count: usize) -> Vec<RrsigRecord> {
        (0..count as u64)
            .map(|i| fabricate_invalid_rrsig_with(template, i, self.spec.sig_uniqueness))
            .collect()
    }

    fn colliding_keys(&self, owner: &DnsName, flags: u16, count: usize) -> Result<Vec<DnskeyRecord>, ZonegenError> {
        let mut keys = forge_colliding_set(
            self.spec.algorithm,
            self.spec.colliding_tag,
            count,
            owner,
            flags,
            derive_seed(self.spec.seed, &format!("forge/{owner}")),
            self.spec.forge_mode,
        )?;
        for k in &mut keys {
            k.ttl = self.spec.ttl;
        }
        Ok(keys)
    }

    fn a_rrset(&self, owner: &DnsName) -> RrSet {
        RrSet::new(owner.clone(), rtype::A, self.spec.ttl, vec![BENIGN_ADDRESS.to_vec()])
    }

    /// Builds the parent zone that delegates to `child_ksk`'s zone and
    /// finishes the graph.
    fn finish(mut self, child: Zone, child_ksk: &DnskeyRecord) -> Result<ZoneGraph, ZonegenError> {
        let parent_apex = self.spec.parent_apex.clone();
        let pksk = self.genuine(&parent_apex, KSK_FLAGS, "parent-ksk")?;
        let pzsk = self.genuine(&parent_apex, ZSK_FLAGS, "parent-zsk")?;
        let mut parent = self.keyed_zone(
            &parent_apex,
            vec![pksk.dnskey().clone(), pzsk.dnskey().clone()],
            &pksk,
        )?;
        self.delegate(&mut parent, &[compute_ds(child_ksk, DIGEST_SHA256)?], &pzsk)?;
        let anchor = compute_ds(pksk.dnskey(), DIGEST_SHA256)?;
        self.zones.insert(parent.apex.clone(), parent);
        self.zones.insert(child.apex.clone(), child);
        let graph = ZoneGraph {
            zones: self.zones,
            trust_anchor: TrustAnchor::Ds {
                records: vec![anchor],
            },
            query: Query {
                qname: self.spec.query_name()?,
                qtype: self.spec.query_type(),
            },
            ground_truth: self.truth,
            spec: Some(self.spec.clone()),
        };
        check_fit(&graph)?;
        Ok(graph)
    }

    fn delegate(&mut self, parent: &mut Zone, ds: &[crate::keyforge::DsRecord], zsk: &SigningKey) -> Result<(), ZonegenError> {
        let set = ds_rrset(ds).expect("non-empty DS set");
        let sig = self.sign(&set, zsk)?;
        let child = set.owner.clone();
        parent.rrsigs.insert((child.clone(), rtype::DS), vec![sig]);
        parent.ds_for_children.insert(child, ds.to_vec());
        Ok(())
    }
}

fn expect_vector(spec: &AttackVectorSpec, v: Vector) -> Result<(), ZonegenError> {
    if spec.vector == v {
        Ok(())
    } else {
        Err(ZonegenError::InvalidSpec(format!(
            "expected vector {v}, got {}",
            spec.vector
        )))
    }
}

/// Child zone with a genuine KSK and ZSK, and the signed answer for the
/// benign, SigJam and ANY-type vectors.
fn ksk_zsk_graph(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    let mut b = Builder::new(spec)?;
    let apex = spec.apex.clone();
    let qname = spec.query_name()?;
    let ksk = b.genuine(&apex, KSK_FLAGS, "ksk")?;
    let zsk = b.genuine(&apex, ZSK_FLAGS, "zsk")?;
    let mut zone = b.keyed_zone(&apex, vec![ksk.dnskey().clone(), zsk.dnskey().clone()], &ksk)?;
    match spec.vector {
        Vector::Benign => b.add_signed(&mut zone, b.a_rrset(&qname), &zsk)?,
        Vector::Sigjam => {
            let set = b.a_rrset(&qname);
            let template = sign_rrset(&set, &zsk, spec.inception, spec.expiration)?;
            let sigs = b.invalid_sigs(&template, spec.sig_count);
            zone.rrsigs.insert((qname.clone(), rtype::A), sigs);
            zone.rrsets.insert((qname.clone(), rtype::A), set);
        }
        Vector::Anytype => {
            for i in 0..spec.rrset_count {
                let set = RrSet::new(
                    qname.clone(),
                    unallocated_type(i),
                    spec.ttl,
                    vec![(i as u32).to_be_bytes().to_vec()],
                );
                b.add_signed(&mut zone, set, &zsk)?;
            }
        }
        other => unreachable!("{other} does not use a genuine ZSK"),
    }
    b.finish(zone, ksk.dnskey())
}

/// Parent + child, one KSK, one ZSK, one signed A record.
pub fn build_benign_zone(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    expect_vector(spec, Vector::Benign)?;
    ksk_zsk_graph(spec)
}

/// One genuine ZSK; the A record carries `s` invalid RRSIGs naming it.
pub fn build_sigjam_zone(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    expect_vector(spec, Vector::Sigjam)?;
    ksk_zsk_graph(spec)
}

/// `rrset_count` rrsets of unallocated types at the query name, each with one
/// valid signature.
pub fn build_anytype_zone(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    expect_vector(spec, Vector::Anytype)?;
    ksk_zsk_graph(spec)
}

/// KSK plus `k` colliding ZSKs; the A record carries `sigs` invalid RRSIGs
/// naming the colliding triple.
fn colliding_graph(spec: &AttackVectorSpec, sigs: usize) -> Result<ZoneGraph, ZonegenError> {
    let mut b = Builder::new(spec)?;
    let apex = spec.apex.clone();
    let qname = spec.query_name()?;
    let ksk = b.genuine(&apex, KSK_FLAGS, "ksk")?;
    let mut keys = vec![ksk.dnskey().clone()];
    keys.extend(b.colliding_keys(&apex, ZSK_FLAGS, spec.key_count)?);
    let mut zone = b.keyed_zone(&apex, keys, &ksk)?;
    let template = b.colliding_template(&qname, rtype::A, &apex);
    zone.rrsigs
        .insert((qname.clone(), rtype::A), b.invalid_sigs(&template, sigs));
    zone.rrsets.insert((qname.clone(), rtype::A), b.a_rrset(&qname));
    b.finish(zone, ksk.dnskey())
}

pub fn build_lockcram_zone(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    expect_vector(spec, Vector::Lockcram)?;
    colliding_graph(spec, 1)
}

pub fn build_keysigtrap_zone(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    expect_vector(spec, Vector::Keysigtrap)?;
    colliding_graph(spec, spec.sig_count)
}

/// The attacker zone delegates to `sub-N` children through `d` invalid DS
/// records each; every child publishes `k` colliding KSK-flagged keys and an
/// invalid signature over its DNSKEY set.
pub fn build_hashtrap_zone(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    expect_vector(spec, Vector::Hashtrap)?;
    let mut b = Builder::new(spec)?;
    let apex = spec.apex.clone();
    let ksk = b.genuine(&apex, KSK_FLAGS, "ksk")?;
    let zsk = b.genuine(&apex, ZSK_FLAGS, "zsk")?;
    let mut zone = b.keyed_zone(&apex, vec![ksk.dnskey().clone(), zsk.dnskey().clone()], &ksk)?;
    let alg = spec.algorithm.algorithm();
    for n in 1..=spec.subzone_count {
        let sub_apex = apex.prepend(&format!("sub-{n}"))?;
        let ds_seed = derive_seed(spec.seed, &format!("ds/{sub_apex}"));
        let ds: Vec<_> = (0..spec.ds_count as u64)
            .map(|i| fabricate_invalid_ds(&sub_apex, spec.colliding_tag, alg, i, ds_seed))
            .map(|mut r| {
                r.ttl = spec.ttl;
                r
            })
            .collect();
        b.delegate(&mut zone, &ds, &zsk)?;

        let mut sub = Zone::new(sub_apex.clone());
        sub.dnskeys = b.colliding_keys(&sub_apex, KSK_FLAGS, spec.key_count)?;
        let template = b.colliding_template(&sub_apex, rtype::DNSKEY, &sub_apex);
        sub.rrsigs
            .insert((sub_apex.clone(), rtype::DNSKEY), b.invalid_sigs(&template, 1));
        let www = sub_apex.prepend("www")?;
        let template = b.colliding_template(&www, rtype::A, &sub_apex);
        sub.rrsigs
            .insert((www.clone(), rtype::A), b.invalid_sigs(&template, 1));
        sub.rrsets.insert((www.clone(), rtype::A), b.a_rrset(&www));
        debug_assert!(dnskey_rrset(&sub.dnskeys).is_some());
        b.zones.insert(sub_apex, sub);
    }
    b.finish(zone, ksk.dnskey())
}

/// Dispatches on `spec.vector`.
pub fn build(spec: &AttackVectorSpec) -> Result<ZoneGraph, ZonegenError> {
    match spec.vector {
        Vector::Benign => build_benign_zone(spec),
        Vector::Sigjam => build_sigjam_zone(spec),
        Vector::Lockcram => build_lockcram_zone(spec),
        Vector::Keysigtrap => build_keysigtrap_zone(spec),
        Vector::Hashtrap => build_hashtrap_zone(spec),
        Vector::Anytype => build_anytype_zone(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zonegen::lint;

    #[test]
    fn type_codes_skip_reserved() {
        assert_eq!(unallocated_type(0), 65280);
        assert_eq!(unallocated_type(254), 65534);
        assert_eq!(unallocated_type(255), 1000);
        let codes: HashSet<u16> = (0..313).map(unallocated_type).collect();
        assert_eq!(codes.len(), 313);
    }

    #[test]
    fn every_vector_builds_and_lints_clean() {
        for v in Vector::ALL {
            let mut spec = AttackVectorSpec::new(v);
            spec.key_count = 3;
            spec.sig_count = 3;
            spec.ds_count = 2;
            spec.rrset_count = 4;
            let g = build(&spec).unwrap();
            assert_eq!(lint(&g), Vec::<String>::new(), "{v}");
            assert_eq!(build(&spec).unwrap(), g, "{v} not deterministic");
        }
    }

    #[test]
    fn keysigtrap_shape() {
        let g = build(&AttackVectorSpec::keysigtrap(Cipher::EcdsaP384Sha384, 5, 4)).unwrap();
        let zone = &g.zones[&"attack.er.".parse::<DnsName>().unwrap()];
        assert_eq!(zone.dnskeys.len(), 6);
        assert_eq!(
            zone.dnskeys.iter().filter(|k| k.key_tag() == 5353).count(),
            5
        );
        let sigs = zone.signatures(&g.query.qname, rtype::A);
        assert_eq!(sigs.len(), 4);
        assert!(sigs.iter().all(|s| s.key_tag == 5353 && s.algorithm == 14));
    }

    #[test]
    fn wrong_vector_rejected() {
        let spec = AttackVectorSpec::new(Vector::Sigjam);
        assert!(matches!(
            build_benign_zone(&spec),
            Err(ZonegenError::InvalidSpec(_))
        ));
    }
}

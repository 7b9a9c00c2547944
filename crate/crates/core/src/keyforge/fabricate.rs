//! Fabricated records: invalid signatures and DS digests that keep a chosen
//! association triple but carry unique payload bytes, plus genuine DS
//! digests for real keys.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::records::{DnskeyRecord, DsRecord, RrsigRecord, DIGEST_SHA256};
use super::KeyforgeError;
use crate::wire::{Cipher, DnsName};

/// How fabricated RRSIGs are kept distinct from one another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum SigUniqueness {
    /// Seeded random signature bytes per variant.
    #[default]
    RandomSignature,
    /// One random signature, with the inception time stepped back per variant.
    ValidityWindow,
}

fn rng_for(label: &[u8], parts: &[&[u8]], stream: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(label);
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    let seed: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha20Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}

fn signature_len(rrsig: &RrsigRecord) -> usize {
    Cipher::ALL
        .into_iter()
        .filter(|c| c.algorithm() == rrsig.algorithm)
        .map(Cipher::signature_len)
        .find(|&l| l == rrsig.signature.len())
        .or_else(|| Cipher::from_algorithm(rrsig.algorithm).ok().map(Cipher::signature_len))
        .unwrap_or(rrsig.signature.len())
}

/// A copy of `template` with the same triple and unique, random signature bytes.
pub fn fabricate_invalid_rrsig(template: &RrsigRecord, variant_index: u64) -> RrsigRecord {
    fabricate_invalid_rrsig_with(template, variant_index, SigUniqueness::RandomSignature)
}

pub fn fabricate_invalid_rrsig_with(
    template: &RrsigRecord,
    variant_index: u64,
    mode: SigUniqueness,
) -> RrsigRecord {
    let prefix = template.rdata_prefix();
    let mut out = template.clone();
    let mut sig = vec![0u8; signature_len(template)];
    match mode {
        SigUniqueness::RandomSignature => {
            rng_for(b"rrsig", &[&prefix], variant_index).fill_bytes(&mut sig);
        }
        SigUniqueness::ValidityWindow => {
            rng_for(b"rrsig-window", &[&prefix], 0).fill_bytes(&mut sig);
            out.inception = template.inception.wrapping_sub(variant_index as u32);
        }
    }
    out.signature = sig;
    out
}

/// DS record for `key`: SHA-256 over the owner's canonical wire form and the
/// DNSKEY rdata.
pub fn compute_ds(key: &DnskeyRecord, digest_type: u8) -> Result<DsRecord, KeyforgeError> {
    let digest = ds_digest(key, digest_type)?;
    Ok(DsRecord {
        owner: key.owner.clone(),
        ttl: key.ttl,
        key_tag: key.key_tag(),
        algorithm: key.algorithm,
        digest_type,
        digest,
    })
}

pub fn ds_digest(key: &DnskeyRecord, digest_type: u8) -> Result<Vec<u8>, KeyforgeError> {
    if digest_type != DIGEST_SHA256 {
        return Err(KeyforgeError::UnsupportedDigest(digest_type));
    }
    let mut h = Sha256::new();
    h.update(key.owner.canonical_wire());
    h.update(key.rdata());
    Ok(h.finalize().to_vec())
}

/// True when `ds` names `key` and its digest matches.
pub fn ds_matches(ds: &DsRecord, key: &DnskeyRecord) -> bool {
    ds.algorithm == key.algorithm
        && ds.key_tag == key.key_tag()
        && ds.owner == key.owner
        && ds_digest(key, ds.digest_type).is_ok_and(|d| d == ds.digest)
}

/// A SHA-256 DS record with seeded random digest bytes, unique per variant.
pub fn fabricate_invalid_ds(
    owner: &DnsName,
    key_tag: u16,
    algorithm: u8,
    variant_index: u64,
    seed: u64,
) -> DsRecord {
    let mut digest = vec![0u8; 32];
    rng_for(
        b"ds",
        &[
            &owner.canonical_wire(),
            &key_tag.to_be_bytes(),
            &[algorithm],
            &seed.to_be_bytes(),
        ],
        variant_index,
    )
    .fill_bytes(&mut digest);
    DsRecord {
        owner: owner.clone(),
        ttl: super::DEFAULT_TTL,
        key_tag,
        algorithm,
        digest_type: DIGEST_SHA256,
        digest,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::keyforge::records::{KSK_FLAGS, ZSK_FLAGS};
    use crate::keyforge::{forge_colliding_set, generate_keypair, sign_rrset, verify_rrsig, ForgeMode};
    use crate::wire::{rtype, RrSet};

    fn name(s: &str) -> DnsName {
        s.parse().unwrap()
    }

    #[test]
    fn invalid_rrsigs_unique_and_failing() {
        let zsk = generate_keypair(Cipher::EcdsaP384Sha384, &name("attack.er."), ZSK_FLAGS, 4)
            .unwrap();
        let a = RrSet::new(name("www-x.attack.er."), rtype::A, 3600, vec![vec![10, 0, 0, 1]]);
        let template = sign_rrset(&a, &zsk, 100, 200).unwrap();
        let variants: Vec<_> = (0..340).map(|i| fabricate_invalid_rrsig(&template, i)).collect();
        let sigs: HashSet<_> = variants.iter().map(|r| r.signature.clone()).collect();
        assert_eq!(sigs.len(), 340);
        assert!(variants.iter().all(|v| v.triple() == template.triple()));
        assert_eq!(fabricate_invalid_rrsig(&template, 0), variants[0]);
        for v in variants.iter().take(20) {
            assert!(!verify_rrsig(v, zsk.dnskey(), &a));
        }
    }

    #[test]
    fn validity_window_mode() {
        let zsk = generate_keypair(Cipher::Ed25519, &name("attack.er."), ZSK_FLAGS, 4).unwrap();
        let a = RrSet::new(name("www.attack.er."), rtype::A, 3600, vec![vec![10, 0, 0, 1]]);
        let template = sign_rrset(&a, &zsk, 1000, 2000).unwrap();
        let v: Vec<_> = (0..5)
            .map(|i| fabricate_invalid_rrsig_with(&template, i, SigUniqueness::ValidityWindow))
            .collect();
        let rdatas: HashSet<_> = v.iter().map(RrsigRecord::rdata).collect();
        assert_eq!(rdatas.len(), 5);
        assert!(v.iter().all(|r| r.signature == v[0].signature));
        assert_eq!(v[3].inception, 997);
    }

    #[test]
    fn ds_roundtrip_and_errors() {
        let owner = name("attack.er.");
        let ksk = generate_keypair(Cipher::EcdsaP384Sha384, &owner, KSK_FLAGS, 1).unwrap();
        let zsk = generate_keypair(Cipher::EcdsaP384Sha384, &owner, ZSK_FLAGS, 2).unwrap();
        let ds = compute_ds(ksk.dnskey(), 2).unwrap();
        assert!(ds_matches(&ds, ksk.dnskey()));
        assert!(!ds_matches(&ds, zsk.dnskey()));
        assert_ne!(ds.digest, compute_ds(zsk.dnskey(), 2).unwrap().digest);
        assert_eq!(
            compute_ds(ksk.dnskey(), 99),
            Err(KeyforgeError::UnsupportedDigest(99))
        );
    }

    #[test]
    fn fabricated_ds_never_match_forged_keys() {
        let owner = name("sub-1.attack.er.");
        let keys = forge_colliding_set(
            Cipher::Ed25519,
            5353,
            40,
            &owner,
            KSK_FLAGS,
            3,
            ForgeMode::Patch,
        )
        .unwrap();
        let ds: Vec<_> = (0..40)
            .map(|i| fabricate_invalid_ds(&owner, 5353, 15, i, 3))
            .collect();
        let digests: HashSet<_> = ds.iter().map(|d| d.digest.clone()).collect();
        assert_eq!(digests.len(), 40);
        assert_eq!(fabricate_invalid_ds(&owner, 5353, 15, 0, 3), ds[0]);
        for d in &ds {
            for k in &keys {
                assert!(!ds_matches(d, k));
            }
        }
    }
}

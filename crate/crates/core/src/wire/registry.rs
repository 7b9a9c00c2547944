//! Cipher registry: per-algorithm key and signature field lengths, and the
//! theoretical packing maxima they imply for a single stream-transport
//! response.
//!
//! `pack_max` uses the minimal-fields message: a 12-byte header, a question
//! for the root name, an EDNS(0) OPT record, one partner record (one RRSIG
//! when counting DNSKEYs, one DNSKEY when counting RRSIGs), and then as many
//! records of the counted kind as fit in 65535 bytes. Every owner and signer
//! name is the root. RSA public keys carry exponent 65537 (a one-octet
//! exponent length, three exponent octets, then the modulus).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::message::{rtype, DnsMessage, Question, ResourceRecord};
use super::{message_size, DnsName, WireError, MAX_STREAM_MESSAGE};

/// Fixed part of RRSIG rdata before the signer name.
pub const RRSIG_FIXED_RDATA: usize = 18;
/// Flags, protocol and algorithm octets of DNSKEY rdata.
pub const DNSKEY_FIXED_RDATA: usize = 4;
/// RSA public-key prefix for exponent 65537: length octet plus three octets.
pub const RSA_EXPONENT_PREFIX: [u8; 4] = [3, 0x01, 0x00, 0x01];

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
    schemars::JsonSchema,
)]
pub enum Cipher {
    #[serde(rename = "ED448")]
    Ed448,
    #[serde(rename = "ED25519")]
    Ed25519,
    #[serde(rename = "ECDSAP384SHA384")]
    EcdsaP384Sha384,
    #[serde(rename = "ECDSAP256SHA256")]
    EcdsaP256Sha256,
    #[serde(rename = "RSA-512")]
    Rsa512,
    #[serde(rename = "RSA-1024")]
    Rsa1024,
    #[serde(rename = "RSA-2048")]
    Rsa2048,
    #[serde(rename = "RSA-4096")]
    Rsa4096,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Dnskey,
    Rrsig,
}

impl Cipher {
    pub const ALL: [Cipher; 8] = [
        Cipher::Ed448,
        Cipher::Ed25519,
        Cipher::EcdsaP384Sha384,
        Cipher::EcdsaP256Sha256,
        Cipher::Rsa512,
        Cipher::Rsa1024,
        Cipher::Rsa2048,
        Cipher::Rsa4096,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cipher::Ed448 => "ED448",
            Cipher::Ed25519 => "ED25519",
            Cipher::EcdsaP384Sha384 => "ECDSAP384SHA384",
            Cipher::EcdsaP256Sha256 => "ECDSAP256SHA256",
            Cipher::Rsa512 => "RSA-512",
            Cipher::Rsa1024 => "RSA-1024",
            Cipher::Rsa2048 => "RSA-2048",
            Cipher::Rsa4096 => "RSA-4096",
        }
    }

    /// IANA DNSSEC algorithm number. All RSA sizes map to RSASHA256.
    pub fn algorithm(self) -> u8 {
        match self {
            Cipher::Ed448 => 16,
            Cipher::Ed25519 => 15,
            Cipher::EcdsaP384Sha384 => 14,
            Cipher::EcdsaP256Sha256 => 13,
            Cipher::Rsa512 | Cipher::Rsa1024 | Cipher::Rsa2048 | Cipher::Rsa4096 => 8,
        }
    }

    fn rsa_modulus_bytes(self) -> Option<usize> {
        match self {
            Cipher::Rsa512 => Some(64),
            Cipher::Rsa1024 => Some(128),
            Cipher::Rsa2048 => Some(256),
            Cipher::Rsa4096 => Some(512),
            _ => None,
        }
    }

    pub fn public_key_len(self) -> usize {
        match self {
            Cipher::Ed448 => 57,
            Cipher::Ed25519 => 32,
            Cipher::EcdsaP384Sha384 => 96,
            Cipher::EcdsaP256Sha256 => 64,
            rsa => RSA_EXPONENT_PREFIX.len() + rsa.rsa_modulus_bytes().unwrap(),
        }
    }

    pub fn signature_len(self) -> usize {
        match self {
            Cipher::Ed448 => 114,
            Cipher::Ed25519 => 64,
            Cipher::EcdsaP384Sha384 => 96,
            Cipher::EcdsaP256Sha256 => 64,
            rsa => rsa.rsa_modulus_bytes().unwrap(),
        }
    }

    pub fn is_rsa(self) -> bool {
        self.rsa_modulus_bytes().is_some()
    }

    /// Whether this build can create and verify genuine signatures.
    pub fn has_signing_support(self) -> bool {
        matches!(
            self,
            Cipher::Ed25519 | Cipher::EcdsaP256Sha256 | Cipher::EcdsaP384Sha384
        )
    }

    /// Resolves an algorithm number. RSASHA256 resolves to the 2048-bit entry.
    pub fn from_algorithm(alg: u8) -> Result<Self, WireError> {
        match alg {
            16 => Ok(Cipher::Ed448),
            15 => Ok(Cipher::Ed25519),
            14 => Ok(Cipher::EcdsaP384Sha384),
            13 => Ok(Cipher::EcdsaP256Sha256),
            8 => Ok(Cipher::Rsa2048),
            other => Err(WireError::UnsupportedAlgorithm(other.to_string())),
        }
    }

    /// Resolves the registry entry matching an algorithm number and key length.
    pub fn for_key(alg: u8, key_len: usize) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.algorithm() == alg && c.public_key_len() == key_len)
    }

    /// Whether a signature of `len` octets is well-formed for algorithm `alg`.
    pub fn signature_len_ok(alg: u8, len: usize) -> bool {
        Self::ALL
            .into_iter()
            .any(|c| c.algorithm() == alg && c.signature_len() == len)
    }
}

impl fmt::Display for Cipher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cipher {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(n) = s.parse::<u8>() {
            return Self::from_algorithm(n);
        }
        let norm = s.to_ascii_uppercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|c| c.name() == norm || c.name().replace('-', "") == norm.replace('-', ""))
            .ok_or_else(|| WireError::UnsupportedAlgorithm(s.to_owned()))
    }
}

fn minimal_dnskey(cipher: Cipher) -> ResourceRecord {
    let mut rdata = vec![1, 0, 3, cipher.algorithm()];
    rdata.resize(DNSKEY_FIXED_RDATA + cipher.public_key_len(), 0);
    ResourceRecord::new(DnsName::root(), rtype::DNSKEY, 0, rdata)
}

fn minimal_rrsig(cipher: Cipher) -> ResourceRecord {
    // fixed fields + root signer name + signature
    let len = RRSIG_FIXED_RDATA + 1 + cipher.signature_len();
    ResourceRecord::new(DnsName::root(), rtype::RRSIG, 0, vec![0; len])
}

/// The minimal-fields response carrying `count` records of `kind`.
pub fn minimal_message(cipher: Cipher, kind: RecordKind, count: usize) -> DnsMessage {
    let (partner, record, qtype) = match kind {
        RecordKind::Dnskey => (minimal_rrsig(cipher), minimal_dnskey(cipher), rtype::DNSKEY),
        RecordKind::Rrsig => (minimal_dnskey(cipher), minimal_rrsig(cipher), rtype::A),
    };
    let mut answer = Vec::with_capacity(count + 1);
    answer.push(partner);
    answer.extend(std::iter::repeat_n(record, count));
    DnsMessage {
        questions: vec![Question::new(DnsName::root(), qtype)],
        answer,
        additional: vec![ResourceRecord::opt(u16::MAX)],
        ..Default::default()
    }
}

/// Theoretical maximum number of `kind` records of `cipher` fitting one
/// 65535-byte response under the minimal-fields assumption.
pub fn pack_max(cipher: Cipher, kind: RecordKind) -> usize {
    let base = message_size(&minimal_message(cipher, kind, 0));
    let per_record = message_size(&minimal_message(cipher, kind, 1)) - base;
    (MAX_STREAM_MESSAGE - base) / per_record
}

/// `pack_max(dnskey) * pack_max(rrsig)`: validations one response pair can force.
pub fn max_validations(cipher: Cipher) -> usize {
    pack_max(cipher, RecordKind::Dnskey) * pack_max(cipher, RecordKind::Rrsig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names_and_numbers() {
        assert_eq!("14".parse::<Cipher>().unwrap(), Cipher::EcdsaP384Sha384);
        assert_eq!("rsa-4096".parse::<Cipher>().unwrap(), Cipher::Rsa4096);
        assert_eq!("ed25519".parse::<Cipher>().unwrap(), Cipher::Ed25519);
        assert!(matches!(
            "99".parse::<Cipher>(),
            Err(WireError::UnsupportedAlgorithm(_))
        ));
        assert!(Cipher::from_algorithm(5).is_err());
    }

    #[test]
    fn dnskey_alg14_rdata_is_100_bytes() {
        assert_eq!(minimal_dnskey(Cipher::EcdsaP384Sha384).rdata.len(), 4 + 96);
    }

    #[test]
    fn ecdsa_p384_maxima() {
        assert_eq!(pack_max(Cipher::EcdsaP384Sha384, RecordKind::Dnskey), 589);
        assert_eq!(pack_max(Cipher::EcdsaP384Sha384, RecordKind::Rrsig), 519);
        assert_eq!(max_validations(Cipher::EcdsaP384Sha384), 305_691);
    }

    #[test]
    fn registry_lookup_by_key_len() {
        for c in Cipher::ALL {
            assert_eq!(Cipher::for_key(c.algorithm(), c.public_key_len()), Some(c));
        }
        assert_eq!(Cipher::for_key(14, 95), None);
    }
}

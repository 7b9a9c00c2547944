use serde::{Deserialize, Serialize};

use super::keytag::compute_keytag;
use crate::wire::{rtype, Cipher, DnsName, ResourceRecord, RrSet};

pub const FLAG_ZONE: u16 = 0x0100;
pub const FLAG_SEP: u16 = 0x0001;
pub const ZSK_FLAGS: u16 = FLAG_ZONE;
pub const KSK_FLAGS: u16 = FLAG_ZONE | FLAG_SEP;
pub const DNSSEC_PROTOCOL: u8 = 3;
pub const DIGEST_SHA256: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DnskeyRecord {
    pub owner: DnsName,
    pub ttl: u32,
    pub flags: u16,
    pub protocol: u8,
    pub algorithm: u8,
    #[serde(with = "crate::serde_util::base64_bytes")]
    pub public_key: Vec<u8>,
}

impl DnskeyRecord {
    pub fn rdata(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.public_key.len());
        out.extend_from_slice(&self.flags.to_be_bytes());
        out.push(self.protocol);
        out.push(self.algorithm);
        out.extend_from_slice(&self.public_key);
        out
    }

    pub fn from_rdata(owner: DnsName, ttl: u32, rdata: &[u8]) -> Option<Self> {
        if rdata.len() < 4 {
            return None;
        }
        Some(Self {
            owner,
            ttl,
            flags: u16::from_be_bytes([rdata[0], rdata[1]]),
            protocol: rdata[2],
            algorithm: rdata[3],
            public_key: rdata[4..].to_vec(),
        })
    }

    pub fn key_tag(&self) -> u16 {
        compute_keytag(&self.rdata())
    }

    pub fn is_ksk(&self) -> bool {
        self.flags & FLAG_SEP != 0
    }

    /// Protocol is 3 and the key length matches the registry.
    pub fn is_well_formed(&self) -> bool {
        self.protocol == DNSSEC_PROTOCOL
            && Cipher::for_key(self.algorithm, self.public_key.len()).is_some()
    }

    pub fn to_record(&self) -> ResourceRecord {
        ResourceRecord::new(self.owner.clone(), rtype::DNSKEY, self.ttl, self.rdata())
    }
}

/// DNSKEY records as an rrset, in the given order.
pub fn dnskey_rrset(keys: &[DnskeyRecord]) -> Option<RrSet> {
    let first = keys.first()?;
    Some(RrSet::new(
        first.owner.clone(),
        rtype::DNSKEY,
        first.ttl,
        keys.iter().map(DnskeyRecord::rdata).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RrsigRecord {
    pub owner: DnsName,
    pub ttl: u32,
    pub type_covered: u16,
    pub algorithm: u8,
    pub labels: u8,
    pub original_ttl: u32,
    pub expiration: u32,
    pub inception: u32,
    pub key_tag: u16,
    pub signer_name: DnsName,
    #[serde(with = "crate::serde_util::base64_bytes")]
    pub signature: Vec<u8>,
}

impl RrsigRecord {
    /// Rdata up to and including the signer name, with the signer name in
    /// canonical (lower-case) form. This is the RRSIG prefix of the signed data.
    pub fn rdata_prefix(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + self.signer_name.wire_len());
        out.extend_from_slice(&self.type_covered.to_be_bytes());
        out.push(self.algorithm);
        out.push(self.labels);
        out.extend_from_slice(&self.original_ttl.to_be_bytes());
        out.extend_from_slice(&self.expiration.to_be_bytes());
        out.extend_from_slice(&self.inception.to_be_bytes());
        out.extend_from_slice(&self.key_tag.to_be_bytes());
        out.extend_from_slice(&self.signer_name.canonical_wire());
        out
    }

    pub fn rdata(&self) -> Vec<u8> {
        let mut out = self.rdata_prefix();
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn to_record(&self) -> ResourceRecord {
        ResourceRecord::new(self.owner.clone(), rtype::RRSIG, self.ttl, self.rdata())
    }

    /// The (signer, algorithm, key tag) triple used to pick candidate keys.
    pub fn triple(&self) -> (&DnsName, u8, u16) {
        (&self.signer_name, self.algorithm, self.key_tag)
    }

    pub fn is_well_formed(&self) -> bool {
        self.inception < self.expiration
            && Cipher::signature_len_ok(self.algorithm, self.signature.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DsRecord {
    pub owner: DnsName,
    pub ttl: u32,
    pub key_tag: u16,
    pub algorithm: u8,
    pub digest_type: u8,
    #[serde(with = "crate::serde_util::hex_bytes")]
    pub digest: Vec<u8>,
}

impl DsRecord {
    pub fn rdata(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.digest.len());
        out.extend_from_slice(&self.key_tag.to_be_bytes());
        out.push(self.algorithm);
        out.push(self.digest_type);
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn from_rdata(owner: DnsName, ttl: u32, rdata: &[u8]) -> Option<Self> {
        if rdata.len() < 4 {
            return None;
        }
        Some(Self {
            owner,
            ttl,
            key_tag: u16::from_be_bytes([rdata[0], rdata[1]]),
            algorithm: rdata[2],
            digest_type: rdata[3],
            digest: rdata[4..].to_vec(),
        })
    }

    pub fn to_record(&self) -> ResourceRecord {
        ResourceRecord::new(self.owner.clone(), rtype::DS, self.ttl, self.rdata())
    }
}

pub fn ds_rrset(records: &[DsRecord]) -> Option<RrSet> {
    let first = records.first()?;
    Some(RrSet::new(
        first.owner.clone(),
        rtype::DS,
        first.ttl,
        records.iter().map(DsRecord::rdata).collect(),
    ))
}

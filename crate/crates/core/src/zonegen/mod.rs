//! Zone and zone-graph construction for the benign baseline and each attack
//! vector, plus presentation-format zonefiles.
//!
//! Every graph has the same shape: a parent zone (`er.` by default) holding
//! the trust anchor, and the attacker zone (`attack.er.`) delegated from it.
//! HashTrap adds `sub-N.attack.er.` children below the attacker zone. The
//! chain down to the attack payload always validates; only the final stage
//! carries colliding keys, invalid signatures or invalid digests.

mod build;
mod fit;
mod zonefile;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::keyforge::{
    dnskey_rrset, signed_data, DnskeyRecord, DsRecord, ForgeMode, KeyforgeError, RrsigRecord,
    SigUniqueness,
};
use crate::wire::{rtype, Cipher, DnsName, RrSet, WireError};

pub use build::{
    build, build_anytype_zone, build_benign_zone, build_hashtrap_zone, build_keysigtrap_zone,
    build_lockcram_zone, build_sigjam_zone, unallocated_type,
};
pub use fit::{check_fit, lint, responses, FitError, FitReport, Response, ResponseSize};
pub use zonefile::{dnskey_presentation, emit_zonefile, parse_zonefile, type_name, ZonefileError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZonegenError {
    #[error("invalid attack spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Keyforge(#[from] KeyforgeError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, schemars::JsonSchema,
)]
#[serde(rename_all = "lowercase")]
pub enum Vector {
    #[default]
    Benign,
    Sigjam,
    Lockcram,
    Keysigtrap,
    Hashtrap,
    Anytype,
}

impl Vector {
    pub const ALL: [Vector; 6] = [
        Vector::Benign,
        Vector::Sigjam,
        Vector::Lockcram,
        Vector::Keysigtrap,
        Vector::Hashtrap,
        Vector::Anytype,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Vector::Benign => "benign",
            Vector::Sigjam => "sigjam",
            Vector::Lockcram => "lockcram",
            Vector::Keysigtrap => "keysigtrap",
            Vector::Hashtrap => "hashtrap",
            Vector::Anytype => "anytype",
        }
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == norm || (norm == "any" && *v == Vector::Anytype))
            .ok_or_else(|| format!("unknown vector {s:?}"))
    }
}

/// Parameters for one generated zone graph.
///
/// Counts that the chosen vector does not use are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct AttackVectorSpec {
    pub vector: Vector,
    /// Algorithm of the colliding keys and attack signatures.
    pub algorithm: Cipher,
    /// Algorithm of the genuine chain keys. Defaults to `algorithm` when it
    /// can sign, otherwise ECDSAP256SHA256.
    pub chain_algorithm: Option<Cipher>,
    #[serde(alias = "k")]
    pub key_count: usize,
    #[serde(alias = "s")]
    pub sig_count: usize,
    #[serde(alias = "d")]
    pub ds_count: usize,
    pub rrset_count: usize,
    pub subzone_count: usize,
    /// Key tag shared by every colliding key.
    pub colliding_tag: u16,
    pub seed: u64,
    pub parent_apex: DnsName,
    pub apex: DnsName,
    /// Query name. Defaults to `www-x.<apex>`, or `www.sub-1.<apex>` for HashTrap.
    pub qname: Option<DnsName>,
    pub ttl: u32,
    pub inception: u32,
    pub expiration: u32,
    pub forge_mode: ForgeMode,
    pub sig_uniqueness: SigUniqueness,
}

pub const DEFAULT_INCEPTION: u32 = 1_700_000_000;
pub const DEFAULT_EXPIRATION: u32 = DEFAULT_INCEPTION + 30 * 86_400;

impl Default for AttackVectorSpec {
    fn default() -> Self {
        Self {
            vector: Vector::Benign,
            algorithm: Cipher::EcdsaP384Sha384,
            chain_algorithm: None,
            key_count: 1,
            sig_count: 1,
            ds_count: 1,
            rrset_count: 1,
            subzone_count: 1,
            colliding_tag: 5353,
            seed: 1,
            parent_apex: "er.".parse().unwrap(),
            apex: "attack.er.".parse().unwrap(),
            qname: None,
            ttl: crate::keyforge::DEFAULT_TTL,
            inception: DEFAULT_INCEPTION,
            expiration: DEFAULT_EXPIRATION,
            forge_mode: ForgeMode::Patch,
            sig_uniqueness: SigUniqueness::RandomSignature,
        }
    }
}

impl AttackVectorSpec {
    pub fn new(vector: Vector) -> Self {
        Self {
            vector,
            ..Self::default()
        }
    }

    pub fn sigjam(algorithm: Cipher, s: usize) -> Self {
        Self {
            algorithm,
            sig_count: s,
            ..Self::new(Vector::Sigjam)
        }
    }

    pub fn lockcram(algorithm: Cipher, k: usize) -> Self {
        Self {
            algorithm,
            key_count: k,
            ..Self::new(Vector::Lockcram)
        }
    }

    pub fn keysigtrap(algorithm: Cipher, k: usize, s: usize) -> Self {
        Self {
            algorithm,
            key_count: k,
            sig_count: s,
            ..Self::new(Vector::Keysigtrap)
        }
    }

    pub fn hashtrap(algorithm: Cipher, d: usize, k: usize) -> Self {
        Self {
            algorithm,
            ds_count: d,
            key_count: k,
            ..Self::new(Vector::Hashtrap)
        }
    }

    pub fn anytype(rrset_count: usize) -> Self {
        Self {
            rrset_count,
            ..Self::new(Vector::Anytype)
        }
    }

    pub fn chain_cipher(&self) -> Cipher {
        match self.chain_algorithm {
            Some(c) => c,
            None if self.algorithm.has_signing_support() => self.algorithm,
            None => Cipher::EcdsaP256Sha256,
        }
    }

    pub fn query_name(&self) -> Result<DnsName, WireError> {
        match &self.qname {
            Some(q) => Ok(q.clone()),
            None if self.vector == Vector::Hashtrap => {
                self.apex.prepend("sub-1")?.prepend("www")
            }
            None => self.apex.prepend("www-x"),
        }
    }

    pub fn query_type(&self) -> u16 {
        if self.vector == Vector::Anytype {
            rtype::ANY
        } else {
            rtype::A
        }
    }

    pub fn validate(&self) -> Result<(), ZonegenError> {
        let bad = |m: &str| Err(ZonegenError::InvalidSpec(m.to_owned()));
        let needs = |n: usize, what: &str| {
            if n == 0 {
                Err(ZonegenError::InvalidSpec(format!("{what} must be at least 1")))
            } else {
                Ok(())
            }
        };
        match self.vector {
            Vector::Benign => {}
            Vector::Sigjam => needs(self.sig_count, "sig_count")?,
            Vector::Lockcram => needs(self.key_count, "key_count")?,
            Vector::Keysigtrap => {
                needs(self.key_count, "key_count")?;
                needs(self.sig_count, "sig_count")?;
            }
            Vector::Hashtrap => {
                needs(self.ds_count, "ds_count")?;
                needs(self.key_count, "key_count")?;
                needs(self.subzone_count, "subzone_count")?;
            }
            Vector::Anytype => needs(self.rrset_count, "rrset_count")?,
        }
        if !self.chain_cipher().has_signing_support() {
            return bad("chain_algorithm has no signing support in this build");
        }
        if self.inception >= self.expiration {
            return bad("inception must precede expiration");
        }
        if !self.apex.is_subdomain_of(&self.parent_apex) || self.apex == self.parent_apex {
            return bad("apex must lie below parent_apex");
        }
        let qname = self.query_name()?;
        if !qname.is_subdomain_of(&self.apex) {
            return bad("qname must lie at or below apex");
        }
        Ok(())
    }
}

/// Pairs of (signature, key) that verify, recorded at generation time.
///
/// Lets the validator run without cryptography while producing the same
/// outcome as real verification. Fingerprints cover the signed data, so a
/// tampered rrset no longer matches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub valid: BTreeSet<(u64, u64)>,
}

fn fp8(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().unwrap())
}

impl GroundTruth {
    pub fn signature_fingerprint(rrsig: &RrsigRecord, rrset: &RrSet) -> u64 {
        fp8(&[&signed_data(rrsig, rrset), &rrsig.signature])
    }

    pub fn key_fingerprint(key: &DnskeyRecord) -> u64 {
        fp8(&[&key.owner.canonical_wire(), &key.rdata()])
    }

    pub fn insert(&mut self, rrsig: &RrsigRecord, rrset: &RrSet, key: &DnskeyRecord) {
        self.valid.insert((
            Self::signature_fingerprint(rrsig, rrset),
            Self::key_fingerprint(key),
        ));
    }

    pub fn is_valid(&self, sig_fp: u64, key_fp: u64) -> bool {
        self.valid.contains(&(sig_fp, key_fp))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub apex: DnsName,
    pub dnskeys: Vec<DnskeyRecord>,
    #[serde(with = "crate::serde_util::map_as_pairs")]
    pub rrsets: BTreeMap<(DnsName, u16), RrSet>,
    /// Signatures keyed by (owner, type covered). DNSKEY signatures sit under
    /// the apex; signatures over a child's DS set sit under the child apex.
    #[serde(with = "crate::serde_util::map_as_pairs")]
    pub rrsigs: BTreeMap<(DnsName, u16), Vec<RrsigRecord>>,
    pub ds_for_children: BTreeMap<DnsName, Vec<DsRecord>>,
}

impl Zone {
    pub fn new(apex: DnsName) -> Self {
        Self {
            apex,
            dnskeys: Vec::new(),
            rrsets: BTreeMap::new(),
            rrsigs: BTreeMap::new(),
            ds_for_children: BTreeMap::new(),
        }
    }

    pub fn dnskey_rrset(&self) -> Option<RrSet> {
        dnskey_rrset(&self.dnskeys)
    }

    pub fn signatures(&self, owner: &DnsName, covered: u16) -> &[RrsigRecord] {
        self.rrsigs
            .get(&(owner.clone(), covered))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All rrsets owned by `name`, in type order.
    pub fn rrsets_at<'a>(&'a self, name: &'a DnsName) -> impl Iterator<Item = &'a RrSet> + 'a {
        self.rrsets
            .range((name.clone(), 0)..=(name.clone(), u16::MAX))
            .map(|(_, set)| set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrustAnchor {
    Ds { records: Vec<DsRecord> },
    Dnskey { records: Vec<DnskeyRecord> },
}

impl TrustAnchor {
    pub fn owner(&self) -> Option<&DnsName> {
        match self {
            TrustAnchor::Ds { records } => records.first().map(|r| &r.owner),
            TrustAnchor::Dnskey { records } => records.first().map(|r| &r.owner),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub qname: DnsName,
    pub qtype: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneGraph {
    pub zones: BTreeMap<DnsName, Zone>,
    pub trust_anchor: TrustAnchor,
    pub query: Query,
    #[serde(default)]
    pub ground_truth: GroundTruth,
    #[serde(default)]
    pub spec: Option<AttackVectorSpec>,
}

impl ZoneGraph {
    /// Zones on the path from the trust anchor down to `name`, top first.
    pub fn chain_to(&self, name: &DnsName) -> Vec<&Zone> {
        let mut chain: Vec<&Zone> = self
            .zones
            .values()
            .filter(|z| name.is_subdomain_of(&z.apex))
            .collect();
        chain.sort_by_key(|z| z.apex.label_count());
        chain
    }

    /// The closest enclosing zone of `apex` other than itself.
    pub fn parent_of(&self, apex: &DnsName) -> Option<&Zone> {
        self.zones
            .values()
            .filter(|z| z.apex != *apex && apex.is_subdomain_of(&z.apex))
            .max_by_key(|z| z.apex.label_count())
    }

    pub fn zone_mut(&mut self, apex: &DnsName) -> Option<&mut Zone> {
        self.zones.get_mut(apex)
    }
}

/// Deterministic per-role seed derived from `AttackVectorSpec::seed`.
pub(crate) fn derive_seed(seed: u64, role: &str) -> u64 {
    fp8(&[&seed.to_be_bytes(), role.as_bytes()])
}

//! Response assembly, the 65535-byte fit check, and the structural linter.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{TrustAnchor, Zone, ZoneGraph};
use crate::keyforge::{dnskey_rrset, ds_rrset, RrsigRecord};
use crate::wire::{
    message_size, pack_max, rtype, Cipher, DnsMessage, DnsName, Question, RecordKind,
    ResourceRecord, RrSet, MAX_STREAM_MESSAGE,
};

/// One authoritative response the attacker's server would send.
#[derive(Debug, Clone)]
pub struct Response {
    pub label: String,
    pub message: DnsMessage,
    /// Name of the record type whose count dominates the response.
    pub payload: &'static str,
    /// Number of payload items. Removing one item removes `per_item` records
    /// from the end of the answer section.
    pub payload_count: usize,
    per_item: usize,
    cipher: Option<(Cipher, RecordKind)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSize {
    pub label: String,
    pub payload: String,
    pub payload_count: usize,
    pub size: usize,
    pub limit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitReport {
    pub responses: Vec<ResponseSize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct FitError {
    pub response: String,
    pub payload: String,
    pub count: usize,
    pub size: usize,
    /// Largest count that fits with the zone's actual names.
    pub max_fit: usize,
    /// Minimal-fields bound for the algorithm, where one exists.
    pub pack_max: Option<usize>,
    pub cipher: Option<Cipher>,
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} {} records need {} bytes, over the {}-byte limit; at most {} fit with these names",
            self.response, self.count, self.payload, self.size, MAX_STREAM_MESSAGE, self.max_fit
        )?;
        if let (Some(max), Some(c)) = (self.pack_max, self.cipher) {
            write!(f, " (theoretical maximum {max} for {c})")?;
        }
        Ok(())
    }
}

fn message(qname: &DnsName, qtype: u16, answer: Vec<ResourceRecord>) -> DnsMessage {
    DnsMessage {
        id: 0,
        flags: 0x8400,
        questions: vec![Question::new(qname.clone(), qtype)],
        answer,
        authority: Vec::new(),
        additional: vec![ResourceRecord::opt(u16::MAX)],
    }
}

fn sig_records(sigs: &[RrsigRecord]) -> impl Iterator<Item = ResourceRecord> + '_ {
    sigs.iter().map(RrsigRecord::to_record)
}

fn sig_cipher(sigs: &[RrsigRecord]) -> Option<Cipher> {
    let s = sigs.last()?;
    Cipher::ALL
        .into_iter()
        .find(|c| c.algorithm() == s.algorithm && c.signature_len() == s.signature.len())
}

fn dnskey_response(zone: &Zone) -> Option<Response> {
    let set = zone.dnskey_rrset()?;
    let sigs = zone.signatures(&zone.apex, rtype::DNSKEY);
    // signatures first so the key records form the removable tail
    let mut answer: Vec<_> = sig_records(sigs).collect();
    answer.extend(set.records());
    let cipher = zone
        .dnskeys
        .last()
        .and_then(|k| Cipher::for_key(k.algorithm, k.public_key.len()));
    Some(Response {
        label: format!("{} DNSKEY", zone.apex),
        message: message(&zone.apex, rtype::DNSKEY, answer),
        payload: "DNSKEY",
        payload_count: zone.dnskeys.len(),
        per_item: 1,
        cipher: cipher.map(|c| (c, RecordKind::Dnskey)),
    })
}

fn ds_response(parent: &Zone, child: &DnsName) -> Option<Response> {
    let ds = parent.ds_for_children.get(child)?;
    let set = ds_rrset(ds)?;
    let mut answer: Vec<_> = sig_records(parent.signatures(child, rtype::DS)).collect();
    answer.extend(set.records());
    Some(Response {
        label: format!("{child} DS"),
        message: message(child, rtype::DS, answer),
        payload: "DS",
        payload_count: ds.len(),
        per_item: 1,
        cipher: None,
    })
}

fn answer_response(graph: &ZoneGraph) -> Option<Response> {
    let q = &graph.query;
    let zone = *graph.chain_to(&q.qname).last()?;
    if q.qtype == rtype::ANY {
        let sets: Vec<&RrSet> = zone.rrsets_at(&q.qname).collect();
        let mut answer = Vec::new();
        for set in &sets {
            answer.extend(set.records());
            answer.extend(sig_records(zone.signatures(&set.owner, set.rtype)));
        }
        let per_item = sets
            .last()
            .map(|s| s.rdatas.len() + zone.signatures(&s.owner, s.rtype).len())
            .unwrap_or(1);
        return Some(Response {
            label: format!("{} ANY", q.qname),
            message: message(&q.qname, q.qtype, answer),
            payload: "rrset",
            payload_count: sets.len(),
            per_item,
            cipher: None,
        });
    }
    let set = zone.rrsets.get(&(q.qname.clone(), q.qtype))?;
    let sigs = zone.signatures(&q.qname, q.qtype);
    let mut answer: Vec<_> = set.records().collect();
    answer.extend(sig_records(sigs));
    Some(Response {
        label: format!("{} {}", q.qname, super::type_name(q.qtype)),
        message: message(&q.qname, q.qtype, answer),
        payload: "RRSIG",
        payload_count: sigs.len(),
        per_item: 1,
        cipher: sig_cipher(sigs).map(|c| (c, RecordKind::Rrsig)),
    })
}

/// Every response involved in resolving the graph's query: each zone's
/// DNSKEY set, each delegation's DS set, and the answer.
pub fn responses(graph: &ZoneGraph) -> Vec<Response> {
    let mut out = Vec::new();
    for zone in graph.zones.values() {
        out.extend(dnskey_response(zone));
        for child in zone.ds_for_children.keys() {
            out.extend(ds_response(zone, child));
        }
    }
    out.extend(answer_response(graph));
    out
}

fn fit_error(r: &Response, size: usize) -> FitError {
    // all payload items share one size, so the marginal cost of the last
    // item is the cost of every item past the first
    let mut shorter = r.message.clone();
    let keep = shorter.answer.len().saturating_sub(r.per_item);
    shorter.answer.truncate(keep);
    let unit = (size - message_size(&shorter)).max(1);
    let excess = size - MAX_STREAM_MESSAGE;
    let max_fit = r.payload_count.saturating_sub(excess.div_ceil(unit));
    FitError {
        response: r.label.clone(),
        payload: r.payload.to_owned(),
        count: r.payload_count,
        size,
        max_fit,
        pack_max: r.cipher.map(|(c, kind)| pack_max(c, kind)),
        cipher: r.cipher.map(|(c, _)| c),
    }
}

/// Checks that every response fits one stream-transport message.
pub fn check_fit(graph: &ZoneGraph) -> Result<FitReport, FitError> {
    let mut report = FitReport {
        responses: Vec::new(),
    };
    for r in responses(graph) {
        let size = message_size(&r.message);
        if size > MAX_STREAM_MESSAGE {
            return Err(fit_error(&r, size));
        }
        report.responses.push(ResponseSize {
            label: r.label,
            payload: r.payload.to_owned(),
            payload_count: r.payload_count,
            size,
            limit: MAX_STREAM_MESSAGE,
        });
    }
    Ok(report)
}

/// Structural problems in a graph, as human-readable strings. Empty when the
/// graph is well formed.
pub fn lint(graph: &ZoneGraph) -> Vec<String> {
    let mut issues = Vec::new();
    match graph.trust_anchor.owner() {
        Some(owner) if graph.zones.contains_key(owner) => {}
        Some(owner) => issues.push(format!("trust anchor {owner} names no zone in the graph")),
        None => issues.push("trust anchor is empty".to_owned()),
    }
    if let TrustAnchor::Ds { records } = &graph.trust_anchor {
        if let Some(zone) = graph.trust_anchor.owner().and_then(|o| graph.zones.get(o)) {
            let anchored = records.iter().any(|ds| {
                zone.dnskeys
                    .iter()
                    .any(|k| crate::keyforge::ds_matches(ds, k))
            });
            if !anchored {
                issues.push(format!("trust anchor matches no DNSKEY of {}", zone.apex));
            }
        }
    }
    let anchor_owner = graph.trust_anchor.owner();
    for (apex, zone) in &graph.zones {
        if zone.apex != *apex {
            issues.push(format!("zone keyed {apex} has apex {}", zone.apex));
        }
        if let Some(k) = zone.dnskeys.iter().find(|k| k.owner != zone.apex) {
            issues.push(format!("{}: DNSKEY owned by {}", zone.apex, k.owner));
        }
        if dnskey_rrset(&zone.dnskeys).is_some() && zone.signatures(apex, rtype::DNSKEY).is_empty()
        {
            issues.push(format!("{apex}: DNSKEY set unsigned"));
        }
        for (owner, t) in zone.rrsets.keys() {
            if zone.signatures(owner, *t).is_empty() {
                issues.push(format!("{owner} {}: rrset unsigned", super::type_name(*t)));
            }
            if !owner.is_subdomain_of(apex) {
                issues.push(format!("{owner}: out of zone {apex}"));
            }
        }
        for ((owner, t), sigs) in &zone.rrsigs {
            for s in sigs {
                if s.signer_name != *apex {
                    issues.push(format!(
                        "{owner} {}: signer {} is not {apex}",
                        super::type_name(*t),
                        s.signer_name
                    ));
                } else if !zone
                    .dnskeys
                    .iter()
                    .any(|k| k.algorithm == s.algorithm && k.key_tag() == s.key_tag)
                {
                    issues.push(format!(
                        "{owner} {}: triple ({}, {}, {}) matches no key",
                        super::type_name(*t),
                        s.signer_name,
                        s.algorithm,
                        s.key_tag
                    ));
                }
            }
        }
        if Some(apex) != anchor_owner {
            match graph.parent_of(apex) {
                Some(p) if p.ds_for_children.contains_key(apex) => {}
                Some(p) => issues.push(format!("{apex}: no DS in parent {}", p.apex)),
                None => issues.push(format!("{apex}: no parent zone and not anchored")),
            }
        }
    }
    if graph.chain_to(&graph.query.qname).is_empty() {
        issues.push(format!("query name {} lies in no zone", graph.query.qname));
    }
    if let Err(e) = check_fit(graph) {
        issues.push(e.to_string());
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zonegen::{build, AttackVectorSpec, ZonegenError};

    #[test]
    fn flagship_keysigtrap_fits() {
        let g = build(&AttackVectorSpec::keysigtrap(Cipher::EcdsaP384Sha384, 582, 340)).unwrap();
        let report = check_fit(&g).unwrap();
        assert!(report.responses.iter().all(|r| r.size <= MAX_STREAM_MESSAGE));
    }

    #[test]
    fn oversized_lockcram_names_both_bounds() {
        let err = build(&AttackVectorSpec::lockcram(Cipher::EcdsaP384Sha384, 600)).unwrap_err();
        let ZonegenError::Fit(e) = err else {
            panic!("{err:?}")
        };
        assert_eq!(e.payload, "DNSKEY");
        assert_eq!(e.pack_max, Some(589));
        // the attacker zone also carries its KSK, so 582 colliding keys fit
        assert_eq!(e.max_fit, 583);
        assert!(e.to_string().contains("589"));
    }

    #[test]
    fn oversized_sigjam() {
        let err = build(&AttackVectorSpec::sigjam(Cipher::EcdsaP384Sha384, 520)).unwrap_err();
        let ZonegenError::Fit(e) = err else {
            panic!("{err:?}")
        };
        assert_eq!(e.pack_max, Some(519));
        assert!(e.max_fit < 519);
    }
}

//! Presentation-format zonefiles. Owner names are always written absolute,
//! one record per line; unknown types use the RFC 3597 `\#` form.

use std::fmt::Write as _;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::Zone;
use crate::keyforge::{DnskeyRecord, DsRecord, RrsigRecord};
use crate::wire::{rtype, DnsName, RrSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ZonefileError {
    pub line: usize,
    pub message: String,
}

const NAMED_TYPES: [(u16, &str); 6] = [
    (rtype::A, "A"),
    (rtype::NS, "NS"),
    (rtype::AAAA, "AAAA"),
    (rtype::DS, "DS"),
    (rtype::RRSIG, "RRSIG"),
    (rtype::DNSKEY, "DNSKEY"),
];

pub fn type_name(t: u16) -> String {
    match t {
        rtype::ANY => "ANY".to_owned(),
        _ => NAMED_TYPES
            .iter()
            .find(|(code, _)| *code == t)
            .map(|(_, n)| (*n).to_owned())
            .unwrap_or_else(|| format!("TYPE{t}")),
    }
}

fn parse_type(s: &str) -> Option<u16> {
    let up = s.to_ascii_uppercase();
    if let Some(n) = up.strip_prefix("TYPE") {
        return n.parse().ok();
    }
    if up == "ANY" {
        return Some(rtype::ANY);
    }
    NAMED_TYPES.iter().find(|(_, n)| *n == up).map(|(c, _)| *c)
}

/// One DNSKEY in presentation format, without a trailing newline.
pub fn dnskey_presentation(k: &DnskeyRecord) -> String {
    let mut line = String::new();
    dnskey_line(&mut line, k);
    line.pop();
    line
}

fn dnskey_line(out: &mut String, k: &DnskeyRecord) {
    let _ = writeln!(
        out,
        "{} {} IN DNSKEY {} {} {} {}",
        k.owner,
        k.ttl,
        k.flags,
        k.protocol,
        k.algorithm,
        STANDARD.encode(&k.public_key)
    );
}

fn rrsig_line(out: &mut String, s: &RrsigRecord) {
    let _ = writeln!(
        out,
        "{} {} IN RRSIG {} {} {} {} {} {} {} {} {}",
        s.owner,
        s.ttl,
        type_name(s.type_covered),
        s.algorithm,
        s.labels,
        s.original_ttl,
        s.expiration,
        s.inception,
        s.key_tag,
        s.signer_name,
        STANDARD.encode(&s.signature)
    );
}

fn ds_line(out: &mut String, d: &DsRecord) {
    let _ = writeln!(
        out,
        "{} {} IN DS {} {} {} {}",
        d.owner,
        d.ttl,
        d.key_tag,
        d.algorithm,
        d.digest_type,
        hex::encode_upper(&d.digest)
    );
}

fn rdata_text(t: u16, rd: &[u8]) -> String {
    if t == rtype::A && rd.len() == 4 {
        return format!("{}.{}.{}.{}", rd[0], rd[1], rd[2], rd[3]);
    }
    if rd.is_empty() {
        return "\\# 0".to_owned();
    }
    format!("\\# {} {}", rd.len(), hex::encode(rd))
}

/// Presentation-format text for `zone`.
pub fn emit_zonefile(zone: &Zone) -> String {
    let mut out = format!("$ORIGIN {}\n", zone.apex);
    for k in &zone.dnskeys {
        dnskey_line(&mut out, k);
    }
    for s in zone.signatures(&zone.apex, rtype::DNSKEY) {
        rrsig_line(&mut out, s);
    }
    for ((owner, t), set) in &zone.rrsets {
        for rd in &set.rdatas {
            let _ = writeln!(
                out,
                "{} {} IN {} {}",
                owner,
                set.ttl,
                type_name(*t),
                rdata_text(*t, rd)
            );
        }
        for s in zone.signatures(owner, *t) {
            rrsig_line(&mut out, s);
        }
    }
    for (child, ds) in &zone.ds_for_children {
        for d in ds {
            ds_line(&mut out, d);
        }
        for s in zone.signatures(child, rtype::DS) {
            rrsig_line(&mut out, s);
        }
    }
    // signatures whose rrset is not held as data (none in generated zones)
    for ((owner, t), sigs) in &zone.rrsigs {
        let listed = (*t == rtype::DNSKEY && *owner == zone.apex)
            || zone.rrsets.contains_key(&(owner.clone(), *t))
            || (*t == rtype::DS && zone.ds_for_children.contains_key(owner));
        if !listed {
            for s in sigs {
                rrsig_line(&mut out, s);
            }
        }
    }
    out
}

struct Line<'a> {
    no: usize,
    fields: Vec<&'a str>,
    pos: usize,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> ZonefileError {
        ZonefileError {
            line: self.no,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str, ZonefileError> {
        let f = self
            .fields
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(format!("missing {what}")))?;
        self.pos += 1;
        Ok(f)
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ZonefileError> {
        let f = self.next(what)?;
        f.parse().map_err(|_| self.err(format!("bad {what} {f:?}")))
    }

    fn name(&mut self, origin: &DnsName, what: &str) -> Result<DnsName, ZonefileError> {
        let f = self.next(what)?;
        absolute(f, origin).map_err(|e| self.err(format!("bad {what} {f:?}: {e}")))
    }

    fn rest(&mut self) -> String {
        let s = self.fields[self.pos.min(self.fields.len())..].concat();
        self.pos = self.fields.len();
        s
    }

    fn done(&self) -> Result<(), ZonefileError> {
        match self.fields.get(self.pos) {
            Some(extra) => Err(self.err(format!("unexpected {extra:?}"))),
            None => Ok(()),
        }
    }
}

fn absolute(s: &str, origin: &DnsName) -> Result<DnsName, crate::wire::WireError> {
    if s == "@" {
        return Ok(origin.clone());
    }
    if s.ends_with('.') {
        return s.parse();
    }
    let rel: DnsName = s.parse()?;
    DnsName::from_labels(rel.labels().iter().chain(origin.labels()).cloned())
}

fn base64_field(line: &mut Line) -> Result<Vec<u8>, ZonefileError> {
    let text = line.rest();
    STANDARD
        .decode(text.as_bytes())
        .map_err(|e| line.err(format!("bad base64: {e}")))
}

fn generic_rdata(line: &mut Line, t: u16) -> Result<Vec<u8>, ZonefileError> {
    let first = line.next("rdata")?;
    if first == "\\#" {
        let len: usize = line.num("rdata length")?;
        let hex_text = line.rest();
        let bytes = hex::decode(&hex_text).map_err(|e| line.err(format!("bad hex: {e}")))?;
        if bytes.len() != len {
            return Err(line.err(format!("rdata length {len} but {} octets", bytes.len())));
        }
        return Ok(bytes);
    }
    if t == rtype::A {
        let octets: Result<Vec<u8>, _> = first.split('.').map(str::parse).collect();
        match octets {
            Ok(o) if o.len() == 4 => return Ok(o),
            _ => return Err(line.err(format!("bad address {first:?}"))),
        }
    }
    Err(line.err(format!("no presentation parser for {}", type_name(t))))
}

/// Parses text produced by [`emit_zonefile`] (or hand-written text in the
/// same subset) back into a zone. A `$ORIGIN` line must precede records.
pub fn parse_zonefile(text: &str) -> Result<Zone, ZonefileError> {
    let mut zone: Option<Zone> = None;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut line = Line {
            no,
            fields: content.split_whitespace().collect(),
            pos: 0,
        };
        if line.fields[0].eq_ignore_ascii_case("$ORIGIN") {
            line.pos = 1;
            let origin = line.name(&DnsName::root(), "origin")?;
            line.done()?;
            match &zone {
                None => zone = Some(Zone::new(origin)),
                Some(z) if z.apex == origin => {}
                Some(_) => return Err(line.err("a zonefile holds one origin")),
            }
            continue;
        }
        let z = zone
            .as_mut()
            .ok_or_else(|| line.err("record before $ORIGIN"))?;
        let origin = z.apex.clone();
        let owner = line.name(&origin, "owner")?;
        let ttl: u32 = line.num("ttl")?;
        let class = line.next("class")?;
        if !class.eq_ignore_ascii_case("IN") {
            return Err(line.err(format!("unsupported class {class}")));
        }
        let tname = line.next("type")?;
        let t = parse_type(tname).ok_or_else(|| line.err(format!("unknown type {tname}")))?;
        match t {
            rtype::DNSKEY => {
                let flags = line.num("flags")?;
                let protocol = line.num("protocol")?;
                let algorithm = line.num("algorithm")?;
                let public_key = base64_field(&mut line)?;
                if owner != origin {
                    return Err(line.err("DNSKEY owner must be the origin"));
                }
                z.dnskeys.push(DnskeyRecord {
                    owner,
                    ttl,
                    flags,
                    protocol,
                    algorithm,
                    public_key,
                });
            }
            rtype::RRSIG => {
                let covered_name = line.next("type covered")?;
                let type_covered = parse_type(covered_name)
                    .ok_or_else(|| line.err(format!("unknown type {covered_name}")))?;
                let sig = RrsigRecord {
                    owner: owner.clone(),
                    ttl,
                    type_covered,
                    algorithm: line.num("algorithm")?,
                    labels: line.num("labels")?,
                    original_ttl: line.num("original ttl")?,
                    expiration: line.num("expiration")?,
                    inception: line.num("inception")?,
                    key_tag: line.num("key tag")?,
                    signer_name: line.name(&origin, "signer")?,
                    signature: base64_field(&mut line)?,
                };
                z.rrsigs.entry((owner, type_covered)).or_default().push(sig);
            }
            rtype::DS => {
                let key_tag = line.num("key tag")?;
                let algorithm = line.num("algorithm")?;
                let digest_type = line.num("digest type")?;
                let hex_text = line.rest();
                let digest =
                    hex::decode(&hex_text).map_err(|e| line.err(format!("bad digest: {e}")))?;
                z.ds_for_children
                    .entry(owner.clone())
                    .or_default()
                    .push(DsRecord {
                        owner,
                        ttl,
                        key_tag,
                        algorithm,
                        digest_type,
                        digest,
                    });
            }
            _ => {
                let rd = generic_rdata(&mut line, t)?;
                line.done()?;
                z.rrsets
                    .entry((owner.clone(), t))
                    .or_insert_with(|| RrSet::new(owner, t, ttl, Vec::new()))
                    .rdatas
                    .push(rd);
            }
        }
    }
    zone.ok_or(ZonefileError {
        line: 0,
        message: "no $ORIGIN line".to_owned(),
    })
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DnsName, WireError, MAX_STREAM_MESSAGE};

pub const HEADER_LEN: usize = 12;
/// Largest offset a compression pointer can address.
const MAX_POINTER_OFFSET: usize = 0x3FFF;

/// Record type codes used by the lab.
pub mod rtype {
    pub const A: u16 = 1;
    pub const NS: u16 = 2;
    pub const AAAA: u16 = 28;
    pub const OPT: u16 = 41;
    pub const DS: u16 = 43;
    pub const RRSIG: u16 = 46;
    pub const DNSKEY: u16 = 48;
    pub const ANY: u16 = 255;
}

pub const CLASS_IN: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub owner: DnsName,
    pub rtype: u16,
    pub class: u16,
    pub ttl: u32,
    #[serde(with = "crate::serde_util::hex_bytes")]
    pub rdata: Vec<u8>,
}

impl ResourceRecord {
    pub fn new(owner: DnsName, rtype: u16, ttl: u32, rdata: Vec<u8>) -> Self {
        Self {
            owner,
            rtype,
            class: CLASS_IN,
            ttl,
            rdata,
        }
    }

    /// An EDNS(0) OPT pseudo-record advertising the given UDP payload size.
    pub fn opt(udp_payload: u16) -> Self {
        Self {
            owner: DnsName::root(),
            rtype: rtype::OPT,
            class: udp_payload,
            ttl: 0,
            rdata: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub name: DnsName,
    pub qtype: u16,
    pub qclass: u16,
}

impl Question {
    pub fn new(name: DnsName, qtype: u16) -> Self {
        Self {
            name,
            qtype,
            qclass: CLASS_IN,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsMessage {
    pub id: u16,
    pub flags: u16,
    pub questions: Vec<Question>,
    pub answer: Vec<ResourceRecord>,
    pub authority: Vec<ResourceRecord>,
    pub additional: Vec<ResourceRecord>,
}

impl DnsMessage {
    fn records(&self) -> impl Iterator<Item = &ResourceRecord> {
        self.answer
            .iter()
            .chain(&self.authority)
            .chain(&self.additional)
    }
}

/// How owner and question names are written.
///
/// Rdata names are never compressed (RFC 4034 forbids it for RRSIG signer
/// names, and the lab carries no other name-bearing rdata).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compression {
    #[default]
    OwnerNames,
    None,
}

/// Tracks suffix offsets for RFC 1035 message compression.
#[derive(Default)]
struct NameTable {
    offsets: HashMap<Vec<Vec<u8>>, u16>,
}

impl NameTable {
    /// Returns `(index, pointer)` where `labels[..index]` are written literally
    /// and followed by `pointer` if one was found.
    fn lookup(&self, name: &DnsName) -> (usize, Option<u16>) {
        let labels = name.labels();
        for i in 0..labels.len() {
            let key: Vec<Vec<u8>> = labels[i..].iter().map(|l| l.to_ascii_lowercase()).collect();
            if let Some(&off) = self.offsets.get(&key) {
                return (i, Some(off));
            }
        }
        (labels.len(), None)
    }

    fn remember(&mut self, name: &DnsName, literal: usize, start: usize) {
        let labels = name.labels();
        let mut pos = start;
        for i in 0..literal {
            if pos <= MAX_POINTER_OFFSET {
                let key: Vec<Vec<u8>> =
                    labels[i..].iter().map(|l| l.to_ascii_lowercase()).collect();
                self.offsets.entry(key).or_insert(pos as u16);
            }
            pos += 1 + labels[i].len();
        }
    }
}

fn literal_len(name: &DnsName, literal: usize, pointer: bool) -> usize {
    let labels: usize = name.labels()[..literal].iter().map(|l| 1 + l.len()).sum();
    labels + if pointer { 2 } else { 1 }
}

fn write_name(out: &mut Vec<u8>, table: &mut NameTable, name: &DnsName, mode: Compression) {
    if mode == Compression::None {
        name.write_wire(out);
        return;
    }
    let (literal, pointer) = table.lookup(name);
    let start = out.len();
    for label in &name.labels()[..literal] {
        out.push(label.len() as u8);
        out.extend_from_slice(label);
    }
    match pointer {
        Some(off) => out.extend_from_slice(&(0xC000 | off).to_be_bytes()),
        None => out.push(0),
    }
    table.remember(name, literal, start);
}

fn name_size(pos: usize, table: &mut NameTable, name: &DnsName, mode: Compression) -> usize {
    if mode == Compression::None {
        return name.wire_len();
    }
    let (literal, pointer) = table.lookup(name);
    table.remember(name, literal, pos);
    literal_len(name, literal, pointer.is_some())
}

fn check_rdata(rr: &ResourceRecord) -> Result<(), WireError> {
    if rr.rdata.len() > u16::MAX as usize {
        return Err(WireError::RdataTooLong(rr.rdata.len()));
    }
    Ok(())
}

/// Uncompressed RFC 1035 wire form of a single record.
pub fn encode_record(rr: &ResourceRecord) -> Result<Vec<u8>, WireError> {
    check_rdata(rr)?;
    let mut out = Vec::with_capacity(rr.owner.wire_len() + 10 + rr.rdata.len());
    rr.owner.write_wire(&mut out);
    write_record_tail(&mut out, rr);
    Ok(out)
}

fn write_record_tail(out: &mut Vec<u8>, rr: &ResourceRecord) {
    out.extend_from_slice(&rr.rtype.to_be_bytes());
    out.extend_from_slice(&rr.class.to_be_bytes());
    out.extend_from_slice(&rr.ttl.to_be_bytes());
    out.extend_from_slice(&(rr.rdata.len() as u16).to_be_bytes());
    out.extend_from_slice(&rr.rdata);
}

/// Encodes a full message. Section counts are taken from the vectors.
pub fn encode_message_with(msg: &DnsMessage, mode: Compression) -> Result<Vec<u8>, WireError> {
    for rr in msg.records() {
        check_rdata(rr)?;
    }
    let mut out = Vec::with_capacity(512);
    out.extend_from_slice(&msg.id.to_be_bytes());
    out.extend_from_slice(&msg.flags.to_be_bytes());
    for n in [
        msg.questions.len(),
        msg.answer.len(),
        msg.authority.len(),
        msg.additional.len(),
    ] {
        let n = u16::try_from(n).map_err(|_| WireError::TooManyRecords(n))?;
        out.extend_from_slice(&n.to_be_bytes());
    }
    let mut table = NameTable::default();
    for q in &msg.questions {
        write_name(&mut out, &mut table, &q.name, mode);
        out.extend_from_slice(&q.qtype.to_be_bytes());
        out.extend_from_slice(&q.qclass.to_be_bytes());
    }
    for rr in msg.records() {
        write_name(&mut out, &mut table, &rr.owner, mode);
        write_record_tail(&mut out, rr);
    }
    Ok(out)
}

pub fn encode_message(msg: &DnsMessage) -> Result<Vec<u8>, WireError> {
    encode_message_with(msg, Compression::default())
}

/// Exact encoded size of `msg`, computed without materialising the bytes.
pub fn message_size_with(msg: &DnsMessage, mode: Compression) -> usize {
    let mut table = NameTable::default();
    let mut size = HEADER_LEN;
    for q in &msg.questions {
        size += name_size(size, &mut table, &q.name, mode) + 4;
    }
    for rr in msg.records() {
        size += name_size(size, &mut table, &rr.owner, mode) + 10 + rr.rdata.len();
    }
    size
}

pub fn message_size(msg: &DnsMessage) -> usize {
    message_size_with(msg, Compression::default())
}

/// Stream (TCP) framing: a two-octet big-endian length followed by the message.
pub fn encode_stream_message(msg: &DnsMessage) -> Result<Vec<u8>, WireError> {
    let size = message_size(msg);
    if size > MAX_STREAM_MESSAGE {
        return Err(WireError::TransportLimit { size });
    }
    let body = encode_message(msg)?;
    let mut out = Vec::with_capacity(body.len() + 2);
    out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// All records sharing owner, type and class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrSet {
    pub owner: DnsName,
    pub rtype: u16,
    pub class: u16,
    pub ttl: u32,
    #[serde(with = "crate::serde_util::vec_hex_bytes")]
    pub rdatas: Vec<Vec<u8>>,
}

impl RrSet {
    pub fn new(owner: DnsName, rtype: u16, ttl: u32, rdatas: Vec<Vec<u8>>) -> Self {
        Self {
            owner,
            rtype,
            class: CLASS_IN,
            ttl,
            rdatas,
        }
    }

    pub fn records(&self) -> impl Iterator<Item = ResourceRecord> + '_ {
        self.rdatas.iter().map(move |rd| ResourceRecord {
            owner: self.owner.clone(),
            rtype: self.rtype,
            class: self.class,
            ttl: self.ttl,
            rdata: rd.clone(),
        })
    }

    /// Removes exact-rdata duplicates, keeping first occurrences in order.
    pub fn dedup(&mut self) {
        let mut seen = std::collections::HashSet::new();
        self.rdatas.retain(|rd| seen.insert(rd.clone()));
    }
}

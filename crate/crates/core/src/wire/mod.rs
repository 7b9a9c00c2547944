//! DNS wire format: names, records, messages, size accounting and the
//! cipher registry behind the packing maxima.

mod message;
mod name;
pub mod registry;

pub use message::{
    encode_message, encode_message_with, encode_record, encode_stream_message, message_size,
    message_size_with, rtype, Compression, DnsMessage, Question, ResourceRecord, RrSet, CLASS_IN,
    HEADER_LEN,
};
pub use name::{DnsName, MAX_LABEL_LEN, MAX_NAME_LEN};
pub use registry::{max_validations, pack_max, Cipher, RecordKind};

/// Largest message a two-octet stream length prefix can describe.
pub const MAX_STREAM_MESSAGE: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("empty label inside a domain name")]
    EmptyLabel,
    #[error("label of {0} octets exceeds 63")]
    LabelTooLong(usize),
    #[error("name of {0} octets exceeds 255")]
    NameTooLong(usize),
    #[error("rdata of {0} octets exceeds 65535")]
    RdataTooLong(usize),
    #[error("section with {0} records exceeds 65535")]
    TooManyRecords(usize),
    #[error("message of {size} octets exceeds the 65535-octet stream transport limit")]
    TransportLimit { size: usize },
    #[error("unsupported algorithm: {0}")]
    UnsupportedAlgorithm(String),
}

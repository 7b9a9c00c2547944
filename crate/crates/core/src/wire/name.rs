use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::WireError;

pub const MAX_LABEL_LEN: usize = 63;
pub const MAX_NAME_LEN: usize = 255;

/// An absolute domain name stored as its non-root labels.
///
/// The root label is implicit. Presentation form always ends in a dot.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DnsName {
    labels: Vec<Vec<u8>>,
}

impl DnsName {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_labels<I, L>(labels: I) -> Result<Self, WireError>
    where
        I: IntoIterator<Item = L>,
        L: Into<Vec<u8>>,
    {
        let labels: Vec<Vec<u8>> = labels.into_iter().map(Into::into).collect();
        let mut total = 1;
        for label in &labels {
            if label.is_empty() {
                return Err(WireError::EmptyLabel);
            }
            if label.len() > MAX_LABEL_LEN {
                return Err(WireError::LabelTooLong(label.len()));
            }
            total += 1 + label.len();
        }
        if total > MAX_NAME_LEN {
            return Err(WireError::NameTooLong(total));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[Vec<u8>] {
        &self.labels
    }

    /// Label count excluding the root, as used in the RRSIG `labels` field.
    pub fn label_count(&self) -> u8 {
        self.labels.len() as u8
    }

    pub fn is_root(&self) -> bool {
        self.labels.is_empty()
    }

    /// Uncompressed wire length: one length octet per label plus the root octet.
    pub fn wire_len(&self) -> usize {
        self.labels.iter().map(|l| 1 + l.len()).sum::<usize>() + 1
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        self.write_wire(&mut out);
        out
    }

    pub fn write_wire(&self, out: &mut Vec<u8>) {
        for label in &self.labels {
            out.push(label.len() as u8);
            out.extend_from_slice(label);
        }
        out.push(0);
    }

    /// Lower-cased uncompressed wire form (RFC 4034 section 6.2).
    pub fn canonical_wire(&self) -> Vec<u8> {
        let mut out = self.to_wire();
        out.make_ascii_lowercase();
        out
    }

    pub fn to_lowercase(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|l| l.to_ascii_lowercase()).collect(),
        }
    }

    /// True when `self` equals `ancestor` or lies below it.
    pub fn is_subdomain_of(&self, ancestor: &DnsName) -> bool {
        let n = ancestor.labels.len();
        if n > self.labels.len() {
            return false;
        }
        self.labels[self.labels.len() - n..]
            .iter()
            .zip(&ancestor.labels)
            .all(|(a, b)| a.eq_ignore_ascii_case(b))
    }

    /// Prepends a label, e.g. `"www".child_of("attack.er.")`.
    pub fn prepend(&self, label: &str) -> Result<Self, WireError> {
        let mut labels = vec![label.as_bytes().to_vec()];
        labels.extend(self.labels.iter().cloned());
        Self::from_labels(labels)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.labels.is_empty() {
            None
        } else {
            Some(Self {
                labels: self.labels[1..].to_vec(),
            })
        }
    }
}

impl FromStr for DnsName {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "." || s.is_empty() {
            return Ok(Self::root());
        }
        let s = s.strip_suffix('.').unwrap_or(s);
        Self::from_labels(s.split('.').map(|l| l.as_bytes().to_vec()))
    }
}

impl fmt::Display for DnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.labels.is_empty() {
            return f.write_str(".");
        }
        for label in &self.labels {
            for &b in label {
                if b.is_ascii_graphic() && b != b'.' && b != b'\\' {
                    write!(f, "{}", b as char)?;
                } else {
                    write!(f, "\\{:03}", b)?;
                }
            }
            f.write_str(".")?;
        }
        Ok(())
    }
}

impl fmt::Debug for DnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DnsName({self})")
    }
}

impl Serialize for DnsName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DnsName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl schemars::JsonSchema for DnsName {
    fn schema_name() -> String {
        "DnsName".to_owned()
    }

    fn json_schema(gen: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        String::json_schema(gen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let n: DnsName = "attack.er".parse().unwrap();
        assert_eq!(n.to_string(), "attack.er.");
        assert_eq!(n.wire_len(), 11);
        assert_eq!("."/* root */.parse::<DnsName>().unwrap(), DnsName::root());
        assert_eq!(DnsName::root().to_wire(), vec![0]);
    }

    #[test]
    fn label_limits() {
        assert_eq!(
            "a..b".parse::<DnsName>().unwrap_err(),
            WireError::EmptyLabel
        );
        let long = "x".repeat(64);
        assert_eq!(
            long.parse::<DnsName>().unwrap_err(),
            WireError::LabelTooLong(64)
        );
        let name = vec!["a".repeat(63); 4].join(".");
        assert!(matches!(
            name.parse::<DnsName>(),
            Err(WireError::NameTooLong(257))
        ));
    }

    #[test]
    fn subdomain() {
        let child: DnsName = "www.Attack.er.".parse().unwrap();
        let apex: DnsName = "attack.er.".parse().unwrap();
        assert!(child.is_subdomain_of(&apex));
        assert!(apex.is_subdomain_of(&apex));
        assert!(!apex.is_subdomain_of(&child));
        assert!(apex.is_subdomain_of(&DnsName::root()));
        assert_eq!(child.canonical_wire(), b"\x03www\x06attack\x02er\x00");
    }
}

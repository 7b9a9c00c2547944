//! An in-process DNSSEC validation lab for studying algorithmic-complexity
//! attacks built on key-tag collisions.
//!
//! The crate forges colliding DNSKEY sets, signature floods and DS-digest
//! floods ([`keyforge`], [`zonegen`]), runs them through an instrumented,
//! RFC-compliant validator that counts every unit of cryptographic work
//! ([`validator`]), converts those counts into resolver stall time
//! ([`costmodel`]) and simulates benign-traffic loss on a resolver under
//! attack ([`simharness`]).
//!
//! Nothing here opens a socket. All zones, resolvers and clients are
//! model objects; the tool is meant for isolated, defensive analysis.

pub mod costmodel;
pub mod keyforge;
pub mod simharness;
pub mod validator;
pub mod wire;
pub mod zonegen;

mod serde_util;

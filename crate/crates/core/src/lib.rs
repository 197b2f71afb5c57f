//! A decentralized trust layer: self-certifying identifiers, selective-disclosure
//! credentials verified offline, append-only verifiable logs, negotiated
//! dual-signed agreements, audit and attestation flows, and a deterministic
//! multi-agent simulator that exercises them end to end.

pub mod canonical;
pub mod clock;
pub mod digest;
pub mod identity;
pub mod vlog;
pub mod credentials;
pub mod wallet;
pub mod verification;
pub mod governance;
pub mod agreements;
pub mod sim;

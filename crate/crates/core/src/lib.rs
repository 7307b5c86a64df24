//! One-time passkey authentication for a protected data-mining API.
//!
//! A client picks a passkey `k` and a length `p`, and registers `H^p(k)`.
//! Each login reveals the previous chain element `H^(p-1)(k)`; the server
//! checks it with one hash and keeps it as the new verifier. Requests pass a
//! source-address allowlist before any user lookup, and a successful login
//! yields a single-use ticket for the clustering endpoint.
//!
//! Modules, bottom-up:
//!
//! - [`hash_chain`]: chain computation and one-step verification.
//! - [`domain_trust`]: CIDR allowlist on the request's source address.
//! - [`auth_agent`]: user records, counter rotation, tickets, persistence.
//! - [`mining`]: the protected k-means task.
//! - [`gateway`]: HTTP/JSON request pipeline and server.
//! - [`client`]: client SDK with pluggable transports and transcripts.
//! - [`attack`]: replay, stolen-database, and dictionary adversaries.

pub mod attack;
pub mod auth_agent;
pub mod client;
pub mod domain_trust;
pub mod error;
pub mod gateway;
pub mod hash_chain;
pub mod mining;
mod persist;

pub use auth_agent::{AuthAgent, AuthError, SessionTicket, UserRecord, UserStatus};
pub use domain_trust::{TrustRule, TrustStore};
pub use error::{ApiError, ErrorCode};
pub use hash_chain::{chain, chain_digest, hash_once, verify_step, Digest, HashAlg, Passkey};

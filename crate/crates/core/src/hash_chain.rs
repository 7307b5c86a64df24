//! Iterated one-way hashing and single-step verification.
//!
//! A chain of length `p` over passkey `k` is `H(H(...H(k)...))` with `p`
//! applications of `H`. The first application hashes the UTF-8 bytes of the
//! passkey; every later one hashes the raw digest bytes of the previous step.
//! Values are revealed to the verifier in reverse order, one per login.

use std::fmt;
use std::str::FromStr;

use md5::Md5;
use sha2::{Digest as _, Sha256};

/// One-way hash function used to build a chain.
///
/// `Md5` exists only so the original MD5-based deployment can be reproduced.
/// MD5 collisions are practical; do not enable it for new chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashAlg {
    #[default]
    Sha256,
    Md5,
}

impl HashAlg {
    pub const fn digest_len(self) -> usize {
        match self {
            HashAlg::Sha256 => 32,
            HashAlg::Md5 => 16,
        }
    }

    pub const fn id(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Md5 => "md5",
        }
    }

    fn apply(self, data: &[u8]) -> Vec<u8> {
        match self {
            HashAlg::Sha256 => Sha256::digest(data).to_vec(),
            HashAlg::Md5 => Md5::digest(data).to_vec(),
        }
    }
}

impl fmt::Display for HashAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for HashAlg {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sha256" => Ok(HashAlg::Sha256),
            "md5" => Ok(HashAlg::Md5),
            other => Err(ChainError::UnknownAlg(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("unknown hash algorithm `{0}` (expected sha256 or md5)")]
    UnknownAlg(String),
    #[error("passkey must not be empty")]
    EmptyPasskey,
    #[error("digest is not valid hex: {0}")]
    BadHex(String),
    #[error("{alg} digest must be {expected} bytes, got {actual}")]
    BadLength {
        alg: HashAlg,
        expected: usize,
        actual: usize,
    },
    #[error("algorithm mismatch: token is {token}, verifier is {stored}")]
    AlgMismatch { token: HashAlg, stored: HashAlg },
}

/// The client's secret. Never leaves the client except through chain digests.
#[derive(Clone, PartialEq, Eq)]
pub struct Passkey(String);

impl Passkey {
    pub fn new(secret: impl Into<String>) -> Result<Self, ChainError> {
        let secret = secret.into();
        if secret.is_empty() {
            return Err(ChainError::EmptyPasskey);
        }
        Ok(Passkey(secret))
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Passkey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Passkey(<redacted>)")
    }
}

/// A hash output tagged with the algorithm that produced it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Digest {
    bytes: Vec<u8>,
    alg: HashAlg,
}

impl Digest {
    pub fn from_bytes(bytes: Vec<u8>, alg: HashAlg) -> Result<Self, ChainError> {
        if bytes.len() != alg.digest_len() {
            return Err(ChainError::BadLength {
                alg,
                expected: alg.digest_len(),
                actual: bytes.len(),
            });
        }
        Ok(Digest { bytes, alg })
    }

    /// Parses the canonical lowercase hex form. Uppercase input is rejected.
    pub fn from_hex(text: &str, alg: HashAlg) -> Result<Self, ChainError> {
        if text.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(ChainError::BadHex("uppercase hex is not canonical".into()));
        }
        let bytes = hex::decode(text).map_err(|e| ChainError::BadHex(e.to_string()))?;
        Self::from_bytes(bytes, alg)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn alg(&self) -> HashAlg {
        self.alg
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}:{})", self.alg, self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn hash_once(data: &[u8], alg: HashAlg) -> Digest {
    Digest {
        bytes: alg.apply(data),
        alg,
    }
}

/// `count` applications of `alg` over the passkey. `count == 0` yields the
/// raw passkey bytes.
pub fn chain(passkey: &Passkey, count: u32, alg: HashAlg) -> Vec<u8> {
    let mut value = passkey.as_bytes().to_vec();
    for _ in 0..count {
        value = alg.apply(&value);
    }
    value
}

/// Like [`chain`], but typed. Requires `count >= 1` since the zeroth element
/// is not a digest.
pub fn chain_digest(passkey: &Passkey, count: u32, alg: HashAlg) -> Option<Digest> {
    if count == 0 {
        return None;
    }
    Some(Digest {
        bytes: chain(passkey, count, alg),
        alg,
    })
}

/// True iff one hash of `token` reproduces `stored`.
pub fn verify_step(token: &Digest, stored: &Digest) -> Result<bool, ChainError> {
    if token.alg != stored.alg {
        return Err(ChainError::AlgMismatch {
            token: token.alg,
            stored: stored.alg,
        });
    }
    Ok(hash_once(&token.bytes, token.alg) == *stored)
}

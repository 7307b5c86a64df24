//! Tab-separated user database.
//!
//! One record per line: `user_id`, alg id, decimal counter, lowercase hex
//! verifier, status. The file is rewritten whole on every mutation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::hash_chain::{Digest, HashAlg};
use crate::persist::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserStatus {
    Active,
    Locked,
}

impl UserStatus {
    pub const fn as_str(self) -> &'static str {
        match self {
            UserStatus::Active => "active",
            UserStatus::Locked => "locked",
        }
    }
}

impl fmt::Display for UserStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(UserStatus::Active),
            "locked" => Ok(UserStatus::Locked),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// The server's entire authentication state for one user: the counter and
/// the most recently accepted chain value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub(crate) user_id: String,
    pub(crate) counter: u32,
    pub(crate) verifier: Digest,
    pub(crate) status: UserStatus,
}

impl UserRecord {
    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn verifier(&self) -> &Digest {
        &self.verifier
    }

    pub fn alg(&self) -> HashAlg {
        self.verifier.alg()
    }

    pub fn status(&self) -> UserStatus {
        self.status
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.user_id,
            self.alg(),
            self.counter,
            self.verifier.to_hex(),
            self.status
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [user_id, alg, counter, verifier, status] = fields[..] else {
            return Err(format!(
                "expected 5 tab-separated fields, got {}",
                fields.len()
            ));
        };
        if !valid_user_id(user_id) {
            return Err(format!("invalid user id `{user_id}`"));
        }
        let alg: HashAlg = alg.parse().map_err(|e| format!("{e}"))?;
        let counter: u32 = counter
            .parse()
            .map_err(|_| format!("counter `{counter}` is not a decimal integer"))?;
        if counter < 1 {
            return Err("counter must be at least 1".into());
        }
        let verifier = Digest::from_hex(verifier, alg).map_err(|e| e.to_string())?;
        let status = status.parse()?;
        Ok(UserRecord {
            user_id: user_id.to_string(),
            counter,
            verifier,
            status,
        })
    }
}

/// 1 to 128 characters from `[A-Za-z0-9._@+-]`, so the id survives both
/// the TSV file and a URL path segment unescaped.
pub fn valid_user_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"._@+-".contains(&b))
}

#[derive(Debug, thiserror::Error)]
pub enum UserDbError {
    #[error("user database {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("user database {path}, line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

pub fn render(records: &BTreeMap<String, UserRecord>) -> String {
    let mut out = String::new();
    for rec in records.values() {
        out.push_str(&rec.to_line());
        out.push('\n');
    }
    out
}

pub fn parse(path: &Path, text: &str) -> Result<BTreeMap<String, UserRecord>, UserDbError> {
    let mut records = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let malformed = |reason: String| UserDbError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        };
        if line.is_empty() {
            continue;
        }
        let rec = UserRecord::parse_line(line).map_err(malformed)?;
        if records.contains_key(&rec.user_id) {
            return Err(malformed(format!("duplicate user `{}`", rec.user_id)));
        }
        records.insert(rec.user_id.clone(), rec);
    }
    Ok(records)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, UserRecord>, UserDbError> {
    let text = std::fs::read_to_string(path).map_err(|source| UserDbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(path, &text)
}

pub fn save(path: &Path, records: &BTreeMap<String, UserRecord>) -> Result<(), UserDbError> {
    write_atomic(path, render(records).as_bytes()).map_err(|source| UserDbError::Io {
        path: path.to_path_buf(),
        source,
    })
}

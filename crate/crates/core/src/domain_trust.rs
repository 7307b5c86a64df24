//! Source-address allowlist checked before any user-level processing.
//!
//! Rules are CIDR blocks. An empty store trusts nobody; add `0.0.0.0/0`
//! (and `::/0`) to switch filtering off.

use std::fmt;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::persist::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum TrustError {
    #[error("malformed CIDR `{0}`")]
    Malformed(String),
    #[error("prefix length {prefix} out of range for `{text}` (max {max})")]
    PrefixOutOfRange { text: String, prefix: u32, max: u8 },
    #[error("`{given}` has host bits set; canonical form is `{canonical}`")]
    NonCanonical { given: String, canonical: TrustRule },
    #[error("{path}:{line}: {source}")]
    FileLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<TrustError>,
    },
    #[error("trust file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A canonical CIDR block: every bit past `prefix_len` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrustRule {
    network: IpAddr,
    prefix_len: u8,
}

fn addr_bits(ip: IpAddr) -> (u128, u8) {
    match ip {
        IpAddr::V4(v4) => (u32::from(v4) as u128, 32),
        IpAddr::V6(v6) => (u128::from(v6), 128),
    }
}

fn mask(prefix_len: u8, width: u8) -> u128 {
    let full = if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    };
    full & !full.checked_shr(prefix_len.into()).unwrap_or(0)
}

fn from_bits(bits: u128, v4: bool) -> IpAddr {
    if v4 {
        IpAddr::from((bits as u32).to_be_bytes())
    } else {
        IpAddr::from(bits.to_be_bytes())
    }
}

impl TrustRule {
    /// Builds a rule, rejecting out-of-range prefixes and host bits.
    pub fn new(network: IpAddr, prefix_len: u8) -> Result<Self, TrustError> {
        let (bits, width) = addr_bits(network);
        if prefix_len > width {
            return Err(TrustError::PrefixOutOfRange {
                text: format!("{network}/{prefix_len}"),
                prefix: prefix_len.into(),
                max: width,
            });
        }
        let masked = bits & mask(prefix_len, width);
        if masked != bits {
            return Err(TrustError::NonCanonical {
                given: format!("{network}/{prefix_len}"),
                canonical: TrustRule {
                    network: from_bits(masked, width == 32),
                    prefix_len,
                },
            });
        }
        Ok(TrustRule {
            network,
            prefix_len,
        })
    }

    pub fn network(&self) -> IpAddr {
        self.network
    }

    pub fn prefix_len(&self) -> u8 {
        self.prefix_len
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        let ip = ip.to_canonical();
        let (net, width) = addr_bits(self.network);
        let (addr, addr_width) = addr_bits(ip);
        if width != addr_width {
            return false;
        }
        addr & mask(self.prefix_len, width) == net
    }
}

impl fmt::Display for TrustRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network, self.prefix_len)
    }
}

impl FromStr for TrustRule {
    type Err = TrustError;

    /// Accepts `addr/prefix`, or a bare address as a single-host rule.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let (addr, prefix) = match text.split_once('/') {
            Some((a, p)) => (a, Some(p)),
            None => (text, None),
        };
        let network: IpAddr = addr
            .parse()
            .map_err(|_| TrustError::Malformed(text.to_string()))?;
        let width = addr_bits(network).1;
        let prefix_len = match prefix {
            None => width,
            Some(p) => {
                if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(TrustError::Malformed(text.to_string()));
                }
                let n: u32 = p
                    .parse()
                    .map_err(|_| TrustError::Malformed(text.to_string()))?;
                if n > width as u32 {
                    return Err(TrustError::PrefixOutOfRange {
                        text: text.to_string(),
                        prefix: n,
                        max: width,
                    });
                }
                n as u8
            }
        };
        TrustRule::new(network, prefix_len)
    }
}

/// Ordered, duplicate-free set of rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustStore {
    rules: Vec<TrustRule>,
}

impl TrustStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rules(rules: impl IntoIterator<Item = TrustRule>) -> Self {
        let mut store = Self::new();
        for rule in rules {
            store.add_rule(rule);
        }
        store
    }

    /// Loopback only, v4 and v6.
    pub fn loopback() -> Self {
        Self::from_rules(["127.0.0.0/8".parse().unwrap(), "::1/128".parse().unwrap()])
    }

    pub fn is_trusted(&self, ip: IpAddr) -> bool {
        self.rules.iter().any(|r| r.contains(ip))
    }

    /// Returns false if the rule was already present.
    pub fn add_rule(&mut self, rule: TrustRule) -> bool {
        if self.rules.contains(&rule) {
            return false;
        }
        self.rules.push(rule);
        true
    }

    /// Returns false if the rule was absent.
    pub fn remove_rule(&mut self, rule: &TrustRule) -> bool {
        let before = self.rules.len();
        self.rules.retain(|r| r != rule);
        self.rules.len() != before
    }

    pub fn list_rules(&self) -> &[TrustRule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Parses the trust file format: one CIDR per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, (usize, TrustError)> {
        let mut store = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let rule = line.parse::<TrustRule>().map_err(|e| (idx + 1, e))?;
            store.add_rule(rule);
        }
        Ok(store)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.to_string());
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, TrustError> {
        let text = std::fs::read_to_string(path).map_err(|source| TrustError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|(line, e)| TrustError::FileLine {
            path: path.to_path_buf(),
            line,
            source: Box::new(e),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrustError> {
        write_atomic(path, self.render().as_bytes()).map_err(|source| TrustError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

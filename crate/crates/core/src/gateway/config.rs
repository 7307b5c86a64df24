use std::path::PathBuf;
use std::time::Duration;

use crate::auth_agent::DEFAULT_TICKET_TTL;
use crate::hash_chain::HashAlg;

use super::DEFAULT_MAX_BODY;

pub const ENV_PREFIX: &str = "OTPK_";

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub bind_address: String,
    pub user_db_path: PathBuf,
    pub trust_path: PathBuf,
    /// Rules for registration and admin endpoints. Loopback when unset.
    pub admin_trust_path: Option<PathBuf>,
    pub default_alg: HashAlg,
    pub ticket_ttl: Duration,
    pub max_body: usize,
    /// Take the source address from `X-Forwarded-For`. Only safe behind a
    /// proxy that overwrites the header; otherwise clients can spoof it.
    pub trust_forwarded: bool,
    pub allow_md5: bool,
    /// Create missing user-db and trust files instead of failing.
    pub create_missing: bool,
}

impl GatewayConfig {
    pub fn new(
        bind_address: impl Into<String>,
        user_db_path: impl Into<PathBuf>,
        trust_path: impl Into<PathBuf>,
    ) -> Self {
        GatewayConfig {
            bind_address: bind_address.into(),
            user_db_path: user_db_path.into(),
            trust_path: trust_path.into(),
            admin_trust_path: None,
            default_alg: HashAlg::Sha256,
            ticket_ttl: DEFAULT_TICKET_TTL,
            max_body: DEFAULT_MAX_BODY,
            trust_forwarded: false,
            allow_md5: false,
            create_missing: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.ticket_ttl.is_zero() {
            return Err("ticket_ttl must be positive".into());
        }
        if self.max_body == 0 {
            return Err("max_body must be positive".into());
        }
        if self.default_alg == HashAlg::Md5 && !self.allow_md5 {
            return Err("default_alg md5 requires allow_md5".into());
        }
        Ok(())
    }

    /// Overrides fields from `OTPK_*` variables. Unrelated variables are
    /// ignored; a known variable with an unparseable value is an error.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), String>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let value = value.as_ref();
            let bad = |what: &str| format!("{ENV_PREFIX}{name}: invalid {what} `{value}`");
            match name {
                "BIND" => self.bind_address = value.to_string(),
                "DB" => self.user_db_path = value.into(),
                "TRUST" => self.trust_path = value.into(),
                "ADMIN_TRUST" => self.admin_trust_path = Some(value.into()),
                "ALG" => self.default_alg = value.parse().map_err(|_| bad("algorithm"))?,
                "TICKET_TTL" => {
                    self.ticket_ttl =
                        Duration::from_secs(value.parse().map_err(|_| bad("seconds"))?)
                }
                "MAX_BODY" => self.max_body = value.parse().map_err(|_| bad("byte count"))?,
                "TRUST_FORWARDED" => {
                    self.trust_forwarded = parse_bool(value).ok_or_else(|| bad("bool"))?
                }
                "ALLOW_MD5" => self.allow_md5 = parse_bool(value).ok_or_else(|| bad("bool"))?,
                "CREATE" => self.create_missing = parse_bool(value).ok_or_else(|| bad("bool"))?,
                _ => {}
            }
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

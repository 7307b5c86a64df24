//! Server-side authentication agent.
//!
//! Holds one [`UserRecord`] per user: the remaining counter `p` and the last
//! accepted chain value `H^p(k)`. A login presents `H^(p-1)(k)`; if hashing it
//! once reproduces the stored value, the token becomes the new verifier and
//! `p` drops by one. At `p == 1` the chain is spent and the client must
//! reinitialize.
//!
//! Rotation is optimistic: the token is verified against a snapshot outside
//! the lock, and the write only lands if the record's version is unchanged.
//! A concurrent writer forces a retry against the fresh state, where the same
//! token no longer verifies.

mod tickets;
pub mod userdb;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, SystemTime};

pub use tickets::SessionTicket;
pub use userdb::{UserDbError, UserRecord, UserStatus};

use crate::error::ErrorCode;
use crate::hash_chain::{verify_step, Digest, HashAlg};
use tickets::TicketBook;
use userdb::valid_user_id;

pub const DEFAULT_TICKET_TTL: Duration = Duration::from_secs(60);

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("unknown user")]
    UnknownUser,
    #[error("user already registered")]
    DuplicateUser,
    #[error("invalid user id")]
    InvalidUserId,
    #[error("counter must be at least 2, got {0}")]
    InvalidCounter(u32),
    #[error("bad digest: {0}")]
    BadDigest(String),
    #[error("user is locked")]
    UserLocked,
    #[error("hash chain exhausted; reinitialize with a new passkey")]
    ChainExhausted,
    #[error("token does not match")]
    TokenMismatch,
    #[error("ticket is invalid, expired, or already used")]
    TicketInvalid,
    #[error(transparent)]
    Storage(#[from] UserDbError),
}

impl AuthError {
    pub fn code(&self) -> ErrorCode {
        match self {
            AuthError::UnknownUser => ErrorCode::UnknownUser,
            AuthError::DuplicateUser => ErrorCode::DuplicateUser,
            AuthError::InvalidUserId => ErrorCode::BadRequest,
            AuthError::InvalidCounter(_) => ErrorCode::InvalidCounter,
            AuthError::BadDigest(_) => ErrorCode::BadDigest,
            AuthError::UserLocked => ErrorCode::UserLocked,
            AuthError::ChainExhausted => ErrorCode::ChainExhausted,
            AuthError::TokenMismatch => ErrorCode::TokenMismatch,
            AuthError::TicketInvalid => ErrorCode::TicketInvalid,
            AuthError::Storage(_) => ErrorCode::Internal,
        }
    }
}

/// Challenge returned by the first login phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthChallenge {
    pub user_id: String,
    pub counter: u32,
}

#[derive(Debug, Clone)]
struct Slot {
    record: UserRecord,
    version: u64,
}

type Clock = Arc<dyn Fn() -> SystemTime + Send + Sync>;

pub struct AuthAgent {
    users: RwLock<BTreeMap<String, Slot>>,
    db_path: Option<PathBuf>,
    versions: AtomicU64,
    tickets: TicketBook,
    ticket_ttl: Duration,
    clock: Clock,
}

impl std::fmt::Debug for AuthAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuthAgent")
            .field("db_path", &self.db_path)
            .field("users", &self.users.read().unwrap().len())
            .field("ticket_ttl", &self.ticket_ttl)
            .finish()
    }
}

impl Default for AuthAgent {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl AuthAgent {
    /// An agent with no backing file.
    pub fn in_memory() -> Self {
        Self::with_records(BTreeMap::new(), None)
    }

    /// Loads every record from `path`; the file must exist.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, UserDbError> {
        let path = path.as_ref();
        let records = userdb::load(path)?;
        Ok(Self::with_records(records, Some(path.to_path_buf())))
    }

    fn with_records(records: BTreeMap<String, UserRecord>, db_path: Option<PathBuf>) -> Self {
        let versions = AtomicU64::new(1);
        let users = records
            .into_iter()
            .map(|(id, record)| {
                let version = versions.fetch_add(1, Ordering::Relaxed);
                (id, Slot { record, version })
            })
            .collect();
        AuthAgent {
            users: RwLock::new(users),
            db_path,
            versions,
            tickets: TicketBook::default(),
            ticket_ttl: DEFAULT_TICKET_TTL,
            clock: Arc::new(SystemTime::now),
        }
    }

    pub fn with_ticket_ttl(mut self, ttl: Duration) -> Self {
        self.ticket_ttl = ttl;
        self
    }

    /// Replaces the wall clock used for ticket issue and expiry.
    pub fn with_clock(mut self, clock: impl Fn() -> SystemTime + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn db_path(&self) -> Option<&Path> {
        self.db_path.as_deref()
    }

    pub fn ticket_ttl(&self) -> Duration {
        self.ticket_ttl
    }

    pub fn record(&self, user_id: &str) -> Option<UserRecord> {
        self.users
            .read()
            .unwrap()
            .get(user_id)
            .map(|s| s.record.clone())
    }

    pub fn records(&self) -> Vec<UserRecord> {
        self.users
            .read()
            .unwrap()
            .values()
            .map(|s| s.record.clone())
            .collect()
    }

    fn snapshot(&self, user_id: &str) -> Result<Slot, AuthError> {
        self.users
            .read()
            .unwrap()
            .get(user_id)
            .cloned()
            .ok_or(AuthError::UnknownUser)
    }

    /// Applies `change` to the map, persists, and rolls back if the write
    /// fails. Caller holds the write lock.
    fn commit(
        &self,
        users: &mut BTreeMap<String, Slot>,
        user_id: &str,
        change: Option<UserRecord>,
    ) -> Result<(), AuthError> {
        let previous = match change {
            Some(record) => {
                let version = self.versions.fetch_add(1, Ordering::Relaxed);
                users.insert(user_id.to_string(), Slot { record, version })
            }
            None => users.remove(user_id),
        };
        if let Some(path) = &self.db_path {
            let plain: BTreeMap<String, UserRecord> = users
                .iter()
                .map(|(k, s)| (k.clone(), s.record.clone()))
                .collect();
            if let Err(e) = userdb::save(path, &plain) {
                match previous {
                    Some(old) => users.insert(user_id.to_string(), old),
                    None => users.remove(user_id),
                };
                return Err(e.into());
            }
        }
        Ok(())
    }

    pub fn register(
        &self,
        user_id: &str,
        counter: u32,
        verifier: Digest,
    ) -> Result<UserRecord, AuthError> {
        if !valid_user_id(user_id) {
            return Err(AuthError::InvalidUserId);
        }
        if counter < 2 {
            return Err(AuthError::InvalidCounter(counter));
        }
        let mut users = self.users.write().unwrap();
        if users.contains_key(user_id) {
            return Err(AuthError::DuplicateUser);
        }
        let record = UserRecord {
            user_id: user_id.to_string(),
            counter,
            verifier,
            status: UserStatus::Active,
        };
        self.commit(&mut users, user_id, Some(record.clone()))?;
        Ok(record)
    }

    /// Like [`register`](Self::register), taking the verifier as hex text.
    pub fn register_hex(
        &self,
        user_id: &str,
        counter: u32,
        verifier_hex: &str,
        alg: HashAlg,
    ) -> Result<UserRecord, AuthError> {
        if counter < 2 {
            return Err(AuthError::InvalidCounter(counter));
        }
        let verifier =
            Digest::from_hex(verifier_hex, alg).map_err(|e| AuthError::BadDigest(e.to_string()))?;
        self.register(user_id, counter, verifier)
    }

    fn check_usable(record: &UserRecord) -> Result<(), AuthError> {
        if record.status == UserStatus::Locked {
            return Err(AuthError::UserLocked);
        }
        if record.counter <= 1 {
            return Err(AuthError::ChainExhausted);
        }
        Ok(())
    }

    /// First login phase. Read-only.
    pub fn begin_auth(&self, user_id: &str) -> Result<AuthChallenge, AuthError> {
        let slot = self.snapshot(user_id)?;
        Self::check_usable(&slot.record)?;
        Ok(AuthChallenge {
            user_id: user_id.to_string(),
            counter: slot.record.counter,
        })
    }

    /// Verifies `token` against the stored verifier and, on success, rotates
    /// the record with `next`. Retries when another writer got in first.
    fn consume_token<F>(
        &self,
        user_id: &str,
        token: &[u8],
        next: F,
    ) -> Result<UserRecord, AuthError>
    where
        F: Fn(&UserRecord, Digest) -> Result<UserRecord, AuthError>,
    {
        loop {
            let slot = self.snapshot(user_id)?;
            Self::check_usable(&slot.record)?;
            let alg = slot.record.alg();
            let token =
                Digest::from_bytes(token.to_vec(), alg).map_err(|_| AuthError::TokenMismatch)?;
            if !verify_step(&token, &slot.record.verifier).unwrap_or(false) {
                return Err(AuthError::TokenMismatch);
            }
            let updated = next(&slot.record, token)?;

            let mut users = self.users.write().unwrap();
            match users.get(user_id) {
                None => return Err(AuthError::UnknownUser),
                Some(current) if current.version != slot.version => continue,
                Some(_) => {}
            }
            self.commit(&mut users, user_id, Some(updated.clone()))?;
            return Ok(updated);
        }
    }

    /// Second login phase. On success the presented token becomes the
    /// verifier, the counter drops by one, and a ticket is issued.
    pub fn complete_auth(&self, user_id: &str, token: &Digest) -> Result<SessionTicket, AuthError> {
        self.complete_auth_bytes(user_id, token.as_bytes())
    }

    /// [`complete_auth`](Self::complete_auth) for a token of unknown
    /// algorithm; a length that does not fit the user's algorithm is a
    /// mismatch.
    pub fn complete_auth_bytes(
        &self,
        user_id: &str,
        token: &[u8],
    ) -> Result<SessionTicket, AuthError> {
        self.consume_token(user_id, token, |rec, token| {
            Ok(UserRecord {
                counter: rec.counter - 1,
                verifier: token,
                ..rec.clone()
            })
        })?;
        Ok(self.tickets.issue(user_id, self.ticket_ttl, (self.clock)()))
    }

    /// Swaps in a fresh chain, authorized by the next token of the current
    /// one. The old chain is dead afterwards.
    pub fn reinit(
        &self,
        user_id: &str,
        token: &Digest,
        new_counter: u32,
        new_verifier: Digest,
    ) -> Result<UserRecord, AuthError> {
        self.reinit_bytes(user_id, token.as_bytes(), new_counter, new_verifier)
    }

    pub fn reinit_bytes(
        &self,
        user_id: &str,
        token: &[u8],
        new_counter: u32,
        new_verifier: Digest,
    ) -> Result<UserRecord, AuthError> {
        let slot = self.snapshot(user_id)?;
        Self::check_usable(&slot.record)?;
        if new_counter < 2 {
            return Err(AuthError::InvalidCounter(new_counter));
        }
        self.consume_token(user_id, token, |rec, _| {
            Ok(UserRecord {
                counter: new_counter,
                verifier: new_verifier.clone(),
                ..rec.clone()
            })
        })
    }

    /// Wire form of [`reinit`](Self::reinit): the new verifier is hex in the
    /// user's current algorithm.
    pub fn reinit_hex(
        &self,
        user_id: &str,
        token: &[u8],
        new_counter: u32,
        new_verifier_hex: &str,
    ) -> Result<UserRecord, AuthError> {
        let slot = self.snapshot(user_id)?;
        Self::check_usable(&slot.record)?;
        if new_counter < 2 {
            return Err(AuthError::InvalidCounter(new_counter));
        }
        let new_verifier = Digest::from_hex(new_verifier_hex, slot.record.alg())
            .map_err(|e| AuthError::BadDigest(e.to_string()))?;
        self.reinit_bytes(user_id, token, new_counter, new_verifier)
    }

    /// Spends a ticket, returning its owner.
    pub fn redeem_ticket(&self, ticket_id: &str) -> Result<String, AuthError> {
        self.tickets
            .redeem(ticket_id, (self.clock)())
            .ok_or(AuthError::TicketInvalid)
    }

    pub fn admin_delete_user(&self, user_id: &str) -> Result<(), AuthError> {
        let mut users = self.users.write().unwrap();
        if !users.contains_key(user_id) {
            return Err(AuthError::UnknownUser);
        }
        self.commit(&mut users, user_id, None)?;
        drop(users);
        self.tickets.revoke_user(user_id);
        Ok(())
    }

    pub fn admin_lock(&self, user_id: &str) -> Result<UserRecord, AuthError> {
        let mut users = self.users.write().unwrap();
        let Some(slot) = users.get(user_id) else {
            return Err(AuthError::UnknownUser);
        };
        let record = UserRecord {
            status: UserStatus::Locked,
            ..slot.record.clone()
        };
        self.commit(&mut users, user_id, Some(record.clone()))?;
        drop(users);
        self.tickets.revoke_user(user_id);
        Ok(record)
    }
}

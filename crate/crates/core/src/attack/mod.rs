//! Adversaries for the login protocol.
//!
//! - Replay: resubmit every token seen on the wire.
//! - Stolen database: present the stored verifier as if it were a token.
//! - Dictionary: with one observed `(p, H^(p-1)(k))` pair, hash candidate
//!   passkeys offline until one matches. The scheme has no salt, so a weak
//!   passkey falls to this; the harness reports it rather than hiding it.

pub mod transcript;

use std::fmt;

use serde_json::json;

use crate::auth_agent::UserRecord;
use crate::client::{Client, Transport};
use crate::error::ErrorCode;
use crate::gateway::Method;
use crate::hash_chain::{chain, HashAlg, Passkey};

pub use transcript::{Direction, Message, Session, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    /// Refused by the server, with its error code when one was returned.
    Rejected(Option<ErrorCode>),
}

impl Outcome {
    pub fn is_accepted(self) -> bool {
        self == Outcome::Accepted
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Accepted => f.write_str("ACCEPTED"),
            Outcome::Rejected(_) => f.write_str("REJECTED"),
        }
    }
}

/// One outcome per attempt, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub attempts: Vec<Outcome>,
}

impl Report {
    pub fn accepted(&self) -> usize {
        self.attempts.iter().filter(|o| o.is_accepted()).count()
    }

    pub fn rejected(&self) -> usize {
        self.attempts.len() - self.accepted()
    }

    pub fn extend(&mut self, other: Report) {
        self.attempts.extend(other.attempts);
    }

    /// `ATTEMPT <n> <outcome>` per attempt, then
    /// `SUMMARY accepted=<a> rejected=<r>`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, o) in self.attempts.iter().enumerate() {
            out.push_str(&format!("ATTEMPT {} {}\n", i + 1, o));
        }
        out.push_str(&format!(
            "SUMMARY accepted={} rejected={}\n",
            self.accepted(),
            self.rejected()
        ));
        out
    }
}

fn submit<T: Transport>(client: &Client<T>, body: &serde_json::Value) -> Outcome {
    match client
        .transport()
        .send(Method::Post, "/v1/auth/complete", body)
    {
        Ok(reply) if (200..300).contains(&reply.status) => Outcome::Accepted,
        Ok(reply) => Outcome::Rejected(reply.body["error"].as_str().and_then(|s| s.parse().ok())),
        Err(e) => Outcome::Rejected(e.code()),
    }
}

/// Resubmits every captured `auth/complete` request body verbatim.
pub fn replay_attack<T: Transport>(transcript: &Transcript, client: &Client<T>) -> Report {
    Report {
        attempts: transcript
            .requests_to("/v1/auth/complete")
            .map(|body| submit(client, body))
            .collect(),
    }
}

/// Tries to log in with the stolen verifier as the token.
pub fn db_compromise_attack<T: Transport>(stolen: &UserRecord, client: &Client<T>) -> Outcome {
    submit(
        client,
        &json!({"user_id": stolen.user_id(), "token_hex": stolen.verifier().to_hex()}),
    )
}

/// Tests each candidate against the first observed session; returns the
/// first passkey whose `p - 1` chain value equals the observed token.
pub fn dictionary_attack<'a, I>(
    transcript: &Transcript,
    wordlist: I,
    alg: HashAlg,
) -> Option<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let session = transcript.sessions().into_iter().next()?;
    crack_session(&session, wordlist, alg)
}

/// Offline search against one `(p, token)` pair.
pub fn crack_session<'a, I>(session: &Session, wordlist: I, alg: HashAlg) -> Option<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let token = hex::decode(&session.token_hex).ok()?;
    let steps = session.p.checked_sub(1).filter(|s| *s >= 1)?;
    wordlist.into_iter().find_map(|word| {
        let candidate = Passkey::new(word).ok()?;
        (chain(&candidate, steps, alg) == token).then(|| word.to_string())
    })
}

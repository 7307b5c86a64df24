//! Captured protocol traffic, stored as JSON lines.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Request,
    Response,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub direction: Direction,
    pub endpoint: String,
    pub body: Value,
}

/// One observed login: the challenge and the token sent in answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user_id: String,
    pub p: u32,
    pub token_hex: String,
}

/// Append-only message log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, direction: Direction, endpoint: &str, body: Value) {
        self.messages.push(Message {
            direction,
            endpoint: endpoint.to_string(),
            body,
        });
    }

    pub fn extend(&mut self, other: &Transcript) {
        self.messages.extend(other.messages.iter().cloned());
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Bodies of every request sent to `endpoint`, in order.
    pub fn requests_to<'a>(&'a self, endpoint: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
        self.messages
            .iter()
            .filter(move |m| m.direction == Direction::Request && m.endpoint == endpoint)
            .map(|m| &m.body)
    }

    /// Pairs each `auth/begin` challenge with the `auth/complete` token that
    /// followed it for the same user.
    pub fn sessions(&self) -> Vec<Session> {
        let mut out = Vec::new();
        let mut pending_user: Option<String> = None;
        let mut challenge: Option<(String, u32)> = None;
        for m in &self.messages {
            match (m.direction, m.endpoint.as_str()) {
                (Direction::Request, "/v1/auth/begin") => {
                    pending_user = m.body["user_id"].as_str().map(str::to_string);
                }
                (Direction::Response, "/v1/auth/begin") => {
                    let p = m.body["p"].as_u64().and_then(|p| u32::try_from(p).ok());
                    challenge = pending_user.take().zip(p);
                }
                (Direction::Request, "/v1/auth/complete") => {
                    let user = m.body["user_id"].as_str();
                    let token = m.body["token_hex"].as_str();
                    if let (Some((cu, p)), Some(user), Some(token)) = (&challenge, user, token) {
                        if cu == user {
                            out.push(Session {
                                user_id: user.to_string(),
                                p: *p,
                                token_hex: token.to_string(),
                            });
                        }
                    }
                    challenge = None;
                }
                _ => {}
            }
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&serde_json::to_string(m).expect("message serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut messages = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let m: Message =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", idx + 1))?;
            messages.push(m);
        }
        Ok(Transcript { messages })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_jsonl(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Appends this transcript's messages to `path`, creating it if needed.
    pub fn append_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        f.write_all(self.to_jsonl().as_bytes())
    }
}

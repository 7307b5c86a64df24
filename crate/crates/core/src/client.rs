//! Client side: holds the passkey, derives tokens, and talks to a gateway.
//!
//! The passkey only ever leaves this module as chain digests `H^i(k)` with
//! `i >= 1`. The client keeps no counter; it learns `p` from every challenge.

use std::net::IpAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::attack::transcript::{Direction, Transcript};
use crate::error::{ApiError, ErrorCode};
use crate::gateway::{Gateway, Method, Request};
use crate::hash_chain::{chain_digest, Digest, HashAlg, Passkey};
use crate::mining::ClusteringResult;

/// Printed alongside CHAIN_EXHAUSTED.
pub const REINIT_HINT: &str = "the hash chain is used up: choose a new passkey and \
re-register out of band (an administrator must delete the user first)";

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Api(e) => Some(e.error),
            _ => None,
        }
    }

    fn local(code: ErrorCode, message: impl Into<String>) -> Self {
        ClientError::Api(ApiError::new(code, message))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Value,
}

/// Carries one JSON request to a gateway and returns its reply, whatever
/// the status.
pub trait Transport: Send + Sync {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError> {
        (**self).send(method, path, body)
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError> {
        (**self).send(method, path, body)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError> {
        (**self).send(method, path, body)
    }
}

/// HTTP/JSON over a real socket.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// `server` may be `host:port` or a full `http://` URL.
    pub fn new(server: &str) -> Self {
        let base = if server.contains("://") {
            server.trim_end_matches('/').to_string()
        } else {
            format!("http://{}", server.trim_end_matches('/'))
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        HttpTransport { base, agent }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }
}

impl Transport for HttpTransport {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError> {
        let url = format!("{}{}", self.base, path);
        let result = match method {
            Method::Get => self.agent.get(&url).call(),
            Method::Post if body.is_null() => self.agent.post(&url).send_empty(),
            Method::Post => self.agent.post(&url).send_json(body),
            Method::Delete if body.is_null() => self.agent.delete(&url).call(),
            Method::Delete => self.agent.delete(&url).force_send_body().send_json(body),
            Method::Other => return Err(ClientError::Transport("unsupported method".into())),
        };
        let mut resp = result.map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| ClientError::Protocol(format!("status {status}: {e}")))?;
        Ok(Reply { status, body })
    }
}

/// Calls a gateway in-process, as if from `peer`.
#[derive(Debug, Clone)]
pub struct LocalTransport {
    gateway: Arc<Gateway>,
    peer: IpAddr,
}

impl LocalTransport {
    pub fn new(gateway: Arc<Gateway>, peer: IpAddr) -> Self {
        LocalTransport { gateway, peer }
    }
}

impl Transport for LocalTransport {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError> {
        let resp = self
            .gateway
            .handle(&Request::new(method, path, body, self.peer));
        Ok(Reply {
            status: resp.status,
            body: resp.body,
        })
    }
}

/// Wraps a transport and appends every request and reply to a transcript.
#[derive(Debug)]
pub struct Recording<T> {
    inner: T,
    transcript: Arc<Mutex<Transcript>>,
}

impl<T> Recording<T> {
    pub fn new(inner: T) -> Self {
        Recording {
            inner,
            transcript: Arc::default(),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }

    pub fn shared_transcript(&self) -> Arc<Mutex<Transcript>> {
        self.transcript.clone()
    }
}

impl<T: Transport> Transport for Recording<T> {
    fn send(&self, method: Method, path: &str, body: &Value) -> Result<Reply, ClientError> {
        self.transcript
            .lock()
            .unwrap()
            .push(Direction::Request, path, body.clone());
        let reply = self.inner.send(method, path, body)?;
        self.transcript
            .lock()
            .unwrap()
            .push(Direction::Response, path, reply.body.clone());
        Ok(reply)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Registration {
    pub user_id: String,
    pub p: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Ticket {
    pub ticket_id: String,
    pub ttl_seconds: u64,
}

#[derive(Deserialize)]
struct Challenge {
    p: u32,
}

#[derive(Deserialize)]
struct MineReply<R> {
    result: R,
}

#[derive(Deserialize)]
struct RulesReply {
    rules: Vec<String>,
}

/// Typed wrapper over the gateway endpoints.
#[derive(Debug, Clone)]
pub struct Client<T> {
    transport: T,
}

impl Client<HttpTransport> {
    pub fn http(server: &str) -> Self {
        Client::new(HttpTransport::new(server))
    }
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Client { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Sends a request and decodes a success body; error bodies become
    /// [`ClientError::Api`].
    pub fn call<R: for<'de> Deserialize<'de>>(
        &self,
        method: Method,
        path: &str,
        body: &Value,
    ) -> Result<R, ClientError> {
        let reply = self.transport.send(method, path, body)?;
        if !(200..300).contains(&reply.status) {
            let err: ApiError = serde_json::from_value(reply.body.clone()).map_err(|_| {
                ClientError::Protocol(format!("status {} with body {}", reply.status, reply.body))
            })?;
            return Err(err.into());
        }
        serde_json::from_value(reply.body.clone())
            .map_err(|e| ClientError::Protocol(format!("{e}: {}", reply.body)))
    }

    pub fn register(
        &self,
        user_id: &str,
        p: u32,
        verifier: &Digest,
    ) -> Result<Registration, ClientError> {
        self.call(
            Method::Post,
            "/v1/register",
            &json!({"user_id": user_id, "p": p, "verifier_hex": verifier.to_hex(),
                    "alg": verifier.alg().id()}),
        )
    }

    pub fn begin_auth(&self, user_id: &str) -> Result<u32, ClientError> {
        let c: Challenge =
            self.call(Method::Post, "/v1/auth/begin", &json!({"user_id": user_id}))?;
        Ok(c.p)
    }

    pub fn complete_auth(&self, user_id: &str, token: &Digest) -> Result<Ticket, ClientError> {
        self.complete_auth_hex(user_id, &token.to_hex())
    }

    pub fn complete_auth_hex(&self, user_id: &str, token_hex: &str) -> Result<Ticket, ClientError> {
        self.call(
            Method::Post,
            "/v1/auth/complete",
            &json!({"user_id": user_id, "token_hex": token_hex}),
        )
    }

    pub fn reinit(
        &self,
        user_id: &str,
        token: &Digest,
        new_p: u32,
        new_verifier: &Digest,
    ) -> Result<Registration, ClientError> {
        self.call(
            Method::Post,
            "/v1/reinit",
            &json!({"user_id": user_id, "token_hex": token.to_hex(), "new_p": new_p,
                    "new_verifier_hex": new_verifier.to_hex()}),
        )
    }

    pub fn mine(&self, ticket_id: &str, task: &str, payload: Value) -> Result<Value, ClientError> {
        let reply: MineReply<Value> = self.call(
            Method::Post,
            "/v1/mine",
            &json!({"ticket_id": ticket_id, "task": task, "payload": payload}),
        )?;
        Ok(reply.result)
    }

    pub fn mine_kmeans(
        &self,
        ticket_id: &str,
        csv: &str,
        k: usize,
        max_iters: Option<usize>,
    ) -> Result<ClusteringResult, ClientError> {
        let mut payload = json!({"csv": csv, "k": k});
        if let Some(n) = max_iters {
            payload["max_iters"] = json!(n);
        }
        let value = self.mine(ticket_id, "kmeans", payload)?;
        serde_json::from_value(value).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn trust_list(&self) -> Result<Vec<String>, ClientError> {
        let r: RulesReply = self.call(Method::Get, "/v1/admin/trust", &Value::Null)?;
        Ok(r.rules)
    }

    pub fn trust_add(&self, cidr: &str) -> Result<Vec<String>, ClientError> {
        let r: RulesReply = self.call(Method::Post, "/v1/admin/trust", &json!({"cidr": cidr}))?;
        Ok(r.rules)
    }

    pub fn trust_remove(&self, cidr: &str) -> Result<Vec<String>, ClientError> {
        let r: RulesReply = self.call(Method::Delete, "/v1/admin/trust", &json!({"cidr": cidr}))?;
        Ok(r.rules)
    }

    pub fn lock_user(&self, user_id: &str) -> Result<Value, ClientError> {
        self.call(
            Method::Post,
            &format!("/v1/admin/users/{user_id}/lock"),
            &Value::Null,
        )
    }

    pub fn delete_user(&self, user_id: &str) -> Result<Value, ClientError> {
        self.call(
            Method::Delete,
            &format!("/v1/admin/users/{user_id}"),
            &Value::Null,
        )
    }
}

/// One user's chain, held on the client.
#[derive(Debug, Clone)]
pub struct ClientChain {
    user_id: String,
    passkey: Passkey,
    alg: HashAlg,
}

impl ClientChain {
    pub fn new(user_id: impl Into<String>, passkey: Passkey, alg: HashAlg) -> Self {
        ClientChain {
            user_id: user_id.into(),
            passkey,
            alg,
        }
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn alg(&self) -> HashAlg {
        self.alg
    }

    /// Registers `H^p(k)`. Rejects `p < 2` locally.
    pub fn init_chain<T: Transport>(
        &self,
        client: &Client<T>,
        p: u32,
    ) -> Result<Registration, ClientError> {
        if p < 2 {
            return Err(ClientError::local(
                ErrorCode::InvalidCounter,
                format!("counter must be at least 2, got {p}"),
            ));
        }
        let verifier = chain_digest(&self.passkey, p, self.alg).expect("p >= 1");
        client.register(&self.user_id, p, &verifier)
    }

    /// The answer to challenge `p`: `H^(p-1)(k)`. Refuses at `p < 2`, where
    /// the answer would be the passkey itself.
    pub fn next_token(&self, challenge_p: u32) -> Result<Digest, ClientError> {
        if challenge_p < 2 {
            return Err(ClientError::local(ErrorCode::ChainExhausted, REINIT_HINT));
        }
        Ok(chain_digest(&self.passkey, challenge_p - 1, self.alg).expect("p - 1 >= 1"))
    }

    /// Both login phases.
    pub fn authenticate<T: Transport>(&self, client: &Client<T>) -> Result<Ticket, ClientError> {
        let p = client.begin_auth(&self.user_id)?;
        let token = self.next_token(p)?;
        client.complete_auth(&self.user_id, &token)
    }

    /// Spends one token of the current chain to install `H^new_p(new_passkey)`.
    /// On success this chain switches to the new passkey.
    pub fn reinit_chain<T: Transport>(
        &mut self,
        client: &Client<T>,
        new_passkey: Passkey,
        new_p: u32,
    ) -> Result<Registration, ClientError> {
        if new_p < 2 {
            return Err(ClientError::local(
                ErrorCode::InvalidCounter,
                format!("counter must be at least 2, got {new_p}"),
            ));
        }
        let p = client.begin_auth(&self.user_id)?;
        let token = self.next_token(p)?;
        let verifier = chain_digest(&new_passkey, new_p, self.alg).expect("new_p >= 1");
        let reg = client.reinit(&self.user_id, &token, new_p, &verifier)?;
        self.passkey = new_passkey;
        Ok(reg)
    }
}

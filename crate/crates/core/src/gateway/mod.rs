//! Request pipeline: source-address trust, then user lookup, then
//! credential check, then the protected call.
//!
//! [`Gateway::handle`] is transport-agnostic; [`server`] adapts it to HTTP.
//! Error precedence is UNTRUSTED_ORIGIN, BAD_REQUEST, UNKNOWN_USER,
//! USER_LOCKED, CHAIN_EXHAUSTED, TOKEN_MISMATCH.

pub mod config;
pub mod server;

use std::fmt;
use std::net::IpAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::auth_agent::{AuthAgent, AuthError};
use crate::domain_trust::{TrustRule, TrustStore};
use crate::error::{ApiError, ErrorCode};
use crate::hash_chain::HashAlg;
use crate::mining::{check_params, kmeans, parse_dataset};

pub use config::GatewayConfig;
pub use server::{serve, serve_gateway, ServerHandle, StartupError};

pub const DEFAULT_MAX_BODY: usize = 64 * 1024;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Post,
    Delete,
    /// Any other HTTP method; always routed to BAD_REQUEST after trust.
    Other,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Delete => "DELETE",
            Method::Other => "OTHER",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: Method,
    pub path: String,
    pub body: Vec<u8>,
    /// Socket peer address.
    pub peer: IpAddr,
    /// Raw `X-Forwarded-For` value, honored only when enabled.
    pub forwarded_for: Option<String>,
}

impl Request {
    pub fn new(method: Method, path: impl Into<String>, body: &Value, peer: IpAddr) -> Self {
        Request {
            method,
            path: path.into(),
            body: if body.is_null() {
                Vec::new()
            } else {
                serde_json::to_vec(body).expect("json value serializes")
            },
            peer,
            forwarded_for: None,
        }
    }
}

/// Either a result body or exactly one error code, never both.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn ok(status: u16, body: Value) -> Self {
        Response { status, body }
    }

    fn error(err: ApiError) -> Self {
        Response {
            status: err.error.status(),
            body: serde_json::to_value(&err).expect("error serializes"),
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.body
            .get("error")
            .and_then(Value::as_str)
            .and_then(|s| s.parse().ok())
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub default_alg: HashAlg,
    pub allow_md5: bool,
    pub trust_forwarded: bool,
    pub max_body: usize,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        GatewayOptions {
            default_alg: HashAlg::Sha256,
            allow_md5: false,
            trust_forwarded: false,
            max_body: DEFAULT_MAX_BODY,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    user_id: String,
    p: u32,
    verifier_hex: String,
    alg: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BeginBody {
    user_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompleteBody {
    user_id: String,
    token_hex: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReinitBody {
    user_id: String,
    token_hex: String,
    new_p: u32,
    new_verifier_hex: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MineBody {
    ticket_id: String,
    task: String,
    payload: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KmeansPayload {
    csv: String,
    k: usize,
    max_iters: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CidrBody {
    cidr: String,
}

type Outcome = Result<Response, ApiError>;

/// The network-facing service state. Shared across request handlers.
pub struct Gateway {
    agent: AuthAgent,
    trust: RwLock<Arc<TrustStore>>,
    admin_trust: TrustStore,
    trust_path: Option<PathBuf>,
    // Serializes trust-store writers.
    trust_writer: Mutex<()>,
    options: GatewayOptions,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("agent", &self.agent)
            .field("trust", &self.trust.read().unwrap())
            .field("admin_trust", &self.admin_trust)
            .field("options", &self.options)
            .finish()
    }
}

impl Gateway {
    /// `admin_trust` gates registration and `/v1/admin/*`, on top of `trust`.
    pub fn new(agent: AuthAgent, trust: TrustStore, admin_trust: TrustStore) -> Self {
        Gateway {
            agent,
            trust: RwLock::new(Arc::new(trust)),
            admin_trust,
            trust_path: None,
            trust_writer: Mutex::new(()),
            options: GatewayOptions::default(),
        }
    }

    /// Persist trust-store changes to `path`.
    pub fn with_trust_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.trust_path = Some(path.into());
        self
    }

    pub fn with_options(mut self, options: GatewayOptions) -> Self {
        self.options = options;
        self
    }

    pub fn agent(&self) -> &AuthAgent {
        &self.agent
    }

    pub fn trust_store(&self) -> Arc<TrustStore> {
        self.trust.read().unwrap().clone()
    }

    pub fn options(&self) -> &GatewayOptions {
        &self.options
    }

    fn source_ip(&self, req: &Request) -> IpAddr {
        if self.options.trust_forwarded {
            let first = req
                .forwarded_for
                .as_deref()
                .and_then(|v| v.split(',').next())
                .and_then(|s| s.trim().parse().ok());
            if let Some(ip) = first {
                return ip;
            }
        }
        req.peer
    }

    fn check_origin(&self, req: &Request) -> Result<IpAddr, ApiError> {
        let ip = self.source_ip(req);
        if self.trust.read().unwrap().is_trusted(ip) {
            Ok(ip)
        } else {
            Err(ApiError::new(
                ErrorCode::UntrustedOrigin,
                format!("{ip} is not in a trusted domain"),
            ))
        }
    }

    /// For transports that stop reading at `max_body`: trust check, then
    /// BAD_REQUEST.
    pub fn reject_oversized(&self, req: &Request) -> Response {
        let err = self.check_origin(req).err().unwrap_or_else(|| {
            ApiError::bad_request(format!("body exceeds {} bytes", self.options.max_body))
        });
        Response::error(err)
    }

    pub fn handle(&self, req: &Request) -> Response {
        let ip = match self.check_origin(req) {
            Ok(ip) => ip,
            Err(e) => return Response::error(e),
        };
        if req.body.len() > self.options.max_body {
            return Response::error(ApiError::bad_request(format!(
                "body exceeds {} bytes",
                self.options.max_body
            )));
        }
        match self.route(req, ip) {
            Ok(resp) => resp,
            Err(err) => Response::error(err),
        }
    }

    fn route(&self, req: &Request, ip: IpAddr) -> Outcome {
        let segments: Vec<&str> = req
            .path
            .strip_prefix("/v1/")
            .map(|rest| rest.split('/').collect())
            .unwrap_or_default();
        match (req.method, segments.as_slice()) {
            (Method::Post, ["register"]) => {
                self.require_admin(ip)?;
                self.register(parse_body(req)?)
            }
            (Method::Post, ["auth", "begin"]) => self.begin(parse_body(req)?),
            (Method::Post, ["auth", "complete"]) => self.complete(parse_body(req)?),
            (Method::Post, ["reinit"]) => self.reinit(parse_body(req)?),
            (Method::Post, ["mine"]) => self.mine(parse_body(req)?),
            (method, ["admin", "trust"]) => {
                self.require_admin(ip)?;
                self.admin_trust_op(method, req)
            }
            (Method::Delete, ["admin", "users", user_id]) => {
                self.require_admin(ip)?;
                self.agent.admin_delete_user(user_id)?;
                Ok(Response::ok(
                    200,
                    json!({"user_id": user_id, "status": "deleted"}),
                ))
            }
            (Method::Post, ["admin", "users", user_id, "lock"]) => {
                self.require_admin(ip)?;
                let rec = self.agent.admin_lock(user_id)?;
                Ok(Response::ok(
                    200,
                    json!({"user_id": rec.user_id(), "status": rec.status().as_str()}),
                ))
            }
            _ => Err(ApiError::bad_request(format!(
                "no route for {} {}",
                req.method, req.path
            ))),
        }
    }

    fn require_admin(&self, ip: IpAddr) -> Result<(), ApiError> {
        if self.admin_trust.is_trusted(ip) {
            Ok(())
        } else {
            Err(ApiError::new(
                ErrorCode::UntrustedOrigin,
                format!("{ip} may not use administrative endpoints"),
            ))
        }
    }

    fn register(&self, body: RegisterBody) -> Outcome {
        let alg = match body.alg.as_deref() {
            None => self.options.default_alg,
            Some(text) => text
                .parse::<HashAlg>()
                .map_err(|e| ApiError::bad_request(e.to_string()))?,
        };
        if alg == HashAlg::Md5 && !self.options.allow_md5 {
            return Err(ApiError::bad_request(
                "md5 chains are disabled on this server",
            ));
        }
        let rec = self
            .agent
            .register_hex(&body.user_id, body.p, &body.verifier_hex, alg)?;
        Ok(Response::ok(
            201,
            json!({"user_id": rec.user_id(), "p": rec.counter()}),
        ))
    }

    fn begin(&self, body: BeginBody) -> Outcome {
        let challenge = self.agent.begin_auth(&body.user_id)?;
        Ok(Response::ok(200, json!({"p": challenge.counter})))
    }

    fn complete(&self, body: CompleteBody) -> Outcome {
        let token = decode_hex(&body.token_hex)?;
        let ticket = self.agent.complete_auth_bytes(&body.user_id, &token)?;
        Ok(Response::ok(
            200,
            json!({"ticket_id": ticket.ticket_id, "ttl_seconds": ticket.ttl.as_secs()}),
        ))
    }

    fn reinit(&self, body: ReinitBody) -> Outcome {
        let token = decode_hex(&body.token_hex)?;
        let rec =
            self.agent
                .reinit_hex(&body.user_id, &token, body.new_p, &body.new_verifier_hex)?;
        Ok(Response::ok(
            200,
            json!({"user_id": rec.user_id(), "p": rec.counter()}),
        ))
    }

    fn mine(&self, body: MineBody) -> Outcome {
        if body.task != "kmeans" {
            return Err(ApiError::bad_request(format!(
                "unsupported task `{}`",
                body.task
            )));
        }
        let payload: KmeansPayload = serde_json::from_value(body.payload)
            .map_err(|e| ApiError::bad_request(format!("payload: {e}")))?;
        let mining_err =
            |e: crate::mining::MiningError| ApiError::bad_request(format!("{}: {e}", e.code()));
        let data = parse_dataset(&payload.csv).map_err(mining_err)?;
        let max_iters = payload.max_iters.unwrap_or(DEFAULT_MAX_ITERS);
        // Reject bad parameters before spending the ticket.
        check_params(&data, payload.k, max_iters).map_err(mining_err)?;
        self.agent.redeem_ticket(&body.ticket_id)?;
        let result = kmeans(&data, payload.k, max_iters).map_err(mining_err)?;
        Ok(Response::ok(200, json!({"result": result})))
    }

    fn admin_trust_op(&self, method: Method, req: &Request) -> Outcome {
        if method == Method::Get {
            return Ok(Response::ok(200, self.rules_body()));
        }
        let body: CidrBody = parse_body(req)?;
        let rule: TrustRule = body
            .cidr
            .parse()
            .map_err(|e: crate::domain_trust::TrustError| ApiError::bad_request(e.to_string()))?;

        let _writer = self.trust_writer.lock().unwrap();
        let mut next = (**self.trust.read().unwrap()).clone();
        match method {
            Method::Post => next.add_rule(rule),
            Method::Delete => next.remove_rule(&rule),
            Method::Get | Method::Other => {
                return Err(ApiError::bad_request(format!(
                    "no route for {method} /v1/admin/trust"
                )))
            }
        };
        if let Some(path) = &self.trust_path {
            next.save(path)
                .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
        }
        *self.trust.write().unwrap() = Arc::new(next);
        Ok(Response::ok(200, self.rules_body()))
    }

    fn rules_body(&self) -> Value {
        let rules: Vec<String> = self
            .trust
            .read()
            .unwrap()
            .list_rules()
            .iter()
            .map(ToString::to_string)
            .collect();
        json!({ "rules": rules })
    }
}

fn parse_body<T: DeserializeOwned>(req: &Request) -> Result<T, ApiError> {
    serde_json::from_slice(&req.body).map_err(|e| ApiError::bad_request(format!("body: {e}")))
}

fn decode_hex(text: &str) -> Result<Vec<u8>, ApiError> {
    if text.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(ApiError::new(ErrorCode::BadDigest, "hex must be lowercase"));
    }
    hex::decode(text).map_err(|e| ApiError::new(ErrorCode::BadDigest, e.to_string()))
}

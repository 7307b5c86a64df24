//! HTTP adapter around [`Gateway::handle`].

use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::{to_bytes, Body};
use axum::extract::{ConnectInfo, State};
use axum::http::{header, HeaderMap, StatusCode, Uri};
use tokio::sync::oneshot;

use super::{Gateway, GatewayConfig, GatewayOptions, Method, Request};
use crate::auth_agent::{AuthAgent, UserDbError};
use crate::domain_trust::{TrustError, TrustStore};

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    UserDb(#[from] UserDbError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error("cannot create {path}: {source}")]
    Create {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("cannot start runtime: {0}")]
    Runtime(#[source] io::Error),
}

fn create_if_missing(path: &Path, contents: &str) -> Result<(), StartupError> {
    if path.exists() {
        return Ok(());
    }
    std::fs::write(path, contents).map_err(|source| StartupError::Create {
        path: path.to_path_buf(),
        source,
    })
}

impl Gateway {
    /// Loads the user database and trust files named by `config`.
    pub fn from_config(config: &GatewayConfig) -> Result<Self, StartupError> {
        config.validate().map_err(StartupError::Config)?;
        if config.create_missing {
            create_if_missing(&config.user_db_path, "")?;
            create_if_missing(&config.trust_path, &TrustStore::loopback().render())?;
        }
        let agent = AuthAgent::open(&config.user_db_path)?.with_ticket_ttl(config.ticket_ttl);
        let trust = TrustStore::load(&config.trust_path)?;
        let admin = match &config.admin_trust_path {
            Some(path) => TrustStore::load(path)?,
            None => TrustStore::loopback(),
        };
        Ok(Gateway::new(agent, trust, admin)
            .with_trust_path(&config.trust_path)
            .with_options(GatewayOptions {
                default_alg: config.default_alg,
                allow_md5: config.allow_md5,
                trust_forwarded: config.trust_forwarded,
                max_body: config.max_body,
            }))
    }
}

/// A gateway serving on a background thread. Dropping the handle shuts the
/// server down and waits for in-flight requests.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    gateway: Arc<Gateway>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://host:port`
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    /// Stops accepting connections and drains in-flight requests.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    /// Blocks until the server exits on its own (listener failure).
    pub fn wait(mut self) -> io::Result<()> {
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    fn stop(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Loads state from `config`, binds, and starts serving.
pub fn serve(config: &GatewayConfig) -> Result<ServerHandle, StartupError> {
    let gateway = Arc::new(Gateway::from_config(config)?);
    serve_gateway(gateway, &config.bind_address)
}

/// Serves an already-built gateway.
pub fn serve_gateway(gateway: Arc<Gateway>, bind: &str) -> Result<ServerHandle, StartupError> {
    let bind_err = |source| StartupError::Bind {
        addr: bind.to_string(),
        source,
    };
    let listener = std::net::TcpListener::bind(bind).map_err(bind_err)?;
    listener.set_nonblocking(true).map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(StartupError::Runtime)?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = axum::Router::new()
        .fallback(dispatch)
        .with_state(gateway.clone());

    let thread = std::thread::Builder::new()
        .name(format!("otpk-gateway-{}", addr.port()))
        .spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(
                    listener,
                    app.into_make_service_with_connect_info::<SocketAddr>(),
                )
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
            })
        })
        .map_err(StartupError::Runtime)?;

    Ok(ServerHandle {
        addr,
        gateway,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

async fn dispatch(
    State(gateway): State<Arc<Gateway>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    method: axum::http::Method,
    uri: Uri,
    headers: HeaderMap,
    body: Body,
) -> axum::response::Response {
    let method = match method {
        axum::http::Method::GET => Method::Get,
        axum::http::Method::POST => Method::Post,
        axum::http::Method::DELETE => Method::Delete,
        _ => Method::Other,
    };
    let max_body = gateway.options().max_body;
    let (body, oversized) = match to_bytes(body, max_body).await {
        Ok(bytes) => (bytes.to_vec(), false),
        Err(_) => (Vec::new(), true),
    };
    let req = Request {
        method,
        path: uri.path().to_string(),
        body,
        peer: peer.ip(),
        forwarded_for: headers
            .get("x-forwarded-for")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    };
    let resp = tokio::task::spawn_blocking(move || {
        if oversized {
            gateway.reject_oversized(&req)
        } else {
            gateway.handle(&req)
        }
    })
    .await
    .expect("gateway handler panicked");

    axum::response::Response::builder()
        .status(StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(resp.body.to_string()))
        .expect("valid response")
}

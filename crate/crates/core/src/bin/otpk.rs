use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use otpk::attack::{self, Outcome, Report, Transcript};
use otpk::auth_agent::userdb;
use otpk::client::{Client, ClientChain, ClientError, HttpTransport, Recording, REINIT_HINT};
use otpk::gateway::{serve, GatewayConfig};
use otpk::{chain, ErrorCode, HashAlg, Passkey};

#[derive(Parser)]
#[command(
    name = "otpk",
    version,
    about = "Hash-chain one-time passkey client, server and attack harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print H^count(passkey) as hex.
    Chain {
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long)]
        count: u32,
        #[arg(long, default_value = "sha256")]
        alg: HashAlg,
    },
    /// Register a new chain of length `count`.
    Init {
        #[command(flatten)]
        user: UserArgs,
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long)]
        count: u32,
    },
    /// Log in and print the session ticket.
    Auth {
        #[command(flatten)]
        user: UserArgs,
        #[command(flatten)]
        key: KeyArgs,
        /// Append the exchanged messages to this JSONL file.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run a mining task with a ticket and print the result as JSON.
    Mine {
        #[arg(long)]
        server: String,
        #[arg(long)]
        ticket: String,
        #[arg(long)]
        task: String,
        /// CSV of numeric points, one per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Spend one token of the current chain to install a new one.
    Reinit {
        #[command(flatten)]
        user: UserArgs,
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long)]
        new_count: u32,
        #[arg(long, env = "OTPK_NEW_PASSKEY", hide_env_values = true)]
        new_passkey: Option<String>,
    },
    Admin {
        #[command(subcommand)]
        cmd: AdminCmd,
    },
    /// Run the gateway until interrupted.
    Serve(ServeArgs),
    Attack {
        #[command(subcommand)]
        cmd: AttackCmd,
    },
}

#[derive(Args)]
struct UserArgs {
    #[arg(long)]
    server: String,
    #[arg(long)]
    user: String,
    #[arg(long, default_value = "sha256")]
    alg: HashAlg,
}

#[derive(Args)]
struct KeyArgs {
    /// Prompted for when neither the flag nor OTPK_PASSKEY is set.
    #[arg(long, env = "OTPK_PASSKEY", hide_env_values = true)]
    passkey: Option<String>,
}

#[derive(Subcommand)]
enum AdminCmd {
    Trust {
        #[arg(long, global = true, default_value = "127.0.0.1:7878")]
        server: String,
        #[command(subcommand)]
        cmd: TrustCmd,
    },
    User {
        #[arg(long, global = true, default_value = "127.0.0.1:7878")]
        server: String,
        #[command(subcommand)]
        cmd: UserCmd,
    },
}

#[derive(Subcommand)]
enum TrustCmd {
    Add { cidr: String },
    Rm { cidr: String },
    List,
}

#[derive(Subcommand)]
enum UserCmd {
    Lock { user: String },
    Rm { user: String },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: String,
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    trust: PathBuf,
    /// Networks allowed to register users and use admin endpoints.
    /// Loopback only when omitted.
    #[arg(long)]
    admin_trust: Option<PathBuf>,
    #[arg(long, default_value = "sha256")]
    alg: HashAlg,
    #[arg(long, default_value_t = 60)]
    ticket_ttl: u64,
    #[arg(long)]
    max_body: Option<usize>,
    #[arg(long)]
    trust_forwarded: bool,
    #[arg(long)]
    allow_md5: bool,
    /// Create missing database and trust files.
    #[arg(long)]
    create: bool,
}

#[derive(Subcommand)]
enum AttackCmd {
    /// Resubmit every captured token.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        server: String,
    },
    /// Present stolen verifiers from a user database as tokens.
    Dbcomp {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        server: String,
        /// Only attack this user.
        #[arg(long)]
        user: Option<String>,
    },
    /// Offline wordlist search against each captured session.
    Dict {
        #[arg(long)]
        transcript: PathBuf,
        /// One candidate per line.
        #[arg(long)]
        wordlist: PathBuf,
        #[arg(long, default_value = "sha256")]
        alg: HashAlg,
    },
}

enum Failure {
    Api(otpk::ApiError),
    Other(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api(api) => Failure::Api(api),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Other(s)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Api(e)) => {
            eprintln!("{}: {}", e.error, e.message);
            if e.error == ErrorCode::ChainExhausted {
                eprintln!("hint: {REINIT_HINT}");
            }
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read_passkey(flag: Option<String>, prompt: &str) -> Result<Passkey, Failure> {
    let raw = match flag {
        Some(k) => k,
        None => rpassword::prompt_password(prompt).map_err(|e| format!("reading passkey: {e}"))?,
    };
    Passkey::new(raw).map_err(|e| Failure::Other(e.to_string()))
}

fn run(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Chain { key, count, alg } => {
            let k = read_passkey(key.passkey, "passkey: ")?;
            println!("{}", hex::encode(chain(&k, count, alg)));
        }
        Cmd::Init { user, key, count } => {
            let c = ClientChain::new(user.user, read_passkey(key.passkey, "passkey: ")?, user.alg);
            let reg = c.init_chain(&Client::http(&user.server), count)?;
            println!("registered {} p={}", reg.user_id, reg.p);
        }
        Cmd::Auth {
            user,
            key,
            transcript,
        } => {
            let c = ClientChain::new(user.user, read_passkey(key.passkey, "passkey: ")?, user.alg);
            match transcript {
                None => {
                    let ticket = c.authenticate(&Client::http(&user.server))?;
                    println!("{}", ticket.ticket_id);
                }
                Some(path) => {
                    let client = Client::new(Recording::new(HttpTransport::new(&user.server)));
                    let result = c.authenticate(&client);
                    client
                        .transport()
                        .transcript()
                        .append_to(&path)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    println!("{}", result?.ticket_id);
                }
            }
        }
        Cmd::Mine {
            server,
            ticket,
            task,
            input,
            k,
            max_iters,
        } => {
            let csv =
                std::fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let mut payload = serde_json::json!({"csv": csv, "k": k});
            if let Some(n) = max_iters {
                payload["max_iters"] = n.into();
            }
            let result = Client::http(&server).mine(&ticket, &task, payload)?;
            println!("{result}");
        }
        Cmd::Reinit {
            user,
            key,
            new_count,
            new_passkey,
        } => {
            let mut c = ClientChain::new(
                user.user,
                read_passkey(key.passkey, "current passkey: ")?,
                user.alg,
            );
            let fresh = read_passkey(new_passkey, "new passkey: ")?;
            let reg = c.reinit_chain(&Client::http(&user.server), fresh, new_count)?;
            println!("reinitialized {} p={}", reg.user_id, reg.p);
        }
        Cmd::Admin { cmd } => admin(cmd)?,
        Cmd::Serve(args) => run_server(args)?,
        Cmd::Attack { cmd } => run_attack(cmd)?,
    }
    Ok(())
}

fn admin(cmd: AdminCmd) -> CmdResult {
    match cmd {
        AdminCmd::Trust { server, cmd } => {
            let client = Client::http(&server);
            let rules = match cmd {
                TrustCmd::Add { cidr } => client.trust_add(&cidr)?,
                TrustCmd::Rm { cidr } => client.trust_remove(&cidr)?,
                TrustCmd::List => client.trust_list()?,
            };
            for r in rules {
                println!("{r}");
            }
        }
        AdminCmd::User { server, cmd } => {
            let client = Client::http(&server);
            let reply = match cmd {
                UserCmd::Lock { user } => client.lock_user(&user)?,
                UserCmd::Rm { user } => client.delete_user(&user)?,
            };
            println!(
                "{} {}",
                reply["user_id"].as_str().unwrap_or(""),
                reply["status"].as_str().unwrap_or("")
            );
        }
    }
    Ok(())
}

fn run_server(args: ServeArgs) -> CmdResult {
    let mut config = GatewayConfig::new(args.bind, args.db, args.trust);
    config.admin_trust_path = args.admin_trust;
    config.default_alg = args.alg;
    config.ticket_ttl = Duration::from_secs(args.ticket_ttl);
    if let Some(n) = args.max_body {
        config.max_body = n;
    }
    config.trust_forwarded = args.trust_forwarded;
    config.allow_md5 = args.allow_md5;
    config.create_missing = args.create;
    config.apply_env(std::env::vars())?;

    let handle = serve(&config).map_err(|e| e.to_string())?;
    println!("listening on {}", handle.url());
    let _ = std::io::stdout().flush();

    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(shutdown_signal());
    eprintln!("shutting down");
    handle.shutdown().map_err(|e| e.to_string())?;
    Ok(())
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        if let Ok(mut term) = signal(SignalKind::terminate()) {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
            return;
        }
    }
    let _ = tokio::signal::ctrl_c().await;
}

fn run_attack(cmd: AttackCmd) -> CmdResult {
    let report = match cmd {
        AttackCmd::Replay { transcript, server } => {
            let t = Transcript::load(&transcript)?;
            attack::replay_attack(&t, &Client::http(&server))
        }
        AttackCmd::Dbcomp { db, server, user } => {
            let records = userdb::load(&db).map_err(|e| e.to_string())?;
            let client = Client::http(&server);
            let attempts = records
                .values()
                .filter(|r| user.as_deref().is_none_or(|u| u == r.user_id()))
                .map(|r| attack::db_compromise_attack(r, &client))
                .collect();
            Report { attempts }
        }
        AttackCmd::Dict {
            transcript,
            wordlist,
            alg,
        } => {
            let t = Transcript::load(&transcript)?;
            let words = read_words(&wordlist)?;
            let mut attempts = Vec::new();
            for s in t.sessions() {
                match attack::crack_session(&s, words.iter().map(String::as_str), alg) {
                    Some(key) => {
                        eprintln!("recovered passkey for {}: {key}", s.user_id);
                        attempts.push(Outcome::Accepted);
                    }
                    None => attempts.push(Outcome::Rejected(None)),
                }
            }
            Report { attempts }
        }
    };
    print!("{}", report.render());
    Ok(())
}

fn read_words(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

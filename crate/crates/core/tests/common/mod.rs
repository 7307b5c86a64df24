#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use otpk::gateway::{serve, GatewayConfig, ServerHandle};

pub const BIN: &str = env!("CARGO_BIN_EXE_otpk");

pub struct Env {
    pub dir: tempfile::TempDir,
}

impl Env {
    pub fn new() -> Self {
        Env {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn db(&self) -> PathBuf {
        self.dir.path().join("users.tsv")
    }

    pub fn trust(&self) -> PathBuf {
        self.dir.path().join("trust.txt")
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> GatewayConfig {
        let mut c = GatewayConfig::new("127.0.0.1:0", self.db(), self.trust());
        c.create_missing = true;
        c
    }

    /// In-process server on an ephemeral port.
    pub fn serve(&self) -> ServerHandle {
        serve(&self.config()).unwrap()
    }
}

/// `otpk serve` as a child process. Killed on drop.
pub struct ServeProc {
    pub child: Child,
    pub addr: String,
}

impl ServeProc {
    pub fn start(db: &Path, trust: &Path, extra: &[&str]) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve", "--bind", "127.0.0.1:0", "--db"])
            .arg(db)
            .arg("--trust")
            .arg(trust)
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on http://")
            .unwrap_or_else(|| panic!("unexpected serve output {line:?}"))
            .to_string();
        ServeProc { child, addr }
    }

    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for ServeProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs the CLI with `OTPK_*` variables cleared except those given.
pub fn otpk(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).stdin(Stdio::null());
    for (k, _) in std::env::vars() {
        if k.starts_with("OTPK_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// First token of the first stderr line, e.g. `CHAIN_EXHAUSTED`.
pub fn error_code(o: &Output) -> String {
    stderr(o)
        .lines()
        .next()
        .unwrap_or("")
        .split(':')
        .next()
        .unwrap_or("")
        .to_string()
}

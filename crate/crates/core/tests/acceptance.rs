//! Acceptance suite. One line per criterion:
//!
//!     PASS  <n> <name>: <detail>
//!     FAIL  <n> <name>: <detail>
//!
//! Randomized criteria draw from a seeded RNG; set `OTPK_ACCEPT_SEED` to
//! reproduce a run. Exits non-zero if any criterion fails.

mod common;

use std::net::IpAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use common::*;
use otpk::attack::{db_compromise_attack, dictionary_attack, replay_attack, Report};
use otpk::auth_agent::userdb;
use otpk::client::{Client, ClientChain, LocalTransport, Recording};
use otpk::gateway::Gateway;
use otpk::{chain, chain_digest, hash_once, AuthAgent, ErrorCode, HashAlg, Passkey, TrustStore};

const CAPACITY_BUDGET: Duration = Duration::from_secs(5);
const FUZZ_BUDGET: Duration = Duration::from_secs(2);
const CENTROID_TOL: f64 = 1e-9;

type Check = Result<String, String>;
type Criterion = (&'static str, Box<dyn FnOnce(&mut StdRng) -> Check>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_passkey(rng: &mut StdRng) -> Passkey {
    let bytes: [u8; 16] = rng.random();
    Passkey::new(hex::encode(bytes)).unwrap()
}

fn c1_chain_capacity() -> Check {
    let env = Env::new();
    let server = env.serve();
    let addr = server.local_addr().to_string();
    let key = [("OTPK_PASSKEY", "capacity-key")];
    let started = Instant::now();
    let o = otpk(
        &["init", "--server", &addr, "--user", "cap", "--count", "10"],
        &key,
    );
    ensure(o.status.success(), format!("init failed: {}", stderr(&o)))?;
    let mut ok = 0;
    for _ in 0..9 {
        if otpk(&["auth", "--server", &addr, "--user", "cap"], &key)
            .status
            .success()
        {
            ok += 1;
        }
    }
    let tenth = otpk(&["auth", "--server", &addr, "--user", "cap"], &key);
    let elapsed = started.elapsed();
    ensure(ok == 9, format!("{ok}/9 auths succeeded"))?;
    ensure(
        tenth.status.code() == Some(3) && error_code(&tenth) == "CHAIN_EXHAUSTED",
        format!(
            "10th auth: exit {:?}, stderr {:?}",
            tenth.status.code(),
            stderr(&tenth)
        ),
    )?;
    ensure(elapsed < CAPACITY_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("9/9 then CHAIN_EXHAUSTED in {elapsed:.2?}"))
}

fn c2_rotation() -> Check {
    let env = Env::new();
    let server = env.serve();
    let addr = server.local_addr().to_string();
    let key = [("OTPK_PASSKEY", "rotation-key")];
    otpk(
        &["init", "--server", &addr, "--user", "rot", "--count", "10"],
        &key,
    );
    let stored = || userdb::load(&env.db()).unwrap()["rot"].clone();
    let mut prev = stored();
    let mut good = 0;
    for i in 1..=9 {
        let o = otpk(&["auth", "--server", &addr, "--user", "rot"], &key);
        ensure(
            o.status.success(),
            format!("auth {i} failed: {}", stderr(&o)),
        )?;
        let now = stored();
        if hash_once(now.verifier().as_bytes(), now.alg()) == *prev.verifier()
            && now.counter() == prev.counter() - 1
        {
            good += 1;
        }
        prev = now;
    }
    ensure(good == 9, format!("{good}/9 rotations verified"))?;
    Ok("9/9 rotations verified against the db file".into())
}

fn c3_replay(rng: &mut StdRng) -> Check {
    let env = Env::new();
    let server = env.serve();
    let attacker = Client::http(&server.url());
    let mut report = Report::default();
    for i in 0..100 {
        let wire = Client::new(Recording::new(otpk::client::HttpTransport::new(
            &server.url(),
        )));
        let p = rng.random_range(2..=16);
        let c = ClientChain::new(format!("replay{i}"), random_passkey(rng), HashAlg::Sha256);
        c.init_chain(&wire, p).map_err(|e| e.to_string())?;
        c.authenticate(&wire).map_err(|e| e.to_string())?;
        report.extend(replay_attack(&wire.transport().transcript(), &attacker));
    }
    ensure(
        report.accepted() == 0 && report.rejected() == 100,
        format!(
            "accepted={} rejected={}",
            report.accepted(),
            report.rejected()
        ),
    )?;
    Ok("accepted=0 rejected=100".into())
}

fn c4_db_compromise(rng: &mut StdRng) -> Check {
    let env = Env::new();
    let server = env.serve();
    let client = Client::http(&server.url());
    for i in 0..100 {
        let p = rng.random_range(2..=16);
        let c = ClientChain::new(format!("victim{i}"), random_passkey(rng), HashAlg::Sha256);
        c.init_chain(&client, p).map_err(|e| e.to_string())?;
        for _ in 0..rng.random_range(0..p) {
            c.authenticate(&client).map_err(|e| e.to_string())?;
        }
    }
    let stolen = userdb::load(&env.db()).map_err(|e| e.to_string())?;
    ensure(
        stolen.len() == 100,
        format!("{} records on disk", stolen.len()),
    )?;
    let report = Report {
        attempts: stolen
            .values()
            .map(|r| db_compromise_attack(r, &client))
            .collect(),
    };
    ensure(
        report.accepted() == 0,
        format!("accepted={}", report.accepted()),
    )?;
    Ok(format!("accepted=0 rejected={}", report.rejected()))
}

fn c5_pipeline() -> Check {
    let gw = Arc::new(Gateway::new(
        AuthAgent::in_memory(),
        TrustStore::loopback(),
        TrustStore::loopback(),
    ));
    let k = Passkey::new("pipeline").unwrap();
    let trusted: IpAddr = "127.0.0.1".parse().unwrap();
    let untrusted: IpAddr = "203.0.113.5".parse().unwrap();
    let mut passed = 0;
    let mut detail = Vec::new();
    for (case, (is_trusted, known, valid)) in [false, true]
        .into_iter()
        .flat_map(|t| {
            [false, true]
                .into_iter()
                .flat_map(move |k| [false, true].map(move |v| (t, k, v)))
        })
        .enumerate()
    {
        let user = format!("pipe{case}");
        if known {
            gw.agent()
                .register(&user, 10, chain_digest(&k, 10, HashAlg::Sha256).unwrap())
                .unwrap();
        }
        let token = if valid {
            chain_digest(&k, 9, HashAlg::Sha256)
        } else {
            chain_digest(&k, 3, HashAlg::Sha256)
        };
        let client = Client::new(LocalTransport::new(
            gw.clone(),
            if is_trusted { trusted } else { untrusted },
        ));
        let got = client
            .complete_auth(&user, &token.unwrap())
            .err()
            .and_then(|e| e.code());
        let want = match (is_trusted, known, valid) {
            (false, _, _) => Some(ErrorCode::UntrustedOrigin),
            (true, false, _) => Some(ErrorCode::UnknownUser),
            (true, true, false) => Some(ErrorCode::TokenMismatch),
            (true, true, true) => None,
        };
        if got == want {
            passed += 1;
        } else {
            detail.push(format!(
                "trusted={is_trusted} known={known} valid={valid}: got {got:?} want {want:?}"
            ));
        }
    }
    ensure(passed == 8, format!("{passed}/8; {}", detail.join("; ")))?;
    Ok("8/8 cases".into())
}

fn c6_composition(rng: &mut StdRng) -> Check {
    let cases: Vec<(Passkey, u32)> = (0..1000)
        .map(|_| {
            let len = rng.random_range(1..=64);
            let key: String = (0..len).map(|_| rng.random_range(' '..='~')).collect();
            (Passkey::new(key).unwrap(), rng.random_range(1..=32))
        })
        .collect();
    let started = Instant::now();
    let good = cases
        .iter()
        .filter(|(k, p)| {
            hash_once(&chain(k, p - 1, HashAlg::Sha256), HashAlg::Sha256).as_bytes()
                == chain(k, *p, HashAlg::Sha256)
        })
        .count();
    let elapsed = started.elapsed();
    ensure(good == 1000, format!("{good}/1000"))?;
    ensure(elapsed < FUZZ_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("1000/1000 in {elapsed:.2?}"))
}

fn c7_one_winner() -> Check {
    let env = Env::new();
    let server = env.serve();
    let url = server.url();
    for rep in 0..20 {
        let user = format!("race{rep}");
        let k = Passkey::new(format!("race-key-{rep}")).unwrap();
        let admin = Client::http(&url);
        admin
            .register(&user, 10, &chain_digest(&k, 10, HashAlg::Sha256).unwrap())
            .map_err(|e| e.to_string())?;
        let token = chain_digest(&k, 9, HashAlg::Sha256).unwrap();
        let barrier = Arc::new(Barrier::new(16));
        let handles: Vec<_> = (0..16)
            .map(|_| {
                let (url, user, token, barrier) =
                    (url.clone(), user.clone(), token.clone(), barrier.clone());
                std::thread::spawn(move || {
                    let client = Client::http(&url);
                    barrier.wait();
                    client.complete_auth(&user, &token).map_err(|e| e.code())
                })
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        let wins = results.iter().filter(|r| r.is_ok()).count();
        let mismatches = results
            .iter()
            .filter(|r| **r == Err(Some(ErrorCode::TokenMismatch)))
            .count();
        ensure(
            wins == 1 && mismatches == 15,
            format!("rep {rep}: {wins} winners, {mismatches} TOKEN_MISMATCH"),
        )?;
    }
    Ok("1 winner + 15 TOKEN_MISMATCH in 20/20 repetitions".into())
}

fn c8_interop() -> Check {
    const FROZEN: &str = "2bb80d537b1da3e38bd30361aa855686bde0eacd7162fef6a25fe97bf527a25b";
    let o = otpk(
        &[
            "chain",
            "--passkey",
            "secret",
            "--count",
            "1",
            "--alg",
            "sha256",
        ],
        &[],
    );
    let ours = stdout(&o).trim().to_string();
    let reference = std::process::Command::new("sh")
        .args(["-c", "printf %s secret | sha256sum"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .and_then(|s| s.split_whitespace().next().map(str::to_string));
    ensure(ours == FROZEN, format!("otpk printed {ours:?}"))?;
    match reference {
        Some(r) => {
            ensure(r == ours, format!("sha256sum printed {r}"))?;
            Ok(format!("{ours} == sha256sum"))
        }
        None => Ok(format!(
            "{ours} == frozen sha256sum vector (tool unavailable)"
        )),
    }
}

fn c9_durability() -> Check {
    let env = Env::new();
    let key = [("OTPK_PASSKEY", "durable-key")];
    let srv = ServeProc::start(&env.db(), &env.trust(), &["--create"]);
    let o = otpk(
        &[
            "init", "--server", &srv.addr, "--user", "dur", "--count", "7",
        ],
        &key,
    );
    ensure(o.status.success(), stderr(&o))?;
    let o = otpk(&["auth", "--server", &srv.addr, "--user", "dur"], &key);
    ensure(o.status.success(), stderr(&o))?;
    srv.kill();

    let srv = ServeProc::start(&env.db(), &env.trust(), &[]);
    let p = Client::http(&srv.addr)
        .begin_auth("dur")
        .map_err(|e| e.to_string())?;
    ensure(p == 6, format!("begin after restart returned p={p}"))?;
    Ok("p=7, auth, SIGKILL, restart, begin returns 6".into())
}

fn c10_mining() -> Check {
    let env = Env::new();
    let server = env.serve();
    let client = Client::http(&server.url());
    let c = ClientChain::new(
        "miner",
        Passkey::new("mining-key").unwrap(),
        HashAlg::Sha256,
    );
    c.init_chain(&client, 5).map_err(|e| e.to_string())?;
    let ticket = c.authenticate(&client).map_err(|e| e.to_string())?;
    let r = client
        .mine_kmeans(&ticket.ticket_id, "0\n1\n10\n11\n", 2, None)
        .map_err(|e| e.to_string())?;
    let mut cents: Vec<f64> = r.centroids.iter().map(|c| c[0]).collect();
    cents.sort_by(f64::total_cmp);
    ensure(
        cents.len() == 2
            && (cents[0] - 0.5).abs() <= CENTROID_TOL
            && (cents[1] - 10.5).abs() <= CENTROID_TOL,
        format!("centroids {:?}", r.centroids),
    )?;
    ensure(
        r.assignments == [0, 0, 1, 1],
        format!("assignments {:?}", r.assignments),
    )?;
    let reuse = client
        .mine(
            &ticket.ticket_id,
            "kmeans",
            json!({"csv": "0\n1\n10\n11\n", "k": 2}),
        )
        .err()
        .and_then(|e| e.code());
    ensure(
        reuse == Some(ErrorCode::TicketInvalid),
        format!("reuse returned {reuse:?}"),
    )?;
    Ok(format!(
        "centroids {cents:?}, assignments [0, 0, 1, 1], reuse TICKET_INVALID"
    ))
}

fn c11_dictionary(rng: &mut StdRng) -> Check {
    let gw = Arc::new(Gateway::new(
        AuthAgent::in_memory(),
        TrustStore::loopback(),
        TrustStore::loopback(),
    ));
    let words: Vec<String> = (b'a'..=b'z').map(|c| format!("{}at", c as char)).collect();
    let capture = |user: &str, key: Passkey| {
        let wire = Client::new(Recording::new(LocalTransport::new(
            gw.clone(),
            "127.0.0.1".parse().unwrap(),
        )));
        let c = ClientChain::new(user, key, HashAlg::Sha256);
        c.init_chain(&wire, 5).unwrap();
        c.authenticate(&wire).unwrap();
        wire.transport().transcript()
    };
    let weak = capture("weak", Passkey::new("cat").unwrap());
    let strong = capture("strong", random_passkey(rng));
    let got_weak = dictionary_attack(&weak, words.iter().map(String::as_str), HashAlg::Sha256);
    let got_strong = dictionary_attack(&strong, words.iter().map(String::as_str), HashAlg::Sha256);
    ensure(
        got_weak.as_deref() == Some("cat"),
        format!("weak key: {got_weak:?}"),
    )?;
    ensure(got_strong.is_none(), format!("random key: {got_strong:?}"))?;
    Ok("\"cat\" recovered from 26 words; 128-bit key not recovered".into())
}

fn main() -> ExitCode {
    let seed: u64 = std::env::var("OTPK_ACCEPT_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(rand::random);
    println!("acceptance seed {seed}");
    let mut rng = StdRng::seed_from_u64(seed);

    let criteria: Vec<Criterion> = vec![
        ("chain capacity", Box::new(|_| c1_chain_capacity())),
        ("rotation correctness", Box::new(|_| c2_rotation())),
        ("replay suite", Box::new(c3_replay)),
        ("db-compromise suite", Box::new(c4_db_compromise)),
        ("pipeline ordering", Box::new(|_| c5_pipeline())),
        ("chain composition fuzz", Box::new(c6_composition)),
        ("exactly-one-winner", Box::new(|_| c7_one_winner())),
        ("interop vector", Box::new(|_| c8_interop())),
        ("durability", Box::new(|_| c9_durability())),
        ("end-to-end mining", Box::new(|_| c10_mining())),
        ("dictionary honesty", Box::new(c11_dictionary)),
    ];

    let mut failed = 0;
    for (n, (name, check)) in criteria.into_iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut rng))).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(p.downcast_ref::<&str>().copied())
            ))
        });
        match result {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

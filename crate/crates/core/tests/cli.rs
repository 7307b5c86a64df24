mod common;

use common::*;

#[test]
fn chain_matches_reference_vectors() {
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
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        "2bb80d537b1da3e38bd30361aa855686bde0eacd7162fef6a25fe97bf527a25b"
    );

    let o = otpk(&["chain", "--count", "5"], &[("OTPK_PASSKEY", "secret")]);
    assert_eq!(
        stdout(&o).trim(),
        "92f00ed74e5cfda147fa7b7bf008e98606b26891be132cae5d6fe78557d45184"
    );

    let o = otpk(
        &[
            "chain",
            "--passkey",
            "secret",
            "--count",
            "3",
            "--alg",
            "md5",
        ],
        &[],
    );
    assert_eq!(stdout(&o).trim(), "09c510df26465aee2f81e716df44a3b7");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["chain"][..],
        &["bogus"],
        &["chain", "--passkey", "x", "--count", "1", "--alg", "sha1"],
        &[],
    ] {
        let o = otpk(args, &[]);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_passkey_without_terminal_fails() {
    let o = otpk(&["chain", "--count", "1"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn init_auth_mine_reinit_admin() {
    let env = Env::new();
    let server = env.serve();
    let addr = server.local_addr().to_string();
    let key = [("OTPK_PASSKEY", "hunter2-long-enough")];
    let tr = env.path("wire.jsonl");
    let tr_s = tr.to_str().unwrap();

    let o = otpk(
        &["init", "--server", &addr, "--user", "carol", "--count", "3"],
        &key,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = otpk(
        &["init", "--server", &addr, "--user", "carol", "--count", "3"],
        &key,
    );
    assert_eq!(
        (o.status.code(), error_code(&o)),
        (Some(3), "DUPLICATE_USER".into())
    );
    let o = otpk(
        &["init", "--server", &addr, "--user", "dave", "--count", "1"],
        &key,
    );
    assert_eq!(
        (o.status.code(), error_code(&o)),
        (Some(3), "INVALID_COUNTER".into())
    );

    let o = otpk(
        &[
            "auth",
            "--server",
            &addr,
            "--user",
            "carol",
            "--transcript",
            tr_s,
        ],
        &key,
    );
    assert!(o.status.success());
    let ticket = stdout(&o).trim().to_string();
    assert_eq!(ticket.len(), 32);

    let csv = env.path("pts.csv");
    std::fs::write(&csv, "0\n1\n10\n11\n").unwrap();
    let mine = |t: &str| {
        otpk(
            &[
                "mine",
                "--server",
                &addr,
                "--ticket",
                t,
                "--task",
                "kmeans",
                "--input",
                csv.to_str().unwrap(),
                "--k",
                "2",
            ],
            &[],
        )
    };
    let o = mine(&ticket);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["assignments"], serde_json::json!([0, 0, 1, 1]));
    let o = mine(&ticket);
    assert_eq!(
        (o.status.code(), error_code(&o)),
        (Some(3), "TICKET_INVALID".into())
    );

    let o = otpk(
        &[
            "reinit",
            "--server",
            &addr,
            "--user",
            "carol",
            "--new-count",
            "20",
        ],
        &[
            ("OTPK_PASSKEY", "hunter2-long-enough"),
            ("OTPK_NEW_PASSKEY", "second-key"),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        server.gateway().agent().record("carol").unwrap().counter(),
        20
    );
    let o = otpk(
        &[
            "auth",
            "--server",
            &addr,
            "--user",
            "carol",
            "--transcript",
            tr_s,
        ],
        &key,
    );
    assert_eq!(error_code(&o), "TOKEN_MISMATCH");
    let o = otpk(
        &[
            "auth",
            "--server",
            &addr,
            "--user",
            "carol",
            "--transcript",
            tr_s,
        ],
        &[("OTPK_PASSKEY", "second-key")],
    );
    assert!(o.status.success());

    let o = otpk(
        &["admin", "trust", "add", "10.0.0.0/8", "--server", &addr],
        &[],
    );
    assert!(stdout(&o).contains("10.0.0.0/8"));
    let o = otpk(
        &["admin", "trust", "rm", "10.0.0.0/8", "--server", &addr],
        &[],
    );
    assert!(!stdout(&o).contains("10.0.0.0/8"));
    let o = otpk(
        &["admin", "trust", "add", "10.0.0.1/8", "--server", &addr],
        &[],
    );
    assert_eq!(error_code(&o), "BAD_REQUEST");
    assert!(stderr(&o).contains("10.0.0.0/8"));
    let o = otpk(&["admin", "user", "lock", "carol", "--server", &addr], &[]);
    assert_eq!(stdout(&o).trim(), "carol locked");
    let o = otpk(
        &["auth", "--server", &addr, "--user", "carol"],
        &[("OTPK_PASSKEY", "second-key")],
    );
    assert_eq!(error_code(&o), "USER_LOCKED");
    let o = otpk(&["admin", "user", "rm", "carol", "--server", &addr], &[]);
    assert_eq!(stdout(&o).trim(), "carol deleted");
    let o = otpk(
        &["auth", "--server", &addr, "--user", "carol"],
        &[("OTPK_PASSKEY", "second-key")],
    );
    assert_eq!(error_code(&o), "UNKNOWN_USER");

    let wire = std::fs::read_to_string(&tr).unwrap();
    assert!(wire.contains("/v1/auth/complete"));
    for secret in ["hunter2-long-enough", "second-key"] {
        assert!(!wire.contains(secret));
        assert!(!wire.contains(&hex::encode(secret)));
    }
}

#[test]
fn exhaustion_prints_reinit_hint() {
    let env = Env::new();
    let server = env.serve();
    let addr = server.local_addr().to_string();
    let key = [("OTPK_PASSKEY", "pk")];
    otpk(
        &["init", "--server", &addr, "--user", "e", "--count", "2"],
        &key,
    );
    assert!(otpk(&["auth", "--server", &addr, "--user", "e"], &key)
        .status
        .success());
    let o = otpk(&["auth", "--server", &addr, "--user", "e"], &key);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.lines().next().unwrap().starts_with("CHAIN_EXHAUSTED"));
    assert!(err.contains("new passkey"));
}

#[test]
fn unreachable_server_is_exit_1() {
    let o = otpk(
        &["auth", "--server", "127.0.0.1:1", "--user", "x"],
        &[("OTPK_PASSKEY", "k")],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn attack_subcommands_report() {
    let env = Env::new();
    let server = env.serve();
    let addr = server.local_addr().to_string();
    let tr = env.path("t.jsonl");
    let tr_s = tr.to_str().unwrap();
    let key = [("OTPK_PASSKEY", "cat")];
    otpk(
        &["init", "--server", &addr, "--user", "w", "--count", "5"],
        &key,
    );
    for _ in 0..2 {
        otpk(
            &[
                "auth",
                "--server",
                &addr,
                "--user",
                "w",
                "--transcript",
                tr_s,
            ],
            &key,
        );
    }

    let o = otpk(
        &["attack", "replay", "--transcript", tr_s, "--server", &addr],
        &[],
    );
    assert_eq!(
        stdout(&o),
        "ATTEMPT 1 REJECTED\nATTEMPT 2 REJECTED\nSUMMARY accepted=0 rejected=2\n"
    );

    let o = otpk(
        &[
            "attack",
            "dbcomp",
            "--db",
            env.db().to_str().unwrap(),
            "--server",
            &addr,
        ],
        &[],
    );
    assert_eq!(
        stdout(&o),
        "ATTEMPT 1 REJECTED\nSUMMARY accepted=0 rejected=1\n"
    );

    let words = env.path("words.txt");
    std::fs::write(&words, "bat\ncat\nrat\n").unwrap();
    let o = otpk(
        &[
            "attack",
            "dict",
            "--transcript",
            tr_s,
            "--wordlist",
            words.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        stdout(&o),
        "ATTEMPT 1 ACCEPTED\nATTEMPT 2 ACCEPTED\nSUMMARY accepted=2 rejected=0\n"
    );
    assert!(stderr(&o).contains("cat"));
}

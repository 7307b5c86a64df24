//! Sixteen threads submit the same valid token at once; one wins.

use std::sync::{Arc, Barrier};

use otpk::{chain_digest, AuthAgent, HashAlg, Passkey};

fn main() {
    let agent = Arc::new(AuthAgent::in_memory());
    let k = Passkey::new("shared").unwrap();
    agent
        .register("bob", 10, chain_digest(&k, 10, HashAlg::Sha256).unwrap())
        .unwrap();
    let token = chain_digest(&k, 9, HashAlg::Sha256).unwrap();

    let barrier = Arc::new(Barrier::new(16));
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let (agent, barrier, token) = (agent.clone(), barrier.clone(), token.clone());
            std::thread::spawn(move || {
                barrier.wait();
                agent.complete_auth("bob", &token)
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let wins = results.iter().filter(|r| r.is_ok()).count();
    println!("winners: {wins}, rejected: {}", results.len() - wins);
    for r in results.iter().filter_map(|r| r.as_ref().err()).take(1) {
        println!("losers see: {}", r.code());
    }
    println!("counter now {}", agent.record("bob").unwrap().counter());
}

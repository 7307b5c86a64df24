//! Record real logins, then replay them, steal the database, and run a
//! dictionary against the captured session.

use std::net::Ipv4Addr;
use std::sync::Arc;

use otpk::attack::{db_compromise_attack, dictionary_attack, replay_attack};
use otpk::client::{Client, ClientChain, LocalTransport, Recording};
use otpk::gateway::Gateway;
use otpk::{AuthAgent, HashAlg, Passkey, TrustStore};

fn main() {
    let gw = Arc::new(Gateway::new(
        AuthAgent::in_memory(),
        TrustStore::loopback(),
        TrustStore::loopback(),
    ));
    let local = || LocalTransport::new(gw.clone(), Ipv4Addr::LOCALHOST.into());
    let wire = Client::new(Recording::new(local()));

    let victim = ClientChain::new("victim", Passkey::new("dragon").unwrap(), HashAlg::Sha256);
    victim.init_chain(&wire, 8).unwrap();
    for _ in 0..3 {
        victim.authenticate(&wire).unwrap();
    }
    let transcript = wire.transport().transcript();
    println!("captured {} messages", transcript.len());

    let attacker = Client::new(local());
    print!(
        "replay:\n{}",
        replay_attack(&transcript, &attacker).render()
    );

    let stolen = gw.agent().record("victim").unwrap();
    println!(
        "db compromise: {}",
        db_compromise_attack(&stolen, &attacker)
    );

    let words = ["password", "123456", "qwerty", "dragon", "letmein"];
    match dictionary_attack(&transcript, words, HashAlg::Sha256) {
        Some(k) => println!("dictionary: recovered passkey {k:?}"),
        None => println!("dictionary: nothing found"),
    }
}

//! Derive a chain and walk it backwards the way the server does.
//!
//!     cargo run --example hash_chain -- secret 5

use otpk::{chain_digest, hash_once, HashAlg, Passkey};

fn main() {
    let mut args = std::env::args().skip(1);
    let key = args.next().unwrap_or_else(|| "secret".into());
    let p: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let passkey = Passkey::new(key).expect("non-empty passkey");

    for i in 1..=p {
        let d = chain_digest(&passkey, i, HashAlg::Sha256).unwrap();
        println!("H^{i:<3} {}", d.to_hex());
    }

    // The server stores H^p and accepts H^(p-1) because hashing it once
    // gives back what it stored.
    let mut stored = chain_digest(&passkey, p, HashAlg::Sha256).unwrap();
    for i in (1..p).rev() {
        let token = chain_digest(&passkey, i, HashAlg::Sha256).unwrap();
        assert_eq!(hash_once(token.as_bytes(), HashAlg::Sha256), stored);
        stored = token;
    }
    println!("walked {} steps back to H^1", p - 1);
}

//! Start a loopback gateway, register, log in, mine, and watch the counter
//! run down to exhaustion.

use otpk::client::{Client, ClientChain};
use otpk::gateway::{serve, GatewayConfig};
use otpk::{HashAlg, Passkey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut config = GatewayConfig::new(
        "127.0.0.1:0",
        dir.path().join("users.tsv"),
        dir.path().join("trust.txt"),
    );
    config.create_missing = true;
    let server = serve(&config)?;
    println!("gateway on {}", server.url());

    let client = Client::http(&server.url());
    let alice = ClientChain::new("alice", Passkey::new("correct horse")?, HashAlg::Sha256);
    let reg = alice.init_chain(&client, 5)?;
    println!("registered {} with p={}", reg.user_id, reg.p);

    let ticket = alice.authenticate(&client)?;
    let result = client.mine_kmeans(&ticket.ticket_id, "0\n1\n10\n11\n", 2, None)?;
    println!(
        "centroids {:?} assignments {:?}",
        result.centroids, result.assignments
    );

    if let Err(e) = client.mine_kmeans(&ticket.ticket_id, "0\n", 1, None) {
        println!("ticket reuse: {e}");
    }

    loop {
        match alice.authenticate(&client) {
            Ok(_) => {
                let p = server.gateway().agent().record("alice").unwrap().counter();
                println!("login ok, server now at p={p}");
            }
            Err(e) => {
                println!("login refused: {e}");
                break;
            }
        }
    }
    server.shutdown()?;
    Ok(())
}

//! Build a trust store and check a few source addresses against it.

use otpk::{TrustRule, TrustStore};

fn main() {
    let store = TrustStore::parse(
        "# office and VPN\n\
         10.20.0.0/16\n\
         192.0.2.7\n\
         2001:db8::/32\n",
    )
    .expect("valid rules");

    for ip in [
        "10.20.3.4",
        "10.21.0.1",
        "192.0.2.7",
        "::ffff:10.20.9.9",
        "2001:db8::1",
        "8.8.8.8",
    ] {
        let verdict = if store.is_trusted(ip.parse().unwrap()) {
            "trusted"
        } else {
            "UNTRUSTED_ORIGIN"
        };
        println!("{ip:<18} {verdict}");
    }

    match "10.20.1.0/16".parse::<TrustRule>() {
        Ok(r) => println!("accepted {r}"),
        Err(e) => println!("rejected: {e}"),
    }
}

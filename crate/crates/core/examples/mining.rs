//! k-means on a small 2-D dataset, printing SSE per iteration.

use otpk::mining::{kmeans_traced, parse_dataset};

fn main() {
    let csv = "1,1\n1.5,2\n3,4\n5,7\n3.5,5\n4.5,5\n3.5,4.5\n";
    let data = parse_dataset(csv).expect("numeric csv");
    let result =
        kmeans_traced(&data, 2, 100, |sse| println!("sse {sse:.4}")).expect("valid params");
    println!("{}", serde_json::to_string_pretty(&result).unwrap());
}

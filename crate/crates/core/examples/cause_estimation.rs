//! Error-type counts to conservative/aggressive cause ranges.
//!
//!     cargo run --example cause_estimation -- 0 4 9 23 14 10
//!
//! Arguments are the six failure counts in report column order: missing
//! endpoint path, missing base URL, failed validation, abnormal response,
//! no parameter value, wrong parameter value.

use doc2tool::validate::{estimate_causes, render_error_report, ErrorCounts};

fn main() {
    let args: Vec<i64> = std::env::args().skip(1).map(|a| a.parse().expect("integer count")).collect();
    let mut rows = vec![
        ("Hand-labelled run", ErrorCounts::from_failures(0, 4, 9, 23, 14, 10)),
        ("One-shot chat run", ErrorCounts::from_failures(0, 1, 4, 5, 0, 1)),
    ];
    if let [mep, mbu, fv, ar, npv, wpv] = args[..] {
        rows.push(("Command line", ErrorCounts::from_failures(mep, mbu, fv, ar, npv, wpv)));
    } else if !args.is_empty() {
        eprintln!("expected six counts, got {}", args.len());
        std::process::exit(2);
    }
    match render_error_report(&rows) {
        Ok(text) => println!("{text}"),
        Err(e) => eprintln!("{e}"),
    }
    let est = estimate_causes(&rows[0].1).unwrap();
    for (name, range) in est.categories() {
        println!("{name:<32} {range}");
    }
}

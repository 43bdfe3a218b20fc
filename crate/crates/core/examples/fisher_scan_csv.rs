//! Runs a scan config from examples/configs at reduced resolution and prints the CSV.
//!
//! cargo run --example fisher_scan_csv -- examples/configs/strategies_ghz_n2.json 9

use std::io;

use lui_metrology::cli::{run_scan, ScanConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path =
        args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/strategies_ghz_n2.json").into());
    let mut cfg: ScanConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    cfg.theta_points = args.next().map(|s| s.parse()).transpose()?.unwrap_or(9);
    cfg.out = None;
    run_scan(&cfg, &mut io::stdout(), &mut io::stderr())?;
    Ok(())
}

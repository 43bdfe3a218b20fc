//! Monte-Carlo average over local Haar rotations converging to the analytic twirl.

use lui_metrology::states::ghz_pair;
use lui_metrology::verify::mc_convergence;
use lui_metrology::EncodingMode;

fn main() -> lui_metrology::Result<()> {
    let pair = ghz_pair(2, 0.3, EncodingMode::Reversed)?;
    let schedule = [100, 300, 1000, 3000, 10_000, 20_000];
    for r in mc_convergence(&pair, &schedule, 0xC0FFEE)? {
        println!(
            "{:>6} samples  trace distance {:.5}  (1/sqrt(n) = {:.5})",
            r.samples,
            r.trace_distance,
            1.0 / (r.samples as f64).sqrt()
        );
    }
    Ok(())
}

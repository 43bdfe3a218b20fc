//! Maximum-likelihood estimation from simulated LBM, DM and GST counts compared
//! with the Cramer-Rao bound. Pass a repetition count to change the default of 50.

use lui_metrology::measure::{estimate_repeated, SearchWindow, Strategy};
use lui_metrology::states::ghz_pair;
use lui_metrology::EncodingMode;

fn main() -> lui_metrology::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let theta = 0.05;
    let pair = ghz_pair(2, theta, EncodingMode::Reversed)?;
    let window = SearchWindow::around(theta, 0.5)?;
    for strategy in [Strategy::Lbm, Strategy::Gst, Strategy::Dm] {
        let r = estimate_repeated(&pair, strategy, 100_000, reps, 0xC0FFEE, window)?;
        println!(
            "{strategy}: mean {:.6} var {:.3e} crb {:.3e} var/crb {:.3} fisher {:.4} boundary {}",
            r.mean_estimate, r.variance, r.crb, r.ratio, r.fisher, r.boundary_hits
        );
    }
    Ok(())
}

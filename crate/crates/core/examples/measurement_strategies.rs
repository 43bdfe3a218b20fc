//! Classical Fisher information of the five measurement strategies on the twirled GHZ pair.

use lui_metrology::fisher::{qfi_re_general, Derivative};
use lui_metrology::measure::{cfi_dm, cfi_exact, cfi_grm, cfi_gst, cfi_lbm, cfi_lst, Strategy};
use lui_metrology::states::ghz_pair;
use lui_metrology::EncodingMode;

fn main() -> lui_metrology::Result<()> {
    let n = 2;
    let d = Derivative::Analytic;
    let mut peak = [0.0f64; 2];
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "theta", "qfi", "lbm", "lst", "gst", "grm", "dm", "dm_exact"
    );
    for i in 1..=40 {
        let theta = i as f64 * std::f64::consts::FRAC_PI_2 / 41.0;
        let pair = ghz_pair(n, theta, EncodingMode::Reversed)?;
        let dm = cfi_dm(&pair, d)?;
        let grm = cfi_grm(&pair, d)?;
        peak = [peak[0].max(dm), peak[1].max(grm)];
        println!(
            "{theta:>6.3} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {grm:>9.5} {dm:>9.5} {:>9.5}",
            qfi_re_general(&pair, d)?.value,
            cfi_lbm(&pair, d)?,
            cfi_lst(&pair, d)?,
            cfi_gst(&pair, d)?,
            cfi_exact(Strategy::Dm, &pair, d)?,
        );
    }
    let f_max = 2.0 * (n * n) as f64;
    println!(
        "peak dm {:.4} ({:.1}% of {f_max}), peak grm {:.4} ({:.1}%)",
        peak[0],
        100.0 * peak[0] / f_max,
        peak[1],
        100.0 * peak[1] / f_max
    );
    Ok(())
}

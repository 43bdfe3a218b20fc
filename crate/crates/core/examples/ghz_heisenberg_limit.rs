//! QFI of the twirled GHZ and product probes near theta = 0 against 2N^2 and 2N.

use lui_metrology::fisher::{qfi_ghz_closed, qfi_re_general, Derivative};
use lui_metrology::states::{ghz_pair, product_pair};
use lui_metrology::EncodingMode;

fn main() -> lui_metrology::Result<()> {
    let theta = 1e-4;
    println!("{:>2} {:>12} {:>12} {:>8} {:>12} {:>6}", "N", "F_ghz", "closed", "2N^2", "F_product", "2N");
    for n in 1..=5 {
        let ghz = qfi_re_general(&ghz_pair(n, theta, EncodingMode::Reversed)?, Derivative::Analytic)?;
        let prod = qfi_re_general(&product_pair(n, theta, EncodingMode::Reversed)?, Derivative::Analytic)?;
        println!(
            "{n:>2} {:>12.6} {:>12.6} {:>8} {:>12.6} {:>6}",
            ghz.value,
            qfi_ghz_closed(n, theta),
            2 * n * n,
            prod.value,
            2 * n
        );
    }
    Ok(())
}

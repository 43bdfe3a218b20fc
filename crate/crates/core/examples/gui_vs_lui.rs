//! Local versus global twirling of the GHZ pair: the GUI QFI drops below the SQL.

use lui_metrology::fisher::{qfi_ghz_closed, qfi_gui_ghz_closed, qfi_gui_re, Derivative};
use lui_metrology::states::ghz_pair;
use lui_metrology::EncodingMode;

fn main() -> lui_metrology::Result<()> {
    let n = 2;
    let sql = 2.0 * n as f64;
    for i in 0..=12 {
        let theta = i as f64 * std::f64::consts::FRAC_PI_2 / 12.0;
        let gui = qfi_gui_re(&ghz_pair(n, theta, EncodingMode::Reversed)?, Derivative::Analytic)?.value;
        let lui = qfi_ghz_closed(n, theta);
        let flag = if gui < sql { "  < SQL" } else { "" };
        println!("{theta:.4}  lui {lui:.6}  gui {gui:.6}  closed {:.6}{flag}", qfi_gui_ghz_closed(n, theta));
    }
    Ok(())
}

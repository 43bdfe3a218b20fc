//! Identical encoding with a 1-local generator carries no information after the twirl;
//! reversing the second copy recovers it.

use lui_metrology::cli::random_local_pair;
use lui_metrology::fisher::{qfi_ie_general, qfi_re_general, Derivative};
use lui_metrology::EncodingMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lui_metrology::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    println!("{:>2} {:>6} {:>12} {:>12}", "N", "theta", "F_IE", "F_RE");
    for n in 1..=3 {
        for theta in [0.2, 0.9] {
            let seed_state = ChaCha8Rng::seed_from_u64(rand::Rng::random(&mut rng));
            let ie = random_local_pair(n, theta, EncodingMode::Identical, &mut seed_state.clone())?;
            let re = random_local_pair(n, theta, EncodingMode::Reversed, &mut seed_state.clone())?;
            let f_ie = qfi_ie_general(&ie, Derivative::Analytic)?.value;
            let f_re = qfi_re_general(&re, Derivative::Analytic)?.value;
            println!("{n:>2} {theta:>6.2} {f_ie:>12.3e} {f_re:>12.6}");
        }
    }
    Ok(())
}

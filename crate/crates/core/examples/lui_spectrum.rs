//! Eigenvalues of the twirled two-copy state from the Walsh transform of its
//! coefficients, checked against a dense diagonalization.

use lui_metrology::fisher::lui_spectrum;
use lui_metrology::states::ghz_pair;
use lui_metrology::twirl::{lui_coefficients, lui_density};
use lui_metrology::EncodingMode;

fn main() -> lui_metrology::Result<()> {
    let lui = lui_coefficients(&ghz_pair(3, 0.4, EncodingMode::Reversed)?)?;
    println!("c_a = {:?}", lui.coeffs());
    let spectrum = lui_spectrum(&lui);
    let mut predicted = Vec::new();
    for e in &spectrum {
        println!("b = {:>5}  lambda = {:.10}  x{}", e.b, e.eigenvalue, e.degeneracy);
        predicted.extend(std::iter::repeat_n(e.eigenvalue, e.degeneracy as usize));
    }
    predicted.sort_by(f64::total_cmp);
    let dense = lui_density(&lui)?.eigenvalues()?;
    let worst = predicted.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let total: f64 = spectrum.iter().map(|e| e.eigenvalue * e.degeneracy as f64).sum();
    println!("max |predicted - dense| = {worst:.2e}, sum s_b lambda_b = {total:.12}");
    Ok(())
}

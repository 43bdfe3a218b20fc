//! Dense building blocks: Haar unitaries, partial SWAPs and partial traces on a two-copy register.

use lui_metrology::tensor::{haar_unitary, swap_operator, unitarity_deviation};
use lui_metrology::{BitMask, QuditLayout, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lui_metrology::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let u = haar_unitary(3, &mut rng);
    println!("haar d=3: |U U^dag - I| = {:.2e}", unitarity_deviation(u.matrix()));

    let single = QuditLayout::qubits(2)?;
    let a = StateVector::random(single, &mut rng);
    let b = StateVector::random(single, &mut rng);
    let joint = a.pair_with(&b)?;
    let rho = joint.density();
    for mask in BitMask::all(2) {
        let s = swap_operator(mask, joint.layout())?;
        let direct = if mask.is_empty() {
            1.0
        } else {
            let ra = a.density().partial_trace(mask)?;
            let rb = b.density().partial_trace(mask)?;
            (ra.matrix() * rb.matrix()).trace().re
        };
        println!("a = {mask}: <S_a> = {:.10}  Tr(rho_A rho_B) = {direct:.10}", rho.expectation(&s).re);
    }
    Ok(())
}

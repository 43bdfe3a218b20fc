//! Dimension of the operators commuting with all collective rotations.

use lui_metrology::verify::{commutant_dimension, CommutantQuery, Locality};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lui_metrology::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for (n, d, k) in [(1, 2, 1), (2, 2, 1), (3, 2, 1), (1, 2, 2), (2, 2, 2), (3, 2, 2), (1, 3, 2)] {
        let r = commutant_dimension(&CommutantQuery::new(n, d, k), &mut rng)?;
        println!(
            "local  N={n} d={d} k={k}: dim {} traceless {} flagged {}",
            r.dimension, r.traceless_dimension, r.under_constrained
        );
    }
    for (n, k) in [(2, 1), (2, 2)] {
        let q = CommutantQuery { locality: Locality::UnrestrictedSymmetric, ..CommutantQuery::new(n, 2, k) };
        let r = commutant_dimension(&q, &mut rng)?;
        println!("global N={n} d=2 k={k}: dim {} traceless {}", r.dimension, r.traceless_dimension);
    }
    Ok(())
}

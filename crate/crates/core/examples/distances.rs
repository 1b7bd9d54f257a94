//! Distribution distances between Gaussian sample sets as the mean gap grows.
//!
//! Run with: cargo run --example distances

use adarnn::distances::{distance, DistanceKind, KernelConfig};
use adarnn::numgraph::{Matrix, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, dim: usize, mean: f64) -> Matrix {
    let d = Normal::new(mean, 1.0).unwrap();
    Matrix::from_vec(n, dim, (0..n * dim).map(|_| d.sample(rng)).collect()).unwrap()
}

fn main() -> adarnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base = gaussian(&mut rng, 200, 3, 0.0);
    let kinds = [
        DistanceKind::Cosine,
        DistanceKind::mmd(),
        DistanceKind::Mmd(KernelConfig::Linear),
        DistanceKind::Coral,
    ];
    print!("{:>6}", "gap");
    for k in &kinds {
        print!("{:>12}", k.name());
    }
    println!();
    for gap in [0.0, 0.5, 1.0, 2.0, 4.0] {
        // Shift the mean and widen the spread so CORAL sees a change too.
        let other = gaussian(&mut rng, 200, 3, gap).map(|v| v * (1.0 + 0.2 * gap));
        print!("{gap:>6.1}");
        for k in &kinds {
            let mut tape = Tape::no_grad();
            let (a, b) = (tape.constant(base.clone()), tape.constant(other.clone()));
            let d = distance(&mut tape, k, a, b, None)?;
            print!("{:>12.5}", tape.item(d)?);
        }
        println!();
    }
    Ok(())
}

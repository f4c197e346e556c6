//! SPSA with a constant sensitivity `c` on a quadratic.
//!
//! The two-evaluation estimate equals `ΔΔᵀ∇f(x)` for every `c`: the bias is
//! zero and what remains is a zero-mean deviation.

use bounded_gd::gradient_sources::{draw_perturbation, spsa_error_decomposition, spsa_estimate};
use bounded_gd::objective::{generate_random_pd, SpectrumSpec};
use bounded_gd::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bounded_gd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let obj = generate_random_pd(4, &SpectrumSpec::log_uniform(4, 0.5, 2.0, &mut rng)?, 3)?;
    let x = Vector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
    let delta = draw_perturbation(4, &mut rng)?;

    println!("gradient      {:.6?}", obj.gradient(&x).as_slice());
    for c in [0.01, 0.1, 1.0, 10.0] {
        println!("c = {c:<5} est {:.6?}", spsa_estimate(&obj, &x, c, &delta).as_slice());
    }
    let (bias, deviation) = spsa_error_decomposition(&obj, &x, 1.0, &delta);
    println!("bias {:.3?}  deviation {:.6?}", bias.as_slice(), deviation.as_slice());

    let n = 20_000;
    let mut mean = Vector::zeros(4);
    for _ in 0..n {
        mean += spsa_estimate(&obj, &x, 1.0, &draw_perturbation(4, &mut rng)?);
    }
    println!("mean of {n} estimates {:.6?}", (mean / n as f64).as_slice());
    Ok(())
}

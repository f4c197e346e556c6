//! Random positive definite quadratic: build, evaluate, save and reload.

use bounded_gd::objective::{generate_random_pd, QuadraticObjective, SpectrumSpec};
use bounded_gd::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bounded_gd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spectrum = SpectrumSpec::log_uniform(5, 0.5, 2.0, &mut rng)?;
    let obj = generate_random_pd(5, &spectrum, 11)?;

    let mut eig: Vec<f64> = obj.q().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    println!("requested eigenvalues: {:?}", spectrum.eigenvalues());
    println!("recovered eigenvalues: {eig:?}");

    let x = Vector::from_element(5, 1.0);
    println!("f(1) = {:.6}", obj.eval(&x));
    println!("grad f(1) = {:.6?}", obj.gradient(&x).as_slice());
    println!("growth constant K = {:.6}", obj.growth_constant());

    let mut buf = Vec::new();
    obj.write_matrix(&mut buf)?;
    let back = QuadraticObjective::read_matrix(buf.as_slice())?;
    println!("round trip exact: {}", back == obj);
    Ok(())
}

//! Newton direction with bounded error.

use bounded_gd::engine::{run, RunConfig};
use bounded_gd::gradient_sources::{newton_direction, GradientOracle};
use bounded_gd::objective::{generate_random_pd, SpectrumSpec};
use bounded_gd::{StepSchedule, Vector};

fn main() -> bounded_gd::Result<()> {
    let obj = generate_random_pd(4, &SpectrumSpec::new(vec![0.1, 1.0, 5.0, 20.0])?, 2)?;
    let x0 = Vector::from_vec(vec![3.0, -1.0, 2.0, 0.5]);
    println!("direction at x0 = {:.6?}", newton_direction(&obj, &x0)?.as_slice());

    let exact = RunConfig::new(obj.clone(), GradientOracle::newton(0.0)?, StepSchedule::constant(1.0)?, x0.clone(), 1, 0);
    println!("one exact unit step: |x1| = {:.3e}", run(&exact)?.final_x.norm());

    for eps in [0.1, 0.25, 1.0] {
        let cfg = RunConfig::new(obj.clone(), GradientOracle::newton(eps)?, StepSchedule::harmonic(1.0)?, x0.clone(), 200, 7);
        println!("eps = {eps:<4} |x200| = {:.4}", run(&cfg)?.final_x.norm());
    }
    Ok(())
}

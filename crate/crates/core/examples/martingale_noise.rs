//! Bounded gradient error plus an additive martingale-difference term.

use bounded_gd::engine::{run_sweep, RunConfig};
use bounded_gd::gradient_sources::GradientOracle;
use bounded_gd::objective::QuadraticObjective;
use bounded_gd::{StepSchedule, Vector};

fn main() -> bounded_gd::Result<()> {
    let obj = QuadraticObjective::from_diagonal(&[0.5, 1.0, 2.0])?;
    let x0 = Vector::from_element(3, 4.0);
    let configs: Vec<RunConfig> = [0.0, 0.5, 2.0, 8.0]
        .iter()
        .map(|&m| {
            RunConfig::new(obj.clone(), GradientOracle::bounded_noise(0.2).unwrap(), StepSchedule::Harmonic { offset: 1.0 }, x0.clone(), 5000, 9)
                .with_martingale_bound(m)
        })
        .collect();
    for (cfg, rec) in configs.iter().zip(run_sweep(&configs)) {
        let rec = rec?;
        println!(
            "martingale bound {:<4} final |x| = {:.4}  sup |x| = {:.3}",
            cfg.martingale_bound,
            rec.final_x.norm(),
            rec.sup_norm
        );
    }
    Ok(())
}

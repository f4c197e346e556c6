//! Window partition, rescaling and contraction report for one run.

use bounded_gd::diagnostics::{contraction_report, default_radius, interpolate, partition_windows, rescale};
use bounded_gd::engine::{run, RunConfig};
use bounded_gd::gradient_sources::GradientOracle;
use bounded_gd::objective::{generate_random_pd, SpectrumSpec};
use bounded_gd::{StepSchedule, Vector};

fn main() -> bounded_gd::Result<()> {
    let obj = generate_random_pd(3, &SpectrumSpec::new(vec![0.5, 1.0, 2.0])?, 5)?;
    let x0 = Vector::from_vec(vec![20.0, -10.0, 5.0]);
    let a = default_radius(x0.norm());
    let cfg = RunConfig::new(obj, GradientOracle::bounded_noise(0.5)?, StepSchedule::harmonic(1.0)?, x0, 2000, 1)
        .with_record_stride(1);
    let record = run(&cfg)?;
    let traj = interpolate(&record)?;
    let partition = partition_windows(&traj, 1.0)?;
    let rescaled = rescale(&traj, &partition, a)?;
    let report = contraction_report(&traj, &partition, a, 1.5, 0.95)?;

    println!("a = {a:.3}, {} windows, sup norm {:.3}", report.window_ratios.len(), report.sup_norm);
    for n in 0..report.window_ratios.len().min(8) {
        println!(
            "T{n} = {:>6.3}  r = {:>6.3}  |x_hat(Tn)| = {:.3}  ratio = {:.3}",
            report.boundary_times[n],
            report.scales[n],
            rescaled.window_starts()[n].norm(),
            report.window_ratios[n]
        );
    }
    println!("verdict: {:?}", report.verdict);
    Ok(())
}

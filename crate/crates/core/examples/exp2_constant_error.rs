//! Constant error vector `ε̲ = (ε/√d)·1` with harmonic steps: the iterates
//! settle in a neighborhood of the minimum whose size grows with `ε`.

use bounded_gd::harness::{run_exp2, summarize_trend, SweepSpec};

fn main() -> bounded_gd::Result<()> {
    let cells = run_exp2(&SweepSpec::exp2().with_grid(0.0, 2.0, 0.25))?;
    for cell in &cells {
        let worst = cell.runs.iter().map(|r| r.sup_norm / (1.0 + r.x0_norm)).fold(0.0, f64::max);
        println!(
            "eps = {:.2}  mean distance = {:.4}  diverged = {}  max sup/(1+|x0|) = {worst:.2}",
            cell.grid_value, cell.mean_final_distance, cell.diverged_count
        );
    }
    println!("spearman(eps, mean distance) = {:.4}", summarize_trend(&cells)?);
    Ok(())
}

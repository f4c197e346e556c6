//! Sweep of the SPSA sensitivity `c` with the cyclic schedule.
//!
//! Pass `full` to run the fine 0.01-step grid (about ten times slower).

use bounded_gd::harness::{run_exp1, summarize_trend, write_cells_csv, SweepSpec};

fn main() -> bounded_gd::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let spec = if full { SweepSpec::exp1() } else { SweepSpec::exp1().with_grid(0.1, 10.0, 0.1) };
    let cells = run_exp1(&spec)?;
    for cell in cells.iter().step_by(cells.len() / 10) {
        println!("c = {:>5.2}  log mean distance = {:>8.3}", cell.grid_value, cell.log_mean_final_distance);
    }
    println!("spearman(c, mean distance) = {:.4}", summarize_trend(&cells)?);
    write_cells_csv(&cells, std::fs::File::create("exp1.csv")?)?;
    println!("wrote exp1.csv");
    Ok(())
}

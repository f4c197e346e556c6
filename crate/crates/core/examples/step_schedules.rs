//! Step-size schedules and their summability report.

use bounded_gd::StepSchedule;

fn main() -> bounded_gd::Result<()> {
    for s in ["harmonic:1", "cyclic:800:100", "constant:0.05"] {
        let schedule: StepSchedule = s.parse()?;
        let r = schedule.check_a2(100_000)?;
        println!(
            "{schedule:<16} gamma(0)={:.4} gamma(799)={:.6}  sum={:>10.3}  sum_sq={:>8.4}  sum diverges: {}, sum of squares finite: {}",
            schedule.gamma(0),
            schedule.gamma(799),
            r.partial_sum,
            r.partial_sum_squares,
            r.sum_diverges,
            r.sum_squares_finite,
        );
    }
    Ok(())
}

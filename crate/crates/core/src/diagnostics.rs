//! Post-hoc stability analyses of completed runs.
//!
//! The iterates are placed on the time axis `t(n) = Σ_{i<n} γ(i)` and joined
//! linearly into `x̄(t)`. Time is cut into windows of length at least `T`,
//! each window start is rescaled by `r(n) = max(‖x̄(Tₙ)‖/a, 1)`, and the
//! window-to-window norm ratios show whether large excursions contract. None
//! of this feeds back into the engine.

use std::io::Write;

use crate::engine::{NormTrace, RunRecord};
use crate::error::{Error, Result};
use crate::objective::QuadraticObjective;
use crate::Vector;

/// Window ratios with a denominator below this are reported as 0.
const RATIO_FLOOR: f64 = 1e-300;

pub const DEFAULT_WINDOW_LENGTH: f64 = 1.0;
pub const DEFAULT_CONTRACTION_THRESHOLD: f64 = 0.95;
pub const DEFAULT_R_CHECK: f64 = 1.5;

/// Default neighborhood radius `2·max(1, ‖x₀‖)`.
pub fn default_radius(x0_norm: f64) -> f64 {
    2.0 * x0_norm.max(1.0)
}

/// Piecewise linear `x̄(t)` through the nodes `(t(n), x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedTrajectory {
    times: Vec<f64>,
    points: Vec<Vector>,
}

impl InterpolatedTrajectory {
    pub fn new(times: Vec<f64>, points: Vec<Vector>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return Err(Error::invalid(format!(
                "trajectory needs equal, non-zero numbers of times and points ({} vs {})",
                times.len(),
                points.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("trajectory times must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("trajectory times must be strictly increasing"));
        }
        Ok(Self { times, points })
    }

    /// One-dimensional trajectory carrying only the norms. Enough for the
    /// norm based analyses (windows, scales, contraction ratios) when the
    /// full iterates were not saved.
    pub fn from_norms(times: Vec<f64>, norms: &[f64]) -> Result<Self> {
        Self::new(times, norms.iter().map(|n| Vector::from_element(1, *n)).collect())
    }

    pub fn from_trace(trace: &NormTrace) -> Result<Self> {
        if trace.steps.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::invalid("interpolation needs every iterate (record_stride = 1)"));
        }
        Self::from_norms(trace.timeline.clone(), &trace.norms)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn node_norm(&self, i: usize) -> f64 {
        self.points[i].norm()
    }

    /// `x̄(t)`; exact at the nodes.
    pub fn at(&self, t: f64) -> Result<Vector> {
        let end = self.end_time();
        if !(0.0..=end).contains(&t) {
            return Err(Error::OutOfRange { t, start: 0.0, end });
        }
        // First node with time > t; t lies in [times[k-1], times[k]).
        let k = self.times.partition_point(|s| *s <= t);
        let left = k - 1;
        if self.times[left] == t || k == self.times.len() {
            return Ok(self.points[left].clone());
        }
        let w = (t - self.times[left]) / (self.times[k] - self.times[left]);
        Ok(&self.points[left] + (&self.points[k] - &self.points[left]) * w)
    }
}

/// Builds `x̄` from a completed run recorded at every step.
pub fn interpolate(record: &RunRecord) -> Result<InterpolatedTrajectory> {
    if let crate::engine::RunStatus::Diverged { step } = record.status {
        return Err(Error::NotCompleted { step: step as usize });
    }
    if record.record_stride != 1 {
        return Err(Error::invalid("interpolation needs every iterate (record_stride = 1)"));
    }
    InterpolatedTrajectory::new(record.timeline.clone(), record.iterates.clone())
}

/// Window starts `T₀ = 0`, `Tₙ = min{t(m) : t(m) ≥ Tₙ₋₁ + T}` as node
/// indices `m(n)`. A trailing partial window is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPartition {
    pub window_length: f64,
    pub boundaries: Vec<usize>,
}

impl WindowPartition {
    pub fn from_times(times: &[f64], window_length: f64) -> Result<Self> {
        if !(window_length.is_finite() && window_length > 0.0) {
            return Err(Error::invalid(format!("window length must be > 0, got {window_length}")));
        }
        let span = times.last().copied().unwrap_or(0.0);
        let mut boundaries = vec![0];
        let mut m = 0;
        loop {
            let target = times[*boundaries.last().unwrap()] + window_length;
            while m < times.len() && times[m] < target {
                m += 1;
            }
            if m == times.len() {
                break;
            }
            boundaries.push(m);
        }
        if boundaries.len() < 2 {
            return Err(Error::InsufficientSpan { span, window: window_length });
        }
        Ok(Self { window_length, boundaries })
    }

    pub fn boundary_times(&self, times: &[f64]) -> Vec<f64> {
        self.boundaries.iter().map(|&m| times[m]).collect()
    }

    /// Index of the window containing node time `t`.
    fn window_of(&self, times: &[f64], t: f64) -> usize {
        self.boundaries.partition_point(|&m| times[m] <= t).saturating_sub(1)
    }
}

pub fn partition_windows(traj: &InterpolatedTrajectory, window_length: f64) -> Result<WindowPartition> {
    WindowPartition::from_times(traj.times(), window_length)
}

/// `x̂(t) = x̄(t)/r(n)` for `t ∈ [Tₙ, Tₙ₊₁)`.
#[derive(Debug, Clone)]
pub struct RescaledTrajectory<'a> {
    traj: &'a InterpolatedTrajectory,
    partition: &'a WindowPartition,
    pub a: f64,
    pub scales: Vec<f64>,
}

impl RescaledTrajectory<'_> {
    pub fn at(&self, t: f64) -> Result<Vector> {
        let x = self.traj.at(t)?;
        let n = self.partition.window_of(self.traj.times(), t);
        Ok(x / self.scales[n])
    }

    /// `x̂(Tₙ)` for every window start.
    pub fn window_starts(&self) -> Vec<Vector> {
        self.partition
            .boundaries
            .iter()
            .zip(&self.scales)
            .map(|(&m, r)| &self.traj.points()[m] / *r)
            .collect()
    }
}

/// Scale factors `r(n) = max(‖x̄(Tₙ)‖/a, 1)` and the rescaled evaluator.
pub fn rescale<'a>(
    traj: &'a InterpolatedTrajectory,
    partition: &'a WindowPartition,
    a: f64,
) -> Result<RescaledTrajectory<'a>> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("radius a must be > 0, got {a}")));
    }
    let scales = partition
        .boundaries
        .iter()
        .map(|&m| (traj.node_norm(m) / a).max(1.0))
        .collect();
    Ok(RescaledTrajectory { traj, partition, a, scales })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    BoundedConsistent,
    /// Windows whose start lies outside the `r_check` ball yet did not contract.
    Suspicious(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub a: f64,
    pub window_length: f64,
    pub boundary_times: Vec<f64>,
    pub scales: Vec<f64>,
    /// `‖x̄(Tₙ₊₁)‖ / ‖x̄(Tₙ)‖`, one per complete window.
    pub window_ratios: Vec<f64>,
    pub sup_norm: f64,
    pub r_check: f64,
    pub contraction_threshold: f64,
    pub verdict: Verdict,
}

impl StabilityReport {
    fn flagged(&self, n: usize) -> bool {
        self.scales[n] > self.r_check && self.window_ratios[n] >= self.contraction_threshold
    }

    /// Writes `window,Tn,r,ratio,flag` rows; `flag` is 1 for a violating window.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "window,Tn,r,ratio,flag")?;
        for n in 0..self.window_ratios.len() {
            writeln!(
                out,
                "{n},{:.16e},{:.16e},{:.16e},{}",
                self.boundary_times[n],
                self.scales[n],
                self.window_ratios[n],
                u8::from(self.flagged(n))
            )?;
        }
        Ok(())
    }
}

pub fn contraction_report(
    traj: &InterpolatedTrajectory,
    partition: &WindowPartition,
    a: f64,
    r_check: f64,
    contraction_threshold: f64,
) -> Result<StabilityReport> {
    if !(r_check >= 1.0) {
        return Err(Error::invalid(format!("r_check must be >= 1, got {r_check}")));
    }
    if !(contraction_threshold > 0.0 && contraction_threshold < 1.0) {
        return Err(Error::invalid(format!(
            "contraction threshold must lie in (0, 1), got {contraction_threshold}"
        )));
    }
    let scales = rescale(traj, partition, a)?.scales;
    let window_ratios: Vec<f64> = partition
        .boundaries
        .windows(2)
        .map(|w| {
            let (from, to) = (traj.node_norm(w[0]), traj.node_norm(w[1]));
            if from < RATIO_FLOOR {
                0.0
            } else {
                to / from
            }
        })
        .collect();
    let sup_norm = (0..traj.len()).map(|i| traj.node_norm(i)).fold(0.0, f64::max);
    let mut report = StabilityReport {
        a,
        window_length: partition.window_length,
        boundary_times: partition.boundary_times(traj.times()),
        scales,
        window_ratios,
        sup_norm,
        r_check,
        contraction_threshold,
        verdict: Verdict::BoundedConsistent,
    };
    let violations: Vec<usize> = (0..report.window_ratios.len()).filter(|&n| report.flagged(n)).collect();
    if !violations.is_empty() {
        report.verdict = Verdict::Suspicious(violations);
    }
    Ok(report)
}

/// Ball description `(center, radius)` of `G_c(x) = {y/c : y ∈ G(cx)}` for
/// `G(x) = 2Qx + B̄_ε(0)`: center `2Q(cx)/c`, radius `ε/c`.
pub fn scaled_field(obj: &QuadraticObjective, epsilon: f64, c: f64, x: &Vector) -> Result<(Vector, f64)> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::invalid(format!("scale c must be >= 1, got {c}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let center = obj.gradient(&(x * c)) / c;
    Ok((center, epsilon / c))
}

/// Whether the final iterate lies in the open `δ`-neighborhood of the
/// minimum set `{0}`.
pub fn neighborhood_check(record: &RunRecord, delta: f64) -> Result<bool> {
    if let crate::engine::RunStatus::Diverged { step } = record.status {
        return Err(Error::NotCompleted { step: step as usize });
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    Ok(record.final_x.norm() < delta)
}

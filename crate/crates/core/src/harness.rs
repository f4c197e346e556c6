//! Deterministic experiment sweeps.
//!
//! A sweep walks a grid of one parameter (`c` for the SPSA experiment, `ε`
//! for the constant-error experiment, the oracle parameter for custom
//! sweeps). Every `(cell, run)` pair gets its own seed from [`derive_seed`],
//! from which a fresh `Q`, a fresh `x₀` and the engine's stream are drawn, so
//! cells are independent and results do not depend on thread scheduling.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::engine::{run, RunConfig, RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::gradient_sources::{GradientOracle, OracleSpec};
use crate::objective::{generate_random_pd, QuadraticObjective, SpectrumSpec};
use crate::schedules::StepSchedule;
use crate::Vector;

pub const CSV_HEADER: &str = "grid_value,mean_dist,log_mean_dist,diverged,run_seeds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// SPSA with constant sensitivity, cyclic steps; sweeps `c`.
    Exp1,
    /// Linear field with a constant error vector, harmonic steps; sweeps `ε`.
    Exp2,
    /// Oracle and schedule from the spec; sweeps the oracle parameter.
    Custom,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Custom => "custom",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            "custom" => Ok(Experiment::Custom),
            other => Err(Error::invalid(format!("unknown experiment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_step: f64,
    pub runs_per_cell: usize,
    pub dim: usize,
    pub iterations: u64,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    /// Eigenvalues of `Q` are drawn log-uniformly from this range.
    pub spectrum: (f64, f64),
    /// `x₀` is drawn uniformly on the sphere of this radius.
    pub x0_radius: f64,
    pub oracle: OracleSpec,
    pub schedule: StepSchedule,
    pub martingale_bound: f64,
    /// When set, the `Q` of every run is written here.
    pub q_dir: Option<PathBuf>,
}

/// Spectrum range used by both experiment presets.
///
/// With eigenvalues in `[1, 4]` the 8000-step cyclic schedule drives SPSA
/// iterates down to the floating point resolution of `f(x ± cΔ)`, where the
/// `c` dependence shows up.
pub const EXPERIMENT_SPECTRUM: (f64, f64) = (1.0, 4.0);
pub const DEFAULT_SPECTRUM: (f64, f64) = (0.5, 2.0);
pub const DEFAULT_X0_RADIUS: f64 = 5.0;

impl SweepSpec {
    pub fn exp1() -> Self {
        Self {
            experiment: Experiment::Exp1,
            grid_start: 0.1,
            grid_end: 10.0,
            grid_step: 0.01,
            runs_per_cell: 20,
            dim: 10,
            iterations: 8000,
            master_seed: 1,
            output_path: None,
            spectrum: EXPERIMENT_SPECTRUM,
            x0_radius: DEFAULT_X0_RADIUS,
            oracle: OracleSpec::Spsa { c: 0.1 },
            schedule: StepSchedule::spsa_experiment(),
            martingale_bound: 0.0,
            q_dir: None,
        }
    }

    pub fn exp2() -> Self {
        Self {
            experiment: Experiment::Exp2,
            grid_start: 0.1,
            grid_end: 2.0,
            grid_step: 0.01,
            iterations: 1000,
            oracle: OracleSpec::Linear { scale: 1.0, epsilon: 0.1 },
            schedule: StepSchedule::Harmonic { offset: 1.0 },
            ..Self::exp1()
        }
    }

    pub fn custom() -> Self {
        Self {
            experiment: Experiment::Custom,
            grid_start: 0.0,
            grid_end: 1.0,
            grid_step: 0.1,
            iterations: 1000,
            spectrum: DEFAULT_SPECTRUM,
            oracle: OracleSpec::Noise { epsilon: 0.0 },
            schedule: StepSchedule::Harmonic { offset: 1.0 },
            ..Self::exp1()
        }
    }

    pub fn for_experiment(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Exp1 => Self::exp1(),
            Experiment::Exp2 => Self::exp2(),
            Experiment::Custom => Self::custom(),
        }
    }

    pub fn with_grid(mut self, start: f64, end: f64, step: f64) -> Self {
        self.grid_start = start;
        self.grid_end = end;
        self.grid_step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_start.is_finite() && self.grid_end.is_finite()) || self.grid_start > self.grid_end {
            return Err(Error::invalid(format!(
                "grid start {} must not exceed grid end {}",
                self.grid_start, self.grid_end
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(Error::invalid(format!("grid step must be > 0, got {}", self.grid_step)));
        }
        if self.runs_per_cell == 0 || self.dim == 0 || self.iterations == 0 {
            return Err(Error::invalid("runs_per_cell, dim and iterations must all be >= 1"));
        }
        let (lo, hi) = self.spectrum;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid(format!("spectrum range must satisfy 0 < lo <= hi, got {lo}:{hi}")));
        }
        if !(self.x0_radius >= 0.0 && self.x0_radius.is_finite()) {
            return Err(Error::invalid("x0_radius must be finite and >= 0"));
        }
        if !(self.martingale_bound >= 0.0 && self.martingale_bound.is_finite()) {
            return Err(Error::invalid("martingale_bound must be finite and >= 0"));
        }
        for v in self.grid_values() {
            self.oracle_for(v)?;
        }
        Ok(())
    }

    /// `start + i·step` for every `i` that stays within `end` (up to 1e-9
    /// relative slack).
    pub fn grid_values(&self) -> Vec<f64> {
        let count = ((self.grid_end - self.grid_start) / self.grid_step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.grid_start + i as f64 * self.grid_step).collect()
    }

    fn oracle_for(&self, value: f64) -> Result<GradientOracle> {
        match self.experiment {
            Experiment::Exp1 => GradientOracle::spsa(value),
            Experiment::Exp2 => GradientOracle::linear_field(1.0, value, self.dim),
            Experiment::Custom => self.oracle.with_parameter(value).build(self.dim),
        }
    }

    fn schedule(&self) -> StepSchedule {
        match self.experiment {
            Experiment::Exp1 => StepSchedule::spsa_experiment(),
            Experiment::Exp2 => StepSchedule::Harmonic { offset: 1.0 },
            Experiment::Custom => self.schedule,
        }
    }

    /// Applies one `key=value` setting. Keys mirror the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::invalid(format!("bad value {value:?} for {what}"));
        let value = value.trim();
        match key.trim() {
            "experiment" => self.experiment = value.parse()?,
            "grid_start" => self.grid_start = value.parse().map_err(|_| bad(key))?,
            "grid_end" => self.grid_end = value.parse().map_err(|_| bad(key))?,
            "grid_step" => self.grid_step = value.parse().map_err(|_| bad(key))?,
            "grid" => (self.grid_start, self.grid_end, self.grid_step) = parse_grid(value)?,
            "runs_per_cell" => self.runs_per_cell = value.parse().map_err(|_| bad(key))?,
            "dim" => self.dim = value.parse().map_err(|_| bad(key))?,
            "iterations" => self.iterations = value.parse().map_err(|_| bad(key))?,
            "master_seed" => self.master_seed = value.parse().map_err(|_| bad(key))?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "spectrum" => self.spectrum = parse_range(value)?,
            "x0_radius" => self.x0_radius = value.parse().map_err(|_| bad(key))?,
            "oracle" => self.oracle = value.parse()?,
            "schedule" => self.schedule = value.parse()?,
            "martingale_bound" => self.martingale_bound = value.parse().map_err(|_| bad(key))?,
            "q_dir" => self.q_dir = Some(PathBuf::from(value)),
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` config text on top of `self`. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    /// Reads the `experiment` key first (it picks the defaults), then applies
    /// the whole file.
    pub fn from_config_text(text: &str, fallback: Experiment) -> Result<Self> {
        let experiment = text
            .lines()
            .filter_map(|l| l.trim().split_once('='))
            .find(|(k, _)| k.trim() == "experiment")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(fallback);
        let mut spec = Self::for_experiment(experiment);
        spec.apply_config(text)?;
        Ok(spec)
    }
}

/// Parses `start:end:step`.
pub fn parse_grid(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(Error::invalid(format!("grid must be start:end:step, got {s:?}")));
    };
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number {p:?} in grid {s:?}")));
    Ok((num(a)?, num(b)?, num(c)?))
}

/// Parses `lo:hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("range must be lo:hi, got {s:?}")))?;
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number {p:?} in range {s:?}")));
    Ok((num(a)?, num(b)?))
}

/// Per-run outcome inside a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub x0_norm: f64,
    pub final_distance: f64,
    pub sup_norm: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub grid_value: f64,
    /// Mean of `per_run_final_distances`; NaN when every run diverged.
    pub mean_final_distance: f64,
    pub log_mean_final_distance: f64,
    /// Final distances of the completed runs only.
    pub per_run_final_distances: Vec<f64>,
    pub diverged_count: usize,
    pub runs: Vec<RunOutcome>,
}

impl CellSummary {
    fn from_runs(grid_value: f64, runs: Vec<RunOutcome>) -> Self {
        let per_run_final_distances: Vec<f64> = runs
            .iter()
            .filter(|r| r.status == RunStatus::Completed)
            .map(|r| r.final_distance)
            .collect();
        let diverged_count = runs.len() - per_run_final_distances.len();
        let mean_final_distance = if per_run_final_distances.is_empty() {
            f64::NAN
        } else {
            per_run_final_distances.iter().sum::<f64>() / per_run_final_distances.len() as f64
        };
        Self {
            grid_value,
            mean_final_distance,
            log_mean_final_distance: mean_final_distance.ln(),
            per_run_final_distances,
            diverged_count,
            runs,
        }
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }
}

/// Seed for run `run_index` of cell `cell_index`.
///
/// The indices are packed as `cell << 32 | run` and mixed with the SplitMix64
/// finalizer, XORed into the master seed and mixed again:
/// `mix(master ^ mix(cell << 32 | run))`. The finalizer is a bijection on
/// `u64`, so for a fixed master seed distinct pairs with indices below 2³²
/// never collide. This mixer is part of the output format and must not change.
pub fn derive_seed(master_seed: u64, cell_index: u64, run_index: u64) -> u64 {
    let packed = (cell_index << 32) | (run_index & 0xffff_ffff);
    splitmix64_mix(master_seed ^ splitmix64_mix(packed))
}

fn splitmix64_mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform point on the sphere of radius `radius`.
pub fn random_on_sphere<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v * (radius / n);
        }
    }
}

/// A fully drawn run: the objective and the engine config.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub seed: u64,
    pub objective: QuadraticObjective,
    pub config: RunConfig,
}

/// Draws `Q`, `x₀` and the engine seed for `(cell, run)` from the derived seed.
pub fn prepare_run(spec: &SweepSpec, cell: u64, run_index: u64, oracle: GradientOracle) -> Result<PreparedRun> {
    let seed = derive_seed(spec.master_seed, cell, run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectrum = SpectrumSpec::log_uniform(spec.dim, spec.spectrum.0, spec.spectrum.1, &mut rng)?;
    let objective = generate_random_pd(spec.dim, &spectrum, rng.next_u64())?;
    let x0 = random_on_sphere(spec.dim, spec.x0_radius, &mut rng);
    let engine_seed = rng.next_u64();
    let config = RunConfig::new(objective.clone(), oracle, spec.schedule(), x0, spec.iterations, engine_seed)
        .with_martingale_bound(spec.martingale_bound);
    Ok(PreparedRun { seed, objective, config })
}

/// One run with full recording, as used by the `single` command: cell 0,
/// run 0 of `spec`, with the oracle taken verbatim from `spec.oracle` (the
/// experiment presets use their own oracle family at `grid_start`).
pub fn single_run(spec: &SweepSpec) -> Result<(PreparedRun, RunRecord)> {
    let oracle = match spec.experiment {
        Experiment::Custom => spec.oracle.build(spec.dim)?,
        _ => spec.oracle_for(spec.grid_start)?,
    };
    let prepared = prepare_run(spec, 0, 0, oracle)?;
    let record = run(&prepared.config)?;
    Ok((prepared, record))
}

fn run_cell_member(spec: &SweepSpec, cell: usize, run_index: usize, value: f64) -> Result<RunOutcome> {
    let oracle = spec.oracle_for(value)?;
    let mut prepared = prepare_run(spec, cell as u64, run_index as u64, oracle)?;
    // Only the endpoints are needed; the engine still tracks the true sup.
    prepared.config.record_stride = spec.iterations;
    if let Some(dir) = &spec.q_dir {
        let path = dir.join(format!("q_cell{cell}_run{run_index}.txt"));
        prepared.objective.write_matrix(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    let record = run(&prepared.config)?;
    Ok(RunOutcome {
        seed: prepared.seed,
        x0_norm: prepared.config.x0.norm(),
        final_distance: record.final_x.norm(),
        sup_norm: record.sup_norm,
        status: record.status,
    })
}

/// Runs every `(cell, run)` pair, possibly in parallel, and summarizes by
/// cell. Output equals a sequential execution.
pub fn run_grid(spec: &SweepSpec) -> Result<Vec<CellSummary>> {
    spec.validate()?;
    if let Some(dir) = &spec.q_dir {
        fs::create_dir_all(dir)?;
    }
    let values = spec.grid_values();
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|c| (0..spec.runs_per_cell).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(c, r)| run_cell_member(spec, c, r, values[c]))
        .collect::<Result<_>>()?;
    let mut outcomes = outcomes.into_iter();
    Ok(values
        .iter()
        .map(|&v| CellSummary::from_runs(v, outcomes.by_ref().take(spec.runs_per_cell).collect()))
        .collect())
}

fn require(spec: &SweepSpec, experiment: Experiment) -> Result<()> {
    if spec.experiment != experiment {
        return Err(Error::invalid(format!("expected a {experiment} spec, got {}", spec.experiment)));
    }
    Ok(())
}

/// SPSA-C sweep over `c` with the cyclic `1/((n mod 800) + 100)` schedule.
pub fn run_exp1(spec: &SweepSpec) -> Result<Vec<CellSummary>> {
    require(spec, Experiment::Exp1)?;
    run_grid(spec)
}

/// Constant-error sweep over `ε`: `x_{n+1} = x_n − γ(n)(Qx_n + ε̲)` with
/// `γ(n) = 1/(n+1)`.
pub fn run_exp2(spec: &SweepSpec) -> Result<Vec<CellSummary>> {
    require(spec, Experiment::Exp2)?;
    run_grid(spec)
}

/// Spearman rank correlation between grid values and mean final distances.
///
/// Ties get average ranks. A constant column gives 0.
pub fn summarize_trend(cells: &[CellSummary]) -> Result<f64> {
    if cells.len() < 3 {
        return Err(Error::invalid(format!("trend needs at least 3 cells, got {}", cells.len())));
    }
    let xs: Vec<f64> = cells.iter().map(|c| c.grid_value).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.mean_final_distance).collect();
    Ok(spearman(&xs, &ys))
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j share rank (i + j)/2 + 1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Writes the sweep CSV: one row per cell, floats with 17 significant digits,
/// run seeds separated by `;`.
pub fn write_cells_csv<W: Write>(cells: &[CellSummary], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for cell in cells {
        let seeds: Vec<String> = cell.run_seeds().iter().map(u64::to_string).collect();
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{}",
            cell.grid_value,
            cell.mean_final_distance,
            cell.log_mean_final_distance,
            cell.diverged_count,
            seeds.join(";")
        )?;
    }
    Ok(())
}

pub fn cells_csv_string(cells: &[CellSummary]) -> String {
    let mut buf = Vec::new();
    write_cells_csv(cells, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

pub fn write_cells_csv_file(cells: &[CellSummary], path: &Path) -> Result<()> {
    fs::write(path, cells_csv_string(cells))?;
    Ok(())
}

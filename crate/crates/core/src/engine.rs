//! The bounded-error descent recursion `x_{n+1} = x_n − γ(n)·(g(x_n) + m_{n+1})`.
//!
//! `g` is sampled from a [`GradientOracle`], `γ` from a [`StepSchedule`] and
//! `m_{n+1}` is optional zero-mean noise drawn uniformly from a ball. Runs are
//! single threaded and deterministic given the seed; [`run_sweep`] executes
//! many runs in parallel without changing their results.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient_sources::{uniform_in_ball, GradientOracle};
use crate::objective::QuadraticObjective;
use crate::schedules::StepSchedule;
use crate::Vector;

pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub objective: QuadraticObjective,
    pub oracle: GradientOracle,
    pub schedule: StepSchedule,
    pub x0: Vector,
    pub iterations: u64,
    pub seed: u64,
    pub divergence_threshold: f64,
    pub record_stride: u64,
    /// Radius of the additive martingale-difference noise; 0 disables it.
    pub martingale_bound: f64,
}

impl RunConfig {
    /// Config with the default threshold, stride and no extra noise.
    pub fn new(
        objective: QuadraticObjective,
        oracle: GradientOracle,
        schedule: StepSchedule,
        x0: Vector,
        iterations: u64,
        seed: u64,
    ) -> Self {
        let record_stride = default_record_stride(objective.dim(), iterations);
        Self {
            objective,
            oracle,
            schedule,
            x0,
            iterations,
            seed,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            record_stride,
            martingale_bound: 0.0,
        }
    }

    pub fn with_record_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_divergence_threshold(mut self, threshold: f64) -> Self {
        self.divergence_threshold = threshold;
        self
    }

    pub fn with_martingale_bound(mut self, bound: f64) -> Self {
        self.martingale_bound = bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.objective.dim();
        if self.x0.len() != d {
            return Err(Error::invalid(format!("x0 has length {} for dimension {d}", self.x0.len())));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0 must be finite"));
        }
        self.oracle.validate(d)?;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be >= 1"));
        }
        if !(self.divergence_threshold > self.x0.norm()) {
            return Err(Error::invalid(format!(
                "divergence threshold {} must exceed |x0| = {}",
                self.divergence_threshold,
                self.x0.norm()
            )));
        }
        if !(self.martingale_bound.is_finite() && self.martingale_bound >= 0.0) {
            return Err(Error::invalid("martingale_bound must be finite and >= 0"));
        }
        Ok(())
    }
}

/// 1 at desk scale (`d ≤ 16`, at most 10⁴ iterations), 10 otherwise.
pub fn default_record_stride(dim: usize, iterations: u64) -> u64 {
    if dim <= 16 && iterations <= 10_000 {
        1
    } else {
        10
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Diverged { step: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Iteration indices `n` of the recorded iterates.
    pub steps: Vec<u64>,
    /// `t(n) = Σ_{i<n} γ(i)` at each recorded `n`.
    pub timeline: Vec<f64>,
    pub norms: Vec<f64>,
    pub iterates: Vec<Vector>,
    pub final_x: Vector,
    pub status: RunStatus,
    /// Largest `‖x_n‖` over every iterate, recorded or not.
    pub sup_norm: f64,
    pub record_stride: u64,
}

impl RunRecord {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn x0(&self) -> &Vector {
        &self.iterates[0]
    }

    /// Writes `n,t,norm` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,t,norm")?;
        for ((n, t), norm) in self.steps.iter().zip(&self.timeline).zip(&self.norms) {
            writeln!(out, "{n},{t:.16e},{norm:.16e}")?;
        }
        Ok(())
    }

    /// Writes the final iterate, one coordinate per line.
    pub fn write_final<W: Write>(&self, out: W) -> Result<()> {
        write_vector(&self.final_x, out)
    }
}

/// The `n,t,norm` columns of a saved record.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTrace {
    pub steps: Vec<u64>,
    pub timeline: Vec<f64>,
    pub norms: Vec<f64>,
}

impl NormTrace {
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut trace = NormTrace { steps: Vec::new(), timeline: Vec::new(), norms: Vec::new() };
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "n,t,norm" => {}
            Some(Err(e)) => return Err(e.into()),
            _ => return Err(Error::Parse { line: 1, message: "expected header n,t,norm".into() }),
        }
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse { line: i + 2, message: m.to_string() };
            let fields: Vec<&str> = line.trim().split(',').collect();
            let [n, t, norm] = fields.as_slice() else {
                return Err(bad("expected 3 fields"));
            };
            trace.steps.push(n.parse().map_err(|_| bad("bad step index"))?);
            trace.timeline.push(t.parse().map_err(|_| bad("bad time"))?);
            trace.norms.push(norm.parse().map_err(|_| bad("bad norm"))?);
        }
        if trace.steps.is_empty() {
            return Err(Error::Parse { line: 2, message: "record has no rows".into() });
        }
        Ok(trace)
    }
}

impl From<&RunRecord> for NormTrace {
    fn from(r: &RunRecord) -> Self {
        NormTrace { steps: r.steps.clone(), timeline: r.timeline.clone(), norms: r.norms.clone() }
    }
}

pub fn write_vector<W: Write>(x: &Vector, mut out: W) -> Result<()> {
    for v in x.iter() {
        writeln!(out, "{v:.16e}")?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(input: R) -> Result<Vector> {
    let mut values = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        values.push(s.parse().map_err(|_| Error::Parse { line: i + 1, message: format!("bad real {s:?}") })?);
    }
    Ok(Vector::from_vec(values))
}

/// Runs the recursion. Stops early with [`RunStatus::Diverged`] once
/// `‖x_n‖` exceeds the divergence threshold; a non-finite iterate is an error.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let RunConfig { objective, oracle, schedule, .. } = config;
    let dim = objective.dim();
    let stride = config.record_stride;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut x = config.x0.clone();
    let mut t = 0.0;
    let mut sup_norm = x.norm();
    let mut record = RunRecord {
        steps: vec![0],
        timeline: vec![0.0],
        norms: vec![sup_norm],
        iterates: vec![x.clone()],
        final_x: x.clone(),
        status: RunStatus::Completed,
        sup_norm,
        record_stride: stride,
    };

    for n in 0..config.iterations {
        let g = oracle.sample(objective, &x, &mut rng)?;
        let gamma = schedule.gamma(n);
        x.axpy(-gamma, &g, 1.0);
        if config.martingale_bound > 0.0 {
            let m = uniform_in_ball(dim, config.martingale_bound, &mut rng);
            x.axpy(-gamma, &m, 1.0);
        }
        t += gamma;
        let step = n + 1;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure { step: step as usize });
        }
        let norm = x.norm();
        sup_norm = sup_norm.max(norm);
        let diverged = norm > config.divergence_threshold;
        if diverged || step % stride == 0 || step == config.iterations {
            record.steps.push(step);
            record.timeline.push(t);
            record.norms.push(norm);
            record.iterates.push(x.clone());
        }
        if diverged {
            record.status = RunStatus::Diverged { step };
            break;
        }
    }
    record.final_x = x;
    record.sup_norm = sup_norm;
    Ok(record)
}

/// Runs every config in parallel; results come back in input order and equal
/// what sequential [`run`] calls produce. Errors are kept per slot.
pub fn run_sweep(configs: &[RunConfig]) -> Vec<Result<RunRecord>> {
    configs.par_iter().map(run).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{generate_random_pd, SpectrumSpec};
    use crate::Matrix;
    use rand::Rng;

    fn scalar_config(gamma: f64, x0: f64, iterations: u64) -> RunConfig {
        RunConfig::new(
            QuadraticObjective::identity(1).unwrap(),
            GradientOracle::Exact,
            StepSchedule::constant(gamma).unwrap(),
            Vector::from_element(1, x0),
            iterations,
            0,
        )
    }

    fn random_objective(dim: usize, seed: u64) -> QuadraticObjective {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = SpectrumSpec::log_uniform(dim, 0.5, 2.0, &mut rng).unwrap();
        generate_random_pd(dim, &spec, seed).unwrap()
    }

    fn random_x0(dim: usize, seed: u64) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        Vector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn halving_recursion() {
        let rec = run(&scalar_config(0.25, 1.0, 4)).unwrap();
        assert_eq!(rec.final_x[0], 0.0625);
        let expected: Vec<f64> = (0..=4).map(|n| 0.5f64.powi(n)).collect();
        assert_eq!(rec.norms, expected);
        assert_eq!(rec.timeline, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(rec.sup_norm, 1.0);
        assert!(rec.is_completed());
    }

    #[test]
    fn single_exact_step() {
        let obj = random_objective(4, 3);
        let x0 = random_x0(4, 3);
        let cfg = RunConfig::new(obj.clone(), GradientOracle::Exact, StepSchedule::harmonic(2.0).unwrap(), x0.clone(), 1, 5);
        let rec = run(&cfg).unwrap();
        let want = &x0 - (obj.q() * &x0) * (2.0 * 0.5);
        assert!((rec.final_x - want).amax() < 1e-15);
    }

    #[test]
    fn newton_unit_step_hits_the_origin() {
        for seed in 0..5 {
            let obj = random_objective(6, seed);
            let x0 = random_x0(6, seed);
            let cfg = RunConfig::new(obj.clone(), GradientOracle::newton(0.0).unwrap(), StepSchedule::harmonic(1.0).unwrap(), x0.clone(), 1, seed);
            let rec = run(&cfg).unwrap();
            // Oracle: LU solve of (2Q) y = 2Qx0 gives the step; x1 = x0 - y.
            let h = obj.q() * 2.0;
            let y = h.clone().lu().solve(&(h * &x0)).unwrap();
            assert!((&rec.final_x - (&x0 - y)).amax() < 1e-12);
            assert!(rec.final_x.norm() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let obj = QuadraticObjective::from_diagonal(&[10.0]).unwrap();
        let cfg = RunConfig::new(obj, GradientOracle::Exact, StepSchedule::constant(1.0).unwrap(), Vector::from_element(1, 1.0), 100, 0)
            .with_divergence_threshold(1e3);
        let rec = run(&cfg).unwrap();
        // |1 - 20| = 19 per step: 19, 361, 6859 > 1e3.
        assert_eq!(rec.status, RunStatus::Diverged { step: 3 });
        assert_eq!(rec.final_x[0], -6859.0);
        assert_eq!(rec.sup_norm, 6859.0);
        assert_eq!(*rec.steps.last().unwrap(), 3);
    }

    #[test]
    fn non_finite_iterate_is_an_error() {
        let obj = QuadraticObjective::from_diagonal(&[1e200]).unwrap();
        let cfg = RunConfig::new(obj, GradientOracle::Exact, StepSchedule::constant(1.0).unwrap(), Vector::from_element(1, 1e150), 10, 0)
            .with_divergence_threshold(f64::INFINITY);
        assert!(matches!(run(&cfg), Err(Error::NumericFailure { step: 1 })));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(run(&scalar_config(0.5, 1.0, 0)).is_err());
        assert!(run(&scalar_config(0.5, 1.0, 3).with_record_stride(0)).is_err());
        assert!(run(&scalar_config(0.5, 10.0, 3).with_divergence_threshold(5.0)).is_err());
        assert!(run(&scalar_config(0.5, 1.0, 3).with_martingale_bound(-1.0)).is_err());
        let mut cfg = scalar_config(0.5, 1.0, 3);
        cfg.x0 = Vector::zeros(2);
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn record_stride_keeps_the_final_iterate() {
        let obj = random_objective(3, 1);
        let cfg = RunConfig::new(obj, GradientOracle::bounded_noise(0.1).unwrap(), StepSchedule::harmonic(1.0).unwrap(), random_x0(3, 1), 25, 9)
            .with_record_stride(10);
        let rec = run(&cfg).unwrap();
        assert_eq!(rec.steps, vec![0, 10, 20, 25]);
        assert_eq!(rec.iterates.last().unwrap(), &rec.final_x);
        assert!(rec.sup_norm >= rec.norms.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn default_stride() {
        assert_eq!(default_record_stride(10, 8000), 1);
        assert_eq!(default_record_stride(17, 100), 10);
        assert_eq!(default_record_stride(2, 10_001), 10);
    }

    #[test]
    fn descent_with_exact_gradient() {
        for seed in 0..5 {
            let obj = random_objective(10, seed);
            let x0 = random_x0(10, seed);
            let k = obj.growth_constant();
            let sched = StepSchedule::harmonic(1.0).unwrap();
            let cfg = RunConfig::new(obj.clone(), GradientOracle::Exact, sched, x0.clone(), 1000, seed);
            let rec = run(&cfg).unwrap();
            assert!(rec.final_x.norm() < x0.norm());
            let values: Vec<f64> = rec.iterates.iter().map(|x| obj.eval(x)).collect();
            for n in 0..1000usize {
                if sched.gamma(n as u64) < 1.0 / k {
                    assert!(values[n + 1] <= values[n] * (1.0 + 1e-12), "step {n}");
                }
            }
        }
    }

    #[test]
    fn constant_error_runs_stay_bounded() {
        for (i, eps) in [0.0, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let obj = random_objective(10, i as u64);
            let x0 = random_x0(10, i as u64);
            let oracle = GradientOracle::linear_field(1.0, eps, 10).unwrap();
            let cfg = RunConfig::new(obj, oracle, StepSchedule::harmonic(1.0).unwrap(), x0.clone(), 1000, 0);
            let rec = run(&cfg).unwrap();
            assert!(rec.is_completed());
            assert!(rec.sup_norm <= 10.0 * (1.0 + x0.norm()));
        }
    }

    #[test]
    fn timeline_differences_match_schedule() {
        let obj = random_objective(4, 2);
        let sched = StepSchedule::spsa_experiment();
        let cfg = RunConfig::new(obj, GradientOracle::spsa(0.5).unwrap(), sched, random_x0(4, 2), 2000, 4);
        let rec = run(&cfg).unwrap();
        for w in rec.steps.windows(2).zip(rec.timeline.windows(2)) {
            let (n, t) = w;
            assert_eq!(n[1], n[0] + 1);
            assert!((t[1] - t[0] - sched.gamma(n[0])).abs() < 1e-12);
            assert!(t[1] > t[0]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let obj = random_objective(5, 8);
        let cfg = RunConfig::new(obj, GradientOracle::spsa(1.0).unwrap(), StepSchedule::spsa_experiment(), random_x0(5, 8), 500, 77)
            .with_martingale_bound(0.05);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn martingale_noise_is_bounded_by_its_radius() {
        // Exact oracle at the origin: every step is -γ(n)·m with |m| <= bound.
        let obj = QuadraticObjective::new(Matrix::identity(3, 3)).unwrap();
        let cfg = RunConfig::new(obj, GradientOracle::Exact, StepSchedule::constant(1.0).unwrap(), Vector::zeros(3), 1, 3)
            .with_martingale_bound(0.2);
        let rec = run(&cfg).unwrap();
        assert!(rec.final_x.norm() <= 0.2);
        assert!(rec.final_x.norm() > 0.0);
    }

    #[test]
    fn sweep_matches_sequential_runs() {
        assert!(run_sweep(&[]).is_empty());
        let obj = random_objective(4, 6);
        let x0 = random_x0(4, 6);
        let configs: Vec<RunConfig> = (0..20)
            .map(|s| RunConfig::new(obj.clone(), GradientOracle::spsa(0.3).unwrap(), StepSchedule::spsa_experiment(), x0.clone(), 300, s))
            .collect();
        let results: Vec<RunRecord> = run_sweep(&configs).into_iter().map(|r| r.unwrap()).collect();
        for (cfg, rec) in configs.iter().zip(&results) {
            assert_eq!(&run(cfg).unwrap(), rec);
        }
        for i in 0..results.len() {
            for j in (i + 1)..results.len() {
                assert_ne!(results[i].final_x, results[j].final_x);
            }
        }
        let twice = run_sweep(&[configs[0].clone(), configs[0].clone()]);
        assert_eq!(twice[0].as_ref().unwrap(), twice[1].as_ref().unwrap());
    }

    #[test]
    fn sweep_keeps_errors_per_slot() {
        let good = scalar_config(0.5, 1.0, 3);
        let bad = scalar_config(0.5, 1.0, 0);
        let out = run_sweep(&[good, bad]);
        assert!(out[0].is_ok());
        assert!(out[1].is_err());
    }

    #[test]
    fn csv_and_vector_files() {
        let rec = run(&scalar_config(0.25, 1.0, 2)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "n,t,norm\n0,0.0000000000000000e0,1.0000000000000000e0\n1,2.5000000000000000e-1,5.0000000000000000e-1\n2,5.0000000000000000e-1,2.5000000000000000e-1\n"
        );
        let trace = NormTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(trace, NormTrace::from(&rec));

        let mut vbuf = Vec::new();
        rec.write_final(&mut vbuf).unwrap();
        assert_eq!(read_vector(vbuf.as_slice()).unwrap(), rec.final_x);
        assert!(NormTrace::read_csv("a,b\n".as_bytes()).is_err());
    }
}

//! Quadratic test objectives `f(x) = xᵀQx` with symmetric positive definite `Q`.
//!
//! Random objectives are built as `Q = UΣUᵀ`, where `U` comes from classical
//! Gram-Schmidt applied to a matrix of independent standard Gaussians and `Σ`
//! is a caller supplied spectrum. The minimum set of every such objective is
//! the origin.

use std::io::{BufRead, Write};

use nalgebra::{Cholesky, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Entrywise tolerance for the symmetry check on user supplied matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Columns shorter than this after projection are resampled.
const GRAM_SCHMIDT_MIN_NORM: f64 = 1e-12;
const GRAM_SCHMIDT_MAX_RESAMPLES: usize = 100;

/// Diagonal of `Σ` in `Q = UΣUᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    eigenvalues: Vec<f64>,
}

impl SpectrumSpec {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("spectrum must be non-empty"));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!(
                "spectrum entries must be finite and > 0, got {bad}"
            )));
        }
        Ok(Self { eigenvalues })
    }

    /// `dim` eigenvalues drawn log-uniformly from `[lo, hi]`.
    pub fn log_uniform<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "log-uniform spectrum needs 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let eigenvalues = (0..dim)
            .map(|_| (a + (b - a) * rng.random::<f64>()).exp())
            .collect();
        Self::new(eigenvalues)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    q: Matrix,
}

impl QuadraticObjective {
    /// Wraps `q`, checking symmetry (to [`SYMMETRY_TOLERANCE`]) and positive
    /// definiteness (Cholesky succeeds).
    pub fn new(q: Matrix) -> Result<Self> {
        let d = q.nrows();
        if d == 0 || q.ncols() != d {
            return Err(Error::invalid(format!(
                "Q must be a non-empty square matrix, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Q has non-finite entries"));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (q[(i, j)] - q[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "Q is not symmetric at ({i}, {j}): {} vs {}",
                        q[(i, j)],
                        q[(j, i)]
                    )));
                }
            }
        }
        if Cholesky::new(q.clone()).is_none() {
            return Err(Error::invalid("Q is not positive definite"));
        }
        Ok(Self { q })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(Matrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    /// `xᵀQx`.
    pub fn eval(&self, x: &Vector) -> f64 {
        x.dot(&(&self.q * x))
    }

    /// `∇f(x) = 2Qx`.
    pub fn gradient(&self, x: &Vector) -> Vector {
        (&self.q * x) * 2.0
    }

    /// `2Q`, independent of the evaluation point.
    pub fn hessian(&self) -> Matrix {
        &self.q * 2.0
    }

    /// `K = 2‖Q‖₂`, so that `‖∇f(x)‖ ≤ K(1 + ‖x‖)` everywhere.
    pub fn growth_constant(&self) -> f64 {
        let eig = SymmetricEigen::new(self.q.clone());
        2.0 * eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Writes the text matrix format: a line with `d`, then `d` rows of `d`
    /// space separated reals with 17 significant digits.
    pub fn write_matrix<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        writeln!(out, "{d}")?;
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| format!("{:.16e}", self.q[(i, j)])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_matrix<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty matrix file".into() })?;
        let d: usize = header?.trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad dimension: {e}"),
        })?;
        let mut q = Matrix::zeros(d, d);
        for i in 0..d {
            let (line_no, row) = lines.next().ok_or_else(|| Error::Parse {
                line: line_no + i + 1,
                message: format!("expected {d} rows, found {i}"),
            })?;
            let row = row?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: line_no, message: format!("{e}") })?;
            if values.len() != d {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {d} values, found {}", values.len()),
                });
            }
            for (j, v) in values.into_iter().enumerate() {
                q[(i, j)] = v;
            }
        }
        Self::new(q)
    }
}

/// Builds `Q = UΣUᵀ` with `U` from Gram-Schmidt on a seeded Gaussian matrix.
///
/// Same `(dim, spectrum, seed)` gives a bit-identical `Q`.
pub fn generate_random_pd(dim: usize, spectrum: &SpectrumSpec, seed: u64) -> Result<QuadraticObjective> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if spectrum.len() != dim {
        return Err(Error::invalid(format!(
            "spectrum has {} entries for dimension {dim}",
            spectrum.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthonormal(dim, &mut rng)?;
    let sigma = Matrix::from_diagonal(&Vector::from_column_slice(spectrum.eigenvalues()));
    let q = &u * sigma * u.transpose();
    // Round-off leaves q asymmetric in the last bits.
    let q = (&q + q.transpose()) * 0.5;
    QuadraticObjective::new(q)
}

/// Classical Gram-Schmidt with one re-orthogonalization pass over the columns
/// of a Gaussian matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Matrix> {
    let mut u = Matrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut failures = 0;
    let mut j = 0;
    while j < dim {
        let mut v = u.column(j).clone_owned();
        let mut first_pass_norm = 0.0;
        for pass in 0..2 {
            let coeffs: Vec<f64> = (0..j).map(|k| u.column(k).dot(&v)).collect();
            for (k, c) in coeffs.into_iter().enumerate() {
                v -= u.column(k) * c;
            }
            if pass == 0 {
                first_pass_norm = v.norm();
            }
        }
        if first_pass_norm < GRAM_SCHMIDT_MIN_NORM {
            failures += 1;
            if failures >= GRAM_SCHMIDT_MAX_RESAMPLES {
                return Err(Error::DegenerateInput { attempts: failures });
            }
            for i in 0..dim {
                u[(i, j)] = rng.sample(StandardNormal);
            }
            continue;
        }
        let norm = v.norm();
        u.set_column(j, &(v / norm));
        j += 1;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sorted_eigenvalues(q: &Matrix) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(q.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn one_dimensional_generation_returns_spectrum() {
        for seed in [0, 1, 99] {
            let obj = generate_random_pd(1, &SpectrumSpec::new(vec![3.0]).unwrap(), seed).unwrap();
            assert_relative_eq!(obj.q()[(0, 0)], 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_spectrum_gives_identity() {
        let spec = SpectrumSpec::new(vec![1.0, 1.0]).unwrap();
        for seed in [3, 4, 5] {
            let obj = generate_random_pd(2, &spec, seed).unwrap();
            assert!((obj.q() - Matrix::identity(2, 2)).amax() < 1e-14);
        }
    }

    #[test]
    fn generated_spectrum_matches_eigen_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let spec = SpectrumSpec::log_uniform(10, 0.5, 2.0, &mut rng).unwrap();
        let obj = generate_random_pd(10, &spec, 42).unwrap();
        let mut want = spec.eigenvalues().to_vec();
        want.sort_by(f64::total_cmp);
        for (got, want) in sorted_eigenvalues(obj.q()).iter().zip(&want) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn gram_schmidt_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_orthonormal(12, &mut rng).unwrap();
        let gram = u.transpose() * &u;
        assert!((gram - Matrix::identity(12, 12)).amax() < 1e-13);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SpectrumSpec::new(vec![0.5, 1.0, 1.5, 2.0]).unwrap();
        let a = generate_random_pd(4, &spec, 77).unwrap();
        let b = generate_random_pd(4, &spec, 77).unwrap();
        assert_eq!(a.q().as_slice(), b.q().as_slice());
        let c = generate_random_pd(4, &spec, 78).unwrap();
        assert_ne!(a.q().as_slice(), c.q().as_slice());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SpectrumSpec::new(vec![1.0, 0.0]).is_err());
        assert!(SpectrumSpec::new(vec![]).is_err());
        let spec = SpectrumSpec::new(vec![1.0]).unwrap();
        assert!(generate_random_pd(2, &spec, 0).is_err());
        assert!(generate_random_pd(0, &spec, 0).is_err());
        assert!(QuadraticObjective::new(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        assert!(QuadraticObjective::from_diagonal(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn eval_examples() {
        let id2 = QuadraticObjective::identity(2).unwrap();
        assert_eq!(id2.eval(&Vector::zeros(2)), 0.0);
        assert_eq!(id2.eval(&Vector::from_vec(vec![3.0, 4.0])), 25.0);
        let q = QuadraticObjective::from_diagonal(&[2.0, 1.0]).unwrap();
        assert_eq!(q.eval(&Vector::from_vec(vec![1.0, 1.0])), 3.0);
    }

    #[test]
    fn gradient_and_hessian_examples() {
        let id3 = QuadraticObjective::identity(3).unwrap();
        assert_eq!(id3.gradient(&Vector::from_element(3, 1.0)), Vector::from_element(3, 2.0));
        let s = QuadraticObjective::from_diagonal(&[3.0]).unwrap();
        assert_eq!(s.gradient(&Vector::from_vec(vec![5.0]))[0], 30.0);
        assert_eq!(s.hessian()[(0, 0)], 6.0);
        assert_eq!(id3.hessian(), Matrix::identity(3, 3) * 2.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = SpectrumSpec::log_uniform(10, 0.5, 2.0, &mut rng).unwrap();
        let obj = generate_random_pd(10, &spec, 7).unwrap();
        let mut e1 = Vector::zeros(10);
        e1[0] = 1.0;
        let g = obj.gradient(&e1);
        let h = 1e-5;
        for i in 0..10 {
            let mut xp = e1.clone();
            let mut xm = e1.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (obj.eval(&xp) - obj.eval(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let spec = SpectrumSpec::new(vec![0.7, 1.1, 1.9, 0.6, 1.3]).unwrap();
        let obj = generate_random_pd(5, &spec, 21).unwrap();
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0, 0.5, -0.7]);
        let hess = obj.hessian();
        let h = 1e-5;
        for j in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (obj.gradient(&xp) - obj.gradient(&xm)) / (2.0 * h);
            for i in 0..5 {
                assert!((col[i] - hess[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn growth_constant_examples() {
        assert_relative_eq!(QuadraticObjective::identity(4).unwrap().growth_constant(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            QuadraticObjective::from_diagonal(&[1.0, 4.0]).unwrap().growth_constant(),
            8.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn growth_bound_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = SpectrumSpec::log_uniform(6, 0.5, 2.0, &mut rng).unwrap();
        let obj = generate_random_pd(6, &spec, 9).unwrap();
        let k = obj.growth_constant();
        for _ in 0..1000 {
            let dir = Vector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = dir.normalize() * (100.0 * rng.random::<f64>());
            assert!(obj.gradient(&x).norm() <= k * (1.0 + x.norm()) + 1e-9);
        }
    }

    #[test]
    fn matrix_file_round_trip() {
        let spec = SpectrumSpec::new(vec![0.5, 1.0, 2.0]).unwrap();
        let obj = generate_random_pd(3, &spec, 11).unwrap();
        let mut buf = Vec::new();
        obj.write_matrix(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3\n"));
        assert_eq!(text.lines().count(), 4);
        let back = QuadraticObjective::read_matrix(buf.as_slice()).unwrap();
        assert_eq!(back.q().as_slice(), obj.q().as_slice());
    }

    #[test]
    fn matrix_file_errors_are_reported() {
        assert!(matches!(
            QuadraticObjective::read_matrix("2\n1 0\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            QuadraticObjective::read_matrix("2\n1 0 0\n0 1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}

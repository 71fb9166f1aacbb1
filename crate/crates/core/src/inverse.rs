//! Observation and least-squares recovery for `f = Φg`.
//!
//! Sampling matrices are only materialized by [`build_sampling_matrix`];
//! everything else gathers rows of `Φ` directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{matvec, matvec_transpose, Cholesky, Matrix};

/// i.i.d. zero-mean Gaussian noise with variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
    seed: u64,
}

impl NoiseModel {
    pub fn new(sigma2: f64, seed: u64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise variance must be finite and non-negative, got {sigma2}"
            )));
        }
        Ok(Self { sigma2, seed })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub g_hat: Vec<f64>,
    /// `Φ·g_hat`
    pub f_hat: Vec<f64>,
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} has length {got}, expected {expected}"
        )))
    }
}

/// The `|S|×n` 0/1 matrix with `c[i][s[i]] = 1`.
pub fn build_sampling_matrix(s: &[usize], n: usize) -> Result<Matrix> {
    if s.is_empty() || n == 0 {
        return Err(Error::Dimension(format!(
            "sampling matrix needs a nonempty set and n > 0 (|S| = {}, n = {n})",
            s.len()
        )));
    }
    let mut c = Matrix::zeros(s.len(), n);
    for (row, &j) in s.iter().enumerate() {
        if j >= n {
            return Err(Error::Index { index: j, len: n });
        }
        c.set(row, j, 1.0);
    }
    Ok(c)
}

fn fill_noise(rng: &mut ChaCha8Rng, sigma: f64, out: &mut [f64]) {
    for v in out {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

/// `y = CΦg + n`.
pub fn observe(phi: &Matrix, g: &[f64], s: &[usize], noise: &NoiseModel) -> Result<Vec<f64>> {
    check_len("parameter vector", g.len(), phi.cols())?;
    let mut y = matvec(&phi.gather_rows(s)?, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    fill_noise(&mut rng, noise.sigma2.sqrt(), &mut y);
    Ok(y)
}

/// Least-squares fit of `y ≈ CΦg`, factored once and reused across
/// right-hand sides.
struct LeastSquares {
    a: Matrix,
    normal: Cholesky,
}

impl LeastSquares {
    fn new(phi: &Matrix, s: &[usize]) -> Result<Self> {
        let a = phi.gather_rows(s)?;
        if a.rows() < a.cols() {
            return Err(Error::Dimension(format!(
                "{} samples cannot determine {} parameters",
                a.rows(),
                a.cols()
            )));
        }
        let normal = Cholesky::factor(&a.normal_matrix())?;
        Ok(Self { a, normal })
    }

    fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("observation", y.len(), self.a.rows())?;
        self.normal.solve(&matvec_transpose(&self.a, y)?)
    }
}

/// `ĝ = (CΦ)†y`, `f̂ = Φĝ`. A rank-deficient `CΦ` surfaces as
/// `NotPositiveDefinite`.
pub fn ls_estimate(phi: &Matrix, s: &[usize], y: &[f64]) -> Result<Estimate> {
    let g_hat = LeastSquares::new(phi, s)?.solve(y)?;
    let f_hat = matvec(phi, &g_hat)?;
    Ok(Estimate { g_hat, f_hat })
}

/// `σ²·Tr[(CΦ)ᵀ(CΦ)]⁻¹`, the expected squared error of the LS estimate.
pub fn expected_mse(phi: &Matrix, s: &[usize], sigma2: f64) -> Result<f64> {
    NoiseModel::new(sigma2, 0)?;
    let a = phi.gather_rows(s)?;
    Ok(sigma2 * Cholesky::factor(&a.normal_matrix())?.trace_inverse())
}

/// Empirical `E‖ĝ − g‖²` over `trials` independent noise draws.
///
/// Trial `t` draws its noise from ChaCha8 seeded with `seed` on stream `t`,
/// so the value does not depend on how trials are scheduled across threads.
pub fn monte_carlo_mse(
    phi: &Matrix,
    s: &[usize],
    g: &[f64],
    sigma2: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    NoiseModel::new(sigma2, seed)?;
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be at least 1".into()));
    }
    check_len("parameter vector", g.len(), phi.cols())?;
    let ls = LeastSquares::new(phi, s)?;
    let clean = matvec(&ls.a, g)?;
    let sigma = sigma2.sqrt();

    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut y = clean.clone();
            fill_noise(&mut rng, sigma, &mut y);
            let g_hat = ls.solve(&y)?;
            Ok(g_hat.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect::<Result<_>>()?;
    Ok(errors.iter().sum::<f64>() / trials as f64)
}

/// Mean of `expected_mse` over independent `(Φ, S)` draws.
pub fn averaged_mse(instances: &[(&Matrix, &[usize])], sigma2: f64) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::InvalidSpec("no instances to average".into()));
    }
    let mut total = 0.0;
    for (phi, s) in instances {
        total += expected_mse(phi, s, sigma2)?;
    }
    Ok(total / instances.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> Matrix {
        Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap()
    }

    #[test]
    fn sampling_matrix_examples() {
        let c = build_sampling_matrix(&[1], 3).unwrap();
        assert_eq!(c, Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap());
        assert_eq!(
            build_sampling_matrix(&[0, 1, 2, 3], 4).unwrap(),
            Matrix::identity(4)
        );
        assert_eq!(
            build_sampling_matrix(&[3], 3).unwrap_err(),
            Error::Index { index: 3, len: 3 }
        );
        let phi = worked();
        let s = [2, 0];
        let c = build_sampling_matrix(&s, 3).unwrap();
        assert_eq!(c.matmul(&phi).unwrap(), phi.gather_rows(&s).unwrap());
    }

    #[test]
    fn observe_examples() {
        let phi = worked();
        let quiet = NoiseModel::new(0.0, 1).unwrap();
        let y = observe(&phi, &[1.0, -2.0], &[2, 0], &quiet).unwrap();
        assert_eq!(y, [-1.0, 2.0]);
        let y = observe(&phi, &[0.0, 0.0], &[0, 1, 2], &quiet).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        let noisy = NoiseModel::new(1.0, 9).unwrap();
        let a = observe(&phi, &[1.0, 1.0], &[0, 1], &noisy).unwrap();
        let b = observe(&phi, &[1.0, 1.0], &[0, 1], &noisy).unwrap();
        assert_eq!(a, b);
        assert!(observe(&phi, &[1.0], &[0], &quiet).is_err());
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn ls_estimate_examples() {
        let phi = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let est = ls_estimate(&phi, &[0, 1, 2], &[1.0, 1.0, 2.0]).unwrap();
        assert!((est.g_hat[0] - 1.0).abs() < 1e-14 && (est.g_hat[1] - 1.0).abs() < 1e-14);
        assert_eq!(est.f_hat, matvec(&phi, &est.g_hat).unwrap());

        let id = Matrix::identity(3);
        let est = ls_estimate(&id, &[0, 1, 2], &[4.0, -1.0, 0.5]).unwrap();
        assert_eq!(est.g_hat, [4.0, -1.0, 0.5]);

        let g = [0.3, -1.7];
        let y = observe(&worked(), &g, &[0, 2], &NoiseModel::new(0.0, 0).unwrap()).unwrap();
        let est = ls_estimate(&worked(), &[0, 2], &y).unwrap();
        assert!((est.g_hat[0] - g[0]).abs() < 1e-9 && (est.g_hat[1] - g[1]).abs() < 1e-9);
    }

    #[test]
    fn ls_estimate_rank_deficiency() {
        let phi = worked();
        assert!(matches!(
            ls_estimate(&phi, &[0], &[1.0]),
            Err(Error::Dimension(_))
        ));
        let phi = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            ls_estimate(&phi, &[0, 1], &[1.0, 2.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn expected_mse_examples() {
        assert_eq!(
            expected_mse(&Matrix::identity(2), &[0, 1], 1.0).unwrap(),
            2.0
        );
        assert_eq!(expected_mse(&worked(), &[0, 2], 0.0).unwrap(), 0.0);
        let v = expected_mse(&worked(), &[0, 1], 1.0).unwrap();
        assert!((v - 1.25).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_examples() {
        let phi = worked();
        let g = [0.4, -0.2];
        assert!(monte_carlo_mse(&phi, &[0, 1, 2], &g, 0.0, 100, 1).unwrap() < 1e-18);
        let v =
            monte_carlo_mse(&Matrix::identity(2), &[0, 1], &[1.0, 2.0], 1.0, 100_000, 3).unwrap();
        assert!((v - 2.0).abs() <= 0.1, "{v}");
        let a = monte_carlo_mse(&phi, &[0, 1, 2], &g, 1.0, 1000, 5).unwrap();
        let b = monte_carlo_mse(&phi, &[0, 1, 2], &g, 1.0, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_mse(&phi, &[0, 1, 2], &g, 1.0, 0, 5).is_err());
    }

    #[test]
    fn averaged_mse_examples() {
        let phi = worked();
        let s: &[usize] = &[0, 1];
        let single = expected_mse(&phi, s, 1.0).unwrap();
        assert_eq!(averaged_mse(&[(&phi, s)], 1.0).unwrap(), single);
        let v = averaged_mse(&[(&phi, s), (&phi, s), (&phi, s)], 1.0).unwrap();
        assert!((v - single).abs() < 1e-15);
        // Tr⁻¹ of I₁ is 1, of diag(0.5)… built as 1×1 matrices
        let one = Matrix::identity(1);
        let half = Matrix::from_rows(&[[0.5f64.sqrt()]]).unwrap();
        let v = averaged_mse(&[(&one, &[0][..]), (&half, &[0][..])], 1.0).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        assert!(averaged_mse(&[], 1.0).is_err());
    }
}

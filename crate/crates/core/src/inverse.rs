//! Difference reconstruction: argmin ½‖JΔσ − ΔV‖² + λ R(Δσ) with
//! R = ‖·‖² (Tikhonov) or R = ‖·‖₁ (ISTA).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, BandCholesky, DenseMatrix};
use crate::sensitivity::SensitivityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tikhonov,
    L1,
}

/// How `lambda` turns into the effective weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaScaling {
    /// λ_eff = λ
    Absolute,
    /// λ_eff = λ · max diag(JᵀJ); makes λ independent of mesh size and current.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionParams {
    pub method: Method,
    pub lambda: f64,
    pub iterations: usize,
    pub lambda_scaling: LambdaScaling,
}

impl ReconstructionParams {
    /// λ = 0.01, spectral scaling.
    pub fn tikhonov() -> Self {
        Self {
            method: Method::Tikhonov,
            lambda: 0.01,
            iterations: 1,
            lambda_scaling: LambdaScaling::Spectral,
        }
    }

    /// λ = 0.01, 200 iterations, spectral scaling.
    pub fn l1() -> Self {
        Self {
            method: Method::L1,
            lambda: 0.01,
            iterations: 200,
            lambda_scaling: LambdaScaling::Spectral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_lambda(&self, j: &DenseMatrix) -> f64 {
        match self.lambda_scaling {
            LambdaScaling::Absolute => self.lambda,
            LambdaScaling::Spectral => {
                self.lambda * j.column_norms_sq().into_iter().fold(0.0, f64::max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionImage {
    /// Per-element Δσ in S/m, or normalized to [0, 1] once postprocessed.
    pub values: Vec<f64>,
    pub mesh_id: u64,
    pub postprocessed: bool,
    /// Largest positive Δσ before normalization (0 when nothing is positive).
    pub peak: f64,
}

impl ReconstructionImage {
    pub fn raw(values: Vec<f64>, mesh_id: u64) -> Self {
        let peak = values.iter().copied().fold(0.0, f64::max);
        Self {
            values,
            mesh_id,
            postprocessed: false,
            peak,
        }
    }
}

/// Clamps negatives to zero, then divides by the maximum if it is positive.
/// Applying it to an already processed image changes nothing.
pub fn postprocess(image: &ReconstructionImage) -> ReconstructionImage {
    let mut values: Vec<f64> = image.values.iter().map(|v| v.max(0.0)).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter_mut().for_each(|v| *v /= max);
    }
    ReconstructionImage {
        values,
        mesh_id: image.mesh_id,
        postprocessed: true,
        peak: if image.postprocessed { image.peak } else { max },
    }
}

fn check_dims(j: &DenseMatrix, delta_v: &[f64]) -> Result<()> {
    if delta_v.len() != j.rows() {
        return Err(Error::DimensionMismatch {
            expected: j.rows(),
            actual: delta_v.len(),
        });
    }
    Ok(())
}

/// Factorized Tikhonov operator, reusable across frames.
///
/// With λ_eff > 0 and fewer rows than columns the solve goes through the
/// equivalent row-space form Δσ = Jᵀ(JJᵀ + λI)⁻¹ΔV; otherwise through the
/// normal equations (JᵀJ + λI)Δσ = JᵀΔV.
#[derive(Debug, Clone)]
pub struct TikhonovSolver {
    j: DenseMatrix,
    lambda_eff: f64,
    factor: BandCholesky,
    row_space: bool,
}

impl TikhonovSolver {
    pub fn new(j: &DenseMatrix, params: &ReconstructionParams) -> Result<Self> {
        params.validate()?;
        let lambda_eff = params.effective_lambda(j);
        let row_space = lambda_eff > 0.0 && j.rows() < j.cols();
        let mut system = if row_space {
            j.gram_rows()
        } else {
            j.gram_cols()
        };
        for i in 0..system.rows() {
            system[(i, i)] += lambda_eff;
        }
        let factor = BandCholesky::factor_dense(&system).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } if lambda_eff == 0.0 => Error::IllPosed,
            other => other,
        })?;
        Ok(Self {
            j: j.clone(),
            lambda_eff,
            factor,
            row_space,
        })
    }

    pub fn lambda_eff(&self) -> f64 {
        self.lambda_eff
    }

    pub fn solve(&self, delta_v: &[f64]) -> Result<Vec<f64>> {
        check_dims(&self.j, delta_v)?;
        if self.row_space {
            Ok(self.j.tr_mul_vec(&self.factor.solve(delta_v)))
        } else {
            Ok(self.factor.solve(&self.j.tr_mul_vec(delta_v)))
        }
    }
}

pub fn tikhonov_solve(
    j: &DenseMatrix,
    delta_v: &[f64],
    params: &ReconstructionParams,
) -> Result<Vec<f64>> {
    TikhonovSolver::new(j, params)?.solve(delta_v)
}

/// Largest eigenvalue of JᵀJ by power iteration.
pub fn lipschitz_constant(j: &DenseMatrix, max_iter: usize, tol: f64) -> f64 {
    let n = j.cols();
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / libm::sqrt(n as f64); n];
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = j.tr_mul_vec(&j.mul_vec(&v));
        let next = dot(&v, &w);
        let len = norm(&w);
        if len == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / len).collect();
        let converged = (next - estimate).abs() <= tol * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// ISTA for ½‖JΔσ − ΔV‖² + λ_eff‖Δσ‖₁, with step 1/L and L from
/// [`lipschitz_constant`] (50 iterations, tolerance 1e-6).
#[derive(Debug, Clone)]
pub struct IstaSolver {
    j: DenseMatrix,
    lambda_eff: f64,
    lipschitz: f64,
    iterations: usize,
}

impl IstaSolver {
    pub fn new(j: &DenseMatrix, params: &ReconstructionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            j: j.clone(),
            lambda_eff: params.effective_lambda(j),
            lipschitz: lipschitz_constant(j, 50, 1e-6),
            iterations: params.iterations,
        })
    }

    pub fn lambda_eff(&self) -> f64 {
        self.lambda_eff
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn objective(&self, delta_sigma: &[f64], delta_v: &[f64]) -> f64 {
        let r: Vec<f64> = self
            .j
            .mul_vec(delta_sigma)
            .iter()
            .zip(delta_v)
            .map(|(a, b)| a - b)
            .collect();
        0.5 * dot(&r, &r) + self.lambda_eff * delta_sigma.iter().map(|x| x.abs()).sum::<f64>()
    }

    pub fn solve(&self, delta_v: &[f64]) -> Result<Vec<f64>> {
        self.solve_observed(delta_v, |_, _| {})
    }

    /// Runs the iterations, handing every iterate to `observe` with its
    /// 1-based iteration number.
    pub fn solve_observed(
        &self,
        delta_v: &[f64],
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>> {
        check_dims(&self.j, delta_v)?;
        let mut x = vec![0.0; self.j.cols()];
        if self.lipschitz == 0.0 {
            return Ok(x);
        }
        let step = 1.0 / self.lipschitz;
        let threshold = self.lambda_eff * step;
        for it in 1..=self.iterations {
            let residual: Vec<f64> = self
                .j
                .mul_vec(&x)
                .iter()
                .zip(delta_v)
                .map(|(a, b)| a - b)
                .collect();
            let grad = self.j.tr_mul_vec(&residual);
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi = soft_threshold(*xi - step * gi, threshold);
            }
            observe(it, &x);
        }
        Ok(x)
    }
}

pub fn ista_solve(
    j: &DenseMatrix,
    delta_v: &[f64],
    params: &ReconstructionParams,
) -> Result<Vec<f64>> {
    IstaSolver::new(j, params)?.solve(delta_v)
}

fn check_method(params: &ReconstructionParams, want: Method) -> Result<()> {
    if params.method != want {
        return Err(Error::InvalidParameter(format!(
            "expected {want:?} parameters, got {:?}",
            params.method
        )));
    }
    Ok(())
}

pub fn tikhonov_reconstruct(
    jacobian: &SensitivityMatrix,
    delta_v: &[f64],
    params: &ReconstructionParams,
) -> Result<ReconstructionImage> {
    check_method(params, Method::Tikhonov)?;
    let x = tikhonov_solve(&jacobian.entries, delta_v, params)?;
    Ok(ReconstructionImage::raw(x, jacobian.mesh_id))
}

pub fn l1_reconstruct(
    jacobian: &SensitivityMatrix,
    delta_v: &[f64],
    params: &ReconstructionParams,
) -> Result<ReconstructionImage> {
    check_method(params, Method::L1)?;
    let x = ista_solve(&jacobian.entries, delta_v, params)?;
    Ok(ReconstructionImage::raw(x, jacobian.mesh_id))
}

/// Either solver, prepared once for a fixed J.
#[derive(Debug, Clone)]
pub enum Reconstructor {
    Tikhonov(TikhonovSolver),
    L1(IstaSolver),
}

impl Reconstructor {
    pub fn new(jacobian: &SensitivityMatrix, params: &ReconstructionParams) -> Result<Self> {
        Ok(match params.method {
            Method::Tikhonov => Self::Tikhonov(TikhonovSolver::new(&jacobian.entries, params)?),
            Method::L1 => Self::L1(IstaSolver::new(&jacobian.entries, params)?),
        })
    }

    pub fn reconstruct(&self, delta_v: &[f64], mesh_id: u64) -> Result<ReconstructionImage> {
        let x = match self {
            Self::Tikhonov(s) => s.solve(delta_v)?,
            Self::L1(s) => s.solve(delta_v)?,
        };
        Ok(ReconstructionImage::raw(x, mesh_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn abs_params(method: Method, lambda: f64, iterations: usize) -> ReconstructionParams {
        ReconstructionParams {
            method,
            lambda,
            iterations,
            lambda_scaling: LambdaScaling::Absolute,
        }
    }

    fn random_problem(seed: u64, m: usize, n: usize) -> (DenseMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let j = DenseMatrix::from_row_major(m, n, (0..m * n).map(|_| draw()).collect()).unwrap();
        let b = (0..m).map(|_| draw()).collect();
        (j, b)
    }

    #[test]
    fn tikhonov_identity_closed_forms() {
        let j = DenseMatrix::identity(2);
        let x = tikhonov_solve(&j, &[1.0, 0.0], &abs_params(Method::Tikhonov, 0.0, 1)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && x[1].abs() < 1e-10);
        let x = tikhonov_solve(&j, &[1.0, 0.0], &abs_params(Method::Tikhonov, 1.0, 1)).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10 && x[1].abs() < 1e-10);
    }

    #[test]
    fn unregularized_rank_deficient_is_ill_posed() {
        let j = DenseMatrix::from_row_major(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(
            tikhonov_solve(&j, &[1.0], &abs_params(Method::Tikhonov, 0.0, 1)).unwrap_err(),
            Error::IllPosed
        );
    }

    #[test]
    fn tikhonov_satisfies_normal_equations() {
        for (m, n) in [(20, 50), (50, 20)] {
            let (j, b) = random_problem(11, m, n);
            let params = ReconstructionParams::tikhonov();
            let solver = TikhonovSolver::new(&j, &params).unwrap();
            let x = solver.solve(&b).unwrap();
            let mut lhs = j.tr_mul_vec(&j.mul_vec(&x));
            for (l, xi) in lhs.iter_mut().zip(&x) {
                *l += solver.lambda_eff() * xi;
            }
            let rhs = j.tr_mul_vec(&b);
            let res: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(norm(&res) <= 1e-8 * norm(&rhs));
        }
    }

    #[test]
    fn tikhonov_norm_shrinks_with_lambda() {
        let (j, b) = random_problem(4, 15, 30);
        let mut last = f64::INFINITY;
        for e in -3..=3 {
            let lambda = libm::pow(10.0, e as f64);
            let x = tikhonov_solve(&j, &b, &abs_params(Method::Tikhonov, lambda, 1)).unwrap();
            let n = norm(&x);
            assert!(n < last);
            last = n;
        }
    }

    #[test]
    fn ista_soft_threshold_closed_form() {
        let j = DenseMatrix::identity(2);
        let x = ista_solve(&j, &[1.0, 0.005], &abs_params(Method::L1, 0.01, 200)).unwrap();
        assert!((x[0] - 0.99).abs() < 1e-10);
        assert!(x[1].abs() < 1e-10);
        let zero = ista_solve(&j, &[0.0, 0.0], &abs_params(Method::L1, 0.01, 7)).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn ista_objective_never_increases() {
        for seed in 0..3 {
            let (j, b) = random_problem(100 + seed, 30, 80);
            let solver = IstaSolver::new(&j, &ReconstructionParams::l1()).unwrap();
            let mut last = solver.objective(&vec![0.0; 80], &b);
            solver
                .solve_observed(&b, |_, x| {
                    let f = solver.objective(x, &b);
                    assert!(f <= last * (1.0 + 1e-12), "{f} > {last}");
                    last = f;
                })
                .unwrap();
        }
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let j = DenseMatrix::from_row_major(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((lipschitz_constant(&j, 50, 1e-6) - 9.0).abs() < 1e-4);
    }

    #[test]
    fn params_validation() {
        let j = DenseMatrix::identity(2);
        assert!(tikhonov_solve(&j, &[1.0, 0.0], &abs_params(Method::Tikhonov, -1.0, 1)).is_err());
        assert!(ista_solve(&j, &[1.0, 0.0], &abs_params(Method::L1, 0.1, 0)).is_err());
        assert!(tikhonov_solve(&j, &[1.0], &abs_params(Method::Tikhonov, 0.1, 1)).is_err());
    }

    #[test]
    fn postprocess_cases() {
        let p = postprocess(&ReconstructionImage::raw(vec![-0.5, 1.0, 2.0], 0));
        assert_eq!(p.values, vec![0.0, 0.5, 1.0]);
        assert_eq!(p.peak, 2.0);
        assert!(p.postprocessed);
        assert_eq!(
            postprocess(&ReconstructionImage::raw(vec![-1.0, -2.0], 0)).values,
            vec![0.0, 0.0]
        );
        assert_eq!(
            postprocess(&ReconstructionImage::raw(vec![0.3], 0)).values,
            vec![1.0]
        );
    }

    proptest::proptest! {
        #[test]
        fn postprocess_is_idempotent(v in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let once = postprocess(&ReconstructionImage::raw(v, 3));
            let twice = postprocess(&once);
            proptest::prop_assert_eq!(&once, &twice);
            proptest::prop_assert!(once.values.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn tikhonov_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (j, d1) = random_problem(8, 10, 25);
            let (_, d2) = random_problem(9, 10, 25);
            let s = TikhonovSolver::new(&j, &ReconstructionParams::tikhonov()).unwrap();
            let mix: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + b * y).collect();
            let lhs = s.solve(&mix).unwrap();
            let (x1, x2) = (s.solve(&d1).unwrap(), s.solve(&d2).unwrap());
            for i in 0..25 {
                let rhs = a * x1[i] + b * x2[i];
                proptest::prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }
}

//! Generic least-squares and derivative-free minimization helpers.
//!
//! Nonlinear least squares is delegated to the `levenberg-marquardt` crate with
//! a finite-difference Jacobian; simplex search is delegated to `argmin`.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};

/// Result of a nonlinear least-squares fit.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub params: DVector<f64>,
    /// `s² (JᵀJ)⁻¹` at the optimum, with `s²` the reduced residual variance.
    /// `None` when the normal matrix is singular or there are no spare degrees
    /// of freedom.
    pub covariance: Option<DMatrix<f64>>,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub termination: String,
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub tol: f64,
    /// Evaluation budget in units of `(n_params + 1)`.
    pub patience: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            patience: 200,
        }
    }
}

struct Problem<'a, F> {
    residual_fn: &'a F,
    x: DVector<f64>,
}

impl<F> Problem<'_, F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn jacobian_at(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        numeric_jacobian(self.residual_fn, x)
    }
}

/// Central-difference Jacobian of a residual function.
pub fn numeric_jacobian<F>(f: &F, x: &DVector<f64>) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let r0 = f(x);
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-3);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let rp = f(&xp);
        let rm = f(&xm);
        for i in 0..r0.len() {
            let d = (rp[i] - rm[i]) / (2.0 * h);
            if !d.is_finite() {
                return None;
            }
            jac[(i, j)] = d;
        }
    }
    Some(jac)
}

impl<F> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = (self.residual_fn)(&self.x);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        self.jacobian_at(&self.x)
    }
}

/// Minimizes `‖r(x)‖²` starting from `x0`.
pub fn least_squares<F>(residuals: F, x0: DVector<f64>, opts: LmOptions) -> LeastSquaresFit
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let problem = Problem {
        residual_fn: &residuals,
        x: x0,
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_tol(opts.tol)
        .with_patience(opts.patience)
        .minimize(problem);
    let params = problem.x.clone();
    let r = residuals(&params);
    let residual_norm = r.norm();
    let covariance = covariance_from_jacobian(&residuals, &params, residual_norm);
    LeastSquaresFit {
        params,
        covariance,
        residual_norm,
        converged: report.termination.was_successful(),
        evaluations: report.number_of_evaluations,
        termination: format!("{:?}", report.termination),
    }
}

fn covariance_from_jacobian<F>(f: &F, x: &DVector<f64>, residual_norm: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let jac = numeric_jacobian(f, x)?;
    let (m, n) = jac.shape();
    if m <= n {
        return None;
    }
    let s2 = residual_norm * residual_norm / (m - n) as f64;
    let normal = jac.transpose() * &jac;
    normal.try_inverse().map(|inv| inv * s2)
}

struct ScalarCost<'a, F> {
    f: &'a F,
}

impl<F> CostFunction for ScalarCost<'_, F>
where
    F: Fn(&[f64]) -> f64,
{
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok((self.f)(p))
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
}

/// Nelder-Mead minimization of `f` from `x0`, with an initial simplex of
/// axis-aligned steps of size `step`.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, max_iters: u64, sd_tol: f64) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut vertices = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        vertices.push(v);
    }
    let fallback = SimplexResult {
        x: x0.to_vec(),
        value: f(x0),
        iterations: 0,
    };
    let solver = match NelderMead::new(vertices).with_sd_tolerance(sd_tol) {
        Ok(s) => s,
        Err(_) => return fallback,
    };
    let cost = ScalarCost { f: &f };
    let result = Executor::new(cost, solver)
        .configure(|state| state.max_iters(max_iters))
        .run();
    match result {
        Ok(res) => {
            let state = res.state();
            match state.get_best_param() {
                Some(x) => SimplexResult {
                    x: x.clone(),
                    value: state.get_best_cost(),
                    iterations: state.get_iter(),
                },
                None => fallback,
            }
        }
        Err(_) => fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| 2.0 * (-t / 1.5).exp() + 0.3).collect();
        let res = |p: &DVector<f64>| {
            DVector::from_iterator(
                t.len(),
                t.iter()
                    .zip(&y)
                    .map(|(&t, &y)| p[0] * (-t / p[1]).exp() + p[2] - y),
            )
        };
        let fit = least_squares(
            res,
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            LmOptions::default(),
        );
        assert!(fit.converged, "{}", fit.termination);
        assert!((fit.params[0] - 2.0).abs() < 1e-8);
        assert!((fit.params[1] - 1.5).abs() < 1e-8);
        assert!((fit.params[2] - 0.3).abs() < 1e-8);
    }

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], 0.5, 5000, 1e-14);
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r);
        assert!((r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }
}

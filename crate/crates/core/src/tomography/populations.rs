use super::{Result, TomographyError};
use crate::fit::nelder_mead;
use crate::lindblad::{DensityMatrix, EvolveOptions, Propagator, Schedule, SystemParams};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fitted phonon-number distribution of a displaced state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationFit {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub p_n: Vec<f64>,
    pub sigma_n: Vec<f64>,
    /// Summed squared error at the optimum.
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PopulationFit {
    pub fn alpha(&self) -> C64 {
        C64::new(self.alpha_re, self.alpha_im)
    }
}

/// Unscaled qubit responses `P_e(t)` for each resonator Fock state, starting
/// from qubit ground and excited. The interaction is resonant and the
/// dynamics are phase covariant, so these span the model for any diagonal
/// initial qubit state.
#[derive(Debug, Clone)]
pub struct ResponseBasis {
    pub t: Vec<f64>,
    ground: Vec<Vec<f64>>,
    excited: Vec<Vec<f64>>,
    visibility: f64,
}

impl ResponseBasis {
    pub fn new(t_grid: &[f64], params: &SystemParams) -> Result<Self> {
        let dim = params.dim;
        let t_end = t_grid.last().copied().unwrap_or(0.0);
        let raw = SystemParams {
            visibility: 1.0,
            ..*params
        };
        let prop_raw = Propagator::new(&raw)?;
        let sched = Schedule::constant(t_end, 0.0, params.g);
        let traces: Vec<Vec<f64>> = (0..2 * dim)
            .into_par_iter()
            .map(|k| {
                let rho = DensityMatrix::fock(k / dim, k % dim, dim)?;
                Ok(prop_raw
                    .evolve(&rho, &sched, t_grid, &EvolveOptions::default())?
                    .p_e)
            })
            .collect::<Result<_>>()?;
        let (ground, excited) = traces.split_at(dim);
        Ok(Self {
            t: t_grid.to_vec(),
            ground: ground.to_vec(),
            excited: excited.to_vec(),
            visibility: params.visibility,
        })
    }

    pub fn dim(&self) -> usize {
        self.ground.len()
    }

    /// Design matrix `A[t, n]` so that the model trace is `A·P`.
    pub fn design(&self, pe0: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.t.len(), self.dim(), |i, n| {
            self.visibility * ((1.0 - pe0) * self.ground[n][i] + pe0 * self.excited[n][i])
        })
    }

    /// Predicted measured trace for populations `p_n`.
    pub fn model(&self, p_n: &[f64], pe0: f64) -> Vec<f64> {
        let p = DVector::from_column_slice(p_n);
        (self.design(pe0) * p).iter().cloned().collect()
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    // First logit fixed at zero.
    let m = z.iter().cloned().fold(0.0, f64::max);
    let mut p: Vec<f64> = std::iter::once(0.0)
        .chain(z.iter().cloned())
        .map(|v| (v - m).exp())
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Fits the phonon-number distribution of one displaced-state trace.
/// `p_e0` is the measured pre-interaction excited population (visibility
/// included).
pub fn fit_populations(
    t: &[f64],
    p_e: &[f64],
    alpha: C64,
    params: &SystemParams,
    p_e0: f64,
) -> Result<PopulationFit> {
    check_trace(t, p_e, params)?;
    let basis = ResponseBasis::new(t, params)?;
    fit_with_basis(
        &basis,
        p_e,
        alpha,
        (p_e0 / params.visibility).clamp(0.0, 1.0),
    )
}

fn check_trace(t: &[f64], p_e: &[f64], params: &SystemParams) -> Result<()> {
    if t.len() != p_e.len() {
        return Err(TomographyError::Argument(
            "time and P_e lengths differ".into(),
        ));
    }
    if t.len() < 30 {
        return Err(TomographyError::Argument(format!(
            "need at least 30 points, got {}",
            t.len()
        )));
    }
    let span = t.last().unwrap() - t[0];
    let period = std::f64::consts::PI / params.g.abs();
    if !(span >= period) {
        return Err(TomographyError::Argument(format!(
            "trace spans {span:e} s, shorter than one vacuum-Rabi period ({period:e} s)"
        )));
    }
    Ok(())
}

pub(crate) fn fit_with_basis(
    basis: &ResponseBasis,
    y: &[f64],
    alpha: C64,
    pe0: f64,
) -> Result<PopulationFit> {
    if y.len() != basis.t.len() {
        return Err(TomographyError::Argument(
            "trace does not match the response grid".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TomographyError::Argument("non-finite P_e".into()));
    }
    let dim = basis.dim();
    let a = basis.design(pe0);
    let yv = DVector::from_column_slice(y);
    let cost = |p: &[f64]| (&a * DVector::from_column_slice(p) - &yv).norm_squared();

    let mut warnings = Vec::new();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    if spread < 1e-6 {
        warnings.push("trace is flat; populations are poorly constrained".to_string());
    }

    // Simplex search over softmax logits from the projected unconstrained
    // solution, then projected-gradient refinement of the quadratic cost.
    let ls = a
        .clone()
        .svd(true, true)
        .solve(&yv, 1e-10)
        .map(|v| project_simplex(v.as_slice()))
        .unwrap_or_else(|_| vec![1.0 / dim as f64; dim]);
    let z0: Vec<f64> = (1..dim)
        .map(|n| (ls[n].max(1e-6) / ls[0].max(1e-6)).ln())
        .collect();
    let nm = nelder_mead(|z| cost(&softmax(z)), &z0, 0.5, 200 * dim as u64, 1e-14);
    let start = softmax(&nm.x);

    let ata = a.transpose() * &a;
    let aty = a.transpose() * &yv;
    let lip = 2.0 * ata.symmetric_eigenvalues().max().max(1e-300);
    let mut x = DVector::from_vec(start.clone());
    let mut z = x.clone();
    let mut tk = 1.0f64;
    for _ in 0..50_000 {
        let grad = (&ata * &z - &aty) * 2.0;
        let next = DVector::from_vec(project_simplex((&z - grad / lip).as_slice()));
        let step = (&next - &x).amax();
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        z = &next + (&next - &x) * ((tk - 1.0) / tn);
        x = next;
        tk = tn;
        if step < 1e-13 {
            break;
        }
    }
    // Fixed-point residual of the projected-gradient map.
    let grad = (&ata * &x - &aty) * 2.0;
    let fixed = DVector::from_vec(project_simplex((&x - grad / lip).as_slice()));
    let converged = (&fixed - &x).amax() < 1e-9;
    let mut p_n: Vec<f64> = x.iter().cloned().collect();
    if cost(&start) < cost(&p_n) {
        p_n = start;
    }
    let residual = cost(&p_n);

    let dof = (y.len() as f64 - (dim as f64 - 1.0)).max(1.0);
    let s2 = residual / dof;
    let h = 1e-3;
    let sigma_n = (0..dim)
        .map(|n| {
            let mut up = p_n.clone();
            let mut dn = p_n.clone();
            up[n] += h;
            dn[n] -= h;
            let hnn = (cost(&up) - 2.0 * residual + cost(&dn)) / (h * h);
            if hnn > 0.0 {
                (2.0 * s2 / hnn).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let fit = PopulationFit {
        alpha_re: alpha.re,
        alpha_im: alpha.im,
        p_n,
        sigma_n,
        residual,
        warnings,
    };
    if !converged {
        return Err(TomographyError::Convergence {
            reason: "projected-gradient refinement hit its iteration limit".into(),
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

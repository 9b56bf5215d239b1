use super::{PopulationFit, Result, TomographyError};
use crate::lindblad::displacement_operator;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The `d² − 1` generalized Gell-Mann matrices: symmetric, antisymmetric,
/// then diagonal. Each satisfies `Tr(ΛᵢΛⱼ) = 2δᵢⱼ`.
pub fn gell_mann(d: usize) -> Vec<DMatrix<C64>> {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut m = DMatrix::zeros(d, d);
            m[(j, k)] = one;
            m[(k, j)] = one;
            out.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = DMatrix::zeros(d, d);
            m[(j, k)] = -i;
            m[(k, j)] = i;
            out.push(m);
        }
    }
    for l in 1..d {
        let s = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = C64::new(s, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) * s, 0.0);
        out.push(m);
    }
    out
}

/// `I/d + Σ cᵢΛᵢ`.
fn assemble(c: &[f64], basis: &[DMatrix<C64>], d: usize) -> DMatrix<C64> {
    let mut rho = DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
    for (ci, b) in c.iter().zip(basis) {
        rho += b * C64::new(*ci, 0.0);
    }
    rho
}

/// Clips negative eigenvalues, renormalizes and returns the truncated mass.
fn make_physical(rho: &DMatrix<C64>) -> (DMatrix<C64>, f64, f64) {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let lost: f64 = eig
        .eigenvalues
        .iter()
        .filter(|v| **v < 0.0)
        .map(|v| -v)
        .sum();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let scale = if total > 0.0 { 1.0 / total } else { 0.0 };
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        clipped.len(),
        clipped.iter().map(|v| C64::new(v * scale, 0.0)),
    ));
    let v = &eig.eigenvectors;
    (v * diag * v.adjoint(), min, lost)
}

fn embed(small: &DMatrix<C64>, n: usize) -> DMatrix<C64> {
    let mut big = DMatrix::zeros(n, n);
    big.view_mut((0, 0), small.shape()).copy_from(small);
    big
}

/// Resonator state from a Gell-Mann least-squares fit to displaced
/// populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedState {
    pub dim_fit: usize,
    /// Physical (clipped, renormalized) state embedded in the population
    /// space.
    pub rho: DMatrix<C64>,
    /// Raw fitted `dim_fit × dim_fit` matrix.
    pub rho_raw: DMatrix<C64>,
    pub parameters: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub parameter_sigma: Vec<f64>,
    /// Standard deviations of `Re ρ` and `Im ρ` elements of the raw fit.
    pub element_sigma_re: DMatrix<f64>,
    pub element_sigma_im: DMatrix<f64>,
    pub min_eigenvalue_raw: f64,
    pub truncated_mass: f64,
    pub residual_norm: f64,
    pub warnings: Vec<String>,
}

impl ReconstructedState {
    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Physical state for an arbitrary parameter vector.
    pub fn state_for(&self, c: &[f64]) -> DMatrix<C64> {
        let basis = gell_mann(self.dim_fit);
        embed(
            &make_physical(&assemble(c, &basis, self.dim_fit)).0,
            self.dim(),
        )
    }
}

/// Fits `ρ = I/d + Σ cᵢΛᵢ` (with `d = dim_fit`) to the populations of the
/// state displaced by each `−α`. Negative eigenvalues are clipped and the
/// result renormalized afterwards.
pub fn reconstruct_density_matrix(
    fits: &[PopulationFit],
    dim_fit: usize,
) -> Result<ReconstructedState> {
    let k = dim_fit * dim_fit - 1;
    let n = fits
        .first()
        .map(|f| f.p_n.len())
        .ok_or_else(|| TomographyError::Identifiability("no population fits".into()))?;
    if dim_fit < 2 || dim_fit > n {
        return Err(TomographyError::Argument(format!(
            "cannot fit {dim_fit} levels in {n}"
        )));
    }
    if fits.iter().any(|f| f.p_n.len() != n) {
        return Err(TomographyError::Argument(
            "population vectors differ in length".into(),
        ));
    }
    let mut distinct: Vec<C64> = Vec::new();
    for f in fits {
        if !distinct.iter().any(|a| (a - f.alpha()).norm() < 1e-9) {
            distinct.push(f.alpha());
        }
    }
    if distinct.len() < k {
        return Err(TomographyError::Identifiability(format!(
            "{} distinct displacements, need at least {k}",
            distinct.len()
        )));
    }
    let basis = gell_mann(dim_fit);
    let rows = fits.len() * n;
    let mut a = DMatrix::zeros(rows, k);
    let mut b = DVector::zeros(rows);
    for (r, f) in fits.iter().enumerate() {
        let d = displacement_operator(-f.alpha(), n)?;
        let u = d.columns(0, dim_fit).into_owned();
        for m in 0..n {
            let row = r * n + m;
            let um = u.row(m);
            let base: f64 = um.iter().map(|v| v.norm_sqr()).sum::<f64>() / dim_fit as f64;
            b[row] = f.p_n[m] - base;
            for (i, g) in basis.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..dim_fit {
                    for l in 0..dim_fit {
                        if g[(j, l)] != C64::new(0.0, 0.0) {
                            acc += um[j] * g[(j, l)] * um[l].conj();
                        }
                    }
                }
                a[(row, i)] = acc.re;
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let mut warnings = Vec::new();
    if !(smin > 1e-10 * smax) {
        warnings.push(format!(
            "design matrix is ill-conditioned (singular values {smin:e}..{smax:e}); using the pseudo-inverse"
        ));
    }
    let c = svd
        .solve(&b, 1e-10 * smax)
        .map_err(|e| TomographyError::Fit(e.to_string()))?;
    let resid = &a * &c - &b;
    let dof = (rows as f64 - k as f64).max(1.0);
    let s2 = resid.norm_squared() / dof;
    let ata = a.transpose() * &a;
    let inv = ata
        .clone()
        .pseudo_inverse(1e-12 * ata.amax())
        .map_err(|e| TomographyError::Fit(e.to_string()))?;
    let covariance = inv * s2;

    let params: Vec<f64> = c.iter().cloned().collect();
    let rho_raw = assemble(&params, &basis, dim_fit);
    let (phys, min_eig, lost) = make_physical(&rho_raw);

    let mut sig_re = DMatrix::zeros(dim_fit, dim_fit);
    let mut sig_im = DMatrix::zeros(dim_fit, dim_fit);
    for j in 0..dim_fit {
        for l in 0..dim_fit {
            let gr = DVector::from_iterator(k, basis.iter().map(|g| g[(j, l)].re));
            let gi = DVector::from_iterator(k, basis.iter().map(|g| g[(j, l)].im));
            sig_re[(j, l)] = (gr.transpose() * &covariance * &gr)[(0, 0)].max(0.0).sqrt();
            sig_im[(j, l)] = (gi.transpose() * &covariance * &gi)[(0, 0)].max(0.0).sqrt();
        }
    }
    Ok(ReconstructedState {
        dim_fit,
        rho: embed(&phys, n),
        rho_raw,
        parameter_sigma: (0..k).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect(),
        parameters: params,
        covariance,
        element_sigma_re: sig_re,
        element_sigma_im: sig_im,
        min_eigenvalue_raw: min_eig,
        truncated_mass: lost,
        residual_norm: resid.norm(),
        warnings,
    })
}

/// `e^{−iφ a†a} ρ e^{iφ a†a}`.
pub fn rotate_frame(rho: &DMatrix<C64>, phi: f64) -> DMatrix<C64> {
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |j, k| {
        rho[(j, k)] * C64::from_polar(1.0, -phi * (j as f64 - k as f64))
    })
}

/// `√⟨ψ|ρ|ψ⟩`; `ψ` is normalized and zero-padded to the size of `ρ`.
pub fn fidelity(rho: &DMatrix<C64>, psi: &DVector<C64>) -> Result<f64> {
    let n = rho.nrows();
    if psi.len() > n {
        return Err(TomographyError::Argument(format!(
            "target has {} levels, state {n}",
            psi.len()
        )));
    }
    let norm = psi.norm();
    if !(norm > 0.0) {
        return Err(TomographyError::Argument(
            "target state has zero norm".into(),
        ));
    }
    let mut v = DVector::zeros(n);
    v.rows_mut(0, psi.len())
        .copy_from(&(psi / C64::new(norm, 0.0)));
    let overlap = (v.adjoint() * rho * &v)[(0, 0)].re;
    Ok(overlap.clamp(0.0, 1.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Fidelity of the reconstructed state (after a frame rotation `phi`) with a
/// Monte-Carlo uncertainty from the parameter covariance. Sample `i` draws
/// from stream `i` of the seeded generator.
pub fn fidelity_monte_carlo(
    state: &ReconstructedState,
    psi: &DVector<C64>,
    phi: f64,
    samples: usize,
    seed: u64,
) -> Result<FidelityEstimate> {
    let value = fidelity(&rotate_frame(&state.rho, phi), psi)?;
    let cov = &state.covariance;
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(TomographyError::Propagation(
            "covariance has non-finite entries".into(),
        ));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let low = eig.eigenvalues.min();
    if low < -1e-9 * top.max(f64::MIN_POSITIVE) {
        return Err(TomographyError::Propagation(format!(
            "covariance is not PSD (eigenvalue {low:e})"
        )));
    }
    if samples < 2 {
        return Ok(FidelityEstimate {
            value,
            sigma: 0.0,
            samples,
            seed,
        });
    }
    let root =
        &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let k = state.parameters.len();
    let center = DVector::from_column_slice(&state.parameters);
    let draws: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let z = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng)));
            let c = &center + &root * z;
            let rho = rotate_frame(&state.state_for(c.as_slice()), phi);
            fidelity(&rho, psi)
        })
        .collect::<Result<_>>()?;
    let mean = draws.iter().sum::<f64>() / samples as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok(FidelityEstimate {
        value,
        sigma: var.sqrt(),
        samples,
        seed,
    })
}

/// JSON-friendly reconstruction summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub label: String,
    pub dim_fit: usize,
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
    pub parameters: Vec<f64>,
    pub parameter_sigma: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub element_sigma_re: Vec<Vec<f64>>,
    pub element_sigma_im: Vec<Vec<f64>>,
    pub min_eigenvalue_raw: f64,
    pub truncated_mass: f64,
    pub frame_phase: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityEstimate>,
    pub warnings: Vec<String>,
}

fn rows<T: Copy>(m: &DMatrix<T>, f: impl Fn(T) -> f64) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| f(m[(i, j)])).collect())
        .collect()
}

impl ReconstructionReport {
    /// Summary of the `dim_fit` block after the frame rotation `phi`.
    pub fn new(
        label: &str,
        state: &ReconstructedState,
        phi: f64,
        target: Option<String>,
        fidelity: Option<FidelityEstimate>,
    ) -> Self {
        let d = state.dim_fit;
        let rho = rotate_frame(&state.rho, phi)
            .view((0, 0), (d, d))
            .into_owned();
        Self {
            label: label.to_string(),
            dim_fit: d,
            rho_re: rows(&rho, |v| v.re),
            rho_im: rows(&rho, |v| v.im),
            parameters: state.parameters.clone(),
            parameter_sigma: state.parameter_sigma.clone(),
            covariance: rows(&state.covariance, |v| v),
            element_sigma_re: rows(&state.element_sigma_re, |v| v),
            element_sigma_im: rows(&state.element_sigma_im, |v| v),
            min_eigenvalue_raw: state.min_eigenvalue_raw,
            truncated_mass: state.truncated_mass,
            frame_phase: phi,
            target,
            fidelity,
            warnings: state.warnings.clone(),
        }
    }
}

use super::operators::displacement_operator;
use super::{LindbladError, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Density matrix on a `dim_q × dim_r` space, qubit-major. `dim_q` is 2 for
/// the coupled system and 1 for a bare resonator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub dim_q: usize,
    pub dim_r: usize,
    pub data: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(dim_q: usize, dim_r: usize, data: DMatrix<C64>) -> Result<Self> {
        let n = dim_q * dim_r;
        if !(dim_q == 1 || dim_q == 2) || dim_r < 2 {
            return Err(LindbladError::Argument(format!(
                "unsupported dimensions {dim_q} × {dim_r}"
            )));
        }
        if data.nrows() != n || data.ncols() != n {
            return Err(LindbladError::Argument(format!(
                "matrix is {}×{}, expected {n}×{n}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { dim_q, dim_r, data })
    }

    /// `diag(1 − p_e, p_e) ⊗ diag(1 − p_1, p_1, 0, …)`.
    pub fn thermal(p_e: f64, p_1: f64, dim_r: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_e) || !(0.0..=1.0).contains(&p_1) {
            return Err(LindbladError::Argument(format!(
                "thermal populations out of range: {p_e}, {p_1}"
            )));
        }
        let mut data = DMatrix::zeros(2 * dim_r, 2 * dim_r);
        for (q, pq) in [(0, 1.0 - p_e), (1, p_e)] {
            for (n, pn) in [(0, 1.0 - p_1), (1, p_1)] {
                data[(q * dim_r + n, q * dim_r + n)] = C64::new(pq * pn, 0.0);
            }
        }
        Self::new(2, dim_r, data)
    }

    /// Projector onto a normalized copy of `psi`.
    pub fn pure(psi: &DVector<C64>, dim_q: usize, dim_r: usize) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(LindbladError::Argument(
                "state vector has zero or non-finite norm".into(),
            ));
        }
        let v = psi / C64::new(norm, 0.0);
        Self::new(dim_q, dim_r, &v * v.adjoint())
    }

    /// `|q, n⟩⟨q, n|` with `q = 0` for ground.
    pub fn fock(q: usize, n: usize, dim_r: usize) -> Result<Self> {
        if q > 1 || n >= dim_r {
            return Err(LindbladError::Argument(format!(
                "|{q},{n}⟩ outside {dim_r} levels"
            )));
        }
        let mut data = DMatrix::zeros(2 * dim_r, 2 * dim_r);
        data[(q * dim_r + n, q * dim_r + n)] = C64::new(1.0, 0.0);
        Self::new(2, dim_r, data)
    }

    pub fn size(&self) -> usize {
        self.dim_q * self.dim_r
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Largest entry of `ρ − ρ†`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerances.
    pub fn check(&self, herm_tol: f64, trace_tol: f64, eig_tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if !(h <= herm_tol) {
            return Err(LindbladError::Argument(format!(
                "not Hermitian (error {h:e})"
            )));
        }
        let t = self.trace();
        if !((t.re - 1.0).abs() <= trace_tol && t.im.abs() <= trace_tol) {
            return Err(LindbladError::Argument(format!("trace {t} differs from 1")));
        }
        let e = self.min_eigenvalue();
        if !(e >= -eig_tol) {
            return Err(LindbladError::Argument(format!(
                "negative eigenvalue {e:e}"
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check(1e-10, 1e-9, 1e-8)
    }

    /// Unscaled qubit excited-state population.
    pub fn excited_population(&self) -> f64 {
        if self.dim_q < 2 {
            return 0.0;
        }
        let d = self.dim_r;
        (0..d).map(|n| self.data[(d + n, d + n)].re).sum()
    }

    /// Resonator number distribution.
    pub fn resonator_populations(&self) -> Vec<f64> {
        let d = self.dim_r;
        (0..d)
            .map(|n| {
                (0..self.dim_q)
                    .map(|q| self.data[(q * d + n, q * d + n)].re)
                    .sum()
            })
            .collect()
    }

    /// Reduced resonator state.
    pub fn resonator_state(&self) -> DMatrix<C64> {
        let d = self.dim_r;
        DMatrix::from_fn(d, d, |i, j| {
            (0..self.dim_q)
                .map(|q| self.data[(q * d + i, q * d + j)])
                .sum()
        })
    }

    /// Reduced qubit state in the `(g, e)` basis.
    pub fn qubit_state(&self) -> nalgebra::Matrix2<C64> {
        let d = self.dim_r;
        let mut m = nalgebra::Matrix2::zeros();
        if self.dim_q < 2 {
            m[(0, 0)] = self.trace();
            return m;
        }
        for a in 0..2 {
            for b in 0..2 {
                m[(a, b)] = (0..d).map(|n| self.data[(a * d + n, b * d + n)]).sum();
            }
        }
        m
    }

    /// `(⟨σx⟩, ⟨σy⟩, P_e − P_g)` of the reduced qubit, unscaled.
    pub fn bloch(&self) -> [f64; 3] {
        let q = self.qubit_state();
        let ge = q[(0, 1)];
        [2.0 * ge.re, -2.0 * ge.im, (q[(1, 1)] - q[(0, 0)]).re]
    }

    /// Applies `U` to the qubit factor.
    pub fn apply_qubit_unitary(&self, u: &nalgebra::Matrix2<C64>) -> Result<Self> {
        if self.dim_q != 2 {
            return Err(LindbladError::Argument("state has no qubit factor".into()));
        }
        let d = self.dim_r;
        let full = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
            if i % d == j % d {
                u[(i / d, j / d)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Self {
            data: &full * &self.data * full.adjoint(),
            ..self.clone()
        })
    }

    /// Applies `I_q ⊗ U` for a resonator operator `U`.
    pub fn apply_resonator_unitary(&self, u: &DMatrix<C64>) -> Result<Self> {
        let d = self.dim_r;
        if u.nrows() != d || u.ncols() != d {
            return Err(LindbladError::Argument(format!("operator must be {d}×{d}")));
        }
        let mut full = DMatrix::zeros(self.size(), self.size());
        for q in 0..self.dim_q {
            full.view_mut((q * d, q * d), (d, d)).copy_from(u);
        }
        Ok(Self {
            data: &full * &self.data * full.adjoint(),
            ..self.clone()
        })
    }

    /// Resonator displacement `D(α)`; the qubit is untouched.
    pub fn displaced(&self, alpha: C64) -> Result<Self> {
        displacement(self, alpha)
    }
}

/// `(I ⊗ D(α)) ρ (I ⊗ D(α))†`.
pub fn displacement(rho: &DensityMatrix, alpha: C64) -> Result<DensityMatrix> {
    let d = displacement_operator(alpha, rho.dim_r)?;
    rho.apply_resonator_unitary(&d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_state_is_valid() {
        let r = DensityMatrix::thermal(0.0169, 0.0049, 10).unwrap();
        r.validate().unwrap();
        assert!((r.excited_population() - 0.0169).abs() < 1e-15);
        assert!((r.resonator_populations()[1] - 0.0049).abs() < 1e-15);
        assert!((r.bloch()[2] + 1.0 - 2.0 * 0.0169).abs() < 1e-14);
    }

    #[test]
    fn displacement_inverse() {
        let r = DensityMatrix::fock(1, 1, 12).unwrap();
        let a = C64::new(0.7, -0.4);
        let back = r.displaced(a).unwrap().displaced(-a).unwrap();
        assert!((back.data - &r.data).norm() < 1e-6);
        assert_eq!(r.displaced(C64::new(0.0, 0.0)).unwrap(), r);
    }

    #[test]
    fn bloch_of_equator_states() {
        let d = 3;
        let mut psi = DVector::zeros(2 * d);
        psi[0] = C64::new(1.0, 0.0);
        psi[d] = C64::new(0.0, -1.0);
        let r = DensityMatrix::pure(&psi, 2, d).unwrap();
        let b = r.bloch();
        assert!(b[0].abs() < 1e-15 && (b[1] + 1.0).abs() < 1e-15 && b[2].abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DensityMatrix::new(2, 3, DMatrix::zeros(5, 5)).is_err());
        assert!(DensityMatrix::fock(0, 4, 4).is_err());
        assert!(DensityMatrix::thermal(1.2, 0.0, 4).is_err());
    }
}

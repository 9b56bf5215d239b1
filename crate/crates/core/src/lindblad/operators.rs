use super::{LindbladError, Result, SystemParams};
use crate::C64;
use nalgebra::DMatrix;

/// Row-compressed sparse operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub n: usize,
    /// `rows[i]` holds `(column, value)` pairs of row `i`.
    pub rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        if v != C64::new(0.0, 0.0) {
            self.rows[i].push((j, v));
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut op = Self::zeros(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                op.push(i, j, m[(i, j)]);
            }
        }
        op
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| (j, v * s)).collect())
                .collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Resonator lowering operator on `dim` levels.
pub fn annihilation(dim: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `Δ σ₊σ₋ + g (σ₊a + σ₋a†)` on the `2·dim` composite space.
pub fn build_hamiltonian(delta: f64, g: f64, dim: usize) -> Result<DMatrix<C64>> {
    if dim < 2 {
        return Err(LindbladError::Argument(format!(
            "dim must be at least 2, got {dim}"
        )));
    }
    let mut h = DMatrix::zeros(2 * dim, 2 * dim);
    for n in 0..dim {
        h[(dim + n, dim + n)] = C64::new(delta, 0.0);
    }
    for n in 0..dim - 1 {
        let v = C64::new(g * ((n + 1) as f64).sqrt(), 0.0);
        // |e,n⟩⟨g,n+1| and its adjoint.
        h[(dim + n, n + 1)] = v;
        h[(n + 1, dim + n)] = v;
    }
    Ok(h)
}

/// Number operator of the qubit, `σ₊σ₋`, as a diagonal.
pub(crate) fn qubit_number_diag(dim: usize) -> Vec<f64> {
    (0..2 * dim)
        .map(|i| if i >= dim { 1.0 } else { 0.0 })
        .collect()
}

/// Exchange term `σ₊a + σ₋a†`.
pub(crate) fn exchange_op(dim: usize) -> SparseOp {
    SparseOp::from_dense(&build_hamiltonian(0.0, 1.0, dim).expect("dim checked by caller"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOperator {
    pub label: &'static str,
    /// Rate (1/s); the operator already carries `sqrt(rate)`.
    pub rate: f64,
    pub op: SparseOp,
}

/// `σ₋/√T1`, `σ_z/√(2Tφ)` and `a/√T1r`; channels with infinite lifetime are
/// omitted.
pub fn collapse_operators(params: &SystemParams) -> Result<Vec<CollapseOperator>> {
    params.validate()?;
    let dim = params.dim;
    let n = 2 * dim;
    let mut out = Vec::new();
    if params.t1.is_finite() {
        let rate = 1.0 / params.t1;
        let mut op = SparseOp::zeros(n);
        for k in 0..dim {
            op.push(k, dim + k, C64::new(rate.sqrt(), 0.0));
        }
        out.push(CollapseOperator {
            label: "qubit decay",
            rate,
            op,
        });
    }
    let t_phi = params.t_phi()?;
    if t_phi.is_finite() {
        let rate = 1.0 / (2.0 * t_phi);
        let s = rate.sqrt();
        let mut op = SparseOp::zeros(n);
        // σ_z = |e⟩⟨e| − |g⟩⟨g|; the overall sign is irrelevant here.
        for k in 0..dim {
            op.push(k, k, C64::new(-s, 0.0));
            op.push(dim + k, dim + k, C64::new(s, 0.0));
        }
        out.push(CollapseOperator {
            label: "qubit dephasing",
            rate,
            op,
        });
    }
    if params.t1r.is_finite() {
        let rate = 1.0 / params.t1r;
        let mut op = SparseOp::zeros(n);
        for q in 0..2 {
            for k in 1..dim {
                op.push(
                    q * dim + k - 1,
                    q * dim + k,
                    C64::new((rate * k as f64).sqrt(), 0.0),
                );
            }
        }
        out.push(CollapseOperator {
            label: "resonator decay",
            rate,
            op,
        });
    }
    Ok(out)
}

/// `D(α) = exp(αa† − α*a)` on `dim` levels.
pub fn displacement_operator(alpha: C64, dim: usize) -> Result<DMatrix<C64>> {
    let r = alpha.norm();
    if !(r.is_finite()) {
        return Err(LindbladError::Argument("non-finite displacement".into()));
    }
    if r * r + 4.0 * r >= dim as f64 {
        return Err(LindbladError::Truncation { alpha: r, dim });
    }
    let a = annihilation(dim);
    let gen = a.adjoint() * alpha - &a * alpha.conj();
    Ok(gen.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_matrix_elements() {
        let dim = 5;
        let g = 2.5;
        let h = build_hamiltonian(0.0, g, dim).unwrap();
        // ⟨e,0|H|g,1⟩ and ⟨e,1|H|g,2⟩.
        assert!((h[(dim, 1)] - C64::new(g, 0.0)).norm() < 1e-15);
        assert!((h[(dim + 1, 2)] - C64::new(g * 2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((&h - h.adjoint()).norm() < 1e-15);
        assert_eq!(build_hamiltonian(0.0, 0.0, dim).unwrap().norm(), 0.0);
        assert!(build_hamiltonian(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn hamiltonian_matches_tensor_construction() {
        let dim = 4;
        let (delta, g) = (0.7, 1.3);
        let a = annihilation(dim);
        let eye_r = DMatrix::<C64>::identity(dim, dim);
        let eye_q = DMatrix::<C64>::identity(2, 2);
        let mut sm = DMatrix::<C64>::zeros(2, 2);
        sm[(0, 1)] = C64::new(1.0, 0.0);
        let sp = sm.adjoint();
        let expect = (&sp * &sm).kronecker(&eye_r) * C64::new(delta, 0.0)
            + (sp.kronecker(&a) + sm.kronecker(&a.adjoint())) * C64::new(g, 0.0);
        let h = build_hamiltonian(delta, g, dim).unwrap();
        assert!((h - expect).norm() < 1e-14);
        let _ = eye_q;
    }

    #[test]
    fn hamiltonian_conserves_excitations() {
        let dim = 6;
        let h = build_hamiltonian(0.3, 1.1, dim).unwrap();
        let mut n_tot = DMatrix::<C64>::zeros(2 * dim, 2 * dim);
        for q in 0..2 {
            for k in 0..dim {
                n_tot[(q * dim + k, q * dim + k)] = C64::new((q + k) as f64, 0.0);
            }
        }
        let comm = &h * &n_tot - &n_tot * &h;
        // Only the truncation edge |e,dim-1⟩ breaks the symmetry, and it has
        // no partner; the commutator vanishes exactly.
        assert!(comm.norm() < 1e-14);
    }

    #[test]
    fn collapse_channels() {
        let p = SystemParams {
            t1: f64::INFINITY,
            t2_ramsey: f64::INFINITY,
            ..SystemParams::default()
        };
        let ops = collapse_operators(&p).unwrap();
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].label, "resonator decay");

        let q = SystemParams {
            t2_ramsey: 40e-6,
            ..SystemParams::default()
        };
        let ops = collapse_operators(&q).unwrap();
        assert_eq!(ops.len(), 2);
        let decay = &ops[0];
        assert!((decay.op.rows[0][0].1.re - (1.0 / q.t1).sqrt()).abs() < 1e-12);

        let bad = SystemParams {
            t1r: -1.0,
            ..SystemParams::default()
        };
        assert!(collapse_operators(&bad).is_err());
        assert_eq!(
            collapse_operators(&SystemParams::default()).unwrap().len(),
            3
        );
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let d = displacement_operator(C64::new(1.0, 0.0), 10).unwrap();
        let p0 = d[(0, 0)].norm_sqr();
        assert!((p0 - (-1.0f64).exp()).abs() < 1e-4, "{p0}");
        assert!(matches!(
            displacement_operator(C64::new(2.0, 0.0), 10),
            Err(LindbladError::Truncation { .. })
        ));
        let id = displacement_operator(C64::new(0.0, 0.0), 6).unwrap();
        assert!((id - DMatrix::<C64>::identity(6, 6)).norm() < 1e-15);
    }
}

//! Linear lumped-element model of the transmon, the rf-SQUID coupler and the
//! chip-to-chip mutual inductance.
//!
//! Topology: the qubit capacitance `C_q` is shunted by `L_q` in series with a
//! current divider to ground made of `L_1` in parallel with `L_cj + L_2`. The
//! `L_2` branch couples through `M` to the inductor `L_r` on the SAW chip,
//! which closes through the transducer (`C_t` in parallel with the BvD
//! motional branch).

use crate::fit::{least_squares, LmOptions};
use crate::saw::{AdmittanceSpectrum, BvdParams};
use crate::{C64, TWO_PI};
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum CircuitError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitParams {
    pub c_q: f64,
    pub l_q: f64,
    pub l_1: f64,
    pub l_2: f64,
    pub l_cj0: f64,
    /// Coupler-to-resonator mutual inductance.
    pub m: f64,
    /// Mutual between the overlaid planar inductors; `None` means the design
    /// estimate `0.4 min(L_1, L_2)`. Reported, not part of the network.
    pub m_12: Option<f64>,
    /// Series inductance of the SAW-chip loop that `M` couples into.
    pub l_r: f64,
    /// Qubit lifetime with the coupler off, setting the loss background.
    pub t1_background: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            c_q: 110e-15,
            l_q: 10.1e-9,
            l_1: 0.303e-9,
            l_2: 0.403e-9,
            l_cj0: 1.0e-9,
            m: 0.13e-9,
            m_12: None,
            l_r: 0.3e-9,
            t1_background: 20e-6,
        }
    }
}

impl CircuitParams {
    pub fn m_12(&self) -> f64 {
        self.m_12.unwrap_or(0.4 * self.l_1.min(self.l_2))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_q", self.c_q),
            ("l_q", self.l_q),
            ("l_1", self.l_1),
            ("l_2", self.l_2),
            ("l_cj0", self.l_cj0),
            ("l_r", self.l_r),
            ("t1_background", self.t1_background),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CircuitError::Argument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.m.is_finite() {
            return Err(CircuitError::Argument("m must be finite".into()));
        }
        let m12 = self.m_12();
        if !(m12.abs() <= (self.l_1 * self.l_2).sqrt()) {
            return Err(CircuitError::Argument(format!(
                "|m_12| = {m12} exceeds sqrt(l_1 l_2)"
            )));
        }
        Ok(())
    }
}

/// Bias point of the coupler junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerBias {
    pub phi_g: f64,
    /// Junction phase in `[0, 2π)`.
    pub delta: f64,
    /// Biased junction inductance; `None` at the divergent (open-circuit)
    /// points.
    pub l_cj: Option<f64>,
}

impl CouplerBias {
    pub fn is_divergent(&self) -> bool {
        self.l_cj.is_none()
    }

    /// Inverse junction inductance, zero in the open-circuit limit.
    pub fn inverse_l_cj(&self) -> f64 {
        self.l_cj.map_or(0.0, |l| 1.0 / l)
    }
}

pub fn coupler_inductance(phi_g: f64, params: &CircuitParams) -> Result<CouplerBias> {
    if !phi_g.is_finite() {
        return Err(CircuitError::Argument(format!("non-finite flux {phi_g}")));
    }
    let delta = TWO_PI * phi_g.rem_euclid(1.0);
    let c = delta.cos();
    let l_cj = (c.abs() >= 1e-9).then(|| params.l_cj0 / c);
    Ok(CouplerBias { phi_g, delta, l_cj })
}

/// Inductance of `L_1 ∥ (L_cj + L_2)`.
fn divider_inductance(bias: &CouplerBias, p: &CircuitParams) -> f64 {
    let u = bias.inverse_l_cj();
    p.l_1 * (1.0 + p.l_2 * u) / (1.0 + (p.l_1 + p.l_2) * u)
}

/// `L_1 / (L_1 + L_2 + L_cj)`, the fraction of qubit current in the `L_2` arm.
fn divider_ratio(bias: &CouplerBias, p: &CircuitParams) -> f64 {
    let u = bias.inverse_l_cj();
    p.l_1 * u / (1.0 + (p.l_1 + p.l_2) * u)
}

/// `1 / (L_1 + L_2 + L_cj)`, zero in the open-circuit limit.
fn inverse_loop(bias: &CouplerBias, p: &CircuitParams) -> f64 {
    let u = bias.inverse_l_cj();
    u / (1.0 + (p.l_1 + p.l_2) * u)
}

/// Qubit angular frequency of the qubit + coupler network.
pub fn qubit_frequency(phi_g: f64, params: &CircuitParams) -> Result<f64> {
    let bias = coupler_inductance(phi_g, params)?;
    let l = params.l_q + divider_inductance(&bias, params);
    if !(l > 0.0) {
        return Err(CircuitError::Numerical(format!(
            "non-positive loop inductance at flux {phi_g}"
        )));
    }
    Ok(1.0 / (l * params.c_q).sqrt())
}

/// Normal modes of the full network (qubit, SAW loop, motional branch).
#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Angular frequencies, ascending.
    pub omega: Vec<f64>,
    /// Mode shapes in the symmetrized coordinates `y = Rᵀ q` with `S = R Rᵀ`,
    /// ordered (qubit, SAW loop, motional); columns match `omega`.
    pub shapes: DMatrix<f64>,
}

fn inductance_matrix(
    bias: &CouplerBias,
    p: &CircuitParams,
    l_q: f64,
    bvd: &BvdParams,
) -> Matrix3<f64> {
    let inv = inverse_loop(bias, p);
    let l11 = l_q + divider_inductance(bias, p);
    let l13 = p.m * divider_ratio(bias, p);
    let l33 = p.l_r - p.m * p.m * inv;
    Matrix3::new(l11, l13, 0.0, l13, l33, 0.0, 0.0, 0.0, bvd.l_s)
}

fn elastance_matrix(p: &CircuitParams, bvd: &BvdParams) -> Matrix3<f64> {
    let st = 1.0 / bvd.c_t;
    Matrix3::new(
        1.0 / p.c_q,
        0.0,
        0.0,
        0.0,
        st,
        -st,
        0.0,
        -st,
        st + 1.0 / bvd.c_s,
    )
}

fn modes_with(
    bias: &CouplerBias,
    p: &CircuitParams,
    l_q: f64,
    bvd: &BvdParams,
) -> Result<NormalModes> {
    let l = inductance_matrix(bias, p, l_q, bvd);
    let s = elastance_matrix(p, bvd);
    let r = s
        .cholesky()
        .ok_or_else(|| CircuitError::Numerical("elastance matrix not positive definite".into()))?
        .l();
    let k = l
        .try_inverse()
        .ok_or_else(|| CircuitError::Numerical("singular inductance matrix".into()))?;
    let a = r.transpose() * k * r;
    let a = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut omega = Vec::with_capacity(3);
    let mut shapes = DMatrix::zeros(3, 3);
    for (col, &i) in order.iter().enumerate() {
        let w2 = eig.eigenvalues[i];
        if !(w2 > 0.0) {
            return Err(CircuitError::Numerical(format!(
                "non-physical mode (ω² = {w2:e}) at flux {}",
                bias.phi_g
            )));
        }
        omega.push(w2.sqrt());
        shapes.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok(NormalModes { omega, shapes })
}

pub fn normal_modes(phi_g: f64, params: &CircuitParams, bvd: &BvdParams) -> Result<NormalModes> {
    params.validate()?;
    let bias = coupler_inductance(phi_g, params)?;
    modes_with(&bias, params, params.l_q, bvd)
}

/// Signed qubit-resonator coupling (rad/s): half the minimum splitting of the
/// two modes near the motional resonance as `L_q` is retuned through
/// degeneracy.
pub fn coupling_strength(phi_g: f64, params: &CircuitParams, bvd: &BvdParams) -> Result<f64> {
    params.validate()?;
    bvd.validate()
        .map_err(|e| CircuitError::Argument(e.to_string()))?;
    let bias = coupler_inductance(phi_g, params)?;
    if params.m == 0.0 || divider_ratio(&bias, params) == 0.0 {
        return Ok(0.0);
    }
    let ws = bvd.omega_s();
    let l_net = divider_inductance(&bias, params);
    let lq0 = 1.0 / (ws * ws * params.c_q) - l_net;
    let splitting = |lq: f64| -> Result<f64> {
        let m = modes_with(&bias, params, lq, bvd)?;
        Ok(m.omega[1] - m.omega[0])
    };
    // The splitting is sqrt(detuning² + 4g²) near degeneracy; golden-section
    // search on a bracket of a few percent in L_q.
    let (mut a, mut b) = (lq0 * 0.97, lq0 * 1.03);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (splitting(c)?, splitting(d)?);
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * lq0 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = splitting(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = splitting(d)?;
        }
    }
    let lq = 0.5 * (a + b);
    let modes = modes_with(&bias, params, lq, bvd)?;
    let g = 0.5 * (modes.omega[1] - modes.omega[0]);
    // In-phase lower mode (qubit and motional amplitudes of equal sign)
    // means a positive effective coupling.
    let lower = modes.shapes.column(0);
    let sign = if lower[0] * lower[2] >= 0.0 {
        1.0
    } else {
        -1.0
    };
    Ok(sign * g)
}

/// Impedance seen looking from the qubit capacitor into `L_q` and the
/// coupler, with the SAW chip reflected through `M`.
fn input_impedance(omega: f64, l_q: f64, bias: &CouplerBias, p: &CircuitParams, y_saw: C64) -> C64 {
    let j = C64::i();
    let z_saw = j * omega * p.l_r + C64::new(1.0, 0.0) / y_saw;
    let z_refl = C64::new((omega * p.m).powi(2), 0.0) / z_saw;
    let z1 = j * omega * p.l_1;
    let z_branch = match bias.l_cj {
        Some(l_cj) => j * omega * (l_cj + p.l_2) + z_refl,
        None => return j * omega * (l_q + p.l_1),
    };
    j * omega * l_q + z1 * z_branch / (z1 + z_branch)
}

/// Qubit loss `1/Q` at each grid frequency (rad/s), with the qubit retuned
/// to that frequency via `L_q`.
pub fn qubit_loss_spectrum(
    grid: &[f64],
    phi_g: f64,
    params: &CircuitParams,
    saw: &AdmittanceSpectrum,
) -> Result<Vec<f64>> {
    params.validate()?;
    let bias = coupler_inductance(phi_g, params)?;
    grid.par_iter()
        .map(|&w| {
            let ya = saw.interpolate(w).ok_or_else(|| {
                CircuitError::Argument(format!(
                    "frequency {:.6e} Hz outside the SAW spectrum",
                    crate::rad_to_hz(w)
                ))
            })?;
            let y_saw = ya + C64::new(0.0, w * saw.c_t);
            let z_net = input_impedance(w, 0.0, &bias, params, y_saw);
            let l_q = 1.0 / (w * w * params.c_q) - z_net.im / w;
            let z_in = z_net + C64::new(0.0, w * l_q);
            let loss = (C64::new(1.0, 0.0) / z_in).re / (w * params.c_q);
            Ok(loss.max(0.0) + 1.0 / (w * params.t1_background))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitFit {
    pub params: CircuitParams,
    /// Covariance of `(L_q, L_1, L_2)` in H².
    pub covariance: Option<[[f64; 3]; 3]>,
    /// RMS relative frequency residual.
    pub rms_relative_residual: f64,
}

/// Least-squares fit of `(L_q, L_1, L_2)` to `(Φ_G, ω_ge)` data. `C_q`,
/// `L_cj0` and the remaining fields are taken from `initial`.
pub fn fit_circuit(data: &[(f64, f64)], initial: &CircuitParams) -> Result<CircuitFit> {
    initial.validate()?;
    if data.len() < 8 {
        return Err(CircuitError::IllConditioned(format!(
            "{} data points, need at least 8",
            data.len()
        )));
    }
    let phases: Vec<f64> = data.iter().map(|(phi, _)| phi.rem_euclid(1.0)).collect();
    let span = circular_span(&phases);
    if span < 0.5 {
        return Err(CircuitError::IllConditioned(format!(
            "flux data span {span:.3} of a period, need at least 0.5"
        )));
    }
    if data.iter().any(|(phi, w)| !phi.is_finite() || !(*w > 0.0)) {
        return Err(CircuitError::Argument(
            "data must be finite with positive frequencies".into(),
        ));
    }
    let scale = 1e-9;
    let unpack = |x: &DVector<f64>| CircuitParams {
        l_q: x[0] * scale,
        l_1: x[1] * scale,
        l_2: x[2] * scale,
        ..*initial
    };
    let residuals = |x: &DVector<f64>| {
        let p = unpack(x);
        DVector::from_iterator(
            data.len(),
            data.iter().map(|&(phi, w)| match qubit_frequency(phi, &p) {
                Ok(m) => (m - w) / w,
                Err(_) => f64::NAN,
            }),
        )
    };
    let x0 = DVector::from_vec(vec![
        initial.l_q / scale,
        initial.l_1 / scale,
        initial.l_2 / scale,
    ]);
    let fit = least_squares(residuals, x0, LmOptions::default());
    let params = unpack(&fit.params);
    params.validate()?;
    let rms = fit.residual_norm / (data.len() as f64).sqrt();
    let covariance = fit.covariance.map(|c| {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = c[(i, j)] * scale * scale;
            }
        }
        out
    });
    if covariance.is_none() {
        return Err(CircuitError::IllConditioned(
            "singular normal matrix".into(),
        ));
    }
    Ok(CircuitFit {
        params,
        covariance,
        rms_relative_residual: rms,
    })
}

/// Shortest arc of the unit circle (in periods) covering all phases.
fn circular_span(phases: &[f64]) -> f64 {
    let mut p = phases.to_vec();
    p.sort_by(f64::total_cmp);
    let n = p.len();
    if n < 2 {
        return 0.0;
    }
    let mut largest_gap = 1.0 - p[n - 1] + p[0];
    for w in p.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    1.0 - largest_gap
}

pub fn write_frequency_csv<W: Write>(mut out: W, rows: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "phi_g,omega_ge_hz")?;
    for (phi, w) in rows {
        writeln!(out, "{},{}", phi, crate::rad_to_hz(*w))?;
    }
    Ok(())
}

pub fn write_coupling_csv<W: Write>(mut out: W, rows: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "phi_g,g_hz")?;
    for (phi, g) in rows {
        writeln!(out, "{},{}", phi, crate::rad_to_hz(*g))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{hz_to_rad, rad_to_hz};

    fn reference_bvd() -> BvdParams {
        BvdParams {
            c_s: 12.10e-15,
            l_s: 131.8e-9,
            r_s: 0.890,
            c_t: 0.75e-12,
        }
    }

    #[test]
    fn coupler_bias_points() {
        let p = CircuitParams::default();
        let b0 = coupler_inductance(0.0, &p).unwrap();
        assert_eq!(b0.delta, 0.0);
        assert!((b0.l_cj.unwrap() - 1.0e-9).abs() < 1e-21);
        let b5 = coupler_inductance(0.5, &p).unwrap();
        assert!((b5.l_cj.unwrap() + 1.0e-9).abs() < 1e-18);
        assert!(coupler_inductance(0.25, &p).unwrap().is_divergent());
        assert!(coupler_inductance(f64::NAN, &p).is_err());
    }

    #[test]
    fn decoupled_limit_matches_lc_formula() {
        let p = CircuitParams {
            l_1: 1e-30,
            ..Default::default()
        };
        let w = qubit_frequency(0.25, &p).unwrap();
        let expect = 1.0 / (p.l_q * p.c_q).sqrt();
        assert!((w - expect).abs() / expect < 1e-12);
        assert!((rad_to_hz(expect) / 1e9 - 4.78).abs() < 0.01);
    }

    #[test]
    fn frequency_is_flux_periodic() {
        let p = CircuitParams::default();
        for phi in [0.1, 0.37, 0.5, 0.81] {
            let a = qubit_frequency(phi, &p).unwrap();
            let b = qubit_frequency(phi + 1.0, &p).unwrap();
            let c = qubit_frequency(phi - 3.0, &p).unwrap();
            assert!((a - b).abs() / a < 1e-12 && (a - c).abs() / a < 1e-12);
        }
    }

    #[test]
    fn coupling_vanishes_without_mutual() {
        let p = CircuitParams {
            m: 0.0,
            ..Default::default()
        };
        assert_eq!(coupling_strength(0.5, &p, &reference_bvd()).unwrap(), 0.0);
        let q = CircuitParams::default();
        assert_eq!(coupling_strength(0.25, &q, &reference_bvd()).unwrap(), 0.0);
    }

    #[test]
    fn maximum_coupling_near_reference_value() {
        let p = CircuitParams::default();
        let g = coupling_strength(0.5, &p, &reference_bvd()).unwrap();
        let g_mhz = rad_to_hz(g.abs()) / 1e6;
        assert!((g_mhz - 7.3).abs() < 0.73, "{g_mhz}");
    }

    #[test]
    fn coupling_sign_flips_across_divergent_point() {
        let p = CircuitParams::default();
        let a = coupling_strength(0.1, &p, &reference_bvd()).unwrap();
        let b = coupling_strength(0.4, &p, &reference_bvd()).unwrap();
        assert!(a * b < 0.0, "{a} {b}");
    }

    #[test]
    fn loss_without_coupling_is_background() {
        let p = CircuitParams {
            m: 0.0,
            ..Default::default()
        };
        let grid = crate::saw::linear_grid_hz(3.8e9, 4.1e9, 31);
        let saw =
            AdmittanceSpectrum::new(grid.clone(), vec![C64::new(0.01, 0.0); 31], 0.75e-12).unwrap();
        let loss = qubit_loss_spectrum(&grid, 0.5, &p, &saw).unwrap();
        for (w, l) in grid.iter().zip(&loss) {
            let bg = 1.0 / (w * p.t1_background);
            assert!((l - bg).abs() <= 1e-12 * bg);
        }
        let outside = [hz_to_rad(5e9)];
        assert!(matches!(
            qubit_loss_spectrum(&outside, 0.5, &p, &saw),
            Err(CircuitError::Argument(_))
        ));
    }

    #[test]
    fn circular_span_handles_wraparound() {
        assert!((circular_span(&[0.9, 0.95, 0.1, 0.2]) - 0.3).abs() < 1e-12);
        assert!((circular_span(&[0.0, 0.25, 0.5, 0.75]) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_narrow_span() {
        let p = CircuitParams::default();
        let data: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let phi = 0.4 + 0.02 * i as f64;
                (phi, qubit_frequency(phi, &p).unwrap())
            })
            .collect();
        assert!(matches!(
            fit_circuit(&data, &p),
            Err(CircuitError::IllConditioned(_))
        ));
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let truth = CircuitParams::default();
        let data: Vec<(f64, f64)> = (0..41)
            .map(|i| {
                let phi = i as f64 / 40.0;
                (phi, qubit_frequency(phi, &truth).unwrap())
            })
            .collect();
        let start = CircuitParams {
            l_q: 9.5e-9,
            l_1: 0.35e-9,
            l_2: 0.35e-9,
            ..truth
        };
        let fit = fit_circuit(&data, &start).unwrap();
        assert!(fit.rms_relative_residual < 1e-10);
        assert!((fit.params.l_q - truth.l_q).abs() / truth.l_q < 1e-6);
        assert!((fit.params.l_1 - truth.l_1).abs() / truth.l_1 < 1e-6);
        assert!((fit.params.l_2 - truth.l_2).abs() / truth.l_2 < 1e-6);
    }
}

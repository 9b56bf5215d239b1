//! Coupling-of-modes model of a one-port SAW resonator.
//!
//! The structure is mirror | transducer | mirror, each region a cascade of
//! identical electrode cells in P-matrix form (see [`pmatrix`]). Frequencies
//! are angular (rad/s) throughout.

mod bvd;
pub mod pmatrix;

pub use bvd::{fit_bvd, generate_bvd, BvdFit, BvdParams};

use crate::C64;
use pmatrix::{electrode_cell, PMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum SawError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("fit did not converge ({termination}); best residual {residual:.3e}")]
    Convergence {
        best: BvdParams,
        residual: f64,
        termination: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SawError>;

/// Geometry and COM parameters of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SawModelParams {
    /// Acoustic wavelength at the design frequency (m).
    pub wavelength: f64,
    pub transducer_pairs: usize,
    /// Lines per mirror.
    pub mirror_lines: usize,
    /// Effective speed in the transducer (m/s).
    pub v_t: f64,
    /// Effective speed in the mirrors (m/s).
    pub v_m: f64,
    /// Per-line amplitude reflection in the transducer.
    pub r_t: C64,
    /// Per-line amplitude reflection in the mirrors.
    pub r_m: C64,
    /// Propagation loss (Np/m).
    pub eta: f64,
    /// Transducer capacitance (F).
    pub c_t: f64,
    /// Mirror line pitch (m). The stop band is centered at `v_m / (2 pitch)`.
    pub mirror_pitch: f64,
    /// Transducer-mirror spacing (m).
    pub gap_t_m: f64,
    /// Electromechanical coupling coefficient; sets the transduction strength
    /// through `G_a(ω_c) = 8 k2 f_c C_t N_p`.
    pub k2: f64,
}

impl Default for SawModelParams {
    fn default() -> Self {
        Self {
            wavelength: 1e-6,
            transducer_pairs: 20,
            mirror_lines: 500,
            v_t: 4012.5,
            v_m: 4027.0,
            r_t: C64::new(0.0, 0.015),
            r_m: C64::new(0.0, -0.032),
            eta: 851.0,
            c_t: 0.75e-12,
            mirror_pitch: 503.375e-9,
            gap_t_m: 0.0,
            k2: 0.0467,
        }
    }
}

impl SawModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SawError::Argument(m.to_string()));
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad("wavelength must be positive");
        }
        if self.transducer_pairs < 1 {
            return bad("transducer_pairs must be at least 1");
        }
        if !(self.v_t > 0.0 && self.v_m > 0.0) {
            return bad("velocities must be positive");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be non-negative");
        }
        if !(self.r_t.norm() < 1.0 && self.r_m.norm() < 1.0) {
            return bad("per-line reflectivities must satisfy |r| < 1");
        }
        if !(self.c_t > 0.0 && self.c_t.is_finite()) {
            return bad("c_t must be positive");
        }
        if !(self.mirror_pitch > 0.0 && self.mirror_pitch.is_finite()) {
            return bad("mirror_pitch must be positive");
        }
        if !(self.gap_t_m >= 0.0 && self.gap_t_m.is_finite()) {
            return bad("gap_t_m must be non-negative");
        }
        if !(self.k2 >= 0.0 && self.k2.is_finite()) {
            return bad("k2 must be non-negative");
        }
        Ok(())
    }

    /// Center frequency of the transducer, `v_t / λ` (Hz).
    pub fn transducer_center_hz(&self) -> f64 {
        self.v_t / self.wavelength
    }

    fn source_strength(&self) -> f64 {
        (self.k2 * self.transducer_center_hz() * self.c_t / self.transducer_pairs as f64).sqrt()
    }

    fn theta(&self, omega: f64, length: f64, v: f64) -> C64 {
        C64::new(omega * length / v, -self.eta * length)
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !omega.is_finite() {
        return Err(SawError::Domain(format!("non-finite frequency {omega}")));
    }
    if omega <= 0.0 {
        return Err(SawError::Domain(format!(
            "frequency must be positive, got {omega}"
        )));
    }
    Ok(())
}

fn mirror_pmatrix(omega: f64, p: &SawModelParams) -> PMatrix {
    electrode_cell(p.theta(omega, p.mirror_pitch, p.v_m), p.r_m, 0.0).power(p.mirror_lines)
}

/// Amplitude reflection of one mirror seen from the cavity.
pub fn mirror_reflection(omega: f64, params: &SawModelParams) -> Result<C64> {
    check_omega(omega)?;
    Ok(mirror_pmatrix(omega, params).reflection_left())
}

/// P-matrix of the transducer alone, acoustic ports matched.
pub fn transducer_response(omega: f64, params: &SawModelParams) -> Result<PMatrix> {
    check_omega(omega)?;
    let pitch = params.wavelength / 2.0;
    let theta = params.theta(omega, pitch, params.v_t);
    let beta = params.source_strength();
    let pair =
        electrode_cell(theta, params.r_t, beta).cascade(&electrode_cell(theta, params.r_t, -beta));
    Ok(pair.power(params.transducer_pairs))
}

/// P-matrix of the full mirror-transducer-mirror structure.
pub fn resonator_pmatrix(omega: f64, params: &SawModelParams) -> Result<PMatrix> {
    let idt = transducer_response(omega, params)?;
    let mirror = mirror_pmatrix(omega, params);
    let inner = if params.gap_t_m > 0.0 {
        let gap = PMatrix::propagation(params.theta(omega, params.gap_t_m, params.v_t));
        gap.cascade(&idt).cascade(&gap)
    } else {
        idt
    };
    Ok(mirror.cascade(&inner).cascade(&mirror))
}

/// Acoustic admittance over a frequency grid, with the transducer capacitance
/// kept separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceSpectrum {
    /// Angular frequencies (rad/s), strictly increasing.
    pub omega: Vec<f64>,
    /// Acoustic admittance `Y_a` (S).
    pub y: Vec<C64>,
    /// Static transducer capacitance (F).
    pub c_t: f64,
    pub params: Option<SawModelParams>,
}

impl AdmittanceSpectrum {
    pub fn new(omega: Vec<f64>, y: Vec<C64>, c_t: f64) -> Result<Self> {
        if omega.len() != y.len() {
            return Err(SawError::Argument(
                "frequency and admittance arrays differ in length".into(),
            ));
        }
        check_grid(&omega)?;
        Ok(Self {
            omega,
            y,
            c_t,
            params: None,
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Total terminal admittance `Y_a + jωC_t`.
    pub fn total(&self) -> Vec<C64> {
        self.omega
            .iter()
            .zip(&self.y)
            .map(|(&w, &y)| y + C64::new(0.0, w * self.c_t))
            .collect()
    }

    /// Linear interpolation of `Y_a` at `omega`; `None` outside the grid.
    pub fn interpolate(&self, omega: f64) -> Option<C64> {
        let n = self.omega.len();
        if n == 0 || omega < self.omega[0] || omega > self.omega[n - 1] {
            return None;
        }
        let i = self.omega.partition_point(|&w| w <= omega);
        if i == 0 {
            return Some(self.y[0]);
        }
        if i >= n {
            return Some(self.y[n - 1]);
        }
        let (w0, w1) = (self.omega[i - 1], self.omega[i]);
        let s = (omega - w0) / (w1 - w0);
        Some(self.y[i - 1] * (1.0 - s) + self.y[i] * s)
    }

    /// Index of the largest `Re Y_a`.
    pub fn peak_index(&self) -> Option<usize> {
        self.y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
            .map(|(i, _)| i)
    }

    /// Writes `freq_hz,re_y_s,im_y_s` rows of the total admittance.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "freq_hz,re_y_s,im_y_s")?;
        for (w, y) in self.omega.iter().zip(self.total()) {
            writeln!(out, "{},{},{}", crate::rad_to_hz(*w), y.re, y.im)?;
        }
        Ok(())
    }
}

fn check_grid(omega: &[f64]) -> Result<()> {
    if omega.is_empty() {
        return Err(SawError::Argument("empty frequency grid".into()));
    }
    for &w in omega {
        check_omega(w)?;
    }
    if omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SawError::Argument(
            "frequency grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn spectrum_with<F>(grid: &[f64], params: &SawModelParams, f: F) -> Result<AdmittanceSpectrum>
where
    F: Fn(f64) -> Result<C64> + Sync,
{
    params.validate()?;
    check_grid(grid)?;
    let y = grid.par_iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
    Ok(AdmittanceSpectrum {
        omega: grid.to_vec(),
        y,
        c_t: params.c_t,
        params: Some(*params),
    })
}

/// Acoustic admittance of the complete resonator on `grid` (rad/s).
pub fn resonator_admittance(grid: &[f64], params: &SawModelParams) -> Result<AdmittanceSpectrum> {
    spectrum_with(grid, params, |w| {
        Ok(resonator_pmatrix(w, params)?.admittance())
    })
}

/// Acoustic admittance of the transducer without mirrors.
pub fn transducer_admittance(grid: &[f64], params: &SawModelParams) -> Result<AdmittanceSpectrum> {
    spectrum_with(grid, params, |w| {
        Ok(transducer_response(w, params)?.admittance())
    })
}

/// `n` evenly spaced angular frequencies from `f_lo` to `f_hi` given in Hz.
pub fn linear_grid_hz(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![crate::hz_to_rad(f_lo)];
    }
    (0..n)
        .map(|i| crate::hz_to_rad(f_lo + (f_hi - f_lo) * i as f64 / (n - 1) as f64))
        .collect()
}

//! Butterworth-van Dyke extraction: a series RLC branch in parallel with the
//! static transducer capacitance.

use super::{AdmittanceSpectrum, Result, SawError};
use crate::fit::{least_squares, LmOptions};
use crate::C64;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvdParams {
    pub c_s: f64,
    pub l_s: f64,
    pub r_s: f64,
    pub c_t: f64,
}

impl Default for BvdParams {
    /// Fit of the default COM model around its resonance.
    fn default() -> Self {
        Self {
            c_s: 12.18e-15,
            l_s: 130.87e-9,
            r_s: 0.8946,
            c_t: 0.75e-12,
        }
    }
}

impl BvdParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.c_s, self.l_s, self.r_s, self.c_t]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SawError::Argument(format!(
                "BvD parameters must be positive: {self:?}"
            )))
        }
    }

    pub fn omega_s(&self) -> f64 {
        1.0 / (self.l_s * self.c_s).sqrt()
    }

    pub fn quality_factor(&self) -> f64 {
        (self.l_s / self.c_s).sqrt() / self.r_s
    }

    /// Admittance of the motional branch alone.
    pub fn series_admittance(&self, omega: f64) -> C64 {
        series(omega, self.r_s, self.l_s, self.c_s)
    }

    pub fn admittance(&self, omega: f64) -> C64 {
        self.series_admittance(omega) + C64::new(0.0, omega * self.c_t)
    }
}

fn series(omega: f64, r: f64, l: f64, c: f64) -> C64 {
    C64::new(1.0, 0.0) / C64::new(r, omega * l - 1.0 / (omega * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvdFit {
    pub params: BvdParams,
    /// Norm of the complex residual over the window (S).
    pub residual_norm: f64,
    /// Residual norm relative to the norm of the fitted acoustic admittance.
    pub relative_residual: f64,
    pub q: f64,
}

/// Spectrum whose acoustic part is the motional branch of `p`.
pub fn generate_bvd(p: &BvdParams, omega: &[f64]) -> Result<AdmittanceSpectrum> {
    p.validate()?;
    let y = omega.iter().map(|&w| p.series_admittance(w)).collect();
    AdmittanceSpectrum::new(omega.to_vec(), y, p.c_t)
}

/// Fits the series branch to the acoustic admittance inside `window`
/// (rad/s, inclusive). `C_t` is taken from the spectrum and held fixed.
pub fn fit_bvd(spectrum: &AdmittanceSpectrum, window: (f64, f64)) -> Result<BvdFit> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(SawError::Argument(format!("empty fit window [{lo}, {hi}]")));
    }
    let idx: Vec<usize> = (0..spectrum.len())
        .filter(|&i| spectrum.omega[i] >= lo && spectrum.omega[i] <= hi)
        .collect();
    if idx.len() < 5 {
        return Err(SawError::Fit(format!(
            "only {} grid points in the fit window",
            idx.len()
        )));
    }
    let w: Vec<f64> = idx.iter().map(|&i| spectrum.omega[i]).collect();
    let y: Vec<C64> = idx.iter().map(|&i| spectrum.y[i]).collect();
    let g: Vec<f64> = y.iter().map(|v| v.re).collect();

    let k = single_peak(&g)?;
    let g_max = g[k];
    let w0 = refine_peak(&w, &g, k);
    let q0 = half_width(&w, &g, k)
        .map(|fwhm| w0 / fwhm)
        .unwrap_or_else(|| w0 / ((hi - lo) / 4.0));
    let r0 = 1.0 / g_max;

    // Parameterized as (ln R, resonance offset in linewidths, ln Q), which
    // keeps the normal matrix well conditioned for narrow peaks.
    let unpack = |p: &DVector<f64>| {
        let r = p[0].exp();
        let ws = w0 * (1.0 + p[1] / q0);
        let q = p[2].exp();
        let l = q * r / ws;
        (r, l, 1.0 / (ws * ws * l))
    };
    let residuals = |p: &DVector<f64>| {
        let (r, l, c) = unpack(p);
        let mut out = DVector::zeros(2 * w.len());
        for (i, (&wi, yi)) in w.iter().zip(&y).enumerate() {
            let d = (series(wi, r, l, c) - yi) / g_max;
            out[2 * i] = d.re;
            out[2 * i + 1] = d.im;
        }
        out
    };
    let x0 = DVector::from_vec(vec![r0.ln(), 0.0, q0.ln()]);
    let fit = least_squares(residuals, x0, LmOptions::default());
    let (r_s, l_s, c_s) = unpack(&fit.params);
    let params = BvdParams {
        c_s,
        l_s,
        r_s,
        c_t: spectrum.c_t,
    };
    let residual_norm = fit.residual_norm * g_max;
    let y_norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !fit.converged || params.validate().is_err() {
        return Err(SawError::Convergence {
            best: params,
            residual: residual_norm,
            termination: fit.termination,
        });
    }
    Ok(BvdFit {
        params,
        residual_norm,
        relative_residual: residual_norm / y_norm,
        q: params.quality_factor(),
    })
}

/// Index of the only significant local maximum of `g`. Local maxima below
/// half the window maximum are treated as ripple.
fn single_peak(g: &[f64]) -> Result<usize> {
    let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(SawError::Fit("no resonant peak in window".into()));
    }
    let n = g.len();
    let peaks: Vec<usize> = (1..n - 1)
        .filter(|&i| g[i] >= g[i - 1] && g[i] > g[i + 1] && g[i] >= 0.5 * max)
        .collect();
    match peaks.as_slice() {
        [] => Err(SawError::Fit("no resonant peak in window".into())),
        [k] => Ok(*k),
        many => Err(SawError::Fit(format!(
            "{} peaks in window, expected one",
            many.len()
        ))),
    }
}

fn refine_peak(w: &[f64], g: &[f64], k: usize) -> f64 {
    let (a, b, c) = (g[k - 1], g[k], g[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE {
        return w[k];
    }
    let shift = 0.5 * (a - c) / denom;
    w[k] + shift.clamp(-1.0, 1.0) * 0.5 * (w[k + 1] - w[k - 1])
}

fn half_width(w: &[f64], g: &[f64], k: usize) -> Option<f64> {
    let half = 0.5 * g[k];
    let cross = |i: usize, j: usize| w[i] + (half - g[i]) / (g[j] - g[i]) * (w[j] - w[i]);
    let left = (0..k)
        .rev()
        .find(|&i| g[i] < half)
        .map(|i| cross(i, i + 1))?;
    let right = (k + 1..g.len())
        .find(|&i| g[i] < half)
        .map(|i| cross(i - 1, i))?;
    (right > left).then_some(right - left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saw::linear_grid_hz;

    #[test]
    fn recovers_synthetic_parameters() {
        let p = BvdParams {
            c_s: 12.1e-15,
            l_s: 131.8e-9,
            r_s: 0.89,
            c_t: 0.75e-12,
        };
        let f0 = crate::rad_to_hz(p.omega_s());
        let grid = linear_grid_hz(f0 - 10e6, f0 + 10e6, 801);
        let s = generate_bvd(&p, &grid).unwrap();
        let fit = fit_bvd(&s, (grid[0], grid[800])).unwrap();
        for (a, b) in [
            (fit.params.c_s, p.c_s),
            (fit.params.l_s, p.l_s),
            (fit.params.r_s, p.r_s),
        ] {
            assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn capacitor_alone_has_no_peak() {
        let grid = linear_grid_hz(3.9e9, 4.1e9, 101);
        let s =
            AdmittanceSpectrum::new(grid.clone(), vec![C64::new(0.0, 0.0); 101], 0.75e-12).unwrap();
        assert!(matches!(
            fit_bvd(&s, (grid[0], grid[100])),
            Err(SawError::Fit(_))
        ));
    }

    #[test]
    fn two_peaks_are_rejected() {
        let a = BvdParams {
            c_s: 10e-15,
            l_s: 150e-9,
            r_s: 1.0,
            c_t: 1e-12,
        };
        let b = BvdParams { l_s: 140e-9, ..a };
        let fa = crate::rad_to_hz(a.omega_s());
        let fb = crate::rad_to_hz(b.omega_s());
        let grid = linear_grid_hz(fa.min(fb) - 20e6, fa.max(fb) + 20e6, 4001);
        let y = grid
            .iter()
            .map(|&w| a.series_admittance(w) + b.series_admittance(w))
            .collect();
        let s = AdmittanceSpectrum::new(grid.clone(), y, 1e-12).unwrap();
        assert!(matches!(
            fit_bvd(&s, (grid[0], grid[4000])),
            Err(SawError::Fit(_))
        ));
    }
}

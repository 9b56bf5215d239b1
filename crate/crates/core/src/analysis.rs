//! Exponential and damped-cosine fits for lifetime, Ramsey-type and chevron
//! traces.

use crate::fit::{least_squares, LmOptions};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    Argument(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// `y = A e^{−t/τ} + C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub tau: f64,
    pub offset: f64,
    pub sigma_tau: f64,
    pub rms_residual: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.tau).exp() + self.offset
    }
}

/// `y = A e^{−t/τ} cos(ωt + φ) + C`, with `ω` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedCosineFit {
    pub amplitude: f64,
    /// Infinite when no decay is resolved.
    pub tau: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
    pub sigma_tau: f64,
    pub sigma_omega: f64,
    pub rms_residual: f64,
}

impl DampedCosineFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.tau).exp() * (self.omega * t + self.phase).cos() + self.offset
    }
}

fn check(t: &[f64], y: &[f64], min: usize) -> Result<(f64, f64)> {
    if t.len() != y.len() {
        return Err(AnalysisError::Argument(format!(
            "{} times but {} values",
            t.len(),
            y.len()
        )));
    }
    if t.len() < min {
        return Err(AnalysisError::Argument(format!(
            "need at least {min} points, got {}",
            t.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Argument("non-finite data".into()));
    }
    let t0 = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let t1 = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(t1 > t0) {
        return Err(AnalysisError::Argument("time axis has zero span".into()));
    }
    Ok((t0, t1 - t0))
}

/// Fits an exponential decay. With `free_offset = false` the baseline is
/// fixed at zero.
pub fn fit_exponential(t: &[f64], y: &[f64], free_offset: bool) -> Result<ExpFit> {
    let (_, span) = check(t, y, 4)?;
    let s: Vec<f64> = t.iter().map(|v| v / span).collect();
    let c0 = if free_offset {
        let k = (y.len() / 10).max(1);
        let mut tail: Vec<(f64, f64)> = s.iter().cloned().zip(y.iter().cloned()).collect();
        tail.sort_by(|a, b| a.0.total_cmp(&b.0));
        tail[tail.len() - k..].iter().map(|p| p.1).sum::<f64>() / k as f64
    } else {
        0.0
    };
    // Log-linear guess on points well above the baseline.
    let pts: Vec<(f64, f64)> = s
        .iter()
        .zip(y)
        .filter(|(_, v)| (*v - c0).abs() > 1e-12)
        .map(|(a, v)| (*a, (v - c0).abs().ln()))
        .collect();
    let rate0 = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (-sxy / sxx).max(0.1)
    } else {
        1.0
    };
    let a0 = {
        let i0 = s
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|p| p.0)
            .unwrap();
        (y[i0] - c0) * (rate0 * s[i0]).exp()
    };
    let residuals = |p: &DVector<f64>| {
        let rate = p[1].exp();
        let c = if free_offset { p[2] } else { 0.0 };
        DVector::from_iterator(
            s.len(),
            s.iter()
                .zip(y)
                .map(|(a, v)| p[0] * (-rate * a).exp() + c - v),
        )
    };
    let mut x0 = vec![a0, rate0.ln()];
    if free_offset {
        x0.push(c0);
    }
    let fit = least_squares(residuals, DVector::from_vec(x0), LmOptions::default());
    let p = &fit.params;
    if !fit.converged || p.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Fit(format!(
            "exponential fit: {}",
            fit.termination
        )));
    }
    let tau = span / p[1].exp();
    let sigma_tau = fit
        .covariance
        .as_ref()
        .map_or(f64::NAN, |c| tau * c[(1, 1)].max(0.0).sqrt());
    Ok(ExpFit {
        amplitude: p[0],
        tau,
        offset: if free_offset { p[2] } else { 0.0 },
        sigma_tau,
        rms_residual: fit.residual_norm / (y.len() as f64).sqrt(),
    })
}

/// Linear least squares of `y` on the columns of `a`; returns coefficients and
/// the residual sum of squares.
fn linear_fit(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let svd = a.clone().svd(true, true);
    let x = svd.solve(y, 1e-12).ok()?;
    let r = a * &x - y;
    Some((x, r.norm_squared()))
}

/// Dominant oscillation frequency (rad per unit of `s`) from a scan of
/// undamped sinusoid fits.
fn periodogram_peak(s: &[f64], y: &[f64]) -> f64 {
    let n = s.len();
    let min_ds = s
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let nyquist = std::f64::consts::PI / min_ds;
    let step = std::f64::consts::PI / 8.0;
    let yv = DVector::from_column_slice(y);
    let mut best = (f64::INFINITY, step);
    let mut w = step;
    while w < nyquist {
        let a = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (w * s[i]).cos(),
            _ => (w * s[i]).sin(),
        });
        if let Some((_, rss)) = linear_fit(&a, &yv) {
            if rss < best.0 {
                best = (rss, w);
            }
        }
        w += step;
    }
    best.1
}

/// Fits a damped cosine. The initial frequency comes from a periodogram scan.
pub fn fit_damped_cosine(t: &[f64], y: &[f64]) -> Result<DampedCosineFit> {
    let (t0, span) = check(t, y, 8)?;
    let s: Vec<f64> = t.iter().map(|v| (v - t0) / span).collect();
    let w0 = periodogram_peak(&s, y);
    let n = s.len();
    let yv = DVector::from_column_slice(y);
    // Linear parameters (offset, cos, sin) are eliminated for each (γ, ω).
    let design = |gamma: f64, w: f64| {
        DMatrix::from_fn(n, 3, |i, j| {
            let e = (-gamma * s[i]).exp();
            match j {
                0 => 1.0,
                1 => e * (w * s[i]).cos(),
                _ => e * (w * s[i]).sin(),
            }
        })
    };
    let mut start = (f64::INFINITY, 0.0);
    for gamma in [0.0, 0.5, 1.0, 2.0, 4.0] {
        if let Some((_, rss)) = linear_fit(&design(gamma, w0), &yv) {
            if rss < start.0 {
                start = (rss, gamma);
            }
        }
    }
    let (lin, _) = linear_fit(&design(start.1, w0), &yv)
        .ok_or_else(|| AnalysisError::Fit("singular design".into()))?;
    let residuals = |p: &DVector<f64>| {
        DVector::from_iterator(
            n,
            s.iter().zip(y).map(|(a, v)| {
                let e = (-p[0] * a).exp();
                p[2] + e * (p[3] * (p[1] * a).cos() + p[4] * (p[1] * a).sin()) - v
            }),
        )
    };
    let x0 = DVector::from_vec(vec![start.1, w0, lin[0], lin[1], lin[2]]);
    let fit = least_squares(residuals, x0, LmOptions::default());
    let p = &fit.params;
    if !fit.converged || p.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Fit(format!(
            "damped-cosine fit: {}",
            fit.termination
        )));
    }
    let (gamma, w) = (p[0], p[1].abs());
    let sign = p[1].signum();
    let amplitude = p[3].hypot(p[4]);
    // a cos(ws) + b sin(ws) = A cos(ws + φ) with φ = atan2(−b, a).
    let phase_s = (-sign * p[4]).atan2(p[3]);
    let omega = w / span;
    let tau = if gamma.abs() < 1e-9 {
        f64::INFINITY
    } else {
        span / gamma
    };
    let (sig_g, sig_w) = fit.covariance.as_ref().map_or((f64::NAN, f64::NAN), |c| {
        (c[(0, 0)].max(0.0).sqrt(), c[(1, 1)].max(0.0).sqrt())
    });
    Ok(DampedCosineFit {
        amplitude,
        tau,
        omega,
        phase: phase_s - omega * t0,
        offset: p[2],
        sigma_tau: if tau.is_finite() {
            tau * sig_g / gamma.abs()
        } else {
            f64::INFINITY
        },
        sigma_omega: sig_w / span,
        rms_residual: fit.residual_norm / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exponential_recovery() {
        let t = grid(600e-9, 61);
        let y: Vec<f64> = t.iter().map(|v| 0.9 * (-v / 148e-9).exp() + 0.02).collect();
        let f = fit_exponential(&t, &y, true).unwrap();
        assert!((f.tau - 148e-9).abs() < 1e-12, "{}", f.tau);
        assert!((f.offset - 0.02).abs() < 1e-9);
        let y0: Vec<f64> = t.iter().map(|v| 0.9 * (-v / 148e-9).exp()).collect();
        let g = fit_exponential(&t, &y0, false).unwrap();
        assert!((g.tau - 148e-9).abs() < 1e-12);
        assert!((g.eval(100e-9) - y0[10]).abs() < 1e-9);
    }

    #[test]
    fn damped_cosine_recovery() {
        let t = grid(400e-9, 201);
        let omega = crate::hz_to_rad(53e6);
        let y: Vec<f64> = t
            .iter()
            .map(|v| 0.4 * (-v / 296e-9).exp() * (omega * v + 0.3).cos() + 0.5)
            .collect();
        let f = fit_damped_cosine(&t, &y).unwrap();
        assert!((f.omega / omega - 1.0).abs() < 1e-8);
        assert!((f.tau / 296e-9 - 1.0).abs() < 1e-6, "{}", f.tau);
        assert!((f.amplitude - 0.4).abs() < 1e-8);
        assert!((f.phase - 0.3).abs() < 1e-6);
        assert!(
            (f.eval(123e-9)
                - (0.4 * (-123e-9f64 / 296e-9).exp() * (omega * 123e-9 + 0.3).cos() + 0.5))
                .abs()
                < 1e-8
        );
    }

    #[test]
    fn undamped_and_shifted_axis() {
        let t: Vec<f64> = grid(100e-9, 101).iter().map(|v| v + 20e-9).collect();
        let omega = crate::hz_to_rad(17e6);
        let y: Vec<f64> = t.iter().map(|v| 0.5 - 0.5 * (omega * v).cos()).collect();
        let f = fit_damped_cosine(&t, &y).unwrap();
        assert!((f.omega / omega - 1.0).abs() < 1e-8);
        assert!(f.tau.is_infinite() || f.tau > 1e-3);
    }

    #[test]
    fn bad_input() {
        assert!(fit_exponential(&[0.0, 1.0], &[1.0, 0.5], true).is_err());
        assert!(fit_damped_cosine(&[0.0; 10], &[1.0; 10]).is_err());
        assert!(fit_exponential(&[0.0, 1.0, 2.0, 3.0], &[1.0, f64::NAN, 0.2, 0.1], true).is_err());
    }
}

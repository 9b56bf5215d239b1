use super::{Result, TomographyError};
use crate::fit::{least_squares, LmOptions};
use crate::lindblad::EvolveOptions;
use crate::lindblad::{ControlSegment, DensityMatrix, Propagator, Schedule, SystemParams};
use crate::C64;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    /// Displacement per unit drive amplitude.
    pub scale: f64,
    pub sigma: f64,
    pub rms_residual: f64,
}

/// Measured `P_e` after displacing the thermal resonator by `|α|` and one
/// resonant swap `π/(2g)`.
pub fn post_swap_excitation(alpha_abs: &[f64], params: &SystemParams) -> Result<Vec<f64>> {
    let prop = Propagator::new(params)?;
    let rho = DensityMatrix::thermal(params.p_e_th, params.p_1_th, params.dim)?;
    let swap = std::f64::consts::FRAC_PI_2 / params.g.abs();
    let sched = Schedule::new(vec![ControlSegment::new(swap, 0.0, params.g)]);
    alpha_abs
        .par_iter()
        .map(|&a| {
            let r = rho.displaced(C64::new(a, 0.0))?;
            let traj = prop.evolve(&r, &sched, &[swap], &EvolveOptions::default())?;
            Ok(traj.p_e[0])
        })
        .collect()
}

/// Largest `|α|` allowed by the truncation guard for `dim` levels.
fn guard_limit(dim: usize) -> f64 {
    (4.0 + dim as f64).sqrt() - 2.0
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let h = grid[1] - grid[0];
    let last = grid.len() - 1;
    let pos = (x / h).clamp(0.0, last as f64);
    let i = (pos.floor() as usize).min(last - 1);
    let f = pos - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Fits the amplitude-to-displacement scale of a sweep of drive amplitudes
/// against measured post-swap `P_e`, using the master-equation model.
pub fn calibrate_displacement(
    amplitudes: &[f64],
    p_e: &[f64],
    params: &SystemParams,
) -> Result<CalibrationFit> {
    if amplitudes.len() != p_e.len() || amplitudes.len() < 5 {
        return Err(TomographyError::Argument(
            "need at least 5 matching (amplitude, P_e) pairs".into(),
        ));
    }
    if amplitudes.iter().chain(p_e).any(|v| !v.is_finite()) || amplitudes.iter().any(|a| *a < 0.0) {
        return Err(TomographyError::Argument(
            "amplitudes must be finite and nonnegative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..amplitudes.len()).collect();
    order.sort_by(|&i, &j| amplitudes[i].total_cmp(&amplitudes[j]));
    let (lo, hi) = p_e
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let k_max = order.iter().position(|&i| p_e[i] == hi).unwrap();
    let after_peak = order[k_max..]
        .iter()
        .map(|&i| p_e[i])
        .fold(f64::INFINITY, f64::min);
    let first = p_e[order[0]];
    if !(first < lo + 0.2 * (hi - lo)) || !(hi - after_peak > 0.1 * (hi - lo)) || !(hi - lo > 0.05)
    {
        return Err(TomographyError::Identifiability(
            "sweep must run from near zero excitation to beyond the first maximum".into(),
        ));
    }

    let r_max = 0.999 * guard_limit(params.dim);
    let grid: Vec<f64> = (0..=240).map(|i| r_max * i as f64 / 240.0).collect();
    let model = post_swap_excitation(&grid, params)?;
    let peak = (1..model.len() - 1)
        .find(|&i| model[i] >= model[i - 1] && model[i] > model[i + 1])
        .ok_or_else(|| {
            TomographyError::Identifiability(
                "model has no maximum inside the truncation guard".into(),
            )
        })?;
    let a_peak = amplitudes[order[k_max]];
    if !(a_peak > 0.0) {
        return Err(TomographyError::Identifiability(
            "maximum at zero amplitude".into(),
        ));
    }
    let s0 = grid[peak] / a_peak;

    let residuals = |p: &DVector<f64>| {
        let s = p[0].exp();
        DVector::from_iterator(
            amplitudes.len(),
            amplitudes
                .iter()
                .zip(p_e)
                .map(|(a, y)| interpolate(&grid, &model, s * a) - y),
        )
    };
    let fit = least_squares(
        residuals,
        DVector::from_vec(vec![s0.ln()]),
        LmOptions::default(),
    );
    if !fit.converged {
        return Err(TomographyError::Fit(format!(
            "calibration fit: {}",
            fit.termination
        )));
    }
    let scale = fit.params[0].exp();
    Ok(CalibrationFit {
        scale,
        sigma: fit
            .covariance
            .map_or(f64::NAN, |c| scale * c[(0, 0)].max(0.0).sqrt()),
        rms_residual: fit.residual_norm / (amplitudes.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_scale_and_gauge() {
        let params = SystemParams::default();
        let scale = 0.042;
        let amps: Vec<f64> = (0..30).map(|i| i as f64 * 1.3).collect();
        let alphas: Vec<f64> = amps.iter().map(|a| a * scale).collect();
        let p = post_swap_excitation(&alphas, &params).unwrap();
        let fit = calibrate_displacement(&amps, &p, &params).unwrap();
        assert!((fit.scale / scale - 1.0).abs() < 0.01, "{}", fit.scale);
        let doubled: Vec<f64> = amps.iter().map(|a| 2.0 * a).collect();
        let fit2 = calibrate_displacement(&doubled, &p, &params).unwrap();
        assert!((fit2.scale * 2.0 / fit.scale - 1.0).abs() < 1e-6);
        assert_eq!(p[0], post_swap_excitation(&[0.0], &params).unwrap()[0]);
    }

    #[test]
    fn narrow_sweep_is_rejected() {
        let params = SystemParams::default();
        let amps: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let alphas: Vec<f64> = amps.iter().map(|a| a * 0.05).collect();
        let p = post_swap_excitation(&alphas, &params).unwrap();
        assert!(matches!(
            calibrate_displacement(&amps, &p, &params),
            Err(TomographyError::Identifiability(_))
        ));
    }
}

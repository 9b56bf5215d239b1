use super::{Result, TomographyError};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Peak-to-peak amplitude of a sinusoidal Rabi trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiAmplitude {
    pub amplitude: f64,
    pub sigma: f64,
    pub offset: f64,
}

/// Fits `y = c + b cos(2πx/P) + d sin(2πx/P)` by linear least squares and
/// returns the peak-to-peak amplitude `2√(b² + d²)`.
pub fn fit_rabi_amplitude(x: &[f64], y: &[f64], period: f64) -> Result<RabiAmplitude> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(TomographyError::Argument(
            "need at least 4 matching points".into(),
        ));
    }
    if !(period > 0.0) || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(TomographyError::Argument(
            "bad period or non-finite data".into(),
        ));
    }
    let w = std::f64::consts::TAU / period;
    let a = DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (w * x[i]).cos(),
        _ => (w * x[i]).sin(),
    });
    let yv = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let inv = ata
        .try_inverse()
        .ok_or_else(|| TomographyError::Fit("sampling does not resolve the oscillation".into()))?;
    let coef = &inv * a.transpose() * &yv;
    let rss = (&a * &coef - &yv).norm_squared();
    let s2 = rss / (x.len() - 3) as f64;
    let (b, d) = (coef[1], coef[2]);
    let r = b.hypot(d);
    let amplitude = 2.0 * r;
    // First-order propagation through 2√(b² + d²).
    let sigma = if r > 0.0 {
        let g = [b / r, d / r];
        let var = s2
            * (g[0] * g[0] * inv[(1, 1)]
                + 2.0 * g[0] * g[1] * inv[(1, 2)]
                + g[1] * g[1] * inv[(2, 2)]);
        2.0 * var.max(0.0).sqrt()
    } else {
        2.0 * (s2 * inv[(1, 1)]).sqrt()
    };
    Ok(RabiAmplitude {
        amplitude,
        sigma,
        offset: coef[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiEstimate {
    pub p: f64,
    pub sigma: f64,
}

/// Excited population `A_e / (A_e + A_g)` with first-order uncertainty.
pub fn rabi_population_estimate(
    a_e: f64,
    sigma_e: f64,
    a_g: f64,
    sigma_g: f64,
) -> Result<RabiEstimate> {
    if [a_e, sigma_e, a_g, sigma_g].iter().any(|v| !v.is_finite()) || sigma_e < 0.0 || sigma_g < 0.0
    {
        return Err(TomographyError::Argument(
            "amplitudes and uncertainties must be finite".into(),
        ));
    }
    let s = a_e + a_g;
    if s == 0.0 {
        return Err(TomographyError::Argument(
            "A_e + A_g = 0; estimate undefined".into(),
        ));
    }
    if !(a_g > 0.0) {
        return Err(TomographyError::Argument(format!(
            "A_g must be positive, got {a_g}"
        )));
    }
    let p = a_e / s;
    let sigma = ((a_g * sigma_e).powi(2) + (a_e * sigma_g).powi(2)).sqrt() / (s * s);
    Ok(RabiEstimate { p, sigma })
}

/// Synthetic Rabi trace `offset + (A/2)(1 − cos πx)` over `x ∈ [0, 2]` with
/// Gaussian noise drawn from stream `stream` of the seeded generator.
pub fn synthesize_rabi_trace(
    amplitude: f64,
    offset: f64,
    points: usize,
    noise: f64,
    seed: u64,
    stream: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let normal = Normal::new(0.0, noise).map_err(|e| TomographyError::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let x: Vec<f64> = (0..points)
        .map(|i| 2.0 * i as f64 / (points.max(2) - 1) as f64)
        .collect();
    let y = x
        .iter()
        .map(|v| {
            offset
                + 0.5 * amplitude * (1.0 - (std::f64::consts::PI * v).cos())
                + normal.sample(&mut rng)
        })
        .collect();
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_values() {
        let r = rabi_population_estimate(0.0, 0.001, 0.9, 0.001).unwrap();
        assert_eq!(r.p, 0.0);
        let r = rabi_population_estimate(1.0, 0.0, 3.0, 0.0).unwrap();
        assert!((r.p - 0.25).abs() < 1e-15 && r.sigma == 0.0);
        assert!(rabi_population_estimate(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn amplitude_fit_is_exact_without_noise() {
        let (x, y) = synthesize_rabi_trace(0.3, 0.1, 101, 0.0, 1, 0).unwrap_or_else(|_| {
            let x: Vec<f64> = (0..101).map(|i| i as f64 / 50.0).collect();
            let y = x
                .iter()
                .map(|v| 0.1 + 0.15 * (1.0 - (std::f64::consts::PI * v).cos()))
                .collect();
            (x, y)
        });
        let f = fit_rabi_amplitude(&x, &y, 2.0).unwrap();
        assert!((f.amplitude - 0.3).abs() < 1e-12);
        assert!((f.offset - 0.25).abs() < 1e-12);
    }

    #[test]
    fn thermometry_recovers_population() {
        let contrast = 0.97;
        for (p, seed) in [(0.0169, 11), (0.0049, 12)] {
            let (x, ye) = synthesize_rabi_trace(contrast * p, 0.02, 101, 7e-4, seed, 0).unwrap();
            let (_, yg) =
                synthesize_rabi_trace(contrast * (1.0 - p), 0.02, 101, 7e-4, seed, 1).unwrap();
            let ae = fit_rabi_amplitude(&x, &ye, 2.0).unwrap();
            let ag = fit_rabi_amplitude(&x, &yg, 2.0).unwrap();
            let est =
                rabi_population_estimate(ae.amplitude, ae.sigma, ag.amplitude, ag.sigma).unwrap();
            assert!((est.p - p).abs() < 1e-3, "{est:?}");
            assert!(est.sigma > 5e-5 && est.sigma < 5e-4, "{est:?}");
        }
    }
}

use super::{Result, TomographyError};
use crate::lindblad::displacement_operator;
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_2_PI;
use std::io::Write;

/// `W = (2/π) Σ (−1)ⁿ P_n` for the populations of the state displaced by `−α`.
pub fn wigner_point(p_n: &[f64]) -> Result<f64> {
    if p_n.iter().any(|p| !p.is_finite() || *p < -1e-9) {
        return Err(TomographyError::Argument(
            "populations must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = p_n.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(TomographyError::Argument(format!(
            "populations sum to {total}"
        )));
    }
    Ok(FRAC_2_PI
        * p_n
            .iter()
            .enumerate()
            .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
            .sum::<f64>())
}

/// Diagonal of `D(−α) ρ D(−α)†` for a resonator density matrix.
pub fn displaced_populations(rho: &DMatrix<C64>, alpha: C64) -> Result<Vec<f64>> {
    let d = displacement_operator(-alpha, rho.nrows())?;
    let r = &d * rho * d.adjoint();
    Ok((0..rho.nrows()).map(|n| r[(n, n)].re).collect())
}

/// Wigner function of a resonator state at `α`.
pub fn wigner_from_state(rho: &DMatrix<C64>, alpha: C64) -> Result<f64> {
    let mut p = displaced_populations(rho, alpha)?;
    // Truncated displacements lose a little norm at the edge of the space.
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v = v.max(0.0) / s);
    wigner_point(&p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerSample {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub w: f64,
}

/// Writes `alpha_re,alpha_im,w`.
pub fn write_wigner_csv<W: Write>(samples: &[WignerSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "alpha_re,alpha_im,w")?;
    for s in samples {
        writeln!(w, "{:.6},{:.6},{:.10}", s.alpha_re, s.alpha_im, s.w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_values() {
        let mut p = vec![0.0; 10];
        p[0] = 1.0;
        assert!((wigner_point(&p).unwrap() - std::f64::consts::FRAC_2_PI).abs() < 1e-12);
        p[0] = 0.0;
        p[1] = 1.0;
        assert!((wigner_point(&p).unwrap() + FRAC_2_PI).abs() < 1e-15);
        let even = [0.25, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25];
        assert!((wigner_point(&even).unwrap() - FRAC_2_PI).abs() < 1e-15);
        assert!(wigner_point(&[0.5, 0.2]).is_err());
    }

    #[test]
    fn fock_one_is_negative_at_origin() {
        let mut rho = DMatrix::zeros(10, 10);
        rho[(1, 1)] = C64::new(1.0, 0.0);
        assert!(wigner_from_state(&rho, C64::new(0.0, 0.0)).unwrap() < -0.6);
        let far = wigner_from_state(&rho, C64::new(1.5, 0.0)).unwrap();
        assert!(far.abs() < 0.2);
    }

    #[test]
    fn csv_format() {
        let mut out = Vec::new();
        write_wigner_csv(
            &[WignerSample {
                alpha_re: 0.5,
                alpha_im: -0.5,
                w: 0.1,
            }],
            &mut out,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "alpha_re,alpha_im,w\n0.500000,-0.500000,0.1000000000\n"
        );
    }
}

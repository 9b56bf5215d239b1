//! Jaynes-Cummings master-equation simulator in the resonator rotating frame.
//!
//! The composite space is qubit ⊗ resonator with qubit-major ordering: index
//! `q * dim + n`, `q = 0` for `|g⟩` and `q = 1` for `|e⟩`. Energies are in
//! rad/s with ħ = 1.

mod evolve;
mod operators;
pub mod protocols;
mod sequence;
mod state;

pub use evolve::{evolve, ControlSegment, EvolveOptions, Propagator, Schedule, Trajectory};
pub use operators::{
    annihilation, build_hamiltonian, collapse_operators, displacement_operator, CollapseOperator,
    SparseOp,
};
pub use sequence::{
    bloch_from_tomography, rotation_operator, run_sequence, run_sequence_from, Axis, BlochVector,
    Measurement, MeasurementRecord, PulseSequence, Segment, TomoPulse,
};
pub use state::{displacement, DensityMatrix};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LindbladError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("displacement |α| = {alpha:.3} violates the truncation guard for {dim} levels")]
    Truncation { alpha: f64, dim: usize },
    #[error("integration failed at t = {time:.4e} s: {reason}")]
    Convergence {
        time: f64,
        reason: String,
        partial: Box<Trajectory>,
    },
}

pub type Result<T> = std::result::Result<T, LindbladError>;

/// Quantum-dynamics parameters. Rates and couplings in rad/s, times in s.
/// Infinite lifetimes serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Peak coupling used by coupling segments that do not set their own.
    pub g: f64,
    /// Default qubit-resonator detuning.
    pub delta: f64,
    #[serde(with = "crate::serde_inf")]
    pub t1: f64,
    #[serde(with = "crate::serde_inf")]
    pub t2_ramsey: f64,
    #[serde(with = "crate::serde_inf")]
    pub t1r: f64,
    /// Resonator levels.
    pub dim: usize,
    pub p_e_th: f64,
    pub p_1_th: f64,
    pub visibility: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g: crate::hz_to_rad(7.3e6),
            delta: 0.0,
            t1: 20e-6,
            t2_ramsey: 2e-6,
            t1r: 148e-9,
            dim: 10,
            p_e_th: 0.0169,
            p_1_th: 0.0049,
            visibility: 0.97,
        }
    }
}

impl SystemParams {
    /// Noise-free, unit-visibility, zero-temperature variant.
    pub fn ideal(g: f64, dim: usize) -> Self {
        Self {
            g,
            delta: 0.0,
            t1: f64::INFINITY,
            t2_ramsey: f64::INFINITY,
            t1r: f64::INFINITY,
            dim,
            p_e_th: 0.0,
            p_1_th: 0.0,
            visibility: 1.0,
        }
    }

    /// Pure dephasing time `(1/T2R − 1/(2 T1))⁻¹`; infinite when the Ramsey
    /// time is fully accounted for by energy decay.
    pub fn t_phi(&self) -> Result<f64> {
        let rate = 1.0 / self.t2_ramsey - 0.5 / self.t1;
        if rate < -1e-12 * (1.0 / self.t2_ramsey).max(1.0) {
            return Err(LindbladError::Argument(format!(
                "T2R = {:e} exceeds 2 T1 = {:e}",
                self.t2_ramsey,
                2.0 * self.t1
            )));
        }
        if rate <= 1e-12 * (1.0 / self.t2_ramsey) || rate == 0.0 {
            Ok(f64::INFINITY)
        } else {
            Ok(1.0 / rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LindbladError::Argument(m));
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        for (name, v) in [
            ("t1", self.t1),
            ("t2_ramsey", self.t2_ramsey),
            ("t1r", self.t1r),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("p_e_th", self.p_e_th), ("p_1_th", self.p_1_th)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return bad(format!(
                "visibility must lie in (0, 1], got {}",
                self.visibility
            ));
        }
        if !self.g.is_finite() || !self.delta.is_finite() {
            return bad("g and delta must be finite".into());
        }
        self.t_phi()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dephasing_time_formula() {
        let p = SystemParams::default();
        let expect = 1.0 / (1.0 / 2e-6 - 1.0 / 40e-6);
        assert!((p.t_phi().unwrap() - expect).abs() / expect < 1e-12);
        let q = SystemParams {
            t2_ramsey: 40e-6,
            ..p
        };
        assert!(q.t_phi().unwrap().is_infinite());
        let r = SystemParams {
            t2_ramsey: 50e-6,
            ..p
        };
        assert!(r.validate().is_err());
    }

    #[test]
    fn infinite_lifetimes_round_trip_as_null() {
        let p = SystemParams::ideal(1.0, 4);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"t1\":null"));
        let back: SystemParams = serde_json::from_str(&text).unwrap();
        assert!(back.t1.is_infinite() && back.t1r.is_infinite());
    }
}

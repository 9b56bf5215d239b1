//! Modeling chain for a superconducting qubit coupled to a surface acoustic
//! wave resonator.
//!
//! - [`saw`]: coupling-of-modes (P-matrix) model of the SAW resonator and its
//!   Butterworth-van Dyke equivalent circuit.
//! - [`circuit`]: linear lumped-element model of the transmon, the rf-SQUID
//!   tunable coupler and the chip-to-chip mutual inductance.
//! - [`lindblad`]: Jaynes-Cummings master-equation simulator with pulse
//!   sequences and qubit tomography.
//! - [`tomography`]: phonon-number fitting, Wigner functions, density-matrix
//!   reconstruction, fidelities and the calibration/thermometry estimators.
//! - [`analysis`]: curve fits shared by the figure-reproduction workflows.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuit;
pub mod fit;
pub mod lindblad;
pub mod saw;
pub mod tomography;

pub use num_complex::Complex64 as C64;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Converts a frequency in Hz to angular frequency in rad/s.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}

/// Serde adapter for lifetimes where `null` stands for an infinite value.
pub(crate) mod serde_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

//! Pulse sequences for the standard qubit-resonator experiments.

use super::sequence::{Axis, PulseSequence, Segment};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Timing shared by the preset sequences (s, rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    /// Rise and fall time of swap pulses.
    pub ramp: f64,
    /// Qubit detuning while the coupling is off.
    pub idle_delta: f64,
    /// Idle inserted after each qubit rotation and around swaps while the
    /// qubit is retuned.
    pub buffer: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            ramp: 5e-9,
            idle_delta: crate::hz_to_rad(53e6),
            buffer: 0.0,
        }
    }
}

/// Length of a ramped swap: the flat top plus one ramp carries the area `π/2`.
pub fn swap_duration(g: f64, ramp: f64) -> f64 {
    FRAC_PI_2 / g.abs() + ramp
}

fn x_pi() -> Segment {
    rotation(PI, Axis::X)
}

fn rotation(angle: f64, axis: Axis) -> Segment {
    Segment::Rotation {
        angle,
        axis,
        phase: 0.0,
    }
}

fn measure() -> Segment {
    Segment::Measure { tomography: false }
}

fn idle(duration: f64) -> Option<Segment> {
    (duration > 0.0).then_some(Segment::Idle { duration })
}

/// Resonant swap bracketed by retuning: detune to 0, couple, detune back.
fn swap(g: f64, t: &Timing) -> Vec<Segment> {
    let mut v = vec![Segment::SetDetuning {
        delta: 0.0,
        duration: 0.0,
    }];
    v.push(Segment::CouplingOn {
        g: Some(g),
        duration: swap_duration(g, t.ramp),
        ramp: t.ramp,
    });
    v.push(Segment::SetDetuning {
        delta: t.idle_delta,
        duration: t.buffer,
    });
    v
}

fn start(t: &Timing) -> Segment {
    Segment::SetDetuning {
        delta: t.idle_delta,
        duration: 0.0,
    }
}

/// Excite, then a rectangular coupling pulse of length `tau` at detuning
/// `delta`.
pub fn chevron(delta: f64, tau: f64, g: f64) -> PulseSequence {
    PulseSequence::new(vec![
        x_pi(),
        Segment::SetDetuning {
            delta,
            duration: 0.0,
        },
        Segment::CouplingOn {
            g: Some(g),
            duration: tau,
            ramp: 0.0,
        },
        measure(),
    ])
}

/// Swap an excitation in, wait `delay`, swap it back and measure.
pub fn t1r(delay: f64, g: f64, t: &Timing) -> PulseSequence {
    let mut v = vec![start(t), x_pi()];
    v.extend(idle(t.buffer));
    v.extend(swap(g, t));
    v.extend(idle(delay));
    v.extend(swap(g, t));
    v.push(measure());
    PulseSequence::new(v)
}

/// Swap a `|g⟩ − i|e⟩` superposition in, wait `delay` with the qubit at the
/// idle detuning, swap back and finish with a `π/2` tomography pulse about
/// `axis`. Rotation phases follow the qubit drive frame.
pub fn t2r(delay: f64, g: f64, axis: Axis, t: &Timing) -> PulseSequence {
    let mut v = vec![start(t), rotation(FRAC_PI_2, Axis::X)];
    v.extend(idle(t.buffer));
    v.extend(swap(g, t));
    v.extend(idle(delay));
    v.extend(swap(g, t));
    v.push(rotation(FRAC_PI_2, axis));
    v.push(measure());
    PulseSequence {
        segments: v,
        drive_detuning: t.idle_delta,
    }
}

/// Two excite-and-swap rounds, the second interaction truncated to `tau`.
pub fn fock2(tau: f64, g: f64, t: &Timing) -> PulseSequence {
    let mut v = vec![start(t), x_pi()];
    v.extend(idle(t.buffer));
    v.extend(swap(g, t));
    v.push(x_pi());
    v.extend(idle(t.buffer));
    v.push(Segment::SetDetuning {
        delta: 0.0,
        duration: 0.0,
    });
    v.push(Segment::CouplingOn {
        g: Some(g),
        duration: tau,
        ramp: 0.0,
    });
    v.push(measure());
    PulseSequence::new(v)
}

/// Prepares `|1⟩` (`superposition = false`) or `(|0⟩ + |1⟩)/√2` in the
/// resonator by one swap, then waits `settle` before the state is probed.
pub fn prepare(superposition: bool, g: f64, settle: f64, t: &Timing) -> PulseSequence {
    let angle = if superposition { FRAC_PI_2 } else { PI };
    let mut v = vec![start(t), rotation(angle, Axis::Y)];
    v.extend(idle(t.buffer));
    v.extend(swap(g, t));
    v.extend(idle(settle));
    PulseSequence {
        segments: v,
        drive_detuning: t.idle_delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{run_sequence, SystemParams};

    #[test]
    fn ramped_swap_length() {
        let g = crate::hz_to_rad(7.3e6);
        let d = swap_duration(g, 5e-9);
        assert!((d - 39.25e-9).abs() < 0.05e-9);
    }

    #[test]
    fn ideal_t1r_returns_excitation() {
        let g = crate::hz_to_rad(7.3e6);
        let p = SystemParams::ideal(g, 4);
        let rec = run_sequence(&t1r(50e-9, g, &Timing::default()), &p).unwrap();
        assert!((rec.measurements[0].p_e - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sequences_validate() {
        let g = 1e7;
        let t = Timing::default();
        for s in [
            chevron(0.0, 1e-8, g),
            t2r(1e-8, g, Axis::Y, &t),
            fock2(2e-8, g, &t),
            prepare(true, g, 0.0, &t),
        ] {
            s.validate().unwrap();
        }
    }
}

use super::evolve::{ControlSegment, EvolveOptions, Propagator};
use super::{DensityMatrix, LindbladError, Result, SystemParams};
use crate::C64;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
}

impl Axis {
    fn phase(self) -> f64 {
        match self {
            Axis::X => 0.0,
            Axis::Y => FRAC_PI_2,
        }
    }
}

/// One step of a pulse sequence. Rates in rad/s, times in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Segment {
    /// Instantaneous qubit rotation about an equatorial axis.
    Rotation {
        angle: f64,
        #[serde(default)]
        axis: Axis,
        #[serde(default)]
        phase: f64,
    },
    /// Sets the detuning for all later segments, then idles for `duration`.
    SetDetuning {
        delta: f64,
        #[serde(default)]
        duration: f64,
    },
    /// Coupling pulse at the current detuning; `g` defaults to the system value.
    CouplingOn {
        #[serde(default)]
        g: Option<f64>,
        duration: f64,
        #[serde(default)]
        ramp: f64,
    },
    Displacement {
        alpha_re: f64,
        alpha_im: f64,
    },
    Idle {
        duration: f64,
    },
    Measure {
        #[serde(default)]
        tomography: bool,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
    /// Detuning of the qubit drive from the resonator frame (rad/s). Rotation
    /// phases advance by `drive_detuning · t`.
    #[serde(default)]
    pub drive_detuning: f64,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self {
            segments,
            drive_detuning: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, m: &str| Err(LindbladError::Argument(format!("segment {i}: {m}")));
        if !self.drive_detuning.is_finite() {
            return Err(LindbladError::Argument("non-finite drive detuning".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            match *s {
                Segment::Rotation { angle, phase, .. } => {
                    if !(angle.abs() <= 2.0 * PI) || !phase.is_finite() {
                        return bad(i, "rotation angle must satisfy |angle| ≤ 2π");
                    }
                }
                Segment::SetDetuning { delta, duration } => {
                    if !delta.is_finite() || !(duration >= 0.0 && duration.is_finite()) {
                        return bad(i, "bad detuning or duration");
                    }
                }
                Segment::CouplingOn { g, duration, ramp } => {
                    if !(duration >= 0.0 && duration.is_finite())
                        || !(ramp >= 0.0 && ramp.is_finite())
                    {
                        return bad(i, "bad duration or ramp");
                    }
                    if g.is_some_and(|g| !g.is_finite()) {
                        return bad(i, "non-finite coupling");
                    }
                }
                Segment::Displacement { alpha_re, alpha_im } => {
                    if !alpha_re.is_finite() || !alpha_im.is_finite() {
                        return bad(i, "non-finite displacement");
                    }
                }
                Segment::Idle { duration } => {
                    if !(duration >= 0.0 && duration.is_finite()) {
                        return bad(i, "bad duration");
                    }
                }
                Segment::Measure { .. } => {}
            }
        }
        Ok(())
    }
}

/// `exp(−iθ/2 (cos φ σx + sin φ σy))` in the `(g, e)` basis.
pub fn rotation_operator(angle: f64, phase: f64) -> Matrix2<C64> {
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    let off = |p: f64| C64::new(0.0, -s) * C64::from_polar(1.0, p);
    Matrix2::new(C64::new(c, 0.0), off(-phase), off(phase), C64::new(c, 0.0))
}

/// Pre-measurement pulses of the qubit tomography set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TomoPulse {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "X/2")]
    XHalf,
    #[serde(rename = "-X/2")]
    XHalfNeg,
    #[serde(rename = "Y/2")]
    YHalf,
    #[serde(rename = "-Y/2")]
    YHalfNeg,
    #[serde(rename = "X")]
    XPi,
    #[serde(rename = "-X")]
    XPiNeg,
    #[serde(rename = "Y")]
    YPi,
    #[serde(rename = "-Y")]
    YPiNeg,
}

impl TomoPulse {
    pub const ALL: [TomoPulse; 9] = [
        TomoPulse::Identity,
        TomoPulse::XHalf,
        TomoPulse::XHalfNeg,
        TomoPulse::YHalf,
        TomoPulse::YHalfNeg,
        TomoPulse::XPi,
        TomoPulse::XPiNeg,
        TomoPulse::YPi,
        TomoPulse::YPiNeg,
    ];

    /// `(angle, phase)`; `None` for the identity.
    pub fn rotation(self) -> Option<(f64, f64)> {
        use TomoPulse::*;
        match self {
            Identity => None,
            XHalf => Some((FRAC_PI_2, 0.0)),
            XHalfNeg => Some((-FRAC_PI_2, 0.0)),
            YHalf => Some((FRAC_PI_2, FRAC_PI_2)),
            YHalfNeg => Some((-FRAC_PI_2, FRAC_PI_2)),
            XPi => Some((PI, 0.0)),
            XPiNeg => Some((-PI, 0.0)),
            YPi => Some((PI, FRAC_PI_2)),
            YPiNeg => Some((-PI, FRAC_PI_2)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

impl BlochVector {
    /// Length over the available components.
    pub fn length(&self) -> f64 {
        [self.x, self.y, self.z]
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Bloch vector from tomography outcomes, with `⟨σ⟩ = 2P − 1` applied to the
/// symmetric combinations
/// `Y: [P(−X/2) + 1 − P(X/2)] / 2`, `X: [P(Y/2) + 1 − P(−Y/2)] / 2` and
/// `Z: mean of P(I) and 1 − P(π)`. A component whose complementary pulse is
/// missing is an error; a component with no pulses at all is `None`.
pub fn bloch_from_tomography(p: &BTreeMap<TomoPulse, f64>) -> Result<BlochVector> {
    use TomoPulse::*;
    for (k, v) in p {
        if !v.is_finite() {
            return Err(LindbladError::Argument(format!(
                "non-finite probability for {k:?}"
            )));
        }
    }
    let pair = |plus: TomoPulse, minus: TomoPulse| -> Result<Option<(f64, f64)>> {
        match (p.get(&plus), p.get(&minus)) {
            (Some(a), Some(b)) => Ok(Some((*a, *b))),
            (None, None) => Ok(None),
            _ => Err(LindbladError::Argument(format!(
                "tomography pulse {plus:?} needs its complement {minus:?}"
            ))),
        }
    };
    let y = pair(XHalfNeg, XHalf)?.map(|(a, b)| 2.0 * (0.5 * (a + 1.0 - b)) - 1.0);
    let x = pair(YHalf, YHalfNeg)?.map(|(a, b)| 2.0 * (0.5 * (a + 1.0 - b)) - 1.0);
    let mut pi_terms = Vec::new();
    for (a, b) in [(XPi, XPiNeg), (YPi, YPiNeg)] {
        if let Some((u, v)) = pair(a, b)? {
            pi_terms.extend([1.0 - u, 1.0 - v]);
        }
    }
    let pi_mean =
        (!pi_terms.is_empty()).then(|| pi_terms.iter().sum::<f64>() / pi_terms.len() as f64);
    // The unrotated outcome carries the same weight as the π-pulse mean.
    let z = match (p.get(&Identity).copied(), pi_mean) {
        (Some(a), Some(b)) => Some(0.5 * (a + b)),
        (a, b) => a.or(b),
    }
    .map(|m| 2.0 * m - 1.0);
    Ok(BlochVector { x, y, z })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Time since the start of the sequence (s).
    pub time: f64,
    /// Visibility-scaled excited population.
    pub p_e: f64,
    pub populations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tomography: Option<BTreeMap<TomoPulse, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bloch: Option<BlochVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub measurements: Vec<Measurement>,
    pub duration: f64,
    #[serde(skip)]
    pub final_state: Option<DensityMatrix>,
}

/// Runs `seq` from the thermal state of `params`.
pub fn run_sequence(seq: &PulseSequence, params: &SystemParams) -> Result<MeasurementRecord> {
    let rho0 = DensityMatrix::thermal(params.p_e_th, params.p_1_th, params.dim)?;
    run_sequence_from(&rho0, seq, params, &EvolveOptions::default())
}

/// Runs `seq` from an explicit initial state. With `check_convergence` the
/// whole sequence is repeated at half the step and measured `P_e` compared.
pub fn run_sequence_from(
    rho0: &DensityMatrix,
    seq: &PulseSequence,
    params: &SystemParams,
    opts: &EvolveOptions,
) -> Result<MeasurementRecord> {
    let prop = Propagator::new(params)?;
    run_with(&prop, rho0, seq, opts)
}

pub(crate) fn run_with(
    prop: &Propagator,
    rho0: &DensityMatrix,
    seq: &PulseSequence,
    opts: &EvolveOptions,
) -> Result<MeasurementRecord> {
    seq.validate()?;
    let rec = run_once(prop, rho0, seq, opts.dt)?;
    if opts.check_convergence {
        let fine = run_once(prop, rho0, seq, opts.dt / 2.0)?;
        let worst = rec
            .measurements
            .iter()
            .zip(&fine.measurements)
            .map(|(a, b)| (a.p_e - b.p_e).abs())
            .fold(0.0, f64::max);
        if worst > opts.convergence_tol {
            return Err(LindbladError::Convergence {
                time: rec.duration,
                reason: format!("step halving changed P_e by {worst:e}"),
                partial: Box::default(),
            });
        }
    }
    Ok(rec)
}

fn run_once(
    prop: &Propagator,
    rho0: &DensityMatrix,
    seq: &PulseSequence,
    dt: f64,
) -> Result<MeasurementRecord> {
    let params = *prop.params();
    let mut buf = prop.state_to_buffer(rho0)?;
    let mut t = 0.0;
    let mut delta = params.delta;
    let mut out = Vec::new();
    let idle = |buf: &mut Vec<C64>, delta: f64, duration: f64| {
        if duration > 0.0 {
            prop.run_segment(buf, &ControlSegment::new(duration, delta, 0.0), dt);
        }
    };
    for seg in &seq.segments {
        match *seg {
            Segment::Rotation { angle, axis, phase } => {
                let phi = axis.phase() + phase + seq.drive_detuning * t;
                let rho = prop
                    .buffer_to_state(&buf)
                    .apply_qubit_unitary(&rotation_operator(angle, phi))?;
                buf = prop.state_to_buffer(&rho)?;
            }
            Segment::SetDetuning { delta: d, duration } => {
                delta = d;
                idle(&mut buf, delta, duration);
                t += duration;
            }
            Segment::CouplingOn { g, duration, ramp } => {
                let g = g.unwrap_or(params.g);
                prop.run_segment(
                    &mut buf,
                    &ControlSegment::new(duration, delta, g).with_ramp(ramp),
                    dt,
                );
                t += duration;
            }
            Segment::Displacement { alpha_re, alpha_im } => {
                let rho = prop
                    .buffer_to_state(&buf)
                    .displaced(C64::new(alpha_re, alpha_im))?;
                buf = prop.state_to_buffer(&rho)?;
            }
            Segment::Idle { duration } => {
                idle(&mut buf, delta, duration);
                t += duration;
            }
            Segment::Measure { tomography } => {
                let rho = prop.buffer_to_state(&buf);
                if buf.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(LindbladError::Convergence {
                        time: t,
                        reason: "non-finite state".into(),
                        partial: Box::default(),
                    });
                }
                let (tomo, bloch) = if tomography {
                    let mut map = BTreeMap::new();
                    for pulse in TomoPulse::ALL {
                        let p = match pulse.rotation() {
                            None => rho.excited_population(),
                            Some((angle, phase)) => {
                                let u = rotation_operator(angle, phase + seq.drive_detuning * t);
                                rho.apply_qubit_unitary(&u)?.excited_population()
                            }
                        };
                        map.insert(pulse, params.visibility * p);
                    }
                    let b = bloch_from_tomography(&map)?;
                    (Some(map), Some(b))
                } else {
                    (None, None)
                };
                out.push(Measurement {
                    time: t,
                    p_e: params.visibility * rho.excited_population(),
                    populations: rho.resonator_populations(),
                    tomography: tomo,
                    bloch,
                });
            }
        }
    }
    Ok(MeasurementRecord {
        measurements: out,
        duration: t,
        final_state: Some(prop.buffer_to_state(&buf)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn qubit_state(psi_g: C64, psi_e: C64) -> DensityMatrix {
        let mut psi = DVector::zeros(4);
        psi[0] = psi_g;
        psi[2] = psi_e;
        DensityMatrix::pure(&psi, 2, 2).unwrap()
    }

    fn ideal_tomo(rho: &DensityMatrix) -> BTreeMap<TomoPulse, f64> {
        TomoPulse::ALL
            .iter()
            .map(|&p| {
                let v = match p.rotation() {
                    None => rho.excited_population(),
                    Some((a, ph)) => rho
                        .apply_qubit_unitary(&rotation_operator(a, ph))
                        .unwrap()
                        .excited_population(),
                };
                (p, v)
            })
            .collect()
    }

    #[test]
    fn ground_state_bloch() {
        let mut m = BTreeMap::new();
        for p in [
            TomoPulse::XHalf,
            TomoPulse::XHalfNeg,
            TomoPulse::YHalf,
            TomoPulse::YHalfNeg,
        ] {
            m.insert(p, 0.5);
        }
        m.insert(TomoPulse::Identity, 0.0);
        let b = bloch_from_tomography(&m).unwrap();
        assert_eq!((b.x, b.y, b.z), (Some(0.0), Some(0.0), Some(-1.0)));
    }

    #[test]
    fn tomography_matches_reduced_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cases = [
            (C64::new(s, 0.0), C64::new(0.0, -s)),
            (C64::new(s, 0.0), C64::new(s, 0.0)),
            (C64::new(0.6, 0.0), C64::new(0.0, 0.8)),
            (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        ];
        for (a, b) in cases {
            let rho = qubit_state(a, b);
            let v = bloch_from_tomography(&ideal_tomo(&rho)).unwrap();
            let r = rho.bloch();
            assert!((v.x.unwrap() - r[0]).abs() < 1e-12);
            assert!((v.y.unwrap() - r[1]).abs() < 1e-12);
            assert!((v.z.unwrap() - r[2]).abs() < 1e-12);
        }
        let minus_y = bloch_from_tomography(&ideal_tomo(&qubit_state(
            C64::new(s, 0.0),
            C64::new(0.0, -s),
        )))
        .unwrap();
        assert!((minus_y.y.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_complement_is_an_error() {
        let mut m = BTreeMap::new();
        m.insert(TomoPulse::XHalf, 0.5);
        assert!(bloch_from_tomography(&m).is_err());
        m.insert(TomoPulse::XHalfNeg, 0.5);
        let b = bloch_from_tomography(&m).unwrap();
        assert!(b.x.is_none() && b.z.is_none() && b.y == Some(0.0));
    }

    #[test]
    fn x_half_gives_minus_y() {
        let rho = DensityMatrix::fock(0, 0, 2).unwrap();
        let r = rho
            .apply_qubit_unitary(&rotation_operator(FRAC_PI_2, 0.0))
            .unwrap();
        let b = r.bloch();
        assert!((b[1] + 1.0).abs() < 1e-12 && b[0].abs() < 1e-12);
    }

    #[test]
    fn swap_sequence_moves_excitation() {
        let p = SystemParams::ideal(crate::hz_to_rad(7.3e6), 5);
        let swap = std::f64::consts::PI / (2.0 * p.g);
        let seq = PulseSequence::new(vec![
            Segment::Rotation {
                angle: PI,
                axis: Axis::X,
                phase: 0.0,
            },
            Segment::Measure { tomography: false },
            Segment::CouplingOn {
                g: None,
                duration: swap,
                ramp: 0.0,
            },
            Segment::Measure { tomography: true },
        ]);
        let rec = run_sequence(&seq, &p).unwrap();
        assert!((rec.measurements[0].p_e - 1.0).abs() < 1e-12);
        assert!(rec.measurements[1].p_e < 1e-9);
        assert!((rec.measurements[1].populations[1] - 1.0).abs() < 1e-9);
        assert!((rec.measurements[1].bloch.unwrap().z.unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn sequence_json_round_trip() {
        let text = r#"{"segments":[
            {"type":"rotation","angle":3.14159,"axis":"y"},
            {"type":"set-detuning","delta":1e8},
            {"type":"coupling-on","duration":3e-8,"ramp":5e-9},
            {"type":"displacement","alpha_re":0.5,"alpha_im":0.0},
            {"type":"idle","duration":1e-8},
            {"type":"measure","tomography":true}]}"#;
        let seq: PulseSequence = serde_json::from_str(text).unwrap();
        assert_eq!(seq.segments.len(), 6);
        seq.validate().unwrap();
        let back: PulseSequence =
            serde_json::from_str(&serde_json::to_string(&seq).unwrap()).unwrap();
        assert_eq!(back, seq);
        let bad = PulseSequence::new(vec![Segment::Rotation {
            angle: 7.0,
            axis: Axis::X,
            phase: 0.0,
        }]);
        assert!(bad.validate().is_err());
    }
}

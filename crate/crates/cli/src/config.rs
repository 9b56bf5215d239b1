//! Scenario files: a `kind` discriminator, optional `seed` and `out`, and a
//! `params` object whose fields override the defaults of that kind.

use crate::error::{LabError, Result};
use phonon_core::circuit::CircuitParams;
use phonon_core::lindblad::protocols::Timing;
use phonon_core::lindblad::SystemParams;
use phonon_core::saw::{BvdParams, SawModelParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const KINDS: [&str; 9] = [
    "admittance",
    "coupling-sweep",
    "loss-spectrum",
    "chevron",
    "lifetimes",
    "thermometry",
    "wigner",
    "fock2",
    "large-alpha",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceParams {
    pub saw: SawModelParams,
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub points: usize,
    /// Half-width of the BvD fit window around the peak.
    pub bvd_window_hz: f64,
    /// `|Γ|` threshold defining the mirror stop band.
    pub stop_band_threshold: f64,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self {
            saw: SawModelParams::default(),
            f_lo_hz: 3.5e9,
            f_hi_hz: 4.5e9,
            points: 2001,
            bvd_window_hz: 10e6,
            stop_band_threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSweepParams {
    pub circuit: CircuitParams,
    pub bvd: BvdParams,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub points: usize,
    /// Fit `(L_q, L_1, L_2)` to synthetic `ω_ge(Φ_G)` data.
    pub fit: bool,
    /// Gaussian noise on the synthetic qubit frequencies.
    pub fit_noise_hz: f64,
}

impl Default for CouplingSweepParams {
    fn default() -> Self {
        Self {
            circuit: CircuitParams::default(),
            bvd: BvdParams::default(),
            phi_lo: 0.0,
            phi_hi: 1.0,
            points: 201,
            fit: false,
            fit_noise_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpectrumParams {
    pub saw: SawModelParams,
    pub circuit: CircuitParams,
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub points: usize,
    pub phi_on: f64,
    pub phi_off: f64,
    /// Frequency at which the on/off loss ratio is reported.
    pub ratio_freq_hz: f64,
}

impl Default for LossSpectrumParams {
    fn default() -> Self {
        Self {
            saw: SawModelParams::default(),
            circuit: CircuitParams::default(),
            f_lo_hz: 3.8e9,
            f_hi_hz: 4.1e9,
            points: 1201,
            phi_on: 0.5,
            phi_off: 0.25,
            ratio_freq_hz: 3.85e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChevronParams {
    pub system: SystemParams,
    pub delta_max_hz: f64,
    pub delta_points: usize,
    pub tau_max: f64,
    pub tau_points: usize,
}

impl Default for ChevronParams {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            delta_max_hz: 20e6,
            delta_points: 41,
            tau_max: 300e-9,
            tau_points: 301,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimesParams {
    pub system: SystemParams,
    pub timing: Timing,
    pub delay_max: f64,
    pub points: usize,
}

impl Default for LifetimesParams {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            timing: Timing::default(),
            delay_max: 600e-9,
            points: 31,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometryParams {
    /// Excited populations used to synthesize the traces.
    pub populations: Vec<f64>,
    /// Readout contrast applied to both oscillation amplitudes.
    pub contrast: f64,
    pub offset: f64,
    pub points: usize,
    pub noise: f64,
}

impl Default for ThermometryParams {
    fn default() -> Self {
        Self {
            populations: vec![0.0169, 0.0049],
            contrast: 0.97,
            offset: 0.02,
            points: 101,
            noise: 7e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetState {
    Vacuum,
    One,
    Superposition,
}

impl TargetState {
    pub fn label(self) -> &'static str {
        match self {
            TargetState::Vacuum => "vacuum",
            TargetState::One => "one",
            TargetState::Superposition => "superposition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerParams {
    pub system: SystemParams,
    pub timing: Timing,
    pub state: TargetState,
    /// Wait between the preparation swap and the tomography displacement.
    pub settle: f64,
    pub t_max: f64,
    pub t_points: usize,
    /// Gaussian noise on each synthetic `P_e` sample.
    pub noise: f64,
    /// Levels kept in the density-matrix fit.
    pub dim_fit: usize,
    /// Rotation `ρ_jk → ρ_jk e^{−iφ(j−k)}` applied before comparing with the
    /// target state.
    pub frame_phase: f64,
    pub mc_samples: usize,
    pub map_radius: f64,
    pub map_points: usize,
}

impl Default for WignerParams {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            timing: Timing::default(),
            state: TargetState::Superposition,
            settle: 15e-9,
            t_max: 200e-9,
            t_points: 101,
            noise: 0.005,
            dim_fit: 5,
            frame_phase: -std::f64::consts::FRAC_PI_2,
            mc_samples: 1000,
            map_radius: 2.0,
            map_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fock2Params {
    pub system: SystemParams,
    pub timing: Timing,
    pub tau_max: f64,
    pub tau_points: usize,
}

impl Default for Fock2Params {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            timing: Timing {
                buffer: 25e-9,
                ..Timing::default()
            },
            tau_max: 60e-9,
            tau_points: 121,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LargeAlphaParams {
    pub system: SystemParams,
    pub timing: Timing,
    pub alpha_max: f64,
    pub alpha_points: usize,
    pub t_max: f64,
    pub t_points: usize,
}

impl Default for LargeAlphaParams {
    fn default() -> Self {
        Self {
            system: SystemParams {
                dim: 50,
                ..SystemParams::default()
            },
            timing: Timing::default(),
            alpha_max: 4.0,
            alpha_points: 21,
            t_max: 250e-9,
            t_points: 126,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ScenarioKind {
    Admittance(AdmittanceParams),
    CouplingSweep(CouplingSweepParams),
    LossSpectrum(LossSpectrumParams),
    Chevron(ChevronParams),
    Lifetimes(LifetimesParams),
    Thermometry(ThermometryParams),
    Wigner(WignerParams),
    Fock2(Fock2Params),
    LargeAlpha(LargeAlphaParams),
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Admittance(_) => "admittance",
            ScenarioKind::CouplingSweep(_) => "coupling-sweep",
            ScenarioKind::LossSpectrum(_) => "loss-spectrum",
            ScenarioKind::Chevron(_) => "chevron",
            ScenarioKind::Lifetimes(_) => "lifetimes",
            ScenarioKind::Thermometry(_) => "thermometry",
            ScenarioKind::Wigner(_) => "wigner",
            ScenarioKind::Fock2(_) => "fock2",
            ScenarioKind::LargeAlpha(_) => "large-alpha",
        }
    }
}

/// A fully resolved scenario: defaults with the file's overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope<P> {
    #[allow(dead_code)]
    kind: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    params: P,
}

fn parse_as<P: DeserializeOwned + Default>(
    text: &str,
    origin: &str,
) -> Result<(P, u64, Option<PathBuf>)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let env: Envelope<P> = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        LabError::Config(format!(
            "{origin}:{}:{}: field `{}`: {inner}",
            inner.line(),
            inner.column(),
            e.path()
        ))
    })?;
    Ok((env.params, env.seed, env.out))
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            seed: 0,
            out: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Parses and validates a scenario. `origin` labels diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| LabError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        let obj = value.as_object().ok_or_else(|| {
            LabError::Config(format!("{origin}: top level must be a JSON object"))
        })?;
        let kind = match obj.get("kind") {
            None => {
                return Err(LabError::Config(format!(
                    "{origin}: missing required field `kind` (one of: {}); optional fields: `seed`, `out`, `params`",
                    KINDS.join(", ")
                )))
            }
            Some(serde_json::Value::String(k)) => k.clone(),
            Some(other) => {
                return Err(LabError::Config(format!(
                    "{origin}: field `kind` must be a string, got {other}"
                )))
            }
        };
        macro_rules! parse {
            ($variant:ident) => {{
                let (p, seed, out) = parse_as(text, origin)?;
                (ScenarioKind::$variant(p), seed, out)
            }};
        }
        let (kind, seed, out) = match kind.as_str() {
            "admittance" => parse!(Admittance),
            "coupling-sweep" => parse!(CouplingSweep),
            "loss-spectrum" => parse!(LossSpectrum),
            "chevron" => parse!(Chevron),
            "lifetimes" => parse!(Lifetimes),
            "thermometry" => parse!(Thermometry),
            "wigner" => parse!(Wigner),
            "fock2" => parse!(Fock2),
            "large-alpha" => parse!(LargeAlpha),
            other => {
                return Err(LabError::Config(format!(
                    "{origin}: field `kind`: unknown kind `{other}` (expected one of: {})",
                    KINDS.join(", ")
                )))
            }
        };
        let s = Scenario { kind, seed, out };
        s.validate()
            .map_err(|e| LabError::Config(format!("{origin}: {e}")))?;
        Ok(s)
    }

    /// Checks every parameter block against its module's invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        fn grid(name: &str, lo: f64, hi: f64, n: usize) -> std::result::Result<(), String> {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(format!("`{name}` range [{lo}, {hi}] is empty"));
            }
            if n < 2 {
                return Err(format!("`{name}` needs at least 2 points"));
            }
            Ok(())
        }
        fn positive(name: &str, v: f64) -> std::result::Result<(), String> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("`{name}` must be positive, got {v}"))
            }
        }
        let tag = |m: &str, e: String| format!("params.{m}: {e}");
        match &self.kind {
            ScenarioKind::Admittance(p) => {
                p.saw.validate().map_err(|e| tag("saw", e.to_string()))?;
                grid("params.f_*_hz", p.f_lo_hz, p.f_hi_hz, p.points)?;
                positive("params.bvd_window_hz", p.bvd_window_hz)?;
                if !(p.stop_band_threshold > 0.0 && p.stop_band_threshold < 1.0) {
                    return Err("`params.stop_band_threshold` must lie in (0, 1)".into());
                }
            }
            ScenarioKind::CouplingSweep(p) => {
                p.circuit
                    .validate()
                    .map_err(|e| tag("circuit", e.to_string()))?;
                p.bvd.validate().map_err(|e| tag("bvd", e.to_string()))?;
                grid("params.phi_*", p.phi_lo, p.phi_hi, p.points)?;
                if !(p.fit_noise_hz >= 0.0 && p.fit_noise_hz.is_finite()) {
                    return Err("`params.fit_noise_hz` must be non-negative".into());
                }
            }
            ScenarioKind::LossSpectrum(p) => {
                p.saw.validate().map_err(|e| tag("saw", e.to_string()))?;
                p.circuit
                    .validate()
                    .map_err(|e| tag("circuit", e.to_string()))?;
                grid("params.f_*_hz", p.f_lo_hz, p.f_hi_hz, p.points)?;
                if !(p.ratio_freq_hz >= p.f_lo_hz && p.ratio_freq_hz <= p.f_hi_hz) {
                    return Err(format!(
                        "`params.ratio_freq_hz` = {} lies outside the frequency range",
                        p.ratio_freq_hz
                    ));
                }
            }
            ScenarioKind::Chevron(p) => {
                p.system
                    .validate()
                    .map_err(|e| tag("system", e.to_string()))?;
                positive("params.delta_max_hz", p.delta_max_hz)?;
                grid("params.tau", 0.0, p.tau_max, p.tau_points)?;
                if p.delta_points < 1 {
                    return Err("`params.delta_points` must be at least 1".into());
                }
            }
            ScenarioKind::Lifetimes(p) => {
                p.system
                    .validate()
                    .map_err(|e| tag("system", e.to_string()))?;
                grid("params.delay", 0.0, p.delay_max, p.points)?;
                if p.points < 5 {
                    return Err("`params.points` must be at least 5".into());
                }
            }
            ScenarioKind::Thermometry(p) => {
                if p.populations.is_empty() || p.populations.iter().any(|v| !(0.0..0.5).contains(v))
                {
                    return Err("`params.populations` must be non-empty values in [0, 0.5)".into());
                }
                positive("params.contrast", p.contrast)?;
                if p.points < 4 {
                    return Err("`params.points` must be at least 4".into());
                }
                if !(p.noise >= 0.0 && p.noise.is_finite()) {
                    return Err("`params.noise` must be non-negative".into());
                }
            }
            ScenarioKind::Wigner(p) => {
                p.system
                    .validate()
                    .map_err(|e| tag("system", e.to_string()))?;
                grid("params.t", 0.0, p.t_max, p.t_points)?;
                if !(p.noise >= 0.0 && p.noise.is_finite()) {
                    return Err("`params.noise` must be non-negative".into());
                }
                if p.dim_fit < 2 || p.dim_fit > p.system.dim {
                    return Err(format!(
                        "`params.dim_fit` must lie in [2, {}]",
                        p.system.dim
                    ));
                }
                if !(p.settle >= 0.0) {
                    return Err("`params.settle` must be non-negative".into());
                }
                positive("params.map_radius", p.map_radius)?;
                if p.map_points < 2 || p.mc_samples < 2 {
                    return Err(
                        "`params.map_points` and `params.mc_samples` must be at least 2".into(),
                    );
                }
            }
            ScenarioKind::Fock2(p) => {
                p.system
                    .validate()
                    .map_err(|e| tag("system", e.to_string()))?;
                grid("params.tau", 0.0, p.tau_max, p.tau_points)?;
            }
            ScenarioKind::LargeAlpha(p) => {
                p.system
                    .validate()
                    .map_err(|e| tag("system", e.to_string()))?;
                grid("params.alpha", 0.0, p.alpha_max, p.alpha_points)?;
                grid("params.t", 0.0, p.t_max, p.t_points)?;
                let (a, d) = (p.alpha_max, p.system.dim as f64);
                if a * a + 4.0 * a >= d {
                    return Err(format!(
                        "`params.alpha_max` = {a} violates the truncation guard for {d} levels"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolved scenario as JSON, the form stored in run records.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_required_fields() {
        let e = Scenario::from_json("{}", "empty.json").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("`kind`") && msg.contains("chevron"), "{msg}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_field_reports_path_and_line() {
        let text =
            "{\n  \"kind\": \"chevron\",\n  \"params\": {\n    \"system\": {\"gg\": 1}\n  }\n}";
        let msg = Scenario::from_json(text, "c.json").unwrap_err().to_string();
        assert!(
            msg.contains("c.json:4:") && msg.contains("params.system"),
            "{msg}"
        );
    }

    #[test]
    fn overrides_layer_over_defaults() {
        let s = Scenario::from_json(
            r#"{"kind":"chevron","seed":7,"params":{"delta_points":3,"system":{"dim":6}}}"#,
            "x",
        )
        .unwrap();
        let ScenarioKind::Chevron(p) = &s.kind else {
            panic!()
        };
        assert_eq!(p.delta_points, 3);
        assert_eq!(p.system.dim, 6);
        assert_eq!(p.system.t1r, SystemParams::default().t1r);
        assert_eq!(s.seed, 7);
    }

    #[test]
    fn snapshot_round_trips() {
        for k in KINDS {
            let s = Scenario::from_json(&format!(r#"{{"kind":"{k}"}}"#), "x").unwrap();
            let text = serde_json::to_string(&s.snapshot()).unwrap();
            assert_eq!(Scenario::from_json(&text, "x").unwrap(), s);
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let e = Scenario::from_json(r#"{"kind":"large-alpha","params":{"alpha_max":9}}"#, "x")
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = Scenario::from_json(r#"{"kind":"warp"}"#, "x").unwrap_err();
        assert!(e.to_string().contains("large-alpha"));
    }
}

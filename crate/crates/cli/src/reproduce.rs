//! Figure presets: each id runs one or more scenarios and sets the computed
//! numbers next to the published ones.

use crate::config::*;
use crate::error::{LabError, Result};
use crate::record::{run_to_dir, RunRecord};
use crate::scenarios::Outcome;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

pub const FIGURES: [&str; 9] = [
    "fig1e", "fig2", "fig3c", "fig3d", "fig4a", "fig4d", "figS1", "figS5", "figS6",
];
pub const COMPARISON_SCHEMA: &str = "phonon-lab/comparison/v1";
pub const REPRODUCE_SEED: u64 = 1;

const MEASURED: &str = "published measurement";
const MODEL: &str = "published model prediction";
const ANALYTIC: &str = "analytic";
const INPUT: &str = "generating value";
const IDEAL: &str = "ideal-state value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub quantity: String,
    pub unit: String,
    pub reference: f64,
    pub computed: Option<f64>,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema: String,
    pub figure: String,
    pub runs: Vec<String>,
    pub rows: Vec<Row>,
}

impl Comparison {
    pub fn row(&self, quantity: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    /// Fixed-width table for the terminal.
    pub fn table(&self) -> String {
        let w = self
            .rows
            .iter()
            .map(|r| r.quantity.len() + r.unit.len() + 3)
            .max()
            .unwrap_or(8)
            .max(8);
        let mut s = format!(
            "{}\n{:<w$}  {:>14}  {:>14}  basis\n",
            self.figure, "quantity", "reference", "computed"
        );
        for r in &self.rows {
            let q = if r.unit.is_empty() {
                r.quantity.clone()
            } else {
                format!("{} [{}]", r.quantity, r.unit)
            };
            let c = r.computed.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
            let _ = writeln!(s, "{q:<w$}  {:>14.6e}  {c:>14}  {}", r.reference, r.basis);
        }
        s
    }
}

struct Run {
    name: String,
    scenario: Scenario,
}

fn run(name: &str, kind: ScenarioKind) -> Run {
    let mut scenario = Scenario::new(kind);
    scenario.seed = REPRODUCE_SEED;
    Run {
        name: name.into(),
        scenario,
    }
}

fn plan(figure: &str) -> Option<Vec<Run>> {
    use ScenarioKind as K;
    Some(match figure {
        "fig1e" => vec![run("coupling-sweep", K::CouplingSweep(Default::default()))],
        "fig2" => vec![
            run("admittance", K::Admittance(Default::default())),
            run("loss-spectrum", K::LossSpectrum(Default::default())),
        ],
        "fig3c" => vec![run("chevron", K::Chevron(Default::default()))],
        "fig3d" => vec![run("lifetimes", K::Lifetimes(Default::default()))],
        "fig4a" => vec![run("thermometry", K::Thermometry(Default::default()))],
        "fig4d" => [
            TargetState::Vacuum,
            TargetState::One,
            TargetState::Superposition,
        ]
        .into_iter()
        .map(|state| {
            run(
                &format!("wigner-{}", state.label()),
                K::Wigner(WignerParams {
                    state,
                    ..Default::default()
                }),
            )
        })
        .collect(),
        "figS1" => vec![run(
            "coupling-sweep",
            K::CouplingSweep(CouplingSweepParams {
                fit: true,
                fit_noise_hz: 1e6,
                ..Default::default()
            }),
        )],
        "figS5" => vec![run("large-alpha", K::LargeAlpha(Default::default()))],
        "figS6" => vec![run("fock2", K::Fock2(Default::default()))],
        _ => return None,
    })
}

fn get(v: &Value, path: &str) -> Option<f64> {
    path.split('.')
        .try_fold(v, |v, k| match k.parse::<usize>() {
            Ok(i) => v.get(i),
            Err(_) => v.get(k),
        })
        .and_then(Value::as_f64)
}

fn row(quantity: &str, unit: &str, reference: f64, computed: Option<f64>, basis: &str) -> Row {
    Row {
        quantity: quantity.into(),
        unit: unit.into(),
        reference,
        computed,
        basis: basis.into(),
    }
}

fn rows(figure: &str, outs: &[Outcome]) -> Vec<Row> {
    let r = |i: usize, p: &str| get(outs[i].results(), p);
    match figure {
        "fig1e" => vec![
            row("max |g|/2pi", "Hz", 7.3e6, r(0, "g_max_hz"), MODEL),
            row("flux at max |g|", "Phi_0", 0.5, r(0, "phi_at_g_max"), MODEL),
            row(
                "max/min |g| (lower bound)",
                "",
                300.0,
                r(0, "on_off_ratio").or(Some(f64::INFINITY)),
                MODEL,
            ),
        ],
        "fig2" => vec![
            row("SAW resonance", "Hz", 3.985e9, r(0, "peak_hz"), MEASURED),
            row(
                "stop band lower edge",
                "Hz",
                3.96e9,
                r(0, "stop_band_lo_hz"),
                MODEL,
            ),
            row(
                "stop band upper edge",
                "Hz",
                4.04e9,
                r(0, "stop_band_hi_hz"),
                MODEL,
            ),
            row("BvD C_s", "F", 12.10e-15, r(0, "bvd_c_s_f"), MODEL),
            row("BvD L_s", "H", 131.8e-9, r(0, "bvd_l_s_h"), MODEL),
            row("BvD R_s", "ohm", 0.890, r(0, "bvd_r_s_ohm"), MODEL),
            row("BvD Q", "", 3.7e3, r(0, "bvd_q"), MEASURED),
            row("implied T1r", "s", 148e-9, r(0, "implied_t1r_s"), MEASURED),
            row("T1 on at 3.85 GHz", "s", 54e-9, r(1, "t1_on_s"), MEASURED),
            row(
                "T1 off at 3.85 GHz",
                "s",
                19.8e-6,
                r(1, "t1_off_s"),
                MEASURED,
            ),
            row(
                "loss on/off at 3.85 GHz",
                "",
                366.0,
                r(1, "on_off_ratio"),
                MEASURED,
            ),
        ],
        "fig3c" => vec![
            row(
                "swap time pi/2g",
                "s",
                34.2e-9,
                r(0, "swap_time_s"),
                ANALYTIC,
            ),
            row(
                "worst relative error of chevron frequency",
                "",
                0.0,
                r(0, "max_relative_error"),
                ANALYTIC,
            ),
        ],
        "fig3d" => vec![
            row("T1r", "s", 148e-9, r(0, "t1r_s"), MEASURED),
            row("T2r", "s", 293e-9, r(0, "t2r_s"), MEASURED),
            row("T2r/T1r", "", 293.0 / 148.0, r(0, "t2r_over_t1r"), MEASURED),
            row(
                "swap with ramps",
                "s",
                37e-9,
                r(0, "swap_duration_s"),
                MEASURED,
            ),
        ],
        "fig4a" => vec![
            row("P_e thermal", "", 0.0169, r(0, "cases.0.estimate"), INPUT),
            row(
                "P_e thermal sigma",
                "",
                2e-4,
                r(0, "cases.0.sigma"),
                MEASURED,
            ),
            row("P_1 thermal", "", 0.0049, r(0, "cases.1.estimate"), INPUT),
            row(
                "P_1 thermal sigma",
                "",
                2e-4,
                r(0, "cases.1.sigma"),
                MEASURED,
            ),
        ],
        "fig4d" => vec![
            row("fidelity |0>", "", 0.998, r(0, "fidelity"), MODEL),
            row("fidelity |1>", "", 0.879, r(1, "fidelity"), MODEL),
            row("fidelity |0>+|1>", "", 0.962, r(2, "fidelity"), MODEL),
            row(
                "W(0) of |1>",
                "",
                -2.0 / std::f64::consts::PI,
                r(1, "w_origin"),
                IDEAL,
            ),
        ],
        "figS1" => vec![
            row(
                "fit rms relative residual",
                "",
                0.0,
                r(0, "fit.rms_relative_residual"),
                ANALYTIC,
            ),
            row("max |g|/2pi", "Hz", 7.3e6, r(0, "g_max_hz"), MODEL),
        ],
        "figS5" => vec![row(
            "vacuum Rabi frequency 2g/2pi",
            "Hz",
            r(0, "expected_vacuum_rabi_hz").unwrap_or(f64::NAN),
            r(0, "vacuum_rabi_hz"),
            IDEAL,
        )],
        "figS6" => vec![
            row("optimal tau", "s", 26e-9, r(0, "tau_opt_s"), MEASURED),
            row("P2", "", 0.473, r(0, "p2"), MEASURED),
            row("P1", "", 0.382, r(0, "p1"), MEASURED),
            row("P0", "", 0.145, r(0, "p0"), MEASURED),
        ],
        _ => Vec::new(),
    }
}

pub fn unknown_figure(figure: &str) -> LabError {
    LabError::Config(format!(
        "unknown figure id `{figure}`; supported: {}",
        FIGURES.join(", ")
    ))
}

/// Runs the preset for `figure` into subdirectories of `dir` and writes
/// `comparison.json` next to them.
pub fn reproduce(figure: &str, dir: &Path) -> Result<(Comparison, Vec<RunRecord>)> {
    let runs = plan(figure).ok_or_else(|| unknown_figure(figure))?;
    let mut outs = Vec::new();
    let mut records = Vec::new();
    for r in &runs {
        let (o, rec) = run_to_dir(&r.scenario, &dir.join(&r.name))?;
        outs.push(o);
        records.push(rec);
    }
    let cmp = Comparison {
        schema: COMPARISON_SCHEMA.into(),
        figure: figure.into(),
        runs: runs.iter().map(|r| r.name.clone()).collect(),
        rows: rows(figure, &outs),
    };
    let mut bytes = serde_json::to_vec_pretty(&cmp)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("comparison.json"), bytes)?;
    Ok((cmp, records))
}

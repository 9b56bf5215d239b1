//! Scenario execution. Each runner returns its artifacts in memory together
//! with a JSON summary; nothing here touches the file system.

use crate::config::*;
use crate::error::{LabError, Result};
use crate::svg::{Colormap, Heatmap};
use nalgebra::DVector;
use phonon_core::analysis::{fit_damped_cosine, fit_exponential};
use phonon_core::circuit::{
    coupling_strength, fit_circuit, qubit_frequency, qubit_loss_spectrum, write_coupling_csv,
    write_frequency_csv, CircuitParams,
};
use phonon_core::lindblad::protocols::{fock2, prepare, swap_duration, t1r, t2r};
use phonon_core::lindblad::{
    rotation_operator, run_sequence, Axis, DensityMatrix, EvolveOptions, Propagator, Schedule,
    SystemParams,
};
use phonon_core::saw::{fit_bvd, linear_grid_hz, mirror_reflection, resonator_admittance};
use phonon_core::tomography::{
    default_alpha_grid, fidelity, fidelity_monte_carlo, fit_rabi_amplitude,
    rabi_population_estimate, reconstruct_density_matrix, rotate_frame, simulate_trace,
    synthesize_dataset, synthesize_rabi_trace, time_grid, wigner_from_state, write_wigner_csv,
    ReconstructionReport, WignerSample,
};
use phonon_core::{hz_to_rad, rad_to_hz, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

pub const SUMMARY_SCHEMA: &str = "phonon-lab/summary/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

impl Outcome {
    fn new(kind: &str, seed: u64, results: Value) -> Self {
        Self {
            artifacts: Vec::new(),
            summary: json!({ "schema": SUMMARY_SCHEMA, "kind": kind, "seed": seed, "results": results }),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes,
        });
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn results(&self) -> &Value {
        &self.summary["results"]
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Finite floats as numbers, anything else as `null`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn execute(s: &Scenario) -> Result<Outcome> {
    let mut out = match &s.kind {
        ScenarioKind::Admittance(p) => admittance(p)?,
        ScenarioKind::CouplingSweep(p) => coupling_sweep(p, s.seed)?,
        ScenarioKind::LossSpectrum(p) => loss_spectrum(p)?,
        ScenarioKind::Chevron(p) => chevron(p)?,
        ScenarioKind::Lifetimes(p) => lifetimes(p)?,
        ScenarioKind::Thermometry(p) => thermometry(p, s.seed)?,
        ScenarioKind::Wigner(p) => wigner(p, s.seed)?,
        ScenarioKind::Fock2(p) => fock2_scan(p)?,
        ScenarioKind::LargeAlpha(p) => large_alpha(p)?,
    };
    out.summary["kind"] = json!(s.kind.name());
    out.summary["seed"] = json!(s.seed);
    let summary = out.summary.clone();
    out.add_json("summary.json", &summary)?;
    Ok(out)
}

fn admittance(p: &AdmittanceParams) -> Result<Outcome> {
    let grid = linear_grid_hz(p.f_lo_hz, p.f_hi_hz, p.points);
    let spec = resonator_admittance(&grid, &p.saw)?;
    let k = spec
        .peak_index()
        .ok_or_else(|| LabError::Config("empty frequency grid".into()))?;
    let f_peak = rad_to_hz(spec.omega[k]);

    let gamma: Vec<f64> = grid
        .par_iter()
        .map(|&w| mirror_reflection(w, &p.saw).map(|g| g.norm()))
        .collect::<std::result::Result<_, _>>()?;
    let f_bragg = p.saw.v_m / (2.0 * p.saw.mirror_pitch);
    let centre = grid
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (rad_to_hz(*a.1) - f_bragg)
                .abs()
                .total_cmp(&(rad_to_hz(*b.1) - f_bragg).abs())
        })
        .map_or(0, |(i, _)| i);
    let band = (gamma[centre] > p.stop_band_threshold).then(|| {
        let mut lo = centre;
        while lo > 0 && gamma[lo - 1] > p.stop_band_threshold {
            lo -= 1;
        }
        let mut hi = centre;
        while hi + 1 < gamma.len() && gamma[hi + 1] > p.stop_band_threshold {
            hi += 1;
        }
        (rad_to_hz(grid[lo]), rad_to_hz(grid[hi]))
    });

    // A dense grid around the peak resolves the ~1 MHz linewidth for the fit.
    let dense = linear_grid_hz(f_peak - p.bvd_window_hz, f_peak + p.bvd_window_hz, 801);
    let dense_spec = resonator_admittance(&dense, &p.saw)?;
    let bvd = fit_bvd(&dense_spec, (dense[0], dense[800]))?;
    let omega_s = bvd.params.omega_s();

    let mut csv = Vec::new();
    spec.write_csv(&mut csv)?;
    let mut mirror = String::from("freq_hz,abs_gamma\n");
    for (w, g) in grid.iter().zip(&gamma) {
        let _ = writeln!(mirror, "{},{}", rad_to_hz(*w), g);
    }
    let mut out = Outcome::new(
        "admittance",
        0,
        json!({
            "peak_hz": f_peak,
            "peak_re_y_s": spec.y[k].re,
            "stop_band_lo_hz": band.map(|b| b.0),
            "stop_band_hi_hz": band.map(|b| b.1),
            "bragg_hz": f_bragg,
            "bvd_c_s_f": bvd.params.c_s,
            "bvd_l_s_h": bvd.params.l_s,
            "bvd_r_s_ohm": bvd.params.r_s,
            "bvd_q": bvd.q,
            "bvd_f_s_hz": rad_to_hz(omega_s),
            "bvd_relative_residual": bvd.relative_residual,
            "implied_t1r_s": bvd.q / omega_s,
        }),
    );
    out.add("admittance.csv", csv);
    out.add("mirror_reflection.csv", mirror.into_bytes());
    out.add_json("bvd_fit.json", &bvd)?;
    Ok(out)
}

fn coupling_sweep(p: &CouplingSweepParams, seed: u64) -> Result<Outcome> {
    let phis = linspace(p.phi_lo, p.phi_hi, p.points);
    let g: Vec<(f64, f64)> = phis
        .par_iter()
        .map(|&phi| coupling_strength(phi, &p.circuit, &p.bvd).map(|g| (phi, g)))
        .collect::<std::result::Result<_, _>>()?;
    let freq: Vec<(f64, f64)> = phis
        .par_iter()
        .filter_map(|&phi| qubit_frequency(phi, &p.circuit).ok().map(|w| (phi, w)))
        .collect();
    let (phi_max, g_max) = g
        .iter()
        .copied()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap_or((f64::NAN, f64::NAN));
    let g_min = g.iter().map(|v| v.1.abs()).fold(f64::INFINITY, f64::min);
    let mut results = json!({
        "g_max_hz": rad_to_hz(g_max.abs()),
        "g_max_signed_hz": rad_to_hz(g_max),
        "phi_at_g_max": phi_max,
        "g_min_abs_hz": rad_to_hz(g_min),
        "on_off_ratio": num(g_max.abs() / g_min),
        "m_12_h": p.circuit.m_12(),
    });

    let mut out = Outcome::new("coupling-sweep", seed, Value::Null);
    let mut csv = Vec::new();
    write_coupling_csv(&mut csv, &g)?;
    out.add("coupling.csv", csv);

    if p.fit {
        // Synthetic ω_ge(Φ_G) data from `circuit`, fitted from a perturbed start.
        let normal = Normal::new(0.0, hz_to_rad(p.fit_noise_hz).max(0.0))
            .map_err(|e| LabError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<(f64, f64)> = freq
            .iter()
            .map(|&(phi, w)| (phi, w + normal.sample(&mut rng)))
            .collect();
        let start = CircuitParams {
            l_q: p.circuit.l_q * 1.05,
            l_1: p.circuit.l_1 * 0.95,
            l_2: p.circuit.l_2 * 1.05,
            ..p.circuit
        };
        let fit = fit_circuit(&data, &start)?;
        let curve: Vec<(f64, f64)> = phis
            .iter()
            .filter_map(|&phi| qubit_frequency(phi, &fit.params).ok().map(|w| (phi, w)))
            .collect();
        results["fit"] = json!({
            "l_q_h": fit.params.l_q,
            "l_1_h": fit.params.l_1,
            "l_2_h": fit.params.l_2,
            "c_q_f": fit.params.c_q,
            "rms_relative_residual": fit.rms_relative_residual,
        });
        let mut d = Vec::new();
        write_frequency_csv(&mut d, &data)?;
        out.add("frequency_data.csv", d);
        let mut c = Vec::new();
        write_frequency_csv(&mut c, &curve)?;
        out.add("frequency.csv", c);
        out.add_json("circuit_fit.json", &fit)?;
    } else {
        let mut c = Vec::new();
        write_frequency_csv(&mut c, &freq)?;
        out.add("frequency.csv", c);
    }
    out.summary["results"] = results;
    Ok(out)
}

fn loss_spectrum(p: &LossSpectrumParams) -> Result<Outcome> {
    let grid = linear_grid_hz(p.f_lo_hz, p.f_hi_hz, p.points);
    let saw = resonator_admittance(&grid, &p.saw)?;
    let on = qubit_loss_spectrum(&grid, p.phi_on, &p.circuit, &saw)?;
    let off = qubit_loss_spectrum(&grid, p.phi_off, &p.circuit, &saw)?;
    let k = (0..on.len())
        .max_by(|&a, &b| on[a].total_cmp(&on[b]))
        .unwrap_or(0);
    let target = hz_to_rad(p.ratio_freq_hz);
    let m = (0..grid.len())
        .min_by(|&a, &b| {
            (grid[a] - target)
                .abs()
                .total_cmp(&(grid[b] - target).abs())
        })
        .unwrap_or(0);
    let mut csv = String::from("freq_hz,inv_q_on,inv_q_off\n");
    for i in 0..grid.len() {
        let _ = writeln!(csv, "{},{},{}", rad_to_hz(grid[i]), on[i], off[i]);
    }
    let mut out = Outcome::new(
        "loss-spectrum",
        0,
        json!({
            "peak_hz": rad_to_hz(grid[k]),
            "inv_q_on_peak": on[k],
            "inv_q_off_peak": off[k],
            "t1_on_peak_s": 1.0 / (grid[k] * on[k]),
            "ratio_freq_hz": rad_to_hz(grid[m]),
            "t1_on_s": 1.0 / (grid[m] * on[m]),
            "t1_off_s": 1.0 / (grid[m] * off[m]),
            "on_off_ratio": on[m] / off[m],
        }),
    );
    out.add("loss.csv", csv.into_bytes());
    Ok(out)
}

fn excited_thermal(system: &SystemParams) -> Result<DensityMatrix> {
    let rho = DensityMatrix::thermal(system.p_e_th, system.p_1_th, system.dim)?;
    Ok(rho.apply_qubit_unitary(&rotation_operator(PI, 0.0))?)
}

fn chevron(p: &ChevronParams) -> Result<Outcome> {
    let sys = &p.system;
    let prop = Propagator::new(sys)?;
    let rho0 = excited_thermal(sys)?;
    let deltas = linspace(
        -hz_to_rad(p.delta_max_hz),
        hz_to_rad(p.delta_max_hz),
        p.delta_points,
    );
    let taus = linspace(0.0, p.tau_max, p.tau_points);
    let traces: Vec<Vec<f64>> = deltas
        .par_iter()
        .map(|&d| {
            prop.evolve(
                &rho0,
                &Schedule::constant(p.tau_max, d, sys.g),
                &taus,
                &EvolveOptions::default(),
            )
            .map(|t| t.p_e)
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut table = Vec::new();
    let mut worst: f64 = 0.0;
    for (d, trace) in deltas.iter().zip(&traces) {
        let fit = fit_damped_cosine(&taus, trace)?;
        let expected = (d * d + 4.0 * sys.g * sys.g).sqrt();
        let rel = (fit.omega - expected).abs() / expected;
        worst = worst.max(rel);
        table.push(json!({
            "delta_hz": rad_to_hz(*d),
            "fitted_hz": rad_to_hz(fit.omega),
            "expected_hz": rad_to_hz(expected),
            "relative_error": rel,
        }));
    }
    let mut csv = String::from("delta_hz,tau_s,p_e\n");
    for (d, trace) in deltas.iter().zip(&traces) {
        for (t, v) in taus.iter().zip(trace) {
            let _ = writeln!(csv, "{},{},{}", rad_to_hz(*d), t, v);
        }
    }
    let grid: Vec<Vec<f64>> = (0..taus.len())
        .map(|i| traces.iter().map(|tr| tr[i]).collect())
        .collect();
    let svg = Heatmap {
        title: "P_e versus detuning and interaction time",
        x_label: "detuning (Hz)",
        y_label: "interaction time (s)",
        x_range: (rad_to_hz(deltas[0]), rad_to_hz(*deltas.last().unwrap())),
        y_range: (0.0, p.tau_max),
        values: &grid,
        colormap: Colormap::Sequential,
    }
    .render();
    let mut out = Outcome::new(
        "chevron",
        0,
        json!({
            "g_hz": rad_to_hz(sys.g),
            "swap_time_s": PI / (2.0 * sys.g.abs()),
            "max_relative_error": worst,
            "fits": table,
        }),
    );
    out.add("chevron.csv", csv.into_bytes());
    out.add("chevron.svg", svg.into_bytes());
    Ok(out)
}

fn measured(seq: &phonon_core::lindblad::PulseSequence, sys: &SystemParams) -> Result<f64> {
    let rec = run_sequence(seq, sys)?;
    rec.measurements
        .first()
        .map(|m| m.p_e)
        .ok_or_else(|| LabError::Config("sequence has no measurement".into()))
}

fn lifetimes(p: &LifetimesParams) -> Result<Outcome> {
    let sys = &p.system;
    let delays = linspace(0.0, p.delay_max, p.points);
    let energy: Vec<f64> = delays
        .par_iter()
        .map(|&d| measured(&t1r(d, sys.g, &p.timing), sys))
        .collect::<Result<_>>()?;
    let phase: Vec<(f64, f64)> = delays
        .par_iter()
        .map(|&d| {
            Ok((
                measured(&t2r(d, sys.g, Axis::X, &p.timing), sys)?,
                measured(&t2r(d, sys.g, Axis::Y, &p.timing), sys)?,
            ))
        })
        .collect::<Result<_>>()?;
    // Equatorial Bloch length from the two π/2 projections.
    let coherence: Vec<f64> = phase
        .iter()
        .map(|(x, y)| {
            let bx = 2.0 * x / sys.visibility - 1.0;
            let by = 2.0 * y / sys.visibility - 1.0;
            bx.hypot(by)
        })
        .collect();
    let f1 = fit_exponential(&delays, &energy, true)?;
    let f2 = fit_exponential(&delays, &coherence, false)?;
    let mut t1 = String::from("delay_s,p_e\n");
    for (d, v) in delays.iter().zip(&energy) {
        let _ = writeln!(t1, "{d},{v}");
    }
    let mut t2 = String::from("delay_s,p_e_x,p_e_y,coherence\n");
    for ((d, (x, y)), c) in delays.iter().zip(&phase).zip(&coherence) {
        let _ = writeln!(t2, "{d},{x},{y},{c}");
    }
    let ratio = f2.tau / f1.tau;
    let ratio_sigma =
        ratio * ((f1.sigma_tau / f1.tau).powi(2) + (f2.sigma_tau / f2.tau).powi(2)).sqrt();
    let mut out = Outcome::new(
        "lifetimes",
        0,
        json!({
            "t1r_s": f1.tau,
            "t1r_sigma_s": num(f1.sigma_tau),
            "t2r_s": f2.tau,
            "t2r_sigma_s": num(f2.sigma_tau),
            "t2r_over_t1r": ratio,
            "t2r_over_t1r_sigma": num(ratio_sigma),
            "swap_duration_s": swap_duration(sys.g, p.timing.ramp),
        }),
    );
    out.add("t1r.csv", t1.into_bytes());
    out.add("t2r.csv", t2.into_bytes());
    Ok(out)
}

fn thermometry(p: &ThermometryParams, seed: u64) -> Result<Outcome> {
    let mut csv = String::from("case,x,trace_e,trace_g\n");
    let mut cases = Vec::new();
    for (i, &pop) in p.populations.iter().enumerate() {
        let s = 2 * i as u64;
        let (x, ye) =
            synthesize_rabi_trace(p.contrast * pop, p.offset, p.points, p.noise, seed, s)?;
        let (_, yg) = synthesize_rabi_trace(
            p.contrast * (1.0 - pop),
            p.offset,
            p.points,
            p.noise,
            seed,
            s + 1,
        )?;
        let ae = fit_rabi_amplitude(&x, &ye, 2.0)?;
        let ag = fit_rabi_amplitude(&x, &yg, 2.0)?;
        let est = rabi_population_estimate(ae.amplitude, ae.sigma, ag.amplitude, ag.sigma)?;
        for k in 0..x.len() {
            let _ = writeln!(csv, "{i},{},{},{}", x[k], ye[k], yg[k]);
        }
        cases.push(json!({
            "true_population": pop,
            "estimate": est.p,
            "sigma": est.sigma,
            "a_e": ae.amplitude,
            "a_e_sigma": ae.sigma,
            "a_g": ag.amplitude,
            "a_g_sigma": ag.sigma,
        }));
    }
    let mut out = Outcome::new("thermometry", seed, json!({ "cases": cases }));
    out.add("rabi.csv", csv.into_bytes());
    Ok(out)
}

fn target_vector(state: TargetState) -> DVector<C64> {
    let (z, o, s) = (
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
        C64::new(FRAC_1_SQRT_2, 0.0),
    );
    match state {
        TargetState::Vacuum => DVector::from_vec(vec![o]),
        TargetState::One => DVector::from_vec(vec![z, o]),
        TargetState::Superposition => DVector::from_vec(vec![s, s]),
    }
}

/// Resonator state left by the preparation sequence for `state`.
pub fn prepared_state(
    state: TargetState,
    sys: &SystemParams,
    timing: &phonon_core::lindblad::protocols::Timing,
    settle: f64,
) -> Result<DensityMatrix> {
    match state {
        TargetState::Vacuum => Ok(DensityMatrix::thermal(sys.p_e_th, sys.p_1_th, sys.dim)?),
        TargetState::One | TargetState::Superposition => {
            let seq = prepare(state == TargetState::Superposition, sys.g, settle, timing);
            run_sequence(&seq, sys)?
                .final_state
                .ok_or_else(|| LabError::Config("preparation produced no state".into()))
        }
    }
}

fn wigner(p: &WignerParams, seed: u64) -> Result<Outcome> {
    let sys = &p.system;
    let label = p.state.label();
    let rho = prepared_state(p.state, sys, &p.timing, p.settle)?;
    let t = time_grid(p.t_max, p.t_points);
    let ds = synthesize_dataset(label, &rho, &default_alpha_grid(), &t, sys, p.noise, seed)?;
    let fits = ds.fit_all()?;
    let st = reconstruct_density_matrix(&fits, p.dim_fit)?;
    let psi = target_vector(p.state);
    let fid = fidelity_monte_carlo(&st, &psi, p.frame_phase, p.mc_samples, seed)?;
    let model = fidelity(&rotate_frame(&rho.resonator_state(), p.frame_phase), &psi)?;
    let report =
        ReconstructionReport::new(label, &st, p.frame_phase, Some(label.into()), Some(fid));

    // Map from the reconstructed block, embedded deep enough for the corners.
    let r = p.map_radius;
    let rc = r * std::f64::consts::SQRT_2;
    let need = (rc * rc + 4.0 * rc).floor() as usize + 1;
    let dim = need.max(p.dim_fit);
    let block = rotate_frame(&st.rho, p.frame_phase)
        .view((0, 0), (p.dim_fit, p.dim_fit))
        .into_owned();
    let mut wide = nalgebra::DMatrix::zeros(dim, dim);
    wide.view_mut((0, 0), (p.dim_fit, p.dim_fit))
        .copy_from(&block);
    let axis = linspace(-r, r, p.map_points);
    let grid: Vec<Vec<f64>> = axis
        .par_iter()
        .map(|&im| {
            axis.iter()
                .map(|&re| wigner_from_state(&wide, C64::new(re, im)))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut samples = Vec::new();
    for (i, im) in axis.iter().enumerate() {
        for (j, re) in axis.iter().enumerate() {
            samples.push(WignerSample {
                alpha_re: *re,
                alpha_im: *im,
                w: grid[i][j],
            });
        }
    }
    let w_min = samples.iter().map(|s| s.w).fold(f64::INFINITY, f64::min);
    let w_origin = wigner_from_state(&wide, C64::new(0.0, 0.0))?;
    let mut csv = Vec::new();
    write_wigner_csv(&samples, &mut csv)?;
    let svg = Heatmap {
        title: &format!("Wigner function, {label}"),
        x_label: "Re α",
        y_label: "Im α",
        x_range: (-r, r),
        y_range: (-r, r),
        values: &grid,
        colormap: Colormap::Diverging,
    }
    .render();
    let mut out = Outcome::new(
        "wigner",
        seed,
        json!({
            "state": label,
            "fidelity": fid.value,
            "fidelity_sigma": fid.sigma,
            "model_fidelity": model,
            "w_min": w_min,
            "w_origin": w_origin,
            "min_eigenvalue_raw": st.min_eigenvalue_raw,
            "truncated_mass": st.truncated_mass,
            "records": fits.len(),
        }),
    );
    out.add_json("dataset.json", &ds)?;
    out.add_json("populations.json", &fits)?;
    out.add_json("reconstruction.json", &report)?;
    out.add("wigner.csv", csv);
    out.add("wigner.svg", svg.into_bytes());
    Ok(out)
}

fn fock2_scan(p: &Fock2Params) -> Result<Outcome> {
    let sys = &p.system;
    let taus = linspace(0.0, p.tau_max, p.tau_points);
    let rows: Vec<(f64, Vec<f64>)> = taus
        .par_iter()
        .map(|&tau| {
            let rec = run_sequence(&fock2(tau, sys.g, &p.timing), sys)?;
            let pe = rec.measurements.first().map_or(f64::NAN, |m| m.p_e);
            let state = rec
                .final_state
                .ok_or_else(|| LabError::Config("sequence produced no state".into()))?;
            Ok((pe, state.resonator_populations()))
        })
        .collect::<Result<_>>()?;
    let best = (0..rows.len())
        .max_by(|&a, &b| rows[a].1[2].total_cmp(&rows[b].1[2]))
        .unwrap_or(0);
    let levels = sys.dim.min(10);
    let mut csv = String::from("t_s,p_e");
    for n in 0..levels {
        let _ = write!(csv, ",p{n}");
    }
    csv.push('\n');
    for (tau, (pe, pops)) in taus.iter().zip(&rows) {
        let _ = write!(csv, "{tau},{pe}");
        for v in &pops[..levels] {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    let pops = &rows[best].1;
    let mut out = Outcome::new(
        "fock2",
        0,
        json!({
            "tau_opt_s": taus[best],
            "p0": pops[0],
            "p1": pops[1],
            "p2": pops[2],
            "p_rest": 1.0 - pops[0] - pops[1] - pops[2],
        }),
    );
    out.add("fock2.csv", csv.into_bytes());
    Ok(out)
}

fn large_alpha(p: &LargeAlphaParams) -> Result<Outcome> {
    let sys = &p.system;
    let prop = Propagator::new(sys)?;
    let amps = linspace(0.0, p.alpha_max, p.alpha_points);
    let t = time_grid(p.t_max, p.t_points);
    let coherent = DensityMatrix::thermal(sys.p_e_th, sys.p_1_th, sys.dim)?;
    let one = prepared_state(TargetState::One, sys, &p.timing, 0.0)?;
    let scan = |rho: &DensityMatrix| -> Result<Vec<Vec<f64>>> {
        amps.par_iter()
            .map(|&a| Ok(simulate_trace(&prop, rho, C64::new(a, 0.0), &t)?))
            .collect()
    };
    let a = scan(&coherent)?;
    let b = scan(&one)?;
    let mut csv = String::from("alpha_abs,t_s,p_e_coherent,p_e_one\n");
    for (i, amp) in amps.iter().enumerate() {
        for (k, tk) in t.iter().enumerate() {
            let _ = writeln!(csv, "{amp},{tk},{},{}", a[i][k], b[i][k]);
        }
    }
    let vacuum_rabi = fit_damped_cosine(&t, &b[0])?;
    let mut out = Outcome::new(
        "large-alpha",
        0,
        json!({
            "levels": sys.dim,
            "vacuum_rabi_hz": rad_to_hz(vacuum_rabi.omega),
            "expected_vacuum_rabi_hz": rad_to_hz(2.0 * sys.g.abs()),
            "mean_p_e_coherent_max_alpha": a.last().map(|v| v.iter().sum::<f64>() / v.len() as f64),
        }),
    );
    out.add("large_alpha.csv", csv.into_bytes());
    for (name, data, title) in [
        (
            "large_alpha_coherent.svg",
            &a,
            "P_e after displacing the ground state",
        ),
        ("large_alpha_one.svg", &b, "P_e after displacing |1⟩"),
    ] {
        let svg = Heatmap {
            title,
            x_label: "interaction time (s)",
            y_label: "|α|",
            x_range: (0.0, p.t_max),
            y_range: (0.0, p.alpha_max),
            values: data,
            colormap: Colormap::Sequential,
        }
        .render();
        out.add(name, svg.into_bytes());
    }
    Ok(out)
}

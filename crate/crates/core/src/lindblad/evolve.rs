use super::operators::{collapse_operators, exchange_op, qubit_number_diag, SparseOp};
use super::{DensityMatrix, LindbladError, Result, SystemParams};
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Piecewise control: constant detuning, coupling with optional cosine edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub duration: f64,
    pub delta: f64,
    pub g: f64,
    /// Rise and fall time of the coupling envelope; 0 for rectangular.
    #[serde(default)]
    pub ramp: f64,
}

impl ControlSegment {
    pub fn new(duration: f64, delta: f64, g: f64) -> Self {
        Self {
            duration,
            delta,
            g,
            ramp: 0.0,
        }
    }

    pub fn with_ramp(self, ramp: f64) -> Self {
        Self { ramp, ..self }
    }

    /// Coupling envelope in `[0, 1]` at local time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.ramp <= 0.0 {
            return 1.0;
        }
        let edge = |s: f64| {
            let x = (s / self.ramp).clamp(0.0, 1.0);
            0.5 * (1.0 - (std::f64::consts::PI * x).cos())
        };
        edge(t).min(edge(self.duration - t))
    }

    fn controls(&self, t: f64) -> (f64, f64) {
        (self.delta, self.g * self.envelope(t))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub segments: Vec<ControlSegment>,
}

impl Schedule {
    pub fn new(segments: Vec<ControlSegment>) -> Self {
        Self { segments }
    }

    pub fn constant(duration: f64, delta: f64, g: f64) -> Self {
        Self::new(vec![ControlSegment::new(duration, delta, g)])
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration >= 0.0 && s.duration.is_finite()) {
                return Err(LindbladError::Argument(format!(
                    "segment {i}: bad duration {}",
                    s.duration
                )));
            }
            if !(s.ramp >= 0.0 && s.ramp.is_finite()) || !s.delta.is_finite() || !s.g.is_finite() {
                return Err(LindbladError::Argument(format!(
                    "segment {i}: non-finite control"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// RK4 step (s).
    pub dt: f64,
    /// Repeat the integration at `dt / 2` and compare `P_e`.
    pub check_convergence: bool,
    pub convergence_tol: f64,
    /// Keep the full density matrix at each grid point.
    pub store_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 0.05e-9,
            check_convergence: false,
            convergence_tol: 1e-6,
            store_states: false,
        }
    }
}

/// Observables on the requested time grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// Excited population scaled by the readout visibility.
    pub p_e: Vec<f64>,
    /// Resonator number distributions.
    pub populations: Vec<Vec<f64>>,
    /// Reduced-qubit Bloch vectors, unscaled.
    pub bloch: Vec<[f64; 3]>,
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Writes `t_s,p_e,p0..p9`; fewer population columns if `dim < 10`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let cols = self.populations.first().map_or(0, |p| p.len().min(10));
        write!(w, "t_s,p_e")?;
        for n in 0..cols {
            write!(w, ",p{n}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{:e},{:.12}", self.t[i], self.p_e[i])?;
            for p in &self.populations[i][..cols] {
                write!(w, ",{p:.12}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Precomputed Lindblad generator for one parameter set. Immutable and safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: SystemParams,
    n: usize,
    nq: Vec<f64>,
    /// Diagonal of `Σ c†c`.
    damping: Vec<f64>,
    exchange: SparseOp,
    collapse: Vec<SparseOp>,
}

struct Buffers {
    acc: Vec<C64>,
    tmp: Vec<C64>,
    k: Vec<C64>,
    x: Vec<C64>,
}

impl Buffers {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Self {
            acc: z.clone(),
            tmp: z.clone(),
            k: z.clone(),
            x: z,
        }
    }
}

impl Propagator {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let dim = params.dim;
        let n = 2 * dim;
        let collapse: Vec<SparseOp> = collapse_operators(params)?
            .into_iter()
            .map(|c| c.op)
            .collect();
        let mut damping = vec![0.0; n];
        for c in &collapse {
            let cc = c.to_dense().adjoint() * c.to_dense();
            for i in 0..n {
                for j in 0..n {
                    if i != j && cc[(i, j)].norm() > 0.0 {
                        return Err(LindbladError::Argument(
                            "non-diagonal c†c is unsupported".into(),
                        ));
                    }
                }
                damping[i] += cc[(i, i)].re;
            }
        }
        Ok(Self {
            params: *params,
            n,
            nq: qubit_number_diag(dim),
            damping,
            exchange: exchange_op(dim),
            collapse,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub(crate) fn state_to_buffer(&self, rho: &DensityMatrix) -> Result<Vec<C64>> {
        if rho.dim_q != 2 || rho.dim_r != self.params.dim {
            return Err(LindbladError::Argument(format!(
                "state is {}×{}, propagator expects 2×{}",
                rho.dim_q, rho.dim_r, self.params.dim
            )));
        }
        let n = self.n;
        Ok((0..n * n).map(|k| rho.data[(k / n, k % n)]).collect())
    }

    pub(crate) fn buffer_to_state(&self, buf: &[C64]) -> DensityMatrix {
        let n = self.n;
        DensityMatrix {
            dim_q: 2,
            dim_r: self.params.dim,
            data: DMatrix::from_fn(n, n, |i, j| buf[i * n + j]),
        }
    }

    fn rhs(&self, rho: &[C64], out: &mut [C64], x: &mut [C64], delta: f64, g: f64) {
        let n = self.n;
        let mi = C64::new(0.0, -1.0);
        // x = -i H_eff rho
        for i in 0..n {
            let d = C64::new(-0.5 * self.damping[i], -delta * self.nq[i]);
            let (src, dst) = (&rho[i * n..(i + 1) * n], &mut x[i * n..(i + 1) * n]);
            for (o, r) in dst.iter_mut().zip(src) {
                *o = d * r;
            }
            if g != 0.0 {
                for &(k, v) in &self.exchange.rows[i] {
                    let c = mi * v * g;
                    let row_k = &rho[k * n..(k + 1) * n];
                    for (o, r) in x[i * n..(i + 1) * n].iter_mut().zip(row_k) {
                        *o += c * r;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = x[i * n + j] + x[j * n + i].conj();
            }
        }
        for c in &self.collapse {
            for i in 0..n {
                for &(k, a) in &c.rows[i] {
                    for j in 0..n {
                        for &(l, b) in &c.rows[j] {
                            out[i * n + j] += a * rho[k * n + l] * b.conj();
                        }
                    }
                }
            }
        }
        // The jump sum is only Hermitian up to rounding; any anti-Hermitian
        // residue would evolve without its damping term and grow.
        for i in 0..n {
            out[i * n + i].im = 0.0;
            for j in i + 1..n {
                out[j * n + i] = out[i * n + j].conj();
            }
        }
    }

    fn rk4_step(
        &self,
        rho: &mut Vec<C64>,
        buf: &mut Buffers,
        h: f64,
        c0: (f64, f64),
        cm: (f64, f64),
        c1: (f64, f64),
    ) {
        let Buffers { acc, tmp, k, x } = buf;
        self.rhs(rho, k, x, c0.0, c0.1);
        for i in 0..rho.len() {
            acc[i] = rho[i] + k[i] * (h / 6.0);
            tmp[i] = rho[i] + k[i] * (h / 2.0);
        }
        self.rhs(tmp, k, x, cm.0, cm.1);
        for i in 0..rho.len() {
            acc[i] += k[i] * (h / 3.0);
            tmp[i] = rho[i] + k[i] * (h / 2.0);
        }
        self.rhs(tmp, k, x, cm.0, cm.1);
        for i in 0..rho.len() {
            acc[i] += k[i] * (h / 3.0);
            tmp[i] = rho[i] + k[i] * h;
        }
        self.rhs(tmp, k, x, c1.0, c1.1);
        for i in 0..rho.len() {
            acc[i] += k[i] * (h / 6.0);
        }
        std::mem::swap(rho, acc);
    }

    /// Integrates `seg` over local times `[a, b]` with steps no longer than `dt`.
    fn integrate(
        &self,
        rho: &mut Vec<C64>,
        buf: &mut Buffers,
        seg: &ControlSegment,
        a: f64,
        b: f64,
        dt: f64,
    ) {
        let len = b - a;
        if len <= 0.0 {
            return;
        }
        let steps = (len / dt).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        for s in 0..steps {
            let t0 = a + s as f64 * h;
            self.rk4_step(
                rho,
                buf,
                h,
                seg.controls(t0),
                seg.controls(t0 + 0.5 * h),
                seg.controls(t0 + h),
            );
        }
    }

    /// Advances a whole segment in place.
    pub(crate) fn run_segment(&self, rho: &mut Vec<C64>, seg: &ControlSegment, dt: f64) {
        let mut buf = Buffers::new(rho.len());
        let mut cuts = vec![0.0, seg.duration];
        if seg.ramp > 0.0 {
            cuts.extend(
                [seg.ramp, seg.duration - seg.ramp]
                    .iter()
                    .filter(|&&c| c > 0.0 && c < seg.duration),
            );
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            self.integrate(rho, &mut buf, seg, w[0], w[1], dt);
        }
    }

    fn observe(&self, buf: &[C64], t: f64, traj: &mut Trajectory, store: bool) {
        let n = self.n;
        let d = self.params.dim;
        let diag = |i: usize| buf[i * n + i].re;
        let pe: f64 = (d..n).map(diag).sum();
        let pg: f64 = (0..d).map(diag).sum();
        let ge: C64 = (0..d).map(|k| buf[k * n + d + k]).sum();
        traj.t.push(t);
        traj.p_e.push(self.params.visibility * pe);
        traj.populations
            .push((0..d).map(|k| diag(k) + diag(d + k)).collect());
        traj.bloch.push([2.0 * ge.re, -2.0 * ge.im, pe - pg]);
        traj.trace.push(pe + pg);
        if store {
            traj.states.push(self.buffer_to_state(buf));
        }
    }

    fn evolve_once(
        &self,
        rho0: &DensityMatrix,
        schedule: &Schedule,
        t_grid: &[f64],
        opts: &EvolveOptions,
    ) -> Result<Trajectory> {
        let mut rho = self.state_to_buffer(rho0)?;
        let mut buf = Buffers::new(rho.len());
        let mut traj = Trajectory::default();
        let mut next = 0;
        let mut start = 0.0;
        let total = schedule.duration();
        let tol = 1e-12 * total.max(1e-9);
        // Grid points at t = 0 are recorded before any segment runs.
        while next < t_grid.len() && t_grid[next] <= tol {
            self.observe(&rho, t_grid[next], &mut traj, opts.store_states);
            next += 1;
        }
        for seg in &schedule.segments {
            let end = start + seg.duration;
            let mut cuts: Vec<f64> = vec![0.0, seg.duration];
            if seg.ramp > 0.0 {
                cuts.extend(
                    [seg.ramp, seg.duration - seg.ramp]
                        .iter()
                        .filter(|&&c| c > 0.0 && c < seg.duration),
                );
            }
            let mut marks = Vec::new();
            let mut k = next;
            while k < t_grid.len() && t_grid[k] <= end + tol {
                let local = (t_grid[k] - start).clamp(0.0, seg.duration);
                cuts.push(local);
                marks.push((local, k));
                k += 1;
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
            let mut mark = 0;
            for w in cuts.windows(2) {
                self.integrate(&mut rho, &mut buf, seg, w[0], w[1], opts.dt);
                while mark < marks.len() && (marks[mark].0 - w[1]).abs() <= tol {
                    let idx = marks[mark].1;
                    self.observe(&rho, t_grid[idx], &mut traj, opts.store_states);
                    mark += 1;
                    next = idx + 1;
                    let tr = *traj.trace.last().unwrap();
                    if !(tr - 1.0).abs().le(&1e-6)
                        || rho.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
                    {
                        return Err(LindbladError::Convergence {
                            time: t_grid[idx],
                            reason: format!("trace drifted to {tr}"),
                            partial: Box::new(traj),
                        });
                    }
                }
            }
            start = end;
        }
        Ok(traj)
    }

    /// Integrates the master equation and records observables at `t_grid`
    /// (seconds from the start of `schedule`).
    pub fn evolve(
        &self,
        rho0: &DensityMatrix,
        schedule: &Schedule,
        t_grid: &[f64],
        opts: &EvolveOptions,
    ) -> Result<Trajectory> {
        schedule.validate()?;
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(LindbladError::Argument(format!("bad step {}", opts.dt)));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0]))
            || t_grid.iter().any(|t| !t.is_finite() || *t < 0.0)
        {
            return Err(LindbladError::Argument(
                "time grid must be nonnegative and strictly increasing".into(),
            ));
        }
        let total = schedule.duration();
        if let Some(&last) = t_grid.last() {
            if last > total * (1.0 + 1e-12) + 1e-18 {
                return Err(LindbladError::Argument(format!(
                    "time grid ends at {last:e} s, after the schedule ({total:e} s)"
                )));
            }
        }
        let traj = self.evolve_once(rho0, schedule, t_grid, opts)?;
        if opts.check_convergence {
            let fine = EvolveOptions {
                dt: opts.dt / 2.0,
                store_states: false,
                ..*opts
            };
            let other = self.evolve_once(rho0, schedule, t_grid, &fine)?;
            let worst = traj
                .p_e
                .iter()
                .zip(&other.p_e)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if worst > opts.convergence_tol {
                return Err(LindbladError::Convergence {
                    time: total,
                    reason: format!("step halving changed P_e by {worst:e}"),
                    partial: Box::new(traj),
                });
            }
        }
        Ok(traj)
    }
}

/// One-shot convenience over [`Propagator::evolve`].
pub fn evolve(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    params: &SystemParams,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    Propagator::new(params)?.evolve(rho0, schedule, t_grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hz_to_rad;

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn vacuum_rabi_matches_cosine() {
        let g = hz_to_rad(7.3e6);
        let p = SystemParams::ideal(g, 6);
        let rho = DensityMatrix::fock(1, 0, 6).unwrap();
        let t = grid(100e-9, 101);
        let traj = evolve(
            &rho,
            &Schedule::constant(100e-9, 0.0, g),
            &p,
            &t,
            &EvolveOptions::default(),
        )
        .unwrap();
        for (ti, pe) in t.iter().zip(&traj.p_e) {
            assert!((pe - (g * ti).cos().powi(2)).abs() < 1e-9, "{ti} {pe}");
        }
        let swap = std::f64::consts::PI / (2.0 * g);
        assert!((swap - 34.25e-9).abs() < 0.1e-9);
    }

    #[test]
    fn resonator_decay() {
        let p = SystemParams {
            t1: f64::INFINITY,
            t2_ramsey: f64::INFINITY,
            ..SystemParams::ideal(0.0, 4)
        };
        let p = SystemParams { t1r: 148e-9, ..p };
        let rho = DensityMatrix::fock(0, 1, 4).unwrap();
        let traj = evolve(
            &rho,
            &Schedule::constant(148e-9, 0.0, 0.0),
            &p,
            &[0.0, 148e-9],
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!((traj.populations[1][1] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((traj.trace[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detuned_rabi_amplitude() {
        let g = hz_to_rad(7.3e6);
        let delta = hz_to_rad(10e6);
        let p = SystemParams::ideal(g, 4);
        let rho = DensityMatrix::fock(1, 0, 4).unwrap();
        let t = grid(80e-9, 41);
        let traj = evolve(
            &rho,
            &Schedule::constant(80e-9, delta, g),
            &p,
            &t,
            &EvolveOptions::default(),
        )
        .unwrap();
        let om = (delta * delta + 4.0 * g * g).sqrt();
        for (ti, pe) in t.iter().zip(&traj.p_e) {
            let expect = 1.0 - 4.0 * g * g / (om * om) * (0.5 * om * ti).sin().powi(2);
            assert!((pe - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn ramped_swap_area() {
        let g = hz_to_rad(7.3e6);
        let ramp = 5e-9;
        let seg =
            ControlSegment::new(std::f64::consts::PI / (2.0 * g) + ramp, 0.0, g).with_ramp(ramp);
        let p = SystemParams::ideal(g, 4);
        let rho = DensityMatrix::fock(1, 0, 4).unwrap();
        let traj = evolve(
            &rho,
            &Schedule::new(vec![seg]),
            &p,
            &[seg.duration],
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!(traj.p_e[0] < 1e-9, "{}", traj.p_e[0]);
        assert!(
            (seg.envelope(0.0)).abs() < 1e-15
                && (seg.envelope(seg.duration / 2.0) - 1.0).abs() < 1e-15
        );
    }

    #[test]
    fn step_halving_passes() {
        let p = SystemParams::default();
        let rho = DensityMatrix::thermal(0.0, 0.0, 10).unwrap();
        let rho = rho
            .apply_qubit_unitary(&super::super::rotation_operator(std::f64::consts::PI, 0.0))
            .unwrap();
        let opts = EvolveOptions {
            check_convergence: true,
            ..EvolveOptions::default()
        };
        let t = grid(60e-9, 31);
        evolve(&rho, &Schedule::constant(60e-9, 0.0, p.g), &p, &t, &opts).unwrap();
    }

    #[test]
    fn grid_validation() {
        let p = SystemParams::ideal(1e7, 3);
        let rho = DensityMatrix::fock(0, 0, 3).unwrap();
        let s = Schedule::constant(1e-9, 0.0, 0.0);
        let o = EvolveOptions::default();
        assert!(evolve(&rho, &s, &p, &[0.5e-9, 0.2e-9], &o).is_err());
        assert!(evolve(&rho, &s, &p, &[2e-9], &o).is_err());
        let wrong = DensityMatrix::fock(0, 0, 4).unwrap();
        assert!(evolve(&wrong, &s, &p, &[0.0], &o).is_err());
    }

    #[test]
    fn csv_header() {
        let p = SystemParams::ideal(1e7, 12);
        let rho = DensityMatrix::fock(0, 0, 12).unwrap();
        let traj = evolve(
            &rho,
            &Schedule::constant(1e-9, 0.0, 0.0),
            &p,
            &[0.0, 1e-9],
            &EvolveOptions::default(),
        )
        .unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t_s,p_e,p0,p1,p2,p3,p4,p5,p6,p7,p8,p9\n"));
        assert_eq!(text.lines().count(), 3);
    }
}

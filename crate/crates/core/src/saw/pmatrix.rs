//! Three-port P-matrix algebra for one-dimensional SAW structures.
//!
//! Port convention: acoustic port 1 on the left, acoustic port 2 on the
//! right, port 3 electrical. `[b1, b2, I] = P · [a1, a2, V]`, where `a` are
//! incident wave amplitudes, `b` outgoing amplitudes, `V` the bus voltage and
//! `I` the current drawn. Acoustic power is `|a|²/2`.

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PMatrix(pub [[C64; 3]; 3]);

impl PMatrix {
    /// A zero-length section: full transmission, no reflection, no
    /// transduction.
    pub fn identity() -> Self {
        let mut p = [[C64::new(0.0, 0.0); 3]; 3];
        p[0][1] = C64::new(1.0, 0.0);
        p[1][0] = C64::new(1.0, 0.0);
        PMatrix(p)
    }

    /// Free propagation over a length with complex phase `theta = k·d − iη·d`.
    pub fn propagation(theta: C64) -> Self {
        let t = (-C64::i() * theta).exp();
        let mut p = [[C64::new(0.0, 0.0); 3]; 3];
        p[0][1] = t;
        p[1][0] = t;
        PMatrix(p)
    }

    /// Lumped, lossless, symmetric reflector with amplitude reflection `r`,
    /// optionally driven as an electrode with source strength `source`
    /// (zero for floating mirror lines).
    ///
    /// The transmission is `t = ±i·|t|·r/|r|` so that `r t* + t r* = 0`, on
    /// the branch with `Re t ≥ 0` (continuous with `t = 1` at `r = 0`). The
    /// emitted amplitude carries the phase `sqrt(−(r + t))` (upper half plane), which is the one
    /// compatible with energy conservation for a point source at the
    /// reflection plane; reciprocity fixes `P31 = P32 = −2 P13`.
    pub fn electrode(r: C64, source: f64) -> Self {
        let mag = r.norm();
        let t_mag = (1.0 - mag * mag).max(0.0).sqrt();
        let t = if mag == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            let t = C64::i() * t_mag * (r / mag);
            if t.re < 0.0 {
                -t
            } else {
                t
            }
        };
        let mut phase = (-(r + t)).sqrt();
        if phase.im < 0.0 {
            phase = -phase;
        }
        let e = phase * source;
        PMatrix([
            [r, t, e],
            [t, r, e],
            [-2.0 * e, -2.0 * e, C64::new(2.0 * e.norm_sqr(), 0.0)],
        ])
    }

    pub fn reflection_left(&self) -> C64 {
        self.0[0][0]
    }

    pub fn reflection_right(&self) -> C64 {
        self.0[1][1]
    }

    pub fn transmission(&self) -> C64 {
        self.0[1][0]
    }

    /// Electrical admittance with both acoustic ports matched.
    pub fn admittance(&self) -> C64 {
        self.0[2][2]
    }

    /// Cascades `self` (left) with `right`, electrical ports in parallel.
    pub fn cascade(&self, right: &PMatrix) -> PMatrix {
        let a = &self.0;
        let b = &right.0;
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let denom = one - a[1][1] * b[0][0];
        // Internal right-going wave c and left-going wave d, as linear forms in
        // (a1, a2, V).
        let c = [
            a[1][0] / denom,
            a[1][1] * b[0][1] / denom,
            (a[1][2] + a[1][1] * b[0][2]) / denom,
        ];
        let d = [
            b[0][0] * c[0],
            b[0][0] * c[1] + b[0][1],
            b[0][0] * c[2] + b[0][2],
        ];
        let mut p = [[zero; 3]; 3];
        let a_direct = [a[0][0], zero, a[0][2]];
        let b_direct = [zero, b[1][1], b[1][2]];
        let i_direct = [a[2][0], b[2][1], a[2][2] + b[2][2]];
        for k in 0..3 {
            p[0][k] = a_direct[k] + a[0][1] * d[k];
            p[1][k] = b_direct[k] + b[1][0] * c[k];
            p[2][k] = i_direct[k] + a[2][1] * d[k] + b[2][0] * c[k];
        }
        PMatrix(p)
    }

    /// `n`-fold cascade of `self` by repeated squaring.
    pub fn power(&self, mut n: usize) -> PMatrix {
        let mut result = PMatrix::identity();
        let mut base = *self;
        while n > 0 {
            if n & 1 == 1 {
                result = result.cascade(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.cascade(&base);
            }
        }
        result
    }

    /// Exchanges the two acoustic ports.
    pub fn mirrored(&self) -> PMatrix {
        let p = &self.0;
        PMatrix([
            [p[1][1], p[1][0], p[1][2]],
            [p[0][1], p[0][0], p[0][2]],
            [p[2][1], p[2][0], p[2][2]],
        ])
    }
}

/// One electrode period cell: half-pitch propagation, lumped electrode,
/// half-pitch propagation.
pub fn electrode_cell(theta_pitch: C64, r: C64, source: f64) -> PMatrix {
    let half = PMatrix::propagation(theta_pitch * 0.5);
    half.cascade(&PMatrix::electrode(r, source)).cascade(&half)
}

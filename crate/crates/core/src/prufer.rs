//! Prüfer phase and radius across constant pieces.
//!
//! With `psi = r sin(theta)` and `psi'/k = r cos(theta)` the phase obeys
//! `theta' = k - (V/k) sin^2(theta)`. On a constant piece that flow is solved in
//! closed form, and the unwound phase is recovered exactly:
//!
//! * oscillatory pieces (`w^2 = lambda - V > 0`) rotate uniformly by `w l` in the
//!   local frame `(psi, psi'/w)`. The frame change `tan(phi) = (w/k) tan(theta)`
//!   fixes every multiple of `pi/2`, so the winding carries over unchanged;
//! * on hyperbolic pieces the phase moves monotonically toward the attracting
//!   direction `atan(k/b) mod pi` and never reaches it, which singles out one
//!   lift of the new direction.
//!
//! Zeros of `psi` are exactly the crossings of multiples of `pi`, so
//! `floor(theta/pi)` counts them.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{param, Result};
use crate::potential::{Piece, Realization};
use crate::transfer::{check_piece, regime, regime_matrix, EnergyFrame, Regime};

/// Unwound phase, log-radius and position of one solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruferState {
    pub theta: f64,
    pub log_r: f64,
    pub x: f64,
}

/// One checkpoint of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub x: f64,
    pub theta: f64,
    pub log_r: f64,
    /// `ln |M([0,x])|`, when the matrix product is tracked alongside.
    pub log_norm: Option<f64>,
}

/// Initial phase for the boundary condition `psi(0) cos t0 - psi'(0) sin t0 = 0`.
///
/// `(psi, psi')` is proportional to `(sin t0, cos t0)`, so in the `k` frame
/// `tan(theta) = k tan(t0)`; the lift is taken in `[0, pi)`.
pub fn initial_phase(theta0: f64, frame: &EnergyFrame) -> f64 {
    let (s, c) = theta0.sin_cos();
    let t = (frame.k() * s).atan2(c);
    if t < 0.0 {
        t + PI
    } else if t >= PI {
        t - PI
    } else {
        t
    }
}

impl PruferState {
    pub fn initial(theta0: f64, frame: &EnergyFrame) -> Self {
        Self {
            theta: initial_phase(theta0, frame),
            log_r: 0.0,
            x: 0.0,
        }
    }

    /// `(psi, psi'/k)` direction.
    pub fn direction(&self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [s, c]
    }

    /// Evolve across `length` of constant potential `value`.
    pub fn advance(&self, value: f64, length: f64, frame: &EnergyFrame) -> Result<PruferState> {
        check_piece(value, length)?;
        if !(self.theta.is_finite() && self.log_r.is_finite()) {
            return param("non-finite Prufer state");
        }
        let k = frame.k();
        let (theta, dlog) = match regime(value, length, frame) {
            Regime::Oscillatory { omega } => oscillatory(self.theta, omega, k, length),
            Regime::Degenerate { w2 } if w2 > 0.0 => oscillatory(self.theta, w2.sqrt(), k, length),
            reg @ Regime::Degenerate { .. } => attracted(self.theta, 0.0, reg, k, length),
            reg @ Regime::Hyperbolic { b } => attracted(self.theta, b, reg, k, length),
        };
        if !(theta.is_finite() && dlog.is_finite()) {
            return param("Prufer update left the finite range");
        }
        Ok(PruferState {
            theta,
            log_r: self.log_r + dlog,
            x: self.x + length,
        })
    }
}

fn oscillatory(theta: f64, omega: f64, k: f64, length: f64) -> (f64, f64) {
    let rho = omega / k;
    if rho == 1.0 {
        // Free rotation: the radius is untouched.
        return (theta + omega * length, 0.0);
    }
    let turns = (theta / PI).floor();
    let rem = (theta - turns * PI).clamp(0.0, PI);
    let (s0, c0) = rem.sin_cos();
    let phi0 = (rho * s0).atan2(c0);
    let phi = phi0 + omega * length;
    let extra = (phi / PI).floor();
    let phi_rem = phi - extra * PI;
    let (s1, c1) = phi_rem.sin_cos();
    let back = s1.atan2(rho * c1);
    let (ps0, pc0) = phi0.sin_cos();
    let dlog = s1.hypot(rho * c1).ln() - ps0.hypot(rho * pc0).ln();
    ((turns + extra) * PI + back, dlog)
}

fn attracted(theta: f64, b: f64, reg: Regime, k: f64, length: f64) -> (f64, f64) {
    let a = (k / b).atan();
    let target = ((theta + a) / PI).floor() * PI + a;
    let (m, ls) = regime_matrix(reg, length, k);
    let (s, c) = theta.sin_cos();
    let w = m.apply([s, c]);
    let norm = w[0].hypot(w[1]);
    let residue = w[0].atan2(w[1]);
    let mid = 0.5 * (theta + target);
    let j = ((mid - residue) / PI).round();
    (residue + j * PI, ls + norm.ln())
}

pub fn advance_piece(
    state: &PruferState,
    piece: &Piece,
    frame: &EnergyFrame,
) -> Result<PruferState> {
    state.advance(piece.value, piece.length, frame)
}

/// Fold the flow over a realization, recording the state at each checkpoint.
///
/// Pieces are split at checkpoints; evolution stops after the last one.
pub fn advance_realization(
    state: &PruferState,
    realization: &Realization,
    frame: &EnergyFrame,
    checkpoints: &[f64],
) -> Result<Vec<TraceRecord>> {
    check_checkpoints(checkpoints, realization.total_length())?;
    let mut st = *state;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let bounds = realization.boundaries();
    for (i, piece) in realization.pieces.iter().enumerate() {
        if next == checkpoints.len() {
            break;
        }
        let end = bounds[i + 1];
        let mut pos = bounds[i];
        st.x = pos;
        while next < checkpoints.len() && checkpoints[next] <= end {
            let c = checkpoints[next];
            if c > pos {
                st = st.advance(piece.value, c - pos, frame)?;
                pos = c;
            }
            st.x = c;
            out.push(TraceRecord {
                x: c,
                theta: st.theta,
                log_r: st.log_r,
                log_norm: None,
            });
            next += 1;
        }
        if end > pos && next < checkpoints.len() {
            st = st.advance(piece.value, end - pos, frame)?;
        }
    }
    Ok(out)
}

/// Final state after the whole realization.
pub fn evolve(
    state: &PruferState,
    realization: &Realization,
    frame: &EnergyFrame,
) -> Result<PruferState> {
    let mut st = *state;
    for p in &realization.pieces {
        st = st.advance(p.value, p.length, frame)?;
    }
    st.x = realization.total_length();
    Ok(st)
}

pub(crate) fn check_checkpoints(checkpoints: &[f64], total: f64) -> Result<()> {
    if checkpoints.windows(2).any(|w| !(w[0] <= w[1])) {
        return param("checkpoints must be sorted");
    }
    if let (Some(&first), Some(&last)) = (checkpoints.first(), checkpoints.last()) {
        if !(first >= 0.0 && last <= total) {
            return param(format!("checkpoints must lie in [0, {total}]"));
        }
    }
    Ok(())
}

/// `x,theta,log_r` rows.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut w: W) -> Result<()> {
    writeln!(w, "x,theta,log_r")?;
    for r in records {
        writeln!(w, "{:?},{:?},{:?}", r.x, r.theta, r.log_r)?;
    }
    Ok(())
}

/// Tangent update across a barrier: `(t + (k/y) tanh y) / (t (y/k) tanh y + 1)`.
///
/// `t = +-inf` stands for the projective point at infinity; a vanishing
/// denominator returns `+inf`.
pub fn tan_update_f(t: f64, y: f64, k: f64) -> f64 {
    if y == 0.0 {
        return t + k;
    }
    let th = y.tanh();
    let p = k / y * th;
    let q = y / k * th;
    if t.is_infinite() {
        return 1.0 / q;
    }
    let den = t * q + 1.0;
    if den == 0.0 {
        f64::INFINITY
    } else {
        (t + p) / den
    }
}

/// Tangent update across a well: `(t + (k/y) tan y) / (-t (y/k) tan y + 1)`.
pub fn tan_update_g(t: f64, y: f64, k: f64) -> f64 {
    if y == 0.0 {
        return t + k;
    }
    let tn = y.tan();
    let p = k / y * tn;
    let q = y / k * tn;
    if t.is_infinite() {
        return -1.0 / q;
    }
    let den = 1.0 - t * q;
    if den == 0.0 {
        f64::INFINITY
    } else {
        (t + p) / den
    }
}

/// State of the phase chain `theta(n) mod pi`, stored as a unit vector
/// `(sin, cos)` so that `t = tan(theta)` may pass through infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseChainState {
    s: f64,
    c: f64,
}

impl PhaseChainState {
    pub fn from_t(t: f64) -> Self {
        if t.is_infinite() {
            return Self { s: 1.0, c: 0.0 };
        }
        let n = t.hypot(1.0);
        Self {
            s: t / n,
            c: 1.0 / n,
        }
    }

    pub fn from_theta(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { s, c }
    }

    /// `tan(theta)`; `+inf` at the projective point.
    pub fn t(&self) -> f64 {
        if self.c == 0.0 {
            f64::INFINITY
        } else {
            self.s / self.c
        }
    }

    /// `theta mod pi` in `[0, pi)`.
    pub fn theta_mod(&self) -> f64 {
        let a = self.s.atan2(self.c);
        let r = a.rem_euclid(PI);
        if r >= PI {
            0.0
        } else {
            r
        }
    }
}

/// One step of the Model I phase chain: a unit bump of height `x`.
pub fn phase_chain_step(
    state: &PhaseChainState,
    x: f64,
    frame: &EnergyFrame,
) -> Result<PhaseChainState> {
    if !(x.is_finite() && x > 0.0) {
        return param(format!("bump height must be positive, got {x}"));
    }
    let (m, _) = regime_matrix(regime(x, 1.0, frame), 1.0, frame.k());
    let w = m.apply([state.s, state.c]);
    let n = w[0].hypot(w[1]);
    Ok(PhaseChainState {
        s: w[0] / n,
        c: w[1] / n,
    })
}

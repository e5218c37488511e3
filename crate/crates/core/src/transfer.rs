//! Monodromy matrices of constant pieces and an overflow-safe product.
//!
//! Solutions are propagated in the normalized frame `(psi, psi'/k)` where
//! `k = sqrt|lambda|`. On a piece of height `V` and length `l` put
//! `w^2 = lambda - V`:
//!
//! * `w^2 > 0`: `[[cos wl, (k/w) sin wl], [-(w/k) sin wl, cos wl]]`
//! * `w^2 < 0`, `b = sqrt(V - lambda)`: `[[cosh bl, (k/b) sinh bl], [(b/k) sinh bl, cosh bl]]`
//! * `|w^2| l^2` tiny: the common analytic limit `[[1, kl], [0, 1]]` plus series corrections.
//!
//! Hyperbolic matrices are built with `e^{bl}` already factored out, so heights
//! far beyond the `cosh` overflow threshold stay representable.

use std::ops::Mul;

use crate::error::{param, Error, Result};

/// Below this value of `|w^2| l^2` the series branch is used.
pub const DEGENERATE_THRESHOLD: f64 = 1e-8;

const SATURATION_LIMIT: f64 = 1e300;

/// Row-major 2x2 real matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

/// Spectral parameter together with the frequency used to normalize `psi'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyFrame {
    lambda: f64,
    k: f64,
}

impl EnergyFrame {
    /// `k = sqrt|lambda|`; at `lambda = 0` the frame falls back to `k = 1`.
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return param(format!("energy must be finite, got {lambda}"));
        }
        let k = if lambda != 0.0 {
            lambda.abs().sqrt()
        } else {
            1.0
        };
        Ok(Self { lambda, k })
    }

    /// Positive-energy frame `lambda = k^2`.
    pub fn from_k(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return param(format!("frequency must be positive, got {k}"));
        }
        Ok(Self { lambda: k * k, k })
    }

    /// Energy `lambda` seen in a frame normalized by an arbitrary `k`.
    ///
    /// Shooting across many energies uses one fixed `k`, so that the phase at
    /// the far end is a monotone function of `lambda`.
    pub fn with_normalization(lambda: f64, k: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return param(format!("energy must be finite, got {lambda}"));
        }
        if !(k.is_finite() && k > 0.0) {
            return param(format!("frequency must be positive, got {k}"));
        }
        Ok(Self { lambda, k })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// A matrix stored as `e^{log_scale} * m` with `|m|_F` kept in `[1/2, 2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledMat {
    m: Mat2,
    log_scale: f64,
}

impl Default for ScaledMat {
    fn default() -> Self {
        Self::identity()
    }
}

impl ScaledMat {
    pub fn identity() -> Self {
        Self {
            m: Mat2::IDENTITY,
            log_scale: 0.0,
        }
    }

    /// Wrap `e^{log_scale} * m`, renormalizing if `|m|_F` is outside `[1/2, 2]`.
    pub fn from_parts(m: Mat2, log_scale: f64) -> Result<Self> {
        if !m.is_finite() || !log_scale.is_finite() {
            return Err(Error::Saturation("non-finite matrix entry".into()));
        }
        let f = m.frobenius();
        if f == 0.0 {
            return Err(Error::Saturation("matrix collapsed to zero".into()));
        }
        let out = if (0.5..=2.0).contains(&f) {
            Self { m, log_scale }
        } else {
            Self {
                m: m.scale(1.0 / f),
                log_scale: log_scale + f.ln(),
            }
        };
        if out.log_scale.abs() > SATURATION_LIMIT {
            return Err(Error::Saturation(format!(
                "log scale {} out of range",
                out.log_scale
            )));
        }
        Ok(out)
    }

    pub fn from_mat(m: Mat2) -> Result<Self> {
        Self::from_parts(m, 0.0)
    }

    /// The de-scaled matrix.
    pub fn matrix(&self) -> Mat2 {
        self.m
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// The true matrix, when its entries are representable.
    pub fn to_mat(&self) -> Option<Mat2> {
        let m = self.m.scale(self.log_scale.exp());
        m.is_finite().then_some(m)
    }

    /// Represents `next * self`: later pieces act on the left.
    pub fn accumulate(&self, next: &ScaledMat) -> Result<ScaledMat> {
        Self::from_parts(next.m * self.m, self.log_scale + next.log_scale)
    }

    /// `ln` of the Frobenius norm of the true matrix.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.m.frobenius().ln()
    }

    /// Direction and `ln |M v|` of the true matrix applied to `v`.
    pub fn apply(&self, v: [f64; 2]) -> Result<([f64; 2], f64)> {
        let nv = v[0].hypot(v[1]);
        if nv == 0.0 || !nv.is_finite() {
            return param("apply needs a finite nonzero vector");
        }
        let w = self.m.apply([v[0] / nv, v[1] / nv]);
        let nw = w[0].hypot(w[1]);
        if nw == 0.0 || !nw.is_finite() {
            return Err(Error::Saturation("image vector collapsed".into()));
        }
        Ok(([w[0] / nw, w[1] / nw], self.log_scale + nw.ln() + nv.ln()))
    }

    /// `|det(m) - e^{-2 log_scale}|`: unimodularity of the true matrix measured
    /// on the de-scaled entries.
    pub fn det_defect(&self) -> f64 {
        (self.m.det() - (-2.0 * self.log_scale).exp()).abs()
    }
}

/// How a piece acts at a given energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Regime {
    Oscillatory {
        omega: f64,
    },
    Hyperbolic {
        b: f64,
    },
    /// `w2 = lambda - V`, with `|w2| l^2` below the threshold.
    Degenerate {
        w2: f64,
    },
}

pub(crate) fn regime(value: f64, length: f64, frame: &EnergyFrame) -> Regime {
    let w2 = frame.lambda - value;
    if (w2 * length * length).abs() < DEGENERATE_THRESHOLD {
        Regime::Degenerate { w2 }
    } else if w2 > 0.0 {
        Regime::Oscillatory { omega: w2.sqrt() }
    } else {
        Regime::Hyperbolic { b: (-w2).sqrt() }
    }
}

pub(crate) fn check_piece(value: f64, length: f64) -> Result<()> {
    if !value.is_finite() {
        return param(format!("potential value must be finite, got {value}"));
    }
    if !(length.is_finite() && length > 0.0) {
        return param(format!("piece length must be positive, got {length}"));
    }
    Ok(())
}

/// Raw (unnormalized) matrix and log-scale for one regime.
pub(crate) fn regime_matrix(reg: Regime, length: f64, k: f64) -> (Mat2, f64) {
    match reg {
        Regime::Oscillatory { omega } => {
            let (s, c) = (omega * length).sin_cos();
            (Mat2::new(c, k / omega * s, -omega / k * s, c), 0.0)
        }
        Regime::Hyperbolic { b } => {
            let bl = b * length;
            let q = (-2.0 * bl).exp();
            let one_minus_q = -(-2.0 * bl).exp_m1();
            let diag = 0.5 * (1.0 + q);
            (
                Mat2::new(
                    diag,
                    k * one_minus_q / (2.0 * b),
                    b * one_minus_q / (2.0 * k),
                    diag,
                ),
                bl,
            )
        }
        Regime::Degenerate { w2 } => {
            let x = w2 * length * length;
            let cos_like = 1.0 - x / 2.0 + x * x / 24.0;
            let sin_over = length * (1.0 - x / 6.0 + x * x / 120.0);
            let w_sin = w2 * length * (1.0 - x / 6.0 + x * x / 120.0);
            (Mat2::new(cos_like, k * sin_over, -w_sin / k, cos_like), 0.0)
        }
    }
}

/// Monodromy of a piece of height `value` and positive `length`.
pub fn transfer_matrix(value: f64, length: f64, frame: &EnergyFrame) -> Result<ScaledMat> {
    check_piece(value, length)?;
    let (m, ls) = regime_matrix(regime(value, length, frame), length, frame.k);
    ScaledMat::from_parts(m, ls)
}

/// Free rotation by `k * gap` across a zero-potential gap.
pub fn gap_matrix(gap: f64, frame: &EnergyFrame) -> Result<ScaledMat> {
    if frame.lambda <= 0.0 {
        return Err(Error::Unsupported(
            "gap matrices need positive energy".into(),
        ));
    }
    if !(gap.is_finite() && gap > 0.0) {
        return param(format!("gap length must be positive, got {gap}"));
    }
    let (s, c) = (frame.k * gap).sin_cos();
    ScaledMat::from_mat(Mat2::new(c, s, -s, c))
}

/// Unit-height, unit-width bump.
pub fn unit_bump_matrix(frame: &EnergyFrame) -> Result<ScaledMat> {
    if frame.lambda <= 0.0 {
        return Err(Error::Unsupported(
            "unit bump matrix needs positive energy".into(),
        ));
    }
    transfer_matrix(1.0, 1.0, frame)
}

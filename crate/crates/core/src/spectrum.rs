//! Dirichlet-box spectra by Sturm oscillation.
//!
//! The number of eigenvalues `<= lambda` of the box `[0, L]` with boundary
//! angle `theta0` at the origin and Dirichlet condition at `L` is
//! `floor(theta_lambda(L) / pi)`. Shooting runs in a frame with a fixed
//! normalization, where the end phase increases strictly with `lambda`.

use std::io::Write;

use crate::error::{param, Error, Result};
use crate::potential::Realization;
use crate::prufer::{advance_realization, evolve, PruferState, TraceRecord};
use crate::stats::linear_fit;
use crate::transfer::EnergyFrame;

/// Default relative tolerance: `|dlambda| < tol * max(1, |lambda|)`.
pub const DEFAULT_TOL: f64 = 1e-10;

const SHOOTING_K: f64 = 1.0;
const MAX_BISECTIONS: usize = 400;
const FIT_GRID: usize = 512;
const MIN_FIT_POINTS: usize = 10;

#[derive(Clone, Debug)]
pub struct BoxProblem {
    realization: Realization,
    theta0: f64,
    l_box: f64,
}

impl BoxProblem {
    /// Restrict `realization` to `[0, l_box]`.
    pub fn new(realization: &Realization, theta0: f64, l_box: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::PI).contains(&theta0) {
            return param(format!("theta0 must lie in [0, pi), got {theta0}"));
        }
        let realization = if l_box == realization.total_length() {
            realization.clone()
        } else {
            realization.truncated(l_box)?
        };
        Ok(Self {
            realization,
            theta0,
            l_box,
        })
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    pub fn l_box(&self) -> f64 {
        self.l_box
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }
}

fn shooting_frame(lambda: f64) -> Result<EnergyFrame> {
    EnergyFrame::with_normalization(lambda, SHOOTING_K)
}

/// Unwound `theta_lambda(L)` in the shooting frame.
pub fn boundary_phase(problem: &BoxProblem, lambda: f64) -> Result<f64> {
    let frame = shooting_frame(lambda)?;
    let start = PruferState::initial(problem.theta0, &frame);
    Ok(evolve(&start, &problem.realization, &frame)?.theta)
}

/// Number of eigenvalues `<= lambda`.
pub fn count_below(problem: &BoxProblem, lambda: f64) -> Result<u64> {
    let theta = boundary_phase(problem, lambda)?;
    Ok((theta / std::f64::consts::PI).floor().max(0.0) as u64)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EigenSearch {
    pub eigenvalues: Vec<f64>,
    /// Windows whose eigenvalues could not be separated.
    pub failures: Vec<(f64, f64)>,
}

fn width_tol(tol: f64, lo: f64, hi: f64) -> f64 {
    tol * 1f64.max(lo.abs()).max(hi.abs())
}

/// Bisect a window known to hold exactly one eigenvalue.
fn isolate(
    problem: &BoxProblem,
    mut lo: f64,
    mut hi: f64,
    c_lo: u64,
    tol: f64,
) -> Result<Option<f64>> {
    for _ in 0..MAX_BISECTIONS {
        if hi - lo < width_tol(tol, lo, hi) {
            return Ok(Some(0.5 * (lo + hi)));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(Some(mid));
        }
        if count_below(problem, mid)? > c_lo {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(None)
}

/// All eigenvalues in `(lambda_lo, lambda_hi]`, each to relative tolerance `tol`.
pub fn find_eigenvalues(
    problem: &BoxProblem,
    lambda_lo: f64,
    lambda_hi: f64,
    tol: f64,
) -> Result<EigenSearch> {
    if !(lambda_lo < lambda_hi) || !lambda_lo.is_finite() || !lambda_hi.is_finite() {
        return param("need lambda_lo < lambda_hi");
    }
    if !(tol > 0.0) {
        return param("tolerance must be positive");
    }
    let mut out = EigenSearch::default();
    let c_lo = count_below(problem, lambda_lo)?;
    let c_hi = count_below(problem, lambda_hi)?;
    let mut stack = vec![(lambda_lo, lambda_hi, c_lo, c_hi)];
    while let Some((lo, hi, cl, ch)) = stack.pop() {
        if ch <= cl {
            continue;
        }
        if ch == cl + 1 {
            match isolate(problem, lo, hi, cl, tol)? {
                Some(l) => out.eigenvalues.push(l),
                None => out.failures.push((lo, hi)),
            }
            continue;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo < width_tol(tol, lo, hi) || mid <= lo || mid >= hi {
            out.failures.push((lo, hi));
            continue;
        }
        let cm = count_below(problem, mid)?;
        // upper half first so the lower half is popped first
        stack.push((mid, hi, cm, ch));
        stack.push((lo, mid, cl, cm));
    }
    out.eigenvalues.sort_by(f64::total_cmp);
    Ok(out)
}

/// Smallest eigenvalue strictly above `lambda`.
pub fn next_eigenvalue_above(problem: &BoxProblem, lambda: f64, tol: f64) -> Result<f64> {
    let c0 = count_below(problem, lambda)?;
    let mut step = 1f64.max(lambda.abs()) * 1e-3;
    let mut hi = lambda + step;
    let mut c_hi = count_below(problem, hi)?;
    while c_hi == c0 {
        step *= 2.0;
        hi = lambda + step;
        if !hi.is_finite() {
            return Err(Error::Unsupported(
                "no eigenvalue above the given energy".into(),
            ));
        }
        c_hi = count_below(problem, hi)?;
    }
    let mut lo = lambda;
    let mut cl = c0;
    while c_hi > cl + 1 {
        let mid = 0.5 * (lo + hi);
        let cm = count_below(problem, mid)?;
        if cm > c0 {
            hi = mid;
            c_hi = cm;
        } else {
            lo = mid;
            cl = cm;
        }
        if hi - lo < width_tol(tol, lo, hi) {
            break;
        }
    }
    isolate(problem, lo, hi, cl, tol)?
        .ok_or_else(|| Error::DegenerateFit("bisection did not converge".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub scale_exponent: f64,
    pub slope: f64,
    pub r_squared: f64,
    /// Where the two shooting solutions are matched.
    pub center: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub lambda: f64,
    pub theta_trace: Vec<TraceRecord>,
    pub decay_fit: DecayFit,
}

fn grid(l: f64) -> Vec<f64> {
    (0..=FIT_GRID)
        .map(|i| l * i as f64 / FIT_GRID as f64)
        .collect()
}

/// Left and right shooting traces on the fit grid, in the natural frame of `lambda`.
fn two_sided(problem: &BoxProblem, lambda: f64) -> Result<(Vec<f64>, Vec<TraceRecord>, Vec<f64>)> {
    let frame = EnergyFrame::new(lambda)?;
    let l = problem.l_box;
    let xs = grid(l);
    let left = advance_realization(
        &PruferState::initial(problem.theta0, &frame),
        &problem.realization,
        &frame,
        &xs,
    )?;
    let reflected = problem.realization.reflected();
    let right = advance_realization(&PruferState::initial(0.0, &frame), &reflected, &frame, &xs)?;
    // right[i] sits at l - xs[i]
    let right_log: Vec<f64> = right.iter().rev().map(|t| t.log_r).collect();
    Ok((xs, left, right_log))
}

/// Slope of the eigenfunction's log-envelope against `d^p`, `d` being the
/// distance from its peak.
///
/// The solution is shot from both ends; each is accurate while it grows
/// toward the peak. The peak is the maximum of the summed log-radii, and
/// the fit uses distances in `[D/4, 3D/4]` on the longer side (of length
/// `D`), which keeps boundary layers and the peak itself out of the fit.
pub fn decay_fit(problem: &BoxProblem, lambda: f64, scale_exponent: f64) -> Result<DecayFit> {
    Ok(analyze(problem, lambda, scale_exponent)?.decay_fit)
}

pub fn analyze(problem: &BoxProblem, lambda: f64, scale_exponent: f64) -> Result<EigenResult> {
    if !(scale_exponent.is_finite() && scale_exponent > 0.0) {
        return param("scale exponent must be positive");
    }
    let (xs, left, right) = two_sided(problem, lambda)?;
    let mut m = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..xs.len() {
        let v = left[i].log_r + right[i];
        if v > best {
            best = v;
            m = i;
        }
    }
    let center = xs[m];
    let l = problem.l_box;
    let (d_max, use_left) = if center >= l - center {
        (center, true)
    } else {
        (l - center, false)
    };
    let mut ds = Vec::new();
    let mut hs = Vec::new();
    for i in 0..xs.len() {
        let d = (xs[i] - center).abs();
        let on_side = if use_left { i <= m } else { i >= m };
        if !on_side || d < 0.25 * d_max || d > 0.75 * d_max {
            continue;
        }
        let h = if use_left {
            left[i].log_r - left[m].log_r
        } else {
            right[i] - right[m]
        };
        ds.push(d.powf(scale_exponent));
        hs.push(h);
    }
    if ds.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "only {} points in the fit window",
            ds.len()
        )));
    }
    let fit = linear_fit(&ds, &hs)?;
    Ok(EigenResult {
        lambda,
        theta_trace: left,
        decay_fit: DecayFit {
            scale_exponent,
            slope: fit.slope,
            r_squared: fit.r_squared,
            center,
        },
    })
}

/// One row of an eigenvalue table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenRow {
    pub seed: u64,
    pub l_box: f64,
    pub index: usize,
    pub lambda: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// `seed,box,index,lambda,slope,r_squared` rows.
pub fn write_eigen_csv<W: Write>(rows: &[EigenRow], mut w: W) -> Result<()> {
    writeln!(w, "seed,box,index,lambda,slope,r_squared")?;
    for r in rows {
        writeln!(
            w,
            "{},{:?},{},{:?},{:?},{:?}",
            r.seed, r.l_box, r.index, r.lambda, r.slope, r.r_squared
        )?;
    }
    Ok(())
}

//! Lyapunov exponents, rotation numbers, Darling ratios and phase-chain mixing.
//!
//! Every sampler takes a parent stream and gives replica `i` the substream
//! `stream.split(i)`, so results do not depend on scheduling.

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::potential::{generate, Model, ModelConfig, PieceKind, Realization};
use crate::prufer::{advance_realization, PhaseChainState, PruferState};
use crate::rng::{frechet_from_uniform, RngStream, TailLaw};
use crate::stats::{ks_distance, linear_fit, Ecdf};
use crate::transfer::{transfer_matrix, EnergyFrame, ScaledMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    Lyapunov,
    Ids,
}

/// Normalizer applied to a per-seed functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// Divide by the coordinate `x`.
    LinearX,
    /// Divide by the bump count `n`.
    LinearN,
    /// Divide by `n^{1/alpha}`.
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub scale: Scale,
    pub values: Vec<f64>,
    pub normalizer: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdsEstimate {
    pub scale: Scale,
    pub values: Vec<f64>,
}

/// End-of-realization observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndValues {
    pub length: f64,
    pub log_norm: f64,
    pub theta: f64,
}

fn bump_positions(r: &Realization, counts: &[usize]) -> Result<Vec<f64>> {
    if counts.windows(2).any(|w| w[0] > w[1]) {
        return param("checkpoints must be sorted");
    }
    counts
        .iter()
        .map(|&n| match n {
            0 => Ok(0.0),
            n if n <= r.n_bumps() => Ok(r.bump_ends[n - 1]),
            n => param(format!("checkpoint {n} beyond {} bumps", r.n_bumps())),
        })
        .collect()
}

/// `(L_n, ln |M([0, L_n])|)` at each bump count in `counts`.
pub fn lyapunov_trace_of(
    r: &Realization,
    frame: &EnergyFrame,
    counts: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let xs = bump_positions(r, counts)?;
    let mut out = Vec::with_capacity(counts.len());
    let mut acc = ScaledMat::identity();
    let mut next = 0;
    while next < counts.len() && counts[next] == 0 {
        out.push((0.0, acc.log_norm()));
        next += 1;
    }
    for p in &r.pieces {
        if next == counts.len() {
            break;
        }
        acc = acc.accumulate(&transfer_matrix(p.value, p.length, frame)?)?;
        if p.kind == PieceKind::Bump {
            while next < counts.len() && counts[next] == p.index {
                out.push((xs[next], acc.log_norm()));
                next += 1;
            }
        }
    }
    Ok(out)
}

/// `(L_n, theta(L_n)/pi)` at each bump count in `counts`.
pub fn ids_trace_of(
    r: &Realization,
    frame: &EnergyFrame,
    theta0: f64,
    counts: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let xs = bump_positions(r, counts)?;
    let start = PruferState::initial(theta0, frame);
    let trace = advance_realization(&start, r, frame, &xs)?;
    Ok(trace
        .iter()
        .map(|t| (t.x, t.theta / std::f64::consts::PI))
        .collect())
}

pub fn lyapunov_trace(
    config: &ModelConfig,
    n_bumps: usize,
    counts: &[usize],
    stream: &mut RngStream,
) -> Result<Vec<(f64, f64)>> {
    let r = generate(config, n_bumps, stream)?;
    lyapunov_trace_of(&r, &config.frame()?, counts)
}

pub fn ids_trace(
    config: &ModelConfig,
    n_bumps: usize,
    counts: &[usize],
    stream: &mut RngStream,
) -> Result<Vec<(f64, f64)>> {
    let r = generate(config, n_bumps, stream)?;
    ids_trace_of(&r, &config.frame()?, config.theta0, counts)
}

/// Matrix norm and unwound phase after the whole realization, in one pass.
pub fn end_values(r: &Realization, frame: &EnergyFrame, theta0: f64) -> Result<EndValues> {
    let mut acc = ScaledMat::identity();
    let mut st = PruferState::initial(theta0, frame);
    for p in &r.pieces {
        acc = acc.accumulate(&transfer_matrix(p.value, p.length, frame)?)?;
        st = st.advance(p.value, p.length, frame)?;
    }
    Ok(EndValues {
        length: r.total_length(),
        log_norm: acc.log_norm(),
        theta: st.theta,
    })
}

/// `sum over barriers of sqrt(X_j - k^2)`: the leading growth of `ln |M|` in Model I.
pub fn barrier_sum(r: &Realization, frame: &EnergyFrame) -> f64 {
    r.pieces
        .iter()
        .filter(|p| p.kind == PieceKind::Bump && p.value > frame.lambda())
        .map(|p| (p.value - frame.lambda()).sqrt() * p.length)
        .sum()
}

/// `sum_j sqrt(lambda + X_j)`: the local rotation of Model II.
pub fn well_rotation_sum(r: &Realization, frame: &EnergyFrame) -> f64 {
    r.pieces
        .iter()
        .filter(|p| p.kind == PieceKind::Bump && frame.lambda() > p.value)
        .map(|p| (frame.lambda() - p.value).sqrt() * p.length)
        .sum()
}

fn per_seed<T, F>(n_seeds: usize, stream: &RngStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RngStream) -> Result<T> + Sync + Send,
{
    (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| f(stream.split(i)))
        .collect()
}

/// Per-seed end values over `n_seeds` realizations.
pub fn end_value_samples(
    config: &ModelConfig,
    n_bumps: usize,
    n_seeds: usize,
    stream: &RngStream,
) -> Result<Vec<EndValues>> {
    config.validate()?;
    let frame = config.frame()?;
    per_seed(n_seeds, stream, |mut s| {
        let r = generate(config, n_bumps, &mut s)?;
        end_values(&r, &frame, config.theta0)
    })
}

/// Per-seed nonlinear-scale functionals.
///
/// Models I, II and IV divide `ln |M|` or `theta/pi` by `n^{1/alpha}`. In
/// Model III the Lyapunov functional is `ln |M([0, L_n])| / n` and the phase is
/// normalized by `n^{1/alpha}`, which follows `k L_n / pi`.
pub fn nonlinear_samples(
    config: &ModelConfig,
    n_bumps: usize,
    n_seeds: usize,
    which: Observable,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    if n_seeds < 2 {
        return param("nonlinear_samples needs at least two seeds");
    }
    let n = n_bumps as f64;
    let scale = n.powf(1.0 / config.alpha());
    let ends = end_value_samples(config, n_bumps, n_seeds, stream)?;
    Ok(ends
        .iter()
        .map(|e| match (which, config.model) {
            (Observable::Lyapunov, Model::III) => e.log_norm / n,
            (Observable::Lyapunov, _) => e.log_norm / scale,
            (Observable::Ids, _) => e.theta / (std::f64::consts::PI * scale),
        })
        .collect())
}

/// Lyapunov estimate in the requested scale from end values.
pub fn lyapunov_estimate(
    ends: &[EndValues],
    n_bumps: usize,
    alpha: f64,
    scale: Scale,
) -> LyapunovEstimate {
    let n = n_bumps as f64;
    let (values, normalizer) = match scale {
        Scale::LinearX => (ends.iter().map(|e| e.log_norm / e.length).collect(), "x"),
        Scale::LinearN => (ends.iter().map(|e| e.log_norm / n).collect(), "n"),
        Scale::Nonlinear => {
            let s = n.powf(1.0 / alpha);
            (ends.iter().map(|e| e.log_norm / s).collect(), "n^(1/alpha)")
        }
    };
    LyapunovEstimate {
        scale,
        values,
        normalizer: normalizer.to_string(),
    }
}

/// Rotation number per unit length.
pub fn linear_ids(ends: &[EndValues]) -> IdsEstimate {
    IdsEstimate {
        scale: Scale::LinearX,
        values: ends
            .iter()
            .map(|e| e.theta / (std::f64::consts::PI * e.length))
            .collect(),
    }
}

/// One Model III sample of the pair behind the stretched-exponential law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointSample {
    /// `ln |M([0, L_n])| / n`.
    pub per_bump: f64,
    /// `L_n / n^{1/alpha}`.
    pub length_scaled: f64,
    /// `ln |M([0, L_n])| / L_n^alpha`.
    pub stretched: f64,
}

pub fn joint_samples(
    config: &ModelConfig,
    n_bumps: usize,
    n_seeds: usize,
    stream: &RngStream,
) -> Result<Vec<JointSample>> {
    if config.model != Model::III {
        return param("joint samples are defined for Model III");
    }
    let alpha = config.alpha();
    let n = n_bumps as f64;
    let ends = end_value_samples(config, n_bumps, n_seeds, stream)?;
    Ok(ends
        .iter()
        .map(|e| JointSample {
            per_bump: e.log_norm / n,
            length_scaled: e.length / n.powf(1.0 / alpha),
            stretched: e.log_norm / e.length.powf(alpha),
        })
        .collect())
}

/// `max / sum` of positive values.
pub fn darling_ratio(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return param("darling_ratio of an empty list");
    }
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    for &v in values {
        if !(v > 0.0 && v.is_finite()) {
            return param(format!("darling_ratio needs positive values, got {v}"));
        }
        max = max.max(v);
        sum += v;
    }
    Ok(max / sum)
}

/// The summand with tail index `alpha` behind a law: `sqrt X` for bump
/// heights and `Y` for gaps. Both are unit Fréchet variates.
fn heavy_term(law: &TailLaw, s: &mut RngStream) -> f64 {
    frechet_from_uniform(law.alpha(), s.uniform())
}

/// `n^{-1/alpha} * sum of n heavy terms`, per replica.
pub fn normalized_sum_samples(
    law: &TailLaw,
    n: usize,
    replicas: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    if n == 0 {
        return param("n must be positive");
    }
    let scale = (n as f64).powf(1.0 / law.alpha());
    per_seed(replicas, stream, |mut s| {
        let sum: f64 = (0..n).map(|_| heavy_term(law, &mut s)).sum();
        Ok(sum / scale)
    })
}

/// Max/sum ratio of `n` heavy terms, per replica.
pub fn darling_samples(
    law: &TailLaw,
    n: usize,
    replicas: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    if n == 0 {
        return param("n must be positive");
    }
    per_seed(replicas, stream, |mut s| {
        let mut max = 0.0f64;
        let mut sum = 0.0f64;
        for _ in 0..n {
            let v = heavy_term(law, &mut s);
            max = max.max(v);
            sum += v;
        }
        Ok(max / sum)
    })
}

/// KS distances between the laws of `theta mod pi` for chains started at
/// different points.
///
/// For each seed all chains are driven by the same bump heights.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingResult {
    /// Pairs `(i, j)` of initial-point indices.
    pub pairs: Vec<(usize, usize)>,
    /// `ks[p][n - 1]` is the distance for pair `p` after `n` steps.
    pub ks: Vec<Vec<f64>>,
    pub n_seeds: usize,
}

impl MixingResult {
    /// Largest distance over all pairs after `n` steps.
    pub fn max_at(&self, n: usize) -> f64 {
        self.ks.iter().map(|row| row[n - 1]).fold(0.0, f64::max)
    }
}

/// Geometric decay fitted to `ln max(KS, 1/N)` over a step window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub per_step: f64,
    /// `KS(2n)/KS(n)` at the window start.
    pub per_doubling: f64,
    pub r_squared: f64,
}

pub fn chain_mixing(
    config: &ModelConfig,
    n_steps: usize,
    initial_points: &[f64],
    n_seeds: usize,
    stream: &RngStream,
) -> Result<MixingResult> {
    if initial_points.len() < 2 {
        return param("chain_mixing needs at least two initial points");
    }
    if config.model != Model::I {
        return param("the phase chain is defined for Model I");
    }
    if n_steps == 0 || n_seeds == 0 {
        return param("n_steps and n_seeds must be positive");
    }
    config.validate()?;
    let frame = config.frame()?;
    let law = TailLaw::bump_height(config.alpha1)?;
    let m = initial_points.len();
    let starts: Vec<PhaseChainState> = initial_points
        .iter()
        .map(|&t| PhaseChainState::from_t(t))
        .collect();
    let paths: Vec<Vec<f64>> = per_seed(n_seeds, stream, |mut s| {
        let mut states = starts.clone();
        let mut out = Vec::with_capacity(n_steps * m);
        for _ in 0..n_steps {
            let x = law.sample(&mut s);
            for st in states.iter_mut() {
                *st = crate::prufer::phase_chain_step(st, x, &frame)?;
                out.push(st.theta_mod());
            }
        }
        Ok(out)
    })?;
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            pairs.push((i, j));
        }
    }
    let mut ks = vec![Vec::with_capacity(n_steps); pairs.len()];
    let mut cols = vec![Vec::with_capacity(n_seeds); m];
    for step in 0..n_steps {
        for (c, col) in cols.iter_mut().enumerate() {
            col.clear();
            col.extend(paths.iter().map(|p| p[step * m + c]));
        }
        let ecdfs: Vec<Ecdf> = cols.iter().map(|c| Ecdf::new(c)).collect::<Result<_>>()?;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            ks[p].push(ks_distance(&ecdfs[i], &ecdfs[j]));
        }
    }
    Ok(MixingResult { pairs, ks, n_seeds })
}

/// Fit `ln max(KS(n), 1/N)` linearly in `n` over `from..=to`, using the
/// worst pair at each step.
pub fn mixing_decay(result: &MixingResult, from: usize, to: usize) -> Result<DecayFit> {
    if from == 0 || to <= from || to > result.ks.first().map_or(0, Vec::len) {
        return param("invalid step window");
    }
    let floor = 1.0 / result.n_seeds as f64;
    let xs: Vec<f64> = (from..=to).map(|n| n as f64).collect();
    let ys: Vec<f64> = (from..=to)
        .map(|n| result.max_at(n).max(floor).ln())
        .collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        per_step: fit.slope.exp(),
        per_doubling: (fit.slope * from as f64).exp(),
        r_squared: fit.r_squared,
    })
}

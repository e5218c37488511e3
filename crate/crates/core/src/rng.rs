//! Reproducible random streams and the heavy-tailed laws used by every model.
//!
//! A stream is identified by `(seed, stream_id)`; the ChaCha8 key is obtained by
//! mixing both words, so a stream can be re-created anywhere from its identity
//! alone. Parallel tasks derive their own stream with [`RngStream::split`],
//! which depends only on the parent identity and the task index.
//!
//! Bump heights and gap lengths are built from the Fréchet law
//! `P(Z <= z) = exp(-z^-alpha)`, whose tail is `z^-alpha` with a slowly varying
//! factor tending to one.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Result};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, stream_id: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state =
        splitmix64(seed) ^ splitmix64(stream_id.rotate_left(17) ^ 0xA076_1D64_78BD_642F);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// A deterministic random stream keyed by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(derive_key(seed, stream_id));
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Substream for task `task_index`.
    ///
    /// The result depends on the parent's identity only, never on how many
    /// variates the parent has already produced. Distinct indices map to
    /// distinct stream ids because every step of the derivation is a bijection.
    pub fn split(&self, task_index: u64) -> RngStream {
        let id = splitmix64(
            self.stream_id.wrapping_mul(0xD1B5_4A32_D192_ED03)
                ^ splitmix64(task_index.wrapping_add(1)),
        );
        RngStream::with_stream(self.seed, id)
    }

    /// Uniform variate on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// Unit-mean exponential variate.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Fair coin.
    pub fn coin(&mut self) -> bool {
        self.rng.next_u32() & 1 == 1
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Which random sequence of a model a [`TailLaw`] feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailKind {
    /// Bump heights `X` with `sqrt(X)` in the domain of attraction.
    BumpHeight,
    /// Gap lengths `Y` with `Y` itself in the domain of attraction.
    GapLength,
}

/// Heavy-tailed law with index `alpha` in (0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailLaw {
    alpha: f64,
    kind: TailKind,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        param(format!("alpha must lie in (0,1), got {alpha}"))
    }
}

impl TailLaw {
    pub fn new(alpha: f64, kind: TailKind) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, kind })
    }

    pub fn bump_height(alpha: f64) -> Result<Self> {
        Self::new(alpha, TailKind::BumpHeight)
    }

    pub fn gap_length(alpha: f64) -> Result<Self> {
        Self::new(alpha, TailKind::GapLength)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> TailKind {
        self.kind
    }

    /// Draw one variate of this law.
    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        let z = frechet_from_uniform(self.alpha, stream.uniform());
        match self.kind {
            TailKind::BumpHeight => z * z,
            TailKind::GapLength => z,
        }
    }
}

/// Inverse-CDF map `u -> (-ln u)^(-1/alpha)`.
#[inline]
pub fn frechet_from_uniform(alpha: f64, u: f64) -> f64 {
    let e = -u.ln();
    if alpha == 0.5 {
        1.0 / (e * e)
    } else {
        e.powf(-1.0 / alpha)
    }
}

/// `P(Z <= z)` for the unit Fréchet law of index `alpha`.
pub fn frechet_cdf(alpha: f64, z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        (-z.powf(-alpha)).exp()
    }
}

pub fn sample_frechet(alpha: f64, stream: &mut RngStream) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(frechet_from_uniform(alpha, stream.uniform()))
}

/// Bump height `X = Z^2`, so that `P(sqrt X > x) ~ x^-alpha`.
pub fn sample_bump_height(law: &TailLaw, stream: &mut RngStream) -> Result<f64> {
    if law.kind != TailKind::BumpHeight {
        return param("sample_bump_height needs a bump-height law");
    }
    Ok(law.sample(stream))
}

/// Gap length `Y = Z`.
pub fn sample_gap_length(law: &TailLaw, stream: &mut RngStream) -> Result<f64> {
    if law.kind != TailKind::GapLength {
        return param("sample_gap_length needs a gap-length law");
    }
    Ok(law.sample(stream))
}

/// Kanter's representation of the positive stable law with Laplace transform
/// `exp(-s^alpha)`, evaluated at a uniform `u` in (0,1) and a unit exponential `e`.
pub fn stable_from_parts(alpha: f64, u: f64, e: f64) -> f64 {
    let t = PI * u;
    let one_minus = 1.0 - alpha;
    let ln_a = alpha / one_minus * (alpha * t).sin().ln() + (one_minus * t).sin().ln()
        - (t.sin()).ln() / one_minus;
    (one_minus / alpha * (ln_a - e.ln())).exp()
}

/// Exact one-sided stable variate, `E[exp(-s S)] = exp(-s^alpha)`.
pub fn sample_stable_oracle(alpha: f64, stream: &mut RngStream) -> Result<f64> {
    check_alpha(alpha)?;
    let u = stream.uniform();
    let e = stream.exponential();
    Ok(stable_from_parts(alpha, u, e))
}

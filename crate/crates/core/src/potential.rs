//! Realizations of the four piecewise-constant random potentials.
//!
//! | model | pieces                                   | heavy tail            |
//! |-------|------------------------------------------|-----------------------|
//! | I     | `(X_n, 1)`                               | `sqrt X`, index `alpha1` |
//! | II    | `(-X_n, 1)`                              | `sqrt X`, index `alpha1` |
//! | III   | `(0, Y_n)` gap then `(1, 1)` bump        | `Y`, index `alpha2`   |
//! | IV    | `(0, Y_n)` gap then `((-1)^e_n X_n, 1)`  | both                  |
//!
//! The right end of bump `n` sits at `L_n = Y_1 + ... + Y_n + n` for III/IV.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{check_alpha, RngStream, TailLaw};
use crate::transfer::EnergyFrame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Model {
    I,
    II,
    III,
    IV,
}

impl Model {
    pub fn has_gaps(self) -> bool {
        matches!(self, Model::III | Model::IV)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::I => "I",
            Model::II => "II",
            Model::III => "III",
            Model::IV => "IV",
        };
        f.write_str(s)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(Model::I),
            "II" | "2" => Ok(Model::II),
            "III" | "3" => Ok(Model::III),
            "IV" | "4" => Ok(Model::IV),
            other => Err(Error::Parameter(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PieceKind {
    Bump,
    Gap,
}

impl fmt::Display for PieceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PieceKind::Bump => "bump",
            PieceKind::Gap => "gap",
        })
    }
}

/// One constant segment of the potential. `index` is the bump ordinal `n`
/// (1-based); a gap carries the index of the bump that follows it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub value: f64,
    pub length: f64,
    pub index: usize,
    pub kind: PieceKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: Model,
    /// Bump-height index (Models I, II, IV).
    pub alpha1: f64,
    /// Gap-length index (Models III, IV).
    pub alpha2: f64,
    /// Boundary angle at the origin, in `[0, pi)`.
    pub theta0: f64,
    /// Spectral parameter `lambda`.
    pub energy: f64,
}

impl ModelConfig {
    pub fn new(model: Model, alpha: f64, energy: f64) -> Self {
        Self {
            model,
            alpha1: alpha,
            alpha2: alpha,
            theta0: 0.0,
            energy,
        }
    }

    pub fn with_theta0(mut self, theta0: f64) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn with_alpha2(mut self, alpha2: f64) -> Self {
        self.alpha2 = alpha2;
        self
    }

    /// The index governing the nonlinear scale `n^{1/alpha}`.
    pub fn alpha(&self) -> f64 {
        match self.model {
            Model::I | Model::II => self.alpha1,
            Model::III => self.alpha2,
            Model::IV => self.alpha1.min(self.alpha2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.model, Model::I | Model::II | Model::IV) {
            check_alpha(self.alpha1)?;
        }
        if self.model.has_gaps() {
            check_alpha(self.alpha2)?;
        }
        if !(self.theta0.is_finite() && (0.0..std::f64::consts::PI).contains(&self.theta0)) {
            return param(format!("theta0 must lie in [0, pi), got {}", self.theta0));
        }
        if !self.energy.is_finite() {
            return param("energy must be finite");
        }
        if matches!(self.model, Model::I | Model::III) && self.energy <= 0.0 {
            return param(format!("model {} needs positive energy", self.model));
        }
        Ok(())
    }

    pub fn frame(&self) -> Result<EnergyFrame> {
        EnergyFrame::new(self.energy)
    }
}

/// One sampled potential, materialized as its list of pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub model: Option<Model>,
    pub pieces: Vec<Piece>,
    /// `X_n` (Models I, II, IV).
    pub bump_heights: Vec<f64>,
    /// `Y_n` (Models III, IV).
    pub gap_lengths: Vec<f64>,
    /// `e_n` (Model IV); `true` means the bump is negated.
    pub signs: Vec<bool>,
    /// Right end of bump `n`, i.e. `L_n` for III/IV and `n` for I/II.
    pub bump_ends: Vec<f64>,
    /// Piece boundaries: `boundaries[i]` is the left end of piece `i`, and the final
    /// entry is the total length.
    boundaries: Vec<f64>,
}

impl Realization {
    /// Assemble a realization from explicit sequences.
    ///
    /// `heights` is ignored for Model III, `gaps` for Models I/II, `signs` for
    /// every model but IV.
    pub fn from_sequences(
        model: Model,
        heights: &[f64],
        gaps: &[f64],
        signs: &[bool],
    ) -> Result<Self> {
        let n = match model {
            Model::I | Model::II => heights.len(),
            Model::III => gaps.len(),
            Model::IV => {
                if heights.len() != gaps.len() || signs.len() != heights.len() {
                    return param("model IV needs equally many heights, gaps and signs");
                }
                heights.len()
            }
        };
        if n == 0 {
            return param("a realization needs at least one bump");
        }
        let mut pieces = Vec::with_capacity(if model.has_gaps() { 2 * n } else { n });
        for j in 0..n {
            let index = j + 1;
            if model.has_gaps() {
                pieces.push(Piece {
                    value: 0.0,
                    length: gaps[j],
                    index,
                    kind: PieceKind::Gap,
                });
            }
            let value = match model {
                Model::I => heights[j],
                Model::II => -heights[j],
                Model::III => 1.0,
                Model::IV => {
                    if signs[j] {
                        -heights[j]
                    } else {
                        heights[j]
                    }
                }
            };
            pieces.push(Piece {
                value,
                length: 1.0,
                index,
                kind: PieceKind::Bump,
            });
        }
        let mut r = Self::from_pieces(pieces)?;
        r.model = Some(model);
        if model != Model::III {
            r.bump_heights = heights.to_vec();
        }
        if model.has_gaps() {
            r.gap_lengths = gaps.to_vec();
        }
        if model == Model::IV {
            r.signs = signs.to_vec();
        }
        Ok(r)
    }

    /// Arbitrary piece list (no model attached).
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return param("a realization needs at least one piece");
        }
        let mut boundaries = Vec::with_capacity(pieces.len() + 1);
        let mut bump_ends = Vec::new();
        let mut x = 0.0f64;
        boundaries.push(x);
        for p in &pieces {
            if !(p.length.is_finite() && p.length > 0.0) {
                return param(format!("piece length must be positive, got {}", p.length));
            }
            if !p.value.is_finite() {
                return param("piece value must be finite");
            }
            x += p.length;
            boundaries.push(x);
            if p.kind == PieceKind::Bump {
                bump_ends.push(x);
            }
        }
        Ok(Self {
            model: None,
            pieces,
            bump_heights: Vec::new(),
            gap_lengths: Vec::new(),
            signs: Vec::new(),
            bump_ends,
            boundaries,
        })
    }

    /// Zero potential on `[0, length]`, as a single gap piece.
    pub fn free(length: f64) -> Result<Self> {
        Self::from_pieces(vec![Piece {
            value: 0.0,
            length,
            index: 1,
            kind: PieceKind::Gap,
        }])
    }

    pub fn total_length(&self) -> f64 {
        *self.boundaries.last().expect("nonempty")
    }

    pub fn n_bumps(&self) -> usize {
        self.bump_ends.len()
    }

    /// Left end of piece `i`.
    pub fn piece_start(&self, i: usize) -> f64 {
        self.boundaries[i]
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Position of the piece containing `x`, intervals closed on the left;
    /// the total length maps to the last piece.
    pub fn l_index(&self, x: f64) -> Result<usize> {
        let total = self.total_length();
        if !(x >= 0.0 && x <= total) {
            return param(format!("coordinate {x} outside [0, {total}]"));
        }
        let last = self.pieces.len() - 1;
        // number of boundaries <= x, minus one
        let pos = self.boundaries.partition_point(|&b| b <= x);
        Ok((pos - 1).min(last))
    }

    /// Prefix of the potential on `[0, length]`, cutting the last piece if needed.
    pub fn truncated(&self, length: f64) -> Result<Self> {
        let total = self.total_length();
        if !(length > 0.0 && length <= total) {
            return param(format!("truncation length {length} outside (0, {total}]"));
        }
        let mut pieces = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let start = self.boundaries[i];
            if start >= length {
                break;
            }
            let end = self.boundaries[i + 1];
            let mut q = *p;
            if end > length {
                q.length = length - start;
            }
            pieces.push(q);
        }
        let mut r = Self::from_pieces(pieces)?;
        r.model = self.model;
        Ok(r)
    }

    /// The same potential seen from the right end.
    pub fn reflected(&self) -> Self {
        let pieces: Vec<Piece> = self.pieces.iter().rev().copied().collect();
        let mut r = Self::from_pieces(pieces).expect("pieces already validated");
        r.model = self.model;
        r
    }

    /// Columnar CSV: `index,kind,value,length`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,kind,value,length")?;
        for p in &self.pieces {
            writeln!(w, "{},{},{:?},{:?}", p.index, p.kind, p.value, p.length)?;
        }
        Ok(())
    }
}

/// Sample a realization with `n_bumps` bumps.
///
/// Variates are drawn bump by bump in the order gap, height, sign, so a
/// realization is a prefix of any longer one from the same stream.
pub fn generate(
    config: &ModelConfig,
    n_bumps: usize,
    stream: &mut RngStream,
) -> Result<Realization> {
    config.validate()?;
    if n_bumps == 0 {
        return param("n_bumps must be at least 1");
    }
    let model = config.model;
    let heights_law = match model {
        Model::III => None,
        _ => Some(TailLaw::bump_height(config.alpha1)?),
    };
    let gaps_law = if model.has_gaps() {
        Some(TailLaw::gap_length(config.alpha2)?)
    } else {
        None
    };
    let mut heights = Vec::new();
    let mut gaps = Vec::new();
    let mut signs = Vec::new();
    for _ in 0..n_bumps {
        if let Some(law) = &gaps_law {
            gaps.push(law.sample(stream));
        }
        if let Some(law) = &heights_law {
            heights.push(law.sample(stream));
        }
        if model == Model::IV {
            signs.push(stream.coin());
        }
    }
    Realization::from_sequences(model, &heights, &gaps, &signs)
}

//! Batch experiments driven by a JSON config.
//!
//! The sweep is the product `alpha_grid x energy_grid x n_grid`; each grid
//! point ("combo") gets the substream `root.split(combo)` and each seed within
//! it `combo_stream.split(seed)`. Task results are collected in task order, so
//! output files do not depend on the worker count.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{barrier_sum, chain_mixing, end_values, mixing_decay};
use crate::potential::{generate, Model, ModelConfig};
use crate::rng::{frechet_from_uniform, RngStream};
use crate::spectrum::{
    analyze, next_eigenvalue_above, write_eigen_csv, BoxProblem, EigenRow, DEFAULT_TOL,
};
use crate::stats::{ks_samples, mean_ci, median};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Lyapunov,
    Ids,
    Nonlinear,
    Darling,
    Mixing,
    Spectrum,
}

fn default_workers() -> usize {
    1
}

fn default_initial_points() -> Vec<f64> {
    vec![-10.0, 0.0, 10.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: Model,
    /// Gap index for Model IV; defaults to the grid value.
    #[serde(default)]
    pub alpha2: Option<f64>,
    #[serde(default)]
    pub theta0: f64,
    pub alpha_grid: Vec<f64>,
    pub energy_grid: Vec<f64>,
    /// Bump counts; for `mixing` these are chain lengths.
    pub n_grid: Vec<usize>,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Starting values of `tan(theta)` for `mixing`.
    #[serde(default = "default_initial_points")]
    pub initial_points: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    fn model_config(&self, alpha: f64, energy: f64) -> ModelConfig {
        let mut c = ModelConfig::new(self.model, alpha, energy).with_theta0(self.theta0);
        if let (Model::IV, Some(a2)) = (self.model, self.alpha2) {
            c = c.with_alpha2(a2);
        }
        c
    }

    /// Every violated invariant; empty iff the config can run.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha_grid.is_empty() {
            out.push("alpha_grid must not be empty".to_string());
        }
        for &a in &self.alpha_grid {
            if !(a > 0.0 && a < 1.0) {
                out.push(format!("alpha must lie in (0,1), got {a}"));
            }
        }
        if let Some(a2) = self.alpha2 {
            if !(a2 > 0.0 && a2 < 1.0) {
                out.push(format!("alpha2 must lie in (0,1), got {a2}"));
            }
        }
        if self.energy_grid.is_empty() {
            out.push("energy_grid must not be empty".to_string());
        }
        for &e in &self.energy_grid {
            if !e.is_finite() {
                out.push(format!("energy must be finite, got {e}"));
            } else if e <= 0.0 && matches!(self.model, Model::I | Model::III) {
                out.push(format!(
                    "model {} needs positive energy, got {e}",
                    self.model
                ));
            }
        }
        if self.n_grid.is_empty() {
            out.push("n_grid must not be empty".to_string());
        }
        if self.n_grid.contains(&0) {
            out.push("n_grid entries must be at least 1".to_string());
        }
        if self.n_seeds == 0 {
            out.push("n_seeds must be at least 1".to_string());
        }
        if self.workers == 0 {
            out.push("workers must be at least 1".to_string());
        }
        if !(self.theta0 >= 0.0 && self.theta0 < std::f64::consts::PI) {
            out.push(format!("theta0 must lie in [0, pi), got {}", self.theta0));
        }
        if self.output_dir.as_os_str().is_empty() {
            out.push("output_dir must not be empty".to_string());
        }
        if self.experiment == Experiment::Mixing {
            if self.model != Model::I {
                out.push("mixing is defined for model I".to_string());
            }
            if self.initial_points.len() < 2 {
                out.push("mixing needs at least two initial points".to_string());
            }
            if self.initial_points.iter().any(|t| t.is_nan()) {
                out.push("initial points must not be NaN".to_string());
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Combo {
    alpha: f64,
    energy: f64,
    n: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Row {
    combo: usize,
    seed: u64,
    observable: String,
    value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskFailure {
    pub combo: usize,
    pub seed: u64,
    pub alpha: f64,
    pub energy: f64,
    pub n: usize,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSummary {
    pub alpha: f64,
    pub energy: f64,
    pub n: usize,
    pub observable: String,
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub ci95_half_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsComparison {
    pub alpha: f64,
    pub energy: f64,
    pub observable: String,
    pub n_small: usize,
    pub n_large: usize,
    pub ks: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingSummary {
    pub alpha: f64,
    pub energy: f64,
    pub steps: usize,
    pub final_max_ks: f64,
    pub decay_per_step: Option<f64>,
    pub decay_per_doubling: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub model: Model,
    pub tasks: usize,
    pub observables: Vec<ObservableSummary>,
    pub ks_between_n: Vec<KsComparison>,
    pub mixing: Vec<MixingSummary>,
    pub failures: Vec<TaskFailure>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    master_seed: u64,
    config: &'a ExperimentConfig,
}

/// Outcome of a completed sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub rows: usize,
    pub failures: Vec<TaskFailure>,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parameter(_) => "parameter",
        Error::Unsupported(_) => "unsupported",
        Error::Saturation(_) => "saturation",
        Error::DegenerateFit(_) => "degenerate_fit",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

fn scale_exponent(model: Model, alpha: f64) -> f64 {
    match model {
        Model::I => 1.0 / alpha,
        Model::III => alpha,
        Model::II | Model::IV => 1.0,
    }
}

type TaskOutput = std::result::Result<Vec<(String, f64)>, Error>;

fn seed_task(
    cfg: &ExperimentConfig,
    combo: Combo,
    mut s: RngStream,
) -> (TaskOutput, Option<EigenRow>) {
    let mc = cfg.model_config(combo.alpha, combo.energy);
    let n = combo.n as f64;
    let nl = n.powf(1.0 / mc.alpha());
    let pi = std::f64::consts::PI;
    let mut run = || -> Result<(Vec<(String, f64)>, Option<EigenRow>)> {
        match cfg.experiment {
            Experiment::Lyapunov | Experiment::Ids | Experiment::Nonlinear => {
                let frame = mc.frame()?;
                let r = generate(&mc, combo.n, &mut s)?;
                let e = end_values(&r, &frame, mc.theta0)?;
                let mut v = Vec::new();
                if cfg.experiment != Experiment::Ids {
                    v.push(("log_norm".into(), e.log_norm));
                    v.push(("lyapunov_x".into(), e.log_norm / e.length));
                    v.push(("lyapunov_n".into(), e.log_norm / n));
                    v.push(("lyapunov_nl".into(), e.log_norm / nl));
                    if mc.model == Model::I {
                        v.push((
                            "lyapunov_over_barriers".into(),
                            e.log_norm / barrier_sum(&r, &frame),
                        ));
                    }
                }
                if cfg.experiment != Experiment::Lyapunov {
                    v.push(("theta_over_pi".into(), e.theta / pi));
                    v.push(("ids_x".into(), e.theta / (pi * e.length)));
                    v.push(("ids_nl".into(), e.theta / (pi * nl)));
                }
                if mc.model.has_gaps() {
                    v.push(("length".into(), e.length));
                }
                Ok((v, None))
            }
            Experiment::Darling => {
                let alpha = mc.alpha();
                let mut max = 0.0f64;
                let mut sum = 0.0f64;
                for _ in 0..combo.n {
                    let z = frechet_from_uniform(alpha, s.uniform());
                    max = max.max(z);
                    sum += z;
                }
                Ok((
                    vec![
                        ("max_over_sum".into(), max / sum),
                        ("normalized_sum".into(), sum / nl),
                    ],
                    None,
                ))
            }
            Experiment::Spectrum => {
                let r = generate(&mc, combo.n, &mut s)?;
                let problem = BoxProblem::new(&r, mc.theta0, r.total_length())?;
                let lambda = next_eigenvalue_above(&problem, mc.energy, DEFAULT_TOL)?;
                let res = analyze(&problem, lambda, scale_exponent(mc.model, mc.alpha()))?;
                let count = crate::spectrum::count_below(&problem, lambda)?;
                let row = EigenRow {
                    seed: 0,
                    l_box: problem.l_box(),
                    index: count as usize,
                    lambda,
                    slope: res.decay_fit.slope,
                    r_squared: res.decay_fit.r_squared,
                };
                Ok((
                    vec![
                        ("eigenvalue".into(), lambda),
                        ("eigen_index".into(), count as f64),
                        ("decay_slope".into(), res.decay_fit.slope),
                        ("decay_r_squared".into(), res.decay_fit.r_squared),
                        ("decay_center".into(), res.decay_fit.center),
                    ],
                    Some(row),
                ))
            }
            Experiment::Mixing => unreachable!("mixing runs per combo"),
        }
    };
    match run() {
        Ok((v, row)) => (Ok(v), row),
        Err(e) => (Err(e), None),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Run a validated config and write `results.csv`, `summary.json` and
/// `manifest.json` (plus `eigenvalues.csv` for spectra).
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| execute(cfg))
}

fn execute(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut combos = Vec::new();
    for &alpha in &cfg.alpha_grid {
        for &energy in &cfg.energy_grid {
            for &n in &cfg.n_grid {
                combos.push(Combo { alpha, energy, n });
            }
        }
    }
    let root = RngStream::new(cfg.master_seed);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut eigen_rows = Vec::new();
    let mut mixing = Vec::new();

    let fail = |ci: usize, c: &Combo, seed: u64, e: &Error| TaskFailure {
        combo: ci,
        seed,
        alpha: c.alpha,
        energy: c.energy,
        n: c.n,
        kind: error_kind(e).to_string(),
        message: e.to_string(),
    };

    if cfg.experiment == Experiment::Mixing {
        for (ci, c) in combos.iter().enumerate() {
            let mc = cfg.model_config(c.alpha, c.energy);
            match chain_mixing(
                &mc,
                c.n,
                &cfg.initial_points,
                cfg.n_seeds,
                &root.split(ci as u64),
            ) {
                Ok(res) => {
                    for (p, &(i, j)) in res.pairs.iter().enumerate() {
                        for (step, &ks) in res.ks[p].iter().enumerate() {
                            rows.push(Row {
                                combo: ci,
                                seed: step as u64 + 1,
                                observable: format!("ks_{i}_{j}"),
                                value: ks,
                            });
                        }
                    }
                    let fit = if c.n >= 25 {
                        mixing_decay(&res, 5, 25).ok()
                    } else {
                        None
                    };
                    mixing.push(MixingSummary {
                        alpha: c.alpha,
                        energy: c.energy,
                        steps: c.n,
                        final_max_ks: res.max_at(c.n),
                        decay_per_step: fit.map(|f| f.per_step),
                        decay_per_doubling: fit.map(|f| f.per_doubling),
                    });
                }
                Err(e) => failures.push(fail(ci, c, 0, &e)),
            }
        }
    } else {
        let tasks: Vec<(usize, u64)> = (0..combos.len())
            .flat_map(|ci| (0..cfg.n_seeds as u64).map(move |s| (ci, s)))
            .collect();
        let outputs: Vec<(TaskOutput, Option<EigenRow>)> = tasks
            .par_iter()
            .map(|&(ci, seed)| seed_task(cfg, combos[ci], root.split(ci as u64).split(seed)))
            .collect();
        for (&(ci, seed), (out, eig)) in tasks.iter().zip(outputs) {
            match out {
                Ok(values) => {
                    for (observable, value) in values {
                        rows.push(Row {
                            combo: ci,
                            seed,
                            observable,
                            value,
                        });
                    }
                    if let Some(mut row) = eig {
                        row.seed = seed;
                        eigen_rows.push(row);
                    }
                }
                Err(e) => failures.push(fail(ci, &combos[ci], seed, &e)),
            }
        }
    }

    fs::create_dir_all(&cfg.output_dir)?;
    let mut w = BufWriter::new(fs::File::create(cfg.output_dir.join("results.csv"))?);
    writeln!(w, "experiment,model,alpha,energy,n,seed,observable,value")?;
    let exp_name = serde_json::to_value(cfg.experiment)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    for r in &rows {
        let c = combos[r.combo];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            exp_name,
            cfg.model,
            fmt(c.alpha),
            fmt(c.energy),
            c.n,
            r.seed,
            r.observable,
            fmt(r.value)
        )?;
    }
    w.flush()?;

    if cfg.experiment == Experiment::Spectrum {
        let f = BufWriter::new(fs::File::create(cfg.output_dir.join("eigenvalues.csv"))?);
        write_eigen_csv(&eigen_rows, f)?;
    }

    let summary = Summary {
        experiment: cfg.experiment,
        model: cfg.model,
        tasks: if cfg.experiment == Experiment::Mixing {
            combos.len()
        } else {
            combos.len() * cfg.n_seeds
        },
        observables: if cfg.experiment == Experiment::Mixing {
            Vec::new()
        } else {
            summarize(&combos, &rows)
        },
        ks_between_n: if cfg.experiment == Experiment::Mixing {
            Vec::new()
        } else {
            compare_n(&combos, &rows)
        },
        mixing,
        failures: failures.clone(),
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: cfg.master_seed,
        config: cfg,
    };
    write_json(&cfg.output_dir.join("manifest.json"), &manifest)?;
    Ok(RunReport {
        output_dir: cfg.output_dir.clone(),
        rows: rows.len(),
        failures,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Observable names in first-appearance order.
fn observable_names(rows: &[Row]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.observable) {
            names.push(r.observable.clone());
        }
    }
    names
}

fn values(rows: &[Row], combo: usize, observable: &str) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.combo == combo && r.observable == observable)
        .map(|r| r.value)
        .collect()
}

fn summarize(combos: &[Combo], rows: &[Row]) -> Vec<ObservableSummary> {
    let names = observable_names(rows);
    let mut out = Vec::new();
    for (ci, c) in combos.iter().enumerate() {
        for name in &names {
            let v = values(rows, ci, name);
            if v.is_empty() {
                continue;
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            out.push(ObservableSummary {
                alpha: c.alpha,
                energy: c.energy,
                n: c.n,
                observable: name.clone(),
                count: v.len(),
                median: median(&v),
                mean,
                ci95_half_width: mean_ci(&v, 0.95).ok().map(|(_, h)| h),
            });
        }
    }
    out
}

/// KS distance between consecutive `n` values of each (alpha, energy) pair.
fn compare_n(combos: &[Combo], rows: &[Row]) -> Vec<KsComparison> {
    let names = observable_names(rows);
    let mut out = Vec::new();
    for (i, a) in combos.iter().enumerate() {
        let next = combos
            .iter()
            .enumerate()
            .skip(i + 1)
            .find(|(_, b)| b.alpha == a.alpha && b.energy == a.energy);
        let Some((j, b)) = next else { continue };
        for name in &names {
            let (va, vb) = (values(rows, i, name), values(rows, j, name));
            if va.is_empty() || vb.is_empty() {
                continue;
            }
            if let Ok(ks) = ks_samples(&va, &vb) {
                out.push(KsComparison {
                    alpha: a.alpha,
                    energy: a.energy,
                    observable: name.clone(),
                    n_small: a.n,
                    n_large: b.n,
                    ks,
                });
            }
        }
    }
    out
}

/// Process exit status for a finished run: 0, or 4 if any task failed.
pub fn exit_code(result: &Result<RunReport>) -> i32 {
    match result {
        Ok(r) if r.failures.is_empty() => 0,
        Ok(_) => 4,
        Err(Error::Config(_)) | Err(Error::Parameter(_)) => 2,
        Err(Error::Io(_)) => 3,
        Err(_) => 4,
    }
}

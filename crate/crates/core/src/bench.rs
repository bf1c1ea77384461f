//! Repeated seeded planner runs over environment × variant cells, summarized as CSV.
//!
//! Columns ending in `_wall_s` hold wall-clock measurements and are the only ones that
//! change between identical runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{load_problem, Problem};
use crate::error::{Error, Result};
use crate::metric::MetricKind;
use crate::planner::{plan, Algorithm, PlanResult};

/// One planner configuration compared in a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub algorithm: Algorithm,
    pub metric: MetricKind,
    pub p_bias: f64,
}

impl Variant {
    pub fn label(&self) -> String {
        format!("{}/{}/bias{}", self.algorithm.label(), self.metric.label(), self.p_bias)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    /// Problem files layered under every environment, e.g. the system.
    pub base: Vec<PathBuf>,
    pub environments: Vec<PathBuf>,
    /// Problem files layered over every environment, e.g. planner settings.
    pub overlay: Vec<PathBuf>,
    pub variants: Vec<Variant>,
    pub trials: usize,
    /// Anytime cutoffs in planner-clock seconds, ascending. The last one is the budget.
    pub cutoffs: Vec<f64>,
    pub master_seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    base: Vec<PathBuf>,
    environments: Vec<PathBuf>,
    #[serde(default)]
    overlay: Vec<PathBuf>,
    #[serde(rename = "variant")]
    variants: Vec<Variant>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_cutoffs")]
    cutoffs: Vec<f64>,
    #[serde(default)]
    master_seed: u64,
}

fn default_trials() -> usize {
    100
}

fn default_cutoffs() -> Vec<f64> {
    vec![10.0]
}

impl BenchmarkSpec {
    /// Reads a benchmark file; paths inside it are relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let raw: RawSpec = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(1, |s| text[..s.start].matches('\n').count() + 1),
            message: e.message().trim().to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let rel = |v: Vec<PathBuf>| v.into_iter().map(|p| dir.join(p)).collect();
        let spec = Self {
            base: rel(raw.base),
            environments: rel(raw.environments),
            overlay: rel(raw.overlay),
            variants: raw.variants,
            trials: raw.trials,
            cutoffs: raw.cutoffs,
            master_seed: raw.master_seed,
        };
        spec.validate().map_err(|e| Error::Validation { path: path.to_path_buf(), line: 1, message: e.to_string() })?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be at least 1".into()));
        }
        if self.cutoffs.is_empty() || self.cutoffs.windows(2).any(|w| !(w[0] < w[1])) || self.cutoffs[0] <= 0.0 {
            return Err(Error::Invalid("cutoffs must be positive and strictly ascending".into()));
        }
        if self.environments.is_empty() || self.variants.is_empty() {
            return Err(Error::Invalid("need at least one environment and one variant".into()));
        }
        for v in &self.variants {
            if !(0.0..=1.0).contains(&v.p_bias) {
                return Err(Error::Invalid(format!("p_bias {} outside [0, 1]", v.p_bias)));
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> f64 {
        *self.cutoffs.last().expect("validated")
    }

    fn problem(&self, env: &Path) -> Result<Problem> {
        let files: Vec<&Path> = self
            .base
            .iter()
            .map(PathBuf::as_path)
            .chain(std::iter::once(env))
            .chain(self.overlay.iter().map(PathBuf::as_path))
            .collect();
        load_problem(&files)
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Planner seed for `trial` of cell `cell`.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    mix(mix(mix(master) ^ cell as u64) ^ trial as u64)
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub result: PlanResult,
}

/// Mean and standard error of the mean; `None` without samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { n, mean, se })
    }
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub environment: String,
    pub variant: Variant,
    pub trials: usize,
    pub solved: usize,
    pub first_time: Option<Summary>,
    pub first_iteration: Option<Summary>,
    pub first_cost: Option<Summary>,
    /// Cost at each cutoff over the trials solved by then.
    pub cutoff_cost: Vec<Option<Summary>>,
    pub first_wall_s: Option<Summary>,
    pub total_wall_s: Option<Summary>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub cutoffs: Vec<f64>,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<Trial>,
}

fn env_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn summarize(name: String, variant: Variant, cutoffs: &[f64], trials: &[&Trial]) -> CellSummary {
    let solved: Vec<&PlanResult> = trials.iter().map(|t| &t.result).filter(|r| r.first_solution.is_some()).collect();
    let pick = |f: &dyn Fn(&PlanResult) -> f64| Summary::of(&solved.iter().map(|r| f(r)).collect::<Vec<_>>());
    let first = |r: &PlanResult| r.first_solution.expect("solved");
    CellSummary {
        environment: name,
        variant,
        trials: trials.len(),
        solved: solved.len(),
        first_time: pick(&|r| first(r).time),
        first_iteration: pick(&|r| first(r).iteration as f64),
        first_cost: pick(&|r| first(r).cost),
        cutoff_cost: cutoffs
            .iter()
            .map(|&c| Summary::of(&trials.iter().filter_map(|t| t.result.cost_at(c)).collect::<Vec<_>>()))
            .collect(),
        first_wall_s: pick(&|r| first(r).wall_s),
        total_wall_s: Summary::of(&trials.iter().map(|t| t.result.wall_s).collect::<Vec<_>>()),
    }
}

/// Runs every (environment, variant, trial) job, in parallel, and summarizes each cell.
/// Cells are ordered environment-major, then by variant.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkResult> {
    spec.validate()?;
    let problems: Vec<Problem> = spec.environments.iter().map(|e| spec.problem(e)).collect::<Result<_>>()?;
    let cells: Vec<(usize, Variant)> = (0..problems.len())
        .flat_map(|e| spec.variants.iter().map(move |v| (e, *v)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..spec.trials).map(move |t| (c, t))).collect();
    let trials: Vec<Trial> = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            let (e, v) = cells[cell];
            let prob = &problems[e];
            let mut params = prob.params.clone();
            params.metric = v.metric;
            params.sampler.p_bias = v.p_bias;
            params.time_budget = spec.budget();
            params.iteration_budget = None;
            params.stop_at_first = false;
            let seed = trial_seed(spec.master_seed, cell, trial);
            params.sampler.seed = seed;
            let result = plan(&prob.env, &prob.sys, &prob.start, &params, v.algorithm)?;
            Ok(Trial { cell, trial, seed, result })
        })
        .collect::<Result<_>>()?;
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, (e, v))| {
            let ts: Vec<&Trial> = trials.iter().filter(|t| t.cell == c).collect();
            summarize(env_name(&spec.environments[*e]), *v, &spec.cutoffs, &ts)
        })
        .collect();
    Ok(BenchmarkResult { cutoffs: spec.cutoffs.clone(), cells: summaries, trials })
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl BenchmarkResult {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "environment",
            "algorithm",
            "metric",
            "p_bias",
            "trials",
            "solved",
            "first_time_mean",
            "first_time_se",
            "first_iteration_mean",
            "first_iteration_se",
            "first_cost_mean",
            "first_cost_se",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for c in &self.cutoffs {
            h.push(format!("cost_at_{c}_mean"));
            h.push(format!("cost_at_{c}_se"));
            h.push(format!("cost_at_{c}_n"));
        }
        h.extend(["first_time_mean_wall_s", "first_time_se_wall_s", "run_mean_wall_s"].map(String::from));
        h
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                let mut r = vec![
                    c.environment.clone(),
                    c.variant.algorithm.label().to_string(),
                    c.variant.metric.label().to_string(),
                    c.variant.p_bias.to_string(),
                    c.trials.to_string(),
                    c.solved.to_string(),
                ];
                for s in [c.first_time, c.first_iteration, c.first_cost] {
                    r.push(fmt(s.map(|s| s.mean)));
                    r.push(fmt(s.map(|s| s.se)));
                }
                for s in &c.cutoff_cost {
                    r.push(fmt(s.map(|s| s.mean)));
                    r.push(fmt(s.map(|s| s.se)));
                    r.push(s.map_or(0, |s| s.n).to_string());
                }
                r.push(fmt(c.first_wall_s.map(|s| s.mean)));
                r.push(fmt(c.first_wall_s.map(|s| s.se)));
                r.push(fmt(c.total_wall_s.map(|s| s.mean)));
                r
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in self.rows() {
            w.write_record(r)?;
        }
        w.flush()?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_csv()?.as_bytes())?;
        Ok(())
    }
}

/// Drops the `_wall_s` columns from a benchmark CSV.
pub fn without_wall_columns(csv_text: &str) -> Result<String> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header = r.headers()?.clone();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !header[i].ends_with("_wall_s")).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&i| &header[i]))?;
    for rec in r.records() {
        let rec = rec?;
        w.write_record(keep.iter().map(|&i| &rec[i]))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

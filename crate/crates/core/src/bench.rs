//! Parameter sweeps over resolution, method and tessellation threshold.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::backprojection::{
    reconstruct, Epsilon, Method, ReconstructionConfig, ReconstructionStats,
};
use crate::error::{Error, Result};
use crate::io::Report;
use crate::scalar::Real;
use crate::transient::TransientDataset;
use crate::voxel::AccumulatorMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMethod {
    Traditional,
    Fast,
}

impl From<PlanMethod> for Method {
    fn from(m: PlanMethod) -> Self {
        match m {
            PlanMethod::Traditional => Method::Traditional,
            PlanMethod::Fast => Method::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Int,
    Float,
}

/// A tessellation threshold: `"voxel"` or an absolute length in metres.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PlanEpsilon {
    Length(f64),
    Keyword(String),
}

impl PlanEpsilon {
    pub fn label(&self) -> String {
        match self {
            PlanEpsilon::Length(v) => v.to_string(),
            PlanEpsilon::Keyword(s) => s.clone(),
        }
    }

    fn resolve<T: Real>(&self) -> Result<Epsilon<T>> {
        match self {
            PlanEpsilon::Length(v) if *v > 0.0 && v.is_finite() => {
                Ok(Epsilon::Absolute(T::lit(*v)))
            }
            PlanEpsilon::Keyword(s) if s == "voxel" => Ok(Epsilon::VoxelSize),
            other => Err(Error::invalid(format!("bad epsilon {:?}", other.label()))),
        }
    }
}

fn default_epsilons() -> Vec<PlanEpsilon> {
    vec![PlanEpsilon::Keyword("voxel".into())]
}

fn default_repetitions() -> usize {
    1
}

fn default_mode() -> PlanMode {
    PlanMode::Float
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    /// Dataset path, relative to the plan file when not absolute.
    pub dataset: PathBuf,
    pub resolutions: Vec<usize>,
    pub methods: Vec<PlanMethod>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<PlanEpsilon>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub warmup: usize,
    /// Per-run limit in seconds.
    pub time_budget: Option<f64>,
    pub threads: Option<usize>,
    #[serde(default = "default_mode")]
    pub mode: PlanMode,
    #[serde(default)]
    pub intensity_threshold: f64,
}

impl BenchPlan {
    pub fn parse(text: &str) -> Result<Self> {
        let plan: BenchPlan = toml::from_str(text).map_err(|e| Error::SceneParse(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = Self::parse(&text)?;
        if plan.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                plan.dataset = dir.join(&plan.dataset);
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() || self.methods.is_empty() || self.epsilons.is_empty() {
            return Err(Error::invalid("bench sweeps must be nonempty"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.resolutions.contains(&0) {
            return Err(Error::invalid("resolutions must be positive"));
        }
        if let Some(b) = self.time_budget {
            if !(b > 0.0) {
                return Err(Error::invalid("time budget must be positive"));
            }
        }
        for e in &self.epsilons {
            e.resolve::<f64>()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub method: Method,
    pub resolution: usize,
    /// `None` for the traditional method, which has no tessellation.
    pub epsilon: Option<String>,
    pub median_seconds: f64,
    pub samples: Vec<f64>,
    pub stats: ReconstructionStats,
}

impl BenchCell {
    pub fn label(&self) -> String {
        match &self.epsilon {
            Some(e) => format!("{}/{}/{}", self.method.name(), self.resolution, e),
            None => format!("{}/{}", self.method.name(), self.resolution),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedUp {
    pub resolution: usize,
    pub epsilon: String,
    /// Traditional median over fast median.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub cells: Vec<BenchCell>,
    pub speedups: Vec<SpeedUp>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every cell of the plan on `ds`. Fails as soon as a run exceeds the budget.
pub fn run_bench<T: Real>(plan: &BenchPlan, ds: &TransientDataset<T>) -> Result<BenchResult> {
    plan.validate()?;
    let mut cells = Vec::new();
    for &method in &plan.methods {
        let method: Method = method.into();
        for &resolution in &plan.resolutions {
            let eps_list: Vec<Option<&PlanEpsilon>> = match method {
                Method::Traditional => vec![None],
                Method::Fast => plan.epsilons.iter().map(Some).collect(),
            };
            for eps in eps_list {
                let cfg = ReconstructionConfig {
                    resolution,
                    method,
                    mode: match plan.mode {
                        PlanMode::Int => AccumulatorMode::Integer,
                        PlanMode::Float => AccumulatorMode::Float,
                    },
                    epsilon: eps.map_or(Ok(Epsilon::VoxelSize), |e| e.resolve())?,
                    intensity_threshold: T::lit(plan.intensity_threshold),
                    threads: plan.threads,
                    ..ReconstructionConfig::default()
                };
                cells.push(run_cell(plan, ds, &cfg, eps.map(|e| e.label()))?);
            }
        }
    }

    let mut speedups = Vec::new();
    for trad in cells.iter().filter(|c| c.method == Method::Traditional) {
        for fast in cells
            .iter()
            .filter(|c| c.method == Method::Fast && c.resolution == trad.resolution)
        {
            speedups.push(SpeedUp {
                resolution: trad.resolution,
                epsilon: fast.epsilon.clone().unwrap_or_default(),
                ratio: trad.median_seconds / fast.median_seconds,
            });
        }
    }
    Ok(BenchResult { cells, speedups })
}

fn run_cell<T: Real>(
    plan: &BenchPlan,
    ds: &TransientDataset<T>,
    cfg: &ReconstructionConfig<T>,
    epsilon: Option<String>,
) -> Result<BenchCell> {
    let mut cell = BenchCell {
        method: cfg.method,
        resolution: cfg.resolution,
        epsilon,
        median_seconds: 0.0,
        samples: Vec::with_capacity(plan.repetitions),
        stats: ReconstructionStats::default(),
    };
    for rep in 0..plan.warmup + plan.repetitions {
        let start = Instant::now();
        let (_, stats) = reconstruct(ds, cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        if let Some(budget) = plan.time_budget {
            if seconds > budget {
                return Err(Error::BudgetExceeded {
                    cell: cell.label(),
                    seconds,
                    budget,
                });
            }
        }
        if rep >= plan.warmup {
            cell.samples.push(seconds);
            cell.stats = stats;
        }
    }
    cell.median_seconds = median(&cell.samples);
    Ok(cell)
}

impl BenchResult {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("cells", self.cells.len());
        for (i, c) in self.cells.iter().enumerate() {
            let pre = format!("cell.{i}.");
            r.push(format!("{pre}method"), c.method.name())
                .push(format!("{pre}resolution"), c.resolution)
                .push(
                    format!("{pre}epsilon"),
                    c.epsilon.as_deref().unwrap_or("none"),
                )
                .push(format!("{pre}median_s"), c.median_seconds)
                .push(format!("{pre}repetitions"), c.samples.len());
            r.push_stats(&pre, &c.stats);
        }
        r.push("speedups", self.speedups.len());
        for (i, s) in self.speedups.iter().enumerate() {
            r.push(format!("speedup.{i}.resolution"), s.resolution)
                .push(format!("speedup.{i}.epsilon"), &s.epsilon)
                .push(format!("speedup.{i}.ratio"), s.ratio);
        }
        r
    }

    /// Median time at `to` over median time at `from` for the given method,
    /// using the first matching cell at each resolution.
    pub fn scaling_ratio(&self, method: Method, from: usize, to: usize) -> Option<f64> {
        let find = |r| {
            self.cells
                .iter()
                .find(|c| c.method == method && c.resolution == r)
        };
        Some(find(to)?.median_seconds / find(from)?.median_seconds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn plan_parsing() {
        let plan = BenchPlan::parse(
            "dataset = \"d.nltd\"\nresolutions = [8, 16]\nmethods = [\"fast\", \"traditional\"]\nepsilons = [\"voxel\", 0.01]\nrepetitions = 3\nwarmup = 1\n",
        )
        .unwrap();
        assert_eq!(plan.resolutions, vec![8, 16]);
        assert_eq!(plan.epsilons.len(), 2);
        assert_eq!(plan.mode, PlanMode::Float);
        assert!(
            BenchPlan::parse("dataset = \"d\"\nresolutions = []\nmethods = [\"fast\"]\n").is_err()
        );
        assert!(BenchPlan::parse(
            "dataset = \"d\"\nresolutions = [4]\nmethods = [\"fast\"]\nrepetitions = 0\n"
        )
        .is_err());
        assert!(
            BenchPlan::parse("dataset = \"d\"\nresolutions = [4]\nmethods = [\"slow\"]\n").is_err()
        );
        assert!(BenchPlan::parse(
            "dataset = \"d\"\nresolutions = [4]\nmethods = [\"fast\"]\nepsilons = [\"big\"]\n"
        )
        .is_err());
    }
}

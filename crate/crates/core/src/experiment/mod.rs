//! Monte-Carlo sweeps: experiment specifications, the realization runner,
//! CSV emission and summary statistics.

mod stats;
pub mod validation;

pub use stats::{emit_cdf, median, median_from_cdf, percentile};

use crate::apg::{apg_solve, ApgParams};
use crate::baselines::{solve_full, solve_heu};
use crate::error::{Error, Result};
use crate::network::{NetworkConfig, Realization};
use crate::sca::{sca_solve, ScaParams};
use crate::se::SolveOutcome;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Solution methods a sweep can run. The declaration order is the canonical
/// row order in every output file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SolverKind {
    Sca,
    Apg,
    Full,
    Heu,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Sca,
        SolverKind::Apg,
        SolverKind::Full,
        SolverKind::Heu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Sca => "SCA",
            SolverKind::Apg => "APG",
            SolverKind::Full => "FULL",
            SolverKind::Heu => "HEU",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown solver '{s}' (expected SCA, APG, FULL or HEU)"
                ))
            })
    }
}

/// Parses a comma-separated solver list such as `"sca,apg"`.
pub fn parse_solvers(list: &str) -> Result<Vec<SolverKind>> {
    let mut out = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(SolverKind::from_str)
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// A complete, serializable description of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: String,
    pub network: NetworkConfig,
    pub solvers: Vec<SolverKind>,
    pub num_realizations: usize,
    /// Worker threads; 1 runs on the calling thread.
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub apg: ApgParams,
    #[serde(default)]
    pub sca: ScaParams,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Names accepted by [`ExperimentSpec::preset`].
pub const PRESETS: [&str; 4] = ["small-25x7", "small-36x5", "large-150x40", "large-300x40"];

impl ExperimentSpec {
    /// Shipped scenarios: two small systems with 200 realizations and two
    /// 40-UE systems with 20, all solvers, seed 1.
    pub fn preset(name: &str) -> Result<Self> {
        let (m, k, kh, n) = match name {
            "small-25x7" => (25, 7, 5, 200),
            "small-36x5" => (36, 5, 3, 200),
            "large-150x40" => (150, 40, 15, 20),
            "large-300x40" => (300, 40, 15, 20),
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset '{name}' (available: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(ExperimentSpec {
            scenario: name.to_string(),
            network: NetworkConfig::new(m, k, kh).with_seed(1),
            solvers: SolverKind::ALL.to_vec(),
            num_realizations: n,
            parallelism: 1,
            output_dir: default_output_dir().join(name),
            apg: ApgParams::default(),
            sca: ScaParams::default(),
        })
    }

    /// Parses a JSON spec. A `"preset"` key supplies defaults that the other
    /// keys override, recursively for nested objects such as `"network"`.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        if let Some(name) = value
            .get("preset")
            .and_then(Value::as_str)
            .map(str::to_owned)
        {
            let mut base = serde_json::to_value(Self::preset(&name)?)?;
            if let Value::Object(map) = &mut value {
                map.remove("preset");
            }
            merge(&mut base, value);
            value = base;
        }
        let spec: Self = serde_json::from_value(value)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_realizations == 0 {
            return Err(Error::Config("num_realizations must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("select at least one solver".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        self.network.validate()?;
        self.apg.validate()?;
        self.sca.validate()
    }

    /// Output row counts, known without running any solver.
    pub fn dry_run(&self) -> RowCounts {
        let runs = self.num_realizations * self.solvers.len();
        RowCounts {
            ue_rows: runs * self.network.num_ues,
            summary_rows: runs,
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowCounts {
    pub ue_rows: usize,
    pub summary_rows: usize,
}

/// Result of one solver on one realization.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub realization: usize,
    pub solver: SolverKind,
    pub outcome: std::result::Result<SolveOutcome, String>,
}

impl RunRecord {
    pub fn sum_se(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.sum_se)
    }

    pub fn feasible(&self) -> bool {
        self.outcome
            .as_ref()
            .is_ok_and(|o| o.feasibility.is_feasible())
    }
}

/// All records of a sweep, sorted by `(realization, solver)`.
#[derive(Debug, Clone)]
pub struct SweepResults {
    pub spec: ExperimentSpec,
    pub records: Vec<RunRecord>,
}

/// Runs one selected solver on a realization.
pub fn run_solver(
    kind: SolverKind,
    r: &Realization,
    spec: &ExperimentSpec,
) -> Result<SolveOutcome> {
    let cfg = &spec.network;
    match kind {
        SolverKind::Sca => sca_solve(r, cfg, &spec.sca, None),
        SolverKind::Apg => apg_solve(r, cfg, &spec.apg, None),
        SolverKind::Full => solve_full(r, cfg, &spec.apg),
        SolverKind::Heu => solve_heu(r, cfg, &spec.apg),
    }
}

/// Runs every selected solver on realization `index`. Failures become
/// error records.
pub fn run_realization(spec: &ExperimentSpec, index: usize) -> Vec<RunRecord> {
    let realization = Realization::generate(&spec.network, index as u64);
    spec.solvers
        .iter()
        .map(|&solver| RunRecord {
            realization: index,
            solver,
            outcome: match &realization {
                Ok(r) => run_solver(solver, r, spec).map_err(|e| e.to_string()),
                Err(e) => Err(format!("realization: {e}")),
            },
        })
        .collect()
}

/// Runs the sweep in memory. Realizations are spread over `parallelism`
/// worker threads when the `parallel` feature is enabled.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResults> {
    spec.validate()?;
    let mut records = collect_records(spec)?;
    records.sort_by_key(|r| (r.realization, r.solver));
    Ok(SweepResults {
        spec: spec.clone(),
        records,
    })
}

#[cfg(feature = "parallel")]
fn collect_records(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    use rayon::prelude::*;
    if spec.parallelism == 1 {
        return Ok(collect_sequential(spec));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..spec.num_realizations)
            .into_par_iter()
            .flat_map_iter(|i| run_realization(spec, i))
            .collect()
    }))
}

#[cfg(not(feature = "parallel"))]
fn collect_records(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    Ok(collect_sequential(spec))
}

fn collect_sequential(spec: &ExperimentSpec) -> Vec<RunRecord> {
    (0..spec.num_realizations)
        .flat_map(|i| run_realization(spec, i))
        .collect()
}

/// Runs the sweep and writes its result files to `spec.output_dir`.
pub fn run_monte_carlo(spec: &ExperimentSpec) -> Result<SweepResults> {
    let res = run_sweep(spec)?;
    res.write(&spec.output_dir)?;
    Ok(res)
}

/// Per-solver aggregate over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub solver: SolverKind,
    pub runs: usize,
    pub failures: usize,
    pub feasible: usize,
    pub median_sum_se: f64,
    pub mean_wall_time: f64,
}

pub const UE_HEADER: [&str; 5] = [
    "realization",
    "solver",
    "ue",
    "se_bits_hz",
    "se_uncapped_bits_hz",
];
pub const SUMMARY_HEADER: [&str; 10] = [
    "realization",
    "solver",
    "sum_se",
    "sum_se_uncapped",
    "feasible",
    "failed_constraints",
    "converged",
    "iterations",
    "wall_time_s",
    "error",
];

impl SweepResults {
    pub fn for_solver(&self, solver: SolverKind) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.solver == solver)
    }

    /// Sum SEs of a solver's successful runs, in realization order.
    pub fn sum_se(&self, solver: SolverKind) -> Vec<f64> {
        self.for_solver(solver)
            .filter_map(RunRecord::sum_se)
            .collect()
    }

    pub fn summaries(&self) -> Vec<SolverSummary> {
        self.spec
            .solvers
            .iter()
            .map(|&solver| {
                let recs: Vec<&RunRecord> = self.for_solver(solver).collect();
                let ok: Vec<&SolveOutcome> = recs
                    .iter()
                    .filter_map(|r| r.outcome.as_ref().ok())
                    .collect();
                let sums: Vec<f64> = ok.iter().map(|o| o.sum_se).collect();
                SolverSummary {
                    solver,
                    runs: recs.len(),
                    failures: recs.len() - ok.len(),
                    feasible: ok.iter().filter(|o| o.feasibility.is_feasible()).count(),
                    median_sum_se: median(&sums).unwrap_or(f64::NAN),
                    mean_wall_time: ok.iter().map(|o| o.wall_time).sum::<f64>()
                        / ok.len().max(1) as f64,
                }
            })
            .collect()
    }

    /// Writes `ue_se.csv`, `summary.csv`, `cdf_sum_se.csv`, `medians.csv`
    /// and a copy of the spec as `spec.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("spec.json"),
            serde_json::to_string_pretty(&self.spec)?,
        )?;
        self.write_ue_rows(csv::Writer::from_path(dir.join("ue_se.csv"))?)?;
        self.write_summary_rows(csv::Writer::from_path(dir.join("summary.csv"))?)?;

        let mut w = csv::Writer::from_path(dir.join("cdf_sum_se.csv"))?;
        w.write_record(["solver", "sum_se", "probability"])?;
        for &solver in &self.spec.solvers {
            let sums = self.sum_se(solver);
            if sums.is_empty() {
                continue;
            }
            for (v, p) in emit_cdf(&sums, 0)? {
                w.write_record([solver.name(), &v.to_string(), &p.to_string()])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("medians.csv"))?;
        w.write_record([
            "solver",
            "runs",
            "failures",
            "feasible",
            "median_sum_se",
            "mean_wall_time_s",
        ])?;
        for s in self.summaries() {
            w.write_record([
                s.solver.name().to_string(),
                s.runs.to_string(),
                s.failures.to_string(),
                s.feasible.to_string(),
                s.median_sum_se.to_string(),
                s.mean_wall_time.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_ue_rows<W: std::io::Write>(&self, mut w: csv::Writer<W>) -> Result<()> {
        w.write_record(UE_HEADER)?;
        let k = self.spec.network.num_ues;
        for rec in &self.records {
            for ue in 0..k {
                let (se, raw) = match &rec.outcome {
                    Ok(o) => (o.se_per_ue[ue].to_string(), o.se_uncapped[ue].to_string()),
                    Err(_) => (String::new(), String::new()),
                };
                w.write_record([
                    rec.realization.to_string(),
                    rec.solver.name().to_string(),
                    ue.to_string(),
                    se,
                    raw,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_rows<W: std::io::Write>(&self, mut w: csv::Writer<W>) -> Result<()> {
        w.write_record(SUMMARY_HEADER)?;
        for rec in &self.records {
            let head = [rec.realization.to_string(), rec.solver.name().to_string()];
            let rest = match &rec.outcome {
                Ok(o) => [
                    o.sum_se.to_string(),
                    o.sum_se_uncapped().to_string(),
                    o.feasibility.is_feasible().to_string(),
                    o.feasibility
                        .failed()
                        .iter()
                        .map(|c| c.name())
                        .collect::<Vec<_>>()
                        .join(";"),
                    o.converged.to_string(),
                    o.iterations.to_string(),
                    o.wall_time.to_string(),
                    String::new(),
                ],
                Err(e) => [
                    String::new(),
                    String::new(),
                    "false".into(),
                    String::new(),
                    "false".into(),
                    "0".into(),
                    String::new(),
                    e.clone(),
                ],
            };
            w.write_record(head.iter().chain(rest.iter()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean wall time per solver with the APG/SCA ratio, as printed by `bench`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    pub rows: Vec<SolverSummary>,
    pub apg_over_sca: Option<f64>,
}

impl TimingTable {
    pub fn from_results(res: &SweepResults) -> Self {
        let rows = res.summaries();
        let time = |k: SolverKind| {
            rows.iter()
                .find(|r| r.solver == k)
                .map(|r| r.mean_wall_time)
        };
        let apg_over_sca = match (time(SolverKind::Apg), time(SolverKind::Sca)) {
            (Some(a), Some(s)) if s > 0.0 => Some(a / s),
            _ => None,
        };
        TimingTable { rows, apg_over_sca }
    }
}

impl fmt::Display for TimingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:>6} {:>14} {:>14} {:>9}",
            "solver", "runs", "mean time [s]", "median sum SE", "feasible"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<6} {:>6} {:>14.3} {:>14.3} {:>9}",
                r.solver.name(),
                r.runs,
                r.mean_wall_time,
                r.median_sum_se,
                r.feasible
            )?;
        }
        match self.apg_over_sca {
            Some(x) => write!(f, "APG/SCA time ratio: {x:.4}"),
            None => write!(f, "APG/SCA time ratio: n/a"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
        assert_eq!(
            parse_solvers("heu, sca,HEU").unwrap(),
            vec![SolverKind::Sca, SolverKind::Heu]
        );
        assert!(parse_solvers("foo").is_err());
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let spec = ExperimentSpec::preset(name).unwrap();
            spec.validate().unwrap();
            assert_eq!(spec.solvers.len(), 4);
        }
        assert!(ExperimentSpec::preset("medium").is_err());
    }

    #[test]
    fn json_overrides_preset() {
        let spec = ExperimentSpec::from_json(
            r#"{"preset": "small-36x5", "num_realizations": 3, "solvers": ["HEU"],
                "network": {"rng_seed": 9}}"#,
        )
        .unwrap();
        assert_eq!(spec.num_realizations, 3);
        assert_eq!(spec.solvers, vec![SolverKind::Heu]);
        assert_eq!(spec.network.rng_seed, 9);
        assert_eq!(spec.network.num_aps, 36);
    }

    #[test]
    fn zero_realizations_rejected() {
        let err = ExperimentSpec::from_json(r#"{"preset": "small-25x7", "num_realizations": 0}"#);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn dry_run_counts() {
        let mut spec = ExperimentSpec::preset("small-25x7").unwrap();
        spec.num_realizations = 2;
        spec.solvers = vec![SolverKind::Heu];
        assert_eq!(
            spec.dry_run(),
            RowCounts {
                ue_rows: 14,
                summary_rows: 2
            }
        );
    }
}

//! The four-step maintainer workflow: redundancy screen, suite
//! dimensionality, ED trend, and vetting of candidate benchmarks.

use std::path::{Path, PathBuf};

use serde::Serialize;
use spectradiag_core::association::{self, RedundancyFlags, RedundancyThresholds};
use spectradiag_core::composite::{self, SuiteScores};
use spectradiag_core::null;
use spectradiag_core::spectral::{self, CenteringScheme};
use spectradiag_core::stats::LineFit;
use spectradiag_core::temporal::{self, EdSeries, MannKendall};
use spectradiag_core::CorrMethod;

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub redundant: f64,
    pub vet: f64,
    pub complementary: f64,
    /// Suites below this ED are flagged as effectively one-dimensional.
    pub min_ed: f64,
    /// Significance level for the trend test.
    pub trend_alpha: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        let r = RedundancyThresholds::default();
        Thresholds {
            redundant: r.redundant,
            vet: r.vet,
            complementary: r.complementary,
            min_ed: 2.0,
            trend_alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Step<T> {
    Ok(T),
    Skipped { reason: String },
    Failed { error: String },
}

impl<T> Step<T> {
    fn from_result(r: CliResult<T>) -> Self {
        r.map_or_else(|e| Step::Failed { error: e.to_string() }, Step::Ok)
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Step::Ok(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrTable {
    pub ids: Vec<String>,
    /// Row-major; `null` where undefined.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrTable {
    pub fn from_matrix(c: &spectradiag_core::CorrMatrix) -> Self {
        CorrTable {
            ids: c.ids().to_vec(),
            values: (0..c.dim()).map(|i| (0..c.dim()).map(|j| c.get(i, j)).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyStep {
    pub method: CorrMethod,
    pub correlations: CorrTable,
    pub flags: RedundancyFlags,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkEd {
    pub benchmark_id: String,
    pub ed: f64,
    pub ed_null: f64,
    pub ratio: f64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionalityStep {
    pub suite_ed: f64,
    pub benchmarks: usize,
    pub information_density: f64,
    pub verdict: String,
    /// ED of per-benchmark task matrices, when a matrices directory is given.
    pub benchmark_eds: Vec<BenchmarkEd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendStep {
    pub series: EdSeries,
    pub mann_kendall: MannKendall,
    pub information_density: LineFit,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateVet {
    pub candidate_id: String,
    pub shared_models: usize,
    /// Correlation with each existing benchmark; `null` where undefined.
    pub correlations: Vec<(String, Option<f64>)>,
    pub max_rho: Option<f64>,
    pub most_similar: Option<String>,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VetStep {
    pub candidates: Vec<CandidateVet>,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkflowReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub thresholds: Thresholds,
    pub step1_redundancy: Step<RedundancyStep>,
    pub step2_dimensionality: Step<DimensionalityStep>,
    pub step3_trend: Step<TrendStep>,
    pub step4_vetting: Step<VetStep>,
}

#[derive(Debug, Clone, Default)]
pub struct WorkflowInputs {
    pub suite: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub matrices: Option<PathBuf>,
}

pub fn redundancy_step(s: &SuiteScores, th: &Thresholds) -> CliResult<RedundancyStep> {
    let c = association::pairwise_correlation(s.benchmark_ids(), &s.rows(), CorrMethod::Pearson)?;
    let flags = association::redundancy_flags(
        &c,
        RedundancyThresholds {
            redundant: th.redundant,
            vet: th.vet,
            complementary: th.complementary,
        },
    );
    let verdict = if flags.redundant.is_empty() {
        "no redundant pairs".to_string()
    } else {
        format!("{} redundant pair(s)", flags.redundant.len())
    };
    Ok(RedundancyStep {
        method: CorrMethod::Pearson,
        correlations: CorrTable::from_matrix(&c),
        flags,
        verdict,
    })
}

pub fn dimensionality_verdict(ed: f64, min_ed: f64) -> &'static str {
    if ed < min_ed {
        "effectively one-dimensional"
    } else {
        "multidimensional"
    }
}

fn benchmark_eds(dir: &Path, inputs: &mut Vec<InputDigest>) -> CliResult<Vec<BenchmarkEd>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let (m, digest) = io::load_matrix(&f, None)?;
        let m = if m.missing_count() > 0 { m.impute_missing()? } else { m };
        let ed = spectral::matrix_ed(&m, CenteringScheme::TaskCenter)?;
        let ed_null = null::mp_null_ed(m.n_tasks(), m.n_models());
        let id = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        inputs.push(InputDigest {
            role: format!("matrix:{id}"),
            path: f.display().to_string(),
            sha256: digest.clone(),
        });
        out.push(BenchmarkEd {
            benchmark_id: id,
            ed,
            ed_null,
            ratio: ed / ed_null,
            sha256: digest,
        });
    }
    Ok(out)
}

pub fn trend_verdict(mk: &MannKendall, alpha: f64) -> &'static str {
    if mk.p < alpha && mk.tau < 0.0 {
        "significant decline"
    } else if mk.p < alpha && mk.tau > 0.0 {
        "significant rise"
    } else {
        "no significant trend"
    }
}

pub fn trend_step(series: EdSeries, alpha: f64) -> CliResult<TrendStep> {
    let mk = temporal::mann_kendall(&series.ed)?;
    let tid = temporal::temporal_information_density(&series)?;
    Ok(TrendStep {
        verdict: trend_verdict(&mk, alpha).to_string(),
        series,
        mann_kendall: mk,
        information_density: tid,
    })
}

/// Correlates each candidate with every suite benchmark over the models
/// both tables score.
pub fn vet_step(suite: &SuiteScores, candidates: &SuiteScores, vet: f64) -> CliResult<VetStep> {
    let shared: Vec<(usize, usize)> = suite
        .model_ids()
        .iter()
        .enumerate()
        .filter_map(|(i, id)| candidates.model_ids().iter().position(|c| c == id).map(|j| (i, j)))
        .collect();
    if shared.len() < 3 {
        return Err(CliError::Usage(format!(
            "candidates share {} models with the suite; at least 3 are needed",
            shared.len()
        )));
    }
    let mut out = Vec::new();
    for (c, cid) in candidates.benchmark_ids().iter().enumerate() {
        let cand: Vec<f64> = shared.iter().map(|&(_, j)| candidates.values()[(c, j)]).collect();
        let correlations: Vec<(String, Option<f64>)> = suite
            .benchmark_ids()
            .iter()
            .enumerate()
            .map(|(b, bid)| {
                let base: Vec<f64> = shared.iter().map(|&(i, _)| suite.values()[(b, i)]).collect();
                (bid.clone(), association::correlation(&cand, &base, CorrMethod::Pearson))
            })
            .collect();
        let best = correlations
            .iter()
            .filter_map(|(id, r)| r.map(|r| (id, r)))
            .fold(None::<(&String, f64)>, |acc, (id, r)| match acc {
                Some((_, a)) if a >= r => acc,
                _ => Some((id, r)),
            });
        out.push(CandidateVet {
            candidate_id: cid.clone(),
            shared_models: shared.len(),
            max_rho: best.map(|b| b.1),
            most_similar: best.map(|b| b.0.clone()),
            passes: best.is_some_and(|b| b.1 < vet),
            correlations,
        });
    }
    let failed = out.iter().filter(|c| !c.passes).count();
    Ok(VetStep {
        verdict: if failed == 0 {
            "all candidates pass".to_string()
        } else {
            format!("{failed} candidate(s) fail vetting")
        },
        candidates: out,
    })
}

pub fn run_workflow(inputs: &WorkflowInputs, th: Thresholds, seed: u64) -> CliResult<WorkflowReport> {
    let mut digests = Vec::new();
    let suite = match &inputs.suite {
        Some(p) => {
            let (s, d) = io::load_suite(p)?;
            digests.push(InputDigest {
                role: "suite".into(),
                path: p.display().to_string(),
                sha256: d,
            });
            Some(s)
        }
        None => None,
    };
    let no_suite = || "no suite table given".to_string();

    let step1 = match &suite {
        Some(s) => Step::from_result(redundancy_step(s, &th)),
        None => Step::Skipped { reason: no_suite() },
    };

    let step2 = match &suite {
        Some(s) => Step::from_result((|| {
            let ed = composite::suite_ed(s)?;
            let benchmark_eds = match &inputs.matrices {
                Some(dir) => benchmark_eds(dir, &mut digests)?,
                None => Vec::new(),
            };
            Ok(DimensionalityStep {
                suite_ed: ed,
                benchmarks: s.n_benchmarks(),
                information_density: composite::information_density(ed, s.n_benchmarks())?,
                verdict: dimensionality_verdict(ed, th.min_ed).to_string(),
                benchmark_eds,
            })
        })()),
        None => Step::Skipped { reason: no_suite() },
    };

    let step3 = match &inputs.series {
        Some(p) => Step::from_result((|| {
            let bytes = io::read_bytes(p)?;
            digests.push(InputDigest {
                role: "series".into(),
                path: p.display().to_string(),
                sha256: io::sha256_hex(&bytes),
            });
            trend_step(io::parse_series(p, &bytes)?, th.trend_alpha)
        })()),
        None => Step::Skipped {
            reason: "no ED series given".into(),
        },
    };

    let step4 = match (&suite, &inputs.candidates) {
        (Some(s), Some(p)) => Step::from_result((|| {
            let (c, d) = io::load_suite(p)?;
            digests.push(InputDigest {
                role: "candidates".into(),
                path: p.display().to_string(),
                sha256: d,
            });
            vet_step(s, &c, th.vet)
        })()),
        (None, _) => Step::Skipped { reason: no_suite() },
        (_, None) => Step::Skipped {
            reason: "no candidate benchmarks given".into(),
        },
    };

    Ok(WorkflowReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        inputs: digests,
        thresholds: th,
        step1_redundancy: step1,
        step2_dimensionality: step2,
        step3_trend: step3,
        step4_vetting: step4,
    })
}

/// Short human-readable account of a report.
pub fn summary(r: &WorkflowReport) -> String {
    let mut out = String::new();
    let line = |step: &str, s: String| format!("{step}: {s}\n");
    out += &line(
        "1 redundancy",
        match &r.step1_redundancy {
            Step::Ok(s) => {
                let pairs: Vec<String> = s.flags.redundant.iter().map(|p| format!("{}~{} ({:.3})", p.a, p.b, p.rho)).collect();
                format!("{} {}", s.verdict, pairs.join(", "))
            }
            other => step_status(other),
        },
    );
    out += &line(
        "2 dimensionality",
        match &r.step2_dimensionality {
            Step::Ok(s) => format!("ED {:.2} over {} benchmarks (ID {:.3}): {}", s.suite_ed, s.benchmarks, s.information_density, s.verdict),
            other => step_status(other),
        },
    );
    out += &line(
        "3 trend",
        match &r.step3_trend {
            Step::Ok(s) => format!("tau {:.3}, p {:.4}: {}", s.mann_kendall.tau, s.mann_kendall.p, s.verdict),
            other => step_status(other),
        },
    );
    out += &line(
        "4 vetting",
        match &r.step4_vetting {
            Step::Ok(s) => s.verdict.clone(),
            other => step_status(other),
        },
    );
    out
}

fn step_status<T>(s: &Step<T>) -> String {
    match s {
        Step::Ok(_) => "ok".into(),
        Step::Skipped { reason } => format!("skipped ({reason})"),
        Step::Failed { error } => format!("failed ({error})"),
    }
}

//! One function per subcommand. Each returns the primary output bytes
//! (JSON, or a matrix for `synth`), optional CSV plot data and a short
//! summary for stderr.

use std::path::Path;

use serde::Serialize;
use spectradiag_core::association::{self, ClusterGrouping, Cut, RedundancyFlags, RedundancyThresholds, TetrachoricEd};
use spectradiag_core::composite::{self, CeilingOracle, FragilityReport, LeaveOneOut, Ranking, SubsetSearch};
use spectradiag_core::null::{self, AlternativeEstimates, EdReport, ShuffleScheme};
use spectradiag_core::selection::{self, CompressionCurve, SelectionMethod, SelectionResult};
use spectradiag_core::spectral::{self, CenteringScheme};
use spectradiag_core::synthetic::{self, IidKind, IrtSpec, RankRecovery};
use spectradiag_core::temporal::{self, CountPoint, SaturationFit};
use spectradiag_core::{rng, BinarizationPolicy, CorrMethod, ScoreMatrix};

use crate::cli::{Axis, Command, MatrixInput};
use crate::error::{CliError, CliResult};
use crate::io::{self, MatrixFormat};
use crate::workflow::{self, CorrTable, InputDigest, Thresholds, TrendStep, WorkflowInputs};

pub struct Output {
    pub primary: Vec<u8>,
    pub csv: Option<Vec<u8>>,
    pub summary: String,
}

fn json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn digest(role: &str, path: &Path, sha256: String) -> InputDigest {
    InputDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256,
    }
}

#[derive(Debug, Serialize)]
pub struct Prepared {
    pub input: InputDigest,
    pub tasks: usize,
    pub models: usize,
    pub missing_fraction: f64,
    /// More than 5% of cells were missing.
    pub missing_warning: bool,
    pub imputed_cells: usize,
    pub binarize_threshold: Option<f64>,
}

/// Load, optionally binarize, then impute any missing cells with model means.
fn prepare(input: &MatrixInput) -> CliResult<(ScoreMatrix, Prepared)> {
    prepare_keeping_raw(input).map(|(m, _, p)| (m, p))
}

/// As `prepare`, also returning the binarized matrix before imputation.
fn prepare_keeping_raw(input: &MatrixInput) -> CliResult<(ScoreMatrix, ScoreMatrix, Prepared)> {
    let (m, sha) = io::load_matrix(&input.matrix, input.format)?;
    let missing_fraction = m.missing_fraction();
    let missing_warning = m.missing_warning();
    let m = match input.binarize {
        Some(t) => m.binarize(BinarizationPolicy::new(t)?),
        None => m,
    };
    let imputed_cells = m.missing_count();
    let raw = m.clone();
    let m = if imputed_cells > 0 { m.impute_missing()? } else { m };
    let prep = Prepared {
        input: digest("matrix", &input.matrix, sha),
        tasks: m.n_tasks(),
        models: m.n_models(),
        missing_fraction,
        missing_warning,
        imputed_cells,
        binarize_threshold: input.binarize,
    };
    Ok((m, raw, prep))
}

fn missing_note(p: &Prepared) -> String {
    if p.missing_warning {
        format!("warning: {:.1}% of cells were missing and imputed\n", 100.0 * p.missing_fraction)
    } else {
        String::new()
    }
}

#[derive(Debug, Serialize)]
pub struct EdOutput {
    #[serde(flatten)]
    pub prepared: Prepared,
    pub report: EdReport,
    pub tetrachoric: Option<TetrachoricOutput>,
    pub significant_pcs: Option<usize>,
    pub alternatives: Option<AlternativeEstimates>,
}

#[derive(Debug, Serialize)]
pub struct TetrachoricOutput {
    #[serde(flatten)]
    pub result: TetrachoricEd,
    /// Tasks with a missing cell; imputed values are not pass/fail.
    pub incomplete_tasks: Vec<String>,
    /// Tasks every model passes or every model fails.
    pub dropped_tasks: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_ed(
    input: &MatrixInput,
    centering: &str,
    iterations: usize,
    level: f64,
    tetrachoric: bool,
    permutations: usize,
    alternatives: bool,
    seed: u64,
) -> CliResult<Output> {
    let scheme: CenteringScheme = centering.parse()?;
    let (m, raw, prepared) = prepare_keeping_raw(input)?;
    let report = null::ed_report(&m, scheme, iterations, level, seed)?;
    let tet = if tetrachoric {
        if !raw.is_binary() {
            return Err(CliError::Usage("--tetrachoric needs binary scores; add --binarize".into()));
        }
        let (complete, incomplete): (Vec<usize>, Vec<usize>) = (0..raw.n_tasks()).partition(|&i| raw.row(i).iter().all(Option::is_some));
        let (kept, dropped_tasks) = raw.select_tasks(&complete)?.drop_degenerate_tasks()?;
        Some(TetrachoricOutput {
            result: association::tetrachoric_ed(&kept)?,
            incomplete_tasks: incomplete.iter().map(|&i| raw.task_ids()[i].clone()).collect(),
            dropped_tasks,
        })
    } else {
        None
    };
    let significant_pcs = if permutations > 0 {
        let band = null::permutation_null(&m, permutations, rng::derive_seed(seed, 1), ShuffleScheme::WithinTasks)?;
        Some(null::significant_pcs(&m, &band)?)
    } else {
        None
    };
    let alternatives = if alternatives {
        Some(null::alternative_estimators(&m, null::PARALLEL_ANALYSIS_REPLICATES, rng::derive_seed(seed, 2))?)
    } else {
        None
    };
    let spectrum = spectral::singular_spectrum(&spectral::center(&m, scheme)?)?;
    let rows: Vec<Vec<String>> = spectrum
        .sigmas()
        .iter()
        .zip(spectrum.variance_fractions())
        .enumerate()
        .map(|(i, (s, f))| vec![(i + 1).to_string(), format!("{s}"), format!("{f}")])
        .collect();
    let mut summary = format!(
        "ED {:.2} (CI {:.2}-{:.2}), null {:.2}, ratio {:.3}, PC1 {:.1}%\n",
        report.ed, report.ci_low, report.ci_high, report.ed_null, report.ratio, report.pc1_pct
    );
    if let Some(t) = &tet {
        summary += &format!("tetrachoric ED {:.2} over {} models\n", t.result.ed, t.result.models_used);
    }
    summary += &missing_note(&prepared);
    Ok(Output {
        primary: json(&EdOutput {
            prepared,
            report,
            tetrachoric: tet,
            significant_pcs,
            alternatives,
        })?,
        csv: Some(io::rows_to_csv(&["rank", "sigma", "variance_fraction"], &rows)?),
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct CorrOutput {
    pub input: InputDigest,
    pub axis: String,
    pub method: CorrMethod,
    pub correlations: CorrTable,
    pub undefined_ids: Vec<String>,
    pub flags: RedundancyFlags,
    pub clusters: Option<ClusterGrouping>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_corr(
    path: &Path,
    suite: bool,
    axis: Axis,
    method: &str,
    format: Option<MatrixFormat>,
    groups: Option<usize>,
    height: Option<f64>,
) -> CliResult<Output> {
    let method: CorrMethod = method.parse()?;
    let (c, sha, axis_name) = if suite {
        let (s, sha) = io::load_suite(path)?;
        (association::pairwise_correlation(s.benchmark_ids(), &s.rows(), method)?, sha, "benchmarks")
    } else {
        let (m, sha) = io::load_matrix(path, format)?;
        let m = if m.missing_count() > 0 { m.impute_missing()? } else { m };
        if method == CorrMethod::Tetrachoric && !m.is_binary() {
            return Err(CliError::Usage("tetrachoric correlations need binary scores".into()));
        }
        match axis {
            Axis::Models => (association::model_correlations(&m, method)?, sha, "models"),
            Axis::Tasks => (association::task_correlations(&m, method)?, sha, "tasks"),
        }
    };
    let cut = match (groups, height) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give --groups or --height, not both".into())),
        (Some(g), None) => Some(Cut::Groups(g)),
        (None, Some(h)) => Some(Cut::Height(h)),
        (None, None) => None,
    };
    let (defined, undefined_ids) = c.without_undefined();
    let clusters = match cut {
        Some(cut) => Some(association::hierarchical_cluster(&defined, cut)?),
        None => None,
    };
    let flags = association::redundancy_flags(&c, RedundancyThresholds::default());
    let summary = format!(
        "{} x {} {} correlation over {axis_name}; {} redundant pair(s), {} undefined id(s)\n",
        c.dim(),
        c.dim(),
        method.as_str(),
        flags.redundant.len(),
        undefined_ids.len()
    );
    Ok(Output {
        csv: Some(io::corr_to_csv(&c)?),
        primary: json(&CorrOutput {
            input: digest(if suite { "suite" } else { "matrix" }, path, sha),
            axis: axis_name.into(),
            method,
            correlations: CorrTable::from_matrix(&c),
            undefined_ids,
            flags,
            clusters,
        })?,
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct CeilingOutput {
    pub rho: f64,
    pub method: CorrMethod,
    /// The bound is derived for Pearson correlations; with rank
    /// correlations it is only a guide.
    pub approximate: bool,
    pub ceiling: f64,
    pub oracle: CeilingOracle,
    pub grid: usize,
    pub pair: Option<(String, String)>,
    pub input: Option<InputDigest>,
}

fn cmd_ceiling(rho: Option<f64>, suite: Option<&Path>, pair: &[String], method: &str, grid: usize) -> CliResult<Output> {
    let method: CorrMethod = method.parse()?;
    if !matches!(method, CorrMethod::Pearson | CorrMethod::Spearman) {
        return Err(CliError::Usage("ceiling supports pearson or spearman".into()));
    }
    let (rho, pair, input) = match (rho, suite) {
        (Some(r), None) => (r, None, None),
        (None, Some(path)) => {
            let [a, b] = pair else {
                return Err(CliError::Usage("--suite needs --pair A,B".into()));
            };
            let (s, sha) = io::load_suite(path)?;
            let row = |id: &String| -> CliResult<Vec<f64>> {
                let i = s
                    .benchmark_ids()
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| CliError::Usage(format!("benchmark `{id}` is not in the suite")))?;
                Ok(s.values().row(i).iter().copied().collect())
            };
            let r = association::correlation(&row(a)?, &row(b)?, method)
                .ok_or_else(|| spectradiag_core::Error::UndefinedCorrelation(format!("{a} and {b}")))?;
            (r, Some((a.clone(), b.clone())), Some(digest("suite", path, sha)))
        }
        _ => return Err(CliError::Usage("give exactly one of --rho or --suite".into())),
    };
    let ceiling = composite::composite_ceiling(rho)?;
    let oracle = composite::ceiling_oracle(rho, grid)?;
    Ok(Output {
        summary: format!("rho {rho:.4}: composite ceiling {ceiling:.4} (grid oracle {:.4})\n", oracle.value),
        primary: json(&CeilingOutput {
            rho,
            method,
            approximate: method != CorrMethod::Pearson,
            ceiling,
            oracle,
            grid,
            pair,
            input,
        })?,
        csv: None,
    })
}

#[derive(Debug, Serialize)]
pub struct SelectOutput {
    #[serde(flatten)]
    pub prepared: Prepared,
    #[serde(flatten)]
    pub result: SelectionResult,
}

fn cmd_select(input: &MatrixInput, method: &str, k: usize, seed: u64) -> CliResult<Output> {
    let method: SelectionMethod = method.parse()?;
    let (m, prepared) = prepare(input)?;
    let result = selection::select(&m, k, method, seed)?;
    let rows: Vec<Vec<String>> = result
        .selected
        .iter()
        .zip(&result.trajectory)
        .enumerate()
        .map(|(i, (id, ed))| vec![(i + 1).to_string(), id.clone(), format!("{ed}")])
        .collect();
    let summary = format!(
        "{} selected {} task(s); final ED {:.2}, fidelity {:.3}\n{}",
        method.as_str(),
        result.selected.len(),
        result.trajectory.last().copied().unwrap_or(0.0),
        result.fidelity,
        missing_note(&prepared)
    );
    Ok(Output {
        csv: Some(io::rows_to_csv(&["step", "task_id", "ed"], &rows)?),
        primary: json(&SelectOutput { prepared, result })?,
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct CompressOutput {
    #[serde(flatten)]
    pub prepared: Prepared,
    #[serde(flatten)]
    pub curve: CompressionCurve,
}

fn cmd_compress(input: &MatrixInput, target: f64, trials: usize, seed: u64) -> CliResult<Output> {
    let (m, prepared) = prepare(input)?;
    let curve = selection::compression_curve(&m, target, trials, seed)?;
    let summary = if curve.reached {
        format!("tau >= {target} reached with {:.0}% of tasks\n", 100.0 * curve.fraction_needed)
    } else {
        format!("tau >= {target} not reached by any subset\n")
    };
    Ok(Output {
        csv: Some(io::pairs_to_csv(["fraction", "tau"], &curve.curve)?),
        primary: json(&CompressOutput { prepared, curve })?,
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct SaturateOutput {
    pub input: InputDigest,
    pub points: Vec<(f64, f64)>,
    pub count_points: Option<Vec<CountPoint>>,
    pub fit: SaturationFit,
}

fn cmd_saturate(points: Option<&Path>, matrix: Option<&Path>, counts: &[usize], trials: usize, seed: u64) -> CliResult<Output> {
    let (pts, count_points, input) = match (points, matrix) {
        (Some(p), None) => {
            let bytes = io::read_bytes(p)?;
            (io::parse_pairs(p, &bytes)?, None, digest("points", p, io::sha256_hex(&bytes)))
        }
        (None, Some(p)) => {
            if counts.is_empty() {
                return Err(CliError::Usage("--matrix needs --counts".into()));
            }
            let (m, sha) = io::load_matrix(p, None)?;
            let m = if m.missing_count() > 0 { m.impute_missing()? } else { m };
            let cp = temporal::ed_vs_model_count(&m, counts, trials, seed)?;
            let pts = cp.iter().map(|c| (c.n as f64, c.mean_ed)).collect();
            (pts, Some(cp), digest("matrix", p, sha))
        }
        _ => return Err(CliError::Usage("give exactly one of --points or --matrix".into())),
    };
    let fit = temporal::saturation_fit(&pts)?;
    let rows: Vec<Vec<String>> = pts
        .iter()
        .map(|&(n, ed)| vec![format!("{n}"), format!("{ed}"), format!("{}", fit.predict(n))])
        .collect();
    let summary = format!(
        "ED_inf {:.2}, n_half {:.1}{}\n",
        fit.ed_inf,
        fit.n_half,
        if fit.boundary { " (flat data; boundary fit)" } else { "" }
    );
    Ok(Output {
        csv: Some(io::rows_to_csv(&["n", "ed", "fitted"], &rows)?),
        primary: json(&SaturateOutput {
            input,
            points: pts,
            count_points,
            fit,
        })?,
        summary,
    })
}

#[derive(Debug, Serialize)]
pub struct TrendOutput {
    pub input: InputDigest,
    #[serde(flatten)]
    pub trend: TrendStep,
}

fn cmd_trend(series: Option<&Path>, suite: Option<&Path>, window: usize, step: usize, raw: bool) -> CliResult<Output> {
    let (s, input) = match (series, suite) {
        (Some(p), None) => {
            let bytes = io::read_bytes(p)?;
            (io::parse_series(p, &bytes)?, digest("series", p, io::sha256_hex(&bytes)))
        }
        (None, Some(p)) => {
            let (suite, sha) = io::load_suite(p)?;
            (temporal::sliding_window_ed(&suite, window, step, !raw)?, digest("suite", p, sha))
        }
        _ => return Err(CliError::Usage("give exactly one of --series or --suite".into())),
    };
    let trend = workflow::trend_step(s, Thresholds::default().trend_alpha)?;
    let summary = format!(
        "Mann-Kendall tau {:.3}, p {:.4} ({}); slope {:.4} per unit x\n",
        trend.mann_kendall.tau, trend.mann_kendall.p, trend.verdict, trend.information_density.slope
    );
    Ok(Output {
        csv: Some(io::series_to_csv(&trend.series)?),
        primary: json(&TrendOutput { input, trend })?,
        summary,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    k: usize,
    tasks: usize,
    models: usize,
    scale: f64,
    spread: f64,
    nonnegative: bool,
    bernoulli: Option<f64>,
    format: MatrixFormat,
    recovery: &[usize],
    seeds: usize,
    seed: u64,
) -> CliResult<Output> {
    if !recovery.is_empty() {
        let r: RankRecovery = synthetic::rank_recovery_report(recovery, seeds, tasks, models, scale, seed)?;
        let rows: Vec<Vec<String>> = r
            .ks
            .iter()
            .zip(&r.mean_ed)
            .zip(&r.overestimate_ratio)
            .map(|((k, e), q)| vec![k.to_string(), format!("{e}"), format!("{q}")])
            .collect();
        return Ok(Output {
            summary: format!("Spearman rho(k, mean ED) {:.3} over {} seeds\n", r.spearman_rho, r.seeds),
            csv: Some(io::rows_to_csv(&["k", "mean_ed", "ratio"], &rows)?),
            primary: json(&r)?,
        });
    }
    let (m, what) = match bernoulli {
        Some(p) => (
            ScoreMatrix::from_dense_auto(&synthetic::gen_iid_matrix(tasks, models, IidKind::Bernoulli(p), seed)?)?,
            format!("i.i.d. Bernoulli({p})"),
        ),
        None => {
            let spec = IrtSpec {
                k,
                tasks,
                models,
                discrimination_scale: scale,
                difficulty_spread: spread,
                nonnegative_loadings: nonnegative,
                seed,
            };
            (synthetic::gen_irt_matrix(&spec)?, format!("{k}-factor IRT"))
        }
    };
    let primary = match format {
        MatrixFormat::Csv => io::matrix_to_csv(&m)?,
        MatrixFormat::Json => io::matrix_to_json(&m)?,
    };
    Ok(Output {
        primary,
        csv: None,
        summary: format!("generated {tasks} x {models} {what} matrix\n"),
    })
}

#[derive(Debug, Serialize)]
pub struct SuiteOutput {
    pub input: InputDigest,
    pub benchmarks: usize,
    pub models: usize,
    pub ed: f64,
    pub information_density: f64,
    pub weights: Vec<f64>,
    pub ranking: Ranking,
    pub fragility: FragilityReport,
    pub leave_one_out: Vec<LeaveOneOut>,
    pub subset_search: Option<SubsetSearch>,
    pub flags: RedundancyFlags,
}

fn cmd_suite(path: &Path, weights: &[f64], alpha: f64, samples: usize, subset_size: Option<usize>, seed: u64) -> CliResult<Output> {
    let (s, sha) = io::load_suite(path)?;
    let k = s.n_benchmarks();
    let weights = if weights.is_empty() { vec![1.0; k] } else { weights.to_vec() };
    let ranking = composite::composite_ranking(&s, &weights)?;
    let ed = composite::suite_ed(&s)?;
    let fragility = composite::dirichlet_fragility(&s, alpha, samples, seed)?;
    let leave_one_out = if k >= 2 { composite::leave_one_out(&s)? } else { Vec::new() };
    let subset_search = match subset_size {
        Some(size) => Some(composite::best_subset_search(&s, size)?),
        None => None,
    };
    let corr = association::pairwise_correlation(s.benchmark_ids(), &s.rows(), CorrMethod::Pearson)?;
    let flags = association::redundancy_flags(&corr, RedundancyThresholds::default());
    let rows: Vec<Vec<String>> = leave_one_out
        .iter()
        .map(|l| vec![l.benchmark_id.clone(), format!("{}", l.delta_ed), format!("{}", l.tau_vs_full)])
        .collect();
    let summary = format!(
        "suite ED {:.2} over {k} benchmarks (ID {:.3}); champion {}; champion changes under {:.1}% of Dirichlet weights\n",
        ed,
        ed / k as f64,
        ranking.champion(),
        100.0 * fragility.champion_change_rate
    );
    Ok(Output {
        csv: Some(io::rows_to_csv(&["benchmark_id", "delta_ed", "tau_vs_full"], &rows)?),
        primary: json(&SuiteOutput {
            input: digest("suite", path, sha),
            benchmarks: k,
            models: s.n_models(),
            information_density: composite::information_density(ed, k)?,
            ed,
            weights,
            ranking,
            fragility,
            leave_one_out,
            subset_search,
            flags,
        })?,
        summary,
    })
}

pub fn run(command: &Command, seed: u64) -> CliResult<Output> {
    match command {
        Command::Ed {
            input,
            centering,
            iterations,
            level,
            tetrachoric,
            permutations,
            alternatives,
        } => cmd_ed(input, centering, *iterations, *level, *tetrachoric, *permutations, *alternatives, seed),
        Command::Corr {
            path,
            suite,
            axis,
            method,
            format,
            groups,
            height,
        } => cmd_corr(path, *suite, *axis, method, *format, *groups, *height),
        Command::Ceiling {
            rho,
            suite,
            pair,
            method,
            grid,
        } => cmd_ceiling(*rho, suite.as_deref(), pair, method, *grid),
        Command::Workflow {
            suite,
            series,
            candidates,
            matrices,
            redundant,
            vet,
            complementary,
            min_ed,
            trend_alpha,
        } => {
            let inputs = WorkflowInputs {
                suite: suite.clone(),
                series: series.clone(),
                candidates: candidates.clone(),
                matrices: matrices.clone(),
            };
            let th = Thresholds {
                redundant: *redundant,
                vet: *vet,
                complementary: *complementary,
                min_ed: *min_ed,
                trend_alpha: *trend_alpha,
            };
            let report = workflow::run_workflow(&inputs, th, seed)?;
            Ok(Output {
                summary: workflow::summary(&report),
                primary: json(&report)?,
                csv: None,
            })
        }
        Command::Select { input, method, k } => cmd_select(input, method, *k, seed),
        Command::Compress { input, target, trials } => cmd_compress(input, *target, *trials, seed),
        Command::Saturate {
            points,
            matrix,
            counts,
            trials,
        } => cmd_saturate(points.as_deref(), matrix.as_deref(), counts, *trials, seed),
        Command::Trend {
            series,
            suite,
            window,
            step,
            raw,
        } => cmd_trend(series.as_deref(), suite.as_deref(), *window, *step, *raw),
        Command::Synth {
            k,
            tasks,
            models,
            scale,
            spread,
            nonnegative,
            bernoulli,
            format,
            recovery,
            seeds,
        } => cmd_synth(*k, *tasks, *models, *scale, *spread, *nonnegative, *bernoulli, *format, recovery, *seeds, seed),
        Command::Suite {
            suite,
            weights,
            alpha,
            samples,
            subset_size,
        } => cmd_suite(suite, weights, *alpha, *samples, *subset_size, seed),
    }
}

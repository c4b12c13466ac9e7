use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::MatrixFormat;

#[derive(Debug, Parser)]
#[command(name = "spectradiag", version, about = "Effective-dimensionality diagnostics for benchmark score matrices and suites")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write plot data as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "SPECTRADIAG_THREADS")]
    pub threads: Option<usize>,
    /// Suppress the summary on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Tasks,
    Models,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixInput {
    /// Score matrix (CSV `task_id,<models>` or JSON).
    pub matrix: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<MatrixFormat>,
    /// Binarize scores strictly above this threshold before analysis.
    #[arg(long)]
    pub binarize: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ED report with analytic null and bootstrap interval.
    Ed {
        #[command(flatten)]
        input: MatrixInput,
        /// task, model, double or none.
        #[arg(long, default_value = "task")]
        centering: String,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Add tetrachoric ED (binary input).
        #[arg(long)]
        tetrachoric: bool,
        /// Permutation replicates for the significant-PC count (0 = skip).
        #[arg(long, default_value_t = 0)]
        permutations: usize,
        /// Add parallel analysis, Kaiser, broken-stick and variance cutoffs.
        #[arg(long)]
        alternatives: bool,
    },
    /// Pairwise correlation matrix, redundancy flags and clustering.
    Corr {
        /// Score matrix, or a suite table with `--suite`.
        path: PathBuf,
        /// Treat the input as a suite table (benchmarks as rows).
        #[arg(long)]
        suite: bool,
        #[arg(long, value_enum, default_value = "models")]
        axis: Axis,
        /// pearson, spearman, kendall or tetrachoric.
        #[arg(long, default_value = "pearson")]
        method: String,
        #[arg(long)]
        format: Option<MatrixFormat>,
        /// Cut the average-linkage tree into this many groups.
        #[arg(long)]
        groups: Option<usize>,
        /// Cut the tree below this distance (1 − |r|).
        #[arg(long)]
        height: Option<f64>,
    },
    /// Best worst-case correlation of a two-benchmark composite.
    Ceiling {
        /// Correlation between the two benchmarks.
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        /// Suite table to take the correlation from.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Benchmark pair `A,B` within the suite.
        #[arg(long, value_delimiter = ',')]
        pair: Vec<String>,
        /// pearson or spearman; the bound is exact only for pearson.
        #[arg(long, default_value = "pearson")]
        method: String,
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
    },
    /// Four-step maintainer workflow report.
    Workflow {
        /// Suite table: `benchmark_id,<models>`.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// ED series `x,ed` for the trend step.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Candidate benchmarks in suite layout.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Directory of per-benchmark score matrices.
        #[arg(long)]
        matrices: Option<PathBuf>,
        #[arg(long, default_value_t = 0.9)]
        redundant: f64,
        #[arg(long, default_value_t = 0.7)]
        vet: f64,
        #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
        complementary: f64,
        #[arg(long, default_value_t = 2.0)]
        min_ed: f64,
        #[arg(long, default_value_t = 0.05)]
        trend_alpha: f64,
    },
    /// Task subset selection.
    Select {
        #[command(flatten)]
        input: MatrixInput,
        /// ed_greedy, random, max_variance, irt_discrimination, kmedoids or two_stage.
        #[arg(long, default_value = "ed_greedy")]
        method: String,
        #[arg(long)]
        k: usize,
    },
    /// Ranking fidelity of random task subsets by size.
    Compress {
        #[command(flatten)]
        input: MatrixInput,
        #[arg(long, default_value_t = 0.95)]
        target: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Hyperbolic saturation fit of ED against model count.
    Saturate {
        /// Points `n,ed`.
        #[arg(long, conflicts_with = "matrix")]
        points: Option<PathBuf>,
        /// Score matrix to subsample models from.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Mann–Kendall trend and information density of an ED series.
    Trend {
        /// Series `x,ed`.
        #[arg(long, conflicts_with = "suite")]
        series: Option<PathBuf>,
        /// Suite table with models in time order; ED over sliding windows.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        window: usize,
        #[arg(long, default_value_t = 200)]
        step: usize,
        /// Skip per-window z-scoring.
        #[arg(long)]
        raw: bool,
    },
    /// Synthetic IRT or i.i.d. matrices, or the rank-recovery harness.
    Synth {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 300)]
        tasks: usize,
        #[arg(long, default_value_t = 100)]
        models: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        /// Restrict loadings to the nonnegative orthant.
        #[arg(long)]
        nonnegative: bool,
        /// Draw i.i.d. Bernoulli(p) cells instead of IRT.
        #[arg(long)]
        bernoulli: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: MatrixFormat,
        /// Run the rank-recovery harness over these k values instead.
        #[arg(long, value_delimiter = ',')]
        recovery: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Suite analyses: ED, ranking, weight fragility, leave-one-out, subsets.
    Suite {
        suite: PathBuf,
        /// Benchmark weights for the ranking (default equal).
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Exhaustive search over subsets of this size.
        #[arg(long)]
        subset_size: Option<usize>,
    },
}

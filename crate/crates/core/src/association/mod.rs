//! Pairwise association: correlation matrices, bootstrap intervals, partial
//! and stratified correlations, redundancy flags and Hamming baselines.

mod cluster;
mod tetrachoric;

pub use cluster::{hierarchical_cluster, ClusterGrouping, Cut, Merge};
pub use tetrachoric::{bivariate_normal_upper, tetrachoric, tetrachoric_ed, TetrachoricEd, TwoByTwo};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::{par, rng, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CorrMethod {
    Pearson,
    Spearman,
    /// Kendall tau-b.
    Kendall,
    Tetrachoric,
}

impl CorrMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
            CorrMethod::Kendall => "kendall",
            CorrMethod::Tetrachoric => "tetrachoric",
        }
    }
}

impl core::str::FromStr for CorrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(CorrMethod::Pearson),
            "spearman" => Ok(CorrMethod::Spearman),
            "kendall" => Ok(CorrMethod::Kendall),
            "tetrachoric" => Ok(CorrMethod::Tetrachoric),
            other => Err(Error::InvalidArgument(format!("unknown correlation method `{other}`"))),
        }
    }
}

/// Correlation of one pair of series. `None` when undefined (a constant
/// series, or a zero marginal for tetrachoric).
pub fn correlation(x: &[f64], y: &[f64], method: CorrMethod) -> Option<f64> {
    match method {
        CorrMethod::Pearson => stats::pearson(x, y),
        CorrMethod::Spearman => stats::spearman(x, y),
        CorrMethod::Kendall => stats::kendall_tau_b(x, y),
        CorrMethod::Tetrachoric => tetrachoric(TwoByTwo::from_binary(x, y)?).ok(),
    }
}

/// Symmetric correlation table with unit diagonal. Off-diagonal entries
/// are `None` where the correlation is undefined.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrMatrix {
    ids: Vec<String>,
    values: Vec<Option<f64>>,
    method: CorrMethod,
}

impl CorrMatrix {
    /// Validates symmetry (1e-12), unit diagonal and |r| ≤ 1.
    pub fn new(ids: Vec<String>, values: Vec<Option<f64>>, method: CorrMethod) -> Result<Self> {
        let p = ids.len();
        if values.len() != p * p {
            return Err(Error::InvalidInput(format!(
                "correlation table for {p} ids needs {} entries, got {}",
                p * p,
                values.len()
            )));
        }
        for i in 0..p {
            if values[i * p + i] != Some(1.0) {
                return Err(Error::InvalidInput(format!("diagonal entry for `{}` is not 1", ids[i])));
            }
            for j in 0..p {
                match (values[i * p + j], values[j * p + i]) {
                    (Some(a), Some(b)) => {
                        if !a.is_finite() || a.abs() > 1.0 {
                            return Err(Error::InvalidInput(format!(
                                "correlation {a} between `{}` and `{}` is outside [-1, 1]",
                                ids[i], ids[j]
                            )));
                        }
                        if (a - b).abs() > 1e-12 {
                            return Err(Error::NotSymmetric);
                        }
                    }
                    (None, None) => {}
                    _ => return Err(Error::NotSymmetric),
                }
            }
        }
        Ok(CorrMatrix { ids, values, method })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }

    pub fn method(&self) -> CorrMethod {
        self.method
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.dim() + j]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Series to exclude so that every remaining entry is defined: the
    /// series with the most undefined entries is removed first (earliest
    /// on ties) until none remain.
    pub fn undefined_ids(&self) -> Vec<String> {
        let p = self.dim();
        let mut alive = vec![true; p];
        let mut out = Vec::new();
        loop {
            let count = |i: usize| (0..p).filter(|&j| alive[j] && self.values[i * p + j].is_none()).count();
            let worst = (0..p)
                .filter(|&i| alive[i])
                .map(|i| (count(i), i))
                .filter(|&(c, _)| c > 0)
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            match worst {
                Some((_, i)) => {
                    alive[i] = false;
                    out.push(self.ids[i].clone());
                }
                None => return out,
            }
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let p = self.dim();
        if let Some(pos) = self.values.iter().position(Option::is_none) {
            return Err(Error::UndefinedCorrelation(format!(
                "`{}` vs `{}`",
                self.ids[pos / p],
                self.ids[pos % p]
            )));
        }
        Ok(DMatrix::from_fn(p, p, |i, j| self.values[i * p + j].unwrap_or_default()))
    }

    /// Sub-table over the given indices.
    pub fn restrict(&self, keep: &[usize]) -> CorrMatrix {
        let p = self.dim();
        let mut values = Vec::with_capacity(keep.len() * keep.len());
        for &i in keep {
            for &j in keep {
                values.push(self.values[i * p + j]);
            }
        }
        CorrMatrix {
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            values,
            method: self.method,
        }
    }

    /// Drops every series with an undefined entry, returning the clean table
    /// and the excluded ids.
    pub fn without_undefined(&self) -> (CorrMatrix, Vec<String>) {
        let bad = self.undefined_ids();
        let keep: Vec<usize> = (0..self.dim()).filter(|&i| !bad.contains(&self.ids[i])).collect();
        (self.restrict(&keep), bad)
    }
}

/// Pairwise correlations between equal-length series (one series per row).
///
/// Constant series (or zero-marginal binary series for tetrachoric) give
/// undefined off-diagonal entries; see [`CorrMatrix::undefined_ids`].
pub fn pairwise_correlation(ids: &[String], rows: &[Vec<f64>], method: CorrMethod) -> Result<CorrMatrix> {
    let p = rows.len();
    if ids.len() != p {
        return Err(Error::InvalidInput(format!("{} ids for {p} series", ids.len())));
    }
    let len = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != len) {
        return Err(Error::InvalidInput("series have different lengths".into()));
    }
    if len < 3 {
        return Err(Error::InsufficientData {
            what: "paired observations",
            needed: 3,
            got: len,
        });
    }
    if method == CorrMethod::Tetrachoric && rows.iter().flatten().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::InvalidInput("tetrachoric correlation needs 0/1 series".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let computed = par::map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        correlation(&rows[i], &rows[j], method)
    });
    let mut values = vec![None; p * p];
    for i in 0..p {
        values[i * p + i] = Some(1.0);
    }
    for (&(i, j), r) in pairs.iter().zip(computed) {
        values[i * p + j] = r;
        values[j * p + i] = r;
    }
    CorrMatrix::new(ids.to_vec(), values, method)
}

/// Correlations between the task rows of a fully observed matrix.
pub fn task_correlations(m: &ScoreMatrix, method: CorrMethod) -> Result<CorrMatrix> {
    let x = m.to_dense()?;
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    pairwise_correlation(m.task_ids(), &rows, method)
}

/// Correlations between the model columns of a fully observed matrix.
pub fn model_correlations(m: &ScoreMatrix, method: CorrMethod) -> Result<CorrMatrix> {
    let x = m.to_dense()?;
    let cols: Vec<Vec<f64>> = x.column_iter().map(|c| c.iter().copied().collect()).collect();
    pairwise_correlation(m.model_ids(), &cols, method)
}

/// Percentile bootstrap interval for a correlation, resampling pairs.
/// Resamples on which the correlation is undefined are discarded.
pub fn correlation_ci(
    x: &[f64],
    y: &[f64],
    method: CorrMethod,
    iterations: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::InvalidInput("series have different lengths".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientData {
            what: "paired observations",
            needed: 3,
            got: n,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    let draws = par::map_range(iterations, |b| {
        let mut r = rng::substream(seed, b as u64);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let i = r.random_range(0..n);
            xs.push(x[i]);
            ys.push(y[i]);
        }
        correlation(&xs, &ys, method)
    });
    let mut values: Vec<f64> = draws.into_iter().flatten().collect();
    if values.len() < 2 {
        return Err(Error::UndefinedCorrelation("every bootstrap resample was degenerate".into()));
    }
    Ok(stats::percentile_interval(&mut values, level))
}

/// Correlation of `x` and `y` after regressing `z` out of both.
///
/// For Spearman all three series are rank-transformed first. If `z`
/// explains either series completely the partial correlation is 0.
pub fn partial_correlation(x: &[f64], y: &[f64], z: &[f64], method: CorrMethod) -> Result<f64> {
    let n = x.len();
    if y.len() != n || z.len() != n {
        return Err(Error::InvalidInput("series have different lengths".into()));
    }
    if n < 10 {
        return Err(Error::InsufficientData {
            what: "observations for partial correlation",
            needed: 10,
            got: n,
        });
    }
    let (xs, ys, zs) = match method {
        CorrMethod::Pearson => (x.to_vec(), y.to_vec(), z.to_vec()),
        CorrMethod::Spearman => (stats::average_ranks(x), stats::average_ranks(y), stats::average_ranks(z)),
        other => {
            return Err(Error::InvalidArgument(format!(
                "partial correlation supports pearson or spearman, not {}",
                other.as_str()
            )))
        }
    };
    if stats::variance(&zs) <= 0.0 {
        return Err(Error::ZeroVariance("control variable is constant".into()));
    }
    let rx = stats::residualize(&xs, &zs).ok_or(Error::ZeroVariance("control variable".into()))?;
    let ry = stats::residualize(&ys, &zs).ok_or(Error::ZeroVariance("control variable".into()))?;
    // residual variance that is pure rounding noise counts as fully explained
    let explained = |resid: &[f64], orig: &[f64]| stats::variance(resid) <= 1e-20 * stats::variance(orig).max(f64::MIN_POSITIVE);
    if explained(&rx, &xs) || explained(&ry, &ys) {
        return Ok(0.0);
    }
    stats::pearson(&rx, &ry).ok_or(Error::ZeroVariance("residuals".into()))
}

/// Minimum stratum size below which a stratum is flagged unreliable.
pub const MIN_RELIABLE_STRATUM: usize = 5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StratumCorrelation {
    pub label: String,
    pub n: usize,
    /// Spearman ρ; `None` when undefined (n < 3 or a constant series).
    pub rho: Option<f64>,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StratifiedCorrelation {
    /// Nonempty strata in label order.
    pub strata: Vec<StratumCorrelation>,
    /// Declared strata that had no observations.
    pub omitted_empty: Vec<String>,
}

/// Spearman correlation within each stratum. `declared` may list strata
/// expected to exist; those with no observations are reported as omitted.
pub fn stratified_correlation(x: &[f64], y: &[f64], labels: &[String], declared: &[String]) -> Result<StratifiedCorrelation> {
    if y.len() != x.len() || labels.len() != x.len() {
        return Err(Error::InvalidInput("series and labels have different lengths".into()));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(i);
    }
    let strata = groups
        .iter()
        .map(|(label, idx)| {
            let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let rho = if idx.len() >= 3 { stats::spearman(&xs, &ys) } else { None };
            StratumCorrelation {
                label: String::from(*label),
                n: idx.len(),
                rho,
                reliable: idx.len() >= MIN_RELIABLE_STRATUM,
            }
        })
        .collect();
    let omitted_empty = declared
        .iter()
        .filter(|d| !groups.contains_key(d.as_str()))
        .cloned()
        .collect();
    Ok(StratifiedCorrelation { strata, omitted_empty })
}

/// Screening thresholds for pairwise correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RedundancyThresholds {
    /// Pairs above this are redundant.
    pub redundant: f64,
    /// A new benchmark should stay below this against every existing one.
    pub vet: f64,
    /// Pairs below this are complementary.
    pub complementary: f64,
}

impl Default for RedundancyThresholds {
    fn default() -> Self {
        RedundancyThresholds {
            redundant: 0.9,
            vet: 0.7,
            complementary: -0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlaggedPair {
    pub a: String,
    pub b: String,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RedundancyFlags {
    pub redundant: Vec<FlaggedPair>,
    pub vet_fail: Vec<FlaggedPair>,
    pub complementary: Vec<FlaggedPair>,
}

/// Sorts each defined pair (i < j) into the redundant (> redundant),
/// vet-fail (> vet) and complementary (< complementary) lists.
pub fn redundancy_flags(c: &CorrMatrix, th: RedundancyThresholds) -> RedundancyFlags {
    let mut flags = RedundancyFlags::default();
    let p = c.dim();
    for i in 0..p {
        for j in (i + 1)..p {
            let Some(rho) = c.get(i, j) else { continue };
            let pair = || FlaggedPair {
                a: c.ids[i].clone(),
                b: c.ids[j].clone(),
                rho,
            };
            if rho > th.redundant {
                flags.redundant.push(pair());
            }
            if rho > th.vet {
                flags.vet_fail.push(pair());
            }
            if rho < th.complementary {
                flags.complementary.push(pair());
            }
        }
    }
    flags
}

/// Mean over model pairs of the fraction of tasks on which they disagree.
pub fn mean_pairwise_hamming(m: &ScoreMatrix) -> Result<f64> {
    if !m.is_binary() {
        return Err(Error::InvalidInput("Hamming distance needs a binary matrix".into()));
    }
    let x = m.to_dense()?;
    let (t, n) = (x.nrows(), x.ncols());
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..n {
        for b in (a + 1)..n {
            let diff = (0..t).filter(|&i| x[(i, a)] != x[(i, b)]).count();
            total += diff as f64 / t as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

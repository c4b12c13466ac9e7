//! ED over time and population: sliding windows, the Mann–Kendall trend
//! test, hyperbolic saturation fits, fixed-variance task controls, cohort
//! bootstrap comparisons, diversity insertion and temporal information
//! density.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng as _;

use crate::composite::SuiteScores;
use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::spectral::{center_dense, gram_ed, CenteringScheme};
use crate::stats::LineFit;
use crate::{par, rng, stats};

/// ED values along an ordered axis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdSeries {
    pub x: Vec<f64>,
    pub ed: Vec<f64>,
    pub window: Option<usize>,
    pub step: Option<usize>,
    pub standardized: bool,
}

impl EdSeries {
    /// A bare series; `x` must be strictly increasing.
    pub fn new(x: Vec<f64>, ed: Vec<f64>) -> Result<Self> {
        if x.len() != ed.len() {
            return Err(Error::InvalidInput(format!("{} x values for {} ED values", x.len(), ed.len())));
        }
        if x.iter().chain(&ed).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("x must be strictly increasing".into()));
        }
        Ok(EdSeries {
            x,
            ed,
            window: None,
            step: None,
            standardized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// ED of a benchmark × model block, each benchmark either z-scored or
/// only centered across the block's models.
fn block_ed(block: &DMatrix<f64>, standardize: bool) -> Result<f64> {
    let mut z = center_dense(block, CenteringScheme::TaskCenter);
    if standardize {
        let n = z.ncols() as f64;
        for (b, mut row) in z.row_iter_mut().enumerate() {
            let sd = libm::sqrt(row.norm_squared() / n);
            if sd <= 0.0 {
                return Err(Error::ZeroVariance(format!("benchmark row {b} within a window")));
            }
            row /= sd;
        }
    }
    gram_ed(&z)
}

/// Suite ED over consecutive model windows. Models must already be in the
/// intended order (for instance by composite score); `x` is the window
/// index.
pub fn sliding_window_ed(s: &SuiteScores, window: usize, step: usize, standardize: bool) -> Result<EdSeries> {
    let n = s.n_models();
    if window < 2 || window > n {
        return Err(Error::InvalidArgument(format!("window {window} outside 2..={n}")));
    }
    if step == 0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let starts: Vec<usize> = (0..=n - window).step_by(step).collect();
    let eds = par::map_range(starts.len(), |w| {
        let block = s.values().columns(starts[w], window).into_owned();
        block_ed(&block, standardize)
    });
    let ed: Vec<f64> = eds.into_iter().collect::<Result<_>>()?;
    Ok(EdSeries {
        x: (0..ed.len()).map(|i| i as f64).collect(),
        ed,
        window: Some(window),
        step: Some(step),
        standardized: standardize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MannKendall {
    /// Tie-corrected tau (tau-b against time, which has no ties).
    pub tau: f64,
    pub s: i64,
    pub var_s: f64,
    pub p: f64,
    /// Whether `p` is the exact permutation probability.
    pub exact: bool,
}

/// Largest untied length for which the exact null distribution is used.
pub const MANN_KENDALL_EXACT_MAX: usize = 10;

/// Counts of permutations of `n` items by number of inversions.
fn mahonian(n: usize) -> Vec<f64> {
    let mut counts = vec![1.0];
    for m in 2..=n {
        let mut next = vec![0.0; counts.len() + m - 1];
        for (inv, c) in counts.iter().enumerate() {
            for extra in 0..m {
                next[inv + extra] += c;
            }
        }
        counts = next;
    }
    counts
}

/// Two-sided Mann–Kendall trend test. The p-value is exact for untied
/// series of length ≤ 10 and otherwise uses the tie-corrected normal
/// approximation with continuity correction.
pub fn mann_kendall(series: &[f64]) -> Result<MannKendall> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InsufficientData {
            what: "points for a trend test",
            needed: 4,
            got: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += i64::from(stats::sign(series[j] - series[i]));
        }
    }
    let mut sorted = series.to_vec();
    stats::sort_f64(&mut sorted);
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        if j > i {
            tie_groups.push((j - i + 1) as f64);
        }
        i = j + 1;
    }
    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    let n1: f64 = tie_groups.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    let var_s = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_groups.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum::<f64>()) / 18.0;
    if n1 >= n0 {
        return Ok(MannKendall {
            tau: 0.0,
            s: 0,
            var_s,
            p: 1.0,
            exact: false,
        });
    }
    let tau = s as f64 / libm::sqrt((n0 - n1) * n0);
    if tie_groups.is_empty() && n <= MANN_KENDALL_EXACT_MAX {
        let counts = mahonian(n);
        let total: f64 = counts.iter().sum();
        let extreme: f64 = counts
            .iter()
            .enumerate()
            .filter(|(inv, _)| (n0 as i64 - 2 * *inv as i64).abs() >= s.abs())
            .map(|(_, c)| c)
            .sum();
        return Ok(MannKendall {
            tau,
            s,
            var_s,
            p: (extreme / total).min(1.0),
            exact: true,
        });
    }
    let z = match s {
        0 => 0.0,
        s if s > 0 => (s as f64 - 1.0) / libm::sqrt(var_s),
        s => (s as f64 + 1.0) / libm::sqrt(var_s),
    };
    Ok(MannKendall {
        tau,
        s,
        var_s,
        p: (2.0 * stats::normal_sf(z.abs())).min(1.0),
        exact: false,
    })
}

/// `ED(n) = ed_inf · n / (n + n_half)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SaturationFit {
    pub ed_inf: f64,
    pub n_half: f64,
    /// Residual sum of squares on the ED scale.
    pub rss: f64,
    /// Set when the data are flat and the fit sits at n_half = 0.
    pub boundary: bool,
    pub iterations: usize,
}

impl SaturationFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.ed_inf * n / (n + self.n_half)
    }
}

fn saturation_rss(points: &[(f64, f64)], e: f64, h: f64) -> f64 {
    points
        .iter()
        .map(|&(n, ed)| {
            let r = ed - e * n / (n + h);
            r * r
        })
        .sum()
}

pub const SATURATION_MAX_STEPS: usize = 100;

/// Fits the hyperbolic saturation curve: a linear fit of 1/ED on 1/n
/// supplies the start, then Gauss–Newton with step halving refines it.
pub fn saturation_fit(points: &[(f64, f64)]) -> Result<SaturationFit> {
    if points.iter().any(|&(n, ed)| !n.is_finite() || !ed.is_finite() || n <= 0.0 || ed <= 0.0) {
        return Err(Error::InvalidInput("saturation points need positive finite n and ED".into()));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    stats::sort_f64(&mut ns);
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::InsufficientData {
            what: "distinct model counts",
            needed: 3,
            got: ns.len(),
        });
    }
    if points.iter().all(|p| p.1 == points[0].1) {
        return Ok(SaturationFit {
            ed_inf: points[0].1,
            n_half: 0.0,
            rss: 0.0,
            boundary: true,
            iterations: 0,
        });
    }
    let inv_n: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let inv_ed: Vec<f64> = points.iter().map(|p| 1.0 / p.1).collect();
    let line = stats::linear_fit(&inv_n, &inv_ed).ok_or(Error::FitRejected("degenerate linearized fit".into()))?;
    if line.intercept <= 0.0 {
        return Err(Error::FitRejected(format!(
            "linearized intercept {} implies a non-positive asymptote",
            line.intercept
        )));
    }
    let (mut e, mut h) = (1.0 / line.intercept, line.slope / line.intercept);
    if h <= 0.0 {
        return Err(Error::FitRejected(format!("half-saturation count {h} is not positive")));
    }
    let mut rss = saturation_rss(points, e, h);
    let mut iterations = 0;
    for _ in 0..SATURATION_MAX_STEPS {
        // normal equations JᵀJ δ = Jᵀr for (e, h)
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(n, ed) in points {
            let q = n / (n + h);
            let de = q;
            let dh = -e * n / ((n + h) * (n + h));
            let r = ed - e * q;
            a11 += de * de;
            a12 += de * dh;
            a22 += dh * dh;
            g1 += de * r;
            g2 += dh * r;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() <= f64::MIN_POSITIVE {
            break;
        }
        let de = (a22 * g1 - a12 * g2) / det;
        let dh = (a11 * g2 - a12 * g1) / det;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let (ce, ch) = (e + lambda * de, h + lambda * dh);
            if ce > 0.0 && ch > 0.0 {
                let c = saturation_rss(points, ce, ch);
                if c < rss {
                    e = ce;
                    h = ch;
                    let gain = rss - c;
                    rss = c;
                    improved = gain > 1e-15 * (1.0 + c);
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        if !improved {
            break;
        }
    }
    if e <= 0.0 || h <= 0.0 {
        return Err(Error::FitRejected("non-positive parameters".into()));
    }
    Ok(SaturationFit {
        ed_inf: e,
        n_half: h,
        rss,
        boundary: false,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountPoint {
    pub n: usize,
    pub mean_ed: f64,
    pub sd_ed: f64,
}

/// Mean ED over random model subsets of each requested size.
pub fn ed_vs_model_count(m: &ScoreMatrix, counts: &[usize], trials: usize, seed: u64) -> Result<Vec<CountPoint>> {
    let x = m.to_dense()?;
    let n = x.ncols();
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    counts
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            if c < 2 || c > n {
                return Err(Error::InvalidArgument(format!("model count {c} outside 2..={n}")));
            }
            let family = rng::derive_seed(seed, ci as u64);
            let eds = par::map_range(trials, |tr| {
                let mut r = rng::substream(family, tr as u64);
                let mut cols = index::sample(&mut r, n, c).into_vec();
                cols.sort_unstable();
                gram_ed(&center_dense(&x.select_columns(cols.iter()), CenteringScheme::TaskCenter))
            });
            let eds: Vec<f64> = eds.into_iter().filter_map(|e| e.ok()).collect();
            if eds.is_empty() {
                return Err(Error::ZeroSpectrum);
            }
            Ok(CountPoint {
                n: c,
                mean_ed: stats::mean(&eds),
                sd_ed: stats::sample_sd(&eds),
            })
        })
        .collect()
}

fn cohort_variances(x: &DMatrix<f64>, cols: &[usize]) -> Vec<f64> {
    x.row_iter()
        .map(|r| stats::variance(&cols.iter().map(|&j| r[j]).collect::<Vec<_>>()))
        .collect()
}

pub const FIXED_VARIANCE_FLOOR: f64 = 1e-9;

/// Tasks whose variance changes by less than `tol` (relative to the early
/// cohort) between the early and late model cohorts.
pub fn fixed_variance_subset(m: &ScoreMatrix, early_ids: &[alloc::string::String], late_ids: &[alloc::string::String], tol: f64) -> Result<Vec<alloc::string::String>> {
    if early_ids.is_empty() || late_ids.is_empty() {
        return Err(Error::InvalidArgument("both cohorts need at least one model".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let x = m.to_dense()?;
    let early = cohort_variances(&x, &m.model_indices(early_ids)?);
    let late = cohort_variances(&x, &m.model_indices(late_ids)?);
    Ok((0..m.n_tasks())
        .filter(|&i| (late[i] - early[i]).abs() / early[i].max(FIXED_VARIANCE_FLOOR) < tol)
        .map(|i| m.task_ids()[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CohortComparison {
    /// Mean of ED(b) − ED(a) over iterations.
    pub delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub cohens_d: f64,
    /// Share of iterations with ED(b) > ED(a).
    pub p_direction: f64,
    pub iterations: usize,
    pub sample: usize,
    pub seed: u64,
}

pub const MIN_COHORT_MODELS: usize = 10;

/// Bootstrap comparison of standardized suite ED between two model groups,
/// drawing `sample` models with replacement from each group per iteration.
pub fn cohort_bootstrap_compare(
    s: &SuiteScores,
    group_a: &[alloc::string::String],
    group_b: &[alloc::string::String],
    sample: usize,
    iterations: usize,
    seed: u64,
) -> Result<CohortComparison> {
    let index_of = |ids: &[alloc::string::String]| -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                s.model_ids()
                    .iter()
                    .position(|m| m == id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown model `{id}`")))
            })
            .collect()
    };
    let a = index_of(group_a)?;
    let b = index_of(group_b)?;
    for g in [&a, &b] {
        if g.len() < MIN_COHORT_MODELS {
            return Err(Error::InsufficientData {
                what: "models per group",
                needed: MIN_COHORT_MODELS,
                got: g.len(),
            });
        }
    }
    if sample < 2 || iterations < 2 {
        return Err(Error::InvalidArgument("sample and iterations must be at least 2".into()));
    }
    let pairs = par::map_range(iterations, |it| -> Result<(f64, f64)> {
        let mut r = rng::substream(seed, it as u64);
        let mut draw = |g: &[usize]| -> Vec<usize> { (0..sample).map(|_| g[r.random_range(0..g.len())]).collect() };
        let da = draw(&a);
        let db = draw(&b);
        let ea = block_ed(&s.values().select_columns(da.iter()), true)?;
        let eb = block_ed(&s.values().select_columns(db.iter()), true)?;
        Ok((ea, eb))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let ea: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let eb: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut diffs: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let delta = stats::mean(&diffs);
    let (sa, sb) = (stats::sample_sd(&ea), stats::sample_sd(&eb));
    let pooled = libm::sqrt((sa * sa + sb * sb) / 2.0);
    let cohens_d = if pooled > 0.0 { (stats::mean(&eb) - stats::mean(&ea)) / pooled } else { 0.0 };
    let p_direction = pairs.iter().filter(|p| p.1 > p.0).count() as f64 / iterations as f64;
    let (ci_low, ci_high) = stats::percentile_interval(&mut diffs, 0.95);
    Ok(CohortComparison {
        delta,
        ci_low,
        ci_high,
        cohens_d,
        p_direction,
        iterations,
        sample,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiversityProbe {
    pub base_ed: f64,
    /// Share of trials in which adding one early model raised ED.
    pub increase_fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Relative margin an ED must clear to count as an increase.
pub const ED_INCREASE_MARGIN: f64 = 1e-9;

/// Adds one randomly chosen early model to the late cohort per trial and
/// records whether ED rises.
pub fn diversity_insertion_probe(
    m: &ScoreMatrix,
    late_ids: &[alloc::string::String],
    early_ids: &[alloc::string::String],
    trials: usize,
    seed: u64,
) -> Result<DiversityProbe> {
    if late_ids.len() < 2 || early_ids.is_empty() {
        return Err(Error::InvalidArgument("need at least two late models and one early model".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let x = m.to_dense()?;
    let late = m.model_indices(late_ids)?;
    let early = m.model_indices(early_ids)?;
    let ed_of = |cols: &[usize]| gram_ed(&center_dense(&x.select_columns(cols.iter()), CenteringScheme::TaskCenter));
    let base = ed_of(&late)?;
    let outcomes = par::map_range(trials, |tr| -> Result<bool> {
        let mut r = rng::substream(seed, tr as u64);
        let mut cols = late.clone();
        cols.push(early[r.random_range(0..early.len())]);
        Ok(ed_of(&cols)? > base * (1.0 + ED_INCREASE_MARGIN))
    });
    let outcomes: Vec<bool> = outcomes.into_iter().collect::<Result<_>>()?;
    Ok(DiversityProbe {
        base_ed: base,
        increase_fraction: outcomes.iter().filter(|b| **b).count() as f64 / trials as f64,
        trials,
        seed,
    })
}

/// Least-squares slope of ED against x (with its standard error).
pub fn temporal_information_density(series: &EdSeries) -> Result<LineFit> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            what: "series points",
            needed: 2,
            got: series.len(),
        });
    }
    if series.ed.iter().all(|e| *e == series.ed[0]) {
        return Ok(LineFit {
            slope: 0.0,
            intercept: series.ed[0],
            slope_se: if series.len() > 2 { 0.0 } else { f64::NAN },
        });
    }
    stats::linear_fit(&series.x, &series.ed).ok_or(Error::InvalidInput("x values are constant".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn ids(prefix: &str, r: core::ops::Range<usize>) -> Vec<String> {
        r.map(|i| format!("{prefix}{i:03}")).collect()
    }

    #[test]
    fn mann_kendall_examples() {
        let up: Vec<f64> = (0..10).map(f64::from).collect();
        let r = mann_kendall(&up).unwrap();
        assert_eq!(r.tau, 1.0);
        assert!(r.exact && r.p < 0.01);
        assert!((r.p - 2.0 / 3_628_800.0).abs() < 1e-18);
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let d = mann_kendall(&down).unwrap();
        assert_eq!((d.tau, d.p), (-1.0, r.p));
        let tied = mann_kendall(&[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(tied.s, 5);
        assert!((tied.tau - 5.0 / libm::sqrt(30.0)).abs() < 1e-15);
        assert!(!tied.exact);
        let flat = mann_kendall(&[2.0; 6]).unwrap();
        assert_eq!((flat.tau, flat.p), (0.0, 1.0));
        assert!(mann_kendall(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn exact_distribution_sums() {
        let c = mahonian(4);
        assert_eq!(c, [1.0, 3.0, 5.0, 6.0, 5.0, 3.0, 1.0]);
        // n = 5, S = 10 − 2·inv; P(|S| ≥ 8) = P(inv ≤ 1 or inv ≥ 9) = 10/120
        let r = mann_kendall(&[1.0, 2.0, 3.0, 5.0, 4.0]).unwrap();
        assert_eq!(r.s, 8);
        assert!((r.p - 10.0 / 120.0).abs() < 1e-15);
    }

    #[test]
    fn saturation_recovers_parameters() {
        let pts = |e: f64, h: f64| -> Vec<(f64, f64)> { (1..=15).map(|i| (10.0 * i as f64, e * 10.0 * i as f64 / (10.0 * i as f64 + h))).collect() };
        let f = saturation_fit(&pts(35.4, 35.0)).unwrap();
        assert!((f.ed_inf - 35.4).abs() < 1e-6 && (f.n_half - 35.0).abs() < 1e-6);
        let g = saturation_fit(&pts(8.4, 7.0)).unwrap();
        assert!((g.ed_inf - 8.4).abs() < 1e-9 && (g.n_half - 7.0).abs() < 1e-9);
        assert!((g.predict(7.0) - 4.2).abs() < 1e-9);
        let flat = saturation_fit(&[(5.0, 3.0), (10.0, 3.0), (20.0, 3.0)]).unwrap();
        assert!(flat.boundary && flat.ed_inf == 3.0 && flat.n_half == 0.0);
        assert!(saturation_fit(&[(5.0, 3.0), (10.0, 4.0)]).is_err());
        // decreasing data imply a negative half-saturation count
        assert!(matches!(
            saturation_fit(&[(5.0, 5.0), (10.0, 4.0), (20.0, 3.0)]),
            Err(Error::FitRejected(_))
        ));
    }

    #[test]
    fn tid_examples() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let flat = EdSeries::new(x.clone(), vec![3.0; 20]).unwrap();
        assert_eq!(temporal_information_density(&flat).unwrap().slope, 0.0);
        let line = EdSeries::new(x.clone(), x.iter().map(|v| 2.0 - 0.01 * v).collect()).unwrap();
        assert!((temporal_information_density(&line).unwrap().slope + 0.01).abs() < 1e-12);
        assert!(EdSeries::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn sliding_window_identical_and_full() {
        let row: Vec<f64> = (0..12).map(|j| libm::sin(j as f64)).collect();
        let values = DMatrix::from_fn(3, 12, |_, j| row[j]);
        let s = SuiteScores::new(ids("b", 0..3), ids("m", 0..12), values).unwrap();
        let series = sliding_window_ed(&s, 5, 2, true).unwrap();
        assert_eq!(series.len(), 4);
        assert!(series.ed.iter().all(|e| (e - 1.0).abs() < 1e-12));
        let mixed = DMatrix::from_fn(3, 12, |b, j| libm::sin((j * (b + 1)) as f64));
        let s2 = SuiteScores::new(ids("b", 0..3), ids("m", 0..12), mixed).unwrap();
        let full = sliding_window_ed(&s2, 12, 1, true).unwrap();
        assert_eq!(full.len(), 1);
        assert!((full.ed[0] - crate::composite::suite_ed(&s2).unwrap()).abs() < 1e-12);
        assert!(sliding_window_ed(&s2, 13, 1, true).is_err());
    }

    #[test]
    fn fixed_variance_examples() {
        // task 0: same distribution in both cohorts; task 1: late cohort all pass
        let cells = vec![
            Some(1.0), Some(0.0), Some(1.0), Some(0.0), //
            Some(1.0), Some(0.0), Some(1.0), Some(1.0),
        ];
        let m = ScoreMatrix::new(ids("t", 0..2), ids("m", 0..4), cells).unwrap();
        let kept = fixed_variance_subset(&m, &ids("m", 0..2), &ids("m", 2..4), 0.2).unwrap();
        assert_eq!(kept, ids("t", 0..1));
        assert!(fixed_variance_subset(&m, &[], &ids("m", 2..4), 0.2).is_err());
    }

    fn irt_like(tasks: usize, models: usize) -> ScoreMatrix {
        let x = DMatrix::from_fn(tasks, models, |i, j| {
            let a = libm::sin((i * 7 + 3) as f64) * libm::cos(j as f64 * 0.37);
            let b = libm::cos((i * 3 + 1) as f64) * libm::sin(j as f64 * 1.91 + 0.5);
            let c = libm::sin((i * i + 2) as f64) * libm::sin(j as f64 * 0.13 + (j % 5) as f64);
            0.5 + (a + b + c) / 6.0
        });
        ScoreMatrix::from_dense(ids("t", 0..tasks), ids("m", 0..models), &x).unwrap()
    }

    #[test]
    fn model_count_examples() {
        let m = irt_like(40, 30);
        let full = ed_vs_model_count(&m, &[30], 3, 1).unwrap();
        let direct = gram_ed(&center_dense(&m.to_dense().unwrap(), CenteringScheme::TaskCenter)).unwrap();
        assert!((full[0].mean_ed - direct).abs() < 1e-12 && full[0].sd_ed.abs() < 1e-12);
        let pts = ed_vs_model_count(&m, &[5, 10, 20, 30], 20, 7).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].mean_ed + 2.0 * w[1].sd_ed.max(w[0].sd_ed) >= w[0].mean_ed);
        }
        assert_eq!(pts, ed_vs_model_count(&m, &[5, 10, 20, 30], 20, 7).unwrap());
        assert!(ed_vs_model_count(&m, &[31], 2, 1).is_err());
    }

    #[test]
    fn cohort_compare_examples() {
        // models 0..20 share one profile up to scale; 20..40 vary freely
        let values = DMatrix::from_fn(4, 40, |b, j| {
            if j < 20 {
                (1.0 + j as f64) * (b as f64 + 1.0) + libm::sin((b * 40 + j) as f64) * 0.05
            } else {
                libm::sin(((b + 1) * (j + 3)) as f64 * 1.7)
            }
        });
        let s = SuiteScores::new(ids("b", 0..4), ids("m", 0..40), values).unwrap();
        let (homog, diverse) = (ids("m", 0..20), ids("m", 20..40));
        let same = cohort_bootstrap_compare(&s, &diverse, &diverse, 20, 400, 3).unwrap();
        assert!(same.delta.abs() < 0.1 && (same.p_direction - 0.5).abs() < 0.1);
        let cmp = cohort_bootstrap_compare(&s, &homog, &diverse, 20, 200, 4).unwrap();
        assert!(cmp.p_direction > 0.95 && cmp.delta > 0.0 && cmp.cohens_d > 0.0);
        assert_eq!(cmp, cohort_bootstrap_compare(&s, &homog, &diverse, 20, 200, 4).unwrap());
        assert!(cohort_bootstrap_compare(&s, &ids("m", 0..9), &diverse, 20, 10, 4).is_err());
    }

    #[test]
    fn diversity_insertion_examples() {
        // late cohort is rank one after task centering: column j = c_j · p
        let p = [0.1, 0.6, 0.3, 0.9, 0.5];
        let cells: Vec<Option<f64>> = (0..5)
            .flat_map(|i| {
                let scales = [0.2, 0.5, 0.8, 1.0];
                let late = scales.map(|c| Some(c * p[i]));
                let copy = Some(0.5 * p[i]);
                let orth = Some([0.9, 0.1, 0.8, 0.2, 0.4][i]);
                late.into_iter().chain([copy, orth])
            })
            .collect();
        let m = ScoreMatrix::new(ids("t", 0..5), ids("m", 0..6), cells).unwrap();
        let late = ids("m", 0..4);
        let dup = diversity_insertion_probe(&m, &late, &ids("m", 4..5), 10, 1).unwrap();
        assert!((dup.base_ed - 1.0).abs() < 1e-12);
        assert_eq!(dup.increase_fraction, 0.0);
        let orth = diversity_insertion_probe(&m, &late, &ids("m", 5..6), 10, 1).unwrap();
        assert_eq!(orth.increase_fraction, 1.0);
        let mixed = diversity_insertion_probe(&m, &late, &ids("m", 4..6), 50, 2).unwrap();
        assert!((0.0..=1.0).contains(&mixed.increase_fraction));
        assert!(diversity_insertion_probe(&m, &late, &[], 10, 1).is_err());
    }
}

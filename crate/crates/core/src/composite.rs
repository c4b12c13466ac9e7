//! Multi-benchmark suites: standardized composite rankings, the two-score
//! composite ceiling, Dirichlet weight fragility, leave-one-out effects,
//! exhaustive subset search and information density.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::spectral::{effective_dimensionality, singular_spectrum};
use crate::{par, rng, stats};

/// Benchmark × model score table of a suite. Scores are on any finite
/// scale since every benchmark is standardized before use.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteScores {
    benchmark_ids: Vec<String>,
    model_ids: Vec<String>,
    values: DMatrix<f64>,
}

impl SuiteScores {
    /// `values` is k × N: one row per benchmark.
    pub fn new(benchmark_ids: Vec<String>, model_ids: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let (k, n) = (benchmark_ids.len(), model_ids.len());
        if values.nrows() != k || values.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "score table is {}×{} but ids describe {k}×{n}",
                values.nrows(),
                values.ncols()
            )));
        }
        if k < 1 {
            return Err(Error::InsufficientData {
                what: "benchmarks",
                needed: 1,
                got: 0,
            });
        }
        if n < 2 {
            return Err(Error::InsufficientData {
                what: "models",
                needed: 2,
                got: n,
            });
        }
        for (axis, ids) in [("benchmark", &benchmark_ids), ("model", &model_ids)] {
            let mut seen = BTreeSet::new();
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::DuplicateId { axis, id: id.clone() });
                }
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite score for benchmark `{}`, model `{}`",
                benchmark_ids[pos % k],
                model_ids[pos / k]
            )));
        }
        Ok(SuiteScores {
            benchmark_ids,
            model_ids,
            values,
        })
    }

    pub fn benchmark_ids(&self) -> &[String] {
        &self.benchmark_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_benchmarks(&self) -> usize {
        self.benchmark_ids.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    /// One score vector per benchmark.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn select_benchmarks(&self, keep: &[usize]) -> Result<SuiteScores> {
        SuiteScores::new(
            keep.iter().map(|&b| self.benchmark_ids[b].clone()).collect(),
            self.model_ids.clone(),
            self.values.select_rows(keep.iter()),
        )
    }

    /// Each benchmark z-scored across models (population SD).
    pub fn standardized(&self) -> Result<DMatrix<f64>> {
        let mut z = self.values.clone();
        let n = z.ncols() as f64;
        for (b, mut row) in z.row_iter_mut().enumerate() {
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
            let sd = libm::sqrt(row.norm_squared() / n);
            if sd <= 1e-12 * (1.0 + mean.abs()) {
                return Err(Error::ZeroVariance(format!("benchmark `{}`", self.benchmark_ids[b])));
            }
            row /= sd;
        }
        Ok(z)
    }
}

/// Models ordered best first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ranking {
    pub order: Vec<String>,
}

impl Ranking {
    pub fn champion(&self) -> &str {
        &self.order[0]
    }
}

fn rank_by_scores(model_ids: &[String], scores: &[f64]) -> Ranking {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| model_ids[a].cmp(&model_ids[b])));
    Ranking {
        order: idx.into_iter().map(|i| model_ids[i].clone()).collect(),
    }
}

fn weighted_scores(z: &DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    (0..z.ncols())
        .map(|j| weights.iter().enumerate().map(|(b, w)| w * z[(b, j)]).sum())
        .collect()
}

fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(Error::InvalidArgument(format!("{} weights for {k} benchmarks", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    Ok(())
}

/// Weighted sum of z-scored benchmarks; equal composites are ordered by
/// model id.
pub fn composite_ranking(s: &SuiteScores, weights: &[f64]) -> Result<Ranking> {
    check_weights(weights, s.n_benchmarks())?;
    let z = s.standardized()?;
    Ok(rank_by_scores(s.model_ids(), &weighted_scores(&z, weights)))
}

/// Kendall tau-b between two rankings over the models they share.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for (i, id) in a.order.iter().enumerate() {
        if let Some(j) = b.order.iter().position(|x| x == id) {
            pa.push(i as f64);
            pb.push(j as f64);
        }
    }
    if pa.len() < 2 {
        return Err(Error::InsufficientData {
            what: "shared models",
            needed: 2,
            got: pa.len(),
        });
    }
    stats::kendall_tau_b(&pa, &pb).ok_or(Error::UndefinedCorrelation("rankings".into()))
}

/// Best worst-case correlation of a positively weighted composite of two
/// standardized scores with correlation ρ: `sqrt((1 + ρ) / 2)`, attained
/// at equal weights.
pub fn composite_ceiling(rho: f64) -> Result<f64> {
    if !(rho > -1.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("correlation {rho} outside (-1, 1]")));
    }
    Ok(libm::sqrt((1.0 + rho) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CeilingOracle {
    pub value: f64,
    /// Weight ratio w₂/w₁ at the maximum.
    pub argmax_t: f64,
}

/// Grid maximum over t ∈ logspace(10⁻³, 10³) of min(r₁(t), r₂(t)), where
/// r₁, r₂ are the correlations of the composite s₁ + t·s₂ with each input.
pub fn ceiling_oracle(rho: f64, grid: usize) -> Result<CeilingOracle> {
    if !(rho > -1.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("correlation {rho} outside (-1, 1]")));
    }
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    let mut best = CeilingOracle {
        value: f64::NEG_INFINITY,
        argmax_t: f64::NAN,
    };
    for i in 0..grid {
        let t = libm::pow(10.0, -3.0 + 6.0 * i as f64 / (grid - 1) as f64);
        let norm = libm::sqrt(1.0 + t * t + 2.0 * t * rho);
        let r1 = (1.0 + t * rho) / norm;
        let r2 = (t + rho) / norm;
        let v = r1.min(r2);
        if v > best.value {
            best = CeilingOracle { value: v, argmax_t: t };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FragilityReport {
    pub champion_change_rate: f64,
    pub distinct_champions: usize,
    pub equal_weight_champion: String,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
}

/// How often the composite champion differs from the equal-weight champion
/// under symmetric Dirichlet(α) weights.
pub fn dirichlet_fragility(s: &SuiteScores, alpha: f64, samples: usize, seed: u64) -> Result<FragilityReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("Dirichlet concentration {alpha} must be positive")));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let k = s.n_benchmarks();
    let z = s.standardized()?;
    let equal = rank_by_scores(s.model_ids(), &weighted_scores(&z, &alloc::vec![1.0; k]));
    let baseline = equal.champion();
    let gamma = Gamma::new(alpha, 1.0).map_err(|_| Error::InvalidArgument(format!("Dirichlet concentration {alpha}")))?;
    let champions = par::map_range(samples, |i| {
        let mut r = rng::substream(seed, i as u64);
        let w: Vec<f64> = loop {
            let w: Vec<f64> = (0..k).map(|_| gamma.sample(&mut r)).collect();
            // every draw underflowing to zero is possible for tiny α
            if w.iter().sum::<f64>() > 0.0 {
                break w;
            }
        };
        let scores = weighted_scores(&z, &w);
        let mut best = 0;
        for j in 1..scores.len() {
            let better = scores[j] > scores[best] || (scores[j] == scores[best] && s.model_ids()[j] < s.model_ids()[best]);
            if better {
                best = j;
            }
        }
        best
    });
    let changes = champions.iter().filter(|&&c| s.model_ids()[c] != baseline).count();
    let distinct: BTreeSet<usize> = champions.iter().copied().collect();
    Ok(FragilityReport {
        champion_change_rate: changes as f64 / samples as f64,
        distinct_champions: distinct.len(),
        equal_weight_champion: String::from(baseline),
        alpha,
        samples,
        seed,
    })
}

/// ED of the standardized benchmark × model table.
pub fn suite_ed(s: &SuiteScores) -> Result<f64> {
    // z-scored rows already have zero mean, so task centering is a no-op
    effective_dimensionality(&singular_spectrum(&s.standardized()?)?)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeaveOneOut {
    pub benchmark_id: String,
    /// ED(full) − ED(without this benchmark).
    pub delta_ed: f64,
    pub tau_vs_full: f64,
}

pub fn leave_one_out(s: &SuiteScores) -> Result<Vec<LeaveOneOut>> {
    let k = s.n_benchmarks();
    if k < 2 {
        return Err(Error::InsufficientData {
            what: "benchmarks for leave-one-out",
            needed: 2,
            got: k,
        });
    }
    let full_ed = suite_ed(s)?;
    let full_rank = composite_ranking(s, &alloc::vec![1.0; k])?;
    (0..k)
        .map(|drop| {
            let keep: Vec<usize> = (0..k).filter(|&b| b != drop).collect();
            let reduced = s.select_benchmarks(&keep)?;
            let ed = suite_ed(&reduced)?;
            let rank = composite_ranking(&reduced, &alloc::vec![1.0; k - 1])?;
            Ok(LeaveOneOut {
                benchmark_id: s.benchmark_ids()[drop].clone(),
                delta_ed: full_ed - ed,
                tau_vs_full: kendall_tau(&full_rank, &rank)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsetScore {
    pub benchmarks: Vec<String>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsetSearch {
    pub size: usize,
    pub evaluated: usize,
    pub best: SubsetScore,
    pub worst: SubsetScore,
}

pub const MAX_SUBSETS: u64 = 1_000_000;

fn binomial(n: usize, r: usize) -> u64 {
    let r = r.min(n - r);
    let mut acc: u64 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u64) / (i + 1) as u64;
    }
    acc
}

fn combinations(k: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..size).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..size).rev().find(|&i| c[i] != i + k - size) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..size {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Every `size`-benchmark subset's equal-weight ranking compared with the
/// full suite's by Kendall tau. Ties go to the earliest subset in
/// lexicographic index order.
pub fn best_subset_search(s: &SuiteScores, size: usize) -> Result<SubsetSearch> {
    let k = s.n_benchmarks();
    if size == 0 || size > k {
        return Err(Error::InvalidArgument(format!("subset size {size} outside 1..={k}")));
    }
    let count = binomial(k, size);
    if count > MAX_SUBSETS {
        return Err(Error::InvalidArgument(format!(
            "{count} subsets exceed the exhaustive-search limit of {MAX_SUBSETS}"
        )));
    }
    let z = s.standardized()?;
    let full = rank_by_scores(s.model_ids(), &weighted_scores(&z, &alloc::vec![1.0; k]));
    let combos = combinations(k, size);
    let taus = par::map_range(combos.len(), |c| {
        let mut w = alloc::vec![0.0; k];
        for &b in &combos[c] {
            w[b] = 1.0;
        }
        kendall_tau(&full, &rank_by_scores(s.model_ids(), &weighted_scores(&z, &w)))
    });
    let taus: Vec<f64> = taus.into_iter().collect::<Result<_>>()?;
    let (mut best, mut worst) = (0, 0);
    for (i, &t) in taus.iter().enumerate() {
        if t > taus[best] {
            best = i;
        }
        if t < taus[worst] {
            worst = i;
        }
    }
    let score = |i: usize| SubsetScore {
        benchmarks: combos[i].iter().map(|&b| s.benchmark_ids()[b].clone()).collect(),
        tau: taus[i],
    };
    Ok(SubsetSearch {
        size,
        evaluated: combos.len(),
        best: score(best),
        worst: score(worst),
    })
}

/// ED per reported score.
pub fn information_density(ed: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("a suite needs at least one score".into()));
    }
    Ok(ed / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn suite(rows: &[&[f64]]) -> SuiteScores {
        let k = rows.len();
        let n = rows[0].len();
        SuiteScores::new(
            (0..k).map(|b| format!("b{b}")).collect(),
            (0..n).map(|j| format!("m{j}")).collect(),
            DMatrix::from_fn(k, n, |b, j| rows[b][j]),
        )
        .unwrap()
    }

    fn order(r: &Ranking) -> Vec<&str> {
        r.order.iter().map(String::as_str).collect()
    }

    #[test]
    fn ranking_examples() {
        let single = suite(&[&[0.2, 0.9, 0.5]]);
        assert_eq!(order(&composite_ranking(&single, &[3.0]).unwrap()), ["m1", "m2", "m0"]);
        let twins = suite(&[&[0.2, 0.9, 0.5], &[0.2, 0.9, 0.5]]);
        assert_eq!(order(&composite_ranking(&twins, &[0.3, 2.0]).unwrap()), ["m1", "m2", "m0"]);
        let anti = suite(&[&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]]);
        let a = composite_ranking(&anti, &[1.0, 0.0]).unwrap();
        let b = composite_ranking(&anti, &[0.0, 1.0]).unwrap();
        let mut rev = b.order.clone();
        rev.reverse();
        assert_eq!(a.order, rev);
        // all composites tie at equal weights: id order decides
        assert_eq!(order(&composite_ranking(&anti, &[1.0, 1.0]).unwrap()), ["m0", "m1", "m2"]);
        assert!(composite_ranking(&anti, &[0.0, 0.0]).is_err());
        assert!(matches!(
            composite_ranking(&suite(&[&[1.0, 1.0, 1.0]]), &[1.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn tau_examples() {
        let r = |ids: &[&str]| Ranking {
            order: ids.iter().map(|s| String::from(*s)).collect(),
        };
        let base = r(&["a", "b", "c", "d"]);
        assert_eq!(kendall_tau(&base, &base).unwrap(), 1.0);
        assert_eq!(kendall_tau(&base, &r(&["d", "c", "b", "a"])).unwrap(), -1.0);
        assert!((kendall_tau(&base, &r(&["a", "b", "d", "c"])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall_tau(&base, &r(&["b", "x", "a"])).unwrap(), -1.0);
    }

    #[test]
    fn ceiling_examples() {
        assert!((composite_ceiling(-0.64).unwrap() - 0.4243).abs() < 1e-4);
        assert!((composite_ceiling(0.96).unwrap() - 0.9899).abs() < 1e-4);
        assert_eq!(composite_ceiling(1.0).unwrap(), 1.0);
        assert!(composite_ceiling(-1.0).is_err());
        let o = ceiling_oracle(0.0, 10_000).unwrap();
        assert!((o.value - libm::sqrt(0.5)).abs() < 1e-3);
        assert!(o.argmax_t > 0.99 && o.argmax_t < 1.01);
    }

    #[test]
    fn fragility_examples() {
        let single = suite(&[&[0.2, 0.9, 0.5]]);
        let f = dirichlet_fragility(&single, 1.0, 200, 1).unwrap();
        assert_eq!((f.champion_change_rate, f.distinct_champions), (0.0, 1));
        let twins = suite(&[&[0.2, 0.9, 0.5], &[0.2, 0.9, 0.5]]);
        for alpha in [0.1, 1.0, 10.0] {
            assert_eq!(dirichlet_fragility(&twins, alpha, 200, 2).unwrap().champion_change_rate, 0.0);
        }
        assert!(dirichlet_fragility(&twins, 0.0, 10, 2).is_err());
    }

    #[test]
    fn leave_one_out_two_benchmarks() {
        let s = suite(&[&[0.1, 0.5, 0.3, 0.9], &[0.4, 0.2, 0.8, 0.6]]);
        for entry in leave_one_out(&s).unwrap() {
            assert!((suite_ed(&s).unwrap() - entry.delta_ed - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn leave_one_out_clone_pair() {
        // comonotone columns: every positive-weight composite ranks alike
        let a = [0.1, 0.3, 0.35, 0.6, 0.9, 0.95];
        let b: Vec<f64> = a.iter().map(|v| v * v * v).collect();
        let s = suite(&[&a, &a, &b]);
        let loo = leave_one_out(&s).unwrap();
        assert!(loo[1].delta_ed.abs() < loo[2].delta_ed.abs());
        assert_eq!(loo[1].tau_vs_full, 1.0);
    }

    #[test]
    fn subset_search_full_size_and_bounds() {
        let s = suite(&[&[0.1, 0.5, 0.3, 0.9], &[0.4, 0.2, 0.8, 0.6], &[0.3, 0.3, 0.1, 0.7]]);
        let full = best_subset_search(&s, 3).unwrap();
        assert_eq!(full.best.tau, 1.0);
        assert_eq!(full.evaluated, 1);
        let two = best_subset_search(&s, 2).unwrap();
        assert!(two.best.tau >= two.worst.tau);
        assert_eq!(two.evaluated, 3);
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn density_examples() {
        assert!((information_density(1.7, 6).unwrap() - 0.2833).abs() < 1e-4);
        assert_eq!(information_density(5.0, 5).unwrap(), 1.0);
        assert_eq!(information_density(1.0, 4).unwrap(), 0.25);
    }
}

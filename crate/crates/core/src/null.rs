//! Null calibration and stability of ED: the Marchenko–Pastur reference,
//! permutation bands for significant components, bootstrap intervals,
//! matched-dimension subsampling, split-half reliability, metadata AUC and
//! classical factor-retention rules.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::spectral::{center_dense, gram_ed, principal_components, singular_spectrum, CenteringScheme};
use crate::{par, rng, stats};

/// Analytic ED of an i.i.d. T×N matrix: `TN / (T + N)`.
pub fn mp_null_ed(t: usize, n: usize) -> f64 {
    let (t, n) = (t as f64, n as f64);
    t * n / (t + n)
}

/// Observed ED of one matrix against its analytic null, with a bootstrap
/// interval over models.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdReport {
    pub ed: f64,
    /// Leading component's share of variance, in percent.
    pub pc1_pct: f64,
    pub ed_null: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tasks: usize,
    pub models: usize,
    pub seed: u64,
    pub iterations: usize,
    pub centering: CenteringScheme,
}

/// Computes ED, PC1%, the null ratio and a bootstrap interval. The
/// percentile interval can miss the point estimate on skewed bootstrap
/// distributions; it is widened to contain it.
pub fn ed_report(m: &ScoreMatrix, scheme: CenteringScheme, iterations: usize, level: f64, seed: u64) -> Result<EdReport> {
    let x = center_dense(&m.to_dense()?, scheme);
    let spectrum = singular_spectrum(&x)?;
    let ed = crate::spectral::effective_dimensionality(&spectrum)?;
    let pc1 = crate::spectral::pc1_fraction(&spectrum)?;
    let (lo, hi) = bootstrap_ci_dense(&m.to_dense()?, scheme, iterations, level, seed)?;
    let ed_null = mp_null_ed(m.n_tasks(), m.n_models());
    Ok(EdReport {
        ed,
        pc1_pct: 100.0 * pc1,
        ed_null,
        ratio: ed / ed_null,
        ci_low: lo.min(ed),
        ci_high: hi.max(ed),
        tasks: m.n_tasks(),
        models: m.n_models(),
        seed,
        iterations,
        centering: scheme,
    })
}

/// How permutation replicates scramble the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ShuffleScheme {
    /// Permute each task row across models; keeps every task's pass rate.
    #[default]
    WithinTasks,
    /// Permute each model column across tasks; keeps every model's mean.
    WithinModels,
}

/// Per-rank 95th percentile of permuted variance fractions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NullSpectrumBand {
    pub band: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub shuffle: ShuffleScheme,
}

pub const NULL_BAND_QUANTILE: f64 = 0.95;

fn task_centered_fractions(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(singular_spectrum(&center_dense(x, CenteringScheme::TaskCenter))?.variance_fractions())
}

pub fn permutation_null(m: &ScoreMatrix, replicates: usize, seed: u64, shuffle: ShuffleScheme) -> Result<NullSpectrumBand> {
    if replicates < 2 {
        return Err(Error::InsufficientData {
            what: "permutation replicates",
            needed: 2,
            got: replicates,
        });
    }
    let x = m.to_dense()?;
    let (t, n) = (x.nrows(), x.ncols());
    let spectra = par::map_range(replicates, |r| {
        let mut rng = rng::substream(seed, r as u64);
        let mut y = x.clone();
        match shuffle {
            ShuffleScheme::WithinTasks => {
                let mut buf = vec![0.0; n];
                for i in 0..t {
                    for j in 0..n {
                        buf[j] = y[(i, j)];
                    }
                    buf.shuffle(&mut rng);
                    for j in 0..n {
                        y[(i, j)] = buf[j];
                    }
                }
            }
            ShuffleScheme::WithinModels => {
                for mut col in y.column_iter_mut() {
                    col.as_mut_slice().shuffle(&mut rng);
                }
            }
        }
        task_centered_fractions(&y)
    });
    let spectra: Vec<Vec<f64>> = spectra.into_iter().collect::<Result<_>>()?;
    let ranks = t.min(n);
    let band = (0..ranks)
        .map(|k| {
            let mut col: Vec<f64> = spectra.iter().map(|s| s[k]).collect();
            stats::sort_f64(&mut col);
            stats::quantile_sorted(&col, NULL_BAND_QUANTILE)
        })
        .collect();
    Ok(NullSpectrumBand {
        band,
        replicates,
        seed,
        shuffle,
    })
}

/// Number of leading components whose observed variance fraction exceeds
/// the band at every rank up to and including them.
pub fn significant_pcs(m: &ScoreMatrix, band: &NullSpectrumBand) -> Result<usize> {
    let observed = task_centered_fractions(&m.to_dense()?)?;
    if observed.len() != band.band.len() {
        return Err(Error::InvalidInput(format!(
            "band has {} ranks but the matrix has {}",
            band.band.len(),
            observed.len()
        )));
    }
    Ok(observed.iter().zip(&band.band).take_while(|(o, b)| o > b).count())
}

fn bootstrap_ci_dense(x: &DMatrix<f64>, scheme: CenteringScheme, iterations: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    let n = x.ncols();
    if n < 5 {
        return Err(Error::InsufficientData {
            what: "models for a bootstrap interval",
            needed: 5,
            got: n,
        });
    }
    if iterations < 2 {
        return Err(Error::InsufficientData {
            what: "bootstrap iterations",
            needed: 2,
            got: iterations,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    let draws = par::map_range(iterations, |b| {
        let mut rng = rng::substream(seed, b as u64);
        let cols: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let y = x.select_columns(cols.iter());
        gram_ed(&center_dense(&y, scheme))
    });
    let mut values = Vec::with_capacity(iterations);
    for d in draws {
        match d {
            Ok(v) => values.push(v),
            // a resample of identical columns has no variance left
            Err(Error::ZeroSpectrum) => {}
            Err(e) => return Err(e),
        }
    }
    if values.len() < 2 {
        return Err(Error::ZeroSpectrum);
    }
    Ok(stats::percentile_interval(&mut values, level))
}

/// Percentile interval of ED over model resamples (columns drawn with
/// replacement). Resamples whose centered matrix vanishes are skipped.
pub fn bootstrap_ed_ci(m: &ScoreMatrix, iterations: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    bootstrap_ci_dense(&m.to_dense()?, CenteringScheme::TaskCenter, iterations, level, seed)
}

/// Mean and sample standard deviation of ED over random `tasks × models`
/// submatrices drawn without replacement.
pub fn matched_dimension_ed(m: &ScoreMatrix, tasks: usize, models: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let x = m.to_dense()?;
    let (t, n) = (x.nrows(), x.ncols());
    if tasks == 0 || tasks > t || models < 2 || models > n {
        return Err(Error::InvalidArgument(format!(
            "cannot take {tasks}×{models} from a {t}×{n} matrix"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let eds = par::map_range(trials, |r| {
        let mut rng = rng::substream(seed, r as u64);
        let mut rows = index::sample(&mut rng, t, tasks).into_vec();
        let mut cols = index::sample(&mut rng, n, models).into_vec();
        rows.sort_unstable();
        cols.sort_unstable();
        let y = x.select_rows(rows.iter()).select_columns(cols.iter());
        gram_ed(&center_dense(&y, CenteringScheme::TaskCenter))
    });
    let eds: Vec<f64> = eds.into_iter().collect::<Result<_>>()?;
    Ok((stats::mean(&eds), stats::sample_sd(&eds)))
}

/// Mean absolute correlation between matched task loadings of the two
/// halves of random model splits, per component (length `k`).
pub fn split_half_reliability(m: &ScoreMatrix, splits: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    let x = m.to_dense()?;
    let (t, n) = (x.nrows(), x.ncols());
    if n < 10 {
        return Err(Error::InsufficientData {
            what: "models for split-half reliability",
            needed: 10,
            got: n,
        });
    }
    let half = n / 2;
    if k == 0 || k > t.min(half) {
        return Err(Error::InvalidArgument(format!(
            "component count {k} outside 1..={}",
            t.min(half)
        )));
    }
    if splits == 0 {
        return Err(Error::InvalidArgument("splits must be positive".into()));
    }
    let per_split = par::map_range(splits, |s| -> Result<Vec<f64>> {
        let mut rng = rng::substream(seed, s as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (a, b) = perm.split_at(half);
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        let pa = principal_components(&center_dense(&x.select_columns(a.iter()), CenteringScheme::TaskCenter), k)?;
        let pb = principal_components(&center_dense(&x.select_columns(b.iter()), CenteringScheme::TaskCenter), k)?;
        let r: Vec<Vec<f64>> = pa
            .loadings
            .iter()
            .map(|la| pb.loadings.iter().map(|lb| stats::pearson(la, lb).map_or(0.0, f64::abs)).collect())
            .collect();
        let mut matched = vec![0.0; k];
        let mut used_a = vec![false; k];
        let mut used_b = vec![false; k];
        for _ in 0..k {
            let mut best = (-1.0, 0, 0);
            for i in (0..k).filter(|&i| !used_a[i]) {
                for j in (0..k).filter(|&j| !used_b[j]) {
                    if r[i][j] > best.0 {
                        best = (r[i][j], i, j);
                    }
                }
            }
            let (v, i, j) = best;
            used_a[i] = true;
            used_b[j] = true;
            matched[i] = v;
        }
        Ok(matched)
    });
    let per_split: Vec<Vec<f64>> = per_split.into_iter().collect::<Result<_>>()?;
    Ok((0..k)
        .map(|c| per_split.iter().map(|v| v[c]).sum::<f64>() / splits as f64)
        .collect())
}

/// Orientation-free ROC AUC of scores against binary labels: the larger of
/// AUC and 1 − AUC, with ties counted as one half.
pub fn pc_metadata_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput("scores and labels have different lengths".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = stats::average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let (p, q) = (pos as f64, neg as f64);
    let auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
    Ok(auc.max(1.0 - auc))
}

/// Component counts from classical retention rules applied to the
/// model×model correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlternativeEstimates {
    pub parallel_analysis: usize,
    pub kaiser: usize,
    pub broken_stick: usize,
    pub var80: usize,
    pub var90: usize,
}

pub const PARALLEL_ANALYSIS_REPLICATES: usize = 20;

fn correlation_eigenvalues(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let t = x.nrows();
    let mut z = x.clone();
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let mean = col.sum() / t as f64;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm <= 1e-12 * (1.0 + mean.abs()) * libm::sqrt(t as f64) {
            return Err(Error::ZeroVariance(format!("model column {j}")));
        }
        col /= norm;
    }
    let c = z.transpose() * &z;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().map(|e| e.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

fn components_to_reach(ev: &[f64], fraction: f64) -> usize {
    let total: f64 = ev.iter().sum();
    let mut acc = 0.0;
    for (i, e) in ev.iter().enumerate() {
        acc += e;
        // relative slack absorbs rounding in the cumulative sum
        if acc >= fraction * total * (1.0 - 1e-12) {
            return i + 1;
        }
    }
    ev.len()
}

/// Parallel analysis (against `replicates` column-permuted copies), Kaiser,
/// broken-stick and 80% / 90% explained-variance counts.
pub fn alternative_estimators(m: &ScoreMatrix, replicates: usize, seed: u64) -> Result<AlternativeEstimates> {
    let x = m.to_dense()?;
    if x.nrows() < 3 {
        return Err(Error::InsufficientData {
            what: "tasks for model correlations",
            needed: 3,
            got: x.nrows(),
        });
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("parallel analysis needs at least one replicate".into()));
    }
    let ev = correlation_eigenvalues(&x)?;
    let p = ev.len();
    let total: f64 = ev.iter().sum();
    let kaiser = ev.iter().filter(|&&e| e > 1.0).count();
    let broken_stick = (0..p)
        .filter(|&i| {
            let expected: f64 = (i + 1..=p).map(|j| 1.0 / j as f64).sum::<f64>() / p as f64;
            ev[i] / total > expected
        })
        .count();
    let permuted = par::map_range(replicates, |r| {
        let mut rng = rng::substream(seed, r as u64);
        let mut y = x.clone();
        for mut col in y.column_iter_mut() {
            col.as_mut_slice().shuffle(&mut rng);
        }
        correlation_eigenvalues(&y)
    });
    let permuted: Vec<Vec<f64>> = permuted.into_iter().collect::<Result<_>>()?;
    let parallel_analysis = (0..p)
        .filter(|&i| {
            let mean = permuted.iter().map(|e| e[i]).sum::<f64>() / replicates as f64;
            ev[i] > mean
        })
        .count();
    Ok(AlternativeEstimates {
        parallel_analysis,
        kaiser,
        broken_stick,
        var80: components_to_reach(&ev, 0.8),
        var90: components_to_reach(&ev, 0.9),
    })
}

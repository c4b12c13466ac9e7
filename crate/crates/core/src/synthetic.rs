//! Ground-truth generators: multidimensional 2PL IRT pass/fail matrices,
//! i.i.d. null matrices and saturation series, plus the rank-recovery
//! harness that checks ED against a known latent dimension.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::spectral::{center_dense, gram_ed, CenteringScheme};
use crate::{par, rng, stats};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IrtSpec {
    pub k: usize,
    pub tasks: usize,
    pub models: usize,
    pub discrimination_scale: f64,
    pub difficulty_spread: f64,
    /// Draw loadings on the nonnegative part of the sphere only, so every
    /// task rewards every ability.
    pub nonnegative_loadings: bool,
    pub seed: u64,
}

impl IrtSpec {
    pub fn new(k: usize, tasks: usize, models: usize, seed: u64) -> Self {
        IrtSpec {
            k,
            tasks,
            models,
            discrimination_scale: 1.0,
            difficulty_spread: 1.0,
            nonnegative_loadings: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.tasks.min(self.models) {
            return Err(Error::InvalidArgument(format!(
                "k = {} must lie in 1..={}",
                self.k,
                self.tasks.min(self.models)
            )));
        }
        for (name, v) in [("discrimination_scale", self.discrimination_scale), ("difficulty_spread", self.difficulty_spread)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Draws abilities, then task loadings, then difficulties, then the
/// pass/fail cells, all from one stream of `spec.seed`.
pub fn gen_irt_dense(spec: &IrtSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (k, t, n) = (spec.k, spec.tasks, spec.models);
    let mut r = rng::substream(spec.seed, 0);
    let theta: Vec<f64> = (0..n * k).map(|_| StandardNormal.sample(&mut r)).collect();
    let mut loadings = Vec::with_capacity(t * k);
    for _ in 0..t {
        loop {
            let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut r)).collect();
            if spec.nonnegative_loadings {
                v.iter_mut().for_each(|x| *x = x.abs());
            }
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
            if norm > 0.0 {
                loadings.extend(v.iter().map(|x| spec.discrimination_scale * x / norm));
                break;
            }
        }
    }
    let difficulty: Vec<f64> = (0..t)
        .map(|_| spec.difficulty_spread * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r))
        .collect();
    let mut cells = DMatrix::zeros(t, n);
    for i in 0..t {
        let a = &loadings[i * k..(i + 1) * k];
        for j in 0..n {
            let th = &theta[j * k..(j + 1) * k];
            let z: f64 = a.iter().zip(th).map(|(x, y)| x * y).sum::<f64>() - difficulty[i];
            if r.random::<f64>() < logistic(z) {
                cells[(i, j)] = 1.0;
            }
        }
    }
    Ok(cells)
}

/// Binary 2PL IRT score matrix with `k` latent ability dimensions.
pub fn gen_irt_matrix(spec: &IrtSpec) -> Result<ScoreMatrix> {
    ScoreMatrix::from_dense_auto(&gen_irt_dense(spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum IidKind {
    Gaussian,
    Bernoulli(f64),
}

/// T×N matrix of i.i.d. standard normal or Bernoulli(p) entries.
pub fn gen_iid_matrix(tasks: usize, models: usize, kind: IidKind, seed: u64) -> Result<DMatrix<f64>> {
    if tasks == 0 || models == 0 {
        return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
    }
    let mut r = rng::substream(seed, 0);
    match kind {
        IidKind::Gaussian => Ok(DMatrix::from_fn(tasks, models, |_, _| StandardNormal.sample(&mut r))),
        IidKind::Bernoulli(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("Bernoulli p = {p} outside [0, 1]")));
            }
            Ok(DMatrix::from_fn(tasks, models, |_, _| if r.random::<f64>() < p { 1.0 } else { 0.0 }))
        }
    }
}

/// `(n, ed_inf · n/(n + n_half) + noise)` for each count, noise ~ N(0, noise_sd).
pub fn gen_saturation_series(ed_inf: f64, n_half: f64, counts: &[f64], noise_sd: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    let noise = Normal::new(0.0, noise_sd).map_err(|_| Error::InvalidArgument(format!("noise sd {noise_sd} is invalid")))?;
    let mut r = rng::substream(seed, 0);
    Ok(counts
        .iter()
        .map(|&n| (n, ed_inf * n / (n + n_half) + noise.sample(&mut r)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankRecovery {
    pub ks: Vec<usize>,
    pub tasks: usize,
    pub models: usize,
    pub discrimination_scale: f64,
    /// Spearman correlation between k and the seed-averaged ED.
    pub spearman_rho: f64,
    /// Mean and sample SD of the per-seed Spearman correlations.
    pub per_seed_rho_mean: f64,
    pub per_seed_rho_sd: f64,
    pub mean_ed: Vec<f64>,
    /// Mean ED divided by k.
    pub overestimate_ratio: Vec<f64>,
    /// ED per k (outer) and seed (inner).
    pub ed: Vec<Vec<f64>>,
    pub seeds: usize,
    pub base_seed: u64,
}

/// Discrimination scale the rank-recovery harness uses by default.
pub const RANK_RECOVERY_SCALE: f64 = 2.0;

/// Generates one IRT matrix per (k, seed) cell and relates its task-centered
/// ED to the true k.
pub fn rank_recovery_report(
    ks: &[usize],
    seeds: usize,
    tasks: usize,
    models: usize,
    discrimination_scale: f64,
    base_seed: u64,
) -> Result<RankRecovery> {
    if ks.len() < 2 || seeds == 0 {
        return Err(Error::InvalidArgument("need at least two k values and one seed".into()));
    }
    let cells = par::map_range(ks.len() * seeds, |c| -> Result<f64> {
        let (ki, s) = (c / seeds, c % seeds);
        let spec = IrtSpec {
            k: ks[ki],
            tasks,
            models,
            discrimination_scale,
            difficulty_spread: 1.0,
            nonnegative_loadings: false,
            seed: rng::derive_seed(base_seed, (ki * seeds + s) as u64),
        };
        gram_ed(&center_dense(&gen_irt_dense(&spec)?, CenteringScheme::TaskCenter))
    });
    let flat: Vec<f64> = cells.into_iter().collect::<Result<_>>()?;
    let ed: Vec<Vec<f64>> = flat.chunks(seeds).map(<[f64]>::to_vec).collect();
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let mean_ed: Vec<f64> = ed.iter().map(|v| stats::mean(v)).collect();
    let per_seed: Vec<f64> = (0..seeds)
        .map(|s| stats::spearman(&kf, &ed.iter().map(|v| v[s]).collect::<Vec<_>>()).unwrap_or(0.0))
        .collect();
    Ok(RankRecovery {
        spearman_rho: stats::spearman(&kf, &mean_ed).unwrap_or(0.0),
        per_seed_rho_mean: stats::mean(&per_seed),
        per_seed_rho_sd: stats::sample_sd(&per_seed),
        overestimate_ratio: mean_ed.iter().zip(&kf).map(|(e, k)| e / k).collect(),
        mean_ed,
        ed,
        ks: ks.to_vec(),
        tasks,
        models,
        discrimination_scale,
        seeds,
        base_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::null::mp_null_ed;
    use crate::spectral::matrix_ed;

    #[test]
    fn spec_validation() {
        assert!(IrtSpec::new(0, 10, 10, 1).validate().is_err());
        assert!(IrtSpec::new(11, 20, 10, 1).validate().is_err());
        let mut s = IrtSpec::new(2, 10, 10, 1);
        s.discrimination_scale = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn irt_is_deterministic_and_complete() {
        let spec = IrtSpec::new(3, 40, 20, 9);
        let a = gen_irt_matrix(&spec).unwrap();
        assert_eq!(a, gen_irt_matrix(&spec).unwrap());
        assert!(a.is_binary() && a.missing_count() == 0);
    }

    #[test]
    fn flat_irt_matches_null() {
        let mut spec = IrtSpec::new(1, 300, 100, 4);
        spec.discrimination_scale = 0.0;
        spec.difficulty_spread = 0.0;
        let ed = matrix_ed(&gen_irt_matrix(&spec).unwrap(), CenteringScheme::TaskCenter).unwrap();
        let null = mp_null_ed(300, 100);
        assert!((ed / null - 1.0).abs() < 0.1, "{ed} vs {null}");
    }

    #[test]
    fn steep_single_factor_is_low_dimensional() {
        let mut spec = IrtSpec::new(1, 200, 60, 5);
        spec.discrimination_scale = 50.0;
        let ed = matrix_ed(&gen_irt_matrix(&spec).unwrap(), CenteringScheme::TaskCenter).unwrap();
        assert!((1.0..=2.0).contains(&ed), "{ed}");
    }

    #[test]
    fn nonnegative_loadings_key_every_task_forward() {
        let item_total = |nonneg: bool| -> Vec<f64> {
            let mut spec = IrtSpec::new(1, 40, 400, 6);
            spec.discrimination_scale = 3.0;
            spec.nonnegative_loadings = nonneg;
            let x = gen_irt_dense(&spec).unwrap();
            let total: Vec<f64> = x.column_iter().map(|c| c.sum()).collect();
            x.row_iter()
                .map(|r| crate::stats::pearson(&r.iter().copied().collect::<Vec<_>>(), &total).unwrap_or(0.0))
                .collect()
        };
        assert!(item_total(true).iter().all(|r| *r > 0.0));
        assert!(item_total(false).iter().any(|r| *r < 0.0));
    }

    #[test]
    fn iid_generators() {
        let g = gen_iid_matrix(500, 134, IidKind::Gaussian, 3).unwrap();
        let ed = gram_ed(&g).unwrap();
        assert!((ed / 105.7 - 1.0).abs() < 0.1, "{ed}");
        assert!(gen_iid_matrix(4, 5, IidKind::Bernoulli(1.0), 0).unwrap().iter().all(|v| *v == 1.0));
        assert_eq!(gen_iid_matrix(4, 5, IidKind::Gaussian, 8).unwrap(), gen_iid_matrix(4, 5, IidKind::Gaussian, 8).unwrap());
        assert!(gen_iid_matrix(4, 5, IidKind::Bernoulli(1.5), 0).is_err());
    }

    #[test]
    fn saturation_series_noiseless() {
        let s = gen_saturation_series(8.4, 7.0, &[7.0, 14.0], 0.0, 1).unwrap();
        assert!((s[0].1 - 4.2).abs() < 1e-12 && (s[1].1 - 5.6).abs() < 1e-12);
    }
}

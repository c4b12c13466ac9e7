//! Task selection: greedy ED maximization, five comparison selectors,
//! ranking fidelity, compression curves, a submodularity probe and
//! prospective cohort splits.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::{par, rng, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SelectionMethod {
    EdGreedy,
    Random,
    MaxVariance,
    IrtDiscrimination,
    KMedoids,
    TwoStage,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 6] = [
        SelectionMethod::EdGreedy,
        SelectionMethod::Random,
        SelectionMethod::MaxVariance,
        SelectionMethod::IrtDiscrimination,
        SelectionMethod::KMedoids,
        SelectionMethod::TwoStage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::EdGreedy => "ed_greedy",
            SelectionMethod::Random => "random",
            SelectionMethod::MaxVariance => "max_variance",
            SelectionMethod::IrtDiscrimination => "irt_discrimination",
            SelectionMethod::KMedoids => "k_medoids",
            SelectionMethod::TwoStage => "two_stage",
        }
    }

    pub fn is_seeded(self) -> bool {
        matches!(self, SelectionMethod::Random | SelectionMethod::KMedoids)
    }
}

impl core::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown selection method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionResult {
    pub method: SelectionMethod,
    /// Seed used by randomized methods; `None` for deterministic ones.
    pub seed: Option<u64>,
    /// Selected task ids in selection order.
    pub selected: Vec<String>,
    /// ED of each prefix of `selected`.
    pub trajectory: Vec<f64>,
    /// Kendall tau-b between model rankings on the selection and on all tasks.
    pub fidelity: f64,
}

/// Task-centered rows with the quantities the greedy recurrence needs.
struct Rows {
    centered: Vec<Vec<f64>>,
    /// Squared norm of each centered row (N times the task variance).
    norm2: Vec<f64>,
    /// Rows that are exactly constant; their centered form is all zeros.
    degenerate: Vec<bool>,
}

impl Rows {
    fn new(m: &ScoreMatrix) -> Result<Self> {
        let x = m.to_dense()?;
        let mut centered = Vec::with_capacity(x.nrows());
        let mut degenerate = Vec::with_capacity(x.nrows());
        for row in x.row_iter() {
            let vals: Vec<f64> = row.iter().copied().collect();
            let constant = vals.iter().all(|v| *v == vals[0]);
            let mean = stats::mean(&vals);
            centered.push(if constant { vec![0.0; vals.len()] } else { vals.iter().map(|v| v - mean).collect() });
            degenerate.push(constant);
        }
        let norm2 = centered.iter().map(|r| dot(r, r)).collect();
        Ok(Rows {
            centered,
            norm2,
            degenerate,
        })
    }

    fn gram(&self, a: usize, b: usize) -> f64 {
        dot(&self.centered[a], &self.centered[b])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ED after adding a row with squared norm `g` and summed squared
/// cross-products `cross` to a set with trace `tr` and Gram mass `f`.
fn step_ed(tr: f64, f: f64, g: f64, cross: f64) -> f64 {
    let num = tr + g;
    let den = f + (2.0 * cross + g * g);
    if den > 0.0 {
        num * num / den
    } else {
        0.0
    }
}

fn trajectory_from_rows(rows: &Rows, order: &[usize]) -> Vec<f64> {
    let (mut tr, mut f) = (0.0, 0.0);
    let mut out = Vec::with_capacity(order.len());
    for (pos, &t) in order.iter().enumerate() {
        let mut cross = 0.0;
        for &s in &order[..pos] {
            let g = rows.gram(s, t);
            cross += g * g;
        }
        let g = rows.norm2[t];
        out.push(step_ed(tr, f, g, cross));
        tr += g;
        f += 2.0 * cross + g * g;
    }
    out
}

/// ED of each prefix of `order` (task indices) on the task-centered
/// matrix, computed from scratch with the same recurrence the greedy
/// search uses incrementally. Prefixes made only of constant tasks have
/// no variance and are reported as 0.
pub fn subset_ed_trajectory(m: &ScoreMatrix, order: &[usize]) -> Result<Vec<f64>> {
    check_indices(order, m.n_tasks())?;
    Ok(trajectory_from_rows(&Rows::new(m)?, order))
}

fn check_indices(order: &[usize], t: usize) -> Result<()> {
    let mut seen = vec![false; t];
    for &i in order {
        if i >= t {
            return Err(Error::InvalidInput(format!("task index {i} out of range for {t} tasks")));
        }
        if core::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidInput(format!("task index {i} selected twice")));
        }
    }
    Ok(())
}

fn check_budget(k: usize, t: usize) -> Result<()> {
    if k == 0 || k > t {
        return Err(Error::InvalidArgument(format!("selection size {k} outside 1..={t}")));
    }
    Ok(())
}

fn greedy_order(m: &ScoreMatrix, rows: &Rows, k: usize) -> Result<Vec<usize>> {
    let t = m.n_tasks();
    check_budget(k, t)?;
    if rows.degenerate.iter().all(|d| *d) {
        return Err(Error::AllDegenerate);
    }
    let ids = m.task_ids();
    let mut chosen = vec![false; t];
    let mut cross = vec![0.0; t];
    let (mut tr, mut f) = (0.0, 0.0);
    let mut order = Vec::with_capacity(k);
    for step in 0..k {
        let candidates: Vec<usize> = (0..t).filter(|&c| !chosen[c] && !(step == 0 && rows.degenerate[c])).collect();
        let eds = par::map_range(candidates.len(), |i| {
            let c = candidates[i];
            step_ed(tr, f, rows.norm2[c], cross[c])
        });
        let mut best = 0;
        for i in 1..candidates.len() {
            let (a, b) = (candidates[i], candidates[best]);
            let better = eds[i] > eds[best]
                || (eds[i] == eds[best]
                    && (rows.norm2[a] > rows.norm2[b] || (rows.norm2[a] == rows.norm2[b] && ids[a] < ids[b])));
            if better {
                best = i;
            }
        }
        let s = candidates[best];
        let g = rows.norm2[s];
        tr += g;
        f += 2.0 * cross[s] + g * g;
        chosen[s] = true;
        order.push(s);
        let updates = par::map_range(t, |c| if chosen[c] { 0.0 } else { rows.gram(s, c) });
        for (c, g) in updates.into_iter().enumerate() {
            if !chosen[c] {
                cross[c] += g * g;
            }
        }
    }
    Ok(order)
}

fn result(m: &ScoreMatrix, rows: &Rows, method: SelectionMethod, seed: Option<u64>, order: Vec<usize>) -> Result<SelectionResult> {
    let trajectory = trajectory_from_rows(rows, &order);
    let fidelity = ranking_fidelity(m, &order).unwrap_or(0.0);
    Ok(SelectionResult {
        method,
        seed,
        selected: order.iter().map(|&i| m.task_ids()[i].clone()).collect(),
        trajectory,
        fidelity,
    })
}

/// Greedy forward selection of the task that most increases ED. The first
/// pick (every candidate gives ED 1) and any later exact ties go to the
/// higher-variance task, then the smaller task id.
pub fn ed_greedy(m: &ScoreMatrix, k: usize) -> Result<SelectionResult> {
    let rows = Rows::new(m)?;
    let order = greedy_order(m, &rows, k)?;
    result(m, &rows, SelectionMethod::EdGreedy, None, order)
}

/// Point-biserial correlation of each task with the models' mean score;
/// constant tasks get −∞.
fn discrimination(m: &ScoreMatrix) -> Result<Vec<f64>> {
    let x = m.to_dense()?;
    let total: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    Ok(x.row_iter()
        .map(|r| {
            let vals: Vec<f64> = r.iter().copied().collect();
            stats::pearson(&vals, &total).unwrap_or(f64::NEG_INFINITY)
        })
        .collect())
}

fn top_by(keys: &[f64], ids: &[String], pool: &[usize], k: usize) -> Vec<usize> {
    let mut idx = pool.to_vec();
    idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then_with(|| ids[a].cmp(&ids[b])));
    idx.truncate(k);
    idx
}

pub const KMEDOIDS_MAX_SWAPS: usize = 50;

fn k_medoids(m: &ScoreMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let t = m.n_tasks();
    check_budget(k, t)?;
    let x = m.to_dense()?;
    let profiles: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let dist: Vec<Vec<f64>> = par::map_range(t, |a| {
        (0..t)
            .map(|b| {
                if a == b {
                    0.0
                } else {
                    1.0 - stats::pearson(&profiles[a], &profiles[b]).map_or(0.0, f64::abs)
                }
            })
            .collect()
    });
    let mut r = rng::substream(seed, 0);
    let mut medoids = index::sample(&mut r, t, k).into_vec();
    let mut is_medoid = vec![false; t];
    for &md in &medoids {
        is_medoid[md] = true;
    }
    // nearest / second-nearest medoid slot for every object
    let assign = |medoids: &[usize]| -> Vec<(usize, f64, f64)> {
        (0..t)
            .map(|o| {
                let (mut n, mut dn, mut ds) = (0, f64::INFINITY, f64::INFINITY);
                for (slot, &md) in medoids.iter().enumerate() {
                    let d = dist[o][md];
                    if d < dn {
                        ds = dn;
                        dn = d;
                        n = slot;
                    } else if d < ds {
                        ds = d;
                    }
                }
                (n, dn, ds)
            })
            .collect()
    };
    for _ in 0..KMEDOIDS_MAX_SWAPS {
        let near = assign(&medoids);
        let mut removal = vec![0.0; k];
        for &(n, dn, ds) in &near {
            removal[n] += if ds.is_finite() { ds - dn } else { 0.0 };
        }
        let candidates: Vec<usize> = (0..t).filter(|&h| !is_medoid[h]).collect();
        let best_per_h = par::map_range(candidates.len(), |ci| {
            let h = candidates[ci];
            let mut delta = removal.clone();
            let mut shared = 0.0;
            for (o, &(n, dn, ds)) in near.iter().enumerate() {
                let doh = dist[o][h];
                if doh < dn {
                    shared += doh - dn;
                    delta[n] += dn - if ds.is_finite() { ds } else { dn };
                } else if doh < ds {
                    delta[n] += doh - ds;
                }
            }
            let mut best = (f64::INFINITY, 0);
            for (slot, d) in delta.iter().enumerate() {
                if d + shared < best.0 {
                    best = (d + shared, slot);
                }
            }
            best
        });
        let mut best = (-1e-12, usize::MAX, 0);
        for (ci, &(gain, slot)) in best_per_h.iter().enumerate() {
            if gain < best.0 {
                best = (gain, ci, slot);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let h = candidates[best.1];
        is_medoid[medoids[best.2]] = false;
        is_medoid[h] = true;
        medoids[best.2] = h;
    }
    medoids.sort_unstable();
    Ok(medoids)
}

/// Runs any of the six selectors. `seed` drives the randomized ones
/// (random, k-medoids) and is recorded only for them.
pub fn select(m: &ScoreMatrix, k: usize, method: SelectionMethod, seed: u64) -> Result<SelectionResult> {
    let rows = Rows::new(m)?;
    let t = m.n_tasks();
    check_budget(k, t)?;
    let all: Vec<usize> = (0..t).collect();
    let order = match method {
        SelectionMethod::EdGreedy => greedy_order(m, &rows, k)?,
        SelectionMethod::Random => {
            let mut r = rng::substream(seed, 0);
            index::sample(&mut r, t, k).into_vec()
        }
        SelectionMethod::MaxVariance => top_by(&rows.norm2, m.task_ids(), &all, k),
        SelectionMethod::IrtDiscrimination => top_by(&discrimination(m)?, m.task_ids(), &all, k),
        SelectionMethod::KMedoids => k_medoids(m, k, seed)?,
        SelectionMethod::TwoStage => {
            let pool = greedy_order(m, &rows, (2 * k).min(t))?;
            top_by(&discrimination(m)?, m.task_ids(), &pool, k)
        }
    };
    let seed = method.is_seeded().then_some(seed);
    result(m, &rows, method, seed, order)
}

/// Comparison selectors by name; identical to [`select`].
pub fn baseline_select(m: &ScoreMatrix, k: usize, method: SelectionMethod, seed: u64) -> Result<SelectionResult> {
    select(m, k, method, seed)
}

/// Kendall tau-b between model rankings by mean score on `selected` task
/// indices and on all tasks.
pub fn ranking_fidelity(m: &ScoreMatrix, selected: &[usize]) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument("empty selection".into()));
    }
    check_indices(selected, m.n_tasks())?;
    let x = m.to_dense()?;
    let full: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let part: Vec<f64> = x
        .column_iter()
        .map(|c| selected.iter().map(|&i| c[i]).sum::<f64>() / selected.len() as f64)
        .collect();
    stats::kendall_tau_b(&part, &full).ok_or(Error::UndefinedCorrelation("model means are constant".into()))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionCurve {
    pub tau_target: f64,
    /// Smallest fraction whose mean tau reaches the target (1.0 if none).
    pub fraction_needed: f64,
    pub reached: bool,
    /// (fraction of tasks, mean tau over trials).
    pub curve: Vec<(f64, f64)>,
    pub trials: usize,
    pub seed: u64,
}

/// 1%, 2%, 5%, 8%, then 10% to 100% in steps of 2%.
pub fn compression_fractions() -> Vec<f64> {
    let mut f = vec![0.01, 0.02, 0.05, 0.08];
    f.extend((10..=100).step_by(2).map(|p| p as f64 / 100.0));
    f
}

pub fn compression_curve(m: &ScoreMatrix, tau_target: f64, trials: usize, seed: u64) -> Result<CompressionCurve> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    m.to_dense()?;
    let t = m.n_tasks();
    let fractions = compression_fractions();
    let curve: Vec<(f64, f64)> = fractions
        .iter()
        .enumerate()
        .map(|(fi, &frac)| {
            let size = (libm::round(frac * t as f64) as usize).clamp(1, t);
            let family = rng::derive_seed(seed, fi as u64);
            let taus = par::map_range(trials, |tr| {
                let mut r = rng::substream(family, tr as u64);
                let subset = index::sample(&mut r, t, size).into_vec();
                // a subset of constant tasks cannot rank models
                ranking_fidelity(m, &subset).unwrap_or(0.0)
            });
            (frac, stats::mean(&taus))
        })
        .collect();
    let hit = curve.iter().find(|(_, tau)| *tau >= tau_target);
    Ok(CompressionCurve {
        tau_target,
        fraction_needed: hit.map_or(1.0, |(f, _)| *f),
        reached: hit.is_some(),
        curve,
        trials,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubmodularityReport {
    pub median_gamma: f64,
    pub min_gamma: f64,
    /// Samples with a positive denominator and nonnegative numerator.
    pub valid: usize,
    /// Share of valid samples with γ < 1.
    pub below_one_fraction: f64,
    /// Samples whose smaller-set gain was negative (excluded from γ).
    pub negative_numerator: usize,
    pub samples: usize,
    pub seed: u64,
}

pub const MIN_VALID_GAMMA_SAMPLES: usize = 10;

/// Ratio of marginal ED gains of one task at nested subsets S ⊂ S′.
pub fn submodularity_probe(m: &ScoreMatrix, samples: usize, seed: u64) -> Result<SubmodularityReport> {
    let rows = Rows::new(m)?;
    let t = m.n_tasks();
    let max_s = (t / 4).max(2);
    if t < 2 * 2 + 1 {
        return Err(Error::InsufficientData {
            what: "tasks for the submodularity probe",
            needed: 5,
            got: t,
        });
    }
    let ed = |set: &[usize]| trajectory_from_rows(&rows, set).last().copied().unwrap_or(0.0);
    let draws = par::map_range(samples, |i| {
        let mut r = rng::substream(seed, i as u64);
        let s_size = r.random_range(2..=max_s).min(t - 2);
        let extra = r.random_range(1..=s_size).min(t - 1 - s_size);
        let picks = index::sample(&mut r, t, s_size + extra + 1).into_vec();
        let s = &picks[..s_size];
        let s_big = &picks[..s_size + extra];
        let task = picks[s_size + extra];
        let with = |set: &[usize]| {
            let mut v = set.to_vec();
            v.push(task);
            v
        };
        let num = ed(&with(s)) - ed(s);
        let den = ed(&with(s_big)) - ed(s_big);
        (num, den)
    });
    let mut gammas = Vec::new();
    let mut negative = 0;
    for (num, den) in draws {
        if den > 1e-9 {
            if num >= 0.0 {
                gammas.push(num / den);
            } else {
                negative += 1;
            }
        }
    }
    if gammas.len() < MIN_VALID_GAMMA_SAMPLES {
        return Err(Error::InsufficientData {
            what: "valid submodularity samples",
            needed: MIN_VALID_GAMMA_SAMPLES,
            got: gammas.len(),
        });
    }
    stats::sort_f64(&mut gammas);
    let below = gammas.iter().filter(|g| **g < 1.0).count();
    Ok(SubmodularityReport {
        median_gamma: stats::quantile_sorted(&gammas, 0.5),
        min_gamma: gammas[0],
        valid: gammas.len(),
        below_one_fraction: below as f64 / gammas.len() as f64,
        negative_numerator: negative,
        samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProspectiveRow {
    pub method: SelectionMethod,
    pub k: usize,
    pub train_tau: f64,
    pub test_tau: f64,
    /// test − train.
    pub gap: f64,
}

pub const MIN_COHORT: usize = 5;

/// Splits models by mean score into a lower design cohort (the bottom
/// `design_fraction`) and an upper future cohort, selects tasks on the
/// design cohort and measures ranking fidelity on both.
pub fn prospective_split_eval(
    m: &ScoreMatrix,
    design_fraction: f64,
    methods: &[SelectionMethod],
    ks: &[usize],
    seed: u64,
) -> Result<Vec<ProspectiveRow>> {
    if !(design_fraction > 0.0 && design_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("design fraction {design_fraction} outside (0, 1)")));
    }
    let means = m.to_dense()?.column_iter().map(|c| c.mean()).collect::<Vec<_>>();
    let n = m.n_models();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then_with(|| m.model_ids()[a].cmp(&m.model_ids()[b])));
    let cut = libm::floor(design_fraction * n as f64) as usize;
    let (design, future) = order.split_at(cut);
    if design.len() < MIN_COHORT || future.len() < MIN_COHORT {
        return Err(Error::InsufficientData {
            what: "models per cohort",
            needed: MIN_COHORT,
            got: design.len().min(future.len()),
        });
    }
    let mut design = design.to_vec();
    let mut future = future.to_vec();
    design.sort_unstable();
    future.sort_unstable();
    let train = m.select_models(&design)?;
    let test = m.select_models(&future)?;
    let mut out = Vec::new();
    for &method in methods {
        for &k in ks {
            let sel = select(&train, k, method, seed)?;
            let idx = train.task_indices(&sel.selected)?;
            let train_tau = ranking_fidelity(&train, &idx).unwrap_or(0.0);
            let test_tau = ranking_fidelity(&test, &idx).unwrap_or(0.0);
            out.push(ProspectiveRow {
                method,
                k,
                train_tau,
                test_tau,
                gap: test_tau - train_tau,
            });
        }
    }
    Ok(out)
}

//! Tetrachoric correlation of binary series and the tetrachoric ED.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::spectral::ed_of_symmetric;
use crate::{par, stats};

const QUADRATURE_NODES: usize = 64;
/// Correlations are confined to this magnitude.
const RHO_LIMIT: f64 = 0.999;

/// Joint pass/fail counts of two binary series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoByTwo {
    /// Both pass.
    pub both: u64,
    /// First passes, second fails.
    pub first_only: u64,
    /// Second passes, first fails.
    pub second_only: u64,
    /// Both fail.
    pub neither: u64,
}

impl TwoByTwo {
    pub fn new(both: u64, first_only: u64, second_only: u64, neither: u64) -> Self {
        TwoByTwo {
            both,
            first_only,
            second_only,
            neither,
        }
    }

    /// Tabulates two 0/1 series; `None` on a length mismatch or a value
    /// other than 0 or 1.
    pub fn from_binary(x: &[f64], y: &[f64]) -> Option<Self> {
        if x.len() != y.len() {
            return None;
        }
        let mut t = TwoByTwo::new(0, 0, 0, 0);
        for (&a, &b) in x.iter().zip(y) {
            match (a == 1.0, b == 1.0) {
                _ if (a != 0.0 && a != 1.0) || (b != 0.0 && b != 1.0) => return None,
                (true, true) => t.both += 1,
                (true, false) => t.first_only += 1,
                (false, true) => t.second_only += 1,
                (false, false) => t.neither += 1,
            }
        }
        Some(t)
    }

    pub fn total(&self) -> u64 {
        self.both + self.first_only + self.second_only + self.neither
    }
}

struct Orthant {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Orthant {
    fn new() -> Self {
        let (nodes, weights) = stats::gauss_legendre(QUADRATURE_NODES);
        Orthant { nodes, weights }
    }

    /// P(X > h, Y > k) for a standard bivariate normal with correlation rho.
    fn upper(&self, h: f64, k: f64, rho: f64) -> f64 {
        let base = stats::normal_sf(h) * stats::normal_sf(k);
        let top = libm::asin(rho);
        if top == 0.0 {
            return base;
        }
        let half = 0.5 * top;
        let s2 = h * h + k * k;
        let hk = h * k;
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let theta = half * (x + 1.0);
            let (sin, cos) = (libm::sin(theta), libm::cos(theta));
            acc += w * libm::exp(-(s2 - 2.0 * hk * sin) / (2.0 * cos * cos));
        }
        base + acc * half / (2.0 * core::f64::consts::PI)
    }

    fn solve(&self, t: TwoByTwo) -> Result<f64> {
        let n = t.total() as f64;
        let p_first = (t.both + t.first_only) as f64 / n;
        let p_second = (t.both + t.second_only) as f64 / n;
        if t.total() == 0 || p_first <= 0.0 || p_first >= 1.0 || p_second <= 0.0 || p_second >= 1.0 {
            return Err(Error::UndefinedCorrelation(String::from("2x2 table has a zero marginal")));
        }
        let h = -stats::normal_ppf(p_first);
        let k = -stats::normal_ppf(p_second);
        let target = t.both as f64 / n;
        let f = |rho: f64| self.upper(h, k, rho) - target;
        let (mut lo, mut hi) = (-RHO_LIMIT, RHO_LIMIT);
        if f(lo) >= 0.0 {
            return Ok(lo);
        }
        if f(hi) <= 0.0 {
            return Ok(hi);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = f(mid);
            if v == 0.0 {
                return Ok(mid);
            }
            if v < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Standard bivariate normal upper orthant probability P(X > h, Y > k).
pub fn bivariate_normal_upper(h: f64, k: f64, rho: f64) -> f64 {
    Orthant::new().upper(h, k, rho)
}

/// Latent normal correlation reproducing the observed joint pass rate at
/// the observed marginals. Results beyond ±0.999 (including tables with an
/// empty cell) are clamped there.
pub fn tetrachoric(table: TwoByTwo) -> Result<f64> {
    Orthant::new().solve(table)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TetrachoricEd {
    pub ed: f64,
    pub models_used: usize,
    /// Models that never or always pass on the retained tasks.
    pub skipped_models: Vec<String>,
}

/// ED of the model×model tetrachoric correlation matrix of a binary,
/// fully observed matrix. Tasks are used as given; callers normally drop
/// degenerate rows first, since they shift every model's marginal.
pub fn tetrachoric_ed(m: &ScoreMatrix) -> Result<TetrachoricEd> {
    if !m.is_binary() {
        return Err(Error::InvalidInput("tetrachoric ED needs a binary matrix".into()));
    }
    if m.n_models() < 3 {
        return Err(Error::InsufficientData {
            what: "models for tetrachoric ED",
            needed: 3,
            got: m.n_models(),
        });
    }
    let x = m.to_dense()?;
    let t = x.nrows();
    let mut usable = Vec::new();
    let mut skipped_models = Vec::new();
    for j in 0..x.ncols() {
        let passes = x.column(j).iter().filter(|&&v| v == 1.0).count();
        if passes == 0 || passes == t {
            skipped_models.push(m.model_ids()[j].clone());
        } else {
            usable.push(j);
        }
    }
    let n = usable.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            what: "models with both passes and failures",
            needed: 3,
            got: n,
        });
    }
    let cols: Vec<Vec<f64>> = usable.iter().map(|&j| x.column(j).iter().copied().collect()).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let orthant = Orthant::new();
    let rhos = par::map_range(pairs.len(), |p| {
        let (i, j) = pairs[p];
        let table = TwoByTwo::from_binary(&cols[i], &cols[j]).expect("binary columns");
        orthant.solve(table)
    });
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        c[i * n + i] = 1.0;
    }
    for (&(i, j), r) in pairs.iter().zip(rhos) {
        let r = r?;
        c[i * n + j] = r;
        c[j * n + i] = r;
    }
    let ed = ed_of_symmetric(&DMatrix::from_row_slice(n, n, &c))?;
    Ok(TetrachoricEd {
        ed,
        models_used: n,
        skipped_models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn orthant_closed_form_at_zero_thresholds() {
        for &rho in &[-0.9, -0.3, 0.0, 0.4, 0.95] {
            let want = 0.25 + libm::asin(rho) / (2.0 * core::f64::consts::PI);
            assert!((bivariate_normal_upper(0.0, 0.0, rho) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn orthant_matches_direct_integration() {
        // integrate the bivariate density over y > k for each x > h by
        // conditional normal tails, using a fine trapezoid rule
        let (h, k, rho) = (0.3, -0.7, 0.6);
        let s = libm::sqrt(1.0 - rho * rho);
        let steps = 200_000;
        let upper = 9.0;
        let dx = (upper - h) / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let x = h + i as f64 * dx;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * stats::normal_pdf(x) * stats::normal_sf((k - rho * x) / s);
        }
        assert!((bivariate_normal_upper(h, k, rho) - acc * dx).abs() < 1e-8);
    }

    #[test]
    fn tetrachoric_examples() {
        assert!(tetrachoric(TwoByTwo::new(25, 25, 25, 25)).unwrap().abs() < 1e-9);
        // p11 = 1/3 at half/half marginals: 2 of 6 both, 1 first only, 1 second only, 2 neither
        let oracle = |p11: f64| libm::sin(2.0 * core::f64::consts::PI * (p11 - 0.25));
        let r = tetrachoric(TwoByTwo::new(2, 1, 1, 2)).unwrap();
        assert!((r - oracle(1.0 / 3.0)).abs() < 1e-9);
        assert!((r - 0.5).abs() < 1e-9);
        let r = tetrachoric(TwoByTwo::new(3, 7, 7, 3)).unwrap();
        assert!((r - oracle(0.15)).abs() < 1e-9);
    }

    #[test]
    fn tetrachoric_edge_cases() {
        assert!(matches!(tetrachoric(TwoByTwo::new(5, 5, 0, 0)), Err(Error::UndefinedCorrelation(_))));
        assert_eq!(tetrachoric(TwoByTwo::new(5, 0, 0, 5)).unwrap(), RHO_LIMIT);
        assert_eq!(tetrachoric(TwoByTwo::new(0, 5, 5, 0)).unwrap(), -RHO_LIMIT);
    }

    #[test]
    fn tetrachoric_ed_small_cases() {
        let col = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let mk = |n: usize| {
            let cells = col.iter().flat_map(|&v| core::iter::repeat_n(Some(v), n)).collect();
            ScoreMatrix::new(
                (0..6).map(|i| format!("t{i}")).collect(),
                (0..n).map(|j| format!("m{j}")).collect(),
                cells,
            )
            .unwrap()
        };
        assert!(matches!(tetrachoric_ed(&mk(2)), Err(Error::InsufficientData { .. })));
        let r = tetrachoric_ed(&mk(3)).unwrap();
        // pairs clamp to 0.999, so the spectrum is (2.998, 0.001, 0.001)
        let want = 9.0 / (2.998f64 * 2.998 + 2e-6);
        assert!((r.ed - want).abs() < 1e-9);
        assert!((r.ed - 1.0).abs() < 2e-3);
        assert_eq!(r.models_used, 3);
        assert!(r.skipped_models.is_empty());
    }
}

//! Centering, singular spectra and the spectral summaries built on them.
//!
//! The effective dimensionality (ED) of a spectrum σ is the participation
//! ratio of the squared singular values, `(Σσ²)² / Σσ⁴`. Equivalently it is
//! `exp(H₂(λ))`, the exponentiated collision entropy of the normalized
//! eigenvalues λᵢ = σᵢ² / Σσ², which is never larger than the Shannon
//! effective rank `exp(H₁(λ))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::association::CorrMatrix;
use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;

/// Squared singular values below this fraction of σ₁² are treated as zero
/// (rounding noise of the Gram eigendecomposition sits far below it).
pub const RELATIVE_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CenteringScheme {
    /// Subtract each task (row) mean.
    #[default]
    TaskCenter,
    /// Subtract each model (column) mean.
    ModelCenter,
    /// Row means, then column means of the row-centered matrix.
    DoubleCenter,
    None,
}

impl CenteringScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            CenteringScheme::TaskCenter => "task",
            CenteringScheme::ModelCenter => "model",
            CenteringScheme::DoubleCenter => "double",
            CenteringScheme::None => "none",
        }
    }
}

impl core::str::FromStr for CenteringScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task" | "task_center" => Ok(CenteringScheme::TaskCenter),
            "model" | "model_center" => Ok(CenteringScheme::ModelCenter),
            "double" | "double_center" => Ok(CenteringScheme::DoubleCenter),
            "none" => Ok(CenteringScheme::None),
            other => Err(Error::InvalidArgument(format!("unknown centering scheme `{other}`"))),
        }
    }
}

/// Centers a fully observed score matrix.
pub fn center(m: &ScoreMatrix, scheme: CenteringScheme) -> Result<DMatrix<f64>> {
    Ok(center_dense(&m.to_dense()?, scheme))
}

pub fn center_dense(x: &DMatrix<f64>, scheme: CenteringScheme) -> DMatrix<f64> {
    let mut out = x.clone();
    match scheme {
        CenteringScheme::TaskCenter => center_rows(&mut out),
        CenteringScheme::ModelCenter => center_cols(&mut out),
        CenteringScheme::DoubleCenter => {
            center_rows(&mut out);
            center_cols(&mut out);
        }
        CenteringScheme::None => {}
    }
    out
}

fn center_rows(x: &mut DMatrix<f64>) {
    let n = x.ncols() as f64;
    for mut row in x.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
    }
}

fn center_cols(x: &mut DMatrix<f64>) {
    let t = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / t;
        col.add_scalar_mut(-mean);
    }
}

/// Nonincreasing, nonnegative singular values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    sigmas: Vec<f64>,
}

impl Spectrum {
    /// Wraps arbitrary singular values, sorting them into nonincreasing order.
    pub fn new(mut sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(s) = sigmas.iter().find(|s| **s < 0.0) {
            return Err(Error::InvalidInput(format!("negative singular value {s}")));
        }
        sigmas.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.sigmas.iter().filter(|s| **s > 0.0).count()
    }

    /// Squared singular values (eigenvalues of the Gram matrix).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.sigmas.iter().map(|s| s * s).collect()
    }

    /// λᵢ = σᵢ² / Σσ²; all zeros for an all-zero spectrum.
    pub fn variance_fractions(&self) -> Vec<f64> {
        let ev = self.eigenvalues();
        let total: f64 = ev.iter().sum();
        if total <= 0.0 {
            return vec![0.0; ev.len()];
        }
        ev.iter().map(|e| e / total).collect()
    }

    fn nonzero_fractions(&self) -> Result<Vec<f64>> {
        let ev = self.eigenvalues();
        let total: f64 = ev.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroSpectrum);
        }
        Ok(ev.iter().map(|e| e / total).collect())
    }
}

/// Singular values of `x`, padded to `min(T, N)`, with squared values
/// below [`RELATIVE_ZERO`]·σ₁² set to zero. Computed from the symmetric
/// eigendecomposition of the Gram matrix of the smaller side.
pub fn singular_spectrum(x: &DMatrix<f64>) -> Result<Spectrum> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let len = x.nrows().min(x.ncols());
    if len == 0 {
        return Ok(Spectrum { sigmas: Vec::new() });
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(smaller_gram(x)).eigenvalues.iter().map(|e| e.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.resize(len, 0.0);
    let cutoff = ev[0] * RELATIVE_ZERO;
    let sigmas = ev.iter().map(|&e| if e < cutoff { 0.0 } else { libm::sqrt(e) }).collect();
    Ok(Spectrum { sigmas })
}

fn smaller_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    }
}

/// Participation ratio `(Σσ²)² / Σσ⁴`.
pub fn effective_dimensionality(s: &Spectrum) -> Result<f64> {
    let ev = s.eigenvalues();
    let total: f64 = ev.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let sq: f64 = ev.iter().map(|e| e * e).sum();
    Ok(total * total / sq)
}

/// `exp(H₂(λ))` with H₂ the order-2 Rényi entropy of the eigenvalue
/// distribution. Algebraically identical to [`effective_dimensionality`].
pub fn renyi2_ed(s: &Spectrum) -> Result<f64> {
    let lambda = s.nonzero_fractions()?;
    let collision: f64 = lambda.iter().map(|l| l * l).sum();
    let h2 = -libm::log(collision);
    Ok(libm::exp(h2))
}

/// `exp(H₁(λ))`, the Shannon effective rank (0·log 0 := 0).
pub fn shannon_effective_rank(s: &Spectrum) -> Result<f64> {
    let lambda = s.nonzero_fractions()?;
    let h1: f64 = lambda
        .iter()
        .filter(|l| **l > 0.0)
        .map(|l| -l * libm::log(*l))
        .sum();
    Ok(libm::exp(h1))
}

/// Share of total variance on the leading component.
pub fn pc1_fraction(s: &Spectrum) -> Result<f64> {
    Ok(s.nonzero_fractions()?[0])
}

/// ED straight from the data via `‖X‖_F⁴ / ‖G‖_F²`, where G is the Gram
/// matrix of the smaller side. No decomposition is needed because
/// `Σσ² = tr G` and `Σσ⁴ = ‖G‖_F²`; resampling loops use this route.
pub fn gram_ed(x: &DMatrix<f64>) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let gram = smaller_gram(x);
    let sq: f64 = gram.iter().map(|g| g * g).sum();
    Ok(total * total / sq)
}

/// Centers `m` and returns ED of its spectrum.
pub fn matrix_ed(m: &ScoreMatrix, scheme: CenteringScheme) -> Result<f64> {
    effective_dimensionality(&singular_spectrum(&center(m, scheme)?)?)
}

/// Leading principal components of a (centered) tasks × models matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcDecomposition {
    /// Unit task-loading vectors, one per component (length T each).
    pub loadings: Vec<Vec<f64>>,
    /// Model scores σᵢ·vᵢ, one per component (length N each).
    pub scores: Vec<Vec<f64>>,
    pub variance_fraction: Vec<f64>,
}

impl PcDecomposition {
    /// Rank-k reconstruction Σ loadingᵢ ⊗ scoreᵢ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let t = self.loadings.first().map_or(0, Vec::len);
        let n = self.scores.first().map_or(0, Vec::len);
        let mut out = DMatrix::zeros(t, n);
        for (u, s) in self.loadings.iter().zip(&self.scores) {
            for i in 0..t {
                for j in 0..n {
                    out[(i, j)] += u[i] * s[j];
                }
            }
        }
        out
    }
}

/// Top-`k` components of `x`. Each loading vector is oriented so its
/// largest-magnitude entry (first such on ties) is positive.
pub fn principal_components(x: &DMatrix<f64>, k: usize) -> Result<PcDecomposition> {
    let max_k = x.nrows().min(x.ncols());
    if k == 0 || k > max_k {
        return Err(Error::InvalidArgument(format!(
            "component count {k} outside 1..={max_k}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (t, n) = (x.nrows(), x.ncols());
    let total = x.norm_squared();
    // eigenvectors of the smaller Gram side give one set of singular
    // vectors; the other follows as X v / σ (or Xᵀ u / σ)
    let tall = t > n;
    let eig = SymmetricEigen::new(smaller_gram(x));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut loadings: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    let mut fractions = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let lambda = eig.eigenvalues[c].max(0.0);
        let sigma = libm::sqrt(lambda);
        let vec_c: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let null = lambda <= top * RELATIVE_ZERO;
        let mut load: Vec<f64> = if !tall {
            vec_c.clone()
        } else if null {
            complete_basis(&loadings, t)
        } else {
            (0..t).map(|i| (0..n).map(|j| x[(i, j)] * vec_c[j]).sum::<f64>() / sigma).collect()
        };
        let mut score: Vec<f64> = if tall {
            vec_c.iter().map(|v| v * sigma).collect()
        } else {
            (0..n).map(|j| (0..t).map(|i| x[(i, j)] * load[i]).sum::<f64>()).collect()
        };
        if null {
            score.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut pivot = 0;
        for (i, v) in load.iter().enumerate() {
            if v.abs() > load[pivot].abs() {
                pivot = i;
            }
        }
        if load[pivot] < 0.0 {
            load.iter_mut().for_each(|v| *v = -*v);
            score.iter_mut().for_each(|v| *v = -*v);
        }
        loadings.push(load);
        scores.push(score);
        fractions.push(if total > 0.0 && !null { lambda / total } else { 0.0 });
    }
    Ok(PcDecomposition {
        loadings,
        scores,
        variance_fraction: fractions,
    })
}

/// Unit vector orthogonal to `basis`, from Gram–Schmidt on the standard
/// basis vectors in order.
fn complete_basis(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for e in 0..dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
        }
        let norm = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            return v;
        }
    }
    vec![0.0; dim]
}

/// Participation ratio of the eigenvalues of a symmetric matrix, with
/// negative eigenvalues clipped to zero.
pub fn ed_of_symmetric(c: &DMatrix<f64>) -> Result<f64> {
    if c.nrows() != c.ncols() {
        return Err(Error::NotSymmetric);
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let p = c.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 {
                return Err(Error::NotSymmetric);
            }
        }
    }
    let eig = SymmetricEigen::new(c.clone()).eigenvalues;
    let ev: Vec<f64> = eig.iter().map(|e| e.max(0.0)).collect();
    let total: f64 = ev.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let sq: f64 = ev.iter().map(|e| e * e).sum();
    Ok(total * total / sq)
}

/// ED of a correlation matrix: participation ratio of its eigenvalues.
pub fn ed_of_correlation(c: &CorrMatrix) -> Result<f64> {
    ed_of_symmetric(&c.to_dense()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn task_centering_examples() {
        let x = dmatrix![1.0, 0.0, 1.0];
        let c = center_dense(&x, CenteringScheme::TaskCenter);
        for (got, want) in c.iter().zip([1.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(center_dense(&x, CenteringScheme::None), x);
        let k = DMatrix::from_element(3, 4, 0.7);
        assert!(center_dense(&k, CenteringScheme::TaskCenter).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn double_center_zeroes_both_margins() {
        let x = dmatrix![1.0, 0.0, 1.0; 0.0, 0.0, 1.0; 1.0, 1.0, 1.0];
        let c = center_dense(&x, CenteringScheme::DoubleCenter);
        for i in 0..3 {
            assert!(c.row(i).sum().abs() < 1e-12);
            assert!(c.column(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_of_diagonal_and_zero() {
        let s = singular_spectrum(&dmatrix![3.0, 0.0; 0.0, 1.0]).unwrap();
        assert!((s.sigmas()[0] - 3.0).abs() < 1e-12 && (s.sigmas()[1] - 1.0).abs() < 1e-12);
        let z = singular_spectrum(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(z.sigmas(), &[0.0, 0.0]);
        assert!(singular_spectrum(&dmatrix![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn ed_examples() {
        assert!((effective_dimensionality(&spec(&[1.0, 1.0, 1.0])).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(effective_dimensionality(&spec(&[5.0, 0.0, 0.0])).unwrap(), 1.0);
        assert!((effective_dimensionality(&spec(&[2.0, 1.0])).unwrap() - 25.0 / 17.0).abs() < 1e-12);
        assert_eq!(effective_dimensionality(&spec(&[0.0, 0.0])), Err(Error::ZeroSpectrum));
    }

    #[test]
    fn renyi_and_shannon_examples() {
        assert!((renyi2_ed(&spec(&[1.0, 1.0])).unwrap() - 2.0).abs() < 1e-12);
        assert!((renyi2_ed(&spec(&[2.0, 1.0])).unwrap() - 25.0 / 17.0).abs() < 1e-12);
        assert!((shannon_effective_rank(&spec(&[1.0, 1.0, 1.0])).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(shannon_effective_rank(&spec(&[5.0, 0.0])).unwrap(), 1.0);
        let h1: f64 = -0.8 * libm::log(0.8) - 0.2 * libm::log(0.2);
        assert!((shannon_effective_rank(&spec(&[2.0, 1.0])).unwrap() - libm::exp(h1)).abs() < 1e-12);
        assert!((shannon_effective_rank(&spec(&[2.0, 1.0])).unwrap() - 1.6493).abs() < 1e-4);
    }

    #[test]
    fn pc1_examples() {
        assert_eq!(pc1_fraction(&spec(&[1.0, 1.0, 1.0, 1.0])).unwrap(), 0.25);
        assert_eq!(pc1_fraction(&spec(&[3.0, 0.0])).unwrap(), 1.0);
        assert!((pc1_fraction(&spec(&[2.0, 1.0])).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn principal_components_fractions_and_residual() {
        let x = dmatrix![3.0, 0.0; 0.0, 1.0];
        let pcs = principal_components(&x, 2).unwrap();
        assert!((pcs.variance_fraction[0] - 0.9).abs() < 1e-12);
        assert!((pcs.variance_fraction[1] - 0.1).abs() < 1e-12);
        assert!((pcs.reconstruct() - &x).norm() < 1e-12);
        for l in &pcs.loadings {
            let pivot = l.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
        }
        let rank1 = dmatrix![1.0, 2.0, 3.0; 2.0, 4.0, 6.0];
        let p1 = principal_components(&rank1, 1).unwrap();
        assert!((p1.variance_fraction[0] - 1.0).abs() < 1e-12);
        assert!(principal_components(&rank1, 3).is_err());
    }

    #[test]
    fn correlation_ed_examples() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((ed_of_symmetric(&id).unwrap() - 4.0).abs() < 1e-12);
        let ones = DMatrix::from_element(4, 4, 1.0);
        assert!((ed_of_symmetric(&ones).unwrap() - 1.0).abs() < 1e-12);
        let half = dmatrix![1.0, 0.5; 0.5, 1.0];
        assert!((ed_of_symmetric(&half).unwrap() - 1.6).abs() < 1e-12);
        assert_eq!(ed_of_symmetric(&dmatrix![1.0, 0.5; 0.4, 1.0]), Err(Error::NotSymmetric));
    }

    #[test]
    fn gram_ed_matches_spectrum() {
        let x = dmatrix![0.3, -1.2, 0.5, 2.0; 1.1, 0.4, -0.7, 0.2; -0.5, 0.9, 1.3, -1.0];
        let a = effective_dimensionality(&singular_spectrum(&x).unwrap()).unwrap();
        let b = gram_ed(&x).unwrap();
        let c = gram_ed(&x.transpose()).unwrap();
        assert!((a - b).abs() < 1e-12 && (b - c).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_components_reconstruct() {
        // centered rank-1 matrix on which a QR-iteration SVD is easy to derail
        let cols = [0.0, 1.0, 2.0, 5.0, 7.0, 9.0];
        let x = DMatrix::from_fn(25, 6, |i, j| (0.1 + 0.8 * i as f64 / 25.0) * (0.2 + 0.6 * cols[j] / 12.0));
        let c = center_dense(&x, CenteringScheme::TaskCenter);
        let pc = principal_components(&c, 3).unwrap();
        let single = PcDecomposition {
            loadings: pc.loadings[..1].to_vec(),
            scores: pc.scores[..1].to_vec(),
            variance_fraction: pc.variance_fraction[..1].to_vec(),
        };
        assert!((single.reconstruct() - &c).norm() < 1e-12);
        assert!((pc.variance_fraction[0] - 1.0).abs() < 1e-12);
        assert_eq!(&pc.variance_fraction[1..], &[0.0, 0.0]);
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = pc.loadings[a].iter().zip(&pc.loadings[b]).map(|(p, q)| p * q).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        let s = singular_spectrum(&c).unwrap();
        assert_eq!(s.nonzero_count(), 1);
        assert!((s.sigmas()[0].powi(2) - c.norm_squared()).abs() < 1e-12);
    }
}

//! Score matrices (tasks × models) and the preprocessing rules applied to
//! them before any spectral analysis: binarization, imputation of missing
//! cells and removal of zero-variance tasks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Missing fraction above which loaders should warn.
pub const MISSING_WARN_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScoreKind {
    Binary,
    Continuous,
}

/// A tasks × models grid of scores in [0, 1] with an explicit missing mask.
///
/// Rows are tasks, columns are models. Cells are stored row-major as
/// `Option<f64>`; `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    task_ids: Vec<String>,
    model_ids: Vec<String>,
    cells: Vec<Option<f64>>,
    kind: ScoreKind,
}

fn check_unique(ids: &[String], axis: &'static str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                axis,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

impl ScoreMatrix {
    /// Builds a validated matrix from row-major cells.
    ///
    /// Requires at least one task and two models, unique ids, and every
    /// observed value finite and inside [0, 1]. The kind is `Binary` when
    /// every observed value is exactly 0 or 1.
    pub fn new(task_ids: Vec<String>, model_ids: Vec<String>, cells: Vec<Option<f64>>) -> Result<Self> {
        let t = task_ids.len();
        let n = model_ids.len();
        if t == 0 {
            return Err(Error::InvalidInput("matrix has no tasks".into()));
        }
        if n < 2 {
            return Err(Error::InsufficientData {
                what: "models",
                needed: 2,
                got: n,
            });
        }
        if cells.len() != t * n {
            return Err(Error::InvalidInput(format!(
                "expected {} cells for {t} tasks x {n} models, got {}",
                t * n,
                cells.len()
            )));
        }
        check_unique(&task_ids, "task")?;
        check_unique(&model_ids, "model")?;
        let mut binary = true;
        for (i, c) in cells.iter().enumerate() {
            if let Some(v) = *c {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "score {v} for task `{}`, model `{}` is outside [0, 1]",
                        task_ids[i / n],
                        model_ids[i % n]
                    )));
                }
                if v != 0.0 && v != 1.0 {
                    binary = false;
                }
            }
        }
        let kind = if binary {
            ScoreKind::Binary
        } else {
            ScoreKind::Continuous
        };
        Ok(ScoreMatrix {
            task_ids,
            model_ids,
            cells,
            kind,
        })
    }

    /// Builds a fully observed matrix from a dense tasks × models array.
    pub fn from_dense(task_ids: Vec<String>, model_ids: Vec<String>, values: &DMatrix<f64>) -> Result<Self> {
        if values.nrows() != task_ids.len() || values.ncols() != model_ids.len() {
            return Err(Error::InvalidInput(format!(
                "dense matrix is {}x{} but {} task ids and {} model ids were given",
                values.nrows(),
                values.ncols(),
                task_ids.len(),
                model_ids.len()
            )));
        }
        let n = model_ids.len();
        let cells = (0..task_ids.len() * n)
            .map(|i| Some(values[(i / n, i % n)]))
            .collect();
        ScoreMatrix::new(task_ids, model_ids, cells)
    }

    /// Fully observed matrix with generated ids `task_0000…`, `model_000…`.
    pub fn from_dense_auto(values: &DMatrix<f64>) -> Result<Self> {
        ScoreMatrix::from_dense(
            numbered_ids("task", values.nrows()),
            numbered_ids("model", values.ncols()),
            values,
        )
    }

    pub fn n_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn task_ids(&self) -> &[String] {
        &self.task_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn is_binary(&self) -> bool {
        self.kind == ScoreKind::Binary
    }

    pub fn get(&self, task: usize, model: usize) -> Option<f64> {
        self.cells[task * self.n_models() + model]
    }

    pub fn row(&self, task: usize) -> &[Option<f64>] {
        let n = self.n_models();
        &self.cells[task * n..(task + 1) * n]
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / self.cells.len() as f64
    }

    /// True when the missing fraction exceeds [`MISSING_WARN_FRACTION`].
    pub fn missing_warning(&self) -> bool {
        self.missing_fraction() > MISSING_WARN_FRACTION
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.task_ids.iter().position(|t| t == id)
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == id)
    }

    /// Resolves model ids to column indices, failing on the first unknown id.
    pub fn model_indices(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.model_index(id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown model id `{id}`")))
            })
            .collect()
    }

    pub fn task_indices(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.task_index(id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown task id `{id}`")))
            })
            .collect()
    }

    /// Dense tasks × models copy. Fails if any cell is missing.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let missing = self.missing_count();
        if missing > 0 {
            return Err(Error::MissingCells { count: missing });
        }
        let n = self.n_models();
        Ok(DMatrix::from_fn(self.n_tasks(), n, |i, j| {
            self.cells[i * n + j].unwrap_or_default()
        }))
    }

    /// Submatrix with the given task rows, in the given order.
    pub fn select_tasks(&self, rows: &[usize]) -> Result<ScoreMatrix> {
        let n = self.n_models();
        let mut cells = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            cells.extend_from_slice(self.row(r));
        }
        let ids = rows.iter().map(|&r| self.task_ids[r].clone()).collect();
        ScoreMatrix::new(ids, self.model_ids.clone(), cells)
    }

    /// Submatrix with the given model columns, in the given order.
    pub fn select_models(&self, cols: &[usize]) -> Result<ScoreMatrix> {
        let n = self.n_models();
        let mut cells = Vec::with_capacity(self.n_tasks() * cols.len());
        for r in 0..self.n_tasks() {
            for &c in cols {
                cells.push(self.cells[r * n + c]);
            }
        }
        let ids = cols.iter().map(|&c| self.model_ids[c].clone()).collect();
        ScoreMatrix::new(self.task_ids.clone(), ids, cells)
    }

    /// Codes each observed score as 1 when strictly above the threshold and 0
    /// otherwise. Missing cells stay missing.
    pub fn binarize(&self, policy: BinarizationPolicy) -> ScoreMatrix {
        let cells = self
            .cells
            .iter()
            .map(|c| c.map(|v| if v > policy.threshold { 1.0 } else { 0.0 }))
            .collect();
        ScoreMatrix {
            task_ids: self.task_ids.clone(),
            model_ids: self.model_ids.clone(),
            cells,
            kind: ScoreKind::Binary,
        }
    }

    /// Replaces each missing cell with the mean of that model's observed
    /// scores. The kind is re-derived, so imputing a binary matrix with
    /// missing cells usually yields a continuous one.
    pub fn impute_missing(&self) -> Result<ScoreMatrix> {
        if self.missing_count() == 0 {
            return Ok(self.clone());
        }
        let n = self.n_models();
        let t = self.n_tasks();
        let mut means = Vec::with_capacity(n);
        for j in 0..n {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..t {
                if let Some(v) = self.cells[i * n + j] {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::FullyMissingModel(self.model_ids[j].clone()));
            }
            means.push(sum / count as f64);
        }
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| Some(c.unwrap_or(means[i % n])))
            .collect();
        ScoreMatrix::new(self.task_ids.clone(), self.model_ids.clone(), cells)
    }

    /// Removes task rows whose observed values are all equal (zero variance
    /// across models), returning the reduced matrix and the dropped ids.
    pub fn drop_degenerate_tasks(&self) -> Result<(ScoreMatrix, Vec<String>)> {
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for i in 0..self.n_tasks() {
            let mut observed = self.row(i).iter().flatten();
            let degenerate = match observed.next() {
                None => true,
                Some(first) => observed.all(|v| v == first),
            };
            if degenerate {
                dropped.push(self.task_ids[i].clone());
            } else {
                keep.push(i);
            }
        }
        if keep.is_empty() {
            return Err(Error::AllDegenerate);
        }
        Ok((self.select_tasks(&keep)?, dropped))
    }

    /// Per-task population variance across models (missing cells skipped).
    pub fn task_variances(&self) -> Vec<f64> {
        (0..self.n_tasks())
            .map(|i| {
                let vals: Vec<f64> = self.row(i).iter().flatten().copied().collect();
                if vals.is_empty() {
                    0.0
                } else {
                    crate::stats::variance(&vals)
                }
            })
            .collect()
    }

    /// Per-model mean score over observed tasks.
    pub fn model_means(&self) -> Vec<f64> {
        let n = self.n_models();
        (0..n)
            .map(|j| {
                let vals: Vec<f64> = (0..self.n_tasks()).filter_map(|i| self.cells[i * n + j]).collect();
                crate::stats::mean(&vals)
            })
            .collect()
    }
}

pub(crate) fn numbered_ids(prefix: &str, count: usize) -> Vec<String> {
    let width = format!("{}", count.saturating_sub(1)).len().max(3);
    (0..count).map(|i| format!("{prefix}_{i:0width$}")).collect()
}

/// Threshold rule for converting continuous scores to pass/fail: a score
/// passes when strictly greater than `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinarizationPolicy {
    pub threshold: f64,
}

impl BinarizationPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binarization threshold must lie in (0, 1), got {threshold}"
            )));
        }
        Ok(BinarizationPolicy { threshold })
    }
}

impl Default for BinarizationPolicy {
    fn default() -> Self {
        BinarizationPolicy { threshold: 0.5 }
    }
}

/// Per-model metadata used as covariates and validation labels.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelMeta {
    pub model_id: String,
    /// Natural log of the parameter count.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub log_param_count: Option<f64>,
    /// ISO-8601 date; parsed and validated by the IO layer.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub date: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub family: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "BTreeMap::is_empty"))]
    pub labels: BTreeMap<String, bool>,
}

/// Checks that every metadata record names a model present in `m` and that
/// no model is described twice.
pub fn validate_meta(meta: &[ModelMeta], m: &ScoreMatrix) -> Result<()> {
    let mut seen = BTreeSet::new();
    for rec in meta {
        if m.model_index(&rec.model_id).is_none() {
            return Err(Error::InvalidInput(format!(
                "metadata names model `{}` which is not a matrix column",
                rec.model_id
            )));
        }
        if !seen.insert(rec.model_id.as_str()) {
            return Err(Error::DuplicateId {
                axis: "metadata model",
                id: rec.model_id.clone(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn kind_is_inferred() {
        let m = ScoreMatrix::new(ids("t", 3), ids("m", 2), vec![Some(0.0), Some(1.0), Some(1.0), Some(1.0), Some(0.0), Some(0.0)]).unwrap();
        assert_eq!(m.kind(), ScoreKind::Binary);
        assert_eq!((m.n_tasks(), m.n_models()), (3, 2));
        let c = ScoreMatrix::new(ids("t", 1), ids("m", 2), vec![Some(0.73), Some(1.0)]).unwrap();
        assert_eq!(c.kind(), ScoreKind::Continuous);
    }

    #[test]
    fn rejects_bad_shapes_and_ids() {
        assert!(matches!(
            ScoreMatrix::new(ids("t", 1), ids("m", 1), vec![Some(1.0)]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            ScoreMatrix::new(vec!["a".into(), "a".into()], ids("m", 2), vec![Some(1.0); 4]),
            Err(Error::DuplicateId { axis: "task", .. })
        ));
        let err = ScoreMatrix::new(ids("t", 1), ids("m", 2), vec![Some(1.5), Some(0.0)]).unwrap_err();
        assert!(err.to_string().contains("`m0`"));
    }

    #[test]
    fn binarize_is_strictly_greater() {
        let m = ScoreMatrix::new(ids("t", 1), ids("m", 3), vec![Some(0.51), Some(0.5), None]).unwrap();
        let b = m.binarize(BinarizationPolicy::default());
        assert_eq!(b.row(0), &[Some(1.0), Some(0.0), None]);
        assert!(b.is_binary());
        assert_eq!(b.binarize(BinarizationPolicy::default()), b);
    }

    #[test]
    fn impute_uses_model_mean() {
        // one model column [1, missing, 0]
        let m = ScoreMatrix::new(
            ids("t", 3),
            ids("m", 2),
            vec![Some(1.0), Some(1.0), None, Some(1.0), Some(0.0), None],
        )
        .unwrap();
        let im = m.impute_missing().unwrap();
        assert_eq!(im.get(1, 0), Some(0.5));
        assert_eq!(im.get(2, 1), Some(1.0));
        assert_eq!(im.missing_count(), 0);
        assert_eq!(im.impute_missing().unwrap(), im);
    }

    #[test]
    fn impute_fails_on_empty_column() {
        let m = ScoreMatrix::new(ids("t", 2), ids("m", 2), vec![Some(1.0), None, Some(0.0), None]).unwrap();
        assert_eq!(m.impute_missing(), Err(Error::FullyMissingModel("m1".into())));
    }

    #[test]
    fn degenerate_rows_are_dropped() {
        let m = ScoreMatrix::new(
            ids("t", 3),
            ids("m", 3),
            vec![
                Some(1.0), Some(1.0), Some(1.0),
                Some(0.0), Some(1.0), Some(0.0),
                Some(1.0), Some(0.0), Some(0.0),
            ],
        )
        .unwrap();
        let (kept, dropped) = m.drop_degenerate_tasks().unwrap();
        assert_eq!(dropped, vec!["t0".to_string()]);
        assert_eq!(kept.n_tasks(), 2);
        assert_eq!(kept.row(0), m.row(1));
        let all_const = m.select_tasks(&[0]).unwrap();
        assert_eq!(all_const.drop_degenerate_tasks(), Err(Error::AllDegenerate));
    }

    #[test]
    fn missing_fraction_and_warning() {
        let m = ScoreMatrix::new(ids("t", 2), ids("m", 2), vec![Some(1.0), None, Some(0.0), Some(1.0)]).unwrap();
        assert_eq!(m.missing_fraction(), 0.25);
        assert!(m.missing_warning());
    }

    #[test]
    fn meta_must_reference_columns() {
        let m = ScoreMatrix::new(ids("t", 1), ids("m", 2), vec![Some(1.0), Some(0.0)]).unwrap();
        let ok = ModelMeta { model_id: "m1".into(), ..Default::default() };
        assert!(validate_meta(core::slice::from_ref(&ok), &m).is_ok());
        let bad = ModelMeta { model_id: "zz".into(), ..Default::default() };
        assert!(validate_meta(&[bad], &m).is_err());
        assert!(validate_meta(&[ok.clone(), ok], &m).is_err());
    }
}

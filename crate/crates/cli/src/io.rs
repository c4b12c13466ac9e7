//! File formats: score matrices (CSV or JSON), model metadata, suite
//! tables, correlation matrices and ED series.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spectradiag_core::composite::SuiteScores;
use spectradiag_core::temporal::EdSeries;
use spectradiag_core::{CorrMatrix, ModelMeta, ScoreMatrix};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Json,
}

impl MatrixFormat {
    /// `.json` means JSON; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => MatrixFormat::Json,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// A labelled numeric table: first header cell names the row axis, the rest
/// are column ids; empty cells are `None`.
struct Table {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    cells: Vec<Option<f64>>,
}

fn parse_table(path: &Path, bytes: &[u8], row_axis: &str) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let header = rdr.headers().map_err(|e| CliError::parse(path, format!("header: {e}")))?.clone();
    if header.len() < 2 {
        return Err(CliError::parse(path, format!("header needs `{row_axis}` and at least one column id")));
    }
    let col_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if let Some(blank) = col_ids.iter().position(String::is_empty) {
        return Err(CliError::parse(path, format!("header column {} has an empty id", blank + 2)));
    }
    let mut row_ids = Vec::new();
    let mut cells = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
        if rec.len() != header.len() {
            return Err(CliError::parse(
                path,
                format!("line {line}: expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(CliError::parse(path, format!("line {line}: empty {row_axis}")));
        }
        for (c, field) in rec.iter().skip(1).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                cells.push(None);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                CliError::parse(
                    path,
                    format!("line {line} (row `{id}`), column `{}`: `{field}` is not a number", col_ids[c]),
                )
            })?;
            cells.push(Some(v));
        }
        row_ids.push(id);
    }
    if row_ids.is_empty() {
        return Err(CliError::parse(path, "no data rows"));
    }
    Ok(Table { row_ids, col_ids, cells })
}

fn core_as_parse(path: &Path, e: spectradiag_core::Error) -> CliError {
    CliError::parse(path, e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixJson {
    task_ids: Vec<String>,
    model_ids: Vec<String>,
    /// Rows are tasks; `null` marks a missing cell.
    values: Vec<Vec<Option<f64>>>,
}

pub fn parse_matrix(path: &Path, bytes: &[u8], format: MatrixFormat) -> CliResult<ScoreMatrix> {
    match format {
        MatrixFormat::Csv => {
            let t = parse_table(path, bytes, "task_id")?;
            ScoreMatrix::new(t.row_ids, t.col_ids, t.cells).map_err(|e| core_as_parse(path, e))
        }
        MatrixFormat::Json => {
            let j: MatrixJson = serde_json::from_slice(bytes).map_err(|e| CliError::parse(path, e.to_string()))?;
            if let Some(bad) = j.values.iter().position(|r| r.len() != j.model_ids.len()) {
                return Err(CliError::parse(
                    path,
                    format!("row {bad} has {} values for {} models", j.values[bad].len(), j.model_ids.len()),
                ));
            }
            if j.values.len() != j.task_ids.len() {
                return Err(CliError::parse(path, format!("{} rows for {} task ids", j.values.len(), j.task_ids.len())));
            }
            let cells = j.values.into_iter().flatten().collect();
            ScoreMatrix::new(j.task_ids, j.model_ids, cells).map_err(|e| core_as_parse(path, e))
        }
    }
}

/// Loads a matrix and returns it with the SHA-256 of the file.
pub fn load_matrix(path: &Path, format: Option<MatrixFormat>) -> CliResult<(ScoreMatrix, String)> {
    let bytes = read_bytes(path)?;
    let format = format.unwrap_or_else(|| MatrixFormat::from_path(path));
    Ok((parse_matrix(path, &bytes, format)?, sha256_hex(&bytes)))
}

fn fmt_cell(v: Option<f64>) -> String {
    // `{}` on f64 prints the shortest string that parses back exactly
    v.map_or_else(String::new, |x| format!("{x}"))
}

pub fn matrix_to_csv(m: &ScoreMatrix) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["task_id".to_string()];
    header.extend(m.model_ids().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in m.task_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(|c| fmt_cell(*c)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn matrix_to_json(m: &ScoreMatrix) -> CliResult<Vec<u8>> {
    let j = MatrixJson {
        task_ids: m.task_ids().to_vec(),
        model_ids: m.model_ids().to_vec(),
        values: (0..m.n_tasks()).map(|i| m.row(i).to_vec()).collect(),
    };
    Ok(serde_json::to_vec_pretty(&j)?)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("CSV output: {e}"))
}

/// Suite table: one row per benchmark (`benchmark_id,<model ids>`), no
/// missing cells.
pub fn parse_suite(path: &Path, bytes: &[u8]) -> CliResult<SuiteScores> {
    let t = parse_table(path, bytes, "benchmark_id")?;
    let n = t.col_ids.len();
    if let Some(i) = t.cells.iter().position(Option::is_none) {
        return Err(CliError::parse(
            path,
            format!("benchmark `{}`, model `{}` has no score", t.row_ids[i / n], t.col_ids[i % n]),
        ));
    }
    let values = DMatrix::from_row_iterator(t.row_ids.len(), n, t.cells.into_iter().flatten());
    SuiteScores::new(t.row_ids, t.col_ids, values).map_err(|e| core_as_parse(path, e))
}

pub fn load_suite(path: &Path) -> CliResult<(SuiteScores, String)> {
    let bytes = read_bytes(path)?;
    Ok((parse_suite(path, &bytes)?, sha256_hex(&bytes)))
}

pub fn suite_to_csv(s: &SuiteScores) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["benchmark_id".to_string()];
    header.extend(s.model_ids().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (b, id) in s.benchmark_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(s.values().row(b).iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

/// Metadata: a JSON array of `{model_id, log_param_count?, date?, family?, labels?}`
/// with dates in ISO-8601 (`YYYY-MM-DD`).
pub fn parse_meta(path: &Path, bytes: &[u8]) -> CliResult<Vec<ModelMeta>> {
    let meta: Vec<ModelMeta> = serde_json::from_slice(bytes).map_err(|e| CliError::parse(path, e.to_string()))?;
    for rec in &meta {
        if let Some(d) = &rec.date {
            chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .map_err(|e| CliError::parse(path, format!("model `{}`: date `{d}`: {e}", rec.model_id)))?;
        }
        if rec.log_param_count.is_some_and(|v| !v.is_finite()) {
            return Err(CliError::parse(path, format!("model `{}`: log_param_count is not finite", rec.model_id)));
        }
    }
    Ok(meta)
}

/// Square CSV: header `id,<ids>`, one row per id; undefined entries empty.
pub fn corr_to_csv(c: &CorrMatrix) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(c.ids().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in c.ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend((0..c.dim()).map(|j| fmt_cell(c.get(i, j))));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn parse_corr(path: &Path, bytes: &[u8], method: spectradiag_core::CorrMethod) -> CliResult<CorrMatrix> {
    let t = parse_table(path, bytes, "id")?;
    if t.row_ids != t.col_ids {
        return Err(CliError::parse(path, "row ids must match the header ids in the same order"));
    }
    CorrMatrix::new(t.row_ids, t.cells, method).map_err(|e| core_as_parse(path, e))
}

/// Two numeric columns with a header, such as `x,ed` or `n,ed`.
pub fn parse_pairs(path: &Path, bytes: &[u8]) -> CliResult<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
        if rec.len() != 2 {
            return Err(CliError::parse(path, format!("line {line}: expected 2 fields, found {}", rec.len())));
        }
        let num = |k: usize| -> CliResult<f64> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| CliError::parse(path, format!("line {line}: `{}` is not a number", &rec[k])))
        };
        out.push((num(0)?, num(1)?));
    }
    Ok(out)
}

pub fn parse_series(path: &Path, bytes: &[u8]) -> CliResult<EdSeries> {
    let pairs = parse_pairs(path, bytes)?;
    EdSeries::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).map_err(|e| core_as_parse(path, e))
}

pub fn pairs_to_csv(header: [&str; 2], rows: &[(f64, f64)]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for (a, b) in rows {
        w.write_record([format!("{a}"), format!("{b}")]).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn series_to_csv(s: &EdSeries) -> CliResult<Vec<u8>> {
    let rows: Vec<(f64, f64)> = s.x.iter().copied().zip(s.ed.iter().copied()).collect();
    pairs_to_csv(["x", "ed"], &rows)
}

/// Generic CSV of labelled numeric rows for plot data.
pub fn rows_to_csv(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn csv_examples() {
        let m = parse_matrix(p(), b"task_id,a,b\nt1,0,1\nt2,1,1\nt3,0,0\n", MatrixFormat::Csv).unwrap();
        assert!(m.is_binary() && m.n_tasks() == 3 && m.n_models() == 2);
        let c = parse_matrix(p(), b"task_id,a,b\nt1,0.73,1\n", MatrixFormat::Csv).unwrap();
        assert!(!c.is_binary());
        let h = parse_matrix(p(), b"task_id,a,b\nt1,,1\nt2,0,1\n", MatrixFormat::Csv).unwrap();
        assert_eq!(h.get(0, 0), None);
        assert_eq!(h.missing_count(), 1);
    }

    #[test]
    fn csv_errors_name_the_cell() {
        let e = parse_matrix(p(), b"task_id,a,b\nt1,0,x\n", MatrixFormat::Csv).unwrap_err().to_string();
        assert!(e.contains("t1") && e.contains("`b`"), "{e}");
        let d = parse_matrix(p(), b"task_id,a,b\nt1,0,1\nt1,1,0\n", MatrixFormat::Csv).unwrap_err().to_string();
        assert!(d.contains("duplicate task id `t1`"), "{d}");
        assert!(parse_matrix(p(), b"task_id,a,b\n", MatrixFormat::Csv).is_err());
        assert!(parse_matrix(p(), b"task_id,a,b\nt1,0\n", MatrixFormat::Csv).is_err());
    }

    #[test]
    fn round_trips() {
        let src = b"task_id,m1,m2,m3\nt1,0.1,,0.3333333333333333\nt2,1,0,0.25\n";
        let m = parse_matrix(p(), src, MatrixFormat::Csv).unwrap();
        let again = parse_matrix(p(), &matrix_to_csv(&m).unwrap(), MatrixFormat::Csv).unwrap();
        assert_eq!(m, again);
        let j = parse_matrix(Path::new("m.json"), &matrix_to_json(&m).unwrap(), MatrixFormat::Json).unwrap();
        assert_eq!(m, j);
    }

    #[test]
    fn meta_dates_are_validated() {
        let ok = br#"[{"model_id":"a","date":"2024-03-01","labels":{"code":true}}]"#;
        assert!(parse_meta(p(), ok).unwrap()[0].labels["code"]);
        let bad = br#"[{"model_id":"a","date":"2024-13-01"}]"#;
        assert!(parse_meta(p(), bad).is_err());
    }

    #[test]
    fn suite_and_series() {
        let s = parse_suite(p(), b"benchmark_id,m1,m2,m3\nb1,50,60,70\nb2,1,3,2\n").unwrap();
        assert_eq!(s.n_benchmarks(), 2);
        let back = parse_suite(p(), &suite_to_csv(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        assert!(parse_suite(p(), b"benchmark_id,m1,m2\nb1,1,\n").is_err());
        let series = parse_series(p(), b"x,ed\n1,3.5\n2,3.0\n").unwrap();
        assert_eq!(parse_series(p(), &series_to_csv(&series).unwrap()).unwrap(), series);
    }

    #[test]
    fn json_floats_round_trip_exactly() {
        let vals = [0.1 + 0.2, 1.0 / 3.0, 0.7310585786300049, 5e-324, 0.9999999999999999];
        let cells: Vec<Option<f64>> = vals.iter().map(|&v| Some(v)).collect();
        let ids = |n: usize, p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let m = ScoreMatrix::new(ids(1, "t"), ids(vals.len(), "m"), cells).unwrap();
        assert_eq!(parse_matrix(p(), &matrix_to_json(&m).unwrap(), MatrixFormat::Json).unwrap(), m);
        assert_eq!(parse_matrix(p(), &matrix_to_csv(&m).unwrap(), MatrixFormat::Csv).unwrap(), m);
    }
}

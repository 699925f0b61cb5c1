//! On-disk layout of datasets and fit results.
//!
//! Every float is written with Rust's shortest round-trip formatting, so
//! reading a file back yields the exact in-memory value.

use crate::CliError;
use gpalign_core::Dataset;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub j: usize,
    pub n: usize,
    pub d: usize,
    pub x_min: f64,
    pub x_max: f64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Writes rows of floats, with an optional header line.
pub fn write_rows<'a>(
    path: &Path,
    header: Option<&[String]>,
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| io_err(path, e))?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a numeric CSV into rows; the header, if any, is returned separately.
pub fn read_rows(path: &Path, has_header: bool) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header = if has_header {
        r.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_owned).collect()
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|f| match f.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(io_err(path, format!("row {}: bad number {f:?}", line + 1))),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn column_header(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

pub fn write_matrix(path: &Path, prefix: &str, m: &DMatrix<f64>) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    write_rows(path, Some(&column_header(prefix, m.ncols())), rows.iter().map(Vec::as_slice))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let (header, rows) = read_rows(path, true)?;
    let cols = header.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(io_err(path, "ragged rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, c| rows[i][c]))
}

pub fn seq_path(dir: &Path, prefix: &str, j: usize) -> PathBuf {
    dir.join(format!("{prefix}_{j}.csv"))
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<(), CliError> {
    create_dir(dir)?;
    let meta = BundleMeta {
        j: data.n_sequences(),
        n: data.n_samples(),
        d: data.n_dims(),
        x_min: data.x[0],
        x_max: *data.x.last().unwrap(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    for (j, y) in data.y.iter().enumerate() {
        write_matrix(&seq_path(dir, "seq", j), "d", y)?;
    }
    if let Some(w) = &data.true_warps {
        write_rows(&dir.join("true_warps.csv"), None, w.iter().map(Vec::as_slice))?;
    }
    if let Some(g) = &data.groups {
        let path = dir.join("groups.csv");
        let text: String = g.iter().map(|v| format!("{v}\n")).collect();
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn grid(meta: &BundleMeta) -> Vec<f64> {
    if meta.n == 1 {
        return vec![meta.x_min];
    }
    (0..meta.n)
        .map(|i| meta.x_min + (meta.x_max - meta.x_min) * i as f64 / (meta.n - 1) as f64)
        .collect()
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!("{}: no such bundle directory", dir.display())));
    }
    let meta: BundleMeta = read_json(&dir.join("meta.json"))?;
    let mut y = Vec::with_capacity(meta.j);
    for j in 0..meta.j {
        let path = seq_path(dir, "seq", j);
        let m = read_matrix(&path)?;
        if m.shape() != (meta.n, meta.d) {
            return Err(io_err(&path, format!("expected {}x{} values", meta.n, meta.d)));
        }
        y.push(m);
    }
    let mut data = Dataset::new(grid(&meta), y).map_err(|e| CliError::Input(e.to_string()))?;
    let warps_path = dir.join("true_warps.csv");
    if warps_path.exists() {
        let (_, rows) = read_rows(&warps_path, false)?;
        if rows.len() != meta.j || rows.iter().any(|r| r.len() != meta.n) {
            return Err(io_err(&warps_path, format!("expected {} rows of {} values", meta.j, meta.n)));
        }
        data.true_warps = Some(rows);
    }
    let groups_path = dir.join("groups.csv");
    if groups_path.exists() {
        let text = fs::read_to_string(&groups_path).map_err(|e| io_err(&groups_path, e))?;
        let groups = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<usize>().map_err(|e| io_err(&groups_path, e)))
            .collect::<Result<Vec<_>, _>>()?;
        if groups.len() != meta.j {
            return Err(io_err(&groups_path, format!("expected {} labels", meta.j)));
        }
        data.groups = Some(groups);
    }
    Ok(data)
}

/// Realized warps written by `fit`, one `(x, g)` file per sequence.
pub fn read_warps(dir: &Path, j: usize) -> Result<Vec<Vec<f64>>, CliError> {
    (0..j)
        .map(|k| {
            let m = read_matrix(&seq_path(dir, "warp", k))?;
            Ok(m.column(1).iter().copied().collect())
        })
        .collect()
}

pub fn write_warps(dir: &Path, x: &[f64], warps: &[Vec<f64>]) -> Result<(), CliError> {
    let header = ["x".to_string(), "g".to_string()];
    for (j, g) in warps.iter().enumerate() {
        let rows: Vec<[f64; 2]> = x.iter().zip(g).map(|(a, b)| [*a, *b]).collect();
        write_rows(&seq_path(dir, "warp", j), Some(&header), rows.iter().map(|r| r.as_slice()))?;
    }
    Ok(())
}

pub fn read_aligned(dir: &Path, j: usize) -> Result<Vec<DMatrix<f64>>, CliError> {
    (0..j).map(|k| read_matrix(&seq_path(dir, "aligned", k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn floats_round_trip_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(40, 3, |_, _| {
            let mant: f64 = rng.random::<f64>() - 0.5;
            mant * 10f64.powi(rng.random_range(-300..300))
        });
        let path = tmp.path().join("m.csv");
        write_matrix(&path, "d", &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn dataset_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let config = gpalign_core::GenConfig { j: 4, n: 9, d: 2, groups: 2, warp_roughness: 1.0, noise_sd: 0.1, seed: 3 };
        let data = gpalign_core::generate(&config).unwrap();
        write_dataset(tmp.path(), &data).unwrap();
        assert_eq!(read_dataset(tmp.path()).unwrap(), data);
    }

    #[test]
    fn malformed_files_are_input_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("bad.csv");
        fs::write(&path, "d0\n1.0\nNaN\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(CliError::Input(_))));
        fs::write(&path, "d0,d1\n1.0\n").unwrap();
        assert!(read_matrix(&path).is_err());
        assert!(matches!(read_dataset(&tmp.path().join("missing")), Err(CliError::Input(_))));
    }
}

//! Point sets: file ingestion, synthetic mixtures, dataset statistics.
//!
//! A [`PointSet`] is an immutable n x d matrix of finite reals. It is both the
//! empirical data distribution and the support of the optimal denoiser, so
//! everything downstream borrows it read-only.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

/// An n x d matrix of data points, row-major, with optional per-row labels.
///
/// Invariants enforced at construction: n >= 1, d >= 1, every entry finite,
/// all rows the same length. Labels are metadata only; no numerical result
/// depends on them.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<i64>>,
}

impl PointSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParam("point set needs at least one row".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidParam("point set needs at least one column".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InconsistentDimension {
                    row: i + 1,
                    expected: d,
                    got: row.len(),
                });
            }
            if !math::all_finite(row) {
                return Err(Error::NonFinite("point set row"));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { data, n: rows.len(), d, labels: None })
    }

    pub fn from_flat(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 || data.len() != n * d {
            return Err(Error::InvalidParam(format!(
                "flat point set of length {} does not match {}x{}",
                data.len(),
                n,
                d
            )));
        }
        if !math::all_finite(&data) {
            return Err(Error::NonFinite("point set data"));
        }
        Ok(Self { data, n, d, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidParam(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    /// Content hash over shape and the bit patterns of all entries.
    /// Labels do not participate.
    pub fn content_hash(&self) -> u64 {
        let shape = rng::splitmix64((self.n as u64) << 32 | self.d as u64);
        rng::hash_f64s(shape, &self.data)
    }
}

/// Load a point set from a comma-separated file: '.' decimal point, LF line
/// endings, no quoting, one optional header row.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<PointSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (li, line) in text.lines().enumerate() {
        if has_header && li == 0 {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let row_no = rows.len() + 1;
        let mut row = Vec::new();
        for (ci, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                col: ci + 1,
                reason: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    col: ci + 1,
                    reason: format!("{cell:?} is not finite"),
                });
            }
            row.push(v);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::InconsistentDimension {
                    row: row_no,
                    expected: w,
                    got: row.len(),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    PointSet::new(rows)
}

/// Write a point set as headerless CSV. Cells use the shortest decimal
/// representation that round-trips, so `load_csv(write_csv(ps))` is the
/// identity bit for bit.
pub fn write_csv(ps: &PointSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in ps.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Draw an isotropic Gaussian mixture: `n_per_mode` samples around each row
/// of `means` with the given noise level. Row j comes from mode
/// `j / n_per_mode` and uses substream `stream_seed(seed, j)`, so the output
/// does not depend on generation order. Labels record the mode index.
pub fn gen_gmm(means: &[Vec<f64>], stdev: f64, n_per_mode: usize, seed: u64) -> Result<PointSet> {
    if means.is_empty() {
        return Err(Error::InvalidParam("gmm needs at least one mode".into()));
    }
    if !(stdev >= 0.0) || !stdev.is_finite() {
        return Err(Error::InvalidParam(format!("gmm stdev {stdev} must be >= 0")));
    }
    if n_per_mode == 0 {
        return Err(Error::InvalidParam("gmm needs n_per_mode >= 1".into()));
    }
    let d = means[0].len();
    if d == 0 {
        return Err(Error::InvalidParam("gmm modes need at least one coordinate".into()));
    }
    for (k, m) in means.iter().enumerate() {
        if m.len() != d {
            return Err(Error::InconsistentDimension {
                row: k + 1,
                expected: d,
                got: m.len(),
            });
        }
        if !math::all_finite(m) {
            return Err(Error::NonFinite("gmm mode"));
        }
    }
    let n = means.len() * n_per_mode;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let mode = j / n_per_mode;
        let mut row = means[mode].clone();
        if stdev > 0.0 {
            let z = rng::standard_normal_vec(rng::stream_seed(seed, j as u64), d);
            for (r, zi) in row.iter_mut().zip(z) {
                *r += stdev * zi;
            }
        }
        rows.push(row);
        labels.push(mode as i64);
    }
    PointSet::new(rows)?.with_labels(labels)
}

/// Arithmetic mean of the rows.
pub fn dataset_mean(ps: &PointSet) -> Vec<f64> {
    let mut mean = vec![0.0; ps.d()];
    for row in ps.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / ps.n() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn load_csv_basic() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "0.0,1.0\n2.0,3.0").unwrap();
        let ps = load_csv(&p, false).unwrap();
        assert_eq!((ps.n(), ps.d()), (2, 2));
        assert_eq!(ps.row(0), &[0.0, 1.0]);
        assert_eq!(ps.row(1), &[2.0, 3.0]);
    }

    #[test]
    fn load_csv_skips_header() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("h.csv");
        fs::write(&p, "x,y\n1,1\n").unwrap();
        let ps = load_csv(&p, true).unwrap();
        assert_eq!((ps.n(), ps.d()), (1, 2));
        assert_eq!(ps.row(0), &[1.0, 1.0]);
    }

    #[test]
    fn load_csv_reports_bad_cell() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1,abc\n").unwrap();
        match load_csv(&p, false) {
            Err(Error::Parse { row: 1, col: 2, .. }) => {}
            other => panic!("expected parse error at (1,2), got {other:?}"),
        }
    }

    #[test]
    fn load_csv_reports_ragged_rows() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("ragged.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        match load_csv(&p, false) {
            Err(Error::InconsistentDimension { row: 2, expected: 2, got: 1 }) => {}
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_missing_file_is_io_error() {
        match load_csv("/nonexistent/nope.csv", false) {
            Err(Error::Io { .. }) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("rt.csv");
        let ps = PointSet::new(vec![
            vec![0.1, -2.5e-13, 3.0],
            vec![std::f64::consts::PI, 1.0 / 3.0, -0.0],
        ])
        .unwrap();
        write_csv(&ps, &p).unwrap();
        let back = load_csv(&p, false).unwrap();
        for i in 0..ps.n() {
            for c in 0..ps.d() {
                assert_eq!(ps.row(i)[c].to_bits(), back.row(i)[c].to_bits());
            }
        }
    }

    #[test]
    fn gen_gmm_zero_noise_repeats_means() {
        let ps = gen_gmm(&[vec![0.0, 0.0]], 0.0, 3, 1).unwrap();
        assert_eq!(ps.n(), 3);
        for row in ps.rows() {
            assert_eq!(row, &[0.0, 0.0]);
        }
        let pair = gen_gmm(&[vec![-1.0], vec![1.0]], 0.0, 1, 1).unwrap();
        assert_eq!(pair.row(0), &[-1.0]);
        assert_eq!(pair.row(1), &[1.0]);
        assert_eq!(pair.labels().unwrap(), &[0, 1]);
    }

    #[test]
    fn gen_gmm_mode_means_are_close_to_centers() {
        // Standard error is 0.1/sqrt(100) = 0.01 per coordinate; 0.05 is 5 SE.
        let means = vec![vec![0.0, 0.0], vec![5.0, 5.0]];
        let ps = gen_gmm(&means, 0.1, 100, 7).unwrap();
        assert_eq!(ps.n(), 200);
        for (mode, center) in means.iter().enumerate() {
            let mut sum = vec![0.0; 2];
            for j in 0..100 {
                for (s, v) in sum.iter_mut().zip(ps.row(mode * 100 + j)) {
                    *s += v;
                }
            }
            for (s, c) in sum.iter().zip(center) {
                assert!(
                    (s / 100.0 - c).abs() < 0.05,
                    "mode {mode} mean {} vs center {c}",
                    s / 100.0
                );
            }
        }
    }

    #[test]
    fn gen_gmm_rejects_bad_params() {
        assert!(gen_gmm(&[], 1.0, 1, 0).is_err());
        assert!(gen_gmm(&[vec![0.0]], -0.5, 1, 0).is_err());
        assert!(gen_gmm(&[vec![0.0]], 1.0, 0, 0).is_err());
    }

    #[test]
    fn dataset_mean_examples() {
        let ps = PointSet::new(vec![vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(dataset_mean(&ps), vec![1.0, 1.0]);

        let single = PointSet::new(vec![vec![3.5, -1.0]]).unwrap();
        assert_eq!(dataset_mean(&single), vec![3.5, -1.0]);

        let sym = PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
        assert!(dataset_mean(&sym)[0].abs() <= 1e-12);
    }

    #[test]
    fn mirrored_rows_cancel_in_mean() {
        let x = vec![0.3, -1.7, 2.9];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let ps = PointSet::new(vec![x, neg]).unwrap();
        for m in dataset_mean(&ps) {
            assert!(m.abs() <= 1e-12);
        }
    }

    #[test]
    fn content_hash_tracks_values_not_labels() {
        let a = PointSet::new(vec![vec![1.0, 2.0]]).unwrap();
        let b = a.clone().with_labels(vec![5]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = PointSet::new(vec![vec![1.0, 2.000000001]]).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointSet::new(vec![vec![f64::NAN]]).is_err());
        assert!(PointSet::new(vec![vec![f64::INFINITY, 0.0]]).is_err());
    }
}

//! Nonnegative sparse operators in compressed-row form.
//!
//! Every product with `A` or `A^T` goes through an [`OpCounter`] owned by the
//! caller, so each solver run can report exactly how many matrix-vector
//! products it spent.

use std::fmt::Write as _;

use crate::error::LinopError;

/// Number of applications of `A` or `A^T` performed so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    count: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn bump(&mut self) {
        self.count += 1;
    }
}

/// Entrywise nonnegative matrix without empty rows or columns, stored as CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegativeSparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl NonnegativeSparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets with 0-based indices.
    ///
    /// Explicit zeros are dropped. Duplicates, negative or non-finite values,
    /// out-of-range indices and empty rows or columns are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, LinopError> {
        if rows == 0 || cols == 0 {
            return Err(LinopError::EmptyShape { rows, cols });
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(LinopError::IndexOutOfBounds { row: i, col: j, rows, cols });
            }
            if !v.is_finite() || v < 0.0 {
                return Err(LinopError::InvalidValue { row: i, col: j, value: v });
            }
            if v > 0.0 {
                entries.push((i, j, v));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(LinopError::DuplicateEntry { row: w[0].0, col: w[0].1 });
        }

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_seen = vec![false; cols];
        for &(i, j, _) in &entries {
            row_ptr[i + 1] += 1;
            col_seen[j] = true;
        }
        for i in 0..rows {
            if row_ptr[i + 1] == 0 {
                return Err(LinopError::ZeroRow(i));
            }
            row_ptr[i + 1] += row_ptr[i];
        }
        if let Some(j) = col_seen.iter().position(|seen| !seen) {
            return Err(LinopError::ZeroColumn(j));
        }

        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        })
    }

    /// Dense row-major input; zeros are not stored.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinopError> {
        if data.len() != rows * cols {
            return Err(LinopError::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        Self::from_triplets(rows, cols, data.iter().enumerate().map(|(k, &v)| (k / cols, k % cols, v)))
    }

    pub fn identity(n: usize) -> Result<Self, LinopError> {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates stored entries as 0-based `(row, col, value)` in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    /// `Ax`.
    pub fn matvec(&self, x: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>, LinopError> {
        if x.len() != self.cols {
            return Err(LinopError::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        ops.bump();
        let out = (0..self.rows)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.values[k] * x[self.col_idx[k]]).sum())
            .collect();
        Ok(out)
    }

    /// `A^T u`, computed by scattering each row.
    pub fn rmatvec(&self, u: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>, LinopError> {
        if u.len() != self.rows {
            return Err(LinopError::DimensionMismatch { expected: self.rows, actual: u.len() });
        }
        ops.bump();
        let mut out = vec![0.0; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[k]] += self.values[k] * ui;
            }
        }
        Ok(out)
    }

    /// Column sums `Σ_i A_ij`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (&j, &v) in self.col_idx.iter().zip(&self.values) {
            sums[j] += v;
        }
        sums
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()).collect()
    }

    /// Induced ℓ¹ operator norm, i.e. the largest column sum.
    pub fn one_norm(&self) -> f64 {
        self.column_sums().into_iter().fold(0.0, f64::max)
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Result<Self, LinopError> {
        let mut triplets = Vec::new();
        for (new_i, &i) in keep.iter().enumerate() {
            if i >= self.rows {
                return Err(LinopError::IndexOutOfBounds { row: i, col: 0, rows: self.rows, cols: self.cols });
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                triplets.push((new_i, self.col_idx[k], self.values[k]));
            }
        }
        Self::from_triplets(keep.len(), self.cols, triplets)
    }

    /// Parses the coordinate text format: a `m n nnz` header followed by
    /// `i j v` lines with 1-based indices. Lines starting with `%` are comments.
    pub fn from_coordinate_text(text: &str) -> Result<Self, LinopError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));

        let (header_line, header) = lines.next().ok_or(LinopError::MissingHeader)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_count = |s: &str| {
            s.parse::<usize>().map_err(|_| LinopError::Parse { line: header_line, message: format!("bad count {s:?}") })
        };
        if fields.len() != 3 {
            return Err(LinopError::Parse { line: header_line, message: "header must be \"m n nnz\"".into() });
        }
        let (rows, cols, nnz) = (parse_count(fields[0])?, parse_count(fields[1])?, parse_count(fields[2])?);

        let mut triplets = Vec::with_capacity(nnz);
        for (line_no, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(LinopError::Parse { line: line_no, message: "expected \"i j v\"".into() });
            }
            let bad = |what: &str| LinopError::Parse { line: line_no, message: format!("bad {what}") };
            let i: usize = f[0].parse().map_err(|_| bad("row index"))?;
            let j: usize = f[1].parse().map_err(|_| bad("column index"))?;
            let v: f64 = f[2].parse().map_err(|_| bad("value"))?;
            if i == 0 || j == 0 {
                return Err(LinopError::Parse { line: line_no, message: "indices are 1-based".into() });
            }
            if v < 0.0 {
                return Err(LinopError::InvalidValue { row: i - 1, col: j - 1, value: v });
            }
            triplets.push((i - 1, j - 1, v));
        }
        if triplets.len() != nnz {
            return Err(LinopError::NnzMismatch { declared: nnz, found: triplets.len() });
        }
        Self::from_triplets(rows, cols, triplets)
    }

    /// Writes the coordinate text format. Values use the shortest round-trip
    /// representation, so reading the text back reproduces the matrix exactly.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.rows, self.cols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(out, "{} {} {:?}", i + 1, j + 1, v);
        }
        out
    }
}

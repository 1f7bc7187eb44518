use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense meta-game payoff matrix with finite entries and at least one row
/// and one column.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix<T: Scalar> {
    entries: Array2<T>,
}

impl<T: Scalar> PayoffMatrix<T> {
    pub fn new(entries: Array2<T>) -> Result<Self> {
        let (m, n) = entries.dim();
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!(
                "payoff matrix must be at least 1x1, got {m}x{n}"
            )));
        }
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("payoff entry ({i},{j}) = {v}")));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let entries = Array2::from_shape_vec((m, n), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(entries)
    }

    /// 1x1 game holding a single payoff.
    pub fn singleton(value: T) -> Result<Self> {
        Self::new(Array2::from_elem((1, 1), value))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[[i, j]]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.entries.row(i)
    }

    pub fn col(&self, j: usize) -> ArrayView1<'_, T> {
        self.entries.column(j)
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.entries.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.entries
    }

    /// Affine transform `scale * U + shift`, used by the equivariance checks.
    pub fn affine(&self, scale: T, shift: T) -> Result<Self> {
        Self::new(self.entries.mapv(|v| v * scale + shift))
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.t().to_owned(),
        }
    }

    /// Appends one generator row and one discriminator column.
    ///
    /// `new_row[j]` is the new generator against existing discriminator `j`,
    /// `new_col[i]` is existing generator `i` against the new discriminator,
    /// and `corner` pairs the two newcomers.
    pub fn augment(&self, new_row: &[T], new_col: &[T], corner: T) -> Result<Self> {
        let (m, n) = self.dim();
        if new_row.len() != n {
            return Err(Error::Dimension(format!(
                "new row has {} entries, matrix has {n} columns",
                new_row.len()
            )));
        }
        if new_col.len() != m {
            return Err(Error::Dimension(format!(
                "new column has {} entries, matrix has {m} rows",
                new_col.len()
            )));
        }
        let mut out = Array2::zeros((m + 1, n + 1));
        out.slice_mut(ndarray::s![..m, ..n]).assign(&self.entries);
        out.slice_mut(ndarray::s![m, ..n])
            .assign(&ArrayView1::from(new_row));
        out.slice_mut(ndarray::s![..m, n])
            .assign(&ArrayView1::from(new_col));
        out[[m, n]] = corner;
        Self::new(out)
    }

    /// Keeps the listed rows and columns, in the given order. Equivalent to
    /// `J_rows · U · J_colsᵀ` with 0/1 selection matrices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let (m, n) = self.dim();
        if let Some(&i) = rows.iter().find(|&&i| i >= m) {
            return Err(Error::Dimension(format!("row index {i} out of range {m}")));
        }
        if let Some(&j) = cols.iter().find(|&&j| j >= n) {
            return Err(Error::Dimension(format!("column index {j} out of range {n}")));
        }
        let out = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| {
            self.entries[[rows[a], cols[b]]]
        });
        Self::new(out)
    }

    /// Row expected payoffs against a column mixture: `U σ_d`.
    pub fn row_payoffs(&self, sigma_d: ArrayView1<'_, T>) -> Array1<T> {
        self.entries.dot(&sigma_d)
    }

    /// Column expected payoffs against a row mixture: `σ_gᵀ U`.
    pub fn col_payoffs(&self, sigma_g: ArrayView1<'_, T>) -> Array1<T> {
        sigma_g.dot(&self.entries)
    }

    /// Writes the matrix as CSV: a header of column strategy ids, then one
    /// line per row.
    pub fn write_csv<W: Write>(&self, mut w: W, col_ids: &[u64]) -> Result<()> {
        if col_ids.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "{} column ids for {} columns",
                col_ids.len(),
                self.cols()
            )));
        }
        let header: Vec<String> = col_ids.iter().map(u64::to_string).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.entries.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Parses a header-less numeric CSV grid. Blank lines are skipped;
    /// row/column numbers in errors are 1-based.
    pub fn parse_grid(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for (col_no, cell) in line.split(',').enumerate() {
                let cell = cell.trim();
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: line_no + 1,
                    col: col_no + 1,
                    msg: format!("not a number: {cell:?}"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row: line_no + 1,
                        col: col_no + 1,
                        msg: format!("non-finite value {cell:?}"),
                    });
                }
                row.push(T::of(value));
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse {
                        row: line_no + 1,
                        col: row.len().min(first.len()) + 1,
                        msg: format!("expected {} cells, found {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty("matrix CSV has no rows".into()));
        }
        Self::from_rows(&rows)
    }
}

//! Contingency tables, probability tables and margins, plus the
//! interaction-preserving margin adjustment (iterative proportional fitting).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default L-infinity margin tolerance for [`ipf_adjust`].
pub const IPF_TOL: f64 = 1e-10;
/// Default iteration cap for [`ipf_adjust`].
pub const IPF_MAX_ITER: usize = 10_000;

/// A labelled r x c table of nonnegative counts.
///
/// Counts are stored as reals so that fitted and synthesised tables share
/// the type with observed ones. Storage is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    counts: Vec<f64>,
}

impl ContingencyTable {
    /// Validates a labelled matrix of counts. Counts are kept bit-exactly.
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::validate(row_labels, col_labels, rows, false)
    }

    /// Like [`ContingencyTable::new`] but additionally requires integral counts.
    pub fn new_strict(row_labels: Vec<String>, col_labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::validate(row_labels, col_labels, rows, true)
    }

    /// Builds a table with generated labels `R1..Rr` and `C1..Cc`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let row_labels = (1..=r).map(|i| format!("R{i}")).collect();
        let col_labels = (1..=c).map(|j| format!("C{j}")).collect();
        Self::new(row_labels, col_labels, rows)
    }

    fn validate(row_labels: Vec<String>, col_labels: Vec<String>, rows: Vec<Vec<f64>>, strict: bool) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r < 2 || c < 2 {
            return Err(Error::Dimension { rows: r, cols: c });
        }
        if let Some(i) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::Label(format!("row {i} has {} cells, expected {c}", rows[i].len())));
        }
        check_labels("row", &row_labels, r)?;
        check_labels("column", &col_labels, c)?;

        let mut counts = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteCell { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeCell { row: i, col: j, value: v });
                }
                if strict && v.fract() != 0.0 {
                    return Err(Error::NonIntegerCell { row: i, col: j, value: v });
                }
                counts.push(v);
            }
        }
        let table = Self { row_labels, col_labels, counts };
        if let Some(i) = table.row_totals().iter().position(|&s| s <= 0.0) {
            return Err(Error::EmptyMarginal { axis: "row", index: i });
        }
        if let Some(j) = table.col_totals().iter().position(|&s| s <= 0.0) {
            return Err(Error::EmptyMarginal { axis: "column", index: j });
        }
        Ok(table)
    }

    pub fn rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Row-major cell counts.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.cols() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.counts[i * c..(i + 1) * c]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn row_totals(&self) -> Vec<f64> {
        (0..self.rows()).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<f64> {
        let c = self.cols();
        let mut out = vec![0.0; c];
        for (k, v) in self.counts.iter().enumerate() {
            out[k % c] += v;
        }
        out
    }

    /// Counts as nested rows.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.counts.chunks(self.cols()).map(<[f64]>::to_vec).collect()
    }

    /// Replaces the counts while keeping the labels.
    pub fn with_counts(&self, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.row_labels.clone(), self.col_labels.clone(), rows)
    }
}

fn check_labels(axis: &str, labels: &[String], expected: usize) -> Result<()> {
    if labels.len() != expected {
        return Err(Error::Label(format!("{} {axis} labels for {expected} {axis}s", labels.len())));
    }
    let mut seen = HashSet::new();
    for label in labels {
        if label.trim().is_empty() {
            return Err(Error::Label(format!("missing {axis} label")));
        }
        if !seen.insert(label.as_str()) {
            return Err(Error::Label(format!("duplicate {axis} label {label:?}")));
        }
    }
    Ok(())
}

/// A strictly positive r x c table summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ProbabilityTable {
    /// Normalises strictly positive row-major values to a probability table.
    pub fn from_positive(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Dimension { rows, cols });
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: (rows, cols), found: (values.len() / cols.max(1), cols) });
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteCell { row: k / cols, col: k % cols });
            }
            if v <= 0.0 {
                return Err(Error::ZeroCell { row: k / cols, col: k % cols });
            }
        }
        let total: f64 = values.iter().sum();
        let values = values.into_iter().map(|v| v / total).collect();
        Ok(Self { rows, cols, values })
    }

    /// Convenience constructor from nested rows (normalised).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Label("ragged rows".into()));
        }
        Self::from_positive(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Cell values multiplied by `total`.
    pub fn scaled(&self, total: f64) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(|row| row.iter().map(|v| v * total).collect()).collect()
    }

    pub(crate) fn check_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::DimensionMismatch { expected: self.shape(), found: other });
        }
        Ok(())
    }
}

/// Row and column marginal distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

impl Margins {
    /// Normalises nonnegative weights into margins.
    pub fn new(row: Vec<f64>, col: Vec<f64>) -> Result<Self> {
        Ok(Self { row: simplex(row, "row")?, col: simplex(col, "column")? })
    }

    /// Observed margins of a count table.
    pub fn of_table(t: &ContingencyTable) -> Self {
        // Valid tables have positive totals, so normalisation cannot fail.
        Self::new(t.row_totals(), t.col_totals()).expect("validated table")
    }

    /// Uniform margins for an r x c table.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self { row: vec![1.0 / rows as f64; rows], col: vec![1.0 / cols as f64; cols] }
    }

    pub fn is_positive(&self) -> bool {
        self.row.iter().chain(&self.col).all(|&v| v > 0.0)
    }
}

fn simplex(v: Vec<f64>, axis: &str) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::InvalidMargins(format!("{axis} margin needs at least 2 entries")));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidMargins(format!("{axis} margin has negative or non-finite entries")));
    }
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidMargins(format!("{axis} margin sums to zero")));
    }
    Ok(v.into_iter().map(|x| x / total).collect())
}

/// Normalises counts (plus an optional smoothing constant per cell).
pub fn to_probability(t: &ContingencyTable, smoothing: f64) -> Result<ProbabilityTable> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::InvalidMargins(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    let c = t.cols();
    if smoothing == 0.0 {
        if let Some(k) = t.counts().iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroCell { row: k / c, col: k % c });
        }
    }
    let values = t.counts().iter().map(|v| v + smoothing).collect();
    ProbabilityTable::from_positive(t.rows(), c, values)
}

pub fn margins(p: &ProbabilityTable) -> Margins {
    let (r, c) = p.shape();
    let mut row = vec![0.0; r];
    let mut col = vec![0.0; c];
    for (k, v) in p.values().iter().enumerate() {
        row[k / c] += v;
        col[k % c] += v;
    }
    Margins { row, col }
}

/// Outer product of the margins.
pub fn independence_table(m: &Margins) -> Result<ProbabilityTable> {
    if !m.is_positive() {
        return Err(Error::ZeroMargin);
    }
    let values = m.row.iter().flat_map(|ri| m.col.iter().map(move |cj| ri * cj)).collect();
    ProbabilityTable::from_positive(m.row.len(), m.col.len(), values)
}

/// Local (adjacent-category) log-odds ratios, row-major over (r-1) x (c-1) cuts.
pub fn local_log_odds(p: &ProbabilityTable) -> Vec<f64> {
    let (r, c) = p.shape();
    let mut out = Vec::with_capacity((r - 1) * (c - 1));
    for i in 0..r - 1 {
        for j in 0..c - 1 {
            out.push(p.get(i, j).ln() - p.get(i, j + 1).ln() - p.get(i + 1, j).ln() + p.get(i + 1, j + 1).ln());
        }
    }
    out
}

fn margin_error(values: &[f64], cols: usize, target: &Margins) -> f64 {
    let rows = values.len() / cols;
    let mut err = 0.0f64;
    for i in 0..rows {
        let s: f64 = values[i * cols..(i + 1) * cols].iter().sum();
        err = err.max((s - target.row[i]).abs());
    }
    for j in 0..cols {
        let s: f64 = (0..rows).map(|i| values[i * cols + j]).sum();
        err = err.max((s - target.col[j]).abs());
    }
    err
}

/// Rescales rows and columns alternately until the margins match `target`.
///
/// Every cross-product ratio of `p` is preserved, so the result carries the
/// same odds-ratio structure with the requested margins.
pub fn ipf_adjust(p: &ProbabilityTable, target: &Margins, tol: f64, max_iter: usize) -> Result<ProbabilityTable> {
    let (r, c) = p.shape();
    if target.row.len() != r || target.col.len() != c {
        return Err(Error::DimensionMismatch { expected: (r, c), found: (target.row.len(), target.col.len()) });
    }
    if !target.is_positive() {
        return Err(Error::ZeroMargin);
    }
    let mut v = p.values().to_vec();
    for _ in 0..=max_iter {
        if margin_error(&v, c, target) <= tol {
            return Ok(ProbabilityTable { rows: r, cols: c, values: v });
        }
        for i in 0..r {
            let row = &mut v[i * c..(i + 1) * c];
            let s: f64 = row.iter().sum();
            let f = target.row[i] / s;
            row.iter_mut().for_each(|x| *x *= f);
        }
        for j in 0..c {
            let s: f64 = (0..r).map(|i| v[i * c + j]).sum();
            let f = target.col[j] / s;
            (0..r).for_each(|i| v[i * c + j] *= f);
        }
    }
    Err(Error::NonConvergence(max_iter))
}

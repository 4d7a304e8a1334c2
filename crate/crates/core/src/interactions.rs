//! Generalized, power-scaled interaction parameters for L/G/C logit types
//! and the Altham association distance.
//!
//! For a row cut `a` and column cut `b` the row variable is split into two
//! events `R1`, `R2` and the column variable into `C1`, `C2` according to the
//! logit types. Writing `x_uv = P(Ru, Cv) / (P(Ru) P(Cv))` for the ratio of the
//! joint mass to its value under independence, the interaction is
//!
//! ```text
//! H_ab = f(x_11) - f(x_12) - f(x_21) + f(x_22),   f(x) = (x^lambda - 1) / lambda
//! ```
//!
//! with `f = ln` at `lambda = 0`, where `H_ab` reduces to the log odds ratio of
//! the collapsed 2 x 2 table for every logit type pair.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::ProbabilityTable;

/// Default bound on |lambda|.
pub const LAMBDA_BOUND: f64 = 5.0;

/// How a categorical variable is split at each cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogitType {
    /// Adjacent categories: `{a}` vs `{a+1}`.
    L,
    /// Cumulative split: `{1..a}` vs `{a+1..n}`.
    G,
    /// Continuation: `{a}` vs `{a+1..n}`.
    C,
}

impl LogitType {
    pub const ALL: [LogitType; 3] = [LogitType::L, LogitType::G, LogitType::C];

    /// The two events at 1-based cut `a` of an `n`-category variable, as
    /// 0-based index ranges.
    pub fn events(self, n: usize, a: usize) -> (Range<usize>, Range<usize>) {
        match self {
            LogitType::L => (a - 1..a, a..a + 1),
            LogitType::G => (0..a, a..n),
            LogitType::C => (a - 1..a, a..n),
        }
    }
}

impl fmt::Display for LogitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LogitType::L => "L",
            LogitType::G => "G",
            LogitType::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for LogitType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" => Ok(LogitType::L),
            "G" => Ok(LogitType::G),
            "C" => Ok(LogitType::C),
            other => Err(format!("unknown logit type {other:?} (expected L, G or C)")),
        }
    }
}

/// Logit types for both variables plus the power scaling factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub row_type: LogitType,
    pub col_type: LogitType,
    pub lambda: f64,
}

impl InteractionSpec {
    pub fn new(row_type: LogitType, col_type: LogitType, lambda: f64) -> Result<Self> {
        Self::with_bound(row_type, col_type, lambda, LAMBDA_BOUND)
    }

    pub fn with_bound(row_type: LogitType, col_type: LogitType, lambda: f64, bound: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda.abs() > bound {
            return Err(Error::LambdaOutOfRange(lambda));
        }
        Ok(Self { row_type, col_type, lambda })
    }

    /// Classical local log odds ratios.
    pub fn log_linear() -> Self {
        Self { row_type: LogitType::L, col_type: LogitType::L, lambda: 0.0 }
    }

    pub fn is_log_linear_local(&self) -> bool {
        self.lambda == 0.0 && self.row_type == LogitType::L && self.col_type == LogitType::L
    }
}

/// An (r-1) x (c-1) matrix of interactions, row-major by (row cut, column cut).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub spec: InteractionSpec,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl InteractionMatrix {
    pub fn new(spec: InteractionSpec, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: (rows, cols), found: (values.len(), 1) });
        }
        Ok(Self { spec, rows, cols, values })
    }

    /// Number of row cuts (r - 1).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of column cuts (c - 1).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry at 1-based cuts `(a, b)`.
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[(a - 1) * self.cols + (b - 1)]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// CSV with cut labels of the form `U|F`, built from category labels.
    pub fn to_csv(&self, row_labels: &[String], col_labels: &[String]) -> String {
        let cut = |labels: &[String], a: usize| format!("{}|{}", labels[a], labels[a + 1]);
        let mut out = String::new();
        for b in 0..self.cols {
            out.push(',');
            out.push_str(&cut(col_labels, b));
        }
        out.push('\n');
        for a in 0..self.rows {
            out.push_str(&cut(row_labels, a));
            for b in 0..self.cols {
                out.push(',');
                out.push_str(&format!("{}", self.values[a * self.cols + b]));
            }
            out.push('\n');
        }
        out
    }
}

/// Joint masses of the collapsed 2 x 2 block at a cut, together with the
/// full-table masses of the two row events and the two column events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrants {
    pub q: [[f64; 2]; 2],
    pub row_mass: [f64; 2],
    pub col_mass: [f64; 2],
}

fn check_cut(p: &ProbabilityTable, a: usize, b: usize) -> Result<()> {
    let (r, c) = p.shape();
    if a == 0 || a >= r || b == 0 || b >= c {
        return Err(Error::CutOutOfRange { row_cut: a, col_cut: b });
    }
    Ok(())
}

/// Block masses at 1-based cuts `(a, b)`; `q[u][v] = P(row event u, column event v)`.
pub fn block_quadrants(p: &ProbabilityTable, a: usize, b: usize, rt: LogitType, ct: LogitType) -> Result<Quadrants> {
    check_cut(p, a, b)?;
    let (r, c) = p.shape();
    let row_events = rt.events(r, a);
    let col_events = ct.events(c, b);
    let row_ev = [row_events.0, row_events.1];
    let col_ev = [col_events.0, col_events.1];
    let mut q = [[0.0; 2]; 2];
    let mut row_mass = [0.0; 2];
    let mut col_mass = [0.0; 2];
    for u in 0..2 {
        for i in row_ev[u].clone() {
            for j in 0..c {
                row_mass[u] += p.get(i, j);
            }
            for v in 0..2 {
                for j in col_ev[v].clone() {
                    q[u][v] += p.get(i, j);
                }
            }
        }
    }
    for v in 0..2 {
        for j in col_ev[v].clone() {
            for i in 0..r {
                col_mass[v] += p.get(i, j);
            }
        }
    }
    Ok(Quadrants { q, row_mass, col_mass })
}

/// Power (Box-Cox) transform `(x^lambda - 1) / lambda`, `ln x` at zero.
pub fn f_lambda(x: f64, lambda: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::NonPositiveArgument(x));
    }
    Ok(power_transform(x, lambda))
}

#[inline]
fn power_transform(x: f64, lambda: f64) -> f64 {
    let ln = x.ln();
    if lambda == 0.0 {
        ln
    } else {
        (lambda * ln).exp_m1() / lambda
    }
}

const SIGNS: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];

impl Quadrants {
    fn ratio(&self, u: usize, v: usize) -> f64 {
        self.q[u][v] / (self.row_mass[u] * self.col_mass[v])
    }

    fn interaction(&self, lambda: f64) -> Result<f64> {
        let mut h = 0.0;
        for (u, signs) in SIGNS.iter().enumerate() {
            for (v, sign) in signs.iter().enumerate() {
                h += sign * f_lambda(self.ratio(u, v), lambda)?;
            }
        }
        Ok(h)
    }
}

pub fn interaction_matrix(p: &ProbabilityTable, spec: &InteractionSpec) -> Result<InteractionMatrix> {
    let (r, c) = p.shape();
    let mut values = Vec::with_capacity((r - 1) * (c - 1));
    for a in 1..r {
        for b in 1..c {
            let quad = block_quadrants(p, a, b, spec.row_type, spec.col_type)?;
            values.push(quad.interaction(spec.lambda)?);
        }
    }
    InteractionMatrix::new(*spec, r - 1, c - 1, values)
}

/// Derivatives of every interaction with respect to every cell of `p`,
/// treating cells as free (unnormalised) variables.
///
/// Rows follow the row-major cut order of [`interaction_matrix`]; columns the
/// row-major cell order.
pub fn interaction_jacobian(p: &ProbabilityTable, spec: &InteractionSpec) -> Result<DMatrix<f64>> {
    let (r, c) = p.shape();
    let mut jac = DMatrix::zeros((r - 1) * (c - 1), r * c);
    for a in 1..r {
        let (r1, r2) = spec.row_type.events(r, a);
        let row_ev = [r1, r2];
        for b in 1..c {
            let (c1, c2) = spec.col_type.events(c, b);
            let col_ev = [c1, c2];
            let quad = block_quadrants(p, a, b, spec.row_type, spec.col_type)?;
            let k = (a - 1) * (c - 1) + (b - 1);
            for u in 0..2 {
                for v in 0..2 {
                    // d f(x)/d p = x^lambda * d ln x / d p
                    let w = SIGNS[u][v] * quad.ratio(u, v).powf(spec.lambda);
                    let inv_q = 1.0 / quad.q[u][v];
                    let inv_r = 1.0 / quad.row_mass[u];
                    let inv_c = 1.0 / quad.col_mass[v];
                    for i in row_ev[u].clone() {
                        for j in 0..c {
                            jac[(k, i * c + j)] -= w * inv_r;
                        }
                        for j in col_ev[v].clone() {
                            jac[(k, i * c + j)] += w * inv_q;
                        }
                    }
                    for j in col_ev[v].clone() {
                        for i in 0..r {
                            jac[(k, i * c + j)] -= w * inv_c;
                        }
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// Sign summary of an interaction matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub all_nonneg: bool,
    pub min_entry: f64,
    /// 1-based (row cut, column cut) of the minimum.
    pub argmin: (usize, usize),
}

/// Checks for positive association of the given logit-type pair: every
/// interaction nonnegative.
pub fn positivity_report(h: &InteractionMatrix) -> PositivityReport {
    let (k, min_entry) =
        h.values()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bk, bv), (k, v)| if v < bv { (k, v) } else { (bk, bv) });
    PositivityReport { all_nonneg: min_entry >= 0.0, min_entry, argmin: (k / h.cols() + 1, k % h.cols() + 1) }
}

/// Altham distance: root sum of squares of log cross-product ratio
/// differences over all quadruples `(i, l, j, m)`.
pub fn altham_distance(p: &ProbabilityTable, q: &ProbabilityTable) -> Result<f64> {
    p.check_same_shape(q.shape())?;
    let (r, c) = p.shape();
    // log(p_ij / q_ij); the cross-product difference is a double contrast of it.
    let d: Vec<f64> = p.values().iter().zip(q.values()).map(|(a, b)| a.ln() - b.ln()).collect();
    let mut sum = 0.0;
    for i in 0..r {
        for l in 0..r {
            for j in 0..c {
                for m in 0..c {
                    let t = d[i * c + j] + d[l * c + m] - d[i * c + m] - d[l * c + j];
                    sum += t * t;
                }
            }
        }
    }
    Ok(sum.sqrt())
}

//! The extended RC(K) association model.
//!
//! A model is the set of strictly positive tables whose interaction matrix
//! (for the chosen logit types and scaling factor) factors as
//! `H_ab = sum_k phi_k (mu_{a+1,k} - mu_{a,k}) (nu_{b+1,k} - nu_{b,k})`,
//! with margins left free. Tables are parameterised by margin coordinates and
//! interactions jointly (see [`coords`]), which makes the map between
//! parameters and tables one to one.

pub mod coords;
mod fit;
mod identify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interactions::{InteractionMatrix, InteractionSpec};
use crate::table::{ContingencyTable, ProbabilityTable};

pub use coords::{table_from_params, InversionOptions};
pub use fit::{fit, FitOptions, OuterObjective};
pub use identify::{identify, init_params};

/// Category weights used to identify the scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightScheme {
    /// `1/r` for every row and `1/c` for every column.
    Uniform,
    /// Explicit positive weights; each set is normalised to sum to one.
    Custom { row: Vec<f64>, col: Vec<f64> },
}

impl WeightScheme {
    /// Row and column weights for an r x c table.
    pub fn resolve(&self, rows: usize, cols: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            WeightScheme::Uniform => Ok((vec![1.0 / rows as f64; rows], vec![1.0 / cols as f64; cols])),
            WeightScheme::Custom { row, col } => {
                if row.len() != rows || col.len() != cols {
                    return Err(Error::DimensionMismatch { expected: (rows, cols), found: (row.len(), col.len()) });
                }
                let norm = |w: &[f64]| -> Result<Vec<f64>> {
                    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return Err(Error::InvalidMargins("weights must be positive".into()));
                    }
                    let s: f64 = w.iter().sum();
                    Ok(w.iter().map(|v| v / s).collect())
                };
                Ok((norm(row)?, norm(col)?))
            }
        }
    }
}

/// One member of the extended RC(K) family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: usize,
    pub interaction: InteractionSpec,
    pub weights: WeightScheme,
}

impl ModelSpec {
    pub fn new(k: usize, interaction: InteractionSpec) -> Self {
        Self { k, interaction, weights: WeightScheme::Uniform }
    }

    /// Checks the rank against the table shape.
    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        dof(rows, cols, self.k)?;
        self.weights.resolve(rows, cols)?;
        Ok(())
    }
}

/// Identified parameters: margin coordinates, category scores and
/// intrinsic association coefficients.
///
/// Scores are stored row-major: `mu[i][k]` is the score of row category `i`
/// on dimension `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RCParams {
    pub mu: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    /// `ln(P(row i) / P(row r))` for `i < r`.
    pub row_coord: Vec<f64>,
    /// `ln(P(col j) / P(col c))` for `j < c`.
    pub col_coord: Vec<f64>,
}

impl RCParams {
    pub fn k(&self) -> usize {
        self.phi.len()
    }

    /// Copy with every `phi_k` multiplied by `factor`.
    pub fn scale_association(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.phi.iter_mut().for_each(|p| *p *= factor);
        out
    }

    /// Verifies the identification constraints within `tol`.
    pub fn check_identification(&self, weights: &WeightScheme, tol: f64) -> Result<()> {
        let (r, c) = (self.mu.len(), self.nu.len());
        let k = self.k();
        if self.row_coord.len() + 1 != r || self.col_coord.len() + 1 != c {
            return Err(Error::InvariantViolation("margin coordinate length".into()));
        }
        if self.mu.iter().chain(&self.nu).any(|s| s.len() != k) {
            return Err(Error::InvariantViolation("score dimension".into()));
        }
        let (wr, wc) = weights.resolve(r, c)?;
        for (name, scores, w) in [("mu", &self.mu, &wr), ("nu", &self.nu, &wc)] {
            for a in 0..k {
                let mean: f64 = scores.iter().zip(w).map(|(s, w)| w * s[a]).sum();
                if mean.abs() > tol {
                    return Err(Error::InvariantViolation(format!("{name} dimension {a} not centred")));
                }
                for b in a..k {
                    let m: f64 = scores.iter().zip(w).map(|(s, w)| w * s[a] * s[b]).sum();
                    let target = if a == b { 1.0 } else { 0.0 };
                    if (m - target).abs() > tol {
                        return Err(Error::InvariantViolation(format!("{name} dimensions {a},{b} not orthonormal")));
                    }
                }
            }
        }
        if self.phi.iter().any(|p| *p < -tol) || self.phi.windows(2).any(|w| w[1] > w[0] + tol) {
            return Err(Error::InvariantViolation("phi must be nonnegative and descending".into()));
        }
        Ok(())
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: RCParams,
    pub fitted: ProbabilityTable,
    pub expected_counts: Vec<Vec<f64>>,
    pub total: f64,
    pub deviance: f64,
    pub dof: usize,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Residual degrees of freedom `(r-1-K)(c-1-K)`.
pub fn dof(rows: usize, cols: usize, k: usize) -> Result<usize> {
    let max_k = rows.min(cols).saturating_sub(1);
    if k < 1 || k > max_k {
        return Err(Error::RankOutOfRange { k, rows, cols });
    }
    Ok((rows - 1 - k) * (cols - 1 - k))
}

/// `H_ab = sum_k phi_k * dmu_ak * dnu_bk`.
pub fn interaction_from_scores(params: &RCParams, spec: &ModelSpec) -> Result<InteractionMatrix> {
    params.check_identification(&spec.weights, 1e-8)?;
    Ok(raw_interaction(params, spec))
}

pub(crate) fn raw_interaction(params: &RCParams, spec: &ModelSpec) -> InteractionMatrix {
    let (r, c) = (params.mu.len(), params.nu.len());
    let mut values = Vec::with_capacity((r - 1) * (c - 1));
    for a in 0..r - 1 {
        for b in 0..c - 1 {
            let h = (0..params.k())
                .map(|k| {
                    params.phi[k] * (params.mu[a + 1][k] - params.mu[a][k]) * (params.nu[b + 1][k] - params.nu[b][k])
                })
                .sum();
            values.push(h);
        }
    }
    InteractionMatrix::new(spec.interaction, r - 1, c - 1, values).expect("shape")
}

fn check_dims(t: &ContingencyTable, p: &ProbabilityTable) -> Result<()> {
    if (t.rows(), t.cols()) != p.shape() {
        return Err(Error::DimensionMismatch { expected: (t.rows(), t.cols()), found: p.shape() });
    }
    Ok(())
}

/// Multinomial kernel `sum n_ij ln p_ij`.
pub fn log_likelihood(t: &ContingencyTable, p: &ProbabilityTable) -> Result<f64> {
    check_dims(t, p)?;
    Ok(t.counts().iter().zip(p.values()).filter(|(n, _)| **n > 0.0).map(|(n, q)| n * q.ln()).sum())
}

/// Likelihood-ratio statistic G^2 against the saturated model.
pub fn deviance(t: &ContingencyTable, fitted: &ProbabilityTable) -> Result<f64> {
    check_dims(t, fitted)?;
    let total = t.total();
    let g2: f64 = t
        .counts()
        .iter()
        .zip(fitted.values())
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, q)| n * (n / (total * q)).ln())
        .sum::<f64>()
        * 2.0;
    Ok(g2.max(0.0))
}

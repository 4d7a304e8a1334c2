//! Counterfactual tables: rescale the intrinsic association coefficients of
//! a fitted model with its scores held fixed, and rebuild the joint
//! frequencies under fixed margins.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rc_model::{table_from_params, FitResult, InversionOptions};
use crate::table::{ipf_adjust, margins, ContingencyTable, Margins, ProbabilityTable, IPF_MAX_ITER, IPF_TOL};

/// Which margins the synthesised tables keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MarginPolicy {
    #[default]
    Observed,
    Fitted,
}

impl std::str::FromStr for MarginPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "observed" => Ok(Self::Observed),
            "fitted" => Ok(Self::Fitted),
            other => Err(format!("unknown margin policy {other:?} (expected observed or fitted)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Multipliers applied to every phi_k. Zero gives the independence table.
    pub scale_factors: Vec<f64>,
    pub margin_policy: MarginPolicy,
    /// Sample size of the synthesised tables; defaults to the observed total.
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub factor: f64,
    /// Integer counts with the target integer margins.
    pub counts: ContingencyTable,
    /// Expected counts before rounding.
    pub expected: Vec<Vec<f64>>,
}

/// Integer row and column totals summing to `round(total)`.
fn integer_totals(shares: &[f64], total: f64) -> Vec<f64> {
    let target = total.round();
    let raw: Vec<f64> = shares.iter().map(|s| s * target).collect();
    if raw.iter().all(|v| v.fract() == 0.0) && raw.iter().sum::<f64>() == target {
        return raw;
    }
    let mut out: Vec<f64> = raw.iter().map(|v| v.floor()).collect();
    let missing = (target - out.iter().sum::<f64>()).round() as usize;
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(missing) {
        out[i] += 1.0;
    }
    out
}

/// Rounds a nonnegative matrix to integers with prescribed integer row and
/// column totals. Cells start at their floor; the remaining units go to the
/// largest fractional parts, with augmenting paths resolving conflicts so
/// both sets of totals are met. Each cell moves by less than one.
pub fn controlled_round(x: &[Vec<f64>], row_totals: &[f64], col_totals: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (r, c) = (x.len(), x[0].len());
    let mut out: Vec<Vec<f64>> = x.iter().map(|row| row.iter().map(|v| v.floor()).collect()).collect();
    let deficit = |target: f64, have: f64, cap: usize| -> Result<usize> {
        let d = (target - have).round();
        if d < 0.0 || d > cap as f64 {
            return Err(Error::InvalidScenario(format!("cannot round to total {target}")));
        }
        Ok(d as usize)
    };
    let mut row_need = Vec::with_capacity(r);
    for i in 0..r {
        row_need.push(deficit(row_totals[i], out[i].iter().sum(), c)?);
    }
    let mut col_need = Vec::with_capacity(c);
    for j in 0..c {
        col_need.push(deficit(col_totals[j], out.iter().map(|row| row[j]).sum(), r)?);
    }
    if row_need.iter().sum::<usize>() != col_need.iter().sum::<usize>() {
        return Err(Error::InvalidScenario("row and column totals disagree".into()));
    }

    let mut up = vec![vec![false; c]; r];
    let mut cells: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    let frac = |(i, j): (usize, usize)| x[i][j] - x[i][j].floor();
    cells.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &(i, j) in &cells {
        if row_need[i] > 0 && col_need[j] > 0 {
            up[i][j] = true;
            row_need[i] -= 1;
            col_need[j] -= 1;
        }
    }
    // Augment: row -> col over unused cells, col -> row over used cells.
    while let Some(start) = row_need.iter().position(|&n| n > 0) {
        let mut prev_col: Vec<Option<usize>> = vec![None; c];
        let mut prev_row: Vec<Option<usize>> = vec![None; r];
        let mut seen_row = vec![false; r];
        seen_row[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut end = None;
        'bfs: while let Some(i) = queue.pop_front() {
            for j in 0..c {
                if up[i][j] || prev_col[j].is_some() {
                    continue;
                }
                prev_col[j] = Some(i);
                if col_need[j] > 0 {
                    end = Some(j);
                    break 'bfs;
                }
                for (l, used) in up.iter().map(|row| row[j]).enumerate() {
                    if used && !seen_row[l] {
                        seen_row[l] = true;
                        prev_row[l] = Some(j);
                        queue.push_back(l);
                    }
                }
            }
        }
        let mut j = end.ok_or_else(|| Error::InvalidScenario("integer margins are infeasible".into()))?;
        col_need[j] -= 1;
        row_need[start] -= 1;
        loop {
            let i = prev_col[j].expect("path");
            up[i][j] = true;
            if i == start {
                break;
            }
            let back = prev_row[i].expect("path");
            up[i][back] = false;
            j = back;
        }
    }
    for i in 0..r {
        for j in 0..c {
            if up[i][j] {
                out[i][j] += 1.0;
            }
        }
    }
    Ok(out)
}

/// Builds one table per scale factor.
///
/// `observed` supplies labels, the default total and (for
/// [`MarginPolicy::Observed`]) the target margins.
pub fn scale_association(
    observed: &ContingencyTable,
    base: &FitResult,
    spec: &ScenarioSpec,
    opts: &InversionOptions,
) -> Result<Vec<ScenarioTable>> {
    if !base.converged {
        return Err(Error::InvalidScenario("base fit did not converge".into()));
    }
    if (observed.rows(), observed.cols()) != base.fitted.shape() {
        return Err(Error::DimensionMismatch {
            expected: base.fitted.shape(),
            found: (observed.rows(), observed.cols()),
        });
    }
    let total = spec.total.unwrap_or_else(|| observed.total());
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidScenario(format!("total must be positive, got {total}")));
    }
    let target: Margins = match spec.margin_policy {
        MarginPolicy::Observed => Margins::of_table(observed),
        MarginPolicy::Fitted => margins(&base.fitted),
    };
    let row_totals = match spec.total {
        None if spec.margin_policy == MarginPolicy::Observed => observed.row_totals(),
        _ => integer_totals(&target.row, total),
    };
    let col_totals = match spec.total {
        None if spec.margin_policy == MarginPolicy::Observed => observed.col_totals(),
        _ => integer_totals(&target.col, total),
    };
    let int_total: f64 = row_totals.iter().sum();
    let mut out = Vec::with_capacity(spec.scale_factors.len());
    for &factor in &spec.scale_factors {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::InvalidScenario(format!("scale factor must be nonnegative, got {factor}")));
        }
        let params = base.params.scale_association(factor);
        let p = table_from_params(&params, &base.spec, Some(&target), opts)
            .map_err(|_| Error::InfeasibleScale { factor })?;
        let p: ProbabilityTable =
            ipf_adjust(&p, &target, IPF_TOL, IPF_MAX_ITER).map_err(|_| Error::InfeasibleScale { factor })?;
        let expected = p.scaled(int_total);
        let rounded = controlled_round(&expected, &row_totals, &col_totals)?;
        out.push(ScenarioTable { factor, counts: observed.with_counts(rounded)?, expected });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounding_respects_totals() {
        let x = vec![vec![1.5, 2.5, 0.5], vec![0.5, 1.5, 3.5]];
        let out = controlled_round(&x, &[5.0, 5.0], &[2.0, 4.0, 4.0]).unwrap();
        for (row, t) in out.iter().zip([5.0, 5.0]) {
            assert_eq!(row.iter().sum::<f64>(), t);
        }
        for (j, t) in [2.0, 4.0, 4.0].iter().enumerate() {
            assert_eq!(out.iter().map(|r| r[j]).sum::<f64>(), *t);
        }
        for (a, b) in out.iter().flatten().zip(x.iter().flatten()) {
            assert!((a - b).abs() < 1.0);
        }
    }

    #[test]
    fn rounding_rejects_inconsistent_totals() {
        let x = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(controlled_round(&x, &[2.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn integer_totals_sum() {
        let t = integer_totals(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 100.0);
        assert_eq!(t.iter().sum::<f64>(), 100.0);
        assert_eq!(t, vec![34.0, 33.0, 33.0]);
    }

    proptest! {
        #[test]
        fn controlled_rounding_properties(cells in proptest::collection::vec(0.0f64..50.0, 12)) {
            let x: Vec<Vec<f64>> = cells.chunks(4).map(<[f64]>::to_vec).collect();
            // Integer targets: round the true totals consistently.
            let total: f64 = cells.iter().sum();
            let rows: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() / total).collect();
            let cols: Vec<f64> = (0..4).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / total).collect();
            let t = total.round().max(1.0);
            let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * t / total).collect()).collect();
            let rt = integer_totals(&rows, t);
            let ct = integer_totals(&cols, t);
            let out = controlled_round(&scaled, &rt, &ct).unwrap();
            for (row, target) in out.iter().zip(&rt) {
                prop_assert_eq!(row.iter().sum::<f64>(), *target);
            }
            for j in 0..4 {
                prop_assert_eq!(out.iter().map(|r| r[j]).sum::<f64>(), ct[j]);
            }
            for (a, b) in out.iter().flatten().zip(scaled.iter().flatten()) {
                prop_assert!((a - b).abs() < 1.0 + 1e-9);
            }
        }
    }
}

//! Mixed parameterisation of a strictly positive table by margin
//! coordinates and interactions, and its inverse.
//!
//! Tables are handled internally through free log-ratio coordinates
//! `theta_k = ln(p_k / p_last)` over the first `rc - 1` cells, so every
//! iterate stays inside the open simplex. The forward map is
//!
//! ```text
//! zeta(p) = [ ln(p_i+ / p_r+), i < r ; ln(p_+j / p_+c), j < c ; vec H(p) ]
//! ```
//!
//! which has exactly `rc - 1` components.

use nalgebra::{DMatrix, DVector};

use super::{ModelSpec, RCParams};
use crate::error::{Error, Result};
use crate::interactions::{interaction_jacobian, interaction_matrix, InteractionSpec};
use crate::table::{ipf_adjust, margins, Margins, ProbabilityTable, IPF_MAX_ITER};

/// Controls for the Newton inversion of the coordinate map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Max-norm tolerance on the coordinate residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 200 }
    }
}

// Residual below which a stalled Newton iteration is accepted: rounding in
// x^lambda on tiny cells can stop progress just short of `tol`.
const STALL_TOL: f64 = 1e-9;

/// The map `theta -> zeta` for a fixed shape and interaction type.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateMap {
    pub rows: usize,
    pub cols: usize,
    pub spec: InteractionSpec,
}

impl CoordinateMap {
    pub fn new(rows: usize, cols: usize, spec: InteractionSpec) -> Self {
        Self { rows, cols, spec }
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols - 1
    }

    /// Number of margin coordinates, `(r-1) + (c-1)`.
    pub fn margin_dim(&self) -> usize {
        self.rows + self.cols - 2
    }

    pub fn table(&self, theta: &DVector<f64>) -> Result<ProbabilityTable> {
        let max = theta.iter().copied().fold(0.0f64, f64::max);
        let values: Vec<f64> = theta.iter().map(|t| (t - max).exp()).chain(std::iter::once((-max).exp())).collect();
        ProbabilityTable::from_positive(self.rows, self.cols, values)
    }

    pub fn theta(&self, p: &ProbabilityTable) -> DVector<f64> {
        let v = p.values();
        let last = v[v.len() - 1].ln();
        DVector::from_iterator(self.dim(), v[..v.len() - 1].iter().map(|x| x.ln() - last))
    }

    pub fn zeta(&self, p: &ProbabilityTable) -> Result<DVector<f64>> {
        let m = margins(p);
        let (rc, cc) = margin_coords(&m);
        let h = interaction_matrix(p, &self.spec)?;
        let z: Vec<f64> = rc.into_iter().chain(cc).chain(h.values().iter().copied()).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimplexEscape);
        }
        Ok(DVector::from_vec(z))
    }

    /// `d zeta / d theta` at `p`.
    pub fn jacobian(&self, p: &ProbabilityTable) -> Result<DMatrix<f64>> {
        let (r, c) = (self.rows, self.cols);
        let n = r * c;
        let m = margins(p);
        // d zeta / d p, cells as free variables.
        let mut dz = DMatrix::zeros(self.dim(), n);
        for i in 0..r - 1 {
            for j in 0..c {
                dz[(i, i * c + j)] += 1.0 / m.row[i];
                dz[(i, (r - 1) * c + j)] -= 1.0 / m.row[r - 1];
            }
        }
        for j in 0..c - 1 {
            for i in 0..r {
                dz[(r - 1 + j, i * c + j)] += 1.0 / m.col[j];
                dz[(r - 1 + j, i * c + c - 1)] -= 1.0 / m.col[c - 1];
            }
        }
        let hj = interaction_jacobian(p, &self.spec)?;
        dz.view_mut((self.margin_dim(), 0), (hj.nrows(), n)).copy_from(&hj);
        // d p_l / d theta_k = p_l (delta_lk - p_k)
        let pv = p.values();
        let mut dp = DMatrix::zeros(n, self.dim());
        for l in 0..n {
            for k in 0..self.dim() {
                dp[(l, k)] = pv[l] * (if l == k { 1.0 } else { 0.0 } - pv[k]);
            }
        }
        Ok(dz * dp)
    }

    /// Newton iteration for `zeta(theta) = target`, step-halving on the
    /// residual norm so that every iterate is a strictly positive table.
    pub fn solve(&self, target: &DVector<f64>, seed: DVector<f64>, opts: &InversionOptions) -> Result<DVector<f64>> {
        let mut theta = seed;
        let mut p = self.table(&theta)?;
        let mut res = self.zeta(&p)? - target;
        for _ in 0..opts.max_iter {
            let err = res.amax();
            if err <= opts.tol {
                return Ok(theta);
            }
            let jac = self.jacobian(&p)?;
            let step = match jac.lu().solve(&res) {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => return Err(Error::SimplexEscape),
            };
            let norm = res.norm();
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand = &theta - &step * t;
                if let Ok(q) = self.table(&cand) {
                    if let Ok(z) = self.zeta(&q) {
                        let r2 = z - target;
                        if r2.norm() < norm * (1.0 - 1e-4 * t) {
                            accepted = Some((cand, q, r2));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((cand, q, r2)) => {
                    theta = cand;
                    p = q;
                    res = r2;
                }
                None if err <= STALL_TOL => return Ok(theta),
                None => return Err(Error::SimplexEscape),
            }
        }
        if res.amax() <= opts.tol {
            Ok(theta)
        } else {
            Err(Error::NonConvergence(opts.max_iter))
        }
    }

    /// Like [`CoordinateMap::solve`] from the independence table, falling back
    /// to continuation in the interactions when the direct solve fails.
    pub fn solve_from_independence(&self, target: &DVector<f64>, opts: &InversionOptions) -> Result<DVector<f64>> {
        let md = self.margin_dim();
        let m = coords_to_margins(&target.as_slice()[..self.rows - 1], &target.as_slice()[self.rows - 1..md]);
        let seed = self.theta(&crate::table::independence_table(&m)?);
        match self.solve(target, seed.clone(), opts) {
            Ok(t) => return Ok(t),
            Err(Error::NonConvergence(_)) | Err(Error::SimplexEscape) => {}
            Err(e) => return Err(e),
        }
        let partial = |s: f64| {
            let mut z = target.clone();
            z.rows_mut(md, target.len() - md).scale_mut(s);
            z
        };
        let mut theta = seed;
        let mut done = 0.0f64;
        let mut step = 0.25;
        let mut last_err = Error::SimplexEscape;
        while done < 1.0 {
            if step < 1e-4 {
                return Err(last_err);
            }
            let next = (done + step).min(1.0);
            match self.solve(&partial(next), theta.clone(), opts) {
                Ok(t) => {
                    theta = t;
                    done = next;
                    step *= 2.0;
                }
                Err(e) => {
                    last_err = e;
                    step *= 0.5;
                }
            }
        }
        Ok(theta)
    }
}

/// `(ln(row_i / row_r), ln(col_j / col_c))`.
pub fn margin_coords(m: &Margins) -> (Vec<f64>, Vec<f64>) {
    let lr = |v: &[f64]| {
        let last = v[v.len() - 1].ln();
        v[..v.len() - 1].iter().map(|x| x.ln() - last).collect::<Vec<_>>()
    };
    (lr(&m.row), lr(&m.col))
}

pub fn coords_to_margins(row: &[f64], col: &[f64]) -> Margins {
    let softmax = |v: &[f64]| {
        let max = v.iter().copied().fold(0.0f64, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).chain(std::iter::once((-max).exp())).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    Margins { row: softmax(row), col: softmax(col) }
}

/// Strictly positive table with the interactions implied by `params` and the
/// given margins (or the margins encoded in `params` when `None`).
///
/// The log-linear local case is solved in closed form followed by
/// proportional fitting; every other case by Newton inversion of the
/// coordinate map.
pub fn table_from_params(
    params: &RCParams,
    spec: &ModelSpec,
    target: Option<&Margins>,
    opts: &InversionOptions,
) -> Result<ProbabilityTable> {
    let (r, c) = (params.mu.len(), params.nu.len());
    let h = super::interaction_from_scores(params, spec)?;
    let m = match target {
        Some(m) => {
            if m.row.len() != r || m.col.len() != c {
                return Err(Error::DimensionMismatch { expected: (r, c), found: (m.row.len(), m.col.len()) });
            }
            if !m.is_positive() {
                return Err(Error::ZeroMargin);
            }
            m.clone()
        }
        None => coords_to_margins(&params.row_coord, &params.col_coord),
    };
    if spec.interaction.is_log_linear_local() {
        // ln p_ij = sum_{a<i, b<j} H_ab has exactly the requested local log odds ratios.
        let mut logp = vec![0.0; r * c];
        for i in 1..r {
            for j in 1..c {
                logp[i * c + j] = logp[(i - 1) * c + j] + logp[i * c + j - 1] - logp[(i - 1) * c + j - 1]
                    + h.values()[(i - 1) * (c - 1) + (j - 1)];
            }
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let seed = ProbabilityTable::from_positive(r, c, logp.iter().map(|v| (v - max).exp()).collect())
            .map_err(|_| Error::SimplexEscape)?;
        return ipf_adjust(&seed, &m, opts.tol.max(1e-15), IPF_MAX_ITER);
    }
    let map = CoordinateMap::new(r, c, spec.interaction);
    let (rc, cc) = margin_coords(&m);
    let target: Vec<f64> = rc.into_iter().chain(cc).chain(h.values().iter().copied()).collect();
    let theta = map.solve_from_independence(&DVector::from_vec(target), opts)?;
    map.table(&theta)
}

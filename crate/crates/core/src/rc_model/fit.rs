//! Maximum-likelihood fitting.
//!
//! The free parameters are the margin coordinates (unless pinned) and a
//! factorisation `H = A B'` with `A` of size (r-1) x K and `B` of size
//! (c-1) x K. Each evaluation inverts the coordinate map to get the table.
//! The outer iteration is Fisher scoring with Levenberg damping; the
//! information matrix is pulled back from the multinomial information in
//! log-ratio coordinates through the inverse coordinate Jacobian.

use nalgebra::{DMatrix, DVector};

use super::coords::{margin_coords, CoordinateMap, InversionOptions};
use super::identify::{identify, init_params};
use super::{deviance, dof, log_likelihood, FitResult, ModelSpec, RCParams};
use crate::error::{Error, Result};
use crate::interactions::InteractionMatrix;
use crate::table::{margins, to_probability, ContingencyTable, Margins};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on the max-norm of the gradient of the mean
    /// log-likelihood.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Extra starts from deterministically perturbed scores.
    pub restarts: usize,
    /// Pin the margins to the observed ones instead of estimating them.
    pub fix_margins: bool,
    /// Added to every cell before fitting.
    pub smoothing: f64,
    pub inversion: InversionOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-7,
            max_iter: 500,
            restarts: 3,
            fix_margins: false,
            smoothing: 0.0,
            inversion: InversionOptions::default(),
        }
    }
}

/// Negative mean log-likelihood as a function of the free parameters.
#[derive(Debug, Clone)]
pub struct OuterObjective {
    map: CoordinateMap,
    k: usize,
    proportions: DVector<f64>,
    fixed_coords: Option<Vec<f64>>,
    inversion: InversionOptions,
}

struct State {
    psi: DVector<f64>,
    theta: DVector<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

impl OuterObjective {
    pub fn new(t: &ContingencyTable, spec: &ModelSpec, fix_margins: bool, inversion: InversionOptions) -> Result<Self> {
        spec.check(t.rows(), t.cols())?;
        let total = t.total();
        let proportions = DVector::from_iterator(t.counts().len(), t.counts().iter().map(|n| n / total));
        let fixed_coords = fix_margins.then(|| {
            let (r, c) = margin_coords(&Margins::of_table(t));
            r.into_iter().chain(c).collect()
        });
        Ok(Self {
            map: CoordinateMap::new(t.rows(), t.cols(), spec.interaction),
            k: spec.k,
            proportions,
            fixed_coords,
            inversion,
        })
    }

    fn n_coords(&self) -> usize {
        if self.fixed_coords.is_some() {
            0
        } else {
            self.map.margin_dim()
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_coords() + (self.map.rows - 1 + self.map.cols - 1) * self.k
    }

    fn factors(&self, psi: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (r1, c1, k) = (self.map.rows - 1, self.map.cols - 1, self.k);
        let off = self.n_coords();
        let a = DMatrix::from_row_slice(r1, k, &psi.as_slice()[off..off + r1 * k]);
        let b = DMatrix::from_row_slice(c1, k, &psi.as_slice()[off + r1 * k..]);
        (a, b)
    }

    /// Target coordinates `[margin coords; vec(A B')]`.
    pub fn zeta(&self, psi: &DVector<f64>) -> DVector<f64> {
        let (a, b) = self.factors(psi);
        let h = &a * b.transpose();
        let coords: Vec<f64> = match &self.fixed_coords {
            Some(c) => c.clone(),
            None => psi.as_slice()[..self.map.margin_dim()].to_vec(),
        };
        let hv = (0..h.nrows()).flat_map(|i| (0..h.ncols()).map(move |j| (i, j))).map(|ij| h[ij]);
        DVector::from_iterator(self.map.dim(), coords.into_iter().chain(hv))
    }

    fn pack(&self, coords: &[f64], a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
        let mut v: Vec<f64> = if self.fixed_coords.is_some() { vec![] } else { coords.to_vec() };
        for m in [a, b] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    v.push(m[(i, j)]);
                }
            }
        }
        DVector::from_vec(v)
    }

    fn value_at(&self, theta: &DVector<f64>) -> Result<f64> {
        let p = self.map.table(theta)?;
        Ok(-p
            .values()
            .iter()
            .zip(self.proportions.iter())
            .filter(|(_, f)| **f > 0.0)
            .map(|(q, f)| f * q.ln())
            .sum::<f64>())
    }

    /// Objective value; the inner table is solved from scratch.
    pub fn value(&self, psi: &DVector<f64>) -> Result<f64> {
        let theta = self.map.solve_from_independence(&self.zeta(psi), &self.inversion)?;
        self.value_at(&theta)
    }

    /// Analytical gradient of [`OuterObjective::value`].
    pub fn gradient(&self, psi: &DVector<f64>) -> Result<DVector<f64>> {
        let theta = self.map.solve_from_independence(&self.zeta(psi), &self.inversion)?;
        Ok(self.gradient_and_information(psi, &theta)?.0)
    }

    fn d_zeta(&self, psi: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = self.factors(psi);
        let (r1, c1, k) = (a.nrows(), b.nrows(), self.k);
        let nc = self.n_coords();
        let md = self.map.margin_dim();
        let mut d = DMatrix::zeros(self.map.dim(), self.n_params());
        for i in 0..nc {
            d[(i, i)] = 1.0;
        }
        for i in 0..r1 {
            for j in 0..c1 {
                let row = md + i * c1 + j;
                for l in 0..k {
                    d[(row, nc + i * k + l)] = b[(j, l)];
                    d[(row, nc + r1 * k + j * k + l)] = a[(i, l)];
                }
            }
        }
        d
    }

    fn gradient_and_information(
        &self,
        psi: &DVector<f64>,
        theta: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let p = self.map.table(theta)?;
        let jac = self.map.jacobian(&p)?;
        let y = jac.lu().solve(&self.d_zeta(psi)).ok_or(Error::SimplexEscape)?;
        let n = self.map.dim();
        let pf = DVector::from_iterator(n, p.values()[..n].iter().copied());
        let score = DVector::from_iterator(n, (0..n).map(|i| self.proportions[i] - pf[i]));
        let info_theta = DMatrix::from_diagonal(&pf) - &pf * pf.transpose();
        let grad = -(y.transpose() * score);
        let info = y.transpose() * info_theta * &y;
        Ok((grad, info))
    }

    fn start(&self, psi: DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        // Shrink the interactions toward zero until the inner map is solvable.
        let mut psi = psi;
        let nc = self.n_coords();
        for _ in 0..40 {
            match self.map.solve_from_independence(&self.zeta(&psi), &self.inversion) {
                Ok(theta) => return Ok((psi, theta)),
                Err(Error::SimplexEscape) | Err(Error::NonConvergence(_)) => {
                    psi.rows_mut(nc, psi.len() - nc).scale_mut(0.5f64.sqrt());
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::InfeasibleSpec("no feasible starting point".into()))
    }

    fn optimize(&self, psi0: DVector<f64>, opts: &FitOptions) -> Result<State> {
        let (mut psi, mut theta) = self.start(psi0)?;
        let mut value = self.value_at(&theta)?;
        let mut damping = 1e-3;
        let mut grad_norm = f64::INFINITY;
        for iter in 0..opts.max_iter {
            let (grad, info) = self.gradient_and_information(&psi, &theta)?;
            grad_norm = grad.amax();
            let ridge = 1e-12 * info.trace().abs().max(1e-300);
            if grad_norm <= opts.tol_grad && scoring_decrement(&info, &grad, ridge) <= DECREMENT_TOL {
                return Ok(State { psi, theta, value, grad_norm, iterations: iter, converged: true });
            }
            let mut moved = false;
            while damping < 1e16 {
                let mut lhs = info.clone();
                for i in 0..lhs.nrows() {
                    lhs[(i, i)] += damping * (info[(i, i)] + ridge) + ridge;
                }
                let step = match lhs.cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => {
                        damping *= 10.0;
                        continue;
                    }
                };
                let cand = &psi + &step;
                let trial = self
                    .map
                    .solve(&self.zeta(&cand), theta.clone(), &self.inversion)
                    .and_then(|t| self.value_at(&t).map(|v| (t, v)));
                match trial {
                    Ok((t, v)) if v <= value => {
                        psi = cand;
                        theta = t;
                        value = v;
                        damping = (damping * 0.1).max(1e-12);
                        moved = true;
                        break;
                    }
                    _ => damping *= 10.0,
                }
            }
            if !moved {
                let converged = grad_norm <= opts.tol_grad;
                return Ok(State { psi, theta, value, grad_norm, iterations: iter, converged });
            }
        }
        Ok(State { psi, theta, value, grad_norm, iterations: opts.max_iter, converged: false })
    }

    /// Packs model parameters into the free-parameter vector.
    pub fn psi_from_params(&self, params: &RCParams) -> DVector<f64> {
        let (r1, c1, k) = (self.map.rows - 1, self.map.cols - 1, self.k);
        // A bilinear start with a zero column is a saddle point; keep every
        // dimension slightly active.
        let top = params.phi.first().copied().unwrap_or(0.0);
        let mut a = DMatrix::zeros(r1, k);
        let mut b = DMatrix::zeros(c1, k);
        for l in 0..k {
            let s = params.phi[l].max(1e-3 * top).max(1e-4).sqrt();
            for i in 0..r1 {
                a[(i, l)] = s * (params.mu[i + 1][l] - params.mu[i][l]);
            }
            for j in 0..c1 {
                b[(j, l)] = s * (params.nu[j + 1][l] - params.nu[j][l]);
            }
        }
        let coords: Vec<f64> = params.row_coord.iter().chain(&params.col_coord).copied().collect();
        self.pack(&coords, &a, &b)
    }
}

// Near a rank-deficient solution the gradient of the bilinear factors
// vanishes faster than the factors themselves, so the gradient test alone
// stops early; the predicted scoring decrease keeps shrinking them.
const DECREMENT_TOL: f64 = 1e-16;

fn scoring_decrement(info: &DMatrix<f64>, grad: &DVector<f64>, ridge: f64) -> f64 {
    let mut m = info.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    match m.cholesky() {
        Some(ch) => grad.dot(&ch.solve(grad)),
        None => f64::INFINITY,
    }
}

// Deterministic +/-1 pattern for restart perturbations.
fn perturbation_sign(index: usize, restart: usize) -> f64 {
    // splitmix64 finaliser
    let mut z = ((restart as u64) << 32 | index as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    if z & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maximum-likelihood fit of one member of the model family.
pub fn fit(t: &ContingencyTable, spec: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    spec.check(t.rows(), t.cols())?;
    // Validates zero cells against the smoothing policy.
    to_probability(t, opts.smoothing)?;
    let data = if opts.smoothing > 0.0 {
        t.with_counts(t.to_rows().iter().map(|r| r.iter().map(|v| v + opts.smoothing).collect()).collect())?
    } else {
        t.clone()
    };
    let objective = OuterObjective::new(&data, spec, opts.fix_margins, opts.inversion)?;
    let init = init_params(&data, spec, 0.0)?;
    let psi0 = objective.psi_from_params(&init);
    let nc = objective.n_coords();

    let mut best = objective.optimize(psi0.clone(), opts)?;
    let mut total_iter = best.iterations;
    for restart in 1..=opts.restarts {
        let mut psi = psi0.clone();
        for i in nc..psi.len() {
            psi[i] *= 1.0 + 0.05 * perturbation_sign(i, restart);
        }
        match objective.optimize(psi, opts) {
            Ok(state) => {
                total_iter += state.iterations;
                let better = state.value < best.value - 1e-13
                    || (state.converged && !best.converged && state.value <= best.value + 1e-13);
                if better {
                    best = state;
                }
            }
            Err(Error::InfeasibleSpec(_)) | Err(Error::SimplexEscape) => {}
            Err(e) => return Err(e),
        }
    }

    let map = CoordinateMap::new(t.rows(), t.cols(), spec.interaction);
    let fitted = map.table(&best.theta)?;
    let (a, b) = objective.factors(&best.psi);
    let h_mat = &a * b.transpose();
    let h = InteractionMatrix::new(
        spec.interaction,
        h_mat.nrows(),
        h_mat.ncols(),
        (0..h_mat.nrows()).flat_map(|i| (0..h_mat.ncols()).map(move |j| (i, j))).map(|ij| h_mat[ij]).collect(),
    )?;
    let params = identify(&h, &margins(&fitted), spec)?;
    let total = data.total();
    Ok(FitResult {
        spec: spec.clone(),
        params,
        expected_counts: fitted.scaled(total),
        deviance: deviance(&data, &fitted)?,
        dof: dof(t.rows(), t.cols(), spec.k)?,
        loglik: log_likelihood(&data, &fitted)?,
        fitted,
        total,
        converged: best.converged,
        iterations: total_iter,
        grad_norm: best.grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::interactions::{InteractionSpec, LogitType::*};

    #[test]
    fn saturated_fit_is_exact() {
        let spec = ModelSpec::new(3, InteractionSpec::new(L, G, 0.22).unwrap());
        let res = fit(&fixtures::table5(), &spec, &FitOptions { restarts: 0, ..Default::default() }).unwrap();
        assert!(res.deviance < 1e-6);
        assert_eq!(res.dof, 0);
        assert!(res.converged);
    }

    #[test]
    fn table7_log_linear() {
        let spec = ModelSpec::new(2, InteractionSpec::log_linear());
        let res = fit(&fixtures::table7(), &spec, &FitOptions::default()).unwrap();
        assert!(res.converged, "{res:?}");
        assert_eq!(res.dof, 1);
        let total: f64 = res.expected_counts.iter().flatten().sum();
        assert!((total - 27771.0).abs() < 1e-8);
    }

    #[test]
    fn rank_out_of_range() {
        let spec = ModelSpec::new(9, InteractionSpec::log_linear());
        assert!(matches!(fit(&fixtures::table5(), &spec, &FitOptions::default()), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn zero_cells_need_smoothing() {
        let t =
            ContingencyTable::from_rows(vec![vec![10.0, 0.0, 3.0], vec![2.0, 8.0, 5.0], vec![1.0, 4.0, 9.0]]).unwrap();
        let spec = ModelSpec::new(1, InteractionSpec::log_linear());
        assert!(matches!(fit(&t, &spec, &FitOptions::default()), Err(Error::ZeroCell { .. })));
        let res = fit(&t, &spec, &FitOptions { smoothing: 0.5, ..Default::default() }).unwrap();
        assert!(res.converged);
        assert!((res.total - 46.5).abs() < 1e-12);
    }

    #[test]
    fn perturbation_pattern_is_mixed() {
        let signs: Vec<f64> = (0..16).map(|i| perturbation_sign(i, 1)).collect();
        assert!(signs.iter().any(|s| *s > 0.0) && signs.iter().any(|s| *s < 0.0));
        assert_ne!(signs, (0..16).map(|i| perturbation_sign(i, 2)).collect::<Vec<_>>());
    }
}

use nalgebra::{DMatrix, DVector};

use super::coords::margin_coords;
use super::{ModelSpec, RCParams};
use crate::error::Result;
use crate::interactions::{interaction_matrix, InteractionMatrix};
use crate::rc_model::dof;
use crate::table::{margins, to_probability, ContingencyTable, Margins};

/// Orthonormal basis (columns) of `{x : sum_i sqrt(w_i) x_i = 0}`.
fn centred_basis(w: &[f64]) -> DMatrix<f64> {
    let n = w.len();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        m[(i, 0)] = w[i].sqrt();
    }
    let q = m.qr().q();
    q.columns(1, n - 1).into_owned()
}

/// Maps differences back to weighted-centred scores: column `a` of the
/// result is the indicator of categories above cut `a`, centred under `w`.
fn cumulate(w: &[f64]) -> DMatrix<f64> {
    let n = w.len();
    DMatrix::from_fn(n, n - 1, |i, a| {
        let above: f64 = w[a + 1..].iter().sum();
        if i > a {
            1.0 - above
        } else {
            -above
        }
    })
}

/// Rank-`spec.k` identified scores and coefficients for an interaction
/// matrix, with margin coordinates taken from `m`.
///
/// Components beyond the rank of `h` are dropped; `h` is expected to have
/// rank at most K (otherwise this is the best weighted rank-K approximation
/// in the centred score space).
pub fn identify(h: &InteractionMatrix, m: &Margins, spec: &ModelSpec) -> Result<RCParams> {
    let (r, c) = (h.rows() + 1, h.cols() + 1);
    let k = spec.k;
    dof(r, c, k)?;
    let (wr, wc) = spec.weights.resolve(r, c)?;
    // Doubly centred r x c matrix X with D X D' = H.
    let x = cumulate(&wr) * h.to_matrix() * cumulate(&wc).transpose();
    let sr = DMatrix::from_diagonal(&DVector::from_iterator(r, wr.iter().map(|v| v.sqrt())));
    let sc = DMatrix::from_diagonal(&DVector::from_iterator(c, wc.iter().map(|v| v.sqrt())));
    let (qr, qc) = (centred_basis(&wr), centred_basis(&wc));
    let core = qr.transpose() * &sr * x * &sc * &qc;
    let svd = core.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    // nalgebra does not sort singular values.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut mu = vec![vec![0.0; k]; r];
    let mut nu = vec![vec![0.0; k]; c];
    let mut phi = vec![0.0; k];
    for (dim, &s) in order.iter().take(k).enumerate() {
        let uu = &qr * u.column(s);
        let vv = &qc * vt.row(s).transpose();
        let mut col_mu: Vec<f64> = (0..r).map(|i| uu[i] / wr[i].sqrt()).collect();
        let mut col_nu: Vec<f64> = (0..c).map(|j| vv[j] / wc[j].sqrt()).collect();
        if needs_flip(&col_mu) {
            col_mu.iter_mut().for_each(|v| *v = -*v);
            col_nu.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..r {
            mu[i][dim] = col_mu[i];
        }
        for j in 0..c {
            nu[j][dim] = col_nu[j];
        }
        phi[dim] = svd.singular_values[s].max(0.0);
    }
    let (row_coord, col_coord) = margin_coords(m);
    Ok(RCParams { mu, nu, phi, row_coord, col_coord })
}

// First non-negligible increment of the scores must be positive.
fn needs_flip(scores: &[f64]) -> bool {
    let scale = scores.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    scores.windows(2).map(|w| w[1] - w[0]).find(|d| d.abs() > 1e-9 * scale.max(1e-300)).is_some_and(|d| d < 0.0)
}

/// Starting values: rank-K decomposition of the observed interactions and
/// observed margin coordinates.
pub fn init_params(t: &ContingencyTable, spec: &ModelSpec, smoothing: f64) -> Result<RCParams> {
    spec.check(t.rows(), t.cols())?;
    let p = to_probability(t, smoothing)?;
    let h0 = interaction_matrix(&p, &spec.interaction)?;
    identify(&h0, &margins(&p), spec)
}

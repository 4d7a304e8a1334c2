use rcassoc::interactions::interaction_matrix;
use rcassoc::rc_model::{fit, interaction_from_scores};
use rcassoc::{fixtures, ContingencyTable, FitOptions, InteractionSpec, LogitType, ModelSpec};

use LogitType::{C, G, L};

fn reference_cases() -> Vec<(ContingencyTable, LogitType, LogitType, f64)> {
    vec![(fixtures::table5(), L, G, 0.22), (fixtures::table6(), C, L, -0.06), (fixtures::table7(), G, G, -1.21)]
}

fn spec(k: usize, rt: LogitType, ct: LogitType, lambda: f64) -> ModelSpec {
    ModelSpec::new(k, InteractionSpec::new(rt, ct, lambda).unwrap())
}

#[test]
fn fit_commutes_with_relabelling() {
    let t = fixtures::table7();
    let perm = [2usize, 0, 3, 1];
    let rows: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| t.get(i, j)).collect()).collect();
    let labels: Vec<String> = perm.iter().map(|&i| t.row_labels()[i].clone()).collect();
    let permuted = ContingencyTable::new(labels.clone(), labels, rows).unwrap();
    let s = ModelSpec::new(2, InteractionSpec::log_linear());
    let a = fit(&t, &s, &FitOptions::default()).unwrap();
    let b = fit(&permuted, &s, &FitOptions::default()).unwrap();
    assert!((a.deviance - b.deviance).abs() < 1e-6, "{} vs {}", a.deviance, b.deviance);
    for (pi, &i) in perm.iter().enumerate() {
        for (pj, &j) in perm.iter().enumerate() {
            assert!((a.expected_counts[i][j] - b.expected_counts[pi][pj]).abs() < 1e-3);
        }
    }
}

#[test]
fn log_linear_fit_reproduces_margins() {
    for (t, _, _, _) in reference_cases() {
        let res = fit(&t, &ModelSpec::new(1, InteractionSpec::log_linear()), &FitOptions::default()).unwrap();
        let fitted_rows: Vec<f64> = res.expected_counts.iter().map(|r| r.iter().sum()).collect();
        for (a, b) in fitted_rows.iter().zip(t.row_totals()) {
            assert!((a - b).abs() <= 0.5);
        }
        for (j, b) in t.col_totals().iter().enumerate() {
            let a: f64 = res.expected_counts.iter().map(|r| r[j]).sum();
            assert!((a - b).abs() <= 0.5);
        }
    }
}

#[test]
fn scores_reproduce_fitted_interactions() {
    for (t, rt, ct, lambda) in reference_cases() {
        let s = spec(2, rt, ct, lambda);
        let res = fit(&t, &s, &FitOptions::default()).unwrap();
        let from_scores = interaction_from_scores(&res.params, &s).unwrap();
        let direct = interaction_matrix(&res.fitted, &s.interaction).unwrap();
        for (a, b) in from_scores.values().iter().zip(direct.values()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn higher_rank_never_fits_worse() {
    for (t, rt, ct, lambda) in reference_cases() {
        let one = fit(&t, &spec(1, rt, ct, lambda), &FitOptions::default()).unwrap();
        let two = fit(&t, &spec(2, rt, ct, lambda), &FitOptions::default()).unwrap();
        assert!(two.deviance <= one.deviance + 1e-8);
    }
}

#[test]
fn saturated_rank_is_exact() {
    for (t, rt, ct, lambda) in reference_cases() {
        let res = fit(&t, &spec(3, rt, ct, lambda), &FitOptions::default()).unwrap();
        assert_eq!(res.dof, 0);
        assert!(res.deviance <= 1e-6);
    }
}

#[test]
fn margin_fixed_fit_keeps_observed_margins() {
    let t = fixtures::table6();
    let opts = FitOptions { fix_margins: true, ..FitOptions::default() };
    let res = fit(&t, &spec(2, C, L, -0.06), &opts).unwrap();
    assert!(res.converged);
    for (a, b) in res.expected_counts.iter().map(|r| r.iter().sum::<f64>()).zip(t.row_totals()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn zero_cells_need_smoothing() {
    let t = ContingencyTable::from_rows(vec![vec![10.0, 0.0, 3.0], vec![4.0, 8.0, 6.0], vec![1.0, 5.0, 12.0]]).unwrap();
    let s = ModelSpec::new(1, InteractionSpec::log_linear());
    assert!(fit(&t, &s, &FitOptions::default()).is_err());
    let res = fit(&t, &s, &FitOptions { smoothing: 0.5, ..FitOptions::default() }).unwrap();
    assert!(res.converged);
    assert!((res.total - 53.5).abs() < 1e-12);
}

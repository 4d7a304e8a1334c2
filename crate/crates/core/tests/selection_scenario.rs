use rcassoc::interactions::interaction_matrix;
use rcassoc::rc_model::{fit, interaction_from_scores, InversionOptions};
use rcassoc::scenario::{scale_association, MarginPolicy, ScenarioSpec};
use rcassoc::selection::{select_best, sweep, SelectionPolicy, SweepGrid, SweepOptions};
use rcassoc::table::{independence_table, local_log_odds, Margins};
use rcassoc::{fixtures, Error, FitOptions, InteractionSpec, LogitType, ModelSpec, ProbabilityTable};

use LogitType::{G, L};

#[test]
fn mobility_sweep_finds_reference_lambda() {
    let t = fixtures::table7();
    let grid = SweepGrid::new(vec![G], vec![G], vec![2]).with_lambda(-2.0, 0.0, 0.01);
    let res = sweep(&t, &grid, &SweepOptions::default()).unwrap();
    assert_eq!(res.records.len(), 201);
    let best = &res.records[res.best.unwrap()];
    assert!((best.spec.interaction.lambda + 1.21).abs() <= 0.05, "best lambda {}", best.spec.interaction.lambda);
    assert_eq!(best.dof, 1);
    assert!(best.deviance.unwrap() < 0.02);
}

#[test]
fn sweep_is_deterministic_and_best_is_minimal() {
    let t = fixtures::table6();
    let grid = SweepGrid::new(vec![LogitType::C], vec![L, G], vec![1, 2]).with_lambda(-0.5, 0.5, 0.1);
    let a = sweep(&t, &grid, &SweepOptions::default()).unwrap();
    let b = sweep(&t, &grid, &SweepOptions { threads: Some(2), ..SweepOptions::default() }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    let chosen = select_best(&a, &SelectionPolicy::default()).unwrap();
    for r in a.records.iter().filter(|r| r.converged && r.spec.k == chosen.record.spec.k) {
        assert!(chosen.record.deviance.unwrap() <= r.deviance.unwrap() + 1e-12);
    }
}

#[test]
fn empty_grid_is_rejected() {
    let grid = SweepGrid::new(vec![], vec![L], vec![1]);
    assert_eq!(sweep(&fixtures::table5(), &grid, &SweepOptions::default()), Err(Error::EmptyGrid));
}

fn scenarios(factors: Vec<f64>, spec: ModelSpec) -> (rcassoc::FitResult, Vec<rcassoc::ScenarioTable>) {
    let t = fixtures::table5();
    let base = fit(&t, &spec, &FitOptions::default()).unwrap();
    let s = ScenarioSpec { scale_factors: factors, margin_policy: MarginPolicy::Observed, total: None };
    let out = scale_association(&t, &base, &s, &InversionOptions::default()).unwrap();
    (base, out)
}

#[test]
fn scenarios_keep_observed_totals() {
    let t = fixtures::table5();
    let (base, out) = scenarios(vec![1.0, 0.5, 2.5], ModelSpec::new(2, InteractionSpec::new(L, G, 0.22).unwrap()));
    for s in &out {
        assert_eq!(s.counts.row_totals(), t.row_totals());
        assert_eq!(s.counts.col_totals(), t.col_totals());
        assert!(s.counts.counts().iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
    }
    assert_eq!(out[0].counts.row_totals()[0], 3864.0);
    assert_eq!(out[0].counts.row_totals()[3], 4774.0);
    // Observed margins differ slightly from the fitted ones for this model.
    for (got, want) in out[0].counts.to_rows().iter().flatten().zip(base.expected_counts.iter().flatten()) {
        assert!((got - want).abs() <= 1.25);
    }
}

#[test]
fn unit_scale_with_fitted_margins_rounds_the_fit() {
    let t = fixtures::table5();
    let base = fit(&t, &ModelSpec::new(2, InteractionSpec::new(L, G, 0.22).unwrap()), &FitOptions::default()).unwrap();
    let s = ScenarioSpec { scale_factors: vec![1.0], margin_policy: MarginPolicy::Fitted, total: None };
    let out = scale_association(&t, &base, &s, &InversionOptions::default()).unwrap();
    for (got, want) in out[0].counts.to_rows().iter().flatten().zip(base.expected_counts.iter().flatten()) {
        assert!((got - want).abs() < 1.0);
    }
}

#[test]
fn log_linear_scenario_scales_interactions() {
    let spec = ModelSpec::new(2, InteractionSpec::new(G, G, 0.0).unwrap());
    let (base, out) = scenarios(vec![0.5, 1.7], spec.clone());
    for s in &out {
        let p = ProbabilityTable::from_rows(&s.expected).unwrap();
        let got = interaction_matrix(&p, &spec.interaction).unwrap();
        let want = interaction_from_scores(&base.params.scale_association(s.factor), &spec).unwrap();
        for (a, b) in got.values().iter().zip(want.values()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b} at s={}", s.factor);
        }
    }
}

#[test]
fn zero_scale_gives_independence() {
    let t = fixtures::table5();
    let (_, out) = scenarios(vec![0.0], ModelSpec::new(2, InteractionSpec::new(L, G, 0.22).unwrap()));
    let p = ProbabilityTable::from_rows(&out[0].expected).unwrap();
    let indep = independence_table(&Margins::of_table(&t)).unwrap();
    for (a, b) in p.values().iter().zip(indep.values()) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!(local_log_odds(&p).iter().all(|v| v.abs() < 1e-8));
}

#[test]
fn fitted_margin_policy_with_custom_total() {
    let t = fixtures::table7();
    let base = fit(&t, &ModelSpec::new(2, InteractionSpec::new(G, G, -1.21).unwrap()), &FitOptions::default()).unwrap();
    let s = ScenarioSpec { scale_factors: vec![2.0], margin_policy: MarginPolicy::Fitted, total: Some(1000.0) };
    let out = scale_association(&t, &base, &s, &InversionOptions::default()).unwrap();
    assert_eq!(out[0].counts.total(), 1000.0);
}

#[test]
fn negative_scale_rejected() {
    let t = fixtures::table5();
    let base = fit(&t, &ModelSpec::new(1, InteractionSpec::log_linear()), &FitOptions::default()).unwrap();
    let s = ScenarioSpec { scale_factors: vec![-1.0], margin_policy: MarginPolicy::Observed, total: None };
    assert!(matches!(scale_association(&t, &base, &s, &InversionOptions::default()), Err(Error::InvalidScenario(_))));
}

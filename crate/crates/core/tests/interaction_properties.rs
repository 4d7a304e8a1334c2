use proptest::prelude::*;

use rcassoc::interactions::{altham_distance, f_lambda, interaction_matrix, positivity_report};
use rcassoc::rc_model::{identify, table_from_params, InversionOptions};
use rcassoc::table::{ipf_adjust, margins, to_probability, IPF_MAX_ITER};
use rcassoc::{fixtures, InteractionSpec, LogitType, Margins, ModelSpec, ProbabilityTable};

fn positive_table() -> impl Strategy<Value = ProbabilityTable> {
    (2usize..6, 2usize..6).prop_flat_map(|(r, c)| {
        proptest::collection::vec(0.05f64..10.0, r * c)
            .prop_map(move |v| ProbabilityTable::from_positive(r, c, v).unwrap())
    })
}

fn logit_type() -> impl Strategy<Value = LogitType> {
    prop_oneof![Just(LogitType::L), Just(LogitType::G), Just(LogitType::C)]
}

// Independent oracle: collapse the table into the 2 x 2 block by summing
// cells directly, then take the log cross-product ratio.
fn block_log_odds(p: &ProbabilityTable, a: usize, b: usize, rt: LogitType, ct: LogitType) -> f64 {
    let (r, c) = p.shape();
    let in_event = |t: LogitType, n: usize, cut: usize, k: usize, second: bool| -> bool {
        let k = k + 1;
        match (t, second) {
            (LogitType::L, false) => k == cut,
            (LogitType::L, true) => k == cut + 1,
            (LogitType::G, false) => k <= cut,
            (LogitType::C, false) => k == cut,
            (_, true) => k > cut && k <= n,
        }
    };
    let mut q = [[0.0; 2]; 2];
    for i in 0..r {
        for j in 0..c {
            for (u, su) in [false, true].into_iter().enumerate() {
                for (v, sv) in [false, true].into_iter().enumerate() {
                    if in_event(rt, r, a, i, su) && in_event(ct, c, b, j, sv) {
                        q[u][v] += p.get(i, j);
                    }
                }
            }
        }
    }
    (q[0][0] * q[1][1] / (q[0][1] * q[1][0])).ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_linear_matches_collapsed_odds(p in positive_table(), rt in logit_type(), ct in logit_type()) {
        let spec = InteractionSpec::new(rt, ct, 0.0).unwrap();
        let h = interaction_matrix(&p, &spec).unwrap();
        let (r, c) = p.shape();
        for a in 1..r {
            for b in 1..c {
                let want = block_log_odds(&p, a, b, rt, ct);
                prop_assert!((h.at(a, b) - want).abs() <= 1e-10, "({a},{b}) {} vs {want}", h.at(a, b));
            }
        }
    }

    #[test]
    fn local_log_linear_ignores_rescaling(
        p in positive_table(),
        seed in proptest::collection::vec(0.05f64..20.0, 12),
    ) {
        let (r, c) = p.shape();
        let v: Vec<f64> = (0..r * c).map(|k| p.values()[k] * seed[k / c] * seed[6 + k % c]).collect();
        let q = ProbabilityTable::from_positive(r, c, v).unwrap();
        let spec = InteractionSpec::log_linear();
        let (hp, hq) = (interaction_matrix(&p, &spec).unwrap(), interaction_matrix(&q, &spec).unwrap());
        for (a, b) in hp.values().iter().zip(hq.values()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn f_lambda_increasing(x in 0.01f64..50.0, dx in 1e-6f64..5.0, lambda in -5.0f64..5.0) {
        prop_assert!(f_lambda(x + dx, lambda).unwrap() > f_lambda(x, lambda).unwrap());
        prop_assert!(f_lambda(1.0, lambda).unwrap().abs() < 1e-15);
    }

    #[test]
    fn altham_metric_properties(p in positive_table(), raw in proptest::collection::vec(0.05f64..10.0, 25)) {
        let (r, c) = p.shape();
        let q = ProbabilityTable::from_positive(r, c, raw[..r * c].to_vec()).unwrap();
        let d = altham_distance(&p, &q).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - altham_distance(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(altham_distance(&p, &p).unwrap(), 0.0);
        let m = Margins::new(raw[..r].to_vec(), raw[r..r + c].to_vec()).unwrap();
        let moved = ipf_adjust(&p, &m, 1e-13, IPF_MAX_ITER).unwrap();
        prop_assert!(altham_distance(&p, &moved).unwrap() <= 1e-9);
    }

    #[test]
    fn local_log_linear_round_trip(p in positive_table()) {
        let (r, c) = p.shape();
        let k = r.min(c) - 1;
        let spec = ModelSpec::new(k, InteractionSpec::log_linear());
        let h = interaction_matrix(&p, &spec.interaction).unwrap();
        let params = identify(&h, &margins(&p), &spec).unwrap();
        let back = table_from_params(&params, &spec, Some(&margins(&p)), &InversionOptions::default()).unwrap();
        let h2 = interaction_matrix(&back, &spec.interaction).unwrap();
        for (a, b) in h.values().iter().zip(h2.values()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn mobility_table_interactions_positive_under_global_logits() {
    let p = to_probability(&fixtures::table7(), 0.0).unwrap();
    let h = interaction_matrix(&p, &InteractionSpec::new(LogitType::G, LogitType::G, 0.0).unwrap()).unwrap();
    let report = positivity_report(&h);
    assert!(report.all_nonneg);
    assert!(report.min_entry > 0.0);
}

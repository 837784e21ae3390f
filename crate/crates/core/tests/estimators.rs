mod common;

use common::*;
use proptest::prelude::*;
use survtree::tree::{fit_leaf_coefficient, node_error};
use survtree::{censoring_km, kaplan_meier, nelson_aalen, Observation};

fn outcomes() -> impl Strategy<Value = Vec<Observation>> {
    prop::collection::vec((1u32..10, any::<bool>()), 1..50).prop_map(|rows| {
        rows.into_iter()
            .map(|(t, e)| Observation::new(t as f64 * 0.5, e).unwrap())
            .collect()
    })
}

fn members() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0.01f64..5.0, any::<bool>()), 1..40)
}

proptest! {
    #[test]
    fn estimators_match_naive_sums(o in outcomes()) {
        let na = nelson_aalen(&o).unwrap();
        let km = kaplan_meier(&o).unwrap();
        let g = censoring_km(&o).unwrap();
        for t in probe_points(&o) {
            prop_assert!((na.eval(t) - naive_na(&o, t)).abs() <= 1e-12);
            prop_assert!((km.eval(t) - naive_km(&o, t)).abs() <= 1e-12);
            prop_assert!((g.eval(t) - naive_censoring_km(&o, t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn curves_are_monotone_and_bounded(o in outcomes()) {
        let na = nelson_aalen(&o).unwrap();
        let km = kaplan_meier(&o).unwrap();
        prop_assert!(na.values().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(km.values().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(km.values().iter().all(|v| (0.0..=1.0).contains(v)));
        // 1 - x <= exp(-x) factor by factor
        for t in probe_points(&o) {
            prop_assert!(km.eval(t) <= (-na.eval(t)).exp() + 1e-15);
        }
    }

    #[test]
    fn estimators_ignore_row_order(mut o in outcomes(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let before = (nelson_aalen(&o).unwrap(), kaplan_meier(&o).unwrap());
        o.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(before, (nelson_aalen(&o).unwrap(), kaplan_meier(&o).unwrap()));
    }

    #[test]
    fn node_error_matches_deviance_and_is_minimal(m in members(), scale in 0.2f64..5.0) {
        let theta = fit_leaf_coefficient(&m).unwrap();
        let err = node_error(&m, theta);
        prop_assert!(err >= -1e-12);
        prop_assert!((err - naive_leaf_error(&m)).abs() <= 1e-9 * (1.0 + err));
        if theta > 0.0 {
            prop_assert!(node_error(&m, theta * scale) >= err - 1e-9);
        }
    }

    #[test]
    fn splitting_never_increases_error(m in members(), cut in 0usize..40) {
        let cut = cut.min(m.len());
        let (a, b) = m.split_at(cut);
        let e = |s: &[(f64, bool)]| if s.is_empty() { 0.0 } else { node_error(s, fit_leaf_coefficient(s).unwrap()) };
        prop_assert!(e(a) + e(b) <= e(&m) + 1e-9);
    }
}

#[test]
fn uncensored_km_is_empirical_survival() {
    let o: Vec<Observation> = [3.0, 1.0, 2.0, 2.0, 5.0].iter().map(|&t| Observation::death(t)).collect();
    let km = kaplan_meier(&o).unwrap();
    for t in [0.5, 1.0, 2.0, 2.5, 3.0, 4.9, 5.0, 9.0] {
        let alive = o.iter().filter(|x| x.time > t).count() as f64 / 5.0;
        assert!((km.eval(t) - alive).abs() < 1e-15);
    }
    assert_eq!(censoring_km(&o).unwrap().eval(10.0), 1.0);
}

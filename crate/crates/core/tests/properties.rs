//! Property-based invariants of the allocator and the procedures.

use optimal_mdf::allocator::efficiency_of;
use optimal_mdf::oracle::bernoulli_tail_enumerate;
use optimal_mdf::procedures::antiranks;
use optimal_mdf::{
    decide_bh, decide_fdr_opt, decide_stepdown_sidak, decide_strong_fwer, decide_weak_fwer, generalized_pvalues,
    optimal_sizes, sidak_sizes, size_map, size_map_inverse, RocModel,
};
use proptest::prelude::*;

fn gammas(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..8.0, 1..=max_len)
}

fn panel(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|m| (prop::collection::vec(0.0f64..8.0, m), prop::collection::vec(0.0f64..=1.0, m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_sizes_exhaust_budget(g in gammas(40), alpha in 0.0005f64..0.6) {
        let a = optimal_sizes(&RocModel::from_gammas(&g).unwrap(), alpha).unwrap();
        prop_assert!(a.constraint_residual.abs() < 1e-10);
        prop_assert!(a.stationarity_residual.unwrap() < 1e-8);
        // Sizes are recovered from quantiles, so allow round-off above alpha.
        prop_assert!(a.sizes.iter().all(|&e| (0.0..=alpha + 1e-13).contains(&e)));
    }

    #[test]
    fn optimal_beats_sidak(g in gammas(30), alpha in 0.001f64..0.5) {
        let model = RocModel::from_gammas(&g).unwrap();
        let opt = optimal_sizes(&model, alpha).unwrap();
        prop_assert!(efficiency_of(&model, &opt.sizes, alpha).unwrap() >= 100.0 - 1e-9);
    }

    #[test]
    fn size_map_is_nondecreasing(g in gammas(12), a in 0.001f64..0.4, b in 0.001f64..0.4) {
        let model = RocModel::from_gammas(&g).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = optimal_sizes(&model, lo).unwrap().sizes;
        let large = optimal_sizes(&model, hi).unwrap().sizes;
        for (s, l) in small.iter().zip(&large) {
            prop_assert!(s <= &(l + 1e-15), "{s} > {l}");
        }
    }

    #[test]
    fn size_map_inverse_round_trip(g in gammas(6), alpha in 0.005f64..0.5, pick in 0usize..6) {
        let model = RocModel::from_gammas(&g).unwrap();
        let m = pick % g.len();
        let s = size_map(&model, alpha, m).unwrap();
        prop_assume!(s > 1e-12);
        let back = size_map_inverse(&model, m, s).unwrap();
        // The map is flat only where the size is zero, which was excluded.
        prop_assert!((size_map(&model, back, m).unwrap() - s).abs() <= 1e-9 * s.max(1e-3));
    }

    #[test]
    fn generalized_pvalues_solve_size_equation((g, s) in panel(8)) {
        let model = RocModel::from_gammas(&g).unwrap();
        let panel = generalized_pvalues(&model, &s).unwrap();
        for (m, &sm) in s.iter().enumerate() {
            let w = panel.w[m];
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(w + 1e-12 >= sm, "W below S: {w} < {sm}");
            if w > 1e-9 && w < 0.999 {
                let eta = size_map(&model, w, m).unwrap();
                prop_assert!((eta - sm).abs() <= 1e-8 * sm.max(1e-6), "eta(W)={eta} vs S={sm}");
            }
        }
    }

    #[test]
    fn weak_rule_rejects_exactly_w_below_alpha((g, s) in panel(8), alpha in 0.01f64..0.3) {
        let model = RocModel::from_gammas(&g).unwrap();
        let d = decide_weak_fwer(&model, &s, alpha).unwrap();
        let panel = generalized_pvalues(&model, &s).unwrap();
        for m in 0..s.len() {
            // Skip budgets that sit on a rejection boundary to rounding accuracy.
            if (panel.w[m] - alpha).abs() > 1e-9 {
                prop_assert_eq!(d.reject[m], panel.w[m] <= alpha);
            }
        }
    }

    #[test]
    fn stepwise_rules_reject_prefixes((g, s) in panel(15), q in 0.0f64..0.5) {
        let model = RocModel::from_gammas(&g).unwrap();
        let panel = generalized_pvalues(&model, &s).unwrap();
        let strong = decide_strong_fwer(&model, &s, q).unwrap();
        let fdr = decide_fdr_opt(&model, &s, q).unwrap();
        for d in [&strong, &fdr] {
            let expected: Vec<bool> = {
                let mut r = vec![false; s.len()];
                for &m in &panel.antiranks[..d.cutoff_index] {
                    r[m] = true;
                }
                r
            };
            prop_assert_eq!(&d.reject, &expected);
        }
    }

    #[test]
    fn baselines_reject_prefixes(s in prop::collection::vec(0.0f64..=1.0, 1..40), q in 0.0f64..0.5) {
        let bh = decide_bh(&s, q).unwrap();
        let sd = decide_stepdown_sidak(&s, q).unwrap();
        let order = antiranks(&s);
        for d in [&bh, &sd] {
            for (i, &m) in order.iter().enumerate() {
                prop_assert_eq!(d.reject[m], i < d.cutoff_index);
            }
        }
    }

    #[test]
    fn exchangeable_reductions(m in 1usize..30, gamma in 0.0f64..6.0, s in prop::collection::vec(0.0f64..=1.0, 30), q in 0.0f64..0.4) {
        let s = &s[..m];
        let model = RocModel::exchangeable(m, gamma).unwrap();
        prop_assert_eq!(decide_fdr_opt(&model, s, q).unwrap().reject, decide_bh(s, q).unwrap().reject);
        prop_assert_eq!(decide_strong_fwer(&model, s, q).unwrap().reject, decide_stepdown_sidak(s, q).unwrap().reject);
    }

    #[test]
    // Domain of the extremality claim that holds; larger budgets admit
    // counterexamples (see the oracle unit tests).
    fn hoeffding_extremality(w in prop::collection::vec(0.01f64..1.0, 2..7), alpha in 0.01f64..0.3, a in 1.0f64..2.0) {
        let total = (-alpha).ln_1p();
        let sum: f64 = w.iter().sum();
        let etas: Vec<f64> = w.iter().map(|&wi| -(total * wi / sum).exp_m1()).collect();
        let sidak = sidak_sizes(w.len(), alpha).unwrap().sizes;
        let h = bernoulli_tail_enumerate(&etas, a).unwrap();
        let bound = bernoulli_tail_enumerate(&sidak, a).unwrap();
        prop_assert!(h <= bound + 1e-13, "{h} > {bound}");
    }
}

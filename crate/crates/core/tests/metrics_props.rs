use padeval::metrics::{
    apcer, bpcer, bpcer_at_apcer, candidate_thresholds, d_eer, det_curve, fmr, fnmr,
    threshold_at_fmr, DetAxes, Threshold,
};
use padeval_oracle as oracle;
use proptest::prelude::*;

/// Scores with plenty of ties: quarter steps in [-25, 25].
fn tied_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-100i32..=100).prop_map(|k| k as f64 / 4.0), 1..=max_len)
}

fn continuous_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..=max_len)
}

fn any_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![tied_scores(max_len), continuous_scores(max_len)]
}

fn target() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.001),
        Just(0.01),
        Just(0.05),
        Just(0.1),
        0.0001f64..0.9999,
    ]
}

fn t(v: f64) -> Threshold {
    Threshold::new(v).unwrap()
}

/// Strictly increasing and exact on quarter-step inputs.
fn cubic(s: f64) -> f64 {
    s * s * s + 3.0 * s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn grid_matches_oracle(s in any_scores(200)) {
        prop_assert_eq!(candidate_thresholds(&s), oracle::grid(&s));
    }

    #[test]
    fn d_eer_matches_oracle(b in any_scores(200), a in any_scores(200)) {
        let (eer, tau) = d_eer(&b, &a).unwrap();
        let (o_eer, o_tau, ..) = oracle::d_eer(&b, &a);
        prop_assert!(o_eer.equals(eer.num(), eer.den()), "{eer} vs {o_eer:?}");
        prop_assert_eq!(tau.value(), o_tau);
    }

    #[test]
    fn threshold_at_fmr_matches_oracle(nm in any_scores(1000), target in target()) {
        let (tau, rate) = threshold_at_fmr(&nm, target).unwrap();
        let (o_tau, o_k) = oracle::threshold_at_rate(&nm, target);
        prop_assert_eq!(tau.value(), o_tau);
        prop_assert!(rate.value() <= target);
        prop_assert_eq!(rate.num() * nm.len() as u64, o_k * rate.den());
    }

    #[test]
    fn bpcer_at_apcer_matches_oracle(b in any_scores(200), a in any_scores(200), target in target()) {
        let (rate, tau) = bpcer_at_apcer(&b, &a, target).unwrap();
        let (o_k, o_tau) = oracle::bpcer_at_apcer(&b, &a, target);
        prop_assert_eq!(tau.value(), o_tau);
        prop_assert_eq!(rate.num() * b.len() as u64, o_k * rate.den());
    }

    #[test]
    fn det_points_match_oracle_and_point_metrics(b in any_scores(100), a in any_scores(100)) {
        let curve = det_curve(&b, &a, DetAxes::ApcerBpcer).unwrap();
        let expected = oracle::det_points(&b, &a);
        prop_assert_eq!(curve.points.len(), expected.len());
        for (p, (tau, k_neg, k_pos)) in curve.points.iter().zip(expected) {
            prop_assert_eq!(p.threshold, tau);
            prop_assert_eq!(p.x_rate, k_neg as f64 / a.len() as f64);
            prop_assert_eq!(p.y_rate, k_pos as f64 / b.len() as f64);
            prop_assert_eq!(p.x_rate, apcer(&a, t(tau)).unwrap().value());
            prop_assert_eq!(p.y_rate, bpcer(&b, t(tau)).unwrap().value());
        }
        let vuln = det_curve(&b, &a, DetAxes::FmrFnmr).unwrap();
        for p in &vuln.points {
            prop_assert_eq!(p.x_rate, fmr(&a, t(p.threshold)).unwrap().value());
            prop_assert_eq!(p.y_rate, fnmr(&b, t(p.threshold)).unwrap().value());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn error_rates_are_monotone_in_threshold(
        s in any_scores(200),
        mut taus in prop::collection::vec(-1.1e3f64..1.1e3, 2..20),
    ) {
        taus.extend(candidate_thresholds(&s));
        taus.sort_by(f64::total_cmp);
        for w in taus.windows(2) {
            let (lo, hi) = (t(w[0]), t(w[1]));
            prop_assert!(fmr(&s, hi).unwrap() <= fmr(&s, lo).unwrap());
            prop_assert!(apcer(&s, hi).unwrap() <= apcer(&s, lo).unwrap());
            prop_assert!(fnmr(&s, hi).unwrap() >= fnmr(&s, lo).unwrap());
            prop_assert!(bpcer(&s, hi).unwrap() >= bpcer(&s, lo).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rates_invariant_under_monotone_transform(b in tied_scores(150), a in tied_scores(150), target in target()) {
        let (tb, ta): (Vec<f64>, Vec<f64>) =
            (b.iter().map(|&s| cubic(s)).collect(), a.iter().map(|&s| cubic(s)).collect());
        prop_assert_eq!(d_eer(&b, &a).unwrap().0, d_eer(&tb, &ta).unwrap().0);
        prop_assert_eq!(threshold_at_fmr(&a, target).unwrap().1, threshold_at_fmr(&ta, target).unwrap().1);
        let (c, tc) = (
            det_curve(&b, &a, DetAxes::ApcerBpcer).unwrap(),
            det_curve(&tb, &ta, DetAxes::ApcerBpcer).unwrap(),
        );
        let rates = |c: &padeval::metrics::DetCurve| {
            c.points.iter().map(|p| (p.x_rate, p.y_rate)).collect::<Vec<_>>()
        };
        prop_assert_eq!(rates(&c), rates(&tc));
    }

    /// BPCER is read on the attack grid, so it is only transform-invariant when
    /// no bona fide score sits strictly inside a gap of the attack scores.
    #[test]
    fn bpcer_at_apcer_invariant_when_bona_fide_on_attack_values(
        a in tied_scores(150),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..150),
        target in target(),
    ) {
        let b: Vec<f64> = picks.iter().map(|i| a[i.index(a.len())]).collect();
        let (tb, ta): (Vec<f64>, Vec<f64>) =
            (b.iter().map(|&s| cubic(s)).collect(), a.iter().map(|&s| cubic(s)).collect());
        prop_assert_eq!(
            bpcer_at_apcer(&b, &a, target).unwrap().0,
            bpcer_at_apcer(&tb, &ta, target).unwrap().0
        );
    }

    #[test]
    fn eer_gap_bounded_on_tie_free_sets(mut pool in prop::collection::hash_set(-10_000i32..10_000, 2..300), split in 0.05f64..0.95) {
        let mut pool: Vec<f64> = pool.drain().map(|k| k as f64 / 8.0).collect();
        pool.sort_by(f64::total_cmp);
        // Interleave deterministically by hashing the index against `split`.
        let (mut b, mut a) = (Vec::new(), Vec::new());
        for (i, s) in pool.into_iter().enumerate() {
            if ((i as f64 * 0.618_033_988_75) % 1.0) < split { b.push(s) } else { a.push(s) }
        }
        prop_assume!(!b.is_empty() && !a.is_empty());
        let (_, tau) = d_eer(&b, &a).unwrap();
        let gap = (apcer(&a, tau).unwrap().value() - bpcer(&b, tau).unwrap().value()).abs();
        let bound = 1.0 / b.len().min(a.len()) as f64;
        prop_assert!(gap <= bound + 1e-12, "gap {gap} > {bound}");
    }
}

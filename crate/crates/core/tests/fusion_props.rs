use padeval::fusion::{fuse, minmax_apply, minmax_fit};
use padeval::{Label, Polarity, ScoreRecord, ScoreSet};
use proptest::prelude::*;

fn scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6f64..1e6, 1..=max_len)
}

fn set(scores: &[f64], reversed: bool) -> ScoreSet {
    let mut records: Vec<ScoreRecord> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let label = if i % 3 == 0 {
                Label::ATTACK
            } else {
                Label::BONA_FIDE
            };
            ScoreRecord::new(format!("s{i}"), label, s)
        })
        .collect();
    if reversed {
        records.reverse();
    }
    ScoreSet::new(records, Polarity::HigherIsBonaFide).unwrap()
}

fn ranking(s: &ScoreSet) -> Vec<String> {
    let mut r: Vec<&ScoreRecord> = s.records.iter().collect();
    r.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.sample_id.cmp(&b.sample_id))
    });
    r.into_iter().map(|r| r.sample_id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn apply_stays_in_unit_interval_and_preserves_order(fit_on in scores(50), probes in scores(50)) {
        let p = minmax_fit(&fit_on).unwrap();
        for &s in &probes {
            let v = minmax_apply(&p, s);
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if !p.degenerate {
            let mut inside: Vec<f64> = fit_on.clone();
            inside.sort_by(f64::total_cmp);
            inside.dedup();
            for w in inside.windows(2) {
                prop_assert!(minmax_apply(&p, w[0]) < minmax_apply(&p, w[1]));
            }
        }
    }

    #[test]
    fn fusion_is_symmetric(a in scores(60), b in scores(60), w in 0.0f64..=1.0) {
        let n = a.len().min(b.len());
        let (sa, sb) = (set(&a[..n], false), set(&b[..n], true));
        let ab = fuse(&sa, &sb, w, 1.0 - w).unwrap();
        let ba = fuse(&sb, &sa, 1.0 - w, w).unwrap();
        for r in &ab.records {
            prop_assert_eq!(ba.get(&r.sample_id).unwrap().score, r.score);
        }
    }

    #[test]
    fn ranking_invariant_to_positive_affine_map_of_one_input(
        a in prop::collection::vec(-1000i32..1000, 2..60),
        b in prop::collection::vec(-1000i32..1000, 2..60),
        scale_exp in -4i32..=4,
        shift in -64i32..64,
    ) {
        // Dyadic inputs and power-of-two scales keep the map exact.
        let n = a.len().min(b.len());
        let a: Vec<f64> = a[..n].iter().map(|&k| k as f64 / 8.0).collect();
        let b: Vec<f64> = b[..n].iter().map(|&k| k as f64 / 8.0).collect();
        let scale = 2f64.powi(scale_exp);
        let a2: Vec<f64> = a.iter().map(|s| s * scale + shift as f64).collect();
        let base = fuse(&set(&a, false), &set(&b, false), 0.5, 0.5).unwrap();
        let moved = fuse(&set(&a2, false), &set(&b, false), 0.5, 0.5).unwrap();
        prop_assert_eq!(ranking(&base), ranking(&moved));
    }
}

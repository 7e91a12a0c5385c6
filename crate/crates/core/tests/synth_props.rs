use padeval::depth_variance::dv_score;
use padeval::metrics::d_eer;
use padeval::ocsvm::{decision_value, fit, OcsvmConfig};
use padeval::synth::{
    gen_depth, gen_features, gen_scenario, ScenarioSpec, SurfaceKind, SynthDepthSpec,
    SynthFeatureSpec, LANDMARK_COLS, LANDMARK_ROWS,
};
use padeval::{DepthMap, PresentationLabel};

const N_TRAIN: usize = 300;

/// AD D-EER with the detector trained on extra bona fide rows that are not
/// evaluated.
fn ad_eer(separation: f64, d: usize, n: usize, seed: u64) -> f64 {
    let spec = SynthFeatureSpec {
        n_bonafide: n + N_TRAIN,
        n_attack: n,
        d,
        mean_separation: separation,
        seed,
        ..SynthFeatureSpec::default()
    };
    let (x, labels) = gen_features(&spec).unwrap();
    let model = fit(
        &x.select(|i| i >= n && i < n + N_TRAIN),
        &OcsvmConfig::default(),
    )
    .unwrap();
    let (mut bona, mut attack) = (Vec::new(), Vec::new());
    for (i, (row, label)) in x.rows().zip(&labels).enumerate() {
        if i >= n && i < n + N_TRAIN {
            continue;
        }
        let s = decision_value(&model, row).unwrap();
        match label {
            PresentationLabel::BonaFide => bona.push(s),
            PresentationLabel::Attack => attack.push(s),
        }
    }
    d_eer(&bona, &attack).unwrap().0.value()
}

#[test]
fn generation_is_pure() {
    for kind in [
        SurfaceKind::CurvedFace,
        SurfaceKind::PlanarShirt,
        SurfaceKind::WrinkledShirt,
    ] {
        let spec = SynthDepthSpec {
            kind,
            invalid_fraction: 0.1,
            seed: 77,
            ..SynthDepthSpec::default()
        };
        assert_eq!(gen_depth(&spec).unwrap(), gen_depth(&spec).unwrap());
    }
    let spec = SynthFeatureSpec::default();
    assert_eq!(gen_features(&spec).unwrap(), gen_features(&spec).unwrap());
    let small = ScenarioSpec {
        n_bonafide: 10,
        n_attack: 10,
        n_train: 5,
        ..ScenarioSpec::default()
    };
    let (a, b) = (gen_scenario(&small).unwrap(), gen_scenario(&small).unwrap());
    assert_eq!(a.eval, b.eval);
    assert_eq!(a.train, b.train);
    assert!(a
        .depth
        .iter()
        .zip(&b.depth)
        .all(|(x, y)| x.depth == y.depth));
}

#[test]
fn different_seeds_differ() {
    let a = gen_depth(&SynthDepthSpec {
        seed: 1,
        ..SynthDepthSpec::default()
    })
    .unwrap();
    let b = gen_depth(&SynthDepthSpec {
        seed: 2,
        ..SynthDepthSpec::default()
    })
    .unwrap();
    assert_ne!(a.0, b.0);
}

#[test]
fn generated_data_satisfies_type_invariants() {
    let spec = SynthDepthSpec {
        kind: SurfaceKind::WrinkledShirt,
        width: 33,
        height: 17,
        invalid_fraction: 0.25,
        seed: 4,
        ..SynthDepthSpec::default()
    };
    let (map, lms) = gen_depth(&spec).unwrap();
    assert_eq!(map.values().len(), 33 * 17);
    let zeros = map
        .values()
        .iter()
        .filter(|&&v| v == DepthMap::INVALID)
        .count();
    assert_eq!(zeros, (0.25f64 * (33 * 17) as f64).round() as usize);
    assert_eq!(lms.len(), LANDMARK_COLS * LANDMARK_ROWS);
    assert_eq!(lms.len(), 468);
    assert!(lms
        .points()
        .iter()
        .all(|&(x, y)| x >= 0.0 && y >= 0.0 && x < 33.0 && y < 17.0));
    let (x, _) = gen_features(&SynthFeatureSpec::default()).unwrap();
    assert!(x.as_flat().iter().all(|v| v.is_finite()));
}

#[test]
fn invalid_specs_rejected() {
    let bad = [
        SynthDepthSpec {
            width: 0,
            ..SynthDepthSpec::default()
        },
        SynthDepthSpec {
            invalid_fraction: 1.0,
            ..SynthDepthSpec::default()
        },
        SynthDepthSpec {
            noise_sigma_mm: -1.0,
            ..SynthDepthSpec::default()
        },
        SynthDepthSpec {
            wrinkle_amp_mm: f64::NAN,
            ..SynthDepthSpec::default()
        },
    ];
    for s in bad {
        assert!(gen_depth(&s).is_err(), "{s:?}");
    }
    assert!(gen_features(&SynthFeatureSpec {
        d: 0,
        ..SynthFeatureSpec::default()
    })
    .is_err());
    assert!(gen_features(&SynthFeatureSpec {
        n_attack: 0,
        ..SynthFeatureSpec::default()
    })
    .is_err());
    assert!(gen_features(&SynthFeatureSpec {
        mean_separation: -1.0,
        ..SynthFeatureSpec::default()
    })
    .is_err());
}

#[test]
fn curved_face_scores_above_plane_for_same_noise() {
    for seed in 0..100 {
        let face = SynthDepthSpec {
            kind: SurfaceKind::CurvedFace,
            seed,
            ..SynthDepthSpec::default()
        };
        let plane = SynthDepthSpec {
            kind: SurfaceKind::PlanarShirt,
            ..face.clone()
        };
        let (fm, fl) = gen_depth(&face).unwrap();
        let (pm, pl) = gen_depth(&plane).unwrap();
        assert!(dv_score(&fm, &fl, 10).unwrap().value >= dv_score(&pm, &pl, 10).unwrap().value);
    }
}

#[test]
fn indistinguishable_clusters_give_chance_eer() {
    let eer = ad_eer(0.0, 16, 500, 21);
    assert!((eer - 0.5).abs() <= 0.05, "D-EER {eer}");
}

#[test]
fn well_separated_clusters_give_low_eer() {
    let eer = ad_eer(8.0, 16, 500, 22);
    assert!(eer < 0.02, "D-EER {eer}");
}

#[test]
fn eer_does_not_grow_with_separation() {
    let seps = [0.0, 1.0, 2.0, 4.0, 8.0];
    for seed in 0..10 {
        let eers: Vec<f64> = seps
            .iter()
            .map(|&s| ad_eer(s, 16, 150, 100 + seed))
            .collect();
        for w in eers.windows(2) {
            assert!(w[1] <= w[0] + 0.03, "seed {seed}: {eers:?}");
        }
    }
}

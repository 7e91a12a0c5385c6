use padeval::ocsvm::{decision_value, fit, fit_traced, OcsvmConfig, OcsvmError, OcsvmModel};
use padeval::FeatureMatrix;
use padeval_oracle as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize, offset: f64) -> Vec<Vec<f64>> {
    let dir: Vec<f64> = (0..d).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect();
    (0..n)
        .map(|_| {
            dir.iter()
                .map(|r| offset * r + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
    FeatureMatrix::new(ids, rows.to_vec()).unwrap()
}

fn check_feasible(m: &OcsvmModel) {
    let c = m.upper_bound();
    assert!(m.dual_alphas.iter().all(|&a| (0.0..=c).contains(&a)));
    let sum: f64 = m.dual_alphas.iter().sum();
    assert!(
        (sum - 1.0).abs() <= 1e-12 * m.dual_alphas.len() as f64,
        "sum {sum}"
    );
}

fn check_fit(rows: &[Vec<f64>], cfg: &OcsvmConfig, what: &str) {
    let n = rows.len();
    let m = fit(&matrix(rows), cfg).unwrap_or_else(|e| panic!("{what}: {e}"));
    let slack = 1.0 / n as f64;
    assert!(
        m.diagnostics.kkt_residual <= 1e-6,
        "{what}: {:?}",
        m.diagnostics
    );
    assert!(
        m.diagnostics.n_margin_errors as f64 / n as f64 <= cfg.nu + slack,
        "{what}"
    );
    assert!(
        m.diagnostics.n_support as f64 / n as f64 >= cfg.nu - slack,
        "{what}"
    );
    check_feasible(&m);
}

#[test]
fn kkt_and_nu_property_on_gaussian_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let n = rng.random_range(20..=500);
        let d = rng.random_range(2..=64);
        let nu = rng.random_range(0.05..=1.0f64).max(1.0 / n as f64);
        let offset = rng.random_range(3.0..20.0);
        let rows = gaussian(&mut rng, n, d, offset);
        let cfg = OcsvmConfig {
            nu,
            standardize: case % 2 == 0,
            ..OcsvmConfig::default()
        };
        check_fit(&rows, &cfg, &format!("case {case} (n {n}, d {d}, nu {nu})"));
    }
}

/// With the cloud centered on the origin the optimum is w = 0 and the
/// solver needs far more than the default budget.
#[test]
fn origin_centered_sets_converge_with_larger_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..30 {
        let n = rng.random_range(20..=200);
        let d = rng.random_range(2..=64);
        let nu = rng.random_range(0.05..=1.0f64).max(1.0 / n as f64);
        let rows = gaussian(&mut rng, n, d, 0.0);
        let cfg = OcsvmConfig {
            nu,
            max_iter: Some(20_000 * n),
            ..OcsvmConfig::default()
        };
        check_fit(&rows, &cfg, &format!("case {case} (n {n}, d {d}, nu {nu})"));
    }
}

#[test]
fn objective_matches_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..8 {
        let n = rng.random_range(20..=50);
        let d = rng.random_range(2..=6);
        let nu = rng.random_range(0.1..0.9);
        let offset = rng.random_range(2.0..8.0);
        let rows = gaussian(&mut rng, n, d, offset);
        let cfg = OcsvmConfig {
            nu,
            standardize: false,
            ..OcsvmConfig::default()
        };
        let m = fit(&matrix(&rows), &cfg).unwrap();
        let reference = oracle::ocsvm_dual(&rows, nu, 20_000);
        let rel = (m.diagnostics.objective - reference.objective).abs() / reference.objective;
        assert!(
            rel <= 1e-6,
            "case {case}: {} vs {}",
            m.diagnostics.objective,
            reference.objective
        );
        for (a, b) in m.w.iter().zip(&reference.w) {
            assert!(
                (a - b).abs() <= 1e-3 * (1.0 + b.abs()),
                "case {case}: w {a} vs {b}"
            );
        }
    }
}

#[test]
fn nu_one_forces_uniform_duals() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2, 5, 37, 200] {
        let rows = gaussian(&mut rng, n, 4, 3.0);
        let cfg = OcsvmConfig {
            nu: 1.0,
            ..OcsvmConfig::default()
        };
        let m = fit(&matrix(&rows), &cfg).unwrap();
        assert!(
            m.dual_alphas.iter().all(|&a| a == 1.0 / n as f64),
            "n = {n}"
        );
    }
}

#[test]
fn objective_trace_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows = gaussian(&mut rng, 150, 8, 5.0);
    let (_, trace) = fit_traced(&matrix(&rows), &OcsvmConfig::default()).unwrap();
    assert!(!trace.is_empty());
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn fit_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = matrix(&gaussian(&mut rng, 300, 12, 4.0));
    let cfg = OcsvmConfig::default();
    assert_eq!(fit(&x, &cfg).unwrap(), fit(&x, &cfg).unwrap());
}

#[test]
fn ranking_invariant_to_per_dimension_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let train = gaussian(&mut rng, 200, 6, 6.0);
    let probes = gaussian(&mut rng, 100, 6, 5.0);
    let factors: Vec<f64> = (0..6).map(|k: i32| 2f64.powi(k * 3 - 8)).collect();
    let scale = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().zip(&factors).map(|(v, f)| v * f).collect())
            .collect()
    };
    let cfg = OcsvmConfig::default();
    let a = fit(&matrix(&train), &cfg).unwrap();
    let b = fit(&matrix(&scale(&train)), &cfg).unwrap();
    let rank = |m: &OcsvmModel, rows: &[Vec<f64>]| {
        let v: Vec<f64> = rows.iter().map(|r| decision_value(m, r).unwrap()).collect();
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        idx
    };
    assert_eq!(rank(&a, &probes), rank(&b, &scale(&probes)));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = matrix(&gaussian(&mut rng, 200, 8, 3.0));
    let cfg = OcsvmConfig {
        nu: 0.3,
        max_iter: Some(1),
        ..OcsvmConfig::default()
    };
    assert!(matches!(
        fit(&x, &cfg),
        Err(OcsvmError::NotConverged { .. })
    ));
}

#[test]
fn training_sign_pattern_follows_duals() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let rows = gaussian(&mut rng, 120, 5, 4.0);
    let cfg = OcsvmConfig {
        nu: 0.25,
        ..OcsvmConfig::default()
    };
    let m = fit(&matrix(&rows), &cfg).unwrap();
    let (c, tol) = (m.upper_bound(), 1e-6);
    for (row, &a) in rows.iter().zip(&m.dual_alphas) {
        let f = decision_value(&m, row).unwrap();
        if a >= c {
            assert!(f <= tol, "margin error with f = {f}");
        } else if a == 0.0 {
            assert!(f >= -tol, "non-support vector with f = {f}");
        } else {
            assert!(f.abs() <= tol, "free support vector with f = {f}");
        }
    }
}

//! Seeded synthetic data for desk-scale experiments.
//!
//! Depth maps imitate an RGB-D capture of either a real face (an ellipsoidal
//! cap) or a face printed on a T-shirt (flat, or with sinusoidal wrinkles).
//! Feature matrices are Gaussian clusters standing in for embeddings.
//!
//! Every generator is a pure function of its spec. Randomness comes from
//! ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64(seed)`), with a fixed
//! stream number per purpose so that changing one aspect of a spec does not
//! reshuffle the others:
//!
//! | stream | use                                   |
//! |--------|---------------------------------------|
//! | 1      | per-pixel depth noise                 |
//! | 2      | invalid-pixel selection               |
//! | 3      | wrinkle orientation and phase         |
//! | 4      | feature signature direction           |
//! | 5      | feature rows                          |
//! | 6      | scenario per-sample parameters        |
//!
//! Normal deviates are `rand_distr::StandardNormal`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DepthMap, FeatureMatrix, LandmarkSet, PresentationLabel};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid synthetic spec: {0}")]
pub struct SpecError(pub String);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), SpecError> {
    if cond {
        Ok(())
    } else {
        Err(SpecError(msg()))
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Depth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    CurvedFace,
    PlanarShirt,
    WrinkledShirt,
}

impl std::str::FromStr for SurfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "curved-face" => Ok(SurfaceKind::CurvedFace),
            "planar-shirt" => Ok(SurfaceKind::PlanarShirt),
            "wrinkled-shirt" => Ok(SurfaceKind::WrinkledShirt),
            _ => Err(format!(
                "unknown surface {s:?} (expected curved-face, planar-shirt or wrinkled-shirt)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDepthSpec {
    pub kind: SurfaceKind,
    pub width: usize,
    pub height: usize,
    pub base_depth_mm: f64,
    /// Height of the face cap above the base plane (`CurvedFace`).
    pub curvature_amp_mm: f64,
    /// Peak wrinkle displacement (`WrinkledShirt`).
    pub wrinkle_amp_mm: f64,
    pub wrinkle_wavelength_px: f64,
    pub noise_sigma_mm: f64,
    /// Fraction of pixels zeroed, in `[0, 1)`.
    pub invalid_fraction: f64,
    pub seed: u64,
}

impl Default for SynthDepthSpec {
    fn default() -> Self {
        Self {
            kind: SurfaceKind::CurvedFace,
            width: 96,
            height: 128,
            base_depth_mm: 600.0,
            curvature_amp_mm: 20.0,
            wrinkle_amp_mm: 3.0,
            wrinkle_wavelength_px: 24.0,
            noise_sigma_mm: 1.0,
            invalid_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthDepthSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        ensure(self.width > 0 && self.height > 0, || {
            format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            )
        })?;
        ensure(
            self.width
                .checked_mul(self.height)
                .is_some_and(|n| n <= 1 << 28),
            || "depth map too large".into(),
        )?;
        ensure(
            self.base_depth_mm.is_finite() && (1.0..=65535.0).contains(&self.base_depth_mm),
            || {
                format!(
                    "base depth must be in [1, 65535] mm, got {}",
                    self.base_depth_mm
                )
            },
        )?;
        for (name, v) in [
            ("curvature amplitude", self.curvature_amp_mm),
            ("wrinkle amplitude", self.wrinkle_amp_mm),
            ("noise sigma", self.noise_sigma_mm),
        ] {
            ensure(v.is_finite() && v >= 0.0, || {
                format!("{name} must be finite and non-negative, got {v}")
            })?;
        }
        ensure(
            self.wrinkle_wavelength_px.is_finite() && self.wrinkle_wavelength_px > 0.0,
            || {
                format!(
                    "wrinkle wavelength must be positive, got {}",
                    self.wrinkle_wavelength_px
                )
            },
        )?;
        ensure(
            self.invalid_fraction.is_finite() && (0.0..1.0).contains(&self.invalid_fraction),
            || {
                format!(
                    "invalid fraction must be in [0, 1), got {}",
                    self.invalid_fraction
                )
            },
        )
    }
}

/// Landmark grid layout: 18 columns by 26 rows = 468 points.
pub const LANDMARK_COLS: usize = 18;
pub const LANDMARK_ROWS: usize = 26;
/// Face ellipse semi-axes as fractions of width and height.
const FACE_SEMI_X: f64 = 0.40;
const FACE_SEMI_Y: f64 = 0.45;
/// Landmarks span this fraction of each semi-axis around the face center.
const LANDMARK_SPAN: f64 = 0.6;

/// The fixed 468-point landmark template for a `width x height` map: a
/// regular grid over the central part of the face ellipse.
pub fn landmark_template(width: usize, height: usize) -> LandmarkSet {
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let (ax, ay) = (FACE_SEMI_X * width as f64, FACE_SEMI_Y * height as f64);
    let mut points = Vec::with_capacity(LANDMARK_COLS * LANDMARK_ROWS);
    for j in 0..LANDMARK_ROWS {
        let v = -LANDMARK_SPAN + 2.0 * LANDMARK_SPAN * j as f64 / (LANDMARK_ROWS - 1) as f64;
        for i in 0..LANDMARK_COLS {
            let u = -LANDMARK_SPAN + 2.0 * LANDMARK_SPAN * i as f64 / (LANDMARK_COLS - 1) as f64;
            points.push((cx + u * ax, cy + v * ay));
        }
    }
    LandmarkSet::new(points).expect("template is non-empty and finite")
}

/// Renders a depth map and its landmark template.
pub fn gen_depth(spec: &SynthDepthSpec) -> Result<(DepthMap, LandmarkSet), SpecError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (ax, ay) = (FACE_SEMI_X * w as f64, FACE_SEMI_Y * h as f64);

    let (theta, phase) = {
        let mut rng = rng_for(spec.seed, 3);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        (theta, phase)
    };
    let (ct, st) = (theta.cos(), theta.sin());

    let mut noise = rng_for(spec.seed, 1);
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let relief = match spec.kind {
                SurfaceKind::CurvedFace => {
                    let (u, v) = ((xf - cx) / ax, (yf - cy) / ay);
                    // Closer to the camera means smaller depth.
                    -spec.curvature_amp_mm * (1.0 - u * u - v * v).max(0.0).sqrt()
                }
                SurfaceKind::PlanarShirt => 0.0,
                SurfaceKind::WrinkledShirt => {
                    let t = (xf * ct + yf * st) / spec.wrinkle_wavelength_px;
                    spec.wrinkle_amp_mm * (std::f64::consts::TAU * t + phase).sin()
                }
            };
            let eps = if spec.noise_sigma_mm > 0.0 {
                spec.noise_sigma_mm * noise.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let depth = (spec.base_depth_mm + relief + eps)
                .round()
                .clamp(1.0, 65535.0);
            values.push(depth as u16);
        }
    }

    let n_invalid = (spec.invalid_fraction * (w * h) as f64).round() as usize;
    if n_invalid > 0 {
        let mut rng = rng_for(spec.seed, 2);
        for i in index::sample(&mut rng, w * h, n_invalid.min(w * h)) {
            values[i] = DepthMap::INVALID;
        }
    }

    let map = DepthMap::new(w, h, values).expect("dimensions validated");
    Ok((map, landmark_template(w, h)))
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFeatureSpec {
    pub n_bonafide: usize,
    pub n_attack: usize,
    pub d: usize,
    /// Distance between the cluster means in within-cluster standard
    /// deviations.
    pub mean_separation: f64,
    /// Distance of the bona fide cluster mean from the origin.
    pub bonafide_offset: f64,
    pub seed: u64,
}

impl Default for SynthFeatureSpec {
    fn default() -> Self {
        Self {
            n_bonafide: 500,
            n_attack: 500,
            d: 16,
            mean_separation: 8.0,
            bonafide_offset: 16.0,
            seed: 0,
        }
    }
}

impl SynthFeatureSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        ensure(self.n_bonafide >= 1 && self.n_attack >= 1, || {
            "need at least one bona fide and one attack row".into()
        })?;
        ensure(self.d >= 1, || "dimension must be at least 1".into())?;
        ensure(
            self.mean_separation.is_finite() && self.mean_separation >= 0.0,
            || {
                format!(
                    "separation must be non-negative, got {}",
                    self.mean_separation
                )
            },
        )?;
        ensure(
            self.bonafide_offset.is_finite() && self.bonafide_offset >= 0.0,
            || format!("offset must be non-negative, got {}", self.bonafide_offset),
        )
    }
}

/// Seeded unit vector in `d` dimensions.
fn signature_direction(seed: u64, d: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, 4);
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn bonafide_id(i: usize) -> String {
    format!("bonafide-{i:05}")
}

pub fn attack_id(i: usize) -> String {
    format!("attack-{i:05}")
}

/// Bona fide rows `~ N(offset * r, I)`, attack rows
/// `~ N((offset - separation) * r, I)` for a seeded unit direction `r`.
///
/// Attacks are displaced towards the origin along the bona fide signature
/// direction. Rows are bona fide first, then attacks.
pub fn gen_features(
    spec: &SynthFeatureSpec,
) -> Result<(FeatureMatrix, Vec<PresentationLabel>), SpecError> {
    spec.validate()?;
    let dir = signature_direction(spec.seed, spec.d);
    let mut rng = rng_for(spec.seed, 5);
    let n = spec.n_bonafide + spec.n_attack;
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * spec.d);
    for i in 0..n {
        let (shift, id, label) = if i < spec.n_bonafide {
            (
                spec.bonafide_offset,
                bonafide_id(i),
                PresentationLabel::BonaFide,
            )
        } else {
            (
                spec.bonafide_offset - spec.mean_separation,
                attack_id(i - spec.n_bonafide),
                PresentationLabel::Attack,
            )
        };
        data.extend(
            dir.iter()
                .map(|r| shift * r + rng.sample::<f64, _>(StandardNormal)),
        );
        ids.push(id);
        labels.push(label);
    }
    let m = FeatureMatrix::from_flat(ids, spec.d, data).expect("finite by construction");
    Ok((m, labels))
}

// ---------------------------------------------------------------------------
// Joint DV + AD scenario
// ---------------------------------------------------------------------------

/// A full evaluation population: a depth map, landmarks and a feature vector
/// for every bona fide and attack sample, plus a separate bona fide training
/// set for the anomaly detector.
///
/// Per-sample depth difficulty (face relief, wrinkle depth) and feature noise
/// are drawn from independent streams, so the two detectors make
/// uncorrelated errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_bonafide: usize,
    pub n_attack: usize,
    pub n_train: usize,
    pub width: usize,
    pub height: usize,
    /// Bona fide face relief drawn uniformly from this range.
    pub face_amp_mm: (f64, f64),
    /// Attack wrinkle amplitude drawn uniformly from this range.
    pub wrinkle_amp_mm: (f64, f64),
    pub wrinkle_wavelength_px: f64,
    pub noise_sigma_mm: f64,
    pub invalid_fraction: f64,
    pub d: usize,
    pub mean_separation: f64,
    pub bonafide_offset: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_bonafide: 500,
            n_attack: 500,
            n_train: 300,
            width: 64,
            height: 80,
            face_amp_mm: (20.0, 50.0),
            wrinkle_amp_mm: (0.0, 4.0),
            wrinkle_wavelength_px: 20.0,
            noise_sigma_mm: 1.0,
            invalid_fraction: 0.02,
            d: 16,
            mean_separation: 2.0,
            bonafide_offset: 16.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSample {
    pub sample_id: String,
    pub label: PresentationLabel,
    pub depth: DepthMap,
    pub landmarks: LandmarkSet,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub depth: Vec<ScenarioSample>,
    /// Bona fide only; ids `train-NNNNN`.
    pub train: FeatureMatrix,
    /// Same ids and order as `depth`.
    pub eval: FeatureMatrix,
    pub eval_labels: Vec<PresentationLabel>,
}

fn uniform(rng: &mut ChaCha20Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

pub fn gen_scenario(spec: &ScenarioSpec) -> Result<Scenario, SpecError> {
    ensure(spec.n_train >= 2, || {
        "need at least two training rows".into()
    })?;
    for (name, (lo, hi)) in [("face", spec.face_amp_mm), ("wrinkle", spec.wrinkle_amp_mm)] {
        ensure(
            lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
            || format!("{name} amplitude range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"),
        )?;
    }
    let feature_spec = SynthFeatureSpec {
        n_bonafide: spec.n_bonafide + spec.n_train,
        n_attack: spec.n_attack,
        d: spec.d,
        mean_separation: spec.mean_separation,
        bonafide_offset: spec.bonafide_offset,
        seed: spec.seed,
    };
    let (features, labels) = gen_features(&feature_spec)?;

    // First n_bonafide bona fide rows are for evaluation, the next n_train
    // for training, then the attacks.
    let train = {
        let m = features.select(|i| i >= spec.n_bonafide && i < spec.n_bonafide + spec.n_train);
        let ids = (0..spec.n_train).map(|i| format!("train-{i:05}")).collect();
        FeatureMatrix::from_flat(ids, m.dim(), m.as_flat().to_vec()).expect("same shape")
    };
    let eval = features.select(|i| i < spec.n_bonafide || i >= spec.n_bonafide + spec.n_train);
    let eval_labels: Vec<PresentationLabel> = labels
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < spec.n_bonafide || *i >= spec.n_bonafide + spec.n_train)
        .map(|(_, &l)| l)
        .collect();

    let mut params = rng_for(spec.seed, 6);
    let mut depth = Vec::with_capacity(eval.n_rows());
    for (id, &label) in eval.sample_ids().iter().zip(&eval_labels) {
        let sample_seed: u64 = params.random();
        let depth_spec = match label {
            PresentationLabel::BonaFide => SynthDepthSpec {
                kind: SurfaceKind::CurvedFace,
                curvature_amp_mm: uniform(&mut params, spec.face_amp_mm),
                ..base_depth_spec(spec, sample_seed)
            },
            PresentationLabel::Attack => SynthDepthSpec {
                kind: SurfaceKind::WrinkledShirt,
                wrinkle_amp_mm: uniform(&mut params, spec.wrinkle_amp_mm),
                ..base_depth_spec(spec, sample_seed)
            },
        };
        let (map, landmarks) = gen_depth(&depth_spec)?;
        depth.push(ScenarioSample {
            sample_id: id.clone(),
            label,
            depth: map,
            landmarks,
        });
    }
    Ok(Scenario {
        depth,
        train,
        eval,
        eval_labels,
    })
}

fn base_depth_spec(spec: &ScenarioSpec, seed: u64) -> SynthDepthSpec {
    SynthDepthSpec {
        kind: SurfaceKind::PlanarShirt,
        width: spec.width,
        height: spec.height,
        base_depth_mm: 600.0,
        curvature_amp_mm: 0.0,
        wrinkle_amp_mm: 0.0,
        wrinkle_wavelength_px: spec.wrinkle_wavelength_px,
        noise_sigma_mm: spec.noise_sigma_mm,
        invalid_fraction: spec.invalid_fraction,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth_variance::dv_score;

    #[test]
    fn planar_noiseless_scores_zero() {
        let spec = SynthDepthSpec {
            kind: SurfaceKind::PlanarShirt,
            noise_sigma_mm: 0.0,
            ..SynthDepthSpec::default()
        };
        let (map, lms) = gen_depth(&spec).unwrap();
        assert_eq!(lms.len(), 468);
        assert_eq!(dv_score(&map, &lms, 10).unwrap().value, 0.0);
    }

    #[test]
    fn depth_is_deterministic_per_seed() {
        let spec = SynthDepthSpec {
            kind: SurfaceKind::WrinkledShirt,
            invalid_fraction: 0.1,
            seed: 7,
            ..SynthDepthSpec::default()
        };
        assert_eq!(gen_depth(&spec).unwrap(), gen_depth(&spec).unwrap());
        let other = SynthDepthSpec {
            seed: 8,
            ..spec.clone()
        };
        assert_ne!(gen_depth(&spec).unwrap().0, gen_depth(&other).unwrap().0);
    }

    #[test]
    fn invalid_fraction_zeroes_exact_count() {
        let spec = SynthDepthSpec {
            invalid_fraction: 0.25,
            width: 10,
            height: 10,
            ..SynthDepthSpec::default()
        };
        let (map, _) = gen_depth(&spec).unwrap();
        assert_eq!(map.values().iter().filter(|&&v| v == 0).count(), 25);
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = [
            SynthDepthSpec {
                width: 0,
                ..Default::default()
            },
            SynthDepthSpec {
                invalid_fraction: 1.0,
                ..Default::default()
            },
            SynthDepthSpec {
                noise_sigma_mm: -1.0,
                ..Default::default()
            },
            SynthDepthSpec {
                wrinkle_wavelength_px: 0.0,
                ..Default::default()
            },
        ];
        for s in bad {
            assert!(gen_depth(&s).is_err(), "{s:?}");
        }
        assert!(gen_features(&SynthFeatureSpec {
            d: 0,
            ..Default::default()
        })
        .is_err());
        assert!(gen_features(&SynthFeatureSpec {
            n_attack: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn features_deterministic_and_labelled() {
        let spec = SynthFeatureSpec {
            n_bonafide: 3,
            n_attack: 2,
            d: 4,
            seed: 11,
            ..Default::default()
        };
        let (m, labels) = gen_features(&spec).unwrap();
        assert_eq!(m.n_rows(), 5);
        assert_eq!(
            labels
                .iter()
                .filter(|l| **l == PresentationLabel::Attack)
                .count(),
            2
        );
        assert_eq!(m.sample_ids()[3], "attack-00000");
        assert_eq!((m, labels), gen_features(&spec).unwrap());
    }

    #[test]
    fn scenario_ids_line_up() {
        let spec = ScenarioSpec {
            n_bonafide: 4,
            n_attack: 3,
            n_train: 5,
            width: 24,
            height: 30,
            ..Default::default()
        };
        let s = gen_scenario(&spec).unwrap();
        assert_eq!(s.train.n_rows(), 5);
        assert_eq!(s.eval.n_rows(), 7);
        let depth_ids: Vec<&str> = s.depth.iter().map(|d| d.sample_id.as_str()).collect();
        let eval_ids: Vec<&str> = s.eval.sample_ids().iter().map(String::as_str).collect();
        assert_eq!(depth_ids, eval_ids);
    }
}

//! Presentation attack detection (PAD) toolkit.
//!
//! Three detectors and the evaluation machinery around them:
//!
//! - [`depth_variance`]: dispersion of depth sampled at facial landmarks. A
//!   face printed on fabric is close to planar, a real face is not.
//! - [`ocsvm`]: linear-kernel ν one-class SVM trained on bona fide feature
//!   vectors only, used as an anomaly detector.
//! - [`fusion`]: per-detector min-max normalization followed by a weighted
//!   sum.
//!
//! [`metrics`] implements FMR/FNMR, IAPMR at fixed-FMR operating points,
//! APCER/BPCER, D-EER, BPCER at fixed APCER, and DET curves. [`ingest`] owns
//! every file format and [`synth`] produces seeded stand-in data.
//!
//! Score polarity is always explicit ([`types::Polarity`]); detectors in this
//! crate emit bona-fide-ness scores (higher = more bona fide like).

pub mod depth_variance;
pub mod fusion;
pub mod ingest;
pub mod metrics;
pub mod ocsvm;
pub mod synth;
pub mod types;

pub use types::{
    DepthMap, FeatureMatrix, Label, LandmarkSet, Polarity, PresentationLabel, ScoreRecord,
    ScoreSet, TrialLabel, ValidationError,
};

/// Defaults echoed into every report.
pub mod defaults {
    pub const NU: f64 = 0.5;
    pub const FUSION_WEIGHT_A: f64 = 0.5;
    pub const FUSION_WEIGHT_B: f64 = 0.5;
    pub const MIN_VALID_LANDMARKS: usize = 10;
    pub const OCSVM_TOL: f64 = 1e-6;
    /// Solver iteration cap per training row.
    pub const OCSVM_ITER_PER_ROW: usize = 100;
    pub const STANDARDIZE: bool = true;
}

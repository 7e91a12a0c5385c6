//! Depth-variance (DV) detector.
//!
//! Depth is sampled at every facial landmark and the population standard
//! deviation of the valid samples is the score. A printed face on fabric is
//! close to planar, so its landmark depths barely spread; a real face has
//! several centimeters of relief between nose tip and cheeks.
//!
//! Sampling uses the nearest pixel. Landmarks that fall outside the map or on
//! a `0` (unmeasured) pixel are skipped rather than interpolated across.

use thiserror::Error;

use crate::types::{DepthMap, LandmarkSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DvError {
    #[error("only {n_valid} landmarks have valid depth, need at least {min_valid}")]
    TooFewValidLandmarks { n_valid: usize, min_valid: usize },
    #[error("min_valid must be at least 2, got {0}")]
    MinValidTooSmall(usize),
}

/// Depth read at one landmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthSample {
    Valid(u16),
    OutOfBounds,
    NoDepth,
}

impl DepthSample {
    pub fn depth_mm(self) -> Option<u16> {
        match self {
            DepthSample::Valid(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvScore {
    /// Population standard deviation of valid landmark depths, millimeters.
    pub value: f64,
    pub n_valid: usize,
}

/// Depth at each landmark, in landmark order.
pub fn sample_depths(map: &DepthMap, landmarks: &LandmarkSet) -> Vec<(usize, DepthSample)> {
    landmarks
        .points()
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| (i, sample_at(map, x, y)))
        .collect()
}

fn sample_at(map: &DepthMap, x: f64, y: f64) -> DepthSample {
    let (col, row) = (x.round(), y.round());
    // -0.4 rounds to -0.0, which is pixel 0.
    if col < 0.0 || row < 0.0 || col >= map.width() as f64 || row >= map.height() as f64 {
        return DepthSample::OutOfBounds;
    }
    match map.get(col as usize, row as usize) {
        Some(DepthMap::INVALID) => DepthSample::NoDepth,
        Some(d) => DepthSample::Valid(d),
        None => DepthSample::OutOfBounds,
    }
}

/// Depth-variance score; higher means more bona fide like.
pub fn dv_score(
    map: &DepthMap,
    landmarks: &LandmarkSet,
    min_valid: usize,
) -> Result<DvScore, DvError> {
    if min_valid < 2 {
        return Err(DvError::MinValidTooSmall(min_valid));
    }
    let depths: Vec<f64> = sample_depths(map, landmarks)
        .into_iter()
        .filter_map(|(_, s)| s.depth_mm().map(f64::from))
        .collect();
    if depths.len() < min_valid {
        return Err(DvError::TooFewValidLandmarks {
            n_valid: depths.len(),
            min_valid,
        });
    }
    Ok(DvScore {
        value: population_std(&depths),
        n_valid: depths.len(),
    })
}

/// Two-pass population standard deviation (divisor N).
fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

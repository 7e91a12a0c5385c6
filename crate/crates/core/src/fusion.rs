//! Score-level fusion: each detector's scores are min-max normalized on the
//! set being fused, then combined with fixed weights.

use std::collections::HashMap;

use thiserror::Error;

use crate::types::{Label, Polarity, ScoreRecord, ScoreSet, ValidationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("cannot fit min-max parameters on an empty score list")]
    EmptySet,
    #[error("non-finite score in min-max fit")]
    NonFiniteScore,
    #[error("weights must be non-negative and sum to 1, got {0} and {1}")]
    WeightError(f64, f64),
    #[error("score sets have different polarity ({0} vs {1})")]
    PolarityMismatch(Polarity, Polarity),
    #[error("sample {0:?} is missing from the second score set")]
    MissingInB(String),
    #[error("sample {0:?} is missing from the first score set")]
    MissingInA(String),
    #[error("sample {sample_id:?} is labelled {a} in the first set and {b} in the second")]
    LabelMismatch {
        sample_id: String,
        a: Label,
        b: Label,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Weight sums within this distance of 1 are accepted.
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxParams {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

pub fn minmax_fit(scores: &[f64]) -> Result<MinMaxParams, FusionError> {
    if scores.is_empty() {
        return Err(FusionError::EmptySet);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(FusionError::NonFiniteScore);
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MinMaxParams {
        min,
        max,
        degenerate: min == max,
    })
}

/// Maps `s` onto `[0, 1]`, clamping outside `[min, max]`. Degenerate
/// parameters send everything to 0.5.
pub fn minmax_apply(p: &MinMaxParams, s: f64) -> f64 {
    if p.degenerate {
        return 0.5;
    }
    let span = p.max - p.min;
    let v = if span.is_finite() {
        (s - p.min) / span
    } else {
        // Span overflows for extreme inputs; halve everything first.
        (s * 0.5 - p.min * 0.5) / (p.max * 0.5 - p.min * 0.5)
    };
    v.clamp(0.0, 1.0)
}

/// Weighted sum of the min-max normalized scores of `a` and `b`, matched by
/// sample id and emitted in `a`'s order.
pub fn fuse(a: &ScoreSet, b: &ScoreSet, w_a: f64, w_b: f64) -> Result<ScoreSet, FusionError> {
    if !(w_a >= 0.0 && w_b >= 0.0 && ((w_a + w_b) - 1.0).abs() <= WEIGHT_SUM_TOL) {
        return Err(FusionError::WeightError(w_a, w_b));
    }
    if a.polarity != b.polarity {
        return Err(FusionError::PolarityMismatch(a.polarity, b.polarity));
    }
    let by_id: HashMap<&str, &ScoreRecord> = b
        .records
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();
    if b.records.len() != by_id.len() {
        crate::types::validate_score_set(b)?;
    }
    let a_ids: std::collections::HashSet<&str> =
        a.records.iter().map(|r| r.sample_id.as_str()).collect();
    if let Some(r) = b
        .records
        .iter()
        .find(|r| !a_ids.contains(r.sample_id.as_str()))
    {
        return Err(FusionError::MissingInA(r.sample_id.clone()));
    }

    let pa = minmax_fit(&a.records.iter().map(|r| r.score).collect::<Vec<_>>())?;
    let pb = minmax_fit(&b.records.iter().map(|r| r.score).collect::<Vec<_>>())?;
    let records = a
        .records
        .iter()
        .map(|ra| {
            let rb = by_id
                .get(ra.sample_id.as_str())
                .ok_or_else(|| FusionError::MissingInB(ra.sample_id.clone()))?;
            if ra.label != rb.label {
                return Err(FusionError::LabelMismatch {
                    sample_id: ra.sample_id.clone(),
                    a: ra.label,
                    b: rb.label,
                });
            }
            let fused = w_a * minmax_apply(&pa, ra.score) + w_b * minmax_apply(&pb, rb.score);
            Ok(ScoreRecord::new(ra.sample_id.clone(), ra.label, fused))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreSet::new(records, a.polarity)?)
}

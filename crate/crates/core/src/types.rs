//! Domain types shared by every module. No algorithms live here.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// Ground truth of a single presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresentationLabel {
    BonaFide,
    Attack,
}

/// Ground truth of a recognition comparison trial.
///
/// `AttackMated` is an attack presentation compared against the reference of
/// the identity it impersonates. For DET plots it is treated as a kind of
/// mated comparison; for IAPMR it is the population being counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialLabel {
    Mated,
    NonMated,
    AttackMated,
}

/// Either label vocabulary, as it appears in a score file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Presentation(PresentationLabel),
    Trial(TrialLabel),
}

impl Label {
    pub const BONA_FIDE: Label = Label::Presentation(PresentationLabel::BonaFide);
    pub const ATTACK: Label = Label::Presentation(PresentationLabel::Attack);
    pub const MATED: Label = Label::Trial(TrialLabel::Mated);
    pub const NON_MATED: Label = Label::Trial(TrialLabel::NonMated);
    pub const ATTACK_MATED: Label = Label::Trial(TrialLabel::AttackMated);

    pub const ALL: [Label; 5] = [
        Self::BONA_FIDE,
        Self::ATTACK,
        Self::MATED,
        Self::NON_MATED,
        Self::ATTACK_MATED,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Presentation(PresentationLabel::BonaFide) => "bonafide",
            Label::Presentation(PresentationLabel::Attack) => "attack",
            Label::Trial(TrialLabel::Mated) => "mated",
            Label::Trial(TrialLabel::NonMated) => "nonmated",
            Label::Trial(TrialLabel::AttackMated) => "attackmated",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {0:?} (expected bonafide, attack, mated, nonmated or attackmated)")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl FromStr for PresentationLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(PresentationLabel::BonaFide),
            "attack" => Ok(PresentationLabel::Attack),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

/// Declared orientation of a score set. Never inferred from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// PAD scores: higher means more bona fide like.
    HigherIsBonaFide,
    /// Recognition similarity: higher means more likely the same identity.
    HigherIsMatch,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::HigherIsBonaFide => "higher-is-bona-fide",
            Polarity::HigherIsMatch => "higher-is-match",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "higher-is-bona-fide" => Ok(Polarity::HigherIsBonaFide),
            "higher-is-match" => Ok(Polarity::HigherIsMatch),
            _ => Err(format!(
                "unknown polarity {s:?} (expected higher-is-bona-fide or higher-is-match)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub label: Label,
    pub score: f64,
}

impl ScoreRecord {
    pub fn new(sample_id: impl Into<String>, label: Label, score: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            label,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("score set is empty")]
    EmptySet,
    #[error("empty sample id at record {0}")]
    EmptyId(usize),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("non-finite score for sample {0:?}")]
    NonFiniteScore(String),
}

/// Labeled scores produced by one detector or one recognition system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub records: Vec<ScoreRecord>,
    pub polarity: Polarity,
}

impl ScoreSet {
    /// Builds a set and checks its invariants.
    pub fn new(records: Vec<ScoreRecord>, polarity: Polarity) -> Result<Self, ValidationError> {
        let set = Self { records, polarity };
        validate_score_set(&set)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Scores of every record carrying `label`, in record order.
    pub fn scores_with(&self, label: Label) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.score)
            .collect()
    }

    pub fn count_with(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// A new set holding only the records with `label`.
    pub fn filter_label(&self, label: Label) -> ScoreSet {
        ScoreSet {
            records: self
                .records
                .iter()
                .filter(|r| r.label == label)
                .cloned()
                .collect(),
            polarity: self.polarity,
        }
    }

    pub fn get(&self, sample_id: &str) -> Option<&ScoreRecord> {
        self.records.iter().find(|r| r.sample_id == sample_id)
    }
}

/// Checks the [`ScoreSet`] invariants: non-empty, non-empty unique ids,
/// finite scores. The first violation in record order is reported.
pub fn validate_score_set(set: &ScoreSet) -> Result<(), ValidationError> {
    if set.records.is_empty() {
        return Err(ValidationError::EmptySet);
    }
    let mut seen = HashSet::with_capacity(set.records.len());
    for (i, r) in set.records.iter().enumerate() {
        if r.sample_id.is_empty() {
            return Err(ValidationError::EmptyId(i));
        }
        if !seen.insert(r.sample_id.as_str()) {
            return Err(ValidationError::DuplicateId(r.sample_id.clone()));
        }
        if !r.score.is_finite() {
            return Err(ValidationError::NonFiniteScore(r.sample_id.clone()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Depth, landmarks, features
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("depth map dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("depth map has {got} values, expected {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("landmark set is empty")]
    NoLandmarks,
    #[error("landmark {0} has a non-finite coordinate")]
    NonFiniteLandmark(usize),
    #[error("feature matrix has zero columns")]
    ZeroDimensional,
    #[error("feature matrix has {rows} rows but {ids} sample ids")]
    IdCountMismatch { rows: usize, ids: usize },
    #[error("feature row {row} has {got} values, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("feature row {0} contains a non-finite value")]
    NonFiniteFeature(usize),
}

/// Row-major depth raster in millimeters. `0` marks a pixel with no
/// measurement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

impl DepthMap {
    pub const INVALID: u16 = 0;

    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self, ShapeError> {
        if width == 0 || height == 0 {
            return Err(ShapeError::ZeroDimension { width, height });
        }
        if width.checked_mul(height) != Some(values.len()) {
            return Err(ShapeError::LengthMismatch {
                width,
                height,
                got: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    /// Raw value at column `x`, row `y`, or `None` when out of bounds.
    pub fn get(&self, x: usize, y: usize) -> Option<u16> {
        (x < self.width && y < self.height).then(|| self.values[y * self.width + x])
    }

    /// Applies `f` to every valid (non-zero) pixel. Sentinel pixels stay 0.
    pub fn map_valid(&self, mut f: impl FnMut(u16) -> u16) -> DepthMap {
        DepthMap {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .map(|&v| if v == Self::INVALID { v } else { f(v) })
                .collect(),
        }
    }
}

/// Ordered 2-D landmark positions in pixel units (`x` = column, `y` = row).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<(f64, f64)>,
}

impl LandmarkSet {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ShapeError> {
        if points.is_empty() {
            return Err(ShapeError::NoLandmarks);
        }
        if let Some(i) = points
            .iter()
            .position(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(ShapeError::NonFiniteLandmark(i));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n x d` matrix of embedding vectors, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    sample_ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(sample_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, ShapeError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if sample_ids.len() != rows.len() {
            return Err(ShapeError::IdCountMismatch {
                rows: rows.len(),
                ids: sample_ids.len(),
            });
        }
        if dim == 0 && !rows.is_empty() {
            return Err(ShapeError::ZeroDimensional);
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(ShapeError::RaggedRow {
                    row: i,
                    got: row.len(),
                    expected: dim,
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ShapeError::NonFiniteFeature(i));
            }
            data.extend(row);
        }
        Ok(Self {
            sample_ids,
            dim,
            data,
        })
    }

    /// Builds from flat row-major storage.
    pub fn from_flat(
        sample_ids: Vec<String>,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self, ShapeError> {
        if dim == 0 {
            return Err(ShapeError::ZeroDimensional);
        }
        if data.len() != sample_ids.len() * dim {
            return Err(ShapeError::IdCountMismatch {
                rows: data.len() / dim,
                ids: sample_ids.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(ShapeError::NonFiniteFeature(pos / dim));
        }
        Ok(Self {
            sample_ids,
            dim,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows whose index satisfies `keep`, ids carried along.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> FeatureMatrix {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for i in 0..self.n_rows() {
            if keep(i) {
                ids.push(self.sample_ids[i].clone());
                data.extend_from_slice(self.row(i));
            }
        }
        FeatureMatrix {
            sample_ids: ids,
            dim: self.dim,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, score: f64) -> ScoreRecord {
        ScoreRecord::new(id, Label::BONA_FIDE, score)
    }

    #[test]
    fn single_valid_record_passes() {
        let set = ScoreSet {
            records: vec![rec("a", 0.1)],
            polarity: Polarity::HigherIsBonaFide,
        };
        assert_eq!(validate_score_set(&set), Ok(()));
    }

    #[test]
    fn duplicate_id_rejected() {
        let set = ScoreSet {
            records: vec![rec("a", 0.1), rec("a", 0.2)],
            polarity: Polarity::HigherIsBonaFide,
        };
        assert_eq!(
            validate_score_set(&set),
            Err(ValidationError::DuplicateId("a".into()))
        );
    }

    #[test]
    fn nan_score_rejected() {
        let set = ScoreSet {
            records: vec![rec("a", f64::NAN)],
            polarity: Polarity::HigherIsBonaFide,
        };
        assert_eq!(
            validate_score_set(&set),
            Err(ValidationError::NonFiniteScore("a".into()))
        );
    }

    #[test]
    fn empty_set_rejected() {
        let set = ScoreSet {
            records: vec![],
            polarity: Polarity::HigherIsMatch,
        };
        assert_eq!(validate_score_set(&set), Err(ValidationError::EmptySet));
    }

    #[test]
    fn labels_parse_from_exact_strings() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("BonaFide".parse::<Label>().is_err());
        assert!("bona fide".parse::<Label>().is_err());
        assert_eq!(
            "attack".parse::<PresentationLabel>().unwrap(),
            PresentationLabel::Attack
        );
    }

    #[test]
    fn depth_map_shape_checked() {
        assert!(DepthMap::new(2, 2, vec![0; 4]).is_ok());
        assert!(matches!(
            DepthMap::new(2, 2, vec![0; 3]),
            Err(ShapeError::LengthMismatch { .. })
        ));
        assert!(matches!(
            DepthMap::new(0, 2, vec![]),
            Err(ShapeError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn feature_matrix_rejects_ragged_and_nan() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            FeatureMatrix::new(ids.clone(), vec![vec![1.0, 2.0], vec![1.0]]),
            Err(ShapeError::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            FeatureMatrix::new(ids, vec![vec![1.0], vec![f64::INFINITY]]),
            Err(ShapeError::NonFiniteFeature(1))
        ));
    }
}

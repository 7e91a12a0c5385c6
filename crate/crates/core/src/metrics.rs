//! Recognition and PAD error metrics, operating-point selection and DET
//! curves.
//!
//! Decision rule everywhere: a score `s` is accepted (bona fide / match) iff
//! `s >= tau`. Error rates are kept as exact count ratios ([`Rate`]) and only
//! converted to `f64` at the edges.
//!
//! Operating points are searched over a finite candidate grid: the midpoints
//! between consecutive distinct sorted scores, plus one threshold below the
//! minimum and one above the maximum. Every achievable confusion matrix is
//! reached by exactly one grid threshold.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Label, Polarity, ScoreSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no {0} scores to evaluate")]
    EmptySet(&'static str),
    #[error("non-finite {0} score")]
    NonFiniteScore(&'static str),
    #[error("target rate {0} must lie strictly between 0 and 1")]
    InvalidTarget(f64),
    #[error("threshold {0} is not finite")]
    NonFiniteThreshold(f64),
    #[error("{role} scores have polarity {found}, expected {expected}")]
    PolarityMismatch {
        role: &'static str,
        expected: Polarity,
        found: Polarity,
    },
    #[error("sample {sample_id:?} is labelled {found} but was supplied as {expected}")]
    LabelMismatch {
        sample_id: String,
        expected: Label,
        found: Label,
    },
}

// ---------------------------------------------------------------------------
// Rate and Threshold
// ---------------------------------------------------------------------------

/// An error rate held as an exact ratio of counts.
///
/// Equality and ordering compare the ratios, not the stored integers, so
/// `1/2 == 2/4`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rate {
    num: u64,
    den: u64,
}

impl Rate {
    /// `num / den`. Panics if `den == 0` or `num > den`.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "rate denominator must be positive");
        assert!(num <= den, "rate numerator {num} exceeds denominator {den}");
        Self { num, den }
    }

    pub const ZERO: Rate = Rate { num: 0, den: 1 };

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Mean of two rates, still exact.
    pub fn mean(self, other: Rate) -> Rate {
        let num = self.num as u128 * other.den as u128 + other.num as u128 * self.den as u128;
        let den = 2 * self.den as u128 * other.den as u128;
        reduce(num, den)
    }

    /// `|self - other|` as an exact ratio.
    pub fn abs_diff(self, other: Rate) -> Rate {
        let a = self.num as u128 * other.den as u128;
        let b = other.num as u128 * self.den as u128;
        reduce(a.abs_diff(b), self.den as u128 * other.den as u128)
    }

    /// Percentage with exactly `decimals` fractional digits, rounded half up
    /// on the exact ratio: `Rate::new(98, 728).percent(2) == "13.46"`.
    pub fn percent(self, decimals: u32) -> String {
        let scale = 10u128.pow(decimals);
        let scaled = self.num as u128 * 100 * scale;
        let den = self.den as u128;
        let mut q = scaled / den;
        if 2 * (scaled % den) >= den {
            q += 1;
        }
        let int = q / scale;
        if decimals == 0 {
            int.to_string()
        } else {
            format!("{int}.{:0width$}", q % scale, width = decimals as usize)
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn reduce(num: u128, den: u128) -> Rate {
    let g = gcd(num, den).max(1);
    let (num, den) = (num / g, den / g);
    Rate {
        num: u64::try_from(num).expect("reduced rate numerator fits in u64"),
        den: u64::try_from(den).expect("reduced rate denominator fits in u64"),
    }
}

impl PartialEq for Rate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rate {}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Formats a real-valued rate as a percentage with `decimals` digits,
/// e.g. `0.989428 -> "98.9428"` at four decimals.
pub fn format_percent(rate: f64, decimals: usize) -> String {
    format!("{:.*}", decimals, rate * 100.0)
}

/// Decision threshold; finite by construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(tau: f64) -> Result<Self, MetricsError> {
        if tau.is_finite() {
            Ok(Self(tau))
        } else {
            Err(MetricsError::NonFiniteThreshold(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// ---------------------------------------------------------------------------
// Sorted score helper and candidate grid
// ---------------------------------------------------------------------------

/// Scores sorted ascending for O(log n) threshold counting.
#[derive(Debug, Clone)]
struct Sorted(Vec<f64>);

impl Sorted {
    fn new(role: &'static str, scores: &[f64]) -> Result<Self, MetricsError> {
        if scores.is_empty() {
            return Err(MetricsError::EmptySet(role));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(MetricsError::NonFiniteScore(role));
        }
        let mut v = scores.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Self(v))
    }

    fn len(&self) -> u64 {
        self.0.len() as u64
    }

    /// `|{s : s >= tau}|`
    fn at_least(&self, tau: f64) -> u64 {
        (self.0.len() - self.0.partition_point(|&s| s < tau)) as u64
    }

    /// `|{s : s < tau}|`
    fn below(&self, tau: f64) -> u64 {
        self.0.partition_point(|&s| s < tau) as u64
    }

    fn accept_rate(&self, tau: f64) -> Rate {
        Rate::new(self.at_least(tau), self.len())
    }

    fn reject_rate(&self, tau: f64) -> Rate {
        Rate::new(self.below(tau), self.len())
    }
}

/// Threshold strictly between `lo < hi` that splits them; `hi` itself when
/// the two are adjacent floats (ties go to the accepted side, so `tau = hi`
/// induces the same split).
fn split_point(lo: f64, hi: f64) -> f64 {
    let mid = lo * 0.5 + hi * 0.5;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

fn below_all(min: f64) -> f64 {
    let t = min - 1.0;
    if t.is_finite() && t < min {
        return t;
    }
    let t = min.next_down();
    // Only at -f64::MAX: accepting everything is already achieved by `min`.
    if t.is_finite() {
        t
    } else {
        min
    }
}

fn above_all(max: f64) -> f64 {
    let t = max + 1.0;
    if t.is_finite() && t > max {
        return t;
    }
    let t = max.next_up();
    // No finite threshold exceeds f64::MAX; the sentinel degenerates to it.
    if t.is_finite() {
        t
    } else {
        max
    }
}

/// The candidate threshold grid for a pool of scores, strictly increasing:
/// one sentinel below the minimum, the split point between every pair of
/// consecutive distinct values, one sentinel above the maximum.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    if v.is_empty() {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| *a == *b);
    let mut grid = Vec::with_capacity(v.len() + 1);
    grid.push(below_all(v[0]));
    grid.extend(v.windows(2).map(|w| split_point(w[0], w[1])));
    let top = above_all(v[v.len() - 1]);
    if top > *grid.last().expect("grid has a sentinel") {
        grid.push(top);
    }
    grid
}

fn merged_grid(a: &Sorted, b: &Sorted) -> Vec<f64> {
    let mut pool = Vec::with_capacity(a.0.len() + b.0.len());
    pool.extend_from_slice(&a.0);
    pool.extend_from_slice(&b.0);
    candidate_thresholds(&pool)
}

fn check_target(target: f64) -> Result<(), MetricsError> {
    if target.is_finite() && target > 0.0 && target < 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidTarget(target))
    }
}

// ---------------------------------------------------------------------------
// Point metrics
// ---------------------------------------------------------------------------

/// False match rate: non-mated comparisons accepted at `tau`.
pub fn fmr(nonmated: &[f64], tau: Threshold) -> Result<Rate, MetricsError> {
    Ok(Sorted::new("non-mated", nonmated)?.accept_rate(tau.0))
}

/// False non-match rate: mated comparisons rejected at `tau`.
pub fn fnmr(mated: &[f64], tau: Threshold) -> Result<Rate, MetricsError> {
    Ok(Sorted::new("mated", mated)?.reject_rate(tau.0))
}

/// Impostor attack presentation match rate: attack comparisons accepted at
/// `tau`.
pub fn iapmr(attack: &[f64], tau: Threshold) -> Result<Rate, MetricsError> {
    Ok(Sorted::new("attack", attack)?.accept_rate(tau.0))
}

/// Attack presentations classified as bona fide at `tau`.
pub fn apcer(attack: &[f64], tau: Threshold) -> Result<Rate, MetricsError> {
    Ok(Sorted::new("attack", attack)?.accept_rate(tau.0))
}

/// Bona fide presentations classified as attacks at `tau`.
pub fn bpcer(bonafide: &[f64], tau: Threshold) -> Result<Rate, MetricsError> {
    Ok(Sorted::new("bona fide", bonafide)?.reject_rate(tau.0))
}

// ---------------------------------------------------------------------------
// Operating points
// ---------------------------------------------------------------------------

/// Smallest (most permissive) grid threshold whose acceptance rate on
/// `negatives` does not exceed `target`.
fn most_permissive(negatives: &Sorted, target: f64) -> (Threshold, Rate) {
    let grid = candidate_thresholds(&negatives.0);
    for &tau in &grid {
        let rate = negatives.accept_rate(tau);
        if rate.value() <= target {
            return (Threshold(tau), rate);
        }
    }
    // The top sentinel accepts nothing, so the loop always returns unless the
    // maximum is f64::MAX.
    let tau = *grid.last().expect("non-empty grid");
    (Threshold(tau), negatives.accept_rate(tau))
}

/// Operating threshold for a target FMR and the FMR actually achieved there.
///
/// Returns the most permissive grid threshold with `fmr <= target`.
pub fn threshold_at_fmr(
    nonmated: &[f64],
    target_fmr: f64,
) -> Result<(Threshold, Rate), MetricsError> {
    let nonmated = Sorted::new("non-mated", nonmated)?;
    check_target(target_fmr)?;
    Ok(most_permissive(&nonmated, target_fmr))
}

/// Detection equal error rate.
///
/// Sweeps the joint grid, picks the threshold minimising
/// `|APCER - BPCER|` (smallest threshold on ties) and reports the mean of the
/// two rates there.
pub fn d_eer(bonafide: &[f64], attack: &[f64]) -> Result<(Rate, Threshold), MetricsError> {
    let bona = Sorted::new("bona fide", bonafide)?;
    let att = Sorted::new("attack", attack)?;
    let mut best: Option<(Rate, f64, Rate, Rate)> = None;
    for tau in merged_grid(&bona, &att) {
        let ap = att.accept_rate(tau);
        let bp = bona.reject_rate(tau);
        let gap = ap.abs_diff(bp);
        if best.as_ref().is_none_or(|(g, ..)| gap < *g) {
            best = Some((gap, tau, ap, bp));
        }
    }
    let (_, tau, ap, bp) = best.expect("grid is never empty");
    Ok((ap.mean(bp), Threshold(tau)))
}

/// BPCER at the most permissive attack-grid threshold meeting
/// `APCER <= target_apcer`.
///
/// The threshold is searched over the attack scores' grid only, mirroring
/// [`threshold_at_fmr`].
pub fn bpcer_at_apcer(
    bonafide: &[f64],
    attack: &[f64],
    target_apcer: f64,
) -> Result<(Rate, Threshold), MetricsError> {
    let bona = Sorted::new("bona fide", bonafide)?;
    let att = Sorted::new("attack", attack)?;
    check_target(target_apcer)?;
    let (tau, _) = most_permissive(&att, target_apcer);
    Ok((bona.reject_rate(tau.0), tau))
}

// ---------------------------------------------------------------------------
// DET curves
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetAxes {
    /// x = APCER, y = BPCER.
    ApcerBpcer,
    /// x = FMR, y = FNMR.
    FmrFnmr,
}

impl DetAxes {
    pub fn column_names(self) -> (&'static str, &'static str) {
        match self {
            DetAxes::ApcerBpcer => ("apcer", "bpcer"),
            DetAxes::FmrFnmr => ("fmr", "fnmr"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    /// Negatives accepted (APCER or FMR).
    pub x_rate: f64,
    /// Positives rejected (BPCER or FNMR).
    pub y_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub axes: DetAxes,
    pub points: Vec<DetPoint>,
}

/// One DET point per joint-grid threshold, in increasing threshold order.
///
/// `positives` are bona fide (or mated) scores, `negatives` attack (or
/// non-mated) scores.
pub fn det_curve(
    positives: &[f64],
    negatives: &[f64],
    axes: DetAxes,
) -> Result<DetCurve, MetricsError> {
    let pos = Sorted::new("positive", positives)?;
    let neg = Sorted::new("negative", negatives)?;
    let points = merged_grid(&pos, &neg)
        .into_iter()
        .map(|tau| DetPoint {
            threshold: tau,
            x_rate: neg.accept_rate(tau).value(),
            y_rate: pos.reject_rate(tau).value(),
        })
        .collect();
    Ok(DetCurve { axes, points })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// APCER targets of the two reported BPCER operating points.
pub const BPCER10_APCER: f64 = 0.10;
pub const BPCER20_APCER: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadReport {
    pub d_eer: Rate,
    pub eer_threshold: Threshold,
    /// BPCER at APCER = 10%.
    pub bpcer10: Rate,
    pub bpcer10_threshold: Threshold,
    /// BPCER at APCER = 5%.
    pub bpcer20: Rate,
    pub bpcer20_threshold: Threshold,
    pub n_bonafide: usize,
    pub n_attack: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnOperatingPoint {
    pub target_fmr: f64,
    pub threshold: Threshold,
    pub fmr: Rate,
    pub fnmr: Rate,
    pub iapmr: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnReport {
    /// In the order the targets were requested.
    pub operating_points: Vec<VulnOperatingPoint>,
    pub n_mated: usize,
    pub n_nonmated: usize,
    pub n_attack: usize,
}

fn scores_labelled(
    set: &ScoreSet,
    role: &'static str,
    expected: Label,
    polarity: Polarity,
) -> Result<Vec<f64>, MetricsError> {
    if set.polarity != polarity {
        return Err(MetricsError::PolarityMismatch {
            role,
            expected: polarity,
            found: set.polarity,
        });
    }
    if let Some(r) = set.records.iter().find(|r| r.label != expected) {
        return Err(MetricsError::LabelMismatch {
            sample_id: r.sample_id.clone(),
            expected,
            found: r.label,
        });
    }
    Ok(set.records.iter().map(|r| r.score).collect())
}

/// D-EER, BPCER10 and BPCER20 for one detector.
///
/// Both sets must have [`Polarity::HigherIsBonaFide`]; every record of
/// `bonafide` must be labelled bona fide and every record of `attack` attack.
pub fn evaluate_pad(bonafide: &ScoreSet, attack: &ScoreSet) -> Result<PadReport, MetricsError> {
    let bona = scores_labelled(
        bonafide,
        "bona fide",
        Label::BONA_FIDE,
        Polarity::HigherIsBonaFide,
    )?;
    let att = scores_labelled(attack, "attack", Label::ATTACK, Polarity::HigherIsBonaFide)?;
    let (d_eer, eer_threshold) = d_eer(&bona, &att)?;
    let (bpcer10, bpcer10_threshold) = bpcer_at_apcer(&bona, &att, BPCER10_APCER)?;
    let (bpcer20, bpcer20_threshold) = bpcer_at_apcer(&bona, &att, BPCER20_APCER)?;
    Ok(PadReport {
        d_eer,
        eer_threshold,
        bpcer10,
        bpcer10_threshold,
        bpcer20,
        bpcer20_threshold,
        n_bonafide: bona.len(),
        n_attack: att.len(),
    })
}

/// Thresholds at each target FMR with the FNMR and IAPMR observed there.
///
/// All sets must have [`Polarity::HigherIsMatch`] and carry the mated,
/// non-mated and attack-mated labels respectively.
pub fn evaluate_vuln(
    mated: &ScoreSet,
    nonmated: &ScoreSet,
    attack: &ScoreSet,
    targets: &[f64],
) -> Result<VulnReport, MetricsError> {
    let mated = scores_labelled(mated, "mated", Label::MATED, Polarity::HigherIsMatch)?;
    let nonmated = scores_labelled(
        nonmated,
        "non-mated",
        Label::NON_MATED,
        Polarity::HigherIsMatch,
    )?;
    let attack = scores_labelled(
        attack,
        "attack",
        Label::ATTACK_MATED,
        Polarity::HigherIsMatch,
    )?;
    let mated_sorted = Sorted::new("mated", &mated)?;
    let nonmated_sorted = Sorted::new("non-mated", &nonmated)?;
    let attack_sorted = Sorted::new("attack", &attack)?;
    let operating_points = targets
        .iter()
        .map(|&target_fmr| {
            check_target(target_fmr)?;
            let (threshold, fmr) = most_permissive(&nonmated_sorted, target_fmr);
            Ok(VulnOperatingPoint {
                target_fmr,
                threshold,
                fmr,
                fnmr: mated_sorted.reject_rate(threshold.0),
                iapmr: attack_sorted.accept_rate(threshold.0),
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(VulnReport {
        operating_points,
        n_mated: mated.len(),
        n_nonmated: nonmated.len(),
        n_attack: attack.len(),
    })
}

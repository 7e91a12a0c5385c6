//! File formats: score/feature/landmark/manifest CSV, 16-bit binary PGM
//! depth maps, JSON model and report artifacts, DET curves as CSV and SVG.
//!
//! Text formats use `.` as the decimal separator regardless of locale, and
//! numbers are written in their shortest round-trip form so that re-parsing
//! reproduces identical bits. JSON artifacts carry a `"magic": "PADEVAL"`
//! header and a format version; unknown versions are rejected.
//!
//! Byte-level descriptions of each format are in `docs/formats.md`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::defaults;
use crate::metrics::{
    DetAxes, DetCurve, DetPoint, PadReport, Rate, Threshold, VulnOperatingPoint, VulnReport,
};
use crate::ocsvm::OcsvmModel;
use crate::types::{DepthMap, FeatureMatrix, Label, LandmarkSet, Polarity, ScoreRecord, ScoreSet};

pub const MAGIC: &str = "PADEVAL";
pub const FORMAT_VERSION: u32 = 1;

/// Header every JSON artifact starts with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVersion {
    pub magic: String,
    pub version: u32,
}

impl FormatVersion {
    pub fn current() -> Self {
        Self {
            magic: MAGIC.to_string(),
            version: FORMAT_VERSION,
        }
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseReason {
    #[error("expected header {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("expected {expected} fields, found {got}")]
    FieldCount { expected: usize, got: usize },
    #[error("empty sample id")]
    EmptyId,
    #[error("{0}")]
    UnknownLabel(String),
    #[error("cannot parse {0:?} as a number")]
    BadNumber(String),
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("non-finite value")]
    NonFiniteValue,
    #[error("expected landmark index {expected}, found {found}")]
    IndexOrder { expected: usize, found: String },
    #[error("invalid UTF-8")]
    InvalidUtf8,
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: ParseReason },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("line {line}: duplicate sample id {sample_id:?}")]
    DuplicateId { line: u64, sample_id: String },
    #[error("line {line}: row has {got} features, header declares {expected}")]
    RaggedRow {
        line: u64,
        expected: usize,
        got: usize,
    },
    #[error("not a binary PGM file (magic must be P5)")]
    BadMagic,
    #[error("PGM maxval {0} unsupported, depth maps must use 65535")]
    BadMaxval(u64),
    #[error("malformed PGM header: {0}")]
    BadPgmHeader(String),
    #[error("PGM raster truncated: need {expected} bytes, found {got}")]
    Truncated { expected: usize, got: usize },
    #[error("not a PADEVAL artifact")]
    NotAnArtifact,
    #[error("unsupported format version {0}, this build reads version {FORMAT_VERSION}")]
    UnsupportedVersion(u64),
    #[error("artifact kind is {found:?}, expected {expected:?}")]
    WrongKind { expected: String, found: String },
    #[error("malformed JSON artifact: {0}")]
    Json(String),
    #[error("cannot write: {0}")]
    Unwritable(String),
}

fn parse_err(line: u64, reason: ParseReason) -> IngestError {
    IngestError::Parse { line, reason }
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn parse_f64(line: u64, s: &str) -> Result<f64, IngestError> {
    s.parse::<f64>()
        .map_err(|_| parse_err(line, ParseReason::BadNumber(s.to_string())))
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

struct Row {
    line: u64,
    fields: csv::StringRecord,
}

/// Splits `bytes` into the header row and data rows, enforcing the exact
/// header when `expected` is given.
fn read_csv(bytes: &[u8], expected: Option<&[&str]>) -> Result<(Row, Vec<Row>), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let reason = match e.kind() {
                csv::ErrorKind::Utf8 { .. } => ParseReason::InvalidUtf8,
                _ => ParseReason::Malformed(e.to_string()),
            };
            parse_err(line, reason)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(Row { line, fields: rec });
    }
    let mut it = rows.into_iter();
    let header = it.next().ok_or(IngestError::EmptyFile)?;
    if let Some(expected) = expected {
        let found: Vec<&str> = header.fields.iter().collect();
        if found != expected {
            return Err(parse_err(
                header.line,
                ParseReason::BadHeader {
                    expected: expected.join(","),
                    found: found.join(","),
                },
            ));
        }
    }
    let data: Vec<Row> = it.collect();
    if data.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok((header, data))
}

fn expect_fields(row: &Row, n: usize) -> Result<(), IngestError> {
    if row.fields.len() != n {
        return Err(parse_err(
            row.line,
            ParseReason::FieldCount {
                expected: n,
                got: row.fields.len(),
            },
        ));
    }
    Ok(())
}

fn write_csv(rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, IngestError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)
            .map_err(|e| IngestError::Unwritable(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| IngestError::Unwritable(e.to_string()))
}

fn sample_id(row: &Row, idx: usize) -> Result<String, IngestError> {
    let id = &row.fields[idx];
    if id.is_empty() {
        return Err(parse_err(row.line, ParseReason::EmptyId));
    }
    Ok(id.to_string())
}

fn label(row: &Row, idx: usize) -> Result<Label, IngestError> {
    row.fields[idx]
        .parse::<Label>()
        .map_err(|e| parse_err(row.line, ParseReason::UnknownLabel(e.to_string())))
}

fn check_unique(seen: &mut HashSet<String>, line: u64, id: &str) -> Result<(), IngestError> {
    if !seen.insert(id.to_string()) {
        return Err(IngestError::DuplicateId {
            line,
            sample_id: id.to_string(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

pub const SCORES_HEADER: [&str; 3] = ["sample_id", "label", "score"];

/// Parses a `sample_id,label,score` file. Polarity is not stored in the file
/// and must be supplied by the caller.
pub fn parse_scores(bytes: &[u8], polarity: Polarity) -> Result<ScoreSet, IngestError> {
    let (_, rows) = read_csv(bytes, Some(&SCORES_HEADER))?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        expect_fields(row, 3)?;
        let id = sample_id(row, 0)?;
        let label = label(row, 1)?;
        let score = parse_f64(row.line, &row.fields[2])?;
        if !score.is_finite() {
            return Err(parse_err(row.line, ParseReason::NonFiniteScore));
        }
        check_unique(&mut seen, row.line, &id)?;
        records.push(ScoreRecord::new(id, label, score));
    }
    Ok(ScoreSet { records, polarity })
}

pub fn write_scores(set: &ScoreSet) -> Result<Vec<u8>, IngestError> {
    let header = SCORES_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(std::iter::once(header).chain(set.records.iter().map(|r| {
        vec![
            r.sample_id.clone(),
            r.label.to_string(),
            format_f64(r.score),
        ]
    })))
}

// ---------------------------------------------------------------------------
// Sample labels (sample_id,label)
// ---------------------------------------------------------------------------

pub const LABELS_HEADER: [&str; 2] = ["sample_id", "label"];

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<(String, Label)>, IngestError> {
    let (_, rows) = read_csv(bytes, Some(&LABELS_HEADER))?;
    let mut seen = HashSet::with_capacity(rows.len());
    rows.iter()
        .map(|row| {
            expect_fields(row, 2)?;
            let id = sample_id(row, 0)?;
            check_unique(&mut seen, row.line, &id)?;
            Ok((id, label(row, 1)?))
        })
        .collect()
}

pub fn write_labels(labels: &[(String, Label)]) -> Result<Vec<u8>, IngestError> {
    let header = LABELS_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(
        std::iter::once(header).chain(labels.iter().map(|(id, l)| vec![id.clone(), l.to_string()])),
    )
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Parses `sample_id,f0,...,f{d-1}`.
pub fn parse_features(bytes: &[u8]) -> Result<FeatureMatrix, IngestError> {
    let (header, rows) = read_csv(bytes, None)?;
    let d = header.fields.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("sample_id".to_string())
        .chain((0..d).map(|k| format!("f{k}")))
        .collect();
    if d == 0 || header.fields.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(
            header.line,
            ParseReason::BadHeader {
                expected: "sample_id,f0,...,f{d-1} with d >= 1".into(),
                found: header.fields.iter().collect::<Vec<_>>().join(","),
            },
        ));
    }
    let mut seen = HashSet::with_capacity(rows.len());
    let mut ids = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * d);
    for row in &rows {
        if row.fields.len() != d + 1 {
            return Err(IngestError::RaggedRow {
                line: row.line,
                expected: d,
                got: row.fields.len().saturating_sub(1),
            });
        }
        let id = sample_id(row, 0)?;
        check_unique(&mut seen, row.line, &id)?;
        for f in row.fields.iter().skip(1) {
            let v = parse_f64(row.line, f)?;
            if !v.is_finite() {
                return Err(parse_err(row.line, ParseReason::NonFiniteValue));
            }
            data.push(v);
        }
        ids.push(id);
    }
    Ok(FeatureMatrix::from_flat(ids, d, data).expect("shape and finiteness checked"))
}

pub fn write_features(m: &FeatureMatrix) -> Result<Vec<u8>, IngestError> {
    let header = std::iter::once("sample_id".to_string())
        .chain((0..m.dim()).map(|k| format!("f{k}")))
        .collect();
    write_csv(
        std::iter::once(header).chain(m.rows().zip(m.sample_ids()).map(|(row, id)| {
            std::iter::once(id.clone())
                .chain(row.iter().map(|&v| format_f64(v)))
                .collect()
        })),
    )
}

// ---------------------------------------------------------------------------
// Landmarks
// ---------------------------------------------------------------------------

pub const LANDMARKS_HEADER: [&str; 3] = ["index", "x", "y"];

/// Parses `index,x,y` rows; indices must run 0, 1, 2, ... in order.
pub fn parse_landmarks(bytes: &[u8]) -> Result<LandmarkSet, IngestError> {
    let (_, rows) = read_csv(bytes, Some(&LANDMARKS_HEADER))?;
    let mut points = Vec::with_capacity(rows.len());
    for (expected, row) in rows.iter().enumerate() {
        expect_fields(row, 3)?;
        if row.fields[0].parse::<usize>() != Ok(expected) {
            return Err(parse_err(
                row.line,
                ParseReason::IndexOrder {
                    expected,
                    found: row.fields[0].to_string(),
                },
            ));
        }
        let x = parse_f64(row.line, &row.fields[1])?;
        let y = parse_f64(row.line, &row.fields[2])?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(row.line, ParseReason::NonFiniteValue));
        }
        points.push((x, y));
    }
    Ok(LandmarkSet::new(points).expect("non-empty and finite"))
}

pub fn write_landmarks(lms: &LandmarkSet) -> Result<Vec<u8>, IngestError> {
    let header = LANDMARKS_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(
        std::iter::once(header).chain(
            lms.points()
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| vec![i.to_string(), format_f64(x), format_f64(y)]),
        ),
    )
}

// ---------------------------------------------------------------------------
// Depth-batch manifest
// ---------------------------------------------------------------------------

pub const MANIFEST_HEADER: [&str; 4] = ["sample_id", "label", "depth", "landmarks"];

/// One row of a depth-batch manifest. Paths are as written in the file;
/// relative paths are resolved by the caller against the manifest location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub label: Label,
    pub depth: PathBuf,
    pub landmarks: PathBuf,
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Vec<ManifestEntry>, IngestError> {
    let (_, rows) = read_csv(bytes, Some(&MANIFEST_HEADER))?;
    let mut seen = HashSet::with_capacity(rows.len());
    rows.iter()
        .map(|row| {
            expect_fields(row, 4)?;
            let id = sample_id(row, 0)?;
            check_unique(&mut seen, row.line, &id)?;
            for (i, what) in [(2, "depth"), (3, "landmarks")] {
                if row.fields[i].is_empty() {
                    return Err(parse_err(
                        row.line,
                        ParseReason::Malformed(format!("empty {what} path")),
                    ));
                }
            }
            Ok(ManifestEntry {
                sample_id: id,
                label: label(row, 1)?,
                depth: PathBuf::from(&row.fields[2]),
                landmarks: PathBuf::from(&row.fields[3]),
            })
        })
        .collect()
}

pub fn write_manifest(entries: &[ManifestEntry]) -> Result<Vec<u8>, IngestError> {
    let header = MANIFEST_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = entries
        .iter()
        .map(|e| {
            let path = |p: &PathBuf| {
                p.to_str()
                    .map(|s| s.replace('\\', "/"))
                    .ok_or_else(|| IngestError::Unwritable(format!("non UTF-8 path {p:?}")))
            };
            Ok(vec![
                e.sample_id.clone(),
                e.label.to_string(),
                path(&e.depth)?,
                path(&e.landmarks)?,
            ])
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    write_csv(std::iter::once(header).chain(rows))
}

// ---------------------------------------------------------------------------
// Binary PGM (P5, 16-bit)
// ---------------------------------------------------------------------------

pub const PGM_MAXVAL: u64 = 65535;

struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmHeader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, IngestError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut v: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or_else(|| IngestError::BadPgmHeader(format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(IngestError::BadPgmHeader(format!("missing {what}")));
        }
        Ok(v)
    }
}

/// Decodes a binary PGM with maxval 65535 and big-endian samples.
pub fn parse_depth_pgm(bytes: &[u8]) -> Result<DepthMap, IngestError> {
    if bytes.get(..2) != Some(b"P5".as_slice()) {
        return Err(IngestError::BadMagic);
    }
    let mut h = PgmHeader { bytes, pos: 2 };
    if !h
        .bytes
        .get(h.pos)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(IngestError::BadMagic);
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    // Exactly one whitespace byte separates the header from the raster.
    if !h.bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(IngestError::BadPgmHeader(
            "maxval must be followed by a single whitespace byte".into(),
        ));
    }
    h.pos += 1;
    if maxval != PGM_MAXVAL {
        return Err(IngestError::BadMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(IngestError::BadPgmHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let n = usize::try_from(width)
        .ok()
        .zip(usize::try_from(height).ok())
        .and_then(|(w, h)| w.checked_mul(h))
        .and_then(|n| n.checked_mul(2).map(|_| n))
        .ok_or_else(|| IngestError::BadPgmHeader("dimensions overflow".into()))?;
    let raster = &bytes[h.pos..];
    if raster.len() / 2 < n {
        return Err(IngestError::Truncated {
            expected: n * 2,
            got: raster.len(),
        });
    }
    let values = raster[..n * 2]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(DepthMap::new(width as usize, height as usize, values).expect("shape checked"))
}

pub fn write_depth_pgm(map: &DepthMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", map.width(), map.height(), PGM_MAXVAL).into_bytes();
    out.reserve(map.values().len() * 2);
    for v in map.values() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

// ---------------------------------------------------------------------------
// JSON artifacts
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EnvelopeOut<'a, T: Serialize> {
    magic: &'static str,
    version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn write_artifact<T: Serialize>(kind: &str, body: &T) -> Result<Vec<u8>, IngestError> {
    let env = EnvelopeOut {
        magic: MAGIC,
        version: FORMAT_VERSION,
        kind,
        body,
    };
    let mut out =
        serde_json::to_vec_pretty(&env).map_err(|e| IngestError::Unwritable(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn read_artifact<T: DeserializeOwned>(bytes: &[u8], kind: &str) -> Result<T, IngestError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| IngestError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(IngestError::NotAnArtifact)?;
    if obj.get("magic").and_then(|m| m.as_str()) != Some(MAGIC) {
        return Err(IngestError::NotAnArtifact);
    }
    let version = obj
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| IngestError::Json("missing version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(IngestError::UnsupportedVersion(version));
    }
    let found = obj.get("kind").and_then(|k| k.as_str()).unwrap_or("");
    if found != kind {
        return Err(IngestError::WrongKind {
            expected: kind.to_string(),
            found: found.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|e| IngestError::Json(e.to_string()))
}

pub const MODEL_KIND: &str = "ocsvm-model";
pub const PAD_REPORT_KIND: &str = "pad-report";
pub const VULN_REPORT_KIND: &str = "vuln-report";

#[derive(Serialize, Deserialize)]
struct ModelBody {
    d: usize,
    model: OcsvmModel,
}

pub fn write_model(model: &OcsvmModel) -> Result<Vec<u8>, IngestError> {
    write_artifact(
        MODEL_KIND,
        &ModelBody {
            d: model.dim(),
            model: model.clone(),
        },
    )
}

pub fn parse_model(bytes: &[u8]) -> Result<OcsvmModel, IngestError> {
    let body: ModelBody = read_artifact(bytes, MODEL_KIND)?;
    let m = body.model;
    let consistent = m.w.len() == body.d
        && m.standardizer
            .as_ref()
            .is_none_or(|s| s.scale.len() == body.d)
        && m.w
            .iter()
            .chain(std::iter::once(&m.rho))
            .all(|v| v.is_finite());
    if !consistent {
        return Err(IngestError::Json(
            "model dimension fields disagree or contain non-finite values".into(),
        ));
    }
    Ok(m)
}

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub polarity: Polarity,
    pub decision_rule: String,
    pub threshold_grid: String,
    pub nu: f64,
    pub fusion_weights: (f64, f64),
    pub min_valid: usize,
    pub tol: f64,
    pub standardize: bool,
    /// Free-form provenance (input roles, notes).
    pub notes: BTreeMap<String, String>,
}

impl ReportConfig {
    pub fn with_defaults(polarity: Polarity) -> Self {
        Self {
            polarity,
            decision_rule: "accept (bona fide / match) iff score >= threshold".into(),
            threshold_grid: "midpoints of consecutive distinct sorted scores plus one below \
                             the minimum and one above the maximum"
                .into(),
            nu: defaults::NU,
            fusion_weights: (defaults::FUSION_WEIGHT_A, defaults::FUSION_WEIGHT_B),
            min_valid: defaults::MIN_VALID_LANDMARKS,
            tol: defaults::OCSVM_TOL,
            standardize: defaults::STANDARDIZE,
            notes: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateJson {
    pub num: u64,
    pub den: u64,
    pub value: f64,
    pub percent: String,
}

impl RateJson {
    fn new(r: Rate, decimals: u32) -> Self {
        Self {
            num: r.num(),
            den: r.den(),
            value: r.value(),
            percent: r.percent(decimals),
        }
    }

    fn rate(&self) -> Result<Rate, IngestError> {
        if self.den == 0 || self.num > self.den {
            return Err(IngestError::Json(format!(
                "invalid rate {}/{}",
                self.num, self.den
            )));
        }
        Ok(Rate::new(self.num, self.den))
    }
}

/// Decimal places used for PAD rates (D-EER, BPCER) in percent.
pub const PAD_PERCENT_DECIMALS: u32 = 2;
/// Decimal places used for IAPMR, FMR and FNMR in percent.
pub const VULN_PERCENT_DECIMALS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PadReportBody {
    summary: Vec<String>,
    d_eer: RateJson,
    eer_threshold: f64,
    bpcer10: RateJson,
    bpcer10_threshold: f64,
    bpcer20: RateJson,
    bpcer20_threshold: f64,
    n_bonafide: usize,
    n_attack: usize,
    config: ReportConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    det: Option<DetCurve>,
}

/// Human-readable summary lines, rates in percent with two decimals.
pub fn pad_summary(r: &PadReport) -> Vec<String> {
    let p = PAD_PERCENT_DECIMALS;
    vec![
        format!("D-EER: {}%", r.d_eer.percent(p)),
        format!("BPCER10: {}%", r.bpcer10.percent(p)),
        format!("BPCER20: {}%", r.bpcer20.percent(p)),
        format!("bona fide: {}, attacks: {}", r.n_bonafide, r.n_attack),
    ]
}

/// Serializes a PAD report, optionally embedding the DET curve.
pub fn write_pad_report(
    report: &PadReport,
    config: &ReportConfig,
    det: Option<&DetCurve>,
) -> Result<Vec<u8>, IngestError> {
    let p = PAD_PERCENT_DECIMALS;
    write_artifact(
        PAD_REPORT_KIND,
        &PadReportBody {
            summary: pad_summary(report),
            d_eer: RateJson::new(report.d_eer, p),
            eer_threshold: report.eer_threshold.value(),
            bpcer10: RateJson::new(report.bpcer10, p),
            bpcer10_threshold: report.bpcer10_threshold.value(),
            bpcer20: RateJson::new(report.bpcer20, p),
            bpcer20_threshold: report.bpcer20_threshold.value(),
            n_bonafide: report.n_bonafide,
            n_attack: report.n_attack,
            config: config.clone(),
            det: det.cloned(),
        },
    )
}

fn threshold(v: f64) -> Result<Threshold, IngestError> {
    Threshold::new(v).map_err(|e| IngestError::Json(e.to_string()))
}

pub fn parse_pad_report(bytes: &[u8]) -> Result<(PadReport, ReportConfig), IngestError> {
    let b: PadReportBody = read_artifact(bytes, PAD_REPORT_KIND)?;
    Ok((
        PadReport {
            d_eer: b.d_eer.rate()?,
            eer_threshold: threshold(b.eer_threshold)?,
            bpcer10: b.bpcer10.rate()?,
            bpcer10_threshold: threshold(b.bpcer10_threshold)?,
            bpcer20: b.bpcer20.rate()?,
            bpcer20_threshold: threshold(b.bpcer20_threshold)?,
            n_bonafide: b.n_bonafide,
            n_attack: b.n_attack,
        },
        b.config,
    ))
}

/// `0.001 -> "0.1"`, `0.01 -> "1"`.
pub fn target_percent_label(target: f64) -> String {
    let s = format!("{:.6}", target * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VulnPointJson {
    operating_point: String,
    target_fmr: f64,
    threshold: f64,
    fmr: RateJson,
    fnmr: RateJson,
    iapmr: RateJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VulnReportBody {
    summary: Vec<String>,
    operating_points: Vec<VulnPointJson>,
    n_mated: usize,
    n_nonmated: usize,
    n_attack: usize,
    config: ReportConfig,
}

pub fn vuln_summary(r: &VulnReport) -> Vec<String> {
    let p = VULN_PERCENT_DECIMALS;
    let mut lines: Vec<String> = r
        .operating_points
        .iter()
        .map(|op| {
            format!(
                "FMR={}%: threshold={}, FMR={}%, FNMR={}%, IAPMR={}%",
                target_percent_label(op.target_fmr),
                format_f64(op.threshold.value()),
                op.fmr.percent(p),
                op.fnmr.percent(p),
                op.iapmr.percent(p),
            )
        })
        .collect();
    lines.push(format!(
        "mated: {}, non-mated: {}, attacks: {}",
        r.n_mated, r.n_nonmated, r.n_attack
    ));
    lines
}

pub fn write_vuln_report(
    report: &VulnReport,
    config: &ReportConfig,
) -> Result<Vec<u8>, IngestError> {
    let p = VULN_PERCENT_DECIMALS;
    write_artifact(
        VULN_REPORT_KIND,
        &VulnReportBody {
            summary: vuln_summary(report),
            operating_points: report
                .operating_points
                .iter()
                .map(|op| VulnPointJson {
                    operating_point: format!("FMR={}%", target_percent_label(op.target_fmr)),
                    target_fmr: op.target_fmr,
                    threshold: op.threshold.value(),
                    fmr: RateJson::new(op.fmr, p),
                    fnmr: RateJson::new(op.fnmr, p),
                    iapmr: RateJson::new(op.iapmr, p),
                })
                .collect(),
            n_mated: report.n_mated,
            n_nonmated: report.n_nonmated,
            n_attack: report.n_attack,
            config: config.clone(),
        },
    )
}

pub fn parse_vuln_report(bytes: &[u8]) -> Result<(VulnReport, ReportConfig), IngestError> {
    let b: VulnReportBody = read_artifact(bytes, VULN_REPORT_KIND)?;
    let operating_points = b
        .operating_points
        .iter()
        .map(|op| {
            Ok(VulnOperatingPoint {
                target_fmr: op.target_fmr,
                threshold: threshold(op.threshold)?,
                fmr: op.fmr.rate()?,
                fnmr: op.fnmr.rate()?,
                iapmr: op.iapmr.rate()?,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok((
        VulnReport {
            operating_points,
            n_mated: b.n_mated,
            n_nonmated: b.n_nonmated,
            n_attack: b.n_attack,
        },
        b.config,
    ))
}

// ---------------------------------------------------------------------------
// DET curves
// ---------------------------------------------------------------------------

pub fn write_det_csv(curve: &DetCurve) -> Result<Vec<u8>, IngestError> {
    let (x, y) = curve.axes.column_names();
    let header = vec!["threshold".to_string(), x.to_string(), y.to_string()];
    write_csv(std::iter::once(header).chain(curve.points.iter().map(|p| {
        vec![
            format_f64(p.threshold),
            format_f64(p.x_rate),
            format_f64(p.y_rate),
        ]
    })))
}

/// Parses a DET CSV; the axes are recovered from the header
/// (`threshold,apcer,bpcer` or `threshold,fmr,fnmr`).
pub fn parse_det_csv(bytes: &[u8]) -> Result<DetCurve, IngestError> {
    let (header, rows) = read_csv(bytes, None)?;
    let found: Vec<&str> = header.fields.iter().collect();
    let axes = [DetAxes::ApcerBpcer, DetAxes::FmrFnmr]
        .into_iter()
        .find(|a| {
            let (x, y) = a.column_names();
            found == ["threshold", x, y]
        })
        .ok_or_else(|| {
            parse_err(
                header.line,
                ParseReason::BadHeader {
                    expected: "threshold,apcer,bpcer or threshold,fmr,fnmr".into(),
                    found: found.join(","),
                },
            )
        })?;
    let points = rows
        .iter()
        .map(|row| {
            expect_fields(row, 3)?;
            let v: Vec<f64> = row
                .fields
                .iter()
                .map(|f| parse_f64(row.line, f))
                .collect::<Result<_, _>>()?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(parse_err(row.line, ParseReason::NonFiniteValue));
            }
            if !(0.0..=1.0).contains(&v[1]) || !(0.0..=1.0).contains(&v[2]) {
                return Err(parse_err(
                    row.line,
                    ParseReason::Malformed("rates must lie in [0, 1]".into()),
                ));
            }
            Ok(DetPoint {
                threshold: v[0],
                x_rate: v[1],
                y_rate: v[2],
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(DetCurve { axes, points })
}

/// Axis range of the SVG plot, as rates.
const SVG_RATE_MIN: f64 = 0.0005;
const SVG_RATE_MAX: f64 = 0.995;
const SVG_TICKS: [f64; 11] = [0.001, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95, 0.99];

/// Renders the curve on normal-deviate (probit) scaled axes. Rates outside
/// the plotted range are clamped to its border.
pub fn write_det_svg(curve: &DetCurve, title: &str) -> Vec<u8> {
    let normal = Normal::standard();
    let probit = |p: f64| normal.inverse_cdf(p.clamp(SVG_RATE_MIN, SVG_RATE_MAX));
    let (lo, hi) = (probit(SVG_RATE_MIN), probit(SVG_RATE_MAX));
    let (size, margin) = (480.0, 60.0);
    let plot = size - 2.0 * margin;
    let sx = |p: f64| margin + (probit(p) - lo) / (hi - lo) * plot;
    let sy = |p: f64| size - margin - (probit(p) - lo) / (hi - lo) * plot;
    let (xname, yname) = match curve.axes {
        DetAxes::ApcerBpcer => ("APCER (%)", "BPCER (%)"),
        DetAxes::FmrFnmr => ("FMR (%)", "FNMR (%)"),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        size / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );
    for t in SVG_TICKS {
        let label = target_percent_label(t);
        let (x, y) = (sx(t), sy(t));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{margin}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            size - margin
        );
        let _ = writeln!(
            s,
            r##"<line x1="{margin}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            size - margin
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            size - margin + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            margin - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{xname}</text>"#,
        size / 2.0,
        size - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{yname}</text>"#,
        size / 2.0,
        size / 2.0
    );
    let pts: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.x_rate), sy(p.y_rate)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s.into_bytes()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::det_curve;

    #[test]
    fn parses_single_score_row() {
        let s = parse_scores(
            b"sample_id,label,score\na,bonafide,0.9\n",
            Polarity::HigherIsBonaFide,
        )
        .unwrap();
        assert_eq!(
            s.records,
            vec![ScoreRecord::new("a", Label::BONA_FIDE, 0.9)]
        );
    }

    #[test]
    fn nan_score_reports_line_three() {
        let err = parse_scores(
            b"sample_id,label,score\na,bonafide,0.9\nb,attack,NaN\n",
            Polarity::HigherIsBonaFide,
        )
        .unwrap_err();
        assert_eq!(
            err,
            IngestError::Parse {
                line: 3,
                reason: ParseReason::NonFiniteScore
            }
        );
    }

    #[test]
    fn score_file_errors() {
        let p = Polarity::HigherIsBonaFide;
        assert_eq!(parse_scores(b"", p), Err(IngestError::EmptyFile));
        assert_eq!(
            parse_scores(b"sample_id,label,score\n", p),
            Err(IngestError::EmptyFile)
        );
        assert!(matches!(
            parse_scores(b"id,label,score\na,attack,1\n", p),
            Err(IngestError::Parse {
                line: 1,
                reason: ParseReason::BadHeader { .. }
            })
        ));
        assert!(matches!(
            parse_scores(b"sample_id,label,score\na,attack,1\na,attack,2\n", p),
            Err(IngestError::DuplicateId { line: 3, .. })
        ));
        // Comma decimal separator shows up as an extra field.
        assert!(matches!(
            parse_scores(b"sample_id,label,score\na,attack,0,5\n", p),
            Err(IngestError::Parse {
                line: 2,
                reason: ParseReason::FieldCount {
                    expected: 3,
                    got: 4
                }
            })
        ));
        assert!(matches!(
            parse_scores(b"sample_id,label,score\na,spoof,0.5\n", p),
            Err(IngestError::Parse {
                line: 2,
                reason: ParseReason::UnknownLabel(_)
            })
        ));
        assert!(matches!(
            parse_scores(b"sample_id,label,score\n,attack,0.5\n", p),
            Err(IngestError::Parse {
                line: 2,
                reason: ParseReason::EmptyId
            })
        ));
    }

    #[test]
    fn features_round_trip_and_ragged() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, -2.5, 3e-9], vec![0.1, 0.2, 1e300]],
        )
        .unwrap();
        let bytes = write_features(&m).unwrap();
        assert!(bytes.starts_with(b"sample_id,f0,f1,f2\n"));
        assert_eq!(parse_features(&bytes).unwrap(), m);
        assert!(matches!(
            parse_features(b"sample_id,f0,f1\na,1,2\nb,1\n"),
            Err(IngestError::RaggedRow {
                line: 3,
                expected: 2,
                got: 1
            })
        ));
        assert!(parse_features(b"sample_id\na\n").is_err());
        assert!(parse_features(b"sample_id,f1\na,1\n").is_err());
    }

    #[test]
    fn wide_feature_row_reports_dimension() {
        let header: Vec<String> = std::iter::once("sample_id".to_string())
            .chain((0..768).map(|k| format!("f{k}")))
            .collect();
        let row: Vec<String> = std::iter::once("x".to_string())
            .chain((0..768).map(|k| format!("{}", k as f64 * 0.01)))
            .collect();
        let text = format!("{}\n{}\n", header.join(","), row.join(","));
        assert_eq!(parse_features(text.as_bytes()).unwrap().dim(), 768);
    }

    #[test]
    fn pgm_decode_bit_exact() {
        let mut bytes = b"P5\n2 2\n65535\n".to_vec();
        for v in [0u16, 1, 2, 3] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let map = parse_depth_pgm(&bytes).unwrap();
        assert_eq!((map.width(), map.height()), (2, 2));
        assert_eq!(map.values(), &[0, 1, 2, 3]);
        assert_eq!(write_depth_pgm(&map), bytes);
    }

    #[test]
    fn pgm_header_comments_accepted() {
        let mut bytes = b"P5 # depth\n# more\n1 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0x12, 0x34]);
        assert_eq!(parse_depth_pgm(&bytes).unwrap().values(), &[0x1234]);
    }

    #[test]
    fn pgm_errors() {
        assert_eq!(
            parse_depth_pgm(b"P2\n1 1\n65535\n00"),
            Err(IngestError::BadMagic)
        );
        assert_eq!(
            parse_depth_pgm(b"P5\n1 1\n255\n\x00"),
            Err(IngestError::BadMaxval(255))
        );
        assert_eq!(
            parse_depth_pgm(b"P5\n2 2\n65535\n\x00\x01\x00"),
            Err(IngestError::Truncated {
                expected: 8,
                got: 3
            })
        );
        assert!(matches!(
            parse_depth_pgm(b"P5\n0 2\n65535\n"),
            Err(IngestError::BadPgmHeader(_))
        ));
        assert!(matches!(
            parse_depth_pgm(b"P5\n99999999999999999999999 2\n65535\n"),
            Err(IngestError::BadPgmHeader(_))
        ));
        assert!(matches!(
            parse_depth_pgm(b"P5\n4294967296 4294967296\n65535\n"),
            Err(IngestError::Truncated { .. }) | Err(IngestError::BadPgmHeader(_))
        ));
    }

    #[test]
    fn landmarks_round_trip_and_index_order() {
        let lms = LandmarkSet::new(vec![(1.5, 2.25), (0.0, -0.0), (640.125, 359.875)]).unwrap();
        let bytes = write_landmarks(&lms).unwrap();
        let back = parse_landmarks(&bytes).unwrap();
        assert_eq!(back, lms);
        assert!(back.points()[1].1.is_sign_negative());
        assert!(matches!(
            parse_landmarks(b"index,x,y\n0,1,2\n2,3,4\n"),
            Err(IngestError::Parse {
                line: 3,
                reason: ParseReason::IndexOrder { .. }
            })
        ));
        assert!(matches!(
            parse_landmarks(b"index,x,y\n1,1,2\n"),
            Err(IngestError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn pad_report_summary_uses_two_decimals() {
        // 0.1252 exactly: 313/2500.
        let r = PadReport {
            d_eer: Rate::new(313, 2500),
            eer_threshold: Threshold::new(0.5).unwrap(),
            bpcer10: Rate::new(98, 728),
            bpcer10_threshold: Threshold::new(0.4).unwrap(),
            bpcer20: Rate::new(135, 728),
            bpcer20_threshold: Threshold::new(0.3).unwrap(),
            n_bonafide: 728,
            n_attack: 1604,
        };
        let cfg = ReportConfig::with_defaults(Polarity::HigherIsBonaFide);
        let bytes = write_pad_report(&r, &cfg, None).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("\"D-EER: 12.52%\""));
        assert!(text.contains("\"BPCER10: 13.46%\""));
        assert!(text.contains("\"BPCER20: 18.54%\""));
        assert_eq!(parse_pad_report(&bytes).unwrap(), (r, cfg));
    }

    #[test]
    fn artifact_version_checked() {
        let r = br#"{"magic":"PADEVAL","version":2,"kind":"pad-report"}"#;
        assert_eq!(parse_pad_report(r), Err(IngestError::UnsupportedVersion(2)));
        let r = br#"{"magic":"OTHER","version":1}"#;
        assert_eq!(parse_pad_report(r), Err(IngestError::NotAnArtifact));
        let r = br#"{"magic":"PADEVAL","version":1,"kind":"ocsvm-model"}"#;
        assert!(matches!(
            parse_pad_report(r),
            Err(IngestError::WrongKind { .. })
        ));
    }

    #[test]
    fn target_labels() {
        assert_eq!(target_percent_label(0.001), "0.1");
        assert_eq!(target_percent_label(0.01), "1");
        assert_eq!(target_percent_label(0.05), "5");
    }

    #[test]
    fn det_csv_row_count_matches_grid() {
        let c = det_curve(&[0.9, 0.8, 0.8], &[0.1, 0.5], DetAxes::ApcerBpcer).unwrap();
        let bytes = write_det_csv(&c).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + c.points.len());
        assert_eq!(c.points.len(), 5);
        assert!(text.starts_with("threshold,apcer,bpcer\n"));
        assert_eq!(parse_det_csv(&bytes).unwrap(), c);
        let svg = String::from_utf8(write_det_svg(&c, "DV <test>")).unwrap();
        assert!(svg.contains("<polyline") && svg.contains("DV &lt;test&gt;"));
        assert!(svg.contains(">0.1<") && svg.contains(">40<"));
    }

    #[test]
    fn shortest_float_format_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            -0.0,
            1e-300,
            5e-324,
            1.7976931348623157e308,
            123456.789,
        ] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_f64(0.25), "0.25");
        assert_eq!(format_f64(1e-7), "1e-7");
    }
}

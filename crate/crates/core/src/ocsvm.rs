//! Linear-kernel ν one-class SVM, used as the anomaly-detection (AD) PAD
//! model. Trained on bona fide feature vectors only.
//!
//! The dual problem solved here is
//!
//! ```text
//! min_a  1/2 a'Qa,   Q_ij = x_i . x_j
//! s.t.   0 <= a_i <= 1/(nu n),   sum_i a_i = 1
//! ```
//!
//! by sequential minimal optimisation: each step moves mass between the two
//! coordinates that violate the KKT conditions the most, which keeps the
//! equality constraint exact. With a linear kernel the primal weight vector
//! `w = sum_i a_i x_i` is kept alongside the duals and the decision function
//! is `f(x) = w . x - rho`: positive inside the bona fide region, negative for
//! outliers.
//!
//! The hyperplane is placed relative to the origin, so inputs are not
//! mean-centered. Optional standardization only rescales each dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defaults;
use crate::types::{FeatureMatrix, Label, Polarity, ScoreRecord, ScoreSet, ValidationError};

/// Rows up to which the full Gram matrix is cached (`n^2` doubles).
const GRAM_CACHE_MAX_ROWS: usize = 2048;
/// Floor for the pair curvature in working-set selection.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OcsvmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("nu * n = {nu} * {n} < 1: box constraint 1/(nu n) exceeds 1")]
    InfeasibleNu { nu: f64, n: usize },
    #[error("solver stopped after {iterations} iterations with KKT residual {kkt_residual:e}")]
    NotConverged {
        kkt_residual: f64,
        iterations: usize,
    },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{labels} labels supplied for {rows} feature rows")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error(transparent)]
    InvalidScores(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmConfig {
    /// Upper bound on the outlier fraction, lower bound on the support-vector
    /// fraction. In `(0, 1]`.
    pub nu: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// `None` means `100 * n`.
    pub max_iter: Option<usize>,
    pub standardize: bool,
}

impl Default for OcsvmConfig {
    fn default() -> Self {
        Self {
            nu: defaults::NU,
            tol: defaults::OCSVM_TOL,
            max_iter: None,
            standardize: defaults::STANDARDIZE,
        }
    }
}

impl OcsvmConfig {
    fn validate(&self) -> Result<(), OcsvmError> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(OcsvmError::InvalidConfig(format!(
                "nu must be in (0, 1], got {}",
                self.nu
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(OcsvmError::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(OcsvmError::InvalidConfig(
                "max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-dimension rescaling `x_k / scale_k`, fit on the training rows.
///
/// `scale_k` is the population standard deviation of column `k`, or 1 when
/// that column is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &FeatureMatrix) -> Self {
        let n = features.n_rows() as f64;
        let d = features.dim();
        let mut mean = vec![0.0; d];
        for row in features.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in features.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(v, s)| v / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `max(0, max_{a>0} G - min_{a<C} G)` at the returned solution.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Dual objective `1/2 a'Qa`.
    pub objective: f64,
    /// Rows with `a_i > 0`.
    pub n_support: usize,
    /// Rows at the upper bound `a_i = 1/(nu n)`.
    pub n_margin_errors: usize,
    /// All training rows were identical; any feasible `a` is optimal.
    pub degenerate_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub w: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub tol: f64,
    pub dual_alphas: Vec<f64>,
    pub standardizer: Option<Standardizer>,
    pub diagnostics: Diagnostics,
}

impl OcsvmModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Box bound `1/(nu n)` of the training problem.
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.dual_alphas.len() as f64)
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Trains a model on bona fide rows.
pub fn fit(features: &FeatureMatrix, cfg: &OcsvmConfig) -> Result<OcsvmModel, OcsvmError> {
    fit_inner(features, cfg, None)
}

/// As [`fit`], also returning the dual objective after every solver step.
pub fn fit_traced(
    features: &FeatureMatrix,
    cfg: &OcsvmConfig,
) -> Result<(OcsvmModel, Vec<f64>), OcsvmError> {
    let mut trace = Vec::new();
    let model = fit_inner(features, cfg, Some(&mut trace))?;
    Ok((model, trace))
}

fn fit_inner(
    features: &FeatureMatrix,
    cfg: &OcsvmConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<OcsvmModel, OcsvmError> {
    cfg.validate()?;
    let n = features.n_rows();
    if n < 2 {
        return Err(OcsvmError::TooFewRows(n));
    }
    if cfg.nu * (n as f64) < 1.0 {
        return Err(OcsvmError::InfeasibleNu { nu: cfg.nu, n });
    }
    let d = features.dim();
    let degenerate_data = features.rows().all(|r| r == features.row(0));

    let standardizer = cfg.standardize.then(|| Standardizer::fit(features));
    let x: Vec<f64> = match &standardizer {
        Some(s) => features.rows().flat_map(|r| s.apply(r)).collect(),
        None => features.as_flat().to_vec(),
    };

    let upper = 1.0 / (cfg.nu * n as f64);
    let max_iter = cfg
        .max_iter
        .unwrap_or(defaults::OCSVM_ITER_PER_ROW.saturating_mul(n));
    let mut solver = Smo::new(&x, n, d, upper);
    let iterations = solver.run(cfg.tol, max_iter, trace)?;
    let sol = solver.finish();

    Ok(OcsvmModel {
        w: sol.w,
        rho: sol.rho,
        nu: cfg.nu,
        tol: cfg.tol,
        dual_alphas: sol.alpha,
        standardizer,
        diagnostics: Diagnostics {
            kkt_residual: sol.kkt_residual,
            iterations,
            objective: sol.objective,
            n_support: sol.n_support,
            n_margin_errors: sol.n_margin_errors,
            degenerate_data,
        },
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Smo<'a> {
    x: &'a [f64],
    n: usize,
    d: usize,
    upper: f64,
    alpha: Vec<f64>,
    /// Gradient of the dual objective, `G_i = x_i . w`.
    grad: Vec<f64>,
    w: Vec<f64>,
    gram: Option<Vec<f64>>,
    /// `Q_kk`.
    diag: Vec<f64>,
}

struct Solution {
    alpha: Vec<f64>,
    w: Vec<f64>,
    rho: f64,
    objective: f64,
    kkt_residual: f64,
    n_support: usize,
    n_margin_errors: usize,
}

impl<'a> Smo<'a> {
    fn new(x: &'a [f64], n: usize, d: usize, upper: f64) -> Self {
        // Feasible start: fill rows in order up to the box bound until the
        // mass reaches 1.
        // The slack absorbs rounding in the running remainder, so that with
        // nu = 1 every row gets exactly `upper`.
        let slack = upper * 1e-9;
        let mut alpha = vec![0.0; n];
        let mut left = 1.0f64;
        for a in alpha.iter_mut() {
            if left <= slack {
                break;
            }
            if left >= upper - slack {
                *a = upper;
                left -= upper;
            } else {
                *a = left;
                left = 0.0;
            }
        }
        let gram = (n <= GRAM_CACHE_MAX_ROWS).then(|| {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = dot(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
                    g[i * n + j] = v;
                    g[j * n + i] = v;
                }
            }
            g
        });
        let mut smo = Self {
            x,
            n,
            d,
            upper,
            alpha,
            grad: vec![0.0; n],
            w: vec![0.0; d],
            gram,
            diag: (0..n)
                .map(|k| dot(&x[k * d..(k + 1) * d], &x[k * d..(k + 1) * d]))
                .collect(),
        };
        smo.refresh();
        smo
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn kernel_row(&self, i: usize) -> Vec<f64> {
        match &self.gram {
            Some(g) => g[i * self.n..(i + 1) * self.n].to_vec(),
            None => (0..self.n).map(|k| dot(self.row(k), self.row(i))).collect(),
        }
    }

    /// Recomputes `w` and the gradient from the duals, discarding drift from
    /// incremental updates.
    fn refresh(&mut self) {
        let mut w = vec![0.0; self.d];
        for (i, &a) in self.alpha.iter().enumerate() {
            if a != 0.0 {
                for (wk, xk) in w.iter_mut().zip(self.row(i)) {
                    *wk += a * xk;
                }
            }
        }
        self.grad = (0..self.n).map(|i| dot(self.row(i), &w)).collect();
        self.w = w;
    }

    /// Most violating pair: `i` can grow and has the smallest gradient, `j`
    /// can shrink and has the largest. Lowest index wins ties. The gap is the
    /// KKT residual.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut up: Option<usize> = None;
        let mut low: Option<usize> = None;
        for k in 0..self.n {
            if self.alpha[k] < self.upper && up.is_none_or(|i| self.grad[k] < self.grad[i]) {
                up = Some(k);
            }
            if self.alpha[k] > 0.0 && low.is_none_or(|j| self.grad[k] > self.grad[j]) {
                low = Some(k);
            }
        }
        match (up, low) {
            (Some(i), Some(j)) => Some((i, j, self.grad[j] - self.grad[i])),
            // Every row at a bound on the same side (nu = 1): nothing can move.
            _ => None,
        }
    }

    /// Second-order partner for `i`: among rows that can shrink and violate
    /// against `i`, the one with the largest guaranteed decrease
    /// `(G_j - G_i)^2 / curvature`.
    fn partner(&self, i: usize, qi: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for k in 0..self.n {
            let b = self.grad[k] - self.grad[i];
            if self.alpha[k] <= 0.0 || b <= 0.0 {
                continue;
            }
            let curvature = (qi[i] + self.diag[k] - 2.0 * qi[k]).max(MIN_CURVATURE);
            let gain = b * b / curvature;
            if best.is_none_or(|(_, g, _)| gain > g) {
                best = Some((k, gain, b));
            }
        }
        best.map(|(k, _, b)| (k, b))
    }

    fn objective(&self) -> f64 {
        0.5 * dot(&self.w, &self.w)
    }

    fn run(
        &mut self,
        tol: f64,
        max_iter: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<usize, OcsvmError> {
        let mut iterations = 0;
        loop {
            let Some((i, _, gap)) = self.select() else {
                return Ok(iterations);
            };
            if gap <= tol {
                // Confirm on exact quantities before declaring convergence.
                self.refresh();
                match self.select() {
                    Some((_, _, gap)) if gap > tol => {}
                    _ => return Ok(iterations),
                }
                continue;
            }
            if iterations >= max_iter {
                self.refresh();
                let kkt_residual = self.select().map_or(0.0, |(_, _, g)| g.max(0.0));
                if kkt_residual <= tol {
                    return Ok(iterations);
                }
                return Err(OcsvmError::NotConverged {
                    kkt_residual,
                    iterations,
                });
            }
            iterations += 1;
            let qi = self.kernel_row(i);
            let (j, gap) = self
                .partner(i, &qi)
                .expect("the maximal violator qualifies");
            self.step(i, j, gap, &qi);
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective());
            }
        }
    }

    /// Moves `delta` of dual mass from `j` to `i`, minimising the objective
    /// along that direction within the box.
    fn step(&mut self, i: usize, j: usize, gap: f64, qi: &[f64]) {
        let qj = self.kernel_row(j);
        let curvature = qi[i] + qj[j] - 2.0 * qi[j];
        let room_i = self.upper - self.alpha[i];
        let room_j = self.alpha[j];
        let mut delta = if curvature > 0.0 {
            gap / curvature
        } else {
            f64::INFINITY
        };
        let mut clip_i = false;
        let mut clip_j = false;
        if delta >= room_i {
            delta = room_i;
            clip_i = true;
        }
        if delta >= room_j {
            delta = room_j;
            clip_j = true;
            clip_i = room_i == room_j;
        }
        self.alpha[i] = if clip_i {
            self.upper
        } else {
            self.alpha[i] + delta
        };
        self.alpha[j] = if clip_j { 0.0 } else { self.alpha[j] - delta };

        for (g, (a, b)) in self.grad.iter_mut().zip(qi.iter().zip(&qj)) {
            *g += delta * (a - b);
        }
        let (d, x) = (self.d, self.x);
        let (xi, xj) = (&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
        for ((w, a), b) in self.w.iter_mut().zip(xi).zip(xj) {
            *w += delta * (a - b);
        }
    }

    fn finish(mut self) -> Solution {
        self.refresh();
        let kkt_residual = self.select().map_or(0.0, |(_, _, g)| g.max(0.0));
        let upper = self.upper;
        let free: Vec<f64> = (0..self.n)
            .filter(|&k| self.alpha[k] > 0.0 && self.alpha[k] < upper)
            .map(|k| self.grad[k])
            .collect();
        let rho = if !free.is_empty() {
            free.iter().sum::<f64>() / free.len() as f64
        } else {
            // rho >= G_k where a_k = C, rho <= G_k where a_k = 0.
            let lower = (0..self.n)
                .filter(|&k| self.alpha[k] >= upper)
                .map(|k| self.grad[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let higher = (0..self.n)
                .filter(|&k| self.alpha[k] == 0.0)
                .map(|k| self.grad[k])
                .fold(f64::INFINITY, f64::min);
            match (lower.is_finite(), higher.is_finite()) {
                (true, true) => 0.5 * (lower + higher),
                (true, false) => lower,
                (false, true) => higher,
                (false, false) => 0.0,
            }
        };
        let n_support = self.alpha.iter().filter(|&&a| a > 0.0).count();
        let n_margin_errors = self.alpha.iter().filter(|&&a| a >= upper).count();
        let objective = self.objective();
        Solution {
            alpha: self.alpha,
            w: self.w,
            rho,
            objective,
            kkt_residual,
            n_support,
            n_margin_errors,
        }
    }
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// `w . x - rho` after the stored standardization. Higher is more bona fide
/// like.
pub fn decision_value(model: &OcsvmModel, x: &[f64]) -> Result<f64, OcsvmError> {
    if x.len() != model.dim() {
        return Err(OcsvmError::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let v = match &model.standardizer {
        Some(s) => dot(&model.w, &s.apply(x)),
        None => dot(&model.w, x),
    };
    Ok(v - model.rho)
}

/// Scores every row; ids and order preserved, `labels[i]` attached to row
/// `i`.
pub fn score_matrix(
    model: &OcsvmModel,
    features: &FeatureMatrix,
    labels: &[Label],
) -> Result<ScoreSet, OcsvmError> {
    if features.dim() != model.dim() && features.n_rows() > 0 {
        return Err(OcsvmError::DimensionMismatch {
            expected: model.dim(),
            got: features.dim(),
        });
    }
    if labels.len() != features.n_rows() {
        return Err(OcsvmError::LabelCountMismatch {
            rows: features.n_rows(),
            labels: labels.len(),
        });
    }
    let records = features
        .rows()
        .zip(features.sample_ids())
        .zip(labels)
        .map(|((row, id), &label)| {
            decision_value(model, row).map(|s| ScoreRecord::new(id.clone(), label, s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreSet::new(records, Polarity::HigherIsBonaFide)?)
}

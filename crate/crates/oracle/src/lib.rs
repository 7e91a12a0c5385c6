//! Slow reference implementations used only by tests.
//!
//! Everything here is written for clarity rather than speed: quadratic
//! counting instead of sorting, exact integer arithmetic where the inputs
//! allow it, and a first-order solver for the one-class SVM dual that shares
//! no code with the SMO solver it checks.

/// Unreduced fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

impl Frac {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Cross-multiplied equality with any `num / den` pair.
    pub fn equals(self, num: u64, den: u64) -> bool {
        self.num * den as u128 == num as u128 * self.den
    }
}

pub fn count_at_least(scores: &[f64], tau: f64) -> u64 {
    scores.iter().filter(|&&s| s >= tau).count() as u64
}

pub fn count_below(scores: &[f64], tau: f64) -> u64 {
    scores.iter().filter(|&&s| s < tau).count() as u64
}

/// Distinct values in increasing order, by repeated minimum extraction.
fn distinct_sorted(scores: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut last: Option<f64> = None;
    loop {
        let next = scores
            .iter()
            .copied()
            .filter(|&s| last.is_none_or(|l| s > l))
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))));
        match next {
            Some(v) => {
                out.push(v);
                last = Some(v);
            }
            None => return out,
        }
    }
}

/// Threshold grid: `min - 1`, midpoints of consecutive distinct values
/// (the upper value when the midpoint rounds onto the lower one), `max + 1`.
/// Valid for scores of moderate magnitude only.
pub fn grid(scores: &[f64]) -> Vec<f64> {
    let v = distinct_sorted(scores);
    let mut g = vec![v[0] - 1.0];
    for w in v.windows(2) {
        let mid = (w[0] + w[1]) / 2.0;
        g.push(if mid > w[0] { mid } else { w[1] });
    }
    g.push(v[v.len() - 1] + 1.0);
    g
}

/// `(threshold, accepted count)` at the first grid threshold whose
/// acceptance rate is at most `target`.
pub fn threshold_at_rate(negatives: &[f64], target: f64) -> (f64, u64) {
    let n = negatives.len() as f64;
    for tau in grid(negatives) {
        let k = count_at_least(negatives, tau);
        if k as f64 / n <= target {
            return (tau, k);
        }
    }
    unreachable!("top sentinel accepts nothing")
}

/// `(eer, threshold, apcer count, bpcer count)`.
pub fn d_eer(bonafide: &[f64], attack: &[f64]) -> (Frac, f64, u64, u64) {
    let (n, m) = (bonafide.len() as i128, attack.len() as i128);
    let pool: Vec<f64> = bonafide.iter().chain(attack).copied().collect();
    let mut best: Option<(i128, f64, u64, u64)> = None;
    for tau in grid(&pool) {
        let a = count_at_least(attack, tau);
        let b = count_below(bonafide, tau);
        // |a/m - b/n| with the common denominator n*m dropped.
        let gap = (a as i128 * n - b as i128 * m).abs();
        if best.is_none_or(|(g, ..)| gap < g) {
            best = Some((gap, tau, a, b));
        }
    }
    let (_, tau, a, b) = best.unwrap();
    let (n, m) = (n as u128, m as u128);
    let eer = Frac {
        num: a as u128 * n + b as u128 * m,
        den: 2 * n * m,
    };
    (eer, tau, a, b)
}

/// `(bpcer count, threshold)` at the attack-grid threshold chosen for
/// `target` APCER.
pub fn bpcer_at_apcer(bonafide: &[f64], attack: &[f64], target: f64) -> (u64, f64) {
    let (tau, _) = threshold_at_rate(attack, target);
    (count_below(bonafide, tau), tau)
}

/// `(threshold, negatives accepted, positives rejected)` over the joint grid.
pub fn det_points(positives: &[f64], negatives: &[f64]) -> Vec<(f64, u64, u64)> {
    let pool: Vec<f64> = positives.iter().chain(negatives).copied().collect();
    grid(&pool)
        .into_iter()
        .map(|t| (t, count_at_least(negatives, t), count_below(positives, t)))
        .collect()
}

// ---------------------------------------------------------------------------
// Depth variance
// ---------------------------------------------------------------------------

/// Nearest integer, halves away from zero, picked by comparing distances.
fn nearest(x: f64) -> f64 {
    let (lo, hi) = (x.floor(), x.ceil());
    let (dl, dh) = (x - lo, hi - x);
    if dl < dh || (dl == dh && x < 0.0) {
        lo
    } else {
        hi
    }
}

/// Valid depths sampled at each landmark, in landmark order. A landmark is
/// valid when its nearest pixel is inside the map and non-zero.
pub fn dv_samples(width: usize, height: usize, values: &[u16], points: &[(f64, f64)]) -> Vec<u16> {
    let mut out = Vec::new();
    for &(x, y) in points {
        let (px, py) = (nearest(x), nearest(y));
        if px < 0.0 || py < 0.0 || px >= width as f64 || py >= height as f64 {
            continue;
        }
        let d = values[py as usize * width + px as usize];
        if d != 0 {
            out.push(d);
        }
    }
    out
}

/// Population standard deviation from exact integer moments.
pub fn population_std_u16(depths: &[u16]) -> f64 {
    let n = depths.len() as u128;
    let s1: u128 = depths.iter().map(|&d| d as u128).sum();
    let s2: u128 = depths.iter().map(|&d| (d as u128) * (d as u128)).sum();
    // n^2 * variance = n * s2 - s1^2, exactly.
    let num = n * s2 - s1 * s1;
    ((num as f64) / ((n * n) as f64)).sqrt()
}

// ---------------------------------------------------------------------------
// One-class SVM dual
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub objective: f64,
}

/// Euclidean projection of `v` onto `{a : 0 <= a_i <= cap, sum a = 1}` by
/// bisection on the shift.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let total = |lam: f64| v.iter().map(|&x| (x - lam).clamp(0.0, cap)).sum::<f64>();
    let (mut lo, mut hi) = (
        v.iter().copied().fold(f64::INFINITY, f64::min) - cap - 1.0,
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0,
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - lam).clamp(0.0, cap)).collect()
}

fn weights(rows: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let mut w = vec![0.0; d];
    for (r, &a) in rows.iter().zip(alpha) {
        for k in 0..d {
            w[k] += a * r[k];
        }
    }
    w
}

/// Solves `min 1/2 |sum a_i x_i|^2` over the capped simplex with
/// `cap = 1 / (nu n)` using accelerated projected gradient with restarts.
pub fn ocsvm_dual(rows: &[Vec<f64>], nu: f64, iterations: usize) -> DualSolution {
    let n = rows.len();
    let cap = 1.0 / (nu * n as f64);
    // Lipschitz constant of the gradient: largest eigenvalue of the Gram
    // matrix, bounded by its trace.
    let lip: f64 = rows
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .max(1e-300);
    let step = 1.0 / lip;
    let objective = |a: &[f64]| {
        let w = weights(rows, a);
        0.5 * w.iter().map(|x| x * x).sum::<f64>()
    };
    let grad = |a: &[f64]| {
        let w = weights(rows, a);
        rows.iter()
            .map(|r| r.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>())
            .collect::<Vec<f64>>()
    };

    let mut x = project_capped_simplex(&vec![1.0 / n as f64; n], cap);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = objective(&x);
    for _ in 0..iterations {
        let g = grad(&y);
        let v: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let xn = project_capped_simplex(&v, cap);
        let fxn = objective(&xn);
        if fxn > fx {
            // Restart momentum when the objective goes up.
            y = x.clone();
            t = 1.0;
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = xn
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / tn * (a - b))
            .collect();
        x = xn;
        fx = fxn;
        t = tn;
    }
    DualSolution {
        w: weights(rows, &x),
        objective: fx,
        alpha: x,
    }
}

// ---------------------------------------------------------------------------
// Fuzz inputs
// ---------------------------------------------------------------------------

/// Byte-string generator for parser robustness tests: pure noise, and
/// corruptions (flips, insertions, deletions, truncations, splices) of a
/// valid seed document.
pub struct Fuzzer {
    state: u64,
}

impl Fuzzer {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1,
        }
    }

    fn next(&mut self) -> u64 {
        // xorshift64*
        self.state ^= self.state >> 12;
        self.state ^= self.state << 25;
        self.state ^= self.state >> 27;
        self.state.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n.max(1) as u64) as usize
    }

    /// Interesting bytes for text formats.
    const DICT: &'static [&'static [u8]] = &[
        b",",
        b"\n",
        b"\r\n",
        b"\"",
        b"NaN",
        b"inf",
        b"-",
        b"1e999",
        b"0,5",
        b"P5",
        b"65535",
        b"255",
        b"#",
        b" ",
        b"\xff\xfe",
        b"bonafide",
        b"attack",
        b"{",
        b"}",
        b"\"version\": 9",
    ];

    pub fn input(&mut self, seed_doc: &[u8]) -> Vec<u8> {
        match self.below(4) {
            0 => (0..self.below(96)).map(|_| self.next() as u8).collect(),
            _ => {
                let mut v = seed_doc.to_vec();
                for _ in 0..1 + self.below(4) {
                    let pos = self.below(v.len() + 1);
                    match self.below(6) {
                        0 if !v.is_empty() => {
                            let p = pos.min(v.len() - 1);
                            v[p] ^= 1 << self.below(8);
                        }
                        1 => {
                            let b = self.next() as u8;
                            v.insert(pos, b);
                        }
                        2 if !v.is_empty() => {
                            let p = pos.min(v.len() - 1);
                            v.remove(p);
                        }
                        3 => v.truncate(pos),
                        4 => {
                            let word = Self::DICT[self.below(Self::DICT.len())];
                            v.splice(pos..pos, word.iter().copied());
                        }
                        _ => {
                            let end = (pos + self.below(16)).min(v.len());
                            v.drain(pos..end);
                        }
                    }
                }
                v
            }
        }
    }
}

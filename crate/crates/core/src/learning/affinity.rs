//! Affinity propagation clustering (responsibility/availability message
//! passing over a dense similarity matrix).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Self-similarity placed on the diagonal before message passing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffinityParams {
    /// Damping factor in `[0.5, 1)`.
    pub damping: f64,
    pub max_iter: usize,
    /// Iterations the exemplar set must stay unchanged to declare convergence.
    pub convergence_window: usize,
    pub preference: Preference,
}

impl Default for AffinityParams {
    fn default() -> Self {
        Self { damping: 0.5, max_iter: 200, convergence_window: 15, preference: Preference::Median }
    }
}

/// Square similarity table stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Config(format!("similarity row {i} has {} entries, expected {n}", r.len())));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("similarities must be finite".into()));
        }
        Ok(Self { n, data })
    }

    /// Negative squared Euclidean distance between every pair of vectors.
    pub fn neg_sq_euclidean(points: &[&[f64]]) -> Self {
        let n = points.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                data[i * n + k] = -sq_distance(points[i], points[k]);
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.n + k]
    }

    fn off_diagonal_median(&self) -> f64 {
        let mut v: Vec<f64> = (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| self.get(i, k))
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) }
    }
}

pub fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Exemplar point indices, ascending.
    pub exemplars: Vec<usize>,
    /// For every point, the index of its exemplar.
    pub assignment: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs affinity propagation.
///
/// Exemplars are the points with `r(k,k) + a(k,k) > 0` once the exemplar set
/// has been stable for `convergence_window` iterations (or at `max_iter`,
/// with `converged = false`). Each non-exemplar joins the exemplar of highest
/// similarity; exemplars join themselves. A degenerate matrix with all
/// off-diagonal similarities equal and a preference not above them yields a
/// single cluster.
pub fn affinity_propagation(sim: &SimilarityMatrix, params: &AffinityParams) -> Result<Clustering> {
    if !(0.5..1.0).contains(&params.damping) {
        return Err(Error::Config(format!("damping {} outside [0.5, 1)", params.damping)));
    }
    let n = sim.len();
    if n == 0 {
        return Err(Error::Config("cannot cluster an empty set".into()));
    }
    let pref = match params.preference {
        Preference::Median => sim.off_diagonal_median(),
        Preference::Fixed(p) => p,
    };
    if n == 1 {
        return Ok(Clustering { exemplars: vec![0], assignment: vec![0], iterations: 0, converged: true });
    }
    let first = sim.get(0, 1);
    let all_equal = (0..n).all(|i| (0..n).all(|k| i == k || sim.get(i, k) == first));
    if all_equal && pref <= first {
        return Ok(Clustering { exemplars: vec![0], assignment: vec![0; n], iterations: 0, converged: true });
    }

    let mut s = sim.data.clone();
    for k in 0..n {
        s[k * n + k] = pref;
    }
    // Deterministic tie breaking: a perturbation far below any meaningful
    // similarity difference, derived from the index pair.
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..n {
        for k in 0..n {
            let h = crate::rng::mix64(((i as u64) << 32) ^ k as u64);
            let u = (h >> 11) as f64 / (1u64 << 53) as f64;
            s[i * n + k] += scale * 1e-12 * u;
        }
    }

    let lambda = params.damping;
    let mut r = vec![0.0; n * n];
    let mut a = vec![0.0; n * n];
    let mut last: Vec<bool> = vec![false; n];
    let mut stable = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for it in 0..params.max_iter {
        iterations = it + 1;
        // Responsibilities.
        for i in 0..n {
            let row = i * n;
            let (mut best, mut second, mut best_k) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for k in 0..n {
                let v = a[row + k] + s[row + k];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                let fresh = s[row + k] - competitor;
                r[row + k] = lambda * r[row + k] + (1.0 - lambda) * fresh;
            }
        }
        // Availabilities.
        for k in 0..n {
            let mut pos_sum = 0.0;
            for i in 0..n {
                if i != k {
                    pos_sum += r[i * n + k].max(0.0);
                }
            }
            let rkk = r[k * n + k];
            for i in 0..n {
                let fresh = if i == k { pos_sum } else { (rkk + pos_sum - r[i * n + k].max(0.0)).min(0.0) };
                a[i * n + k] = lambda * a[i * n + k] + (1.0 - lambda) * fresh;
            }
        }
        let current: Vec<bool> = (0..n).map(|k| r[k * n + k] + a[k * n + k] > 0.0).collect();
        if current == last {
            stable += 1;
        } else {
            stable = 1;
            last = current;
        }
        if stable >= params.convergence_window && last.iter().any(|e| *e) {
            converged = true;
            break;
        }
    }

    let mut exemplars: Vec<usize> = (0..n).filter(|&k| r[k * n + k] + a[k * n + k] > 0.0).collect();
    if exemplars.is_empty() {
        // Best-so-far: the point with the largest self-evidence.
        let k = (0..n)
            .max_by(|&x, &y| (r[x * n + x] + a[x * n + x]).total_cmp(&(r[y * n + y] + a[y * n + y])).then(y.cmp(&x)))
            .unwrap_or(0);
        exemplars.push(k);
        converged = false;
    }
    let assignment = assign_to_exemplars(sim, &exemplars);
    Ok(Clustering { exemplars, assignment, iterations, converged })
}

/// Exemplars map to themselves; every other point goes to the exemplar of
/// highest similarity, lowest index on ties.
pub fn assign_to_exemplars(sim: &SimilarityMatrix, exemplars: &[usize]) -> Vec<usize> {
    (0..sim.len())
        .map(|i| {
            if exemplars.contains(&i) {
                return i;
            }
            let mut best = exemplars[0];
            for &k in &exemplars[1..] {
                if sim.get(i, k) > sim.get(i, best) {
                    best = k;
                }
            }
            best
        })
        .collect()
}

//! Lloyd's k-means with k-means++ seeding and seeded restarts.
//!
//! Input points are sorted into a canonical order before seeding, so the
//! result depends only on the multiset of points and the parameters, never on
//! the order in which they were supplied. All randomness comes from a
//! `Xoshiro256PlusPlus` stream seeded with [`KMeansParams::seed`].

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::scalar::{squared_euclidean, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KMeansError {
    #[error("k-means needs at least one sample")]
    NoSamples,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("n_init must be at least 1")]
    ZeroRestarts,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("sample {0} has a non-finite coordinate")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams<T> {
    pub k: usize,
    pub seed: u64,
    /// Stop once no centroid moves farther than this between iterations.
    pub tol: T,
    pub max_iter: usize,
    /// Independent seedings; the run with the lowest inertia is kept.
    pub n_init: usize,
}

impl<T: Scalar> Default for KMeansParams<T> {
    fn default() -> Self {
        Self { k: 20, seed: 20, tol: T::lit(1e-6), max_iter: 300, n_init: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T, const D: usize> {
    pub centroids: Vec<[T; D]>,
    /// Cluster index per input sample, in the caller's original order.
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when fewer than `k` distinct points exist; one centroid per
    /// distinct point is returned instead.
    pub insufficient_samples: bool,
    /// Within-cluster sum of squares of the returned solution.
    pub inertia: T,
}

impl<T: Scalar, const D: usize> KMeansResult<T, D> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn lex_cmp<T: Scalar, const D: usize>(a: &[T; D], b: &[T; D]) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest<T: Scalar, const D: usize>(p: &[T; D], centroids: &[[T; D]]) -> (usize, T) {
    let mut best = (0, squared_euclidean(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_euclidean(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Within-cluster sum of squared distances.
pub fn inertia<T: Scalar, const D: usize>(points: &[[T; D]], centroids: &[[T; D]], assignments: &[usize]) -> T {
    points
        .iter()
        .zip(assignments)
        .fold(T::zero(), |acc, (p, &a)| acc + squared_euclidean(p, &centroids[a]))
}

fn sample_index<T: Scalar>(rng: &mut Xoshiro256PlusPlus, weights: &[T], total: T) -> usize {
    let target = T::lit(rng.random::<f64>()) * total;
    let mut acc = T::zero();
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > T::zero() {
            acc = acc + w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

/// k-means++ where each new centre is the best of `trials` D²-weighted
/// candidates; `trials = 1` is plain k-means++. Requires at least `k`
/// distinct points.
fn seed_centroids<T: Scalar, const D: usize>(points: &[[T; D]], k: usize, rng: &mut Xoshiro256PlusPlus, trials: usize) -> Vec<[T; D]> {
    let n = points.len();

    let mut centroids = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centroids.push(points[first]);
    let mut closest: Vec<T> = points.iter().map(|p| squared_euclidean(p, &points[first])).collect();
    let mut potential = closest.iter().fold(T::zero(), |a, &b| a + b);

    while centroids.len() < k {
        let mut best: Option<(usize, T, Vec<T>)> = None;
        for _ in 0..trials {
            let candidate = sample_index(rng, &closest, potential);
            let updated: Vec<T> = points
                .iter()
                .zip(&closest)
                .map(|(p, &d)| d.min(squared_euclidean(p, &points[candidate])))
                .collect();
            let candidate_potential = updated.iter().fold(T::zero(), |a, &b| a + b);
            if best.as_ref().is_none_or(|(_, bp, _)| candidate_potential < *bp) {
                best = Some((candidate, candidate_potential, updated));
            }
        }
        let (chosen, chosen_potential, updated) = best.expect("at least one trial");
        centroids.push(points[chosen]);
        closest = updated;
        potential = chosen_potential;
    }
    centroids
}

/// Means of the assigned points; empty clusters keep `NaN` so the caller
/// can re-seed them.
fn update_means<T: Scalar, const D: usize>(points: &[[T; D]], assignments: &[usize], k: usize) -> (Vec<[T; D]>, Vec<usize>) {
    let mut sums = vec![[T::zero(); D]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(p) {
            *s = *s + v;
        }
    }
    let means = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c == 0 {
                [T::nan(); D]
            } else {
                s.map(|v| v / T::from_count(c))
            }
        })
        .collect();
    (means, counts)
}

/// Moves, for each empty cluster, the point farthest from its own centroid
/// into that cluster. Returns whether anything changed.
fn reseed_empty<T: Scalar, const D: usize>(
    points: &[[T; D]],
    assignments: &mut [usize],
    centroids: &mut [[T; D]],
    counts: &mut [usize],
) -> bool {
    let mut changed = false;
    for empty in 0..centroids.len() {
        if counts[empty] != 0 {
            continue;
        }
        let mut far: Option<(usize, T)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = squared_euclidean(p, &centroids[a]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else { break };
        counts[assignments[i]] -= 1;
        assignments[i] = empty;
        counts[empty] = 1;
        centroids[empty] = points[i];
        changed = true;
    }
    changed
}

pub fn kmeans<T: Scalar, const D: usize>(
    samples: &[[T; D]],
    params: &KMeansParams<T>,
) -> Result<KMeansResult<T, D>, KMeansError> {
    if samples.is_empty() {
        return Err(KMeansError::NoSamples);
    }
    if params.k == 0 {
        return Err(KMeansError::ZeroK);
    }
    if params.n_init == 0 {
        return Err(KMeansError::ZeroRestarts);
    }
    if !(params.tol > T::zero()) {
        return Err(KMeansError::InvalidTolerance(params.tol.as_f64()));
    }
    if let Some(i) = samples.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(KMeansError::NonFinite(i));
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&samples[a], &samples[b]));
    let points: Vec<[T; D]> = order.iter().map(|&i| samples[i]).collect();

    let mut distinct: Vec<[T; D]> = Vec::new();
    for p in &points {
        if distinct.last().is_none_or(|d| lex_cmp(d, p).is_ne()) {
            distinct.push(*p);
        }
    }

    let (centroids, sorted_assignments, iterations, converged, insufficient) = if distinct.len() <= params.k {
        let assignments = points.iter().map(|p| nearest(p, &distinct).0).collect();
        (distinct.clone(), assignments, 0, true, distinct.len() < params.k)
    } else {
        let (c, a, it, conv) = best_of_restarts(&points, params);
        (c, a, it, conv, false)
    };

    let mut assignments = vec![0; samples.len()];
    for (sorted_pos, &original) in order.iter().enumerate() {
        assignments[original] = sorted_assignments[sorted_pos];
    }
    let inertia = inertia(&points, &centroids, &sorted_assignments);
    Ok(KMeansResult { centroids, assignments, iterations, converged, insufficient_samples: insufficient, inertia })
}

type LloydRun<T, const D: usize> = (Vec<[T; D]>, Vec<usize>, usize, bool);

/// Restart `r` draws from the seed's stream advanced by `r` jumps (2^128
/// steps each), so restarts never share random numbers. The first restart
/// uses greedy seeding, later ones plain D² sampling. Ties keep the earliest
/// restart.
fn best_of_restarts<T: Scalar, const D: usize>(points: &[[T; D]], params: &KMeansParams<T>) -> LloydRun<T, D> {
    let greedy = 2 + (params.k as f64).ln().floor() as usize;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(params.seed);
    let mut best: Option<(T, LloydRun<T, D>)> = None;
    for r in 0..params.n_init {
        let mut stream = rng.clone();
        let trials = if r == 0 { greedy } else { 1 };
        let start = seed_centroids(points, params.k, &mut stream, trials);
        let run = lloyd(points, start, params);
        let cost = inertia(points, &run.0, &run.1);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, run));
        }
        rng.jump();
    }
    best.expect("n_init >= 1").1
}

fn lloyd<T: Scalar, const D: usize>(points: &[[T; D]], start: Vec<[T; D]>, params: &KMeansParams<T>) -> LloydRun<T, D> {
    let k = params.k;
    let mut centroids = start;
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut previous_cost = T::infinity();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let (mut means, mut counts) = update_means(points, &assignments, k);
        if counts.contains(&0) && reseed_empty(points, &mut assignments, &mut means, &mut counts) {
            let (m, _) = update_means(points, &assignments, k);
            means = m;
        }
        // Clusters that could not be re-seeded keep their previous position.
        for (m, old) in means.iter_mut().zip(&centroids) {
            if m.iter().any(|v| v.is_nan()) {
                *m = *old;
            }
        }

        let cost = inertia(points, &means, &assignments);
        debug_assert!(
            cost <= previous_cost + previous_cost.abs() * T::lit(1e-9) + T::lit(1e-12),
            "Lloyd objective increased: {previous_cost} -> {cost}"
        );
        previous_cost = cost;

        let shift = means
            .iter()
            .zip(&centroids)
            .map(|(a, b)| squared_euclidean(a, b).sqrt())
            .fold(T::zero(), T::max);
        centroids = means;
        assignments = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if shift < params.tol {
            converged = true;
            break;
        }
    }
    (centroids, assignments, iterations, converged)
}

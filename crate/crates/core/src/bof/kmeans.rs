use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Visual vocabulary: `k` centroids of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<Vec<f32>>,
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid (squared Euclidean); ties go to the lower index.
    pub fn nearest(&self, point: &[f32]) -> usize {
        nearest(&self.centroids, point).0
    }
}

/// Codebook plus the Lloyd objective after each assignment step.
#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub codebook: Codebook,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

fn sq_dist<A: Copy + Into<f64>, B: Copy + Into<f64>>(a: &[A], b: &[B]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.into() - y.into();
            d * d
        })
        .sum()
}

fn nearest<C: Copy + Into<f64>, P: Copy + Into<f64>>(centroids: &[Vec<C>], point: &[P]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn kmeans(points: &[Vec<f32>], k: usize, max_iters: usize, seed: u64) -> Result<Codebook> {
    Ok(kmeans_fit(points, k, max_iters, seed)?.codebook)
}

/// k-means++ seeding followed by Lloyd iterations until the assignment
/// stops changing or `max_iters` assignment steps have run. A cluster that
/// empties is moved onto the point currently farthest from its centroid.
pub fn kmeans_fit(points: &[Vec<f32>], k: usize, max_iters: usize, seed: u64) -> Result<KmeansFit> {
    if k == 0 {
        return Err(Error::invalid("k-means needs k ≥ 1"));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            got: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::ShapeMismatch {
            op: "kmeans",
            expected: vec![dim],
            got: vec![p.len()],
        });
    }

    let mut rng = Rng::new(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);

    let mut assign: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let step: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(&centroids, p)).collect();
        trace.push(step.iter().map(|s| s.1).sum());
        let next: Vec<usize> = step.iter().map(|s| s.0).collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(p) {
                *s += v as f64;
            }
        }
        let mut taken = vec![false; points.len()];
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                centroids[j] = sums[j].iter().map(|s| s / n).collect();
                continue;
            }
            let far = step
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken[*i])
                .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s.1 > best.1 { (i, s.1) } else { best })
                .0;
            taken[far] = true;
            centroids[j] = points[far].iter().map(|&v| v as f64).collect();
        }
    }

    Ok(KmeansFit {
        codebook: Codebook {
            centroids: centroids
                .into_iter()
                .map(|c| c.into_iter().map(|v| v as f32).collect())
                .collect(),
        },
        objective_trace: trace,
        converged,
    })
}

fn seed_plus_plus(points: &[Vec<f32>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let to64 = |p: &Vec<f32>| p.iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let mut centroids = vec![to64(&points[rng.below(points.len())])];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(&centroids[0], p)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = d2.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(points.len())
        };
        let c = to64(&points[pick]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(&c, p));
        }
        centroids.push(c);
    }
    centroids
}

/// Sum of squared distances from each point to its nearest centroid.
pub fn kmeans_objective(points: &[Vec<f32>], codebook: &Codebook) -> f64 {
    points.iter().map(|p| nearest(&codebook.centroids, p).1).sum()
}

//! 2D projection of token vectors, following the neighbor-embedding
//! recipe: exact k-nearest-neighbor search under cosine distance, a fuzzy
//! graph built from locally-adaptive kernel widths, and an SGD layout
//! with attraction along edges and sampled repulsion.
//!
//! The output axes and distances are not directly interpretable — the
//! projection warps the high-dimensional space; only neighborhood
//! structure is meaningful. Plot captions repeat this caveat.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attractive/repulsive gradient clip, as in the reference layout.
const GRAD_CLIP: f64 = 4.0;
/// Repulsions sampled per applied attraction.
const NEGATIVE_SAMPLE_RATE: usize = 5;
/// Initial layout learning rate, decaying linearly to zero.
const INITIAL_ALPHA: f64 = 1.0;
/// Bisection iterations for the kernel-width solve.
const SIGMA_ITERATIONS: usize = 64;
const SIGMA_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub n_neighbors: usize,
    /// Minimum spacing of points in the layout; low values pack
    /// neighborhoods tightly.
    pub min_dist: f64,
    /// Layout SGD epochs.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            n_neighbors: 15,
            min_dist: 0.1,
            epochs: 500,
            seed: 1,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.n_neighbors < 2 {
            violations.push("projection.n_neighbors must be >= 2".to_string());
        }
        if !(0.0..1.0).contains(&self.min_dist) {
            violations.push(format!(
                "projection.min_dist must be in [0, 1), got {}",
                self.min_dist
            ));
        }
        if self.epochs == 0 {
            violations.push("projection.epochs must be >= 1".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::config(violations))
        }
    }
}

/// Per-point neighbor lists, each sorted by (distance, index).
#[derive(Debug, Clone)]
pub struct KnnResult {
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub k: usize,
}

/// Cosine distance 1 − cos(a, b).
fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - crate::analysis::cosine(a, b)?)
}

/// Exact brute-force k nearest neighbors per point under cosine distance.
/// Ties broken by index, self excluded.
pub fn knn(vectors: &[Vec<f64>], k: usize) -> Result<KnnResult> {
    let n = vectors.len();
    if k == 0 || k >= n {
        return Err(Error::data(format!(
            "knn: k must satisfy 1 <= k < n (k={k}, n={n})"
        )));
    }
    let neighbors: Result<Vec<Vec<(usize, f64)>>> = vectors
        .par_iter()
        .enumerate()
        .map(|(i, vi)| {
            let mut dists = Vec::with_capacity(n - 1);
            for (j, vj) in vectors.iter().enumerate() {
                if j != i {
                    dists.push((j, cosine_distance(vi, vj)?));
                }
            }
            dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            dists.truncate(k);
            Ok(dists)
        })
        .collect();
    Ok(KnnResult {
        neighbors: neighbors?,
        k,
    })
}

/// Symmetric weighted graph over the kNN structure.
#[derive(Debug, Clone)]
pub struct FuzzyGraph {
    pub n_vertices: usize,
    /// Edges (i, j, weight) with i < j and weight in (0, 1].
    pub edges: Vec<(usize, usize, f64)>,
    /// Distance to nearest neighbor per point.
    pub rho: Vec<f64>,
    /// Solved kernel width per point.
    pub sigma: Vec<f64>,
    /// Points whose width solve did not reach tolerance in
    /// `SIGMA_ITERATIONS` bisection steps (clamped, with this diagnostic).
    pub clamped: usize,
}

/// Solve Σ_j exp(−max(0, d_ij − ρ_i)/σ_i) = log2(k) per point by
/// bisection, then build directed weights and symmetrize with
/// w = w_ab + w_ba − w_ab·w_ba.
pub fn fuzzy_graph(knn: &KnnResult) -> FuzzyGraph {
    let n = knn.neighbors.len();
    let target = (knn.k as f64).log2();
    let mut rho = vec![0.0; n];
    let mut sigma = vec![1.0; n];
    let mut clamped = 0;

    for (i, neigh) in knn.neighbors.iter().enumerate() {
        rho[i] = neigh.first().map(|&(_, d)| d).unwrap_or(0.0);
        let psum = |s: f64| -> f64 {
            neigh
                .iter()
                .map(|&(_, d)| (-((d - rho[i]).max(0.0)) / s).exp())
                .sum()
        };
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        let mut mid = 1.0f64;
        let mut converged = false;
        for _ in 0..SIGMA_ITERATIONS {
            let sum = psum(mid);
            if (sum - target).abs() < SIGMA_TOLERANCE {
                converged = true;
                break;
            }
            if sum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
            }
        }
        if !converged {
            clamped += 1;
        }
        sigma[i] = mid.max(1e-12);
    }

    let mut directed = std::collections::HashMap::new();
    for (i, neigh) in knn.neighbors.iter().enumerate() {
        for &(j, d) in neigh {
            let x = (d - rho[i]).max(0.0);
            let w = if x == 0.0 { 1.0 } else { (-x / sigma[i]).exp() };
            directed.insert((i, j), w);
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), &w_ij) in &directed {
        if i > j {
            continue;
        }
        let w_ji = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let w = w_ij + w_ji - w_ij * w_ji;
        if w > 0.0 {
            edges.push((i, j, w));
        }
    }
    // the map iteration order is arbitrary; fix it for determinism
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    FuzzyGraph {
        n_vertices: n,
        edges,
        rho,
        sigma,
        clamped,
    }
}

/// Fit (a, b) of the layout curve 1/(1 + a·d^{2b}) by least squares on a
/// 300-point grid of the piecewise target: 1 for d ≤ min_dist, else
/// exp(−(d − min_dist)/spread). Gauss–Newton with Levenberg damping.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let grid: Vec<f64> = (0..300)
        .map(|i| (i as f64 + 0.5) * 3.0 * spread / 300.0)
        .collect();
    let target: Vec<f64> = grid
        .iter()
        .map(|&d| {
            if d <= min_dist {
                1.0
            } else {
                (-(d - min_dist) / spread).exp()
            }
        })
        .collect();

    let residual_norm = |a: f64, b: f64| -> f64 {
        grid.iter()
            .zip(&target)
            .map(|(&d, &t)| {
                let f = 1.0 / (1.0 + a * d.powf(2.0 * b));
                (f - t) * (f - t)
            })
            .sum()
    };

    let mut a = 1.0f64;
    let mut b = 1.0f64;
    let mut lambda = 1e-3;
    let mut current = residual_norm(a, b);
    for _ in 0..200 {
        // normal equations for the 2-parameter Gauss-Newton step
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for (&d, &t) in grid.iter().zip(&target) {
            let p = d.powf(2.0 * b);
            let denom = 1.0 + a * p;
            let f = 1.0 / denom;
            let r = f - t;
            let df_da = -p / (denom * denom);
            let df_db = -a * p * 2.0 * d.ln() / (denom * denom);
            jtj[0][0] += df_da * df_da;
            jtj[0][1] += df_da * df_db;
            jtj[1][1] += df_db * df_db;
            jtr[0] += df_da * r;
            jtr[1] += df_db * r;
        }
        jtj[1][0] = jtj[0][1];
        let m00 = jtj[0][0] * (1.0 + lambda);
        let m11 = jtj[1][1] * (1.0 + lambda);
        let det = m00 * m11 - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-30 {
            break;
        }
        let da = (-jtr[0] * m11 + jtr[1] * jtj[0][1]) / det;
        let db = (-jtr[1] * m00 + jtr[0] * jtj[1][0]) / det;
        let (na, nb) = ((a + da).max(1e-6), (b + db).max(1e-6));
        let next = residual_norm(na, nb);
        if next < current {
            a = na;
            b = nb;
            current = next;
            lambda = (lambda * 0.5).max(1e-12);
            if da.abs() < 1e-12 && db.abs() < 1e-12 {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// 2D coordinates per input point, plus the fitted curve parameters and
/// the configuration echo.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout2D {
    pub coords: Vec<[f64; 2]>,
    pub curve_a: f64,
    pub curve_b: f64,
    pub config: ProjectionConfig,
}

/// SGD layout: attraction along graph edges (sampled proportionally to
/// weight), repulsion against uniformly sampled points. Deterministic
/// given the seed — single-threaded with a fixed edge order.
pub fn layout(graph: &FuzzyGraph, config: &ProjectionConfig) -> Result<Layout2D> {
    config.validate()?;
    let n = graph.n_vertices;
    if n == 0 {
        return Err(Error::EmptyInput("layout of an empty graph"));
    }
    let (a, b) = fit_ab(config.min_dist, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
        .collect();

    if graph.edges.is_empty() {
        return Ok(Layout2D {
            coords,
            curve_a: a,
            curve_b: b,
            config: config.clone(),
        });
    }

    let w_max = graph
        .edges
        .iter()
        .map(|&(_, _, w)| w)
        .fold(f64::MIN, f64::max);
    let epochs_per_sample: Vec<f64> = graph.edges.iter().map(|&(_, _, w)| w_max / w).collect();
    let mut next_sample: Vec<f64> = epochs_per_sample.clone();

    let clip = |x: f64| x.clamp(-GRAD_CLIP, GRAD_CLIP);

    for epoch in 0..config.epochs {
        let alpha = INITIAL_ALPHA * (1.0 - epoch as f64 / config.epochs as f64);
        for (e, &(i, j, _)) in graph.edges.iter().enumerate() {
            if next_sample[e] > (epoch + 1) as f64 {
                continue;
            }
            next_sample[e] += epochs_per_sample[e];

            // attraction between the edge endpoints
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (1.0 + a * d2.powf(b));
                let gx = clip(coeff * dx) * alpha;
                let gy = clip(coeff * dy) * alpha;
                coords[i][0] += gx;
                coords[i][1] += gy;
                coords[j][0] -= gx;
                coords[j][1] -= gy;
            }

            // sampled repulsion, applied to the i endpoint only
            for _ in 0..NEGATIVE_SAMPLE_RATE {
                let k = rng.random_range(0..n);
                if k == i || k == j {
                    continue;
                }
                let dx = coords[i][0] - coords[k][0];
                let dy = coords[i][1] - coords[k][1];
                let d2 = dx * dx + dy * dy;
                if d2 > 0.0 {
                    let coeff = 2.0 * b / ((0.001 + d2) * (1.0 + a * d2.powf(b)));
                    coords[i][0] += clip(coeff * dx) * alpha;
                    coords[i][1] += clip(coeff * dy) * alpha;
                } else {
                    // coincident points: push hard in a fixed direction
                    coords[i][0] += GRAD_CLIP * alpha;
                    coords[i][1] += GRAD_CLIP * alpha;
                }
            }
        }
    }

    if coords.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::Internal(
            "layout produced non-finite coordinates".to_string(),
        ));
    }
    Ok(Layout2D {
        coords,
        curve_a: a,
        curve_b: b,
        config: config.clone(),
    })
}

/// Convenience: knn → fuzzy graph → layout. `n_neighbors` is clamped to
/// n−1 for small point sets.
pub fn project(vectors: &[Vec<f64>], config: &ProjectionConfig) -> Result<Layout2D> {
    config.validate()?;
    let k = config.n_neighbors.min(vectors.len().saturating_sub(1));
    if k == 0 {
        return Err(Error::data("projection needs at least 2 points".to_string()));
    }
    let knn_result = knn(vectors, k)?;
    let graph = fuzzy_graph(&knn_result);
    layout(&graph, config)
}

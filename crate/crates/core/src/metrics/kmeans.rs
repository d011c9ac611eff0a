//! Seeded k-means (k-means++ initialization, Lloyd iterations) used to build
//! the quantization codebooks for MAUVE and JSD.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sq_dist;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    /// Sum of squared distances from each point to its centroid at exit.
    pub inertia: f64,
    /// Inertia after every assignment step, in order.
    pub inertia_trace: Vec<f64>,
}

impl Codebook {
    /// A fixed codebook, e.g. for hand-built quantizers.
    pub fn from_centroids(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Invalid("codebook needs at least one centroid".into()))?;
        if centroids
            .iter()
            .any(|c| c.len() != dim || c.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Invalid("centroids must be finite and share a dimension".into()));
        }
        Ok(Codebook {
            centroids,
            seed: 0,
            inertia: 0.0,
            inertia_trace: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, point).0
    }
}

fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn kmeans<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64, max_iters: usize) -> Result<Codebook> {
    let points: Vec<&[f64]> = points.iter().map(AsRef::as_ref).collect();
    if k == 0 {
        return Err(Error::Invalid("k-means needs k >= 1".into()));
    }
    if k > points.len() {
        return Err(Error::Invalid(format!(
            "k-means with k = {k} on {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Invalid("k-means points differ in dimension".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&points, k, &mut rng);
    let (mut assignment, inertia) = assign(&points, &centroids);
    let mut trace = vec![inertia];
    for _ in 0..max_iters {
        update(&points, &assignment, &mut centroids);
        let (next, inertia) = assign(&points, &centroids);
        trace.push(inertia);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(Codebook {
        centroids,
        seed,
        inertia: *trace.last().unwrap_or(&0.0),
        inertia_trace: trace,
    })
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final prefix sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            chosen.iter().position(|&c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(points[pick].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, points[pick]));
        }
    }
    centroids
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (i, d) = nearest(centroids, p);
            inertia += d;
            i
        })
        .collect();
    (labels, inertia)
}

/// Move centroids to their cluster means. An empty cluster is re-seeded at the
/// point farthest from its own centroid.
fn update(points: &[&[f64]], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            centroids[c] = sums[c].iter().map(|s| s / n).collect();
        }
    }
    let mut taken = vec![false; points.len()];
    for c in (0..k).filter(|&c| counts[c] == 0) {
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = sq_dist(p, &centroids[assignment[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            taken[i] = true;
            centroids[c] = points[i].to_vec();
        }
    }
}

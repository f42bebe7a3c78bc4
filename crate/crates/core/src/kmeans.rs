//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::tensor::Tensor;

const MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Tensor,
    pub inertia: f64,
    /// Inertia after every assignment and update step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best-inertia clustering over `n_init` seeded restarts.
pub fn kmeans(points: &Tensor, k: usize, n_init: usize, seed: u64) -> Result<KMeansResult> {
    if points.rank() != 2 {
        return Err(Error::Parameter("k-means needs an n×m matrix".into()));
    }
    let n = points.rows();
    if k == 0 || n < k {
        return Err(Error::Parameter(format!("k-means needs 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    let mut rng = rng_for(seed, Stream::KMeans);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..n_init.max(1) {
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(points: &Tensor, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut centers = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(points: &Tensor, centers: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, l) in labels.iter_mut().enumerate() {
        let x = points.row(i);
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(x, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        *l = best.0;
        inertia += best.1;
    }
    inertia
}

fn inertia_of(points: &Tensor, centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), &centers[l]))
        .sum()
}

fn lloyd(points: &Tensor, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let (n, m) = (points.rows(), points.cols());
    let mut centers = plus_plus(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    let mut prev_labels: Option<Vec<usize>> = None;

    for _ in 0..MAX_ITER {
        trace.push(assign(points, &centers, &mut labels));

        // Empty clusters take the point farthest from its current center.
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| {
                    let da = sq_dist(points.row(a), &centers[labels[a]]);
                    let db = sq_dist(points.row(b), &centers[labels[b]]);
                    da.total_cmp(&db)
                });
            if let Some(i) = far {
                sizes[labels[i]] -= 1;
                labels[i] = c;
                sizes[c] = 1;
                centers[c] = points.row(i).to_vec();
            }
        }

        let mut sums = vec![vec![0.0; m]; k];
        for (i, &l) in labels.iter().enumerate() {
            for (s, x) in sums[l].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for (c, s) in sums.into_iter().enumerate() {
            if sizes[c] > 0 {
                centers[c] = s.into_iter().map(|x| x / sizes[c] as f64).collect();
            }
        }
        trace.push(inertia_of(points, &centers, &labels));

        if prev_labels.as_deref() == Some(&labels[..]) {
            break;
        }
        prev_labels = Some(labels.clone());
    }

    let inertia = inertia_of(points, &centers, &labels);
    let flat = centers.into_iter().flatten().collect();
    KMeansResult {
        labels,
        centers: Tensor::from_raw(vec![k, m], flat),
        inertia,
        inertia_trace: trace,
    }
}

//! Cluster-quality metrics: silhouette, NMI, ARI, size balance and relative
//! reconstruction loss.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Cluster indices in `[0, k)` for `n ≥ 1` points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("labeling"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Parameter(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.labels
    }
}

fn n_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient with Euclidean distances. Points in singleton
/// clusters contribute 0.
pub fn silhouette(points: &Tensor, labels: &[usize]) -> Result<f64> {
    if points.rank() != 2 || points.rows() != labels.len() {
        return Err(shape_err(
            "silhouette",
            format!("{} labels for points {:?}", labels.len(), points.shape()),
        ));
    }
    let n = labels.len();
    let k = n_classes(labels);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let nonempty = sizes.iter().filter(|&&s| s > 0).count();
    if n < 2 || nonempty < 2 {
        return Err(Error::UndefinedMetric(format!(
            "silhouette needs at least 2 non-empty clusters, found {nonempty}"
        )));
    }

    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let xi = points.row(i);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += euclid(xi, points.row(j));
            }
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

struct Contingency {
    n: usize,
    table: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(shape_err("contingency", format!("labelings of length {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Empty("labeling"));
    }
    let (ka, kb) = (n_classes(a), n_classes(b));
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        n: a.len(),
        table,
        rows,
        cols,
    })
}

fn entropy_nats(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Normalized mutual information, `I(a;b) / ((H(a) + H(b)) / 2)`, natural logs.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let (ha, hb) = (entropy_nats(&c.rows, c.n), entropy_nats(&c.cols, c.n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let pij = nij as f64 / n;
                mi += pij * (n * nij as f64 / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from pair counts.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = contingency(a, b)?;
    let index: f64 = c.table.iter().flatten().map(|&x| pairs(x)).sum();
    let sum_a: f64 = c.rows.iter().map(|&x| pairs(x)).sum();
    let sum_b: f64 = c.cols.iter().map(|&x| pairs(x)).sum();
    // Everything below is scaled by the total pair count so that it stays in
    // integers until the final division.
    let total = pairs(c.n);
    let num = index * total - sum_a * sum_b;
    let den = 0.5 * (sum_a + sum_b) * total - sum_a * sum_b;
    if den == 0.0 {
        // both partitions trivial in the same way (all-one or all-singleton)
        return Ok(1.0);
    }
    Ok(num / den)
}

/// `−Σ P(C_i) log₂ P(C_i)` over the `k` clusters; empty clusters add nothing.
pub fn entropy_balance(labels: &[usize], k: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let sizes = histogram(labels, k);
    let n = labels.len() as f64;
    let h = -sizes
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

fn histogram(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; k.max(n_classes(labels))];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Sizes of the largest and smallest non-empty clusters.
pub fn cluster_sizes(labels: &[usize], k: usize) -> (usize, usize) {
    let sizes = histogram(labels, k);
    let max = sizes.iter().copied().max().unwrap_or(0);
    let min = sizes.iter().copied().filter(|&s| s > 0).min().unwrap_or(0);
    (max, min)
}

/// Relative reconstruction loss in percent; negative means below `rl_pretrained`.
pub fn rrl(rl: f64, rl_pretrained: f64) -> Result<f64> {
    if !(rl_pretrained > 0.0) {
        return Err(Error::Parameter(format!(
            "pretrained reconstruction loss must be positive, got {rl_pretrained}"
        )));
    }
    Ok(100.0 * (rl - rl_pretrained) / rl_pretrained)
}

/// One run's evaluation, serialized with exactly these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sc: Option<f64>,
    pub sc_post_dynamics: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub entropy: f64,
    pub cs_max: usize,
    pub cs_min: usize,
    pub rl: Option<f64>,
    pub rl_pretrained: Option<f64>,
    pub rrl_percent: Option<f64>,
}

impl MetricsReport {
    pub fn summary(&self) -> String {
        fn f(x: Option<f64>) -> String {
            x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        }
        let rows = [
            ("SC (latent)", f(self.sc)),
            ("SC (after dynamics)", f(self.sc_post_dynamics)),
            ("NMI", f(self.nmi)),
            ("ARI", f(self.ari)),
            ("entropy", format!("{:.4}", self.entropy)),
            ("cluster sizes", format!("max {} / min {}", self.cs_max, self.cs_min)),
            ("RL", self.rl.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))),
            ("RL pretrained", self.rl_pretrained.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))),
            ("RRL %", self.rrl_percent.map_or_else(|| "-".into(), |v| format!("{v:.2}"))),
        ];
        rows.iter().map(|(name, value)| format!("{name:<21}{value}\n")).collect()
    }
}

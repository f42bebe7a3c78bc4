use std::collections::BTreeMap;

use dcam_core::metrics::{ari, entropy_balance, nmi, silhouette};
use dcam_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

const LABELINGS: usize = 200;

fn counts(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn silhouette_oracle(points: &Tensor, labels: &[usize]) -> f64 {
    let n = labels.len();
    let clusters: Vec<usize> = counts(labels).into_keys().collect();
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |c: usize| {
            let (mut s, mut cnt) = (0.0, 0);
            for j in 0..n {
                if j != i && labels[j] == c {
                    s += dist(points.row(i), points.row(j));
                    cnt += 1;
                }
            }
            (s, cnt)
        };
        let (s_own, n_own) = mean_to(labels[i]);
        if n_own == 0 {
            continue;
        }
        let a = s_own / n_own as f64;
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let (s, cnt) = mean_to(c);
                s / cnt as f64
            })
            .fold(f64::INFINITY, f64::min);
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

fn nmi_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let (ca, cb) = (counts(a), counts(b));
    let mut joint = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0usize) += 1;
    }
    let h = |c: &BTreeMap<usize, usize>| -c.values().map(|&v| (v as f64 / n) * (v as f64 / n).ln()).sum::<f64>();
    let (ha, hb) = (h(&ca), h(&cb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    let mi: f64 = joint.iter().map(|(&(x, y), &v)| (v as f64 / n) * (n * v as f64 / (ca[&x] as f64 * cb[&y] as f64)).ln()).sum();
    (mi / (0.5 * (ha + hb))).clamp(0.0, 1.0)
}

// pair counting over every i < j
fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if den == 0.0 {
        return 1.0;
    }
    2.0 * (both * neither - only_a * only_b) / den
}

fn entropy_oracle(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    (-counts(labels).values().map(|&c| (c as f64 / n) * (c as f64 / n).log2()).sum::<f64>()).max(0.0)
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e7);
    let mut mismatches = Vec::new();
    for case in 0..LABELINGS {
        let n = rng.random_range(2..=300);
        let (ka, kb, m) = (rng.random_range(2..=6), rng.random_range(1..=6), rng.random_range(1..=4));
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let points = Tensor::matrix(n, m, (0..n * m).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();

        if nmi(&a, &b).unwrap() != nmi_oracle(&a, &b) {
            mismatches.push(format!("nmi#{case}"));
        }
        if ari(&a, &b).unwrap() != ari_oracle(&a, &b) {
            mismatches.push(format!("ari#{case}"));
        }
        if entropy_balance(&a, ka) != entropy_oracle(&a) {
            mismatches.push(format!("entropy#{case}"));
        }
        if counts(&a).len() >= 2 && silhouette(&points, &a).unwrap() != silhouette_oracle(&points, &a) {
            mismatches.push(format!("silhouette#{case}"));
        }
    }
    let ari_example = ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    let entropy_gap = (1..=12usize)
        .map(|k| {
            let balanced: Vec<usize> = (0..k * 7).map(|i| i % k).collect();
            (entropy_balance(&balanced, k) - (k as f64).log2()).abs()
        })
        .fold(0.0, f64::max);
    Outcome::check(
        mismatches.is_empty() && ari_example == -0.5 && entropy_gap <= 1e-12,
        format!(
            "{LABELINGS} labelings, {} inexact ({}); ARI example {ari_example}; balanced entropy off log2 k by {entropy_gap:.1e}",
            mismatches.len(),
            mismatches.join(" ")
        ),
    )
}

//! Forward kernels for the differentiable primitives.
//!
//! These are the tape-free versions of every operation the [`Tape`] records.
//! The tape calls exactly these functions, so a value computed eagerly here
//! is bit-identical to the same value recorded on a tape.
//!
//! [`Tape`]: super::Tape

use crate::error::{shape_err, Error, Result};
use crate::tensor::{gemm, MatRef, Tensor};

fn expect_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(shape_err(op, format!("expected a matrix, got shape {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, p) = expect_matrix("matmul", a)?;
    let (p2, q) = expect_matrix("matmul", b)?;
    if p != p2 {
        return Err(shape_err("matmul", format!("[{n}x{p}] · [{p2}x{q}]")));
    }
    let mut out = vec![0.0; n * q];
    gemm(1.0, MatRef::of(a.data(), n, p), MatRef::of(b.data(), p, q), 0.0, &mut out);
    Ok(Tensor::from_raw(vec![n, q], out))
}

pub fn add_bias(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, p) = expect_matrix("add_bias", a)?;
    if bias.shape() != [p] {
        return Err(shape_err(
            "add_bias",
            format!("bias shape {:?} for width {p}", bias.shape()),
        ));
    }
    let mut out = a.data().to_vec();
    for row in out.chunks_mut(p.max(1)) {
        for (x, b) in row.iter_mut().zip(bias.data()) {
            *x += b;
        }
    }
    Ok(Tensor::from_raw(vec![n, p], out))
}

pub fn relu(a: &Tensor) -> Tensor {
    a.map(|x| if x > 0.0 { x } else { 0.0 })
}

/// Entry `(j, i)` is the squared Euclidean distance between row `j` of `v`
/// and row `i` of `rho`.
pub fn pairwise_sq_dist(v: &Tensor, rho: &Tensor) -> Result<Tensor> {
    let (n, m) = expect_matrix("pairwise_sq_dist", v)?;
    let (k, m2) = expect_matrix("pairwise_sq_dist", rho)?;
    if m != m2 {
        return Err(shape_err(
            "pairwise_sq_dist",
            format!("point width {m} vs prototype width {m2}"),
        ));
    }
    let mut out = Vec::with_capacity(n * k);
    for vj in v.iter_rows().take(n) {
        for i in 0..k {
            let ri = rho.row(i);
            let d: f64 = vj.iter().zip(ri).map(|(a, b)| (a - b) * (a - b)).sum();
            out.push(d);
        }
    }
    Ok(Tensor::from_raw(vec![n, k], out))
}

/// Row-wise `softmax(-beta * d)`, stabilised by subtracting the row maximum.
pub fn softmax_neg_scaled(d: &Tensor, beta: f64) -> Result<Tensor> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!("beta must be positive and finite, got {beta}")));
    }
    let (n, k) = expect_matrix("softmax_neg_scaled", d)?;
    let mut out = vec![0.0; n * k];
    for (src, dst) in d.data().chunks(k.max(1)).zip(out.chunks_mut(k.max(1))) {
        let max = src.iter().map(|&x| -beta * x).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &x) in dst.iter_mut().zip(src) {
            *o = (-beta * x - max).exp();
            total += *o;
        }
        for o in dst.iter_mut() {
            *o /= total;
        }
    }
    Ok(Tensor::from_raw(vec![n, k], out))
}

/// Sum over all entries of `(a - b)^2`.
pub fn sq_error_sum(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(shape_err(
            "sq_error_sum",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let s = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(Tensor::scalar(s))
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    a.map(|x| c * x)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(shape_err("add", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Ok(Tensor::from_raw(a.shape().to_vec(), data))
}

pub fn sum(a: &Tensor) -> Tensor {
    Tensor::scalar(a.sum())
}

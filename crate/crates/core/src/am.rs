//! Dense associative memory dynamics in the latent space.
//!
//! The energy of a latent point `v` against prototypes `ρ_1..ρ_k` is
//!
//! ```text
//! E(v) = −(1/2β) · log Σ_i exp(−β‖ρ_i − v‖²)
//! ```
//!
//! whose gradient is `∇E(v) = v − Σ_i w_i ρ_i` with `w = softmax(−β‖ρ − v‖²)`.
//! One attractor step moves `v` a fraction `τ` of the way down that gradient:
//!
//! ```text
//! v' = v − τ∇E(v) = (1 − τ)·v + τ·Σ_i w_i ρ_i
//! ```
//!
//! For `τ ≤ 1` this is a convex combination, never increases the energy, and
//! at `τ = 1` is exactly the softmax-weighted prototype mean.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ops, Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// `k × m` matrix of memories; row `i` is prototype `ρ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    rho: Tensor,
}

impl Prototypes {
    pub fn new(rho: Tensor) -> Result<Self> {
        if rho.rank() != 2 || rho.shape()[0] == 0 || rho.shape()[1] == 0 {
            return Err(shape_err("prototypes", format!("need a non-empty k×m matrix, got {:?}", rho.shape())));
        }
        if !rho.all_finite() {
            return Err(Error::Parameter("prototypes must be finite".into()));
        }
        Ok(Self { rho })
    }

    pub fn k(&self) -> usize {
        self.rho.rows()
    }

    pub fn dim(&self) -> usize {
        self.rho.cols()
    }

    pub fn matrix(&self) -> &Tensor {
        &self.rho
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut Tensor {
        &mut self.rho
    }

    pub fn into_matrix(self) -> Tensor {
        self.rho
    }

    fn check_width(&self, op: &'static str, v: &Tensor) -> Result<()> {
        if v.rank() != 2 || v.shape()[1] != self.dim() {
            return Err(shape_err(
                op,
                format!("points {:?} vs prototype width {}", v.shape(), self.dim()),
            ));
        }
        Ok(())
    }
}

/// Inverse temperature, step size, and number of recursive steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmConfig {
    pub beta: f64,
    pub tau: f64,
    pub steps: usize,
}

impl AmConfig {
    pub fn new(beta: f64, tau: f64, steps: usize) -> Result<Self> {
        let cfg = Self { beta, tau, steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Parameter(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        Ok(())
    }

    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }
}

/// Energy of a single latent point, evaluated with a stable log-sum-exp.
pub fn energy(v: &[f64], p: &Prototypes, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    if v.len() != p.dim() {
        return Err(shape_err("energy", format!("point width {} vs prototype width {}", v.len(), p.dim())));
    }
    let d: Vec<f64> = p
        .matrix()
        .iter_rows()
        .map(|r| r.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let tail: f64 = d.iter().map(|&di| (-beta * (di - d_min)).exp()).sum();
    Ok(0.5 * d_min - tail.ln() / (2.0 * beta))
}

/// One attractor step for every row of `v`.
pub fn am_step(v: &Tensor, p: &Prototypes, cfg: &AmConfig) -> Result<Tensor> {
    cfg.validate()?;
    p.check_width("am_step", v)?;
    step_kernel(v, p.matrix(), cfg.beta, cfg.tau)
}

fn step_kernel(v: &Tensor, rho: &Tensor, beta: f64, tau: f64) -> Result<Tensor> {
    let d = ops::pairwise_sq_dist(v, rho)?;
    let w = ops::softmax_neg_scaled(&d, beta)?;
    let target = ops::matmul(&w, rho)?;
    ops::add(&ops::scale(v, 1.0 - tau), &ops::scale(&target, tau))
}

/// `cfg.steps`-fold composition of [`am_step`]; zero steps is the identity.
pub fn am_recurse(v: &Tensor, p: &Prototypes, cfg: &AmConfig) -> Result<Tensor> {
    cfg.validate()?;
    p.check_width("am_recurse", v)?;
    let mut cur = v.clone();
    for _ in 0..cfg.steps {
        cur = step_kernel(&cur, p.matrix(), cfg.beta, cfg.tau)?;
    }
    Ok(cur)
}

/// Recorded attractor step; differentiable in both `v` and `rho`.
pub fn am_step_on(tape: &mut Tape, v: Var, rho: Var, beta: f64, tau: f64) -> Result<Var> {
    let d = tape.pairwise_sq_dist(v, rho)?;
    let w = tape.softmax_neg_scaled(d, beta)?;
    let target = tape.matmul(w, rho)?;
    let keep = tape.scale(v, 1.0 - tau);
    let pull = tape.scale(target, tau);
    tape.add(keep, pull)
}

/// Recorded `cfg.steps`-fold recursion.
pub fn am_recurse_on(tape: &mut Tape, v: Var, rho: Var, cfg: &AmConfig) -> Result<Var> {
    cfg.validate()?;
    let mut cur = v;
    for _ in 0..cfg.steps {
        cur = am_step_on(tape, cur, rho, cfg.beta, cfg.tau)?;
    }
    Ok(cur)
}

/// Index of the nearest prototype for every row; ties go to the lowest index.
pub fn assign(v: &Tensor, p: &Prototypes) -> Result<Vec<usize>> {
    p.check_width("assign", v)?;
    let d = ops::pairwise_sq_dist(v, p.matrix())?;
    Ok(d.iter_rows()
        .take(v.rows())
        .map(|row| {
            let mut best = 0;
            for (i, &x) in row.iter().enumerate().skip(1) {
                if x < row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn protos(rows: &[&[f64]]) -> Prototypes {
        Prototypes::new(Tensor::from_rows(rows).unwrap()).unwrap()
    }

    fn pts(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn energy_examples() {
        let p = protos(&[&[1.0, -2.0]]);
        assert_eq!(energy(&[1.0, -2.0], &p, 3.0).unwrap(), 0.0);

        // ‖ρ − v‖² = 2 with β = 1
        let p = protos(&[&[1.0, 1.0]]);
        assert!((energy(&[0.0, 0.0], &p, 1.0).unwrap() - 1.0).abs() < 1e-15);

        let p = protos(&[&[0.0], &[1.0]]);
        let expected = -0.5 * (1.0 + (-1.0f64).exp()).ln();
        let e = energy(&[0.0], &p, 1.0).unwrap();
        assert!((e - expected).abs() < 1e-15);
        assert!((e + 0.1566).abs() < 1e-4);
    }

    #[test]
    fn energy_errors() {
        let p = protos(&[&[0.0, 0.0]]);
        assert!(matches!(energy(&[0.0], &p, 1.0), Err(Error::Shape { .. })));
        assert!(matches!(energy(&[0.0, 0.0], &p, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn single_prototype_full_step_lands_on_it() {
        let p = protos(&[&[0.3, -1.7]]);
        let cfg = AmConfig::new(0.7, 1.0, 1).unwrap();
        let out = am_step(&pts(&[&[5.0, 2.0], &[-1.0, 0.0]]), &p, &cfg).unwrap();
        assert_eq!(out.row(0), &[0.3, -1.7]);
        assert_eq!(out.row(1), &[0.3, -1.7]);
    }

    #[test]
    fn midpoint_is_fixed() {
        let p = protos(&[&[-1.0, 0.0], &[1.0, 0.0]]);
        let cfg = AmConfig::new(2.0, 1.0, 1).unwrap();
        let out = am_step(&pts(&[&[0.0, 0.0]]), &p, &cfg).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn two_prototype_step_value() {
        let p = protos(&[&[0.0], &[1.0]]);
        let cfg = AmConfig::new(1.0, 1.0, 1).unwrap();
        let out = am_step(&pts(&[&[0.0]]), &p, &cfg).unwrap();
        let e = (-1.0f64).exp();
        assert!((out.item() - e / (1.0 + e)).abs() < 1e-15);
        assert!((out.item() - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn recurse_zero_steps_is_identity() {
        let p = protos(&[&[0.0], &[1.0]]);
        let v = pts(&[&[0.25], &[3.0]]);
        let cfg = AmConfig::new(1.0, 0.5, 0).unwrap();
        assert_eq!(am_recurse(&v, &p, &cfg).unwrap(), v);
    }

    #[test]
    fn recurse_single_prototype_collapses() {
        let p = protos(&[&[2.0, 2.0]]);
        let v = pts(&[&[0.0, 1.0], &[-4.0, 3.0]]);
        for steps in 1..4 {
            let cfg = AmConfig::new(0.1, 1.0, steps).unwrap();
            let out = am_recurse(&v, &p, &cfg).unwrap();
            assert!(out.iter_rows().all(|r| r == [2.0, 2.0]));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(AmConfig::new(0.0, 1.0, 1).is_err());
        assert!(AmConfig::new(1.0, 0.0, 1).is_err());
        assert!(AmConfig::new(1.0, 1.5, 1).is_err());
        let p = protos(&[&[0.0, 0.0]]);
        let cfg = AmConfig::new(1.0, 1.0, 1).unwrap();
        assert!(am_step(&pts(&[&[0.0]]), &p, &cfg).is_err());
    }

    #[test]
    fn assign_examples() {
        let one = protos(&[&[5.0]]);
        assert_eq!(assign(&pts(&[&[0.0], &[9.0]]), &one).unwrap(), vec![0, 0]);

        let p = protos(&[&[0.0, 0.0], &[1.0, 1.0], &[3.0, 0.0]]);
        assert_eq!(assign(&pts(&[&[1.0, 1.0], &[3.0, 0.0]]), &p).unwrap(), vec![1, 2]);

        let p = protos(&[&[-1.0], &[1.0]]);
        assert_eq!(assign(&pts(&[&[0.0]]), &p).unwrap(), vec![0]);
    }

    #[test]
    fn tape_step_matches_eager() {
        let p = protos(&[&[0.0, 1.0], &[2.0, -1.0], &[0.5, 0.5]]);
        let v = pts(&[&[0.3, 0.1], &[1.9, -0.2]]);
        let cfg = AmConfig::new(1.3, 0.5, 3).unwrap();
        let mut tape = Tape::new();
        let vv = tape.constant(v.clone());
        let rv = tape.constant(p.matrix().clone());
        let out = am_recurse_on(&mut tape, vv, rv, &cfg).unwrap();
        assert_eq!(tape.value(out), &am_recurse(&v, &p, &cfg).unwrap());
    }
}

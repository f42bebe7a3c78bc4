use std::time::Instant;

use dcam_core::am::{am_recurse, AmConfig, Prototypes};
use dcam_core::autodiff::{ops, Tape};
use dcam_core::network::{Activation, DenseLayer};
use dcam_core::trainer::{dcam_loss, loss_on};
use dcam_core::{Autoencoder, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

const INSTANCES: u64 = 100;
const TOLERANCE: f64 = 1e-4;
const BUDGET_SECS: f64 = 30.0;

struct Instance {
    ae: Autoencoder,
    protos: Prototypes,
    batch: Tensor,
    am: AmConfig,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

// Differences straddling a ReLU kink measure the kink, not the gradient, so
// instances whose pre-activations come within 1e-2 of zero are redrawn.
fn kink_margin(inst: &Instance) -> f64 {
    fn through(layers: &[DenseLayer], x: &Tensor, margin: &mut f64) -> Tensor {
        let mut h = x.clone();
        for l in layers {
            let z = ops::add_bias(&ops::matmul(&h, &l.weight).unwrap(), &l.bias).unwrap();
            if l.activation == Activation::Relu {
                *margin = z.data().iter().fold(*margin, |m, v| m.min(v.abs()));
                h = ops::relu(&z);
            } else {
                h = z;
            }
        }
        h
    }
    let mut margin = f64::INFINITY;
    let v = through(inst.ae.encoder(), &inst.batch, &mut margin);
    let moved = am_recurse(&v, &inst.protos, &inst.am).unwrap();
    through(inst.ae.decoder(), &moved, &mut margin);
    margin
}

fn draw(rng: &mut ChaCha8Rng, steps: usize) -> Instance {
    loop {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=12);
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let h = rng.random_range(2..=6);
        let inst = Instance {
            ae: Autoencoder::with_hidden(d, &[h], m, rng.random()).unwrap(),
            protos: Prototypes::new(uniform(rng, k, m, -1.0, 1.0)).unwrap(),
            batch: uniform(rng, n, d, 0.0, 1.0),
            am: AmConfig::new(rng.random_range(0.2..2.0), rng.random_range(0.3..=1.0), steps).unwrap(),
        };
        if kink_margin(&inst) > 1e-2 {
            return inst;
        }
    }
}

// five-point central stencil
fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn with_entry(t: &Tensor, e: usize, value: f64) -> Tensor {
    let mut data = t.data().to_vec();
    data[e] = value;
    Tensor::new(t.shape().to_vec(), data).unwrap()
}

fn max_rel_error(inst: &Instance) -> f64 {
    let mut tape = Tape::new();
    let vars = inst.ae.register(&mut tape);
    let rho_id = inst.ae.prototype_param_id();
    let rho = tape.param(rho_id, inst.protos.matrix().clone());
    let x = tape.constant(inst.batch.clone());
    let loss = loss_on(&mut tape, &inst.ae, &vars, Some(rho), x, &inst.am).unwrap();
    let grads = tape.backward(loss).unwrap();

    // A parameter behind a unit that is dead for the whole batch has an exact
    // zero gradient, while its differences are a one-ulp change of the loss
    // over the step, about 1e-12. The floor keeps that noise from counting.
    let rel = |g: f64, fd: f64| (g - fd).abs() / (g.abs() + fd.abs()).max(1e-6);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for (id, p) in inst.ae.params() {
        let g = grads.get(id).unwrap();
        for e in 0..p.len() {
            let eval = |value: f64| {
                let mut ae = inst.ae.clone();
                *ae.param_mut(id).unwrap() = with_entry(p, e, value);
                dcam_loss(&ae, &inst.protos, &inst.am, &inst.batch).unwrap()
            };
            worst = worst.max(rel(g.data()[e], derivative(eval, p.data()[e], h)));
        }
    }
    let rho_t = inst.protos.matrix();
    let g = grads.get(rho_id).unwrap();
    for e in 0..rho_t.len() {
        let eval = |value: f64| {
            let p = Prototypes::new(with_entry(rho_t, e, value)).unwrap();
            dcam_loss(&inst.ae, &p, &inst.am, &inst.batch).unwrap()
        };
        worst = worst.max(rel(g.data()[e], derivative(eval, rho_t.data()[e], h)));
    }
    worst
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let inst = draw(&mut rng, [1, 3, 5][i as usize % 3]);
        worst = worst.max(max_rel_error(&inst));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        worst < TOLERANCE && secs < BUDGET_SECS,
        format!("{INSTANCES} instances, max relative error {worst:.2e} (< {TOLERANCE:e}), {secs:.1}s (< {BUDGET_SECS}s)"),
    )
}

use dcam_core::am::Prototypes;
use dcam_core::network::{Activation, DenseLayer};
use dcam_core::trainer::{select_record, train_from, CurriculumState, StageRecord, TrainObserver};
use dcam_core::{Autoencoder, Tensor, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

const LR_FLOOR: f64 = 1e-5;

#[derive(Default)]
struct Trace {
    losses: Vec<f64>,
    depths: Vec<usize>,
    lrs: Vec<f64>,
}

impl TrainObserver for Trace {
    fn on_epoch(&mut self, _epoch: usize, loss: f64, state: &CurriculumState) {
        self.losses.push(loss);
        self.depths.push(state.current_t);
        self.lrs.push(state.lrs.enc);
    }
}

/// A run whose loss cannot move: one prototype and a full step put every
/// latent point on it whatever the depth, so the encoder gets no gradient,
/// and the decoder and prototype rates are zero. Only the encoder rate is
/// positive, which makes the plateau decay observable.
fn frozen_run() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::matrix(30, 4, (0..120).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let ae = Autoencoder::with_hidden(4, &[3], 2, 3).unwrap();
    let protos = Prototypes::new(Tensor::from_rows(&[[0.3, -0.2]]).unwrap()).unwrap();
    let cfg = TrainConfig {
        tau: 1.0,
        lr_am: 0.0,
        lr_dec: 0.0,
        lr_enc: 1e-3,
        batch_size: 64,
        max_epochs: 10_000,
        ..TrainConfig::default()
    };
    let mut trace = Trace::default();
    let model = train_from(ae, protos, &x, &cfg, &mut trace).map_err(|e| e.to_string())?;

    let first = trace.losses[0];
    if trace.losses.iter().any(|&l| (l - first).abs() > 1e-12 * first) {
        return Err("loss moved".into());
    }
    let mut lr = cfg.lr_enc;
    let (mut plateaus, mut triggers) = (0, 0);
    for w in 1..trace.depths.len() {
        let (t0, t1) = (trace.depths[w - 1], trace.depths[w]);
        if t1 != t0 {
            if t1 != t0 + 1 {
                return Err(format!("depth jumped {t0} -> {t1}"));
            }
            triggers += 1;
        }
        if trace.lrs[w] != trace.lrs[w - 1] {
            let want = (lr * 0.8).max(LR_FLOOR);
            if trace.lrs[w] != want {
                return Err(format!("rate went {lr:e} -> {:e}, wanted {want:e}", trace.lrs[w]));
            }
            lr = want;
            plateaus += 1;
        }
    }
    let last_t = *trace.depths.last().unwrap();
    let epochs = trace.losses.len();
    // a plateau is lr_patience flat epochs; curriculum_patience plateaus raise T
    let want_epochs = 1 + cfg.t_max * cfg.lr_patience * cfg.curriculum_patience;
    if last_t != cfg.t_max || epochs != want_epochs || triggers != cfg.t_max - 1 {
        return Err(format!("halted at T={last_t} after {epochs} epochs and {triggers} triggers"));
    }
    if model.history.len() != cfg.t_max {
        return Err(format!("{} stage records", model.history.len()));
    }
    Ok(format!("T 1->{last_t} in {triggers} unit steps over {epochs} epochs, {plateaus} rate cuts of x0.8 down to {lr:.1e}"))
}

/// Identity network with every point on its prototype: the first epoch's
/// loss is exactly zero, so training stops there.
fn floor_run() -> Result<String, String> {
    let eye = |act| DenseLayer::new(Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(), Tensor::zeros(&[2]), act).unwrap();
    let ae = Autoencoder::from_layers(vec![eye(Activation::Identity)], vec![eye(Activation::Identity)]).unwrap();
    let corners = [[0.2, 0.2], [0.8, 0.8]];
    let x = Tensor::from_rows(&(0..20).map(|i| corners[i % 2]).collect::<Vec<_>>()).unwrap();
    let protos = Prototypes::new(Tensor::from_rows(&corners).unwrap()).unwrap();
    let cfg = TrainConfig {
        beta: 1e4,
        ..TrainConfig::default()
    };
    let mut trace = Trace::default();
    train_from(ae, protos, &x, &cfg, &mut trace).map_err(|e| e.to_string())?;
    let loss = trace.losses[0];
    if trace.losses.len() != 1 || loss > cfg.loss_floor {
        return Err(format!("{} epochs, first loss {loss:e}", trace.losses.len()));
    }
    Ok(format!("loss {loss:.1e} <= {:e} stops after 1 epoch", cfg.loss_floor))
}

/// Random histories: the selected record is inside the 10% band and no
/// record in the band beats it.
fn selection() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = 1000;
    for case in 0..cases {
        let h: Vec<StageRecord> = (0..rng.random_range(1..=25))
            .map(|i| StageRecord {
                t: i + 1,
                epoch: i * 10,
                loss: rng.random_range(1e-4..1.0),
                sc: (rng.random_range(-1.0..1.0f64) * 8.0).round() / 8.0,
            })
            .collect();
        let chosen = &h[select_record(&h).map_err(|e| e.to_string())?];
        let min = h.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        let beaten = h.iter().filter(|r| r.loss <= 1.1 * min).any(|r| r.sc > chosen.sc || (r.sc == chosen.sc && r.t < chosen.t));
        if chosen.loss > 1.1 * min || beaten {
            return Err(format!("history {case}: picked T={}", chosen.t));
        }
    }
    Ok(format!("{cases} histories select the best SC within 10% of the lowest loss"))
}

pub fn run() -> Outcome {
    let parts = [frozen_run(), floor_run(), selection()];
    let ok = parts.iter().all(Result::is_ok);
    let detail: Vec<String> = parts.into_iter().map(|r| r.unwrap_or_else(|e| format!("FAILED: {e}"))).collect();
    Outcome::check(ok, detail.join("; "))
}

//! Trains on synthetic blobs and prints the clustering quality.
//!
//! `cargo run --release -p dcam-core --example blobs -- [hidden=500,500,2000] [key=value ...]`
//!
//! Any other `key=value` argument overrides a training configuration field.

use std::time::Instant;

use dcam_core::metrics::{nmi, rrl, silhouette};
use dcam_core::trainer::{dataset_loss, infer, latents, pretrain, train_observed, CurriculumState, TrainConfig, TrainObserver};
use dcam_core::{gen_blobs, kmeans, Autoencoder, EAE_HIDDEN};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut hidden = EAE_HIDDEN.to_vec();
    let mut cfg = TrainConfig::default();
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').ok_or("expected key=value")?;
        if key == "hidden" {
            hidden = value.split(',').map(str::parse).collect::<Result<_, _>>()?;
        } else {
            cfg.set(key, value)?;
        }
    }
    let seed = cfg.seed;
    let k = 3;
    let blobs = gen_blobs(600, k, 50, 8.0, seed)?;

    let start = Instant::now();
    let mut ae = Autoencoder::with_hidden(50, &hidden, k, seed)?;
    let losses = pretrain(&mut ae, &blobs.features, &cfg)?;
    println!("pretrain: {:.1}s, final loss {:.3e}", start.elapsed().as_secs_f64(), losses.last().unwrap());
    let z0 = latents(&ae, &blobs.features)?;
    let km = kmeans(&z0, k, 10, seed)?;
    println!(
        "pretrained latents: k-means nmi={:.4} sc={:.4}",
        nmi(&km.labels, &blobs.labels)?,
        silhouette(&z0, &km.labels)?
    );
    let within = km.inertia / blobs.features.rows() as f64;
    let center_gap = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .map(|(a, b)| {
            let (ca, cb) = (km.centers.row(a), km.centers.row(b));
            ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    println!("latent mean within-cluster sq dist {within:.3e}, min center sq gap {center_gap:.3e}");

    let model = train_observed(ae, &blobs.features, k, &cfg, &mut Progress(std::env::var_os("VERBOSE").is_some()))?;
    println!("train: {:.1}s total", start.elapsed().as_secs_f64());
    for r in &model.history {
        println!("  T={} epoch={} loss={:.4e} sc={:.3}", r.t, r.epoch, r.loss, r.sc);
    }
    let labels = infer(&model, &blobs.features)?;
    let z = latents(&model.autoencoder, &blobs.features)?;
    let rl = dataset_loss(&model.autoencoder, Some(&model.prototypes), &model.am(), &blobs.features)?;
    println!(
        "chosen T={} nmi={:.4} sc={:.4} rrl={:.2}%",
        model.chosen_t,
        nmi(&labels, &blobs.labels)?,
        silhouette(&z, &labels)?,
        rrl(rl, model.rl_pretrained.unwrap())?
    );
    Ok(())
}

struct Progress(bool);

impl TrainObserver for Progress {
    fn on_epoch(&mut self, epoch: usize, loss: f64, state: &CurriculumState) {
        if self.0 {
            println!("  epoch {epoch:3} T={} loss={loss:.4e} lr_am={:.2e}", state.current_t, state.lrs.am);
        }
    }
}

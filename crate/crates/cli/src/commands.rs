use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use dcam_core::data::{write_csv, Dataset};
use dcam_core::persist::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
use dcam_core::trainer::{dataset_loss, fit_observed, fit_pretrained, latents, CurriculumState, StageRecord, TrainObserver};
use dcam_core::{
    evaluate, gen_blobs, infer, kmeans, load_model, pretrain, save_model, score_partition, Autoencoder, DatasetSpec,
    Error, MetricsReport, Prototypes, TrainConfig, TrainedModel,
};
use serde_json::json;

use crate::{Command, ConfigArgs, DataArg, NetArgs, OutArgs, SEED_ENV};

/// How the metadata names the NMI variant in use.
const NMI_NORMALIZATION: &str = "arithmetic";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(msg) => Self::Usage(msg),
            other => Self::Runtime(other.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

pub fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Pretrain { data, net, cfg, out } => run_pretrain(&data, &net, &cfg, &out),
        Command::Train {
            data,
            net,
            cfg,
            init,
            out,
            checkpoints,
        } => run_train(&data, &net, &cfg, init.as_deref(), &out, checkpoints),
        Command::Infer { model, data, out } => run_infer(&model, &data, &out),
        Command::Evaluate { model, data, out } => run_evaluate(&model, &data, &out),
        Command::Baseline {
            data,
            k,
            n_init,
            model,
            seed,
            out,
        } => run_baseline(&data, k, n_init, model.as_deref(), seed, &out),
        Command::Blobs {
            n,
            k,
            dim,
            separation,
            seed,
            out,
        } => {
            let b = gen_blobs(n, k, dim, separation, resolve_seed(seed)?).map_err(usage)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
            }
            write_csv(&out, &b.features, Some(&b.labels))?;
            Ok(())
        }
    }
}

fn require_file(path: &Path, what: &str) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Parses the dataset argument and checks its files exist, before any work.
fn dataset_spec(arg: &DataArg) -> Outcome<DatasetSpec> {
    let spec: DatasetSpec = arg.data.parse()?;
    for p in spec.paths() {
        require_file(p, "dataset file")?;
    }
    Ok(spec)
}

fn resolve_seed(flag: Option<u64>) -> Outcome<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not a seed"))),
        Err(_) => Ok(0),
    }
}

/// Defaults, then `$DCAM_SEED`, then the config file, then `--set`, then `--seed`.
fn train_config(args: &ConfigArgs) -> Outcome<TrainConfig> {
    let mut cfg = TrainConfig {
        seed: resolve_seed(None)?,
        ..TrainConfig::default()
    };
    if let Some(path) = &args.config {
        require_file(path, "configuration file")?;
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        cfg.apply_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(key.trim(), value.trim()).map_err(usage)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn check_k(k: usize) -> Outcome {
    if k < 2 {
        return Err(Failure::Usage(format!("need at least 2 clusters, got k = {k}")));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write(path, text)
}

fn write_labels(path: &Path, labels: &[usize]) -> Outcome {
    let mut text = String::from("label\n");
    for l in labels {
        let _ = writeln!(text, "{l}");
    }
    write(path, text)
}

fn write_report(dir: &Path, report: &MetricsReport, heading: &str) -> Outcome {
    write_json(&dir.join("report.json"), report)?;
    write(&dir.join("summary.txt"), format!("{heading}\n{}", report.summary()))
}

fn load(spec: &DatasetSpec) -> Outcome<Dataset> {
    let ds = spec.load()?;
    eprintln!("loaded {} rows of {} features", ds.features.rows(), ds.features.cols());
    Ok(ds)
}

fn run_pretrain(data: &DataArg, net: &NetArgs, args: &ConfigArgs, out: &Path) -> Outcome {
    let spec = dataset_spec(data)?;
    let cfg = train_config(args)?;
    check_k(net.k)?;
    let ds = load(&spec)?;
    let latent_dim = net.latent_dim.unwrap_or(net.k);
    let mut ae = Autoencoder::with_hidden(ds.features.cols(), &net.hidden, latent_dim, cfg.seed).map_err(usage)?;
    let losses = pretrain(&mut ae, &ds.features, &cfg)?;
    let rl = dataset_loss(&ae, None, &cfg.am(0), &ds.features)?;

    create_dir(out)?;
    save_checkpoint(
        &Checkpoint {
            autoencoder: ae,
            prototypes: None,
            chosen_t: 0,
            config: Some(cfg.clone()),
            history: vec![],
            rl_pretrained: Some(rl),
            curriculum: None,
        },
        &out.join("model.dcam"),
    )?;
    write_json(
        &out.join("run.json"),
        &json!({
            "command": "pretrain",
            "dataset": data.data,
            "rows": ds.features.rows(),
            "input_dim": ds.features.cols(),
            "hidden": net.hidden,
            "latent_dim": latent_dim,
            "config": cfg,
            "epoch_losses": losses,
            "rl_pretrained": rl,
            "model_format_version": FORMAT_VERSION,
        }),
    )?;
    write(
        &out.join("summary.txt"),
        format!("dataset {}\npretrained {} epochs, reconstruction loss {rl:.6e}\n", data.data, losses.len()),
    )
}

/// Prints every finished depth and optionally saves it.
struct StageLog {
    dir: Option<PathBuf>,
    cfg: TrainConfig,
    saved: usize,
    error: Option<Failure>,
}

impl TrainObserver for StageLog {
    fn on_stage(&mut self, record: &StageRecord, ae: &Autoencoder, prototypes: &Prototypes, state: &CurriculumState) {
        eprintln!(
            "  T={:<2} epoch {:<4} loss {:.4e}  sc {:.4}",
            record.t, record.epoch, record.loss, record.sc
        );
        let Some(dir) = &self.dir else { return };
        if self.error.is_some() {
            return;
        }
        let path = dir.join(format!("stage-{:03}-t{:02}.dcam", self.saved, record.t));
        let c = Checkpoint {
            autoencoder: ae.clone(),
            prototypes: Some(prototypes.clone()),
            chosen_t: record.t,
            config: Some(self.cfg.clone()),
            history: state.history.clone(),
            rl_pretrained: None,
            curriculum: Some(state.clone()),
        };
        match save_checkpoint(&c, &path) {
            Ok(()) => self.saved += 1,
            Err(e) => self.error = Some(e.into()),
        }
    }
}

fn run_metadata(command: &str, data: &DataArg, ds: &Dataset, model: &TrainedModel) -> serde_json::Value {
    json!({
        "command": command,
        "dataset": data.data,
        "rows": ds.features.rows(),
        "input_dim": ds.features.cols(),
        "encoder_dims": model.autoencoder.encoder_dims(),
        "k": model.prototypes.k(),
        "config": model.config,
        "chosen_t": model.chosen_t,
        "history": model.history,
        "nmi_normalization": NMI_NORMALIZATION,
        "model_format_version": FORMAT_VERSION,
    })
}

fn heading(data: &DataArg, model: &TrainedModel) -> String {
    let mut s = format!(
        "dataset {}\nclusters {}, chosen T = {}, seed {}\n",
        data.data,
        model.prototypes.k(),
        model.chosen_t,
        model.config.seed
    );
    for r in &model.history {
        let _ = writeln!(s, "  T={:<2} epoch {:<4} loss {:.4e}  sc {:.4}", r.t, r.epoch, r.loss, r.sc);
    }
    s
}

fn write_evaluation(out: &OutArgs, data: &DataArg, ds: &Dataset, model: &TrainedModel, command: &str) -> Outcome {
    let e = evaluate(model, &ds.features, ds.labels.as_deref())?;
    write_labels(&out.out.join("labels.csv"), &e.labels)?;
    if out.emit_latent {
        write_csv(&out.out.join("latent.csv"), &e.latents, Some(&e.labels))?;
    }
    write_report(&out.out, &e.report, &heading(data, model))?;
    write_json(&out.out.join("run.json"), &run_metadata(command, data, ds, model))
}

fn run_train(data: &DataArg, net: &NetArgs, args: &ConfigArgs, init: Option<&Path>, out: &OutArgs, checkpoints: bool) -> Outcome {
    let spec = dataset_spec(data)?;
    let cfg = train_config(args)?;
    check_k(net.k)?;
    if let Some(p) = init {
        require_file(p, "initial model")?;
    }
    let ds = load(&spec)?;
    let start = init.map(load_checkpoint).transpose()?;

    create_dir(&out.out)?;
    let dir = checkpoints.then(|| out.out.join("checkpoints"));
    if let Some(d) = &dir {
        create_dir(d)?;
    }
    let mut log = StageLog {
        dir,
        cfg: cfg.clone(),
        saved: 0,
        error: None,
    };
    let model = match start {
        Some(c) => fit_pretrained(&c.autoencoder, &ds.features, net.k, &cfg, &mut log)?,
        None => fit_observed(&ds.features, net.k, &net.hidden, net.latent_dim, &cfg, &mut log)?,
    };
    if let Some(e) = log.error {
        return Err(e);
    }
    save_model(&model, &out.out.join("model.dcam"))?;
    write_evaluation(out, data, &ds, &model, "train")
}

fn run_infer(model_path: &Path, data: &DataArg, out: &OutArgs) -> Outcome {
    require_file(model_path, "model")?;
    let spec = dataset_spec(data)?;
    let model = load_model(model_path)?;
    let ds = load(&spec)?;
    let labels = infer(&model, &ds.features)?;
    create_dir(&out.out)?;
    write_labels(&out.out.join("labels.csv"), &labels)?;
    if out.emit_latent {
        write_csv(&out.out.join("latent.csv"), &latents(&model.autoencoder, &ds.features)?, Some(&labels))?;
    }
    Ok(())
}

fn run_evaluate(model_path: &Path, data: &DataArg, out: &OutArgs) -> Outcome {
    require_file(model_path, "model")?;
    let spec = dataset_spec(data)?;
    let model = load_model(model_path)?;
    let ds = load(&spec)?;
    create_dir(&out.out)?;
    write_evaluation(out, data, &ds, &model, "evaluate")
}

fn run_baseline(data: &DataArg, k: usize, n_init: usize, model: Option<&Path>, seed: Option<u64>, out: &OutArgs) -> Outcome {
    let spec = dataset_spec(data)?;
    check_k(k)?;
    let seed = resolve_seed(seed)?;
    if let Some(p) = model {
        require_file(p, "model")?;
    }
    let ds = load(&spec)?;
    let network = model.map(load_checkpoint).transpose()?.map(|c| c.autoencoder);
    let points = match &network {
        Some(ae) => latents(ae, &ds.features)?,
        None => ds.features.clone(),
    };
    let km = kmeans(&points, k, n_init, seed).map_err(usage)?;
    let mut report = score_partition(&points, &km.labels, k, ds.labels.as_deref())?;
    if let Some(ae) = &network {
        // k-means leaves the network untouched, so its loss is the pretrained one
        let rl = dataset_loss(ae, None, &TrainConfig::default().am(0), &ds.features)?;
        report.rl = Some(rl);
        report.rl_pretrained = Some(rl);
        report.rrl_percent = Some(0.0);
    }

    create_dir(&out.out)?;
    write_labels(&out.out.join("labels.csv"), &km.labels)?;
    if out.emit_latent {
        write_csv(&out.out.join("latent.csv"), &points, Some(&km.labels))?;
    }
    let space = if network.is_some() { "latent" } else { "features" };
    write_report(
        &out.out,
        &report,
        &format!("dataset {}\nk-means on {space}, k = {k}, {n_init} restarts, inertia {:.6e}\n", data.data, km.inertia),
    )?;
    write_json(
        &out.out.join("run.json"),
        &json!({
            "command": "baseline",
            "dataset": data.data,
            "rows": ds.features.rows(),
            "k": k,
            "n_init": n_init,
            "seed": seed,
            "space": space,
            "inertia": km.inertia,
            "nmi_normalization": NMI_NORMALIZATION,
        }),
    )
}

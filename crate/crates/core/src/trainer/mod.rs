//! Pretraining, joint autoencoder/prototype training and inference.
//!
//! Training minimises the mean per-entry squared error between each input and
//! the decoding of its encoding *after* `T` attractor steps toward the
//! prototypes. Encoder, decoder and prototypes each have their own Adam state
//! and learning rate. Whenever the epoch loss plateaus the learning rates
//! decay; after enough decays the depth `T` grows by one. Every depth that
//! finishes leaves a [`StageRecord`], and the depth finally used for inference
//! is picked by [`select_t`].

pub mod config;
pub mod curriculum;

use rand::seq::{index, SliceRandom};

use crate::am::{am_recurse, am_recurse_on, assign, AmConfig, Prototypes};
use crate::autodiff::{Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::metrics::silhouette;
use crate::network::{Autoencoder, AutoencoderVars, ParamGroup};
use crate::optim::AdamState;
use crate::rng::{rng_for, Stream};
use crate::tensor::Tensor;

pub use config::TrainConfig;
pub use curriculum::{
    schedule_step, select_record, select_t, CurriculumState, LearningRates, ScheduleEvent, StageRecord,
};

/// Rows per chunk when evaluating over a whole dataset.
const EVAL_CHUNK: usize = 1024;

/// Output of [`train`]: the network, its prototypes and the chosen depth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub autoencoder: Autoencoder,
    pub prototypes: Prototypes,
    pub chosen_t: usize,
    pub config: TrainConfig,
    pub history: Vec<StageRecord>,
    /// Dataset reconstruction loss of the autoencoder training started from.
    pub rl_pretrained: Option<f64>,
}

impl TrainedModel {
    pub fn am(&self) -> AmConfig {
        self.config.am(self.chosen_t)
    }
}

/// Hooks for progress reporting and checkpointing.
pub trait TrainObserver {
    fn on_epoch(&mut self, _epoch: usize, _loss: f64, _state: &CurriculumState) {}

    /// Called whenever a depth finishes, with the parameters at that moment.
    fn on_stage(&mut self, _record: &StageRecord, _ae: &Autoencoder, _prototypes: &Prototypes, _state: &CurriculumState) {}
}

/// Observer that ignores everything.
pub struct Silent;

impl TrainObserver for Silent {}

fn check_data(ae: &Autoencoder, data: &Tensor) -> Result<()> {
    if data.rank() != 2 || data.rows() == 0 {
        return Err(Error::Empty("dataset"));
    }
    if data.cols() != ae.input_dim() {
        return Err(shape_err(
            "dataset",
            format!("{} features but the network expects {}", data.cols(), ae.input_dim()),
        ));
    }
    Ok(())
}

fn shuffled_batches(n: usize, batch_size: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Records `mean((x − d(A^T(e(x))))²)` on `tape`. With `rho = None` or zero
/// steps this is the plain reconstruction loss.
pub fn loss_on(
    tape: &mut Tape,
    ae: &Autoencoder,
    vars: &AutoencoderVars,
    rho: Option<Var>,
    x: Var,
    am: &AmConfig,
) -> Result<Var> {
    let entries = tape.value(x).len();
    if entries == 0 {
        return Err(Error::Empty("batch"));
    }
    let mut v = ae.encode_on(tape, vars, x)?;
    if let Some(rho) = rho {
        v = am_recurse_on(tape, v, rho, am)?;
    }
    let recon = ae.decode_on(tape, vars, v)?;
    let sse = tape.sq_error_sum(x, recon)?;
    Ok(tape.scale(sse, 1.0 / entries as f64))
}

fn sse(ae: &Autoencoder, p: Option<&Prototypes>, am: &AmConfig, batch: &Tensor) -> Result<f64> {
    let mut v = ae.encode(batch)?;
    if let Some(p) = p {
        v = am_recurse(&v, p, am)?;
    }
    let recon = ae.decode(&v)?;
    Ok(crate::autodiff::ops::sq_error_sum(batch, &recon)?.item())
}

/// Mean per-entry joint loss of one batch; `am.steps == 0` gives exactly
/// [`Autoencoder::reconstruction_loss`].
pub fn dcam_loss(ae: &Autoencoder, p: &Prototypes, am: &AmConfig, batch: &Tensor) -> Result<f64> {
    if batch.rank() != 2 || batch.rows() == 0 {
        return Err(Error::Empty("batch"));
    }
    Ok(sse(ae, Some(p), am, batch)? * (1.0 / batch.len() as f64))
}

/// [`dcam_loss`] over a whole dataset, evaluated in chunks.
pub fn dataset_loss(ae: &Autoencoder, p: Option<&Prototypes>, am: &AmConfig, data: &Tensor) -> Result<f64> {
    check_data(ae, data)?;
    let mut total = 0.0;
    for chunk in row_chunks(data) {
        total += sse(ae, p, am, &chunk)?;
    }
    Ok(total / data.len() as f64)
}

fn row_chunks(data: &Tensor) -> impl Iterator<Item = Tensor> + '_ {
    let n = data.rows();
    (0..n).step_by(EVAL_CHUNK).map(move |start| {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        data.select_rows(&idx)
    })
}

/// Pre-dynamics latent codes of every row.
pub fn latents(ae: &Autoencoder, data: &Tensor) -> Result<Tensor> {
    check_data(ae, data)?;
    let mut out = Vec::with_capacity(data.rows() * ae.latent_dim());
    for chunk in row_chunks(data) {
        out.extend_from_slice(ae.encode(&chunk)?.data());
    }
    Ok(Tensor::from_raw(vec![data.rows(), ae.latent_dim()], out))
}

/// Fits the autoencoder alone with Adam on the mean reconstruction loss.
/// Returns the epoch-mean loss of every epoch.
pub fn pretrain(ae: &mut Autoencoder, data: &Tensor, cfg: &TrainConfig) -> Result<Vec<f64>> {
    check_data(ae, data)?;
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, Stream::Shuffle);
    let mut adam = AdamState::new();
    let no_dynamics = cfg.am(0);
    let mut history = Vec::with_capacity(cfg.pretrain_epochs);
    for _ in 0..cfg.pretrain_epochs {
        let mut epoch_sse = 0.0;
        for idx in shuffled_batches(data.rows(), cfg.batch_size, &mut rng) {
            let batch = data.select_rows(&idx);
            let entries = batch.len() as f64;
            let mut tape = Tape::new();
            let vars = ae.register(&mut tape);
            let x = tape.constant(batch);
            let loss = loss_on(&mut tape, ae, &vars, None, x, &no_dynamics)?;
            epoch_sse += tape.value(loss).item() * entries;
            let grads = tape.backward(loss)?;
            adam.begin_step();
            for (id, g) in grads.iter() {
                let p = ae.param_mut(id).expect("gradient for a known parameter");
                adam.update(id, p, g, cfg.pretrain_lr);
            }
        }
        history.push(epoch_sse / data.len() as f64);
    }
    Ok(history)
}

/// Prototypes initialised at the encodings of `k` distinct random rows.
pub fn init_prototypes(ae: &Autoencoder, data: &Tensor, k: usize, seed: u64) -> Result<Prototypes> {
    check_data(ae, data)?;
    if k == 0 || k > data.rows() {
        return Err(Error::Parameter(format!(
            "need 1 ≤ k ≤ n to sample prototypes, got k = {k}, n = {}",
            data.rows()
        )));
    }
    let mut rng = rng_for(seed, Stream::Prototypes);
    let picks = index::sample(&mut rng, data.rows(), k).into_vec();
    Prototypes::new(ae.encode(&data.select_rows(&picks))?)
}

/// Latent silhouette of `sample` rows with labels from the current dynamics;
/// −1 when the labels collapse to a single cluster.
fn stage_silhouette(ae: &Autoencoder, p: &Prototypes, am: &AmConfig, sample: &Tensor) -> Result<f64> {
    let v = ae.encode(sample)?;
    let labels = assign(&am_recurse(&v, p, am)?, p)?;
    match silhouette(&v, &labels) {
        Ok(sc) => Ok(sc),
        Err(Error::UndefinedMetric(_)) => Ok(-1.0),
        Err(e) => Err(e),
    }
}

struct Adams {
    enc: AdamState,
    dec: AdamState,
    protos: AdamState,
}

fn train_epoch(
    ae: &mut Autoencoder,
    protos: &mut Prototypes,
    adams: &mut Adams,
    lrs: &LearningRates,
    am: &AmConfig,
    data: &Tensor,
    batch_size: usize,
    rng: &mut impl rand::Rng,
) -> Result<f64> {
    let proto_id = ae.prototype_param_id();
    let mut epoch_sse = 0.0;
    for idx in shuffled_batches(data.rows(), batch_size, rng) {
        let batch = data.select_rows(&idx);
        let entries = batch.len() as f64;
        let mut tape = Tape::new();
        let vars = ae.register(&mut tape);
        let rho = (am.steps > 0).then(|| tape.param(proto_id, protos.matrix().clone()));
        let x = tape.constant(batch);
        let loss = loss_on(&mut tape, ae, &vars, rho, x, am)?;
        epoch_sse += tape.value(loss).item() * entries;
        let grads = tape.backward(loss)?;

        adams.enc.begin_step();
        adams.dec.begin_step();
        if rho.is_some() {
            adams.protos.begin_step();
        }
        for (id, g) in grads.iter() {
            match ae.param_group(id) {
                ParamGroup::Encoder => adams.enc.update(id, ae.param_mut(id).unwrap(), g, lrs.enc),
                ParamGroup::Decoder => adams.dec.update(id, ae.param_mut(id).unwrap(), g, lrs.dec),
                ParamGroup::Prototypes => adams.protos.update(id, protos.matrix_mut(), g, lrs.am),
            }
        }
    }
    Ok(epoch_sse / data.len() as f64)
}

/// Joint training from a (pretrained) autoencoder.
pub fn train(ae: Autoencoder, data: &Tensor, k: usize, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_observed(ae, data, k, cfg, &mut Silent)
}

/// [`train`] with progress callbacks.
pub fn train_observed(
    ae: Autoencoder,
    data: &Tensor,
    k: usize,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedModel> {
    cfg.validate()?;
    check_data(&ae, data)?;
    let protos = init_prototypes(&ae, data, k, cfg.seed)?;
    train_from(ae, protos, data, cfg, observer)
}

/// Joint training from explicit initial prototypes.
pub fn train_from(
    mut ae: Autoencoder,
    mut protos: Prototypes,
    data: &Tensor,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedModel> {
    cfg.validate()?;
    check_data(&ae, data)?;
    if protos.dim() != ae.latent_dim() {
        return Err(shape_err(
            "train",
            format!("prototype width {} vs latent width {}", protos.dim(), ae.latent_dim()),
        ));
    }
    let n = data.rows();
    let rl_pretrained = dataset_loss(&ae, None, &cfg.am(0), data)?;

    let sample = {
        let mut rng = rng_for(cfg.seed, Stream::Subsample);
        let mut idx = index::sample(&mut rng, n, cfg.sc_sample.min(n)).into_vec();
        idx.sort_unstable();
        data.select_rows(&idx)
    };

    let mut rng = rng_for(cfg.seed, Stream::Shuffle);
    let mut adams = Adams {
        enc: AdamState::new(),
        dec: AdamState::new(),
        protos: AdamState::new(),
    };
    let mut state = CurriculumState::new(cfg);
    // Parameters of every record still inside the selection band.
    let mut snapshots: Vec<(usize, Autoencoder, Prototypes)> = Vec::new();

    let mut record_stage = |t: usize,
                            epoch: usize,
                            ae: &Autoencoder,
                            protos: &Prototypes,
                            state: &mut CurriculumState,
                            observer: &mut dyn TrainObserver|
     -> Result<()> {
        let am = cfg.am(t);
        let record = StageRecord {
            t,
            epoch,
            loss: dataset_loss(ae, Some(protos), &am, data)?,
            sc: stage_silhouette(ae, protos, &am, &sample)?,
        };
        state.history.push(record);
        let min_loss = state.history.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        snapshots.retain(|(i, _, _)| state.history[*i].loss <= curriculum::SELECTION_BAND * min_loss);
        if record.loss <= curriculum::SELECTION_BAND * min_loss {
            snapshots.push((state.history.len() - 1, ae.clone(), protos.clone()));
        }
        observer.on_stage(&record, ae, protos, state);
        Ok(())
    };

    let mut stage_open = true;
    for epoch in 0..cfg.max_epochs {
        let am = cfg.am(state.current_t);
        let lrs = state.lrs;
        let loss = train_epoch(&mut ae, &mut protos, &mut adams, &lrs, &am, data, cfg.batch_size, &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::Parameter(format!("training diverged at epoch {epoch} (loss {loss})")));
        }
        let event = schedule_step(&mut state, loss, cfg);
        observer.on_epoch(epoch, loss, &state);
        match event {
            ScheduleEvent::StepsIncreased { from } => {
                record_stage(from, epoch, &ae, &protos, &mut state, observer)?;
                adams.protos.reset();
            }
            ScheduleEvent::Exhausted => {
                record_stage(state.current_t, epoch, &ae, &protos, &mut state, observer)?;
                stage_open = false;
                break;
            }
            _ => {}
        }
        if loss <= cfg.loss_floor {
            record_stage(state.current_t, epoch, &ae, &protos, &mut state, observer)?;
            stage_open = false;
            break;
        }
    }
    if stage_open {
        let epoch = cfg.max_epochs.saturating_sub(1);
        record_stage(state.current_t, epoch, &ae, &protos, &mut state, observer)?;
    }

    let chosen = select_record(&state.history)?;
    let (_, ae, protos) = snapshots
        .into_iter()
        .find(|(i, _, _)| *i == chosen)
        .expect("selected record is inside the band and therefore snapshotted");
    Ok(TrainedModel {
        autoencoder: ae,
        prototypes: protos,
        chosen_t: state.history[chosen].t,
        config: cfg.clone(),
        history: state.history,
        rl_pretrained: Some(rl_pretrained),
    })
}

/// Cluster index of every row: nearest prototype after the chosen number of
/// attractor steps.
pub fn infer(model: &TrainedModel, data: &Tensor) -> Result<Vec<usize>> {
    check_data(&model.autoencoder, data)?;
    let am = model.am();
    let mut labels = Vec::with_capacity(data.rows());
    for chunk in row_chunks(data) {
        let v = model.autoencoder.encode(&chunk)?;
        labels.extend(assign(&am_recurse(&v, &model.prototypes, &am)?, &model.prototypes)?);
    }
    Ok(labels)
}

/// Pretrains a fresh network once, then trains it `cfg.restarts` times and
/// keeps the restart with the best recorded silhouette.
pub fn fit(data: &Tensor, k: usize, hidden: &[usize], latent_dim: Option<usize>, cfg: &TrainConfig) -> Result<TrainedModel> {
    fit_observed(data, k, hidden, latent_dim, cfg, &mut Silent)
}

pub fn fit_observed(
    data: &Tensor,
    k: usize,
    hidden: &[usize],
    latent_dim: Option<usize>,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedModel> {
    if data.rank() != 2 || data.rows() == 0 {
        return Err(Error::Empty("dataset"));
    }
    cfg.validate()?;
    let mut ae = Autoencoder::with_hidden(data.cols(), hidden, latent_dim.unwrap_or(k), cfg.seed)?;
    pretrain(&mut ae, data, cfg)?;
    fit_pretrained(&ae, data, k, cfg, observer)
}

/// Restarts of [`train`] from one already pretrained network; only the
/// prototype draw and batch order differ between them.
pub fn fit_pretrained(
    ae: &Autoencoder,
    data: &Tensor,
    k: usize,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedModel> {
    best_restart(cfg, |run_cfg| train_observed(ae.clone(), data, k, run_cfg, observer))
}

/// Runs `cfg.restarts` trainings with consecutive seeds and keeps the one
/// whose chosen record has the highest silhouette (first wins ties).
fn best_restart(cfg: &TrainConfig, mut run: impl FnMut(&TrainConfig) -> Result<TrainedModel>) -> Result<TrainedModel> {
    cfg.validate()?;
    let mut best: Option<(f64, TrainedModel)> = None;
    for r in 0..cfg.restarts.max(1) {
        let run_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(r as u64),
            ..cfg.clone()
        };
        let model = run(&run_cfg)?;
        let sc = model
            .history
            .iter()
            .find(|rec| rec.t == model.chosen_t)
            .map_or(f64::NEG_INFINITY, |rec| rec.sc);
        if best.as_ref().is_none_or(|(b, _)| sc > *b) {
            best = Some((sc, model));
        }
    }
    Ok(best.expect("at least one restart").1)
}

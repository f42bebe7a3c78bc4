use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::am::AmConfig;
use crate::error::{Error, Result};

/// Hyperparameters of one training run.
///
/// The text form is one `key = value` per line using exactly the field names
/// below; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Inverse temperature of the memory energy.
    pub beta: f64,
    /// Attractor step size.
    pub tau: f64,
    pub batch_size: usize,
    /// Initial learning rate of the prototypes.
    pub lr_am: f64,
    /// Initial learning rate of the encoder.
    pub lr_enc: f64,
    /// Initial learning rate of the decoder.
    pub lr_dec: f64,
    pub max_epochs: usize,
    /// Non-improving epochs before the learning rates are reduced.
    pub lr_patience: usize,
    pub lr_factor: f64,
    /// Learning-rate reductions without improvement before the number of
    /// attractor steps grows by one.
    pub curriculum_patience: usize,
    pub t_init: usize,
    pub t_max: usize,
    pub loss_floor: f64,
    pub seed: u64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    /// Cap on the points used for silhouette evaluation during training.
    pub sc_sample: usize,
    /// Joint trainings `fit` runs from its one pretrained network, with
    /// consecutive seeds; the best latent silhouette wins.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            tau: 1.0,
            batch_size: 64,
            lr_am: 0.01,
            lr_enc: 1e-4,
            lr_dec: 1e-3,
            max_epochs: 200,
            lr_patience: 5,
            lr_factor: 0.8,
            curriculum_patience: 2,
            t_init: 1,
            t_max: 20,
            loss_floor: 1e-9,
            seed: 0,
            pretrain_epochs: 100,
            pretrain_lr: 1e-3,
            sc_sample: 2000,
            restarts: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        for (name, lr) in [
            ("lr_am", self.lr_am),
            ("lr_enc", self.lr_enc),
            ("lr_dec", self.lr_dec),
            ("pretrain_lr", self.pretrain_lr),
        ] {
            if !(lr >= 0.0) || !lr.is_finite() {
                return bad(format!("{name} must be a non-negative rate, got {lr}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.t_init > self.t_max {
            return bad(format!("t_init {} exceeds t_max {}", self.t_init, self.t_max));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad(format!("lr_factor must lie in (0, 1), got {}", self.lr_factor));
        }
        if self.lr_patience == 0 || self.curriculum_patience == 0 {
            return bad("patience values must be at least 1".into());
        }
        if self.sc_sample < 2 {
            return bad("sc_sample must be at least 2".into());
        }
        Ok(())
    }

    pub fn am(&self, steps: usize) -> AmConfig {
        AmConfig {
            beta: self.beta,
            tau: self.tau,
            steps,
        }
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Usage(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "beta" => self.beta = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr_am" => self.lr_am = parse(key, value)?,
            "lr_enc" => self.lr_enc = parse(key, value)?,
            "lr_dec" => self.lr_dec = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "lr_patience" => self.lr_patience = parse(key, value)?,
            "lr_factor" => self.lr_factor = parse(key, value)?,
            "curriculum_patience" => self.curriculum_patience = parse(key, value)?,
            "t_init" => self.t_init = parse(key, value)?,
            "t_max" => self.t_max = parse(key, value)?,
            "loss_floor" => self.loss_floor = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse(key, value)?,
            "pretrain_lr" => self.pretrain_lr = parse(key, value)?,
            "sc_sample" => self.sc_sample = parse(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            _ => return Err(Error::Usage(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let v = serde_json::to_value(self).expect("config serializes");
        for (k, v) in v.as_object().expect("struct") {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

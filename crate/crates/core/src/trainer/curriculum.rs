//! Plateau-driven learning-rate decay and growth of the attractor depth.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};

/// Learning rates are never decayed below this value (rates that start
/// below it are left alone).
pub const LR_FLOOR: f64 = 1e-5;

/// Losses must beat the best so far by more than this to count as progress.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

/// Relative band around the lowest recorded loss inside which `select_t`
/// looks for the best silhouette.
pub const SELECTION_BAND: f64 = 1.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub am: f64,
    pub enc: f64,
    pub dec: f64,
}

impl LearningRates {
    fn decay(&mut self, factor: f64) {
        for lr in [&mut self.am, &mut self.enc, &mut self.dec] {
            if *lr > LR_FLOOR {
                *lr = (*lr * factor).max(LR_FLOOR);
            }
        }
    }
}

/// Loss and latent silhouette at the end of one attractor depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub t: usize,
    pub epoch: usize,
    pub loss: f64,
    pub sc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub current_t: usize,
    pub best_loss: f64,
    pub epochs_since_improve: usize,
    pub lr_reductions_since_improve: usize,
    pub lrs: LearningRates,
    pub history: Vec<StageRecord>,
}

/// What a call to [`schedule_step`] changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleEvent {
    Improved,
    Waiting,
    LrReduced,
    /// Depth grew from `from` to `from + 1`.
    StepsIncreased { from: usize },
    /// A depth increase was due but the depth is already at its maximum.
    Exhausted,
}

impl CurriculumState {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            current_t: cfg.t_init,
            best_loss: f64::INFINITY,
            epochs_since_improve: 0,
            lr_reductions_since_improve: 0,
            lrs: LearningRates {
                am: cfg.lr_am,
                enc: cfg.lr_enc,
                dec: cfg.lr_dec,
            },
            history: Vec::new(),
        }
    }
}

/// Feeds one epoch-mean loss into the schedule.
pub fn schedule_step(state: &mut CurriculumState, epoch_loss: f64, cfg: &TrainConfig) -> ScheduleEvent {
    if epoch_loss < state.best_loss - IMPROVEMENT_EPS {
        state.best_loss = epoch_loss;
        state.epochs_since_improve = 0;
        state.lr_reductions_since_improve = 0;
        return ScheduleEvent::Improved;
    }
    state.epochs_since_improve += 1;
    if state.epochs_since_improve < cfg.lr_patience {
        return ScheduleEvent::Waiting;
    }
    state.epochs_since_improve = 0;
    state.lrs.decay(cfg.lr_factor);
    state.lr_reductions_since_improve += 1;
    if state.lr_reductions_since_improve < cfg.curriculum_patience {
        return ScheduleEvent::LrReduced;
    }
    state.lr_reductions_since_improve = 0;
    if state.current_t >= cfg.t_max {
        return ScheduleEvent::Exhausted;
    }
    let from = state.current_t;
    state.current_t += 1;
    ScheduleEvent::StepsIncreased { from }
}

/// Index of the record with the best silhouette among those whose loss is
/// within 10% of the lowest loss; ties go to the smaller depth.
pub fn select_record(history: &[StageRecord]) -> Result<usize> {
    if history.is_empty() {
        return Err(Error::Empty("curriculum history"));
    }
    let min_loss = history.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
    let limit = SELECTION_BAND * min_loss;
    let mut best: Option<usize> = None;
    for (i, r) in history.iter().enumerate() {
        if r.loss > limit {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &history[b];
                if r.sc > cur.sc || (r.sc == cur.sc && r.t < cur.t) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    Ok(best.expect("the minimum-loss record is always inside the band"))
}

/// The attractor depth chosen by [`select_record`].
pub fn select_t(history: &[StageRecord]) -> Result<usize> {
    Ok(history[select_record(history)?].t)
}

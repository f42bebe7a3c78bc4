//! Turning a trained model or a plain partition into a [`MetricsReport`].

use crate::am::{am_recurse, assign};
use crate::error::{shape_err, Error, Result};
use crate::metrics::{ari, cluster_sizes, entropy_balance, nmi, rrl, silhouette, MetricsReport};
use crate::tensor::Tensor;
use crate::trainer::{dataset_loss, latents, TrainedModel};

/// Labels, the latent codes they were computed from, and the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub labels: Vec<usize>,
    /// Pre-dynamics latent codes.
    pub latents: Tensor,
    pub report: MetricsReport,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scores of a partition of `points`. Loss fields are left empty.
pub fn score_partition(points: &Tensor, labels: &[usize], k: usize, truth: Option<&[usize]>) -> Result<MetricsReport> {
    if let Some(t) = truth {
        if t.len() != labels.len() {
            return Err(shape_err("evaluate", format!("{} labels vs {} ground-truth labels", labels.len(), t.len())));
        }
    }
    let (cs_max, cs_min) = cluster_sizes(labels, k);
    Ok(MetricsReport {
        sc: defined(silhouette(points, labels))?,
        sc_post_dynamics: None,
        nmi: truth.map(|t| nmi(labels, t)).transpose()?,
        ari: truth.map(|t| ari(labels, t)).transpose()?,
        entropy: entropy_balance(labels, k),
        cs_max,
        cs_min,
        rl: None,
        rl_pretrained: None,
        rrl_percent: None,
    })
}

/// Infers labels for `data` and scores them. Silhouettes use the latent codes
/// before and after the dynamics; RL is the joint loss at the chosen depth.
pub fn evaluate(model: &TrainedModel, data: &Tensor, truth: Option<&[usize]>) -> Result<Evaluation> {
    let z = latents(&model.autoencoder, data)?;
    let moved = am_recurse(&z, &model.prototypes, &model.am())?;
    let labels = assign(&moved, &model.prototypes)?;
    let mut report = score_partition(&z, &labels, model.prototypes.k(), truth)?;
    report.sc_post_dynamics = defined(silhouette(&moved, &labels))?;
    let rl = dataset_loss(&model.autoencoder, Some(&model.prototypes), &model.am(), data)?;
    report.rl = Some(rl);
    report.rl_pretrained = model.rl_pretrained;
    report.rrl_percent = model.rl_pretrained.filter(|&p| p > 0.0).map(|p| rrl(rl, p)).transpose()?;
    Ok(Evaluation {
        labels,
        latents: z,
        report,
    })
}

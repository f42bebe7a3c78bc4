//! Deep clustering with dense associative memory dynamics.
//!
//! An MLP autoencoder is trained jointly with `k` prototypes in its latent
//! space. Every encoded point is pulled toward the prototypes by a few steps
//! of energy descent before being decoded, and the single reconstruction loss
//! of the relocated point drives the encoder, decoder and prototypes at once.
//!
//! - [`autodiff`]: dense tensors on a reverse-mode tape
//! - [`network`]: encoder/decoder MLPs
//! - [`am`]: associative memory energy, attractor step and recursion
//! - [`trainer`]: pretraining, joint training, curriculum over steps, inference
//! - [`metrics`] and [`kmeans`]: evaluation and the k-means baseline
//! - [`data`] and [`persist`]: dataset ingestion and model files

pub mod am;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod kmeans;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod persist;
mod rng;
pub mod tensor;
pub mod trainer;

pub use am::{AmConfig, Prototypes};
pub use error::{Error, Result};
pub use evaluate::{evaluate, score_partition, Evaluation};
pub use data::{gen_blobs, load_csv, load_idx, Dataset, DatasetSpec};
pub use kmeans::{kmeans, KMeansResult};
pub use metrics::{ari, nmi, silhouette, Labeling, MetricsReport};
pub use network::{init_autoencoder, Autoencoder, EAE_HIDDEN};
pub use persist::{load_model, save_model};
pub use tensor::Tensor;
pub use trainer::{fit, infer, pretrain, train, TrainConfig, TrainedModel};

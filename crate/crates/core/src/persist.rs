//! Binary model files.
//!
//! Layout: the bytes `DCAM`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a JSON header describing shapes and
//! metadata, then every parameter as little-endian `f64` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::am::Prototypes;
use crate::error::{Error, Result};
use crate::network::{Activation, Autoencoder, DenseLayer};
use crate::tensor::Tensor;
use crate::trainer::{CurriculumState, StageRecord, TrainConfig, TrainedModel};

const MAGIC: &[u8; 4] = b"DCAM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerHeader {
    input: usize,
    output: usize,
    activation: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    encoder: Vec<LayerHeader>,
    decoder: Vec<LayerHeader>,
    /// Number of prototypes; 0 for a bare autoencoder.
    k: usize,
    chosen_t: usize,
    config: Option<TrainConfig>,
    history: Vec<StageRecord>,
    rl_pretrained: Option<f64>,
    curriculum: Option<CurriculumState>,
}

/// Everything a model file can hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub autoencoder: Autoencoder,
    pub prototypes: Option<Prototypes>,
    pub chosen_t: usize,
    pub config: Option<TrainConfig>,
    pub history: Vec<StageRecord>,
    pub rl_pretrained: Option<f64>,
    /// Schedule state, present in mid-training checkpoints.
    pub curriculum: Option<CurriculumState>,
}

impl Checkpoint {
    pub fn from_model(model: &TrainedModel) -> Self {
        Self {
            autoencoder: model.autoencoder.clone(),
            prototypes: Some(model.prototypes.clone()),
            chosen_t: model.chosen_t,
            config: Some(model.config.clone()),
            history: model.history.clone(),
            rl_pretrained: model.rl_pretrained,
            curriculum: None,
        }
    }

    pub fn into_model(self) -> Result<TrainedModel> {
        let missing = |what: &str| Error::Corrupt(format!("file holds no {what}; it is not a trained model"));
        Ok(TrainedModel {
            prototypes: self.prototypes.ok_or_else(|| missing("prototypes"))?,
            config: self.config.ok_or_else(|| missing("training configuration"))?,
            autoencoder: self.autoencoder,
            chosen_t: self.chosen_t,
            history: self.history,
            rl_pretrained: self.rl_pretrained,
        })
    }
}

fn layer_headers(layers: &[DenseLayer]) -> Vec<LayerHeader> {
    layers
        .iter()
        .map(|l| LayerHeader {
            input: l.in_dim(),
            output: l.out_dim(),
            activation: l.activation,
        })
        .collect()
}

pub fn to_bytes(c: &Checkpoint) -> Vec<u8> {
    let ae = &c.autoencoder;
    let header = Header {
        encoder: layer_headers(ae.encoder()),
        decoder: layer_headers(ae.decoder()),
        k: c.prototypes.as_ref().map_or(0, Prototypes::k),
        chosen_t: c.chosen_t,
        config: c.config.clone(),
        history: c.history.clone(),
        rl_pretrained: c.rl_pretrained,
        curriculum: c.curriculum.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let tensors = ae
        .params()
        .into_iter()
        .map(|(_, t)| t)
        .chain(c.prototypes.as_ref().map(Prototypes::matrix));
    for t in tensors {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corrupt(format!(
                "file ends while reading {what} ({} bytes at offset {}, {} available)",
                len,
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn tensor(&mut self, shape: Vec<usize>, what: &str) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let raw = self.take(n * 8, what)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(shape, data).map_err(|e| Error::Corrupt(format!("{what}: {e}")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Corrupt("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let len = u64::from_le_bytes(cur.take(8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::Corrupt("header length overflows".into()))?;
    let header: Header =
        serde_json::from_slice(cur.take(len, "header")?).map_err(|e| Error::Corrupt(format!("header: {e}")))?;

    let mut read_layers = |headers: &[LayerHeader], side: &str| -> Result<Vec<DenseLayer>> {
        headers
            .iter()
            .map(|h| {
                let w = cur.tensor(vec![h.input, h.output], side)?;
                let b = cur.tensor(vec![h.output], side)?;
                DenseLayer::new(w, b, h.activation).map_err(|e| Error::Corrupt(e.to_string()))
            })
            .collect()
    };
    let encoder = read_layers(&header.encoder, "encoder")?;
    let decoder = read_layers(&header.decoder, "decoder")?;
    let autoencoder = Autoencoder::from_layers(encoder, decoder).map_err(|e| Error::Corrupt(e.to_string()))?;
    let prototypes = if header.k > 0 {
        let rho = cur.tensor(vec![header.k, autoencoder.latent_dim()], "prototypes")?;
        Some(Prototypes::new(rho).map_err(|e| Error::Corrupt(e.to_string()))?)
    } else {
        None
    };
    if cur.pos != bytes.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(Checkpoint {
        autoencoder,
        prototypes,
        chosen_t: header.chosen_t,
        config: header.config,
        history: header.history,
        rl_pretrained: header.rl_pretrained,
        curriculum: header.curriculum,
    })
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(c)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    save_checkpoint(&Checkpoint::from_model(model), path)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    load_checkpoint(path)?.into_model()
}

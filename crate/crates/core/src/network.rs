//! Fully connected encoder/decoder pairs.
//!
//! The default architecture is the `i-500-500-2000-m` encoder with a mirrored
//! decoder. Hidden layers use ReLU; the embedding layer and the output layer
//! are linear.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ops, ParamId, Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Hidden widths of the default encoder; the decoder mirrors them.
pub const EAE_HIDDEN: [usize; 3] = [500, 500, 2000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(shape_err(
                "dense_layer",
                format!("weight {:?} with bias {:?}", weight.shape(), bias.shape()),
            ));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = ops::add_bias(&ops::matmul(x, &self.weight)?, &self.bias)?;
        Ok(match self.activation {
            Activation::Relu => ops::relu(&h),
            Activation::Identity => h,
        })
    }
}

/// Which optimizer group a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Encoder,
    Decoder,
    Prototypes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
}

/// Tape slots of an autoencoder's parameters, registered once per tape.
#[derive(Debug, Clone)]
pub struct AutoencoderVars {
    encoder: Vec<(Var, Var)>,
    decoder: Vec<(Var, Var)>,
}

/// The default `i-500-500-2000-m` autoencoder with Glorot-uniform weights and
/// zero biases.
pub fn init_autoencoder(input_dim: usize, latent_dim: usize, seed: u64) -> Result<Autoencoder> {
    Autoencoder::with_hidden(input_dim, &EAE_HIDDEN, latent_dim, seed)
}

fn glorot_layer(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, activation: Activation) -> DenseLayer {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w: Vec<f64> = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    DenseLayer {
        weight: Tensor::from_raw(vec![fan_in, fan_out], w),
        bias: Tensor::zeros(&[fan_out]),
        activation,
    }
}

impl Autoencoder {
    /// Encoder `input → hidden... → latent`, decoder mirrored.
    pub fn with_hidden(input_dim: usize, hidden: &[usize], latent_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 || hidden.contains(&0) {
            return Err(Error::Parameter(format!(
                "layer widths must be positive: input {input_dim}, hidden {hidden:?}, latent {latent_dim}"
            )));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(latent_dim);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let build = |rng: &mut ChaCha8Rng, dims: &[usize]| -> Vec<DenseLayer> {
            let last = dims.len() - 2;
            dims.windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let act = if i == last { Activation::Identity } else { Activation::Relu };
                    glorot_layer(rng, w[0], w[1], act)
                })
                .collect()
        };
        let encoder = build(&mut rng, &dims);
        dims.reverse();
        let decoder = build(&mut rng, &dims);
        Ok(Self { encoder, decoder })
    }

    /// Assembles an autoencoder from explicit layers.
    pub fn from_layers(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>) -> Result<Self> {
        fn check_chain(name: &str, layers: &[DenseLayer]) -> Result<()> {
            if layers.is_empty() {
                return Err(Error::Parameter(format!("{name} has no layers")));
            }
            for (i, pair) in layers.windows(2).enumerate() {
                if pair[0].out_dim() != pair[1].in_dim() {
                    return Err(shape_err(
                        "autoencoder",
                        format!("{name} layer {i} emits {} but layer {} takes {}", pair[0].out_dim(), i + 1, pair[1].in_dim()),
                    ));
                }
            }
            let last = layers.len() - 1;
            for (i, l) in layers.iter().enumerate() {
                let want = if i == last { Activation::Identity } else { Activation::Relu };
                if l.activation != want {
                    return Err(Error::Parameter(format!(
                        "{name} layer {i} must use {want:?} activation"
                    )));
                }
            }
            Ok(())
        }
        check_chain("encoder", &encoder)?;
        check_chain("decoder", &decoder)?;
        let latent = encoder.last().unwrap().out_dim();
        let input = encoder[0].in_dim();
        if decoder[0].in_dim() != latent || decoder.last().unwrap().out_dim() != input {
            return Err(shape_err(
                "autoencoder",
                format!(
                    "decoder maps {} -> {} but encoder maps {input} -> {latent}",
                    decoder[0].in_dim(),
                    decoder.last().unwrap().out_dim()
                ),
            ));
        }
        Ok(Self { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().unwrap().out_dim()
    }

    /// Widths along the encoder, input first and latent last.
    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.encoder.iter().map(DenseLayer::out_dim));
        dims
    }

    pub fn decoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.latent_dim()];
        dims.extend(self.decoder.iter().map(DenseLayer::out_dim));
        dims
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.decoder
    }

    fn check_width(&self, op: &'static str, x: &Tensor, want: usize) -> Result<()> {
        if x.rank() != 2 || x.shape()[1] != want {
            return Err(shape_err(op, format!("input shape {:?}, expected width {want}", x.shape())));
        }
        Ok(())
    }

    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.check_width("encode", x, self.input_dim())?;
        forward_chain(&self.encoder, x)
    }

    pub fn decode(&self, v: &Tensor) -> Result<Tensor> {
        self.check_width("decode", v, self.latent_dim())?;
        forward_chain(&self.decoder, v)
    }

    /// Mean squared error per entry between `batch` and its reconstruction.
    pub fn reconstruction_loss(&self, batch: &Tensor) -> Result<f64> {
        if batch.rank() != 2 || batch.shape()[0] == 0 {
            return Err(Error::Empty("reconstruction batch"));
        }
        let recon = self.decode(&self.encode(batch)?)?;
        let sse = ops::sq_error_sum(batch, &recon)?.item();
        Ok(sse * (1.0 / batch.len() as f64))
    }

    // Parameter identities: encoder layer l owns ids (2l, 2l+1); decoder
    // layers continue after the encoder. Prototypes use `prototype_param_id`.

    pub fn param_count(&self) -> usize {
        2 * (self.encoder.len() + self.decoder.len())
    }

    /// Id reserved for the prototype matrix trained alongside this network.
    pub fn prototype_param_id(&self) -> ParamId {
        ParamId(self.param_count())
    }

    pub fn param_group(&self, id: ParamId) -> ParamGroup {
        if id.0 < 2 * self.encoder.len() {
            ParamGroup::Encoder
        } else if id.0 < self.param_count() {
            ParamGroup::Decoder
        } else {
            ParamGroup::Prototypes
        }
    }

    /// All parameters with their ids, encoder first, weight before bias.
    pub fn params(&self) -> Vec<(ParamId, &Tensor)> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| [&l.weight, &l.bias])
            .enumerate()
            .map(|(i, t)| (ParamId(i), t))
            .collect()
    }

    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        let layer_idx = id.0 / 2;
        let enc = self.encoder.len();
        let layer = if layer_idx < enc {
            self.encoder.get_mut(layer_idx)?
        } else {
            self.decoder.get_mut(layer_idx - enc)?
        };
        Some(if id.0 % 2 == 0 { &mut layer.weight } else { &mut layer.bias })
    }

    /// Registers every weight and bias on `tape` as a trainable parameter.
    pub fn register(&self, tape: &mut Tape) -> AutoencoderVars {
        let mut next = 0;
        let mut reg = |layers: &[DenseLayer], tape: &mut Tape| -> Vec<(Var, Var)> {
            layers
                .iter()
                .map(|l| {
                    let w = tape.param(ParamId(next), l.weight.clone());
                    let b = tape.param(ParamId(next + 1), l.bias.clone());
                    next += 2;
                    (w, b)
                })
                .collect()
        };
        let encoder = reg(&self.encoder, tape);
        let decoder = reg(&self.decoder, tape);
        AutoencoderVars { encoder, decoder }
    }

    /// Registers parameters as constants, for forward passes that need no
    /// gradient with respect to the network.
    pub fn register_frozen(&self, tape: &mut Tape) -> AutoencoderVars {
        let reg = |layers: &[DenseLayer], tape: &mut Tape| -> Vec<(Var, Var)> {
            layers
                .iter()
                .map(|l| (tape.constant(l.weight.clone()), tape.constant(l.bias.clone())))
                .collect()
        };
        let encoder = reg(&self.encoder, tape);
        let decoder = reg(&self.decoder, tape);
        AutoencoderVars { encoder, decoder }
    }

    pub fn encode_on(&self, tape: &mut Tape, vars: &AutoencoderVars, x: Var) -> Result<Var> {
        self.check_width("encode", tape.value(x), self.input_dim())?;
        chain_on(tape, &self.encoder, &vars.encoder, x)
    }

    pub fn decode_on(&self, tape: &mut Tape, vars: &AutoencoderVars, v: Var) -> Result<Var> {
        self.check_width("decode", tape.value(v), self.latent_dim())?;
        chain_on(tape, &self.decoder, &vars.decoder, v)
    }
}

fn forward_chain(layers: &[DenseLayer], x: &Tensor) -> Result<Tensor> {
    let mut h = layers[0].forward(x)?;
    for l in &layers[1..] {
        h = l.forward(&h)?;
    }
    Ok(h)
}

fn chain_on(tape: &mut Tape, layers: &[DenseLayer], vars: &[(Var, Var)], x: Var) -> Result<Var> {
    let mut h = x;
    for (layer, &(w, b)) in layers.iter().zip(vars) {
        let z = tape.matmul(h, w)?;
        let z = tape.add_bias(z, b)?;
        h = match layer.activation {
            Activation::Relu => tape.relu(z),
            Activation::Identity => z,
        };
    }
    Ok(h)
}

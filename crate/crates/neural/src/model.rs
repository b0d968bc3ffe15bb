use rand::Rng;
use serde::{Deserialize, Serialize};
use tdekit_core::seed::{derive_seed, rng_from_seed, stream};

use crate::error::{Error, Result};
use crate::frontend::{bin_count, FeatureNorm};
use crate::graph::{softmax, Graph, NodeId};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

/// Architecture of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub f_max_hz: f64,
    pub sample_rate_hz: u32,
    pub input_len: usize,
    pub conv_layers: Vec<ConvSpec>,
    pub hidden_width: usize,
    pub num_blocks: usize,
    pub num_classes: usize,
    pub parameter_dtype: Dtype,
    #[serde(default)]
    pub feature_norm: FeatureNorm,
}

fn convs(channels: &[usize], kernel: usize, stride: usize) -> Vec<ConvSpec> {
    channels
        .windows(2)
        .map(|w| ConvSpec {
            in_ch: w[0],
            out_ch: w[1],
            kernel,
            stride,
        })
        .collect()
}

impl ModelConfig {
    /// Conv 4-32-64-128 (kernel 7, stride 4), hidden width 256, 4 blocks,
    /// per-clip RMS normalised inputs.
    pub fn desk() -> Self {
        Self {
            f_max_hz: 4800.0,
            sample_rate_hz: 16_000,
            input_len: 10_000,
            conv_layers: convs(&[4, 32, 64, 128], 7, 4),
            hidden_width: 256,
            num_blocks: 4,
            num_classes: 1000,
            parameter_dtype: Dtype::F32,
            feature_norm: FeatureNorm::ClipRms,
        }
    }

    /// The desk backbone with hidden width 1216 (about 20M parameters) on
    /// raw spectra.
    pub fn paper() -> Self {
        Self {
            hidden_width: 1216,
            feature_norm: FeatureNorm::None,
            ..Self::desk()
        }
    }

    /// Small configuration (under 2k parameters) for gradient checks.
    pub fn tiny() -> Self {
        Self {
            f_max_hz: 4000.0,
            sample_rate_hz: 16_000,
            input_len: 64,
            conv_layers: vec![
                ConvSpec {
                    in_ch: 4,
                    out_ch: 4,
                    kernel: 3,
                    stride: 2,
                },
                ConvSpec {
                    in_ch: 4,
                    out_ch: 4,
                    kernel: 3,
                    stride: 1,
                },
                ConvSpec {
                    in_ch: 4,
                    out_ch: 4,
                    kernel: 3,
                    stride: 1,
                },
            ],
            hidden_width: 16,
            num_blocks: 2,
            num_classes: 20,
            parameter_dtype: Dtype::F64,
            feature_norm: FeatureNorm::None,
        }
    }

    pub fn bins(&self) -> Result<usize> {
        bin_count(self.input_len, self.sample_rate_hz, self.f_max_hz)
    }

    /// Length after each conv layer.
    pub fn conv_lengths(&self) -> Result<Vec<usize>> {
        let mut len = self.bins()?;
        let mut out = Vec::with_capacity(self.conv_layers.len());
        for (i, c) in self.conv_layers.iter().enumerate() {
            if c.kernel == 0 || c.stride == 0 || len < c.kernel {
                return Err(Error::invalid(format!(
                    "conv layer {i} (kernel {}, stride {}) does not fit input length {len}",
                    c.kernel, c.stride
                )));
            }
            len = (len - c.kernel) / c.stride + 1;
            out.push(len);
        }
        Ok(out)
    }

    /// Size of the flattened conv output.
    pub fn flat_dim(&self) -> Result<usize> {
        let lens = self.conv_lengths()?;
        Ok(match (self.conv_layers.last(), lens.last()) {
            (Some(c), Some(l)) => c.out_ch * l,
            _ => 4 * self.bins()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || !self.num_classes.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "num_classes must be even and >= 2, got {}",
                self.num_classes
            )));
        }
        if self.hidden_width == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        let mut ch = 4;
        for (i, c) in self.conv_layers.iter().enumerate() {
            if c.in_ch != ch || c.out_ch == 0 {
                return Err(Error::invalid(format!(
                    "conv layer {i} expects {} input channels, previous layer gives {ch}",
                    c.in_ch
                )));
            }
            ch = c.out_ch;
        }
        self.flat_dim()?;
        Ok(())
    }

    /// `(name, shape, fan_in)` for every parameter, in storage order.
    pub fn parameter_layout(&self) -> Result<Vec<(String, Vec<usize>, usize)>> {
        self.validate()?;
        let mut out = Vec::new();
        for (i, c) in self.conv_layers.iter().enumerate() {
            let fan = c.in_ch * c.kernel;
            out.push((format!("conv{i}.weight"), vec![c.out_ch, c.in_ch, c.kernel], fan));
            out.push((format!("conv{i}.bias"), vec![c.out_ch], fan));
        }
        let flat = self.flat_dim()?;
        let h = self.hidden_width;
        out.push(("proj.weight".into(), vec![h, flat], flat));
        out.push(("proj.bias".into(), vec![h], flat));
        for m in 0..self.num_blocks {
            for fc in ["fc1", "fc2"] {
                out.push((format!("block{m}.{fc}.weight"), vec![h, h], h));
                out.push((format!("block{m}.{fc}.bias"), vec![h], h));
            }
        }
        out.push(("head.weight".into(), vec![self.num_classes, h], h));
        out.push(("head.bias".into(), vec![self.num_classes], h));
        Ok(out)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self
            .parameter_layout()?
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>())
            .sum())
    }
}

/// Network parameters plus their configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub params: Vec<Tensor<T>>,
}

impl<T: Scalar> Model<T> {
    /// Weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let layout = config.parameter_layout()?;
        let mut rng = rng_from_seed(derive_seed(seed, stream::INIT, 0));
        let mut names = Vec::with_capacity(layout.len());
        let mut params = Vec::with_capacity(layout.len());
        for (name, shape, fan_in) in layout {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".bias") {
                vec![T::zero(); n]
            } else {
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
            };
            names.push(name);
            params.push(Tensor::new(shape, data)?);
        }
        Ok(Self {
            config: config.clone(),
            names,
            params,
        })
    }

    pub fn from_parts(config: ModelConfig, names: Vec<String>, params: Vec<Tensor<T>>) -> Result<Self> {
        let layout = config.parameter_layout()?;
        if layout.len() != params.len() || names.len() != params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter tensors, got {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape, _), (n, p)) in layout.iter().zip(names.iter().zip(&params)) {
            if name != n || shape.as_slice() != p.shape() {
                return Err(Error::Shape {
                    what: format!("parameter {n}"),
                    expected: shape.clone(),
                    actual: p.shape().to_vec(),
                });
            }
        }
        Ok(Self { config, names, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Records the forward pass of `features` (`[batch, 4, bins]`, flat) on
    /// `g` and returns the logits node `[batch, num_classes]`.
    pub fn forward(&self, g: &mut Graph<'_, T>, features: Vec<T>, batch: usize) -> Result<NodeId> {
        let bins = self.config.bins()?;
        if features.len() != batch * 4 * bins {
            return Err(Error::Shape {
                what: "features".into(),
                expected: vec![batch, 4, bins],
                actual: vec![features.len()],
            });
        }
        let mut p = 0..;
        let mut next = |g: &mut Graph<'_, T>| g.param(p.next().expect("unbounded"));
        let mut h = g.input(vec![batch, 4, bins], features)?;
        for c in &self.config.conv_layers {
            let w = next(g);
            let b = next(g);
            h = g.conv1d(h, w, b, c.stride)?;
            h = g.gelu(h);
        }
        let flat = self.config.flat_dim()?;
        h = g.reshape(h, vec![batch, flat])?;
        let (w, b) = (next(g), next(g));
        h = g.linear(h, w, b)?;
        for _ in 0..self.config.num_blocks {
            let (w1, b1, w2, b2) = (next(g), next(g), next(g), next(g));
            let a = g.gelu(h);
            let a = g.linear(a, w1, b1)?;
            let a = g.gelu(a);
            let a = g.linear(a, w2, b2)?;
            h = g.add(h, a)?;
        }
        let (w, b) = (next(g), next(g));
        g.linear(h, w, b)
    }

    /// Logits for a batch without keeping the graph.
    pub fn logits(&self, features: Vec<T>, batch: usize) -> Result<Vec<T>> {
        let mut g = Graph::new(&self.params);
        let out = self.forward(&mut g, features, batch)?;
        Ok(g.value(out).to_vec())
    }

    /// Class probabilities for a batch.
    pub fn predict_proba(&self, features: Vec<T>, batch: usize) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(features, batch)?, self.config.num_classes))
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            names: self.names.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
        }
    }
}

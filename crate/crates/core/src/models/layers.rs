//! Building blocks shared by the denoiser and the baselines: a named
//! parameter store with seeded initialization, f64-safe group
//! normalization, and tensor/array conversion helpers.

use std::collections::HashMap;

use candle_core::{DType, Device, Tensor, Var};
use candle_nn::{Conv2d, Conv2dConfig, Linear};
use ndarray::{Array2, Array3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SeededRng};

pub const DTYPE: DType = DType::F64;

/// Where parameter values come from when a network is constructed.
pub enum WeightSource {
    /// Fresh fan-in-scaled uniform initialization from a seeded generator.
    Seeded(Box<SeededRng>),
    /// Values loaded from a checkpoint, keyed by parameter name.
    Loaded(HashMap<String, Tensor>),
}

impl WeightSource {
    pub fn seeded(seed: u64) -> Self {
        WeightSource::Seeded(Box::new(rng_from_seed(seed)))
    }
}

pub enum Init {
    /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)).
    FanIn(usize),
    Ones,
    Zeros,
}

/// Registry of named trainable parameters. Construction draws from the
/// weight source; the resulting `Var`s feed the optimizer and the
/// checkpoint writer.
pub struct ParamStore {
    source: WeightSource,
    device: Device,
    vars: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn new(source: WeightSource) -> Self {
        ParamStore { source, device: Device::Cpu, vars: Vec::new() }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Creates (or loads) a parameter and returns its tensor view.
    pub fn take(&mut self, name: &str, dims: &[usize], init: Init) -> Result<Tensor> {
        let value = match &mut self.source {
            WeightSource::Seeded(rng) => {
                let n: usize = dims.iter().product();
                let data: Vec<f64> = match init {
                    Init::FanIn(fan_in) => {
                        let bound = (1.0 / fan_in as f64).sqrt();
                        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                    }
                    Init::Ones => vec![1.0; n],
                    Init::Zeros => vec![0.0; n],
                };
                Tensor::from_vec(data, dims, &self.device)?
            }
            WeightSource::Loaded(map) => {
                let t = map.remove(name).ok_or_else(|| {
                    Error::CheckpointMismatch(format!("parameter {name} missing from weights"))
                })?;
                if t.dims() != dims {
                    return Err(Error::CheckpointMismatch(format!(
                        "parameter {name} has shape {:?}, expected {dims:?}",
                        t.dims()
                    )));
                }
                t.to_dtype(DTYPE)?
            }
        };
        let var = Var::from_tensor(&value)?;
        let tensor = var.as_tensor().clone();
        self.vars.push((name.to_string(), var));
        Ok(tensor)
    }

    /// Errors if a loaded checkpoint carried parameters the architecture
    /// never asked for (a shape/config mismatch in disguise).
    pub fn finish(self) -> Result<Vec<(String, Var)>> {
        if let WeightSource::Loaded(map) = &self.source {
            if let Some(name) = map.keys().next() {
                return Err(Error::CheckpointMismatch(format!(
                    "weights file has unexpected parameter {name}"
                )));
            }
        }
        Ok(self.vars)
    }
}

pub fn trainable_vars(vars: &[(String, Var)]) -> Vec<Var> {
    vars.iter().map(|(_, v)| v.clone()).collect()
}

pub fn named_tensors(vars: &[(String, Var)]) -> HashMap<String, Tensor> {
    vars.iter().map(|(n, v)| (n.clone(), v.as_tensor().clone())).collect()
}

pub fn param_count(vars: &[(String, Var)]) -> usize {
    vars.iter().map(|(_, v)| v.elem_count()).sum()
}

/// 3x3 same-padding convolution.
pub fn conv3x3(store: &mut ParamStore, name: &str, c_in: usize, c_out: usize) -> Result<Conv2d> {
    conv(store, name, c_in, c_out, 3, 1)
}

pub fn conv1x1(store: &mut ParamStore, name: &str, c_in: usize, c_out: usize) -> Result<Conv2d> {
    conv(store, name, c_in, c_out, 1, 0)
}

fn conv(
    store: &mut ParamStore,
    name: &str,
    c_in: usize,
    c_out: usize,
    k: usize,
    padding: usize,
) -> Result<Conv2d> {
    let fan_in = c_in * k * k;
    let weight = store.take(&format!("{name}.weight"), &[c_out, c_in, k, k], Init::FanIn(fan_in))?;
    let bias = store.take(&format!("{name}.bias"), &[c_out], Init::FanIn(fan_in))?;
    Ok(Conv2d::new(weight, Some(bias), Conv2dConfig { padding, ..Default::default() }))
}

pub fn linear(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Result<Linear> {
    let weight = store.take(&format!("{name}.weight"), &[d_out, d_in], Init::FanIn(d_in))?;
    let bias = store.take(&format!("{name}.bias"), &[d_out], Init::FanIn(d_in))?;
    Ok(Linear::new(weight, Some(bias)))
}

/// Group normalization over (b, c, h, w), written with primitive ops so
/// every dtype the backend supports works (the fused layer-norm kernels are
/// f32-only).
pub struct GroupNorm {
    weight: Tensor,
    bias: Tensor,
    groups: usize,
    eps: f64,
}

impl GroupNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<GroupNorm> {
        let groups = if channels % 4 == 0 { 4 } else { 1 };
        Ok(GroupNorm {
            weight: store.take(&format!("{name}.weight"), &[channels], Init::Ones)?,
            bias: store.take(&format!("{name}.bias"), &[channels], Init::Zeros)?,
            groups,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, c, h, w) = x.dims4()?;
        let xg = x.reshape((b, self.groups, c / self.groups * h * w))?;
        let mean = xg.mean_keepdim(2)?;
        let centered = xg.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(2)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        let normed = normed.reshape((b, c, h, w))?;
        let scale = self.weight.reshape((1, c, 1, 1))?;
        let shift = self.bias.reshape((1, c, 1, 1))?;
        Ok(normed.broadcast_mul(&scale)?.broadcast_add(&shift)?)
    }
}

/// Scale mapping the cumulative noise level onto the embedding argument.
/// Kept moderate so adjacent noise levels of a short schedule land on
/// nearby phases instead of aliasing.
const GAMMA_EMBED_SCALE: f64 = 50.0;

/// Sinusoidal features of the cumulative noise level, one row per batch
/// item, with frequencies geometrically spaced over three decades.
pub fn gamma_features(gammas: &[f64], dim: usize, device: &Device) -> Result<Tensor> {
    assert!(dim >= 2 && dim % 2 == 0, "embedding dim must be even and >= 2");
    let half = dim / 2;
    let mut data = Vec::with_capacity(gammas.len() * dim);
    for &g in gammas {
        let s = g * GAMMA_EMBED_SCALE;
        for k in 0..half {
            let freq = (-(k as f64) * (1000.0f64.ln()) / (half.max(2) - 1) as f64).exp();
            data.push((s * freq).sin());
        }
        for k in 0..half {
            let freq = (-(k as f64) * (1000.0f64.ln()) / (half.max(2) - 1) as f64).exp();
            data.push((s * freq).cos());
        }
    }
    Ok(Tensor::from_vec(data, (gammas.len(), dim), device)?)
}

pub fn tensor_from_array3(a: &Array3<f64>, device: &Device) -> Result<Tensor> {
    let dims = a.dim();
    let std = a.as_standard_layout();
    let slice = std.as_slice().expect("standard layout");
    Ok(Tensor::from_slice(slice, (dims.0, dims.1, dims.2), device)?)
}

pub fn tensor_from_array2(a: &Array2<f64>, device: &Device) -> Result<Tensor> {
    let dims = a.dim();
    let std = a.as_standard_layout();
    let slice = std.as_slice().expect("standard layout");
    Ok(Tensor::from_slice(slice, (dims.0, dims.1), device)?)
}

pub fn array3_from_tensor(t: &Tensor) -> Result<Array3<f64>> {
    let (c, h, w) = t.dims3()?;
    let data = t.to_dtype(DTYPE)?.flatten_all()?.to_vec1::<f64>()?;
    Ok(Array3::from_shape_vec((c, h, w), data).expect("shape agrees"))
}

//! The conditional noise-prediction network: an encoder-decoder with skip
//! connections that takes the satellite condition concatenated with the
//! noisy target stack plus a sinusoidal embedding of the cumulative noise
//! level, and predicts the noise component.

use candle_core::{Module, Tensor, Var};
use candle_nn::ops::silu;
use candle_nn::{Conv2d, Linear};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::layers::{
    array3_from_tensor, conv1x1, conv3x3, gamma_features, linear, tensor_from_array2,
    tensor_from_array3, GroupNorm, ParamStore, WeightSource,
};
use crate::diffusion::NoisePredictor;
use crate::error::{Error, Result};

/// Architecture configuration of the conditional denoiser. The input is
/// always condition(1) + noisy targets(4) = 5 channels and the output is
/// always the 4 target channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    pub grid_size: usize,
    pub base_width: usize,
    /// Number of resolution levels (each level below the first halves the
    /// spatial size and doubles the width).
    pub depth: usize,
    pub gamma_embed_dim: usize,
}

pub const DENOISER_IN_CHANNELS: usize = 5;
pub const DENOISER_OUT_CHANNELS: usize = 4;

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec { grid_size: 64, base_width: 16, depth: 3, gamma_embed_dim: 64 }
    }
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("denoiser depth must be >= 1".into()));
        }
        let factor = 1 << (self.depth - 1);
        if self.grid_size % factor != 0 || self.grid_size / factor < 2 {
            return Err(Error::Config(format!(
                "grid size {} does not support {} resolution levels",
                self.grid_size, self.depth
            )));
        }
        if self.base_width % 4 != 0 {
            return Err(Error::Config("base_width must be a multiple of 4".into()));
        }
        if self.gamma_embed_dim < 2 || self.gamma_embed_dim % 2 != 0 {
            return Err(Error::Config("gamma_embed_dim must be even and >= 2".into()));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        (0..self.depth).map(|l| self.base_width << l).collect()
    }
}

/// Residual block with noise-level conditioning injected as a per-channel
/// bias after the first convolution.
struct ResBlock {
    norm1: GroupNorm,
    conv1: Conv2d,
    emb_proj: Linear,
    norm2: GroupNorm,
    conv2: Conv2d,
    skip: Option<Conv2d>,
}

impl ResBlock {
    fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        emb_dim: usize,
    ) -> Result<ResBlock> {
        Ok(ResBlock {
            norm1: GroupNorm::new(store, &format!("{name}.norm1"), c_in)?,
            conv1: conv3x3(store, &format!("{name}.conv1"), c_in, c_out)?,
            emb_proj: linear(store, &format!("{name}.emb"), emb_dim, c_out)?,
            norm2: GroupNorm::new(store, &format!("{name}.norm2"), c_out)?,
            conv2: conv3x3(store, &format!("{name}.conv2"), c_out, c_out)?,
            skip: (c_in != c_out)
                .then(|| conv1x1(store, &format!("{name}.skip"), c_in, c_out))
                .transpose()?,
        })
    }

    fn forward(&self, x: &Tensor, emb: &Tensor) -> Result<Tensor> {
        let mut h = self.conv1.forward(&silu(&self.norm1.forward(x)?)?)?;
        let (b, c) = (h.dims4()?.0, h.dims4()?.1);
        let bias = self.emb_proj.forward(emb)?.reshape((b, c, 1, 1))?;
        h = h.broadcast_add(&bias)?;
        h = self.conv2.forward(&silu(&self.norm2.forward(&h)?)?)?;
        let skip = match &self.skip {
            Some(conv) => conv.forward(x)?,
            None => x.clone(),
        };
        Ok((skip + h)?)
    }
}

struct UpStage {
    reduce: Conv2d,
    block: ResBlock,
}

/// The conditional denoiser network.
pub struct DenoiserNet {
    spec: DenoiserSpec,
    emb1: Linear,
    emb2: Linear,
    stem: Conv2d,
    down_blocks: Vec<ResBlock>,
    mid: ResBlock,
    up_stages: Vec<UpStage>,
    head_norm: GroupNorm,
    head: Conv2d,
    vars: Vec<(String, Var)>,
    device: candle_core::Device,
}

impl DenoiserNet {
    pub fn new(spec: DenoiserSpec, source: WeightSource) -> Result<DenoiserNet> {
        spec.validate()?;
        let mut store = ParamStore::new(source);
        let widths = spec.widths();
        let emb = spec.gamma_embed_dim;

        let emb1 = linear(&mut store, "gamma_mlp.fc1", emb, emb * 4)?;
        let emb2 = linear(&mut store, "gamma_mlp.fc2", emb * 4, emb)?;
        let stem = conv3x3(&mut store, "stem", DENOISER_IN_CHANNELS, widths[0])?;

        let mut down_blocks = Vec::new();
        for (l, &w) in widths.iter().enumerate() {
            let c_in = if l == 0 { widths[0] } else { widths[l - 1] };
            down_blocks.push(ResBlock::new(&mut store, &format!("down{l}"), c_in, w, emb)?);
        }
        let mid = ResBlock::new(
            &mut store,
            "mid",
            *widths.last().unwrap(),
            *widths.last().unwrap(),
            emb,
        )?;
        let mut up_stages = Vec::new();
        for l in (0..spec.depth - 1).rev() {
            let c_above = widths[l + 1];
            let c = widths[l];
            up_stages.push(UpStage {
                reduce: conv3x3(&mut store, &format!("up{l}.reduce"), c_above, c)?,
                block: ResBlock::new(&mut store, &format!("up{l}.block"), 2 * c, c, emb)?,
            });
        }
        let head_norm = GroupNorm::new(&mut store, "head.norm", widths[0])?;
        let head = conv3x3(&mut store, "head.conv", widths[0], DENOISER_OUT_CHANNELS)?;

        let device = store.device().clone();
        let vars = store.finish()?;
        Ok(DenoiserNet {
            spec,
            emb1,
            emb2,
            stem,
            down_blocks,
            mid,
            up_stages,
            head_norm,
            head,
            vars,
            device,
        })
    }

    pub fn spec(&self) -> &DenoiserSpec {
        &self.spec
    }

    pub fn vars(&self) -> &[(String, Var)] {
        &self.vars
    }

    pub fn device(&self) -> &candle_core::Device {
        &self.device
    }

    pub fn param_count(&self) -> usize {
        super::layers::param_count(&self.vars)
    }

    /// Batched forward pass: condition (b, 1, H, W), noisy stack
    /// (b, 4, H, W), one gamma_bar per item, each in (0, 1].
    pub fn forward(&self, condition: &Tensor, noisy: &Tensor, gammas: &[f64]) -> Result<Tensor> {
        let (b, cc, h, w) = condition.dims4()?;
        let (nb, nc, nh, nw) = noisy.dims4()?;
        if cc != 1 || nc != DENOISER_OUT_CHANNELS || (b, h, w) != (nb, nh, nw) {
            return Err(Error::ShapeMismatch {
                expected: format!("condition (b,1,{0},{0}) and noisy (b,4,{0},{0})", self.spec.grid_size),
                got: format!("({b},{cc},{h},{w}) and ({nb},{nc},{nh},{nw})"),
            });
        }
        if gammas.len() != b {
            return Err(Error::ShapeMismatch {
                expected: format!("{b} gamma values"),
                got: format!("{}", gammas.len()),
            });
        }
        for &g in gammas {
            if !(0.0 < g && g <= 1.0) {
                return Err(Error::Domain(format!("gamma_bar {g} outside (0, 1]")));
            }
        }

        let emb = gamma_features(gammas, self.spec.gamma_embed_dim, &self.device)?;
        let emb = self.emb2.forward(&silu(&self.emb1.forward(&emb)?)?)?;
        let emb = silu(&emb)?;

        let mut x = self.stem.forward(&Tensor::cat(&[condition, noisy], 1)?)?;
        let mut skips: Vec<Tensor> = Vec::with_capacity(self.spec.depth - 1);
        for (l, block) in self.down_blocks.iter().enumerate() {
            if l > 0 {
                x = x.avg_pool2d(2)?;
            }
            x = block.forward(&x, &emb)?;
            if l + 1 < self.spec.depth {
                skips.push(x.clone());
            }
        }
        x = self.mid.forward(&x, &emb)?;
        for stage in &self.up_stages {
            let skip = skips.pop().expect("one skip per up stage");
            let (_, _, sh, sw) = skip.dims4()?;
            x = x.upsample_nearest2d(sh, sw)?;
            x = stage.reduce.forward(&x)?;
            x = Tensor::cat(&[&skip, &x], 1)?;
            x = stage.block.forward(&x, &emb)?;
        }
        let out = self.head.forward(&silu(&self.head_norm.forward(&x)?)?)?;
        Ok(out)
    }

    /// Mean squared error between predicted and true noise for a batch.
    pub fn batch_loss(
        &self,
        condition: &Tensor,
        noisy: &Tensor,
        gammas: &[f64],
        eps: &Tensor,
    ) -> Result<Tensor> {
        let eps_hat = self.forward(condition, noisy, gammas)?;
        Ok(candle_nn::loss::mse(&eps_hat, eps)?)
    }
}

/// Single-example prediction used by the sampler and the spec-level
/// operation: (x, y_t, gamma_bar) -> eps_hat as plain arrays.
pub fn denoiser_forward(
    net: &DenoiserNet,
    condition: &Array2<f64>,
    noisy: &Array3<f64>,
    gamma_bar: f64,
) -> Result<Array3<f64>> {
    let x = tensor_from_array2(condition, net.device())?.unsqueeze(0)?.unsqueeze(0)?;
    let y = tensor_from_array3(noisy, net.device())?.unsqueeze(0)?;
    let out = net.forward(&x, &y, &[gamma_bar])?;
    let out = out.squeeze(0)?;
    let arr = array3_from_tensor(&out)?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            step: None,
            context: "denoiser produced non-finite output".into(),
        });
    }
    Ok(arr)
}

impl NoisePredictor for DenoiserNet {
    fn predict_noise(
        &self,
        condition: &Array2<f64>,
        noisy: &Array3<f64>,
        gamma_bar: f64,
    ) -> Result<Array3<f64>> {
        denoiser_forward(self, condition, noisy, gamma_bar)
    }
}

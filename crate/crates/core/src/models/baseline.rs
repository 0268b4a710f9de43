//! The two deterministic baselines: a CNN that replicates the satellite
//! image into a four-channel input, runs four spatial-preserving residual
//! blocks, and upsamples through four doubling stages back to the model
//! grid; and its squeeze-excitation variant, which inserts an SE gate into
//! every residual block.

use candle_core::{Module, Tensor, Var};
use candle_nn::ops::{sigmoid, silu};
use candle_nn::{Conv2d, Linear};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::layers::{
    array3_from_tensor, conv3x3, linear, param_count, tensor_from_array3, ParamStore,
    WeightSource,
};
use crate::error::{Error, Result};

/// Both baselines share the fixed block structure: exactly four residual
/// blocks and four doubling upsample stages.
pub const N_RESIDUAL_BLOCKS: usize = 4;
pub const N_UPSAMPLE_LAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Cnn,
    Senet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub grid_size: usize,
    pub base_width: usize,
    /// Channel-reduction ratio inside the squeeze-excitation gate
    /// (SENet only).
    pub se_reduction: usize,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind, grid_size: usize, base_width: usize) -> BaselineSpec {
        BaselineSpec { kind, grid_size, base_width, se_reduction: 16.min(base_width) }
    }

    /// The network's input spatial size: four doubling upsample stages must
    /// land exactly on the output grid.
    pub fn input_size(&self) -> usize {
        self.grid_size >> N_UPSAMPLE_LAYERS
    }

    pub fn validate(&self) -> Result<()> {
        let factor = 1 << N_UPSAMPLE_LAYERS;
        if self.grid_size % factor != 0 || self.grid_size / factor < 2 {
            return Err(Error::Config(format!(
                "baseline grid size must be a multiple of {factor} and at least {}, got {}",
                2 * factor,
                self.grid_size
            )));
        }
        if self.base_width % 4 != 0 {
            return Err(Error::Config("base_width must be a multiple of 4".into()));
        }
        if self.kind == BaselineKind::Senet && !(1..=self.base_width).contains(&self.se_reduction)
        {
            return Err(Error::Config(format!(
                "se_reduction {} must lie in 1..=base_width ({})",
                self.se_reduction, self.base_width
            )));
        }
        Ok(())
    }
}

/// Stacks `n` identical copies of a single-channel grid channel-wise.
pub fn replicate_channels(img: &Array2<f64>, n: usize) -> Array3<f64> {
    let (h, w) = img.dim();
    let mut out = Array3::zeros((n, h, w));
    for c in 0..n {
        out.index_axis_mut(ndarray::Axis(0), c).assign(img);
    }
    out
}

/// Squeeze-excitation gate: global average pool, two projections, sigmoid.
struct SqueezeExcite {
    fc1: Linear,
    fc2: Linear,
}

impl SqueezeExcite {
    fn new(store: &mut ParamStore, name: &str, channels: usize, reduction: usize) -> Result<Self> {
        let hidden = (channels / reduction).max(1);
        Ok(SqueezeExcite {
            fc1: linear(store, &format!("{name}.fc1"), channels, hidden)?,
            fc2: linear(store, &format!("{name}.fc2"), hidden, channels)?,
        })
    }

    /// Per-channel gates in (0, 1), shaped (b, c, 1, 1).
    fn gate(&self, x: &Tensor) -> Result<Tensor> {
        let (b, c, _, _) = x.dims4()?;
        let pooled = x.mean(3)?.mean(2)?;
        let h = self.fc1.forward(&pooled)?.relu()?;
        let g = sigmoid(&self.fc2.forward(&h)?)?;
        Ok(g.reshape((b, c, 1, 1))?)
    }
}

/// Residual block preserving spatial dimensions, with an optional SE gate
/// rescaling the residual branch.
struct ResidualBlock {
    conv1: Conv2d,
    conv2: Conv2d,
    se: Option<SqueezeExcite>,
}

impl ResidualBlock {
    fn new(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        se: Option<usize>,
    ) -> Result<Self> {
        Ok(ResidualBlock {
            conv1: conv3x3(store, &format!("{name}.conv1"), channels, channels)?,
            conv2: conv3x3(store, &format!("{name}.conv2"), channels, channels)?,
            se: se
                .map(|reduction| SqueezeExcite::new(store, &format!("{name}.se"), channels, reduction))
                .transpose()?,
        })
    }

    fn forward(&self, x: &Tensor, unit_gates: bool) -> Result<Tensor> {
        let mut h = self.conv2.forward(&silu(&self.conv1.forward(x)?)?)?;
        if let Some(se) = &self.se {
            if !unit_gates {
                h = h.broadcast_mul(&se.gate(&h)?)?;
            }
        }
        Ok(silu(&(x + h)?)?)
    }
}

struct UpsampleStage {
    conv: Conv2d,
}

/// The baseline network. Input: the satellite image at
/// `grid_size / 16`, replicated to four channels. Output: the four target
/// fields at full grid size.
pub struct BaselineNet {
    spec: BaselineSpec,
    stem: Conv2d,
    blocks: Vec<ResidualBlock>,
    upsamples: Vec<UpsampleStage>,
    head: Conv2d,
    vars: Vec<(String, Var)>,
    device: candle_core::Device,
}

impl BaselineNet {
    pub fn new(spec: BaselineSpec, source: WeightSource) -> Result<BaselineNet> {
        spec.validate()?;
        let mut store = ParamStore::new(source);
        let w = spec.base_width;
        let se = (spec.kind == BaselineKind::Senet).then_some(spec.se_reduction);

        let stem = conv3x3(&mut store, "stem", 4, w)?;
        let mut blocks = Vec::with_capacity(N_RESIDUAL_BLOCKS);
        for i in 0..N_RESIDUAL_BLOCKS {
            blocks.push(ResidualBlock::new(&mut store, &format!("block{i}"), w, se)?);
        }
        let mut upsamples = Vec::with_capacity(N_UPSAMPLE_LAYERS);
        for i in 0..N_UPSAMPLE_LAYERS {
            upsamples.push(UpsampleStage { conv: conv3x3(&mut store, &format!("up{i}"), w, w)? });
        }
        let head = conv3x3(&mut store, "head", w, 4)?;

        let device = store.device().clone();
        let vars = store.finish()?;
        Ok(BaselineNet { spec, stem, blocks, upsamples, head, vars, device })
    }

    pub fn spec(&self) -> &BaselineSpec {
        &self.spec
    }

    pub fn vars(&self) -> &[(String, Var)] {
        &self.vars
    }

    pub fn device(&self) -> &candle_core::Device {
        &self.device
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.vars)
    }

    /// Batched forward: input (b, 4, s, s) with s = grid_size / 16, output
    /// (b, 4, grid_size, grid_size).
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.forward_inner(input, false)
    }

    /// Ablation entry point: with `unit_gates` every SE gate is pinned to
    /// one, which must reproduce the plain CNN given shared weights.
    pub fn forward_with_unit_gates(&self, input: &Tensor) -> Result<Tensor> {
        self.forward_inner(input, true)
    }

    fn forward_inner(&self, input: &Tensor, unit_gates: bool) -> Result<Tensor> {
        let (_, c, h, w) = input.dims4()?;
        let s = self.spec.input_size();
        if c != 4 || h != s || w != s {
            return Err(Error::ShapeMismatch {
                expected: format!("(b, 4, {s}, {s})"),
                got: format!("(b, {c}, {h}, {w})"),
            });
        }
        let mut x = self.stem.forward(input)?;
        for block in &self.blocks {
            let (_, _, bh, bw) = x.dims4()?;
            x = block.forward(&x, unit_gates)?;
            let (_, _, ah, aw) = x.dims4()?;
            debug_assert_eq!((bh, bw), (ah, aw), "residual blocks preserve spatial dims");
        }
        for stage in &self.upsamples {
            let (_, _, ih, iw) = x.dims4()?;
            x = x.upsample_nearest2d(ih * 2, iw * 2)?;
            x = silu(&stage.conv.forward(&x)?)?;
        }
        Ok(self.head.forward(&x)?)
    }

    /// Spec-level single-image forward: a 1-channel grid at the reduced
    /// input size in, a finite (4, grid_size, grid_size) stack out.
    pub fn forward_image(&self, img: &Array2<f64>) -> Result<Array3<f64>> {
        let s = self.spec.input_size();
        if img.dim() != (s, s) {
            return Err(Error::ShapeMismatch {
                expected: format!("({s}, {s})"),
                got: format!("{:?}", img.dim()),
            });
        }
        let replicated = replicate_channels(img, 4);
        let input = tensor_from_array3(&replicated, &self.device)?.unsqueeze(0)?;
        let out = self.forward(&input)?.squeeze(0)?;
        let arr = array3_from_tensor(&out)?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                step: None,
                context: "baseline produced non-finite output".into(),
            });
        }
        Ok(arr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal_2d};

    #[test]
    fn replicate_matches_definition() {
        let g = standard_normal_2d(&mut rng_from_seed(1), 4, 4);
        let r = replicate_channels(&g, 4);
        for c in 0..4 {
            assert_eq!(r.index_axis(ndarray::Axis(0), c), g);
        }
        let one = replicate_channels(&g, 1);
        assert_eq!(one.index_axis(ndarray::Axis(0), 0), g);
        let summed = r.sum_axis(ndarray::Axis(0));
        assert!((&summed - &(&g * 4.0)).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn cnn_maps_reduced_input_to_full_grid() {
        let spec = BaselineSpec::new(BaselineKind::Cnn, 64, 8);
        assert_eq!(spec.input_size(), 4);
        let net = BaselineNet::new(spec, WeightSource::seeded(3)).unwrap();
        let img = standard_normal_2d(&mut rng_from_seed(5), 4, 4);
        let out = net.forward_image(&img).unwrap();
        assert_eq!(out.dim(), (4, 64, 64));
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn wrong_input_size_is_shape_error() {
        let net =
            BaselineNet::new(BaselineSpec::new(BaselineKind::Cnn, 64, 8), WeightSource::seeded(3))
                .unwrap();
        let img = standard_normal_2d(&mut rng_from_seed(5), 8, 8);
        assert!(matches!(net.forward_image(&img), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let net =
            BaselineNet::new(BaselineSpec::new(BaselineKind::Senet, 32, 8), WeightSource::seeded(7))
                .unwrap();
        let img = standard_normal_2d(&mut rng_from_seed(5), 2, 2);
        let a = net.forward_image(&img).unwrap();
        let b = net.forward_image(&img).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn senet_with_unit_gates_equals_cnn_with_shared_weights() {
        let senet = BaselineNet::new(
            BaselineSpec { se_reduction: 4, ..BaselineSpec::new(BaselineKind::Senet, 32, 8) },
            WeightSource::seeded(11),
        )
        .unwrap();
        // build the plain CNN from the SENet's weights, dropping the SE
        // projections
        let mut shared = super::super::layers::named_tensors(senet.vars());
        shared.retain(|name, _| !name.contains(".se."));
        let cnn = BaselineNet::new(
            BaselineSpec::new(BaselineKind::Cnn, 32, 8),
            WeightSource::Loaded(shared),
        )
        .unwrap();

        let img = standard_normal_2d(&mut rng_from_seed(13), 2, 2);
        let replicated = replicate_channels(&img, 4);
        let input = tensor_from_array3(&replicated, senet.device()).unwrap().unsqueeze(0).unwrap();

        let gated = array3_from_tensor(&senet.forward(&input).unwrap().squeeze(0).unwrap()).unwrap();
        let ungated =
            array3_from_tensor(&senet.forward_with_unit_gates(&input).unwrap().squeeze(0).unwrap())
                .unwrap();
        let plain = array3_from_tensor(&cnn.forward(&input).unwrap().squeeze(0).unwrap()).unwrap();

        let max_diff = (&ungated - &plain).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        assert!(max_diff < 1e-12, "unit-gate SENet deviates from CNN by {max_diff}");
        assert!((&gated - &plain).iter().any(|d| d.abs() > 1e-9), "gates had no effect");
    }

    #[test]
    fn se_gates_lie_in_unit_interval() {
        let spec = BaselineSpec { se_reduction: 4, ..BaselineSpec::new(BaselineKind::Senet, 32, 8) };
        let mut store = ParamStore::new(WeightSource::seeded(2));
        let se = SqueezeExcite::new(&mut store, "se", spec.base_width, spec.se_reduction).unwrap();
        let x = crate::models::layers::tensor_from_array3(
            &crate::rng::standard_normal_3d(&mut rng_from_seed(4), spec.base_width, 4, 4),
            &candle_core::Device::Cpu,
        )
        .unwrap()
        .unsqueeze(0)
        .unwrap();
        let g = se.gate(&x).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn senet_has_strictly_more_parameters() {
        let cnn =
            BaselineNet::new(BaselineSpec::new(BaselineKind::Cnn, 32, 8), WeightSource::seeded(1))
                .unwrap();
        let senet = BaselineNet::new(
            BaselineSpec { se_reduction: 4, ..BaselineSpec::new(BaselineKind::Senet, 32, 8) },
            WeightSource::seeded(1),
        )
        .unwrap();
        assert!(senet.param_count() > cnn.param_count());
    }

    #[test]
    fn grid_not_divisible_by_sixteen_rejected() {
        assert!(BaselineSpec::new(BaselineKind::Cnn, 40, 8).validate().is_err());
        assert!(BaselineSpec::new(BaselineKind::Cnn, 16, 8).validate().is_err());
        assert!(BaselineSpec::new(BaselineKind::Cnn, 32, 8).validate().is_ok());
    }
}

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AidError, Result};
use crate::numeric::argmax;
use crate::types::EmbeddingVector;

/// Output widths of the three trunk layers.
pub const TRUNK_WIDTHS: [usize; 3] = [256, 128, 64];
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: [usize; 3],
    pub n_accents: usize,
    pub n_speakers: usize,
}

impl ModelShape {
    pub fn new(input_dim: usize, n_accents: usize, n_speakers: usize) -> Self {
        ModelShape {
            input_dim,
            hidden: TRUNK_WIDTHS,
            n_accents,
            n_speakers,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.hidden[2]
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.contains(&0) || self.n_accents == 0 || self.n_speakers == 0 {
            return Err(AidError::Config(format!("degenerate model shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// `y = x W + b` with `W` stored input×output.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Affine {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn init(fan_in: usize, fan_out: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let s = scale / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_fn(
            (fan_in, fan_out),
            |_| {
                if s == 0.0 {
                    0.0
                } else {
                    rng.random_range(-s..=s)
                }
            },
        );
        Affine {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }

    fn apply_eval(&self, h: &Array2<f64>) -> Array2<f64> {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        (h - &self.running_mean) * &inv_std * &self.gamma + &self.beta
    }
}

/// Per-layer intermediates of a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Array2<f64>,
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
    /// Batch-norm output before ReLU.
    pub normalized: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub trunk_embedding: Array2<f64>,
    pub accent_logits: Array2<f64>,
    pub speaker_logits: Array2<f64>,
}

/// Everything `backward` needs from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) version: u64,
    pub layers: Vec<LayerCache>,
    pub output: ForwardOutput,
}

/// Feed-forward accent classifier with an adversarial speaker head.
#[derive(Debug, Clone, PartialEq)]
pub struct AidModel {
    pub(crate) shape: ModelShape,
    pub layers: Vec<Affine>,
    pub norms: Vec<BatchNorm>,
    pub accent_head: Affine,
    pub speaker_head: Affine,
    pub mode: Mode,
    pub batchnorm_momentum: f64,
    pub(crate) version: u64,
    pub(crate) trained: bool,
}

impl AidModel {
    /// Fresh model: uniform weights in ±scale/√fan_in, zero biases, identity batch norm.
    pub fn new(shape: ModelShape, weight_init_scale: f64, batchnorm_momentum: f64, rng: &mut impl Rng) -> Result<Self> {
        shape.validate()?;
        if !(weight_init_scale.is_finite() && weight_init_scale >= 0.0) {
            return Err(AidError::Config("weight_init_scale must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&batchnorm_momentum) {
            return Err(AidError::Config("batchnorm_momentum must lie in [0, 1]".into()));
        }
        let mut fan_in = shape.input_dim;
        let mut layers = Vec::new();
        let mut norms = Vec::new();
        for &width in &shape.hidden {
            layers.push(Affine::init(fan_in, width, weight_init_scale, rng));
            norms.push(BatchNorm::new(width));
            fan_in = width;
        }
        let accent_head = Affine::init(fan_in, shape.n_accents, weight_init_scale, rng);
        let speaker_head = Affine::init(fan_in, shape.n_speakers, weight_init_scale, rng);
        Ok(AidModel {
            shape,
            layers,
            norms,
            accent_head,
            speaker_head,
            mode: Mode::Train,
            batchnorm_momentum,
            version: 0,
            trained: false,
        })
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.shape.input_dim {
            return Err(AidError::DimensionMismatch {
                expected: self.shape.input_dim,
                got: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(AidError::Empty("batch"));
        }
        Ok(())
    }

    /// Train-mode pass with batch statistics; leaves running statistics untouched.
    pub fn forward_train(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        if x.nrows() < 2 {
            return Err(AidError::BatchTooSmall(x.nrows()));
        }
        let b = x.nrows() as f64;
        let mut act = x.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (layer, bn) in self.layers.iter().zip(&self.norms) {
            let h = layer.apply(&act.view());
            let mean = h.mean_axis(Axis(0)).expect("batch is nonempty");
            let centered = &h - &mean;
            let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / b;
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = &centered * &inv_std;
            let normalized = &xhat * &bn.gamma + &bn.beta;
            let next = normalized.mapv(|v| v.max(0.0));
            caches.push(LayerCache {
                input: act,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                normalized,
            });
            act = next;
        }
        let output = self.heads(act);
        Ok(ForwardCache {
            version: self.version,
            layers: caches,
            output,
        })
    }

    /// Fold a train-mode pass's batch statistics into the running estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let m = self.batchnorm_momentum;
        let n = cache.output.trunk_embedding.nrows() as f64;
        for (bn, lc) in self.norms.iter_mut().zip(&cache.layers) {
            // Running variance tracks the unbiased estimate.
            let unbiased = &lc.batch_var * (n / (n - 1.0));
            bn.running_mean = &bn.running_mean * (1.0 - m) + &lc.batch_mean * m;
            bn.running_var = &bn.running_var * (1.0 - m) + unbiased * m;
        }
    }

    /// Eval-mode pass with running statistics; rows are independent of each other.
    pub fn forward_eval(&self, x: ArrayView2<f64>) -> Result<ForwardOutput> {
        self.check_input(&x)?;
        let mut act = x.to_owned();
        for (layer, bn) in self.layers.iter().zip(&self.norms) {
            act = bn.apply_eval(&layer.apply(&act.view())).mapv(|v| v.max(0.0));
        }
        Ok(self.heads(act))
    }

    /// Mode-dependent pass. In train mode the running statistics are updated
    /// and the cache for `backward` is returned.
    pub fn forward(&mut self, x: ArrayView2<f64>) -> Result<(ForwardOutput, Option<ForwardCache>)> {
        match self.mode {
            Mode::Train => {
                let cache = self.forward_train(x)?;
                self.update_running_stats(&cache);
                Ok((cache.output.clone(), Some(cache)))
            }
            Mode::Eval => Ok((self.forward_eval(x)?, None)),
        }
    }

    fn heads(&self, trunk: Array2<f64>) -> ForwardOutput {
        let accent_logits = self.accent_head.apply(&trunk.view());
        let speaker_logits = self.speaker_head.apply(&trunk.view());
        ForwardOutput {
            trunk_embedding: trunk,
            accent_logits,
            speaker_logits,
        }
    }

    /// Replace running statistics with exact population statistics over `x`.
    pub fn finalize_running_stats(&mut self, x: ArrayView2<f64>) -> Result<()> {
        self.check_input(&x)?;
        let n = x.nrows() as f64;
        let mut act = x.to_owned();
        for i in 0..self.layers.len() {
            let h = self.layers[i].apply(&act.view());
            let mean = h.mean_axis(Axis(0)).expect("nonempty");
            let var = (&h - &mean).mapv(|v| v * v).sum_axis(Axis(0)) / n;
            self.norms[i].running_mean = mean;
            self.norms[i].running_var = var;
            act = self.norms[i].apply_eval(&h).mapv(|v| v.max(0.0));
        }
        Ok(())
    }

    /// Accent class per row, eval path.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let out = self.forward_eval(x)?;
        Ok(out
            .accent_logits
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("standard layout")).expect("at least one class"))
            .collect())
    }

    /// Trunk output for one utterance-level vector.
    pub fn accent_embedding(&self, input: &EmbeddingVector) -> Result<EmbeddingVector> {
        let x = input.view().insert_axis(Axis(0));
        let out = self.forward_eval(x)?;
        EmbeddingVector::new(out.trunk_embedding.row(0).to_vec())
    }

    /// Trunk + accent head parameters in a fixed order.
    pub fn main_params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (i, (layer, bn)) in self.layers.iter_mut().zip(self.norms.iter_mut()).enumerate() {
            out.push((
                format!("trunk{i}.weight"),
                layer.weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                format!("trunk{i}.bias"),
                layer.bias.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                format!("trunk{i}.gamma"),
                bn.gamma.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                format!("trunk{i}.beta"),
                bn.beta.as_slice_mut().expect("standard layout"),
            ));
        }
        out.push((
            "accent_head.weight".into(),
            self.accent_head.weight.as_slice_mut().expect("standard layout"),
        ));
        out.push((
            "accent_head.bias".into(),
            self.accent_head.bias.as_slice_mut().expect("standard layout"),
        ));
        out
    }

    pub fn speaker_params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            (
                "speaker_head.weight".into(),
                self.speaker_head.weight.as_slice_mut().expect("standard layout"),
            ),
            (
                "speaker_head.bias".into(),
                self.speaker_head.bias.as_slice_mut().expect("standard layout"),
            ),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::array;

    fn small(seed: u64) -> AidModel {
        let shape = ModelShape {
            input_dim: 3,
            hidden: [6, 5, 4],
            n_accents: 3,
            n_speakers: 2,
        };
        AidModel::new(shape, 1.0, 0.1, &mut substream(seed, "init")).unwrap()
    }

    #[test]
    fn default_shape_chains_to_64() {
        let model = AidModel::new(ModelShape::new(10, 4, 7), 1.0, 0.1, &mut substream(0, "init")).unwrap();
        let dims: Vec<(usize, usize)> = model.layers.iter().map(|l| l.weight.dim()).collect();
        assert_eq!(dims, [(10, 256), (256, 128), (128, 64)]);
        assert_eq!(model.accent_head.weight.dim(), (64, 4));
        assert_eq!(model.speaker_head.weight.dim(), (64, 7));
        let e = model
            .accent_embedding(&EmbeddingVector::new(vec![0.5; 10]).unwrap())
            .unwrap();
        assert_eq!(e.dim(), 64);
    }

    #[test]
    fn zero_input_eval_gives_bias_logits() {
        let mut model = small(1);
        model.mode = Mode::Eval;
        model.accent_head.bias = array![0.3, -1.0, 2.0];
        let out = model.forward_eval(Array2::zeros((2, 3)).view()).unwrap();
        for row in out.accent_logits.rows() {
            assert_eq!(row.to_vec(), vec![0.3, -1.0, 2.0]);
        }
    }

    #[test]
    fn eval_is_deterministic_and_batch_independent() {
        let model = small(2);
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5], [0.0, 2.0, -0.3]];
        let a = model.forward_eval(x.view()).unwrap();
        let b = model.forward_eval(x.view()).unwrap();
        assert_eq!(a, b);
        let single = model.forward_eval(x.slice(ndarray::s![1..2, ..])).unwrap();
        assert_eq!(single.accent_logits.row(0), a.accent_logits.row(1));
    }

    #[test]
    fn train_mode_normalizes_batch() {
        let model = small(3);
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5], [0.0, 2.0, -0.3], [0.7, 0.7, 0.7]];
        let cache = model.forward_train(x.view()).unwrap();
        for lc in &cache.layers {
            // Recompute statistics of the pre-norm activations directly.
            let h = &lc.xhat;
            for j in 0..h.ncols() {
                let col: Vec<f64> = h.column(j).to_vec();
                let mean = col.iter().sum::<f64>() / 4.0;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
                assert!(mean.abs() < 1e-12);
                let expected = lc.batch_var[j] / (lc.batch_var[j] + BN_EPS);
                assert!((var - expected).abs() < 1e-9, "{var} vs {expected}");
            }
        }
    }

    #[test]
    fn train_mode_updates_running_stats() {
        let mut model = small(4);
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let before = model.norms[0].running_mean.clone();
        model.forward(x.view()).unwrap();
        assert_ne!(before, model.norms[0].running_mean);
        assert!(model.norms.iter().all(|bn| bn.running_var.iter().all(|&v| v > 0.0)));
    }

    #[test]
    fn input_errors() {
        let mut model = small(5);
        assert!(matches!(
            model.forward_train(Array2::zeros((4, 2)).view()),
            Err(AidError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            model.forward(Array2::zeros((1, 3)).view()),
            Err(AidError::BatchTooSmall(1))
        ));
    }
}

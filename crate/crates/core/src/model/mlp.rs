//! Fully connected regressor: sigmoid hidden stack, two linear outputs.
//!
//! Training is plain stochastic gradient descent with Adam, batch size 1,
//! exactly one weight update per sample per epoch. Targets are kill counts
//! scaled by [`TARGET_SCALE`]; losses and gradients live in that scaled
//! space, predictions are unscaled on the way out.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, ModelError};
use crate::evaluation::auc_kill_race;
use crate::matrix::Matrix;

/// Hidden widths of the full-size network, input to output.
pub const HIDDEN_WIDTHS: [usize; 6] = [1024, 512, 128, 64, 32, 8];
/// Predicted (radiant, dire) kill counts.
pub const OUTPUT_DIM: usize = 2;
/// Kill counts are divided by this before entering the loss.
pub const TARGET_SCALE: f64 = 100.0;

/// Hidden stack shrunk for fast tests: width / divisor, floored at 2 so no
/// layer collapses to a single unit.
pub fn scaled_hidden_widths(divisor: usize) -> Vec<usize> {
    HIDDEN_WIDTHS.iter().map(|&w| (w / divisor.max(1)).max(2)).collect()
}

pub(super) struct Layer {
    /// out_dim x in_dim.
    pub(super) w: Matrix,
    pub(super) b: Vec<f64>,
}

pub struct MlpModel {
    pub(super) input_dim: usize,
    pub(super) hidden: Vec<usize>,
    pub(super) seed: u64,
    pub(super) layers: Vec<Layer>,
}

impl std::fmt::Debug for MlpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "MlpModel(input={}, hidden={:?}, params={})",
            self.input_dim,
            self.hidden,
            self.n_params()
        )
    }
}

/// Full-size network with Glorot-uniform weights and zero biases.
pub fn init_mlp(input_dim: usize, seed: u64) -> Result<MlpModel, ModelError> {
    init_mlp_custom(input_dim, &HIDDEN_WIDTHS, seed)
}

/// As [`init_mlp`] with an explicit hidden stack.
pub fn init_mlp_custom(
    input_dim: usize,
    hidden: &[usize],
    seed: u64,
) -> Result<MlpModel, ModelError> {
    if input_dim == 0 {
        return Err(ModelError::DimensionMismatch { detail: "input_dim must be > 0".into() });
    }
    if hidden.iter().any(|&w| w == 0) {
        return Err(ModelError::DimensionMismatch { detail: "hidden widths must be > 0".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = input_dim;
    for &fan_out in hidden.iter().chain(std::iter::once(&OUTPUT_DIM)) {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = Matrix::zeros(fan_out, fan_in);
        for v in w.as_mut_slice() {
            *v = rng.random_range(-limit..limit);
        }
        layers.push(Layer { w, b: vec![0.0; fan_out] });
        fan_in = fan_out;
    }
    Ok(MlpModel { input_dim, hidden: hidden.to_vec(), seed, layers })
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.rows() * l.w.cols() + l.b.len()).sum()
    }

    /// Scaled-space outputs for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2], ModelError> {
        let acts = self.forward_acts(x)?;
        let out = acts.last().expect("output layer");
        Ok([out[0], out[1]])
    }

    /// Activations per layer, index 0 being the input itself.
    fn forward_acts(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, ModelError> {
        if x.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch {
                detail: format!("input has {} values, model takes {}", x.len(), self.input_dim),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = acts.last().expect("previous activation");
            let mut a = vec![0.0; layer.b.len()];
            for (o, out) in a.iter_mut().enumerate() {
                let mut z = layer.b[o];
                for (w, v) in layer.w.row(o).iter().zip(prev) {
                    z += w * v;
                }
                *out = if li == last { z } else { sigmoid(z) };
            }
            acts.push(a);
        }
        Ok(acts)
    }

    /// All parameters in a fixed order (per layer: weights row-major, then
    /// biases). The companion of [`MlpModel::set_flat_params`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            flat.extend_from_slice(layer.w.as_slice());
            flat.extend_from_slice(&layer.b);
        }
        flat
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.n_params() {
            return Err(ModelError::DimensionMismatch {
                detail: format!("{} params supplied, model has {}", flat.len(), self.n_params()),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.w.as_mut_slice();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            let b_len = layer.b.len();
            layer.b.copy_from_slice(&flat[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(())
    }

    /// Mean per-sample loss over a batch, targets already scaled.
    pub fn batch_loss(&self, xs: &[Vec<f64>], ys: &[[f64; 2]]) -> Result<f64, ModelError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(ModelError::DimensionMismatch {
                detail: format!("{} inputs vs {} targets", xs.len(), ys.len()),
            });
        }
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let out = self.forward(x)?;
            total += sample_loss(&out, y);
        }
        Ok(total / xs.len() as f64)
    }

    /// Mean loss and mean gradient over a batch, flattened in
    /// [`MlpModel::flat_params`] order. This is the analytic side of the
    /// finite-difference check in the test suite.
    pub fn batch_gradients(
        &self,
        xs: &[Vec<f64>],
        ys: &[[f64; 2]],
    ) -> Result<(f64, Vec<f64>), ModelError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(ModelError::DimensionMismatch {
                detail: format!("{} inputs vs {} targets", xs.len(), ys.len()),
            });
        }
        let mut grads = vec![0.0; self.n_params()];
        let mut scratch = vec![0.0; self.n_params()];
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            total += self.backprop(x, y, &mut scratch)?;
            for (g, s) in grads.iter_mut().zip(&scratch) {
                *g += s;
            }
        }
        let inv = 1.0 / xs.len() as f64;
        for g in &mut grads {
            *g *= inv;
        }
        Ok((total * inv, grads))
    }

    /// One sample's loss; `grads` receives d(loss)/d(param) in flat order.
    fn backprop(&self, x: &[f64], y: &[f64; 2], grads: &mut [f64]) -> Result<f64, ModelError> {
        let acts = self.forward_acts(x)?;
        let out = acts.last().expect("output layer");
        let loss = sample_loss(&[out[0], out[1]], y);

        // delta = d(loss)/d(pre-activation) of the current layer; for the
        // linear output layer under half-mean-squared error that is o - t.
        let mut delta: Vec<f64> = out.iter().zip(y).map(|(o, t)| o - t).collect();
        let mut offset = grads.len();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let prev = &acts[li];
            offset -= layer.w.rows() * layer.w.cols() + layer.b.len();
            let (w_grads, b_grads) = grads[offset..offset + layer.w.rows() * layer.w.cols() + layer.b.len()]
                .split_at_mut(layer.w.rows() * layer.w.cols());
            for (o, &d) in delta.iter().enumerate() {
                b_grads[o] = d;
                let row = &mut w_grads[o * layer.w.cols()..(o + 1) * layer.w.cols()];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g = d * a;
                }
            }
            if li > 0 {
                // Propagate through the previous sigmoid: a' = a (1 - a).
                let mut prev_delta = vec![0.0; layer.w.cols()];
                for (o, &d) in delta.iter().enumerate() {
                    for (pd, w) in prev_delta.iter_mut().zip(layer.w.row(o)) {
                        *pd += d * w;
                    }
                }
                for (pd, a) in prev_delta.iter_mut().zip(prev) {
                    *pd *= a * (1.0 - a);
                }
                delta = prev_delta;
            }
        }
        debug_assert_eq!(offset, 0);
        Ok(loss)
    }
}

/// Half mean squared error over the two outputs: the 1/2 makes the output
/// delta exactly (o - t).
fn sample_loss(out: &[f64; 2], target: &[f64; 2]) -> f64 {
    let d0 = out[0] - target[0];
    let d1 = out[1] - target[1];
    (d0 * d0 + d1 * d1) / 2.0
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Drives the per-epoch sample order; independent of the init seed.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

/// Scaled-space losses and ranking quality per epoch. Every value is finite;
/// training aborts rather than record a non-finite number.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_auc: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Trains in place. Sample order is reshuffled every epoch from
/// (config.seed, epoch index); the train loss recorded for an epoch is the
/// mean of per-sample losses measured before each update.
pub fn train(
    model: &mut MlpModel,
    train: &Dataset,
    validation: &Dataset,
    config: &TrainConfig,
) -> Result<TrainHistory, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset { what: "train" });
    }
    if validation.is_empty() {
        return Err(ModelError::EmptyDataset { what: "validation" });
    }
    train.check_width(model.input_dim)?;
    validation.check_width(model.input_dim)?;

    let scale = |targets: &[[f64; 2]]| -> Vec<[f64; 2]> {
        targets.iter().map(|t| [t[0] / TARGET_SCALE, t[1] / TARGET_SCALE]).collect()
    };
    let train_scaled = scale(&train.targets);
    let val_scaled = scale(&validation.targets);

    let n_params = model.n_params();
    let mut adam = AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 };
    let mut grads = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);

        let mut loss_sum = 0.0;
        for &i in &order {
            let loss = model.backprop(&train.features[i], &train_scaled[i], &mut grads)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    detail: format!("training sample {i}"),
                });
            }
            loss_sum += loss;
            adam_step(model, &grads, &mut adam, config);
        }
        let train_loss = loss_sum / train.len() as f64;

        let val_loss = model.batch_loss(&validation.features, &val_scaled)?;
        if !val_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch, detail: "validation pass".into() });
        }
        let train_auc = ranking_auc(model, train)?;
        let val_auc = ranking_auc(model, validation)?;
        history.epochs.push(EpochStats { epoch, train_loss, val_loss, train_auc, val_auc });
    }
    Ok(history)
}

/// Kill-race AUC of current predictions against raw targets. Degenerate
/// epochs (every pair tied on one side) record the chance value 0.5 so the
/// history stays finite.
fn ranking_auc(model: &MlpModel, dataset: &Dataset) -> Result<f64, ModelError> {
    let mut predictions = Vec::with_capacity(dataset.len());
    for x in &dataset.features {
        let out = model.forward(x)?;
        predictions.push((out[0], out[1]));
    }
    let actuals: Vec<(f64, f64)> = dataset.targets.iter().map(|t| (t[0], t[1])).collect();
    Ok(auc_kill_race(&predictions, &actuals).map(|d| d.auc).unwrap_or(0.5))
}

fn adam_step(model: &mut MlpModel, grads: &[f64], state: &mut AdamState, config: &TrainConfig) {
    state.t += 1;
    let bc1 = 1.0 - config.beta1.powi(state.t.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - config.beta2.powi(state.t.min(i32::MAX as u64) as i32);
    let mut idx = 0;
    let mut update = |p: &mut f64| {
        let g = grads[idx];
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        idx += 1;
    };
    for layer in &mut model.layers {
        for w in layer.w.as_mut_slice() {
            update(w);
        }
        for b in &mut layer.b {
            update(b);
        }
    }
}

/// Unscales a prediction back to kill counts, floored at zero.
pub fn predict_kills(model: &MlpModel, x: &[f64]) -> Result<(f64, f64), ModelError> {
    let out = model.forward(x)?;
    Ok(((out[0] * TARGET_SCALE).max(0.0), (out[1] * TARGET_SCALE).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        // Kills are a noiseless affine function of two inputs, scaled to
        // realistic magnitudes.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            features.push(vec![a, b]);
            targets.push([25.0 + 10.0 * a - 5.0 * b, 25.0 - 8.0 * a + 4.0 * b]);
        }
        Dataset { features, targets }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut model = init_mlp_custom(3, &[4, 3], 7).unwrap();
        let xs = vec![vec![0.3, -0.8, 0.5], vec![-1.2, 0.1, 0.9], vec![0.0, 0.7, -0.4]];
        let ys = vec![[0.2, 0.4], [0.1, 0.3], [0.5, 0.0]];
        let (_, analytic) = model.batch_gradients(&xs, &ys).unwrap();
        let params = model.flat_params();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += h;
            model.set_flat_params(&plus).unwrap();
            let up = model.batch_loss(&xs, &ys).unwrap();
            let mut minus = params.clone();
            minus[i] -= h;
            model.set_flat_params(&minus).unwrap();
            let down = model.batch_loss(&xs, &ys).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        model.set_flat_params(&params).unwrap();
        assert!(worst < 1e-5, "worst relative gradient error {worst}");
    }

    #[test]
    fn training_learns_an_affine_target() {
        let train_set = toy_dataset(300, 1);
        let val_set = toy_dataset(60, 2);
        let mut model = init_mlp_custom(2, &[16, 8], 3).unwrap();
        let config = TrainConfig { epochs: 40, learning_rate: 3e-3, ..TrainConfig::default() };
        let history = train(&mut model, &train_set, &val_set, &config).unwrap();
        assert_eq!(history.epochs.len(), 40);
        let first = &history.epochs[0];
        let last = history.epochs.last().unwrap();
        assert!(
            last.val_loss < first.val_loss * 0.2,
            "val loss {} -> {}",
            first.val_loss,
            last.val_loss
        );
        assert!(last.val_auc > 0.9, "val auc {}", last.val_auc);
        for stats in &history.epochs {
            for v in [stats.train_loss, stats.val_loss, stats.train_auc, stats.val_auc] {
                assert!(v.is_finite());
            }
        }
        let (kr, kd) = predict_kills(&model, &[0.5, 0.5]).unwrap();
        assert!((kr - 27.5).abs() < 6.0, "radiant prediction {kr}");
        assert!((kd - 23.0).abs() < 6.0, "dire prediction {kd}");
    }

    #[test]
    fn training_is_deterministic() {
        let train_set = toy_dataset(50, 4);
        let val_set = toy_dataset(10, 5);
        let config = TrainConfig { epochs: 5, learning_rate: 1e-3, ..TrainConfig::default() };
        let mut a = init_mlp_custom(2, &[8, 4], 11).unwrap();
        let ha = train(&mut a, &train_set, &val_set, &config).unwrap();
        let mut b = init_mlp_custom(2, &[8, 4], 11).unwrap();
        let hb = train(&mut b, &train_set, &val_set, &config).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.flat_params(), b.flat_params());
        let mut c = init_mlp_custom(2, &[8, 4], 12).unwrap();
        let hc = train(&mut c, &train_set, &val_set, &config).unwrap();
        assert_ne!(ha, hc);
    }

    #[test]
    fn divergence_aborts_with_non_finite_loss() {
        let train_set = toy_dataset(30, 6);
        let val_set = toy_dataset(10, 7);
        // Adam steps are bounded by the learning rate, so the rate itself
        // must be large enough to push activations past f64 range.
        let mut model = init_mlp_custom(2, &[4], 1).unwrap();
        let config = TrainConfig { epochs: 50, learning_rate: 1e200, ..TrainConfig::default() };
        let err = train(&mut model, &train_set, &val_set, &config).unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteLoss { .. }));
    }

    #[test]
    fn empty_sets_and_width_mismatches_are_rejected() {
        let data = toy_dataset(10, 8);
        let empty = Dataset { features: vec![], targets: vec![] };
        let mut model = init_mlp_custom(2, &[4], 1).unwrap();
        let config = TrainConfig::default();
        assert!(matches!(
            train(&mut model, &empty, &data, &config).unwrap_err(),
            ModelError::EmptyDataset { what: "train" }
        ));
        assert!(matches!(
            train(&mut model, &data, &empty, &config).unwrap_err(),
            ModelError::EmptyDataset { what: "validation" }
        ));
        let mut wide = init_mlp_custom(3, &[4], 1).unwrap();
        assert!(matches!(
            train(&mut wide, &data, &data, &config).unwrap_err(),
            ModelError::DimensionMismatch { .. }
        ));
        assert!(model.forward(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let model = init_mlp_custom(4, &[5, 3], 9).unwrap();
        let params = model.flat_params();
        assert_eq!(params.len(), model.n_params());
        assert_eq!(model.n_params(), 4 * 5 + 5 + 5 * 3 + 3 + 3 * 2 + 2);
        let mut copy = init_mlp_custom(4, &[5, 3], 10).unwrap();
        copy.set_flat_params(&params).unwrap();
        assert_eq!(copy.flat_params(), params);
        assert!(copy.set_flat_params(&params[1..]).is_err());
    }

    #[test]
    fn default_config_matches_published_procedure() {
        let config = TrainConfig::default();
        assert_eq!(config.epochs, 100);
        assert_eq!(config.learning_rate, 1e-4);
        assert_eq!(config.beta1, 0.9);
        assert_eq!(config.beta2, 0.999);
        assert_eq!(config.epsilon, 1e-8);
        assert_eq!(HIDDEN_WIDTHS, [1024, 512, 128, 64, 32, 8]);
        assert_eq!(scaled_hidden_widths(8), vec![128, 64, 16, 8, 4, 2]);
    }

    #[test]
    fn prediction_is_floored_at_zero() {
        let mut model = init_mlp_custom(1, &[2], 0).unwrap();
        let n = model.n_params();
        // Force a strongly negative output via the bias terms.
        let mut params = vec![0.0; n];
        params[n - 1] = -5.0;
        params[n - 2] = -5.0;
        model.set_flat_params(&params).unwrap();
        let (kr, kd) = predict_kills(&model, &[1.0]).unwrap();
        assert_eq!((kr, kd), (0.0, 0.0));
    }
}

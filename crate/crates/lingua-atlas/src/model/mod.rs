//! The language classifier: a single-layer unidirectional LSTM over log-mel
//! frames, elementwise max-pool over time, then FC -> ReLU -> FC logits.
//! Backprop and the Adam optimizer are written out explicitly so gradients
//! can be verified against finite differences.

mod checkpoint;
mod data;
mod mat;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::dsp::MelSpectrogram;

pub use checkpoint::{
    checkpoint_to_bytes, parse_checkpoint_bytes, read_checkpoint, write_checkpoint, Checkpoint,
};
pub use data::FeaturizedCorpus;
pub use mat::Mat;
pub use train::{evaluate, train, EpochStats, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid classifier config: {0}")]
    Config(String),
    #[error("input has {got} bins per frame, classifier expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("class index {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("class {0} has no utterances in the train split")]
    ClassMissingFromTrain(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss or parameter at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("checkpoint parse error: {0}")]
    CheckpointParse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// Hyperparameters. Defaults: 80-dim input, hidden 256, 64-dim embedding
/// layer, Adam at 1e-3.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub n_classes: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without test-accuracy improvement before training stops.
    pub plateau_epochs: usize,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn new(n_classes: usize) -> Self {
        Self {
            input_dim: 80,
            hidden_dim: 256,
            embed_dim: 64,
            n_classes,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 100,
            batch_size: 16,
            plateau_epochs: 5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(ModelError::Config(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(ModelError::Config(
                "batch size and max epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// All trainable tensors. Gate order everywhere is input, forget, cell
/// candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w_i: Mat,
    pub w_f: Mat,
    pub w_g: Mat,
    pub w_o: Mat,
    pub u_i: Mat,
    pub u_f: Mat,
    pub u_g: Mat,
    pub u_o: Mat,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_o: Vec<f64>,
    pub fc1_w: Mat,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Mat,
    pub fc2_b: Vec<f64>,
}

/// Canonical tensor names and shapes, in serialization order.
pub(crate) fn tensor_dims(cfg: &ClassifierConfig) -> [(&'static str, usize, usize); 16] {
    let (i, h, e, c) = (cfg.input_dim, cfg.hidden_dim, cfg.embed_dim, cfg.n_classes);
    [
        ("lstm.w_i", h, i),
        ("lstm.w_f", h, i),
        ("lstm.w_g", h, i),
        ("lstm.w_o", h, i),
        ("lstm.u_i", h, h),
        ("lstm.u_f", h, h),
        ("lstm.u_g", h, h),
        ("lstm.u_o", h, h),
        ("lstm.b_i", 1, h),
        ("lstm.b_f", 1, h),
        ("lstm.b_g", 1, h),
        ("lstm.b_o", 1, h),
        ("fc1.w", e, h),
        ("fc1.b", 1, e),
        ("fc2.w", c, e),
        ("fc2.b", 1, c),
    ]
}

impl ClassifierParams {
    pub fn zeros(cfg: &ClassifierConfig) -> Self {
        let (i, h, e, c) = (cfg.input_dim, cfg.hidden_dim, cfg.embed_dim, cfg.n_classes);
        Self {
            w_i: Mat::zeros(h, i),
            w_f: Mat::zeros(h, i),
            w_g: Mat::zeros(h, i),
            w_o: Mat::zeros(h, i),
            u_i: Mat::zeros(h, h),
            u_f: Mat::zeros(h, h),
            u_g: Mat::zeros(h, h),
            u_o: Mat::zeros(h, h),
            b_i: vec![0.0; h],
            b_f: vec![0.0; h],
            b_g: vec![0.0; h],
            b_o: vec![0.0; h],
            fc1_w: Mat::zeros(e, h),
            fc1_b: vec![0.0; e],
            fc2_w: Mat::zeros(c, e),
            fc2_b: vec![0.0; c],
        }
    }

    /// Flat views of every tensor, in canonical order.
    pub fn slices(&self) -> [&[f64]; 16] {
        [
            &self.w_i.data,
            &self.w_f.data,
            &self.w_g.data,
            &self.w_o.data,
            &self.u_i.data,
            &self.u_f.data,
            &self.u_g.data,
            &self.u_o.data,
            &self.b_i,
            &self.b_f,
            &self.b_g,
            &self.b_o,
            &self.fc1_w.data,
            &self.fc1_b,
            &self.fc2_w.data,
            &self.fc2_b,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 16] {
        [
            &mut self.w_i.data,
            &mut self.w_f.data,
            &mut self.w_g.data,
            &mut self.w_o.data,
            &mut self.u_i.data,
            &mut self.u_f.data,
            &mut self.u_g.data,
            &mut self.u_o.data,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_g,
            &mut self.b_o,
            &mut self.fc1_w.data,
            &mut self.fc1_b,
            &mut self.fc2_w.data,
            &mut self.fc2_b,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Parameters plus optimizer moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierState {
    pub config: ClassifierConfig,
    pub params: ClassifierParams,
    pub adam_m: ClassifierParams,
    pub adam_v: ClassifierParams,
    pub step: u64,
}

impl ClassifierState {
    /// Seeded initialization: weights uniform in (-1/sqrt(fan_in),
    /// 1/sqrt(fan_in)), biases zero except the forget gate at +1.
    pub fn init(cfg: &ClassifierConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let mut params = ClassifierParams::zeros(cfg);
        for mat in [
            &mut params.w_i,
            &mut params.w_f,
            &mut params.w_g,
            &mut params.w_o,
            &mut params.u_i,
            &mut params.u_f,
            &mut params.u_g,
            &mut params.u_o,
            &mut params.fc1_w,
            &mut params.fc2_w,
        ] {
            let bound = 1.0 / (mat.cols as f64).sqrt();
            for v in &mut mat.data {
                *v = rng.random_range(-bound..bound);
            }
        }
        params.b_f.iter_mut().for_each(|v| *v = 1.0);
        Ok(Self {
            config: cfg.clone(),
            adam_m: ClassifierParams::zeros(cfg),
            adam_v: ClassifierParams::zeros(cfg),
            params,
            step: 0,
        })
    }

    /// One Adam update from `grads`. Fails if any parameter leaves the
    /// finite range.
    pub fn adam_step(&mut self, grads: &ClassifierParams) -> Result<(), ModelError> {
        self.step += 1;
        let cfg = &self.config;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        let mut finite = true;
        for (m, g) in self.adam_m.slices_mut().into_iter().zip(grads.slices()) {
            for (mv, gv) in m.iter_mut().zip(g.iter()) {
                *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            }
        }
        let vs = self.adam_v.slices_mut();
        for (v, g) in vs.into_iter().zip(grads.slices()) {
            for (vv, gv) in v.iter_mut().zip(g.iter()) {
                *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            }
        }
        let ps = self.params.slices_mut();
        let ms = self.adam_m.slices();
        let vs = self.adam_v.slices();
        for ((p, m), v) in ps.into_iter().zip(ms).zip(vs) {
            for ((pv, mv), vv) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                let m_hat = mv / bc1;
                let v_hat = vv / bc2;
                *pv -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                finite &= pv.is_finite();
            }
        }
        if !finite {
            return Err(ModelError::NonFinite { epoch: 0, batch: 0 });
        }
        Ok(())
    }
}

/// What the classifier exposes per utterance: the max-pooled hidden vector,
/// the first FC layer's pre-activation output (the embedding source), and
/// the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pooled: Vec<f64>,
    pub pre_embedding: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Everything backward needs, kept per frame.
struct ForwardCache {
    gate_i: Vec<Vec<f64>>,
    gate_f: Vec<Vec<f64>>,
    gate_g: Vec<Vec<f64>>,
    gate_o: Vec<Vec<f64>>,
    cell: Vec<Vec<f64>>,
    tanh_cell: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    /// First frame attaining each pooled maximum; gradient routes there.
    pool_argmax: Vec<usize>,
    pre_embedding: Vec<f64>,
    relu: Vec<f64>,
    logits: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Elementwise maximum over frames, plus the first frame index attaining
/// each unit's maximum (where the pooled gradient is routed).
pub fn max_pool(frames: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled = frames[0].clone();
    let mut argmax = vec![0usize; pooled.len()];
    for (t, frame) in frames.iter().enumerate().skip(1) {
        for (j, &v) in frame.iter().enumerate() {
            if v > pooled[j] {
                pooled[j] = v;
                argmax[j] = t;
            }
        }
    }
    (pooled, argmax)
}

fn forward_cache(
    state: &ClassifierState,
    spec: &MelSpectrogram,
) -> Result<ForwardCache, ModelError> {
    let cfg = &state.config;
    if spec.n_bins() != cfg.input_dim {
        return Err(ModelError::ShapeMismatch {
            expected: cfg.input_dim,
            got: spec.n_bins(),
        });
    }
    let p = &state.params;
    let h_dim = cfg.hidden_dim;
    let t_len = spec.n_frames();

    let mut gate_i = Vec::with_capacity(t_len);
    let mut gate_f = Vec::with_capacity(t_len);
    let mut gate_g = Vec::with_capacity(t_len);
    let mut gate_o = Vec::with_capacity(t_len);
    let mut cell = Vec::with_capacity(t_len);
    let mut tanh_cell = Vec::with_capacity(t_len);
    let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(t_len);

    let mut h_prev = vec![0.0; h_dim];
    let mut c_prev = vec![0.0; h_dim];
    for t in 0..t_len {
        let x = spec.frame(t);
        let mut a_i = p.b_i.clone();
        let mut a_f = p.b_f.clone();
        let mut a_g = p.b_g.clone();
        let mut a_o = p.b_o.clone();
        p.w_i.matvec_acc(x, &mut a_i);
        p.w_f.matvec_acc(x, &mut a_f);
        p.w_g.matvec_acc(x, &mut a_g);
        p.w_o.matvec_acc(x, &mut a_o);
        p.u_i.matvec_acc(&h_prev, &mut a_i);
        p.u_f.matvec_acc(&h_prev, &mut a_f);
        p.u_g.matvec_acc(&h_prev, &mut a_g);
        p.u_o.matvec_acc(&h_prev, &mut a_o);

        let i_t: Vec<f64> = a_i.iter().map(|&a| sigmoid(a)).collect();
        let f_t: Vec<f64> = a_f.iter().map(|&a| sigmoid(a)).collect();
        let g_t: Vec<f64> = a_g.iter().map(|&a| a.tanh()).collect();
        let o_t: Vec<f64> = a_o.iter().map(|&a| sigmoid(a)).collect();
        let c_t: Vec<f64> = (0..h_dim)
            .map(|j| f_t[j] * c_prev[j] + i_t[j] * g_t[j])
            .collect();
        let tc_t: Vec<f64> = c_t.iter().map(|&c| c.tanh()).collect();
        let h_t: Vec<f64> = (0..h_dim).map(|j| o_t[j] * tc_t[j]).collect();

        h_prev.clone_from(&h_t);
        c_prev.clone_from(&c_t);
        gate_i.push(i_t);
        gate_f.push(f_t);
        gate_g.push(g_t);
        gate_o.push(o_t);
        cell.push(c_t);
        tanh_cell.push(tc_t);
        hidden.push(h_t);
    }

    let (pooled, pool_argmax) = max_pool(&hidden);

    let mut pre_embedding = p.fc1_b.clone();
    p.fc1_w.matvec_acc(&pooled, &mut pre_embedding);
    let relu: Vec<f64> = pre_embedding.iter().map(|&v| v.max(0.0)).collect();
    let mut logits = p.fc2_b.clone();
    p.fc2_w.matvec_acc(&relu, &mut logits);

    Ok(ForwardCache {
        gate_i,
        gate_f,
        gate_g,
        gate_o,
        cell,
        tanh_cell,
        hidden,
        pooled,
        pool_argmax,
        pre_embedding,
        relu,
        logits,
    })
}

/// Run the classifier on one utterance.
pub fn forward(state: &ClassifierState, spec: &MelSpectrogram) -> Result<ForwardTrace, ModelError> {
    let cache = forward_cache(state, spec)?;
    Ok(ForwardTrace {
        pooled: cache.pooled,
        pre_embedding: cache.pre_embedding,
        logits: cache.logits,
    })
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let log_sum = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&v| v - log_sum).collect()
}

/// Mean softmax cross-entropy over a batch, plus gradients for every
/// parameter via backprop through FC2, ReLU, FC1, the max-pool (gradient to
/// the first frame attaining each maximum), and the unrolled LSTM.
pub fn loss_and_grad(
    state: &ClassifierState,
    batch: &[(&MelSpectrogram, usize)],
) -> Result<(f64, ClassifierParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let cfg = &state.config;
    for &(_, class) in batch {
        if class >= cfg.n_classes {
            return Err(ModelError::ClassOutOfRange {
                class,
                n_classes: cfg.n_classes,
            });
        }
    }

    let weight = 1.0 / batch.len() as f64;
    let mut grads = ClassifierParams::zeros(cfg);
    let mut loss = 0.0;
    for &(spec, class) in batch {
        let cache = forward_cache(state, spec)?;
        let log_probs = log_softmax(&cache.logits);
        loss -= weight * log_probs[class];

        let mut dlogits: Vec<f64> = log_probs.iter().map(|&lp| weight * lp.exp()).collect();
        dlogits[class] -= weight;
        backward(state, spec, &cache, &dlogits, &mut grads);
    }
    Ok((loss, grads))
}

fn backward(
    state: &ClassifierState,
    spec: &MelSpectrogram,
    cache: &ForwardCache,
    dlogits: &[f64],
    grads: &mut ClassifierParams,
) {
    let p = &state.params;
    let h_dim = state.config.hidden_dim;
    let t_len = spec.n_frames();

    // FC2
    grads.fc2_w.add_outer(dlogits, &cache.relu);
    for (b, d) in grads.fc2_b.iter_mut().zip(dlogits) {
        *b += d;
    }
    let mut d_relu = vec![0.0; state.config.embed_dim];
    p.fc2_w.matvec_t_acc(dlogits, &mut d_relu);

    // ReLU (derivative 0 at exactly 0)
    let d_pre: Vec<f64> = d_relu
        .iter()
        .zip(&cache.pre_embedding)
        .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
        .collect();

    // FC1
    grads.fc1_w.add_outer(&d_pre, &cache.pooled);
    for (b, d) in grads.fc1_b.iter_mut().zip(&d_pre) {
        *b += d;
    }
    let mut d_pooled = vec![0.0; h_dim];
    p.fc1_w.matvec_t_acc(&d_pre, &mut d_pooled);

    // BPTT
    let zeros = vec![0.0; h_dim];
    let mut dh_next = vec![0.0; h_dim];
    let mut dc_next = vec![0.0; h_dim];
    let mut da_i = vec![0.0; h_dim];
    let mut da_f = vec![0.0; h_dim];
    let mut da_g = vec![0.0; h_dim];
    let mut da_o = vec![0.0; h_dim];
    for t in (0..t_len).rev() {
        let i_t = &cache.gate_i[t];
        let f_t = &cache.gate_f[t];
        let g_t = &cache.gate_g[t];
        let o_t = &cache.gate_o[t];
        let tc_t = &cache.tanh_cell[t];
        let c_prev = if t > 0 { &cache.cell[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zeros };

        for j in 0..h_dim {
            let pool_grad = if cache.pool_argmax[j] == t {
                d_pooled[j]
            } else {
                0.0
            };
            let dh = pool_grad + dh_next[j];
            let d_o = dh * tc_t[j];
            da_o[j] = d_o * o_t[j] * (1.0 - o_t[j]);
            let dc = dh * o_t[j] * (1.0 - tc_t[j] * tc_t[j]) + dc_next[j];
            let d_i = dc * g_t[j];
            da_i[j] = d_i * i_t[j] * (1.0 - i_t[j]);
            let d_g = dc * i_t[j];
            da_g[j] = d_g * (1.0 - g_t[j] * g_t[j]);
            let d_f = dc * c_prev[j];
            da_f[j] = d_f * f_t[j] * (1.0 - f_t[j]);
            dc_next[j] = dc * f_t[j];
        }

        let x = spec.frame(t);
        grads.w_i.add_outer(&da_i, x);
        grads.w_f.add_outer(&da_f, x);
        grads.w_g.add_outer(&da_g, x);
        grads.w_o.add_outer(&da_o, x);
        grads.u_i.add_outer(&da_i, h_prev);
        grads.u_f.add_outer(&da_f, h_prev);
        grads.u_g.add_outer(&da_g, h_prev);
        grads.u_o.add_outer(&da_o, h_prev);
        for j in 0..h_dim {
            grads.b_i[j] += da_i[j];
            grads.b_f[j] += da_f[j];
            grads.b_g[j] += da_g[j];
            grads.b_o[j] += da_o[j];
        }

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        p.u_i.matvec_t_acc(&da_i, &mut dh_next);
        p.u_f.matvec_t_acc(&da_f, &mut dh_next);
        p.u_g.matvec_t_acc(&da_g, &mut dh_next);
        p.u_o.matvec_t_acc(&da_o, &mut dh_next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::MelSpectrogram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn toy_config() -> ClassifierConfig {
        ClassifierConfig {
            input_dim: 6,
            hidden_dim: 4,
            embed_dim: 3,
            n_classes: 2,
            seed: 11,
            ..ClassifierConfig::new(2)
        }
    }

    fn random_spec(rng: &mut ChaCha20Rng, t: usize, bins: usize) -> MelSpectrogram {
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..bins).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        MelSpectrogram::from_rows(rows, 0.01).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::new(2).validate().is_ok());
        assert!(ClassifierConfig::new(1).validate().is_err());
        let mut cfg = ClassifierConfig::new(2);
        cfg.hidden_dim = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_frame_pooled_equals_hidden_state() {
        let cfg = toy_config();
        let state = ClassifierState::init(&cfg).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let spec = random_spec(&mut rng, 1, cfg.input_dim);
        let cache = forward_cache(&state, &spec).unwrap();
        assert_eq!(cache.pooled, cache.hidden[0]);
        assert!(cache.pool_argmax.iter().all(|&t| t == 0));
    }

    #[test]
    fn max_pool_is_order_invariant_and_idempotent_under_duplication() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let frames: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let (pooled, argmax) = max_pool(&frames);
        // Appending a copy of the frames attaining each maximum changes
        // nothing.
        let mut dup = frames.clone();
        for &t in &argmax {
            dup.push(frames[t].clone());
        }
        let (pooled_dup, _) = max_pool(&dup);
        assert_eq!(pooled, pooled_dup);
        // Any permutation leaves the pooled vector unchanged.
        let perm = vec![
            frames[3].clone(),
            frames[0].clone(),
            frames[4].clone(),
            frames[2].clone(),
            frames[1].clone(),
        ];
        let (pooled_perm, _) = max_pool(&perm);
        assert_eq!(pooled, pooled_perm);
        // Ties route to the first attaining frame.
        let tied = vec![vec![1.0, 0.0], vec![1.0, 0.5], vec![0.0, 0.5]];
        let (_, tie_argmax) = max_pool(&tied);
        assert_eq!(tie_argmax, vec![0, 1]);
    }

    #[test]
    fn zero_parameters_give_bias_logits_and_uniform_loss() {
        let cfg = toy_config();
        let mut state = ClassifierState::init(&cfg).unwrap();
        state.params = ClassifierParams::zeros(&cfg);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let spec = random_spec(&mut rng, 3, cfg.input_dim);
        let trace = forward(&state, &spec).unwrap();
        assert_eq!(trace.logits, state.params.fc2_b);
        let (loss, _) = loss_and_grad(&state, &[(&spec, 0)]).unwrap();
        assert!((loss - (cfg.n_classes as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_has_identical_loss_and_grads() {
        let cfg = toy_config();
        let state = ClassifierState::init(&cfg).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s1 = random_spec(&mut rng, 3, cfg.input_dim);
        let s2 = random_spec(&mut rng, 5, cfg.input_dim);
        let (l1, g1) = loss_and_grad(&state, &[(&s1, 0), (&s2, 1)]).unwrap();
        let (l2, g2) = loss_and_grad(&state, &[(&s1, 0), (&s2, 1), (&s1, 0), (&s2, 1)]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.slices().iter().zip(g2.slices().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_batches() {
        let cfg = toy_config();
        let state = ClassifierState::init(&cfg).unwrap();
        assert!(matches!(
            loss_and_grad(&state, &[]),
            Err(ModelError::EmptyBatch)
        ));
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let spec = random_spec(&mut rng, 2, cfg.input_dim);
        assert!(matches!(
            loss_and_grad(&state, &[(&spec, 2)]),
            Err(ModelError::ClassOutOfRange { class: 2, .. })
        ));
        let wrong = random_spec(&mut rng, 2, cfg.input_dim + 1);
        assert!(matches!(
            forward(&state, &wrong),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }

    /// Central-difference gradient check over every parameter.
    #[test]
    fn gradients_match_finite_differences() {
        let cfg = toy_config();
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        // Re-sample until no ReLU kink or pool near-tie sits within the
        // finite-difference step.
        let (state, specs) = loop {
            let mut cfg_try = cfg.clone();
            cfg_try.seed = rng.random();
            let state = ClassifierState::init(&cfg_try).unwrap();
            let specs: Vec<MelSpectrogram> = (0..2)
                .map(|_| random_spec(&mut rng, 3, cfg.input_dim))
                .collect();
            let mut ok = true;
            for spec in &specs {
                let cache = forward_cache(&state, spec).unwrap();
                if cache.pre_embedding.iter().any(|v| v.abs() < 1e-2) {
                    ok = false;
                }
                for j in 0..cfg.hidden_dim {
                    let mut vals: Vec<f64> = cache.hidden.iter().map(|h| h[j]).collect();
                    vals.sort_by(|a, b| b.total_cmp(a));
                    if vals.len() > 1 && (vals[0] - vals[1]).abs() < 1e-3 {
                        ok = false;
                    }
                }
            }
            if ok {
                break (state, specs);
            }
        };

        let batch: Vec<(&MelSpectrogram, usize)> = specs.iter().zip([0usize, 1]).collect();
        let (_, grads) = loss_and_grad(&state, &batch).unwrap();

        let h = 1e-4;
        let n_tensors = grads.slices().len();
        let mut checked = 0usize;
        let mut failures = 0usize;
        for tensor_idx in 0..n_tensors {
            let len = grads.slices()[tensor_idx].len();
            for k in 0..len {
                let mut plus = state.clone();
                plus.params.slices_mut()[tensor_idx][k] += h;
                let (lp, _) = loss_and_grad(&plus, &batch).unwrap();
                let mut minus = state.clone();
                minus.params.slices_mut()[tensor_idx][k] -= h;
                let (lm, _) = loss_and_grad(&minus, &batch).unwrap();
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.slices()[tensor_idx][k];
                let denom = analytic.abs().max(numeric.abs());
                let ok = (analytic - numeric).abs() <= 1e-3 * denom
                    || (analytic - numeric).abs() <= 1e-7;
                if !ok {
                    failures += 1;
                }
                checked += 1;
            }
        }
        let pass_rate = 1.0 - failures as f64 / checked as f64;
        assert!(
            pass_rate >= 0.99,
            "gradient check pass rate {pass_rate:.4} over {checked} params"
        );
    }
}

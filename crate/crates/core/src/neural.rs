//! The recurrent regression block: model parameters, forward recurrence,
//! backpropagation through time, Adam updates and online training.
//!
//! One model is shared by all targets. It is fine-tuned on each target's
//! state history in turn, which transfers motion learned from one target to
//! the others. Gradients are hand-derived for this architecture rather than
//! produced by a generic autodiff engine.
//!
//! Note the cell-to-hidden map: `h = tanh(o) ⊙ c`, i.e. the squashing is
//! applied to the (already sigmoid-activated) output gate and the cell enters
//! unsquashed. This differs from the textbook `h = o ⊙ tanh(c)` and is kept
//! deliberately; the backward pass matches it.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::math::{self, Matrix};
use crate::types::FilterConfig;
use crate::{FilterError, Result};

/// Half-width of the uniform weight-initialization interval.
pub const WEIGHT_INIT_RANGE: f64 = 0.08;

/// Gate indices within a layer, in canonical order.
pub const GATE_INPUT: usize = 0;
pub const GATE_TRANSFORM: usize = 1;
pub const GATE_FORGET: usize = 2;
pub const GATE_OUTPUT: usize = 3;

/// Weights for one gate: input projection, recurrent projection, bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub w_in: Matrix,
    pub w_rec: Matrix,
    pub bias: Vec<f64>,
}

/// One recurrent layer: four gates in `[input, transform, forget, output]`
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub gates: [Gate; 4],
}

/// All network weights and biases. Doubles as the gradient container, since
/// gradients mirror parameter shapes exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelTuple {
    pub layers: Vec<Layer>,
    /// Output projection, `input_dim × hidden`.
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    input_dim: usize,
    hidden: usize,
}

impl ModelTuple {
    /// All-zero model of the given shape.
    pub fn zeros(input_dim: usize, hidden: usize, num_layers: usize) -> Self {
        let layer = |in_width: usize| Layer {
            gates: [
                Gate {
                    w_in: Matrix::zeros(hidden, in_width),
                    w_rec: Matrix::zeros(hidden, hidden),
                    bias: vec![0.0; hidden],
                },
                Gate {
                    w_in: Matrix::zeros(hidden, in_width),
                    w_rec: Matrix::zeros(hidden, hidden),
                    bias: vec![0.0; hidden],
                },
                Gate {
                    w_in: Matrix::zeros(hidden, in_width),
                    w_rec: Matrix::zeros(hidden, hidden),
                    bias: vec![0.0; hidden],
                },
                Gate {
                    w_in: Matrix::zeros(hidden, in_width),
                    w_rec: Matrix::zeros(hidden, hidden),
                    bias: vec![0.0; hidden],
                },
            ],
        };
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            layers.push(layer(if l == 0 { input_dim } else { hidden }));
        }
        ModelTuple {
            layers,
            w_out: Matrix::zeros(input_dim, hidden),
            b_out: vec![0.0; input_dim],
            input_dim,
            hidden,
        }
    }

    /// Seeded uniform initialization in `[-WEIGHT_INIT_RANGE, +WEIGHT_INIT_RANGE]`.
    pub fn init(input_dim: usize, hidden: usize, num_layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = Self::zeros(input_dim, hidden, num_layers);
        for slice in m.components_mut() {
            for w in slice {
                *w = rng.gen_range(-WEIGHT_INIT_RANGE..=WEIGHT_INIT_RANGE);
            }
        }
        m
    }

    /// Zero model with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden, self.layers.len())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Parameter storage in canonical order: per layer, per gate, `w_in`,
    /// `w_rec`, `bias`; then the output projection and bias.
    pub fn components(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 12 + 2);
        for layer in &self.layers {
            for gate in &layer.gates {
                out.push(gate.w_in.data());
                out.push(gate.w_rec.data());
                out.push(gate.bias.as_slice());
            }
        }
        out.push(self.w_out.data());
        out.push(self.b_out.as_slice());
        out
    }

    pub fn components_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 12 + 2);
        for layer in &mut self.layers {
            for gate in &mut layer.gates {
                out.push(gate.w_in.data_mut());
                out.push(gate.w_rec.data_mut());
                out.push(gate.bias.as_mut_slice());
            }
        }
        out.push(self.w_out.data_mut());
        out.push(self.b_out.as_mut_slice());
        out
    }

    pub fn param_count(&self) -> usize {
        self.components().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.components().iter().all(|s| s.iter().all(|w| w.is_finite()))
    }
}

/// Per-layer hidden and cell vectors; zero at sequence start.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl RecurrentState {
    pub fn zeros(model: &ModelTuple) -> Self {
        RecurrentState {
            h: vec![vec![0.0; model.hidden]; model.layers.len()],
            c: vec![vec![0.0; model.hidden]; model.layers.len()],
        }
    }
}

/// Gate pre-activation: `w_in·x + w_rec·h_prev + bias`.
fn gate_preactivation(gate: &Gate, x: &[f64], h_prev: &[f64], out: &mut [f64]) {
    out.copy_from_slice(&gate.bias);
    gate.w_in.matvec_acc(x, out);
    gate.w_rec.matvec_acc(h_prev, out);
}

/// Advances the recurrence one step and emits the next-state estimate.
///
/// Per layer: `i = σ(·)`, `j = tanh(·)`, `f = σ(·)`, `o = σ(·)`,
/// `c = c_prev ⊙ f + i ⊙ j`, `h = tanh(o) ⊙ c`; the layer input is `x` for
/// layer 1 and the hidden state of the layer below otherwise. The output is
/// the linear readout of the top hidden state.
#[allow(clippy::needless_range_loop)]
pub fn forward_step(
    model: &ModelTuple,
    state: &RecurrentState,
    x: &[f64],
) -> Result<(RecurrentState, Vec<f64>)> {
    if x.len() != model.input_dim {
        return Err(FilterError::DimensionMismatch { expected: model.input_dim, got: x.len() });
    }
    let hidden = model.hidden;
    let mut next = state.clone();
    let mut layer_input = x.to_vec();
    let mut pre = [
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
    ];
    for (l, layer) in model.layers.iter().enumerate() {
        for (g, z) in pre.iter_mut().enumerate() {
            gate_preactivation(&layer.gates[g], &layer_input, &state.h[l], z);
        }
        for k in 0..hidden {
            let i = math::sigmoid(pre[GATE_INPUT][k]);
            let j = math::tanh(pre[GATE_TRANSFORM][k]);
            let f = math::sigmoid(pre[GATE_FORGET][k]);
            let o = math::sigmoid(pre[GATE_OUTPUT][k]);
            let c = state.c[l][k] * f + i * j;
            let h = math::tanh(o) * c;
            if !(c.is_finite() && h.is_finite()) {
                return Err(FilterError::Diverged);
            }
            next.c[l][k] = c;
            next.h[l][k] = h;
        }
        layer_input.clone_from(&next.h[l]);
    }
    let mut output = model.b_out.clone();
    model.w_out.matvec_acc(&next.h[model.layers.len() - 1], &mut output);
    if !output.iter().all(|v| v.is_finite()) {
        return Err(FilterError::Diverged);
    }
    Ok((next, output))
}

/// Runs the recurrence over a whole history from a zero state and returns the
/// estimate following the final row.
pub fn rollout_prediction(model: &ModelTuple, seq: &[Vec<f64>]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(FilterError::InsufficientHistory { needed: 1, got: 0 });
    }
    let mut state = RecurrentState::zeros(model);
    let mut out = Vec::new();
    for row in seq {
        let (next, o) = forward_step(model, &state, row)?;
        state = next;
        out = o;
    }
    Ok(out)
}

/// Mean squared prediction error over a state history: rows `1..S-1` are fed
/// forward and their one-step estimates compared to rows `2..S`; the summed
/// squared norms are divided by `S - 1`.
pub fn sequence_loss(model: &ModelTuple, seq: &[Vec<f64>]) -> Result<f64> {
    if seq.len() < 2 {
        return Err(FilterError::InsufficientHistory { needed: 2, got: seq.len() });
    }
    let mut state = RecurrentState::zeros(model);
    let mut sum = 0.0;
    for tau in 0..seq.len() - 1 {
        let (next, estimate) = forward_step(model, &state, &seq[tau])?;
        state = next;
        sum += math::squared_l2(&estimate, &seq[tau + 1]);
    }
    Ok(sum / (seq.len() - 1) as f64)
}

/// Everything the backward pass needs about one forward step of one layer.
struct LayerCache {
    input: Vec<f64>,
    gates: [Vec<f64>; 4], // activated i, j, f, o
    cell: Vec<f64>,
    hidden: Vec<f64>,
}

struct StepCache {
    layers: Vec<LayerCache>,
    output: Vec<f64>,
}

fn forward_collect(model: &ModelTuple, seq: &[Vec<f64>]) -> Result<Vec<StepCache>> {
    let hidden = model.hidden;
    let num_layers = model.layers.len();
    let mut caches: Vec<StepCache> = Vec::with_capacity(seq.len() - 1);
    let mut state = RecurrentState::zeros(model);
    let mut pre = vec![0.0; hidden];
    for row in &seq[..seq.len() - 1] {
        if row.len() != model.input_dim {
            return Err(FilterError::DimensionMismatch {
                expected: model.input_dim,
                got: row.len(),
            });
        }
        let mut layers = Vec::with_capacity(num_layers);
        let mut layer_input = row.clone();
        for l in 0..num_layers {
            let mut acts: [Vec<f64>; 4] = [
                vec![0.0; hidden],
                vec![0.0; hidden],
                vec![0.0; hidden],
                vec![0.0; hidden],
            ];
            for (g, act) in acts.iter_mut().enumerate() {
                gate_preactivation(&model.layers[l].gates[g], &layer_input, &state.h[l], &mut pre);
                for (a, z) in act.iter_mut().zip(&pre) {
                    *a = if g == GATE_TRANSFORM { math::tanh(*z) } else { math::sigmoid(*z) };
                }
            }
            let mut cell = vec![0.0; hidden];
            let mut h = vec![0.0; hidden];
            for k in 0..hidden {
                cell[k] = state.c[l][k] * acts[GATE_FORGET][k]
                    + acts[GATE_INPUT][k] * acts[GATE_TRANSFORM][k];
                h[k] = math::tanh(acts[GATE_OUTPUT][k]) * cell[k];
            }
            state.c[l].copy_from_slice(&cell);
            state.h[l].copy_from_slice(&h);
            layers.push(LayerCache { input: layer_input, gates: acts, cell, hidden: h.clone() });
            layer_input = h;
        }
        let mut output = model.b_out.clone();
        model.w_out.matvec_acc(&layer_input, &mut output);
        caches.push(StepCache { layers, output });
    }
    Ok(caches)
}

/// Exact reverse-mode gradients of `sequence_loss` (times `loss_scale`) with
/// respect to every parameter.
#[allow(clippy::needless_range_loop)]
fn bptt_scaled(model: &ModelTuple, seq: &[Vec<f64>], loss_scale: f64) -> Result<ModelTuple> {
    if seq.len() < 2 {
        return Err(FilterError::InsufficientHistory { needed: 2, got: seq.len() });
    }
    let caches = forward_collect(model, seq)?;
    let steps = caches.len();
    let hidden = model.hidden;
    let num_layers = model.layers.len();
    let norm = loss_scale / steps as f64;

    let mut grads = model.zeros_like();
    // Gradients flowing into each layer's h and c from the following step.
    let mut dh_next = vec![vec![0.0; hidden]; num_layers];
    let mut dc_next = vec![vec![0.0; hidden]; num_layers];

    for t in (0..steps).rev() {
        let cache = &caches[t];
        // d loss / d estimate, estimate compared against seq[t + 1].
        let d_out: Vec<f64> = cache
            .output
            .iter()
            .zip(&seq[t + 1])
            .map(|(est, tgt)| 2.0 * norm * (est - tgt))
            .collect();
        let top = &cache.layers[num_layers - 1].hidden;
        grads.w_out.add_outer(&d_out, top);
        for (g, d) in grads.b_out.iter_mut().zip(&d_out) {
            *g += d;
        }
        // Gradient w.r.t. the hidden state of the layer below, within step t.
        let mut d_down = vec![0.0; hidden];
        model.w_out.matvec_t_acc(&d_out, &mut d_down);

        for l in (0..num_layers).rev() {
            let lc = &cache.layers[l];
            let (h_prev, c_prev): (&[f64], &[f64]) = if t > 0 {
                (&caches[t - 1].layers[l].hidden, &caches[t - 1].layers[l].cell)
            } else {
                (&[], &[])
            };
            let zero = 0.0;
            let c_prev_at = |k: usize| if t > 0 { c_prev[k] } else { zero };

            let mut dz: [Vec<f64>; 4] = [
                vec![0.0; hidden],
                vec![0.0; hidden],
                vec![0.0; hidden],
                vec![0.0; hidden],
            ];
            let mut dc_prev = vec![0.0; hidden];
            for k in 0..hidden {
                let dh = dh_next[l][k] + d_down[k];
                let i = lc.gates[GATE_INPUT][k];
                let j = lc.gates[GATE_TRANSFORM][k];
                let f = lc.gates[GATE_FORGET][k];
                let o = lc.gates[GATE_OUTPUT][k];
                let to = math::tanh(o);
                // h = tanh(o) ⊙ c
                let dc = dh * to + dc_next[l][k];
                dz[GATE_OUTPUT][k] = dh * lc.cell[k] * (1.0 - to * to) * o * (1.0 - o);
                dz[GATE_INPUT][k] = dc * j * i * (1.0 - i);
                dz[GATE_TRANSFORM][k] = dc * i * (1.0 - j * j);
                dz[GATE_FORGET][k] = dc * c_prev_at(k) * f * (1.0 - f);
                dc_prev[k] = dc * f;
            }

            let mut d_input = vec![0.0; lc.input.len()];
            let mut dh_rec = vec![0.0; hidden];
            for g in 0..4 {
                let gate = &model.layers[l].gates[g];
                let ggrad = &mut grads.layers[l].gates[g];
                ggrad.w_in.add_outer(&dz[g], &lc.input);
                if t > 0 {
                    ggrad.w_rec.add_outer(&dz[g], h_prev);
                }
                for (b, d) in ggrad.bias.iter_mut().zip(&dz[g]) {
                    *b += d;
                }
                gate.w_in.matvec_t_acc(&dz[g], &mut d_input);
                gate.w_rec.matvec_t_acc(&dz[g], &mut dh_rec);
            }
            dh_next[l] = dh_rec;
            dc_next[l] = dc_prev;
            // The layer input is the hidden state of the layer below (same
            // step); at the bottom it is the data row, whose gradient is
            // discarded.
            d_down = d_input;
        }
    }

    if !grads.all_finite() {
        return Err(FilterError::Diverged);
    }
    Ok(grads)
}

/// Gradients of [`sequence_loss`] with respect to every model parameter.
pub fn bptt_gradients(model: &ModelTuple, seq: &[Vec<f64>]) -> Result<ModelTuple> {
    bptt_scaled(model, seq, 1.0)
}

#[cfg(test)]
pub(crate) fn bptt_gradients_scaled(
    model: &ModelTuple,
    seq: &[Vec<f64>],
    loss_scale: f64,
) -> Result<ModelTuple> {
    bptt_scaled(model, seq, loss_scale)
}

/// First and second Adam moment accumulators plus the step counter. Shapes
/// mirror the model they update.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub first: ModelTuple,
    pub second: ModelTuple,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(model: &ModelTuple) -> Self {
        OptimizerState { first: model.zeros_like(), second: model.zeros_like(), step: 0 }
    }
}

/// One Adam update with bias correction.
pub fn adam_step(
    model: &mut ModelTuple,
    opt: &mut OptimizerState,
    grads: &ModelTuple,
    cfg: &FilterConfig,
) {
    opt.step += 1;
    let bc1 = 1.0 - math::powi(cfg.beta1, opt.step as i32);
    let bc2 = 1.0 - math::powi(cfg.beta2, opt.step as i32);
    let params = model.components_mut();
    let gs = grads.components();
    let ms = opt.first.components_mut();
    let vs = opt.second.components_mut();
    debug_assert_eq!(params.len(), gs.len());
    for (((ps, gs), ms), vs) in params.into_iter().zip(gs).zip(ms).zip(vs) {
        debug_assert_eq!(ps.len(), gs.len());
        for (((p, &g), m), v) in ps.iter_mut().zip(gs.iter()).zip(ms.iter_mut()).zip(vs.iter_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.learning_rate * m_hat / (math::sqrt(v_hat) + cfg.adam_epsilon);
        }
    }
}

/// Fine-tunes the model on one target's state history for the given number of
/// epochs (one full-history gradient step per epoch). On divergence the model
/// and optimizer are restored to their pre-call state.
pub fn train_online(
    model: &mut ModelTuple,
    opt: &mut OptimizerState,
    seq: &[Vec<f64>],
    epochs: u32,
    cfg: &FilterConfig,
) -> Result<()> {
    if epochs == 0 {
        return Err(FilterError::InvalidConfig("epochs must be >= 1"));
    }
    if seq.len() < cfg.min_history_for_training {
        return Err(FilterError::InsufficientHistory {
            needed: cfg.min_history_for_training,
            got: seq.len(),
        });
    }
    let model_backup = model.clone();
    let opt_backup = opt.clone();
    for _ in 0..epochs {
        match bptt_gradients(model, seq) {
            Ok(grads) => adam_step(model, opt, &grads, cfg),
            Err(e) => {
                *model = model_backup;
                *opt = opt_backup;
                return Err(e);
            }
        }
    }
    Ok(())
}

/// The shared network, its optimizer state and whether it has ever been
/// trained. `trained` selects between the full initial epoch budget and the
/// cheaper fine-tuning budget.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionModel {
    pub tuple: ModelTuple,
    pub opt: OptimizerState,
    pub trained: bool,
}

impl MotionModel {
    /// Fresh seeded model per the filter configuration.
    pub fn init(cfg: &FilterConfig) -> Self {
        let tuple = ModelTuple::init(cfg.d, cfg.hidden_units, cfg.num_layers, cfg.rng_seed);
        let opt = OptimizerState::new(&tuple);
        MotionModel { tuple, opt, trained: false }
    }

    /// Wraps an already-trained tuple, e.g. one loaded from a checkpoint.
    pub fn from_trained(tuple: ModelTuple) -> Self {
        let opt = OptimizerState::new(&tuple);
        MotionModel { tuple, opt, trained: true }
    }

    /// Epoch budget for the next training call.
    pub fn epoch_budget(&self, cfg: &FilterConfig) -> u32 {
        if self.trained {
            cfg.epochs_finetune
        } else {
            cfg.epochs_init
        }
    }
}

const CHECKPOINT_MAGIC: [u8; 4] = *b"MNET";
const CHECKPOINT_VERSION: u16 = 1;

/// Serializes a model tuple to a versioned flat binary blob: header, shape,
/// then parameters as little-endian `f64` in canonical (row-major) order.
pub fn encode_model(model: &ModelTuple) -> Vec<u8> {
    let params = model.param_count();
    let mut out = Vec::with_capacity(28 + params * 8);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes()); // reserved
    out.extend_from_slice(&(model.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&(model.num_layers() as u32).to_le_bytes());
    out.extend_from_slice(&(params as u64).to_le_bytes());
    for slice in model.components() {
        for w in slice {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

/// Decodes a blob produced by [`encode_model`].
pub fn decode_model(bytes: &[u8]) -> Result<ModelTuple> {
    let err = FilterError::InvalidCheckpoint;
    if bytes.len() < 28 {
        return Err(err("truncated header"));
    }
    if bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(err("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(err("unsupported version"));
    }
    let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let input_dim = read_u32(8);
    let hidden = read_u32(12);
    let num_layers = read_u32(16);
    let params = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
    if input_dim == 0 || hidden == 0 || num_layers == 0 {
        return Err(err("degenerate shape"));
    }
    let mut model = ModelTuple::zeros(input_dim, hidden, num_layers);
    if params != model.param_count() {
        return Err(err("parameter count does not match shape"));
    }
    if bytes.len() != 28 + params * 8 {
        return Err(err("payload length does not match parameter count"));
    }
    let mut at = 28;
    for slice in model.components_mut() {
        for w in slice {
            *w = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            if !w.is_finite() {
                return Err(err("non-finite parameter"));
            }
            at += 8;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> FilterConfig {
        FilterConfig {
            d: 2,
            hidden_units: 3,
            num_layers: 2,
            min_history_for_training: 2,
            ..FilterConfig::default()
        }
    }

    #[test]
    fn zero_model_outputs_output_bias() {
        let m = ModelTuple::zeros(2, 4, 2);
        let s = RecurrentState::zeros(&m);
        let (_, out) = forward_step(&m, &s, &[7.0, -3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        let mut biased = ModelTuple::zeros(2, 4, 2);
        biased.b_out = vec![3.0, -1.0];
        let (_, out) = forward_step(&biased, &s, &[100.0, 100.0]).unwrap();
        assert_eq!(out, vec![3.0, -1.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = ModelTuple::zeros(2, 4, 1);
        let s = RecurrentState::zeros(&m);
        assert!(matches!(
            forward_step(&m, &s, &[1.0]),
            Err(FilterError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn forward_is_deterministic() {
        let m = ModelTuple::init(2, 5, 3, 99);
        let s = RecurrentState::zeros(&m);
        let (s1, o1) = forward_step(&m, &s, &[0.3, -0.4]).unwrap();
        let (s2, o2) = forward_step(&m, &s, &[0.3, -0.4]).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(s1, s2);
    }

    /// Independent scalar-loop evaluation of the recurrence, written against
    /// the equations rather than sharing code with `forward_step`.
    fn naive_forward(m: &ModelTuple, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hid = m.hidden();
        let nl = m.num_layers();
        let mut h = vec![vec![0.0; hid]; nl];
        let mut c = vec![vec![0.0; hid]; nl];
        let mut outputs = Vec::new();
        for row in seq {
            let mut x = row.clone();
            for l in 0..nl {
                let mut new_h = vec![0.0; hid];
                let mut new_c = vec![0.0; hid];
                for k in 0..hid {
                    let mut z = [0.0; 4];
                    for (g, zg) in z.iter_mut().enumerate() {
                        let gate = &m.layers[l].gates[g];
                        let mut acc = gate.bias[k];
                        for (col, &xv) in x.iter().enumerate() {
                            acc += gate.w_in[(k, col)] * xv;
                        }
                        for (col, &hv) in h[l].iter().enumerate() {
                            acc += gate.w_rec[(k, col)] * hv;
                        }
                        *zg = acc;
                    }
                    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
                    let (i, j, f, o) = (sig(z[0]), z[1].tanh(), sig(z[2]), sig(z[3]));
                    new_c[k] = c[l][k] * f + i * j;
                    new_h[k] = o.tanh() * new_c[k];
                }
                h[l] = new_h;
                c[l] = new_c;
                x = h[l].clone();
            }
            let mut out = m.b_out.clone();
            for (r, ov) in out.iter_mut().enumerate() {
                for (col, hv) in h[nl - 1].iter().enumerate() {
                    *ov += m.w_out[(r, col)] * hv;
                }
            }
            outputs.push(out);
        }
        outputs
    }

    #[test]
    fn forward_matches_independent_scalar_evaluation() {
        let m = ModelTuple::init(2, 4, 3, 12345);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let seq: Vec<Vec<f64>> =
            (0..6).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();

        let expected = naive_forward(&m, &seq);
        let mut state = RecurrentState::zeros(&m);
        for (row, want) in seq.iter().zip(&expected) {
            let (next, got) = forward_step(&m, &state, row).unwrap();
            state = next;
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn loss_zero_for_perfectly_predicted_constant() {
        let mut m = ModelTuple::zeros(1, 3, 2);
        m.b_out = vec![4.5];
        let seq = vec![vec![4.5], vec![4.5], vec![4.5]];
        assert_eq!(sequence_loss(&m, &seq).unwrap(), 0.0);
    }

    #[test]
    fn loss_matches_hand_computed_single_term() {
        let m = ModelTuple::zeros(2, 3, 1);
        let seq = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        assert_eq!(sequence_loss(&m, &seq).unwrap(), 25.0);
    }

    #[test]
    fn loss_renormalizes_when_rows_are_appended() {
        // Appending a perfectly predicted row changes only the 1/(S-1) factor.
        let m = ModelTuple::zeros(1, 3, 1);
        let two = sequence_loss(&m, &[vec![1.0], vec![2.0]]).unwrap();
        let three = sequence_loss(&m, &[vec![1.0], vec![2.0], vec![0.0]]).unwrap();
        // Second term predicts 0 for target 0 → contributes nothing; the sum
        // is unchanged but the normalizer doubles.
        assert!((three - two / 2.0).abs() < 1e-15);
    }

    #[test]
    fn loss_requires_two_rows() {
        let m = ModelTuple::zeros(1, 2, 1);
        assert!(matches!(
            sequence_loss(&m, &[vec![1.0]]),
            Err(FilterError::InsufficientHistory { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn gradients_vanish_at_exact_fit() {
        let mut m = ModelTuple::zeros(2, 3, 2);
        m.b_out = vec![1.0, -2.0];
        let seq = vec![vec![1.0, -2.0]; 4];
        let grads = bptt_gradients(&m, &seq).unwrap();
        for slice in grads.components() {
            for g in slice {
                assert!(g.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn doubling_the_loss_doubles_every_gradient() {
        let m = ModelTuple::init(2, 3, 2, 5);
        let seq = vec![vec![0.1, 0.2], vec![0.3, -0.1], vec![0.0, 0.4]];
        let g1 = bptt_gradients(&m, &seq).unwrap();
        let g2 = bptt_gradients_scaled(&m, &seq, 2.0).unwrap();
        for (a, b) in g1.components().iter().zip(g2.components().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((2.0 * x - y).abs() <= 1e-14 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = FilterConfig { learning_rate: 0.001, ..FilterConfig::default() };
        let mut m = ModelTuple::zeros(1, 1, 1);
        let mut opt = OptimizerState::new(&m);
        let mut grads = m.zeros_like();
        grads.b_out[0] = 4.0;
        adam_step(&mut m, &mut opt, &grads, &cfg);
        assert!((m.b_out[0] + 0.001).abs() < 1e-6);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_untouched() {
        let cfg = FilterConfig::default();
        let mut m = ModelTuple::init(2, 3, 1, 3);
        let before = m.clone();
        let mut opt = OptimizerState::new(&m);
        // Seed the moments so decay is observable.
        opt.first.b_out[0] = 1.0;
        opt.second.b_out[0] = 1.0;
        let grads = m.zeros_like();
        adam_step(&mut m, &mut opt, &grads, &cfg);
        // A zero gradient leaves a zero-moment parameter exactly in place...
        assert_eq!(m.layers, before.layers);
        // ...and decays existing moments toward zero.
        assert!((opt.first.b_out[0] - cfg.beta1).abs() < 1e-15);
        assert!((opt.second.b_out[0] - cfg.beta2).abs() < 1e-15);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // 100 steps on f(θ) = θ² from θ = 1: |θ| shrinks monotonically after
        // the first-step warmup.
        let cfg = FilterConfig { learning_rate: 0.01, ..FilterConfig::default() };
        let mut m = ModelTuple::zeros(1, 1, 1);
        m.b_out[0] = 1.0;
        let mut opt = OptimizerState::new(&m);
        let mut prev = 1.0f64;
        for step in 0..100 {
            let mut grads = m.zeros_like();
            grads.b_out[0] = 2.0 * m.b_out[0];
            adam_step(&mut m, &mut opt, &grads, &cfg);
            let cur = m.b_out[0].abs();
            if step > 0 {
                assert!(cur < prev, "step {step}: {cur} !< {prev}");
            }
            prev = cur;
        }
        assert!(prev < 0.5);
    }

    #[test]
    fn training_reduces_loss_on_constant_sequence() {
        let cfg = small_cfg();
        let mut m = ModelTuple::init(2, 3, 2, 11);
        let mut opt = OptimizerState::new(&m);
        let seq = vec![vec![0.4, -0.7]; 6];
        let before = sequence_loss(&m, &seq).unwrap();
        train_online(&mut m, &mut opt, &seq, 50, &cfg).unwrap();
        let after = sequence_loss(&m, &seq).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn training_rejects_zero_epochs_and_short_history() {
        let cfg = small_cfg();
        let mut m = ModelTuple::init(2, 3, 2, 1);
        let mut opt = OptimizerState::new(&m);
        let seq = vec![vec![0.0, 0.0]; 4];
        assert!(matches!(
            train_online(&mut m, &mut opt, &seq, 0, &cfg),
            Err(FilterError::InvalidConfig(_))
        ));
        assert!(matches!(
            train_online(&mut m, &mut opt, &seq[..1], 5, &cfg),
            Err(FilterError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_cfg();
        let seq = vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0], vec![4.0, 5.0]];
        let run = || {
            let mut m = ModelTuple::init(2, 3, 2, 42);
            let mut opt = OptimizerState::new(&m);
            train_online(&mut m, &mut opt, &seq, 25, &cfg).unwrap();
            m
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let m = ModelTuple::init(2, 20, 3, 77);
        let blob = encode_model(&m);
        let back = decode_model(&blob).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let m = ModelTuple::init(2, 4, 2, 8);
        let mut blob = encode_model(&m);
        assert!(decode_model(&blob[..10]).is_err());
        blob[0] = b'X';
        assert!(decode_model(&blob).is_err());
        let mut short = encode_model(&m);
        short.truncate(short.len() - 8);
        assert!(decode_model(&short).is_err());
    }
}

//! One-step state prediction for every target.
//!
//! Each target with enough history fine-tunes the shared model on its own
//! state matrix (train-then-predict), then the recurrence is rolled over the
//! full history and the estimate following the last row becomes the
//! prediction. Targets with short histories, diverged training or implausible
//! network output fall back to persistence (the last observed row).

use alloc::vec::Vec;

use crate::math;
use crate::neural::{rollout_prediction, train_online, MotionModel};
use crate::types::{FilterConfig, TargetSet, TargetTuple};
use crate::Result;

/// A target carried from `t - 1` together with its predicted state for `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedTarget {
    pub base: TargetTuple,
    pub predicted_state: Vec<f64>,
}

/// Counts of prediction paths taken in one frame.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PredictionStats {
    /// Targets whose prediction came from the trained network.
    pub model_predictions: usize,
    /// Persistence fallbacks because the history was too short to train.
    pub short_history_fallbacks: usize,
    /// Persistence fallbacks because the network output failed the
    /// plausibility gate.
    pub gate_fallbacks: usize,
    /// Persistence fallbacks because the network output was non-finite.
    pub nonfinite_fallbacks: usize,
    /// Training calls that aborted on divergence (model rolled back).
    pub training_failures: usize,
}

fn scale_rows(rows: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect()
}

/// Largest one-frame displacement observed in a state history.
fn max_step(rows: &[Vec<f64>]) -> f64 {
    rows.windows(2).map(|w| math::l2_distance(&w[0], &w[1])).fold(0.0, f64::max)
}

/// How far a network estimate may land from the last observed state before
/// it is considered implausible. A surviving target's rows never jump by
/// more than its per-frame motion plus the survival radius, so anything
/// beyond that bound (capped at `g_max`) says more about an undertrained
/// model than about the target.
fn plausibility_gate(rows: &[Vec<f64>], cfg: &FilterConfig) -> f64 {
    (cfg.g_min + max_step(rows)).min(cfg.g_max)
}

/// Predicts the next state of every target, fine-tuning the shared model on
/// each sufficiently long history in ascending `track_id` order.
///
/// The output list is aligned with `targets.targets`. An empty set returns an
/// empty list and leaves the model untouched.
pub fn predict_all(
    targets: &TargetSet,
    model: &mut MotionModel,
    cfg: &FilterConfig,
) -> Result<(Vec<PredictedTarget>, PredictionStats)> {
    let mut stats = PredictionStats::default();
    let mut order: Vec<usize> = (0..targets.targets.len()).collect();
    order.sort_by_key(|&i| targets.targets[i].track_id);

    let mut predictions: Vec<Option<PredictedTarget>> = alloc::vec![None; targets.targets.len()];
    for idx in order {
        let target = &targets.targets[idx];
        let last = target.last_state();
        let mut predicted: Vec<f64> = last.to_vec();

        if target.history_len() >= cfg.min_history_for_training {
            let seq = scale_rows(&target.state_matrix, cfg.input_scale);
            let epochs = model.epoch_budget(cfg);
            match train_online(&mut model.tuple, &mut model.opt, &seq, epochs, cfg) {
                Ok(()) => model.trained = true,
                Err(_) => stats.training_failures += 1,
            }
            match rollout_prediction(&model.tuple, &seq) {
                Ok(raw) => {
                    let estimate: Vec<f64> =
                        raw.iter().map(|v| v * cfg.input_scale).collect();
                    if !estimate.iter().all(|v| v.is_finite()) {
                        stats.nonfinite_fallbacks += 1;
                    } else if math::l2_distance(&estimate, last)
                        > plausibility_gate(&target.state_matrix, cfg)
                    {
                        stats.gate_fallbacks += 1;
                    } else {
                        predicted = estimate;
                        stats.model_predictions += 1;
                    }
                }
                Err(_) => stats.nonfinite_fallbacks += 1,
            }
        } else {
            stats.short_history_fallbacks += 1;
        }

        predictions[idx] =
            Some(PredictedTarget { base: target.clone(), predicted_state: predicted });
    }

    Ok((predictions.into_iter().map(|p| p.expect("every index filled")).collect(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ModelTuple;
    use crate::neural::OptimizerState;

    fn cfg() -> FilterConfig {
        FilterConfig::default()
    }

    fn target(id: u64, rows: &[[f64; 2]]) -> TargetTuple {
        TargetTuple {
            state_matrix: rows.iter().map(|r| r.to_vec()).collect(),
            age: 3,
            genuinity_error: 1.0,
            freeze: false,
            track_id: id,
        }
    }

    #[test]
    fn single_row_history_uses_persistence() {
        let cfg = cfg();
        let set = TargetSet { targets: alloc::vec![target(0, &[[7.0, 7.0]])], time_step: 1 };
        let mut model = MotionModel::init(&cfg);
        let (preds, stats) = predict_all(&set, &mut model, &cfg).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].predicted_state, alloc::vec![7.0, 7.0]);
        assert_eq!(stats.short_history_fallbacks, 1);
        assert!(!model.trained);
    }

    #[test]
    fn empty_set_returns_empty_and_leaves_model_alone() {
        let cfg = cfg();
        let set = TargetSet::empty(0);
        let mut model = MotionModel::init(&cfg);
        let before = model.clone();
        let (preds, _) = predict_all(&set, &mut model, &cfg).unwrap();
        assert!(preds.is_empty());
        assert_eq!(model, before);
    }

    #[test]
    fn frozen_zero_model_predicts_output_bias_within_gate() {
        // A zero model outputs b_out = 0; for histories near the origin that
        // passes the plausibility gate and is used verbatim.
        let cfg = FilterConfig { epochs_init: 1, epochs_finetune: 1, ..cfg() };
        let rows = [[1.0, 1.0], [1.5, 1.0], [2.0, 1.0]];
        let set = TargetSet { targets: alloc::vec![target(0, &rows)], time_step: 1 };
        let tuple = ModelTuple::zeros(2, 4, 1);
        let mut model = MotionModel {
            opt: OptimizerState::new(&tuple),
            tuple,
            trained: true,
        };
        // Disable learning noise: one epoch on an already-zero model barely
        // moves the output, so the prediction stays near b_out.
        let (preds, stats) = predict_all(&set, &mut model, &cfg).unwrap();
        assert_eq!(stats.model_predictions, 1);
        let p = &preds[0].predicted_state;
        assert!(math::l2_distance(p, &[0.0, 0.0]) < 1.0, "{p:?}");
    }

    #[test]
    fn implausible_network_output_falls_back_to_persistence() {
        // Far from the origin a cold model's near-zero output is gated off.
        let cfg = FilterConfig { epochs_init: 1, epochs_finetune: 1, ..cfg() };
        let rows = [[500.0, 300.0], [505.0, 300.0], [510.0, 300.0]];
        let set = TargetSet { targets: alloc::vec![target(0, &rows)], time_step: 1 };
        let mut model = MotionModel::init(&cfg);
        let (preds, stats) = predict_all(&set, &mut model, &cfg).unwrap();
        assert_eq!(stats.gate_fallbacks, 1);
        assert_eq!(preds[0].predicted_state, alloc::vec![510.0, 300.0]);
    }

    #[test]
    fn input_scaling_commutes_with_coordinate_scaling() {
        // Training on coordinates scaled by s with input_scale = s must match
        // the unscaled run exactly, up to the final multiply-back.
        let scale = 250.0;
        let rows: Vec<[f64; 2]> = (0..6).map(|i| [0.002 * i as f64, 0.001]).collect();
        let scaled_rows: Vec<[f64; 2]> =
            rows.iter().map(|r| [r[0] * scale, r[1] * scale]).collect();

        let base = FilterConfig { epochs_init: 5, epochs_finetune: 5, ..cfg() };
        let run = |rows: &[[f64; 2]], input_scale: f64| {
            let cfg = FilterConfig { input_scale, ..base.clone() };
            let set = TargetSet { targets: alloc::vec![target(0, rows)], time_step: 1 };
            let mut model = MotionModel::init(&cfg);
            let (preds, _) = predict_all(&set, &mut model, &cfg).unwrap();
            preds[0].predicted_state.clone()
        };
        let unscaled = run(&rows, 1.0);
        let scaled = run(&scaled_rows, scale);
        for (a, b) in unscaled.iter().zip(&scaled) {
            assert!((a * scale - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn prediction_list_matches_input_cardinality_and_order() {
        let cfg = cfg();
        let set = TargetSet {
            targets: alloc::vec![
                target(5, &[[1.0, 0.0]]),
                target(2, &[[2.0, 0.0]]),
                target(9, &[[3.0, 0.0]]),
            ],
            time_step: 4,
        };
        let mut model = MotionModel::init(&cfg);
        let (preds, _) = predict_all(&set, &mut model, &cfg).unwrap();
        assert_eq!(preds.len(), 3);
        for (p, t) in preds.iter().zip(&set.targets) {
            assert_eq!(p.base.track_id, t.track_id);
        }
    }
}

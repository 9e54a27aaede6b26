//! End-to-end learning behaviour of the trainer: straight-line motion is
//! extrapolable after training, and transferred weights start ahead of a
//! fresh initialization.

use mtfilter_core::math::l2_distance;
use mtfilter_core::neural::{
    rollout_prediction, sequence_loss, train_online, ModelTuple, OptimizerState,
};
use mtfilter_core::types::FilterConfig;

fn trainer_cfg() -> FilterConfig {
    // A faster rate than the online default so 50 epochs are meaningful on a
    // single short sequence.
    FilterConfig { learning_rate: 0.05, ..FilterConfig::default() }
}

fn line(rows: usize, step: [f64; 2], start: [f64; 2]) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|i| vec![start[0] + i as f64 * step[0], start[1] + i as f64 * step[1]])
        .collect()
}

#[test]
fn linear_motion_is_learnable_on_most_seeds() {
    let cfg = trainer_cfg();
    let seq = line(10, [1.0, 0.0], [0.0, 0.0]); // (0,0), (1,0), ..., (9,0)
    let mut hits = 0;
    for seed in 0..5u64 {
        let mut model = ModelTuple::init(2, cfg.hidden_units, cfg.num_layers, seed);
        let mut opt = OptimizerState::new(&model);
        train_online(&mut model, &mut opt, &seq, 50, &cfg).unwrap();
        let pred = rollout_prediction(&model, &seq).unwrap();
        let err = l2_distance(&pred, &[10.0, 0.0]);
        println!("seed {seed}: predicted {pred:?}, error {err:.3}");
        if err < 0.5 {
            hits += 1;
        }
    }
    assert!(hits >= 3, "only {hits}/5 seeds extrapolated the line");
}

#[test]
fn transferred_weights_start_no_worse_than_fresh_ones() {
    let cfg = trainer_cfg();
    // Constant-velocity fixture the models are scored on.
    let eval_seq = line(8, [2.0, 1.0], [3.0, -2.0]);
    // A different trajectory with the same motion, as the transfer source.
    let source_seq = line(8, [2.0, 1.0], [-5.0, 4.0]);

    let mut fresh_total = 0.0;
    let mut transferred_total = 0.0;
    for seed in 0..10u64 {
        let fresh = ModelTuple::init(2, cfg.hidden_units, cfg.num_layers, seed);
        fresh_total += sequence_loss(&fresh, &eval_seq).unwrap();

        let mut donor = ModelTuple::init(2, cfg.hidden_units, cfg.num_layers, seed);
        let mut opt = OptimizerState::new(&donor);
        train_online(&mut donor, &mut opt, &source_seq, 50, &cfg).unwrap();
        transferred_total += sequence_loss(&donor, &eval_seq).unwrap();
    }
    let fresh_mean = fresh_total / 10.0;
    let transferred_mean = transferred_total / 10.0;
    println!("first-epoch loss: fresh {fresh_mean:.3}, transferred {transferred_mean:.3}");
    assert!(
        transferred_mean <= fresh_mean,
        "transfer should not start behind a random init: {transferred_mean} > {fresh_mean}"
    );
}

//! Randomized checks of the association pass invariants: the partition
//! covers every input target exactly once, births carry their fixed
//! literals, survivors adopt real measurements bitwise, the case loops stay
//! linear, and distinct-distance instances are order-independent.

use mtfilter_core::association::{associate, AssociationOutcome, TrackIdGen};
use mtfilter_core::predictor::PredictedTarget;
use mtfilter_core::types::{FilterConfig, MeasurementFrame, TargetTuple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn fuzz_cfg() -> FilterConfig {
    FilterConfig { a_min: 2, g_min: 5.0, g_max: 20.0, ..FilterConfig::default() }
}

fn random_instance(
    rng: &mut ChaCha12Rng,
    max_side: usize,
) -> (Vec<PredictedTarget>, MeasurementFrame) {
    let m = rng.gen_range(0..=max_side);
    let n = rng.gen_range(0..=max_side);
    let preds = (0..m)
        .map(|i| {
            let pos = vec![rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)];
            PredictedTarget {
                base: TargetTuple {
                    state_matrix: vec![pos.clone()],
                    age: rng.gen_range(-1..6),
                    genuinity_error: rng.gen_range(0.0..10.0),
                    freeze: rng.gen_bool(0.3),
                    track_id: i as u64,
                },
                predicted_state: pos,
            }
        })
        .collect();
    let points =
        (0..n).map(|_| vec![rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)]).collect();
    (preds, MeasurementFrame::new(1, points))
}

fn assert_partition(out: &AssociationOutcome, preds: &[PredictedTarget], cfg: &FilterConfig) {
    let m = preds.len();
    assert_eq!(out.survived.len() + out.decayed.len() + out.dead.len(), m);

    let mut seen: Vec<u64> = out
        .survived
        .iter()
        .chain(&out.decayed)
        .map(|t| t.track_id)
        .chain(out.dead.iter().copied())
        .collect();
    seen.sort_unstable();
    let mut expected: Vec<u64> = preds.iter().map(|p| p.base.track_id).collect();
    expected.sort_unstable();
    assert_eq!(seen, expected, "each input target lands in exactly one bucket");

    for b in &out.born {
        assert_eq!(b.age, cfg.a_min);
        assert_eq!(b.genuinity_error, cfg.g_min);
        assert!(!b.freeze);
        assert_eq!(b.history_len(), 1);
    }
}

#[test]
fn partition_and_birth_literals_hold_on_random_instances() {
    let cfg = fuzz_cfg();
    let mut rng = ChaCha12Rng::seed_from_u64(31337);
    for _ in 0..1000 {
        let (preds, frame) = random_instance(&mut rng, 50);
        let mut ids = TrackIdGen::new(1000);
        let out = associate(&preds, &frame, &cfg, &mut ids).unwrap();
        assert_partition(&out, &preds, &cfg);
    }
}

#[test]
fn survivors_adopt_frame_measurements_bitwise() {
    let cfg = fuzz_cfg();
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    let mut survivors_seen = 0;
    for _ in 0..300 {
        let (preds, frame) = random_instance(&mut rng, 30);
        let out = associate(&preds, &frame, &cfg, &mut TrackIdGen::new(0)).unwrap();
        for s in &out.survived {
            assert!(
                frame.points.iter().any(|z| z.as_slice() == s.last_state()),
                "appended row must be one of the frame's measurements, bit for bit"
            );
            survivors_seen += 1;
        }
    }
    assert!(survivors_seen > 50, "fuzz should actually exercise survivals");
}

#[test]
fn case_loops_are_linear_in_targets_plus_measurements() {
    let cfg = fuzz_cfg();
    let mut rng = ChaCha12Rng::seed_from_u64(90210);
    for _ in 0..200 {
        let (preds, frame) = random_instance(&mut rng, 40);
        let (m, n) = (preds.len(), frame.len());
        let out = associate(&preds, &frame, &cfg, &mut TrackIdGen::new(0)).unwrap();
        assert_eq!(out.diagnostics.case_loop_ops, (m + n) as u64);
        assert_eq!(out.diagnostics.distance_evals, (m * n) as u64);
    }
}

#[test]
fn outcomes_ignore_measurement_order_when_distances_are_distinct() {
    let cfg = fuzz_cfg();
    let mut rng = ChaCha12Rng::seed_from_u64(555);
    for _ in 0..200 {
        let (preds, frame) = random_instance(&mut rng, 12);
        let out = associate(&preds, &frame, &cfg, &mut TrackIdGen::new(100)).unwrap();

        // Reverse the measurement order (random reals are distinct with
        // probability one, so argmins cannot flip on ties).
        let mut reversed = frame.points.clone();
        reversed.reverse();
        let out_rev = associate(
            &preds,
            &MeasurementFrame::new(1, reversed),
            &cfg,
            &mut TrackIdGen::new(100),
        )
        .unwrap();

        let key = |ts: &[TargetTuple]| {
            let mut v: Vec<(u64, Vec<Vec<f64>>, i64, bool)> = ts
                .iter()
                .map(|t| (t.track_id, t.state_matrix.clone(), t.age, t.freeze))
                .collect();
            v.sort_by_key(|e| e.0);
            v
        };
        assert_eq!(key(&out.survived), key(&out_rev.survived));
        assert_eq!(key(&out.decayed), key(&out_rev.decayed));
        let sorted = |mut v: Vec<u64>| {
            v.sort_unstable();
            v
        };
        assert_eq!(sorted(out.dead.clone()), sorted(out_rev.dead.clone()));

        let born_rows = |out: &AssociationOutcome| {
            let mut rows: Vec<Vec<f64>> =
                out.born.iter().map(|b| b.state_matrix[0].clone()).collect();
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rows
        };
        assert_eq!(born_rows(&out), born_rows(&out_rev));
    }
}

//! Histogram-based data association and the per-frame filter step.
//!
//! Association builds the targetness matrix (all prediction-to-measurement
//! distances), reduces it to per-row/per-column argmin and min vectors plus
//! two association histograms, and then classifies every target and
//! measurement in two independent linear passes:
//!
//! * Case 1 (decay): no measurement claims the target and it is old enough,
//!   or its nearest measurement lies in the ambiguous `[g_min, g_max]` band.
//!   The prediction is appended, age drops, the target freezes.
//! * Case 2 (survival): at least one measurement claims the target and its
//!   nearest measurement is closer than `g_min`. That measurement is
//!   appended, age rises, the freeze clears.
//! * Case 3 (birth): a measurement claimed by no target, or whose nearest
//!   target is farther than `g_max`, spawns a fresh target.
//!
//! Targets matching no case are dropped; the `dead` list makes that implicit
//! omission observable. The case loops touch each target and measurement
//! exactly once, so classification is linear in `M + N` on top of the
//! `M × N` matrix construction.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::neural::MotionModel;
use crate::predictor::{predict_all, PredictedTarget, PredictionStats};
use crate::types::{FilterConfig, MeasurementFrame, TargetSet, TargetTuple};
use crate::{FilterError, Result};

/// Targetness matrix entries above this count are omitted from exported
/// diagnostics; the vectors and histograms are always included.
pub const DIAGNOSTIC_MATRIX_LIMIT: usize = 100;

/// Dense matrix of prediction-to-measurement distances; rows are
/// measurements, columns are targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetnessMatrix {
    num_measurements: usize,
    num_targets: usize,
    data: Vec<f64>,
}

impl TargetnessMatrix {
    pub fn num_measurements(&self) -> usize {
        self.num_measurements
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    /// Distance between measurement `k_meas` and predicted target `k_target`.
    #[inline]
    pub fn get(&self, k_meas: usize, k_target: usize) -> f64 {
        self.data[k_meas * self.num_targets + k_target]
    }

    /// Rows as plain vectors, for diagnostics export.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_measurements)
            .map(|r| self.data[r * self.num_targets..(r + 1) * self.num_targets].to_vec())
            .collect()
    }
}

/// Computes the full distance matrix between measurements and predictions.
/// No gating is applied. Either side may be empty.
pub fn targetness_matrix(
    preds: &[PredictedTarget],
    frame: &MeasurementFrame,
) -> Result<TargetnessMatrix> {
    let dim = preds
        .first()
        .map(|p| p.predicted_state.len())
        .or_else(|| frame.points.first().map(Vec::len));
    if let Some(d) = dim {
        for p in preds {
            if p.predicted_state.len() != d {
                return Err(FilterError::DimensionMismatch {
                    expected: d,
                    got: p.predicted_state.len(),
                });
            }
        }
        for z in &frame.points {
            if z.len() != d {
                return Err(FilterError::DimensionMismatch { expected: d, got: z.len() });
            }
        }
    }
    let (n, m) = (frame.points.len(), preds.len());
    let mut data = Vec::with_capacity(n * m);
    for z in &frame.points {
        for p in preds {
            data.push(math::l2_distance(z, &p.predicted_state));
        }
    }
    Ok(TargetnessMatrix { num_measurements: n, num_targets: m, data })
}

/// Row- and column-wise argmin/min of the targetness matrix.
///
/// Ties break toward the lowest index. Over an empty axis the minimum is
/// `+∞` and the argmin is `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosestStats {
    /// Per measurement: index of the closest target (the C^I vector).
    pub meas_closest_target: Vec<Option<usize>>,
    /// Per measurement: distance to the closest target (the C vector).
    pub meas_closest_dist: Vec<f64>,
    /// Per target: index of the closest measurement (the R^I vector).
    pub target_closest_meas: Vec<Option<usize>>,
    /// Per target: distance to the closest measurement (the R vector).
    pub target_closest_dist: Vec<f64>,
}

pub fn closest_indices(t: &TargetnessMatrix) -> ClosestStats {
    let (n, m) = (t.num_measurements, t.num_targets);
    let mut meas_closest_target = vec![None; n];
    let mut meas_closest_dist = vec![f64::INFINITY; n];
    let mut target_closest_meas = vec![None; m];
    let mut target_closest_dist = vec![f64::INFINITY; m];
    for k_meas in 0..n {
        for k_target in 0..m {
            let d = t.get(k_meas, k_target);
            if d < meas_closest_dist[k_meas] {
                meas_closest_dist[k_meas] = d;
                meas_closest_target[k_meas] = Some(k_target);
            }
            if d < target_closest_dist[k_target] {
                target_closest_dist[k_target] = d;
                target_closest_meas[k_target] = Some(k_meas);
            }
        }
    }
    ClosestStats { meas_closest_target, meas_closest_dist, target_closest_meas, target_closest_dist }
}

/// Histograms of the argmin vectors: how many measurements picked each target
/// (length `num_targets`) and how many targets picked each measurement
/// (length `num_measurements`). `None` entries contribute nothing.
pub fn association_histograms(
    meas_closest_target: &[Option<usize>],
    target_closest_meas: &[Option<usize>],
    num_targets: usize,
    num_measurements: usize,
) -> (Vec<u32>, Vec<u32>) {
    let mut hist_targets = vec![0u32; num_targets];
    for idx in meas_closest_target.iter().flatten() {
        hist_targets[*idx] += 1;
    }
    let mut hist_measurements = vec![0u32; num_measurements];
    for idx in target_closest_meas.iter().flatten() {
        hist_measurements[*idx] += 1;
    }
    (hist_targets, hist_measurements)
}

/// Monotone track-id source owned by the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackIdGen {
    next: u64,
}

impl TrackIdGen {
    pub fn new(start: u64) -> Self {
        TrackIdGen { next: start }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// Association vectors, histograms and instrumentation for one frame.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssociationDiagnostics {
    pub meas_closest_target: Vec<Option<usize>>,
    pub meas_closest_dist: Vec<f64>,
    pub target_closest_meas: Vec<Option<usize>>,
    pub target_closest_dist: Vec<f64>,
    pub hist_targets: Vec<u32>,
    pub hist_measurements: Vec<u32>,
    /// Distance evaluations while building the targetness matrix (`M · N`).
    pub distance_evals: u64,
    /// Iterations of the two case-classification loops (`M + N`); the
    /// per-iteration work is bounded by the state-matrix cap.
    pub case_loop_ops: u64,
    /// The full matrix, when no larger than [`DIAGNOSTIC_MATRIX_LIMIT`].
    pub targetness: Option<Vec<Vec<f64>>>,
}

/// The partition produced by one association pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationOutcome {
    /// Case 2: targets updated with an associated measurement.
    pub survived: Vec<TargetTuple>,
    /// Case 1: targets coasting on their own prediction.
    pub decayed: Vec<TargetTuple>,
    /// Case 3: fresh targets born from unassociated measurements.
    pub born: Vec<TargetTuple>,
    /// Track ids of targets matching no case, dropped from the next set.
    pub dead: Vec<u64>,
    pub diagnostics: AssociationDiagnostics,
}

/// Classifies every target and measurement against the frame.
pub fn associate(
    preds: &[PredictedTarget],
    frame: &MeasurementFrame,
    cfg: &FilterConfig,
    ids: &mut TrackIdGen,
) -> Result<AssociationOutcome> {
    let matrix = targetness_matrix(preds, frame)?;
    let stats = closest_indices(&matrix);
    let (hist_targets, hist_measurements) = association_histograms(
        &stats.meas_closest_target,
        &stats.target_closest_meas,
        matrix.num_targets(),
        matrix.num_measurements(),
    );

    let mut survived = Vec::new();
    let mut decayed = Vec::new();
    let mut born = Vec::new();
    let mut dead = Vec::new();
    let mut case_loop_ops = 0u64;

    for (k, pred) in preds.iter().enumerate() {
        case_loop_ops += 1;
        let assoc_count = hist_targets[k];
        let nearest = stats.target_closest_dist[k];
        let age = pred.base.age;
        if (assoc_count == 0 && age >= cfg.a_min)
            || (assoc_count >= 1 && nearest >= cfg.g_min && nearest <= cfg.g_max)
        {
            // Case 1: coast on the prediction.
            let mut t = pred.base.append_state(&pred.predicted_state, cfg)?;
            t.age -= 1;
            if nearest.is_finite() {
                t.genuinity_error = nearest;
            }
            t.freeze = true;
            decayed.push(t);
        } else if assoc_count >= 1 && nearest < cfg.g_min {
            // Case 2: adopt the closest measurement.
            let z_idx = stats.target_closest_meas[k].expect("finite nearest implies a measurement");
            let mut t = pred.base.append_state(&frame.points[z_idx], cfg)?;
            t.age += 1;
            t.genuinity_error = nearest;
            t.freeze = false;
            survived.push(t);
        } else {
            dead.push(pred.base.track_id);
        }
    }

    for (k_meas, z) in frame.points.iter().enumerate() {
        case_loop_ops += 1;
        if hist_measurements[k_meas] == 0 || stats.meas_closest_dist[k_meas] > cfg.g_max {
            // Case 3: isolated measurement becomes a newborn target.
            born.push(TargetTuple::birth(z, cfg, ids.next_id())?);
        }
    }

    let diagnostics = AssociationDiagnostics {
        targetness: if matrix.data.len() <= DIAGNOSTIC_MATRIX_LIMIT {
            Some(matrix.to_rows())
        } else {
            None
        },
        distance_evals: matrix.data.len() as u64,
        case_loop_ops,
        meas_closest_target: stats.meas_closest_target,
        meas_closest_dist: stats.meas_closest_dist,
        target_closest_meas: stats.target_closest_meas,
        target_closest_dist: stats.target_closest_dist,
        hist_targets,
        hist_measurements,
    };

    Ok(AssociationOutcome { survived, decayed, born, dead, diagnostics })
}

/// Per-frame pipeline telemetry.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StepDiagnostics {
    pub time_step: u64,
    pub births: usize,
    pub deaths: usize,
    pub decays: usize,
    pub survivals: usize,
    pub prediction: PredictionStats,
    pub association: AssociationDiagnostics,
}

/// Advances the filter one frame: predict every target, associate against the
/// measurements, and form the next target set as survivors ∪ decays ∪ births.
pub fn step(
    targets: &TargetSet,
    frame: &MeasurementFrame,
    model: &mut MotionModel,
    cfg: &FilterConfig,
    ids: &mut TrackIdGen,
) -> Result<(TargetSet, StepDiagnostics)> {
    if frame.time_step != targets.time_step + 1 {
        return Err(FilterError::TimeStepMismatch {
            expected: targets.time_step + 1,
            got: frame.time_step,
        });
    }
    let (preds, prediction) = predict_all(targets, model, cfg)?;
    let outcome = associate(&preds, frame, cfg, ids)?;

    let diagnostics = StepDiagnostics {
        time_step: frame.time_step,
        births: outcome.born.len(),
        deaths: outcome.dead.len(),
        decays: outcome.decayed.len(),
        survivals: outcome.survived.len(),
        prediction,
        association: outcome.diagnostics,
    };

    let mut targets: Vec<TargetTuple> = outcome.survived;
    targets.extend(outcome.decayed);
    targets.extend(outcome.born);
    targets.sort_by_key(|t| t.track_id);
    Ok((TargetSet { targets, time_step: frame.time_step }, diagnostics))
}

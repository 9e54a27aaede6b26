//! Target, measurement and configuration types shared by every other module.

use alloc::vec::Vec;

use crate::{FilterError, Result};

/// One tracked target: a bounded window of recent state vectors plus the
/// bookkeeping fields used by the association pass.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetTuple {
    /// Recent state rows, oldest first. Never empty, never longer than
    /// `max_batch_size`. Rows mix associated measurements and coasted
    /// predictions.
    pub state_matrix: Vec<Vec<f64>>,
    /// Frames survived; incremented on association, decremented while
    /// coasting. May go negative.
    pub age: i64,
    /// Distance to the most recently associated measurement. Large values
    /// suggest the target is a false positive.
    pub genuinity_error: f64,
    /// True when the target received no usable measurement this frame and
    /// coasted on its own prediction.
    pub freeze: bool,
    /// Stable identifier assigned at birth.
    pub track_id: u64,
}

impl TargetTuple {
    /// Creates a newborn target from a single unassociated measurement.
    pub fn birth(z: &[f64], cfg: &FilterConfig, id: u64) -> Result<Self> {
        if z.len() != cfg.d {
            return Err(FilterError::DimensionMismatch { expected: cfg.d, got: z.len() });
        }
        Ok(TargetTuple {
            state_matrix: alloc::vec![z.to_vec()],
            age: cfg.a_min,
            genuinity_error: cfg.g_min,
            freeze: false,
            track_id: id,
        })
    }

    /// Returns a copy with `row` appended; when the history would exceed
    /// `max_batch_size`, the oldest rows are dropped from the front.
    pub fn append_state(&self, row: &[f64], cfg: &FilterConfig) -> Result<Self> {
        if row.len() != cfg.d {
            return Err(FilterError::DimensionMismatch { expected: cfg.d, got: row.len() });
        }
        let mut next = self.clone();
        next.state_matrix.push(row.to_vec());
        while next.state_matrix.len() > cfg.max_batch_size {
            next.state_matrix.remove(0);
        }
        Ok(next)
    }

    /// Number of stored state rows.
    pub fn history_len(&self) -> usize {
        self.state_matrix.len()
    }

    /// The most recent state row.
    pub fn last_state(&self) -> &[f64] {
        self.state_matrix.last().expect("state matrix is never empty")
    }

    /// Whether the target belongs in the reported estimate set. A
    /// measurement-backed target needs at least two survivals past its birth
    /// age, which screens out the one-hit clutter chains that dominate dense
    /// frames. A coasting target is held to a stricter standard: twice the
    /// maturity, and a genuinity error still inside the association band, so
    /// that an established track survives a missed detection while dead
    /// tracks and short clutter chains drop out of the report.
    pub fn is_confirmed(&self, cfg: &FilterConfig) -> bool {
        if self.freeze {
            self.age > 2 * cfg.a_min && self.genuinity_error <= cfg.g_max
        } else {
            self.age > cfg.a_min + 1
        }
    }
}

/// The set of live targets at one time step, kept sorted by `track_id`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TargetSet {
    pub targets: Vec<TargetTuple>,
    pub time_step: u64,
}

impl TargetSet {
    pub fn empty(time_step: u64) -> Self {
        TargetSet { targets: Vec::new(), time_step }
    }

    pub fn cardinality(&self) -> usize {
        self.targets.len()
    }

    /// Positions of confirmed targets, i.e. the filter output for this frame.
    pub fn confirmed_positions(&self, cfg: &FilterConfig) -> Vec<Vec<f64>> {
        self.targets
            .iter()
            .filter(|t| t.is_confirmed(cfg))
            .map(|t| t.last_state().to_vec())
            .collect()
    }
}

/// The measurement set for one time step: detections and clutter, unordered.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFrame {
    pub points: Vec<Vec<f64>>,
    pub time_step: u64,
}

impl MeasurementFrame {
    pub fn new(time_step: u64, points: Vec<Vec<f64>>) -> Self {
        MeasurementFrame { points, time_step }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Filter and trainer hyperparameters.
///
/// Defaults target the synthetic range-bearing scenario; see the field docs
/// for the knobs worth retuning on other data.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FilterConfig {
    /// State-space dimension.
    pub d: usize,
    /// Birth age; targets above it count as mature.
    pub a_min: i64,
    /// Below this prediction-to-measurement distance a target survives.
    pub g_min: f64,
    /// Beyond this distance an association is discarded entirely.
    pub g_max: f64,
    /// Maximum rows kept in a target's state matrix.
    pub max_batch_size: usize,
    /// Minimum history length before the network trains on a target;
    /// shorter histories fall back to a persistence prediction.
    pub min_history_for_training: usize,
    /// Epochs for the first-ever training of the shared model.
    pub epochs_init: u32,
    /// Epochs for per-target fine-tuning once the model has been trained.
    pub epochs_finetune: u32,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Hidden units per recurrent layer.
    pub hidden_units: usize,
    /// Number of recurrent layers.
    pub num_layers: usize,
    /// OSPA order.
    pub ospa_p: f64,
    /// OSPA cutoff.
    pub ospa_c: f64,
    /// Seed for weight initialization.
    pub rng_seed: u64,
    /// State coordinates are divided by this before entering the network and
    /// predictions multiplied back. The default 1.0 leaves coordinates raw;
    /// set to the scene scale to normalize training inputs.
    pub input_scale: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            d: 2,
            a_min: 3,
            g_min: 35.0,
            g_max: 50.0,
            max_batch_size: 10,
            min_history_for_training: 3,
            epochs_init: 50,
            epochs_finetune: 20,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.99,
            adam_epsilon: 1e-8,
            hidden_units: 20,
            num_layers: 3,
            ospa_p: 1.0,
            ospa_c: 100.0,
            rng_seed: 1,
            input_scale: 1.0,
        }
    }
}

impl FilterConfig {
    // Negated comparisons so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(FilterError::InvalidConfig("d must be >= 1"));
        }
        if self.a_min < 0 {
            return Err(FilterError::InvalidConfig("a_min must be >= 0"));
        }
        if !(self.g_min > 0.0 && self.g_max > self.g_min) {
            return Err(FilterError::InvalidConfig("need 0 < g_min < g_max"));
        }
        if self.max_batch_size < 2 {
            return Err(FilterError::InvalidConfig("max_batch_size must be >= 2"));
        }
        if self.min_history_for_training < 2 {
            return Err(FilterError::InvalidConfig("min_history_for_training must be >= 2"));
        }
        if self.epochs_init < 1 || self.epochs_finetune < 1 {
            return Err(FilterError::InvalidConfig("epochs must be >= 1"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(FilterError::InvalidConfig("beta1 and beta2 must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(FilterError::InvalidConfig("learning_rate must be > 0"));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(FilterError::InvalidConfig("adam_epsilon must be > 0"));
        }
        if self.hidden_units == 0 || self.num_layers == 0 {
            return Err(FilterError::InvalidConfig("network must have layers and hidden units"));
        }
        if !(self.ospa_p >= 1.0) {
            return Err(FilterError::InvalidConfig("ospa_p must be >= 1"));
        }
        if !(self.ospa_c > 0.0) {
            return Err(FilterError::InvalidConfig("ospa_c must be > 0"));
        }
        if !(self.input_scale > 0.0) {
            return Err(FilterError::InvalidConfig("input_scale must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FilterConfig {
        FilterConfig { a_min: 1, g_min: 1.0, ..FilterConfig::default() }
    }

    #[test]
    fn birth_uses_case_three_literals() {
        let cfg = cfg();
        let t = TargetTuple::birth(&[5.0, 5.0], &cfg, 9).unwrap();
        assert_eq!(t.state_matrix, alloc::vec![alloc::vec![5.0, 5.0]]);
        assert_eq!(t.age, 1);
        assert_eq!(t.genuinity_error, 1.0);
        assert!(!t.freeze);
        assert_eq!(t.track_id, 9);

        let origin = TargetTuple::birth(&[0.0, 0.0], &cfg, 0).unwrap();
        assert_eq!(origin.state_matrix, alloc::vec![alloc::vec![0.0, 0.0]]);
    }

    #[test]
    fn birth_rejects_wrong_dimension() {
        let err = TargetTuple::birth(&[1.0, 2.0, 3.0], &cfg(), 0).unwrap_err();
        assert_eq!(err, FilterError::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn append_drops_oldest_beyond_batch_size() {
        let cfg = FilterConfig { d: 1, max_batch_size: 2, ..FilterConfig::default() };
        let t = TargetTuple {
            state_matrix: alloc::vec![alloc::vec![1.0], alloc::vec![2.0]],
            age: 0,
            genuinity_error: 0.0,
            freeze: false,
            track_id: 0,
        };
        let t = t.append_state(&[3.0], &cfg).unwrap();
        assert_eq!(t.state_matrix, alloc::vec![alloc::vec![2.0], alloc::vec![3.0]]);
    }

    #[test]
    fn append_below_capacity_keeps_all_rows() {
        let cfg = FilterConfig { d: 1, max_batch_size: 5, ..FilterConfig::default() };
        let t = TargetTuple {
            state_matrix: alloc::vec![alloc::vec![1.0]],
            age: 0,
            genuinity_error: 0.0,
            freeze: false,
            track_id: 0,
        };
        let t = t.append_state(&[2.0], &cfg).unwrap();
        assert_eq!(t.state_matrix, alloc::vec![alloc::vec![1.0], alloc::vec![2.0]]);
        assert!(t.append_state(&[1.0, 2.0], &cfg).is_err());
    }

    #[test]
    fn append_retains_most_recent_rows_in_order() {
        let cfg = FilterConfig { d: 1, max_batch_size: 4, ..FilterConfig::default() };
        let mut t = TargetTuple::birth(&[0.0], &cfg, 0).unwrap();
        for i in 1..20 {
            t = t.append_state(&[i as f64], &cfg).unwrap();
            assert!(t.history_len() <= cfg.max_batch_size);
        }
        let expected: Vec<Vec<f64>> = (16..20).map(|i| alloc::vec![i as f64]).collect();
        assert_eq!(t.state_matrix, expected);
    }

    #[test]
    fn config_validation_catches_bad_ranges() {
        assert!(FilterConfig::default().validate().is_ok());
        assert!(FilterConfig { g_min: 0.0, ..FilterConfig::default() }.validate().is_err());
        assert!(FilterConfig { g_max: 5.0, g_min: 10.0, ..FilterConfig::default() }
            .validate()
            .is_err());
        assert!(FilterConfig { beta2: 1.0, ..FilterConfig::default() }.validate().is_err());
        assert!(FilterConfig { epochs_init: 0, ..FilterConfig::default() }.validate().is_err());
        assert!(FilterConfig { max_batch_size: 1, ..FilterConfig::default() }.validate().is_err());
    }

    #[test]
    fn confirmation_needs_maturity_and_a_plausible_association() {
        let cfg = FilterConfig::default(); // a_min = 3
        let mut t = TargetTuple::birth(&[0.0, 0.0], &cfg, 0).unwrap();
        assert!(!t.is_confirmed(&cfg)); // age == a_min: a fresh birth
        t.age = 4;
        assert!(!t.is_confirmed(&cfg)); // one survival is not enough pedigree
        t.age = 5;
        assert!(t.is_confirmed(&cfg));
        // A frozen target needs a longer track record and an in-band miss.
        t.freeze = true;
        t.genuinity_error = cfg.g_max;
        assert!(!t.is_confirmed(&cfg)); // age 5 ≤ 2·a_min
        t.age = 7;
        assert!(t.is_confirmed(&cfg));
        t.genuinity_error = cfg.g_max + 1.0;
        assert!(!t.is_confirmed(&cfg));
    }
}

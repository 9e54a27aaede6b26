//! Synthetic multi-target scenario generation: ground-truth trajectories with
//! staggered births and deaths, range-bearing measurements with Gaussian
//! noise, and Poisson-distributed clutter uniform over range and azimuth.
//!
//! Measurements are converted back to Cartesian coordinates before they reach
//! the filter, so the association distance operates in a uniform 2-D space
//! rather than mixed (range, bearing) units.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::math;
use crate::types::MeasurementFrame;
use crate::{FilterError, Result};

/// Per-track motion model.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum Motion {
    /// Straight-line motion with a fixed per-frame displacement.
    ConstantVelocity { velocity: Vec<f64> },
    /// Exact circular-arc stepping: `speed` units per frame along a heading
    /// that advances by `turn_rate` radians per frame. A zero rate degrades
    /// to straight-line motion along the initial heading.
    CoordinatedTurn { speed: f64, heading: f64, turn_rate: f64 },
}

/// One ground-truth trajectory, alive on frames `birth_frame ..< death_frame`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrackSpec {
    pub birth_frame: u64,
    pub death_frame: u64,
    pub initial_position: Vec<f64>,
    pub motion: Motion,
}

impl TrackSpec {
    pub fn alive_at(&self, t: u64) -> bool {
        self.birth_frame <= t && t < self.death_frame
    }

    /// Position at frame `t`; analytic in the step index, so trajectories
    /// accumulate no integration error.
    pub fn position_at(&self, t: u64) -> Vec<f64> {
        let n = (t - self.birth_frame) as f64;
        match &self.motion {
            Motion::ConstantVelocity { velocity } => self
                .initial_position
                .iter()
                .zip(velocity)
                .map(|(p, v)| p + n * v)
                .collect(),
            Motion::CoordinatedTurn { speed, heading, turn_rate } => {
                let (x0, y0) = (self.initial_position[0], self.initial_position[1]);
                if turn_rate.abs() < 1e-12 {
                    alloc::vec![
                        x0 + n * speed * math::cos(*heading),
                        y0 + n * speed * math::sin(*heading),
                    ]
                } else {
                    let radius = speed / turn_rate;
                    let swept = heading + turn_rate * n;
                    alloc::vec![
                        x0 + radius * (math::sin(swept) - math::sin(*heading)),
                        y0 - radius * (math::cos(swept) - math::cos(*heading)),
                    ]
                }
            }
        }
    }
}

/// Full description of a synthetic scenario.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioSpec {
    pub num_frames: u64,
    /// Clutter is drawn with range uniform in `[0, range_max]`.
    pub range_max: f64,
    pub tracks: Vec<TrackSpec>,
    /// Standard deviation of the range noise (unit distance).
    pub sigma_r: f64,
    /// Standard deviation of the bearing noise (rad).
    pub sigma_theta: f64,
    /// Mean clutter count per frame.
    pub lambda_c: f64,
    /// Probability that an alive track produces a detection.
    pub p_detect: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        default_scenario()
    }
}

impl ScenarioSpec {
    // Negated comparisons so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.num_frames < 1 {
            return Err(FilterError::InvalidScenario("num_frames must be >= 1"));
        }
        if !(self.range_max > 0.0) {
            return Err(FilterError::InvalidScenario("range_max must be > 0"));
        }
        if !(self.sigma_r >= 0.0 && self.sigma_theta >= 0.0 && self.lambda_c >= 0.0) {
            return Err(FilterError::InvalidScenario("noise and clutter rates must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            return Err(FilterError::InvalidScenario("p_detect must lie in [0, 1]"));
        }
        for track in &self.tracks {
            if track.birth_frame < 1 {
                return Err(FilterError::InvalidScenario("birth_frame must be >= 1"));
            }
            if !(track.birth_frame < track.death_frame && track.death_frame <= self.num_frames) {
                return Err(FilterError::InvalidScenario(
                    "need birth_frame < death_frame <= num_frames",
                ));
            }
            if track.initial_position.len() != 2 {
                return Err(FilterError::InvalidScenario("tracks live in a 2-D state space"));
            }
            match &track.motion {
                Motion::ConstantVelocity { velocity } => {
                    if velocity.len() != 2 {
                        return Err(FilterError::InvalidScenario("velocity must be 2-D"));
                    }
                }
                Motion::CoordinatedTurn { speed, .. } => {
                    if !(*speed >= 0.0) {
                        return Err(FilterError::InvalidScenario("turn speed must be >= 0"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// True target positions for one frame, labelled per track.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthFrame {
    pub time_step: u64,
    pub truths: Vec<(u64, Vec<f64>)>,
}

pub fn cartesian_to_polar(p: &[f64]) -> (f64, f64) {
    (math::hypot(p[0], p[1]), math::atan2(p[1], p[0]))
}

pub fn polar_to_cartesian(r: f64, theta: f64) -> Vec<f64> {
    alloc::vec![r * math::cos(theta), r * math::sin(theta)]
}

/// Generates the ground-truth and measurement streams for a scenario.
/// Deterministic given the scenario description, including its seed.
pub fn generate(spec: &ScenarioSpec) -> Result<(Vec<GroundTruthFrame>, Vec<MeasurementFrame>)> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let noise_r = (spec.sigma_r > 0.0)
        .then(|| Normal::new(0.0, spec.sigma_r))
        .transpose()
        .map_err(|_| FilterError::InvalidScenario("sigma_r is not a valid std dev"))?;
    let noise_theta = (spec.sigma_theta > 0.0)
        .then(|| Normal::new(0.0, spec.sigma_theta))
        .transpose()
        .map_err(|_| FilterError::InvalidScenario("sigma_theta is not a valid std dev"))?;
    let clutter = (spec.lambda_c > 0.0)
        .then(|| Poisson::new(spec.lambda_c))
        .transpose()
        .map_err(|_| FilterError::InvalidScenario("lambda_c is not a valid Poisson mean"))?;

    let mut truth_frames = Vec::with_capacity(spec.num_frames as usize);
    let mut measurement_frames = Vec::with_capacity(spec.num_frames as usize);
    for t in 1..=spec.num_frames {
        let mut truths = Vec::new();
        let mut points = Vec::new();
        for (label, track) in spec.tracks.iter().enumerate() {
            if !track.alive_at(t) {
                continue;
            }
            let pos = track.position_at(t);
            let detected = rng.gen::<f64>() < spec.p_detect;
            let (mut r, mut theta) = cartesian_to_polar(&pos);
            if let Some(n) = &noise_r {
                r += n.sample(&mut rng);
            }
            if let Some(n) = &noise_theta {
                theta += n.sample(&mut rng);
            }
            if detected {
                points.push(polar_to_cartesian(r, theta));
            }
            truths.push((label as u64, pos));
        }
        if let Some(dist) = &clutter {
            let count = dist.sample(&mut rng) as u64;
            for _ in 0..count {
                let r = rng.gen_range(0.0..=spec.range_max);
                let theta = rng.gen_range(-PI..=PI);
                points.push(polar_to_cartesian(r, theta));
            }
        }
        points.shuffle(&mut rng);
        truth_frames.push(GroundTruthFrame { time_step: t, truths });
        measurement_frames.push(MeasurementFrame::new(t, points));
    }
    Ok((truth_frames, measurement_frames))
}

/// The bundled synthetic scenario: ten trajectories with staggered births and
/// lifespans, a mix of straight-line and turning motion, laid out on radial
/// spokes so tracks stay well separated. Values are part of the crate's
/// public fixture contract and stay stable across versions.
pub fn default_scenario() -> ScenarioSpec {
    fn spoke(deg: f64, r0: f64) -> Vec<f64> {
        let a = deg * PI / 180.0;
        alloc::vec![r0 * math::cos(a), r0 * math::sin(a)]
    }
    fn cv(deg: f64, r0: f64, speed: f64, birth: u64, death: u64) -> TrackSpec {
        let a = deg * PI / 180.0;
        TrackSpec {
            birth_frame: birth,
            death_frame: death,
            initial_position: spoke(deg, r0),
            motion: Motion::ConstantVelocity {
                velocity: alloc::vec![speed * math::cos(a), speed * math::sin(a)],
            },
        }
    }
    fn turn(deg: f64, r0: f64, speed: f64, rate: f64, birth: u64, death: u64) -> TrackSpec {
        let a = deg * PI / 180.0;
        TrackSpec {
            birth_frame: birth,
            death_frame: death,
            initial_position: spoke(deg, r0),
            motion: Motion::CoordinatedTurn { speed, heading: a + PI / 2.0, turn_rate: rate },
        }
    }
    ScenarioSpec {
        num_frames: 100,
        range_max: 1000.0,
        tracks: alloc::vec![
            cv(0.0, 180.0, 2.8, 1, 100),
            cv(36.0, 234.0, 2.2, 1, 100),
            turn(72.0, 280.0, 4.5, 0.10, 3, 100),
            cv(108.0, 200.0, 3.0, 5, 85),
            cv(144.0, 300.0, 1.6, 8, 100),
            cv(180.0, 170.0, 3.4, 15, 90),
            turn(216.0, 280.0, 4.0, -0.09, 20, 100),
            cv(252.0, 240.0, 3.6, 30, 75),
            cv(288.0, 210.0, 3.2, 40, 100),
            cv(324.0, 260.0, 4.0, 55, 100),
        ],
        sigma_r: 10.0,
        sigma_theta: PI / 90.0,
        lambda_c: 20.0,
        p_detect: 1.0,
        seed: 1701,
    }
}

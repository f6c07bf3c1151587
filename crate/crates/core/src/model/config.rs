use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geo::{CameraIntrinsics, EnuPoint, SurveyArea};

/// Reward constants, in dimensionless reward units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub crash: f64,
    pub out: f64,
    pub detection: f64,
    pub confirmation: f64,
    pub action: f64,
    pub fov: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            crash: -50.0,
            out: -25.0,
            detection: 25.0,
            confirmation: 50.0,
            action: -2.5,
            fov: -5.0,
        }
    }
}

impl RewardParams {
    pub fn max_abs(&self) -> f64 {
        [
            self.crash,
            self.out,
            self.detection,
            self.confirmation,
            self.action,
            self.fov,
        ]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
    }

    /// Same constants multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            crash: self.crash * k,
            out: self.out * k,
            detection: self.detection * k,
            confirmation: self.confirmation * k,
            action: self.action * k,
            fov: self.fov * k,
        }
    }
}

/// How the planner models detection confidence as a function of the
/// UAV-victim distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceMode {
    /// Confidence rises linearly from `zeta_min` at `z_max` to 1 at `z_min`.
    #[default]
    Proximity,
    /// The printed linear form, which grows with distance. Kept for comparison.
    Literal,
}

/// Noise the planner assumes for its own motion and position estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionNoise {
    pub horizontal_sigma: f64,
    pub vertical_sigma: f64,
    /// Autopilot position-estimate noise added to `o_pu`.
    pub estimate_sigma: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            horizontal_sigma: 0.3,
            vertical_sigma: 0.2,
            estimate_sigma: 0.1,
        }
    }
}

/// The planner's picture of the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorModel {
    /// Frames aggregated per observation.
    pub frames: u32,
    /// Per-frame probability of a spurious detection anywhere in view.
    pub spurious_rate: f64,
    pub localization_sigma: f64,
    /// When false a victim inside the footprint is always detected.
    pub misses: bool,
    /// Probability that a whole observation call comes back empty, e.g.
    /// because a gust shook the camera. Only used when `misses` is set.
    pub dropout: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            frames: 10,
            spurious_rate: 0.05,
            localization_sigma: 1.0,
            misses: true,
            dropout: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub z_max: f64,
    pub z_min: f64,
    pub delta_z: f64,
    /// Overlap between consecutive frames used to size horizontal steps.
    pub overlap: f64,
    pub zeta_min: f64,
    pub zeta: f64,
    pub gamma: f64,
    /// Seconds per planning step.
    pub dt: f64,
    pub t_max: f64,
    pub survey: SurveyArea,
    pub start: EnuPoint,
    pub confidence_bin: f64,
    pub confidence_mode: ConfidenceMode,
    pub camera: CameraIntrinsics,
    pub noise: MotionNoise,
    pub detector: DetectorModel,
    /// Tolerance around the survey box before the flying-limits flag trips.
    pub roi_margin_horizontal: f64,
    /// Tolerance around `[z_min, z_max]`.
    pub roi_margin_vertical: f64,
    /// Cell size for binning positions in observation keys and coverage.
    pub cell_size: f64,
    /// Keep the planner from choosing moves whose noise-free outcome leaves
    /// the flying limits or enters an obstacle.
    pub safe_actions: bool,
    /// Probability that a rollout step ignores the victim hypothesis and
    /// picks a uniform legal action.
    pub rollout_randomness: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            z_max: 16.0,
            z_min: 5.25,
            delta_z: 2.0,
            overlap: 0.4,
            zeta_min: 0.1,
            zeta: 0.85,
            gamma: 0.95,
            dt: 4.0,
            t_max: 600.0,
            survey: SurveyArea::field_strip(),
            start: EnuPoint::new(0.0, 0.0, 16.0),
            confidence_bin: 0.05,
            confidence_mode: ConfidenceMode::Proximity,
            camera: CameraIntrinsics::rgb(),
            noise: MotionNoise::default(),
            detector: DetectorModel::default(),
            roi_margin_horizontal: 1.5,
            roi_margin_vertical: 1.0,
            cell_size: 0.5,
            safe_actions: true,
            rollout_randomness: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.z_min > 0.0 && self.z_min < self.z_max) {
            return bad("need 0 < z_min < z_max");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.zeta_min) || !(self.zeta_min <= self.zeta && self.zeta <= 1.0) {
            return bad("need 0 <= zeta_min <= zeta <= 1");
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1)");
        }
        if !(self.dt > 0.0 && self.t_max > 0.0 && self.delta_z > 0.0) {
            return bad("dt, t_max and delta_z must be positive");
        }
        if !(self.confidence_bin > 0.0 && self.cell_size > 0.0) {
            return bad("bin widths must be positive");
        }
        if !self.survey.is_valid() {
            return bad("survey rectangle is degenerate");
        }
        if self.detector.frames == 0 {
            return bad("detector needs at least one frame per observation");
        }
        if !(0.0..=1.0).contains(&self.detector.spurious_rate) {
            return bad("spurious_rate must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.detector.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        let n = &self.noise;
        if [
            n.horizontal_sigma,
            n.vertical_sigma,
            n.estimate_sigma,
            self.detector.localization_sigma,
        ]
        .iter()
        .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return bad("noise levels must be finite and non-negative");
        }
        self.camera.validate()?;
        Ok(())
    }

    /// Manhattan diagonal of the survey rectangle.
    pub fn d_w(&self) -> f64 {
        self.survey.manhattan_diagonal()
    }

    /// Whether `p` lies inside the flying limits.
    pub fn within_limits(&self, p: &EnuPoint) -> bool {
        self.within_limits_by(p, 0.0, 0.0)
    }

    /// Like [`Self::within_limits`] with the limits pulled in by
    /// `horizontal` and `vertical` metres.
    pub fn within_limits_by(&self, p: &EnuPoint, horizontal: f64, vertical: f64) -> bool {
        self.survey
            .contains_with_margin(p, self.roi_margin_horizontal - horizontal)
            && p.z >= self.z_min - self.roi_margin_vertical + vertical
            && p.z <= self.z_max + self.roi_margin_vertical - vertical
    }
}

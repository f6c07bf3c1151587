use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    #[default]
    Rgb,
    Thermal,
}

/// Per-frame response of the simulated person detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorProfile {
    pub modality: Modality,
    /// Frames aggregated per observation call.
    pub frames: u32,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
    /// Distance at or below which detection saturates at `p_max`.
    pub near: f64,
    /// Distance at which the linear response reaches zero before clamping.
    pub far: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Localization noise at `reference_distance`; scales linearly with distance.
    pub localization_sigma: f64,
    pub reference_distance: f64,
    /// When true, occlusion fades out as the camera gets closer and looks
    /// past the canopy; it is at full strength from `reference_distance` up.
    pub occlusion_fades: bool,
}

impl Default for DetectorProfile {
    fn default() -> Self {
        Self::rgb()
    }
}

impl DetectorProfile {
    pub fn rgb() -> Self {
        Self {
            modality: Modality::Rgb,
            frames: 10,
            frame_interval: 0.34,
            near: 5.25,
            far: 20.0,
            p_min: 0.05,
            p_max: 0.98,
            localization_sigma: 0.6,
            reference_distance: 16.0,
            occlusion_fades: true,
        }
    }

    /// Same response curve with a tighter localization.
    pub fn thermal() -> Self {
        Self {
            modality: Modality::Thermal,
            localization_sigma: 0.35,
            ..Self::rgb()
        }
    }

    pub fn for_modality(m: Modality) -> Self {
        match m {
            Modality::Rgb => Self::rgb(),
            Modality::Thermal => Self::thermal(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(format!("detector: {m}")));
        if self.frames == 0 {
            return bad("frames must be at least 1");
        }
        if !(0.0 <= self.p_min && self.p_min <= self.p_max && self.p_max <= 1.0) {
            return bad("need 0 <= p_min <= p_max <= 1");
        }
        if !(self.near < self.far && self.near < self.reference_distance) {
            return bad("need near < far and near < reference_distance");
        }
        if !(self.localization_sigma >= 0.0 && self.frame_interval >= 0.0) {
            return bad("sigma and frame interval must be non-negative");
        }
        Ok(())
    }

    /// Occlusion actually applied at distance `d`.
    pub fn effective_occlusion(&self, d: f64, occlusion: f64) -> f64 {
        let occlusion = occlusion.clamp(0.0, 1.0);
        if !self.occlusion_fades {
            return occlusion;
        }
        let t = ((d - self.near) / (self.reference_distance - self.near)).clamp(0.0, 1.0);
        occlusion * t
    }

    /// Per-frame true-detection probability at distance `d`.
    pub fn p_detect(&self, d: f64, occlusion: f64) -> f64 {
        let base = ((self.far - d) / (self.far - self.near)).clamp(self.p_min, self.p_max);
        base * (1.0 - self.effective_occlusion(d, occlusion))
    }

    pub fn sigma_at(&self, d: f64) -> f64 {
        self.localization_sigma * d.max(0.0) / self.reference_distance
    }
}

//! Scenario files: survey area, targets, obstacles, sensors and every
//! planner/mission setting, with the two shipped presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geo::EnuPoint;
use crate::mission::MissionConfig;
use crate::model::{ModelConfig, MotionNoise, RewardParams};
use crate::solver::SolverConfig;
use crate::world::{DetectorProfile, Distractor, GroundTruth, OccupancyGrid, Victim, WindParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub min: EnuPoint,
    pub max: EnuPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub model: ModelConfig,
    pub reward: RewardParams,
    pub solver: SolverConfig,
    pub mission: MissionConfig,
    pub detector: DetectorProfile,
    pub wind: WindParams,
    /// Motion noise of the simulated airframe.
    pub flight_noise: MotionNoise,
    pub obstacle_cell: f64,
    pub victims: Vec<Victim>,
    pub distractors: Vec<Distractor>,
    pub obstacles: Vec<ObstacleBox>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::field()
    }
}

/// The tree near the second victim location.
const TREE: ObstacleBox = ObstacleBox {
    min: EnuPoint::new(4.5, 44.5, 0.0),
    max: EnuPoint::new(6.5, 46.5, 5.0),
};

const CAR_POSITION: EnuPoint = EnuPoint::new(4.5, 30.0, 0.0);

const CAR: ObstacleBox = ObstacleBox {
    min: EnuPoint::new(3.5, 28.0, 0.0),
    max: EnuPoint::new(5.5, 32.0, 1.5),
};

impl Scenario {
    pub const PRESETS: [&'static str; 3] = ["empty", "l1", "l2"];

    /// The field with its tree and car and no victim.
    pub fn field() -> Self {
        Self {
            name: "field".into(),
            model: ModelConfig::default(),
            reward: RewardParams::default(),
            solver: SolverConfig::default(),
            mission: MissionConfig::default(),
            detector: DetectorProfile::rgb(),
            wind: WindParams::default(),
            flight_noise: MotionNoise::default(),
            obstacle_cell: 1.0,
            victims: Vec::new(),
            distractors: vec![Distractor {
                position: CAR_POSITION,
                fp_rate: 0.05,
            }],
            obstacles: vec![TREE, CAR],
        }
    }

    /// No victims, no distractors, calm air.
    pub fn empty() -> Self {
        Self {
            name: "empty".into(),
            distractors: Vec::new(),
            wind: WindParams::calm(),
            ..Self::field()
        }
    }

    /// Victim fully exposed in open ground.
    pub fn l1() -> Self {
        Self {
            name: "l1".into(),
            victims: vec![Victim {
                position: EnuPoint::ground(3.0, 10.0),
                occlusion: 0.0,
            }],
            ..Self::field()
        }
    }

    /// Victim beside the tree, half hidden by its canopy.
    pub fn l2() -> Self {
        Self {
            name: "l2".into(),
            victims: vec![Victim {
                position: EnuPoint::ground(5.6, 43.8),
                occlusion: 0.5,
            }],
            ..Self::field()
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name.to_ascii_lowercase().as_str() {
            "empty" => Ok(Self::empty()),
            "l1" => Ok(Self::l1()),
            "l2" => Ok(Self::l2()),
            _ => Err(ConfigError::UnknownPreset(name.to_string())),
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// A preset name or a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConfigError> {
        if Self::PRESETS.contains(&name_or_path.to_ascii_lowercase().as_str()) {
            Self::preset(name_or_path)
        } else {
            Self::load(Path::new(name_or_path))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.solver.validate().map_err(ConfigError::Invalid)?;
        self.mission.validate()?;
        self.detector.validate()?;
        if !(self.obstacle_cell > 0.0) {
            return Err(ConfigError::Invalid("obstacle_cell must be positive".into()));
        }
        if !self.model.within_limits(&self.model.start) {
            return Err(ConfigError::Invalid("start pose lies outside the flying limits".into()));
        }
        self.ground_truth().validate(&self.model.survey)
    }

    pub fn obstacle_grid(&self) -> OccupancyGrid {
        let mut grid = OccupancyGrid::new(EnuPoint::default(), self.obstacle_cell);
        for b in &self.obstacles {
            grid.mark_box(&b.min, &b.max);
        }
        grid
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            victims: self.victims.clone(),
            distractors: self.distractors.clone(),
            obstacles: self.obstacle_grid(),
            wind: self.wind,
        }
    }

    pub fn victim_positions(&self) -> Vec<EnuPoint> {
        self.victims.iter().map(|v| v.position).collect()
    }
}

//! Simulated ground truth and sensors: victims, distractors, obstacles,
//! wind-induced frame loss and a stochastic person detector.

mod detector;
mod grid;
mod wind;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use detector::{DetectorProfile, Modality};
pub use grid::OccupancyGrid;
pub use wind::{WindParams, WindProcess};

use crate::error::ConfigError;
use crate::geo::{footprint_corners_world, manhattan3, point_in_footprint, CameraIntrinsics, EnuPoint, SurveyArea};
use crate::model::{Detection, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Victim {
    pub position: EnuPoint,
    /// Fraction of the body hidden from the camera, in `[0, 1]`.
    pub occlusion: f64,
}

/// Object the detector sometimes mistakes for a person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub position: EnuPoint,
    /// Per-frame false detection probability while in view.
    pub fp_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub victims: Vec<Victim>,
    pub distractors: Vec<Distractor>,
    pub obstacles: OccupancyGrid,
    pub wind: WindParams,
}

impl GroundTruth {
    pub fn validate(&self, survey: &SurveyArea) -> Result<(), ConfigError> {
        for v in &self.victims {
            if !survey.contains(&v.position) {
                return Err(ConfigError::Invalid(format!(
                    "victim at ({}, {}) lies outside the survey area",
                    v.position.x, v.position.y
                )));
            }
            if !(0.0..=1.0).contains(&v.occlusion) {
                return Err(ConfigError::Invalid("occlusion must lie in [0, 1]".into()));
            }
        }
        for d in &self.distractors {
            if !survey.contains(&d.position) {
                return Err(ConfigError::Invalid(format!(
                    "distractor at ({}, {}) lies outside the survey area",
                    d.position.x, d.position.y
                )));
            }
            if !(0.0..=1.0).contains(&d.fp_rate) {
                return Err(ConfigError::Invalid("fp_rate must lie in [0, 1]".into()));
            }
        }
        if self.wind.rate < 0.0 || self.wind.mean_duration < 0.0 {
            return Err(ConfigError::Invalid("wind parameters must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetRef {
    Victim(usize),
    Distractor(usize),
}

/// One processed camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: f64,
    pub pose: EnuPoint,
    /// Lost to a gust.
    pub dropped: bool,
    pub fired: Vec<TargetRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseResult {
    pub observation: Observation,
    /// The target behind the reported detection, if any.
    pub target: Option<TargetRef>,
    pub frames: Vec<Frame>,
}

/// `n` frame poses at a fixed position, the last one at `t_end`.
pub fn hover_frames(pose: EnuPoint, t_end: f64, profile: &DetectorProfile) -> Vec<(f64, EnuPoint)> {
    let n = profile.frames.max(1);
    (0..n)
        .map(|i| (t_end - (n - 1 - i) as f64 * profile.frame_interval, pose))
        .collect()
}

/// Sensor and position-estimate settings for [`sense`].
#[derive(Debug, Clone, Copy)]
pub struct SensorRig<'a> {
    pub camera: &'a CameraIntrinsics,
    pub profile: &'a DetectorProfile,
    /// Autopilot position-estimate noise.
    pub estimate_sigma: f64,
}

/// Simulates one observation call over `frames`, given as `(time, pose)`
/// pairs in time order. Confidence is the fraction of frames in which the
/// reported target fired; with several targets the most frequent one wins.
pub fn sense<R: Rng + ?Sized>(
    frames: &[(f64, EnuPoint)],
    look: ((f64, f64, f64), f64),
    truth: &GroundTruth,
    wind: &mut WindProcess,
    rig: &SensorRig<'_>,
    rng: &mut R,
) -> SenseResult {
    assert!(!frames.is_empty(), "sense needs at least one frame");
    let n_targets = truth.victims.len() + truth.distractors.len();
    let mut hits = vec![0u32; n_targets];
    let mut last_distance = vec![0.0f64; n_targets];
    let mut log = Vec::with_capacity(frames.len());
    for &(time, pose) in frames {
        let dropped = wind.active_at(time, rng);
        let mut fired = Vec::new();
        if let Ok(fp) = footprint_corners_world(&pose, 0.0, rig.camera) {
            for (i, v) in truth.victims.iter().enumerate() {
                if !point_in_footprint(&v.position, &fp) {
                    continue;
                }
                let d = manhattan3(&pose, &v.position);
                // draw even when dropped so the frame record does not
                // change the random stream
                let fires = rng.random::<f64>() < rig.profile.p_detect(d, v.occlusion);
                if fires && !dropped {
                    hits[i] += 1;
                    last_distance[i] = d;
                    fired.push(TargetRef::Victim(i));
                }
            }
            for (j, c) in truth.distractors.iter().enumerate() {
                if !point_in_footprint(&c.position, &fp) {
                    continue;
                }
                let fires = rng.random::<f64>() < c.fp_rate;
                if fires && !dropped {
                    let k = truth.victims.len() + j;
                    hits[k] += 1;
                    last_distance[k] = manhattan3(&pose, &c.position);
                    fired.push(TargetRef::Distractor(j));
                }
            }
        }
        log.push(Frame {
            time,
            pose,
            dropped,
            fired,
        });
    }

    let mut best: Option<usize> = None;
    for (k, &h) in hits.iter().enumerate() {
        if h > 0 && best.is_none_or(|b| h > hits[b]) {
            best = Some(k);
        }
    }
    let n = frames.len() as f64;
    let mut normal = |s: f64| {
        if s > 0.0 {
            s * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    };
    let (target, detection) = match best {
        Some(k) => {
            let (target, truth_pos) = if k < truth.victims.len() {
                (TargetRef::Victim(k), truth.victims[k].position)
            } else {
                let j = k - truth.victims.len();
                (TargetRef::Distractor(j), truth.distractors[j].position)
            };
            let sigma = rig.profile.sigma_at(last_distance[k]);
            let position = EnuPoint::ground(truth_pos.x + normal(sigma), truth_pos.y + normal(sigma));
            (
                Some(target),
                Some(Detection {
                    position,
                    confidence: hits[k] as f64 / n,
                }),
            )
        }
        None => (None, None),
    };
    let (time, pose) = *frames.last().expect("non-empty frames");
    let e = rig.estimate_sigma;
    let uav = pose.offset(normal(e), normal(e), normal(e));
    let (dir, range) = look;
    SenseResult {
        observation: Observation {
            uav,
            detection,
            obstacle_ahead: truth.obstacles.occupied_ahead(&pose, dir, range),
            time,
        },
        target,
        frames: log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const AHEAD: ((f64, f64, f64), f64) = ((1.0, 0.0, 0.0), 3.0);

    fn run(truth: &GroundTruth, profile: &DetectorProfile, pose: EnuPoint, seed: u64) -> SenseResult {
        let cam = CameraIntrinsics::rgb();
        let rig = SensorRig {
            camera: &cam,
            profile,
            estimate_sigma: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wind = WindProcess::new(truth.wind, &mut rng);
        sense(
            &hover_frames(pose, 4.0, profile),
            AHEAD,
            truth,
            &mut wind,
            &rig,
            &mut rng,
        )
    }

    fn victim_at(x: f64, y: f64) -> GroundTruth {
        GroundTruth {
            victims: vec![Victim {
                position: EnuPoint::ground(x, y),
                occlusion: 0.0,
            }],
            wind: WindParams::calm(),
            ..GroundTruth::default()
        }
    }

    #[test]
    fn confidence_is_the_firing_frequency() {
        let truth = victim_at(3.0, 30.0);
        let profile = DetectorProfile::rgb();
        for seed in 0..20 {
            let r = run(&truth, &profile, EnuPoint::new(3.0, 30.0, 12.0), seed);
            let fired = r.frames.iter().filter(|f| !f.fired.is_empty()).count();
            let c = r.observation.detection.map(|d| d.confidence).unwrap_or(0.0);
            assert_eq!(c, fired as f64 / 10.0);
        }
    }

    #[test]
    fn outside_the_footprint_nothing_fires() {
        let truth = victim_at(3.0, 50.0);
        let profile = DetectorProfile {
            p_min: 1.0,
            p_max: 1.0,
            ..DetectorProfile::rgb()
        };
        let r = run(&truth, &profile, EnuPoint::new(3.0, 30.0, 16.0), 1);
        assert!(r.observation.detection.is_none());
        assert!(r.target.is_none());
    }

    #[test]
    fn certain_detector_gives_full_confidence() {
        let truth = victim_at(3.0, 30.0);
        let profile = DetectorProfile {
            p_min: 1.0,
            p_max: 1.0,
            ..DetectorProfile::rgb()
        };
        for frames in [1, 3, 10, 25] {
            let p = DetectorProfile { frames, ..profile };
            let r = run(&truth, &p, EnuPoint::new(3.0, 30.0, 16.0), 2);
            assert_eq!(r.observation.detection.unwrap().confidence, 1.0);
            assert_eq!(r.target, Some(TargetRef::Victim(0)));
        }
    }

    #[test]
    fn distractor_rate_matches_binomial_mean() {
        let truth = GroundTruth {
            distractors: vec![Distractor {
                position: EnuPoint::ground(3.0, 30.0),
                fp_rate: 0.3,
            }],
            wind: WindParams::calm(),
            ..GroundTruth::default()
        };
        let profile = DetectorProfile::rgb();
        let cam = CameraIntrinsics::rgb();
        let rig = SensorRig {
            camera: &cam,
            profile: &profile,
            estimate_sigma: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut wind = WindProcess::new(truth.wind, &mut rng);
        let frames = hover_frames(EnuPoint::new(3.0, 30.0, 16.0), 4.0, &profile);
        let calls = 10_000;
        let total: f64 = (0..calls)
            .map(|_| {
                sense(&frames, AHEAD, &truth, &mut wind, &rig, &mut rng)
                    .observation
                    .detection
                    .map(|d| d.confidence)
                    .unwrap_or(0.0)
            })
            .sum();
        let mean = total / calls as f64;
        assert!((mean - 0.3).abs() < 0.01, "{mean}");
    }

    #[test]
    fn permanent_gust_drops_every_frame() {
        let mut truth = victim_at(3.0, 30.0);
        truth.wind = WindParams {
            rate: f64::INFINITY,
            mean_duration: 5.0,
        };
        let r = run(&truth, &DetectorProfile::rgb(), EnuPoint::new(3.0, 30.0, 6.0), 4);
        assert!(r.frames.iter().all(|f| f.dropped && f.fired.is_empty()));
        assert!(r.observation.detection.is_none());
    }

    #[test]
    fn strongest_target_is_reported() {
        let truth = GroundTruth {
            victims: vec![Victim {
                position: EnuPoint::ground(3.0, 30.0),
                occlusion: 0.0,
            }],
            distractors: vec![Distractor {
                position: EnuPoint::ground(3.5, 31.0),
                fp_rate: 0.05,
            }],
            wind: WindParams::calm(),
            ..GroundTruth::default()
        };
        let profile = DetectorProfile {
            p_min: 1.0,
            p_max: 1.0,
            ..DetectorProfile::rgb()
        };
        let r = run(&truth, &profile, EnuPoint::new(3.0, 30.0, 10.0), 5);
        assert_eq!(r.target, Some(TargetRef::Victim(0)));
    }

    #[test]
    fn expected_confidence_falls_with_altitude() {
        let truth = victim_at(3.0, 30.0);
        let profile = DetectorProfile::rgb();
        let mut previous = f64::INFINITY;
        for z in [6.0, 8.0, 10.0, 12.0, 14.0, 16.0] {
            let mean = (0..2_000)
                .map(|s| {
                    run(&truth, &profile, EnuPoint::new(3.0, 30.0, z), s)
                        .observation
                        .detection
                        .map(|d| d.confidence)
                        .unwrap_or(0.0)
                })
                .sum::<f64>()
                / 2_000.0;
            assert!(mean <= previous + 0.01, "z={z}: {mean} > {previous}");
            previous = mean;
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let truth = victim_at(3.0, 30.0);
        let a = run(&truth, &DetectorProfile::rgb(), EnuPoint::new(3.0, 30.0, 12.0), 9);
        let b = run(&truth, &DetectorProfile::rgb(), EnuPoint::new(3.0, 30.0, 12.0), 9);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.observation, b.observation);
    }

    #[test]
    fn misplaced_targets_are_rejected() {
        let survey = SurveyArea::field_strip();
        assert!(victim_at(3.0, 30.0).validate(&survey).is_ok());
        assert!(victim_at(30.0, 30.0).validate(&survey).is_err());
    }
}

//! The three flight modes driven through the simulated world: a waypoint
//! survey, pure POMDP exploration, and a survey that hands over to the
//! planner to inspect each new detection.

mod plan;
mod record;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use plan::{lawnmower_waypoints, FlightPlan};
pub use record::{
    read_records_jsonl, write_coordinates_csv, write_records_jsonl, write_solver_trace_csv, write_trajectory_csv,
    Confirmation, DetectionEvent, Mode, ModeState, ModeTransition, Outcome, Phase, RunRecord, SolverTraceRow,
    TrajectoryPoint,
};

use crate::coverage::CoverageMap;
use crate::error::{ConfigError, SimError, SolverError};
use crate::geo::{footprint_corners_world, EnuPoint};
use crate::model::{
    displacement, initial_belief, look_ahead, planning_coverage, ActionCmd, ObsKey, Observation, PomdpState, UavModel,
    VictimPrior,
};
use crate::scenario::Scenario;
use crate::solver::{advance_belief, bootstrap, plan_step, BeliefTree};
use crate::world::{hover_frames, sense, GroundTruth, SensorRig, WindProcess};

/// Settings for inspection sub-episodes in hybrid mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    /// Prior probability that the trigger was not a victim.
    pub absent_fraction: f64,
    /// Victim-present belief mass below which the detection is discarded.
    pub discard_mass: f64,
    pub step_cap: usize,
    /// Detections within this distance of an inspected spot do not retrigger.
    pub retrigger_radius: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            absent_fraction: 0.4,
            discard_mass: 0.05,
            step_cap: 20,
            retrigger_radius: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub altitude: f64,
    pub speed: f64,
    /// Cross-track overlap between survey lanes.
    pub plan_overlap: f64,
    /// Coverage at which offboard exploration gives up.
    pub coverage_target: f64,
    /// Simulated time spent warming the planner before its first action.
    pub boot_time: f64,
    /// Belief re-initialisations allowed per run.
    pub max_belief_resets: usize,
    /// Report a collapse beyond the reset budget as an error instead of a timeout.
    pub collapse_is_error: bool,
    pub hybrid: HybridConfig,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            altitude: 16.0,
            speed: 2.0,
            plan_overlap: 0.3,
            coverage_target: 0.99,
            boot_time: 4.0,
            max_belief_resets: 1,
            collapse_is_error: false,
            hybrid: HybridConfig::default(),
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(format!("mission: {m}")));
        if !(self.altitude > 0.0 && self.speed > 0.0) {
            return bad("altitude and speed must be positive");
        }
        if !(0.0..1.0).contains(&self.plan_overlap) {
            return bad("plan_overlap must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.coverage_target) || self.boot_time < 0.0 {
            return bad("coverage_target must lie in [0, 1] and boot_time be non-negative");
        }
        let h = &self.hybrid;
        if !(0.0..1.0).contains(&h.absent_fraction) || !(0.0..=1.0).contains(&h.discard_mass) || h.step_cap == 0 {
            return bad("hybrid settings out of range");
        }
        Ok(())
    }
}

impl Scenario {
    pub fn flight_plan(&self) -> Result<FlightPlan, SimError> {
        Ok(lawnmower_waypoints(
            &self.model.survey,
            &self.model.camera,
            self.mission.plan_overlap,
            self.mission.altitude,
            self.mission.speed,
        )?)
    }
}

/// Seed of run `index` in a batch started from `master`.
pub fn run_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(index))
}

type Tree = BeliefTree<PomdpState, ObsKey>;

enum LoopEnd {
    Confirmed,
    Discarded,
    SurveyComplete,
    Timeout,
    Crash,
    OutOfBounds,
}

/// Mutable state of one simulated flight.
struct Flight<'a> {
    scn: &'a Scenario,
    truth: GroundTruth,
    wind: WindProcess,
    world: ChaCha8Rng,
    planner: ChaCha8Rng,
    coverage: CoverageMap,
    record: RunRecord,
    pose: EnuPoint,
    t: f64,
}

impl<'a> Flight<'a> {
    fn new(scn: &'a Scenario, mode: Mode, seed: u64) -> Self {
        let mut world = ChaCha8Rng::seed_from_u64(seed);
        world.set_stream(0);
        let mut planner = ChaCha8Rng::seed_from_u64(seed);
        planner.set_stream(1);
        let truth = scn.ground_truth();
        let wind = WindProcess::new(truth.wind, &mut world);
        Self {
            scn,
            truth,
            wind,
            world,
            planner,
            coverage: planning_coverage(&scn.model),
            record: RunRecord::new(mode, seed, &scn.name),
            pose: scn.model.start,
            t: 0.0,
        }
    }

    fn flight_noise(&mut self) -> (f64, f64, f64) {
        let n = self.scn.flight_noise;
        let mut g = |s: f64| {
            if s > 0.0 {
                s * self.world.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };
        (g(n.horizontal_sigma), g(n.horizontal_sigma), g(n.vertical_sigma))
    }

    fn set_mode(&mut self, state: ModeState) {
        self.record.mode_log.push(ModeTransition { time: self.t, state });
    }

    fn log_point(&mut self, phase: Phase, action: Option<ActionCmd>) {
        self.record.trajectory.push(TrajectoryPoint {
            time: self.t,
            x: self.pose.x,
            y: self.pose.y,
            z: self.pose.z,
            phase,
            action,
        });
    }

    /// Runs the detector over `frames`, stamps what was seen and logs any
    /// detection that clears the minimum confidence. Weaker detections are
    /// dropped from the returned observation.
    fn observe(
        &mut self,
        frames: &[(f64, EnuPoint)],
        look: ((f64, f64, f64), f64),
        mut extra: Option<&mut CoverageMap>,
    ) -> Observation {
        let rig = SensorRig {
            camera: &self.scn.model.camera,
            profile: &self.scn.detector,
            estimate_sigma: self.scn.flight_noise.estimate_sigma,
        };
        let result = sense(frames, look, &self.truth, &mut self.wind, &rig, &mut self.world);
        for (_, pose) in frames {
            if let Ok(fp) = footprint_corners_world(pose, 0.0, &self.scn.model.camera) {
                self.coverage.stamp_footprint(&fp);
                if let Some(map) = extra.as_deref_mut() {
                    map.stamp_footprint(&fp);
                }
            }
        }
        let mut obs = result.observation;
        match obs.detection {
            Some(d) if d.confidence >= self.scn.model.zeta_min => {
                self.record.detections.push(DetectionEvent {
                    time: obs.time,
                    position: d.position,
                    confidence: d.confidence,
                    uav: obs.uav,
                    source: result.target,
                });
            }
            _ => obs.detection = None,
        }
        obs
    }

    fn finish(mut self, outcome: Outcome) -> RunRecord {
        self.set_mode(ModeState::Done { outcome });
        self.record.outcome = outcome;
        self.record.elapsed = self.t;
        self.record.coverage = self.coverage.coverage_ratio(&self.scn.model.survey);
        self.record
    }

    fn safety_outcome(&self) -> Option<Outcome> {
        if self.truth.obstacles.is_occupied(&self.pose) {
            Some(Outcome::Crash)
        } else if !self.scn.model.within_limits(&self.pose) {
            Some(Outcome::OutOfBounds)
        } else {
            None
        }
    }

    /// One survey tick: advance up to `speed * dt` along the plan, with the
    /// detector's frames spread over the distance flown.
    fn survey_tick(&mut self, plan: &FlightPlan, s: &mut f64) -> (Observation, usize) {
        let cfg = &self.scn.model;
        let remaining = plan.length() - *s;
        let span = (plan.speed * cfg.dt).min(remaining);
        let duration = span / plan.speed;
        let n = self.scn.detector.frames.max(1);
        let start = plan.point_at(*s).0;
        let mut frames = Vec::with_capacity(n as usize);
        for i in 1..=n {
            let f = i as f64 / n as f64;
            let p = plan.point_at(*s + f * span).0;
            let (nx, ny, nz) = self.flight_noise();
            frames.push((self.t + f * duration, p.offset(nx, ny, nz)));
        }
        *s += span;
        self.t += duration;
        let (end, leg) = plan.point_at(*s);
        self.pose = frames.last().expect("at least one frame").1;
        let dir = (end.x - start.x, end.y - start.y, 0.0);
        let obs = self.observe(&frames, (dir, plan.speed * cfg.dt), None);
        self.log_point(Phase::Survey, None);
        (obs, leg)
    }

    fn boot(&mut self, model: &UavModel, at: EnuPoint) -> Result<Tree, SimError> {
        let ready = self.t + self.scn.mission.boot_time;
        let belief = initial_belief(at, &model.prior, ready, self.scn.solver.particles, &mut self.planner);
        let tree = bootstrap(model, belief, &self.scn.solver, &mut self.planner)?;
        self.t = ready;
        Ok(tree)
    }

    /// Plan, act, sense and update until the episode ends. With an
    /// inspection map the loop runs as a hybrid sub-episode: it has a step
    /// cap, may discard the detection, and never re-initialises.
    fn pomdp_loop(
        &mut self,
        model: &mut UavModel,
        tree: &mut Tree,
        mut inspection: Option<&mut CoverageMap>,
    ) -> Result<LoopEnd, SimError> {
        let cfg = self.scn.model.clone();
        let solver = self.scn.solver.clone();
        let hybrid = self.scn.mission.hybrid;
        let phase = if inspection.is_some() {
            Phase::Inspecting
        } else {
            Phase::Planning
        };
        let mut steps = 0;
        let mut resets = 0;
        loop {
            if self.t >= cfg.t_max {
                return Ok(LoopEnd::Timeout);
            }
            if inspection.is_some() && steps >= hybrid.step_cap {
                return Ok(LoopEnd::Discarded);
            }
            let a_idx = plan_step(tree, model, &solver, &mut self.planner)?;
            let q = tree.root_values();
            let action = ActionCmd::ALL[a_idx];
            let (dx, dy, dz) = displacement(action, self.pose.z, &cfg);
            let (nx, ny, nz) = self.flight_noise();
            let look = look_ahead(action, self.pose.z, &cfg);
            self.pose = self.pose.offset(dx + nx, dy + ny, dz + nz);
            self.t += cfg.dt;
            steps += 1;
            self.log_point(phase, Some(action));
            if let Some(outcome) = self.safety_outcome() {
                return Ok(match outcome {
                    Outcome::Crash => LoopEnd::Crash,
                    _ => LoopEnd::OutOfBounds,
                });
            }

            let frames = hover_frames(self.pose, self.t, &self.scn.detector);
            let obs = self.observe(&frames, look, inspection.as_deref_mut());
            match inspection.as_deref() {
                Some(local) => model.set_coverage(local.clone()),
                None => model.set_coverage(self.coverage.clone()),
            }

            let observed = PomdpState {
                detected: obs.detection.is_some(),
                confidence: obs.detection.map(|d| d.confidence).unwrap_or(0.0),
                ..PomdpState::new(obs.uav, None, self.t)
            };
            if observed.confidence >= cfg.zeta {
                return Ok(match obs.detection {
                    Some(d) => {
                        self.record.confirmations.push(Confirmation {
                            time: self.t,
                            position: d.position,
                            confidence: d.confidence,
                        });
                        self.record.recorded.push(d.position);
                        LoopEnd::Confirmed
                    }
                    // only reachable with a zero threshold
                    None => LoopEnd::SurveyComplete,
                });
            }

            match advance_belief(tree, a_idx, &obs, model, &solver, &mut self.planner) {
                Ok(report) => self.record.solver_trace.push(SolverTraceRow {
                    time: self.t,
                    action,
                    q,
                    particles: tree.belief().len(),
                    episodes: solver.episodes_per_step,
                    survival: report.survival_fraction,
                    reinvigorated: report.reinvigorated,
                    reused: report.reused,
                }),
                Err(SolverError::BeliefCollapse) => {
                    self.record.solver_trace.push(SolverTraceRow {
                        time: self.t,
                        action,
                        q,
                        particles: 0,
                        episodes: solver.episodes_per_step,
                        survival: 0.0,
                        reinvigorated: 0,
                        reused: false,
                    });
                    if inspection.is_some() {
                        return Ok(LoopEnd::Discarded);
                    }
                    resets += 1;
                    self.record.belief_resets += 1;
                    if resets > self.scn.mission.max_belief_resets {
                        if self.scn.mission.collapse_is_error {
                            return Err(SolverError::BeliefCollapse.into());
                        }
                        return Ok(LoopEnd::Timeout);
                    }
                    *tree = self.boot(model, obs.uav)?;
                }
                Err(e) => return Err(e.into()),
            }
            if inspection.is_none() && self.coverage.coverage_ratio(&cfg.survey) >= self.scn.mission.coverage_target {
                return Ok(LoopEnd::SurveyComplete);
            }
            if inspection.is_some() && tree.belief().mass(|s| s.victim.is_some()) < hybrid.discard_mass {
                return Ok(LoopEnd::Discarded);
            }
        }
    }
}

/// Waypoint survey that logs every detection above the minimum confidence.
pub fn run_mission(scn: &Scenario, seed: u64) -> Result<RunRecord, SimError> {
    scn.validate()?;
    let plan = scn.flight_plan()?;
    let mut f = Flight::new(scn, Mode::Mission, seed);
    f.pose = plan.waypoints[0];
    f.set_mode(ModeState::MissionLeg { leg: 0 });
    f.log_point(Phase::Survey, None);
    let total = plan.length();
    let mut s = 0.0;
    let mut leg = 0;
    while s < total - 1e-9 {
        if f.t >= scn.model.t_max {
            return Ok(f.finish(Outcome::Timeout));
        }
        let (obs, now_leg) = f.survey_tick(&plan, &mut s);
        if now_leg != leg {
            leg = now_leg;
            f.set_mode(ModeState::MissionLeg { leg });
        }
        if let Some(outcome) = f.safety_outcome() {
            return Ok(f.finish(outcome));
        }
        if let Some(d) = obs.detection {
            f.record.recorded.push(d.position);
        }
    }
    let outcome = if f.record.recorded.is_empty() {
        Outcome::SurveyCompleteNoVictim
    } else {
        Outcome::SurveyComplete
    };
    Ok(f.finish(outcome))
}

/// Pure POMDP exploration from the start pose until confirmation, full
/// coverage or the time limit.
pub fn run_offboard(scn: &Scenario, seed: u64) -> Result<RunRecord, SimError> {
    scn.validate()?;
    let cfg = &scn.model;
    let mut f = Flight::new(scn, Mode::Offboard, seed);
    f.pose = cfg.start;
    f.set_mode(ModeState::OffboardPlanning);
    f.log_point(Phase::Planning, None);
    let prior = VictimPrior::uniform(cfg.survey.as_footprint());
    let mut model = UavModel::new(cfg.clone(), scn.reward, f.truth.obstacles.clone(), prior);
    let mut tree = f.boot(&model, cfg.start)?;
    let outcome = match f.pomdp_loop(&mut model, &mut tree, None)? {
        LoopEnd::Confirmed => Outcome::Confirmed,
        LoopEnd::SurveyComplete | LoopEnd::Discarded => Outcome::SurveyCompleteNoVictim,
        LoopEnd::Timeout => Outcome::Timeout,
        LoopEnd::Crash => Outcome::Crash,
        LoopEnd::OutOfBounds => Outcome::OutOfBounds,
    };
    Ok(f.finish(outcome))
}

/// Waypoint survey that pauses on each new detection to inspect it with
/// the planner, then returns to where it left the plan.
pub fn run_hybrid(scn: &Scenario, seed: u64) -> Result<RunRecord, SimError> {
    scn.validate()?;
    let cfg = &scn.model;
    let hybrid = scn.mission.hybrid;
    let plan = scn.flight_plan()?;
    let mut f = Flight::new(scn, Mode::Hybrid, seed);
    f.pose = plan.waypoints[0];
    f.set_mode(ModeState::MissionLeg { leg: 0 });
    f.log_point(Phase::Survey, None);
    let total = plan.length();
    let mut inspected: Vec<EnuPoint> = Vec::new();
    let mut s = 0.0;
    let mut leg = 0;
    while s < total - 1e-9 {
        if f.t >= cfg.t_max {
            return Ok(f.finish(Outcome::Timeout));
        }
        let (obs, now_leg) = f.survey_tick(&plan, &mut s);
        if now_leg != leg {
            leg = now_leg;
            f.set_mode(ModeState::MissionLeg { leg });
        }
        if let Some(outcome) = f.safety_outcome() {
            return Ok(f.finish(outcome));
        }
        let Some(d) = obs.detection else { continue };
        if inspected
            .iter()
            .any(|p| p.horizontal_distance(&d.position) <= hybrid.retrigger_radius)
        {
            continue;
        }
        inspected.push(d.position);
        let resume = plan.point_at(s).0;
        f.set_mode(ModeState::HybridInspecting {
            resume,
            resume_leg: leg,
        });
        f.record.inspections += 1;

        let Ok(view) = footprint_corners_world(&obs.uav, 0.0, &cfg.camera) else {
            continue;
        };
        let prior = VictimPrior {
            region: view,
            absent_fraction: hybrid.absent_fraction,
        };
        let mut model = UavModel::new(cfg.clone(), scn.reward, f.truth.obstacles.clone(), prior);
        let mut local = planning_coverage(cfg);
        let mut tree = f.boot(&model, obs.uav)?;
        match f.pomdp_loop(&mut model, &mut tree, Some(&mut local))? {
            LoopEnd::Confirmed => {
                if let Some(c) = f.record.confirmations.last() {
                    inspected.push(c.position);
                }
            }
            LoopEnd::Discarded | LoopEnd::SurveyComplete => {}
            LoopEnd::Timeout => return Ok(f.finish(Outcome::Timeout)),
            LoopEnd::Crash => return Ok(f.finish(Outcome::Crash)),
            LoopEnd::OutOfBounds => return Ok(f.finish(Outcome::OutOfBounds)),
        }
        let back =
            ((f.pose.x - resume.x).powi(2) + (f.pose.y - resume.y).powi(2) + (f.pose.z - resume.z).powi(2)).sqrt();
        f.t += back / plan.speed;
        f.pose = resume;
        f.log_point(Phase::Transit, None);
        f.set_mode(ModeState::MissionLeg { leg });
    }
    let outcome = if f.record.confirmations.is_empty() {
        Outcome::SurveyCompleteNoVictim
    } else {
        Outcome::Confirmed
    };
    Ok(f.finish(outcome))
}

pub fn run(scn: &Scenario, mode: Mode, seed: u64) -> Result<RunRecord, SimError> {
    match mode {
        Mode::Mission => run_mission(scn, seed),
        Mode::Offboard => run_offboard(scn, seed),
        Mode::Hybrid => run_hybrid(scn, seed),
    }
}

/// `runs` independent flights with seeds derived from `master_seed`,
/// returned in run order whatever the worker count.
pub fn run_batch(scn: &Scenario, mode: Mode, runs: usize, master_seed: u64) -> Result<Vec<RunRecord>, SimError> {
    scn.validate()?;
    let job = |i: usize| run(scn, mode, run_seed(master_seed, i as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..runs).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..runs).map(job).collect()
    }
}

#[cfg(test)]
mod tests;

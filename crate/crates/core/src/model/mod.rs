//! The search task as a POMDP: states, actions, observations, the reward
//! function, and a generative model the solver can sample.

mod config;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use config::{ConfidenceMode, DetectorModel, ModelConfig, MotionNoise, RewardParams};

use crate::coverage::CoverageMap;
use crate::geo::{
    footprint_corners_world, footprint_extent, manhattan, manhattan3, point_in_footprint, EnuPoint, Footprint,
};
use crate::solver::{uniform_legal, GenerativeModel, ParticleBelief, Step};
use crate::world::OccupancyGrid;

/// The seven position commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionCmd {
    Forward,
    Backward,
    Left,
    Right,
    Up,
    Down,
    Hover,
}

impl ActionCmd {
    pub const ALL: [ActionCmd; 7] = [
        ActionCmd::Forward,
        ActionCmd::Backward,
        ActionCmd::Left,
        ActionCmd::Right,
        ActionCmd::Up,
        ActionCmd::Down,
        ActionCmd::Hover,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionCmd::Forward => "forward",
            ActionCmd::Backward => "backward",
            ActionCmd::Left => "left",
            ActionCmd::Right => "right",
            ActionCmd::Up => "up",
            ActionCmd::Down => "down",
            ActionCmd::Hover => "hover",
        }
    }
}

/// Commanded displacement for `action` from altitude `z`. Forward/backward
/// move along x, left/right along y, each by the footprint length on that
/// axis reduced by the configured overlap.
pub fn displacement(action: ActionCmd, z: f64, cfg: &ModelConfig) -> (f64, f64, f64) {
    let (lx, ly) = footprint_extent(z, &cfg.camera)
        .map(|e| (e.length_x(), e.length_y()))
        .unwrap_or((0.0, 0.0));
    let dx = lx * (1.0 - cfg.overlap);
    let dy = ly * (1.0 - cfg.overlap);
    match action {
        ActionCmd::Forward => (dx, 0.0, 0.0),
        ActionCmd::Backward => (-dx, 0.0, 0.0),
        ActionCmd::Left => (0.0, dy, 0.0),
        ActionCmd::Right => (0.0, -dy, 0.0),
        ActionCmd::Up => (0.0, 0.0, cfg.delta_z),
        ActionCmd::Down => (0.0, 0.0, -cfg.delta_z),
        ActionCmd::Hover => (0.0, 0.0, 0.0),
    }
}

/// Direction and range used for the obstacle-ahead flag. Vertical moves
/// and hovering look along the heading (+x).
pub fn look_ahead(action: ActionCmd, z: f64, cfg: &ModelConfig) -> ((f64, f64, f64), f64) {
    let d = displacement(action, z, cfg);
    match action {
        ActionCmd::Forward | ActionCmd::Backward | ActionCmd::Left | ActionCmd::Right => {
            (d, (d.0 * d.0 + d.1 * d.1).sqrt())
        }
        _ => {
            let fwd = displacement(ActionCmd::Forward, z, cfg);
            (fwd, fwd.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PomdpState {
    pub uav: EnuPoint,
    pub crashed: bool,
    pub out_of_bounds: bool,
    /// A potential victim was detected by the last observation.
    pub detected: bool,
    /// Hypothesised victim position; `None` means no victim in the region.
    pub victim: Option<EnuPoint>,
    pub confidence: f64,
    /// Mission clock in seconds.
    pub elapsed: f64,
}

impl PomdpState {
    pub fn new(uav: EnuPoint, victim: Option<EnuPoint>, elapsed: f64) -> Self {
        Self {
            uav,
            crashed: false,
            out_of_bounds: false,
            detected: false,
            victim,
            confidence: 0.0,
            elapsed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub position: EnuPoint,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Estimated UAV position.
    pub uav: EnuPoint,
    pub detection: Option<Detection>,
    pub obstacle_ahead: bool,
    /// Mission clock when the observation was taken.
    pub time: f64,
}

/// Discretised observation used to branch the belief tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObsKey {
    pub detected: bool,
    pub confidence_bin: i64,
    pub victim_cell: (i64, i64),
    pub uav_cell: (i64, i64, i64),
    pub obstacle: bool,
}

/// Region the hidden victim is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VictimPrior {
    pub region: Footprint,
    /// Probability mass on "no victim in the region".
    pub absent_fraction: f64,
}

impl VictimPrior {
    pub fn uniform(region: Footprint) -> Self {
        Self {
            region,
            absent_fraction: 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<EnuPoint> {
        if self.absent_fraction > 0.0 && rng.random::<f64>() < self.absent_fraction {
            return None;
        }
        Some(sample_in_footprint(&self.region, rng))
    }
}

/// Uniform point inside a convex quadrilateral by bounding-box rejection.
pub fn sample_in_footprint<R: Rng + ?Sized>(fp: &Footprint, rng: &mut R) -> EnuPoint {
    let (x0, y0, x1, y1) = fp.bbox();
    for _ in 0..1_000 {
        let p = EnuPoint::ground(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
        if point_in_footprint(&p, fp) {
            return p;
        }
    }
    fp.centroid()
}

fn normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        sigma * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Modeled detection confidence at UAV-victim distance `d_uv`.
pub fn modeled_confidence(d_uv: f64, cfg: &ModelConfig) -> f64 {
    let span = cfg.z_max - cfg.z_min;
    match cfg.confidence_mode {
        ConfidenceMode::Proximity => {
            let d = d_uv.clamp(cfg.z_min, cfg.z_max);
            cfg.zeta_min + (1.0 - cfg.zeta_min) * (cfg.z_max - d) / span
        }
        ConfidenceMode::Literal => ((1.0 - cfg.zeta_min) * (d_uv - cfg.z_min + cfg.zeta_min) / span).clamp(0.0, 1.0),
    }
}

/// Rounds a confidence to the nearest bin centre.
pub fn bin_confidence(c: f64, width: f64) -> f64 {
    ((c / width).round() * width).clamp(0.0, 1.0)
}

/// Reward for arriving in `s` (already carrying the flags of the new
/// state) after `action`.
pub fn reward(
    s: &PomdpState,
    action: ActionCmd,
    eps: f64,
    d_v: f64,
    d_w: f64,
    p: &RewardParams,
    cfg: &ModelConfig,
) -> f64 {
    let altitude = 1.0 - (s.uav.z - cfg.z_min) / (cfg.z_max - cfg.z_min);
    let mut r;
    if s.crashed {
        r = p.crash;
    } else if s.out_of_bounds {
        r = p.out;
    } else if s.detected {
        r = p.detection;
        r += p.detection * altitude;
        if s.confidence >= cfg.zeta && action == ActionCmd::Down {
            r += p.confirmation;
        }
    } else {
        r = p.action;
        r -= p.detection * altitude;
        r -= p.detection * (1.0 - 0.5f64.powf(4.0 * d_v / d_w));
        r += p.fov * eps;
    }
    r
}

pub fn is_terminal(s: &PomdpState, cfg: &ModelConfig) -> bool {
    s.crashed || s.out_of_bounds || s.confidence >= cfg.zeta || s.elapsed >= cfg.t_max
}

/// Moves the UAV and recomputes the safety flags. Detection fields are
/// reset; they are filled from the observation that follows.
pub fn transition<R: Rng + ?Sized>(
    s: &PomdpState,
    action: ActionCmd,
    cfg: &ModelConfig,
    obstacles: &OccupancyGrid,
    rng: &mut R,
) -> PomdpState {
    let (dx, dy, dz) = displacement(action, s.uav.z, cfg);
    let n = &cfg.noise;
    let uav = s.uav.offset(
        dx + normal(rng, n.horizontal_sigma),
        dy + normal(rng, n.horizontal_sigma),
        dz + normal(rng, n.vertical_sigma),
    );
    PomdpState {
        uav,
        crashed: obstacles.is_occupied(&uav),
        out_of_bounds: !cfg.within_limits(&uav),
        detected: false,
        victim: s.victim,
        confidence: 0.0,
        elapsed: s.elapsed + cfg.dt,
    }
}

/// Probability that at least one of `n` frames fires at per-frame rate `p`.
fn any_fires(p: f64, n: u32) -> f64 {
    1.0 - (1.0 - p).powi(n as i32)
}

/// The planner's model of what the sensors report from `s`.
pub fn generate_observation<R: Rng + ?Sized>(
    s: &PomdpState,
    action: ActionCmd,
    cfg: &ModelConfig,
    obstacles: &OccupancyGrid,
    rng: &mut R,
) -> Observation {
    let uav = s.uav.offset(
        normal(rng, cfg.noise.estimate_sigma),
        normal(rng, cfg.noise.estimate_sigma),
        normal(rng, cfg.noise.estimate_sigma),
    );
    let det = &cfg.detector;
    let mut detection = None;
    if let Ok(fp) = footprint_corners_world(&s.uav, 0.0, &cfg.camera) {
        if let Some(v) = s.victim.filter(|v| point_in_footprint(v, &fp)) {
            let c = modeled_confidence(manhattan3(&s.uav, &v), cfg);
            if !det.misses || rng.random::<f64>() < (1.0 - det.dropout) * any_fires(c, det.frames) {
                detection = Some(Detection {
                    position: v.offset(
                        normal(rng, det.localization_sigma),
                        normal(rng, det.localization_sigma),
                        0.0,
                    ),
                    confidence: bin_confidence(c, cfg.confidence_bin),
                });
            }
        }
        if detection.is_none()
            && det.spurious_rate > 0.0
            && rng.random::<f64>() < any_fires(det.spurious_rate, det.frames)
        {
            detection = Some(Detection {
                position: sample_in_footprint(&fp, rng),
                confidence: bin_confidence(1.0 / det.frames as f64, cfg.confidence_bin),
            });
        }
    }
    let (dir, range) = look_ahead(action, s.uav.z, cfg);
    Observation {
        uav,
        detection,
        obstacle_ahead: obstacles.occupied_ahead(&s.uav, dir, range),
        time: s.elapsed,
    }
}

/// Particles for a fresh belief: the UAV at `start`, victims from `prior`.
pub fn initial_belief<R: Rng + ?Sized>(
    start: EnuPoint,
    prior: &VictimPrior,
    elapsed: f64,
    n_particles: usize,
    rng: &mut R,
) -> ParticleBelief<PomdpState> {
    ParticleBelief::new(
        (0..n_particles.max(1))
            .map(|_| PomdpState::new(start, prior.sample(rng), elapsed))
            .collect(),
    )
}

/// Empty coverage map sized so that footprints taken anywhere inside the
/// flying limits stay on the map.
pub fn planning_coverage(cfg: &ModelConfig) -> CoverageMap {
    let reach = footprint_extent(cfg.z_max + cfg.roi_margin_vertical, &cfg.camera)
        .map(|e| e.length_x().max(e.length_y()))
        .unwrap_or(0.0);
    CoverageMap::for_survey(&cfg.survey, cfg.roi_margin_horizontal + reach, cfg.cell_size)
}

/// Generative model used by the solver. Holds the coverage seen so far so
/// that simulated footprints pay the overlap cost.
#[derive(Debug, Clone)]
pub struct UavModel {
    pub cfg: ModelConfig,
    pub rewards: RewardParams,
    pub obstacles: OccupancyGrid,
    pub prior: VictimPrior,
    coverage: CoverageMap,
}

impl UavModel {
    pub fn new(cfg: ModelConfig, rewards: RewardParams, obstacles: OccupancyGrid, prior: VictimPrior) -> Self {
        let coverage = planning_coverage(&cfg);
        Self {
            cfg,
            rewards,
            obstacles,
            prior,
            coverage,
        }
    }

    pub fn coverage(&self) -> &CoverageMap {
        &self.coverage
    }

    pub fn set_coverage(&mut self, coverage: CoverageMap) {
        self.coverage = coverage;
    }

    pub fn coverage_mut(&mut self) -> &mut CoverageMap {
        &mut self.coverage
    }

    fn footprint(&self, uav: &EnuPoint) -> Option<Footprint> {
        footprint_corners_world(uav, 0.0, &self.cfg.camera).ok()
    }

    /// Observation likelihood of `obs` for a victim hypothesis seen from
    /// `uav`, scaled so the best case is at most 1.
    fn likelihood(&self, uav: &EnuPoint, victim: Option<EnuPoint>, obs: &Observation) -> f64 {
        let det = &self.cfg.detector;
        let Some(fp) = self.footprint(uav) else {
            return if obs.detection.is_none() { 1.0 } else { 0.0 };
        };
        let p_det = match victim.filter(|v| point_in_footprint(v, &fp)) {
            Some(v) if det.misses => {
                (1.0 - det.dropout) * any_fires(modeled_confidence(manhattan3(uav, &v), &self.cfg), det.frames)
            }
            Some(_) => 1.0,
            None => 0.0,
        };
        let q = any_fires(det.spurious_rate, det.frames);
        match (&obs.detection, victim) {
            (None, _) => 1.0 - p_det,
            (Some(d), v) => {
                let sigma = det.localization_sigma.max(1e-3);
                let kernel = v
                    .map(|v| {
                        let r2 = (d.position.x - v.x).powi(2) + (d.position.y - v.y).powi(2);
                        (-r2 / (2.0 * sigma * sigma)).exp()
                    })
                    .unwrap_or(0.0);
                let uniform = (std::f64::consts::TAU * sigma * sigma / fp.area().max(1e-9)).min(1.0);
                (p_det * kernel + (1.0 - p_det) * q * uniform).clamp(0.0, 1.0)
            }
        }
    }

    fn observed_state(&self, mut s: PomdpState, obs: &Observation) -> PomdpState {
        s.uav = obs.uav;
        s.crashed = self.obstacles.is_occupied(&obs.uav);
        s.out_of_bounds = !self.cfg.within_limits(&obs.uav);
        s.detected = obs.detection.is_some();
        s.confidence = obs.detection.map(|d| d.confidence).unwrap_or(0.0);
        s
    }
}

impl GenerativeModel for UavModel {
    type State = PomdpState;
    type Observation = Observation;
    type ObsKey = ObsKey;
    type Context = CoverageMap;

    fn num_actions(&self) -> usize {
        ActionCmd::ALL.len()
    }

    fn discount(&self) -> f64 {
        self.cfg.gamma
    }

    fn max_abs_reward(&self) -> f64 {
        let p = &self.rewards;
        let c = &self.cfg;
        let alt = 1.0 + c.roi_margin_vertical / (c.z_max - c.z_min);
        let detected = p.detection.abs() * (1.0 + alt) + p.confirmation.abs();
        let exploring = p.action.abs() + p.detection.abs() * (alt + 1.0) + p.fov.abs();
        p.crash.abs().max(p.out.abs()).max(detected).max(exploring)
    }

    fn begin_episode(&self) -> CoverageMap {
        self.coverage.clone()
    }

    fn step<R: Rng + ?Sized>(
        &self,
        coverage: &mut CoverageMap,
        state: &PomdpState,
        action: usize,
        rng: &mut R,
    ) -> Step<PomdpState, Observation> {
        let a = ActionCmd::ALL[action];
        let mut next = transition(state, a, &self.cfg, &self.obstacles, rng);
        let observation = generate_observation(&next, a, &self.cfg, &self.obstacles, rng);
        next.detected = observation.detection.is_some();
        next.confidence = observation.detection.map(|d| d.confidence).unwrap_or(0.0);
        let eps = self
            .footprint(&next.uav)
            .map(|fp| coverage.overlap_then_stamp(&fp))
            .unwrap_or(0.0);
        let d_w = self.cfg.d_w();
        let d_v = next.victim.map(|v| manhattan(&next.uav, &v)).unwrap_or(d_w);
        let r = reward(&next, a, eps, d_v, d_w, &self.rewards, &self.cfg);
        Step {
            state: next,
            observation,
            reward: r,
        }
    }

    fn is_terminal(&self, state: &PomdpState) -> bool {
        is_terminal(state, &self.cfg)
    }

    fn is_legal(&self, state: &PomdpState, action: usize) -> bool {
        if !self.cfg.safe_actions {
            return true;
        }
        let Some(a) = ActionCmd::from_index(action) else {
            return false;
        };
        let (dx, dy, dz) = displacement(a, state.uav.z, &self.cfg);
        let target = state.uav.offset(dx, dy, dz);
        // keep clear of the limits by three noise deviations
        let n = &self.cfg.noise;
        let (h, v) = (3.0 * n.horizontal_sigma, 3.0 * n.vertical_sigma);
        self.cfg.within_limits_by(&target, h, v) && !self.obstacles.is_occupied(&target)
    }

    fn rollout_action<R: Rng + ?Sized>(&self, state: &PomdpState, legal: &[bool], rng: &mut R) -> usize {
        let Some(v) = state.victim else {
            return uniform_legal(legal, rng);
        };
        if rng.random::<f64>() < self.cfg.rollout_randomness {
            return uniform_legal(legal, rng);
        }
        // head for the hypothesised victim, then descend over it
        let sx = displacement(ActionCmd::Forward, state.uav.z, &self.cfg).0;
        let sy = displacement(ActionCmd::Left, state.uav.z, &self.cfg).1;
        let (dx, dy) = (v.x - state.uav.x, v.y - state.uav.y);
        let preference = [
            (
                dx.abs() > 0.5 * sx,
                if dx > 0.0 {
                    ActionCmd::Forward
                } else {
                    ActionCmd::Backward
                },
            ),
            (
                dy.abs() > 0.5 * sy,
                if dy > 0.0 { ActionCmd::Left } else { ActionCmd::Right },
            ),
            (true, ActionCmd::Down),
            (true, ActionCmd::Hover),
        ];
        preference
            .iter()
            .find(|(wanted, a)| *wanted && legal[a.index()])
            .map(|(_, a)| a.index())
            .unwrap_or_else(|| uniform_legal(legal, rng))
    }

    fn observation_key(&self, obs: &Observation) -> ObsKey {
        let c = self.cfg.cell_size;
        let bin = |v: f64| (v / c).floor() as i64;
        let (detected, confidence_bin, victim_cell) = match obs.detection {
            Some(d) => (
                true,
                (d.confidence / self.cfg.confidence_bin).round() as i64,
                (bin(d.position.x), bin(d.position.y)),
            ),
            None => (false, 0, (0, 0)),
        };
        ObsKey {
            detected,
            confidence_bin,
            victim_cell,
            uav_cell: (bin(obs.uav.x), bin(obs.uav.y), bin(obs.uav.z)),
            obstacle: obs.obstacle_ahead,
        }
    }

    fn assimilate(&self, next: PomdpState, _action: usize, obs: &Observation) -> (PomdpState, f64) {
        let w = self.likelihood(&obs.uav, next.victim, obs);
        (self.observed_state(next, obs), w)
    }

    fn reinvigorate<R: Rng + ?Sized>(&self, _action: usize, obs: &Observation, rng: &mut R) -> Option<PomdpState> {
        let victim = match obs.detection {
            // propose near the reported position most of the time, but keep
            // some prior draws so a spurious report cannot trap the belief
            Some(d) if rng.random::<f64>() < 0.8 => {
                let s = self.cfg.detector.localization_sigma;
                Some(d.position.offset(normal(rng, s), normal(rng, s), 0.0))
            }
            _ => self.prior.sample(rng),
        };
        let mut s = PomdpState::new(obs.uav, victim, obs.time);
        s.victim = victim.map(|v| EnuPoint::ground(v.x, v.y));
        Some(s)
    }
}

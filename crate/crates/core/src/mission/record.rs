use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geo::EnuPoint;
use crate::model::ActionCmd;
use crate::world::TargetRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mission,
    Offboard,
    Hybrid,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Mission, Mode::Offboard, Mode::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mission => "mission",
            Mode::Offboard => "offboard",
            Mode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mission" => Ok(Mode::Mission),
            "offboard" => Ok(Mode::Offboard),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// A detection reached the confirmation threshold.
    Confirmed,
    /// The waypoint survey finished with raw detections logged.
    SurveyComplete,
    SurveyCompleteNoVictim,
    Timeout,
    Crash,
    OutOfBounds,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Confirmed => "confirmed",
            Outcome::SurveyComplete => "survey-complete",
            Outcome::SurveyCompleteNoVictim => "survey-complete-no-victim",
            Outcome::Timeout => "timeout",
            Outcome::Crash => "crash",
            Outcome::OutOfBounds => "out-of-bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum ModeState {
    MissionLeg { leg: usize },
    OffboardPlanning,
    HybridInspecting { resume: EnuPoint, resume_leg: usize },
    Done { outcome: Outcome },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTransition {
    pub time: f64,
    #[serde(flatten)]
    pub state: ModeState,
}

/// Phase tag on trajectory rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Survey,
    Planning,
    Inspecting,
    Transit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phase: Phase,
    pub action: Option<ActionCmd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub time: f64,
    pub position: EnuPoint,
    pub confidence: f64,
    /// Estimated UAV position when the detection was reported.
    pub uav: EnuPoint,
    /// Ground-truth source of the detection, kept for analysis only.
    pub source: Option<TargetRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confirmation {
    pub time: f64,
    pub position: EnuPoint,
    pub confidence: f64,
}

/// Solver state after one planning call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTraceRow {
    pub time: f64,
    pub action: ActionCmd,
    /// Root value per action, in action index order.
    pub q: Vec<Option<f64>>,
    pub particles: usize,
    pub episodes: usize,
    pub survival: f64,
    pub reinvigorated: usize,
    pub reused: bool,
}

/// Everything one simulated flight produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mode: Mode,
    pub seed: u64,
    pub scenario: String,
    pub outcome: Outcome,
    pub elapsed: f64,
    pub coverage: f64,
    /// Coordinates reported as victims: every logged detection in mission
    /// mode, confirmations otherwise.
    pub recorded: Vec<EnuPoint>,
    pub confirmations: Vec<Confirmation>,
    pub detections: Vec<DetectionEvent>,
    pub inspections: usize,
    pub belief_resets: usize,
    pub mode_log: Vec<ModeTransition>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub solver_trace: Vec<SolverTraceRow>,
}

impl RunRecord {
    pub fn new(mode: Mode, seed: u64, scenario: &str) -> Self {
        Self {
            mode,
            seed,
            scenario: scenario.to_string(),
            outcome: Outcome::Timeout,
            elapsed: 0.0,
            coverage: 0.0,
            recorded: Vec::new(),
            confirmations: Vec::new(),
            detections: Vec::new(),
            inspections: 0,
            belief_resets: 0,
            mode_log: Vec::new(),
            trajectory: Vec::new(),
            solver_trace: Vec::new(),
        }
    }

    pub fn first_detection(&self) -> Option<&DetectionEvent> {
        self.detections.first()
    }
}

fn opt_action(a: Option<ActionCmd>) -> &'static str {
    a.map(ActionCmd::name).unwrap_or("")
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Survey => "survey",
        Phase::Planning => "planning",
        Phase::Inspecting => "inspecting",
        Phase::Transit => "transit",
    }
}

/// `mode,seed,time,x,y,z,phase,action`, one row per trajectory point.
pub fn write_trajectory_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mode", "seed", "time", "x", "y", "z", "phase", "action"])?;
    for r in records {
        for p in &r.trajectory {
            w.write_record([
                r.mode.as_str().to_string(),
                r.seed.to_string(),
                p.time.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                phase_name(p.phase).to_string(),
                opt_action(p.action).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `mode,seed,x,y`, one row per recorded victim coordinate.
pub fn write_coordinates_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mode", "seed", "x", "y"])?;
    for r in records {
        for p in &r.recorded {
            w.write_record([
                r.mode.as_str().to_string(),
                r.seed.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per planning call; `q_<action>` columns are empty for actions
/// the search never tried.
pub fn write_solver_trace_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["mode", "seed", "time", "action"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(ActionCmd::ALL.iter().map(|a| format!("q_{}", a.name())));
    header.extend(
        ["particles", "episodes", "survival", "reinvigorated", "reused"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for r in records {
        for row in &r.solver_trace {
            let mut fields = vec![
                r.mode.as_str().to_string(),
                r.seed.to_string(),
                row.time.to_string(),
                row.action.name().to_string(),
            ];
            fields.extend(row.q.iter().map(|q| q.map(|v| v.to_string()).unwrap_or_default()));
            fields.extend([
                row.particles.to_string(),
                row.episodes.to_string(),
                row.survival.to_string(),
                row.reinvigorated.to_string(),
                row.reused.to_string(),
            ]);
            w.write_record(&fields)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per record, newline separated.
pub fn write_records_jsonl<W: Write>(records: &[RunRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_records_jsonl(text: &str) -> Result<Vec<RunRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

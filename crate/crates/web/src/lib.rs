//! Browser bindings: camera footprint, modeled confidence curve and a
//! single simulated flight, each returned as a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sarplan::geo::{footprint_corners_world, footprint_extent, CameraIntrinsics, EnuPoint};
use sarplan::mission::{run, Mode, Phase};
use sarplan::model::{modeled_confidence, ConfidenceMode, ModelConfig};
use sarplan::scenario::Scenario;
use sarplan::solver::SolverConfig;

#[derive(Debug, Serialize)]
pub struct FootprintView {
    pub corners: Vec<[f64; 2]>,
    pub length_x: f64,
    pub length_y: f64,
    pub area: f64,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub d: f64,
    pub c: f64,
}

#[derive(Debug, Serialize)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub confidence: f64,
}

#[derive(Debug, Serialize)]
pub struct FlightView {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub outcome: &'static str,
    pub elapsed: f64,
    pub coverage: f64,
    pub inspections: usize,
    /// `[x, y, z, t, phase]` with phase 0 survey, 1 planning, 2 inspecting, 3 transit.
    pub path: Vec<[f64; 5]>,
    pub detections: Vec<Marker>,
    pub confirmations: Vec<Marker>,
    pub victims: Vec<[f64; 2]>,
    pub distractors: Vec<[f64; 2]>,
    pub obstacles: Vec<[f64; 4]>,
    pub survey: [f64; 4],
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("views serialise to JSON")
}

pub fn footprint_json(x: f64, y: f64, z: f64, yaw_deg: f64) -> Result<String, String> {
    let cam = CameraIntrinsics::rgb();
    let ext = footprint_extent(z, &cam).map_err(|e| e.to_string())?;
    let fp = footprint_corners_world(&EnuPoint::new(x, y, z), yaw_deg.to_radians(), &cam).map_err(|e| e.to_string())?;
    Ok(to_json(&FootprintView {
        corners: fp.corners.iter().map(|p| [p.x, p.y]).collect(),
        length_x: ext.length_x(),
        length_y: ext.length_y(),
        area: fp.area(),
    }))
}

/// Modeled confidence over UAV-victim distances from 0 to `max_distance`.
pub fn confidence_curve_json(literal: bool, points: u32, max_distance: f64) -> String {
    let cfg = ModelConfig {
        confidence_mode: if literal {
            ConfidenceMode::Literal
        } else {
            ConfidenceMode::Proximity
        },
        ..ModelConfig::default()
    };
    let n = points.max(2);
    let curve: Vec<CurvePoint> = (0..n)
        .map(|i| {
            let d = max_distance * i as f64 / (n - 1) as f64;
            CurvePoint {
                d,
                c: modeled_confidence(d, &cfg),
            }
        })
        .collect();
    to_json(&curve)
}

fn phase_code(p: Phase) -> f64 {
    match p {
        Phase::Survey => 0.0,
        Phase::Planning => 1.0,
        Phase::Inspecting => 2.0,
        Phase::Transit => 3.0,
    }
}

pub fn simulate_json(scenario: &str, mode: &str, seed: u64) -> Result<String, String> {
    let mut scn = Scenario::preset(scenario).map_err(|e| e.to_string())?;
    scn.solver = SolverConfig::desk();
    let mode: Mode = mode.parse()?;
    let r = run(&scn, mode, seed).map_err(|e| e.to_string())?;
    let survey = scn.model.survey;
    Ok(to_json(&FlightView {
        scenario: scn.name.clone(),
        mode,
        seed,
        outcome: r.outcome.as_str(),
        elapsed: r.elapsed,
        coverage: r.coverage,
        inspections: r.inspections,
        path: r
            .trajectory
            .iter()
            .map(|p| [p.x, p.y, p.z, p.time, phase_code(p.phase)])
            .collect(),
        detections: r
            .detections
            .iter()
            .map(|d| Marker {
                x: d.position.x,
                y: d.position.y,
                t: d.time,
                confidence: d.confidence,
            })
            .collect(),
        confirmations: r
            .confirmations
            .iter()
            .map(|c| Marker {
                x: c.position.x,
                y: c.position.y,
                t: c.time,
                confidence: c.confidence,
            })
            .collect(),
        victims: scn.victims.iter().map(|v| [v.position.x, v.position.y]).collect(),
        distractors: scn.distractors.iter().map(|d| [d.position.x, d.position.y]).collect(),
        obstacles: scn
            .obstacles
            .iter()
            .map(|b| [b.min.x, b.min.y, b.max.x, b.max.y])
            .collect(),
        survey: [survey.min_x, survey.min_y, survey.max_x, survey.max_y],
    }))
}

/// Footprint corners and size for a UAV pose, heading in degrees.
#[wasm_bindgen]
pub fn footprint(x: f64, y: f64, z: f64, yaw_deg: f64) -> Result<String, JsValue> {
    footprint_json(x, y, z, yaw_deg).map_err(|e| JsValue::from_str(&e))
}

/// Modeled confidence against distance, `points` samples up to 25 m.
#[wasm_bindgen]
pub fn confidence_curve(literal: bool, points: u32) -> String {
    confidence_curve_json(literal, points, 25.0)
}

/// One seeded flight on a preset scenario.
#[wasm_bindgen]
pub fn run_simulation(scenario: &str, mode: &str, seed: u32) -> Result<String, JsValue> {
    simulate_json(scenario, mode, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn footprint_at_survey_altitude() {
        let v: Value = serde_json::from_str(&footprint_json(3.0, 30.0, 16.0, 0.0).unwrap()).unwrap();
        assert!((v["length_y"].as_f64().unwrap() - 7.0128).abs() < 1e-4);
        assert_eq!(v["corners"].as_array().unwrap().len(), 4);
        assert!(footprint_json(0.0, 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn curves_run_in_opposite_directions() {
        let near_far = |literal| {
            let v: Value = serde_json::from_str(&confidence_curve_json(literal, 30, 25.0)).unwrap();
            let pts = v.as_array().unwrap().clone();
            (pts[0]["c"].as_f64().unwrap(), pts[29]["c"].as_f64().unwrap())
        };
        let (near, far) = near_far(false);
        assert!(near > far);
        let (near, far) = near_far(true);
        assert!(near < far);
    }

    #[test]
    fn simulation_reports_a_flight() {
        let v: Value = serde_json::from_str(&simulate_json("empty", "mission", 4).unwrap()).unwrap();
        assert_eq!(v["outcome"], "survey-complete-no-victim");
        assert!(v["path"].as_array().unwrap().len() > 10);
        assert!(simulate_json("nowhere", "mission", 1).is_err());
        assert!(simulate_json("l1", "upwards", 1).is_err());
    }
}

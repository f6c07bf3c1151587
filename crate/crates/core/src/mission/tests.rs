use super::*;
use crate::solver::SolverConfig;
use crate::world::{Distractor, Victim, WindParams};

fn quick(mut scn: Scenario) -> Scenario {
    scn.solver = SolverConfig {
        episodes_per_step: 150,
        bootstrap_episodes: 400,
        max_depth: 8,
        particles: 400,
        ..SolverConfig::desk()
    };
    scn
}

#[test]
fn empty_survey_sees_everything_and_nothing() {
    let scn = Scenario::empty();
    for seed in 0..5 {
        let r = run_mission(&scn, seed).unwrap();
        assert_eq!(r.outcome, Outcome::SurveyCompleteNoVictim);
        assert!(r.detections.is_empty());
        assert!(r.coverage >= 0.99, "coverage {}", r.coverage);
        let plan = scn.flight_plan().unwrap();
        assert!((r.elapsed - plan.duration()).abs() < 1e-6);
    }
}

#[test]
fn permanent_gust_blinds_the_detector() {
    let mut scn = Scenario::l1();
    scn.wind = WindParams {
        rate: f64::INFINITY,
        mean_duration: f64::INFINITY,
    };
    for seed in 0..5 {
        let r = run_mission(&scn, seed).unwrap();
        assert!(r.detections.is_empty());
        assert_eq!(r.outcome, Outcome::SurveyCompleteNoVictim);
    }
}

#[test]
fn hybrid_without_triggers_flies_the_mission() {
    let scn = quick(Scenario::empty());
    let m = run_mission(&scn, 3).unwrap();
    let h = run_hybrid(&scn, 3).unwrap();
    assert_eq!(h.inspections, 0);
    assert_eq!(h.outcome, Outcome::SurveyCompleteNoVictim);
    assert!((h.elapsed - m.elapsed).abs() < 1e-9);
    let path = |r: &RunRecord| r.trajectory.iter().map(|p| (p.x, p.y, p.z)).collect::<Vec<_>>();
    assert_eq!(path(&h), path(&m));
}

#[test]
fn one_distractor_is_inspected_once() {
    let mut scn = quick(Scenario::empty());
    scn.distractors = vec![Distractor {
        position: EnuPoint::ground(3.0, 30.0),
        fp_rate: 0.1,
    }];
    let r = (0..20)
        .map(|seed| run_hybrid(&scn, seed).unwrap())
        .find(|r| r.inspections > 0)
        .expect("the distractor should trigger in some run");
    assert_eq!(r.inspections, 1);
    assert!(r.confirmations.is_empty());
    assert_eq!(r.outcome, Outcome::SurveyCompleteNoVictim);
    let states: Vec<_> = r.mode_log.iter().map(|m| m.state).collect();
    let at = states
        .iter()
        .position(|s| matches!(s, ModeState::HybridInspecting { .. }))
        .unwrap();
    assert!(matches!(states[at - 1], ModeState::MissionLeg { .. }));
    assert!(matches!(states[at + 1], ModeState::MissionLeg { .. }));
    assert!(r.trajectory.iter().any(|p| p.phase == Phase::Transit));
}

#[test]
fn mode_log_is_bracketed() {
    let scn = quick(Scenario::l1());
    for mode in Mode::ALL {
        let r = run(&scn, mode, 5).unwrap();
        let first = r.mode_log.first().unwrap();
        assert_eq!(first.time, 0.0);
        match mode {
            Mode::Offboard => assert_eq!(first.state, ModeState::OffboardPlanning),
            _ => assert_eq!(first.state, ModeState::MissionLeg { leg: 0 }),
        }
        assert_eq!(r.mode_log.last().unwrap().state, ModeState::Done { outcome: r.outcome });
        assert!(r.mode_log.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(r.trajectory.windows(2).all(|w| w[0].time <= w[1].time));
    }
}

#[test]
fn runs_are_deterministic() {
    let scn = quick(Scenario::l2());
    for mode in Mode::ALL {
        assert_eq!(run(&scn, mode, 42).unwrap(), run(&scn, mode, 42).unwrap());
    }
}

#[test]
fn batch_matches_single_runs() {
    let scn = Scenario::l1();
    let batch = run_batch(&scn, Mode::Mission, 6, 9).unwrap();
    for (i, r) in batch.iter().enumerate() {
        assert_eq!(*r, run_mission(&scn, run_seed(9, i as u64)).unwrap());
    }
}

#[test]
fn offboard_confirmations_meet_the_threshold() {
    let mut scn = quick(Scenario::l1());
    scn.victims = vec![Victim {
        position: EnuPoint::ground(2.0, 6.0),
        occlusion: 0.0,
    }];
    scn.wind = WindParams::calm();
    let mut confirmed = 0;
    for seed in 0..4 {
        let r = run_offboard(&scn, seed).unwrap();
        assert!(r.elapsed <= scn.model.t_max + scn.model.dt + scn.mission.boot_time);
        if r.outcome == Outcome::Confirmed {
            confirmed += 1;
            let c = r.confirmations.last().unwrap();
            assert!(c.confidence >= scn.model.zeta);
            assert_eq!(r.recorded, vec![c.position]);
        }
        for d in &r.detections {
            assert!(d.confidence >= scn.model.zeta_min);
        }
    }
    assert!(
        confirmed > 0,
        "a nearby exposed victim should be confirmed at least once"
    );
}

#[test]
fn zero_threshold_stops_after_the_first_observation() {
    let mut scn = quick(Scenario::empty());
    scn.model.zeta = 0.0;
    scn.model.zeta_min = 0.0;
    let r = run_offboard(&scn, 1).unwrap();
    let steps = r.trajectory.iter().filter(|p| p.action.is_some()).count();
    assert_eq!(steps, 1);
}

#[test]
fn mission_config_validation() {
    assert!(MissionConfig::default().validate().is_ok());
    let bad = MissionConfig {
        plan_overlap: 1.0,
        ..MissionConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = MissionConfig {
        hybrid: HybridConfig {
            step_cap: 0,
            ..HybridConfig::default()
        },
        ..MissionConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn seeds_differ_per_run() {
    let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| run_seed(7, i)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_ne!(run_seed(7, 0), run_seed(8, 0));
}

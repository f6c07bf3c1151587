use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use sarplan::error::MetricsError;
use sarplan::geo::{EnuPoint, SurveyArea};
use sarplan::metrics::*;
use sarplan::mission::{write_coordinates_csv, Mode, Outcome, RunRecord};

const VICTIM: EnuPoint = EnuPoint::new(3.0, 10.0, 0.0);
const CAR: EnuPoint = EnuPoint::new(4.5, 30.0, 0.0);

fn record(seed: u64, elapsed: f64, recorded: &[EnuPoint]) -> RunRecord {
    let mut r = RunRecord::new(Mode::Mission, seed, "test");
    r.elapsed = elapsed;
    r.outcome = Outcome::SurveyComplete;
    r.recorded = recorded.to_vec();
    r
}

#[test]
fn all_runs_at_truth() {
    let runs: Vec<_> = (0..5)
        .map(|s| record(s, 60.0, &[VICTIM.offset(0.5, -0.5, 0.0)]))
        .collect();
    let m = compute_metrics(&runs, &[VICTIM], DEFAULT_TOLERANCE).unwrap();
    assert_eq!((m.tp_pct, m.fp_pct, m.fn_pct), (100.0, 0.0, 0.0));
}

#[test]
fn one_run_also_logs_the_car() {
    let mut runs: Vec<_> = (0..5).map(|s| record(s, 60.0, &[VICTIM])).collect();
    runs[2].recorded.push(CAR);
    let m = compute_metrics(&runs, &[VICTIM], DEFAULT_TOLERANCE).unwrap();
    assert_eq!((m.tp_pct, m.fp_pct, m.fn_pct), (100.0, 20.0, 0.0));
}

#[test]
fn time_statistics_by_hand() {
    let runs = vec![record(0, 100.0, &[VICTIM]), record(1, 200.0, &[VICTIM])];
    let m = compute_metrics(&runs, &[VICTIM], DEFAULT_TOLERANCE).unwrap();
    assert_abs_diff_eq!(m.time.mean, 150.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.time.sd, 5000f64.sqrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(m.time.sd, 70.71, epsilon = 0.005);
    assert_abs_diff_eq!(m.time.se, 50.0, epsilon = 1e-12);
}

#[test]
fn time_statistics_skip_missed_runs() {
    let runs = vec![
        record(0, 100.0, &[VICTIM]),
        record(1, 600.0, &[]),
        record(2, 300.0, &[CAR]),
    ];
    let m = compute_metrics(&runs, &[VICTIM], DEFAULT_TOLERANCE).unwrap();
    assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 2));
    assert_eq!(m.time.n, 1);
    assert_eq!(m.time.mean, 100.0);
    assert_eq!(m.time.sd, 0.0);
    assert_eq!(m.total_time.n, 3);
    assert_abs_diff_eq!(m.total_time.mean, 1000.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn tolerance_boundary_is_inclusive() {
    let at = record(0, 1.0, &[VICTIM.offset(2.0, 0.0, 0.0)]);
    let past = record(1, 1.0, &[VICTIM.offset(2.0 + 1e-9, 0.0, 0.0)]);
    let m = compute_metrics(&[at, past], &[VICTIM], 2.0).unwrap();
    assert_eq!((m.tp, m.fp), (1, 1));
}

#[test]
fn empty_input_is_an_error() {
    assert!(matches!(compute_metrics(&[], &[VICTIM], 2.0), Err(MetricsError::Empty)));
}

#[test]
fn metrics_split_by_mode() {
    let mut a = record(0, 50.0, &[VICTIM]);
    let mut b = record(1, 70.0, &[]);
    a.mode = Mode::Offboard;
    b.mode = Mode::Hybrid;
    let by = metrics_by_mode(&[a, b], &[VICTIM], 2.0).unwrap();
    assert_eq!(by[&Mode::Offboard].tp, 1);
    assert_eq!(by[&Mode::Hybrid].fn_, 1);
    assert!(!by.contains_key(&Mode::Mission));
}

fn arb_point() -> impl Strategy<Value = EnuPoint> {
    (-2.0..8.0f64, -2.0..62.0f64).prop_map(|(x, y)| EnuPoint::ground(x, y))
}

fn arb_runs() -> impl Strategy<Value = Vec<RunRecord>> {
    prop::collection::vec((0.0..600.0f64, prop::collection::vec(arb_point(), 0..4)), 1..25).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (t, pts))| record(i as u64, t, &pts))
            .collect()
    })
}

proptest! {
    #[test]
    fn permutation_invariant(runs in arb_runs(), rot in 0usize..25) {
        let base = compute_metrics(&runs, &[VICTIM], 2.0).unwrap();
        let mut shuffled = runs.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        prop_assert_eq!(compute_metrics(&shuffled, &[VICTIM], 2.0).unwrap(), base);
    }

    #[test]
    fn percentages_are_consistent(runs in arb_runs()) {
        let m = compute_metrics(&runs, &[VICTIM], 2.0).unwrap();
        prop_assert_eq!(m.tp + m.fn_, m.runs);
        prop_assert!((m.tp_pct + m.fn_pct - 100.0).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&m.fp_pct));
        prop_assert_eq!(m.time.se, m.time.sd / (m.time.n.max(1) as f64).sqrt());
    }

    #[test]
    fn csv_round_trip_reproduces_metrics(runs in arb_runs()) {
        let m = compute_metrics(&runs, &[VICTIM], 2.0).unwrap();
        let mut runs_csv = Vec::new();
        write_runs_csv(&runs, &mut runs_csv).unwrap();
        let mut coords_csv = Vec::new();
        write_coordinates_csv(&runs, &mut coords_csv).unwrap();
        let back = read_summaries_csv(
            std::str::from_utf8(&runs_csv).unwrap(),
            std::str::from_utf8(&coords_csv).unwrap(),
        ).unwrap();
        prop_assert_eq!(metrics_from_summaries(&back, &[VICTIM], 2.0).unwrap(), m);
    }
}

fn field() -> SurveyArea {
    SurveyArea::field_strip()
}

#[test]
fn heatmap_without_records_is_blank() {
    let map = export_heatmap(&[], &field(), 1.0).unwrap();
    assert!(map.counts.iter().all(|&c| c == 0));
    assert!(map.nx >= 6 && map.ny >= 60);
}

#[test]
fn heatmap_of_one_point_has_one_cell() {
    let p = EnuPoint::ground(2.3, 17.8);
    let runs: Vec<_> = (0..7).map(|s| record(s, 1.0, &[p])).collect();
    let map = export_heatmap(&runs, &field(), 1.0).unwrap();
    let nonzero: Vec<_> = map.counts.iter().filter(|&&c| c > 0).collect();
    assert_eq!(nonzero, vec![&7]);
    let (i, j) = map.cell_of(&p).unwrap();
    assert_eq!(map.get(i, j), 7);
}

/// Flood-fill count of 4-connected cells at or above `threshold`.
fn components(map: &Heatmap, threshold: u32) -> usize {
    let mut seen = vec![false; map.counts.len()];
    let mut count = 0;
    for start in 0..map.counts.len() {
        if seen[start] || map.counts[start] < threshold {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let (i, j) = ((k % map.nx) as i64, (k / map.nx) as i64);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= map.nx as i64 || b >= map.ny as i64 {
                    continue;
                }
                let n = b as usize * map.nx + a as usize;
                if !seen[n] && map.counts[n] >= threshold {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
    }
    count
}

#[test]
fn two_clusters_stay_apart() {
    let mut runs = Vec::new();
    for s in 0..40u64 {
        let jitter = (s % 5) as f64 * 0.3 - 0.6;
        let centre = if s % 2 == 0 { VICTIM } else { CAR };
        runs.push(record(s, 1.0, &[centre.offset(jitter, -jitter, 0.0)]));
    }
    let map = export_heatmap(&runs, &field(), 1.0).unwrap();
    assert_eq!(map.total(), 40);
    assert_eq!(components(&map, 1), 2);
}

#[test]
fn outside_points_grow_the_grid() {
    let runs = vec![record(0, 1.0, &[EnuPoint::ground(-3.2, 61.5)])];
    let map = export_heatmap(&runs, &field(), 1.0).unwrap();
    assert_eq!(map.total(), 1);
    assert_eq!(map.x0, -4.0);
}

#[test]
fn heatmap_files() {
    let runs = vec![record(0, 1.0, &[VICTIM]), record(1, 1.0, &[VICTIM, CAR])];
    let map = export_heatmap(&runs, &field(), 1.0).unwrap();
    let mut csv = Vec::new();
    map.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + map.nx * map.ny);
    assert!(text.contains("3.5,10.5,2"));
    let mut pgm = Vec::new();
    map.write_pgm(&mut pgm).unwrap();
    let text = String::from_utf8(pgm).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert_eq!(lines.next(), Some(format!("{} {}", map.nx, map.ny).as_str()));
    assert_eq!(lines.next(), Some("255"));
    assert_eq!(lines.count(), map.ny);
    assert!(text.contains("255"));
    assert!(export_heatmap(&runs, &field(), 0.0).is_err());
}

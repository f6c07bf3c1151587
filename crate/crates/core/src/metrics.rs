//! Run-level accuracy and timing metrics, and heatmaps of recorded
//! victim coordinates.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::geo::{EnuPoint, SurveyArea};
use crate::mission::{Mode, RunRecord};

/// Default radius around a victim that counts as the true location, in metres.
pub const DEFAULT_TOLERANCE: f64 = 2.0;

/// The parts of a run the metrics depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub elapsed: f64,
    pub recorded: Vec<EnuPoint>,
}

impl From<&RunRecord> for RunSummary {
    fn from(r: &RunRecord) -> Self {
        Self {
            mode: r.mode,
            seed: r.seed,
            elapsed: r.elapsed,
            recorded: r.recorded.clone(),
        }
    }
}

/// Per-run verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunVerdict {
    /// Some recorded coordinate lies within tolerance of a victim.
    pub true_positive: bool,
    /// Some recorded coordinate lies beyond tolerance of every victim.
    pub false_positive: bool,
}

pub fn classify(recorded: &[EnuPoint], truth: &[EnuPoint], tol: f64) -> RunVerdict {
    let near = |p: &EnuPoint| truth.iter().any(|v| v.horizontal_distance(p) <= tol);
    RunVerdict {
        true_positive: recorded.iter().any(near),
        false_positive: recorded.iter().any(|p| !near(p)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for fewer than two values.
    pub sd: f64,
    /// `sd / sqrt(n)`.
    pub se: f64,
}

impl TimeStats {
    /// Order does not matter: values are summed in sorted order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean,
            sd,
            se: sd / (n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub runs: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp_pct: f64,
    pub fp_pct: f64,
    pub fn_pct: f64,
    /// Elapsed time over runs that found the victim.
    pub time: TimeStats,
    /// Elapsed time over every run.
    pub total_time: TimeStats,
}

pub fn compute_metrics(records: &[RunRecord], truth: &[EnuPoint], tol: f64) -> Result<Metrics, MetricsError> {
    let runs: Vec<RunSummary> = records.iter().map(RunSummary::from).collect();
    metrics_from_summaries(&runs, truth, tol)
}

pub fn metrics_from_summaries(runs: &[RunSummary], truth: &[EnuPoint], tol: f64) -> Result<Metrics, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut tp, mut fp) = (0, 0);
    let mut found_times = Vec::new();
    for r in runs {
        let v = classify(&r.recorded, truth, tol);
        if v.true_positive {
            tp += 1;
            found_times.push(r.elapsed);
        }
        if v.false_positive {
            fp += 1;
        }
    }
    let n = runs.len();
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    let all: Vec<f64> = runs.iter().map(|r| r.elapsed).collect();
    Ok(Metrics {
        runs: n,
        tp,
        fp,
        fn_: n - tp,
        tp_pct: pct(tp),
        fp_pct: pct(fp),
        fn_pct: pct(n - tp),
        time: TimeStats::from_values(&found_times),
        total_time: TimeStats::from_values(&all),
    })
}

/// Metrics for each mode present in `records`.
pub fn metrics_by_mode(
    records: &[RunRecord],
    truth: &[EnuPoint],
    tol: f64,
) -> Result<BTreeMap<Mode, Metrics>, MetricsError> {
    let mut groups: BTreeMap<Mode, Vec<RunSummary>> = BTreeMap::new();
    for r in records {
        groups.entry(r.mode).or_default().push(RunSummary::from(r));
    }
    if groups.is_empty() {
        return Err(MetricsError::Empty);
    }
    groups
        .into_iter()
        .map(|(m, runs)| Ok((m, metrics_from_summaries(&runs, truth, tol)?)))
        .collect()
}

/// `mode,seed,outcome,elapsed`, one row per run.
pub fn write_runs_csv<W: Write>(records: &[RunRecord], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mode", "seed", "outcome", "elapsed"])?;
    for r in records {
        w.write_record([
            r.mode.as_str().to_string(),
            r.seed.to_string(),
            r.outcome.as_str().to_string(),
            r.elapsed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds run summaries from a runs CSV and a coordinates CSV, as
/// written by [`write_runs_csv`] and `write_coordinates_csv`.
pub fn read_summaries_csv(runs_csv: &str, coords_csv: &str) -> Result<Vec<RunSummary>, MetricsError> {
    let bad = |m: String| MetricsError::Malformed(m);
    let mut runs = Vec::new();
    let mut index = BTreeMap::new();
    for row in csv::Reader::from_reader(runs_csv.as_bytes()).records() {
        let row = row?;
        let mode: Mode = row.get(0).unwrap_or("").parse().map_err(bad)?;
        let seed: u64 = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e| bad(format!("seed: {e}")))?;
        let elapsed: f64 = row
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|e| bad(format!("elapsed: {e}")))?;
        index.insert((mode, seed), runs.len());
        runs.push(RunSummary {
            mode,
            seed,
            elapsed,
            recorded: Vec::new(),
        });
    }
    for row in csv::Reader::from_reader(coords_csv.as_bytes()).records() {
        let row = row?;
        let mode: Mode = row.get(0).unwrap_or("").parse().map_err(bad)?;
        let seed: u64 = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e| bad(format!("seed: {e}")))?;
        let x: f64 = row.get(2).unwrap_or("").parse().map_err(|e| bad(format!("x: {e}")))?;
        let y: f64 = row.get(3).unwrap_or("").parse().map_err(|e| bad(format!("y: {e}")))?;
        let i = *index
            .get(&(mode, seed))
            .ok_or_else(|| bad(format!("coordinate for unknown run {mode}/{seed}")))?;
        runs[i].recorded.push(EnuPoint::ground(x, y));
    }
    Ok(runs)
}

/// Counts of recorded coordinates on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    /// South-west corner of cell (0, 0).
    pub x0: f64,
    pub y0: f64,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the southern row, `counts[j * nx + i]`.
    pub counts: Vec<u32>,
}

impl Heatmap {
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[j * self.nx + i]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn cell_of(&self, p: &EnuPoint) -> Option<(usize, usize)> {
        let i = ((p.x - self.x0) / self.cell).floor();
        let j = ((p.y - self.y0) / self.cell).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny).then_some((i as usize, j as usize))
    }

    /// `x,y,count` with cell centres, one row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "count"])?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let x = self.x0 + (i as f64 + 0.5) * self.cell;
                let y = self.y0 + (j as f64 + 0.5) * self.cell;
                w.write_record([x.to_string(), y.to_string(), self.get(i, j).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Plain greyscale PGM with north up, scaled so the busiest cell is white.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<(), MetricsError> {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as u64;
        writeln!(out, "P2\n{} {}\n255", self.nx, self.ny)?;
        for j in (0..self.ny).rev() {
            let row: Vec<String> = (0..self.nx)
                .map(|i| (self.get(i, j) as u64 * 255 / max).to_string())
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Histogram of every recorded coordinate over the survey area, grown to
/// take in coordinates that fall outside it.
pub fn export_heatmap(records: &[RunRecord], survey: &SurveyArea, cell: f64) -> Result<Heatmap, MetricsError> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(MetricsError::Malformed(format!(
            "cell size must be positive, got {cell}"
        )));
    }
    let points: Vec<&EnuPoint> = records.iter().flat_map(|r| r.recorded.iter()).collect();
    let (mut lx, mut ly, mut hx, mut hy) = (survey.min_x, survey.min_y, survey.max_x, survey.max_y);
    for p in &points {
        lx = lx.min(p.x);
        ly = ly.min(p.y);
        hx = hx.max(p.x);
        hy = hy.max(p.y);
    }
    let x0 = (lx / cell).floor() * cell;
    let y0 = (ly / cell).floor() * cell;
    let nx = (((hx - x0) / cell).floor() as usize + 1).max(1);
    let ny = (((hy - y0) / cell).floor() as usize + 1).max(1);
    let mut map = Heatmap {
        x0,
        y0,
        cell,
        nx,
        ny,
        counts: vec![0; nx * ny],
    };
    for p in points {
        if let Some((i, j)) = map.cell_of(p) {
            map.counts[j * nx + i] += 1;
        }
    }
    Ok(map)
}

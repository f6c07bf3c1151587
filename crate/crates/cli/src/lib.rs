//! Command-line harness: single runs, seeded batches, mode comparisons,
//! heatmaps and footprint inspection.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use sarplan::error::{ConfigError, GeoError, MetricsError, SimError, SolverError};
use sarplan::geo::{footprint_corners_world, footprint_extent, EnuPoint};
use sarplan::metrics::{compute_metrics, export_heatmap, write_runs_csv, Metrics, DEFAULT_TOLERANCE};
use sarplan::mission::{
    run, run_batch, write_coordinates_csv, write_records_jsonl, write_solver_trace_csv, write_trajectory_csv, Mode,
    RunRecord,
};
use sarplan::model::ConfidenceMode;
use sarplan::scenario::Scenario;
use sarplan::solver::SolverConfig;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SARPLAN_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COLLAPSE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Geo(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Sim(SimError::Solver(SolverError::BeliefCollapse)) => EXIT_COLLAPSE,
            CliError::Sim(SimError::Config(_) | SimError::Geo(_)) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Budget {
    /// Reduced search budgets suited to large batches.
    Desk,
    /// The full default search budgets.
    Full,
}

#[derive(Debug, Parser)]
#[command(
    name = "sarplan",
    version,
    about = "Simulated UAV search missions with online POMDP planning"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Preset name (empty, l1, l2) or path to a scenario TOML file.
    #[arg(long, global = true, default_value = "l1")]
    pub scenario: String,
    #[arg(long, global = true, default_value = "mission", value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, global = true, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Use the printed confidence line that grows with distance.
    #[arg(long, global = true)]
    pub literal_confidence: bool,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Budget::Desk)]
    pub budget: Budget,
    /// Radius around a victim that counts as the true location, in metres.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One episode with its full trace.
    Run,
    /// Seeded runs of one mode with a metrics table.
    Batch,
    /// Seeded runs of every mode side by side.
    Compare,
    /// Histogram of recorded victim coordinates over seeded runs.
    Heatmap {
        /// Cell size in metres.
        #[arg(long, default_value_t = 1.0)]
        cell: f64,
    },
    /// Print the camera footprint for a pose.
    Footprint {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 16.0)]
        z: f64,
        /// Heading in degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        yaw: f64,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn cli_main<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let c = &cli.common;
    if let Command::Footprint { x, y, z, yaw } = cli.command {
        return footprint(c, EnuPoint::new(x, y, z), yaw, out);
    }
    let scn = load_scenario(c)?;
    if !(c.tolerance > 0.0) {
        return Err(CliError::Usage("--tolerance must be positive".into()));
    }
    match &cli.command {
        Command::Run => run_one(c, &scn, out),
        Command::Batch => batch(c, &scn, out),
        Command::Compare => compare(c, &scn, out),
        Command::Heatmap { cell } => heatmap(c, &scn, *cell, out),
        Command::Footprint { .. } => unreachable!(),
    }
}

pub fn load_scenario(c: &Common) -> Result<Scenario, CliError> {
    let mut scn = Scenario::resolve(&c.scenario)?;
    if c.literal_confidence {
        scn.model.confidence_mode = ConfidenceMode::Literal;
    }
    if c.budget == Budget::Desk {
        scn.solver = SolverConfig {
            time_budget: scn.solver.time_budget,
            ..SolverConfig::desk()
        };
    }
    scn.validate()?;
    Ok(scn)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(io_err(&path))
}

fn write_file<F>(dir: &Path, name: &str, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    let mut w = create(dir, name)?;
    f(&mut w)?;
    let path = dir.join(name);
    w.flush().map_err(io_err(&path))
}

fn csv_err<E: Into<MetricsError>>(e: E) -> CliError {
    CliError::Metrics(e.into())
}

fn check_runs(c: &Common) -> Result<(), CliError> {
    if c.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    Ok(())
}

fn write_common_files(dir: &Path, records: &[RunRecord], metrics: &Metrics) -> Result<(), CliError> {
    write_file(dir, "runs.csv", |w| Ok(write_runs_csv(records, w)?))?;
    write_file(dir, "coordinates.csv", |w| {
        write_coordinates_csv(records, w).map_err(csv_err)
    })?;
    write_file(dir, "metrics.json", |w| {
        serde_json::to_writer_pretty(&mut *w, metrics).map_err(|e| CliError::Usage(e.to_string()))?;
        w.write_all(b"\n").map_err(io_err(Path::new("metrics.json")))
    })
}

fn run_one(c: &Common, scn: &Scenario, out: &mut dyn Write) -> Result<(), CliError> {
    let record = run(scn, c.mode, c.seed)?;
    let records = [record];
    let metrics = compute_metrics(&records, &scn.victim_positions(), c.tolerance)?;
    let dir = &c.out;
    write_file(dir, "trajectory.csv", |w| {
        write_trajectory_csv(&records, w).map_err(csv_err)
    })?;
    write_file(dir, "solver_trace.csv", |w| {
        write_solver_trace_csv(&records, w).map_err(csv_err)
    })?;
    write_file(dir, "record.jsonl", |w| {
        write_records_jsonl(&records, w).map_err(io_err(Path::new("record.jsonl")))
    })?;
    write_common_files(dir, &records, &metrics)?;
    let r = &records[0];
    let text = format!(
        "{} {} seed {}: {} after {:.1} s, {} detections, {} confirmations, coverage {:.3}\nwrote {}\n",
        scn.name,
        r.mode,
        r.seed,
        r.outcome.as_str(),
        r.elapsed,
        r.detections.len(),
        r.confirmations.len(),
        r.coverage,
        dir.display()
    );
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("stdout")))
}

fn metrics_header() -> String {
    format!(
        "{:<9} {:>5} {:>7} {:>7} {:>7} {:>9} {:>9} {:>8}",
        "mode", "runs", "TP%", "FP%", "FN%", "mean s", "SD s", "SE s"
    )
}

fn metrics_row(mode: Mode, m: &Metrics) -> String {
    format!(
        "{:<9} {:>5} {:>7.1} {:>7.1} {:>7.1} {:>9.2} {:>9.2} {:>8.2}",
        mode.as_str(),
        m.runs,
        m.tp_pct,
        m.fp_pct,
        m.fn_pct,
        m.time.mean,
        m.time.sd,
        m.time.se
    )
}

fn batch(c: &Common, scn: &Scenario, out: &mut dyn Write) -> Result<(), CliError> {
    check_runs(c)?;
    let records = run_batch(scn, c.mode, c.runs, c.seed)?;
    let metrics = compute_metrics(&records, &scn.victim_positions(), c.tolerance)?;
    write_common_files(&c.out, &records, &metrics)?;
    write_file(&c.out, "records.jsonl", |w| {
        write_records_jsonl(&records, w).map_err(io_err(Path::new("records.jsonl")))
    })?;
    let text = format!(
        "{}\n{}\n{}\ntime stats over runs that found the victim; wrote {}\n",
        scn.name,
        metrics_header(),
        metrics_row(c.mode, &metrics),
        c.out.display()
    );
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("stdout")))
}

fn compare(c: &Common, scn: &Scenario, out: &mut dyn Write) -> Result<(), CliError> {
    check_runs(c)?;
    let truth = scn.victim_positions();
    let mut all = Vec::new();
    let mut rows = Vec::new();
    for mode in Mode::ALL {
        let records = run_batch(scn, mode, c.runs, c.seed)?;
        rows.push((mode, compute_metrics(&records, &truth, c.tolerance)?));
        all.extend(records);
    }
    write_file(&c.out, "compare.csv", |w| {
        let mut text = String::from("mode,runs,tp_pct,fp_pct,fn_pct,time_mean,time_sd,time_se,time_n\n");
        for (mode, m) in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                mode.as_str(),
                m.runs,
                m.tp_pct,
                m.fp_pct,
                m.fn_pct,
                m.time.mean,
                m.time.sd,
                m.time.se,
                m.time.n
            ));
        }
        w.write_all(text.as_bytes()).map_err(io_err(Path::new("compare.csv")))
    })?;
    write_file(&c.out, "runs.csv", |w| Ok(write_runs_csv(&all, w)?))?;
    write_file(&c.out, "coordinates.csv", |w| {
        write_coordinates_csv(&all, w).map_err(csv_err)
    })?;
    let mut text = format!("{}\n{}\n", scn.name, metrics_header());
    for (mode, m) in &rows {
        text.push_str(&metrics_row(*mode, m));
        text.push('\n');
    }
    text.push_str(&format!(
        "time stats over runs that found the victim; wrote {}\n",
        c.out.display()
    ));
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("stdout")))
}

fn heatmap(c: &Common, scn: &Scenario, cell: f64, out: &mut dyn Write) -> Result<(), CliError> {
    check_runs(c)?;
    let records = run_batch(scn, c.mode, c.runs, c.seed)?;
    let map = export_heatmap(&records, &scn.model.survey, cell)?;
    write_file(&c.out, "heatmap.csv", |w| Ok(map.write_csv(w)?))?;
    write_file(&c.out, "heatmap.pgm", |w| Ok(map.write_pgm(w)?))?;
    let busiest = map.counts.iter().copied().max().unwrap_or(0);
    let text = format!(
        "{} {}: {} coordinates over {} x {} cells of {cell} m, busiest cell {busiest}; wrote {}\n",
        scn.name,
        c.mode,
        map.total(),
        map.nx,
        map.ny,
        c.out.display()
    );
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("stdout")))
}

fn footprint(c: &Common, uav: EnuPoint, yaw_deg: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let cam = load_scenario(c)?.model.camera;
    let ext = footprint_extent(uav.z, &cam)?;
    let fp = footprint_corners_world(&uav, yaw_deg.to_radians(), &cam)?;
    let mut text = format!(
        "pose ({}, {}, {}) yaw {yaw_deg} deg\nextent top {:.4} bottom {:.4} left {:.4} right {:.4}\n\
         size {:.4} m along x, {:.4} m along y, area {:.4} m2\ncorners:\n",
        uav.x,
        uav.y,
        uav.z,
        ext.top,
        ext.bottom,
        ext.left,
        ext.right,
        ext.length_x(),
        ext.length_y(),
        fp.area()
    );
    for p in &fp.corners {
        text.push_str(&format!("  {:.4} {:.4}\n", p.x, p.y));
    }
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("stdout")))
}

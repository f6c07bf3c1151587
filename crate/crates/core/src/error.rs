use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
    #[error("a footprint ray points at or above the horizon")]
    HorizonRay,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("overlap must lie in [0, 1), got {0}")]
    InvalidOverlap(f64),
    #[error("footprint length must be positive, got {0}")]
    NonPositiveLength(f64),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("belief collapsed: no particle is consistent with the observation")]
    BeliefCollapse,
    #[error("action {0} is out of range")]
    InvalidAction(usize),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no run records to summarise")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record: {0}")]
    Malformed(String),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mass split: mu1={mu1}, mu2={mu2} (need mu1 + mu2 = 1, 0 < mu1 <= mu2)")]
    InvalidMassSplit { mu1: f64, mu2: f64 },
    #[error("mass order violated: mu1={mu1} > mu2={mu2}")]
    MassOrder { mu1: f64, mu2: f64 },
    #[error("orbit does not exist: 1 + 2 E L^2 = {value}")]
    Admissibility { value: f64 },
    #[error("degenerate orbit: angular momentum is zero")]
    DegenerateOrbit,
    #[error("radius diverges at true anomaly {theta} (1 + e cos theta = {denom})")]
    RadiusDiverges { theta: f64, denom: f64 },
    #[error("state is at the attracting center")]
    Origin,
    #[error("configuration is not incoming: w.n = {wn}")]
    NotIncoming { wn: f64 },
    #[error("invalid impact configuration: {0}")]
    InvalidImpact(String),
    #[error("orbits coincide: every anomaly is an intersection")]
    DegenerateCoincident,
    #[error("apoapsis undefined: no bound orbit available as the inner one")]
    ApoapsisUndefined,
    #[error("derivative singular for circular orbit (e1={e1}, e2={e2})")]
    CircularSingularity { e1: f64, e2: f64 },
    #[error("no I_pi boundary at this dL: discriminant {disc}")]
    NoBoundary { disc: f64 },
    #[error("boundary degenerates: |L1| = |L2|")]
    Degenerate,
    #[error("I_pi is void: 1 + 2 E L^2 = {value} < 0")]
    VoidRegion { value: f64 },
    #[error("gamma must exceed 1, got {gamma}")]
    GammaRange { gamma: f64 },
    #[error("no positive margin: the region already reaches a critical line (gap {gap})")]
    NoMargin { gap: f64 },
    #[error("no valid collision configuration")]
    NoCollisionPossible,
    #[error("degenerate angular momentum vector")]
    DegenerateAngularMomentum,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

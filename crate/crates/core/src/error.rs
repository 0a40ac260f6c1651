use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("flow conservation violated: upper a*beta minus lower a*beta = {residual}")]
    ConservationViolated { residual: f64 },
    #[error("network has no upper branch")]
    NoUpperBranch,
    #[error("network has no lower branch")]
    NoLowerBranch,
    #[error("NonpositiveParameter: {name} = {value} must be positive")]
    NonpositiveParameter { name: String, value: f64 },
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("trajectory kind {kind} is not defined for mu = {mu}")]
    InvalidKindForMu { kind: String, mu: f64 },
    #[error("integration diverged: {0}")]
    IntegrationDiverged(String),
    #[error("stopping condition not reached after {steps} steps")]
    StoppingConditionNotReached { steps: usize },
    #[error("trajectory is not monotone in phi on the requested window")]
    NonMonotonePhi,

    #[error("no crossing found: {0}")]
    NoCrossingFound(String),
    #[error("regime {0} has no threshold")]
    RegimeHasNoThreshold(String),
    #[error("alpha = {alpha} is not admissible (threshold {threshold})")]
    InfeasibleAlpha { alpha: f64, threshold: f64 },
    #[error("trajectory left the unit strip 0 <= phi <= 1")]
    TrajectoryEscapedUnitBox,
    #[error("decay fit window too short: {0}")]
    WindowTooShort(String),
    #[error("fitted exponent {fitted} is more than 10% away from both k+ = {k_plus} and k- = {k_minus}")]
    AmbiguousFit { fitted: f64, k_plus: f64, k_minus: f64 },
    #[error("relaxation did not converge by t = {time} (last drift {drift:e})")]
    NotConverged { time: f64, drift: f64 },

    #[error("initial data disagree at the junction: {0}")]
    IncompatibleJunctionData(String),
    #[error("initial data negative on branch {branch} at x = {x}")]
    NegativeInitialData { branch: usize, x: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),
    #[error("field left the invariant band at t = {time}: value {value}")]
    StabilityViolation { time: f64, value: f64 },
    #[error("states live on different grids or networks")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("series not settled: junction drift {drift:e} over the trailing window (extend T)")]
    NotSettled { drift: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

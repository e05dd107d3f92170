use thiserror::Error;

/// Errors raised by analysis, synthesis and construction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pole on evaluation point z = {re} + {im}i")]
    PoleOnEvaluationPoint { re: f64, im: f64 },

    #[error("plant not Schur-stable (spectral radius {0})")]
    NotSchurStable(f64),

    #[error("eigenvalue on unit circle: I - A^N is numerically singular")]
    EigenvalueOnUnitCircle,

    #[error("symmetry violation: imaginary part {0:e} exceeds tolerance")]
    SymmetryViolation(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate LP, enable exact mode")]
    DegenerateLp,

    #[error("linear program infeasible")]
    Infeasible,

    #[error("linear program unbounded")]
    Unbounded,

    #[error("asymmetric plant data: averaged dual violates invariants by {0:e}")]
    AsymmetricPlantData(f64),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("invalid rational rotation {alpha}/{beta}")]
    InvalidRationalRotation { alpha: i64, beta: i64 },

    #[error("no multiplier exists at this N (N = {n}, t* = {t_star:e})")]
    NoMultiplier { n: usize, t_star: f64 },

    #[error("no destabilizing certificate: smallest t* = {t_star:e} over N <= {nmax} exceeds eps = {eps:e}")]
    NoDestabilizingCertificate { t_star: f64, nmax: usize, eps: f64 },

    #[error("degenerate multiplier M = 0 certifies nothing")]
    DegenerateMultiplier,

    #[error("oscillation bound unavailable: pole radius {pole_radius}")]
    OscillationBoundUnavailable { pole_radius: f64 },

    #[error("inconsistent dual certificate: cross-correlation violated by {0:e}")]
    InconsistentDualCertificate(f64),

    #[error("construction inconsistency: {0}")]
    ConstructionInconsistency(String),

    #[error("approximate monotonicity violated: positive cycle of weight {0:e}")]
    ApproximateMonotonicityViolated(f64),

    #[error("refinement failed at pair {index}: distance^2 {dist_sq:e} exceeds {bound:e}")]
    RefinementFailed {
        index: usize,
        dist_sq: f64,
        bound: f64,
    },

    #[error("resolvent failure: {0}")]
    ResolventFailure(String),

    #[error("construction fault: {0}")]
    ConstructionFault(String),

    #[error("well-posedness failure at step {step}")]
    WellPosedness { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

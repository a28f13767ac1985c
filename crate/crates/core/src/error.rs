use thiserror::Error;

/// Failures raised by the numerical pipeline. Each variant carries enough
/// context to locate the offending input.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum MbError {
    #[error("profile has vanishing mass ({mass:e})")]
    ZeroMass { mass: f64 },
    #[error("tabulated profile does not decay: tail/max = {ratio:e}")]
    NonDecaying { ratio: f64 },
    #[error("|Im z| = {im:e} is below the quadrature floor {floor:e}")]
    TooCloseToAxis { im: f64, floor: f64 },
    #[error("principal value failed at lambda = {lambda}: {reason}")]
    PrincipalValueFailure { lambda: f64, reason: String },
    #[error("lambda grid covers only {coverage:.6} of the profile mass")]
    GridCoverage { coverage: f64 },
    #[error("stencil too coarse: {points} points along {axis}")]
    StencilTooCoarse { axis: &'static str, points: usize },
    #[error("ODE step rejected at {at}: step {step:e} after {halvings} halvings")]
    OdeStepRejected { at: f64, step: f64, halvings: usize },
    #[error("boundary pulse not decayed: |E_in(T)|/max = {ratio:e}")]
    DecayViolation { ratio: f64 },
    #[error("medium not asymptotic at x = L: |rho0| = {rho:e}")]
    MediumNotAsymptotic { rho: f64 },
    #[error("spectral singularity: |a(lambda)| = {abs_a:e} at lambda = {lambda}")]
    SpectralSingularity { lambda: f64, abs_a: f64 },
    #[error("zero count mismatch: winding {winding}, refined {found}")]
    CountMismatch { winding: i64, found: usize },
    #[error("singular K: |det K - 1| = {dev:e} at lambda = {lambda}")]
    SingularK { lambda: f64, dev: f64 },
    #[error("regularity violated on oval at z = {re}{im:+}i: {which} = {value:e}")]
    RegularityViolation { re: f64, im: f64, which: &'static str, value: f64 },
    #[error("contour has no nodes")]
    EmptyContour,
    #[error("linear system ill-conditioned: estimate {cond:e}")]
    IllConditioned { cond: f64 },
    #[error("jump not positive definite: min eigenvalue {min_eig:e} at node {node}")]
    PosdefViolated { node: usize, min_eig: f64 },
    #[error("point at distance {dist:e} from the contour (floor {floor:e})")]
    TooCloseToContour { dist: f64, floor: f64 },
    #[error("residue system singular for {poles} poles")]
    SingularResidueSystem { poles: usize },
    #[error("|n(lambda)| = {n:e} too small at lambda = {lambda}")]
    WeightVanishes { lambda: f64, n: f64 },
    #[error("CFL violated: dt = {dt}, dx = {dx}")]
    CflViolation { dt: f64, dx: f64 },
    #[error("constraint drift {drift:e} exceeds {limit:e}")]
    ConstraintDrift { drift: f64, limit: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, MbError>;

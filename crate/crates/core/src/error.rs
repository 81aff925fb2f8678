use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("particles {first} and {second} coincide (separation {separation:e})")]
    Coincident {
        first: usize,
        second: usize,
        separation: f64,
    },
    #[error("intensity must be nonzero")]
    ZeroIntensity,
    #[error("total intensity is zero, the equivalent center is undefined")]
    UndefinedCenter,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("operation needs at least {needed} particles, found {found}")]
    TooFewParticles { needed: usize, found: usize },
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("maximum number of steps ({0}) exceeded at t = {1}")]
    MaxStepsExceeded(usize, f64),
    #[error("no separation crossing inside the supplied step bracket")]
    NoCrossing,
    #[error("merge needs a nonempty participant set")]
    EmptyParticipants,
    #[error("unknown particle id {0}")]
    UnknownParticle(usize),
    #[error("invalid blow-up selection: {0}")]
    InvalidSelection(String),
    #[error("relative coordinates {first} and {second} coincide; re-base so the pair involves the base particle")]
    UnselectedCoincidence { first: usize, second: usize },
    #[error("t = {t} lies at or beyond the collision time {collision_time}")]
    BeyondCollision { t: f64, collision_time: f64 },
    #[error("radial law exhausted: r^2 = {0} is not positive")]
    DomainExhausted(f64),
    #[error("analyzed span contains a merge event at t = {0}")]
    EventsInSpan(f64),
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("angle of pair ({first}, {second}) jumps by {jump:.3} rad near t = {time}; refine sampling")]
    CoarseSampling {
        first: usize,
        second: usize,
        time: f64,
        jump: f64,
    },
}

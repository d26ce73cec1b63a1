use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("{what} = {value} is outside the valid domain {domain}")]
    Domain { what: &'static str, value: f64, domain: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid friction table: {0}")]
    InvalidTable(String),

    /// The closed-form fundamental solutions only cover the underdamped regime.
    #[error("gamma = {gamma} >= 2 omega = {two_omega}: closed form unavailable, use the numerical branch")]
    UnsupportedRegime { gamma: f64, two_omega: f64 },

    #[error("invalid optical element: {0}")]
    InvalidElement(String),

    #[error("matrix is not canonical: a = {a}, d = {d}")]
    NonCanonical { a: f64, d: f64 },

    #[error("invalid resonator geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid mirror schedule: {0}")]
    InvalidSchedule(String),

    #[error("singular (B, C) Jacobian at L1 = {l1}, L2 = {l2}")]
    SingularJacobian { l1: f64, l2: f64 },

    #[error("marginally stable resonator (sin theta = {sin_theta}): quantum mapping undefined")]
    MarginalStability { sin_theta: f64 },

    #[error("|B| = {b} is below {eps}: Fresnel kernel is singular near a focal plane")]
    NearFocalPlane { b: f64, eps: f64 },

    #[error("field under-sampled: {reason}; try N >= {suggested_n}")]
    Sampling { reason: String, suggested_n: usize },

    #[error("sin theta = {sin_theta} too small for the split-step generator")]
    NearInstability { sin_theta: f64 },

    #[error("beam parameter singular: C q + D = 0")]
    BeamSingularity,

    #[error("confined beam requires Im(q) > 0, got q = {re} + {im}i")]
    UnconfinedBeam { re: f64, im: f64 },

    #[error("|u2({n})| = {u2} too close to a caustic")]
    NearCaustic { n: f64, u2: f64 },

    #[error("field resolution too low: {0}")]
    Resolution(String),

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::InvalidParameter(_)
                | Error::InvalidTable(_)
                | Error::UnsupportedRegime { .. }
                | Error::InvalidElement(_)
                | Error::NonCanonical { .. }
                | Error::InvalidGeometry(_)
                | Error::InvalidSchedule(_)
                | Error::MarginalStability { .. }
                | Error::UnconfinedBeam { .. }
                | Error::Csv(_)
        )
    }
}

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be finite, got {value}")))
    }
}

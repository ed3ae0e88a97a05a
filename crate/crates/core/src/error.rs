use thiserror::Error;

/// Errors raised by the geometric primitives, integrators and controllers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("matrix is not skew-symmetric (symmetric part norm {defect:.3e})")]
    NotSkew { defect: f64 },

    #[error("matrix is not a rotation: orthogonality defect {orthogonality:.3e}, det {det}")]
    NotRotation { orthogonality: f64, det: f64 },

    #[error("rotation mean is degenerate: smallest singular value {sigma_min:.3e}")]
    DegenerateMean { sigma_min: f64 },

    #[error("polar projection of a matrix with det {det:.3e}")]
    SingularInput { det: f64 },

    #[error("invalid inertia tensor: {0}")]
    InvalidInertia(String),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("invalid parameter `{field}`: must be {constraint}")]
    InvalidParameter {
        field: &'static str,
        constraint: &'static str,
    },

    #[error("attitude error is antipodal (1 + tr E = {margin:.3e})")]
    AntipodalError { margin: f64 },

    #[error("commanded force is zero (norm {norm:.3e})")]
    ZeroForce { norm: f64 },

    #[error("heading hint is parallel to the thrust axis (angle {angle:.3e} rad)")]
    DegenerateHeading { angle: f64 },

    #[error("rotor speed must be positive, got {omega}")]
    ZeroRotorSpeed { omega: f64 },

    #[error("inflow fixed point did not converge after {iters} iterations (change {change:.3e})")]
    InflowNoConvergence { iters: usize, change: f64 },

    #[error("Newton solve did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("step {step} (t = {time}): {source}")]
    AtStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<GeomError>,
    },
}

impl GeomError {
    pub(crate) fn at_step(self, step: usize, time: f64) -> Self {
        GeomError::AtStep {
            step,
            time,
            source: Box::new(self),
        }
    }

    /// The underlying error with any step context removed.
    pub fn root(&self) -> &GeomError {
        match self {
            GeomError::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

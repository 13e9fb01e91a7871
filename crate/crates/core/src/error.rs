use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode number {0}: must be >= 1")]
    InvalidModeNumber(i64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transcendental mode equation degenerates for T = 0; use the sub-cavity frequencies n*pi*c/(L +/- q)")]
    DegenerateEquation,

    #[error("wavenumber window [{lo}, {hi}] brackets no root")]
    WindowTooNarrow { lo: f64, hi: f64 },

    #[error("mirror displacement |q| = {q:e} m exceeds the validity bound {limit:e} m")]
    OutOfValidityRange { q: f64, limit: f64 },

    #[error("rest position {q0:e} m is in the {found} regime, expected {expected}")]
    WrongRegime {
        q0: f64,
        expected: &'static str,
        found: &'static str,
    },

    #[error("quadratic coupling diverges for a perfectly reflecting middle mirror (T = 0)")]
    DivergentCoupling,

    #[error("driving the even mode in the quadratic regime anti-traps the mirror")]
    AntitrappingConfiguration,

    #[error("displacement variance integral diverges: effective damping {0:e} kg/s is not positive")]
    DivergentIntegral(f64),

    #[error("numerical integration failed: {0}")]
    IntegrationFailure(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("drift matrix is unstable (max Re(lambda) = {max_real:e} s^-1)")]
    Unstable { max_real: f64 },

    #[error("time step {dt:e} s exceeds the stable bound {max:e} s")]
    StepSize { dt: f64, max: f64 },

    #[error("insufficient statistics: {0}")]
    Statistics(String),

    #[error("spectral fit failed: {0}")]
    Fit(String),

    #[error("bichromatic design infeasible: {0}")]
    DesignInfeasible(String),

    #[error("mirror placement check failed: {0}")]
    Placement(String),

    #[error("hybrid design is dynamically unstable (max Re(lambda) = {max_real:e} s^-1)")]
    UnstableDesign { max_real: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidModeNumber(_)
                | Error::InvalidParameter { .. }
                | Error::OutOfValidityRange { .. }
                | Error::WrongRegime { .. }
                | Error::AntitrappingConfiguration
                | Error::DegenerateEquation
                | Error::DivergentCoupling
                | Error::Placement(_)
                | Error::DesignInfeasible(_)
                | Error::Config(_)
        )
    }
}

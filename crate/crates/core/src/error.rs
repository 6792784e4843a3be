use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpmError {
    #[error("wavelength {wavelength_nm:.3} nm outside valid range [{min_nm:.1}, {max_nm:.1}] nm of model `{model}`")]
    WavelengthRange {
        model: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("temperature {temp_c} °C outside valid range [{min_c}, {max_c}] °C")]
    TemperatureRange { temp_c: f64, min_c: f64, max_c: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("basis search failed: {0}")]
    SearchFailure(String),

    #[error("no feasible design: {0}")]
    Infeasible(String),

    #[error("bandwidth undefined: {0}")]
    BandwidthUndefined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown coefficient set `{0}`")]
    UnknownSet(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QpmError>;

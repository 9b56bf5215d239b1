use phonon_core::analysis::AnalysisError;
use phonon_core::circuit::CircuitError;
use phonon_core::lindblad::LindbladError;
use phonon_core::saw::SawError;
use phonon_core::tomography::TomographyError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("[saw-com] {0}")]
    Saw(#[from] SawError),
    #[error("[circuit] {0}")]
    Circuit(#[from] CircuitError),
    #[error("[lindblad] {0}")]
    Lindblad(#[from] LindbladError),
    #[error("[tomography] {0}")]
    Tomography(#[from] TomographyError),
    #[error("[analysis] {0}")]
    Analysis(#[from] AnalysisError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Io(_) | LabError::Json(_) => 1,
            LabError::Saw(SawError::Io(_)) | LabError::Circuit(CircuitError::Io(_)) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

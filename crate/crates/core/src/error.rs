use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid noise model: {0}")]
    InvalidModel(String),

    #[error("frequency {f} Hz is above the Nyquist frequency {nyquist} Hz")]
    AboveNyquist { f: f64, nyquist: f64 },

    #[error("cursor is at t = {cursor_s} s but the timeline starts at t = {timeline_s} s")]
    CursorMismatch { cursor_s: f64, timeline_s: f64 },

    #[error(
        "timeline sample rate {timeline_hz} Hz does not match the qubit sample rate {params_hz} Hz"
    )]
    SampleRateMismatch { timeline_hz: f64, params_hz: f64 },

    #[error("invalid pulse shape: {0}")]
    InvalidPulse(String),

    #[error("compilation of {generator} failed: best infidelity {best_infidelity:e} exceeds {threshold:e}")]
    CompilationFailed {
        generator: String,
        best_infidelity: f64,
        threshold: f64,
    },

    #[error("Clifford closure produced {0} classes instead of 24")]
    GroupConstruction(usize),

    #[error("gate cache is missing generator {0}")]
    MissingGate(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

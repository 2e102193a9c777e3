use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("data error in {stage}: {message}")]
    Data {
        stage: &'static str,
        message: String,
    },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("i/o failure: {0}")]
    Io(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data { .. } | PipelineError::Io(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

use alloc::string::String;

use crate::provider::ProviderError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("index build error: {0}")]
    IndexBuild(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("generation error for question `{question_id}`: {reason}")]
    Generation { question_id: String, reason: String },

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error(transparent)]
    Provider(#[from] ProviderError),
}

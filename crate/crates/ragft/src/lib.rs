//! File formats, HTTP model clients, pipeline stages, the review service
//! and the blind-evaluation IO built on `ragft-core`.

pub mod config;
pub mod corpus;
pub mod datasetgen;
pub mod error;
pub mod evalio;
pub mod http;
pub mod indexfile;
pub mod io;
pub mod pairjournal;
pub mod pipeline;
pub mod providers;
pub mod querypipe;
pub mod review_store;
pub mod service;

pub use config::RunConfig;
pub use error::{AppError, AppResult};
pub use pipeline::Stage;
pub use providers::ProviderSet;

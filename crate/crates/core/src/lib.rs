pub mod config;
pub mod extraction;
pub mod faithfulness;
pub mod gateway;
pub mod ingest;
pub mod letters;
pub mod model;
pub mod pipeline;
pub mod retrieval;
pub mod verification;

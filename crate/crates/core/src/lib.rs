pub mod cli;
pub mod client;
pub mod domain;
pub mod engine;
pub mod evaluation;
pub mod parsing;
pub mod prompting;

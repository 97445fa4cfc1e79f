pub mod algorithms;
pub mod boosting;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod network;
pub mod objectives;
pub mod oracle;
pub mod region;
pub mod rng;
pub mod vecops;

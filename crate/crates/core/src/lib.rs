pub mod capture;
pub mod evalstats;
pub mod exec;
pub mod features;
pub mod models;
pub mod nncore;
pub mod synth;

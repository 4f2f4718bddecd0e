//! Experiment harness for the aerial-coverage optimizer: scenario
//! generation, static baselines, parameter sweeps with Monte Carlo
//! aggregation, and deterministic CSV/SVG artifact emission.

pub mod baselines;
pub mod experiments;
pub mod plot;
pub mod scenario;

//! Simulation and verification toolkit for a stochastic coupled nonlinear
//! Schrödinger system on a periodic box.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod groundstate;
pub mod harness;
pub mod noise;
pub mod observables;

pub use detector::{detect_blowup, DetectorConfig, Thresholds};
pub use dynamics::{
    evolve, evolve_seeded, BrownianPath, Coupling, EvolveOptions, IncrementSource, Outcome,
    SeededIncrements, Stepper, SystemState, Trajectory,
};
pub use error::{Error, Result};
pub use grid::{ComplexField, Grid, GridSpec};
pub use groundstate::{Branch, GroundStatePair, SharpConstant};
pub use harness::{RunConfig, RunReport};
pub use noise::{Component, ModeFamily, NoiseModel, NoiseSpec, WienerIncrement};
pub use observables::{DriftKernel, Observables, StepRecord, StepSample};

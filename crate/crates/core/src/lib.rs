//! Measurement modelled as statistical sampling of a quantum state.
//!
//! The intrinsic density and current of a wave function are convolved with
//! device kernels to give the recorded (prognosticated) fields. Parameters
//! computed from both, and from finite simulated samples, are compared
//! through error and entropic indicators.

pub mod error;
pub mod indicators;
pub mod measurement;
pub mod numerics;
pub mod observables;
pub mod pipeline;
pub mod oracle;
pub mod sampling;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use indicators::{entropy_indicators, error_indicators, pr_error_indicators, EntropyReport, ErrorIndicators};
pub use measurement::{transform, KernelSpec, MeasurementSpec, TransformReport, Transformed};
pub use numerics::{Grid, GridFunction, SampledKernel};
pub use observables::{expectation, expectation_substitution, parameters, pr_parameters, Observable, ParameterSet, Reading};
pub use oracle::{GaussianScenario, OscillatorScenario};
pub use sampling::{fr_error_indicators, fr_statistics, sample_momentum, sample_position, SampleSet};
pub use state::{make_gaussian_state, reconstruct_wavefunction, GaussianStateSpec, PhysicalConstants, ProbabilityFields, WaveFunction};

//! Simulation of collective neutrino flavor oscillations on a small qubit
//! register: Hamiltonian construction, Trotter circuits, noisy execution,
//! pair tomography, error mitigation and entanglement observables.

pub mod circuit;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mitigation;
pub mod model;
pub mod noise;
pub mod observables;
pub mod optimize;
pub mod qsim;
pub mod rng;
pub mod tomography;

pub use circuit::{compile, swap_network_circuit, trotter_u1_circuit, Circuit, Gate};
pub use error::{Error, Result};
pub use experiment::{
    compare_propagators, run_experiment, ExperimentConfig, OutputFormat, Propagator, ResultsBundle,
};
pub use mitigation::{
    BetaPosterior, DirichletPosterior, EnsembleEstimate, Extrapolation, ReadoutParams,
};
pub use model::{build_model, NeutrinoModel};
pub use noise::{CalibrationRecord, NoiseModel};
pub use observables::{MitigationTag, ObservableSeries};
pub use qsim::{CountsRecord, DensityMatrix, Pauli, PauliString, Statevector};
pub use tomography::{DensityMatrixEstimate, PairData};

//! Sub-aperture SAR image formation.
//!
//! Phase-history data are split into overlapping azimuth windows; each window
//! is inverted with a sparse-Bayesian coordinate-descent solver that returns a
//! Gaussian approximation of the window's posterior (mean, covariance
//! diagonal, speckle precisions, noise precision). Window posteriors combine
//! into max-modulus, mean, standard-deviation and speckle composites.

pub mod baseline;
pub mod cg;
pub mod composite;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod nufft;
pub mod operator;
pub mod regularizers;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{
    compute_spatial_frequencies, freq_coords, plan_subapertures, AperturePlan, ChirpParams, ComplexImage, FreqCoords,
    FrequencyAxis, PhaseHistory, SceneGrid, Window,
};
pub use nufft::{direct_dft, direct_dft_adjoint, NufftOperator, NufftParams};
pub use operator::{DenseOperator, Identity, LinearOperator};
pub use regularizers::{PhaseMatrix, RegularizerKind, SparsifyingOperator};
pub use solver::{run_all, run_window, GramMode, SolverConfig, SolverPath, SubAperturePosterior};

pub use num_complex::Complex64;

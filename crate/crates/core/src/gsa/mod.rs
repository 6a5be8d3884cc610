//! Variance-based global sensitivity analysis with the extended Fourier
//! amplitude sensitivity test (eFAST).

mod efast;

pub use efast::{
    efast_analyze, efast_design, efast_indices, frequencies, run_gsa, Curve, EfastConfig, EfastDesign, GsaOptions,
    OutputIndices, SobolIndex, SobolResult,
};

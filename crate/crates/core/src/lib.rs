pub mod domain;
pub mod cli;
pub mod closed_form;
pub mod error;
pub mod limit;
pub mod perturbation;
pub mod quadrature;
pub mod solver;
pub mod specfun;

pub use domain::{
    Branch, ChannelIndices, Interpolation, MassConvention, PotentialSpec, PowerTerm, RadialProblem,
    ScatteringObservables, TabulatedPotential,
};
pub use error::{Error, Result};

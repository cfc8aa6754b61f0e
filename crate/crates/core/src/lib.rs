//! Layered split-step propagation for nonlinear Schrödinger equations and
//! gradient-based identification of potentials and coupling constants.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision to `f64`, which all drivers use.

// `!(x > 0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod coupled;
pub mod dictionary;
pub mod error;
pub mod field;
pub mod propagator;
pub mod scalar;
pub mod scenarios;
pub mod trainer;

pub use adjoint::{
    coupled_grad_zetas, fd_gradient, max_relative_deviation, misfit_grad_coeffs, misfit_grad_v, FdSpec,
    GradientReport, ParamKind,
};
pub use coupled::{coupled_loss, coupled_propagate, AS_PRINTED, FOCUSING};
pub use dictionary::{assemble, default_library, soft_threshold, synthesize, Library};
pub use error::{Error, Result};
pub use field::{apply_symbol, rel_err_vector, rel_misfit};
pub use propagator::{first_order_propagate, propagate, LinearMode};
pub use scalar::Scalar;
pub use scenarios::{convergence_study, landscape_scan, residual_check, Refine, ScenarioName, SplitOrder};
pub use trainer::{train_coeffs, train_zetas, InitKind};

pub type Grid1D = field::Grid1D<f64>;
pub type WaveField = field::WaveField<f64>;
pub type SpectralSymbol = field::SpectralSymbol<f64>;
pub type ProblemParams = propagator::ProblemParams<f64>;
pub type Propagator = propagator::Propagator<f64>;
pub type PropagationTape = propagator::PropagationTape<f64>;
pub type CoupledField = coupled::CoupledField<f64>;
pub type CoupledParams = coupled::CoupledParams<f64>;
pub type CoupledData = coupled::CoupledData<f64>;
pub type SolitonPair = coupled::SolitonPair<f64>;
pub type DictionaryMatrix = dictionary::DictionaryMatrix<f64>;
pub type Coeffs = dictionary::Coeffs<f64>;
pub type MisfitData = adjoint::MisfitData<f64>;
pub type LrSchedule = trainer::LrSchedule<f64>;
pub type TrainConfig = trainer::TrainConfig<f64>;
pub type TrainRecord = trainer::TrainRecord<f64>;
pub type Scenario = scenarios::Scenario<f64>;
pub type ConvergenceTable = scenarios::ConvergenceTable<f64>;
pub type Landscape = scenarios::Landscape<f64>;

/// Single-precision counterparts.
pub mod f32 {
    pub type Grid1D = crate::field::Grid1D<f32>;
    pub type WaveField = crate::field::WaveField<f32>;
    pub type ProblemParams = crate::propagator::ProblemParams<f32>;
    pub type Propagator = crate::propagator::Propagator<f32>;
    pub type Scenario = crate::scenarios::Scenario<f32>;
}

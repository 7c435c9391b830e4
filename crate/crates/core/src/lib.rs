// `!(x > 0.0)` is used on purpose to reject NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gibbs;
pub mod potentials;
pub mod profiles;
pub mod quadrature;
pub mod scalar;
pub mod harness;
pub mod hypoco;
pub mod linalg;
pub mod microsim;
pub mod pde;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Potential = potentials::Potential<f64>;
pub type Potential32 = potentials::Potential<f32>;
pub type GibbsSolver = gibbs::GibbsSolver<f64>;
pub type GibbsSolver32 = gibbs::GibbsSolver<f32>;
pub type HydroModel = pde::HydroModel<f64>;
pub type HydroModel32 = pde::HydroModel<f32>;
pub type StrainField = pde::StrainField<f64>;
pub type StrainField32 = pde::StrainField<f32>;
pub type ChainSetup = microsim::ChainSetup<f64>;
pub type ChainSetup32 = microsim::ChainSetup<f32>;
pub type ChainState = microsim::ChainState<f64>;
pub type ChainState32 = microsim::ChainState<f32>;
pub type GaussianMoments = hypoco::GaussianMoments<f64>;
pub type GaussianMoments32 = hypoco::GaussianMoments<f32>;
pub type Matrix = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;

pub mod cli;
pub mod geodesic;
pub mod lpv_baselines;
pub mod model;
mod quadrature;
pub mod realization;
pub mod symdyn;
pub mod sim;
pub mod synthesis;

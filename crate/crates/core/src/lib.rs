//! Random self-affine sponges: symbolic model, ratio laws, dimension
//! solvers, martingale measures, estimators and renderers.

pub mod dimension;
pub mod distributions;
pub mod error;
pub mod estimator;
pub mod keys;
pub mod measure;
pub mod presets;
pub mod quadrature;
pub mod render;
pub mod rifs;
pub mod stats;
pub mod symbolic;

pub use error::{Error, ErrorKind, Result};

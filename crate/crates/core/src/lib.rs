//! Jump process with attraction on a periodic torus: kernel analysis,
//! configuration functionals, kinetic Monte Carlo, the correlation-function
//! hierarchy and its scale-of-spaces bounds.

pub mod bounds;
pub mod configurations;
pub mod crossval;
pub mod error;
pub mod exec;
pub mod grid;
pub mod hierarchy;
pub mod kernels;
pub mod simulator;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{Point, TorusDomain};

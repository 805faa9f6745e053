//! Operator-splitting time integration for the one-dimensional Westervelt
//! equation `(1 - delta psi_t) psi_tt - alpha psi_xxt - beta psi_xx = 0`.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod splitting;
pub mod subsolvers;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{BoundaryMode, Field, Grid1D, SpacePair};
pub use model::{Decomposition, ModelParams, State};
pub use splitting::{IntegratorConfig, Integrator, SplitScheme};
pub use subsolvers::{InnerScheme, SchemeKind};

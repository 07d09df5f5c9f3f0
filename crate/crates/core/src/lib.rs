//! Numerical laboratory for the obstacle problem of the fractional
//! Laplacian, posed through its weighted local extension.
//!
//! The pipeline is: build an [`grid::ExtensionGrid`], pick an obstacle,
//! solve the discrete complementarity problem with
//! [`solver::solve_obstacle`], then locate and classify free boundary
//! points with the radial functionals of [`diagnostics`] and the tools of
//! [`freeboundary`]. [`stopping`] cross-checks the solution against the
//! optimal stopping problem of a symmetric stable process.

pub mod blowup;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod freeboundary;
pub mod grid;
pub mod obstacle;
pub mod quad;
pub mod selftest;
pub mod solver;
pub mod stopping;

pub use blowup::QuadraticBlowup;
pub use error::{Error, Result};
pub use field::SolutionField;
pub use grid::{build_grid, ExtensionGrid, GridParams};
pub use obstacle::{make_cap_obstacle, ObstacleParams, ObstacleSpec};
pub use solver::{solve_obstacle, BoundaryData, DiscreteOperator, SolverConfig};

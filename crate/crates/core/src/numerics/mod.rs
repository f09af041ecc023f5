//! Grids, finite differences, sparse linear algebra, Newton and quadrature.

pub mod fd;
pub mod grid;
pub mod newton;
pub mod polar;
pub mod quadrature;
pub mod sparse;

pub use fd::fd_gradient;
pub use grid::{Grid2D, GridKind, ScalarField, VectorField2};
pub use newton::{max_norm, newton_solve, NewtonOptions, NewtonReport};
pub use polar::{first_dirichlet_eigenpair, Eigenpair, PolarPoissonSolver, PolarUnknowns};
pub use quadrature::{adaptive_simpson, gauss_legendre, integrate, integrate_boundary};
pub use sparse::{BandLu, CsrMatrix, SparseSystem};

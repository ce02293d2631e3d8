//! Self-contained convex solver for linear programs with rotated second-order cone blocks.
//!
//! ```
//! use gridflex_solver::{solve, ProgramBuilder, RotatedCone, SolveStatus, SolverSettings};
//!
//! // min w  s.t.  u * w >= z^2,  u = 1,  z = 2
//! let mut b = ProgramBuilder::new(3);
//! b.set_cost(1, 1.0);
//! b.add_eq(vec![(0, 1.0)], 1.0);
//! b.add_eq(vec![(2, 1.0)], 2.0);
//! b.add_cone(RotatedCone::new(0, 1, vec![2]));
//! let result = solve(&b.build(), &SolverSettings::default()).unwrap();
//! assert_eq!(result.status, SolveStatus::Optimal);
//! assert!((result.x[1] - 4.0).abs() < 1e-7);
//! ```

mod cones;
mod equilibrate;
mod error;
mod ipm;
mod ldl;
mod program;
mod residuals;
mod sparse;

pub use error::SolverError;
pub use ipm::{solve, SolveStatus, SolverResult, SolverSettings};
pub use program::{ConicProgram, ProgramBuilder, RotatedCone};
pub use residuals::{residuals, Duals, Residuals};
pub use sparse::CsrMatrix;

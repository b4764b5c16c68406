//! Numerical solver for a discontinuous Sturm-Liouville problem
//!
//!   -y''(x) + q(x) y(x) = lambda y(x)   on [a, c) U (c, b],
//!
//! with a boundary condition at `a`, an eigenparameter-dependent boundary
//! condition at `b`,
//!
//!   tau1(y) = alpha10 y(a) + alpha11 y'(a) = 0,
//!   tau2(y) = alpha20 y(b) - alpha21 y'(b)
//!           + lambda (alpha20' y(b) - alpha21' y'(b)) = 0,
//!
//! and two transmission conditions coupling the one-sided limits at the
//! interior point `c` through a real 2x4 coefficient matrix.
//!
//! The crate constructs the two fundamental solutions `phi` (satisfying the
//! left boundary condition and the transmission conditions) and `psi`
//! (satisfying the right boundary condition and the transmission conditions)
//! by shooting, evaluates the characteristic function `omega(lambda)` whose
//! zeros are the eigenvalues, locates and refines eigenvalues, and evaluates
//! the leading-order asymptotic approximations of solutions, eigenvalues and
//! eigenfunctions so they can be compared against computed quantities.

pub mod asymptotics;
pub mod charfun;
pub mod integrate;
pub mod model;
pub mod presets;
pub mod scalar;
pub mod solutions;
pub mod spectrum;

mod quad;

pub use charfun::{charfun, charfun_via_boundary, count_zeros, wronskian, CharSample};
pub use integrate::{integrate_ivp, IntegratorOptions, State, Trace};
pub use model::{CaseTag, DeterminantSet, Potential, ProblemSpec, Side};
pub use scalar::Scalar;
pub use solutions::{phi, psi, transmission_backward, transmission_forward, PiecewiseSolution};
pub use spectrum::{eigenvalues, AsymptoticSeed, Branch, Eigenpair, SolveOptions};

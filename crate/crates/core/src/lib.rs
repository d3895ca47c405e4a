//! Numerical weak KAM theory on periodic grids.
//!
//! The discrete Lax–Oleinik operators are min-plus (and max-plus) products
//! with an action kernel `h(y, x) ≈ dt·L(x, (x − y)/dt)`. Their fixed points
//! up to the shift `c·dt` are discrete weak KAM solutions and `c` is the
//! critical value. On top of the solver the crate provides Karp's exact
//! eigenvalue, critical classes, symmetry averaging, conjugate pairs with a
//! Mather set approximation, and closed-form pendulum references.

pub mod critical;
pub mod error;
pub mod grid;
pub mod mather;
pub mod model;
pub mod oracle;
pub mod semigroup;
pub mod symmetry;

pub use critical::{critical_classes, critical_value, karp_min_mean_cycle, CriticalReport, MinMeanCycle};
pub use error::{Error, Result};
pub use grid::{GridFunction, PeriodicGrid};
pub use mather::{conjugate_pair, mather_set_approx, ConjugatePair, MatherSetApprox};
pub use model::{
    legendre_transform, HamiltonianModel, KineticForm, LagrangianModel, Potential, TabulatedLagrangian,
    UniformAxis,
};
pub use oracle::{compare_to_reference, Branch, ReferenceSolution};
pub use semigroup::{
    check_domination, solve_weak_kam, ActionKernel, Direction, QuadratureRule, ResidualRecord, WeakKamSolution,
};
pub use symmetry::{average, check_invariance, verify_symmetry, GridSymmetry, GroupKind, SymmetryGroup};

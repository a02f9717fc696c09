// NaN-rejecting `!(x > 0.0)` validations and index-style small linear
// algebra are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

//! Equilibrium measures on `[0, +inf)` in the external field
//! `x^2/2 + beta*x + gamma*log(x + v)`, their evolution in the total mass
//! `t` and in the charge position `v`, and the resulting phase diagrams
//! over the `(beta, gamma)` plane.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] — parameter and support types, region classification,
//!   scaling maps, closed-form `v -> 0` limits;
//! * [`quad`] — singular-endpoint quadrature for masses, gap conditions
//!   and the effective potential;
//! * [`solver`] — the per-scenario nonlinear edge systems and the damped
//!   Newton solver around them;
//! * [`flow`] — evolution of a configuration in `t` or `v` with phase
//!   transition detection;
//! * [`phase`] — phase sequences, parameter-plane grids and the critical
//!   coupling of the symmetric quartic-log model;
//! * [`fekete`] — a discrete energy-minimization oracle for validating
//!   the continuum solver.

pub mod fekete;
pub mod flow;
pub mod model;
pub mod phase;
pub mod quad;
pub mod solver;

pub use fekete::{ks_distance, minimize_energy, FeketeError, ParticleConfig};
pub use flow::{
    evolve_t, evolve_v, rhs_t, rhs_v, EventKind, FlowError, FlowOptions, FlowParameter,
    RootVelocities, Trajectory, TransitionEvent,
};
pub use model::{
    classify_region, critical_points, density, halfline_to_realline, limit_measure_v0,
    quartic_b1_recipe, realline_density, rescale, transition_loci, unrescale, AcPart, BPair,
    FieldParams, MeasureLimit, ModelError, PhaseRegion, RealLineSupport, Scenario, SupportConfig,
    TransitionLoci,
};
pub use phase::{
    boundary_curves, expected_sequence, find_vc, phase_grid, phase_sequence, BoundaryCurve,
    PhaseCell, PhaseError,
};
pub use quad::{
    compat_functional, gap_condition, mass_integral, partial_mass, potential_w,
    saturation_functional, support_samples, w_spread_on_support, xi_robin, QuadError, QuadSpec,
};
pub use solver::{newton_solve, residuals, solve_at, SolveError, SolveReport, ValidityFlags};

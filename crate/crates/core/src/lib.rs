//! Finite-time blowup of the hydrostatic Euler equations, at desk scale.
//!
//! Restricted to a line `x = x̂` on which the initial horizontal velocity is
//! constant, and viewed in the frame that moves with that line, the
//! horizontal strain `a = −u_x` obeys a closed one-dimensional
//! integro-differential equation
//!
//! ```text
//! a_t + v a_y = a² − 2 ∫₀¹ a² dy,    v_y = a,    v(0) = v(1) = 0.
//! ```
//!
//! Convex mean-zero data with `a'(0) = 0` stay convex, so
//! `∫a² ≤ a(t,1)²/3`, and the top-wall value obeys the Riccati inequality
//! `ȧ(t,1) ≥ a(t,1)²/3`. It therefore blows up no later than `3 / a₀(1)`.
//!
//! The crate is organised along that argument:
//!
//! - [`grid`]: uniform grids, quadrature and fourth-order differences in `y`;
//! - [`reduced`]: the right-hand side above and per-snapshot diagnostics;
//! - [`integrator`]: adaptive Dormand–Prince integration to the singularity;
//! - [`lemmas`]: hypothesis validation, the one-third inequality, data families;
//! - [`characteristics`]: particle paths of the reduced flow;
//! - [`transform`]: sampled 2-D fields, the Galilean freezing shift and
//!   residual checks on manufactured solutions.
//!
//! ```
//! use hydroblow::{simulate, make_initial_profile, ProfileFamily, SimConfig, Termination};
//!
//! let config = SimConfig { n_nodes: 129, ..SimConfig::default() };
//! let a0 = make_initial_profile(&config.grid()?, ProfileFamily::Poly2 { c: 3.0 })?;
//! let run = simulate(&config, &a0)?;
//! assert_eq!(run.termination, Termination::BlowupDetected);
//! assert!(run.estimated_blowup_time.unwrap().time < 1.5);
//! # Ok::<(), hydroblow::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod characteristics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod lemmas;
pub mod reduced;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{build_grid, cumulative_integral, derivative_y, integrate, Derivative, GridSpec, Profile};
pub use integrator::{
    estimate_blowup_time, riccati_lower_bound, simulate, BlowupEstimate, BlowupSignal, SimConfig,
    SimResult, Termination,
};
pub use lemmas::{
    check_convexity_lemma, fuzz_convexity_lemma, make_initial_profile, validate_hypotheses,
    FamilyKind, FuzzSummary, HypothesisReport, LemmaReport, ProfileFamily,
};
pub use reduced::{
    diagnostics_of, pressure_curvature, reconstruct_velocity, rhs, rhs_with, DiagnosticsRow, PressureForm,
    ReducedState,
};
pub use characteristics::{trace_reduced_characteristic, CharacteristicPath};
pub use transform::{
    galilean_transform, galilean_transform_onto, hydrostatic_residual, verify_characteristic_ode, Axis,
    CharacteristicReport, Field2D, GalileanShift,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/reduced.md")]
    mod reduced {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/convexity.md")]
    mod convexity {}
    #[doc = include_str!("../../../book/src/characteristics.md")]
    mod characteristics {}
    #[doc = include_str!("../../../book/src/transform.md")]
    mod transform {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

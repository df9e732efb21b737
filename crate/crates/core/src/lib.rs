//! Numerical laboratory for `O(n)`-equivariant Lagrangian mean curvature flow
//! in `ℂⁿ`, reduced to the evolution of a planar profile curve.
//!
//! The crate is organised bottom-up:
//!
//! * [`curve`]: discretised profile curves, Lagrangian angle, curvature
//!   decomposition, intersection and topology tests, regridding.
//! * [`models`]: closed-form special Lagrangians (radial lines, plane pairs,
//!   Lawlor necks), the singular initial condition of Neves, cone barriers.
//! * [`solver`]: time integration of the equivariant flow and singularity
//!   detection.
//! * [`blowup`]: rescalings, Gaussian density and monotonicity probes, model
//!   fitting and angle diagnostics.
//! * [`io`]: the on-disk curve format.

pub mod blowup;
pub mod curve;
pub mod geometry;
pub mod io;
pub mod models;
pub mod quad;
pub mod solver;

pub use curve::{
    curvature_field, lagrangian_angle_field, resample_arclength, self_intersects, turning_winding,
    verify_lagrangian, AngleField, CurvatureField, CurveError, Orientation, ProfileCurve, Symmetry,
};
pub use geometry::{pt, Point};
pub use models::{ModelError, SpecialLagrangianModel};
pub use solver::{
    detect_singularity, evolve, FlowTrajectory, Integrator, IntegratorState, SingularityReport, SolverError,
    SolverParams, Termination, TypeClass,
};
pub use blowup::{BlowupError, ModelFit, RescalingSpec, SpacetimePoint, Window};

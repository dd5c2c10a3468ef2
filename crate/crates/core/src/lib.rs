//! Space-time mixed finite element solvers for distributed null control of
//! the 1D heat equation.
//!
//! The library computes a distributed control `v`, supported on a subinterval
//! `ω ⊂ (0,1)` of the space domain, that drives the solution of
//!
//! ```text
//! y_t - (c(x) y_x)_x + d(x) y = v·1_ω   in Q_T = (0,1)×(0,T),
//! y(0,·) = y(1,·) = 0,                  y(·,0) = y0,
//! ```
//!
//! to zero (or to an `ε`-small state) at time `T`. Instead of marching in
//! time, the adjoint variable is sought in a C¹ finite element space over the
//! whole space-time cylinder, and the control problem becomes a saddle-point
//! system coupling the adjoint `φ` with a multiplier `λ` that turns out to be
//! the controlled state itself. Three variants are implemented:
//!
//! * a penalized formulation with terminal penalty `ε > 0` and an augmented
//!   least-squares term `r‖L*φ‖²` ([`assembly::assemble_mf1`]);
//! * a relaxed formulation that imposes the adjoint equation in
//!   `L²(0,T;H⁻¹)` with bilinear elements for both variables
//!   ([`assembly::assemble_mf2`]);
//! * the limit case `ε = 0` after the normalization `ψ = ρ0⁻¹φ`, which
//!   removes the exponential blow-up of the weights from the discrete system
//!   ([`assembly::assemble_mf3norm`]).
//!
//! Supporting pieces: weight functions with prescribed terminal blow-up
//! ([`weights`]), Bogner-Fox-Schmit C¹ rectangles and bilinear elements on
//! uniform space-time meshes ([`mesh`]), sparse symmetric solvers and
//! spectral estimators ([`linalg`]), saddle-point and conjugate-gradient
//! solution drivers with inf-sup diagnostics ([`solvers`]), a Fourier-series
//! reference solution for benchmarking ([`oracle`]), an independent implicit
//! time-marching verification solver ([`forward`]), plus run configuration
//! and CSV reporting for the command line tool ([`config`], [`report`]).

pub mod assembly;
pub mod config;
pub mod forward;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod reference;
pub mod report;
pub mod solvers;
pub mod weights;

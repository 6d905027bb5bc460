//! Deterministic follow-the-leader (FTL) particle approximation of scalar
//! conservation laws `rho_t + (rho v(rho))_x = 0`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! numerics; file formats, configuration and the command line live in the
//! `ftl-harness` crate.
//!
//! Module map:
//!
//! * [`model`]: velocity laws `v`, flux `f(rho) = rho v(rho)` and the
//!   structural checks (V1) `v' < 0` and (V2) `rho v'(rho)` non-increasing.
//! * [`quantile`]: equal-mass splitting of the initial datum into particles.
//! * [`dynamics`]: the FTL right-hand side, the gap-density ODE used as an
//!   oracle, and time integration.
//! * [`integrator`]: embedded Bogacki–Shampine 2(3) with PI step control and
//!   cubic Hermite dense output.
//! * [`density`]: piecewise-constant densities, CDFs and pseudo-inverses.
//! * [`metrics`]: total variation, W1, L1 error, the one-sided (Oleinik)
//!   functional and the Kruzhkov entropy residual.
//! * [`reference`]: Riemann solver and front tracking for concave fluxes.
//!
//! # Particle indexing
//!
//! A [`ParticleState`] always holds `N + 1` positions `x_0 < ... < x_N`
//! bounding `N` gaps of mass `ell = M / N` each.
//!
//! | mode       | integrated particles | leader (`v_max`) | algebraic particles |
//! |------------|----------------------|------------------|---------------------|
//! | `Anchored` | `x_0 ..= x_N`        | `x_N`            | none                |
//! | `Phantom`  | `x_1 ..= x_{N-1}`    | `x_{N-1}`        | `x_0 = 2x_1 - x_2`, `x_N = 2x_{N-1} - x_{N-2}` |
//!
//! In `Phantom` mode the gap densities satisfy `R_0 = R_1` and
//! `R_{N-1} = R_{N-2}`, so the gap behind the leader is `N - 2`. In
//! `Anchored` mode it is `N - 1` and `x_0`, `x_N` start at the ends of the
//! support.
#![no_std]

extern crate alloc;

pub mod density;
pub mod dynamics;
mod error;
pub mod integrator;
pub mod metrics;
pub mod model;
pub mod quantile;
pub mod reference;

pub use density::{PiecewiseConstantDensity, PseudoInverse};
pub use dynamics::{GapDensities, Trajectory};
pub use error::Error;
pub use model::{Velocity, VelocityModel};
pub use quantile::{InitialDatum, Mode, ParticleState};

pub type Result<T, E = Error> = core::result::Result<T, E>;

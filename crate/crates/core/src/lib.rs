//! Planar random walks and Lorentz processes.
//!
//! The crate is split along the lines of the models it simulates:
//!
//! * [`geometry`] – exact ray/disk intersection, specular reflection and the
//!   event-driven next-collision search over a periodic scatterer table.
//! * [`lorentz`] – scatterer configurations, horizon analysis, initial
//!   conditions and collision-indexed Lorentz trajectories.
//! * [`walk`] – simple, locally perturbed, heavy-tailed and strongly
//!   perturbed random walks on `Z²`.
//! * [`scaling`] – diffusive and superdiffusive rescaling of trajectories.
//! * [`stats`] – ensemble accumulators, estimators, exact lattice oracles and
//!   hypothesis tests.
//! * [`streams`] – reproducible per-trajectory random streams.

pub mod error;
pub mod geometry;
pub mod lorentz;
pub mod scaling;
pub mod stats;
pub mod streams;
pub mod walk;

pub use error::{Error, Result};
pub use geometry::{CollisionEvent, Disk, DiskId, FlightOutcome, PlanarVector};
pub use lorentz::{CollisionTrajectory, PhasePoint, ScattererTable};
pub use walk::{JumpLaw, LatticePath, Site, WalkSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

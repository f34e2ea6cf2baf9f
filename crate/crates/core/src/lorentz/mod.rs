//! Periodic and locally perturbed Lorentz processes.

mod horizon;
mod sim;
mod table;

pub use horizon::{horizon_check, max_free_path_bound, Corridor, FreePathBound, Horizon, DEFAULT_MAX_DENOMINATOR};
pub use sim::{
    sample_initial, simulate_lorentz, CollisionTrajectory, LorentzFlow, PhasePoint, Region, TrajectoryEvent,
    Truncation, DEFAULT_MAX_FLIGHT, MAX_SAMPLING_ATTEMPTS,
};
pub use table::{builtin_configuration, Builtin, PatchOp, ScattererTable};

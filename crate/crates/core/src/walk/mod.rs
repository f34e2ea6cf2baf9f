//! Random walks on `Z²`: translation-invariant, locally perturbed, heavy
//! tailed and strongly perturbed.

mod law;
mod sim;
mod spec;

pub use law::{FiniteLaw, HeavyAxisLaw, JumpLaw, Site, HEAVY_AXIS_C, HEAVY_TABLE_MAX, UNIT_JUMPS, ZETA_3};
pub use sim::{simulate_walk, simulate_walk_with, LatticePath, Walker};
pub use spec::{
    biased_origin_law, make_heavy_axis_walk, make_lpsrw, make_lpsrw_with_delta, make_ssrw, make_strongly_perturbed,
    PatchRule, Schedule, ScheduleMode, WalkSpec, DEFAULT_DELTA,
};

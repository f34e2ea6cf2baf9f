//! Walk specifications: background law plus local or growing perturbations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::law::{FiniteLaw, JumpLaw, Site};
use crate::error::{Error, Result};

/// Default lower bound on perturbed transition probabilities.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Growth rule for the side of the perturbed cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { a: f64 },
    /// `a_n = ⌈n^α⌉`.
    Power { alpha: f64 },
}

impl Schedule {
    pub fn side(&self, n: u64) -> f64 {
        match *self {
            Schedule::Constant { a } => a,
            Schedule::Power { alpha } => (n.max(1) as f64).powf(alpha).ceil(),
        }
    }
}

/// How the schedule is read during a run of length `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Step `k` uses the cube `Q_{a_k}`.
    #[default]
    PerStep,
    /// The whole run uses `Q_{a_N}`: one member of the sequence of walks.
    FixedHorizon,
}

/// Law assigned to each site of a growing cube.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchRule {
    /// Nearest-neighbour law with weights `(1 ∓ β·sgn)/4` favouring jumps
    /// toward the origin; `origin` is used at the origin itself.
    TowardOrigin { bias: f64, origin: FiniteLaw },
    /// The same law at every perturbed site.
    Uniform(FiniteLaw),
}

impl PatchRule {
    fn min_probability(&self) -> f64 {
        match self {
            PatchRule::TowardOrigin { bias, origin } => ((1.0 - bias) / 4.0).min(origin.min_probability()),
            PatchRule::Uniform(law) => law.min_probability(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Patch {
    None,
    /// Explicit site laws inside the cube `|x|∞ ≤ a/2`.
    Sites { laws: HashMap<Site, FiniteLaw>, half_side: f64 },
    Growing { rule: GrowingRule, schedule: Schedule, mode: ScheduleMode },
}

/// A [`PatchRule`] with its site laws precomputed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum GrowingRule {
    /// Indexed by `3·(sgn x + 1) + (sgn y + 1)`.
    BySign(Box<[FiniteLaw; 9]>),
    Uniform(FiniteLaw),
}

impl GrowingRule {
    fn from_rule(rule: &PatchRule) -> Result<Self> {
        match rule {
            PatchRule::Uniform(l) => Ok(GrowingRule::Uniform(l.clone())),
            PatchRule::TowardOrigin { bias, origin } => {
                if !(0.0..1.0).contains(bias) {
                    return Err(Error::InvalidArgument(format!("bias must lie in [0, 1), got {bias}")));
                }
                let mut laws = Vec::with_capacity(9);
                for sx in -1i64..=1 {
                    for sy in -1i64..=1 {
                        if sx == 0 && sy == 0 {
                            laws.push(origin.clone());
                            continue;
                        }
                        let b = *bias;
                        let sx = sx as f64;
                        let sy = sy as f64;
                        laws.push(FiniteLaw::nearest_neighbour([
                            (1.0 - b * sx) / 4.0,
                            (1.0 + b * sx) / 4.0,
                            (1.0 - b * sy) / 4.0,
                            (1.0 + b * sy) / 4.0,
                        ])?);
                    }
                }
                let laws: [FiniteLaw; 9] = laws.try_into().expect("nine sign classes");
                Ok(GrowingRule::BySign(Box::new(laws)))
            }
        }
    }

    #[inline]
    pub(crate) fn law_at(&self, site: Site) -> &FiniteLaw {
        match self {
            GrowingRule::Uniform(l) => l,
            GrowingRule::BySign(laws) => &laws[(3 * (site.x.signum() + 1) + (site.y.signum() + 1)) as usize],
        }
    }
}

/// A position-dependent walk: translation-invariant background, perturbed
/// inside an origin-centred cube.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    pub(crate) background: JumpLaw,
    pub(crate) patch: Patch,
    delta: f64,
}

fn in_cube(site: Site, side: f64) -> bool {
    let half = side / 2.0;
    (site.x.abs() as f64) <= half && (site.y.abs() as f64) <= half
}

impl WalkSpec {
    pub fn translation_invariant(background: JumpLaw) -> Self {
        WalkSpec { background, patch: Patch::None, delta: DEFAULT_DELTA }
    }

    /// Walk whose laws differ from `background` only at the listed sites,
    /// all inside the cube of side `a` centred at the origin.
    pub fn locally_perturbed(background: JumpLaw, a: f64, laws: HashMap<Site, FiniteLaw>, delta: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!("cube side must be positive, got {a}")));
        }
        for (site, law) in &laws {
            if !in_cube(*site, a) {
                return Err(Error::InvalidArgument(format!("perturbed site {site:?} outside Q_{a}")));
            }
            if law.min_probability() < delta {
                return Err(Error::InvalidArgument(format!(
                    "law at {site:?} has a probability below δ = {delta}"
                )));
            }
        }
        Ok(WalkSpec { background, patch: Patch::Sites { laws, half_side: a / 2.0 }, delta })
    }

    pub fn background(&self) -> &JumpLaw {
        &self.background
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_translation_invariant(&self) -> bool {
        matches!(self.patch, Patch::None)
    }

    /// Side of the perturbed cube used for step `step` (1-based) of a run of
    /// `horizon` steps; zero when unperturbed.
    pub fn cube_side(&self, step: u64, horizon: u64) -> f64 {
        match &self.patch {
            Patch::None => 0.0,
            Patch::Sites { half_side, .. } => 2.0 * half_side,
            Patch::Growing { schedule, mode, .. } => match mode {
                ScheduleMode::PerStep => schedule.side(step),
                ScheduleMode::FixedHorizon => schedule.side(horizon),
            },
        }
    }

    /// Law used for a jump from `site`, given the cube side in force.
    #[inline]
    pub(crate) fn law_at(&self, site: Site, side: f64) -> Option<&FiniteLaw> {
        match &self.patch {
            Patch::None => None,
            Patch::Sites { laws, half_side } => {
                if (site.x.abs() as f64) <= *half_side && (site.y.abs() as f64) <= *half_side {
                    laws.get(&site)
                } else {
                    None
                }
            }
            Patch::Growing { rule, .. } => in_cube(site, side).then(|| rule.law_at(site)),
        }
    }
}

/// Simple symmetric random walk.
pub fn make_ssrw() -> WalkSpec {
    WalkSpec::translation_invariant(JumpLaw::ssrw())
}

/// SSRW with an arbitrary δ-bounded law at the origin.
pub fn make_lpsrw(origin_law: FiniteLaw) -> Result<WalkSpec> {
    make_lpsrw_with_delta(origin_law, DEFAULT_DELTA)
}

pub fn make_lpsrw_with_delta(origin_law: FiniteLaw, delta: f64) -> Result<WalkSpec> {
    WalkSpec::locally_perturbed(JumpLaw::ssrw(), 1.0, HashMap::from([(Site::ORIGIN, origin_law)]), delta)
}

/// Heavy axis background (`c/m³` along the axes) with `origin_law` at the
/// origin; the default origin law is uniform on the unit jumps.
pub fn make_heavy_axis_walk(origin_law: Option<FiniteLaw>) -> Result<WalkSpec> {
    let origin_law = origin_law.unwrap_or_else(FiniteLaw::simple_symmetric);
    WalkSpec::locally_perturbed(JumpLaw::heavy_axis(), 1.0, HashMap::from([(Site::ORIGIN, origin_law)]), DEFAULT_DELTA)
}

/// Strongly `a_n`-perturbed walk with `a_n = ⌈n^α⌉`.
///
/// Bounded-jump backgrounds accept `0 ≤ α < ½` (`a_n = o(n^{1/2})`); the
/// heavy axis background accepts `0 ≤ α ≤ ½` (`a_n = o((n log n)^{1/2})`).
/// `allow_outside_regime` lifts the upper limit.
pub fn make_strongly_perturbed(
    background: JumpLaw,
    alpha: f64,
    rule: PatchRule,
    mode: ScheduleMode,
    allow_outside_regime: bool,
) -> Result<WalkSpec> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("α must be a non-negative number, got {alpha}")));
    }
    let in_regime = match background {
        JumpLaw::Finite(_) => alpha < 0.5,
        JumpLaw::HeavyAxis(_) => alpha <= 0.5,
    };
    if !in_regime && !allow_outside_regime {
        return Err(Error::InvalidArgument(format!(
            "α = {alpha} lets the perturbed cube outgrow the walk's scaling; set the override to run it anyway"
        )));
    }
    if rule.min_probability() < DEFAULT_DELTA {
        return Err(Error::InvalidArgument(format!("patch laws must stay above δ = {DEFAULT_DELTA}")));
    }
    let schedule = if alpha == 0.0 { Schedule::Constant { a: 1.0 } } else { Schedule::Power { alpha } };
    Ok(WalkSpec {
        background,
        patch: Patch::Growing { rule: GrowingRule::from_rule(&rule)?, schedule, mode },
        delta: DEFAULT_DELTA,
    })
}

/// A strongly biased origin law used by the perturbation probes:
/// `(0.7, 0.1, 0.1, 0.1)` on `(+e₁, −e₁, +e₂, −e₂)`.
pub fn biased_origin_law() -> FiniteLaw {
    FiniteLaw::nearest_neighbour([0.7, 0.1, 0.1, 0.1]).expect("valid table")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lpsrw_validation() {
        assert!(make_lpsrw(biased_origin_law()).is_ok());
        let zero = FiniteLaw::new(&[(Site::E1, 0.5), (Site::new(-1, 0), 0.5)]).unwrap();
        assert!(make_lpsrw(zero).is_ok(), "missing jumps are absent, not zero");
        let tiny = FiniteLaw::nearest_neighbour([0.9995, 0.0001, 0.0002, 0.0002]).unwrap();
        assert!(make_lpsrw(tiny).is_err());
    }

    #[test]
    fn patch_outside_cube_rejected() {
        let laws = HashMap::from([(Site::new(2, 0), FiniteLaw::simple_symmetric())]);
        assert!(WalkSpec::locally_perturbed(JumpLaw::ssrw(), 2.0, laws, DEFAULT_DELTA).is_err());
    }

    #[test]
    fn strongly_perturbed_regime() {
        let rule = PatchRule::TowardOrigin { bias: 0.3, origin: biased_origin_law() };
        assert!(make_strongly_perturbed(JumpLaw::ssrw(), 0.25, rule.clone(), ScheduleMode::PerStep, false).is_ok());
        assert!(make_strongly_perturbed(JumpLaw::ssrw(), 0.6, rule.clone(), ScheduleMode::PerStep, false).is_err());
        assert!(make_strongly_perturbed(JumpLaw::ssrw(), 0.6, rule.clone(), ScheduleMode::PerStep, true).is_ok());
        assert!(make_strongly_perturbed(JumpLaw::ssrw(), 0.5, rule.clone(), ScheduleMode::PerStep, false).is_err());
        assert!(make_strongly_perturbed(JumpLaw::heavy_axis(), 0.5, rule.clone(), ScheduleMode::PerStep, false).is_ok());
        let bad = PatchRule::TowardOrigin { bias: 0.9999, origin: biased_origin_law() };
        assert!(make_strongly_perturbed(JumpLaw::ssrw(), 0.25, bad, ScheduleMode::PerStep, false).is_err());
    }

    #[test]
    fn schedule_sides() {
        let s = Schedule::Power { alpha: 0.25 };
        assert_eq!(s.side(1), 1.0);
        assert_eq!(s.side(16), 2.0);
        assert_eq!(s.side(17), 3.0);
        assert_eq!(s.side(10_000), 10.0);
    }

    #[test]
    fn toward_origin_laws() {
        let rule = GrowingRule::from_rule(&PatchRule::TowardOrigin { bias: 0.4, origin: biased_origin_law() }).unwrap();
        let law = rule.law_at(Site::new(3, -2));
        assert!((law.probability(Site::new(-1, 0)) - 0.35).abs() < 1e-15);
        assert!((law.probability(Site::new(1, 0)) - 0.15).abs() < 1e-15);
        assert!((law.probability(Site::new(0, 1)) - 0.35).abs() < 1e-15);
        assert_eq!(rule.law_at(Site::ORIGIN), &biased_origin_law());
    }
}

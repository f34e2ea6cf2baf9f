//! Declarative experiment files (TOML).

use std::path::{Path, PathBuf};

use lorentz_core::lorentz::{builtin_configuration, Builtin, PatchOp, Region, ScattererTable, DEFAULT_MAX_FLIGHT};
use lorentz_core::walk::{
    make_strongly_perturbed, FiniteLaw, JumpLaw, PatchRule, ScheduleMode, Site, WalkSpec, DEFAULT_DELTA,
};
use lorentz_core::PlanarVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Ensemble size `M`.
    pub ensemble: u64,
    /// Trajectory length: steps for walks, collisions for Lorentz.
    pub steps: u64,
    #[serde(default)]
    pub scaling: ScalingMode,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub analyses: Vec<AnalysisConfig>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    #[default]
    None,
    Diffusive,
    Superdiffusive,
}

impl ScalingMode {
    /// Divisor applied to the position at index `n`.
    pub fn divisor(self, n: u64) -> f64 {
        match self {
            ScalingMode::None => 1.0,
            ScalingMode::Diffusive => (n as f64).sqrt(),
            ScalingMode::Superdiffusive => lorentz_core::scaling::superdiffusive_divisor(n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Walk(WalkModel),
    Lorentz(LorentzModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkModel {
    pub law: LawConfig,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Ssrw,
    HeavyAxis,
    /// Probabilities of `+e1, −e1, +e2, −e2`.
    NearestNeighbour { probs: [f64; 4] },
    /// Arbitrary finite table of `[x, y, p]` rows.
    Table { jumps: Vec<(i64, i64, f64)> },
}

impl LawConfig {
    pub fn build(&self) -> lorentz_core::Result<JumpLaw> {
        Ok(match self {
            LawConfig::Ssrw => JumpLaw::ssrw(),
            LawConfig::HeavyAxis => JumpLaw::heavy_axis(),
            LawConfig::NearestNeighbour { probs } => JumpLaw::Finite(FiniteLaw::nearest_neighbour(*probs)?),
            LawConfig::Table { jumps } => {
                let entries: Vec<_> = jumps.iter().map(|&(x, y, p)| (Site::new(x, y), p)).collect();
                JumpLaw::Finite(FiniteLaw::new(&entries)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationConfig {
    /// A different nearest-neighbour law at the origin only.
    Origin { probs: [f64; 4] },
    /// Explicit laws at sites inside the cube of side `side`.
    Sites { side: f64, sites: Vec<SiteLaw> },
    /// Cube of side `⌈n^α⌉`.
    Strong {
        alpha: f64,
        rule: RuleConfig,
        #[serde(default)]
        mode: ScheduleMode,
        #[serde(default)]
        allow_outside_regime: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteLaw {
    pub site: (i64, i64),
    pub probs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    TowardOrigin { bias: f64, origin: [f64; 4] },
    Uniform { probs: [f64; 4] },
}

impl RuleConfig {
    fn build(&self) -> lorentz_core::Result<PatchRule> {
        Ok(match self {
            RuleConfig::TowardOrigin { bias, origin } => {
                PatchRule::TowardOrigin { bias: *bias, origin: FiniteLaw::nearest_neighbour(*origin)? }
            }
            RuleConfig::Uniform { probs } => PatchRule::Uniform(FiniteLaw::nearest_neighbour(*probs)?),
        })
    }
}

impl WalkModel {
    pub fn build(&self) -> Result<WalkSpec> {
        let background = self.law.build().map_err(|e| Error::config("model.law", e))?;
        let delta = self.delta.unwrap_or(DEFAULT_DELTA);
        let field = "model.perturbation";
        match &self.perturbation {
            None => Ok(WalkSpec::translation_invariant(background)),
            Some(PerturbationConfig::Origin { probs }) => {
                let law = FiniteLaw::nearest_neighbour(*probs).map_err(|e| Error::config(field, e))?;
                WalkSpec::locally_perturbed(background, 1.0, [(Site::ORIGIN, law)].into(), delta)
                    .map_err(|e| Error::config(field, e))
            }
            Some(PerturbationConfig::Sites { side, sites }) => {
                let mut laws = std::collections::HashMap::new();
                for s in sites {
                    let law = FiniteLaw::nearest_neighbour(s.probs).map_err(|e| Error::config(field, e))?;
                    if laws.insert(Site::new(s.site.0, s.site.1), law).is_some() {
                        return Err(Error::config(field, format!("site {:?} listed twice", s.site)));
                    }
                }
                WalkSpec::locally_perturbed(background, *side, laws, delta).map_err(|e| Error::config(field, e))
            }
            Some(PerturbationConfig::Strong { alpha, rule, mode, allow_outside_regime }) => {
                let rule = rule.build().map_err(|e| Error::config("model.perturbation.rule", e))?;
                make_strongly_perturbed(background, *alpha, rule, *mode, *allow_outside_regime)
                    .map_err(|e| Error::config("model.perturbation.alpha", e))
            }
        }
    }

    /// The same model without its perturbation.
    pub fn unperturbed(&self) -> WalkModel {
        WalkModel { law: self.law.clone(), perturbation: None, delta: self.delta }
    }

    pub fn with_alpha(&self, a: f64) -> Option<WalkModel> {
        match &self.perturbation {
            Some(PerturbationConfig::Strong { rule, mode, allow_outside_regime, .. }) => Some(WalkModel {
                law: self.law.clone(),
                perturbation: Some(PerturbationConfig::Strong {
                    alpha: a,
                    rule: rule.clone(),
                    mode: *mode,
                    allow_outside_regime: *allow_outside_regime,
                }),
                delta: self.delta,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzModel {
    pub table: Builtin,
    #[serde(default)]
    pub patch: Option<PatchConfig>,
    #[serde(default = "default_max_flight")]
    pub max_flight: f64,
    /// Initial positions are uniform on this box minus the scatterers;
    /// defaults to the unit cell.
    #[serde(default)]
    pub region: Option<[[f64; 2]; 2]>,
}

fn default_max_flight() -> f64 {
    DEFAULT_MAX_FLIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub bound: f64,
    pub ops: Vec<PatchOp>,
}

impl LorentzModel {
    pub fn build(&self) -> Result<ScattererTable> {
        let base = builtin_configuration(&self.table).map_err(|e| Error::config("model.table", e))?;
        match &self.patch {
            None => Ok(base),
            Some(p) => base.apply_patch(p.bound, &p.ops).map_err(|e| Error::config("model.patch", e)),
        }
    }

    pub fn region(&self) -> Region {
        match self.region {
            None => Region::unit_cell(),
            Some([a, b]) => Region { min: PlanarVector::new(a[0], a[1]), max: PlanarVector::new(b[0], b[1]) },
        }
    }

    pub fn unperturbed(&self) -> LorentzModel {
        LorentzModel { patch: None, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha: Vec<f64>,
}

/// One statistics operation and its verdict parameters. Analyses without a
/// tolerance are reported as exploratory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisConfig {
    EndpointCovariance {
        #[serde(default)]
        reference: Option<[[f64; 2]; 2]>,
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        max_off_diagonal: Option<f64>,
        #[serde(default)]
        min_eigenvalue: Option<f64>,
    },
    GaussianMarginal {
        coordinate: Coordinate,
        variance: f64,
    },
    GreenSlope {
        n_min: u64,
        n_max: u64,
        #[serde(default = "one_over_pi")]
        expected: f64,
        tolerance: f64,
    },
    ReturnFrequency {
        times: Vec<u64>,
        #[serde(default = "three")]
        sigmas: f64,
    },
    Fdd {
        s: f64,
        t: f64,
        #[serde(default)]
        reference: Option<[[f64; 2]; 2]>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Llt {
        time: u64,
        #[serde(default)]
        normalization: LltNormalization,
        #[serde(default)]
        expected: Option<f64>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Hill {
        top_fraction: f64,
        per_trajectory: u64,
        #[serde(default)]
        range: Option<[f64; 2]>,
    },
    Returns {
        radius: f64,
    },
    FlightTail {
        per_trajectory: u64,
        lo: f64,
        hi: f64,
        #[serde(default = "twelve")]
        points: usize,
        #[serde(default)]
        slope_range: Option<[f64; 2]>,
        #[serde(default = "axis_angle")]
        axis_angle: f64,
        #[serde(default)]
        min_axis_fraction: Option<f64>,
    },
    FreePathBound {
        angle_step: f64,
        offset_step: f64,
    },
    Stabilization {
        times: Vec<u64>,
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        min_eigenvalue: Option<f64>,
    },
    PathSamples {
        count: u64,
        #[serde(default = "hundred")]
        points: usize,
    },
}

fn one_over_pi() -> f64 {
    std::f64::consts::FRAC_1_PI
}
fn three() -> f64 {
    3.0
}
fn twelve() -> usize {
    12
}
fn hundred() -> usize {
    100
}
fn axis_angle() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LltNormalization {
    #[default]
    N,
    NLogN,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub ensemble: Option<u64>,
    pub steps: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner().message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(p) = &o.out {
            self.output = Some(p.clone());
        }
        if let Some(m) = o.ensemble {
            self.ensemble = m;
        }
        if let Some(n) = o.steps {
            self.steps = n;
        }
        self.validate()
    }

    /// SHA-256 of the canonical JSON form, ignoring the worker count and
    /// output directory, which do not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 1;
        c.output = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {CONFIG_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.ensemble == 0 {
            return Err(Error::config("ensemble", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if self.scaling == ScalingMode::Superdiffusive && self.steps < 2 {
            return Err(Error::config("scaling", "superdiffusive scaling needs steps ≥ 2"));
        }
        match &self.model {
            ModelConfig::Walk(w) => {
                w.build()?;
            }
            ModelConfig::Lorentz(l) => {
                l.build()?;
                if !(l.max_flight > 0.0) {
                    return Err(Error::config("model.max_flight", "must be positive"));
                }
                if !(l.region().area() > 0.0) {
                    return Err(Error::config("model.region", "must have positive area"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            let ModelConfig::Walk(w) = &self.model else {
                return Err(Error::config("sweep", "only strongly perturbed walks can be swept"));
            };
            if s.alpha.is_empty() {
                return Err(Error::config("sweep.alpha", "empty sweep"));
            }
            for &a in &s.alpha {
                let m = w.with_alpha(a).ok_or_else(|| Error::config("sweep", "model has no strong perturbation"))?;
                m.build().map_err(|e| Error::config("sweep.alpha", e))?;
            }
        }
        for (i, a) in self.analyses.iter().enumerate() {
            self.validate_analysis(a).map_err(|m| Error::config(&format!("analyses[{i}]"), m))?;
        }
        Ok(())
    }

    fn validate_analysis(&self, a: &AnalysisConfig) -> std::result::Result<(), String> {
        let walk = matches!(self.model, ModelConfig::Walk(_));
        let n = self.steps;
        let in_run = |t: u64| if t >= 1 && t <= n { Ok(()) } else { Err(format!("time {t} outside 1..={n}")) };
        match a {
            AnalysisConfig::GaussianMarginal { variance, .. } if !(*variance > 0.0) => {
                Err("variance must be positive".into())
            }
            AnalysisConfig::GreenSlope { n_min, n_max, .. } => {
                if !walk {
                    return Err("green_slope needs a walk model".into());
                }
                if !(2 <= *n_min && n_min < n_max) {
                    return Err("need 2 ≤ n_min < n_max".into());
                }
                Ok(())
            }
            AnalysisConfig::ReturnFrequency { times, .. } => {
                if !walk {
                    return Err("return_frequency needs a walk model".into());
                }
                times.iter().try_for_each(|&t| in_run(t))
            }
            AnalysisConfig::Llt { time, .. } => {
                if !walk {
                    return Err("llt needs a walk model".into());
                }
                in_run(*time)
            }
            AnalysisConfig::Fdd { s, t, .. } => {
                if !(0.0 < *s && s <= t && *t <= 1.0) {
                    return Err(format!("need 0 < s ≤ t ≤ 1, got s = {s}, t = {t}"));
                }
                Ok(())
            }
            AnalysisConfig::Hill { top_fraction, per_trajectory, .. } => {
                if !(*top_fraction > 0.0 && *top_fraction <= 0.05) {
                    return Err("top_fraction must lie in (0, 0.05]".into());
                }
                if *per_trajectory == 0 {
                    return Err("per_trajectory must be positive".into());
                }
                Ok(())
            }
            AnalysisConfig::Returns { radius } => {
                if !walk && !(*radius > 0.0) {
                    return Err("Lorentz returns need a positive radius".into());
                }
                if !(*radius >= 0.0) {
                    return Err("radius must be non-negative".into());
                }
                Ok(())
            }
            AnalysisConfig::FlightTail { lo, hi, per_trajectory, .. } => {
                if walk {
                    return Err("flight_tail needs a Lorentz model".into());
                }
                if !(0.0 < *lo && lo < hi) || *per_trajectory == 0 {
                    return Err("need 0 < lo < hi and per_trajectory > 0".into());
                }
                Ok(())
            }
            AnalysisConfig::FreePathBound { angle_step, offset_step } => {
                if walk {
                    return Err("free_path_bound needs a Lorentz model".into());
                }
                if !(*angle_step > 0.0 && *offset_step > 0.0) {
                    return Err("steps must be positive".into());
                }
                Ok(())
            }
            AnalysisConfig::Stabilization { times, .. } => {
                if times.len() < 2 {
                    return Err("stabilization needs at least two times".into());
                }
                times.iter().try_for_each(|&t| in_run(t))?;
                if self.scaling == ScalingMode::Superdiffusive && times.iter().any(|&t| t < 2) {
                    return Err("superdiffusive scaling needs times ≥ 2".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

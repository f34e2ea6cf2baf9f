//! Per-trajectory observation and the parallel ensemble driver.

use lorentz_core::lorentz::{sample_initial, LorentzFlow, Region, ScattererTable};
use lorentz_core::stats::{ReturnCounter, ReturnStats};
use lorentz_core::streams::stream;
use lorentz_core::walk::{Walker, WalkSpec};
use lorentz_core::PlanarVector;
use rayon::prelude::*;

use crate::config::{AnalysisConfig, ExperimentConfig, ModelConfig};
use crate::error::{Error, Result};

/// Trajectories per parallel task. Fixed so that task boundaries, and hence
/// results, do not depend on the worker count.
pub const CHUNK: u64 = 64;

/// What each trajectory has to record for the configured analyses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Plan {
    pub steps: u64,
    /// Sorted, distinct indices whose positions are kept; always ends with
    /// `steps`.
    pub checkpoints: Vec<u64>,
    pub return_radius: Option<f64>,
    pub lattice: bool,
    pub magnitudes: u64,
    pub flights: u64,
    pub keep_paths: u64,
}

impl Plan {
    pub fn for_config(cfg: &ExperimentConfig) -> Plan {
        let n = cfg.steps;
        let mut cps = vec![n];
        let mut plan = Plan { steps: n, lattice: matches!(cfg.model, ModelConfig::Walk(_)), ..Plan::default() };
        for a in &cfg.analyses {
            match a {
                AnalysisConfig::ReturnFrequency { times, .. } => cps.extend(times),
                AnalysisConfig::Stabilization { times, .. } => cps.extend(times),
                AnalysisConfig::Llt { time, .. } => cps.push(*time),
                AnalysisConfig::Fdd { s, t, .. } => {
                    for x in [s, t] {
                        let j = fdd_index(*x, n);
                        cps.push(j);
                        if j < n {
                            cps.push(j + 1);
                        }
                    }
                }
                AnalysisConfig::Returns { radius } => plan.return_radius = Some(*radius),
                AnalysisConfig::Hill { per_trajectory, .. } => {
                    plan.magnitudes = plan.magnitudes.max((*per_trajectory).min(n))
                }
                AnalysisConfig::FlightTail { per_trajectory, .. } => {
                    plan.flights = plan.flights.max((*per_trajectory).min(n))
                }
                AnalysisConfig::PathSamples { count, .. } => plan.keep_paths = plan.keep_paths.max(*count),
                _ => {}
            }
        }
        cps.sort_unstable();
        cps.dedup();
        plan.checkpoints = cps;
        plan
    }

    pub fn checkpoint_slot(&self, k: u64) -> Option<usize> {
        self.checkpoints.binary_search(&k).ok()
    }
}

/// `⌊x·n⌋`, exact when `x·n` is an integer up to rounding.
pub fn fdd_index(x: f64, n: u64) -> u64 {
    let v = x * n as f64;
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.max(1.0) {
        r as u64
    } else {
        v.floor() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    /// Positions at `plan.checkpoints`; a truncated trajectory repeats its
    /// last position.
    pub checkpoints: Vec<PlanarVector>,
    pub returns: Option<ReturnStats>,
    pub magnitudes: Vec<f64>,
    /// `(length, angle between the flight line and the nearest axis)`.
    pub flights: Vec<(f64, f64)>,
    pub max_flight: f64,
    pub completed: u64,
    pub path: Option<Vec<PlanarVector>>,
}

impl TrajectoryRecord {
    pub fn truncated(&self, plan: &Plan) -> bool {
        self.completed < plan.steps
    }

    pub fn at(&self, plan: &Plan, k: u64) -> PlanarVector {
        self.checkpoints[plan.checkpoint_slot(k).expect("checkpoint was planned")]
    }
}

fn axis_angle(v: PlanarVector) -> f64 {
    let a = v.y.abs().atan2(v.x.abs());
    a.min(std::f64::consts::FRAC_PI_2 - a)
}

/// Folds the states of one trajectory into a [`TrajectoryRecord`].
pub struct Observer<'p> {
    plan: &'p Plan,
    rec: TrajectoryRecord,
    next_cp: usize,
    last: PlanarVector,
    counter: Option<ReturnCounter>,
}

impl<'p> Observer<'p> {
    pub fn new(plan: &'p Plan, index: u64, q0: PlanarVector) -> Self {
        let inside = plan.return_radius.map(|r| Self::inside(plan, r, q0));
        let mut rec = TrajectoryRecord {
            index,
            checkpoints: Vec::with_capacity(plan.checkpoints.len()),
            returns: None,
            magnitudes: Vec::new(),
            flights: Vec::new(),
            max_flight: 0.0,
            completed: 0,
            path: (index < plan.keep_paths).then(|| vec![q0]),
        };
        let mut next_cp = 0;
        while next_cp < plan.checkpoints.len() && plan.checkpoints[next_cp] == 0 {
            rec.checkpoints.push(q0);
            next_cp += 1;
        }
        Observer { plan, rec, next_cp, last: q0, counter: inside.map(ReturnCounter::new) }
    }

    pub fn index(&self) -> u64 {
        self.rec.index
    }

    fn inside(plan: &Plan, radius: f64, q: PlanarVector) -> bool {
        if plan.lattice && radius == 0.0 {
            q == PlanarVector::ZERO
        } else {
            q.norm() <= radius
        }
    }

    /// State `k ≥ 1`. `magnitude` is the jump or flight length; `flight_dir`
    /// is the velocity during a Lorentz flight.
    #[inline]
    pub fn observe(&mut self, k: u64, q: PlanarVector, magnitude: f64, flight_dir: Option<PlanarVector>) {
        let plan = self.plan;
        self.rec.completed = k;
        if (self.rec.magnitudes.len() as u64) < plan.magnitudes {
            self.rec.magnitudes.push(magnitude);
        }
        if let Some(d) = flight_dir {
            self.rec.max_flight = self.rec.max_flight.max(magnitude);
            if (self.rec.flights.len() as u64) < plan.flights {
                self.rec.flights.push((magnitude, axis_angle(d)));
            }
        }
        if let (Some(c), Some(r)) = (self.counter.as_mut(), plan.return_radius) {
            c.push(k, Self::inside(plan, r, q));
        }
        if self.next_cp < plan.checkpoints.len() && plan.checkpoints[self.next_cp] == k {
            self.rec.checkpoints.push(q);
            self.next_cp += 1;
        }
        if let Some(p) = self.rec.path.as_mut() {
            p.push(q);
        }
        self.last = q;
    }

    pub fn finish(mut self) -> TrajectoryRecord {
        while self.rec.checkpoints.len() < self.plan.checkpoints.len() {
            self.rec.checkpoints.push(self.last);
        }
        self.rec.returns = self.counter.map(ReturnCounter::finish);
        self.rec
    }
}

pub fn walk_record(spec: &WalkSpec, plan: &Plan, seed: u64, index: u64) -> TrajectoryRecord {
    let n = plan.steps;
    let mut walker = Walker::new(spec, stream(seed, index), n);
    let mut obs = Observer::new(plan, index, PlanarVector::ZERO);
    let mut prev = walker.position();
    for k in 1..=n {
        let s = walker.step();
        let jump = s - prev;
        prev = s;
        obs.observe(k, PlanarVector::new(s.x as f64, s.y as f64), jump.l1_norm() as f64, None);
    }
    obs.finish()
}

pub fn lorentz_record(
    table: &ScattererTable,
    region: &Region,
    max_flight: f64,
    plan: &Plan,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    let fail = |source| Error::Trajectory { index, source };
    let mut rng = stream(seed, index);
    let init = sample_initial(table, region, &mut rng).map_err(fail)?;
    let mut flow = LorentzFlow::new(table, init, max_flight).map_err(fail)?;
    let mut obs = Observer::new(plan, index, init.q);
    let mut dir = init.v;
    for j in 1..=plan.steps {
        match flow.advance().map_err(fail)? {
            Some(ev) => {
                obs.observe(j, ev.q, ev.flight, Some(dir));
                dir = ev.v;
            }
            None => break,
        }
    }
    Ok(obs.finish())
}

/// A model ready to simulate.
pub enum Model {
    Walk(WalkSpec),
    Lorentz { table: ScattererTable, region: Region, max_flight: f64 },
}

impl Model {
    pub fn from_config(model: &ModelConfig) -> Result<Model> {
        Ok(match model {
            ModelConfig::Walk(w) => Model::Walk(w.build()?),
            ModelConfig::Lorentz(l) => Model::Lorentz { table: l.build()?, region: l.region(), max_flight: l.max_flight },
        })
    }

    pub fn record(&self, plan: &Plan, seed: u64, index: u64) -> Result<TrajectoryRecord> {
        match self {
            Model::Walk(spec) => Ok(walk_record(spec, plan, seed, index)),
            Model::Lorentz { table, region, max_flight } => lorentz_record(table, region, *max_flight, plan, seed, index),
        }
    }
}

/// Simulates trajectories `0..ensemble` on `workers` threads and returns
/// their records in index order.
pub fn simulate_ensemble(
    model: &Model,
    plan: &Plan,
    seed: u64,
    ensemble: u64,
    workers: usize,
) -> Result<Vec<TrajectoryRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    let chunks = ensemble.div_ceil(CHUNK);
    let parts: Vec<Vec<TrajectoryRecord>> = pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(ensemble);
                (lo..hi).map(|i| model.record(plan, seed, i)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

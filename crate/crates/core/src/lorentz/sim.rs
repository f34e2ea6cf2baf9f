use rand::Rng;
use serde::{Deserialize, Serialize};

use super::table::ScattererTable;
use crate::error::{Error, Result};
use crate::geometry::{next_collision, reflect, DiskId, FlightOutcome, PlanarVector};

pub const MAX_SAMPLING_ATTEMPTS: u64 = 1_000_000;
pub const DEFAULT_MAX_FLIGHT: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: PlanarVector,
    /// Unit velocity.
    pub v: PlanarVector,
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: PlanarVector,
    pub max: PlanarVector,
}

impl Region {
    pub fn unit_cell() -> Self {
        Region { min: PlanarVector::ZERO, max: PlanarVector::new(1.0, 1.0) }
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x).max(0.0) * (self.max.y - self.min.y).max(0.0)
    }
}

/// Uniform position on `region` minus the scatterers times a uniform
/// direction, by rejection.
pub fn sample_initial<R: Rng + ?Sized>(table: &ScattererTable, region: &Region, rng: &mut R) -> Result<PhasePoint> {
    if !(region.area() > 0.0) {
        return Err(Error::SamplingExhausted(0));
    }
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let q = PlanarVector::new(
            region.min.x + (region.max.x - region.min.x) * rng.random::<f64>(),
            region.min.y + (region.max.y - region.min.y) * rng.random::<f64>(),
        );
        if table.contains_point(q).is_none() {
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            return Ok(PhasePoint { q, v: PlanarVector::from_angle(theta) });
        }
    }
    Err(Error::SamplingExhausted(MAX_SAMPLING_ATTEMPTS))
}

/// One collision of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    /// Collision point.
    pub q: PlanarVector,
    /// Outgoing velocity.
    pub v: PlanarVector,
    /// Length of the flight that ended at `q`.
    pub flight: f64,
    pub disk: DiskId,
}

/// A free flight that reached the flight budget without hitting anything.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub after_events: usize,
    pub max_flight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionTrajectory {
    pub initial: PhasePoint,
    pub events: Vec<TrajectoryEvent>,
    pub truncated: Option<Truncation>,
}

impl CollisionTrajectory {
    /// Collision-indexed positions `q_0, q_1, …` with `q_0` the initial point.
    pub fn positions(&self) -> Vec<PlanarVector> {
        std::iter::once(self.initial.q).chain(self.events.iter().map(|e| e.q)).collect()
    }

    pub fn flights(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.flight)
    }
}

/// Streaming Lorentz dynamics: each call to [`LorentzFlow::advance`] flies to
/// the next collision and reflects.
#[derive(Debug, Clone)]
pub struct LorentzFlow<'a> {
    table: &'a ScattererTable,
    q: PlanarVector,
    v: PlanarVector,
    last: Option<DiskId>,
    max_flight: f64,
    done: bool,
}

impl<'a> LorentzFlow<'a> {
    pub fn new(table: &'a ScattererTable, initial: PhasePoint, max_flight: f64) -> Result<Self> {
        if !initial.v.is_unit() {
            return Err(Error::InvalidArgument(format!("velocity {:?} is not unit length", initial.v)));
        }
        if let Some(id) = table.contains_point(initial.q) {
            return Err(Error::InsideScatterer(Some(id)));
        }
        Ok(Self::resume(table, initial, None, max_flight))
    }

    /// Continue from a phase point sitting on scatterer `on` (which is then
    /// skipped by the first search).
    pub fn resume(table: &'a ScattererTable, at: PhasePoint, on: Option<DiskId>, max_flight: f64) -> Self {
        LorentzFlow { table, q: at.q, v: at.v, last: on, max_flight, done: false }
    }

    pub fn state(&self) -> PhasePoint {
        PhasePoint { q: self.q, v: self.v }
    }

    /// `Ok(None)` once a free flight has exhausted the flight budget.
    pub fn advance(&mut self) -> Result<Option<TrajectoryEvent>> {
        if self.done {
            return Ok(None);
        }
        match next_collision(self.q, self.v, self.table, self.max_flight, self.last)? {
            FlightOutcome::Collision(ev) => {
                self.v = reflect(self.v, ev.normal)?;
                self.q = ev.point;
                self.last = Some(ev.disk);
                Ok(Some(TrajectoryEvent { q: ev.point, v: self.v, flight: ev.time, disk: ev.disk }))
            }
            FlightOutcome::FreeFlight(_) => {
                self.done = true;
                Ok(None)
            }
        }
    }
}

/// Record `n_collisions` collisions starting from `initial`, stopping early
/// with a truncation marker when a flight exceeds `max_flight`.
pub fn simulate_lorentz(
    initial: PhasePoint,
    table: &ScattererTable,
    n_collisions: usize,
    max_flight: f64,
) -> Result<CollisionTrajectory> {
    if n_collisions == 0 {
        return Err(Error::InvalidArgument("n_collisions must be at least 1".into()));
    }
    let mut flow = LorentzFlow::new(table, initial, max_flight)?;
    let mut events = Vec::with_capacity(n_collisions);
    let mut truncated = None;
    while events.len() < n_collisions {
        match flow.advance()? {
            Some(ev) => events.push(ev),
            None => {
                truncated = Some(Truncation { after_events: events.len(), max_flight });
                break;
            }
        }
    }
    Ok(CollisionTrajectory { initial, events, truncated })
}

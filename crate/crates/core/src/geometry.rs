//! Planar geometry kernel: vectors, disks, ray/disk intersection, specular
//! reflection and the event-driven next-collision search.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentz::ScattererTable;

/// Quarter-discriminants at or below this value count as a miss (tangency).
pub const TANGENCY_EPS: f64 = 1e-12;

/// Tolerance used when validating unit-length inputs.
pub const UNIT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarVector {
    pub x: f64,
    pub y: f64,
}

impl PlanarVector {
    pub const ZERO: PlanarVector = PlanarVector { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        PlanarVector { x, y }
    }

    /// Checked constructor; rejects NaN and infinite components.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(PlanarVector { x, y })
        } else {
            Err(Error::InvalidArgument(format!("non-finite vector ({x}, {y})")))
        }
    }

    /// Unit vector at angle `theta` from the positive x axis.
    #[inline]
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        PlanarVector { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_EPS
    }

    /// Rotate by +90°.
    #[inline]
    pub fn perp(self) -> Self {
        PlanarVector { x: -self.y, y: self.x }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for PlanarVector {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        PlanarVector::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for PlanarVector {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for PlanarVector {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        PlanarVector::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for PlanarVector {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        PlanarVector::new(self.x * s, self.y * s)
    }
}

impl Mul<PlanarVector> for f64 {
    type Output = PlanarVector;
    #[inline]
    fn mul(self, v: PlanarVector) -> PlanarVector {
        v * self
    }
}

impl Div<f64> for PlanarVector {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        PlanarVector::new(self.x / s, self.y / s)
    }
}

impl Neg for PlanarVector {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        PlanarVector::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: PlanarVector,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: PlanarVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "disk needs a finite center and positive radius, got radius {radius}"
            )));
        }
        Ok(Disk { center, radius })
    }

    /// Strict containment test (boundary points are outside).
    pub fn contains(&self, p: PlanarVector) -> bool {
        (p - self.center).norm_sq() < self.radius * self.radius
    }

    pub fn translated(&self, by: PlanarVector) -> Disk {
        Disk { center: self.center + by, radius: self.radius }
    }

    /// Outward unit normal at a boundary point.
    pub fn normal_at(&self, p: PlanarVector) -> PlanarVector {
        (p - self.center).normalized()
    }

    pub fn overlaps(&self, other: &Disk) -> bool {
        (self.center - other.center).norm() <= self.radius + other.radius
    }
}

/// Identity of an effective scatterer: a lattice translate of a cell disk or
/// a disk added by a local patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiskId {
    Periodic { cell: (i64, i64), index: u32 },
    Patch(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Free-flight length to the collision (equals time, |v| = 1).
    pub time: f64,
    pub point: PlanarVector,
    /// Outward unit normal of the scatterer at `point`.
    pub normal: PlanarVector,
    pub disk: DiskId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlightOutcome {
    Collision(CollisionEvent),
    /// No collision within the given flight budget.
    FreeFlight(f64),
}

/// First positive time at which the ray `origin + t·direction` meets the
/// boundary of `disk`, or `None` when it misses (tangency counts as a miss).
///
/// The origin must lie strictly outside the disk.
pub fn ray_disk_intersection(
    origin: PlanarVector,
    direction: PlanarVector,
    disk: &Disk,
) -> Result<Option<f64>> {
    let w = origin - disk.center;
    let c = w.norm_sq() - disk.radius * disk.radius;
    if c <= 0.0 {
        return Err(Error::InsideScatterer(None));
    }
    Ok(hit_time(w, direction, c))
}

/// Intersection core shared with the cell walker; `w = origin − center`,
/// `c = |w|² − r² > 0`.
#[inline]
fn hit_time(w: PlanarVector, direction: PlanarVector, c: f64) -> Option<f64> {
    let b = w.dot(direction);
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc <= TANGENCY_EPS {
        return None;
    }
    // Smaller root via the product of roots, stable when c is tiny.
    Some(c / (-b + disc.sqrt()))
}

/// Specular reflection `v' = v − 2(v·n)n` of an incoming unit velocity.
pub fn reflect(velocity: PlanarVector, normal: PlanarVector) -> Result<PlanarVector> {
    let vn = velocity.dot(normal);
    if vn >= 0.0 {
        return Err(Error::NotIncoming(vn));
    }
    Ok(velocity - normal * (2.0 * vn))
}

/// Event-driven search for the first collision of the ray starting at
/// `position` with any effective scatterer of `table`.
///
/// Walks the unit cells crossed by the segment in order. A disk centred in
/// cell `(i, j)` can only be hit while the ray is in one of the 3×3 cells
/// around `(i, j)` because every cell radius is below one half, so each newly
/// entered cell contributes the row or column of cells that just came into
/// range. The walk stops as soon as the best hit precedes the exit time of
/// the current cell.
///
/// `exclude` skips one scatterer, normally the one the particle is sitting on
/// after a reflection.
pub fn next_collision(
    position: PlanarVector,
    direction: PlanarVector,
    table: &ScattererTable,
    max_flight: f64,
    exclude: Option<DiskId>,
) -> Result<FlightOutcome> {
    if !(max_flight > 0.0) {
        return Err(Error::InvalidArgument(format!("max_flight must be positive, got {max_flight}")));
    }
    if !direction.is_unit() {
        return Err(Error::InvalidArgument(format!("direction {direction:?} is not a unit vector")));
    }

    let mut best: Option<(f64, DiskId, Disk)> = None;
    let consider = |disk: &Disk, id: DiskId, best: &mut Option<(f64, DiskId, Disk)>| -> Result<()> {
        if Some(id) == exclude {
            return Ok(());
        }
        let w = position - disk.center;
        let c = w.norm_sq() - disk.radius * disk.radius;
        if c <= 0.0 {
            return Err(Error::InsideScatterer(Some(id)));
        }
        if let Some(t) = hit_time(w, direction, c) {
            if best.as_ref().map_or(true, |(bt, _, _)| t < *bt) {
                *best = Some((t, id, *disk));
            }
        }
        Ok(())
    };

    for (k, disk) in table.patch_disks().iter().enumerate() {
        consider(disk, DiskId::Patch(k as u32), &mut best)?;
    }

    let scan_cell = |cx: i64, cy: i64, best: &mut Option<(f64, DiskId, Disk)>| -> Result<()> {
        let offset = PlanarVector::new(cx as f64, cy as f64);
        for (k, d) in table.cell_disks().iter().enumerate() {
            let id = DiskId::Periodic { cell: (cx, cy), index: k as u32 };
            if table.is_removed(id) {
                continue;
            }
            consider(&d.translated(offset), id, best)?;
        }
        Ok(())
    };

    let mut cx = position.x.floor() as i64;
    let mut cy = position.y.floor() as i64;
    for dx in -1..=1 {
        for dy in -1..=1 {
            scan_cell(cx + dx, cy + dy, &mut best)?;
        }
    }

    let step_x: i64 = if direction.x >= 0.0 { 1 } else { -1 };
    let step_y: i64 = if direction.y >= 0.0 { 1 } else { -1 };
    let delta_x = if direction.x != 0.0 { 1.0 / direction.x.abs() } else { f64::INFINITY };
    let delta_y = if direction.y != 0.0 { 1.0 / direction.y.abs() } else { f64::INFINITY };
    let mut t_max_x = if direction.x > 0.0 {
        ((cx + 1) as f64 - position.x) * delta_x
    } else if direction.x < 0.0 {
        (position.x - cx as f64) * delta_x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if direction.y > 0.0 {
        ((cy + 1) as f64 - position.y) * delta_y
    } else if direction.y < 0.0 {
        (position.y - cy as f64) * delta_y
    } else {
        f64::INFINITY
    };

    loop {
        let t_exit = t_max_x.min(t_max_y);
        if let Some((t, _, _)) = best {
            if t <= t_exit {
                break;
            }
        }
        if t_exit >= max_flight {
            break;
        }
        if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += delta_x;
            for dy in -1..=1 {
                scan_cell(cx + step_x, cy + dy, &mut best)?;
            }
        } else {
            cy += step_y;
            t_max_y += delta_y;
            for dx in -1..=1 {
                scan_cell(cx + dx, cy + step_y, &mut best)?;
            }
        }
    }

    match best {
        Some((t, id, disk)) if t <= max_flight => {
            let point = position + direction * t;
            Ok(FlightOutcome::Collision(CollisionEvent {
                time: t,
                point,
                normal: disk.normal_at(point),
                disk: id,
            }))
        }
        _ => Ok(FlightOutcome::FreeFlight(max_flight)),
    }
}

/// Independent reference for first-hit times: sphere-traced marching with a
/// minimum step followed by bisection on the sign of `distance − radius`.
/// It never solves the quadratic, so it can check [`ray_disk_intersection`]
/// and [`next_collision`].
pub mod oracle {
    use super::{Disk, DiskId, PlanarVector};
    use crate::lorentz::ScattererTable;

    /// Smallest marching step.
    pub const MIN_STEP: f64 = 1e-7;

    fn signed_gap(p: PlanarVector, d: &Disk) -> f64 {
        (p - d.center).norm() - d.radius
    }

    /// First crossing of a single disk boundary within `[0, max_t]`.
    pub fn march_disk(origin: PlanarVector, direction: PlanarVector, disk: &Disk, max_t: f64) -> Option<f64> {
        march(origin, direction, max_t, |p| (signed_gap(p, disk), ())).map(|(t, _)| t)
    }

    /// First crossing over every effective scatterer of `table`.
    pub fn march_table(
        origin: PlanarVector,
        direction: PlanarVector,
        table: &ScattererTable,
        max_t: f64,
        exclude: Option<DiskId>,
    ) -> Option<(f64, DiskId)> {
        let nearest = |p: PlanarVector| -> (f64, Option<DiskId>) {
            let mut best = (f64::INFINITY, None);
            for (id, d) in table.disks_near(p, 1) {
                if Some(id) == exclude {
                    continue;
                }
                let g = signed_gap(p, &d);
                if g < best.0 {
                    best = (g, Some(id));
                }
            }
            // Disks outside the 3×3 neighbourhood are at least 1 − r_max away.
            (best.0.min(1.0 - table.max_radius()), best.1)
        };
        march(origin, direction, max_t, nearest).and_then(|(t, id)| id.map(|id| (t, id)))
    }

    fn march<T: Copy>(
        origin: PlanarVector,
        direction: PlanarVector,
        max_t: f64,
        gap: impl Fn(PlanarVector) -> (f64, T),
    ) -> Option<(f64, T)> {
        let mut t = 0.0;
        let (mut g, _) = gap(origin);
        while t < max_t {
            let step = g.max(MIN_STEP);
            let t_next = (t + step).min(max_t);
            let (g_next, _) = gap(origin + direction * t_next);
            if g_next <= 0.0 {
                // Bisect on [t, t_next] for the sign change.
                let (mut lo, mut hi) = (t, t_next);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if gap(origin + direction * mid).0 <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let tag = gap(origin + direction * hi).1;
                return Some((hi, tag));
            }
            t = t_next;
            g = g_next;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::ScattererTable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> PlanarVector {
        PlanarVector::new(x, y)
    }

    #[test]
    fn head_on_hit() {
        let d = Disk::new(v(0.0, 0.0), 0.25).unwrap();
        let t = ray_disk_intersection(v(0.5, 0.0), v(-1.0, 0.0), &d).unwrap();
        assert!((t.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn passes_above() {
        let d = Disk::new(v(0.0, 0.0), 0.25).unwrap();
        assert_eq!(ray_disk_intersection(v(0.5, 0.3), v(-1.0, 0.0), &d).unwrap(), None);
    }

    #[test]
    fn inside_origin_rejected() {
        let d = Disk::new(v(0.0, 0.0), 0.25).unwrap();
        assert!(matches!(
            ray_disk_intersection(v(0.1, 0.0), v(1.0, 0.0), &d),
            Err(Error::InsideScatterer(None))
        ));
    }

    #[test]
    fn exact_tangency_is_a_miss() {
        let d = Disk::new(v(0.0, 0.0), 0.25).unwrap();
        assert_eq!(ray_disk_intersection(v(1.0, 0.25), v(-1.0, 0.0), &d).unwrap(), None);
    }

    #[test]
    fn intersection_matches_marching_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..1000 {
            let disk = Disk::new(v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), rng.random_range(0.05..0.6)).unwrap();
            let origin = loop {
                let p = v(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                if (p - disk.center).norm() > disk.radius + 1e-3 {
                    break p;
                }
            };
            // Aim roughly at the disk half of the time.
            let dir = if rng.random_bool(0.5) {
                let aim = disk.center + v(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)) * disk.radius;
                (aim - origin).normalized()
            } else {
                PlanarVector::from_angle(rng.random_range(0.0..std::f64::consts::TAU))
            };
            let exact = ray_disk_intersection(origin, dir, &disk).unwrap();
            let marched = oracle::march_disk(origin, dir, &disk, 5.0);
            match (exact, marched) {
                (Some(t), Some(m)) => {
                    hits += 1;
                    assert!((t - m).abs() < 1e-6, "{t} vs {m}");
                    let p = origin + dir * t;
                    assert!(((p - disk.center).norm() - disk.radius).abs() < 1e-10);
                }
                (None, None) => {}
                (a, b) => {
                    // Near-tangent chords shorter than the march resolution.
                    let w = origin - disk.center;
                    let b_ = w.dot(dir);
                    let disc = b_ * b_ - (w.norm_sq() - disk.radius * disk.radius);
                    assert!(disc.abs() < 1e-10, "exact {a:?} vs marched {b:?}, disc {disc}");
                }
            }
        }
        assert!(hits > 300);
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(v(-1.0, 0.0), v(1.0, 0.0)).unwrap(), v(1.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = reflect(v(s, -s), v(0.0, 1.0)).unwrap();
        assert!((r - v(s, s)).norm() < 1e-15);
        assert!(matches!(reflect(v(1.0, 0.0), v(1.0, 0.0)), Err(Error::NotIncoming(_))));
        assert!(matches!(reflect(v(0.0, 1.0), v(1.0, 0.0)), Err(Error::NotIncoming(_))));
    }

    #[test]
    fn reflection_is_time_reversible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let n = PlanarVector::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
            let mut vel = PlanarVector::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
            if vel.dot(n) >= 0.0 {
                vel = -vel;
            }
            if vel.dot(n) == 0.0 {
                continue;
            }
            let out = reflect(vel, n).unwrap();
            assert!((out.norm() - 1.0).abs() < 1e-12);
            assert!((out.dot(n.perp()) - vel.dot(n.perp())).abs() < 1e-12);
            let back = -reflect(-out, n).unwrap();
            assert!((back - vel).norm() < 1e-12);
        }
    }

    #[test]
    fn corridor_free_flight() {
        let table = ScattererTable::single_disk(0.25).unwrap();
        let out = next_collision(v(0.5, 0.5), v(1.0, 0.0), &table, 100.0, None).unwrap();
        assert_eq!(out, FlightOutcome::FreeFlight(100.0));
    }

    #[test]
    fn quadratic_first_hit() {
        let table = ScattererTable::single_disk(0.25).unwrap();
        let out = next_collision(v(0.5, 0.1), v(1.0, 0.0), &table, 100.0, None).unwrap();
        let FlightOutcome::Collision(ev) = out else { panic!("expected a collision") };
        let expected = 0.5 - 0.0525f64.sqrt();
        assert!((ev.time - expected).abs() < 1e-12);
        assert!((ev.time - 0.270_876).abs() < 1e-5);
        assert_eq!(ev.disk, DiskId::Periodic { cell: (1, 0), index: 0 });
        let m = oracle::march_table(v(0.5, 0.1), v(1.0, 0.0), &table, 10.0, None).unwrap();
        assert!((m.0 - expected).abs() < 1e-6);
    }

    #[test]
    fn start_inside_is_an_error() {
        let table = ScattererTable::single_disk(0.25).unwrap();
        let err = next_collision(v(1.05, 0.0), v(1.0, 0.0), &table, 10.0, None).unwrap_err();
        assert_eq!(err, Error::InsideScatterer(Some(DiskId::Periodic { cell: (1, 0), index: 0 })));
    }

    #[test]
    fn dominance_over_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = ScattererTable::finite_horizon_pair(0.4, 0.2).unwrap();
        for _ in 0..2000 {
            let p = loop {
                let p = v(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                if table.contains_point(p).is_none() {
                    break p;
                }
            };
            let dir = PlanarVector::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
            let out = next_collision(p, dir, &table, 8.0, None).unwrap();
            let found = match out {
                FlightOutcome::Collision(ev) => ev.time,
                FlightOutcome::FreeFlight(_) => f64::INFINITY,
            };
            for (_, d) in table.disks_near(p, 10) {
                if let Some(t) = ray_disk_intersection(p, dir, &d).unwrap() {
                    assert!(found <= t + 1e-12, "missed earlier hit at {t}, found {found}");
                }
            }
        }
    }
}

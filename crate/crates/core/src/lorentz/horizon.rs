//! Corridor search and free-path bounds for periodic tables.

use serde::{Deserialize, Serialize};

use super::table::ScattererTable;
use crate::error::{Error, Result};
use crate::geometry::{next_collision, Disk, FlightOutcome, PlanarVector};

pub const DEFAULT_MAX_DENOMINATOR: i64 = 50;

/// Gaps narrower than this are tangent lines, not corridors.
const MIN_CORRIDOR_WIDTH: f64 = 1e-12;

/// A collision-free infinite strip of the periodic background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    /// Primitive lattice direction `(p, q)`.
    pub direction: (i64, i64),
    pub width: f64,
    /// Signed distance of the strip's centre line from the origin, measured
    /// along the unit normal `(−q, p)/|(p, q)|`.
    pub offset: f64,
}

impl Corridor {
    pub fn unit_direction(&self) -> PlanarVector {
        PlanarVector::new(self.direction.0 as f64, self.direction.1 as f64).normalized()
    }

    pub fn normal(&self) -> PlanarVector {
        self.unit_direction().perp()
    }

    /// A point on the centre line.
    pub fn center_point(&self) -> PlanarVector {
        self.normal() * self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "horizon", rename_all = "snake_case")]
pub enum Horizon {
    /// No corridor among the rational directions tested. Certifies only
    /// those directions.
    Finite { max_denominator: i64 },
    Infinite { corridors: Vec<Corridor> },
}

impl Horizon {
    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite { .. })
    }

    pub fn corridors(&self) -> &[Corridor] {
        match self {
            Horizon::Finite { .. } => &[],
            Horizon::Infinite { corridors } => corridors,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive directions `(p, q)` with `max(|p|, |q|) ≤ max_denominator`, one
/// per line orientation.
fn primitive_directions(max_denominator: i64) -> impl Iterator<Item = (i64, i64)> {
    (0..=max_denominator).flat_map(move |p| {
        (-max_denominator..=max_denominator).filter_map(move |q| {
            let canonical = p > 0 || (p == 0 && q == 1);
            (canonical && gcd(p, q) == 1).then_some((p, q))
        })
    })
}

/// Uncovered arcs of the circle `[0, period)` left by the intervals
/// `[s − r, s + r]`, as `(start, end)` with `start < end` in unrolled
/// coordinates.
fn uncovered_gaps(period: f64, intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if intervals.iter().any(|&(_, r)| 2.0 * r >= period) {
        return Vec::new();
    }
    let mut spans: Vec<(f64, f64)> = intervals
        .iter()
        .map(|&(s, r)| {
            let start = (s - r).rem_euclid(period);
            (start, start + 2.0 * r)
        })
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first = spans[0].0;
    let mut reach = spans[0].1;
    let mut gaps = Vec::new();
    for &(a, b) in &spans[1..] {
        if a > reach {
            gaps.push((reach, a));
        }
        reach = reach.max(b);
    }
    if reach < first + period {
        gaps.push((reach, first + period));
    }
    // Spans running past the period wrap onto the start of the circle.
    let wrapped = reach - period;
    gaps.into_iter()
        .filter_map(|(g0, g1)| {
            let g0 = g0.max(wrapped);
            (g1 - g0 > MIN_CORRIDOR_WIDTH).then_some((g0, g1))
        })
        .collect()
}

/// Search every primitive rational direction up to `max_denominator` for
/// strips of the periodic background that avoid all scatterers.
///
/// For direction `(p, q)` the lattice projects onto the unit normal with
/// period `1/|(p, q)|`; each cell disk covers an interval of half-width equal
/// to its radius around its projected centre, and every uncovered arc is a
/// corridor of that width.
pub fn horizon_check(table: &ScattererTable, max_denominator: i64) -> Result<Horizon> {
    if table.has_patch() {
        return Err(Error::InvalidArgument(
            "horizon is a property of the periodic background; pass table.background()".into(),
        ));
    }
    if max_denominator < 1 {
        return Err(Error::InvalidArgument(format!("max_denominator must be ≥ 1, got {max_denominator}")));
    }
    let mut corridors = Vec::new();
    for (p, q) in primitive_directions(max_denominator) {
        let len = ((p * p + q * q) as f64).sqrt();
        let normal = PlanarVector::new(-q as f64, p as f64) / len;
        let period = 1.0 / len;
        let intervals: Vec<(f64, f64)> =
            table.cell_disks().iter().map(|d| (normal.dot(d.center), d.radius)).collect();
        for (g0, g1) in uncovered_gaps(period, &intervals) {
            let offset = (0.5 * (g0 + g1)).rem_euclid(period);
            corridors.push(Corridor { direction: (p, q), width: g1 - g0, offset });
        }
    }
    if corridors.is_empty() {
        Ok(Horizon::Finite { max_denominator })
    } else {
        Ok(Horizon::Infinite { corridors })
    }
}

/// Result of [`max_free_path_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreePathBound {
    /// No free flight between two collisions is longer than this.
    pub bound: f64,
    /// Longest free segment found on the sampling grid with full radii; a
    /// lower estimate of the true supremum.
    pub sampled_max: f64,
    pub angle_step: f64,
    pub offset_step: f64,
    pub shrink: f64,
}

/// Certified upper bound on free-flight lengths in a finite-horizon table.
///
/// Lines through the grid points `(k/4, (j + ½)h)` (and their transposes) in
/// the directions `(i + ½)δ` are traced with every radius shrunk by `η`. Any
/// free segment of length `L` crossing a vertical line `x ∈ Z/4` can be
/// rotated by at most `δ/2` and shifted by at most `h/2` onto one of these
/// lines while moving no point further than `Lδ/2 + h/2`, so it stays free of
/// the shrunken disks whenever that displacement is at most `η`. The sweep
/// maximum `B` is therefore an upper bound provided `Bδ/2 + h/2 < η`, which is
/// checked before returning.
pub fn max_free_path_bound(table: &ScattererTable, angle_step: f64, offset_step: f64) -> Result<FreePathBound> {
    if table.has_patch() {
        return Err(Error::InvalidArgument("free-path bound needs an unpatched table".into()));
    }
    if !(angle_step > 0.0 && offset_step > 0.0) {
        return Err(Error::InvalidArgument("grid steps must be positive".into()));
    }
    // Leaves room for bounds up to 4 in the consistency check below.
    let shrink = offset_step / 2.0 + 2.0 * angle_step + 1e-9;
    let shrunk_disks = table
        .cell_disks()
        .iter()
        .map(|d| Disk::new(d.center, d.radius - shrink))
        .collect::<Result<Vec<_>>>()?;
    let shrunk = ScattererTable::periodic(shrunk_disks)?;

    let horizon_cap = 64.0;
    let n_angles = (std::f64::consts::PI / angle_step).ceil() as usize;
    let n_offsets = (1.0 / offset_step).ceil() as usize;
    let mut bound: f64 = 0.0;
    let mut sampled_max: f64 = 0.0;
    for i in 0..n_angles {
        let theta = (i as f64 + 0.5) * angle_step;
        let dir = PlanarVector::from_angle(theta);
        let along_x = dir.x.abs() >= dir.y.abs();
        for line in 0..4 {
            let fixed = line as f64 * 0.25;
            for j in 0..n_offsets {
                let moving = (j as f64 + 0.5) * offset_step;
                let p = if along_x { PlanarVector::new(fixed, moving) } else { PlanarVector::new(moving, fixed) };
                if let Some(len) = free_chord(&shrunk, p, dir, horizon_cap)? {
                    bound = bound.max(len);
                }
                if let Some(len) = free_chord(table, p, dir, horizon_cap)? {
                    sampled_max = sampled_max.max(len);
                }
            }
        }
    }
    // Segments that cross no quarter line have Δx < ¼ along their dominant
    // axis, hence length below ¼·√2 (up to the angular slack).
    let short = 0.25 / (std::f64::consts::FRAC_PI_4 + angle_step).cos();
    let bound = bound.max(short);
    if bound * angle_step / 2.0 + offset_step / 2.0 >= shrink {
        return Err(Error::InvalidArgument(format!(
            "grid too coarse to certify a bound of {bound}; refine the steps"
        )));
    }
    Ok(FreePathBound { bound, sampled_max, angle_step, offset_step, shrink })
}

/// Length of the maximal free chord through `p` in direction `dir`, `None`
/// when `p` is inside a scatterer. Errors on a corridor.
fn free_chord(table: &ScattererTable, p: PlanarVector, dir: PlanarVector, cap: f64) -> Result<Option<f64>> {
    if table.contains_point(p).is_some() {
        return Ok(None);
    }
    let mut total = 0.0;
    for d in [dir, -dir] {
        match next_collision(p, d, table, cap, None)? {
            FlightOutcome::Collision(ev) => total += ev.time,
            FlightOutcome::FreeFlight(_) => {
                return Err(Error::InvalidArgument(format!(
                    "free flight longer than {cap} along {dir:?}; the table has a corridor"
                )))
            }
        }
    }
    Ok(Some(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_disk_axis_corridors() {
        let t = ScattererTable::single_disk(0.4).unwrap();
        let h = horizon_check(&t, 1).unwrap();
        let c = h.corridors();
        assert_eq!(c.len(), 2);
        let mut dirs: Vec<_> = c.iter().map(|c| c.direction).collect();
        dirs.sort();
        assert_eq!(dirs, vec![(0, 1), (1, 0)]);
        for corridor in c {
            assert!((corridor.width - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_closes_above_quarter_root_two() {
        let diag = |c: &&Corridor| c.direction == (1, 1) || c.direction == (1, -1);
        let t = ScattererTable::single_disk(0.3).unwrap();
        let h = horizon_check(&t, 1).unwrap();
        let d: Vec<_> = h.corridors().iter().filter(diag).collect();
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|c| (c.width - (0.5f64.sqrt() - 0.6)).abs() < 1e-12));
        assert!(h.corridors().iter().any(|c| c.direction == (1, 0) && (c.width - 0.4).abs() < 1e-12));
        let t = ScattererTable::single_disk(0.36).unwrap();
        let h = horizon_check(&t, 1).unwrap();
        assert!(h.corridors().iter().filter(diag).count() == 0);
        assert_eq!(h.corridors().len(), 2);
    }

    #[test]
    fn finite_pair_blocks_low_denominators() {
        let t = ScattererTable::finite_horizon_pair(0.4, 0.2).unwrap();
        assert_eq!(horizon_check(&t, 20).unwrap(), Horizon::Finite { max_denominator: 20 });
    }

    #[test]
    fn small_disks_open_many_corridors() {
        let t = ScattererTable::single_disk(0.1).unwrap();
        let h = horizon_check(&t, 3).unwrap();
        // Directions (1,1) and (1,2) have periods 0.707 and 0.447 > 0.2.
        assert!(h.corridors().iter().any(|c| c.direction == (1, 1)));
        assert!(h.corridors().iter().any(|c| c.direction == (1, 2)));
    }

    #[test]
    fn reported_corridors_are_empty() {
        for r in [0.1, 0.25, 0.4] {
            let t = ScattererTable::single_disk(r).unwrap();
            for c in horizon_check(&t, 6).unwrap().corridors() {
                let u = c.unit_direction();
                let x0 = c.center_point();
                for i in -16..=16 {
                    for j in -16..=16 {
                        let center = PlanarVector::new(i as f64, j as f64);
                        let dist = (center - x0).cross(u).abs();
                        assert!(dist >= r + c.width / 2.0 - 1e-9, "{c:?} blocked by ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn patched_table_rejected() {
        let t = ScattererTable::single_disk(0.4)
            .unwrap()
            .apply_patch(1.0, &[crate::lorentz::PatchOp::Remove { cell: (0, 0), index: 0 }])
            .unwrap();
        assert!(horizon_check(&t, 3).is_err());
        assert!(horizon_check(&t.background(), 3).is_ok());
    }

    #[test]
    fn wrapped_gap_is_trimmed() {
        // One interval wraps past the period and covers the start.
        let gaps = uncovered_gaps(1.0, &[(0.15, 0.05), (0.8, 0.35)]);
        assert_eq!(gaps.len(), 1);
        assert!((gaps[0].0 - 0.2).abs() < 1e-12 && (gaps[0].1 - 0.45).abs() < 1e-12);
    }

    #[test]
    fn coarse_free_path_bound_for_finite_pair() {
        let t = ScattererTable::finite_horizon_pair(0.4, 0.2).unwrap();
        let b = max_free_path_bound(&t, 0.01, 0.02).unwrap();
        assert!(b.sampled_max <= b.bound);
        assert!(b.bound < 2.0, "{b:?}");
        assert!(max_free_path_bound(&ScattererTable::single_disk(0.4).unwrap(), 0.01, 0.02).is_err());
    }
}

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Disk, DiskId, PlanarVector};

/// Gaps between scatterers narrower than this trigger a pinch warning.
const PINCH_WARN_GAP: f64 = 1e-6;

/// Named periodic configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    /// One disk of radius `radius` at every integer point.
    SingleDisk { radius: f64 },
    /// Radius `r1` disks at integer points, radius `r2` disks at the cell
    /// centres `(½, ½) + Z²`.
    FiniteHorizonPair { r1: f64, r2: f64 },
}

pub fn builtin_configuration(builtin: &Builtin) -> Result<ScattererTable> {
    match *builtin {
        Builtin::SingleDisk { radius } => ScattererTable::single_disk(radius),
        Builtin::FiniteHorizonPair { r1, r2 } => ScattererTable::finite_horizon_pair(r1, r2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatchOp {
    /// Remove the periodic copy of cell disk `index` living in `cell`.
    Remove { cell: (i64, i64), index: u32 },
    Add { center: (f64, f64), radius: f64 },
}

/// A `Z²`-periodic disk configuration with an optional local patch.
///
/// Immutable once built; every constructor validates that no two effective
/// scatterers overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererTable {
    cell_disks: Vec<Disk>,
    added: Vec<Disk>,
    removed: HashSet<DiskId>,
    ops: Vec<PatchOp>,
    patch_bound: f64,
    max_radius: f64,
}

impl ScattererTable {
    /// Periodic table from the disks of the fundamental cell. Centres must lie
    /// in `[0, 1)²` and radii below one half.
    pub fn periodic(cell_disks: Vec<Disk>) -> Result<Self> {
        if cell_disks.is_empty() {
            return Err(Error::InvalidArgument("cell needs at least one disk".into()));
        }
        for d in &cell_disks {
            let c = d.center;
            if !(0.0..1.0).contains(&c.x) || !(0.0..1.0).contains(&c.y) {
                return Err(Error::InvalidArgument(format!("cell disk centre {c:?} outside [0,1)²")));
            }
            if d.radius >= 0.5 {
                return Err(Error::Overlap(
                    DiskId::Periodic { cell: (0, 0), index: 0 },
                    DiskId::Periodic { cell: (1, 0), index: 0 },
                ));
            }
        }
        for (a, da) in cell_disks.iter().enumerate() {
            for (b, db) in cell_disks.iter().enumerate() {
                for dx in -1..=1i64 {
                    for dy in -1..=1i64 {
                        if a == b && dx == 0 && dy == 0 {
                            continue;
                        }
                        let moved = db.translated(PlanarVector::new(dx as f64, dy as f64));
                        if da.overlaps(&moved) {
                            return Err(Error::Overlap(
                                DiskId::Periodic { cell: (0, 0), index: a as u32 },
                                DiskId::Periodic { cell: (dx, dy), index: b as u32 },
                            ));
                        }
                    }
                }
            }
        }
        let max_radius = cell_disks.iter().map(|d| d.radius).fold(0.0, f64::max);
        Ok(ScattererTable {
            cell_disks,
            added: Vec::new(),
            removed: HashSet::new(),
            ops: Vec::new(),
            patch_bound: 0.0,
            max_radius,
        })
    }

    pub fn single_disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "single_disk radius must lie in (0, 1/2), got {radius}"
            )));
        }
        Self::periodic(vec![Disk::new(PlanarVector::ZERO, radius)?])
    }

    pub fn finite_horizon_pair(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && r2 > 0.0 && r1 < 0.5 && r2 < 0.5) {
            return Err(Error::InvalidArgument(format!("radii must lie in (0, 1/2), got {r1}, {r2}")));
        }
        if r1 + r2 >= std::f64::consts::FRAC_1_SQRT_2 {
            return Err(Error::Overlap(
                DiskId::Periodic { cell: (0, 0), index: 0 },
                DiskId::Periodic { cell: (0, 0), index: 1 },
            ));
        }
        Self::periodic(vec![
            Disk::new(PlanarVector::ZERO, r1)?,
            Disk::new(PlanarVector::new(0.5, 0.5), r2)?,
        ])
    }

    pub fn cell_disks(&self) -> &[Disk] {
        &self.cell_disks
    }

    pub fn patch_disks(&self) -> &[Disk] {
        &self.added
    }

    pub fn patch_ops(&self) -> &[PatchOp] {
        &self.ops
    }

    pub fn patch_bound(&self) -> f64 {
        self.patch_bound
    }

    pub fn has_patch(&self) -> bool {
        !self.ops.is_empty()
    }

    /// Largest cell-disk radius; the inflation used by the cell walker.
    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// The unpatched periodic background.
    pub fn background(&self) -> ScattererTable {
        ScattererTable {
            cell_disks: self.cell_disks.clone(),
            added: Vec::new(),
            removed: HashSet::new(),
            ops: Vec::new(),
            patch_bound: 0.0,
            max_radius: self.max_radius,
        }
    }

    #[inline]
    pub fn is_removed(&self, id: DiskId) -> bool {
        !self.removed.is_empty() && self.removed.contains(&id)
    }

    /// The disk behind an identifier, if it is an effective scatterer.
    pub fn disk(&self, id: DiskId) -> Option<Disk> {
        match id {
            DiskId::Patch(k) => self.added.get(k as usize).copied(),
            DiskId::Periodic { cell, index } => {
                if self.is_removed(id) {
                    return None;
                }
                self.cell_disks
                    .get(index as usize)
                    .map(|d| d.translated(PlanarVector::new(cell.0 as f64, cell.1 as f64)))
            }
        }
    }

    /// Effective scatterers with centres in the cells within `range` of the
    /// cell containing `p`, plus every patch disk.
    pub fn disks_near(&self, p: PlanarVector, range: i64) -> impl Iterator<Item = (DiskId, Disk)> + '_ {
        let cx = p.x.floor() as i64;
        let cy = p.y.floor() as i64;
        let periodic = (cx - range..=cx + range).flat_map(move |i| {
            (cy - range..=cy + range).flat_map(move |j| {
                self.cell_disks.iter().enumerate().filter_map(move |(k, d)| {
                    let id = DiskId::Periodic { cell: (i, j), index: k as u32 };
                    (!self.is_removed(id)).then(|| (id, d.translated(PlanarVector::new(i as f64, j as f64))))
                })
            })
        });
        let patch = self.added.iter().enumerate().map(|(k, d)| (DiskId::Patch(k as u32), *d));
        periodic.chain(patch)
    }

    /// The scatterer containing `p` in its interior, if any.
    pub fn contains_point(&self, p: PlanarVector) -> Option<DiskId> {
        self.disks_near(p, 1).find(|(_, d)| d.contains(p)).map(|(id, _)| id)
    }

    /// Apply local modifications confined to the disk of radius `bound`
    /// around the origin. Earlier patch operations are kept.
    pub fn apply_patch(&self, bound: f64, ops: &[PatchOp]) -> Result<ScattererTable> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("patch bound must be positive, got {bound}")));
        }
        let mut next = self.clone();
        next.patch_bound = bound.max(self.patch_bound);
        for op in ops {
            match *op {
                PatchOp::Remove { cell, index } => {
                    let id = DiskId::Periodic { cell, index };
                    let disk = next
                        .disk(id)
                        .ok_or_else(|| Error::InvalidArgument(format!("no periodic copy {id:?} to remove")))?;
                    if disk.center.norm() + disk.radius > next.patch_bound {
                        return Err(Error::OutOfPatchBound(format!("{id:?}"), next.patch_bound));
                    }
                    next.removed.insert(id);
                }
                PatchOp::Add { center, radius } => {
                    let disk = Disk::new(PlanarVector::try_new(center.0, center.1)?, radius)?;
                    if disk.center.norm() + disk.radius > next.patch_bound {
                        return Err(Error::OutOfPatchBound(format!("{disk:?}"), next.patch_bound));
                    }
                    let new_id = DiskId::Patch(next.added.len() as u32);
                    let reach = (radius + next.max_radius).ceil() as i64 + 1;
                    for (id, other) in next.disks_near(disk.center, reach) {
                        let gap = (disk.center - other.center).norm() - disk.radius - other.radius;
                        if gap <= 0.0 {
                            return Err(Error::Overlap(new_id, id));
                        }
                        if gap < PINCH_WARN_GAP {
                            log::warn!("patch disk {new_id:?} nearly touches {id:?} (gap {gap:e})");
                        }
                    }
                    next.added.push(disk);
                }
            }
            next.ops.push(*op);
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_ranges() {
        assert!(ScattererTable::single_disk(0.4).is_ok());
        assert!(ScattererTable::single_disk(0.6).is_err());
        assert!(ScattererTable::single_disk(0.0).is_err());
        assert!(ScattererTable::finite_horizon_pair(0.4, 0.2).is_ok());
        // Centres (0,0) and (½,½) are √2/2 apart.
        assert!(matches!(ScattererTable::finite_horizon_pair(0.4, 0.4), Err(Error::Overlap(..))));
        let b: Builtin = serde_json::from_str(r#"{"name":"single_disk","radius":0.3}"#).unwrap();
        assert_eq!(builtin_configuration(&b).unwrap().cell_disks().len(), 1);
    }

    #[test]
    fn remove_origin_copy() {
        let t = ScattererTable::single_disk(0.4).unwrap();
        let p = t.apply_patch(1.0, &[PatchOp::Remove { cell: (0, 0), index: 0 }]).unwrap();
        assert!(p.contains_point(PlanarVector::new(0.05, 0.0)).is_none());
        assert!(t.contains_point(PlanarVector::new(0.05, 0.0)).is_some());
    }

    #[test]
    fn overlapping_addition_rejected() {
        let t = ScattererTable::single_disk(0.4).unwrap();
        let err = t.apply_patch(2.0, &[PatchOp::Add { center: (0.5, 0.0), radius: 0.2 }]).unwrap_err();
        assert!(matches!(err, Error::Overlap(DiskId::Patch(0), _)));
    }

    #[test]
    fn move_copy_within_bound() {
        let t = ScattererTable::single_disk(0.4).unwrap();
        let ops = [
            PatchOp::Remove { cell: (0, 0), index: 0 },
            PatchOp::Add { center: (0.1, 0.1), radius: 0.4 },
        ];
        let p = t.apply_patch(2.0, &ops).unwrap();
        assert_eq!(p.patch_disks().len(), 1);
        assert!(p.contains_point(PlanarVector::new(0.45, 0.1)).is_some());
    }

    #[test]
    fn out_of_bound_rejected() {
        let t = ScattererTable::single_disk(0.2).unwrap();
        let err = t.apply_patch(1.0, &[PatchOp::Remove { cell: (3, 0), index: 0 }]).unwrap_err();
        assert!(matches!(err, Error::OutOfPatchBound(..)));
        let err = t.apply_patch(1.0, &[PatchOp::Add { center: (0.5, 0.5), radius: 0.6 }]).unwrap_err();
        assert!(matches!(err, Error::OutOfPatchBound(..)));
    }
}

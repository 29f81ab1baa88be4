//! The reservation grid over the intersection box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_distance, Capsule, CapsuleShape, Vec2};
use crate::path::ReferencePath;

/// Side of the square reservation area centred on the intersection (m).
pub const GRID_EXTENT: f64 = 18.0;

const SPAN_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// 1×1.
    Low,
    /// 4×4.
    Medium,
    /// 8×8.
    High,
}

impl Fidelity {
    pub const ALL: [Fidelity; 3] = [Fidelity::Low, Fidelity::Medium, Fidelity::High];

    pub fn cells_per_side(self) -> usize {
        match self {
            Fidelity::Low => 1,
            Fidelity::Medium => 4,
            Fidelity::High => 8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Fidelity::Low => "l",
            Fidelity::Medium => "m",
            Fidelity::High => "h",
        }
    }
}

/// One vehicle's time slot in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reservation {
    pub vehicle: usize,
    pub entry: f64,
    pub exit: f64,
}

/// Arc-length interval over which a vehicle's footprint overlaps a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellSpan {
    pub cell: usize,
    pub s_in: f64,
    pub s_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionGrid {
    fidelity: Fidelity,
    cell_size: f64,
    owners: Vec<Option<usize>>,
    reservations: Vec<Vec<Reservation>>,
}

/// Distance between a capsule's segment and an axis-aligned box, zero when
/// they intersect.
fn segment_box_distance(p0: &Vec2, p1: &Vec2, lo: &Vec2, hi: &Vec2) -> f64 {
    let inside = |p: &Vec2| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    if inside(p0) || inside(p1) {
        return 0.0;
    }
    let corners = [Vec2::new(lo.x, lo.y), Vec2::new(hi.x, lo.y), Vec2::new(hi.x, hi.y), Vec2::new(lo.x, hi.y)];
    (0..4)
        .map(|k| segment_distance(p0, p1, &corners[k], &corners[(k + 1) % 4]).0)
        .fold(f64::INFINITY, f64::min)
}

impl IntersectionGrid {
    pub fn new(fidelity: Fidelity) -> Self {
        let n = fidelity.cells_per_side();
        Self {
            fidelity,
            cell_size: GRID_EXTENT / n as f64,
            owners: vec![None; n * n],
            reservations: vec![Vec::new(); n * n],
        }
    }

    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }

    pub fn cell_count(&self) -> usize {
        self.owners.len()
    }

    /// Lower-left and upper-right corners; cells are numbered row-major
    /// from the south-west corner.
    pub fn cell_bounds(&self, cell: usize) -> (Vec2, Vec2) {
        let n = self.fidelity.cells_per_side();
        let (row, col) = (cell / n, cell % n);
        let lo = Vec2::new(-0.5 * GRID_EXTENT + col as f64 * self.cell_size, -0.5 * GRID_EXTENT + row as f64 * self.cell_size);
        (lo, lo + Vec2::new(self.cell_size, self.cell_size))
    }

    /// Cells the capsule overlaps.
    pub fn capsule_cells(&self, capsule: &Capsule) -> Vec<usize> {
        (0..self.cell_count())
            .filter(|&c| {
                let (lo, hi) = self.cell_bounds(c);
                segment_box_distance(&capsule.p0, &capsule.p1, &lo, &hi) < capsule.radius
            })
            .collect()
    }

    /// Per cell, the hull of arc lengths at which the footprint posed on the
    /// path overlaps it, ordered by entry.
    pub fn path_spans(&self, path: &ReferencePath, shape: &CapsuleShape) -> Vec<CellSpan> {
        let mut spans: Vec<Option<CellSpan>> = vec![None; self.cell_count()];
        let n = (path.length() / SPAN_STEP).ceil() as usize;
        for k in 0..=n {
            let s = path.length() * k as f64 / n as f64;
            let cap = shape.posed(path.point_at(s), path.heading_at(s));
            for c in self.capsule_cells(&cap) {
                let span = spans[c].get_or_insert(CellSpan { cell: c, s_in: s, s_out: s });
                span.s_out = s;
            }
        }
        let mut out: Vec<CellSpan> = spans.into_iter().flatten().collect();
        out.sort_by(|a, b| a.s_in.total_cmp(&b.s_in).then(a.cell.cmp(&b.cell)));
        out
    }

    pub fn owner(&self, cell: usize) -> Option<usize> {
        self.owners[cell]
    }

    /// Locks every listed cell for `vehicle` if none is held by another.
    pub fn try_claim(&mut self, vehicle: usize, cells: &[usize]) -> bool {
        if cells.iter().any(|&c| self.owners[c].is_some_and(|o| o != vehicle)) {
            return false;
        }
        for &c in cells {
            self.owners[c] = Some(vehicle);
        }
        true
    }

    pub fn release(&mut self, vehicle: usize, cell: usize) {
        if self.owners[cell] == Some(vehicle) {
            self.owners[cell] = None;
        }
    }

    pub fn reservations(&self, cell: usize) -> &[Reservation] {
        &self.reservations[cell]
    }

    /// No other vehicle's slot in `cell` overlaps `[entry, exit]`.
    pub fn slot_free(&self, cell: usize, entry: f64, exit: f64, vehicle: usize) -> bool {
        self.reservations[cell].iter().all(|r| r.vehicle == vehicle || r.exit <= entry || r.entry >= exit)
    }

    pub fn reserve(&mut self, cell: usize, slot: Reservation) -> Result<()> {
        if !self.slot_free(cell, slot.entry, slot.exit, slot.vehicle) {
            return Err(Error::InvalidInput(format!("cell {cell} slot overlaps an existing reservation")));
        }
        self.reservations[cell].push(slot);
        Ok(())
    }

    /// Drops every lock and reservation of `vehicle`.
    pub fn forget(&mut self, vehicle: usize) {
        for o in &mut self.owners {
            if *o == Some(vehicle) {
                *o = None;
            }
        }
        for r in &mut self.reservations {
            r.retain(|s| s.vehicle != vehicle);
        }
    }
}

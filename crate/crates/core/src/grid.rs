//! Discretization of a scenario into a 3D cell graph, plus the geometric
//! primitives the planner runs on: supercover segment tracing, line-of-sight,
//! buffer-zone neighborhoods, and the per-sequence occupancy overlay.
//!
//! All cell-membership questions use closed boxes: a segment or polygon that
//! only touches a cell boundary still claims the cell. That makes diagonal
//! moves through a shared corner occupy all four surrounding cells, which is
//! what keeps tubes from corner-cutting past each other or past obstacles.

use crate::geometry::{intervals_overlap, point_in_polygon, rect_intersects_polygon, Point3};
use crate::scenario::Scenario;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("flyable band is empty after discretization")]
    EmptyFlyableBand,
    #[error("cell size must be positive on every axis")]
    InvalidCellSize,
    #[error("grid of {0} cells exceeds the addressable limit")]
    TooManyCells(usize),
    #[error("point [{0}, {1}, {2}] outside grid bounds")]
    PointOutOfBounds(f64, f64, f64),
    #[error("route {od_id} conflicts with existing occupancy at cell {cell:?}")]
    RouteConflict { od_id: String, cell: Cell },
}

/// Integer grid coordinates of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize, z: usize) -> Self {
        Cell { x, y, z }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiscretizeOptions {
    /// Buffer radius in cells, per axis.
    pub r_buf: [usize; 3],
    /// Path cross-section in cells, per axis. `(1,1,1)` plans thin paths for
    /// benchmark parity; `(2,2,1)` matches the 20 m x 20 m x 10 m metric
    /// cross-section at 10 m cells.
    pub path_thickness: [usize; 3],
    /// Horizontal/vertical clearance (meters) kept between paths and
    /// obstacles by inflating obstacle prisms during discretization.
    /// `None` derives it from `r_buf * cell_size`; `Some(0.0)` disables
    /// inflation (2D benchmark parity).
    pub obstacle_margin: Option<f64>,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions {
            r_buf: [1, 1, 1],
            path_thickness: [1, 1, 1],
            obstacle_margin: None,
        }
    }
}

/// Immutable voxelized world. Shareable across threads; all mutable planning
/// state lives in [`OccupancyOverlay`].
#[derive(Debug, Clone)]
pub struct GridGraph {
    dims: [usize; 3],
    cell_size: [f64; 3],
    origin: [f64; 3],
    reachable: Vec<bool>,
    theta_risk: Vec<f64>,
    vertiport_anchor: BTreeMap<String, Cell>,
    vertiport_id: HashMap<u32, String>,
    r_buf: [usize; 3],
    path_thickness: [usize; 3],
}

impl GridGraph {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_size(&self) -> [f64; 3] {
        self.cell_size
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn r_buf(&self) -> [usize; 3] {
        self.r_buf
    }

    pub fn path_thickness(&self) -> [usize; 3] {
        self.path_thickness
    }

    pub fn n_cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn idx(&self, c: Cell) -> u32 {
        debug_assert!(self.in_bounds(c));
        (c.x + self.dims[0] * (c.y + self.dims[1] * c.z)) as u32
    }

    pub fn cell(&self, idx: u32) -> Cell {
        let idx = idx as usize;
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        Cell { x, y, z }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.dims[0] && c.y < self.dims[1] && c.z < self.dims[2]
    }

    pub fn center(&self, c: Cell) -> Point3 {
        [
            self.origin[0] + (c.x as f64 + 0.5) * self.cell_size[0],
            self.origin[1] + (c.y as f64 + 0.5) * self.cell_size[1],
            self.origin[2] + (c.z as f64 + 0.5) * self.cell_size[2],
        ]
    }

    /// Cell containing a point; points exactly on an interior boundary go to
    /// the lower cell, points on the outer max face to the last cell.
    pub fn point_to_cell(&self, p: Point3) -> Option<Cell> {
        let mut out = [0usize; 3];
        for ax in 0..3 {
            let u = (p[ax] - self.origin[ax]) / self.cell_size[ax];
            if u < 0.0 || u > self.dims[ax] as f64 {
                return None;
            }
            out[ax] = (u.floor() as usize).min(self.dims[ax] - 1);
        }
        Some(Cell::new(out[0], out[1], out[2]))
    }

    pub fn is_reachable(&self, idx: u32) -> bool {
        self.reachable[idx as usize]
    }

    pub fn theta(&self, idx: u32) -> f64 {
        self.theta_risk[idx as usize]
    }

    pub fn reachable_count(&self) -> usize {
        self.reachable.iter().filter(|r| **r).count()
    }

    pub fn vertiport_anchor(&self, id: &str) -> Option<Cell> {
        self.vertiport_anchor.get(id).copied()
    }

    pub fn vertiport_anchors(&self) -> impl Iterator<Item = (&str, Cell)> {
        self.vertiport_anchor.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn vertiport_at(&self, idx: u32) -> Option<&str> {
        self.vertiport_id.get(&idx).map(|s| s.as_str())
    }

    /// Runs `ok` over every cell of the path cross-section anchored at `c`.
    pub fn thick_cells_ok(&self, c: Cell, mut ok: impl FnMut(u32) -> bool) -> bool {
        let [tx, ty, tz] = self.path_thickness;
        for dz in 0..tz {
            for dy in 0..ty {
                for dx in 0..tx {
                    let t = Cell::new(c.x + dx, c.y + dy, c.z + dz);
                    if !self.in_bounds(t) || !ok(self.idx(t)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub(crate) fn dilate_into(&self, c: Cell, out: &mut HashSet<u32>) {
        let [tx, ty, tz] = self.path_thickness;
        for dz in 0..tz {
            for dy in 0..ty {
                for dx in 0..tx {
                    let t = Cell::new(c.x + dx, c.y + dy, c.z + dz);
                    if self.in_bounds(t) {
                        out.insert(self.idx(t));
                    }
                }
            }
        }
    }

    /// Supercover cell set of a waypoint polyline, dilated to path thickness.
    pub fn polyline_cells(&self, waypoints: &[Point3]) -> Result<HashSet<u32>, GridError> {
        let mut cells = HashSet::new();
        for pair in waypoints.windows(2) {
            supercover_visit(self, pair[0], pair[1], |c, _, _| {
                self.dilate_into(c, &mut cells);
                true
            })?;
        }
        Ok(cells)
    }
}

/// Discretizes a scenario with default buffer radius, thickness, and
/// obstacle clearance.
pub fn discretize(scenario: &Scenario, cell_size: [f64; 3]) -> Result<GridGraph, GridError> {
    discretize_with(scenario, cell_size, DiscretizeOptions::default())
}

pub fn discretize_with(
    scenario: &Scenario,
    cell_size: [f64; 3],
    opts: DiscretizeOptions,
) -> Result<GridGraph, GridError> {
    if cell_size.iter().any(|&c| !(c > 0.0)) {
        return Err(GridError::InvalidCellSize);
    }
    let [dx, dy, dz] = cell_size;
    let extent = scenario.bounds.extent();
    let nx = (extent[0] / dx).ceil() as usize;
    let ny = (extent[1] / dy).ceil() as usize;
    let [band_lo, band_hi] = scenario.flyable_band;
    let nz = ((band_hi - band_lo) / dz).ceil() as usize;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(GridError::EmptyFlyableBand);
    }
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .filter(|&v| v <= u32::MAX as usize)
        .ok_or(GridError::TooManyCells(usize::MAX))?;

    let origin = [scenario.bounds.min[0], scenario.bounds.min[1], band_lo];
    let mut grid = GridGraph {
        dims: [nx, ny, nz],
        cell_size,
        origin,
        reachable: vec![true; n],
        theta_risk: vec![1.0; n],
        vertiport_anchor: BTreeMap::new(),
        vertiport_id: HashMap::new(),
        r_buf: opts.r_buf,
        path_thickness: opts.path_thickness,
    };

    // layers whose box sticks out of the band are not flyable
    let z_eps = 1e-9 * dz;
    let mut any_layer = false;
    let mut layer_ok = vec![false; nz];
    for k in 0..nz {
        let top = band_lo + (k as f64 + 1.0) * dz;
        layer_ok[k] = top <= band_hi + z_eps;
        any_layer |= layer_ok[k];
    }
    if !any_layer {
        return Err(GridError::EmptyFlyableBand);
    }
    for k in 0..nz {
        if !layer_ok[k] {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = grid.idx(Cell::new(i, j, k)) as usize;
                    grid.reachable[idx] = false;
                }
            }
        }
    }

    let margins = match opts.obstacle_margin {
        Some(m) => [m, m, m],
        None => [
            opts.r_buf[0] as f64 * dx,
            opts.r_buf[1] as f64 * dy,
            opts.r_buf[2] as f64 * dz,
        ],
    };

    let cells_spanning = |lo: f64, hi: f64, o: f64, cs: f64, n_ax: usize| -> (usize, usize) {
        let a = ((lo - o) / cs).floor() as i64 - 1;
        let b = ((hi - o) / cs).floor() as i64 + 1;
        (
            a.clamp(0, n_ax as i64 - 1) as usize,
            b.clamp(0, n_ax as i64 - 1) as usize,
        )
    };

    for obstacle in &scenario.obstacles {
        let (fx, fy): (Vec<f64>, Vec<f64>) = obstacle
            .footprint
            .iter()
            .map(|p| (p[0], p[1]))
            .unzip();
        let (min_x, max_x) = (
            fx.iter().cloned().fold(f64::INFINITY, f64::min),
            fx.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let (min_y, max_y) = (
            fy.iter().cloned().fold(f64::INFINITY, f64::min),
            fy.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let (ix0, ix1) = cells_spanning(min_x - margins[0], max_x + margins[0], origin[0], dx, nx);
        let (iy0, iy1) = cells_spanning(min_y - margins[1], max_y + margins[1], origin[1], dy, ny);
        let z_range = (obstacle.lowest_alt - margins[2], obstacle.highest_alt + margins[2]);
        let mut z_layers = Vec::new();
        for k in 0..nz {
            let z0 = band_lo + k as f64 * dz;
            if intervals_overlap((z0, z0 + dz), z_range) {
                z_layers.push(k);
            }
        }
        if z_layers.is_empty() {
            continue;
        }
        for j in iy0..=iy1 {
            for i in ix0..=ix1 {
                let rect_min = [
                    origin[0] + i as f64 * dx - margins[0],
                    origin[1] + j as f64 * dy - margins[1],
                ];
                let rect_max = [rect_min[0] + dx + 2.0 * margins[0], rect_min[1] + dy + 2.0 * margins[1]];
                if rect_intersects_polygon(rect_min, rect_max, &obstacle.footprint) {
                    for &k in &z_layers {
                        let idx = grid.idx(Cell::new(i, j, k)) as usize;
                        grid.reachable[idx] = false;
                    }
                }
            }
        }
    }

    for zone in &scenario.risk_zones {
        let (fx, fy): (Vec<f64>, Vec<f64>) = zone.footprint.iter().map(|p| (p[0], p[1])).unzip();
        let (min_x, max_x) = (
            fx.iter().cloned().fold(f64::INFINITY, f64::min),
            fx.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let (min_y, max_y) = (
            fy.iter().cloned().fold(f64::INFINITY, f64::min),
            fy.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let (ix0, ix1) = cells_spanning(min_x, max_x, origin[0], dx, nx);
        let (iy0, iy1) = cells_spanning(min_y, max_y, origin[1], dy, ny);
        for j in iy0..=iy1 {
            for i in ix0..=ix1 {
                let cx = origin[0] + (i as f64 + 0.5) * dx;
                let cy = origin[1] + (j as f64 + 0.5) * dy;
                if point_in_polygon([cx, cy], &zone.footprint) {
                    for k in 0..nz {
                        let idx = grid.idx(Cell::new(i, j, k)) as usize;
                        grid.theta_risk[idx] = grid.theta_risk[idx].max(zone.theta_risk);
                    }
                }
            }
        }
    }

    // ground-risk zones apply per column; cells keep theta even when they sit
    // under an out-of-band layer (they are unreachable anyway)
    let z_center_lo = band_lo + 0.5 * dz;
    let z_center_hi = band_lo + (nz as f64 - 0.5) * dz;
    for v in &scenario.vertiports {
        let zc = v.position[2].clamp(z_center_lo, z_center_hi);
        if let Some(anchor) = grid.point_to_cell([v.position[0], v.position[1], zc]) {
            grid.vertiport_anchor.insert(v.id.clone(), anchor);
            let (ix0, ix1) = cells_spanning(
                v.position[0] - v.radius,
                v.position[0] + v.radius,
                origin[0],
                dx,
                nx,
            );
            let (iy0, iy1) = cells_spanning(
                v.position[1] - v.radius,
                v.position[1] + v.radius,
                origin[1],
                dy,
                ny,
            );
            for j in iy0..=iy1 {
                for i in ix0..=ix1 {
                    let c = Cell::new(i, j, anchor.z);
                    let center = grid.center(c);
                    let dr = ((center[0] - v.position[0]).powi(2)
                        + (center[1] - v.position[1]).powi(2))
                    .sqrt();
                    if dr <= v.radius {
                        grid.vertiport_id.entry(grid.idx(c)).or_insert_with(|| v.id.clone());
                    }
                }
            }
            grid.vertiport_id
                .entry(grid.idx(anchor))
                .or_insert_with(|| v.id.clone());
        }
    }

    Ok(grid)
}

/// Visits every cell whose closed box the segment `[a, b]` intersects,
/// passing the parametric entry and exit `t` of each. Cells on slab
/// boundaries may be visited more than once; the visitor returns `false` to
/// abort the walk. Returns `Ok(false)` when aborted.
pub fn supercover_visit(
    grid: &GridGraph,
    a: Point3,
    b: Point3,
    mut visit: impl FnMut(Cell, f64, f64) -> bool,
) -> Result<bool, GridError> {
    let bounds_ok = |p: Point3| {
        (0..3).all(|ax| {
            let u = p[ax] - grid.origin[ax];
            u >= 0.0 && u <= grid.dims[ax] as f64 * grid.cell_size[ax]
        })
    };
    if !bounds_ok(a) {
        return Err(GridError::PointOutOfBounds(a[0], a[1], a[2]));
    }
    if !bounds_ok(b) {
        return Err(GridError::PointOutOfBounds(b[0], b[1], b[2]));
    }

    let p: Point3 = [
        a[0] - grid.origin[0],
        a[1] - grid.origin[1],
        a[2] - grid.origin[2],
    ];
    let q: Point3 = [
        b[0] - grid.origin[0],
        b[1] - grid.origin[1],
        b[2] - grid.origin[2],
    ];
    let cs = grid.cell_size;

    if p == q {
        let c = grid.point_to_cell(a).expect("checked in bounds");
        return Ok(visit(c, 0.0, 0.0));
    }

    // closed-box slab clip; exact comparisons, no epsilon
    let t_span = |cell: [usize; 3]| -> Option<(f64, f64)> {
        let mut t_min = 0.0f64;
        let mut t_max = 1.0f64;
        for ax in 0..3 {
            let lo = cell[ax] as f64 * cs[ax];
            let hi = lo + cs[ax];
            let d = q[ax] - p[ax];
            if d == 0.0 {
                if p[ax] < lo || p[ax] > hi {
                    return None;
                }
            } else {
                let (t1, t2) = ((lo - p[ax]) / d, (hi - p[ax]) / d);
                let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                t_min = t_min.max(t1);
                t_max = t_max.min(t2);
            }
        }
        (t_min <= t_max).then_some((t_min, t_max))
    };

    // candidate index span touching [lo, hi], widened one cell for safety;
    // the exact slab test above is the arbiter
    let span = |lo: f64, hi: f64, ax: usize| -> (usize, usize) {
        let i0 = (lo / cs[ax]).floor() as i64 - 1;
        let i1 = (hi / cs[ax]).floor() as i64 + 1;
        (
            i0.clamp(0, grid.dims[ax] as i64 - 1) as usize,
            i1.clamp(0, grid.dims[ax] as i64 - 1) as usize,
        )
    };

    let major = (0..3)
        .max_by(|&i, &j| {
            let vi = (q[i] - p[i]).abs() / cs[i];
            let vj = (q[j] - p[j]).abs() / cs[j];
            vi.total_cmp(&vj)
        })
        .unwrap();
    let (m0, m1) = span(p[major].min(q[major]), p[major].max(q[major]), major);
    let minor_a = (major + 1) % 3;
    let minor_b = (major + 2) % 3;
    let d_major = q[major] - p[major];

    for im in m0..=m1 {
        let lo = im as f64 * cs[major];
        let hi = lo + cs[major];
        let (mut t0, mut t1) = ((lo - p[major]) / d_major, (hi - p[major]) / d_major);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        let t0 = t0.max(0.0);
        let t1 = t1.min(1.0);
        if t0 > t1 {
            continue;
        }
        let at = |ax: usize, t: f64| p[ax] + t * (q[ax] - p[ax]);
        let (a0, a1) = {
            let (v0, v1) = (at(minor_a, t0), at(minor_a, t1));
            span(v0.min(v1), v0.max(v1), minor_a)
        };
        let (b0, b1) = {
            let (v0, v1) = (at(minor_b, t0), at(minor_b, t1));
            span(v0.min(v1), v0.max(v1), minor_b)
        };
        for ia in a0..=a1 {
            for ib in b0..=b1 {
                let mut cell = [0usize; 3];
                cell[major] = im;
                cell[minor_a] = ia;
                cell[minor_b] = ib;
                if let Some((t0c, t1c)) = t_span(cell) {
                    if !visit(Cell::new(cell[0], cell[1], cell[2]), t0c, t1c) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Supercover traversal of `[a, b]`: every cell whose closed box the segment
/// intersects, ordered from `a` to `b`, both endpoint cells included.
/// Ordering is by entry parameter, then exit parameter (so cells the segment
/// only corner-touches sort between the cell it leaves and the cell it
/// enters), then cell index; computed over a canonical orientation so that
/// `trace_cells(a, b)` is the exact reverse of `trace_cells(b, a)`.
pub fn trace_cells(a: Point3, b: Point3, grid: &GridGraph) -> Result<Vec<Cell>, GridError> {
    let swapped = b < a;
    let (p, q) = if swapped { (b, a) } else { (a, b) };
    let mut hits: Vec<(f64, f64, u32)> = Vec::new();
    supercover_visit(grid, p, q, |c, t0, t1| {
        hits.push((t0, t1, grid.idx(c)));
        true
    })?;
    hits.sort_by(|l, r| {
        l.0.total_cmp(&r.0)
            .then(l.1.total_cmp(&r.1))
            .then(l.2.cmp(&r.2))
    });
    let mut seen = HashSet::new();
    let mut cells: Vec<Cell> = Vec::with_capacity(hits.len());
    for (_, _, idx) in hits {
        if seen.insert(idx) {
            cells.push(grid.cell(idx));
        }
    }
    if swapped {
        cells.reverse();
    }
    Ok(cells)
}

/// All cells within the per-axis Chebyshev buffer radius of any path cell,
/// minus the path cells themselves. Out-of-bounds indices are clipped;
/// reachability is not consulted (buffers may overlap obstacles).
pub fn buffer_cells(path_cells: &HashSet<u32>, grid: &GridGraph) -> HashSet<u32> {
    let [rx, ry, rz] = grid.r_buf;
    let [nx, ny, nz] = grid.dims;
    let mut out = HashSet::new();
    for &idx in path_cells {
        let c = grid.cell(idx);
        let x0 = c.x.saturating_sub(rx);
        let y0 = c.y.saturating_sub(ry);
        let z0 = c.z.saturating_sub(rz);
        for z in z0..=(c.z + rz).min(nz - 1) {
            for y in y0..=(c.y + ry).min(ny - 1) {
                for x in x0..=(c.x + rx).min(nx - 1) {
                    let n = grid.idx(Cell::new(x, y, z));
                    if !path_cells.contains(&n) {
                        out.insert(n);
                    }
                }
            }
        }
    }
    out
}

/// Per-route cost components. `risk` and `space` carry their scaling factors
/// (`lambda_r`, `lambda_p`); `total` additionally applies the weight
/// coefficients. The raw fields are the unscaled sums used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct CostBreakdown {
    pub operational: f64,
    pub risk: f64,
    pub space: f64,
    pub total: f64,
    pub raw_risk: f64,
    pub raw_space: f64,
}

impl CostBreakdown {
    pub fn accumulate(&mut self, other: &CostBreakdown) {
        self.operational += other.operational;
        self.risk += other.risk;
        self.space += other.space;
        self.total += other.total;
        self.raw_risk += other.raw_risk;
        self.raw_space += other.raw_space;
    }
}

/// One planned route: the any-angle waypoint polyline plus the cells its
/// tube occupies and the cells its buffer reserves.
#[derive(Debug, Clone, Serialize)]
pub struct Route {
    pub od_id: String,
    pub waypoints: Vec<Point3>,
    /// Sorted cell indices occupied by the path itself.
    pub path_cells: Vec<u32>,
    /// Sorted cell indices of the surrounding buffer zone.
    pub buffer_cells: Vec<u32>,
    pub cost: CostBreakdown,
    /// Mean ground-risk theta over the path cells (0 for a degenerate route).
    pub mean_theta: f64,
}

impl Route {
    pub fn path_cell_set(&self) -> HashSet<u32> {
        self.path_cells.iter().copied().collect()
    }

    pub fn buffer_cell_set(&self) -> HashSet<u32> {
        self.buffer_cells.iter().copied().collect()
    }
}

/// Mutable reservation state for one planning sequence over an immutable
/// grid. Flags are only ever set, never cleared.
pub struct OccupancyOverlay<'g> {
    grid: &'g GridGraph,
    path_occupied: Vec<bool>,
    buffer_reserved: Vec<bool>,
    applied: HashSet<String>,
}

impl<'g> OccupancyOverlay<'g> {
    pub fn new(grid: &'g GridGraph) -> Self {
        OccupancyOverlay {
            grid,
            path_occupied: vec![false; grid.n_cells()],
            buffer_reserved: vec![false; grid.n_cells()],
            applied: HashSet::new(),
        }
    }

    pub fn grid(&self) -> &'g GridGraph {
        self.grid
    }

    pub fn is_path_occupied(&self, idx: u32) -> bool {
        self.path_occupied[idx as usize]
    }

    pub fn is_buffer_reserved(&self, idx: u32) -> bool {
        self.buffer_reserved[idx as usize]
    }

    /// A cell a new path may occupy: reachable, not on an earlier path, and
    /// not inside an earlier route's buffer zone.
    pub fn is_free_for_path(&self, idx: u32) -> bool {
        self.grid.reachable[idx as usize]
            && !self.path_occupied[idx as usize]
            && !self.buffer_reserved[idx as usize]
    }

    /// Whole path cross-section anchored at `c` is free.
    pub fn cell_free_for_path(&self, c: Cell) -> bool {
        self.grid.thick_cells_ok(c, |idx| self.is_free_for_path(idx))
    }

    /// True iff every cell the segment between the two cell centers traverses
    /// (dilated to path thickness) is free for a new path.
    pub fn line_of_sight(&self, a: Cell, b: Cell) -> bool {
        let pa = self.grid.center(a);
        let pb = self.grid.center(b);
        supercover_visit(self.grid, pa, pb, |c, _, _| self.cell_free_for_path(c))
            .expect("cell centers are in bounds")
    }

    pub fn occupied_count(&self) -> usize {
        self.path_occupied.iter().filter(|b| **b).count()
    }

    pub fn reserved_count(&self) -> usize {
        self.buffer_reserved.iter().filter(|b| **b).count()
    }

    /// Marks the route's path cells occupied and its buffer cells reserved.
    /// Re-applying a route that was already applied is a no-op; any other
    /// overlap with existing path occupancy is a planner bug and errors.
    pub fn apply_route(&mut self, route: &Route) -> Result<(), GridError> {
        if self.applied.contains(&route.od_id) {
            return Ok(());
        }
        for &idx in &route.path_cells {
            if !self.is_free_for_path(idx) {
                return Err(GridError::RouteConflict {
                    od_id: route.od_id.clone(),
                    cell: self.grid.cell(idx),
                });
            }
        }
        for &idx in &route.path_cells {
            self.path_occupied[idx as usize] = true;
        }
        for &idx in &route.buffer_cells {
            self.buffer_reserved[idx as usize] = true;
        }
        self.applied.insert(route.od_id.clone());
        Ok(())
    }

    /// One z-layer as text, for debug dumps: `#` unreachable, `P` path,
    /// `b` buffer, `.` free. Row 0 is printed last so y grows upward.
    pub fn layer_ascii(&self, z: usize) -> String {
        let [nx, ny, _] = self.grid.dims;
        let mut out = String::with_capacity((nx + 1) * ny);
        for y in (0..ny).rev() {
            for x in 0..nx {
                let idx = self.grid.idx(Cell::new(x, y, z)) as usize;
                out.push(if self.path_occupied[idx] {
                    'P'
                } else if self.buffer_reserved[idx] {
                    'b'
                } else if !self.grid.reachable[idx] {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }
}

//! Single-route any-angle search: Theta* extended with a risk cost and a
//! marginal airspace (space) cost over the occupancy overlay.
//!
//! Edge costs accumulate three parts: operational (traversal length plus
//! turning and climb/descend penalties), risk (scaled sum of per-cell ground
//! risk), and space (scaled count of path and buffer cells the edge newly
//! claims, relative to both the existing network and the partial path under
//! construction). The returned route's cost breakdown is recomputed by a
//! replay over the final waypoint polyline, so it is exactly reproducible
//! from the route alone.

use crate::geometry::{dist3, dot3, norm3, sub3, Point3};
use crate::grid::{
    buffer_cells, supercover_visit, Cell, CostBreakdown, GridError, GridGraph, OccupancyOverlay,
    Route,
};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("route {od_id}: no path")]
    NoPath { od_id: String },
    #[error("route {od_id}: {which} cell {cell:?} is {reason}")]
    InvalidEndpoint {
        od_id: String,
        which: &'static str,
        cell: Cell,
        reason: &'static str,
    },
    #[error("polyline needs at least 2 waypoints")]
    TooFewWaypoints,
    #[error("zero-length segment at waypoint {0}")]
    ZeroLengthSegment(usize),
    #[error("route {od_id}: cannot calibrate: {reason}")]
    Calibration { od_id: String, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Weight coefficients and scaling factors of the route cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Weight of the risk cost relative to the operational cost.
    pub omega_r: f64,
    /// Weight of the space cost relative to the operational cost.
    pub omega_p: f64,
    pub lambda_turning: f64,
    pub lambda_climbing: f64,
    pub lambda_descending: f64,
    /// Scaling of the raw per-cell risk sum; calibrated per OD unless fixed.
    pub lambda_r: f64,
    /// Scaling of the raw marginal cell count; calibrated per OD unless fixed.
    pub lambda_p: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            omega_r: 1.0,
            omega_p: 1.0,
            lambda_turning: 0.0,
            lambda_climbing: 0.0,
            lambda_descending: 0.0,
            lambda_r: 1.0,
            lambda_p: 1.0,
        }
    }
}

/// A demand resolved to grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdEndpoints {
    pub od_id: String,
    pub start: Cell,
    pub goal: Cell,
}

/// Operational cost of a waypoint polyline: traversal length, turning,
/// climbing and descending penalties.
pub fn operational_cost(polyline: &[Point3], w: &CostWeights) -> Result<f64, PathError> {
    if polyline.len() < 2 {
        return Err(PathError::TooFewWaypoints);
    }
    let mut total = 0.0;
    let mut prev: Option<Point3> = None;
    for (i, pair) in polyline.windows(2).enumerate() {
        let l = sub3(pair[1], pair[0]);
        let len = norm3(l);
        if len == 0.0 {
            return Err(PathError::ZeroLengthSegment(i));
        }
        total += len;
        if let Some(p) = prev {
            total += w.lambda_turning * turn_angle(p, l);
        }
        let pitch = (l[2] / len).clamp(-1.0, 1.0).asin();
        total += w.lambda_climbing * pitch.max(0.0) * len;
        total += w.lambda_descending * (-pitch).max(0.0) * len;
        prev = Some(l);
    }
    Ok(total)
}

fn turn_angle(a: Point3, b: Point3) -> f64 {
    let denom = norm3(a) * norm3(b);
    if denom == 0.0 {
        return 0.0;
    }
    (dot3(a, b) / denom).clamp(-1.0, 1.0).acos().abs()
}

/// Sorted, deduplicated, thickness-dilated supercover cells of one segment,
/// minus an optional exclusion set.
fn segment_cells(
    grid: &GridGraph,
    a: Point3,
    b: Point3,
    exclude: Option<&HashSet<u32>>,
) -> Result<Vec<u32>, GridError> {
    let mut set = HashSet::new();
    supercover_visit(grid, a, b, |c, _, _| {
        grid.dilate_into(c, &mut set);
        true
    })?;
    let mut cells: Vec<u32> = match exclude {
        Some(ex) => set.into_iter().filter(|i| !ex.contains(i)).collect(),
        None => set.into_iter().collect(),
    };
    cells.sort_unstable();
    Ok(cells)
}

/// Risk cost of a single segment: `lambda_r` times the summed cell risk over
/// the cells it traverses, each counted once.
pub fn risk_cost(
    a: Point3,
    b: Point3,
    overlay: &OccupancyOverlay,
    w: &CostWeights,
) -> Result<f64, PathError> {
    let grid = overlay.grid();
    let cells = segment_cells(grid, a, b, None)?;
    Ok(w.lambda_r * cells.iter().map(|&i| grid.theta(i)).sum::<f64>())
}

/// Cells already counted by the partial path a segment extends.
#[derive(Debug, Clone, Default)]
pub struct PartialPath {
    pub path: HashSet<u32>,
    pub buffer: HashSet<u32>,
}

/// Space cost of the segment `a -> b` as the marginal number of cells it adds
/// to the occupied airspace: new path cells plus new buffer cells, counted
/// against the overlay's reservations and the partial path already built.
pub fn space_cost_marginal(
    a: Point3,
    b: Point3,
    overlay: &OccupancyOverlay,
    w: &CostWeights,
    partial: &PartialPath,
) -> Result<f64, PathError> {
    let (n_path, n_buf) = marginal_cells(a, b, overlay, partial)?;
    Ok(w.lambda_p * (n_path + n_buf) as f64)
}

/// Space cost of a lone segment (empty partial path).
pub fn space_cost(
    a: Point3,
    b: Point3,
    overlay: &OccupancyOverlay,
    w: &CostWeights,
) -> Result<f64, PathError> {
    space_cost_marginal(a, b, overlay, w, &PartialPath::default())
}

fn marginal_cells(
    a: Point3,
    b: Point3,
    overlay: &OccupancyOverlay,
    partial: &PartialPath,
) -> Result<(usize, usize), PathError> {
    let grid = overlay.grid();
    let new_cells = segment_cells(grid, a, b, Some(&partial.path))?;
    let new_set: HashSet<u32> = new_cells.iter().copied().collect();
    let mut counted = HashSet::new();
    let [rx, ry, rz] = grid.r_buf();
    let [nx, ny, nz] = grid.dims();
    for &idx in &new_cells {
        let c = grid.cell(idx);
        for z in c.z.saturating_sub(rz)..=(c.z + rz).min(nz - 1) {
            for y in c.y.saturating_sub(ry)..=(c.y + ry).min(ny - 1) {
                for x in c.x.saturating_sub(rx)..=(c.x + rx).min(nx - 1) {
                    let n = grid.idx(Cell::new(x, y, z));
                    if new_set.contains(&n)
                        || partial.path.contains(&n)
                        || partial.buffer.contains(&n)
                        || overlay.is_buffer_reserved(n)
                    {
                        continue;
                    }
                    counted.insert(n);
                }
            }
        }
    }
    Ok((new_cells.len(), counted.len()))
}

/// Straight-line distance between two cell centers; an admissible lower
/// bound on the remaining cost since risk and space terms are nonnegative
/// and traversal is at least the Euclidean distance.
pub fn heuristic(cell: Cell, goal: Cell, grid: &GridGraph) -> f64 {
    dist3(grid.center(cell), grid.center(goal))
}

/// Replays a waypoint polyline over the overlay and returns the exact cost
/// breakdown plus the sorted path and buffer cell sets. A single-waypoint
/// polyline is a degenerate route that occupies nothing.
pub fn evaluate_polyline(
    overlay: &OccupancyOverlay,
    waypoints: &[Point3],
    w: &CostWeights,
) -> Result<(CostBreakdown, Vec<u32>, Vec<u32>), PathError> {
    let grid = overlay.grid();
    if waypoints.len() < 2 {
        if waypoints.is_empty() {
            return Err(PathError::TooFewWaypoints);
        }
        return Ok((CostBreakdown::default(), Vec::new(), Vec::new()));
    }
    let path_set = grid.polyline_cells(waypoints)?;
    let buf_set = buffer_cells(&path_set, grid);
    let mut path: Vec<u32> = path_set.into_iter().collect();
    path.sort_unstable();
    let mut buffer: Vec<u32> = buf_set.into_iter().collect();
    buffer.sort_unstable();

    let operational = operational_cost(waypoints, w)?;
    let raw_risk: f64 = path.iter().map(|&i| grid.theta(i)).sum();
    let new_buf = buffer
        .iter()
        .filter(|&&i| !overlay.is_buffer_reserved(i))
        .count();
    let raw_space = (path.len() + new_buf) as f64;
    let risk = w.lambda_r * raw_risk;
    let space = w.lambda_p * raw_space;
    let total = operational + w.omega_r * risk + w.omega_p * space;
    Ok((
        CostBreakdown {
            operational,
            risk,
            space,
            total,
            raw_risk,
            raw_space,
        },
        path,
        buffer,
    ))
}

/// Derives the risk and space scaling factors for one OD: a baseline search
/// minimizing the operational cost alone on an empty overlay yields `o0`,
/// its raw risk sum `r0` and raw space count `p0`; the factors are `o0/r0`
/// and `o0/p0`.
pub fn calibrate_lambdas(
    grid: &GridGraph,
    od: &OdEndpoints,
    w: &CostWeights,
) -> Result<(f64, f64), PathError> {
    if od.start == od.goal {
        return Err(PathError::Calibration {
            od_id: od.od_id.clone(),
            reason: "origin and destination resolve to the same cell".into(),
        });
    }
    let overlay = OccupancyOverlay::new(grid);
    let base = CostWeights {
        omega_r: 0.0,
        omega_p: 0.0,
        lambda_r: 1.0,
        lambda_p: 1.0,
        ..*w
    };
    let route = find_path(&overlay, od, &base)?;
    let (o0, r0, p0) = (
        route.cost.operational,
        route.cost.raw_risk,
        route.cost.raw_space,
    );
    if r0 <= 0.0 || p0 <= 0.0 {
        return Err(PathError::Calibration {
            od_id: od.od_id.clone(),
            reason: format!("degenerate baseline (o0={o0}, r0={r0}, p0={p0})"),
        });
    }
    Ok((o0 / r0, o0 / p0))
}

const NEIGHBOR_OFFSETS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1i64;
    while dz <= 1 {
        let mut dy = -1i64;
        while dy <= 1 {
            let mut dx = -1i64;
            while dx <= 1 {
                if dx != 0 || dy != 0 || dz != 0 {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

struct OpenEntry {
    f: f64,
    g: f64,
    idx: u32,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    // max-heap: smallest f pops first, ties by larger g, then smaller index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.idx.cmp(&self.idx))
    }
}

#[derive(Clone, Default)]
struct Chain {
    path: HashSet<u32>,
    buffer: HashSet<u32>,
}

/// Counted-cell sets per settled node, keyed by the node whose parent chain
/// they describe. Rebuilt from parent pointers on a miss; cleared wholesale
/// when over capacity to bound memory on large grids.
struct ChainCache {
    map: HashMap<u32, Rc<Chain>>,
    cap: usize,
}

impl ChainCache {
    fn new() -> Self {
        ChainCache {
            map: HashMap::new(),
            cap: 8192,
        }
    }

    fn get(
        &mut self,
        node: u32,
        parents: &HashMap<u32, u32>,
        overlay: &OccupancyOverlay,
    ) -> Rc<Chain> {
        if let Some(c) = self.map.get(&node) {
            return c.clone();
        }
        // walk up to the nearest cached ancestor (or the start)
        let mut pending = vec![node];
        let mut base: Option<Rc<Chain>> = None;
        let mut cur = node;
        loop {
            let p = parents[&cur];
            if p == cur {
                break;
            }
            if let Some(c) = self.map.get(&p) {
                base = Some(c.clone());
                break;
            }
            pending.push(p);
            cur = p;
        }
        let mut chain = base.map(|c| (*c).clone()).unwrap_or_default();
        for &v in pending.iter().rev() {
            extend_chain(&mut chain, parents[&v], v, overlay);
        }
        let rc = Rc::new(chain);
        if self.map.len() >= self.cap {
            self.map.clear();
        }
        self.map.insert(node, rc.clone());
        rc
    }
}

fn extend_chain(chain: &mut Chain, u: u32, v: u32, overlay: &OccupancyOverlay) {
    let grid = overlay.grid();
    let a = grid.center(grid.cell(u));
    let b = grid.center(grid.cell(v));
    let new_cells = segment_cells(grid, a, b, Some(&chain.path))
        .expect("settled cell centers are in bounds");
    for &c in &new_cells {
        chain.buffer.remove(&c);
        chain.path.insert(c);
    }
    let [rx, ry, rz] = grid.r_buf();
    let [nx, ny, nz] = grid.dims();
    for &idx in &new_cells {
        let c = grid.cell(idx);
        for z in c.z.saturating_sub(rz)..=(c.z + rz).min(nz - 1) {
            for y in c.y.saturating_sub(ry)..=(c.y + ry).min(ny - 1) {
                for x in c.x.saturating_sub(rx)..=(c.x + rx).min(nx - 1) {
                    let n = grid.idx(Cell::new(x, y, z));
                    if !chain.path.contains(&n) && !overlay.is_buffer_reserved(n) {
                        chain.buffer.insert(n);
                    }
                }
            }
        }
    }
}

/// Incremental cost of extending the path from settled node `p` to `s`.
fn edge_cost(
    p: u32,
    s: u32,
    dir_into_p: Option<Point3>,
    chain_p: &Chain,
    overlay: &OccupancyOverlay,
    w: &CostWeights,
) -> f64 {
    let grid = overlay.grid();
    let a = grid.center(grid.cell(p));
    let b = grid.center(grid.cell(s));
    let l = sub3(b, a);
    let len = norm3(l);
    let mut cost = len;
    if let Some(d) = dir_into_p {
        cost += w.lambda_turning * turn_angle(d, l);
    }
    let pitch = (l[2] / len).clamp(-1.0, 1.0).asin();
    cost += w.lambda_climbing * pitch.max(0.0) * len;
    cost += w.lambda_descending * (-pitch).max(0.0) * len;

    if w.omega_r != 0.0 || w.omega_p != 0.0 {
        let new_cells =
            segment_cells(grid, a, b, Some(&chain_p.path)).expect("centers in bounds");
        if w.omega_r != 0.0 {
            let raw: f64 = new_cells.iter().map(|&i| grid.theta(i)).sum();
            cost += w.omega_r * w.lambda_r * raw;
        }
        if w.omega_p != 0.0 {
            let new_set: HashSet<u32> = new_cells.iter().copied().collect();
            let mut counted = HashSet::new();
            let [rx, ry, rz] = grid.r_buf();
            let [nx, ny, nz] = grid.dims();
            for &idx in &new_cells {
                let c = grid.cell(idx);
                for z in c.z.saturating_sub(rz)..=(c.z + rz).min(nz - 1) {
                    for y in c.y.saturating_sub(ry)..=(c.y + ry).min(ny - 1) {
                        for x in c.x.saturating_sub(rx)..=(c.x + rx).min(nx - 1) {
                            let n = grid.idx(Cell::new(x, y, z));
                            if !new_set.contains(&n)
                                && !chain_p.path.contains(&n)
                                && !chain_p.buffer.contains(&n)
                                && !overlay.is_buffer_reserved(n)
                            {
                                counted.insert(n);
                            }
                        }
                    }
                }
            }
            cost += w.omega_p * w.lambda_p * (new_cells.len() + counted.len()) as f64;
        }
    }
    cost
}

/// Plans one route over the overlay with Theta* extended by the risk and
/// space costs. Expansion order is by minimum `f = g + h`; when the settled
/// node's parent has line-of-sight to the neighbor, the edge connects from
/// that parent (any-angle shortcut), otherwise from the settled node itself.
pub fn find_path(
    overlay: &OccupancyOverlay,
    od: &OdEndpoints,
    w: &CostWeights,
) -> Result<Route, PathError> {
    let grid = overlay.grid();
    for (which, cell) in [("origin", od.start), ("destination", od.goal)] {
        if !grid.in_bounds(cell) {
            return Err(PathError::InvalidEndpoint {
                od_id: od.od_id.clone(),
                which,
                cell,
                reason: "out of bounds",
            });
        }
        if !overlay.cell_free_for_path(cell) {
            return Err(PathError::InvalidEndpoint {
                od_id: od.od_id.clone(),
                which,
                cell,
                reason: "unreachable or already occupied/reserved",
            });
        }
    }
    if od.start == od.goal {
        return Ok(Route {
            od_id: od.od_id.clone(),
            waypoints: vec![grid.center(od.start)],
            path_cells: Vec::new(),
            buffer_cells: Vec::new(),
            cost: CostBreakdown::default(),
            mean_theta: 0.0,
        });
    }

    let start = grid.idx(od.start);
    let goal = grid.idx(od.goal);
    let [nx, ny, nz] = grid.dims();

    let mut g: HashMap<u32, f64> = HashMap::new();
    let mut parents: HashMap<u32, u32> = HashMap::new();
    let mut closed = vec![false; grid.n_cells()];
    let mut open = BinaryHeap::new();
    let mut chains = ChainCache::new();

    g.insert(start, 0.0);
    parents.insert(start, start);
    open.push(OpenEntry {
        f: heuristic(od.start, od.goal, grid),
        g: 0.0,
        idx: start,
    });

    let dir_into = |n: u32, parents: &HashMap<u32, u32>| -> Option<Point3> {
        let p = parents[&n];
        (p != n).then(|| sub3(grid.center(grid.cell(n)), grid.center(grid.cell(p))))
    };

    while let Some(top) = open.pop() {
        let cur = top.idx;
        if cur == goal {
            let mut rev = vec![goal];
            let mut walk = goal;
            while parents[&walk] != walk {
                walk = parents[&walk];
                rev.push(walk);
            }
            rev.reverse();
            let waypoints: Vec<Point3> =
                rev.iter().map(|&i| grid.center(grid.cell(i))).collect();
            let (cost, path_cells, buffer_cells) = evaluate_polyline(overlay, &waypoints, w)?;
            let mean_theta = if path_cells.is_empty() {
                0.0
            } else {
                cost.raw_risk / path_cells.len() as f64
            };
            return Ok(Route {
                od_id: od.od_id.clone(),
                waypoints,
                path_cells,
                buffer_cells,
                cost,
                mean_theta,
            });
        }
        if closed[cur as usize] {
            continue;
        }
        closed[cur as usize] = true;

        let cur_cell = grid.cell(cur);
        let cur_parent = parents[&cur];
        let parent_los_cache_cell = grid.cell(cur_parent);
        for off in NEIGHBOR_OFFSETS {
            let xx = cur_cell.x as i64 + off[0];
            let yy = cur_cell.y as i64 + off[1];
            let zz = cur_cell.z as i64 + off[2];
            if xx < 0 || yy < 0 || zz < 0 || xx >= nx as i64 || yy >= ny as i64 || zz >= nz as i64
            {
                continue;
            }
            let nb_cell = Cell::new(xx as usize, yy as usize, zz as usize);
            let nb = grid.idx(nb_cell);
            if closed[nb as usize] || !overlay.cell_free_for_path(nb_cell) {
                continue;
            }
            // visible neighbors only: the one-step segment itself must clear
            if !overlay.line_of_sight(cur_cell, nb_cell) {
                continue;
            }
            let g_old = g.get(&nb).copied().unwrap_or(f64::INFINITY);
            let (cand_parent, cand_g) =
                if overlay.line_of_sight(parent_los_cache_cell, nb_cell) {
                    // Path 2: connect from the settled node's parent
                    let chain = chains.get(cur_parent, &parents, overlay);
                    let c = edge_cost(
                        cur_parent,
                        nb,
                        dir_into(cur_parent, &parents),
                        &chain,
                        overlay,
                        w,
                    );
                    (cur_parent, g[&cur_parent] + c)
                } else {
                    // Path 1: connect from the settled node
                    let chain = chains.get(cur, &parents, overlay);
                    let c = edge_cost(cur, nb, dir_into(cur, &parents), &chain, overlay, w);
                    (cur, g[&cur] + c)
                };
            if cand_g < g_old {
                g.insert(nb, cand_g);
                parents.insert(nb, cand_parent);
                open.push(OpenEntry {
                    f: cand_g + heuristic(nb_cell, od.goal, grid),
                    g: cand_g,
                    idx: nb,
                });
            }
        }
    }
    Err(PathError::NoPath {
        od_id: od.od_id.clone(),
    })
}

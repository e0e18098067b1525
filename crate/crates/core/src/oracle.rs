//! Exact small-instance solvers used to verify near-optimality of the
//! sequential planner: exhaustive path-combination search and a
//! spatial-conflict CBS.
//!
//! Both solvers work over the same path model as the planner: polylines over
//! cell centers whose consecutive waypoints have grid line-of-sight, with the
//! tube occupying the supercover cells of the polyline. Costs cover traversal
//! length and (optionally) risk; they are edge-additive, which is what makes
//! the low-level searches exact. Conflicts default to shared path cells;
//! `buffer_aware` additionally forbids a path entering a foreign buffer, for
//! parity with the planner's separation rule.

use crate::grid::{
    buffer_cells, supercover_visit, Cell, CostBreakdown, GridGraph, OccupancyOverlay, Route,
};
use crate::pathfinder::{CostWeights, OdEndpoints};
use crate::planner::{network_from_routes, RouteNetwork};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("route {0}: endpoint unreachable")]
    BadEndpoint(String),
    #[error("no spatially conflict-free combination exists")]
    Infeasible,
    #[error("path enumeration bound exceeded after {combinations} combinations (per-route paths: {per_route:?})")]
    BoundExceeded {
        combinations: usize,
        per_route: Vec<usize>,
    },
    #[error("timed out after {0:?} without a feasible incumbent")]
    Timeout(Duration),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Include path-in-foreign-buffer conflicts (planner parity). Off by
    /// default: pure path-cell disjointness.
    pub buffer_aware: bool,
    /// Per-route cap on enumerated paths in the exhaustive solver.
    pub max_paths_per_route: usize,
    /// Per-route cost bound as a factor of that route's unconstrained
    /// optimum; enumeration past it aborts with a bound report.
    pub cost_bound_factor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            buffer_aware: false,
            max_paths_per_route: 4096,
            cost_bound_factor: 3.0,
        }
    }
}

/// A cell two routes contend for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpatialConflict {
    pub route_a: usize,
    pub route_b: usize,
    pub cell: u32,
    pub kind: ConflictKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConflictKind {
    PathPath,
    PathBuffer,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub network: RouteNetwork,
    pub optimal: bool,
    pub nodes_expanded: usize,
}

/// One low-level path: waypoint cells, additive cost, occupied cell set.
#[derive(Debug, Clone)]
struct PathSol {
    waypoints: Vec<u32>,
    cost: f64,
    occupied: HashSet<u32>,
    buffer: HashSet<u32>,
}

fn check_deadline(deadline: Option<Instant>) -> Result<(), OracleError> {
    if let Some(d) = deadline {
        if Instant::now() > d {
            return Err(OracleError::Timeout(Duration::ZERO));
        }
    }
    Ok(())
}

/// Line-of-sight on the bare grid (ignoring overlays) with an optional
/// forbidden-cell set the traced tube must avoid.
fn grid_los(grid: &GridGraph, a: Cell, b: Cell, forbidden: Option<&HashSet<u32>>) -> bool {
    let pa = grid.center(a);
    let pb = grid.center(b);
    supercover_visit(grid, pa, pb, |c, _, _| {
        grid.thick_cells_ok(c, |idx| {
            grid.is_reachable(idx) && forbidden.map_or(true, |f| !f.contains(&idx))
        })
    })
    .expect("cell centers in bounds")
}

/// Risk-weighted cost of the edge `u -> v`, excluding `u`'s own cell so that
/// edge costs add up along a path without double-counting junctions.
fn edge_cost(grid: &GridGraph, u: Cell, v: Cell, w: &CostWeights) -> f64 {
    let pa = grid.center(u);
    let pb = grid.center(v);
    let len = crate::geometry::dist3(pa, pb);
    if w.omega_r == 0.0 {
        return len;
    }
    let mut cells: Vec<u32> = Vec::new();
    let mut seen = HashSet::new();
    supercover_visit(grid, pa, pb, |c, _, _| {
        grid.thick_cells_ok(c, |idx| {
            if seen.insert(idx) {
                cells.push(idx);
            }
            true
        });
        true
    })
    .expect("in bounds");
    cells.sort_unstable();
    let u_idx = grid.idx(u);
    let risk: f64 = cells
        .iter()
        .filter(|&&i| i != u_idx)
        .map(|&i| grid.theta(i))
        .sum();
    len + w.omega_r * w.lambda_r * risk
}

struct AStarEntry {
    f: f64,
    g: f64,
    idx: u32,
}

impl PartialEq for AStarEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for AStarEntry {}
impl PartialOrd for AStarEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for AStarEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

/// Exact shortest path in the any-angle-over-centers graph: every pair of
/// cells with line-of-sight is an edge. Exhaustive over successors, hence
/// optimal for the additive cost; only viable on small grids.
#[allow(clippy::too_many_arguments)]
fn dense_astar(
    grid: &GridGraph,
    start: Cell,
    goal: Cell,
    forbidden: &HashSet<u32>,
    banned_waypoints: &HashSet<u32>,
    banned_edges: &HashSet<(u32, u32)>,
    w: &CostWeights,
    deadline: Option<Instant>,
) -> Result<Option<(Vec<u32>, f64)>, OracleError> {
    let start_idx = grid.idx(start);
    let goal_idx = grid.idx(goal);
    let free = |c: Cell| {
        grid.thick_cells_ok(c, |i| grid.is_reachable(i) && !forbidden.contains(&i))
    };
    if !free(start) || !free(goal) || banned_waypoints.contains(&goal_idx) {
        return Ok(None);
    }
    if start_idx == goal_idx {
        return Ok(Some((vec![start_idx], 0.0)));
    }

    let n = grid.n_cells();
    let mut g: HashMap<u32, f64> = HashMap::new();
    let mut parent: HashMap<u32, u32> = HashMap::new();
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let h = |i: u32| crate::geometry::dist3(grid.center(grid.cell(i)), grid.center(goal));
    g.insert(start_idx, 0.0);
    open.push(AStarEntry {
        f: h(start_idx),
        g: 0.0,
        idx: start_idx,
    });

    while let Some(top) = open.pop() {
        let u = top.idx;
        if u == goal_idx {
            let mut path = vec![u];
            let mut cur = u;
            while let Some(&p) = parent.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(Some((path, top.g)));
        }
        if closed[u as usize] {
            continue;
        }
        closed[u as usize] = true;
        check_deadline(deadline)?;

        let u_cell = grid.cell(u);
        for v in 0..n as u32 {
            if v == u || closed[v as usize] || banned_waypoints.contains(&v) {
                continue;
            }
            if banned_edges.contains(&(u, v)) {
                continue;
            }
            let v_cell = grid.cell(v);
            if !free(v_cell) || !grid_los(grid, u_cell, v_cell, Some(forbidden)) {
                continue;
            }
            let cand = top.g + edge_cost(grid, u_cell, v_cell, w);
            if cand < g.get(&v).copied().unwrap_or(f64::INFINITY) {
                g.insert(v, cand);
                parent.insert(v, u);
                open.push(AStarEntry {
                    f: cand + h(v),
                    g: cand,
                    idx: v,
                });
            }
        }
    }
    Ok(None)
}

fn path_total_cost(grid: &GridGraph, waypoints: &[u32], w: &CostWeights) -> f64 {
    let mut cost = if w.omega_r != 0.0 {
        w.omega_r * w.lambda_r * grid.theta(waypoints[0])
    } else {
        0.0
    };
    for pair in waypoints.windows(2) {
        cost += edge_cost(grid, grid.cell(pair[0]), grid.cell(pair[1]), w);
    }
    cost
}

fn build_sol(grid: &GridGraph, waypoints: Vec<u32>, cost: f64, buffer_aware: bool) -> PathSol {
    let pts: Vec<[f64; 3]> = waypoints.iter().map(|&i| grid.center(grid.cell(i))).collect();
    let occupied = grid
        .polyline_cells(&pts)
        .expect("waypoints in bounds");
    let buffer = if buffer_aware {
        buffer_cells(&occupied, grid)
    } else {
        HashSet::new()
    };
    PathSol {
        waypoints,
        cost,
        occupied,
        buffer,
    }
}

#[derive(Clone)]
struct Candidate {
    cost: f64,
    waypoints: Vec<u32>,
}
impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // min-heap: cheapest (then lexicographically smallest) pops first
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost
            .total_cmp(&self.cost)
            .then_with(|| o.waypoints.cmp(&self.waypoints))
    }
}

/// Lazily enumerates the simple paths of one route in nondecreasing cost
/// order (Yen's algorithm over the line-of-sight graph).
struct KShortest<'g> {
    grid: &'g GridGraph,
    goal: Cell,
    w: CostWeights,
    buffer_aware: bool,
    found: Vec<PathSol>,
    candidates: BinaryHeap<Candidate>,
    emitted: HashSet<Vec<u32>>,
    cost_bound: f64,
    max_paths: usize,
    /// true when enumeration stopped because the graph has no further simple
    /// paths (as opposed to hitting the bound or cap)
    exhausted_naturally: bool,
    done: bool,
}

impl<'g> KShortest<'g> {
    fn new(
        grid: &'g GridGraph,
        od: &OdEndpoints,
        w: CostWeights,
        cfg: &OracleConfig,
        deadline: Option<Instant>,
    ) -> Result<Option<Self>, OracleError> {
        let empty = HashSet::new();
        let base = dense_astar(
            grid,
            od.start,
            od.goal,
            &empty,
            &empty,
            &HashSet::new(),
            &w,
            deadline,
        )?;
        let Some((waypoints, cost)) = base else {
            return Ok(None);
        };
        let cost_bound = cost * cfg.cost_bound_factor
            + crate::geometry::norm3(grid.cell_size()) * 2.0;
        let mut ks = KShortest {
            grid,
            goal: od.goal,
            w,
            buffer_aware: cfg.buffer_aware,
            found: Vec::new(),
            candidates: BinaryHeap::new(),
            emitted: HashSet::new(),
            cost_bound,
            max_paths: cfg.max_paths_per_route,
            exhausted_naturally: false,
            done: false,
        };
        ks.emitted.insert(waypoints.clone());
        ks.found
            .push(build_sol(grid, waypoints, cost, cfg.buffer_aware));
        Ok(Some(ks))
    }

    fn get(&mut self, k: usize, deadline: Option<Instant>) -> Result<Option<&PathSol>, OracleError> {
        while self.found.len() <= k && !self.done {
            self.expand(deadline)?;
        }
        Ok(self.found.get(k))
    }

    fn expand(&mut self, deadline: Option<Instant>) -> Result<(), OracleError> {
        if self.found.len() >= self.max_paths {
            self.done = true;
            return Ok(());
        }
        let prev: Vec<u32> = self.found.last().unwrap().waypoints.clone();
        let empty_forbidden = HashSet::new();
        for i in 0..prev.len() - 1 {
            check_deadline(deadline)?;
            let spur = prev[i];
            let root = &prev[..=i];
            let mut banned_edges: HashSet<(u32, u32)> = HashSet::new();
            for sol in &self.found {
                if sol.waypoints.len() > i && sol.waypoints[..=i] == *root {
                    banned_edges.insert((sol.waypoints[i], sol.waypoints[i + 1]));
                }
            }
            let banned_waypoints: HashSet<u32> = root[..i].iter().copied().collect();
            let spur_path = dense_astar(
                self.grid,
                self.grid.cell(spur),
                self.goal,
                &empty_forbidden,
                &banned_waypoints,
                &banned_edges,
                &self.w,
                deadline,
            )?;
            if let Some((tail, _)) = spur_path {
                let mut waypoints = root[..i].to_vec();
                waypoints.extend(tail);
                let cost = path_total_cost(self.grid, &waypoints, &self.w);
                if self.emitted.insert(waypoints.clone()) {
                    self.candidates.push(Candidate { cost, waypoints });
                }
            }
        }
        match self.candidates.pop() {
            Some(c) if c.cost <= self.cost_bound => {
                self.found
                    .push(build_sol(self.grid, c.waypoints, c.cost, self.buffer_aware));
            }
            Some(_) => {
                self.done = true; // bound clipped
            }
            None => {
                self.done = true;
                self.exhausted_naturally = true;
            }
        }
        Ok(())
    }
}

fn find_first_conflict(sols: &[&PathSol]) -> Option<SpatialConflict> {
    for i in 0..sols.len() {
        for j in (i + 1)..sols.len() {
            let shared = sols[i]
                .occupied
                .intersection(&sols[j].occupied)
                .copied()
                .min();
            if let Some(cell) = shared {
                return Some(SpatialConflict {
                    route_a: i,
                    route_b: j,
                    cell,
                    kind: ConflictKind::PathPath,
                });
            }
            let a_in_b = sols[i].occupied.intersection(&sols[j].buffer).copied().min();
            if let Some(cell) = a_in_b {
                return Some(SpatialConflict {
                    route_a: i,
                    route_b: j,
                    cell,
                    kind: ConflictKind::PathBuffer,
                });
            }
            let b_in_a = sols[j].occupied.intersection(&sols[i].buffer).copied().min();
            if let Some(cell) = b_in_a {
                return Some(SpatialConflict {
                    route_a: j,
                    route_b: i,
                    cell,
                    kind: ConflictKind::PathBuffer,
                });
            }
        }
    }
    None
}

fn sols_to_network(
    grid: &GridGraph,
    ods: &[OdEndpoints],
    sols: &[PathSol],
    w: &CostWeights,
) -> RouteNetwork {
    let routes: Vec<Route> = ods
        .iter()
        .zip(sols)
        .map(|(od, sol)| {
            let waypoints: Vec<[f64; 3]> = sol
                .waypoints
                .iter()
                .map(|&i| grid.center(grid.cell(i)))
                .collect();
            let mut path_cells: Vec<u32> = sol.occupied.iter().copied().collect();
            path_cells.sort_unstable();
            let mut buffer: Vec<u32> = sol.buffer.iter().copied().collect();
            buffer.sort_unstable();
            let operational: f64 = waypoints
                .windows(2)
                .map(|p| crate::geometry::dist3(p[0], p[1]))
                .sum();
            let raw_risk: f64 = path_cells.iter().map(|&i| grid.theta(i)).sum();
            let mean_theta = if path_cells.is_empty() {
                0.0
            } else {
                raw_risk / path_cells.len() as f64
            };
            Route {
                od_id: od.od_id.clone(),
                waypoints,
                path_cells,
                buffer_cells: buffer,
                cost: CostBreakdown {
                    operational,
                    risk: w.lambda_r * raw_risk,
                    space: 0.0,
                    total: operational + w.omega_r * w.lambda_r * raw_risk,
                    raw_risk,
                    raw_space: 0.0,
                },
                mean_theta,
            }
        })
        .collect();
    network_from_routes(0, routes, Vec::new())
}

/// Exhaustive exact solver: enumerates each route's simple paths in cost
/// order and scans path combinations in nondecreasing total cost; the first
/// spatially conflict-free combination is optimal.
pub fn brute_force_optimal(
    grid: &GridGraph,
    ods: &[OdEndpoints],
    w: &CostWeights,
    cfg: &OracleConfig,
    timeout: Option<Duration>,
) -> Result<OracleSolution, OracleError> {
    let deadline = timeout.map(|t| Instant::now() + t);
    if ods.is_empty() {
        return Ok(OracleSolution {
            network: network_from_routes(0, Vec::new(), Vec::new()),
            optimal: true,
            nodes_expanded: 0,
        });
    }
    let mut streams = Vec::with_capacity(ods.len());
    for od in ods {
        match KShortest::new(grid, od, *w, cfg, deadline)? {
            Some(s) => streams.push(s),
            None => return Err(OracleError::Infeasible),
        }
    }

    struct Combo {
        cost: f64,
        picks: Vec<usize>,
    }
    impl Eq for Combo {}
    impl PartialOrd for Combo {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Combo {
        fn cmp(&self, o: &Self) -> Ordering {
            o.cost
                .total_cmp(&self.cost)
                .then_with(|| o.picks.cmp(&self.picks))
        }
    }
    impl PartialEq for Combo {
        fn eq(&self, o: &Self) -> bool {
            self.cmp(o) == Ordering::Equal
        }
    }

    let root_cost: f64 = streams.iter().map(|s| s.found[0].cost).sum();
    let mut heap = BinaryHeap::new();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let root = vec![0usize; ods.len()];
    visited.insert(root.clone());
    heap.push(Combo {
        cost: root_cost,
        picks: root,
    });
    let mut expanded = 0usize;

    while let Some(combo) = heap.pop() {
        check_deadline(deadline)?;
        expanded += 1;
        let sols: Vec<&PathSol> = combo
            .picks
            .iter()
            .zip(streams.iter())
            .map(|(&k, s)| &s.found[k])
            .collect();
        if find_first_conflict(&sols).is_none() {
            let owned: Vec<PathSol> = sols.into_iter().cloned().collect();
            return Ok(OracleSolution {
                network: sols_to_network(grid, ods, &owned, w),
                optimal: true,
                nodes_expanded: expanded,
            });
        }
        for r in 0..ods.len() {
            let mut picks = combo.picks.clone();
            picks[r] += 1;
            if visited.contains(&picks) {
                continue;
            }
            if streams[r].get(picks[r], deadline)?.is_some() {
                let cost: f64 = picks
                    .iter()
                    .zip(streams.iter())
                    .map(|(&k, s)| s.found[k].cost)
                    .sum();
                visited.insert(picks.clone());
                heap.push(Combo { cost, picks });
            }
        }
    }

    if streams.iter().all(|s| s.exhausted_naturally) {
        Err(OracleError::Infeasible)
    } else {
        Err(OracleError::BoundExceeded {
            combinations: expanded,
            per_route: streams.iter().map(|s| s.found.len()).collect(),
        })
    }
}

struct CtNode {
    constraints: Vec<(usize, u32)>,
    sols: Vec<PathSol>,
}

struct CtEntry {
    cost: f64,
    n_constraints: usize,
    order: usize,
}
impl PartialEq for CtEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for CtEntry {}
impl PartialOrd for CtEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for CtEntry {
    // min cost, then fewer constraints, then insertion order
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost
            .total_cmp(&self.cost)
            .then(o.n_constraints.cmp(&self.n_constraints))
            .then(o.order.cmp(&self.order))
    }
}

fn cells_within_buffer_radius(grid: &GridGraph, cell: u32) -> Vec<u32> {
    let [rx, ry, rz] = grid.r_buf();
    let [nx, ny, nz] = grid.dims();
    let c = grid.cell(cell);
    let mut out = Vec::new();
    for z in c.z.saturating_sub(rz)..=(c.z + rz).min(nz - 1) {
        for y in c.y.saturating_sub(ry)..=(c.y + ry).min(ny - 1) {
            for x in c.x.saturating_sub(rx)..=(c.x + rx).min(nx - 1) {
                out.push(grid.idx(Cell::new(x, y, z)));
            }
        }
    }
    out
}

/// Conflict-based search over spatial conflicts: the high level maintains a
/// constraint tree ordered by solution cost; the low level replans a single
/// route optimally under its forbidden cells. Returns the optimal
/// conflict-free network, or the best incumbent found when the timeout hits.
pub fn cbs_spatial(
    grid: &GridGraph,
    ods: &[OdEndpoints],
    w: &CostWeights,
    timeout: Duration,
    cfg: &OracleConfig,
) -> Result<OracleSolution, OracleError> {
    let started = Instant::now();
    let deadline = Some(started + timeout);
    if ods.is_empty() {
        return Ok(OracleSolution {
            network: network_from_routes(0, Vec::new(), Vec::new()),
            optimal: true,
            nodes_expanded: 0,
        });
    }

    let plan_route = |od: &OdEndpoints,
                      forbidden: &HashSet<u32>|
     -> Result<Option<PathSol>, OracleError> {
        let empty_nodes = HashSet::new();
        let empty_edges = HashSet::new();
        Ok(dense_astar(
            grid,
            od.start,
            od.goal,
            forbidden,
            &empty_nodes,
            &empty_edges,
            w,
            deadline,
        )?
        .map(|(wp, cost)| build_sol(grid, wp, cost, cfg.buffer_aware)))
    };

    let forbidden_of = |constraints: &[(usize, u32)], route: usize| -> HashSet<u32> {
        constraints
            .iter()
            .filter(|(r, _)| *r == route)
            .map(|(_, c)| *c)
            .collect()
    };

    let mut root_sols = Vec::with_capacity(ods.len());
    for od in ods {
        match plan_route(od, &HashSet::new()) {
            Ok(Some(s)) => root_sols.push(s),
            Ok(None) => return Err(OracleError::Infeasible),
            Err(e) => return Err(e),
        }
    }
    let root_cost: f64 = root_sols.iter().map(|s| s.cost).sum();
    let mut nodes: Vec<CtNode> = vec![CtNode {
        constraints: Vec::new(),
        sols: root_sols,
    }];
    let mut open = BinaryHeap::new();
    open.push(CtEntry {
        cost: root_cost,
        n_constraints: 0,
        order: 0,
    });
    let mut incumbent: Option<(f64, Vec<PathSol>)> = None;
    let mut expanded = 0usize;

    while let Some(entry) = open.pop() {
        if Instant::now() > deadline.unwrap() {
            return match incumbent {
                Some((_, sols)) => Ok(OracleSolution {
                    network: sols_to_network(grid, ods, &sols, w),
                    optimal: false,
                    nodes_expanded: expanded,
                }),
                None => Err(OracleError::Timeout(started.elapsed())),
            };
        }
        expanded += 1;
        let node_idx = entry.order;
        let conflict = {
            let refs: Vec<&PathSol> = nodes[node_idx].sols.iter().collect();
            find_first_conflict(&refs)
        };
        let Some(conflict) = conflict else {
            return Ok(OracleSolution {
                network: sols_to_network(grid, ods, &nodes[node_idx].sols, w),
                optimal: true,
                nodes_expanded: expanded,
            });
        };

        // two children: each involved route is barred from the conflict cell
        // (for a buffer conflict, the buffer owner must keep its path a full
        // buffer radius away from the cell instead)
        let branches: [(usize, Vec<u32>); 2] = match conflict.kind {
            ConflictKind::PathPath => [
                (conflict.route_a, vec![conflict.cell]),
                (conflict.route_b, vec![conflict.cell]),
            ],
            ConflictKind::PathBuffer => [
                (conflict.route_a, vec![conflict.cell]),
                (
                    conflict.route_b,
                    cells_within_buffer_radius(grid, conflict.cell),
                ),
            ],
        };

        for (route, cells) in branches {
            let mut constraints = nodes[node_idx].constraints.clone();
            for &c in &cells {
                constraints.push((route, c));
            }
            let forbidden = forbidden_of(&constraints, route);
            match plan_route(&ods[route], &forbidden) {
                Ok(Some(new_sol)) => {
                    let mut sols = nodes[node_idx].sols.clone();
                    sols[route] = new_sol;
                    let cost: f64 = sols.iter().map(|s| s.cost).sum();
                    let conflict_free = {
                        let refs: Vec<&PathSol> = sols.iter().collect();
                        find_first_conflict(&refs).is_none()
                    };
                    if conflict_free
                        && incumbent.as_ref().map_or(true, |(c, _)| cost < *c)
                    {
                        incumbent = Some((cost, sols.clone()));
                    }
                    let order = nodes.len();
                    let n_constraints = constraints.len();
                    nodes.push(CtNode { constraints, sols });
                    open.push(CtEntry {
                        cost,
                        n_constraints,
                        order,
                    });
                }
                Ok(None) => {} // this branch is unsolvable, prune
                Err(OracleError::Timeout(_)) => {
                    return match incumbent {
                        Some((_, sols)) => Ok(OracleSolution {
                            network: sols_to_network(grid, ods, &sols, w),
                            optimal: false,
                            nodes_expanded: expanded,
                        }),
                        None => Err(OracleError::Timeout(started.elapsed())),
                    };
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(OracleError::Infeasible)
}

/// Shortest 26-connected (8-connected on single-layer grids) grid path over
/// the overlay, moving between adjacent cell centers with the same
/// supercover traversability rule the planner uses. Returns its length.
pub fn grid_astar_octile(
    overlay: &OccupancyOverlay,
    start: Cell,
    goal: Cell,
) -> Option<f64> {
    let grid = overlay.grid();
    if !overlay.cell_free_for_path(start) || !overlay.cell_free_for_path(goal) {
        return None;
    }
    let start_idx = grid.idx(start);
    let goal_idx = grid.idx(goal);
    let [nx, ny, nz] = grid.dims();
    let mut g: HashMap<u32, f64> = HashMap::new();
    let mut closed = vec![false; grid.n_cells()];
    let mut open = BinaryHeap::new();
    let h = |i: u32| crate::geometry::dist3(grid.center(grid.cell(i)), grid.center(goal));
    g.insert(start_idx, 0.0);
    open.push(AStarEntry {
        f: h(start_idx),
        g: 0.0,
        idx: start_idx,
    });
    while let Some(top) = open.pop() {
        let u = top.idx;
        if u == goal_idx {
            return Some(top.g);
        }
        if closed[u as usize] {
            continue;
        }
        closed[u as usize] = true;
        let c = grid.cell(u);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (x, y, z) = (c.x as i64 + dx, c.y as i64 + dy, c.z as i64 + dz);
                    if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64
                    {
                        continue;
                    }
                    let v_cell = Cell::new(x as usize, y as usize, z as usize);
                    let v = grid.idx(v_cell);
                    if closed[v as usize] || !overlay.line_of_sight(c, v_cell) {
                        continue;
                    }
                    let cand = top.g + crate::geometry::dist3(grid.center(c), grid.center(v_cell));
                    if cand < g.get(&v).copied().unwrap_or(f64::INFINITY) {
                        g.insert(v, cand);
                        open.push(AStarEntry {
                            f: cand + h(v),
                            g: cand,
                            idx: v,
                        });
                    }
                }
            }
        }
    }
    None
}

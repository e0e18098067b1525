//! Network planning: for each ordered demand sequence, plan routes one by one
//! over a fresh overlay (earlier routes become impassable), then keep the
//! cheapest feasible network that also passes the per-route risk check.

use crate::grid::{CostBreakdown, GridGraph, OccupancyOverlay, Route};
use crate::pathfinder::{calibrate_lambdas, find_path, CostWeights, OdEndpoints, PathError};
use crate::prioritizer::{generate_sequences, ODSequence, PrioritySpec};
use crate::scenario::ODRequest;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("request {request}: vertiport {vertiport} resolves to no grid cell")]
    UnresolvedVertiport { request: String, vertiport: String },
    #[error("request {request}: unknown in demand set")]
    UnknownRequest { request: String },
    #[error("fail to generate a feasible route network")]
    NoFeasibleNetwork { summaries: Vec<SequenceSummary> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub weights: CostWeights,
    /// Calibrate `lambda_r`/`lambda_p` per OD from a conflict-free baseline
    /// search; when false the values in `weights` are used as-is.
    pub calibrate: bool,
    /// Per-route risk acceptance threshold on mean path-cell theta.
    pub theta_max: f64,
    /// Evaluate the K sequences on a thread pool. Off by default so wall
    /// time scales linearly with K.
    pub parallel: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            weights: CostWeights::default(),
            calibrate: true,
            theta_max: 1.5,
            parallel: false,
        }
    }
}

/// Cell-count accounting over a whole network; unions over routes, so shared
/// buffer cells count once and buffer cells never double-count path cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct Occupancy {
    pub path_cells: usize,
    pub buffer_cells: usize,
    pub total_occupied: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteNetwork {
    pub sequence_index: usize,
    pub routes: Vec<Route>,
    pub totals: CostBreakdown,
    pub occupancy: Occupancy,
    pub feasible: bool,
    /// OD ids for which no path was found, in sequence order.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceSummary {
    pub sequence_index: usize,
    pub total_cost: f64,
    pub feasible: bool,
    pub risk_ok: bool,
    pub failures: Vec<String>,
    pub occupancy: Occupancy,
}

#[derive(Debug, Clone)]
pub struct PlanReport {
    pub network: RouteNetwork,
    pub summaries: Vec<SequenceSummary>,
    pub sequences: Vec<ODSequence>,
    /// Per-route risk verdicts for the chosen network.
    pub risk_results: Vec<(String, bool)>,
    pub duplicate_sequences: bool,
}

/// Maps a request to grid cells via the vertiport anchors.
pub fn resolve_endpoints(grid: &GridGraph, request: &ODRequest) -> Result<OdEndpoints, PlanError> {
    let anchor = |vertiport: &str| {
        grid.vertiport_anchor(vertiport)
            .ok_or_else(|| PlanError::UnresolvedVertiport {
                request: request.id.clone(),
                vertiport: vertiport.to_string(),
            })
    };
    Ok(OdEndpoints {
        od_id: request.id.clone(),
        start: anchor(&request.origin_vertiport)?,
        goal: anchor(&request.dest_vertiport)?,
    })
}

/// Assembles a network from planned routes, computing the cost totals and
/// the union-based occupancy accounting.
pub fn network_from_routes(
    sequence_index: usize,
    routes: Vec<Route>,
    failures: Vec<String>,
) -> RouteNetwork {
    let mut totals = CostBreakdown::default();
    let mut path_union: HashSet<u32> = HashSet::new();
    let mut buffer_union: HashSet<u32> = HashSet::new();
    for r in &routes {
        totals.accumulate(&r.cost);
        path_union.extend(r.path_cells.iter().copied());
        buffer_union.extend(r.buffer_cells.iter().copied());
    }
    let buffer_only = buffer_union.difference(&path_union).count();
    let occupancy = Occupancy {
        path_cells: path_union.len(),
        buffer_cells: buffer_only,
        total_occupied: path_union.len() + buffer_only,
    };
    RouteNetwork {
        sequence_index,
        feasible: failures.is_empty(),
        routes,
        totals,
        occupancy,
        failures,
    }
}

/// Plans one ordered sequence over a fresh overlay. A failed OD is recorded
/// and planning continues with the remaining ODs; failures are data here,
/// not errors.
pub fn plan_sequence(
    grid: &GridGraph,
    ods: &[OdEndpoints],
    weights_by_od: &HashMap<String, CostWeights>,
    sequence_index: usize,
) -> RouteNetwork {
    let mut overlay = OccupancyOverlay::new(grid);
    let mut routes = Vec::new();
    let mut failures = Vec::new();
    for od in ods {
        let w = weights_by_od
            .get(&od.od_id)
            .copied()
            .unwrap_or_default();
        match find_path(&overlay, od, &w) {
            Ok(route) => {
                overlay
                    .apply_route(&route)
                    .expect("freshly planned route occupies free cells");
                routes.push(route);
            }
            Err(PathError::NoPath { .. }) | Err(PathError::InvalidEndpoint { .. }) => {
                failures.push(od.od_id.clone());
            }
            Err(_) => failures.push(od.od_id.clone()),
        }
    }
    network_from_routes(sequence_index, routes, failures)
}

/// Per-route risk verdicts: a route fails when the mean theta over its path
/// cells exceeds the threshold. An empty network passes.
pub fn risk_check(network: &RouteNetwork, theta_max: f64) -> Vec<(String, bool)> {
    network
        .routes
        .iter()
        .map(|r| (r.od_id.clone(), r.mean_theta <= theta_max))
        .collect()
}

pub fn network_risk_ok(network: &RouteNetwork, theta_max: f64) -> bool {
    risk_check(network, theta_max).iter().all(|(_, ok)| *ok)
}

/// Runs the full pipeline: generate K sequences, plan each, drop networks
/// that are infeasible or fail the risk check, return the one with the
/// lowest total cost (ties to the lowest sequence index). All K summaries
/// are reported alongside.
pub fn plan_network(
    grid: &GridGraph,
    requests: &[ODRequest],
    priority: &PrioritySpec,
    cfg: &PlannerConfig,
) -> Result<PlanReport, PlanError> {
    let mut endpoints: HashMap<String, OdEndpoints> = HashMap::new();
    for r in requests {
        endpoints.insert(r.id.clone(), resolve_endpoints(grid, r)?);
    }

    let mut weights_by_od: HashMap<String, CostWeights> = HashMap::new();
    for r in requests {
        let mut w = cfg.weights;
        if cfg.calibrate {
            // uncalibratable ODs keep the configured scaling; they will fail
            // during sequence planning anyway if no path exists at all
            if let Ok((lr, lp)) = calibrate_lambdas(grid, &endpoints[&r.id], &w) {
                w.lambda_r = lr;
                w.lambda_p = lp;
            }
        }
        weights_by_od.insert(r.id.clone(), w);
    }

    let set = generate_sequences(requests, priority);
    let ordered: Vec<Vec<OdEndpoints>> = set
        .sequences
        .iter()
        .map(|seq| {
            seq.ids
                .iter()
                .map(|id| endpoints[id].clone())
                .collect::<Vec<_>>()
        })
        .collect();

    let networks: Vec<RouteNetwork> = if cfg.parallel {
        ordered
            .par_iter()
            .enumerate()
            .map(|(k, ods)| plan_sequence(grid, ods, &weights_by_od, k))
            .collect()
    } else {
        ordered
            .iter()
            .enumerate()
            .map(|(k, ods)| plan_sequence(grid, ods, &weights_by_od, k))
            .collect()
    };

    let summaries: Vec<SequenceSummary> = networks
        .iter()
        .map(|n| SequenceSummary {
            sequence_index: n.sequence_index,
            total_cost: n.totals.total,
            feasible: n.feasible,
            risk_ok: network_risk_ok(n, cfg.theta_max),
            failures: n.failures.clone(),
            occupancy: n.occupancy,
        })
        .collect();

    let best = networks
        .into_iter()
        .zip(summaries.iter())
        .filter(|(_, s)| s.feasible && s.risk_ok)
        .min_by(|(a, _), (b, _)| {
            a.totals
                .total
                .total_cmp(&b.totals.total)
                .then(a.sequence_index.cmp(&b.sequence_index))
        })
        .map(|(n, _)| n);

    match best {
        Some(network) => {
            let risk_results = risk_check(&network, cfg.theta_max);
            Ok(PlanReport {
                network,
                summaries,
                sequences: set.sequences,
                risk_results,
                duplicate_sequences: set.contains_duplicates,
            })
        }
        None => Err(PlanError::NoFeasibleNetwork { summaries }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    PathPath,
    PathBuffer,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationViolation {
    pub route_a: String,
    pub route_b: String,
    pub cell: u32,
    pub kind: ViolationKind,
}

/// Post-hoc separation audit: no two routes may share a path cell, and no
/// route's path may enter another route's buffer zone. Buffer-buffer overlap
/// is legal and not reported.
pub fn check_separation(network: &RouteNetwork) -> Vec<SeparationViolation> {
    let mut out = Vec::new();
    let routes = &network.routes;
    for i in 0..routes.len() {
        for j in (i + 1)..routes.len() {
            let (a, b) = (&routes[i], &routes[j]);
            let b_path = b.path_cell_set();
            for &c in &a.path_cells {
                if b_path.contains(&c) {
                    out.push(SeparationViolation {
                        route_a: a.od_id.clone(),
                        route_b: b.od_id.clone(),
                        cell: c,
                        kind: ViolationKind::PathPath,
                    });
                }
            }
            let b_buf = b.buffer_cell_set();
            for &c in &a.path_cells {
                if b_buf.contains(&c) {
                    out.push(SeparationViolation {
                        route_a: a.od_id.clone(),
                        route_b: b.od_id.clone(),
                        cell: c,
                        kind: ViolationKind::PathBuffer,
                    });
                }
            }
            let a_buf = a.buffer_cell_set();
            for &c in &b.path_cells {
                if a_buf.contains(&c) {
                    out.push(SeparationViolation {
                        route_a: b.od_id.clone(),
                        route_b: a.od_id.clone(),
                        cell: c,
                        kind: ViolationKind::PathBuffer,
                    });
                }
            }
        }
    }
    out
}

/// Number of buffer cells shared between at least two routes of the network.
pub fn shared_buffer_cells(network: &RouteNetwork) -> usize {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for r in &network.routes {
        for &c in &r.buffer_cells {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts.values().filter(|&&n| n > 1).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discretize, OccupancyOverlay};
    use crate::scenario::load_scenario;

    const TOY: &str = include_str!("../../../assets/toy_scenario.json");

    fn toy_setup(n_ods: usize) -> (GridGraph, Vec<ODRequest>) {
        let scenario = load_scenario(TOY.as_bytes()).unwrap();
        let grid = discretize(&scenario, [1.0, 1.0, 1.0]).unwrap();
        let requests = scenario.od_requests[..n_ods].to_vec();
        (grid, requests)
    }

    fn toy_config(omega_p: f64) -> PlannerConfig {
        PlannerConfig {
            weights: CostWeights {
                omega_r: 0.0,
                omega_p,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn toy_priority() -> PrioritySpec {
        PrioritySpec {
            epsilon_v: 50.0,
            k: 1,
            rng_seed: 0,
        }
    }

    #[test]
    fn toy_three_routes_split_without_space_cost() {
        let (grid, requests) = toy_setup(3);
        let report = plan_network(&grid, &requests, &toy_priority(), &toy_config(0.0)).unwrap();
        let net = &report.network;
        assert!(net.feasible, "failures: {:?}", net.failures);
        assert_eq!(net.routes.len(), 3);
        // without the space cost no two routes share buffer cells
        assert_eq!(shared_buffer_cells(net), 0);
        assert!(check_separation(net).is_empty());
    }

    #[test]
    fn toy_three_routes_bundle_with_space_cost() {
        let (grid, requests) = toy_setup(3);
        let without = plan_network(&grid, &requests, &toy_priority(), &toy_config(0.0))
            .unwrap()
            .network;
        let with = plan_network(&grid, &requests, &toy_priority(), &toy_config(1.0))
            .unwrap()
            .network;
        assert!(with.feasible && without.feasible);
        assert!(
            with.occupancy.total_occupied < without.occupancy.total_occupied,
            "expected occupancy reduction, got {} vs {}",
            with.occupancy.total_occupied,
            without.occupancy.total_occupied
        );
        assert!(shared_buffer_cells(&with) > 0);
        assert!(check_separation(&with).is_empty());
    }

    #[test]
    fn toy_five_routes_fail_without_space_cost_and_succeed_with() {
        let (grid, requests) = toy_setup(5);
        let err = plan_network(&grid, &requests, &toy_priority(), &toy_config(0.0));
        match err {
            Err(PlanError::NoFeasibleNetwork { summaries }) => {
                assert!(!summaries[0].failures.is_empty());
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
        let with = plan_network(&grid, &requests, &toy_priority(), &toy_config(1.0)).unwrap();
        assert!(with.network.feasible);
        assert_eq!(with.network.routes.len(), 5);
        assert!(check_separation(&with.network).is_empty());
    }

    #[test]
    fn k1_equals_plan_sequence() {
        let (grid, requests) = toy_setup(3);
        let cfg = toy_config(1.0);
        let report = plan_network(&grid, &requests, &toy_priority(), &cfg).unwrap();
        let ods: Vec<OdEndpoints> = report.sequences[0]
            .ids
            .iter()
            .map(|id| {
                let r = requests.iter().find(|r| &r.id == id).unwrap();
                resolve_endpoints(&grid, r).unwrap()
            })
            .collect();
        let mut weights = HashMap::new();
        for od in &ods {
            let mut w = cfg.weights;
            let (lr, lp) = calibrate_lambdas(&grid, od, &w).unwrap();
            w.lambda_r = lr;
            w.lambda_p = lp;
            weights.insert(od.od_id.clone(), w);
        }
        let direct = plan_sequence(&grid, &ods, &weights, 0);
        assert_eq!(direct.totals.total, report.network.totals.total);
        assert_eq!(direct.occupancy, report.network.occupancy);
    }

    #[test]
    fn replaying_routes_reproduces_overlay_state() {
        let (grid, requests) = toy_setup(3);
        let report = plan_network(&grid, &requests, &toy_priority(), &toy_config(1.0)).unwrap();
        let mut overlay = OccupancyOverlay::new(&grid);
        for route in &report.network.routes {
            overlay.apply_route(route).unwrap();
        }
        let occupied: usize = overlay.occupied_count();
        assert_eq!(occupied, report.network.occupancy.path_cells);
        let reserved_not_path = (0..grid.n_cells() as u32)
            .filter(|&i| overlay.is_buffer_reserved(i) && !overlay.is_path_occupied(i))
            .count();
        assert_eq!(reserved_not_path, report.network.occupancy.buffer_cells);
    }

    #[test]
    fn occupancy_identity_holds() {
        let (grid, requests) = toy_setup(5);
        let report = plan_network(&grid, &requests, &toy_priority(), &toy_config(1.0)).unwrap();
        let net = &report.network;
        let mut path_union = HashSet::new();
        let mut buffer_union = HashSet::new();
        for r in &net.routes {
            path_union.extend(r.path_cells.iter().copied());
            buffer_union.extend(r.buffer_cells.iter().copied());
        }
        let buffer_only = buffer_union.difference(&path_union).count();
        assert_eq!(net.occupancy.path_cells, path_union.len());
        assert_eq!(net.occupancy.buffer_cells, buffer_only);
        assert_eq!(
            net.occupancy.total_occupied,
            path_union.len() + buffer_only
        );
    }

    #[test]
    fn risk_check_thresholds() {
        let (grid, requests) = toy_setup(3);
        let report = plan_network(&grid, &requests, &toy_priority(), &toy_config(0.0)).unwrap();
        // uniform theta=1 everywhere in the toy
        assert!(network_risk_ok(&report.network, 1.5));
        let results = risk_check(&report.network, 0.5);
        assert!(results.iter().all(|(_, ok)| !ok));
        let empty = network_from_routes(0, Vec::new(), Vec::new());
        assert!(network_risk_ok(&empty, 0.1));
    }

    #[test]
    fn unresolved_vertiport_is_an_error() {
        let (grid, mut requests) = toy_setup(2);
        requests[0].origin_vertiport = "nowhere".into();
        assert!(matches!(
            plan_network(&grid, &requests, &toy_priority(), &toy_config(0.0)),
            Err(PlanError::UnresolvedVertiport { .. })
        ));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let (grid, requests) = toy_setup(5);
        let priority = PrioritySpec {
            epsilon_v: 5000.0, // one big segment: shuffles matter
            k: 4,
            rng_seed: 11,
        };
        let seq_cfg = toy_config(1.0);
        let par_cfg = PlannerConfig {
            parallel: true,
            ..seq_cfg
        };
        let a = plan_network(&grid, &requests, &priority, &seq_cfg);
        let b = plan_network(&grid, &requests, &priority, &par_cfg);
        match (a, b) {
            (Ok(ra), Ok(rb)) => {
                assert_eq!(ra.network.sequence_index, rb.network.sequence_index);
                assert_eq!(ra.network.totals.total, rb.network.totals.total);
            }
            (Err(PlanError::NoFeasibleNetwork { .. }), Err(PlanError::NoFeasibleNetwork { .. })) => {}
            other => panic!("parallel/sequential disagree: {other:?}"),
        }
    }
}

use tubeplan_core::grid::{discretize, OccupancyOverlay};
use tubeplan_core::pathfinder::{calibrate_lambdas, CostWeights};
use tubeplan_core::planner::{plan_network, resolve_endpoints, PlannerConfig};
use tubeplan_core::prioritizer::PrioritySpec;
use tubeplan_core::scenario::load_scenario;

fn main() {
    let toy = std::fs::read("assets/toy_scenario.json").unwrap();
    let scenario = load_scenario(&toy).unwrap();
    let grid = discretize(&scenario, [1.0, 1.0, 1.0]).unwrap();
    println!("dims {:?} reachable {}", grid.dims(), grid.reachable_count());
    {
        let overlay = OccupancyOverlay::new(&grid);
        println!("{}", overlay.layer_ascii(0));
    }
    let requests = scenario.od_requests[..3].to_vec();
    for r in &requests {
        let od = resolve_endpoints(&grid, r).unwrap();
        let (lr, lp) = calibrate_lambdas(&grid, &od, &CostWeights::default()).unwrap();
        println!("{}: start {:?} goal {:?} lambda_r {lr:.3} lambda_p {lp:.3}", r.id, od.start, od.goal);
    }
    for omega_p in [0.0, 1.0] {
        let cfg = PlannerConfig {
            weights: CostWeights { omega_r: 0.0, omega_p, ..Default::default() },
            ..Default::default()
        };
        let pr = plan_network(&grid, &requests, &PrioritySpec { epsilon_v: 50.0, k: 1, rng_seed: 0 }, &cfg);
        match pr {
            Ok(rep) => {
                println!("== omega_p={omega_p} total={:.2} occ={:?}", rep.network.totals.total, rep.network.occupancy);
                for r in &rep.network.routes {
                    println!("  {} len {:.2} wp {:?}", r.od_id, r.cost.operational,
                        r.waypoints.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>());
                }
                let mut overlay = OccupancyOverlay::new(&grid);
                for r in &rep.network.routes { overlay.apply_route(r).unwrap(); }
                println!("{}", overlay.layer_ascii(0));
            }
            Err(e) => println!("== omega_p={omega_p} ERROR {e}"),
        }
    }
}

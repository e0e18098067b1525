use std::time::{Duration, Instant};
use tubeplan_core::grid::{discretize_with, Cell, DiscretizeOptions};
use tubeplan_core::oracle::{brute_force_optimal, cbs_spatial, OracleConfig};
use tubeplan_core::pathfinder::{CostWeights, OdEndpoints};
use tubeplan_core::scenario::{Bounds3, Scenario};

fn main() {
    let scenario = Scenario {
        bounds: Bounds3 { min: [0.0, 0.0, 0.0], max: [16.0, 16.0, 1.0] },
        flyable_band: [0.0, 1.0],
        vertiports: vec![],
        obstacles: vec![
            tubeplan_core::scenario::ObstaclePrism {
                id: "funnel_lo".into(),
                footprint: vec![[6.2, -0.5], [9.8, -0.5], [9.8, 4.8], [6.2, 4.8]],
                lowest_alt: 0.0,
                highest_alt: 1.0,
            },
            tubeplan_core::scenario::ObstaclePrism {
                id: "funnel_hi".into(),
                footprint: vec![[6.2, 10.2], [9.8, 10.2], [9.8, 16.5], [6.2, 16.5]],
                lowest_alt: 0.0,
                highest_alt: 1.0,
            },
        ],
        risk_zones: vec![],
        od_requests: vec![],
        geo_origin: None,
    };
    let grid = discretize_with(&scenario, [1.0, 1.0, 1.0], DiscretizeOptions { obstacle_margin: Some(0.0), ..Default::default() }).unwrap();
    let w = CostWeights { omega_r: 0.0, omega_p: 0.0, ..Default::default() };
    let ods = vec![
        OdEndpoints { od_id: "a".into(), start: Cell::new(0, 2, 0), goal: Cell::new(15, 3, 0) },
        OdEndpoints { od_id: "b".into(), start: Cell::new(0, 7, 0), goal: Cell::new(15, 8, 0) },
        OdEndpoints { od_id: "c".into(), start: Cell::new(0, 12, 0), goal: Cell::new(15, 13, 0) },
    ];
    let t0 = Instant::now();
    let cbs = cbs_spatial(&grid, &ods, &w, Duration::from_secs(120), &OracleConfig::default()).unwrap();
    println!("cbs: {:.3} (opt {}) in {:?} expanded {}", cbs.network.totals.total, cbs.optimal, t0.elapsed(), cbs.nodes_expanded);
    let t0 = Instant::now();
    let bf = brute_force_optimal(&grid, &ods, &w, &OracleConfig::default(), Some(Duration::from_secs(300))).unwrap();
    println!("brute: {:.3} in {:?} combos {}", bf.network.totals.total, t0.elapsed(), bf.nodes_expanded);
}

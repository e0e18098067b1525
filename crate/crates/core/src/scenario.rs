//! Environment description and demand set: definition, validation, loading,
//! serialization, and parsing of 2D octile benchmark maps.
//!
//! Scenario documents are JSON with top-level keys `bounds`, `flyable_band`,
//! `vertiports`, `obstacles`, `risk_zones`, `od_requests`. Coordinates are a
//! local metric ENU frame. If the optional `geo_origin: [lat, lon]` key is
//! present, vertiport positions and polygon vertices are read as
//! `[lat, lon, ...]` and converted with an equirectangular projection about
//! that origin on load.

use crate::geometry::{normalize_ccw, polygon_is_simple, Point2, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error for {entity}: {reason}")]
    Validation { entity: String, reason: String },
    #[error("map format error at line {line}: {reason}")]
    MapFormat { line: usize, reason: String },
    #[error("request {request}: unknown vertiport id {vertiport}")]
    UnknownVertiport { request: String, vertiport: String },
    #[error("request {request}: origin equals destination")]
    SameEndpoints { request: String },
    #[error("request {request}: vertiport {vertiport} is not {role}-capable")]
    NotCapable {
        request: String,
        vertiport: String,
        role: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds3 {
    pub min: Point3,
    pub max: Point3,
}

impl Bounds3 {
    pub fn extent(&self) -> Point3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertiportKind {
    OriginCapable,
    DestinationCapable,
    Both,
}

impl Default for VertiportKind {
    fn default() -> Self {
        VertiportKind::Both
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertiport {
    pub id: String,
    pub position: Point3,
    pub radius: f64,
    #[serde(default)]
    pub kind: VertiportKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePrism {
    pub id: String,
    pub footprint: Vec<Point2>,
    pub lowest_alt: f64,
    pub highest_alt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskZone {
    pub id: String,
    pub footprint: Vec<Point2>,
    pub theta_risk: f64,
}

/// Urgency level of a delivery demand, most to least urgent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Urgency {
    Urgent,
    Important,
    Normal,
    Low,
}

impl Urgency {
    pub const ALL: [Urgency; 4] = [
        Urgency::Urgent,
        Urgency::Important,
        Urgency::Normal,
        Urgency::Low,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ODRequest {
    pub id: String,
    pub origin_vertiport: String,
    pub dest_vertiport: String,
    pub urgency: Urgency,
    /// Expected profit; may be negative.
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bounds: Bounds3,
    /// `[z_min, z_max]` of the altitude band drones may use.
    pub flyable_band: [f64; 2],
    #[serde(default)]
    pub vertiports: Vec<Vertiport>,
    #[serde(default)]
    pub obstacles: Vec<ObstaclePrism>,
    #[serde(default)]
    pub risk_zones: Vec<RiskZone>,
    #[serde(default)]
    pub od_requests: Vec<ODRequest>,
    /// When present in the input document, coordinates were geodetic and have
    /// been projected; cleared after load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo_origin: Option<[f64; 2]>,
}

const EARTH_RADIUS_M: f64 = 6_371_000.0;

fn project_equirectangular(origin: [f64; 2], lat: f64, lon: f64) -> Point2 {
    let lat0 = origin[0].to_radians();
    let x = (lon - origin[1]).to_radians() * lat0.cos() * EARTH_RADIUS_M;
    let y = (lat - origin[0]).to_radians() * EARTH_RADIUS_M;
    [x, y]
}

impl Scenario {
    pub fn vertiport(&self, id: &str) -> Option<&Vertiport> {
        self.vertiports.iter().find(|v| v.id == id)
    }

    fn apply_geo_projection(&mut self) {
        let Some(origin) = self.geo_origin.take() else {
            return;
        };
        for v in &mut self.vertiports {
            let [x, y] = project_equirectangular(origin, v.position[0], v.position[1]);
            v.position = [x, y, v.position[2]];
        }
        let project_ring = |ring: &mut Vec<Point2>| {
            for p in ring.iter_mut() {
                *p = project_equirectangular(origin, p[0], p[1]);
            }
        };
        for o in &mut self.obstacles {
            project_ring(&mut o.footprint);
        }
        for r in &mut self.risk_zones {
            project_ring(&mut r.footprint);
        }
        let [x0, y0] = project_equirectangular(origin, self.bounds.min[0], self.bounds.min[1]);
        let [x1, y1] = project_equirectangular(origin, self.bounds.max[0], self.bounds.max[1]);
        self.bounds = Bounds3 {
            min: [x0.min(x1), y0.min(y1), self.bounds.min[2]],
            max: [x0.max(x1), y0.max(y1), self.bounds.max[2]],
        };
    }

    fn normalize(&mut self) {
        self.apply_geo_projection();
        for o in &mut self.obstacles {
            normalize_ccw(&mut o.footprint);
        }
        for r in &mut self.risk_zones {
            normalize_ccw(&mut r.footprint);
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |entity: &str, reason: String| ScenarioError::Validation {
            entity: entity.to_string(),
            reason,
        };
        let [z_lo, z_hi] = self.flyable_band;
        if z_lo >= z_hi {
            return Err(err("flyable_band", format!("z_min {z_lo} >= z_max {z_hi}")));
        }
        if z_lo < self.bounds.min[2] || z_hi > self.bounds.max[2] {
            return Err(err(
                "flyable_band",
                format!(
                    "band [{z_lo}, {z_hi}] not within bounds z-range [{}, {}]",
                    self.bounds.min[2], self.bounds.max[2]
                ),
            ));
        }
        for i in 0..3 {
            if self.bounds.min[i] >= self.bounds.max[i] {
                return Err(err("bounds", format!("empty extent on axis {i}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for v in &self.vertiports {
            if !seen.insert(v.id.as_str()) {
                return Err(err(&v.id, "duplicate vertiport id".into()));
            }
            if v.radius < 0.0 {
                return Err(err(&v.id, format!("negative radius {}", v.radius)));
            }
            if !self.bounds.contains(v.position) {
                return Err(err(&v.id, "position outside scenario bounds".into()));
            }
        }
        for o in &self.obstacles {
            if o.footprint.len() < 3 {
                return Err(err(&o.id, "footprint has fewer than 3 vertices".into()));
            }
            if !polygon_is_simple(&o.footprint) {
                return Err(err(&o.id, "footprint is self-intersecting".into()));
            }
            if o.lowest_alt >= o.highest_alt {
                return Err(err(
                    &o.id,
                    format!(
                        "lowest_alt {} must be below highest_alt {}",
                        o.lowest_alt, o.highest_alt
                    ),
                ));
            }
        }
        for r in &self.risk_zones {
            if r.footprint.len() < 3 {
                return Err(err(&r.id, "footprint has fewer than 3 vertices".into()));
            }
            if !polygon_is_simple(&r.footprint) {
                return Err(err(&r.id, "footprint is self-intersecting".into()));
            }
            if r.theta_risk <= 0.0 {
                return Err(err(&r.id, format!("theta_risk {} <= 0", r.theta_risk)));
            }
            if r.theta_risk == 1.0 {
                return Err(err(
                    &r.id,
                    "theta_risk 1 is the ambient default; drop the zone".into(),
                ));
            }
        }
        validate_demand(self, &self.od_requests)?;
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    let mut scenario: Scenario = serde_json::from_slice(bytes)?;
    scenario.normalize();
    scenario.validate()?;
    Ok(scenario)
}

/// Serializes a scenario back to the document format.
pub fn save_scenario(scenario: &Scenario) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(scenario).expect("scenario serializes");
    out.push(b'\n');
    out
}

/// Parses a demand document: either a bare JSON array of requests or an
/// object with an `od_requests` key.
pub fn load_demand(bytes: &[u8]) -> Result<Vec<ODRequest>, ScenarioError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum DemandDoc {
        Bare(Vec<ODRequest>),
        Keyed { od_requests: Vec<ODRequest> },
    }
    Ok(match serde_json::from_slice(bytes)? {
        DemandDoc::Bare(v) => v,
        DemandDoc::Keyed { od_requests } => od_requests,
    })
}

/// Checks that every request resolves against the scenario's vertiports and
/// returns the requests unchanged, order preserved.
pub fn validate_demand(
    scenario: &Scenario,
    requests: &[ODRequest],
) -> Result<Vec<ODRequest>, ScenarioError> {
    let mut ids = std::collections::HashSet::new();
    for r in requests {
        if !ids.insert(r.id.as_str()) {
            return Err(ScenarioError::Validation {
                entity: r.id.clone(),
                reason: "duplicate request id".into(),
            });
        }
        if r.origin_vertiport == r.dest_vertiport {
            return Err(ScenarioError::SameEndpoints {
                request: r.id.clone(),
            });
        }
        for (vid, role, ok_kind) in [
            (&r.origin_vertiport, "origin", VertiportKind::OriginCapable),
            (
                &r.dest_vertiport,
                "destination",
                VertiportKind::DestinationCapable,
            ),
        ] {
            let Some(v) = scenario.vertiport(vid) else {
                return Err(ScenarioError::UnknownVertiport {
                    request: r.id.clone(),
                    vertiport: vid.clone(),
                });
            };
            if v.kind != VertiportKind::Both && v.kind != ok_kind {
                return Err(ScenarioError::NotCapable {
                    request: r.id.clone(),
                    vertiport: vid.clone(),
                    role: role.into(),
                });
            }
        }
    }
    Ok(requests.to_vec())
}

/// Parses a MovingAI-style octile `.map` document into a flat scenario: one
/// unit obstacle prism per blocked cell ('@' or 'T'), a one-cell-high flyable
/// band, 1 m cells.
pub fn load_benchmark_map(text: &str) -> Result<Scenario, ScenarioError> {
    let mut height: Option<usize> = None;
    let mut width: Option<usize> = None;
    let mut lines = text.lines().enumerate();
    let map_err = |line: usize, reason: String| ScenarioError::MapFormat { line, reason };

    // header: `type ...`, `height N`, `width N` in any order, then `map`
    loop {
        let Some((i, line)) = lines.next() else {
            return Err(map_err(0, "missing `map` header line".into()));
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "map" {
            break;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("type"), Some(_)) => {}
            (Some("height"), Some(v)) => {
                height = Some(v.parse().map_err(|_| {
                    map_err(i + 1, format!("invalid height {v:?}"))
                })?);
            }
            (Some("width"), Some(v)) => {
                width = Some(v.parse().map_err(|_| {
                    map_err(i + 1, format!("invalid width {v:?}"))
                })?);
            }
            _ => return Err(map_err(i + 1, format!("unrecognized header line {line:?}"))),
        }
    }
    let height = height.ok_or_else(|| map_err(0, "missing height".into()))?;
    let width = width.ok_or_else(|| map_err(0, "missing width".into()))?;

    let mut obstacles = Vec::new();
    let mut rows = 0usize;
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if rows == height {
            return Err(map_err(i + 1, "more rows than the declared height".into()));
        }
        if line.len() != width {
            return Err(map_err(
                i + 1,
                format!("row has {} cells, header declares width {width}", line.len()),
            ));
        }
        for (x, ch) in line.chars().enumerate() {
            match ch {
                '.' => {}
                '@' | 'T' => {
                    let (xf, yf) = (x as f64, rows as f64);
                    obstacles.push(ObstaclePrism {
                        id: format!("cell_{x}_{rows}"),
                        footprint: vec![
                            [xf, yf],
                            [xf + 1.0, yf],
                            [xf + 1.0, yf + 1.0],
                            [xf, yf + 1.0],
                        ],
                        lowest_alt: 0.0,
                        highest_alt: 1.0,
                    });
                }
                other => {
                    return Err(map_err(i + 1, format!("unknown cell character {other:?}")));
                }
            }
        }
        rows += 1;
    }
    if rows != height {
        return Err(map_err(
            0,
            format!("body has {rows} rows, header declares height {height}"),
        ));
    }

    Ok(Scenario {
        bounds: Bounds3 {
            min: [0.0, 0.0, 0.0],
            max: [width as f64, height as f64, 1.0],
        },
        flyable_band: [0.0, 1.0],
        vertiports: Vec::new(),
        obstacles,
        risk_zones: Vec::new(),
        od_requests: Vec::new(),
        geo_origin: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cx: f64, cy: f64, half: f64) -> Vec<Point2> {
        vec![
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
        ]
    }

    fn sample_doc(n_verti: usize, n_obst: usize, n_risk: usize) -> Scenario {
        let vertiports = (0..n_verti)
            .map(|i| Vertiport {
                id: format!("v{i}"),
                position: [10.0 + 20.0 * i as f64, 50.0, 0.0],
                radius: 5.0,
                kind: VertiportKind::Both,
            })
            .collect();
        let obstacles = (0..n_obst)
            .map(|i| ObstaclePrism {
                id: format!("o{i}"),
                footprint: square(100.0 + 10.0 * i as f64, 200.0, 3.0),
                lowest_alt: 0.0,
                highest_alt: 90.0,
            })
            .collect();
        let risk_zones = (0..n_risk)
            .map(|i| RiskZone {
                id: format!("r{i}"),
                footprint: square(300.0 + 10.0 * i as f64, 300.0, 4.0),
                theta_risk: 2.0,
            })
            .collect();
        Scenario {
            bounds: Bounds3 {
                min: [0.0, 0.0, 0.0],
                max: [1000.0, 1000.0, 260.0],
            },
            flyable_band: [60.0, 120.0],
            vertiports,
            obstacles,
            risk_zones,
            od_requests: Vec::new(),
            geo_origin: None,
        }
    }

    #[test]
    fn load_counts_match_document() {
        let doc = sample_doc(7, 55, 22);
        let loaded = load_scenario(&save_scenario(&doc)).unwrap();
        assert_eq!(loaded.vertiports.len(), 7);
        assert_eq!(loaded.obstacles.len(), 55);
        assert_eq!(loaded.risk_zones.len(), 22);
    }

    #[test]
    fn empty_collections_are_valid() {
        let doc = sample_doc(2, 0, 0);
        let loaded = load_scenario(&save_scenario(&doc)).unwrap();
        assert!(loaded.obstacles.is_empty());
        assert!(loaded.risk_zones.is_empty());
    }

    #[test]
    fn degenerate_prism_is_rejected_by_name() {
        let mut doc = sample_doc(1, 1, 0);
        doc.obstacles[0].lowest_alt = 50.0;
        doc.obstacles[0].highest_alt = 50.0;
        let err = load_scenario(&save_scenario(&doc)).unwrap_err();
        match err {
            ScenarioError::Validation { entity, .. } => assert_eq!(entity, "o0"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let doc = sample_doc(3, 4, 2);
        let once = load_scenario(&save_scenario(&doc)).unwrap();
        let twice = load_scenario(&save_scenario(&once)).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn clockwise_footprints_are_normalized() {
        let mut doc = sample_doc(1, 1, 0);
        doc.obstacles[0].footprint.reverse();
        let loaded = load_scenario(&save_scenario(&doc)).unwrap();
        assert!(crate::geometry::polygon_signed_area2(&loaded.obstacles[0].footprint) > 0.0);
    }

    #[test]
    fn theta_one_zone_is_rejected() {
        let mut doc = sample_doc(1, 0, 1);
        doc.risk_zones[0].theta_risk = 1.0;
        assert!(load_scenario(&save_scenario(&doc)).is_err());
    }

    fn request(id: &str, from: &str, to: &str) -> ODRequest {
        ODRequest {
            id: id.into(),
            origin_vertiport: from.into(),
            dest_vertiport: to.into(),
            urgency: Urgency::Normal,
            profit: 100.0,
        }
    }

    #[test]
    fn demand_pass_through_preserves_order() {
        let doc = sample_doc(7, 0, 0);
        let reqs: Vec<_> = (0..12)
            .map(|i| request(&format!("d{i}"), &format!("v{}", i % 7), &format!("v{}", (i + 1) % 7)))
            .collect();
        let out = validate_demand(&doc, &reqs).unwrap();
        assert_eq!(out, reqs);
    }

    #[test]
    fn demand_rejects_same_endpoints_and_unknown_ids() {
        let doc = sample_doc(2, 0, 0);
        let err = validate_demand(&doc, &[request("d0", "v0", "v0")]).unwrap_err();
        assert!(matches!(err, ScenarioError::SameEndpoints { request } if request == "d0"));
        let err = validate_demand(&doc, &[request("d1", "v0", "nope")]).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownVertiport { .. }));
        assert!(validate_demand(&doc, &[]).unwrap().is_empty());
    }

    #[test]
    fn benchmark_map_blocked_count() {
        let text = "type octile\nheight 3\nwidth 3\nmap\n.@.\nT..\n...\n";
        let sc = load_benchmark_map(text).unwrap();
        assert_eq!(sc.obstacles.len(), 2);
        assert_eq!(sc.bounds.max, [3.0, 3.0, 1.0]);

        let all_free = load_benchmark_map("type octile\nheight 3\nwidth 3\nmap\n...\n...\n...\n")
            .unwrap();
        assert!(all_free.obstacles.is_empty());
    }

    #[test]
    fn benchmark_map_dimension_mismatch() {
        let text = "type octile\nheight 4\nwidth 4\nmap\n....\n....\n....\n";
        assert!(matches!(
            load_benchmark_map(text),
            Err(ScenarioError::MapFormat { .. })
        ));
        let bad_char = "type octile\nheight 1\nwidth 2\nmap\n.x\n";
        assert!(matches!(
            load_benchmark_map(bad_char),
            Err(ScenarioError::MapFormat { .. })
        ));
    }

    #[test]
    fn geodetic_documents_are_projected() {
        let doc = serde_json::json!({
            "bounds": {"min": [30.0, 120.0, 0.0], "max": [30.02, 120.02, 200.0]},
            "flyable_band": [60.0, 120.0],
            "geo_origin": [30.0, 120.0],
            "vertiports": [
                {"id": "a", "position": [30.01, 120.01, 0.0], "radius": 5.0}
            ]
        });
        let sc = load_scenario(doc.to_string().as_bytes()).unwrap();
        assert!(sc.geo_origin.is_none());
        let p = sc.vertiports[0].position;
        // ~1.11 km north, ~0.96 km east of the origin
        assert!((p[1] - 1112.0).abs() < 5.0, "y = {}", p[1]);
        assert!((p[0] - 963.0).abs() < 5.0, "x = {}", p[0]);
    }
}

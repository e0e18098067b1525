//! Small 2D/3D geometry helpers shared by the scenario and grid layers.
//!
//! Points are plain arrays (`[f64; 2]` / `[f64; 3]`) in a local metric ENU
//! frame. All box/polygon predicates use closed-set semantics: touching
//! boundaries counts as intersecting.

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

pub fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Point3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn dist3(a: Point3, b: Point3) -> f64 {
    norm3(sub3(a, b))
}

/// Twice the signed area of a simple polygon (positive when counter-clockwise).
pub fn polygon_signed_area2(poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc
}

/// Reverses the vertex order in place if the polygon winds clockwise.
pub fn normalize_ccw(poly: &mut Vec<Point2>) {
    if polygon_signed_area2(poly) < 0.0 {
        poly.reverse();
    }
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    orient(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed segment intersection test (shared endpoints and collinear overlap count).
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when no two non-adjacent edges of the polygon intersect.
pub fn polygon_is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            // skip edges sharing a vertex
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Point-in-polygon via even-odd crossing; boundary points count as inside.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if on_segment(a, b, p) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Closed intersection between an axis-aligned rectangle and a simple polygon.
pub fn rect_intersects_polygon(min: Point2, max: Point2, poly: &[Point2]) -> bool {
    let in_rect =
        |p: Point2| p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1];
    if poly.iter().any(|&v| in_rect(v)) {
        return true;
    }
    let corners = [
        [min[0], min[1]],
        [max[0], min[1]],
        [max[0], max[1]],
        [min[0], max[1]],
    ];
    if corners.iter().any(|&c| point_in_polygon(c, poly)) {
        return true;
    }
    let rect_edges = [
        (corners[0], corners[1]),
        (corners[1], corners[2]),
        (corners[2], corners[3]),
        (corners[3], corners[0]),
    ];
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for &(c, d) in &rect_edges {
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Closed 1D interval overlap.
pub fn intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point2> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    }

    #[test]
    fn ccw_normalization_flips_clockwise_rings() {
        let mut cw = unit_square();
        cw.reverse();
        assert!(polygon_signed_area2(&cw) < 0.0);
        normalize_ccw(&mut cw);
        assert!(polygon_signed_area2(&cw) > 0.0);
    }

    #[test]
    fn simple_polygon_detects_bowtie() {
        assert!(polygon_is_simple(&unit_square()));
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!polygon_is_simple(&bowtie));
    }

    #[test]
    fn point_in_polygon_boundary_is_inside() {
        let sq = unit_square();
        assert!(point_in_polygon([0.5, 0.5], &sq));
        assert!(point_in_polygon([0.0, 0.5], &sq));
        assert!(point_in_polygon([1.0, 1.0], &sq));
        assert!(!point_in_polygon([1.5, 0.5], &sq));
    }

    #[test]
    fn rect_polygon_touching_counts() {
        let sq = unit_square();
        // rectangle sharing only the x=1 edge
        assert!(rect_intersects_polygon([1.0, 0.0], [2.0, 1.0], &sq));
        assert!(!rect_intersects_polygon([1.1, 0.0], [2.0, 1.0], &sq));
        // rectangle fully containing the polygon
        assert!(rect_intersects_polygon([-1.0, -1.0], [2.0, 2.0], &sq));
        // rectangle fully inside the polygon
        assert!(rect_intersects_polygon([0.4, 0.4], [0.6, 0.6], &sq));
    }
}

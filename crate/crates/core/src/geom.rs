//! Planar polygon helpers shared by the scene and the evaluator.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Distance under which a point counts as lying on a polygon edge.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[inline]
pub fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Shoelace area, positive for counter-clockwise loops.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        twice += cross2(&poly[i], &poly[(i + 1) % n]);
    }
    0.5 * twice
}

pub fn centroid(poly: &[Vec2]) -> Vec2 {
    let area = signed_area(poly);
    if area.abs() < f64::EPSILON {
        let sum = poly.iter().fold(Vec2::zeros(), |acc, p| acc + p);
        return sum / poly.len().max(1) as f64;
    }
    let n = poly.len();
    let mut c = Vec2::zeros();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        c += (a + b) * cross2(&a, &b);
    }
    c / (6.0 * area)
}

pub fn point_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> bool {
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        return (p - a).norm() <= BOUNDARY_EPS;
    }
    let ap = p - a;
    if (cross2(&ab, &ap) / len).abs() > BOUNDARY_EPS {
        return false;
    }
    let t = ap.dot(&ab) / len;
    t >= -BOUNDARY_EPS && t <= len + BOUNDARY_EPS
}

/// True iff `p` is strictly inside the polygon; points on the boundary are outside.
pub fn point_strictly_inside(p: &Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        if point_on_segment(p, a, b) {
            return false;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Andrew's monotone chain. Returns a counter-clockwise loop without
/// collinear vertices; fewer than 3 points when the input is degenerate.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &Vec2, a: &Vec2, b: &Vec2| cross2(&(a - o), &(b - o));
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for p in &pts {
        while hull.len() >= 2 && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

fn segments_intersect(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let orient = |p: &Vec2, q: &Vec2, r: &Vec2| cross2(&(q - p), &(r - p));
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && point_on_segment(a, c, d))
        || (d2 == 0.0 && point_on_segment(b, c, d))
        || (d3 == 0.0 && point_on_segment(c, a, b))
        || (d4 == 0.0 && point_on_segment(d, a, b))
}

/// A closed loop is simple when no two non-adjacent edges touch.
pub fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly).abs() <= BOUNDARY_EPS {
        return false;
    }
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (&poly[j], &poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Sutherland-Hodgman clip of a polygon against an axis-aligned rectangle.
pub fn clip_to_rect(poly: &[Vec2], min: Vec2, max: Vec2) -> Vec<Vec2> {
    let mut out = poly.to_vec();
    // (axis, bound, keep_greater)
    let planes = [(0, min.x, true), (0, max.x, false), (1, min.y, true), (1, max.y, false)];
    for (axis, bound, keep_greater) in planes {
        if out.is_empty() {
            break;
        }
        let inside = |p: &Vec2| if keep_greater { p[axis] >= bound } else { p[axis] <= bound };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                out.push(prev + (cur - prev) * t);
            }
            if ci {
                out.push(cur);
            }
        }
    }
    out
}

/// Area of the intersection between a polygon and a rectangle.
pub fn rect_overlap_area(poly: &[Vec2], min: Vec2, max: Vec2) -> f64 {
    signed_area(&clip_to_rect(poly, min, max)).abs()
}

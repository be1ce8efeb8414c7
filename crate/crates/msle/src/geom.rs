//! Plane geometry helpers: points, polygons, point-in-region tests.
//!
//! Polygons are simple (non-self-intersecting), listed counterclockwise.
//! Inclusion is closed: points on an edge count as inside, up to a tolerance
//! proportional to the polygon scale, so lattice points that fall exactly on
//! a polygon edge are kept deterministically.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    /// Unit square [0,1] x [0,1].
    pub fn unit_square() -> Self {
        Polygon::rect(0.0, 0.0, 1.0, 1.0)
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi.x - lo.x).max(hi.y - lo.y)
    }

    /// Closed point-in-polygon test: edge points (within `tol`) are inside.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        if self.dist_to_boundary(p) <= tol {
            return true;
        }
        // Even-odd ray cast; p is now guaranteed off every edge.
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        let mut d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            d = d.min(dist_point_segment(p, a, b));
        }
        d
    }
}

pub fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_contains() {
        let sq = Polygon::unit_square();
        let tol = 1e-9;
        assert!(sq.contains(Point::new(0.5, 0.5), tol));
        assert!(sq.contains(Point::new(0.0, 0.5), tol)); // on edge
        assert!(sq.contains(Point::new(0.0, 0.0), tol)); // corner
        assert!(!sq.contains(Point::new(-0.1, 0.5), tol));
        assert!(!sq.contains(Point::new(0.5, 1.2), tol));
    }

    #[test]
    fn lattice_points_on_square_edge_are_kept() {
        let sq = Polygon::unit_square();
        let eps = 1.0 / 8.0;
        let mut count = 0;
        for i in -2..=10 {
            for j in -2..=10 {
                if sq.contains(Point::new(i as f64 * eps, j as f64 * eps), 1e-9) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 81); // 9 x 9 grid including the edge rows
    }
}

//! Conformal charts from polygonal domains onto the upper half plane.
//!
//! The chart is assembled by the geodesic algorithm: the boundary is sampled
//! into a closed polyline, one boundary segment is opened with a square-root
//! map, and every remaining sample point is pulled to the real axis in order
//! by an elementary map that removes the hyperbolic geodesic from the current
//! tip to the next point. Each elementary map is a real Mobius rotation
//! followed by a vertical-slit closure, so the composition is H-valued by
//! construction and boundary samples land exactly on the real line.
//!
//! One short boundary arc (the seam where the traversal closes up) is never
//! opened. Its endpoints are placed mid-edge, far from both marked points,
//! and the sampling refines geometrically toward the seam so the unopened
//! piece has length ~1e-10 of the perimeter; its image occupies the far ends
//! of the real axis where nothing is evaluated.
//!
//! Normalization: the marked point `a` maps to 0 and `b` to infinity. The
//! remaining positive scale factor is left at whatever the construction
//! produces; downstream consumers either work in scale-invariant quantities
//! or carry the chart's own units consistently.

use num_complex::Complex64;

use crate::error::{MsleError, Result};
use crate::geom::{Point, Polygon};
use crate::lattice::{LatticeDomain, Vertex};

type Cx = Complex64;

/// One elementary unzip step acting on the upper half plane, tip at origin.
#[derive(Debug, Clone, Copy)]
enum Step {
    /// Removes the circular geodesic from 0 to the pulled point `a`: a real
    /// Mobius map sends the circle (center `c` on R, through 0 and `a`) to a
    /// vertical line, then the slit [0, ih] is closed. c = |a|^2 / (2 Re a),
    /// h = |a|^2 / Im a.
    Arc { c: f64, h: f64 },
    /// Degenerate arc with Re a = 0: closes the vertical slit [0, ih].
    VSlit { h: f64 },
    /// Pulled point was already on the real axis: plain translation.
    Shift { dx: f64 },
}

/// sqrt(z^2 + h^2) on the branch that behaves like z at infinity. Maps
/// H minus the slit [0, ih] onto H; the slit's left side goes to [-h, 0],
/// the right side to [0, h].
fn v_slit(z: Cx, h: f64) -> Cx {
    if z == Cx::new(0.0, 0.0) {
        // Slit base: both prime ends collapse here; callers that care about
        // the side resolve it themselves. Return the left-hand limit.
        return Cx::new(-h, 0.0);
    }
    let r = Cx::new(h, 0.0) / z;
    z * (Cx::new(1.0, 0.0) + r * r).sqrt()
}

fn v_slit_deriv(z: Cx, h: f64) -> Cx {
    let v = v_slit(z, h);
    if v == Cx::new(0.0, 0.0) {
        // Tip of the slit; derivative is singular there.
        return Cx::new(f64::INFINITY, 0.0);
    }
    z / v
}

fn mob(z: Cx, c: f64) -> Cx {
    Cx::new(2.0 * c, 0.0) * z / (Cx::new(2.0 * c, 0.0) - z)
}

fn mob_deriv(z: Cx, c: f64) -> Cx {
    let d = Cx::new(2.0 * c, 0.0) - z;
    Cx::new(4.0 * c * c, 0.0) / (d * d)
}

/// Real trace of `mob`; the pole 2c and the point at infinity are exchanged
/// so that repeated application stays on the circle R + {inf}.
fn mob_r(x: f64, c: f64) -> f64 {
    if x.is_infinite() {
        return -2.0 * c;
    }
    let d = 2.0 * c - x;
    if d == 0.0 {
        f64::INFINITY
    } else {
        2.0 * c * x / d
    }
}

fn v_slit_r(t: f64, h: f64) -> f64 {
    if t.is_infinite() {
        t
    } else {
        t.signum() * (t * t + h * h).sqrt()
    }
}

impl Step {
    fn apply(self, z: Cx) -> Cx {
        match self {
            Step::Arc { c, h } => v_slit(mob(z, c), h),
            Step::VSlit { h } => v_slit(z, h),
            Step::Shift { dx } => z - Cx::new(dx, 0.0),
        }
    }

    fn apply_real(self, x: f64) -> f64 {
        match self {
            Step::Arc { c, h } => v_slit_r(mob_r(x, c), h),
            Step::VSlit { h } => v_slit_r(x, h),
            Step::Shift { dx } => x - dx,
        }
    }

    /// Derivative at the pre-step point.
    fn deriv(self, z: Cx) -> Cx {
        match self {
            Step::Arc { c, h } => mob_deriv(z, c) * v_slit_deriv(mob(z, c), h),
            Step::VSlit { h } => v_slit_deriv(z, h),
            Step::Shift { .. } => Cx::new(1.0, 0.0),
        }
    }

    /// Image of the previous tip (the point sitting exactly at the origin).
    /// The boundary arc being opened lies on the left side of the slit when
    /// the boundary is traversed counterclockwise, so the base resolves to
    /// the left prime end.
    fn root_image(self) -> f64 {
        match self {
            Step::Arc { h, .. } | Step::VSlit { h } => -h,
            Step::Shift { dx } => -dx,
        }
    }
}

/// Conformal chart from the interior of a polygon onto H, with two marked
/// boundary points sent to 0 and infinity.
#[derive(Debug, Clone)]
pub struct PolyChart {
    q0: Cx,
    q1: Cx,
    steps: Vec<Step>,
    x_a: f64,
    x_b: f64,
    /// Boundary sample points, counterclockwise, starting at the seam anchor.
    pub polyline: Vec<Point>,
    /// Final chart coordinates of the samples. Entry 0 (the seam anchor) is
    /// NaN; the `b` entry is infinite.
    pub polyline_images: Vec<f64>,
    pub idx_a: usize,
    pub idx_b: usize,
    /// max |Im F| / (1 + |F|) over inward-nudged segment midpoints, away from
    /// the marked points and the seam. Measures how far the chart is from
    /// sending the actual (un-sampled) boundary to the real line.
    pub boundary_residual: f64,
}

impl PolyChart {
    pub fn eval(&self, z: Point) -> Cx {
        self.eval_cx(Cx::new(z.x, z.y))
    }

    pub fn eval_with_derivative(&self, z: Point) -> (Cx, Cx) {
        let zc = Cx::new(z.x, z.y);
        let r = (zc - self.q1) / (zc - self.q0);
        let mut w = Cx::new(0.0, 1.0) * r.sqrt();
        let dq = self.q1 - self.q0;
        let d0 = zc - self.q0;
        // d/dz of i sqrt(r) with r = (z - q1)/(z - q0).
        let mut dw = if r == Cx::new(0.0, 0.0) {
            Cx::new(f64::INFINITY, 0.0)
        } else {
            w * (dq / (d0 * d0)) / (r * Cx::new(2.0, 0.0))
        };
        for s in &self.steps {
            dw *= s.deriv(w);
            w = s.apply(w);
        }
        let (f, df) = self.mobius_with_deriv(w);
        (f, df * dw)
    }

    fn eval_cx(&self, z: Cx) -> Cx {
        let mut w = Cx::new(0.0, 1.0) * ((z - self.q1) / (z - self.q0)).sqrt();
        for s in &self.steps {
            w = s.apply(w);
        }
        self.mobius(w)
    }

    fn mobius(&self, w: Cx) -> Cx {
        if self.x_a < self.x_b {
            (w - Cx::new(self.x_a, 0.0)) / (Cx::new(self.x_b, 0.0) - w)
        } else {
            (w - Cx::new(self.x_a, 0.0)) / (w - Cx::new(self.x_b, 0.0))
        }
    }

    fn mobius_with_deriv(&self, w: Cx) -> (Cx, Cx) {
        if self.x_a < self.x_b {
            let d = Cx::new(self.x_b, 0.0) - w;
            (
                (w - Cx::new(self.x_a, 0.0)) / d,
                Cx::new(self.x_b - self.x_a, 0.0) / (d * d),
            )
        } else {
            let d = w - Cx::new(self.x_b, 0.0);
            (
                (w - Cx::new(self.x_a, 0.0)) / d,
                Cx::new(self.x_b - self.x_a, 0.0) / (d * d),
            )
        }
    }

    fn mobius_real(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return if self.x_a < self.x_b { -1.0 } else { 1.0 };
        }
        if self.x_a < self.x_b {
            let d = self.x_b - x;
            if d == 0.0 {
                f64::INFINITY
            } else {
                (x - self.x_a) / d
            }
        } else {
            let d = x - self.x_b;
            if d == 0.0 {
                f64::INFINITY
            } else {
                (x - self.x_a) / d
            }
        }
    }
}

/// Arc-length position on the polygon boundary, plus interpolation helpers.
struct BoundaryWalk {
    verts: Vec<Point>,
    cum: Vec<f64>,
    total: f64,
}

impl BoundaryWalk {
    fn new(polygon: &Polygon) -> Result<BoundaryWalk> {
        let mut verts = polygon.vertices.clone();
        if verts.len() < 3 {
            return Err(MsleError::Chart("polygon needs at least 3 vertices".into()));
        }
        let mut area2 = 0.0;
        let n = verts.len();
        for i in 0..n {
            let p = verts[i];
            let q = verts[(i + 1) % n];
            area2 += p.x * q.y - q.x * p.y;
        }
        if area2 == 0.0 {
            return Err(MsleError::Chart("polygon is degenerate".into()));
        }
        if area2 < 0.0 {
            verts.reverse();
        }
        let mut cum = vec![0.0];
        for i in 0..n {
            let l = verts[i].dist(verts[(i + 1) % n]);
            if l == 0.0 {
                return Err(MsleError::Chart("polygon has a zero-length edge".into()));
            }
            cum.push(cum[i] + l);
        }
        let total = cum[n];
        Ok(BoundaryWalk { verts, cum, total })
    }

    fn n_edges(&self) -> usize {
        self.verts.len()
    }

    /// Point and unit edge direction at arc-length s (mod perimeter).
    fn at(&self, s: f64) -> (Point, Point) {
        let s = s.rem_euclid(self.total);
        let mut i = match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if i >= self.n_edges() {
            i = self.n_edges() - 1;
        }
        let p = self.verts[i];
        let q = self.verts[(i + 1) % self.verts.len()];
        let len = self.cum[i + 1] - self.cum[i];
        let t = (s - self.cum[i]) / len;
        let dir = Point::new((q.x - p.x) / len, (q.y - p.y) / len);
        (
            Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)),
            dir,
        )
    }

    /// Arc-length of the boundary point closest to p.
    fn project(&self, p: Point) -> f64 {
        let n = self.n_edges();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            let len = self.cum[i + 1] - self.cum[i];
            let vx = b.x - a.x;
            let vy = b.y - a.y;
            let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / (len * len)).clamp(0.0, 1.0);
            let c = Point::new(a.x + t * vx, a.y + t * vy);
            let d = p.dist(c);
            if d < best.0 {
                best = (d, self.cum[i] + t * len);
            }
        }
        best.1
    }
}

/// Builds the chart. `resolution` is the number of uniform boundary samples
/// before local refinement near corners, marked points, and the seam; a few
/// hundred gives interior accuracy in the 1e-4 range for convex polygons.
pub fn chart_from_polygon(
    polygon: &Polygon,
    pa: Point,
    pb: Point,
    resolution: usize,
) -> Result<PolyChart> {
    if resolution < 32 {
        return Err(MsleError::Chart("resolution below 32".into()));
    }
    let walk = BoundaryWalk::new(polygon)?;
    let ll = walk.total;
    let h_t = ll / resolution as f64;
    let s_a = walk.project(pa);
    let s_b = walk.project(pb);
    let sep = (s_a - s_b).rem_euclid(ll).min((s_b - s_a).rem_euclid(ll));
    if sep < 4.0 * h_t {
        return Err(MsleError::Chart(format!(
            "marked boundary points are {sep:.3e} apart along the boundary; \
             raise the resolution or separate them"
        )));
    }

    // Seam anchor: midpoint of the longest corner-free piece of the arc that
    // runs counterclockwise from b to a. Keeping it mid-edge means the opening
    // segment [q0, q1] lies inside one polygon edge, where the square-root
    // opener is exact.
    let gap = (s_a - s_b).rem_euclid(ll);
    let mut marks = vec![0.0, gap];
    for i in 0..walk.n_edges() {
        let c = (walk.cum[i] - s_b).rem_euclid(ll);
        if c > 0.0 && c < gap {
            marks.push(c);
        }
    }
    marks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut piece = (0.0, 0.0);
    for w in marks.windows(2) {
        if w[1] - w[0] > piece.0 {
            piece = (w[1] - w[0], (w[0] + w[1]) / 2.0);
        }
    }
    if piece.0 < 8.0 * h_t {
        return Err(MsleError::Chart(
            "no boundary edge piece long enough to host the seam; \
             raise the resolution"
                .into(),
        ));
    }
    let s_0 = (s_b + piece.1).rem_euclid(ll);

    // Sample set: uniform grid, corners, marked points, geometric clusters.
    let mut svals: Vec<f64> = Vec::with_capacity(resolution + 128);
    for i in 0..resolution {
        svals.push(i as f64 * h_t);
    }
    for i in 0..walk.n_edges() {
        svals.push(walk.cum[i]);
    }
    for &c in &[s_a, s_b] {
        svals.push(c);
        for j in 0..=17 {
            let d = h_t / f64::powi(2.0, j);
            svals.push((c + d).rem_euclid(ll));
            svals.push((c - d).rem_euclid(ll));
        }
    }
    svals.push(s_0);
    // Refinement depth toward the seam balances two error sources: the
    // unopened arc perturbs interior values by about its length fraction,
    // while samples near the seam open slits of height ~ sqrt(L/arc), and
    // float precision degrades as eps * height^2. Both meet near 1e-8 * L.
    let j_dent = {
        let target = 1e-8 * ll;
        let mut j = 4;
        while j < 24 && h_t / f64::powi(2.0, j) > target {
            j += 1;
        }
        j
    };
    for j in 0..=j_dent {
        svals.push((s_0 - h_t / f64::powi(2.0, j)).rem_euclid(ll));
    }
    for j in 0..=3 {
        svals.push((s_0 + h_t / f64::powi(2.0, j)).rem_euclid(ll));
    }
    for v in svals.iter_mut() {
        *v = v.rem_euclid(ll);
    }
    svals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = 1e-12 * ll;
    let mut dedup: Vec<f64> = Vec::with_capacity(svals.len());
    for &s in &svals {
        if dedup.last().map_or(true, |&p| s - p > tol) {
            dedup.push(s);
        }
    }
    // Snap the slots nearest to the three distinguished values exactly.
    let mut snap = |target: f64| -> usize {
        let i = match dedup
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(i) => i,
            Err(i) => {
                let lo = i.saturating_sub(1);
                let hi = i.min(dedup.len() - 1);
                if (dedup[lo] - target).abs() <= (dedup[hi] - target).abs() {
                    lo
                } else {
                    hi
                }
            }
        };
        dedup[i] = target;
        i
    };
    let i0 = snap(s_0);
    snap(s_a);
    snap(s_b);
    dedup.rotate_left(i0);

    let nn = dedup.len();
    let mut points = Vec::with_capacity(nn);
    let mut dirs = Vec::with_capacity(nn);
    for &s in &dedup {
        let (p, dir) = walk.at(s);
        points.push(p);
        dirs.push(dir);
    }
    let find = |target: f64| -> usize {
        dedup
            .iter()
            .position(|&s| s == target)
            .expect("snapped sample present")
    };
    let idx_a = find(s_a);
    let idx_b = find(s_b);

    // Unzip. wc holds current complex positions of not-yet-pulled samples,
    // wr the realized real coordinates of pulled ones.
    let q0 = Cx::new(points[0].x, points[0].y);
    let q1 = Cx::new(points[1].x, points[1].y);
    let diam = polygon.scale();
    let mut wc: Vec<Cx> = vec![Cx::new(0.0, 0.0); nn];
    for j in 2..nn {
        let z = Cx::new(points[j].x, points[j].y);
        wc[j] = Cx::new(0.0, 1.0) * ((z - q1) / (z - q0)).sqrt();
    }
    let mut wr = vec![0.0f64; nn];
    let mut steps: Vec<Step> = Vec::with_capacity(nn - 2);
    for k in 2..nn {
        let a = wc[k];
        let norm = a.norm();
        let step = if norm == 0.0 || a.im <= 1e-13 * norm {
            Step::Shift { dx: a.re }
        } else if a.re.abs() <= 1e-13 * norm {
            Step::VSlit {
                h: a.norm_sqr() / a.im,
            }
        } else {
            Step::Arc {
                c: a.norm_sqr() / (2.0 * a.re),
                h: a.norm_sqr() / a.im,
            }
        };
        for j in 1..(k - 1) {
            wr[j] = step.apply_real(wr[j]);
        }
        wr[k - 1] = step.root_image();
        for j in (k + 1)..nn {
            let w = step.apply(wc[j]);
            if w.im < -1e-9 * diam {
                return Err(MsleError::Chart(format!(
                    "unzip left the half plane at sample {j} (im {:.3e}); \
                     boundary resolution too coarse",
                    w.im
                )));
            }
            wc[j] = Cx::new(w.re, w.im.max(0.0));
        }
        wr[k] = 0.0;
        steps.push(step);
    }

    // The realized boundary must be cyclically monotone: at most one descent
    // (the wrap through infinity) when read linearly.
    let mut descents = 0;
    for j in 1..nn - 1 {
        if wr[j].is_finite() && wr[j + 1].is_finite() && wr[j + 1] < wr[j] {
            descents += 1;
        }
    }
    if descents > 1 {
        return Err(MsleError::Chart(format!(
            "{descents} order inversions in the realized boundary; \
             boundary resolution too coarse"
        )));
    }
    let x_a = wr[idx_a];
    let x_b = wr[idx_b];
    if !x_a.is_finite() || !x_b.is_finite() || x_a == x_b {
        return Err(MsleError::Chart(
            "marked points collapsed during unzip; boundary resolution too coarse".into(),
        ));
    }

    let mut chart = PolyChart {
        q0,
        q1,
        steps,
        x_a,
        x_b,
        polyline: points,
        polyline_images: Vec::new(),
        idx_a,
        idx_b,
        boundary_residual: 0.0,

    };
    let mut images = Vec::with_capacity(nn);
    images.push(f64::NAN);
    for &x in wr.iter().skip(1) {
        images.push(chart.mobius_real(x));
    }
    chart.polyline_images = images;

    // Residual audit: evaluate nudged midpoints of sample segments that lie
    // inside a single edge, away from the marked points and the seam.
    let exclusion = 0.05 * ll;
    let delta = 1e-9 * ll;
    let p_a = chart.polyline[idx_a];
    let p_b = chart.polyline[idx_b];
    let p_0 = chart.polyline[0];
    let mut resid = 0.0f64;
    let stride = (nn / 160).max(1);
    for j in (1..nn - 1).step_by(stride) {
        let d1 = dirs[j];
        let d2 = dirs[j + 1];
        if (d1.x - d2.x).abs() + (d1.y - d2.y).abs() > 1e-12 {
            continue;
        }
        let m = Point::new(
            (chart.polyline[j].x + chart.polyline[j + 1].x) / 2.0,
            (chart.polyline[j].y + chart.polyline[j + 1].y) / 2.0,
        );
        if m.dist(p_a) < exclusion || m.dist(p_b) < exclusion || m.dist(p_0) < exclusion {
            continue;
        }
        let z = Point::new(m.x - delta * d1.y, m.y + delta * d1.x);
        let f = chart.eval(z);
        if f.is_finite() {
            resid = resid.max(f.im.abs() / (1.0 + f.norm()));
        }
    }
    chart.boundary_residual = resid;
    Ok(chart)
}

/// Chart for a lattice domain: the polygon chart plus cached images and
/// derivatives at every lattice vertex. Boundary vertices are evaluated a
/// hair inside the domain so they sit on the correct prime end.
#[derive(Debug, Clone)]
pub struct BaseChart {
    pub chart: PolyChart,
    pub domain_hash: String,
    vertex_images: Vec<Cx>,
    vertex_derivs: Vec<Cx>,
}

impl BaseChart {
    pub fn at(&self, v: Vertex) -> Cx {
        self.vertex_images[v as usize]
    }

    pub fn deriv_at(&self, v: Vertex) -> Cx {
        self.vertex_derivs[v as usize]
    }

    pub fn eval(&self, z: Point) -> Cx {
        self.chart.eval(z)
    }

    pub fn eval_with_derivative(&self, z: Point) -> (Cx, Cx) {
        self.chart.eval_with_derivative(z)
    }
}

pub fn base_chart(d: &LatticeDomain, resolution: usize) -> Result<BaseChart> {
    let chart = chart_from_polygon(&d.polygon, d.position(d.a), d.position(d.b), resolution)?;
    let n = d.vertex_count();
    let delta = 1e-7 * d.epsilon;
    let (lo, hi) = d.polygon.bbox();
    let centroid = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    let mut vertex_images = Vec::with_capacity(n);
    let mut vertex_derivs = Vec::with_capacity(n);
    for v in 0..n as Vertex {
        let p = d.position(v);
        let z = if d.is_boundary(v) {
            let mut ix = 0.0;
            let mut iy = 0.0;
            for &u in d.neighbors(v) {
                let q = d.position(u);
                ix += q.x - p.x;
                iy += q.y - p.y;
            }
            let norm = ix.hypot(iy);
            if norm < 1e-12 * d.epsilon {
                ix = centroid.x - p.x;
                iy = centroid.y - p.y;
                let cn = ix.hypot(iy).max(1e-300);
                ix /= cn;
                iy /= cn;
            } else {
                ix /= norm;
                iy /= norm;
            }
            Point::new(p.x + delta * ix, p.y + delta * iy)
        } else {
            p
        };
        let (f, df) = chart.eval_with_derivative(z);
        vertex_images.push(f);
        vertex_derivs.push(df);
    }
    Ok(BaseChart {
        chart,
        domain_hash: d.hash().to_string(),
        vertex_images,
        vertex_derivs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_domain, LatticeKind};

    fn rect_chart(n: usize) -> PolyChart {
        let poly = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        chart_from_polygon(&poly, Point::new(0.5, 0.0), Point::new(0.5, 1.0), n).unwrap()
    }

    #[test]
    fn boundary_lands_on_the_real_line() {
        let chart = rect_chart(400);
        // The residual is the geodesic-vs-boundary deviation at segment
        // midpoints; it shrinks quadratically in the sample spacing.
        assert!(
            chart.boundary_residual < 1e-4,
            "residual {}",
            chart.boundary_residual
        );
        let coarse = rect_chart(200).boundary_residual;
        let fine = rect_chart(800).boundary_residual;
        assert!(
            fine < coarse / 8.0,
            "no quadratic convergence: {coarse:.3e} -> {fine:.3e}"
        );
        // a maps to 0, b blows up.
        let near_a = chart.eval(Point::new(0.5, 1e-9));
        assert!(near_a.norm() < 1e-4, "F(a) = {near_a}");
        let near_b = chart.eval(Point::new(0.5, 1.0 - 1e-9));
        assert!(near_b.norm() > 1e3, "F(b) = {near_b}");
        // Interior points stay strictly inside H.
        for &(x, y) in &[(0.3, 0.4), (0.7, 0.2), (0.9, 0.9), (0.1, 0.5)] {
            let f = chart.eval(Point::new(x, y));
            assert!(f.im > 0.0, "F({x},{y}) = {f}");
        }
    }

    #[test]
    fn boundary_images_are_ordered() {
        let chart = rect_chart(300);
        // Counterclockwise boundary order must become increasing order on R,
        // up to the single wrap through infinity at b.
        let vals: Vec<f64> = chart
            .polyline_images
            .iter()
            .skip(1)
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        let descents = vals.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(descents <= 1, "{descents} descents");
        // a sits exactly at the origin of the chart.
        assert_eq!(chart.polyline_images[chart.idx_a], 0.0);
    }

    #[test]
    fn half_disk_matches_the_closed_form() {
        // Upper half disk, a at the origin, b at z = 1. The exact chart with
        // F(0) = 0, F(1) = inf is F(z) = 2z/(z-1)^2, unique up to a positive
        // scale fixed at a third point.
        let m = 240;
        let mut verts = vec![Point::new(-1.0, 0.0), Point::new(1.0, 0.0)];
        for i in 1..m {
            let t = std::f64::consts::PI * i as f64 / m as f64;
            verts.push(Point::new(t.cos(), t.sin()));
        }
        let poly = Polygon::new(verts);
        let chart =
            chart_from_polygon(&poly, Point::new(0.0, 0.0), Point::new(1.0, 0.0), 400).unwrap();
        let exact = |z: Cx| 2.0 * z / ((z - 1.0) * (z - 1.0));
        let z_ref = Cx::new(0.0, 0.8);
        let s = chart.eval(Point::new(z_ref.re, z_ref.im)) / exact(z_ref);
        assert!(
            s.im.abs() < 1e-3 * s.norm(),
            "scale factor not real: {s}"
        );
        let s = s.re;
        assert!(s > 0.0);
        for &(x, y) in &[(0.0, 0.5), (0.3, 0.4), (-0.4, 0.3), (0.2, 0.7)] {
            let z = Cx::new(x, y);
            let got = chart.eval(Point::new(x, y)) / s;
            let want = exact(z);
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-3, "z = {z}: got {got}, want {want}, rel {rel:.2e}");
        }
    }

    #[test]
    fn harmonic_measure_matches_the_series_solution() {
        // Harmonic measure of the right edge of the unit square, from the
        // chart: the angle subtended by the image interval. Oracle: separable
        // series for the Laplace problem with boundary value 1 on that edge.
        let chart = rect_chart(400);
        let series = |x: f64, y: f64| -> f64 {
            let mut u = 0.0;
            for n in (1..120).step_by(2) {
                let k = n as f64 * std::f64::consts::PI;
                // sinh(kx)/sinh(k) in overflow-safe form.
                let ratio = ((x - 1.0) * k).exp() * (1.0 - (-2.0 * k * x).exp())
                    / (1.0 - (-2.0 * k).exp());
                u += 4.0 / k * ratio * (k * y).sin();
            }
            u
        };
        // Corner images bounding the right edge, in counterclockwise order.
        let i_p = chart
            .polyline
            .iter()
            .position(|p| (p.x - 1.0).abs() < 1e-12 && p.y.abs() < 1e-12)
            .unwrap();
        let i_q = chart
            .polyline
            .iter()
            .position(|p| (p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12)
            .unwrap();
        let x_p = chart.polyline_images[i_p];
        let x_q = chart.polyline_images[i_q];
        assert!(x_p.is_finite() && x_q.is_finite() && x_p < x_q);
        for &(x, y) in &[(0.7, 0.4), (0.5, 0.5), (0.25, 0.8)] {
            let f = chart.eval(Point::new(x, y));
            let omega = ((f - Cx::new(x_q, 0.0)).arg() - (f - Cx::new(x_p, 0.0)).arg())
                / std::f64::consts::PI;
            let want = series(x, y);
            assert!(
                (omega - want).abs() < 1e-3,
                "at ({x},{y}): chart {omega:.6}, series {want:.6}"
            );
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let chart = rect_chart(300);
        // The step is chosen well above the chart's own float noise floor
        // (values pass through scale ~1e4 during the unzip, so absolute
        // precision is around 1e-8).
        let h = 3e-4;
        for &(x, y) in &[(0.4, 0.3), (0.8, 0.6), (0.2, 0.9)] {
            let (_, df) = chart.eval_with_derivative(Point::new(x, y));
            let fd_x = (chart.eval(Point::new(x + h, y)) - chart.eval(Point::new(x - h, y)))
                / (2.0 * h);
            let fd_y = (chart.eval(Point::new(x, y + h)) - chart.eval(Point::new(x, y - h)))
                / Cx::new(0.0, 2.0 * h);
            for fd in [fd_x, fd_y] {
                let rel = (df - fd).norm() / df.norm();
                assert!(rel < 1e-4, "at ({x},{y}): analytic {df}, fd {fd}");
            }
        }
    }

    #[test]
    fn charts_of_similar_domains_agree_through_cross_ratios() {
        // A similarity of the domain changes the chart only by a Mobius
        // automorphism of H, so cross ratios of image 4-tuples are invariant.
        let p1 = Polygon::rect(0.0, 0.0, 1.0, 0.6);
        let c1 = chart_from_polygon(&p1, Point::new(0.4, 0.0), Point::new(0.6, 0.6), 350).unwrap();
        let s = 2.5;
        let (tx, ty) = (1.3, -0.7);
        let p2 = Polygon::rect(tx, ty, tx + s, ty + 0.6 * s);
        let c2 = chart_from_polygon(
            &p2,
            Point::new(tx + 0.4 * s, ty),
            Point::new(tx + 0.6 * s, ty + 0.6 * s),
            350,
        )
        .unwrap();
        let pts = [(0.3, 0.2), (0.7, 0.3), (0.5, 0.45), (0.2, 0.5)];
        let f1: Vec<Cx> = pts
            .iter()
            .map(|&(x, y)| c1.eval(Point::new(x, y)))
            .collect();
        let f2: Vec<Cx> = pts
            .iter()
            .map(|&(x, y)| c2.eval(Point::new(tx + s * x, ty + s * y)))
            .collect();
        let cross = |f: &[Cx]| (f[0] - f[1]) * (f[2] - f[3]) / ((f[0] - f[2]) * (f[1] - f[3]));
        let r1 = cross(&f1);
        let r2 = cross(&f2);
        assert!(
            (r1 - r2).norm() < 1e-6 * r1.norm(),
            "cross ratios {r1} vs {r2}"
        );
    }

    #[test]
    fn lattice_chart_caches_vertex_images() {
        let d = build_domain(
            LatticeKind::Square,
            1.0 / 16.0,
            &Polygon::unit_square(),
            Point::new(0.5, 0.0),
            Point::new(0.5, 1.0),
        )
        .unwrap();
        let chart = base_chart(&d, 300).unwrap();
        let mut interior_seen = 0;
        for v in 0..d.vertex_count() as Vertex {
            let f = chart.at(v);
            assert!(f.is_finite(), "vertex {v} image {f}");
            if !d.is_boundary(v) {
                assert!(f.im > 0.0, "interior vertex {v} image {f}");
                interior_seen += 1;
            } else {
                assert!(f.im > -1e-9, "boundary vertex {v} image {f}");
            }
            assert!(chart.deriv_at(v).is_finite());
        }
        assert!(interior_seen > 100);
        // The a-vertex image sits near the origin, b far out.
        assert!(chart.at(d.a).norm() < 1e-2, "F(a) = {}", chart.at(d.a));
        assert!(chart.at(d.b).norm() > 1e2, "F(b) = {}", chart.at(d.b));
    }
}

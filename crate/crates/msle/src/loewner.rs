//! Chordal Loewner evolution in the upper half plane: forward maps driven by
//! a piecewise-constant driving function, trace reconstruction, and the
//! inverse problem (unzipping a curve back into its driving function).
//!
//! Discretization convention: step k covers capacity time (t[k-1], t[k]] and
//! uses the driving value at the right endpoint, xi[k]. The elementary slit
//! map for one step is exact, and `unzip` recovers exactly that convention,
//! so unzip(forward_trace(df)) reproduces df to float accuracy by
//! construction rather than by discretization refinement.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::BaseChart;
use crate::error::{MsleError, Result};
use crate::geom::Point;
use crate::lattice::{LatticeDomain, Vertex};

type Cx = Complex64;

/// Piecewise driving record. `times` are half-plane capacity times starting
/// at 0; `values` is the driving function at those times. When the path was
/// produced by a stochastic evolution, `noise` holds the Brownian increment
/// of each step (variance = step length) and `drift` the drift rate used on
/// each step; both are indexed like `times` with entry 0 unused (zero).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrivingFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub noise: Option<Vec<f64>>,
    pub drift: Option<Vec<f64>>,
}

impl DrivingFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<DrivingFunction> {
        let df = DrivingFunction {
            times,
            values,
            noise: None,
            drift: None,
        };
        df.validate()?;
        Ok(df)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(MsleError::CurveStep(format!(
                "{} times vs {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if self.times.is_empty() {
            return Err(MsleError::CurveStep("empty driving function".into()));
        }
        if self.times[0] != 0.0 {
            return Err(MsleError::CurveStep(format!(
                "capacity time must start at 0, got {}",
                self.times[0]
            )));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(MsleError::CurveStep(format!(
                    "capacity times not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(MsleError::CurveStep("non-finite driving value".into()));
        }
        for (name, side) in [("noise", &self.noise), ("drift", &self.drift)] {
            if let Some(v) = side {
                if v.len() != self.times.len() {
                    return Err(MsleError::CurveStep(format!(
                        "{name} has {} entries for {} times",
                        v.len(),
                        self.times.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_capacity(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Driftless SLE(kappa) driving on a uniform capacity grid.
    pub fn brownian<R: Rng>(kappa: f64, dt: f64, steps: usize, rng: &mut R) -> DrivingFunction {
        let mut times = Vec::with_capacity(steps + 1);
        let mut values = Vec::with_capacity(steps + 1);
        let mut noise = Vec::with_capacity(steps + 1);
        times.push(0.0);
        values.push(0.0);
        noise.push(0.0);
        let mut xi = 0.0;
        for k in 1..=steps {
            let db = dt.sqrt() * standard_normal(rng);
            xi += kappa.sqrt() * db;
            times.push(k as f64 * dt);
            values.push(xi);
            noise.push(db);
        }
        DrivingFunction {
            times,
            values,
            noise: Some(noise),
            drift: None,
        }
    }
}

/// Box-Muller standard normal from the session RNG.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Square root of u^2 + c picked on the branch that continues `u`: positive
/// imaginary part inside H, and the sign of Re u on the real axis.
fn sqrt_cont(u: Cx, c: f64) -> Cx {
    let s = (u * u + Cx::new(c, 0.0)).sqrt();
    if s.im < 0.0 || (s.im == 0.0 && u.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Forward elementary map: grows a slit of capacity `dt` at `xi`.
pub fn g_slit(z: Cx, xi: f64, dt: f64) -> Cx {
    let u = z - Cx::new(xi, 0.0);
    Cx::new(xi, 0.0) + sqrt_cont(u, 4.0 * dt)
}

/// Inverse elementary map: h_slit(g_slit(z)) = z away from the slit.
pub fn h_slit(w: Cx, xi: f64, dt: f64) -> Cx {
    let u = w - Cx::new(xi, 0.0);
    Cx::new(xi, 0.0) + sqrt_cont(u, -4.0 * dt)
}

/// d/dz of `g_slit` at z.
pub fn g_slit_deriv(z: Cx, xi: f64, dt: f64) -> Cx {
    let u = z - Cx::new(xi, 0.0);
    let s = sqrt_cont(u, 4.0 * dt);
    if s == Cx::new(0.0, 0.0) {
        Cx::new(f64::INFINITY, 0.0)
    } else {
        u / s
    }
}

/// Tip positions of the trace at each driving sample (excluding time 0, where
/// the trace sits at the origin). Points are in the half-plane chart.
pub fn forward_trace(df: &DrivingFunction) -> Result<Vec<Cx>> {
    df.validate()?;
    let n = df.times.len();
    let mut out = Vec::with_capacity(n - 1);
    for k in 1..n {
        let dt = df.times[k] - df.times[k - 1];
        let xi = df.values[k];
        // Tip of the newest slit piece, mapped down through the earlier steps.
        let mut z = Cx::new(xi, 2.0 * dt.sqrt());
        for j in (1..k).rev() {
            z = h_slit(z, df.values[j], df.times[j] - df.times[j - 1]);
        }
        out.push(z);
    }
    Ok(out)
}

/// Recovers the driving function of a simple curve in H started near 0.
/// Inverse of `forward_trace` under the right-endpoint convention.
pub fn unzip(points: &[Cx]) -> Result<DrivingFunction> {
    if points.is_empty() {
        return Err(MsleError::CurveStep("empty curve".into()));
    }
    let scale = points
        .iter()
        .fold(0.0f64, |m, p| m.max(p.re.abs()).max(p.im.abs()))
        .max(1e-300);
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let mut slits: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for (k, &p) in points.iter().enumerate() {
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(MsleError::CurveStep(format!("curve point {k} not finite")));
        }
        let mut w = p;
        for &(xi, dt) in &slits {
            w = g_slit(w, xi, dt);
        }
        if w.im < -1e-9 * scale {
            return Err(MsleError::CurveStep(format!(
                "curve point {k} falls inside the hull grown so far (im {:.3e})",
                w.im
            )));
        }
        let dt = (w.im * w.im) / 4.0;
        if dt <= 0.0 {
            return Err(MsleError::CurveStep(format!(
                "curve point {k} adds no half-plane capacity"
            )));
        }
        slits.push((w.re, dt));
        times.push(times.last().unwrap() + dt);
        values.push(w.re);
    }
    DrivingFunction::new(times, values)
}

/// Quadratic-variation estimate of kappa from a driving record.
pub fn estimate_kappa(df: &DrivingFunction) -> Result<f64> {
    df.validate()?;
    if df.times.len() < 2 {
        return Err(MsleError::CurveStep(
            "need at least two samples to estimate kappa".into(),
        ));
    }
    let qv: f64 = df.values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(qv / df.total_capacity())
}

/// Half-plane capacity of the hull a map sends to H, read off from the
/// expansion g(iy) = iy + 2 cap / (iy) + O(1/y^2) at large y.
pub fn capacity_probe<F: Fn(Cx) -> Cx>(g: F, y: f64) -> f64 {
    let w = g(Cx::new(0.0, y));
    (y - w.im) * y / 2.0
}

/// Composite chart Z_t = g_t(F(z)) - xi_t: a base chart to H (or the
/// identity on H) followed by the grown slits, recentered at the driving
/// point. The curve tip is at the origin of this chart; the target boundary
/// point b stays at infinity.
#[derive(Debug, Clone)]
pub struct LoewnerChart {
    pub base: Option<Arc<BaseChart>>,
    pub slits: Vec<(f64, f64)>,
    pub xi: f64,
    pub capacity: f64,
}

impl LoewnerChart {
    pub fn half_plane() -> LoewnerChart {
        LoewnerChart {
            base: None,
            slits: Vec::new(),
            xi: 0.0,
            capacity: 0.0,
        }
    }

    pub fn from_base(base: Arc<BaseChart>) -> LoewnerChart {
        LoewnerChart {
            base: Some(base),
            slits: Vec::new(),
            xi: 0.0,
            capacity: 0.0,
        }
    }

    /// Builds the chart of a lattice domain with a at the origin and b at
    /// infinity. `resolution` controls the boundary sampling of the
    /// underlying conformal map.
    pub fn for_domain(d: &LatticeDomain, resolution: usize) -> Result<LoewnerChart> {
        Ok(LoewnerChart::from_base(Arc::new(crate::conformal::base_chart(
            d, resolution,
        )?)))
    }

    /// Grows one slit of capacity `dt` with right-endpoint driving `xi`.
    pub fn extend(&mut self, xi: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() || !xi.is_finite() {
            return Err(MsleError::CurveStep(format!(
                "bad slit extension: xi = {xi}, dt = {dt}"
            )));
        }
        self.slits.push((xi, dt));
        self.xi = xi;
        self.capacity += dt;
        Ok(())
    }

    /// Applies the driving record on top of the current state.
    pub fn extend_with(&mut self, df: &DrivingFunction) -> Result<()> {
        df.validate()?;
        for k in 1..df.times.len() {
            self.extend(df.values[k], df.times[k] - df.times[k - 1])?;
        }
        Ok(())
    }

    fn flow(&self, mut w: Cx) -> Cx {
        for &(xi, dt) in &self.slits {
            w = g_slit(w, xi, dt);
        }
        w - Cx::new(self.xi, 0.0)
    }

    fn flow_with_deriv(&self, mut w: Cx) -> (Cx, Cx) {
        let mut dw = Cx::new(1.0, 0.0);
        for &(xi, dt) in &self.slits {
            dw *= g_slit_deriv(w, xi, dt);
            w = g_slit(w, xi, dt);
        }
        (w - Cx::new(self.xi, 0.0), dw)
    }

    /// Chart value at a point given in half-plane coordinates (after the base
    /// chart, or raw H coordinates when there is no base).
    pub fn eval_h(&self, w: Cx) -> Cx {
        self.flow(w)
    }

    /// Chart value at a domain point; requires a base chart.
    pub fn eval(&self, z: Point) -> Result<Cx> {
        let base = self.base.as_ref().ok_or_else(|| {
            MsleError::Chart("chart has no base map; use eval_h for half-plane input".into())
        })?;
        Ok(self.flow(base.eval(z)))
    }

    /// Chart value and derivative dZ/dz at a lattice vertex, using the
    /// cached base images.
    pub fn at_vertex(&self, v: Vertex) -> Result<(Cx, Cx)> {
        let base = self.base.as_ref().ok_or_else(|| {
            MsleError::Chart("chart has no base map; vertex lookup unavailable".into())
        })?;
        let (w, dw) = (base.at(v), base.deriv_at(v));
        let (z, dz) = self.flow_with_deriv(w);
        Ok((z, dz * dw))
    }
}

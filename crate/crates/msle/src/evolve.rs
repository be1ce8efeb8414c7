//! Massive chordal evolution: drift functionals computed from the lattice
//! observables, and a stepper that grows a Loewner chart and the marked
//! lattice curve together.
//!
//! The driving process is `d xi = sqrt(kappa) dB + lambda dt`. Mass enters
//! only through `lambda`, which each functional reads off the current slit
//! domain through the current chart:
//!
//! * `drift_lerw` (kappa 2): `2 d/dx log(h_m / h_0)` at the tip image,
//!   where `h` is the probability of reaching `b` before dying or
//!   absorbing elsewhere. The massless factor removes the lattice normal
//!   derivative, so the ratio samples the massive/massless kernel ratio
//!   cleanly at rim vertices.
//! * `drift_bosonic` (kappa 4): `(m^2/pi) * integral W_m P` with
//!   `W = (argument observable) - pi/2` and `P(z) = Im(-1/Z)`. The half
//!   weight on killed walks is exactly what makes the centered field
//!   satisfy `W_m = W_0 - delta G_m W_0`, so pairing mass on the
//!   observable or on the kernel gives the same number; both orderings are
//!   exposed and the tests pin their equality. Centering also forces
//!   `lambda = 0` on mirror-symmetric configurations, as it must.
//! * `drift_ust` (kappa 8, experimental): `16 * integral P P_m`. The pair
//!   integral is log-divergent at zero mass and the functional refuses to
//!   evaluate there.
//!
//! All drifts are expressed in the chart's own coordinates; capacity, the
//! driving function, and the probe positions go through the same maps, so
//! no external normalization of the chart scale is required.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::conformal::BaseChart;
use crate::error::{MsleError, Result};
use crate::lattice::{LatticeDomain, LatticeKind, MassParams, PruneAnchor, SlitDomain, Vertex};
use crate::loewner::{standard_normal, DrivingFunction, LoewnerChart};
use crate::observables::arg_observable;
use crate::potential::LiveSystem;

type Cx = Complex64;

/// Which mass functional drives the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftKind {
    LerwKappa2,
    Bosonic,
    /// Pair-kernel functional at kappa 8; exploratory, see `drift_ust`.
    UstExperimental,
}

impl DriftKind {
    pub fn kappa(self) -> f64 {
        match self {
            DriftKind::LerwKappa2 => 2.0,
            DriftKind::Bosonic => 4.0,
            DriftKind::UstExperimental => 8.0,
        }
    }

    pub fn parse(s: &str) -> Option<DriftKind> {
        match s {
            "lerw" => Some(DriftKind::LerwKappa2),
            "bosonic" => Some(DriftKind::Bosonic),
            "ust" => Some(DriftKind::UstExperimental),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DriftKind::LerwKappa2 => "lerw",
            DriftKind::Bosonic => "bosonic",
            DriftKind::UstExperimental => "ust",
        }
    }
}

/// Area of one lattice cell: the weight per vertex in discrete integrals.
pub fn cell_area(kind: LatticeKind, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    match kind {
        LatticeKind::Square => e2,
        // One site per sqrt(3)/2 rhombus.
        LatticeKind::Triangular => 0.5 * 3.0_f64.sqrt() * e2,
        // Two sites per hexagon of area 3 sqrt(3)/2.
        LatticeKind::Hexagonal => 0.75 * 3.0_f64.sqrt() * e2,
    }
}

/// Driving record of a marked lattice curve: images of the curve vertices
/// through the base chart, unzipped. The root sits on the real line and
/// carries no capacity, so it is skipped.
pub fn curve_driving(base: &BaseChart, curve: &[Vertex]) -> Result<DrivingFunction> {
    if curve.len() < 2 {
        return Err(MsleError::Evolution(
            "a curve needs at least one step off the boundary to unzip".into(),
        ));
    }
    let pts: Vec<Cx> = curve[1..].iter().map(|&v| base.at(v)).collect();
    crate::loewner::unzip(&pts)
}

/// Derivative at 0 of the cubic through four scattered nodes, by Lagrange
/// weights; nodes are rescaled so the weights stay conditioned.
fn scattered_slope(nodes: &[(f64, f64); 4]) -> f64 {
    let scale = nodes.iter().fold(0.0_f64, |m, n| m.max(n.0.abs()));
    let xs: Vec<f64> = nodes.iter().map(|n| n.0 / scale).collect();
    let mut slope = 0.0;
    for i in 0..4 {
        let mut denom = 1.0;
        for j in 0..4 {
            if j != i {
                denom *= xs[i] - xs[j];
            }
        }
        let mut num = 0.0;
        for k in 0..4 {
            if k == i {
                continue;
            }
            let mut p = 1.0;
            for j in 0..4 {
                if j != i && j != k {
                    p *= -xs[j];
                }
            }
            num += p;
        }
        slope += nodes[i].1 * num / denom;
    }
    slope / scale
}

/// Distinct live rim vertices walking away from the tip along the boundary
/// ring; `dir = -1` is clockwise of the tip, `+1` counterclockwise.
fn rim_witnesses(s: &SlitDomain, dir: isize, want: usize) -> Result<Vec<Vertex>> {
    let ring = s.boundary_ring();
    if ring.is_empty() || ring.tip_positions.is_empty() {
        return Err(MsleError::Evolution("boundary ring has no tip".into()));
    }
    let tip = s.tip();
    // The recorded position is where the walk passed the tip: entries at
    // and after it sit counterclockwise of the tip, entries before it
    // clockwise.
    let anchor = if dir < 0 {
        *ring.tip_positions.first().unwrap()
    } else {
        *ring.tip_positions.last().unwrap()
    };
    let mut out = Vec::with_capacity(want);
    let mut off: isize = if dir < 0 { -1 } else { 0 };
    for _ in 0..ring.len() {
        let e = ring.entry_at(anchor, off);
        off += dir;
        if e.live == tip {
            continue;
        }
        if out.last() != Some(&e.live) && !out.contains(&e.live) {
            out.push(e.live);
            if out.len() == want {
                return Ok(out);
            }
        }
    }
    Err(MsleError::Evolution(format!(
        "rim too short for drift probes: wanted {want} distinct witnesses"
    )))
}

/// Mass drift of the loop-erased walk at speed 2.
///
/// Probes the ratio `h_m / h_0` at the third and sixth distinct rim
/// vertices on each side of the tip, takes the log-slope at the image of
/// the marked tip through a four-node fit, and doubles it. The slope is
/// anchored at the lattice tip, not at the chart origin: the two agree
/// when chart and curve are in step, and when the curve lags the chart
/// the lattice data is only trustworthy around its own tip. Massless the
/// ratio is identically one and the drift is exactly zero.
pub fn drift_lerw(chart: &LoewnerChart, s: &SlitDomain, mp: MassParams) -> Result<f64> {
    if mp.delta == 0.0 {
        return Ok(0.0);
    }
    let sys_m = LiveSystem::assemble(s, mp, false)?;
    let sys_0 = LiveSystem::assemble(s, MassParams::massless(mp.epsilon), false)?;
    let b = s.base.b;
    let h_m = sys_m.harmonic_measure(&|v| v == b)?;
    let h_0 = sys_0.harmonic_measure(&|v| v == b)?;
    let (zt, _) = chart.at_vertex(s.tip())?;
    if !zt.re.is_finite() {
        return Err(MsleError::Evolution("tip has no finite chart image".into()));
    }

    let left = rim_witnesses(s, -1, 6)?;
    let right = rim_witnesses(s, 1, 6)?;
    let probe = |w: Vertex| -> Result<(f64, f64)> {
        let (z, _) = chart.at_vertex(w)?;
        if !z.re.is_finite() {
            return Err(MsleError::Evolution(format!(
                "probe vertex {w} has no finite chart image"
            )));
        }
        let num = sys_m.at(&h_m, w).unwrap_or(0.0);
        let den = sys_0.at(&h_0, w).unwrap_or(0.0);
        if num <= 0.0 || den <= 0.0 {
            return Err(MsleError::Evolution(
                "drift probe cannot reach b; kernel ratio undefined".into(),
            ));
        }
        Ok((z.re - zt.re, (num / den).ln()))
    };
    let nodes = [
        probe(left[5])?,
        probe(left[2])?,
        probe(right[2])?,
        probe(right[5])?,
    ];
    Ok(2.0 * scattered_slope(&nodes))
}

fn poisson_weight(z: Cx) -> f64 {
    // Im(-1/Z) = y / |Z|^2, the half-plane harmonic measure density at the
    // tip, positive in the upper half-plane.
    z.im / z.norm_sqr()
}

/// Poisson weights over the live set. The marked tip itself maps onto the
/// chart origin, where the continuum density is integrable but a point
/// sample is not; vertices within half a cell of the origin are the
/// curve's own cells and weigh zero, the discrete form of treating them
/// as boundary.
fn live_poisson(chart: &LoewnerChart, sys: &LiveSystem, epsilon: f64) -> Result<Vec<f64>> {
    sys.live_vertices()
        .iter()
        .map(|&v| {
            let (z, dz) = chart.at_vertex(v)?;
            if z.norm() < 0.5 * epsilon * dz.norm() {
                return Ok(0.0);
            }
            let p = poisson_weight(z);
            if !p.is_finite() {
                return Err(MsleError::Evolution(format!(
                    "vertex {v} maps onto the tip; Poisson weight diverges"
                )));
            }
            Ok(p)
        })
        .collect()
}

/// Mass drift of the harmonic explorer at speed 4: mass on the observable.
///
/// `(m^2 / pi) * sum area * (u_m - pi/2) * P` over live vertices.
pub fn drift_bosonic(chart: &LoewnerChart, s: &SlitDomain, mp: MassParams) -> Result<f64> {
    if mp.delta == 0.0 {
        return Ok(0.0);
    }
    let sys = LiveSystem::assemble(s, mp, false)?;
    let u = arg_observable(&sys, s)?;
    let p = live_poisson(chart, &sys, mp.epsilon)?;
    let area = cell_area(s.base.kind, mp.epsilon);
    let sum: f64 = u
        .values
        .iter()
        .zip(&p)
        .map(|(ui, pi)| (ui - 0.5 * PI) * pi)
        .sum();
    Ok(mp.m * mp.m / PI * area * sum)
}

/// Same functional with mass on the kernel instead: the massless centered
/// observable paired with `P - delta G_m P`. Equal to `drift_bosonic` by
/// symmetry of the killed Green's function; kept as an independent route.
pub fn drift_bosonic_kernel_side(
    chart: &LoewnerChart,
    s: &SlitDomain,
    mp: MassParams,
) -> Result<f64> {
    if mp.delta == 0.0 {
        return Ok(0.0);
    }
    let sys_m = LiveSystem::assemble(s, mp, false)?;
    let sys_0 = LiveSystem::assemble(s, MassParams::massless(mp.epsilon), false)?;
    let u0 = arg_observable(&sys_0, s)?;
    let p = live_poisson(chart, &sys_m, mp.epsilon)?;
    let corr = sys_m.solve_rhs(p.iter().map(|x| sys_m.q * x).collect())?;
    let area = cell_area(s.base.kind, mp.epsilon);
    let sum: f64 = u0
        .values
        .iter()
        .zip(p.iter().zip(&corr.values))
        .map(|(ui, (pi, ci))| (ui - 0.5 * PI) * (pi - mp.delta * ci))
        .sum();
    Ok(mp.m * mp.m / PI * area * sum)
}

/// Pair-kernel functional at speed 8: `16 * sum area * P * P_m`.
///
/// Exploratory: the continuum pair integral concentrates at the tip and
/// only the massive correction cuts it off, so zero mass is refused rather
/// than returning a mesh-dependent number.
pub fn drift_ust(chart: &LoewnerChart, s: &SlitDomain, mp: MassParams) -> Result<f64> {
    if mp.delta == 0.0 {
        return Err(MsleError::Evolution(
            "the pair-kernel integral is log-divergent at zero mass; \
             the functional is defined only for m > 0"
                .into(),
        ));
    }
    let sys = LiveSystem::assemble(s, mp, false)?;
    let p = live_poisson(chart, &sys, mp.epsilon)?;
    let corr = sys.solve_rhs(p.iter().map(|x| sys.q * x).collect())?;
    let area = cell_area(s.base.kind, mp.epsilon);
    let sum: f64 = p
        .iter()
        .zip(&corr.values)
        .map(|(pi, ci)| pi * (pi - mp.delta * ci))
        .sum();
    Ok(16.0 * area * sum)
}

fn drift_of(
    kind: DriftKind,
    chart: &LoewnerChart,
    s: &SlitDomain,
    mp: MassParams,
) -> Result<f64> {
    match kind {
        DriftKind::LerwKappa2 => drift_lerw(chart, s, mp),
        DriftKind::Bosonic => drift_bosonic(chart, s, mp),
        DriftKind::UstExperimental => drift_ust(chart, s, mp),
    }
}

/// Stepper configuration.
#[derive(Debug, Clone, Copy)]
pub struct MsleConfig {
    pub kappa: f64,
    pub kind: DriftKind,
    /// Target trace advance per step, in lattice cells.
    pub target_cells: f64,
    /// Halt when the adaptive capacity increment collapses below this.
    pub dt_floor: f64,
    pub max_steps: usize,
    /// With this off the driving function stays driftless while the drift
    /// is still evaluated and logged and the Girsanov weight accumulated:
    /// the reference-measure side of absolute-continuity checks.
    pub apply_drift: bool,
}

impl MsleConfig {
    pub fn new(kind: DriftKind) -> MsleConfig {
        MsleConfig {
            kappa: kind.kappa(),
            kind,
            target_cells: 4.0,
            dt_floor: 1e-14,
            max_steps: 4000,
            apply_drift: true,
        }
    }
}

/// One completed step of the massive evolution.
#[derive(Debug, Clone, Copy)]
pub struct MsleStep {
    pub t: f64,
    pub xi: f64,
    pub lambda: f64,
    pub dt: f64,
    /// Lattice vertices newly marked onto the curve.
    pub marked: usize,
    pub finished: bool,
}

/// A massive evolution in progress: the Loewner chart and the marked
/// lattice curve grow together, the chart from the driving function, the
/// curve by greedily chasing the chart preimage of the tip.
pub struct MsleState {
    pub chart: LoewnerChart,
    pub slit: SlitDomain,
    pub mp: MassParams,
    pub cfg: MsleConfig,
    times: Vec<f64>,
    values: Vec<f64>,
    noise: Vec<f64>,
    drift: Vec<f64>,
    /// Accumulated `integral lambda^2 dt`, the Novikov budget.
    pub int_lambda_sq: f64,
    /// Log Girsanov density between the drifted and driftless laws along
    /// this path: on a driftless run (`apply_drift` off) it is
    /// d(drifted)/d(driftless), on a drifted run the reciprocal
    /// d(driftless)/d(drifted). Either way it has mean one under the law
    /// that generated the path.
    pub log_weight: f64,
    /// Consecutive steps in which the marked curve failed to advance.
    stalled: usize,
    finished: bool,
}

impl MsleState {
    pub fn new(
        domain: Arc<LatticeDomain>,
        base: Arc<BaseChart>,
        mp: MassParams,
        cfg: MsleConfig,
    ) -> Result<MsleState> {
        if !(cfg.kappa > 0.0) || !cfg.kappa.is_finite() {
            return Err(MsleError::Evolution(format!(
                "kappa must be positive, got {}",
                cfg.kappa
            )));
        }
        let chart = LoewnerChart::from_base(base);
        let slit = SlitDomain::fresh(domain);
        Ok(MsleState {
            chart,
            slit,
            mp,
            cfg,
            times: vec![0.0],
            values: vec![0.0],
            noise: vec![0.0],
            drift: vec![0.0],
            int_lambda_sq: 0.0,
            log_weight: 0.0,
            stalled: 0,
            finished: false,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn steps_taken(&self) -> usize {
        self.times.len() - 1
    }

    /// The driving record so far, with noise and drift channels filled.
    pub fn driving(&self) -> DrivingFunction {
        DrivingFunction {
            times: self.times.clone(),
            values: self.values.clone(),
            noise: Some(self.noise.clone()),
            drift: Some(self.drift.clone()),
        }
    }

    pub fn girsanov_weight(&self) -> f64 {
        self.log_weight.exp()
    }

    /// The live neighbor the greedy marker would take next, or None when
    /// the tip is walled in.
    fn next_mark_candidate(&self) -> Result<Option<(Vertex, f64)>> {
        let tip = self.slit.tip();
        let (zt, _) = self.chart.at_vertex(tip)?;
        let mut best: Option<(f64, Vertex)> = None;
        for &w in self.slit.base.neighbors(tip) {
            if !self.slit.is_retained(w) {
                continue;
            }
            let (zw, _) = self.chart.at_vertex(w)?;
            let d = zw.norm();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, w));
            }
        }
        Ok(best.map(|(_, w)| {
            let (zw, _) = self.chart.at_vertex(w).expect("just mapped");
            (w, (zw - zt).norm())
        }))
    }

    /// Capacity increment aiming the trace advance at `target_cells`
    /// lattice cells. The mesh scale in the chart is the image gap `h`
    /// between the tip and the next cell the marker would claim; near a
    /// slit tip the map opens a square root, so `k` cells span about
    /// `h sqrt(k)` and the capacity of that slit piece is a quarter of
    /// its squared height. The pointwise tip derivative would overstate
    /// the scale badly here, which is why the gap is measured discretely.
    fn adaptive_dt(&self) -> Result<f64> {
        let Some((_, gap)) = self.next_mark_candidate()? else {
            return Ok(0.0); // walled in: signal the floor halt
        };
        if !gap.is_finite() {
            return Ok(0.0);
        }
        Ok(0.25 * self.cfg.target_cells * gap * gap)
    }

    /// Chase the tip image: extend the marked curve onto the live neighbor
    /// closest to the chart origin while that strictly improves. The curve
    /// may lag the chart between steps; it catches up once the trace has
    /// moved a full cell.
    fn mark_curve(&mut self) -> Result<usize> {
        let mut marked = 0;
        // Generous cap: the curve may owe the chart several steps of
        // catch-up after a large lateral excursion.
        for _ in 0..(8.0 * self.cfg.target_cells) as usize + 8 {
            let tip = self.slit.tip();
            let (zt, _) = self.chart.at_vertex(tip)?;
            let mut best: Option<(f64, Vertex)> = None;
            for &w in self.slit.base.neighbors(tip) {
                if !self.slit.is_retained(w) {
                    continue;
                }
                let (zw, _) = self.chart.at_vertex(w)?;
                let d = zw.norm();
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, w));
                }
            }
            let Some((d, w)) = best else { break };
            if d >= zt.norm() {
                break;
            }
            match self.slit.extend_anchored(w, PruneAnchor::TargetB) {
                Ok(()) => marked += 1,
                // The greedy choice would wall the tip off from b; leave
                // the curve where it is and let the chart run ahead.
                Err(_) => break,
            }
        }
        Ok(marked)
    }

    /// One step: evaluate the drift, advance the driving function by the
    /// adaptive capacity increment, extend the chart, and re-mark the
    /// lattice curve.
    pub fn step(&mut self, rng: &mut impl Rng) -> Result<MsleStep> {
        let dt = if self.finished { 0.0 } else { self.adaptive_dt()? };
        self.step_with(dt, standard_normal(rng) * dt.sqrt())
    }

    /// One step with caller-supplied capacity increment and Brownian
    /// increment `noise ~ N(0, dt)`. `step` sizes `dt` adaptively and
    /// draws the noise; supplying both makes the update law testable.
    pub fn step_with(&mut self, dt: f64, noise: f64) -> Result<MsleStep> {
        if self.finished {
            return Err(MsleError::Evolution("evolution already finished".into()));
        }
        let lambda = drift_of(self.cfg.kind, &self.chart, &self.slit, self.mp)?;
        if !lambda.is_finite() {
            return Err(MsleError::Evolution(format!(
                "drift evaluated to {lambda}; the chart and curve have decoupled"
            )));
        }
        let t = *self.times.last().unwrap();
        // Two resolution limits, both clean halts: the capacity increment
        // has shrunk below the floor, or the drift increment would dwarf
        // the noise scale (lambda^2 dt of order kappa means the Girsanov
        // exponent per step is order one and the lattice no longer
        // resolves the measure change).
        let drift_overrun = lambda * lambda * dt > 64.0 * self.cfg.kappa;
        if !(dt > self.cfg.dt_floor) || !dt.is_finite() || drift_overrun {
            self.finished = true;
            return Ok(MsleStep {
                t,
                xi: self.chart.xi,
                lambda,
                dt: 0.0,
                marked: 0,
                finished: true,
            });
        }
        let db = noise;
        let applied = if self.cfg.apply_drift { lambda } else { 0.0 };
        let xi = self.chart.xi + self.cfg.kappa.sqrt() * db + applied * dt;
        self.chart.extend(xi, dt)?;
        let marked = self.mark_curve()?;
        self.stalled = if marked == 0 { self.stalled + 1 } else { 0 };

        self.int_lambda_sq += lambda * lambda * dt;
        self.log_weight += lambda * db / self.cfg.kappa.sqrt()
            - 0.5 * lambda * lambda * dt / self.cfg.kappa;
        self.times.push(t + dt);
        self.values.push(xi);
        self.noise.push(db);
        self.drift.push(lambda);

        // Stop once the marked curve borders b or the live region thins
        // out. A curve that stops advancing while the chart keeps growing
        // means the drift data has gone stale; halt rather than degrade.
        let tip = self.slit.tip();
        if self.slit.base.neighbors(tip).contains(&self.slit.base.b)
            || self.slit.retained_count() < 8
            || self.steps_taken() >= self.cfg.max_steps
            || self.stalled >= 8
        {
            self.finished = true;
        }
        Ok(MsleStep {
            t: t + dt,
            xi,
            lambda,
            dt,
            marked,
            finished: self.finished,
        })
    }

    /// Run until finished or the step budget is exhausted.
    pub fn run(&mut self, rng: &mut impl Rng) -> Result<()> {
        while !self.finished {
            self.step(rng)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::base_chart;
    use crate::geom::{Point, Polygon};
    use crate::lattice::build_domain;
    use crate::rng::task_rng;
    use crate::samplers::lerw::LerwSampler;

    fn square_domain(eps: f64) -> Arc<LatticeDomain> {
        Arc::new(
            build_domain(
                LatticeKind::Square,
                eps,
                &Polygon::unit_square(),
                Point::new(0.5, 0.0),
                Point::new(0.5, 1.0),
            )
            .unwrap(),
        )
    }

    /// Mark a hand-built curve and set up the matching chart by unzipping
    /// its base-chart images.
    fn rig(
        d: &Arc<LatticeDomain>,
        base: &Arc<BaseChart>,
        steps: &[(i32, i32)],
    ) -> (LoewnerChart, SlitDomain) {
        let mut s = SlitDomain::fresh(d.clone());
        let mut curve = vec![s.tip()];
        for &(i, j) in steps {
            let v = d.vertex_at((i, j, 0)).unwrap();
            s.extend(v).unwrap();
            curve.push(v);
        }
        let df = curve_driving(base, &curve).unwrap();
        let mut chart = LoewnerChart::from_base(base.clone());
        chart.extend_with(&df).unwrap();
        (chart, s)
    }

    #[test]
    fn massless_drifts_vanish_exactly() {
        let d = square_domain(1.0 / 16.0);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let (chart, s) = rig(&d, &base, &[(8, 1), (8, 2), (8, 3)]);
        let mp = MassParams::massless(1.0 / 16.0);
        assert_eq!(drift_lerw(&chart, &s, mp).unwrap(), 0.0);
        assert_eq!(drift_bosonic(&chart, &s, mp).unwrap(), 0.0);
        let err = drift_ust(&chart, &s, mp).unwrap_err().to_string();
        assert!(err.contains("log-divergent"), "{err}");
    }

    /// The kernel-ratio drift must flip sign with the geometry: a curve
    /// bent one way and its mirror image give opposite drifts, and the
    /// straight curve sits near zero on the scale of the bent ones.
    #[test]
    fn lerw_drift_flips_under_mirror_symmetry() {
        let eps = 1.0 / 20.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 240).unwrap());
        let mp = MassParams::new(3.0, eps).unwrap();

        let bent = [(10, 1), (10, 2), (10, 3), (9, 3), (8, 3)];
        let mirror = [(10, 1), (10, 2), (10, 3), (11, 3), (12, 3)];
        let straight = [(10, 1), (10, 2), (10, 3), (10, 4), (10, 5)];

        let (c1, s1) = rig(&d, &base, &bent);
        let (c2, s2) = rig(&d, &base, &mirror);
        let (c3, s3) = rig(&d, &base, &straight);
        let l1 = drift_lerw(&c1, &s1, mp).unwrap();
        let l2 = drift_lerw(&c2, &s2, mp).unwrap();
        let l3 = drift_lerw(&c3, &s3, mp).unwrap();

        assert!(l1 != 0.0 && l1.is_finite());
        assert!(
            l1 * l2 < 0.0,
            "mirror curves must drift oppositely: {l1} vs {l2}"
        );
        // The lattice mirror is exact but the chart's seam construction is
        // not mirror-symmetric, so match magnitudes loosely.
        let rel = (l1 + l2).abs() / l1.abs().max(l2.abs());
        assert!(rel < 0.2, "mirror asymmetry {rel}: {l1} vs {l2}");
        assert!(
            l3.abs() < 0.3 * l1.abs().max(l2.abs()),
            "straight curve drift {l3} vs bent {l1}"
        );
    }

    /// Mass on the observable and mass on the kernel are the same
    /// functional; the centered observable makes this exact linear
    /// algebra, not an approximation.
    #[test]
    fn bosonic_orderings_agree() {
        let eps = 1.0 / 12.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let mp = MassParams::new(2.0, eps).unwrap();

        let sampler = LerwSampler::new(d.clone(), mp).unwrap();
        let mut rng = task_rng(21, 9);
        let curve = sampler.sample(&mut rng);
        let take = (curve.vertices.len() - 1).min(5);
        let steps: Vec<(i32, i32)> = curve.vertices[1..take]
            .iter()
            .map(|&v| {
                let c = d.coord(v);
                (c.0, c.1)
            })
            .collect();
        let (chart, s) = rig(&d, &base, &steps);

        let a = drift_bosonic(&chart, &s, mp).unwrap();
        let b = drift_bosonic_kernel_side(&chart, &s, mp).unwrap();
        let scale = a.abs().max(mp.m * mp.m);
        assert!(
            (a - b).abs() < 1e-9 * scale,
            "orderings disagree: {a} vs {b}"
        );

        // |lambda| <= pi m^2 integral P: the centered observable is
        // bounded by pi/2 and the pairing is against a positive density.
        let sys = LiveSystem::assemble(&s, mp, false).unwrap();
        let p = live_poisson(&chart, &sys, eps).unwrap();
        let bound = PI * mp.m * mp.m * cell_area(d.kind, eps) * p.iter().sum::<f64>();
        assert!(a.abs() <= bound, "{a} exceeds the kernel bound {bound}");
    }

    #[test]
    fn ust_functional_is_positive_with_mass() {
        let eps = 1.0 / 12.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let (chart, s) = rig(&d, &base, &[(6, 1), (6, 2)]);
        let mp = MassParams::new(2.0, eps).unwrap();
        let l = drift_ust(&chart, &s, mp).unwrap();
        assert!(l > 0.0 && l.is_finite(), "pair kernel must be positive: {l}");
    }

    /// Shifting the driving point by d moves the bosonic observable by
    /// P(z) d at first order; pins the sign and normalization of the
    /// Poisson weight against the chart convention.
    #[test]
    fn argument_responds_to_the_kernel() {
        let eps = 1.0 / 16.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let (chart, s) = rig(&d, &base, &[(8, 1), (8, 2), (7, 2)]);
        let dl = 1e-3;
        let mut checked = 0;
        let probes = [
            Point::new(0.3, 0.4),
            Point::new(0.7, 0.5),
            Point::new(0.5, 0.7),
            Point::new(0.25, 0.6),
            Point::new(0.75, 0.3),
        ];
        for v in probes.iter().filter_map(|&p| d.nearest_vertex(p)) {
            if !s.is_retained(v) {
                continue;
            }
            let (z, _) = chart.at_vertex(v).unwrap();
            let got = (z - dl).arg() - z.arg();
            let want = poisson_weight(z) * dl;
            assert!(
                (got - want).abs() < 0.01 * want.abs(),
                "response {got} vs kernel {want} at {z}"
            );
            checked += 1;
        }
        assert!(checked >= 4);
    }

    #[test]
    fn massive_evolution_runs_deterministically() {
        let eps = 1.0 / 16.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let mp = MassParams::new(1.2, eps).unwrap();
        let mut cfg = MsleConfig::new(DriftKind::LerwKappa2);
        cfg.max_steps = 40;

        let run = |stream: u64| {
            let mut st = MsleState::new(d.clone(), base.clone(), mp, cfg).unwrap();
            let mut rng = task_rng(5, stream);
            st.run(&mut rng).unwrap();
            st
        };
        let st = run(3);

        assert!(st.steps_taken() > 5, "evolution stalled immediately");
        assert!(st.slit.curve_len() > 3, "curve never marked");
        let df = st.driving();
        df.validate().unwrap();
        assert!(df.times.windows(2).all(|w| w[1] > w[0]));
        assert!(df.values.iter().all(|x| x.is_finite()));
        let drift = df.drift.unwrap();
        assert!(drift.iter().all(|x| x.is_finite()));
        assert!(drift.iter().any(|&x| x != 0.0), "mass produced no drift");
        assert!(st.int_lambda_sq > 0.0 && st.int_lambda_sq.is_finite());
        assert!(st.girsanov_weight().is_finite() && st.girsanov_weight() > 0.0);

        let again = run(3);
        assert_eq!(st.driving().values, again.driving().values);
        assert_eq!(st.slit.curve(), again.slit.curve());
    }

    /// The update law is `xi += sqrt(kappa) noise + lambda dt` with the
    /// caller's own dt and noise, bit for bit.
    #[test]
    fn supplied_noise_enters_the_update_law_exactly() {
        let eps = 1.0 / 16.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let mp = MassParams::new(1.2, eps).unwrap();
        let cfg = MsleConfig::new(DriftKind::LerwKappa2);
        let mut st = MsleState::new(d, base, mp, cfg).unwrap();

        let (dt, noise) = (0.01, 0.02);
        let before = st.chart.xi;
        let step = st.step_with(dt, noise).unwrap();
        assert_eq!(step.dt, dt);
        assert_eq!(
            step.xi,
            before + cfg.kappa.sqrt() * noise + step.lambda * dt
        );
        assert_eq!(st.int_lambda_sq, step.lambda * step.lambda * dt);

        // Sub-floor increments halt instead of degrading.
        let halted = st.step_with(1e-16, 0.0).unwrap();
        assert!(halted.finished && halted.dt == 0.0);
        assert!(st.step_with(0.01, 0.0).is_err());
    }

    #[test]
    fn massless_evolution_is_driftless() {
        let eps = 1.0 / 16.0;
        let d = square_domain(eps);
        let base = Arc::new(base_chart(&d, 200).unwrap());
        let mp = MassParams::massless(eps);
        let mut cfg = MsleConfig::new(DriftKind::Bosonic);
        cfg.max_steps = 20;
        let mut st = MsleState::new(d.clone(), base, mp, cfg).unwrap();
        let mut rng = task_rng(6, 1);
        st.run(&mut rng).unwrap();
        assert!(st.steps_taken() > 3);
        assert!(st.driving().drift.unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(st.int_lambda_sq, 0.0);
        assert_eq!(st.girsanov_weight(), 1.0);
    }
}

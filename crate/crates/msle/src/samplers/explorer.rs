//! Harmonic explorer with killing, as a cell-coloring process.
//!
//! The domain is tiled by hexagonal cells, one per site of the six-valent
//! triangular lattice. At the start the boundary cells carry fixed colors:
//! the counterclockwise arc from `a` to `b` together with `a` is color 1,
//! the complementary arc together with `b` is color 2. The interface
//! between the two colored clusters enters at the gap beside `a` and walks
//! along cell edges, keeping color 2 on its left slot and color 1 on its
//! right slot. At each corner exactly three cells meet: the current pair
//! and a front cell. An uncolored front cell is resolved to color 1 with
//! probability
//!
//! ```text
//! q1 = (1 + h1(front) - h2(front)) / 2 = h1(front) + death(front) / 2
//! ```
//!
//! where `h_i` is the probability that the killed walk from the front cell
//! hits the current color-`i` set, and `death` is the chance it dies first.
//! The two forms agree because every absorbed cell is colored. A colored
//! front cell deflects the interface deterministically: color 1 takes the
//! right slot and the walk turns left, color 2 takes the left slot and the
//! walk turns right. Either way the next front is the remaining common
//! neighbor of the new pair; when none exists the interface has reached the
//! rim and leaves the domain, which a simple-path argument forces to happen
//! at the gap beside `b`.
//!
//! For any fixed cell `z` the field `M(z) = pi * (h1(z) + death(z) / 2)`
//! is an exact martingale of the exploration: conditioning the walk from
//! `z` on reaching the front cell before anything else shows that one
//! resolution changes `E[M(z)]` by `h_front(z) * (pi * q1 - M(front))`,
//! which the step law cancels. Deterministic deflections change nothing.
//! The identity uses only the resolution law, never the walk geometry.
//!
//! Each resolution costs one conjugate-gradient solve for the front
//! column of the inverse operator; hitting masses come from dotting that
//! column against incrementally maintained boundary accumulators, and the
//! previous column warm-starts the next solve.

use crate::error::{MsleError, Result};
use crate::geom::Point;
use crate::lattice::{LatticeDomain, LatticeKind, MassParams, Vertex};
use crate::linsolve::cg_solve;
use crate::potential::LiveSystem;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub const COLOR_ONE: u8 = 1;
pub const COLOR_TWO: u8 = 2;

/// What the interface ran into while sliding forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    /// The front cell is uncolored; call `resolve` (or `step`) next.
    NeedsResolution(Vertex),
    /// The interface left the domain; the trace is complete.
    Terminated,
}

/// Completed (or partial) interface: the corner polyline and the cells the
/// run colored, in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorerTrace {
    pub domain_hash: String,
    /// Gap midpoint, then one corner per deflection, then the exit gap
    /// midpoint once the run has terminated.
    pub points: Vec<Point>,
    pub resolved: Vec<(Vertex, u8)>,
}

#[derive(Clone)]
pub struct Explorer {
    domain: Arc<LatticeDomain>,
    mp: MassParams,
    q: f64,
    survive: f64,
    /// Color per base vertex id. Boundary arcs are colored up front, live
    /// cells when the interface resolves them. Boundary cells with no
    /// interior contact stay unset; they are invisible to the walk.
    colors: Vec<Option<u8>>,
    /// Uncolored interior cells: the state space of the killed walk.
    live: Vec<bool>,
    live_count: usize,
    /// Boundary-data accumulators over base ids, one per color; the entry
    /// at a live `u` is `survive * (number of color-i neighbors)`. Entries
    /// at colored cells are stale and masked out of every dot product.
    rhs: [Vec<f64>; 2],
    /// Warm start for the per-resolution front solve.
    warm: Vec<f64>,
    /// Current pair: `left` is colored 2, `right` is colored 1, and the
    /// interface has just crossed their shared edge.
    left: Vertex,
    right: Vertex,
    /// Cell across the corner ahead; `None` once terminated.
    front: Option<Vertex>,
    path: Vec<Point>,
    resolved: Vec<(Vertex, u8)>,
}

impl Explorer {
    pub fn new(domain: Arc<LatticeDomain>, mp: MassParams) -> Result<Explorer> {
        if domain.kind != LatticeKind::Triangular {
            return Err(MsleError::Sampler(
                "the explorer colors six-valent cells; build the domain triangular".into(),
            ));
        }
        let n = domain.vertex_count();
        let mut colors = vec![None; n];
        let cycle = domain.boundary_cycle();
        let (pa, pb) = (domain.a_cycle_pos, domain.b_cycle_pos);
        let len = cycle.len();
        let mut k = (pa + 1) % len;
        while k != pb {
            colors[cycle[k] as usize] = Some(COLOR_ONE);
            k = (k + 1) % len;
        }
        k = (pb + 1) % len;
        while k != pa {
            colors[cycle[k] as usize] = Some(COLOR_TWO);
            k = (k + 1) % len;
        }
        colors[domain.a as usize] = Some(COLOR_ONE);
        colors[domain.b as usize] = Some(COLOR_TWO);

        let mut live = vec![false; n];
        let mut live_count = 0usize;
        for v in 0..n as u32 {
            if domain.is_interior(v) {
                live[v as usize] = true;
                live_count += 1;
            }
        }
        // Every absorbed cell the walk can reach must be colored, or the
        // two hitting masses would not account for all absorption.
        for v in 0..n as u32 {
            if !live[v as usize] {
                continue;
            }
            for &w in domain.neighbors(v) {
                if !live[w as usize] && colors[w as usize].is_none() {
                    return Err(MsleError::Sampler(format!(
                        "boundary cell {w} touches the interior but got no arc color"
                    )));
                }
            }
        }

        let survive = 1.0 - mp.delta;
        let mut rhs = [vec![0.0; n], vec![0.0; n]];
        for v in 0..n as u32 {
            if !live[v as usize] {
                continue;
            }
            for &w in domain.neighbors(v) {
                if let Some(c) = colors[w as usize] {
                    rhs[(c - 1) as usize][v as usize] += survive;
                }
            }
        }

        // Entry gap: a color-2 neighbor of `a` sharing a live corner cell
        // with it. Smallest ids win to keep runs reproducible.
        let mut entry: Option<(Vertex, Vertex)> = None;
        let mut a_nbrs = domain.neighbors(domain.a).to_vec();
        a_nbrs.sort_unstable();
        'search: for &w in &a_nbrs {
            if colors[w as usize] != Some(COLOR_TWO) {
                continue;
            }
            let mut commons = common_neighbors(&domain, domain.a, w);
            commons.sort_unstable();
            for t in commons {
                if live[t as usize] {
                    entry = Some((w, t));
                    break 'search;
                }
            }
        }
        let (w, t) = entry.ok_or_else(|| {
            MsleError::Sampler("no live opening beside a; the mesh is too coarse".into())
        })?;

        let a = domain.a;
        let start = midpoint(domain.position(a), domain.position(w));
        Ok(Explorer {
            q: domain.kind.full_degree() as f64,
            survive,
            domain,
            mp,
            colors,
            live,
            live_count,
            rhs,
            warm: vec![0.0; n],
            left: w,
            right: a,
            front: Some(t),
            path: vec![start],
            resolved: Vec::new(),
        })
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn mass_params(&self) -> MassParams {
        self.mp
    }

    pub fn color(&self, v: Vertex) -> Option<u8> {
        self.colors[v as usize]
    }

    /// Cells the killed walk may still occupy: uncolored interior.
    pub fn is_live(&self, v: Vertex) -> bool {
        self.live[v as usize]
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    pub fn is_finished(&self) -> bool {
        self.front.is_none()
    }

    /// Number of cells resolved so far; doubles as a staleness generation.
    pub fn generation(&self) -> u64 {
        self.resolved.len() as u64
    }

    /// Slide through colored front cells until the next uncolored one or
    /// the rim. Deflections are deterministic, so this never draws.
    pub fn advance(&mut self) -> Result<Advance> {
        // Each deflection consumes one cell edge and the interface never
        // repeats an edge, so 3n + 2 covers every edge of the tiling.
        let budget = 3 * self.domain.vertex_count() + 2;
        for _ in 0..budget {
            let t = match self.front {
                None => return Ok(Advance::Terminated),
                Some(t) => t,
            };
            if self.live[t as usize] {
                return Ok(Advance::NeedsResolution(t));
            }
            self.deflect(t);
        }
        Err(MsleError::Sampler(
            "interface failed to leave a colored region; the coloring is inconsistent".into(),
        ))
    }

    /// Pivot at the corner where `left`, `right`, and the colored front
    /// cell `t` meet.
    fn deflect(&mut self, t: Vertex) {
        let d = &self.domain;
        self.path.push(centroid(
            d.position(self.left),
            d.position(self.right),
            d.position(t),
        ));
        let departed = match self.colors[t as usize] {
            Some(c) if c == COLOR_ONE => std::mem::replace(&mut self.right, t),
            Some(_) => std::mem::replace(&mut self.left, t),
            None => unreachable!("deflect needs a colored front"),
        };
        let next = common_neighbors(d, self.left, self.right)
            .into_iter()
            .find(|&x| x != departed)
            // A cell no walk can reach has no meaningful color; the corner
            // it spans sits outside the explored region, so the interface
            // leaves there just as it would with no third cell at all.
            .filter(|&x| self.live[x as usize] || self.colors[x as usize].is_some());
        self.front = next;
        if next.is_none() {
            self.path
                .push(midpoint(d.position(self.left), d.position(self.right)));
        }
    }

    /// Hitting masses `(h1, h2)` of the two colored sets from the front
    /// cell, by one masked conjugate-gradient solve: with `x` the front
    /// column of the inverse operator and the operator symmetric, the
    /// Dirichlet value at the front is the masked dot of `x` with either
    /// accumulator.
    pub fn front_hit_masses(&mut self) -> Result<(f64, f64)> {
        let t = match self.front {
            Some(t) if self.live[t as usize] => t,
            _ => {
                return Err(MsleError::Sampler(
                    "no uncolored front cell; advance the explorer first".into(),
                ))
            }
        };
        let base = self.domain.clone();
        let n = base.vertex_count();
        let live = &self.live;
        let (q, survive) = (self.q, self.survive);
        let apply = move |x: &[f64], y: &mut [f64]| {
            for v in 0..n {
                if live[v] {
                    let mut s = q * x[v];
                    for &u in base.neighbors(v as Vertex) {
                        if live[u as usize] {
                            s -= survive * x[u as usize];
                        }
                    }
                    y[v] = s;
                } else {
                    y[v] = x[v];
                }
            }
        };
        let mut e = vec![0.0; n];
        e[t as usize] = 1.0;
        let (x, _iters) = cg_solve(&apply, &e, Some(&self.warm), 1e-12, 20 * n + 200)?;
        let mut h = [0.0; 2];
        for v in 0..n {
            if self.live[v] {
                h[0] += x[v] * self.rhs[0][v];
                h[1] += x[v] * self.rhs[1][v];
            }
        }
        self.warm = x;
        Ok((h[0], h[1]))
    }

    /// Probability that the current front cell resolves to color 1.
    pub fn step_probability(&mut self) -> Result<f64> {
        let (h1, h2) = self.front_hit_masses()?;
        Ok((0.5 * (1.0 + h1 - h2)).clamp(0.0, 1.0))
    }

    /// Color the front cell. The interface pivots on the next `advance`.
    pub fn resolve(&mut self, color: u8) -> Result<()> {
        if color != COLOR_ONE && color != COLOR_TWO {
            return Err(MsleError::Sampler(format!("no such color {color}")));
        }
        let t = match self.front {
            Some(t) if self.live[t as usize] => t,
            _ => {
                return Err(MsleError::Sampler(
                    "no uncolored front cell; advance the explorer first".into(),
                ))
            }
        };
        self.colors[t as usize] = Some(color);
        self.live[t as usize] = false;
        self.live_count -= 1;
        self.warm[t as usize] = 0.0;
        let ci = (color - 1) as usize;
        for &u in self.domain.neighbors(t) {
            if self.live[u as usize] {
                self.rhs[ci][u as usize] += self.survive;
            }
        }
        self.resolved.push((t, color));
        Ok(())
    }

    /// Slide to the next uncolored cell and resolve it at the step law.
    pub fn step(&mut self, rng: &mut impl Rng) -> Result<Advance> {
        match self.advance()? {
            Advance::Terminated => Ok(Advance::Terminated),
            Advance::NeedsResolution(t) => {
                let q1 = self.step_probability()?;
                let color = if rng.random::<f64>() < q1 {
                    COLOR_ONE
                } else {
                    COLOR_TWO
                };
                self.resolve(color)?;
                Ok(Advance::NeedsResolution(t))
            }
        }
    }

    /// Run to termination and return the completed trace.
    pub fn run(&mut self, rng: &mut impl Rng) -> Result<ExplorerTrace> {
        let budget = self.live_count + 2;
        for _ in 0..budget {
            if let Advance::Terminated = self.step(rng)? {
                return Ok(self.trace());
            }
        }
        Err(MsleError::Sampler(
            "explorer resolved more cells than the domain holds".into(),
        ))
    }

    /// Snapshot of the interface so far; complete once `is_finished`.
    pub fn trace(&self) -> ExplorerTrace {
        ExplorerTrace {
            domain_hash: self.domain.hash().to_string(),
            points: self.path.clone(),
            resolved: self.resolved.clone(),
        }
    }

    /// The interface field at the given cells: `pi` on color-1 cells, `0`
    /// on color-2 cells; on a live cell, `pi` times the chance the killed
    /// walk hits the color-1 set plus half its death mass. The step law is
    /// built from the same hitting masses, so one resolution leaves the
    /// conditional mean of this field unchanged at every cell.
    pub fn observable_at(&self, cells: &[Vertex]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; cells.len()];
        let mut live_needed = false;
        for (&z, o) in cells.iter().zip(&mut out) {
            match self.color(z) {
                Some(c) => *o = if c == COLOR_ONE { PI } else { 0.0 },
                None if self.is_live(z) => live_needed = true,
                None => {
                    return Err(MsleError::Sampler(format!(
                        "cell {z} is invisible to the interface"
                    )))
                }
            }
        }
        if !live_needed {
            return Ok(out);
        }
        let sys = LiveSystem::assemble_masked(
            &self.domain,
            self.mp,
            &|v| self.is_live(v),
            &|v| self.color(v).is_some(),
            self.generation(),
            false,
        )?;
        let h1 = sys.dirichlet(&|v, _| {
            if self.color(v) == Some(COLOR_ONE) {
                1.0
            } else {
                0.0
            }
        })?;
        let surv = sys.survival_to_boundary()?;
        for (&z, o) in cells.iter().zip(&mut out) {
            if self.color(z).is_none() {
                let h = sys.at(&h1, z).expect("live cell is in the system");
                let s = sys.at(&surv, z).expect("live cell is in the system");
                *o = PI * (h + 0.5 * (1.0 - s));
            }
        }
        Ok(out)
    }
}

/// Common neighbors of two adjacent cells: the at most two cells touching
/// both ends of a shared edge.
fn common_neighbors(d: &LatticeDomain, u: Vertex, v: Vertex) -> Vec<Vertex> {
    d.neighbors(u)
        .iter()
        .copied()
        .filter(|w| d.neighbors(v).contains(w))
        .collect()
}

fn midpoint(p: Point, r: Point) -> Point {
    Point::new(0.5 * (p.x + r.x), 0.5 * (p.y + r.y))
}

fn centroid(p: Point, r: Point, s: Point) -> Point {
    Point::new((p.x + r.x + s.x) / 3.0, (p.y + r.y + s.y) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polygon;
    use crate::lattice::build_domain;
    use crate::potential::LiveSystem;
    use crate::rng::task_rng;
    use std::f64::consts::PI;

    fn tri_domain(w: f64, h: f64, eps: f64) -> Arc<LatticeDomain> {
        Arc::new(
            build_domain(
                LatticeKind::Triangular,
                eps,
                &Polygon::rect(0.0, 0.0, w, h),
                Point::new(w / 2.0, 0.0),
                Point::new(w / 2.0, h),
            )
            .unwrap(),
        )
    }

    fn masked_system(e: &Explorer) -> LiveSystem {
        LiveSystem::assemble_masked(
            e.domain(),
            e.mass_params(),
            &|v| e.is_live(v),
            &|v| e.color(v).is_some(),
            e.generation(),
            true,
        )
        .unwrap()
    }

    /// Hitting masses from scratch: full assembly of the masked system and
    /// two Dirichlet solves, no incremental state.
    fn masses_reference(e: &Explorer, t: Vertex) -> (f64, f64) {
        let sys = masked_system(e);
        let h1 = sys
            .dirichlet(&|v, _| if e.color(v) == Some(COLOR_ONE) { 1.0 } else { 0.0 })
            .unwrap();
        let h2 = sys
            .dirichlet(&|v, _| if e.color(v) == Some(COLOR_TWO) { 1.0 } else { 0.0 })
            .unwrap();
        (sys.at(&h1, t).unwrap(), sys.at(&h2, t).unwrap())
    }

    #[test]
    fn other_lattices_are_refused() {
        for kind in [LatticeKind::Square, LatticeKind::Hexagonal] {
            let d = Arc::new(
                build_domain(
                    kind,
                    0.2,
                    &Polygon::unit_square(),
                    Point::new(0.5, 0.0),
                    Point::new(0.5, 1.0),
                )
                .unwrap(),
            );
            assert!(Explorer::new(d, MassParams::massless(0.2)).is_err());
        }
    }

    #[test]
    fn incremental_masses_match_fresh_solves() {
        let d = tri_domain(1.0, 1.0, 0.11);
        for &m in &[0.0, 1.8] {
            let mp = MassParams::new(m, 0.11).unwrap();
            let mut e = Explorer::new(d.clone(), mp).unwrap();
            let mut rng = task_rng(31, m as u64);
            for step in 0..300 {
                match e.advance().unwrap() {
                    Advance::Terminated => break,
                    Advance::NeedsResolution(t) => {
                        let (h1, h2) = e.front_hit_masses().unwrap();
                        let (r1, r2) = masses_reference(&e, t);
                        assert!(
                            (h1 - r1).abs() < 1e-8 && (h2 - r2).abs() < 1e-8,
                            "m {m} step {step}: incremental ({h1}, {h2}) vs fresh ({r1}, {r2})"
                        );
                        // All absorption is colored, so the two q1 forms
                        // agree: (1 + h1 - h2)/2 = h1 + death/2.
                        let sys = masked_system(&e);
                        let death = 1.0 - sys.at(&sys.survival_to_boundary().unwrap(), t).unwrap();
                        assert!((0.5 * (1.0 + h1 - h2) - (h1 + 0.5 * death)).abs() < 1e-8);
                        let q1 = e.step_probability().unwrap();
                        let color = if rng.random::<f64>() < q1 {
                            COLOR_ONE
                        } else {
                            COLOR_TWO
                        };
                        e.resolve(color).unwrap();
                    }
                }
            }
            assert!(e.is_finished(), "mass {m} run did not terminate");
        }
    }

    fn observable(e: &Explorer, z: Vertex) -> f64 {
        e.observable_at(&[z]).unwrap()[0]
    }

    #[test]
    fn trajectory_tree_is_a_probability_distribution() {
        // Exhaust every resolution sequence on a tiny domain; the leaf
        // masses must sum to one, every node must satisfy the one-step
        // martingale identity, and every leaf must exit beside b.
        let eps = 0.15;
        let d = tri_domain(0.62, 0.55, eps);
        let interior = d.interior_count();
        assert!(
            (5..=14).contains(&interior),
            "tree test wants a small domain, got {interior} interior cells"
        );
        let probes: Vec<Vertex> = {
            let pa = d.position(d.a);
            let mut vs: Vec<Vertex> = (0..d.vertex_count() as u32)
                .filter(|&v| d.is_interior(v))
                .collect();
            vs.sort_by(|&u, &v| {
                d.position(v)
                    .dist(pa)
                    .partial_cmp(&d.position(u).dist(pa))
                    .unwrap()
            });
            vs.truncate(3);
            vs
        };
        let pb = d.position(d.b);

        for &m in &[0.0, 2.5] {
            let mp = MassParams::new(m, eps).unwrap();
            let root = Explorer::new(d.clone(), mp).unwrap();
            let mut total_mass = 0.0;
            let mut leaves = 0usize;
            let mut nodes = 0usize;
            let mut stack: Vec<(Explorer, f64)> = vec![(root, 1.0)];
            while let Some((mut e, mass)) = stack.pop() {
                nodes += 1;
                assert!(nodes < 200_000, "trajectory tree too large");
                match e.advance().unwrap() {
                    Advance::Terminated => {
                        total_mass += mass;
                        leaves += 1;
                        let trace = e.trace();
                        let exit = *trace.points.last().unwrap();
                        assert!(
                            exit.dist(pb) < 1.3 * eps,
                            "leaf exits at ({}, {}), away from b",
                            exit.x,
                            exit.y
                        );
                    }
                    Advance::NeedsResolution(_) => {
                        let q1 = e.step_probability().unwrap();
                        assert!((-1e-9..=1.0 + 1e-9).contains(&q1));
                        let before: Vec<f64> =
                            probes.iter().map(|&z| observable(&e, z)).collect();
                        let mut e1 = e.clone();
                        e1.resolve(COLOR_ONE).unwrap();
                        let mut e2 = e;
                        e2.resolve(COLOR_TWO).unwrap();
                        for (k, &z) in probes.iter().enumerate() {
                            let mixed =
                                q1 * observable(&e1, z) + (1.0 - q1) * observable(&e2, z);
                            assert!(
                                (mixed - before[k]).abs() < 1e-8,
                                "martingale broken at mass {m}, probe {z}: {mixed} vs {}",
                                before[k]
                            );
                        }
                        if q1 > 0.0 {
                            stack.push((e1, mass * q1));
                        }
                        if q1 < 1.0 {
                            stack.push((e2, mass * (1.0 - q1)));
                        }
                    }
                }
            }
            assert!(leaves > 1, "tree degenerated to a single branch");
            assert!(
                (total_mass - 1.0).abs() < 1e-9,
                "leaf masses sum to {total_mass}"
            );
        }
    }

    #[test]
    fn traces_cross_to_b_and_are_simple() {
        let eps = 0.07;
        let d = tri_domain(1.0, 1.0, eps);
        let side = eps / 3.0f64.sqrt();
        for &m in &[0.0, 1.0] {
            let mp = MassParams::new(m, eps).unwrap();
            for i in 0..20 {
                let mut e = Explorer::new(d.clone(), mp).unwrap();
                let mut rng = task_rng(77, 1000 * (m as u64) + i);
                let trace = e.run(&mut rng).unwrap();
                assert_eq!(trace.domain_hash, d.hash());

                let first = trace.points[0];
                let last = *trace.points.last().unwrap();
                assert!(first.dist(d.position(d.a)) < eps);
                assert!(
                    last.dist(d.position(d.b)) < 2.0 * eps,
                    "run {i} at mass {m} exits at ({}, {})",
                    last.x,
                    last.y
                );

                // Gap stubs are half an edge, corner steps a full edge.
                let k = trace.points.len();
                for j in 1..k {
                    let step = trace.points[j - 1].dist(trace.points[j]);
                    let want = if j == 1 || j == k - 1 { side / 2.0 } else { side };
                    assert!(
                        (step - want).abs() < 1e-9,
                        "segment {j} has length {step}, want {want}"
                    );
                }
                // A simple interface never revisits a corner.
                for j in 0..k {
                    for l in j + 1..k {
                        assert!(
                            trace.points[j].dist(trace.points[l]) > side / 10.0,
                            "corners {j} and {l} coincide"
                        );
                    }
                }
                // Resolved cells are distinct and all carry their color.
                let mut seen = std::collections::HashSet::new();
                for &(v, c) in &trace.resolved {
                    assert!(seen.insert(v), "cell {v} resolved twice");
                    assert_eq!(e.color(v), Some(c));
                }
            }
        }
    }

    #[test]
    fn killing_pushes_the_interface_toward_its_own_arc() {
        // With heavy killing the walk from the front cell mostly dies, so
        // q1 hugs 1/2 plus a boundary-local correction; with no killing on
        // a wide domain the first q1 is close to 1/2 by symmetry. Check
        // the massless symmetry and that the masses shift q1 sensibly.
        let eps = 0.09;
        let d = tri_domain(1.0, 1.0, eps);
        let mut e0 = Explorer::new(d.clone(), MassParams::massless(eps)).unwrap();
        e0.advance().unwrap();
        let q0 = e0.step_probability().unwrap();
        assert!((q0 - 0.5).abs() < 0.25, "first massless q1 = {q0}");

        // The martingale observable starts near pi/2 at the center.
        let center = {
            let target = Point::new(0.5, 0.5);
            (0..d.vertex_count() as u32)
                .filter(|&v| d.is_interior(v))
                .min_by(|&u, &v| {
                    d.position(u)
                        .dist(target)
                        .partial_cmp(&d.position(v).dist(target))
                        .unwrap()
                })
                .unwrap()
        };
        let m0 = observable(&e0, center);
        assert!((m0 - PI / 2.0).abs() < 0.2, "central field = {m0}");

        // Heavy killing drives the central field to pi/2: the walk almost
        // surely dies before reaching either arc.
        let heavy = Explorer::new(d, MassParams::new(10.0, eps).unwrap()).unwrap();
        let mh = observable(&heavy, center);
        assert!((mh - PI / 2.0).abs() < 0.02, "heavy-killing field = {mh}");
    }
}

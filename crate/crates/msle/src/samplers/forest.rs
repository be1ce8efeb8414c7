//! Cycle-free subgraphs weighted by component count, sampled by a rooted
//! variant of Wilson's algorithm, plus the space-filling contour around
//! the component attached to the wired boundary arc. Everything here is
//! experimental.
//!
//! The target law weights a forest containing the wired arc by `alpha` per
//! connected component. No exact sampler for that law is known, so the
//! sampler runs loop-erased random walks that plant a new root wherever
//! the walk is killed, with per-step kill probability `rho`. The law of
//! that construction is exactly computable: relative to the spanning-tree
//! case, each extra component C contributes
//!
//! ```text
//! rho / (1 - rho) * sum of deg(v) over v in C
//! ```
//!
//! which differs from a flat `alpha` by the size-biased degree sum. The
//! shipped table maps `alpha` to the kill rate whose law is closest in
//! total variation on a small reference domain, and the enumeration tests
//! measure the residual gap instead of hiding it.

use crate::error::{MsleError, Result};
use crate::geom::Point;
use crate::lattice::{LatticeDomain, LatticeKind, Vertex, NO_VERTEX};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Wired-arc forest parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    /// Weight per connected component; 0 forces a single spanning tree.
    pub alpha: f64,
    /// Boundary path from `a` to `b` whose edges every forest contains.
    pub wired: Vec<Vertex>,
}

impl ForestConfig {
    /// Wire the counterclockwise boundary arc from `a` to `b`.
    pub fn ccw_arc(d: &LatticeDomain, alpha: f64) -> Result<ForestConfig> {
        let cycle = d.boundary_cycle();
        let len = cycle.len();
        let mut wired = vec![d.a];
        let mut k = (d.a_cycle_pos + 1) % len;
        loop {
            wired.push(cycle[k]);
            if k == d.b_cycle_pos {
                break;
            }
            k = (k + 1) % len;
        }
        let cfg = ForestConfig { alpha, wired };
        cfg.validate(d)?;
        Ok(cfg)
    }

    pub fn validate(&self, d: &LatticeDomain) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(MsleError::Sampler(format!(
                "component weight {} is not a nonnegative number",
                self.alpha
            )));
        }
        if self.wired.len() < 2 || self.wired[0] != d.a || *self.wired.last().unwrap() != d.b {
            return Err(MsleError::Sampler(
                "wired arc must run from a to b".into(),
            ));
        }
        for w in self.wired.windows(2) {
            if !d.neighbors(w[0]).contains(&w[1]) {
                return Err(MsleError::Sampler(format!(
                    "wired arc vertices {} and {} are not adjacent",
                    w[0], w[1]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !self.wired.iter().all(|&v| seen.insert(v)) {
            return Err(MsleError::Sampler("wired arc revisits a vertex".into()));
        }
        Ok(())
    }

    fn is_arc_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.wired
            .windows(2)
            .any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u))
    }
}

/// Kill rates matched to component weights on the reference domain (total
/// variation between the exact laws, see `calibrate_root_rate`). Entries
/// are (alpha, rho); queries interpolate linearly.
pub const ROOT_RATE_TABLE: &[(f64, f64)] = &[
    (0.0, 0.0),
    (0.25, 0.0651),
    (0.5, 0.1242),
    (0.75, 0.1776),
    (1.0, 0.2259),
    (1.5, 0.3092),
    (2.0, 0.3778),
];

/// Kill rate for a component weight, from the shipped calibration table.
pub fn root_rate_for(alpha: f64) -> Result<f64> {
    let last = ROOT_RATE_TABLE.last().unwrap().0;
    if !(0.0..=last).contains(&alpha) {
        return Err(MsleError::Sampler(format!(
            "component weight {alpha} is outside the calibrated range [0, {last}]"
        )));
    }
    for w in ROOT_RATE_TABLE.windows(2) {
        let ((a0, r0), (a1, r1)) = (w[0], w[1]);
        if alpha <= a1 {
            let t = (alpha - a0) / (a1 - a0);
            return Ok(r0 + t * (r1 - r0));
        }
    }
    Ok(ROOT_RATE_TABLE.last().unwrap().1)
}

/// A sampled forest: the wired arc, every tree edge, and the vertices
/// where walks were killed (each roots one non-arc component).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledForest {
    pub domain_hash: String,
    /// All forest edges, wired arc included, as (min, max) pairs.
    pub edges: Vec<(Vertex, Vertex)>,
    pub roots: Vec<Vertex>,
}

impl SampledForest {
    /// Component label (smallest member id) per vertex.
    pub fn component_labels(&self, d: &LatticeDomain) -> Vec<Vertex> {
        let n = d.vertex_count();
        let mut uf = UnionFind::new(n);
        for &(u, v) in &self.edges {
            uf.union(u as usize, v as usize);
        }
        let mut label = vec![NO_VERTEX; n];
        for v in 0..n {
            let r = uf.find(v);
            if label[r] == NO_VERTEX || v < label[r] as usize {
                label[r] = v as Vertex;
            }
        }
        (0..n).map(|v| label[uf.find(v)]).collect()
    }

    pub fn component_count(&self, d: &LatticeDomain) -> usize {
        let labels = self.component_labels(d);
        let mut distinct: Vec<Vertex> = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let _ = labels;
        distinct.len()
    }
}

/// Wilson's algorithm with a cemetery: walks are absorbed by the growing
/// forest or killed with probability `rho` per step; a killed walk's
/// loop-erasure becomes a new tree rooted at the kill site.
pub fn sample_forest_with_root_rate(
    d: &Arc<LatticeDomain>,
    cfg: &ForestConfig,
    rho: f64,
    rng: &mut impl Rng,
) -> Result<SampledForest> {
    if d.kind != LatticeKind::Square {
        return Err(MsleError::Sampler(
            "forest sampling is set up for the square lattice".into(),
        ));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(MsleError::Sampler(format!("kill rate {rho} is not in [0, 1)")));
    }
    cfg.validate(d)?;

    let n = d.vertex_count();
    let mut in_forest = vec![false; n];
    for &v in &cfg.wired {
        in_forest[v as usize] = true;
    }
    let mut edges: Vec<(Vertex, Vertex)> = cfg
        .wired
        .windows(2)
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect();
    let mut roots = Vec::new();

    let mut path: Vec<Vertex> = Vec::new();
    let mut pos = vec![NO_VERTEX; n];
    let budget = 500 * n * n + 10_000;
    let mut steps = 0usize;
    for s in 0..n as u32 {
        if in_forest[s as usize] {
            continue;
        }
        path.clear();
        path.push(s);
        pos[s as usize] = 0;
        loop {
            steps += 1;
            if steps > budget {
                return Err(MsleError::Sampler(
                    "forest walk exceeded its step budget".into(),
                ));
            }
            let v = *path.last().unwrap();
            if rho > 0.0 && rng.random::<f64>() < rho {
                roots.push(v);
                break;
            }
            let nb = d.neighbors(v);
            let u = nb[rng.random_range(0..nb.len())];
            if in_forest[u as usize] {
                path.push(u);
                break;
            }
            let p = pos[u as usize];
            if p != NO_VERTEX {
                for &w in &path[p as usize + 1..] {
                    pos[w as usize] = NO_VERTEX;
                }
                path.truncate(p as usize + 1);
            } else {
                pos[u as usize] = path.len() as u32;
                path.push(u);
            }
        }
        for w in path.windows(2) {
            edges.push((w[0].min(w[1]), w[0].max(w[1])));
        }
        for &w in &path {
            in_forest[w as usize] = true;
            pos[w as usize] = NO_VERTEX;
        }
    }
    Ok(SampledForest {
        domain_hash: d.hash().to_string(),
        edges,
        roots,
    })
}

/// Sample at the table-calibrated kill rate for `cfg.alpha`.
pub fn sample_forest(
    d: &Arc<LatticeDomain>,
    cfg: &ForestConfig,
    rng: &mut impl Rng,
) -> Result<SampledForest> {
    let rho = root_rate_for(cfg.alpha)?;
    sample_forest_with_root_rate(d, cfg, rho, rng)
}

/// The contour around the wired component, from `a` to `b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeanoCurve {
    pub domain_hash: String,
    /// `a`, then one point per face corner the contour rounds, then `b`.
    pub points: Vec<Point>,
}

/// Trace the interface hugging the wired component: start beside `a` on
/// the free-arc side, keep the component on the wired side, end beside
/// `b`. Corners are face-corner points at quarter-step offsets, so a
/// spanning tree yields a space-filling curve.
pub fn peano_interface(
    d: &LatticeDomain,
    f: &SampledForest,
    cfg: &ForestConfig,
) -> Result<PeanoCurve> {
    if f.domain_hash != d.hash() {
        return Err(MsleError::Sampler("forest/domain hash mismatch".into()));
    }
    cfg.validate(d)?;
    let n = d.vertex_count();

    // Tree edges of the component containing the arc, indexed by compass
    // octant: 0 = east, 2 = north, 4 = west, 6 = south.
    let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); n];
    for &(u, v) in &f.edges {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    let mut in_comp = vec![false; n];
    let mut queue: Vec<Vertex> = cfg.wired.clone();
    for &v in &queue {
        in_comp[v as usize] = true;
    }
    while let Some(v) = queue.pop() {
        for &u in &adj[v as usize] {
            if !in_comp[u as usize] {
                in_comp[u as usize] = true;
                queue.push(u);
            }
        }
    }
    let mut edge_at = vec![[NO_VERTEX; 4]; n];
    for &(u, v) in &f.edges {
        if in_comp[u as usize] {
            edge_at[u as usize][(octant(d, u, v) / 2) as usize] = v;
            edge_at[v as usize][(octant(d, v, u) / 2) as usize] = u;
        }
    }

    // The contour is the closed tour of the wired component cut twice:
    // once in the outward gap at a between the free flank and the first
    // wired edge, once in the matching gap at b. Each cut sits at the
    // middle octant of that outward range, so free-side subtrees hanging
    // off a or b stay inside the tour.
    let cycle = d.boundary_cycle();
    let len = cycle.len();
    let a_flank = cycle[(d.a_cycle_pos + len - 1) % len];
    let b_flank = cycle[(d.b_cycle_pos + 1) % len];
    for (end, flank) in [(d.a, a_flank), (d.b, b_flank)] {
        if !d.neighbors(end).contains(&flank) {
            return Err(MsleError::Sampler(format!(
                "boundary vertex {end} has no adjacent free-side flank"
            )));
        }
    }
    let o_wa = octant(d, d.a, cfg.wired[1]);
    let o_fa = octant(d, d.a, a_flank);
    let gap_a = (o_wa + 15 - o_fa) % 8;
    let cut_a = (o_fa + 1 + (gap_a - 1) / 2) % 8;
    let k = cfg.wired.len() - 1;
    let o_wb = octant(d, d.b, cfg.wired[k - 1]);
    let o_fb = octant(d, d.b, b_flank);
    let gap_b = (o_fb + 15 - o_wb) % 8;
    let cut_b = (o_wb + 1 + (gap_b - 1) / 2) % 8;

    let ctx = PeanoCtx { d, edge_at };
    let mut points = vec![d.position(d.a)];
    for (i, &w) in cfg.wired.iter().enumerate() {
        let start = if i == 0 {
            cut_a
        } else {
            octant(d, w, cfg.wired[i - 1])
        };
        let stop = if i == k {
            cut_b
        } else {
            octant(d, w, cfg.wired[i + 1])
        };
        ctx.sweep_cw(w, start, stop, &mut points);
    }
    points.push(d.position(d.b));
    Ok(PeanoCurve {
        domain_hash: d.hash().to_string(),
        points,
    })
}

/// Sample a forest at the calibrated rate and trace its interface.
pub fn sample_forest_peano(
    d: &Arc<LatticeDomain>,
    cfg: &ForestConfig,
    rng: &mut impl Rng,
) -> Result<PeanoCurve> {
    let f = sample_forest(d, cfg, rng)?;
    peano_interface(d, &f, cfg)
}

struct PeanoCtx<'a> {
    d: &'a LatticeDomain,
    edge_at: Vec<[Vertex; 4]>,
}

impl PeanoCtx<'_> {
    /// Walk the contour clockwise around `v` from the `start` octant to
    /// the `stop` octant (both exclusive; equal means a full circle).
    /// Odd octants emit face corners, even octants descend into subtrees.
    fn sweep_cw(&self, v: Vertex, start: u8, stop: u8, out: &mut Vec<Point>) {
        let count = (start + 8 - stop + 7) % 8;
        let mut o = (start + 7) % 8;
        for _ in 0..count {
            if o % 2 == 1 {
                out.push(corner(self.d, v, o));
            } else {
                let u = self.edge_at[v as usize][(o / 2) as usize];
                if u != NO_VERTEX {
                    let back = (o + 4) % 8;
                    self.sweep_cw(u, back, back, out);
                }
            }
            o = (o + 7) % 8;
        }
    }
}

/// Compass octant of the axis-aligned step `from -> to`.
fn octant(d: &LatticeDomain, from: Vertex, to: Vertex) -> u8 {
    let (p, q) = (d.position(from), d.position(to));
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let t = 0.5 * d.epsilon;
    if dx > t {
        0
    } else if dy > t {
        2
    } else if dx < -t {
        4
    } else if dy < -t {
        6
    } else {
        unreachable!("octant of a zero step")
    }
}

fn corner(d: &LatticeDomain, v: Vertex, o: u8) -> Point {
    let p = d.position(v);
    let h = 0.25 * d.epsilon;
    let (sx, sy) = match o {
        1 => (1.0, 1.0),
        3 => (-1.0, 1.0),
        5 => (-1.0, -1.0),
        7 => (1.0, -1.0),
        _ => unreachable!("corners sit at odd octants"),
    };
    Point::new(p.x + h * sx, p.y + h * sy)
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n as u32).collect())
    }

    fn find(&mut self, v: usize) -> usize {
        let mut r = v;
        while self.0[r] as usize != r {
            r = self.0[r] as usize;
        }
        let mut c = v;
        while c != r {
            let next = self.0[c] as usize;
            self.0[c] = r as u32;
            c = next;
        }
        r
    }

    /// Returns false if the two were already joined.
    fn union(&mut self, u: usize, v: usize) -> bool {
        let (ru, rv) = (self.find(u), self.find(v));
        if ru == rv {
            return false;
        }
        self.0[ru] = rv as u32;
        true
    }
}

/// One forest in an exhaustive enumeration: its free-edge set, component
/// count, and the degree sum of every component off the arc.
struct ForestCase {
    // Read by tests that index sampled forests back into the enumeration.
    #[cfg_attr(not(test), allow(dead_code))]
    key: Vec<(Vertex, Vertex)>,
    components: usize,
    off_arc_degree_sums: Vec<f64>,
}

fn enumerate_cases(d: &LatticeDomain, cfg: &ForestConfig) -> Vec<ForestCase> {
    let n = d.vertex_count();
    let mut free: Vec<(Vertex, Vertex)> = Vec::new();
    for u in 0..n as u32 {
        for &v in d.neighbors(u) {
            if u < v && !cfg.is_arc_edge(u, v) {
                free.push((u, v));
            }
        }
    }
    let mut base = UnionFind::new(n);
    for w in cfg.wired.windows(2) {
        base.union(w[0] as usize, w[1] as usize);
    }

    let mut out = Vec::new();
    let mut chosen: Vec<(Vertex, Vertex)> = Vec::new();
    fn rec(
        d: &LatticeDomain,
        free: &[(Vertex, Vertex)],
        idx: usize,
        uf: &UnionFind,
        chosen: &mut Vec<(Vertex, Vertex)>,
        out: &mut Vec<ForestCase>,
    ) {
        if idx == free.len() {
            let mut uf = UnionFind(uf.0.clone());
            let n = uf.0.len();
            let arc_root = uf.find(d.a as usize);
            let mut sums = std::collections::HashMap::new();
            for v in 0..n {
                let r = uf.find(v);
                *sums.entry(r).or_insert(0.0) += d.neighbors(v as Vertex).len() as f64;
            }
            let components = sums.len();
            let off_arc_degree_sums = sums
                .into_iter()
                .filter(|&(r, _)| r != arc_root)
                .map(|(_, s)| s)
                .collect();
            out.push(ForestCase {
                key: chosen.clone(),
                components,
                off_arc_degree_sums,
            });
            return;
        }
        rec(d, free, idx + 1, uf, chosen, out);
        let (u, v) = free[idx];
        let mut with = UnionFind(uf.0.clone());
        if with.union(u as usize, v as usize) {
            chosen.push((u, v));
            rec(d, free, idx + 1, &with, chosen, out);
            chosen.pop();
        }
    }
    rec(d, &free, 0, &base, &mut chosen, &mut out);
    out
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Target law: weight alpha per component beyond the arc's.
fn alpha_law(cases: &[ForestCase], alpha: f64) -> Vec<f64> {
    normalize(
        cases
            .iter()
            .map(|c| alpha.powi(c.components as i32 - 1))
            .collect(),
    )
}

/// Exact law of the killed-Wilson sampler at kill rate rho.
fn killed_wilson_law(cases: &[ForestCase], rho: f64) -> Vec<f64> {
    let t = rho / (1.0 - rho);
    normalize(
        cases
            .iter()
            .map(|c| c.off_arc_degree_sums.iter().map(|s| t * s).product())
            .collect(),
    )
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Kill rate minimizing the total variation between the sampler's exact
/// law and the component-weight law on `d`, by exhaustive enumeration.
/// The shipped table freezes this on the reference domain.
pub fn calibrate_root_rate(d: &LatticeDomain, cfg: &ForestConfig) -> Result<f64> {
    cfg.validate(d)?;
    if cfg.alpha == 0.0 {
        return Ok(0.0);
    }
    let cases = enumerate_cases(d, cfg);
    if cases.len() > 200_000 {
        return Err(MsleError::Sampler(
            "calibration domain too large to enumerate".into(),
        ));
    }
    let target = alpha_law(&cases, cfg.alpha);
    let tv_at = |rho: f64| total_variation(&killed_wilson_law(&cases, rho), &target);
    let mut best = (f64::INFINITY, 0.0);
    let coarse = 400;
    for i in 1..coarse {
        let rho = 0.93 * i as f64 / coarse as f64;
        let tv = tv_at(rho);
        if tv < best.0 {
            best = (tv, rho);
        }
    }
    let step = 0.93 / coarse as f64;
    for i in 0..200 {
        let rho = (best.1 - step) + 2.0 * step * i as f64 / 199.0;
        if rho <= 0.0 || rho >= 1.0 {
            continue;
        }
        let tv = tv_at(rho);
        if tv < best.0 {
            best = (tv, rho);
        }
    }
    Ok(best.1)
}

/// Reference domain the shipped table was calibrated on: a 3 x 3 block
/// with six boundary vertices wired, leaving three free vertices (two on
/// the left edge plus the center) and seven free edges.
pub fn reference_domain() -> Arc<LatticeDomain> {
    use crate::geom::Polygon;
    Arc::new(
        crate::lattice::build_domain(
            LatticeKind::Square,
            0.25,
            &Polygon::rect(0.0, 0.0, 0.5, 0.5),
            Point::new(0.25, 0.0),
            Point::new(0.0, 0.5),
        )
        .unwrap(),
    )
}

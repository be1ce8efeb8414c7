//! Loop-erased random walk with killing, conditioned to run from `a` to `b`.
//!
//! The underlying walk moves to a uniform neighbor and survives each step
//! with probability `1 - delta`. Conditioning on reaching `b` before dying
//! or hitting the rest of the boundary is a Doob transform by
//! `h(x) = P_x[absorbed at b]`: the conditioned walk steps from `x` to a
//! neighbor `y` with probability proportional to `h(y)` (boundary vertices
//! other than `b` have `h = 0`, so they are never entered and no walk ever
//! dies). One Dirichlet solve prices the whole sampler; each curve then
//! costs a plain walk plus chronological loop-erasure.

use super::LatticeCurve;
use crate::error::{MsleError, Result};
use crate::lattice::{LatticeDomain, MassParams, SlitDomain, Vertex, NO_VERTEX};
use crate::potential::LiveSystem;
use rand::Rng;
use std::sync::Arc;

pub struct LerwSampler {
    domain: Arc<LatticeDomain>,
    /// Conditioning function over all vertices: solved on the interior,
    /// one at `b`, zero on the rest of the boundary.
    h: Vec<f64>,
    hash: String,
}

impl LerwSampler {
    pub fn new(domain: Arc<LatticeDomain>, mp: MassParams) -> Result<LerwSampler> {
        let fresh = SlitDomain::fresh(domain.clone());
        let sys = LiveSystem::assemble(&fresh, mp, true)?;
        let hm = sys.harmonic_measure(&|v| v == domain.b)?;
        let mut h = vec![0.0; domain.vertex_count()];
        for (i, &v) in sys.live_vertices().iter().enumerate() {
            h[v as usize] = hm.values[i];
        }
        h[domain.b as usize] = 1.0;
        let start_mass: f64 = domain.neighbors(domain.a).iter().map(|&y| h[y as usize]).sum();
        if start_mass <= 0.0 {
            return Err(MsleError::Sampler(
                "no path from a to b has positive probability".into(),
            ));
        }
        let hash = domain.hash().to_string();
        Ok(LerwSampler { domain, h, hash })
    }

    /// Law of the first vertex after `a` under the conditioned walk.
    pub fn first_step_law(&self) -> Vec<(Vertex, f64)> {
        let nbrs = self.domain.neighbors(self.domain.a);
        let total: f64 = nbrs.iter().map(|&y| self.h[y as usize]).sum();
        nbrs.iter()
            .map(|&y| (y, self.h[y as usize] / total))
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    fn step(&self, x: Vertex, rng: &mut impl Rng) -> Vertex {
        let nbrs = self.domain.neighbors(x);
        let total: f64 = nbrs.iter().map(|&y| self.h[y as usize]).sum();
        let mut r = rng.random::<f64>() * total;
        for &y in nbrs {
            r -= self.h[y as usize];
            if r <= 0.0 {
                return y;
            }
        }
        *nbrs.last().unwrap()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> LatticeCurve {
        let b = self.domain.b;
        let n = self.domain.vertex_count();
        // Chronological loop-erasure: on a revisit, drop the loop.
        let mut path: Vec<Vertex> = Vec::new();
        let mut pos = vec![NO_VERTEX; n];
        let mut x = self.step(self.domain.a, rng);
        while x != b {
            let p = pos[x as usize];
            if p != NO_VERTEX {
                for &v in &path[p as usize + 1..] {
                    pos[v as usize] = NO_VERTEX;
                }
                path.truncate(p as usize + 1);
            } else {
                pos[x as usize] = path.len() as u32;
                path.push(x);
            }
            x = self.step(*path.last().unwrap(), rng);
        }
        let mut vertices = Vec::with_capacity(path.len() + 2);
        vertices.push(self.domain.a);
        vertices.extend_from_slice(&path);
        vertices.push(b);
        LatticeCurve {
            domain_hash: self.hash.clone(),
            vertices,
        }
    }
}

/// Exact law of the loop-erased walk on a small domain, by enumeration.
///
/// For the unconditioned killed walk from `a` absorbed on the boundary, the
/// chronological loop-erasure produces the self-avoiding path
/// `a = v_0, v_1, ..., v_n, v_{n+1} = b` with probability
///
/// ```text
/// ((1 - delta) / q)^(n+1) * prod_{i=1..n} G_i(v_i, v_i)
/// ```
///
/// where `G_i` is the expected-visits Green's function on the interior with
/// `v_1, ..., v_{i-1}` removed (and `v_i` still present). Conditioning on
/// reaching `b` divides by the total mass, which must equal the hitting
/// probability of `b`; callers should check that identity. Cost is
/// exponential in the interior size; intended for test domains with a
/// handful of interior vertices.
pub fn enumerate_law(
    domain: &LatticeDomain,
    mp: MassParams,
) -> Result<(Vec<(Vec<Vertex>, f64)>, f64)> {
    let interior: Vec<Vertex> = (0..domain.vertex_count() as u32)
        .filter(|&v| domain.is_interior(v))
        .collect();
    if interior.len() > 16 {
        return Err(MsleError::Sampler(format!(
            "enumeration over {} interior vertices is not tractable",
            interior.len()
        )));
    }
    let index_of = |v: Vertex| interior.iter().position(|&w| w == v);
    let q = domain.kind.full_degree() as f64;
    let step = (1.0 - mp.delta) / q;

    // G(v, v) on the interior minus `removed`, from the fundamental matrix
    // of the walk's transition probabilities. Independent of LiveSystem.
    let green_at = |v: Vertex, removed: &[bool]| -> f64 {
        let alive: Vec<usize> = (0..interior.len()).filter(|&k| !removed[k]).collect();
        let n = alive.len();
        let vi = alive
            .iter()
            .position(|&k| interior[k] == v)
            .expect("green vertex must be alive");
        let mut m = vec![vec![0.0; n]; n];
        for (r, &kr) in alive.iter().enumerate() {
            m[r][r] = 1.0;
            for &u in domain.neighbors(interior[kr]) {
                if let Some(ku) = index_of(u) {
                    if !removed[ku] {
                        let c = alive.iter().position(|&k| k == ku).unwrap();
                        m[r][c] -= step;
                    }
                }
            }
        }
        let mut e = vec![0.0; n];
        e[vi] = 1.0;
        let col = crate::linsolve::dense_solve_spd(m, e).expect("fundamental matrix solve");
        col[vi]
    };

    struct Ctx<'a> {
        domain: &'a LatticeDomain,
        step: f64,
        green_at: &'a dyn Fn(Vertex, &[bool]) -> f64,
        index_of: &'a dyn Fn(Vertex) -> Option<usize>,
        out: Vec<(Vec<Vertex>, f64)>,
    }

    fn dfs(ctx: &mut Ctx, removed: &mut Vec<bool>, stack: &mut Vec<Vertex>, weight: f64) {
        let current = *stack.last().unwrap_or(&ctx.domain.a);
        for &y in ctx.domain.neighbors(current) {
            if y == ctx.domain.b {
                let mut path = Vec::with_capacity(stack.len() + 2);
                path.push(ctx.domain.a);
                path.extend_from_slice(stack);
                path.push(ctx.domain.b);
                ctx.out.push((path, weight * ctx.step));
            } else if let Some(k) = (ctx.index_of)(y) {
                if !removed[k] {
                    let g = (ctx.green_at)(y, removed);
                    removed[k] = true;
                    stack.push(y);
                    dfs(ctx, removed, stack, weight * ctx.step * g);
                    stack.pop();
                    removed[k] = false;
                }
            }
        }
    }

    let mut ctx = Ctx {
        domain,
        step,
        green_at: &green_at,
        index_of: &index_of,
        out: Vec::new(),
    };
    let mut removed = vec![false; interior.len()];
    let mut stack = Vec::new();
    dfs(&mut ctx, &mut removed, &mut stack, 1.0);

    let total: f64 = ctx.out.iter().map(|(_, p)| p).sum();
    if total <= 0.0 {
        return Err(MsleError::Sampler("no admissible path from a to b".into()));
    }
    let mut law = ctx.out;
    for (_, p) in &mut law {
        *p /= total;
    }
    Ok((law, total))
}

/// `P_a[absorbed at b]` for the unconditioned walk, from an independent
/// Dirichlet solve; the enumeration's total mass must match it exactly.
pub fn hit_probability(domain: &Arc<LatticeDomain>, mp: MassParams) -> Result<f64> {
    let fresh = SlitDomain::fresh(domain.clone());
    let sys = LiveSystem::assemble(&fresh, mp, true)?;
    let hm = sys.harmonic_measure(&|v| v == domain.b)?;
    let q = domain.kind.full_degree() as f64;
    let mut first = 0.0;
    for &y in domain.neighbors(domain.a) {
        first += match sys.at(&hm, y) {
            Some(v) => v,
            None => {
                if y == domain.b {
                    1.0
                } else {
                    0.0
                }
            }
        };
    }
    Ok((1.0 - mp.delta) / q * first)
}

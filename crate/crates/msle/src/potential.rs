//! Discrete potential theory for killed random walks on slit domains.
//!
//! The walk moves to a uniform lattice neighbor and survives each step with
//! probability `1 - delta`; it stops on absorbing vertices. For live vertices
//! the Dirichlet operator is `A = q I - (1 - delta) Adj` with `q` the full
//! lattice degree, which is symmetric positive definite. The Green's
//! function is the expected-visits kernel `G(s, z) = q (A^-1)_{sz}`, so it is
//! symmetric and `G(s, s) >= q / (q - ...) > 1` counts the start visit.
//!
//! Exact resolvent expansions tie the killed and unkilled solves together:
//! with `u_0` the massless extension of boundary data and `u_d` the killed
//! one,
//!
//! ```text
//! u_d(z) = u_0(z) - delta * sum_w G_d(z, w) u_0(w)
//! u_0(z) = u_d(z) + delta / (1 - delta) * sum_w G_0(z, w) u_d(w)
//! ```
//!
//! both hold to machine precision on any finite domain; tests pin them.

use crate::error::{MsleError, Result};
use crate::lattice::{LatticeDomain, MassParams, SlitDomain, Vertex, NO_VERTEX};
use crate::linsolve::{cg_solve, BandedChol, BandedSpd};

/// Values over the live vertices of one slit-domain snapshot.
#[derive(Debug, Clone)]
pub struct Field {
    pub values: Vec<f64>,
}

/// The Dirichlet operator of one slit-domain snapshot, with its live-vertex
/// indexing and (optionally) a direct factorization.
pub struct LiveSystem {
    pub q: f64,
    pub delta: f64,
    pub survive: f64,
    live: Vec<Vertex>,
    index: Vec<u32>,
    /// CSR over live indices: live-live edges.
    adj_off: Vec<u32>,
    adj: Vec<u32>,
    /// CSR over live indices: absorbed vertex neighbors.
    abs_off: Vec<u32>,
    abs: Vec<Vertex>,
    chol: Option<BandedChol>,
    generation: u64,
}

impl LiveSystem {
    /// Assemble the operator for the current state of `s`. `factor` controls
    /// whether the banded Cholesky factorization is computed up front;
    /// without it only the conjugate-gradient path is available.
    pub fn assemble(s: &SlitDomain, mp: MassParams, factor: bool) -> Result<LiveSystem> {
        // Pruned neighbors of live vertices are impossible here: pruning
        // severs whole components, never single edges, so every non-live
        // neighbor is absorbed.
        Self::assemble_masked(
            &s.base,
            mp,
            &|v| s.is_retained(v),
            &|v| s.is_absorbed(v),
            s.generation(),
            factor,
        )
    }

    /// Assemble the operator over an arbitrary live/absorbed partition of
    /// `base`. Vertices that are neither live nor absorbed are treated as
    /// disconnected. `generation` just tags the snapshot for staleness
    /// checks by callers that maintain incremental state.
    pub fn assemble_masked(
        base: &LatticeDomain,
        mp: MassParams,
        is_live: &dyn Fn(Vertex) -> bool,
        is_absorbed: &dyn Fn(Vertex) -> bool,
        generation: u64,
        factor: bool,
    ) -> Result<LiveSystem> {
        if (mp.epsilon - base.epsilon).abs() > 1e-15 * base.epsilon {
            return Err(MsleError::Solve(format!(
                "mass parameters use mesh {} but the domain has mesh {}",
                mp.epsilon, base.epsilon
            )));
        }
        let n_all = base.vertex_count();
        let live: Vec<Vertex> = (0..n_all as u32).filter(|&v| is_live(v)).collect();
        if live.is_empty() {
            return Err(MsleError::Solve("no live vertices to solve on".into()));
        }
        let mut index = vec![NO_VERTEX; n_all];
        for (i, &v) in live.iter().enumerate() {
            index[v as usize] = i as u32;
        }

        let n = live.len();
        let mut adj_off = Vec::with_capacity(n + 1);
        let mut adj: Vec<u32> = Vec::new();
        let mut abs_off = Vec::with_capacity(n + 1);
        let mut abs: Vec<Vertex> = Vec::new();
        adj_off.push(0);
        abs_off.push(0);
        let mut bw = 0usize;
        for (i, &v) in live.iter().enumerate() {
            for &u in base.neighbors(v) {
                let li = index[u as usize];
                if li != NO_VERTEX {
                    adj.push(li);
                    bw = bw.max(i.abs_diff(li as usize));
                } else if is_absorbed(u) {
                    abs.push(u);
                }
            }
            adj_off.push(adj.len() as u32);
            abs_off.push(abs.len() as u32);
        }

        let q = base.kind.full_degree() as f64;
        let survive = 1.0 - mp.delta;
        let chol = if factor {
            let mut m = BandedSpd::zeros(n, bw);
            for i in 0..n {
                m.set(i, i, q);
            }
            for i in 0..n {
                for k in adj_off[i] as usize..adj_off[i + 1] as usize {
                    let j = adj[k] as usize;
                    if j < i {
                        m.set(i, j, -survive);
                    }
                }
            }
            Some(m.cholesky()?)
        } else {
            None
        };

        Ok(LiveSystem {
            q,
            delta: mp.delta,
            survive,
            live,
            index,
            adj_off,
            adj,
            abs_off,
            abs,
            chol,
            generation,
        })
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn live_vertices(&self) -> &[Vertex] {
        &self.live
    }

    /// Snapshot generation of the slit domain this system was built from.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn live_index(&self, v: Vertex) -> Option<usize> {
        let i = self.index[v as usize];
        (i != NO_VERTEX).then_some(i as usize)
    }

    /// Field value at a live vertex; absorbed and pruned vertices have none.
    pub fn at(&self, f: &Field, v: Vertex) -> Option<f64> {
        self.live_index(v).map(|i| f.values[i])
    }

    /// Apply `A x` without any factorization.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.live.len();
        for i in 0..n {
            let mut s = self.q * x[i];
            for k in self.adj_off[i] as usize..self.adj_off[i + 1] as usize {
                s -= self.survive * x[self.adj[k] as usize];
            }
            y[i] = s;
        }
    }

    /// `A^{-1} rhs` over the live set; with `rhs = q f` this applies the
    /// Green's operator `sum_w G(., w) f(w)`.
    pub fn solve_rhs(&self, rhs: Vec<f64>) -> Result<Field> {
        match &self.chol {
            Some(chol) => {
                let mut x = rhs;
                chol.solve_in_place(&mut x);
                Ok(Field { values: x })
            }
            None => self.solve_rhs_cg(rhs, None).map(|(f, _)| f),
        }
    }

    /// Conjugate-gradient solve, warm-started from `x0` when given.
    pub fn solve_rhs_cg(&self, rhs: Vec<f64>, x0: Option<&[f64]>) -> Result<(Field, usize)> {
        let apply = |x: &[f64], y: &mut [f64]| self.apply(x, y);
        let (x, iters) = cg_solve(&apply, &rhs, x0, 1e-12, 40 * self.live.len() + 100)?;
        Ok((Field { values: x }, iters))
    }

    /// Right-hand side carrying boundary data into the domain: for live `u`,
    /// `(1 - delta) * sum of data over absorbed neighbors`. `data` sees the
    /// absorbed vertex and its live witness, so two-sided slit data works.
    pub fn boundary_rhs(&self, data: &dyn Fn(Vertex, Vertex) -> f64) -> Vec<f64> {
        let n = self.live.len();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let u = self.live[i];
            let mut s = 0.0;
            for k in self.abs_off[i] as usize..self.abs_off[i + 1] as usize {
                s += data(self.abs[k], u);
            }
            rhs[i] = self.survive * s;
        }
        rhs
    }

    /// Harmonic extension of boundary data under killing: the value at `z`
    /// is the expected data where the walk from `z` gets absorbed (walks
    /// that die contribute zero).
    pub fn dirichlet(&self, data: &dyn Fn(Vertex, Vertex) -> f64) -> Result<Field> {
        self.solve_rhs(self.boundary_rhs(data))
    }

    /// Harmonic measure of a set of absorbed vertices.
    pub fn harmonic_measure(&self, target: &dyn Fn(Vertex) -> bool) -> Result<Field> {
        self.dirichlet(&|v, _| if target(v) { 1.0 } else { 0.0 })
    }

    /// Green's function column `G(src, .)` as expected visits: the value at
    /// `z` is the expected number of visits to `z` of the killed walk from
    /// `src` before absorption or death. Symmetric in its arguments.
    pub fn green_column(&self, src: Vertex) -> Result<Field> {
        let i = self.live_index(src).ok_or_else(|| {
            MsleError::Solve(format!("green source {src} is not a live vertex"))
        })?;
        let mut rhs = vec![0.0; self.live.len()];
        rhs[i] = self.q;
        self.solve_rhs(rhs)
    }

    /// Row-sum field: value at `z` is `sum_w G(z, w)` over live `w`, the
    /// expected visit count to the whole domain (the walk's lifetime).
    pub fn green_row_sums(&self) -> Result<Field> {
        let rhs = vec![self.q; self.live.len()];
        self.solve_rhs(rhs)
    }

    /// Exit law at the tip side: probability that the walk from `z` is
    /// absorbed anywhere (complement of dying). Useful as a sanity field.
    pub fn survival_to_boundary(&self) -> Result<Field> {
        self.harmonic_measure(&|_| true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Polygon};
    use crate::lattice::{build_domain, LatticeKind};
    use crate::linsolve::dense_solve_spd;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    fn square_slit(eps: f64) -> SlitDomain {
        let d = build_domain(
            LatticeKind::Square,
            eps,
            &Polygon::unit_square(),
            Point::new(0.5, 0.0),
            Point::new(0.5, 1.0),
        )
        .unwrap();
        SlitDomain::fresh(Arc::new(d))
    }

    /// Fundamental matrix of the killed absorbing chain, built directly from
    /// the walk's transition probabilities and inverted densely: the
    /// expected-visits matrix N = (I - Q)^-1.
    fn fundamental_matrix(s: &SlitDomain, delta: f64) -> (Vec<Vertex>, Vec<Vec<f64>>) {
        let base = &*s.base;
        let live: Vec<Vertex> = (0..base.vertex_count() as u32)
            .filter(|&v| s.is_retained(v))
            .collect();
        let n = live.len();
        let q = base.kind.full_degree() as f64;
        let step = (1.0 - delta) / q;
        let mut i_minus_q = vec![vec![0.0; n]; n];
        for (i, &v) in live.iter().enumerate() {
            i_minus_q[i][i] = 1.0;
            for &u in base.neighbors(v) {
                if let Some(j) = live.iter().position(|&w| w == u) {
                    i_minus_q[i][j] -= step;
                }
            }
        }
        let mut cols = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = dense_solve_spd(i_minus_q.clone(), e).unwrap();
            for i in 0..n {
                cols[i][j] = col[i];
            }
        }
        (live, cols)
    }

    #[test]
    fn green_matches_fundamental_matrix() {
        let s = square_slit(0.25); // 3x3 interior
        for &delta in &[0.0, 0.1] {
            let mp = MassParams {
                m: 0.0,
                epsilon: 0.25,
                delta,
            };
            let sys = LiveSystem::assemble(&s, mp, true).unwrap();
            let (live, nmat) = fundamental_matrix(&s, delta);
            assert_eq!(sys.live_vertices(), &live[..]);
            for (i, &src) in live.iter().enumerate() {
                let g = sys.green_column(src).unwrap();
                for (j, &z) in live.iter().enumerate() {
                    let got = sys.at(&g, z).unwrap();
                    assert!(
                        (got - nmat[i][j]).abs() < 1e-10,
                        "G({src},{z}) = {got} vs N = {}",
                        nmat[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn green_is_symmetric() {
        let s = square_slit(1.0 / 8.0);
        let mp = MassParams::new(2.0, 1.0 / 8.0).unwrap();
        let sys = LiveSystem::assemble(&s, mp, true).unwrap();
        let lv = sys.live_vertices().to_vec();
        let (s1, s2) = (lv[3], lv[lv.len() - 4]);
        let g1 = sys.green_column(s1).unwrap();
        let g2 = sys.green_column(s2).unwrap();
        let a = sys.at(&g1, s2).unwrap();
        let b = sys.at(&g2, s1).unwrap();
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn dirichlet_solution_is_killed_harmonic() {
        let s = square_slit(1.0 / 8.0);
        let mp = MassParams::new(1.5, 1.0 / 8.0).unwrap();
        let sys = LiveSystem::assemble(&s, mp, true).unwrap();
        let base = &*s.base;
        // Smooth but arbitrary boundary data.
        let data = |v: Vertex, _w: Vertex| {
            let p = base.position(v);
            (3.0 * p.x).sin() + 0.5 * p.y * p.y
        };
        let u = sys.dirichlet(&data).unwrap();
        let factor = sys.survive / sys.q;
        for &v in sys.live_vertices() {
            let mut sum = 0.0;
            for &w in base.neighbors(v) {
                sum += match sys.at(&u, w) {
                    Some(val) => val,
                    None => data(w, v),
                };
            }
            let expect = factor * sum;
            let got = sys.at(&u, v).unwrap();
            assert!(
                (got - expect).abs() < 1e-12,
                "harmonicity fails at {v}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn resolvent_expansion_is_exact() {
        let s = square_slit(1.0 / 8.0);
        let eps = 1.0 / 8.0;
        let mp0 = MassParams::massless(eps);
        let mp = MassParams::new(2.0, eps).unwrap();
        let sys0 = LiveSystem::assemble(&s, mp0, true).unwrap();
        let sysd = LiveSystem::assemble(&s, mp, true).unwrap();
        let base = &*s.base;
        let data = |v: Vertex, _w: Vertex| {
            let p = base.position(v);
            p.x + 2.0 * (2.0 * p.y).cos()
        };
        let u0 = sys0.dirichlet(&data).unwrap();
        let ud = sysd.dirichlet(&data).unwrap();
        let delta = mp.delta;

        // Forward: u_d(z) = u_0(z) - delta * sum_w G_d(z,w) u_0(w).
        for &z in sys0.live_vertices().iter().step_by(7) {
            let gd = sysd.green_column(z).unwrap();
            let mut corr = 0.0;
            for (k, &w) in sysd.live_vertices().iter().enumerate() {
                corr += gd.values[k] * sys0.at(&u0, w).unwrap();
            }
            let lhs = sysd.at(&ud, z).unwrap();
            let rhs = sys0.at(&u0, z).unwrap() - delta * corr;
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "forward resolvent at {z}: {lhs} vs {rhs}"
            );
        }

        // Backward: u_0(z) = u_d(z) + delta/(1-delta) * sum_w G_0(z,w) u_d(w).
        for &z in sys0.live_vertices().iter().step_by(11) {
            let g0 = sys0.green_column(z).unwrap();
            let mut corr = 0.0;
            for (k, &w) in sys0.live_vertices().iter().enumerate() {
                corr += g0.values[k] * sysd.at(&ud, w).unwrap();
            }
            let lhs = sys0.at(&u0, z).unwrap();
            let rhs = sysd.at(&ud, z).unwrap() + delta / (1.0 - delta) * corr;
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "backward resolvent at {z}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn monte_carlo_agrees_with_harmonic_measure() {
        let s = square_slit(0.25);
        let mp = MassParams {
            m: 0.0,
            epsilon: 0.25,
            delta: 0.05,
        };
        let sys = LiveSystem::assemble(&s, mp, true).unwrap();
        let base = &*s.base;
        let b = base.b;
        let hm = sys.harmonic_measure(&|v| v == b).unwrap();
        let start = base.vertex_at((2, 2, 0)).unwrap();
        let predicted = sys.at(&hm, start).unwrap();

        let mut rng = ChaCha12Rng::seed_from_u64(20240817);
        let trials = 200_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            let mut v = start;
            loop {
                if rng.random::<f64>() < mp.delta {
                    break; // the walk dies
                }
                let nb = base.neighbors(v);
                v = nb[rng.random_range(0..nb.len())];
                if s.is_absorbed(v) {
                    if v == b {
                        hits += 1;
                    }
                    break;
                }
            }
        }
        let observed = hits as f64 / trials as f64;
        let sigma = (predicted * (1.0 - predicted) / trials as f64).sqrt();
        assert!(
            (observed - predicted).abs() < 3.5 * sigma,
            "MC {observed} vs solve {predicted} (sigma {sigma})"
        );
    }

    #[test]
    fn cg_path_matches_direct_path() {
        let s = square_slit(1.0 / 8.0);
        let mp = MassParams::new(1.0, 1.0 / 8.0).unwrap();
        let direct = LiveSystem::assemble(&s, mp, true).unwrap();
        let cg = LiveSystem::assemble(&s, mp, false).unwrap();
        let rhs = direct.boundary_rhs(&|v, _| {
            let p = s.base.position(v);
            p.x - p.y
        });
        let xd = direct.solve_rhs(rhs.clone()).unwrap();
        let (xc, iters) = cg.solve_rhs_cg(rhs, None).unwrap();
        assert!(iters > 0);
        for i in 0..xd.values.len() {
            assert!((xd.values[i] - xc.values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn row_sums_match_explicit_green_sums() {
        let s = square_slit(0.25);
        let mp = MassParams {
            m: 0.0,
            epsilon: 0.25,
            delta: 0.12,
        };
        let sys = LiveSystem::assemble(&s, mp, true).unwrap();
        let rows = sys.green_row_sums().unwrap();
        for &z in sys.live_vertices() {
            let g = sys.green_column(z).unwrap();
            let total: f64 = g.values.iter().sum();
            let got = sys.at(&rows, z).unwrap();
            assert!((got - total).abs() < 1e-10);
        }
    }

    #[test]
    fn lifetime_interpretation_of_row_sums() {
        // Expected visits summed over the domain = expected number of steps
        // taken + 1 (counting the start visit); check by simulation.
        let s = square_slit(0.25);
        let mp = MassParams {
            m: 0.0,
            epsilon: 0.25,
            delta: 0.15,
        };
        let sys = LiveSystem::assemble(&s, mp, true).unwrap();
        let base = &*s.base;
        let start = base.vertex_at((2, 2, 0)).unwrap();
        let rows = sys.green_row_sums().unwrap();
        let predicted = sys.at(&rows, start).unwrap();

        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let trials = 100_000;
        let mut total_visits = 0u64;
        for _ in 0..trials {
            let mut v = start;
            let mut visits = 1u64;
            loop {
                if rng.random::<f64>() < mp.delta {
                    break;
                }
                let nb = base.neighbors(v);
                v = nb[rng.random_range(0..nb.len())];
                if s.is_absorbed(v) {
                    break;
                }
                visits += 1;
            }
            total_visits += visits;
        }
        let observed = total_visits as f64 / trials as f64;
        assert!(
            (observed - predicted).abs() < 0.05 * predicted,
            "lifetime MC {observed} vs solve {predicted}"
        );
    }
}

//! Martingale observables for chordal interfaces.
//!
//! Three layers. The exponent table for the one-sided power class
//! `Z^beta (Z')^sigma` is kept in rationals so checks against it are
//! equalities, not tolerances. Continuum evaluators act on chart image
//! pairs `(Z, Z')` produced by [`crate::loewner::LoewnerChart`]. The
//! discrete layer holds the massive observables the samplers preserve
//! exactly: the loop-erased walk's Green's-ratio martingale and the
//! argument-type field with half weight on killed walks.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{MsleError, Result};
use crate::lattice::{LatticeDomain, SlitDomain, Vertex};
use crate::potential::{Field, LiveSystem};

type Cx = Complex64;

/// Exact rational arithmetic for the exponent table.
pub type Q = Ratio<i64>;

/// How a model's observable is evaluated in the continuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableClass {
    /// One-sided power `Z^beta (Z')^sigma`, boundary data on a single arc.
    OneSidedPower,
    /// The exponents sit in the table, but the observable couples the two
    /// arcs through a Riemann-Hilbert problem and has no one-sided closed
    /// form; evaluation is not implemented.
    RiemannHilbert,
}

/// One row of the exponent table.
#[derive(Debug, Clone, Copy)]
pub struct PowerRow {
    pub model: &'static str,
    pub kappa: Q,
    pub beta: Q,
    pub sigma: Q,
    pub class: ObservableClass,
}

/// The derivative exponent forced by the choice of `Z^beta`:
/// `sigma = beta + beta (beta - 1) kappa / 4`.
pub fn power_sigma(kappa: Q, beta: Q) -> Q {
    let one = Q::from_integer(1);
    let four = Q::from_integer(4);
    beta + beta * (beta - one) * kappa / four
}

/// The five lattice models with exact rational exponents.
pub fn observable_table() -> [PowerRow; 5] {
    let row = |model, kappa: Q, beta: Q, class| PowerRow {
        model,
        kappa,
        beta,
        sigma: power_sigma(kappa, beta),
        class,
    };
    [
        row(
            "lerw",
            Q::from_integer(2),
            Q::from_integer(-1),
            ObservableClass::OneSidedPower,
        ),
        row(
            "ust",
            Q::from_integer(8),
            Q::new(1, 2),
            ObservableClass::OneSidedPower,
        ),
        row(
            "fk-ising",
            Q::new(16, 3),
            Q::new(-1, 2),
            ObservableClass::RiemannHilbert,
        ),
        row(
            "ising",
            Q::from_integer(3),
            Q::from_integer(-1),
            ObservableClass::RiemannHilbert,
        ),
        row(
            "percolation",
            Q::from_integer(6),
            Q::new(1, 3),
            ObservableClass::OneSidedPower,
        ),
    ]
}

/// The dual speed `2 kappa / (kappa - 2)`, defined on `[8/3, 4]` where both
/// speeds describe curves; satisfies `1/kappa + 1/dual = 1/2` and fixes 4.
pub fn dual_kappa(kappa: f64) -> Result<f64> {
    let lo = 8.0 / 3.0;
    if !kappa.is_finite() || kappa < lo - 1e-12 || kappa > 4.0 + 1e-12 {
        return Err(MsleError::Observable(format!(
            "duality pairs speeds in [8/3, 4] with [4, 8]; got {kappa}"
        )));
    }
    Ok(2.0 * kappa / (kappa - 2.0))
}

fn q_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn check_pair(z: Cx, dz: Cx) -> Result<()> {
    if !z.is_finite() || !dz.is_finite() {
        return Err(MsleError::Observable(format!(
            "chart image must be finite, got Z = {z}, Z' = {dz}"
        )));
    }
    if z.norm_sqr() == 0.0 || dz.norm_sqr() == 0.0 {
        return Err(MsleError::Observable(
            "Z = 0 or Z' = 0 is a branch point, not a value".into(),
        ));
    }
    Ok(())
}

/// `Z^beta (Z')^sigma` with principal branches, `sigma` from the exponent
/// relation at the given speed.
pub fn power_observable(z: Cx, dz: Cx, kappa: f64, beta: f64) -> Result<Cx> {
    check_pair(z, dz)?;
    let sigma = beta + beta * (beta - 1.0) * kappa / 4.0;
    Ok(z.powf(beta) * dz.powf(sigma))
}

/// `log Z + (1 - kappa/4) log Z'`, principal branches. At `kappa = 4` the
/// derivative term drops and the imaginary part is the harmonic argument
/// with boundary values 0 and pi on the two arcs.
pub fn bosonic_observable(z: Cx, dz: Cx, kappa: f64) -> Result<Cx> {
    check_pair(z, dz)?;
    Ok(z.ln() + (1.0 - kappa / 4.0) * dz.ln())
}

/// Evaluate a table row at a chart image pair.
pub fn eval_row(row: &PowerRow, z: Cx, dz: Cx) -> Result<Cx> {
    match row.class {
        ObservableClass::OneSidedPower => {
            power_observable(z, dz, q_to_f64(row.kappa), q_to_f64(row.beta))
        }
        ObservableClass::RiemannHilbert => Err(MsleError::Observable(format!(
            "the {} observable solves a two-sided Riemann-Hilbert problem; \
             only its exponents are tabulated",
            row.model
        ))),
    }
}

/// Green's-ratio observable of the loop-erased walk.
///
/// With the curve marked as a slit and the tip still live,
/// `M(z) = G(z, tip) / h(tip)`: `G` is the expected-visits kernel of the
/// killed walk and `h` the probability that the walk from the tip reaches
/// `b` before dying or absorbing elsewhere. One growth step of the
/// loop-erased law preserves `E[M(z)]` exactly, a terminated path
/// contributing 0; the tests pin this against the enumerated path law.
pub fn lerw_observable(sys: &LiveSystem, s: &SlitDomain) -> Result<Field> {
    let tip = s.tip();
    let g = sys.green_column(tip)?;
    let h = sys.harmonic_measure(&|v| v == s.base.b)?;
    let ht = sys
        .at(&h, tip)
        .expect("green_column succeeded, so the tip is live");
    if ht <= 0.0 {
        return Err(MsleError::Observable(
            "the tip cannot reach b; the ratio observable is undefined".into(),
        ));
    }
    let values = g.values.iter().map(|x| x / ht).collect();
    Ok(Field { values })
}

/// Two-sided boundary split for argument-type data.
///
/// Assigns `pi` to the outer arc from `b` counterclockwise to `a` and to
/// the left side of the slit, `0` to the complementary arc and the right
/// side; left means left of the walk direction from `a` toward the tip.
/// Since the boundary cycle runs counterclockwise, each slit side joins
/// the outer arc it meets at `a` continuously. `b` itself, and `a` before
/// the curve has a direction, take the fan average `pi/2`.
pub struct ArcSplit {
    base: Arc<LatticeDomain>,
    curve: Vec<Vertex>,
    /// Index into `curve` per base vertex id; tip included.
    curve_index: Vec<Option<u32>>,
    /// Value per outer boundary vertex, NaN off the cycle.
    outer: Vec<f64>,
}

impl ArcSplit {
    pub fn new(s: &SlitDomain) -> Result<ArcSplit> {
        let base = s.base.clone();
        let curve = s.curve().to_vec();
        let cycle = base.boundary_cycle();
        let n = cycle.len();
        let pos_of = |t: Vertex| cycle.iter().position(|&v| v == t);
        let a_pos = pos_of(curve[0]).ok_or_else(|| {
            MsleError::Observable("the curve root is not on the boundary cycle".into())
        })?;
        let b_pos = pos_of(base.b).ok_or_else(|| {
            MsleError::Observable("b is not on the boundary cycle".into())
        })?;
        let rel_a = (a_pos + n - b_pos) % n;

        let mut outer = vec![f64::NAN; base.vertex_count()];
        for (i, &v) in cycle.iter().enumerate() {
            let rel = (i + n - b_pos) % n;
            outer[v as usize] = if rel == 0 || rel == rel_a {
                0.5 * PI
            } else if rel < rel_a {
                PI
            } else {
                0.0
            };
        }

        let mut curve_index = vec![None; base.vertex_count()];
        for (i, &v) in curve.iter().enumerate() {
            curve_index[v as usize] = Some(i as u32);
        }

        Ok(ArcSplit {
            base,
            curve,
            curve_index,
            outer,
        })
    }

    /// Boundary value at the prime end `(absorbed, witness)`.
    pub fn value(&self, absorbed: Vertex, witness: Vertex) -> f64 {
        if self.curve.len() >= 2 {
            if let Some(i) = self.curve_index[absorbed as usize] {
                return self.side_value(i as usize, witness);
            }
        }
        let v = self.outer[absorbed as usize];
        debug_assert!(v.is_finite(), "absorbed vertex off both arcs and curve");
        v
    }

    /// Polyline side test against the curve at vertex `i`. Collinear
    /// crosses are exact zeros up to rounding in the lattice embedding, so
    /// they are cut off well below the smallest honest angle.
    fn side_value(&self, i: usize, witness: Vertex) -> f64 {
        let p = self.base.position(self.curve[i]);
        let w = self.base.position(witness);
        let r = (w.x - p.x, w.y - p.y);
        let seg = |j: usize, k: usize| {
            let u = self.base.position(self.curve[j]);
            let v = self.base.position(self.curve[k]);
            (v.x - u.x, v.y - u.y)
        };
        let din = if i > 0 { seg(i - 1, i) } else { seg(0, 1) };
        let dout = if i + 1 < self.curve.len() {
            seg(i, i + 1)
        } else {
            din
        };
        let cross = |a: (f64, f64), b: (f64, f64)| a.0 * b.1 - a.1 * b.0;
        let norm = |a: (f64, f64)| (a.0 * a.0 + a.1 * a.1).sqrt();
        let cut = |a: (f64, f64), b: (f64, f64)| {
            let c = cross(a, b);
            if c.abs() <= 1e-9 * norm(a) * norm(b) {
                0.0
            } else {
                c
            }
        };
        let ci = cut(din, r);
        let co = cut(dout, r);
        let left = if ci == 0.0 {
            co > 0.0
        } else if co == 0.0 {
            ci > 0.0
        } else if cut(din, dout) >= 0.0 {
            // Left turn or straight: the left region is the intersection.
            ci > 0.0 && co > 0.0
        } else {
            // Right turn: the left region is the union.
            ci > 0.0 || co > 0.0
        };
        if left {
            PI
        } else {
            0.0
        }
    }
}

/// Argument-type massive observable: the Dirichlet extension of the arc
/// split plus `pi/2` times the death probability. Massless it reduces to
/// the discrete harmonic argument; the half weight on killed walks is what
/// the interface law preserves.
pub fn arg_observable(sys: &LiveSystem, s: &SlitDomain) -> Result<Field> {
    let split = ArcSplit::new(s)?;
    let u = sys.dirichlet(&|v, w| split.value(v, w))?;
    let surv = sys.survival_to_boundary()?;
    let values = u
        .values
        .iter()
        .zip(&surv.values)
        .map(|(ui, si)| ui + 0.5 * PI * (1.0 - si))
        .collect();
    Ok(Field { values })
}

//! Curve samplers: loop-erased walks, the harmonic explorer, and spanning
//! forests, all with a tunable killing rate.

pub mod explorer;
pub mod forest;
pub mod lerw;

use crate::geom::Point;
use crate::lattice::{LatticeDomain, Vertex};
use serde::{Deserialize, Serialize};

/// A lattice curve from the marked boundary point `a` to an absorbing
/// endpoint (normally `b`). Vertices are consecutive lattice neighbors,
/// self-avoiding, with the interior vertices strictly inside the domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeCurve {
    /// Hash of the domain the vertex ids refer to.
    pub domain_hash: String,
    pub vertices: Vec<Vertex>,
}

impl LatticeCurve {
    pub fn positions(&self, domain: &LatticeDomain) -> Vec<Point> {
        self.vertices.iter().map(|&v| domain.position(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Check the structural invariants against its domain.
    pub fn validate(&self, domain: &LatticeDomain) -> crate::Result<()> {
        use crate::error::MsleError;
        if self.domain_hash != domain.hash() {
            return Err(MsleError::Sampler("curve/domain hash mismatch".into()));
        }
        if self.vertices.len() < 2 || self.vertices[0] != domain.a {
            return Err(MsleError::Sampler("curve must start at a".into()));
        }
        let k = self.vertices.len();
        let last = self.vertices[k - 1];
        if !domain.is_boundary(last) {
            return Err(MsleError::Sampler("curve must end on the boundary".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, &v) in self.vertices.iter().enumerate() {
            if !seen.insert(v) {
                return Err(MsleError::Sampler(format!("curve revisits vertex {v}")));
            }
            if i > 0 && !domain.neighbors(v).contains(&self.vertices[i - 1]) {
                return Err(MsleError::Sampler(format!(
                    "vertices {} and {v} are not lattice neighbors",
                    self.vertices[i - 1]
                )));
            }
            if i > 0 && i + 1 < k && !domain.is_interior(v) {
                return Err(MsleError::Sampler(format!(
                    "intermediate vertex {v} is not interior"
                )));
            }
        }
        Ok(())
    }
}

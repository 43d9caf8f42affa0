//! Seeded random instances: graph forms, trees and positive kernels. Used by
//! the property suites and handy for experiments.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::form::{build_form, GraphForm, GraphSpec};
use crate::kernel::KernelOperator;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// Uniform on `[lo, hi]` at every vertex.
    Positive { lo: f64, hi: f64 },
    /// Uniform on `[0, hi]` on roughly a third of the vertices, zero elsewhere.
    Sparse { hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormShape {
    pub vertices: usize,
    /// Probability of each extra non-tree edge.
    pub extra_edge_prob: f64,
    pub boundary: usize,
    pub potential: Potential,
    pub random_measure: bool,
}

impl FormShape {
    pub fn connected(vertices: usize, potential: Potential) -> Self {
        FormShape {
            vertices,
            extra_edge_prob: 0.15,
            boundary: 0,
            potential,
            random_measure: true,
        }
    }

    pub fn tree(vertices: usize, potential: Potential) -> Self {
        FormShape {
            extra_edge_prob: 0.0,
            ..Self::connected(vertices, potential)
        }
    }
}

/// Zero-padded id so that lexicographic and numeric order agree.
pub fn vertex_id(k: usize) -> String {
    format!("v{k:04}")
}

/// Random spanning tree plus extra edges, random weights in `[0.1, 3]`,
/// measures in `[0.5, 2]` and the requested potential and boundary.
pub fn random_form<R: Rng>(rng: &mut R, shape: &FormShape) -> Result<GraphForm> {
    let n = shape.vertices.max(1);
    let mut spec = GraphSpec {
        vertices: (0..n).map(vertex_id).collect(),
        ..Default::default()
    };
    let mut seen = std::collections::BTreeSet::new();
    for k in 1..n {
        let parent = rng.random_range(0..k);
        seen.insert((parent, k));
        spec.edges.push((vertex_id(parent), vertex_id(k), rng.random_range(0.1..3.0)));
    }
    if shape.extra_edge_prob > 0.0 {
        for a in 0..n {
            for b in a + 1..n {
                if !seen.contains(&(a, b)) && rng.random_bool(shape.extra_edge_prob) {
                    spec.edges.push((vertex_id(a), vertex_id(b), rng.random_range(0.1..3.0)));
                }
            }
        }
    }
    for k in 0..n {
        if shape.random_measure {
            spec.mu.insert(vertex_id(k), rng.random_range(0.5..2.0));
        }
        let c = match shape.potential {
            Potential::Zero => 0.0,
            Potential::Positive { lo, hi } => rng.random_range(lo..=hi),
            Potential::Sparse { hi } => {
                if rng.random_bool(1.0 / 3.0) {
                    rng.random_range(0.0..=hi)
                } else {
                    0.0
                }
            }
        };
        if c != 0.0 {
            spec.potential.insert(vertex_id(k), c);
        }
    }
    let boundary = shape.boundary.min(n.saturating_sub(1));
    if boundary > 0 {
        let mut picked: Vec<usize> = sample(rng, n, boundary).into_vec();
        picked.sort_unstable();
        spec.dirichlet = picked.into_iter().map(vertex_id).collect();
    }
    build_form(&spec)
}

/// Kernel with entries in `[0.05, 2]` and measures in `[0.2, 3]`.
pub fn random_kernel<R: Rng>(rng: &mut R, rows: usize, cols: usize, p: f64) -> Result<KernelOperator> {
    let k = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.05..2.0));
    let nu = (0..rows).map(|_| rng.random_range(0.2..3.0)).collect();
    let mu = (0..cols).map(|_| rng.random_range(0.2..3.0)).collect();
    KernelOperator::new(k, nu, mu, p)
}

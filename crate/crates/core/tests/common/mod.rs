#![allow(dead_code)]

use critform::instances::{random_form, FormShape, Potential};
use critform::rng;
use critform::{GraphForm, VertexFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    rng::seeded(seed)
}

/// Connected random form with `2..=max_n` vertices, the given potential and,
/// when `boundary` is set, a couple of Dirichlet vertices.
pub fn form_with(r: &mut ChaCha8Rng, max_n: usize, potential: Potential, boundary: bool) -> GraphForm {
    let n = r.random_range(2..=max_n);
    let shape = FormShape {
        boundary: if boundary { r.random_range(1..=2) } else { 0 },
        ..FormShape::connected(n, potential)
    };
    random_form(r, &shape).unwrap()
}

/// Any of the three potential kinds, boundary with probability one third.
pub fn any_form(r: &mut ChaCha8Rng, max_n: usize) -> GraphForm {
    let potential = match r.random_range(0..3) {
        0 => Potential::Zero,
        1 => Potential::Positive { lo: 0.01, hi: 2.0 },
        _ => Potential::Sparse { hi: 1.0 },
    };
    let boundary = r.random_bool(1.0 / 3.0);
    form_with(r, max_n, potential, boundary)
}

pub fn positive(form: &GraphForm, r: &mut ChaCha8Rng, lo: f64, hi: f64) -> VertexFunction {
    let free: Vec<f64> = (0..form.n_free()).map(|_| r.random_range(lo..hi)).collect();
    form.extend(&free)
}

pub fn nonnegative(form: &GraphForm, r: &mut ChaCha8Rng) -> VertexFunction {
    let free: Vec<f64> = (0..form.n_free())
        .map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..1.0) })
        .collect();
    form.extend(&free)
}

/// Sup over free vertices.
pub fn free_sup(form: &GraphForm, f: &VertexFunction) -> f64 {
    form.free_vertices().iter().map(|&i| f[i].abs()).fold(0.0, f64::max)
}

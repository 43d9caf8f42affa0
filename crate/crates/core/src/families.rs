//! Exhaustions: nested finite forms with a Dirichlet condition on the outer
//! boundary, standing in for an infinite-volume form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::form::{build_form, GraphForm, GraphSpec};

type Generator = dyn Fn(usize) -> Result<GraphForm> + Send + Sync;

/// Indexed family of nested forms. Generators must be pure functions of the radius.
#[derive(Clone)]
pub struct Exhaustion {
    pub name: String,
    pub radii: Vec<usize>,
    pub root: String,
    generator: Arc<Generator>,
}

impl std::fmt::Debug for Exhaustion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Exhaustion")
            .field("name", &self.name)
            .field("radii", &self.radii)
            .field("root", &self.root)
            .finish()
    }
}

impl Exhaustion {
    pub fn new(
        name: impl Into<String>,
        radii: Vec<usize>,
        root: impl Into<String>,
        generator: impl Fn(usize) -> Result<GraphForm> + Send + Sync + 'static,
    ) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::BadParams("exhaustion needs at least one radius".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadParams("radii must be strictly increasing".into()));
        }
        Ok(Exhaustion {
            name: name.into(),
            radii,
            root: root.into(),
            generator: Arc::new(generator),
        })
    }

    pub fn level(&self, radius: usize) -> Result<GraphForm> {
        (self.generator)(radius)
    }

    /// Keeps only radii up to `max_radius`.
    pub fn truncated(&self, max_radius: usize) -> Result<Self> {
        let radii: Vec<usize> = self.radii.iter().copied().filter(|&r| r <= max_radius).collect();
        if radii.is_empty() {
            return Err(Error::BadParams(format!("no radius at or below {max_radius}")));
        }
        Ok(Exhaustion {
            radii,
            ..self.clone()
        })
    }

    pub fn with_radii(&self, radii: Vec<usize>) -> Result<Self> {
        let generator = self.generator.clone();
        Exhaustion::new(self.name.clone(), radii, self.root.clone(), move |r| generator(r))
    }
}

/// Vertex id of a lattice point.
pub fn lattice_id(point: &[i64]) -> String {
    point.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

/// Box `{-R..R}^d` with unit weights, counting measure, zero potential and a
/// Dirichlet shell on `|x|_∞ = R`.
pub fn lattice_box(d: usize, radius: usize) -> Result<GraphForm> {
    if !(1..=3).contains(&d) {
        return Err(Error::BadParams(format!("lattice dimension must be 1, 2 or 3, got {d}")));
    }
    if radius < 1 {
        return Err(Error::BadParams("lattice radius must be at least 1".into()));
    }
    let r = radius as i64;
    let side = (2 * r + 1) as usize;
    let total = side.pow(d as u32);
    let point = |mut k: usize| -> Vec<i64> {
        let mut p = vec![0i64; d];
        for c in p.iter_mut() {
            *c = (k % side) as i64 - r;
            k /= side;
        }
        p
    };
    let mut spec = GraphSpec::default();
    for k in 0..total {
        let p = point(k);
        let id = lattice_id(&p);
        if p.iter().any(|c| c.abs() == r) {
            spec.dirichlet.push(id.clone());
        }
        for axis in 0..d {
            if p[axis] < r {
                let mut q = p.clone();
                q[axis] += 1;
                spec.edges.push((id.clone(), lattice_id(&q), 1.0));
            }
        }
        spec.vertices.push(id);
    }
    build_form(&spec)
}

pub fn default_lattice_radii(d: usize) -> Vec<usize> {
    match d {
        1 => vec![10, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200],
        2 => vec![4, 8, 12, 16, 24, 32, 48, 64],
        _ => (4..=12).collect(),
    }
}

pub fn lattice(d: usize, radii: Option<Vec<usize>>) -> Result<Exhaustion> {
    if !(1..=3).contains(&d) {
        return Err(Error::BadParams(format!("lattice dimension must be 1, 2 or 3, got {d}")));
    }
    let radii = radii.unwrap_or_else(|| default_lattice_radii(d));
    Exhaustion::new(format!("lattice d={d}"), radii, lattice_id(&vec![0; d]), move |r| {
        lattice_box(d, r)
    })
}

/// Half-line `0..=R` with `b(n, n+1) = (n+1)^β`, Dirichlet at `R`.
pub fn birth_death_chain(beta: f64, radius: usize) -> Result<GraphForm> {
    if !beta.is_finite() {
        return Err(Error::BadParams("beta must be finite".into()));
    }
    if radius < 2 {
        return Err(Error::BadParams("birth-death radius must be at least 2".into()));
    }
    let spec = GraphSpec {
        vertices: (0..=radius).map(|n| n.to_string()).collect(),
        edges: (0..radius)
            .map(|n| (n.to_string(), (n + 1).to_string(), birth_death_weight(beta, n)))
            .collect(),
        dirichlet: vec![radius.to_string()],
        ..Default::default()
    };
    build_form(&spec)
}

pub fn birth_death_weight(beta: f64, n: usize) -> f64 {
    ((n + 1) as f64).powf(beta)
}

pub fn default_birth_death_radii() -> Vec<usize> {
    vec![10, 20, 40, 80, 160, 320, 640, 1280]
}

pub fn birth_death(beta: f64, radii: Option<Vec<usize>>) -> Result<Exhaustion> {
    let radii = radii.unwrap_or_else(default_birth_death_radii);
    Exhaustion::new(format!("birth_death beta={beta}"), radii, "0", move |r| {
        birth_death_chain(beta, r)
    })
}

/// Path `0..=N` with unit weights and the Dirichlet condition at `0` only.
pub fn dirichlet_path_form(n: usize) -> Result<GraphForm> {
    if n < 1 {
        return Err(Error::BadParams("path length must be at least 1".into()));
    }
    let spec = GraphSpec {
        vertices: (0..=n).map(|k| k.to_string()).collect(),
        edges: (0..n).map(|k| (k.to_string(), (k + 1).to_string(), 1.0)).collect(),
        dirichlet: vec!["0".into()],
        ..Default::default()
    };
    build_form(&spec)
}

/// The Dirichlet path presented as a constant exhaustion rooted at vertex `1`.
pub fn dirichlet_path(n: usize) -> Result<Exhaustion> {
    let form = dirichlet_path_form(n)?;
    constant(form, "1", &format!("dirichlet_path N={n}"))
}

/// A single finite form repeated at three levels.
pub fn constant(form: GraphForm, root: &str, name: &str) -> Result<Exhaustion> {
    let r = form.index_of(root)?;
    if form.is_boundary(r) {
        return Err(Error::BadParams(format!("root {root} lies on the Dirichlet boundary")));
    }
    Exhaustion::new(name, vec![1, 2, 3], root, move |_| Ok(form.clone()))
}

/// Explicit list of forms; level `k` (1-based) is the `k`-th form.
pub fn from_forms(forms: Vec<GraphForm>, root: &str) -> Result<Exhaustion> {
    for form in &forms {
        let r = form.index_of(root)?;
        if form.is_boundary(r) {
            return Err(Error::BadParams(format!("root {root} lies on the Dirichlet boundary")));
        }
    }
    let radii = (1..=forms.len()).collect();
    Exhaustion::new("file_sequence", radii, root, move |k| {
        forms
            .get(k.wrapping_sub(1))
            .cloned()
            .ok_or_else(|| Error::BadParams(format!("no level {k}")))
    })
}

//! Discrete Schrödinger forms on weighted graphs.
//!
//! A [`GraphForm`] carries edge weights `b`, a vertex measure `µ`, a potential
//! `c` and an optional Dirichlet boundary. Its quadratic form is
//!
//! ```text
//! q(f) = Σ_{edges {u,v}} b(u,v) (f(u) - f(v))² + Σ_v c(v) f(v)² µ(v)
//! ```
//!
//! with each undirected edge counted once and `f` vanishing on the boundary.
//! Boundary vertices are removed from the function space; edges into the
//! boundary survive as diagonal terms of the energy matrix `H`. The generator
//! is `L = M⁻¹H` with `M = diag(µ)`, so that `q(f) = ⟨Lf, f⟩_µ`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use faer::sparse::linalg::solvers::SymbolicLlt;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Factorization, SpdSolver, SymCsr, DENSE_EIGEN_LIMIT};
use crate::rng;

/// Default absolute tolerance for sampled inequality checks on unit-norm inputs.
pub const TOL_INEQ: f64 = 1e-10;
/// Relative tolerance (times `‖L‖`) for the nonnegativity validation.
pub const TOL_PSD_REL: f64 = 1e-10;
/// Relative residual for iterative solves.
pub const TOL_SOLVE: f64 = 1e-12;

/// Parsed graph description, the input of [`build_form`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String, f64)>,
    #[serde(default)]
    pub mu: BTreeMap<String, f64>,
    #[serde(default)]
    pub potential: BTreeMap<String, f64>,
    #[serde(default)]
    pub dirichlet: Vec<String>,
}

/// Real-valued function on the vertex set of a form, in the form's vertex order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexFunction(pub Vec<f64>);

impl VertexFunction {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> VertexFunction {
        VertexFunction(self.0.iter().map(|&v| op(v)).collect())
    }

    pub fn zip_with(&self, other: &VertexFunction, op: impl Fn(f64, f64) -> f64) -> VertexFunction {
        VertexFunction(self.0.iter().zip(&other.0).map(|(&a, &b)| op(a, b)).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        crate::linalg::sup_norm(&self.0)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl std::ops::Index<usize> for VertexFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub b: f64,
}

/// Dense spectral decomposition of `S = M^{-1/2} H M^{-1/2}` on the free vertices.
#[derive(Debug)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

struct Caches {
    symbolic: OnceLock<std::result::Result<SymbolicLlt<usize>, Error>>,
    energy_solver: OnceLock<Option<Arc<SpdSolver>>>,
    shifted: Mutex<HashMap<u64, Arc<SpdSolver>>>,
    spectrum: OnceLock<Option<Arc<Spectrum>>>,
}

const SHIFTED_MEMO_CAPACITY: usize = 64;

struct Inner {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    mu: Vec<f64>,
    potential: Vec<f64>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    boundary: Vec<bool>,
    free: Vec<usize>,
    free_pos: Vec<Option<usize>>,
    energy: SymCsr,
    mu_free: Vec<f64>,
    generator_norm: f64,
    caches: Caches,
}

/// Immutable discrete Schrödinger form. Cheap to clone; factorizations are
/// cached and shared between clones.
#[derive(Clone)]
pub struct GraphForm {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for GraphForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GraphForm")
            .field("vertices", &self.inner.ids.len())
            .field("edges", &self.inner.edges.len())
            .field("boundary", &(self.inner.ids.len() - self.inner.free.len()))
            .finish()
    }
}

/// Validates a graph description and assembles the form.
pub fn build_form(spec: &GraphSpec) -> Result<GraphForm> {
    GraphForm::new(spec)
}

impl GraphForm {
    pub fn new(spec: &GraphSpec) -> Result<Self> {
        if spec.vertices.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut ids = spec.vertices.clone();
        ids.sort();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateVertex(w[0].clone()));
            }
        }
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownVertex(id.to_string()))
        };
        let n = ids.len();

        let mut weights: BTreeMap<(usize, usize), (f64, bool)> = BTreeMap::new();
        for (u, v, b) in &spec.edges {
            let (iu, iv) = (lookup(u)?, lookup(v)?);
            if iu == iv {
                return Err(Error::SelfLoop(u.clone()));
            }
            if !(b.is_finite() && *b > 0.0) {
                return Err(Error::NonPositiveWeight {
                    u: u.clone(),
                    v: v.clone(),
                    weight: *b,
                });
            }
            let key = (iu.min(iv), iu.max(iv));
            let forward = iu < iv;
            match weights.get(&key) {
                Some(&(existing, _)) if existing != *b => {
                    return Err(Error::NonSymmetricWeights {
                        u: u.clone(),
                        v: v.clone(),
                        forward: existing,
                        backward: *b,
                    });
                }
                _ => {
                    weights.insert(key, (*b, forward));
                }
            }
        }
        let edges: Vec<Edge> = weights
            .into_iter()
            .map(|((u, v), (b, _))| Edge { u, v, b })
            .collect();

        let mut mu = vec![1.0; n];
        for (id, &m) in &spec.mu {
            let i = lookup(id)?;
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::NonPositiveMeasure {
                    vertex: id.clone(),
                    value: m,
                });
            }
            mu[i] = m;
        }
        let mut potential = vec![0.0; n];
        for (id, &c) in &spec.potential {
            let i = lookup(id)?;
            if !c.is_finite() {
                return Err(Error::NonFinitePotential { vertex: id.clone() });
            }
            potential[i] = c;
        }
        let mut boundary = vec![false; n];
        for id in &spec.dirichlet {
            let i = index
                .get(id)
                .copied()
                .ok_or_else(|| Error::DisconnectedDirichletSpec(id.clone()))?;
            boundary[i] = true;
        }

        Self::assemble(ids, index, mu, potential, edges, boundary)
    }

    fn assemble(
        ids: Vec<String>,
        index: HashMap<String, usize>,
        mu: Vec<f64>,
        potential: Vec<f64>,
        edges: Vec<Edge>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        let n = ids.len();
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.u].push((e.v, e.b));
            adjacency[e.v].push((e.u, e.b));
        }
        let free: Vec<usize> = (0..n).filter(|&i| !boundary[i]).collect();
        let mut free_pos = vec![None; n];
        for (k, &i) in free.iter().enumerate() {
            free_pos[i] = Some(k);
        }
        let mut entries = Vec::with_capacity(free.len() + 2 * edges.len());
        for (k, &i) in free.iter().enumerate() {
            entries.push((k, k, potential[i] * mu[i]));
        }
        for e in &edges {
            match (free_pos[e.u], free_pos[e.v]) {
                (Some(a), Some(b)) => {
                    entries.push((a, a, e.b));
                    entries.push((b, b, e.b));
                    entries.push((a, b, -e.b));
                    entries.push((b, a, -e.b));
                }
                (Some(a), None) => entries.push((a, a, e.b)),
                (None, Some(b)) => entries.push((b, b, e.b)),
                (None, None) => {}
            }
        }
        let energy = SymCsr::from_entries(free.len(), entries);
        let mu_free: Vec<f64> = free.iter().map(|&i| mu[i]).collect();
        let generator_norm = (0..free.len())
            .map(|k| energy.row(k).map(|(_, v)| v.abs()).sum::<f64>() / mu_free[k])
            .fold(0.0, f64::max);

        let form = GraphForm {
            inner: Arc::new(Inner {
                ids,
                index,
                mu,
                potential,
                edges,
                adjacency,
                boundary,
                free,
                free_pos,
                energy,
                mu_free,
                generator_norm,
                caches: Caches {
                    symbolic: OnceLock::new(),
                    energy_solver: OnceLock::new(),
                    shifted: Mutex::new(HashMap::new()),
                    spectrum: OnceLock::new(),
                },
            }),
        };
        form.validate_nonnegative()?;
        Ok(form)
    }

    fn validate_nonnegative(&self) -> Result<()> {
        let s = &self.inner;
        if s.free.iter().all(|&i| s.potential[i] >= 0.0) {
            return Ok(());
        }
        let tol = self.tol_psd();
        let shifted = s.energy.add_diagonal(&s.mu_free.iter().map(|m| tol * m).collect::<Vec<_>>());
        match SpdSolver::cholesky(&shifted, Some(self.symbolic()?))? {
            Factorization::Ok(_) => Ok(()),
            Factorization::NotPositiveDefinite => {
                let eigenvalue = self.lowest_eigenvalue().unwrap_or(-tol);
                Err(Error::FormNotNonnegative {
                    eigenvalue,
                    tolerance: tol,
                })
            }
        }
    }

    /// `tol_psd = 1e-10 · ‖L‖`, with a floor for the zero form.
    pub fn tol_psd(&self) -> f64 {
        TOL_PSD_REL * self.inner.generator_norm.max(f64::MIN_POSITIVE.sqrt())
    }

    /// Scale used to turn the absolute inequality tolerance into one that
    /// survives forms with large weights.
    pub fn ineq_scale(&self) -> f64 {
        self.inner.generator_norm.max(1.0)
    }

    /// Gershgorin bound on the operator norm of `L` in `ℓ²(µ)`.
    pub fn generator_norm(&self) -> f64 {
        self.inner.generator_norm
    }

    pub fn n_vertices(&self) -> usize {
        self.inner.ids.len()
    }

    pub fn n_free(&self) -> usize {
        self.inner.free.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.inner.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.inner.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.inner
            .index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn measure(&self) -> &[f64] {
        &self.inner.mu
    }

    pub fn potential(&self) -> &[f64] {
        &self.inner.potential
    }

    pub fn edges(&self) -> &[Edge] {
        &self.inner.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.inner.adjacency[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.inner.boundary[i]
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.inner.free
    }

    pub fn free_position(&self, i: usize) -> Option<usize> {
        self.inner.free_pos[i]
    }

    /// Energy matrix `H` on the free vertices (`L = M⁻¹H`).
    pub fn energy_matrix(&self) -> &SymCsr {
        &self.inner.energy
    }

    pub fn free_measure(&self) -> &[f64] {
        &self.inner.mu_free
    }

    pub fn check_domain(&self, f: &VertexFunction) -> Result<()> {
        if f.len() != self.n_vertices() {
            return Err(Error::DomainMismatch(format!(
                "function has {} values, form has {} vertices",
                f.len(),
                self.n_vertices()
            )));
        }
        Ok(())
    }

    pub fn zeros(&self) -> VertexFunction {
        VertexFunction(vec![0.0; self.n_vertices()])
    }

    /// Constant on the free vertices, zero on the boundary.
    pub fn constant(&self, value: f64) -> VertexFunction {
        self.from_fn(|_| value)
    }

    /// Function given by `op(vertex index)` on free vertices, zero on the boundary.
    pub fn from_fn(&self, op: impl Fn(usize) -> f64) -> VertexFunction {
        VertexFunction(
            (0..self.n_vertices())
                .map(|i| if self.inner.boundary[i] { 0.0 } else { op(i) })
                .collect(),
        )
    }

    pub fn indicator(&self, set: &[usize]) -> VertexFunction {
        let mut f = self.zeros();
        for &i in set {
            if !self.inner.boundary[i] {
                f.0[i] = 1.0;
            }
        }
        f
    }

    /// Restriction to the free vertices.
    pub fn restrict(&self, f: &VertexFunction) -> Vec<f64> {
        self.inner.free.iter().map(|&i| f.0[i]).collect()
    }

    /// Extension by zero from the free vertices.
    pub fn extend(&self, free_values: &[f64]) -> VertexFunction {
        let mut out = self.zeros();
        for (k, &i) in self.inner.free.iter().enumerate() {
            out.0[i] = free_values[k];
        }
        out
    }

    /// Random test function vanishing on the boundary.
    pub fn random_function<R: Rng>(&self, rng: &mut R) -> VertexFunction {
        let free = rng::sample_vector(rng, self.n_free());
        self.extend(&free)
    }

    fn value(&self, f: &VertexFunction, i: usize) -> f64 {
        if self.inner.boundary[i] {
            0.0
        } else {
            f.0[i]
        }
    }

    /// `q(f)`; values on the boundary are ignored.
    pub fn evaluate(&self, f: &VertexFunction) -> Result<f64> {
        self.evaluate_bilinear(f, f)
    }

    /// Polarized form `q(f, g)`.
    pub fn evaluate_bilinear(&self, f: &VertexFunction, g: &VertexFunction) -> Result<f64> {
        self.check_domain(f)?;
        self.check_domain(g)?;
        let s = &self.inner;
        let edge_part: f64 = s
            .edges
            .iter()
            .map(|e| {
                e.b * (self.value(f, e.u) - self.value(f, e.v))
                    * (self.value(g, e.u) - self.value(g, e.v))
            })
            .sum();
        let potential_part: f64 = s
            .free
            .iter()
            .map(|&i| s.potential[i] * f.0[i] * g.0[i] * s.mu[i])
            .sum();
        Ok(edge_part + potential_part)
    }

    /// `⟨f, g⟩_µ` over the free vertices.
    pub fn inner_product(&self, f: &VertexFunction, g: &VertexFunction) -> f64 {
        self.inner
            .free
            .iter()
            .map(|&i| f.0[i] * g.0[i] * self.inner.mu[i])
            .sum()
    }

    pub fn norm_sq(&self, f: &VertexFunction) -> f64 {
        self.inner_product(f, f)
    }

    /// `H f` on free vertices, zero on the boundary.
    pub fn apply_energy(&self, f: &VertexFunction) -> VertexFunction {
        let y = self.inner.energy.matvec(&self.restrict(f));
        self.extend(&y)
    }

    /// Generator `L f = M⁻¹ H f`.
    pub fn apply_generator(&self, f: &VertexFunction) -> VertexFunction {
        let mut y = self.inner.energy.matvec(&self.restrict(f));
        for (yk, m) in y.iter_mut().zip(&self.inner.mu_free) {
            *yk /= m;
        }
        self.extend(&y)
    }

    pub fn dense_energy(&self) -> DMatrix<f64> {
        self.inner.energy.to_dense()
    }

    fn symbolic(&self) -> Result<&SymbolicLlt<usize>> {
        self.inner
            .caches
            .symbolic
            .get_or_init(|| self.inner.energy.symbolic_cholesky())
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Factorization of `H` itself, `None` when `H` is singular or indefinite
    /// (for instance when constants lie in the kernel).
    pub fn energy_solver(&self) -> Result<Option<Arc<SpdSolver>>> {
        if self.n_free() == 0 {
            return Ok(None);
        }
        if let Some(s) = self.inner.caches.energy_solver.get() {
            return Ok(s.clone());
        }
        let energy = &self.inner.energy;
        let solver = match SpdSolver::cholesky(energy, Some(self.symbolic()?))? {
            Factorization::Ok(direct) => {
                // A factorization can succeed on a numerically singular
                // matrix; reject pivots that are pure roundoff.
                if self.cholesky_is_trustworthy(&direct)? {
                    let s = if self.n_free() > crate::linalg::DIRECT_SOLVE_LIMIT {
                        SpdSolver::iterative(energy, TOL_SOLVE)?
                    } else {
                        direct
                    };
                    Some(Arc::new(s))
                } else {
                    None
                }
            }
            Factorization::NotPositiveDefinite => None,
        };
        Ok(self
            .inner
            .caches
            .energy_solver
            .get_or_init(|| solver)
            .clone())
    }

    fn cholesky_is_trustworthy(&self, solver: &SpdSolver) -> Result<bool> {
        // Solve H x = M 1 and test the Rayleigh quotient of x: a near-null
        // direction shows up as an enormous solution.
        let rhs: Vec<f64> = self.inner.mu_free.clone();
        let x = solver.solve(&rhs)?;
        let hx = self.inner.energy.matvec(&x);
        let residual: f64 = hx
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = crate::linalg::sup_norm(&rhs);
        let xnorm: f64 = x.iter().zip(&self.inner.mu_free).map(|(a, m)| a * a * m).sum();
        let xhx = crate::linalg::dot(&x, &hx);
        let rayleigh = xhx / xnorm;
        Ok(residual <= 1e-6 * scale && rayleigh > 1e3 * f64::EPSILON * self.inner.generator_norm)
    }

    /// Solver for `H + αM`, memoized by the bit pattern of `α`.
    pub fn shifted_solver(&self, alpha: f64) -> Result<Arc<SpdSolver>> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "resolvent parameter must be positive, got {alpha}"
            )));
        }
        let key = alpha.to_bits();
        if let Some(s) = self.inner.caches.shifted.lock().get(&key) {
            return Ok(s.clone());
        }
        let shift: Vec<f64> = self.inner.mu_free.iter().map(|m| alpha * m).collect();
        let matrix = self.inner.energy.add_diagonal(&shift);
        let solver = if self.n_free() > crate::linalg::DIRECT_SOLVE_LIMIT {
            SpdSolver::iterative(&matrix, TOL_SOLVE)?
        } else {
            match SpdSolver::cholesky(&matrix, Some(self.symbolic()?))? {
                Factorization::Ok(s) => s,
                Factorization::NotPositiveDefinite => {
                    return Err(Error::SolverFailure(format!(
                        "H + {alpha:e} M is not positive definite"
                    )))
                }
            }
        };
        let solver = Arc::new(solver);
        let mut memo = self.inner.caches.shifted.lock();
        if memo.len() >= SHIFTED_MEMO_CAPACITY {
            memo.clear();
        }
        memo.insert(key, solver.clone());
        Ok(solver)
    }

    /// Dense eigendecomposition of `M^{-1/2} H M^{-1/2}`; `None` above the
    /// dense limit.
    pub fn spectrum(&self) -> Option<Arc<Spectrum>> {
        self.inner
            .caches
            .spectrum
            .get_or_init(|| {
                let n = self.n_free();
                if n > DENSE_EIGEN_LIMIT {
                    return None;
                }
                let mut s = self.dense_energy();
                let scale: Vec<f64> = self.inner.mu_free.iter().map(|m| m.sqrt().recip()).collect();
                for i in 0..n {
                    for j in 0..n {
                        s[(i, j)] *= scale[i] * scale[j];
                    }
                }
                let s = (&s + s.transpose()) * 0.5;
                let eig = SymmetricEigen::new(s);
                Some(Arc::new(Spectrum {
                    eigenvalues: eig.eigenvalues,
                    eigenvectors: eig.eigenvectors,
                }))
            })
            .clone()
    }

    /// Smallest eigenvalue of `L` when a dense solve is feasible.
    pub fn lowest_eigenvalue(&self) -> Option<f64> {
        self.spectrum()
            .map(|s| s.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Connected components of the positive-weight graph on the free vertices,
    /// each sorted, listed by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let s = &self.inner;
        let n = self.n_vertices();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for &start in &s.free {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &(y, b) in &s.adjacency[x] {
                    if b > 0.0 && !s.boundary[y] && !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        queue.push_back(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Breadth-first distances from `root` through free vertices.
    pub fn graph_distances(&self, root: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_vertices()];
        dist[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].expect("queued vertices have a distance");
            for &(y, _) in &self.inner.adjacency[x] {
                if dist[y].is_none() && !self.inner.boundary[y] {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Description that rebuilds this form.
    pub fn to_spec(&self) -> GraphSpec {
        let s = &self.inner;
        GraphSpec {
            vertices: s.ids.clone(),
            edges: s
                .edges
                .iter()
                .map(|e| (s.ids[e.u].clone(), s.ids[e.v].clone(), e.b))
                .collect(),
            mu: s
                .ids
                .iter()
                .zip(&s.mu)
                .filter(|(_, &m)| m != 1.0)
                .map(|(id, &m)| (id.clone(), m))
                .collect(),
            potential: s
                .ids
                .iter()
                .zip(&s.potential)
                .filter(|(_, &c)| c != 0.0)
                .map(|(id, &c)| (id.clone(), c))
                .collect(),
            dirichlet: (0..s.ids.len())
                .filter(|&i| s.boundary[i])
                .map(|i| s.ids[i].clone())
                .collect(),
        }
    }
}

/// Result of sampling the first Beurling–Deny criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeurlingDenyReport {
    pub samples: usize,
    /// Largest `q(|f|) - q(f)` over unit-norm samples (negative or zero when the criterion holds).
    pub max_violation: f64,
    pub tolerance: f64,
}

/// Samples `q(|f|) ≤ q(f)` on random unit-norm functions.
pub fn check_first_bd(form: &GraphForm, n_samples: usize, seed: u64) -> Result<BeurlingDenyReport> {
    let mut rng = rng::seeded(seed);
    let tolerance = TOL_INEQ * form.ineq_scale();
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let f = form.random_function(&mut rng);
        let norm = form.norm_sq(&f);
        if norm == 0.0 {
            continue;
        }
        let f = f.map(|v| v / norm.sqrt());
        let violation = form.evaluate(&f.map(f64::abs))? - form.evaluate(&f)?;
        max_violation = max_violation.max(violation);
    }
    if max_violation > tolerance {
        return Err(Error::ViolationFound {
            violation: max_violation,
        });
    }
    Ok(BeurlingDenyReport {
        samples: n_samples,
        max_violation: if max_violation.is_finite() { max_violation } else { 0.0 },
        tolerance,
    })
}

/// `q(f) + q(g) - q(f ∧ g) - q(f ∨ g)`, nonnegative for Beurling–Deny forms.
pub fn check_lattice_inequality(form: &GraphForm, f: &VertexFunction, g: &VertexFunction) -> Result<f64> {
    form.check_domain(f)?;
    form.check_domain(g)?;
    let meet = f.zip_with(g, f64::min);
    let join = f.zip_with(g, f64::max);
    Ok(form.evaluate(f)? + form.evaluate(g)? - form.evaluate(&meet)? - form.evaluate(&join)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub set: Vec<usize>,
    pub is_invariant: bool,
    /// Unit-norm function with `q(1_A f) > q(f) + tol` when the set is not invariant.
    pub witness: Option<VertexFunction>,
    pub witness_violation: f64,
    /// Largest `q(1_A f) - q(f)` over the random unit-norm samples.
    pub sampled_violation: f64,
}

/// Decides invariance of `set` by the edge-cut criterion and searches for a
/// violating function.
pub fn is_invariant_set(form: &GraphForm, set: &[usize], n_samples: usize, seed: u64) -> Result<InvarianceReport> {
    let n = form.n_vertices();
    let mut in_set = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::DomainMismatch(format!("vertex index {i} out of range")));
        }
        in_set[i] = true;
    }
    let members: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
    let free = |i: usize| !form.is_boundary(i);
    let cut: f64 = form
        .edges()
        .iter()
        .filter(|e| free(e.u) && free(e.v) && in_set[e.u] != in_set[e.v])
        .map(|e| e.b)
        .sum();
    let is_invariant = cut == 0.0;

    let tolerance = TOL_INEQ * form.ineq_scale();
    let (witness, witness_violation) = if is_invariant {
        (None, 0.0)
    } else {
        // f = 1_A + t 1_{A^c}: q(1_A) - q(f) = 2t·cut - t²·q(1_{A^c}),
        // maximized at t = cut / q(1_{A^c}).
        let complement: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
        let q_comp = form.evaluate(&form.indicator(&complement))?;
        let t = if q_comp > cut * 1e-12 { cut / q_comp } else { 1.0 };
        let f = form.from_fn(|i| if in_set[i] { 1.0 } else { t });
        let norm = form.norm_sq(&f).sqrt();
        let f = f.map(|v| v / norm);
        let restricted = f.zip_with(&form.indicator(&members), |a, b| a * b);
        let violation = form.evaluate(&restricted)? - form.evaluate(&f)?;
        if violation > tolerance {
            (Some(f), violation)
        } else {
            (None, violation)
        }
    };

    let mut rng = rng::seeded(seed);
    let mut sampled = f64::NEG_INFINITY;
    let indicator = form.indicator(&members);
    for _ in 0..n_samples {
        let f = form.random_function(&mut rng);
        let norm = form.norm_sq(&f);
        if norm == 0.0 {
            continue;
        }
        let f = f.map(|v| v / norm.sqrt());
        let restricted = f.zip_with(&indicator, |a, b| a * b);
        sampled = sampled.max(form.evaluate(&restricted)? - form.evaluate(&f)?);
    }
    Ok(InvarianceReport {
        set: members,
        is_invariant,
        witness,
        witness_violation,
        sampled_violation: if sampled.is_finite() { sampled } else { 0.0 },
    })
}

/// Connected components of the positive-weight edge graph on free vertices.
pub fn irreducible_components(form: &GraphForm) -> Vec<Vec<usize>> {
    form.components()
}

/// Vertex ids of a component list, for reports.
pub fn component_ids(form: &GraphForm, components: &[Vec<usize>]) -> Vec<BTreeSet<String>> {
    components
        .iter()
        .map(|c| c.iter().map(|&i| form.id(i).to_string()).collect())
        .collect()
}

//! Weak Hardy and weak Poincaré profiles `α(r)`, the decay rate `ξ(t)` and
//! the semigroup decay check.
//!
//! For a weight `w` and comparison function `h` the profile bounds the best
//! `α(r)` in
//!
//! ```text
//! Σ f² w µ ≤ α(r) q(f) + r ‖f/h‖_∞²
//! ```
//!
//! from both sides. The upper bound uses `‖f/h‖_∞² ≥ Σ π(x) f(x)²/h(x)²` for
//! any probability vector `π`, which turns the inequality into a pencil
//! eigenvalue; `π` is then tuned by mirror descent. The lower bound is the best
//! violating candidate found by projected gradient ascent.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::{GraphForm, VertexFunction, TOL_INEQ};
use crate::linalg::{self, DENSE_EIGEN_LIMIT};
use crate::resolvent::{is_excessive, semigroup_apply};
use crate::rng;

/// Relative slack of the decay inequality.
pub const TOL_DECAY: f64 = 1e-8;
/// Margins below this are flagged as tight.
pub const TIGHT_MARGIN: f64 = 1e-3;
/// Relative `‖Lh‖_∞` accepted for a kernel function in Poincaré mode.
pub const TOL_KERNEL: f64 = 1e-8;
/// Relative precision of the `ξ` bisection in `r`.
pub const TOL_XI: f64 = 1e-10;
const MIRROR_STEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `ker q = 0`, all functions admitted.
    Hardy,
    /// `h` spans the kernel; only `f ⊥_w h` are admitted.
    Poincare,
}

/// Search budget for the lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub starts: usize,
    pub iterations: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            starts: 50,
            iterations: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub mode: Mode,
    pub r_grid: Vec<f64>,
    /// Certified upper bounds, nonincreasing in `r`.
    pub alpha_cert: Vec<f64>,
    /// Best violating candidates, `≤ alpha_cert` up to rounding.
    pub alpha_lb: Vec<f64>,
    /// Top pencil eigenvalue, the profile value at `r = 0`.
    pub pencil_lambda: f64,
    /// `Σ h² w µ`; the profile vanishes from here on.
    pub zero_from: f64,
    /// Set when the best candidate was still improving at the iteration limit.
    pub budget_exhausted: bool,
    pub w: VertexFunction,
    pub h: VertexFunction,
}

/// Dense data of the restricted problem on the free vertices.
struct Problem {
    /// `wµ` per free vertex.
    wm: Vec<f64>,
    h: Vec<f64>,
    /// Sparse energy on the free vertices.
    energy: linalg::SymCsr,
    /// `R = L⁻¹ Qᵀ` with `QᵀHQ = LLᵀ` and `Q` a basis of the admissible space.
    r_map: DMatrix<f64>,
    /// `h² w µ`, the normal of the Poincaré hyperplane in `g = f/h` coordinates.
    normal: Option<Vec<f64>>,
}

impl Problem {
    fn new(form: &GraphForm, w: &[f64], h: &[f64], mode: Mode) -> Result<Self> {
        let n = h.len();
        let wm: Vec<f64> = w.iter().zip(form.free_measure()).map(|(a, m)| a * m).collect();
        let hd = form.dense_energy();
        let (q, normal) = match mode {
            Mode::Hardy => (DMatrix::identity(n, n), None),
            Mode::Poincare => {
                let a: Vec<f64> = (0..n).map(|i| wm[i] * h[i]).collect();
                let normal: Vec<f64> = (0..n).map(|i| a[i] * h[i]).collect();
                (complement_basis(&a), Some(normal))
            }
        };
        let hq = q.transpose() * &hd * &q;
        let hq = (&hq + hq.transpose()) * 0.5;
        let chol = hq.cholesky().ok_or(Error::NonTrivialKernel)?;
        let r_map = chol
            .l()
            .solve_lower_triangular(&q.transpose())
            .ok_or(Error::NonTrivialKernel)?;
        Ok(Problem {
            wm,
            h: h.to_vec(),
            energy: form.energy_matrix().clone(),
            r_map,
            normal,
        })
    }

    /// `R diag(d) Rᵀ`.
    fn congruence(&self, d: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.r_map.clone();
        for (j, &dj) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(dj);
        }
        let c = &scaled * self.r_map.transpose();
        (&c + c.transpose()) * 0.5
    }

    /// Top eigenpair of the restricted pencil with diagonal `d`, the eigenvector
    /// mapped back to vertex coordinates.
    fn top(&self, d: &[f64]) -> (f64, Vec<f64>) {
        let (lambda, y) = linalg::top_eigenpair(self.congruence(d));
        let f = self.r_map.transpose() * y;
        (lambda, f.as_slice().to_vec())
    }

    fn energy(&self, f: &[f64]) -> f64 {
        self.energy.bilinear(f, f)
    }

    /// `(Σ f² w µ - r ‖f/h‖_∞²) / q(f)` for `f = h g`.
    fn ratio(&self, g: &[f64], r: f64) -> Option<f64> {
        let mut g = g.to_vec();
        if let Some(a) = &self.normal {
            // Exact re-projection: near-zero iterates are rounding noise with
            // no reason to be orthogonal to h.
            let shift = linalg::dot(&g, a) / a.iter().sum::<f64>();
            g.iter_mut().for_each(|v| *v -= shift);
        }
        let f: Vec<f64> = g.iter().zip(&self.h).map(|(a, b)| a * b).collect();
        let q = self.energy(&f);
        let sup = linalg::sup_norm(&g);
        if !(q > 0.0) || sup < 1e-12 {
            return None;
        }
        let mass: f64 = f.iter().zip(&self.wm).map(|(v, m)| v * v * m).sum();
        Some((mass - r * sup * sup) / q)
    }

    /// Smooth surrogate `(Σ h²g²wµ - r) / q(hg)` on the box and its gradient.
    fn surrogate(&self, g: &[f64], r: f64) -> Option<(f64, Vec<f64>)> {
        let f: Vec<f64> = g.iter().zip(&self.h).map(|(a, b)| a * b).collect();
        let hf = self.energy.matvec(&f);
        let d = linalg::dot(&f, &hf);
        if !(d > 0.0) {
            return None;
        }
        let n_val: f64 = f.iter().zip(&self.wm).map(|(v, m)| v * v * m).sum::<f64>() - r;
        let value = n_val / d;
        let grad = (0..g.len())
            .map(|i| {
                let dn = 2.0 * self.h[i] * self.wm[i] * f[i];
                let dd = 2.0 * self.h[i] * hf[i];
                (dn * d - n_val * dd) / (d * d)
            })
            .collect();
        Some((value, grad))
    }

    /// Euclidean projection onto the box `[-1, 1]ⁿ`, intersected with the
    /// Poincaré hyperplane when present.
    fn project(&self, g: &[f64]) -> Vec<f64> {
        let clamp = |v: f64| v.clamp(-1.0, 1.0);
        match &self.normal {
            None => g.iter().map(|&v| clamp(v)).collect(),
            Some(a) => {
                let shifted = |s: f64| -> Vec<f64> {
                    g.iter().zip(a).map(|(&v, &ai)| clamp(v - s * ai)).collect()
                };
                let level = |s: f64| linalg::dot(&shifted(s), a);
                let amin = a.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
                let reach = (linalg::sup_norm(g) + 1.0) / amin;
                let (mut lo, mut hi) = (-reach, reach);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if level(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * reach {
                        break;
                    }
                }
                shifted(0.5 * (lo + hi))
            }
        }
    }

    /// Projected gradient ascent on the surrogate; returns the best true ratio
    /// seen and whether the iteration limit was hit while still improving.
    fn ascend(&self, start: Vec<f64>, r: f64, iterations: usize) -> (f64, bool) {
        let mut g = self.project(&start);
        let mut best = self.ratio(&g, r).unwrap_or(f64::NEG_INFINITY);
        let Some((mut value, mut grad)) = self.surrogate(&g, r) else {
            return (best, false);
        };
        let mut step = 1.0 / (linalg::norm2(&grad) + 1e-300);
        for _ in 0..iterations {
            let mut accepted = None;
            let mut s = step * 2.0;
            for _ in 0..40 {
                let trial: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a + s * b).collect();
                let trial = self.project(&trial);
                if let Some((v, gr)) = self.surrogate(&trial, r) {
                    if v > value + 1e-15 * value.abs() {
                        accepted = Some((trial, v, gr, s));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((trial, v, gr, s)) = accepted else {
                return (best, false);
            };
            g = trial;
            value = v;
            grad = gr;
            step = s;
            if let Some(ratio) = self.ratio(&g, r) {
                best = best.max(ratio);
            }
        }
        (best, true)
    }
}

/// Orthonormal basis of `a^⊥` from a Householder reflection.
fn complement_basis(a: &[f64]) -> DMatrix<f64> {
    let n = a.len();
    let norm = linalg::norm2(a);
    let mut u = DVector::from_column_slice(a) / norm;
    u[0] += if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let uu = u.dot(&u);
    let reflector = DMatrix::identity(n, n) - (&u * u.transpose()) * (2.0 / uu);
    reflector.columns(1, n - 1).into_owned()
}

fn validate_profile_inputs(form: &GraphForm, w: &VertexFunction, h: &VertexFunction, r_grid: &[f64]) -> Result<()> {
    form.check_domain(w)?;
    form.check_domain(h)?;
    for &i in form.free_vertices() {
        if !(w[i] >= 0.0 && w[i].is_finite()) {
            return Err(Error::NonPositiveInput(format!("w({}) = {}", form.id(i), w[i])));
        }
        if !(h[i] > 0.0 && h[i].is_finite()) {
            return Err(Error::NonPositiveInput(format!("h({}) = {}", form.id(i), h[i])));
        }
    }
    if r_grid.is_empty() {
        return Err(Error::InvalidArgument("r grid is empty".into()));
    }
    if r_grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) || r_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("r grid must be positive and strictly increasing".into()));
    }
    let n = form.n_free();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n > DENSE_EIGEN_LIMIT {
        return Err(Error::DenseLimit {
            n,
            limit: DENSE_EIGEN_LIMIT,
        });
    }
    Ok(())
}

/// Upper bound at one `r`: minimize `λ_max(W - r diag(π/h²), H)` over
/// probability vectors `π` by exponentiated gradient from a few seeds.
fn certificate(p: &Problem, r: f64, top_f: &[f64]) -> f64 {
    let n = p.h.len();
    let normalized = |v: Vec<f64>| -> Option<Vec<f64>> {
        let s: f64 = v.iter().sum();
        (s > 0.0 && s.is_finite()).then(|| v.iter().map(|x| x / s).collect())
    };
    let seeds: Vec<Vec<f64>> = [
        normalized((0..n).map(|i| p.h[i] * p.h[i] * p.wm[i]).collect()),
        normalized(vec![1.0; n]),
        normalized((0..n).map(|i| (top_f[i] / p.h[i]).powi(2)).collect()),
    ]
    .into_iter()
    .flatten()
    .collect();
    let mut best = f64::INFINITY;
    for mut pi in seeds {
        for k in 0..MIRROR_STEPS {
            let d: Vec<f64> = (0..n).map(|i| p.wm[i] - r * pi[i] / (p.h[i] * p.h[i])).collect();
            let (lambda, f) = p.top(&d);
            best = best.min(lambda);
            if best <= 0.0 {
                return 0.0;
            }
            let grad: Vec<f64> = (0..n).map(|i| -r * (f[i] / p.h[i]).powi(2)).collect();
            let scale = linalg::sup_norm(&grad);
            if scale == 0.0 {
                break;
            }
            let eta = 2.0 / ((k + 1) as f64).sqrt();
            let updated: Vec<f64> = pi
                .iter()
                .zip(&grad)
                .map(|(w, g)| w * (-eta * g / scale).exp())
                .collect();
            match normalized(updated) {
                Some(next) => pi = next,
                None => break,
            }
        }
    }
    best.max(0.0)
}

/// Lower bound at one `r` from eigenvector seeds, their ramps and random starts.
fn lower_bound<R: Rng>(p: &Problem, r: f64, seeds: &[Vec<f64>], budget: Budget, rng: &mut R) -> (f64, bool) {
    let n = p.h.len();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if p.normal.is_none() {
        starts.push(vec![1.0; n]);
    }
    for g in seeds {
        starts.push(g.clone());
        for kappa in [2.0, 4.0] {
            starts.push(g.iter().map(|v| (kappa * v).clamp(-1.0, 1.0)).collect());
        }
    }
    starts.truncate(budget.starts);
    while starts.len() < budget.starts {
        starts.push(rng::sample_vector(rng, n));
    }
    let mut best = f64::NEG_INFINITY;
    let mut exhausted = false;
    for start in starts {
        let (value, hit_limit) = p.ascend(start, r, budget.iterations);
        if value > best {
            best = value;
            exhausted = hit_limit;
        }
    }
    (best.max(0.0), exhausted)
}

/// Certified and heuristic bounds on `α(r)` over `r_grid`.
pub fn alpha_profile(
    form: &GraphForm,
    w: &VertexFunction,
    h: &VertexFunction,
    r_grid: &[f64],
    mode: Mode,
    budget: Budget,
    seed: u64,
) -> Result<AlphaProfile> {
    validate_profile_inputs(form, w, h, r_grid)?;
    let h_free = form.restrict(h);
    let w_free = form.restrict(w);
    match mode {
        Mode::Hardy => {
            if form.energy_solver()?.is_none() {
                return Err(Error::NonTrivialKernel);
            }
        }
        Mode::Poincare => {
            let lh = form.restrict(&form.apply_generator(h));
            let residual = linalg::sup_norm(&lh);
            if residual > TOL_KERNEL * form.ineq_scale() * linalg::sup_norm(&h_free) {
                return Err(Error::KernelMismatch(residual));
            }
        }
    }
    let problem = Problem::new(form, &w_free, &h_free, mode)?;
    let n = h_free.len();
    let zero_from: f64 = (0..n).map(|i| h_free[i] * h_free[i] * problem.wm[i]).sum();

    let c0 = problem.congruence(&problem.wm);
    let eig = nalgebra::SymmetricEigen::new(c0);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pencil_lambda = eig.eigenvalues[order[0]].max(0.0);
    let eigvecs: Vec<Vec<f64>> = order
        .iter()
        .take(8)
        .map(|&k| {
            let f = problem.r_map.transpose() * eig.eigenvectors.column(k);
            f.as_slice().to_vec()
        })
        .collect();
    let seeds: Vec<Vec<f64>> = eigvecs
        .iter()
        .map(|f| {
            let g: Vec<f64> = f.iter().zip(&h_free).map(|(a, b)| a / b).collect();
            let s = linalg::sup_norm(&g).max(1e-300);
            g.iter().map(|v| v / s).collect()
        })
        .collect();

    let per_r: Vec<(f64, f64, bool)> = r_grid
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let cert = if r >= zero_from {
                0.0
            } else {
                certificate(&problem, r, &eigvecs[0])
            };
            let mut stream = rng::derived(seed, k as u64);
            let (lb, exhausted) = lower_bound(&problem, r, &seeds, budget, &mut stream);
            (cert, lb, exhausted)
        })
        .collect();

    let mut alpha_cert = Vec::with_capacity(r_grid.len());
    let mut running = pencil_lambda;
    for &(c, _, _) in &per_r {
        running = running.min(c);
        alpha_cert.push(running);
    }
    Ok(AlphaProfile {
        mode,
        r_grid: r_grid.to_vec(),
        alpha_cert,
        alpha_lb: per_r.iter().map(|t| t.1).collect(),
        pencil_lambda,
        zero_from,
        budget_exhausted: per_r.iter().any(|t| t.2),
        w: w.clone(),
        h: h.clone(),
    })
}

/// Geometric r grid with `points` values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    let mut grid: Vec<f64> = (0..points)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64))
        .collect();
    grid[0] = lo;
    grid[points - 1] = hi;
    grid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
}

/// `ξ(t) = inf{r > 0 : -½ α(r) log r ≤ t}` from a profile's certified bounds.
pub fn decay_rate(profile: &AlphaProfile, t_grid: &[f64]) -> Result<DecayProfile> {
    decay_rate_from(&profile.r_grid, &profile.alpha_cert, t_grid)
}

/// `ξ` from an explicit table. `α` is interpolated linearly in `r` between grid
/// points and held at its last value beyond the grid; since the optimal `α`
/// is convex in `r`, chords through upper bounds stay upper bounds.
pub fn decay_rate_from(r_grid: &[f64], alpha: &[f64], t_grid: &[f64]) -> Result<DecayProfile> {
    if r_grid.is_empty() || r_grid.len() != alpha.len() {
        return Err(Error::InvalidArgument("r grid and alpha table must match and be nonempty".into()));
    }
    if r_grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) || r_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("r grid must be positive and strictly increasing".into()));
    }
    if alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument("alpha values must be finite and nonnegative".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("t grid must be positive".into()));
    }
    let all_zero = alpha.iter().all(|&a| a == 0.0);
    let alpha_at = |r: f64| -> f64 {
        let k = r_grid.partition_point(|&x| x <= r);
        if k == 0 {
            alpha[0]
        } else if k == r_grid.len() {
            alpha[k - 1]
        } else {
            let (r0, r1) = (r_grid[k - 1], r_grid[k]);
            let s = (r - r0) / (r1 - r0);
            alpha[k - 1] + s * (alpha[k] - alpha[k - 1])
        }
    };
    let phi = |r: f64| -0.5 * alpha_at(r) * r.ln();
    let r_min = r_grid[0];
    let mut xi = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if all_zero {
            xi.push(0.0);
            continue;
        }
        if phi(r_min) <= t {
            return Err(Error::GridTooCoarse { t });
        }
        let (mut lo, mut hi) = (r_min, 1.0f64);
        while hi > lo * (1.0 + TOL_XI) {
            let mid = (lo * hi).sqrt();
            if phi(mid) <= t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        xi.push(hi);
    }
    Ok(DecayProfile {
        t: t_grid.to_vec(),
        xi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub t: f64,
    pub xi: f64,
    /// Smallest `(rhs - lhs) / rhs` over the samples.
    pub worst_margin: f64,
    pub tight: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub samples: usize,
    pub checks: Vec<DecayCheck>,
    pub worst_margin: f64,
    /// True when some margin fell below [`TIGHT_MARGIN`]; informational.
    pub flagged: bool,
}

/// Samples `‖T_t f‖² ≤ ξ(t)(‖f‖² + ‖f/h‖_∞²)` for random `f` and `f = h`.
pub fn verify_decay(
    form: &GraphForm,
    h: &VertexFunction,
    decay: &DecayProfile,
    n_samples: usize,
    seed: u64,
) -> Result<DecayReport> {
    form.check_domain(h)?;
    if let Some(&i) = form.free_vertices().iter().find(|&&i| !(h[i] > 0.0)) {
        return Err(Error::NonPositiveInput(format!("h({}) = {}", form.id(i), h[i])));
    }
    let exc = is_excessive(form, h, None, None)?;
    if !exc.excessive {
        return Err(Error::ExcessivityFailure(exc.min_generator));
    }
    let mut rng = rng::seeded(seed);
    let mut samples = vec![h.clone()];
    samples.extend((0..n_samples).map(|_| form.random_function(&mut rng)));
    let mut checks = Vec::with_capacity(decay.t.len());
    for (&t, &xi) in decay.t.iter().zip(&decay.xi) {
        let mut worst = f64::INFINITY;
        for f in &samples {
            let norm = form.norm_sq(f);
            let phi = form
                .free_vertices()
                .iter()
                .fold(0.0f64, |m, &i| m.max((f[i] / h[i]).abs()));
            let rhs = xi * (norm + phi * phi);
            if rhs == 0.0 {
                continue;
            }
            let tf = semigroup_apply(form, t, f)?;
            let lhs = form.norm_sq(&tf);
            if lhs > rhs * (1.0 + TOL_DECAY) + TOL_INEQ * 1e-4 * norm {
                return Err(Error::DecayViolation { t, lhs, rhs });
            }
            worst = worst.min((rhs - lhs) / rhs);
        }
        checks.push(DecayCheck {
            t,
            xi,
            worst_margin: worst,
            tight: worst < TIGHT_MARGIN,
        });
    }
    let worst_margin = checks.iter().map(|c| c.worst_margin).fold(f64::INFINITY, f64::min);
    Ok(DecayReport {
        samples: samples.len(),
        flagged: checks.iter().any(|c| c.tight),
        checks,
        worst_margin,
    })
}

/// `(f ∧ h) ∨ (-h)` componentwise.
pub fn truncation_map(f: &VertexFunction, h: &VertexFunction) -> Result<VertexFunction> {
    if f.len() != h.len() {
        return Err(Error::DomainMismatch("f and h differ in length".into()));
    }
    Ok(f.zip_with(h, |a, b| a.min(b).max(-b)))
}

/// `⟨f, g⟩_w = Σ f g w µ` over the free vertices.
pub fn weighted_inner(form: &GraphForm, f: &VertexFunction, g: &VertexFunction, w: &VertexFunction) -> f64 {
    form.free_vertices()
        .iter()
        .map(|&i| f[i] * g[i] * w[i] * form.measure()[i])
        .sum()
}

/// Returns `(f_proj, C)` with `f_proj ⊥_w h`.
///
/// Plain mode subtracts the `w`-orthogonal component, `f_proj = f - C h`.
/// Truncated mode solves `⟨T(f - C h), h⟩_w = 0` for the truncation map `T`
/// by bisection and returns `f_proj = T(f - C h)`.
pub fn poincare_project(
    form: &GraphForm,
    f: &VertexFunction,
    h: &VertexFunction,
    w: &VertexFunction,
    truncated: bool,
) -> Result<(VertexFunction, f64)> {
    form.check_domain(f)?;
    form.check_domain(h)?;
    form.check_domain(w)?;
    for &i in form.free_vertices() {
        if !(h[i] > 0.0) || !(w[i] > 0.0) {
            return Err(Error::NonPositiveInput(format!("h and w must be positive at {}", form.id(i))));
        }
    }
    let hh = weighted_inner(form, h, h, w);
    if !(hh > 0.0) {
        return Err(Error::NonPositiveInput("Σ h² w µ vanishes".into()));
    }
    let shifted = |c: f64| form.from_fn(|i| f[i] - c * h[i]);
    if !truncated {
        let c = weighted_inner(form, f, h, w) / hh;
        return Ok((shifted(c), c));
    }
    let level = |c: f64| -> Result<f64> {
        let tf = truncation_map(&shifted(c), h)?;
        Ok(weighted_inner(form, &tf, h, w))
    };
    let bound = form
        .free_vertices()
        .iter()
        .fold(0.0f64, |m, &i| m.max((f[i] / h[i]).abs()))
        + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    if !(level(lo)? >= 0.0 && level(hi)? <= 0.0) {
        return Err(Error::BisectionFailure);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if level(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The level map is piecewise linear; finish with one secant step inside
    // the final bracket.
    let (a, b) = (level(lo)?, level(hi)?);
    let c = if a > b { lo + a * (hi - lo) / (a - b) } else { 0.5 * (lo + hi) };
    Ok((truncation_map(&shifted(c), h)?, c))
}

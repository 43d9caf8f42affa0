//! Positive kernel operators `T: L^p(µ) → L^p(ν)`, the level `λ(T)`, weak
//! Harnack certificates, and excessive functions built as normalized limits
//! of resolvents.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::{GraphForm, VertexFunction};
use crate::resolvent::{is_excessive, resolvent_apply, semigroup_apply, ExcessivityReport};
use crate::rng;

/// Relative tail stabilization required of the excessive construction.
pub const TOL_EXC: f64 = 1e-8;
/// Default stopping tolerance for `λ(T)`: spread of the componentwise ratio.
pub const TOL_LAMBDA: f64 = 1e-12;
const MAX_LAMBDA_ITERATIONS: usize = 20_000;
const HEAT_KERNEL_TIME: f64 = 0.5;
const HEAT_KERNEL_LIMIT: usize = 500;

/// `(Tf)(z) = Σ_x k(z, x) f(x) µ(x)`, rows indexed by targets `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelOperator {
    kernel: DMatrix<f64>,
    nu: Vec<f64>,
    mu: Vec<f64>,
    p: f64,
}

impl KernelOperator {
    pub fn new(kernel: DMatrix<f64>, nu: Vec<f64>, mu: Vec<f64>, p: f64) -> Result<Self> {
        if kernel.nrows() == 0 || kernel.ncols() == 0 {
            return Err(Error::InvalidKernel("empty kernel".into()));
        }
        if nu.len() != kernel.nrows() || mu.len() != kernel.ncols() {
            return Err(Error::InvalidKernel(format!(
                "kernel is {}x{} but nu has {} and mu has {} entries",
                kernel.nrows(),
                kernel.ncols(),
                nu.len(),
                mu.len()
            )));
        }
        for z in 0..kernel.nrows() {
            for x in 0..kernel.ncols() {
                let v = kernel[(z, x)];
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidKernel(format!("k({z}, {x}) = {v} is not strictly positive")));
                }
            }
        }
        if nu.iter().chain(&mu).any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidKernel("measures must be strictly positive".into()));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidKernel(format!("exponent p = {p} outside (1, ∞)")));
        }
        Ok(KernelOperator { kernel, nu, mu, p })
    }

    /// Counting measures on both sides.
    pub fn counting(kernel: DMatrix<f64>, p: f64) -> Result<Self> {
        let (rows, cols) = kernel.shape();
        Self::new(kernel, vec![1.0; rows], vec![1.0; cols], p)
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_source(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn n_target(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n_target())
            .map(|z| (0..self.n_source()).map(|x| self.kernel[(z, x)] * f[x] * self.mu[x]).sum())
            .collect()
    }

    /// `(T*g)(x) = Σ_z k(z, x) g(z) ν(z)`.
    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        (0..self.n_source())
            .map(|x| (0..self.n_target()).map(|z| self.kernel[(z, x)] * g[z] * self.nu[z]).sum())
            .collect()
    }

    /// `T*((Tf)^{p-1})`.
    pub fn super_map(&self, f: &[f64]) -> Vec<f64> {
        let tf: Vec<f64> = self.apply(f).iter().map(|v| v.powf(self.p - 1.0)).collect();
        self.adjoint(&tf)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    /// Strictly positive, normalized to `max = 1`.
    pub witness: Vec<f64>,
    /// Smallest componentwise ratio at the end, a lower bound on `λ(T)`.
    pub lower: f64,
    pub iterations: usize,
}

fn ratio_bounds(r: &[f64]) -> (f64, f64) {
    r.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `λ(T) = ‖T‖^p` with a strictly positive witness `f` satisfying
/// `T*(Tf)^{p-1} ≤ λ f^{p-1}`.
///
/// For `p = 2` the map is linear and this is power iteration on `T*T`. For
/// other `p` the nonlinear fixed point `f ← (T*(Tf)^{p-1})^{1/(p-1)}` is damped
/// by one half in log coordinates. Either way `λ` is the largest
/// componentwise ratio, so the witness inequality holds exactly, and
/// iteration stops once the ratio spread is below `1 + tol`.
pub fn lambda_of(op: &KernelOperator, tol: f64) -> Result<LambdaResult> {
    let n = op.n_source();
    let linear = op.p == 2.0;
    let mut f = vec![1.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 0..MAX_LAMBDA_ITERATIONS {
        let m = op.super_map(&f);
        let r: Vec<f64> = m.iter().zip(&f).map(|(a, v)| a / v.powf(op.p - 1.0)).collect();
        (lo, hi) = ratio_bounds(&r);
        if hi <= lo * (1.0 + tol) {
            return Ok(LambdaResult {
                lambda: hi,
                witness: f,
                lower: lo,
                iterations: it,
            });
        }
        let next: Vec<f64> = if linear {
            m
        } else {
            let e = 1.0 / (op.p - 1.0);
            f.iter().zip(&m).map(|(v, a)| (0.5 * v.ln() + 0.5 * e * a.ln()).exp()).collect()
        };
        let scale = next.iter().copied().fold(0.0, f64::max);
        if !(scale > 0.0 && scale.is_finite()) {
            break;
        }
        f = next.iter().map(|v| v / scale).collect();
    }
    Err(Error::LambdaNoConvergence { lower: lo, upper: hi })
}

/// `max_x (T*(Tf)^{p-1}(x) - λ f(x)^{p-1})`.
pub fn check_super_eigen(op: &KernelOperator, lambda: f64, f: &[f64]) -> Result<f64> {
    if f.len() != op.n_source() {
        return Err(Error::DomainMismatch("witness length differs from the source space".into()));
    }
    if f.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveInput("super-eigenfunction must be strictly positive".into()));
    }
    Ok(op
        .super_map(f)
        .iter()
        .zip(f)
        .map(|(m, v)| m - lambda * v.powf(op.p - 1.0))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `k̃(x, y) = Σ_z k(z, x) k(z, y) ν(z)`, exactly symmetric.
pub fn ktilde(op: &KernelOperator) -> DMatrix<f64> {
    let n = op.n_source();
    let mut out = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in x..n {
            let v: f64 = (0..op.n_target())
                .map(|z| op.kernel[(z, x)] * op.kernel[(z, y)] * op.nu[z])
                .sum();
            out[(x, y)] = v;
            out[(y, x)] = v;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackCertificate {
    /// Source indices, ascending.
    pub set: Vec<usize>,
    pub mass: f64,
    pub c: f64,
    pub d: f64,
    pub lambda: f64,
}

/// Weak Harnack set `A` with `Σ_A f µ ≤ D min_A f` for every super-eigen `f`.
///
/// `A` is chosen greedily: starting from the whole space, the endpoint of the
/// smallest `k̃` entry with the smaller row minimum is dropped while the mass
/// stays above `target_mass · µ(X)`. For `p = 2`, `c = min_{A×A} k̃` and
/// `D = λ/c`. For other `p`,
/// `c = min_{x∈A} Σ_z k(z,x) ν(z) (min_{y∈A} k(z,y))^{p-1}` and
/// `D = (λ/c)^{1/(p-1)}`.
pub fn harnack_sets(op: &KernelOperator, target_mass: f64, lambda: f64) -> Result<HarnackCertificate> {
    if !(target_mass > 0.0 && target_mass <= 1.0) {
        return Err(Error::InvalidArgument(format!("target mass {target_mass} outside (0, 1]")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    let kt = ktilde(op);
    let total: f64 = op.mu.iter().sum();
    let needed = target_mass * total * (1.0 - 1e-12);
    let mut set: Vec<usize> = (0..op.n_source()).collect();
    let row_min = |set: &[usize], x: usize| set.iter().map(|&y| kt[(x, y)]).fold(f64::INFINITY, f64::min);
    loop {
        let mass: f64 = set.iter().map(|&x| op.mu[x]).sum();
        if mass < needed {
            return Err(Error::EmptySelection(target_mass));
        }
        let mut worst = (f64::INFINITY, 0, 0);
        for &x in &set {
            for &y in &set {
                if kt[(x, y)] < worst.0 {
                    worst = (kt[(x, y)], x, y);
                }
            }
        }
        let (_, x, y) = worst;
        let drop = if row_min(&set, y) < row_min(&set, x) { y } else { x };
        if set.len() == 1 || mass - op.mu[drop] < needed {
            break;
        }
        set.retain(|&v| v != drop);
    }
    let mass: f64 = set.iter().map(|&x| op.mu[x]).sum();
    let (c, d) = if op.p == 2.0 {
        let c = set
            .iter()
            .flat_map(|&x| set.iter().map(move |&y| (x, y)))
            .map(|(x, y)| kt[(x, y)])
            .fold(f64::INFINITY, f64::min);
        (c, lambda / c)
    } else {
        let c = set
            .iter()
            .map(|&x| {
                (0..op.n_target())
                    .map(|z| {
                        let m = set.iter().map(|&y| op.kernel[(z, y)]).fold(f64::INFINITY, f64::min);
                        op.kernel[(z, x)] * op.nu[z] * m.powf(op.p - 1.0)
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        (c, (lambda / c).powf(1.0 / (op.p - 1.0)))
    };
    if !(c > 0.0) {
        return Err(Error::EmptySelection(target_mass));
    }
    Ok(HarnackCertificate {
        set,
        mass,
        c,
        d,
        lambda,
    })
}

/// `D · min_A f - Σ_A f µ`; nonnegative when the certificate holds for `f`.
pub fn harnack_slack(op: &KernelOperator, cert: &HarnackCertificate, f: &[f64]) -> f64 {
    let sum: f64 = cert.set.iter().map(|&x| f[x] * op.mu[x]).sum();
    let min = cert.set.iter().map(|&x| f[x]).fold(f64::INFINITY, f64::min);
    cert.d * min - sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub set: Vec<usize>,
    /// Largest `T*(T 1_A f)^{p-1} - 1_A T*(Tf)^{p-1}`, positive for a violation.
    pub violation: f64,
    pub at: usize,
    pub witness: Vec<f64>,
    pub samples_tried: usize,
}

/// Searches for `f ≥ 0` violating `T*(T 1_A f)^{p-1} ≤ 1_A T*(Tf)^{p-1}`,
/// which must exist for a strictly positive kernel and proper nonempty `A`.
pub fn ergodicity_check(op: &KernelOperator, set: &[usize], n_samples: usize, seed: u64) -> Result<ErgodicityReport> {
    let n = op.n_source();
    let mut inside = vec![false; n];
    for &x in set {
        if x >= n {
            return Err(Error::InvalidArgument(format!("index {x} outside the source space")));
        }
        inside[x] = true;
    }
    let count = inside.iter().filter(|&&b| b).count();
    if count == 0 || count == n {
        return Err(Error::InvalidArgument("A must be a nonempty proper subset".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut candidates = vec![vec![1.0; n]];
    for _ in 0..n_samples {
        candidates.push((0..n).map(|_| rng.random_range(0.0..1.0)).collect());
    }
    for (k, f) in candidates.iter().enumerate() {
        let restricted: Vec<f64> = (0..n).map(|x| if inside[x] { f[x] } else { 0.0 }).collect();
        let lhs = op.super_map(&restricted);
        let full = op.super_map(f);
        let (at, violation) = (0..n)
            .map(|x| (x, lhs[x] - if inside[x] { full[x] } else { 0.0 }))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if violation > 0.0 {
            let mut sorted: Vec<usize> = set.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            return Ok(ErgodicityReport {
                set: sorted,
                violation,
                at,
                witness: f.clone(),
                samples_tried: k + 1,
            });
        }
    }
    Err(Error::NoViolationFound)
}

/// Heat kernel `p_t(z, x)` of a form, as an operator on `L²(µ)` of the free
/// vertices: `T_t f(z) = Σ_x p_t(z, x) f(x) µ(x)`.
pub fn heat_kernel_operator(form: &GraphForm, t: f64) -> Result<KernelOperator> {
    let n = form.n_free();
    let spec = form.spectrum().ok_or(Error::DenseLimit {
        n,
        limit: crate::linalg::DENSE_EIGEN_LIMIT,
    })?;
    let mu = form.free_measure().to_vec();
    // Eigenvectors of M^{-1/2} H M^{-1/2}; φ = M^{-1/2} v is M-orthonormal.
    let mut phi = spec.eigenvectors.clone();
    for i in 0..n {
        phi.row_mut(i).scale_mut(mu[i].sqrt().recip());
    }
    let damp = spec.eigenvalues.map(|l| (-t * l).exp());
    let mut scaled = phi.clone();
    for k in 0..n {
        scaled.column_mut(k).scale_mut(damp[k]);
    }
    let kernel = &scaled * phi.transpose();
    let kernel = (&kernel + kernel.transpose()) * 0.5;
    KernelOperator::new(kernel, mu.clone(), mu, 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessiveResult {
    pub h: VertexFunction,
    /// Normalization set `B` as vertex indices.
    pub reference: Vec<usize>,
    /// Relative sup-norm change between the last two normalized iterates.
    pub change: f64,
    /// Schedule points actually used.
    pub alphas: Vec<f64>,
    pub excessivity: ExcessivityReport,
}

/// `1, 1/2, 1/4, …` down to `1e-12`.
pub fn default_excessive_schedule() -> Vec<f64> {
    crate::resolvent::geometric_schedule(1.0, 1e-12, 0.5)
}

/// Normalization set used when the caller gives none: the weak Harnack set of
/// the heat kernel `T_{1/2}` when the form is small enough for a dense
/// spectrum, else the first free vertex.
pub fn default_reference_set(form: &GraphForm) -> Result<Vec<usize>> {
    let free = form.free_vertices();
    if free.len() > HEAT_KERNEL_LIMIT || free.len() == 1 {
        return Ok(vec![free[0]]);
    }
    let op = heat_kernel_operator(form, HEAT_KERNEL_TIME)?;
    let lambda = lambda_of(&op, 1e-10)?.lambda;
    let cert = harnack_sets(&op, 0.5, lambda)?;
    Ok(cert.set.iter().map(|&k| free[k]).collect())
}

/// Excessive `h = liminf C_α G_α g` as `α ↓ 0`, normalized by `min_B C_α G_α g = 1`.
///
/// The schedule is walked until two consecutive normalized iterates agree to
/// [`TOL_EXC`] relative; `h` is their componentwise minimum, the tail infimum
/// over the stabilized tail.
pub fn construct_excessive(
    form: &GraphForm,
    g: &VertexFunction,
    schedule: Option<&[f64]>,
    reference: Option<&[usize]>,
) -> Result<ExcessiveResult> {
    form.check_domain(g)?;
    let components = form.components();
    if components.len() != 1 {
        return Err(Error::NotIrreducible(components.len()));
    }
    let free = form.free_vertices();
    if free.iter().any(|&i| !(g[i] >= 0.0 && g[i].is_finite())) || free.iter().all(|&i| g[i] == 0.0) {
        return Err(Error::NonPositiveInput("g must be nonnegative and not identically zero".into()));
    }
    let reference = match reference {
        Some(b) => {
            if b.is_empty() {
                return Err(Error::InvalidArgument("reference set B is empty".into()));
            }
            for &i in b {
                if i >= form.n_vertices() || form.is_boundary(i) {
                    return Err(Error::InvalidArgument(format!("reference vertex {i} is not free")));
                }
            }
            b.to_vec()
        }
        None => default_reference_set(form)?,
    };
    let default = default_excessive_schedule();
    let schedule = schedule.unwrap_or(&default);
    if schedule.is_empty() || schedule.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidArgument("schedule must be nonempty and positive".into()));
    }
    let mut previous: Option<VertexFunction> = None;
    let mut change = f64::INFINITY;
    let mut used = Vec::new();
    for &alpha in schedule {
        used.push(alpha);
        let f = resolvent_apply(form, alpha, g)?;
        let min_b = reference.iter().map(|&i| f[i]).fold(f64::INFINITY, f64::min);
        if !(min_b > 0.0) {
            return Err(Error::SolverFailure(format!("G_α g vanishes on B at α = {alpha:e}")));
        }
        let u = f.map(|v| v / min_b);
        if let Some(prev) = &previous {
            let diff = free.iter().map(|&i| (u[i] - prev[i]).abs()).fold(0.0, f64::max);
            change = diff / u.sup_norm().max(f64::MIN_POSITIVE);
            if change < TOL_EXC {
                // The min of two iterates only has Lh >= -αh, so keep going
                // until α is small enough for the excessivity test.
                let h = u.zip_with(prev, f64::min);
                let excessivity = is_excessive(form, &h, None, None)?;
                if !excessivity.excessive {
                    previous = Some(u);
                    continue;
                }
                return Ok(ExcessiveResult {
                    h,
                    reference,
                    change,
                    alphas: used,
                    excessivity,
                });
            }
        }
        previous = Some(u);
    }
    Err(Error::ScheduleTooShort {
        change,
        tolerance: TOL_EXC,
    })
}

/// `max_x (T_t h - h)(x)` over `t_grid`; nonpositive for excessive `h`.
pub fn fatou_defect(form: &GraphForm, h: &VertexFunction, t_grid: &[f64]) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for &t in t_grid {
        let th = semigroup_apply(form, t, h)?;
        for &i in form.free_vertices() {
            worst = worst.max(th[i] - h[i]);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::{build_form, GraphSpec};
    use approx::assert_relative_eq;

    fn ones(n: usize) -> KernelOperator {
        KernelOperator::counting(DMatrix::from_element(n, n, 1.0), 2.0).unwrap()
    }

    #[test]
    fn lambda_small_cases() {
        let r = lambda_of(&ones(1), TOL_LAMBDA).unwrap();
        assert_relative_eq!(r.lambda, 1.0);
        let r = lambda_of(&ones(2), TOL_LAMBDA).unwrap();
        assert_relative_eq!(r.lambda, 4.0, max_relative = 1e-12);
        assert_relative_eq!(r.witness[0], r.witness[1], max_relative = 1e-12);
    }

    #[test]
    fn general_p_witness_is_super_eigen() {
        let k = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.3, 2.0, 0.7, 0.9, 0.4, 1.1]);
        let op = KernelOperator::new(k, vec![0.5, 1.0, 2.0], vec![1.0, 0.3, 0.8], 3.0).unwrap();
        let r = lambda_of(&op, 1e-10).unwrap();
        assert!(check_super_eigen(&op, r.lambda, &r.witness).unwrap() <= 1e-12 * r.lambda);
        assert!(check_super_eigen(&op, 1.1 * r.lambda, &r.witness).unwrap() < 0.0);
        assert!(check_super_eigen(&op, 0.9 * r.lambda, &r.witness).unwrap() > 0.0);
    }

    #[test]
    fn ktilde_and_harnack_on_ones() {
        let op = ones(2);
        assert_eq!(ktilde(&op), DMatrix::from_element(2, 2, 2.0));
        let cert = harnack_sets(&op, 1.0, 4.0).unwrap();
        assert_eq!(cert.set, vec![0, 1]);
        assert_eq!((cert.c, cert.d), (2.0, 2.0));
        let single = KernelOperator::new(DMatrix::from_element(1, 1, 3.0), vec![0.5], vec![1.0], 2.0).unwrap();
        assert_eq!(ktilde(&single)[(0, 0)], 4.5);
        let cert = harnack_sets(&single, 1.0, 2.0).unwrap();
        assert_eq!(cert.d, 2.0 / 4.5);
    }

    #[test]
    fn ergodicity_on_ones() {
        let report = ergodicity_check(&ones(2), &[0], 0, 0).unwrap();
        assert_eq!(report.at, 1);
        assert!(report.violation > 0.0);
        assert!(ergodicity_check(&ones(2), &[0, 1], 5, 0).is_err());
    }

    #[test]
    fn rejects_nonpositive_kernels() {
        let k = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(KernelOperator::counting(k, 2.0).is_err());
        assert!(KernelOperator::counting(DMatrix::from_element(1, 1, 1.0), 1.0).is_err());
    }

    #[test]
    fn excessive_constants_on_critical_path() {
        let form = build_form(&GraphSpec {
            vertices: vec!["a".into(), "b".into(), "c".into()],
            edges: vec![("a".into(), "b".into(), 1.0), ("b".into(), "c".into(), 2.0)],
            ..Default::default()
        })
        .unwrap();
        let r = construct_excessive(&form, &form.constant(1.0), None, Some(&[0])).unwrap();
        for i in 0..3 {
            assert_relative_eq!(r.h[i], 1.0, max_relative = 1e-12);
        }
        let single = build_form(&GraphSpec {
            vertices: vec!["o".into()],
            potential: [("o".to_string(), 1.0)].into(),
            ..Default::default()
        })
        .unwrap();
        let r = construct_excessive(&single, &single.constant(1.0), None, None).unwrap();
        assert_relative_eq!(r.h[0], 1.0, max_relative = 1e-12);
        assert!(r.excessivity.excessive);
    }

    #[test]
    fn excessive_needs_irreducible() {
        let form = build_form(&GraphSpec {
            vertices: vec!["a".into(), "b".into()],
            ..Default::default()
        })
        .unwrap();
        let err = construct_excessive(&form, &form.constant(1.0), None, None).unwrap_err();
        assert_eq!(err, Error::NotIrreducible(2));
    }
}

//! Resolvents, the heat semigroup and the Green operator of a [`GraphForm`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::{GraphForm, VertexFunction, TOL_INEQ};
use crate::linalg::{self, sup_norm};

/// Free-vertex count up to which the semigroup uses a dense eigendecomposition.
pub const SEMIGROUP_DENSE_CUTOFF: usize = 500;
/// Relative sup-norm change that counts as a stabilized Green limit.
pub const TOL_GREEN: f64 = 1e-8;
/// Agreement required before a stabilized limit is replaced by the direct solve.
const DIRECT_AGREEMENT: f64 = 1e-6;
/// Slope of `log‖G_α f‖` against `log α` that signals `1/α` growth.
const DIVERGENCE_SLOPE: f64 = -0.9;
/// Highest polynomial degree used to extrapolate `α ↦ G_α f` to zero.
const EXTRAPOLATION_DEGREE: usize = 3;

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {value}")))
    }
}

/// Solves `(H + αM) u = M f` on the free vertices.
fn resolvent_free(form: &GraphForm, alpha: f64, f_free: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = f_free.iter().zip(form.free_measure()).map(|(v, m)| v * m).collect();
    form.shifted_solver(alpha)?.solve(&rhs)
}

/// `G_α f = (L + α)⁻¹ f`.
pub fn resolvent_apply(form: &GraphForm, alpha: f64, f: &VertexFunction) -> Result<VertexFunction> {
    check_positive("alpha", alpha)?;
    form.check_domain(f)?;
    let u = resolvent_free(form, alpha, &form.restrict(f))?;
    Ok(form.extend(&u))
}

/// `T_t f = e^{-tL} f`.
pub fn semigroup_apply(form: &GraphForm, t: f64, f: &VertexFunction) -> Result<VertexFunction> {
    check_positive("t", t)?;
    form.check_domain(f)?;
    let sqrt_mu: Vec<f64> = form.free_measure().iter().map(|m| m.sqrt()).collect();
    // Work with S = M^{-1/2} H M^{-1/2}, which is symmetric in the plain inner product.
    let x: Vec<f64> = form.restrict(f).iter().zip(&sqrt_mu).map(|(v, s)| v * s).collect();
    let y = if form.n_free() <= SEMIGROUP_DENSE_CUTOFF {
        let spec = form
            .spectrum()
            .ok_or_else(|| Error::SolverFailure("dense spectrum unavailable".into()))?;
        let v = &spec.eigenvectors;
        let coeffs = v.transpose() * nalgebra::DVector::from_column_slice(&x);
        let damped = coeffs.zip_map(&spec.eigenvalues, |c, l| c * (-t * l).exp());
        (v * damped).as_slice().to_vec()
    } else {
        let energy = form.energy_matrix();
        let apply = |z: &[f64]| {
            let scaled: Vec<f64> = z.iter().zip(&sqrt_mu).map(|(a, s)| a / s).collect();
            energy
                .matvec(&scaled)
                .iter()
                .zip(&sqrt_mu)
                .map(|(a, s)| a / s)
                .collect()
        };
        linalg::expm_neg_action(apply, &x, t, form.generator_norm(), 1e-13)?
    };
    let out: Vec<f64> = y.iter().zip(&sqrt_mu).map(|(v, s)| v / s).collect();
    Ok(form.extend(&out))
}

/// Geometric schedule `1, 1/2, 1/4, …` down to `1e-8`.
pub fn default_alpha_schedule() -> Vec<f64> {
    geometric_schedule(1.0, 1e-8, 0.5)
}

/// Geometric sequence from `start` while the terms stay at or above `stop`.
pub fn geometric_schedule(start: f64, stop: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut a = start;
    while a >= stop * (1.0 - 1e-12) {
        out.push(a);
        a *= ratio;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenConfig {
    pub schedule: Vec<f64>,
    /// Absolute threshold on `‖G_α f‖_∞`; defaults to `1e12 · ‖f‖_∞`.
    pub divergence_threshold: Option<f64>,
    pub tol_green: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            schedule: default_alpha_schedule(),
            divergence_threshold: None,
            tol_green: TOL_GREEN,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreenStatus {
    Finite,
    Diverges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenResult {
    pub status: GreenStatus,
    pub value: Option<VertexFunction>,
    /// `(α, ‖G_α f‖_∞)` for every schedule point that was solved.
    pub alpha_trace: Vec<(f64, f64)>,
    /// True when the reported value is the direct solve `H⁻¹Mf`, confirmed by
    /// the extrapolated trace.
    pub direct_solve: bool,
}

/// Polynomial extrapolation to `α = 0` through the given points (Neville).
fn extrapolate_to_zero(alphas: &[f64], values: &[Vec<f64>]) -> Vec<f64> {
    let n = values[0].len();
    let mut table: Vec<Vec<f64>> = values.to_vec();
    let m = alphas.len();
    for level in 1..m {
        for i in 0..m - level {
            let (a0, a1) = (alphas[i], alphas[i + level]);
            let mut next = vec![0.0; n];
            for x in 0..n {
                // P(0) from P_i..(i+level-1) and P_(i+1)..(i+level).
                next[x] = (a0 * table[i + 1][x] - a1 * table[i][x]) / (a0 - a1);
            }
            table[i] = next;
        }
    }
    table.swap_remove(0)
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = sup_norm(a).max(sup_norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Monotone limit `Gf = lim_{α→0+} G_α f` for `f ≥ 0`.
///
/// The trace is extrapolated polynomially in `α`; two consecutive extrapolants
/// within `tol_green` give a finite limit. Crossing the divergence threshold or
/// a `1/α` growth rate at the end of the schedule reports divergence.
pub fn green_apply(form: &GraphForm, f: &VertexFunction, config: &GreenConfig) -> Result<GreenResult> {
    form.check_domain(f)?;
    if form.restrict(f).iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("Green operator input must be nonnegative".into()));
    }
    let schedule = &config.schedule;
    if schedule.is_empty() || schedule.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(Error::InvalidArgument("alpha schedule must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("alpha schedule must be strictly decreasing".into()));
    }
    let f_free = form.restrict(f);
    let fnorm = sup_norm(&f_free);
    let mut trace = Vec::with_capacity(schedule.len());
    if fnorm == 0.0 {
        return Ok(GreenResult {
            status: GreenStatus::Finite,
            value: Some(form.zeros()),
            alpha_trace: trace,
            direct_solve: false,
        });
    }
    let threshold = config.divergence_threshold.unwrap_or(1e12 * fnorm);

    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut previous_extrapolant: Option<Vec<f64>> = None;
    for (k, &alpha) in schedule.iter().enumerate() {
        let u = resolvent_free(form, alpha, &f_free)?;
        let norm = sup_norm(&u);
        trace.push((alpha, norm));
        if norm > threshold {
            return Ok(GreenResult {
                status: GreenStatus::Diverges,
                value: None,
                alpha_trace: trace,
                direct_solve: false,
            });
        }
        values.push(u);
        let lo = (k + 1).saturating_sub(EXTRAPOLATION_DEGREE + 1);
        let extrapolant = extrapolate_to_zero(&schedule[lo..=k], &values[lo..=k]);
        if let Some(prev) = &previous_extrapolant {
            if k >= 2 && relative_change(&extrapolant, prev) < config.tol_green {
                return finish_finite(form, &f_free, extrapolant, trace);
            }
        }
        previous_extrapolant = Some(extrapolant);
    }

    let tail = &trace[trace.len().saturating_sub(4)..];
    if tail.len() >= 3 {
        let x: Vec<f64> = tail.iter().map(|(a, _)| a.ln()).collect();
        let y: Vec<f64> = tail.iter().map(|(_, v)| v.ln()).collect();
        if let Some((slope, _)) = linalg::linear_fit(&x, &y) {
            if slope <= DIVERGENCE_SLOPE {
                return Ok(GreenResult {
                    status: GreenStatus::Diverges,
                    value: None,
                    alpha_trace: trace,
                    direct_solve: false,
                });
            }
        }
    }
    Err(Error::GreenInconclusive { trace })
}

fn finish_finite(
    form: &GraphForm,
    f_free: &[f64],
    extrapolant: Vec<f64>,
    trace: Vec<(f64, f64)>,
) -> Result<GreenResult> {
    let mut direct_solve = false;
    let mut value = extrapolant;
    if let Some(solver) = form.energy_solver()? {
        let rhs: Vec<f64> = f_free.iter().zip(form.free_measure()).map(|(v, m)| v * m).collect();
        let direct = solver.solve(&rhs)?;
        if relative_change(&direct, &value) < DIRECT_AGREEMENT {
            value = direct;
            direct_solve = true;
        }
    }
    Ok(GreenResult {
        status: GreenStatus::Finite,
        value: Some(form.extend(&value)),
        alpha_trace: trace,
        direct_solve,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessivityReport {
    /// Algebraic verdict `Lh ≥ -tol` componentwise.
    pub excessive: bool,
    /// `min_x (Lh)(x)`.
    pub min_generator: f64,
    /// Verdict of the resolvent grid `α(h - αG_α h) ≥ -tol`.
    pub grid_excessive: bool,
    /// Most negative value of `α(h - αG_α h)` over the grid.
    pub grid_min: f64,
    pub tolerance: f64,
    pub alpha_grid: Vec<f64>,
}

/// Grid spanning `1e-3‖L‖ … 1e4‖L‖`, fine enough that the resolvent test sees
/// the generator through `α(h - αG_α h) = αG_α(Lh) → Lh`.
pub fn default_excessivity_grid(form: &GraphForm) -> Vec<f64> {
    let scale = form.generator_norm().max(1e-12);
    (0..15).map(|k| scale * 10f64.powf(-3.0 + 0.5 * k as f64)).collect()
}

/// Excessivity of `h ≥ 0`: exact test `Lh ≥ -tol` plus the resolvent grid
/// cross-check. The tolerance is absolute; `None` picks
/// `1e-10 · max(‖L‖, 1) · ‖h‖_∞`.
pub fn is_excessive(
    form: &GraphForm,
    h: &VertexFunction,
    alpha_grid: Option<&[f64]>,
    tol: Option<f64>,
) -> Result<ExcessivityReport> {
    form.check_domain(h)?;
    let h_free = form.restrict(h);
    if h_free.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::DomainMismatch("excessivity test needs h ≥ 0".into()));
    }
    let hnorm = sup_norm(&h_free);
    let tolerance = tol.unwrap_or(TOL_INEQ * form.ineq_scale() * hnorm);
    let lh = form.restrict(&form.apply_generator(h));
    let min_generator = lh.iter().copied().fold(f64::INFINITY, f64::min);
    let min_generator = if min_generator.is_finite() { min_generator } else { 0.0 };

    let grid = alpha_grid.map(<[f64]>::to_vec).unwrap_or_else(|| default_excessivity_grid(form));
    let mut grid_min = f64::INFINITY;
    for &alpha in &grid {
        let u = resolvent_free(form, alpha, &h_free)?;
        for (hv, uv) in h_free.iter().zip(&u) {
            grid_min = grid_min.min(alpha * (hv - alpha * uv));
        }
    }
    let grid_min = if grid_min.is_finite() { grid_min } else { 0.0 };
    Ok(ExcessivityReport {
        excessive: min_generator >= -tolerance,
        min_generator,
        grid_excessive: grid_min >= -tolerance,
        grid_min,
        tolerance,
        alpha_grid: grid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `q(αG_α f)`.
    pub q_resolvent: f64,
    /// `q(f)`.
    pub q_f: f64,
    /// `α ‖f - αG_α f‖²_µ`.
    pub defect: f64,
    pub holds: bool,
}

/// Checks `q(αG_α f) ≤ q(f)` and `α‖f - αG_α f‖² ≤ q(f)`.
pub fn check_resolvent_contraction(form: &GraphForm, f: &VertexFunction, alpha: f64) -> Result<ContractionReport> {
    let u = resolvent_apply(form, alpha, f)?.map(|v| alpha * v);
    let q_resolvent = form.evaluate(&u)?;
    let q_f = form.evaluate(f)?;
    let diff = f.zip_with(&u, |a, b| a - b);
    let defect = alpha * form.norm_sq(&diff);
    let tol = TOL_INEQ * form.ineq_scale() * form.norm_sq(f).max(1e-300);
    Ok(ContractionReport {
        q_resolvent,
        q_f,
        defect,
        holds: q_resolvent <= q_f + tol && defect <= q_f + tol,
    })
}

/// Residual of the defining identity `q(u, g) + α⟨u, g⟩ - ⟨f, g⟩` for `u = G_α f`.
pub fn resolvent_identity_defect(
    form: &GraphForm,
    alpha: f64,
    f: &VertexFunction,
    u: &VertexFunction,
    g: &VertexFunction,
) -> Result<f64> {
    Ok(form.evaluate_bilinear(u, g)? + alpha * form.inner_product(u, g) - form.inner_product(f, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::{build_form, GraphSpec};
    use approx::assert_relative_eq;

    fn single(c: f64) -> GraphForm {
        let mut s = GraphSpec {
            vertices: vec!["o".into()],
            ..Default::default()
        };
        s.potential.insert("o".into(), c);
        build_form(&s).unwrap()
    }

    fn two_path() -> GraphForm {
        build_form(&GraphSpec {
            vertices: vec!["a".into(), "b".into()],
            edges: vec![("a".into(), "b".into(), 1.0)],
            ..Default::default()
        })
        .unwrap()
    }

    /// Vertices 0..=n, boundary {0}, unit weights.
    pub(crate) fn dirichlet_path(n: usize) -> GraphForm {
        let id = |k: usize| format!("{k:04}");
        build_form(&GraphSpec {
            vertices: (0..=n).map(id).collect(),
            edges: (0..n).map(|k| (id(k), id(k + 1), 1.0)).collect(),
            dirichlet: vec![id(0)],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn scalar_resolvent_and_semigroup() {
        let form = single(1.0);
        let u = resolvent_apply(&form, 1.0, &VertexFunction(vec![1.0])).unwrap();
        assert_relative_eq!(u[0], 0.5, max_relative = 1e-15);
        let t = semigroup_apply(&form, 1.0, &VertexFunction(vec![1.0])).unwrap();
        assert_relative_eq!(t[0], (-1f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn kernel_direction_is_fixed() {
        let form = two_path();
        let one = VertexFunction(vec![1.0, 1.0]);
        let u = resolvent_apply(&form, 1.0, &one).unwrap();
        assert_relative_eq!(u[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(u[1], 1.0, max_relative = 1e-14);
        let t = semigroup_apply(&form, 5.0, &one).unwrap();
        assert_relative_eq!(t[1], 1.0, max_relative = 1e-13);
    }

    #[test]
    fn green_scalar_and_kernel() {
        let g = green_apply(&single(1.0), &VertexFunction(vec![1.0]), &GreenConfig::default()).unwrap();
        assert_eq!(g.status, GreenStatus::Finite);
        assert_relative_eq!(g.value.unwrap()[0], 1.0, max_relative = 1e-12);

        let g = green_apply(&two_path(), &VertexFunction(vec![1.0, 1.0]), &GreenConfig::default()).unwrap();
        assert_eq!(g.status, GreenStatus::Diverges);
        for w in g.alpha_trace.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn green_on_dirichlet_path_is_min() {
        let n = 40;
        let form = dirichlet_path(n);
        let m = 17;
        let mut f = form.zeros();
        f.0[m] = 1.0;
        let g = green_apply(&form, &f, &GreenConfig::default()).unwrap();
        let value = g.value.unwrap();
        for k in 1..=n {
            assert_relative_eq!(value[k], k.min(m) as f64, max_relative = 1e-10);
        }
    }

    #[test]
    fn dense_and_krylov_semigroups_agree() {
        let n = 520;
        let form = dirichlet_path(n);
        let f = form.from_fn(|i| ((i as f64) * 0.1).sin().abs());
        let krylov = semigroup_apply(&form, 2.0, &f).unwrap();
        let spec = form.spectrum().unwrap();
        let x = nalgebra::DVector::from_vec(form.restrict(&f));
        let y = &spec.eigenvectors
            * (spec.eigenvectors.transpose() * x).zip_map(&spec.eigenvalues, |c, l| c * (-2.0 * l).exp());
        for (k, &i) in form.free_vertices().iter().enumerate() {
            assert!((krylov[i] - y[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn excessivity_examples() {
        let form = two_path();
        let report = is_excessive(&form, &VertexFunction(vec![1.0, 1.0]), None, None).unwrap();
        assert!(report.excessive && report.grid_excessive);

        // Strict interior minimum on a zero-potential vertex.
        let path = dirichlet_path(4);
        let h = VertexFunction(vec![0.0, 2.0, 1.0, 2.0, 2.0]);
        let report = is_excessive(&path, &h, None, None).unwrap();
        assert!(!report.excessive && !report.grid_excessive);
        assert_relative_eq!(report.min_generator, -2.0, max_relative = 1e-12);
    }

    #[test]
    fn contraction_on_eigenvector() {
        let form = two_path();
        // (1, -1) has eigenvalue 2.
        let f = VertexFunction(vec![1.0, -1.0]);
        let alpha = 0.7;
        let r = check_resolvent_contraction(&form, &f, alpha).unwrap();
        let expected = 2.0 * alpha * alpha / (2.0 + alpha).powi(2) * 2.0;
        assert_relative_eq!(r.q_resolvent, expected, max_relative = 1e-13);
        assert!(r.holds);
    }

    #[test]
    fn schedule_shape() {
        let s = default_alpha_schedule();
        assert_eq!(s[0], 1.0);
        assert!(*s.last().unwrap() >= 1e-8 && *s.last().unwrap() < 2e-8);
    }
}

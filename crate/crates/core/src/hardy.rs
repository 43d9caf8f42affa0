//! Hardy weights, the abstract and perturbed Hardy inequalities, and the
//! ground state transform.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::{build_form, GraphForm, GraphSpec, VertexFunction, TOL_INEQ};
use crate::linalg::{self, DENSE_EIGEN_LIMIT};
use crate::resolvent::{green_apply, resolvent_apply, GreenConfig, GreenStatus};
use crate::rng;

/// Slack allowed on the Hardy constant 1, both for the pencil eigenvalue and
/// for the sampled ratio.
pub const TOL_EIG: f64 = 1e-8;
const POWER_ITERATIONS: usize = 300;
const DEFAULT_SAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyVerification {
    /// Largest `Σ f² w µ / q_α(f)` over the samples and pencil eigenvectors.
    pub sampled_ratio: f64,
    /// Top eigenvalue of the pencil `(diag(wµ), H + αM)`; infinite when `q_α`
    /// has a kernel not annihilated by `w`.
    pub pencil_lambda: Option<f64>,
    /// True when `pencil_lambda` came from a dense eigensolve rather than
    /// power iteration.
    pub exact: bool,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyWeight {
    pub weight: VertexFunction,
    pub source_g: VertexFunction,
    /// Resolvent parameter of the Green quotient; `0` for the true Green limit.
    pub alpha_used: f64,
    pub verification: HardyVerification,
}

fn check_strictly_positive(form: &GraphForm, f: &VertexFunction, name: &str) -> Result<()> {
    form.check_domain(f)?;
    if let Some(&i) = form
        .free_vertices()
        .iter()
        .find(|&&i| !(f[i] > 0.0 && f[i].is_finite()))
    {
        return Err(Error::NonPositiveInput(format!("{name}({}) = {}", form.id(i), f[i])));
    }
    Ok(())
}

/// `w = g / Gg`, falling back to `g / G_α g` at the last schedule point when
/// the Green limit is inconclusive. The weight is verified before returning.
pub fn hardy_weight(form: &GraphForm, g: &VertexFunction, config: &GreenConfig, seed: u64) -> Result<HardyWeight> {
    check_strictly_positive(form, g, "g")?;
    let (green, alpha_used) = match green_apply(form, g, config) {
        Ok(r) => match r.status {
            GreenStatus::Finite => (r.value.expect("finite results carry a value"), 0.0),
            GreenStatus::Diverges => return Err(Error::GreenDiverges),
        },
        Err(Error::GreenInconclusive { trace }) => {
            let alpha = trace.last().map(|t| t.0).ok_or(Error::GreenDiverges)?;
            (resolvent_apply(form, alpha, g)?, alpha)
        }
        Err(e) => return Err(e),
    };
    if let Some(&i) = form.free_vertices().iter().find(|&&i| !(green[i] > 0.0)) {
        return Err(Error::NonPositiveInput(format!(
            "Green function vanishes at {}",
            form.id(i)
        )));
    }
    let weight = form.from_fn(|i| g[i] / green[i]);
    let verification = verify_hardy_shifted(form, &weight, alpha_used, DEFAULT_SAMPLES, seed)?;
    if !verification.passed {
        let worst = verification.sampled_ratio.max(verification.pencil_lambda.unwrap_or(0.0));
        return Err(Error::ValidationFailure(worst - 1.0));
    }
    Ok(HardyWeight {
        weight,
        source_g: g.clone(),
        alpha_used,
        verification,
    })
}

/// Checks `Σ f² w µ ≤ q(f)` by sampling and, when feasible, by the pencil eigenvalue.
pub fn verify_hardy(form: &GraphForm, w: &VertexFunction, n_samples: usize, seed: u64) -> Result<HardyVerification> {
    verify_hardy_shifted(form, w, 0.0, n_samples, seed)
}

/// Same as [`verify_hardy`] for `q_α = q + α‖·‖²`.
pub fn verify_hardy_shifted(
    form: &GraphForm,
    w: &VertexFunction,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<HardyVerification> {
    form.check_domain(w)?;
    if form.restrict(w).iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::NonPositiveInput("Hardy weight must be nonnegative".into()));
    }
    let wmu: Vec<f64> = form
        .free_vertices()
        .iter()
        .map(|&i| w[i] * form.measure()[i])
        .collect();
    let weighted = |f: &VertexFunction| -> f64 {
        form.free_vertices()
            .iter()
            .zip(&wmu)
            .map(|(&i, m)| f[i] * f[i] * m)
            .sum()
    };
    let shifted_q = |f: &VertexFunction| -> Result<f64> { Ok(form.evaluate(f)? + alpha * form.norm_sq(f)) };
    let ratio = |f: &VertexFunction| -> Result<f64> {
        let num = weighted(f);
        let den = shifted_q(f)?;
        Ok(if den <= 0.0 {
            if num > 0.0 { f64::INFINITY } else { 0.0 }
        } else {
            num / den
        })
    };

    if wmu.iter().all(|&v| v == 0.0) {
        return Ok(HardyVerification {
            sampled_ratio: 0.0,
            pencil_lambda: Some(0.0),
            exact: true,
            samples: 0,
            passed: true,
        });
    }

    let mut candidates: Vec<VertexFunction> = Vec::new();
    let n = form.n_free();
    let positive_definite = alpha > 0.0 || form.energy_solver()?.is_some();
    let (pencil_lambda, exact) = if !positive_definite {
        // A kernel vector of q is strictly positive on its component, so any
        // nonzero weight there makes the quotient unbounded.
        candidates.push(form.constant(1.0));
        if let Some(spec) = form.spectrum() {
            let sqrt_mu: Vec<f64> = form.free_measure().iter().map(|m| m.sqrt()).collect();
            for k in 0..spec.eigenvalues.len() {
                if spec.eigenvalues[k].abs() <= form.tol_psd() * 10.0 {
                    let col = spec.eigenvectors.column(k);
                    let v: Vec<f64> = (0..n).map(|j| col[j] / sqrt_mu[j]).collect();
                    candidates.push(form.extend(&v));
                }
            }
        }
        (Some(f64::INFINITY), true)
    } else if n <= DENSE_EIGEN_LIMIT {
        let a = form.dense_energy() + DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, form.free_measure().iter().map(|m| alpha * m)));
        let wd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(wmu.clone()));
        let (values, vectors) = linalg::pencil_eigen(&wd, &a)
            .ok_or_else(|| Error::SolverFailure("pencil factorization failed".into()))?;
        for k in (0..n).rev().take(5) {
            candidates.push(form.extend(vectors.column(k).as_slice()));
        }
        (values.last().copied(), true)
    } else {
        let (lambda, v) = power_pencil(form, &wmu, alpha)?;
        candidates.push(v);
        (Some(lambda), false)
    };

    let mut sampled_ratio: f64 = 0.0;
    for f in &candidates {
        sampled_ratio = sampled_ratio.max(ratio(f)?);
    }
    let mut rng = rng::seeded(seed);
    for _ in 0..n_samples {
        sampled_ratio = sampled_ratio.max(ratio(&form.random_function(&mut rng))?);
    }
    let limit = 1.0 + TOL_EIG;
    Ok(HardyVerification {
        sampled_ratio,
        pencil_lambda,
        exact,
        samples: n_samples,
        passed: sampled_ratio <= limit && pencil_lambda.is_none_or(|l| l <= limit),
    })
}

/// Power iteration for the top eigenpair of `(H + αM)⁻¹ W`.
fn power_pencil(form: &GraphForm, wmu: &[f64], alpha: f64) -> Result<(f64, VertexFunction)> {
    let solver = if alpha > 0.0 {
        form.shifted_solver(alpha)?
    } else {
        form.energy_solver()?
            .ok_or_else(|| Error::SolverFailure("energy matrix is singular".into()))?
    };
    let energy = form.energy_matrix();
    let n = form.n_free();
    let mut x = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let wx: Vec<f64> = x.iter().zip(wmu).map(|(a, b)| a * b).collect();
        let mut y = solver.solve(&wx)?;
        let scale = linalg::sup_norm(&y);
        if scale == 0.0 {
            return Ok((0.0, form.extend(&y)));
        }
        y.iter_mut().for_each(|v| *v /= scale);
        let num: f64 = y.iter().zip(wmu).map(|(a, b)| a * a * b).sum();
        let mut den = energy.bilinear(&y, &y);
        den += alpha * y.iter().zip(form.free_measure()).map(|(a, m)| a * a * m).sum::<f64>();
        let next = num / den;
        x = y;
        if (next - lambda).abs() <= 1e-13 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Ok((lambda, form.extend(&x)))
}

/// `q(hf) - q(hf², h)`, nonnegative for every `h ≥ 0`.
pub fn abstract_hardy_gap(form: &GraphForm, h: &VertexFunction, f: &VertexFunction) -> Result<f64> {
    form.check_domain(h)?;
    form.check_domain(f)?;
    if form.restrict(h).iter().any(|&v| v < 0.0) {
        return Err(Error::NonPositiveInput("abstract Hardy gap needs h ≥ 0".into()));
    }
    let hf = h.zip_with(f, |a, b| a * b);
    let hf2 = h.zip_with(f, |a, b| a * b * b);
    Ok(form.evaluate(&hf)? - form.evaluate_bilinear(&hf2, h)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedBound {
    /// `q(f) + α‖f‖²_µ`.
    pub lhs: f64,
    /// `Σ f² g / (G_α g) µ`.
    pub rhs: f64,
}

pub fn perturbed_hardy_bound(form: &GraphForm, g: &VertexFunction, alpha: f64, f: &VertexFunction) -> Result<PerturbedBound> {
    check_strictly_positive(form, g, "g")?;
    form.check_domain(f)?;
    let green = resolvent_apply(form, alpha, g)?;
    let lhs = form.evaluate(f)? + alpha * form.norm_sq(f);
    let rhs = form
        .free_vertices()
        .iter()
        .map(|&i| f[i] * f[i] * g[i] / green[i] * form.measure()[i])
        .sum();
    Ok(PerturbedBound { lhs, rhs })
}

/// Form `f ↦ q(hf) + α‖hf‖²_µ`, assembled as a graph form with weights
/// `b h(u) h(v)`, measure `h²µ` and potential `((L + α)h)/h`. Edges into the
/// boundary are absorbed into the potential.
pub fn ground_state_transform(form: &GraphForm, h: &VertexFunction, alpha: f64) -> Result<GraphForm> {
    check_strictly_positive(form, h, "h")?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be nonnegative, got {alpha}")));
    }
    let lh = form.apply_generator(h);
    let ids = form.ids();
    let mu = form.measure();
    let free = |i: usize| !form.is_boundary(i);
    let mut spec = GraphSpec {
        vertices: ids.to_vec(),
        dirichlet: (0..form.n_vertices()).filter(|&i| !free(i)).map(|i| ids[i].clone()).collect(),
        ..Default::default()
    };
    for e in form.edges() {
        if free(e.u) && free(e.v) {
            spec.edges.push((ids[e.u].clone(), ids[e.v].clone(), e.b * h[e.u] * h[e.v]));
        }
    }
    for &i in form.free_vertices() {
        spec.mu.insert(ids[i].clone(), h[i] * h[i] * mu[i]);
        let c = (lh[i] + alpha * h[i]) / h[i];
        if c != 0.0 {
            spec.potential.insert(ids[i].clone(), c);
        }
    }
    for i in (0..form.n_vertices()).filter(|&i| !free(i)) {
        if mu[i] != 1.0 {
            spec.mu.insert(ids[i].clone(), mu[i]);
        }
    }
    let transformed = build_form(&spec)?;

    // The only contract: q̃(f) = q_α(hf) identically.
    let mut rng = rng::seeded(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = form.random_function(&mut rng);
        let hf = h.zip_with(&f, |a, b| a * b);
        let target = form.evaluate(&hf)? + alpha * form.norm_sq(&hf);
        let got = transformed.evaluate(&f)?;
        let scale = absolute_energy(form, &hf, alpha).max(f64::MIN_POSITIVE);
        worst = worst.max((got - target).abs() / scale);
    }
    if worst > 1e-12 {
        return Err(Error::ValidationFailure(worst));
    }
    Ok(transformed)
}

/// Sum of the absolute values of every term of `q_α(f)`; a cancellation-free scale.
fn absolute_energy(form: &GraphForm, f: &VertexFunction, alpha: f64) -> f64 {
    let val = |i: usize| if form.is_boundary(i) { 0.0 } else { f[i].abs() };
    let edges: f64 = form.edges().iter().map(|e| e.b * (val(e.u) + val(e.v)).powi(2)).sum();
    let diag: f64 = form
        .free_vertices()
        .iter()
        .map(|&i| (form.potential()[i].abs() + alpha) * f[i] * f[i] * form.measure()[i])
        .sum();
    edges + diag
}

/// Absolute tolerance for sampled Hardy-type inequalities on `f`.
pub fn inequality_tolerance(form: &GraphForm, f: &VertexFunction) -> f64 {
    TOL_INEQ * absolute_energy(form, f, 0.0).max(form.norm_sq(f))
}

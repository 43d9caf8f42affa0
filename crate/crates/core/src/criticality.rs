//! Capacity along exhaustions, the subcritical/critical classification, Agmon
//! ground states, null sequences and the Green-type subcriticality certificates.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Exhaustion;
use crate::form::{GraphForm, VertexFunction};
use crate::hardy;
use crate::linalg::{self, SpdSolver};
use crate::resolvent::{green_apply, GreenConfig, GreenStatus};
use crate::rng;

/// Capacities below this count as zero.
pub const TOL_CAP: f64 = 1e-6;
/// Relative change over the last three radii that counts as stabilized.
pub const TOL_STABLE: f64 = 1e-4;
/// Resistance-increment exponents at or above this mean unbounded resistance.
pub const EXPONENT_THRESHOLD: f64 = -0.2;
/// Successive ground-state approximants must agree to this on the window.
pub const TOL_GS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub value: f64,
    pub equilibrium: VertexFunction,
}

/// `cap(K) = min { q(f) : f = 1 on K, f = 0 on the boundary }` with its minimizer.
pub fn capacity(form: &GraphForm, source: &[usize]) -> Result<Capacity> {
    if source.is_empty() {
        return Err(Error::InvalidArgument("capacity source set is empty".into()));
    }
    let n = form.n_vertices();
    let mut in_source = vec![false; n];
    for &k in source {
        if k >= n {
            return Err(Error::DomainMismatch(format!("vertex index {k} out of range")));
        }
        if form.is_boundary(k) {
            return Err(Error::InvalidArgument(format!(
                "source vertex {} lies on the Dirichlet boundary",
                form.id(k)
            )));
        }
        in_source[k] = true;
    }
    // Components that never touch the source carry the zero extension.
    let mut reached = vec![false; n];
    for comp in form.components() {
        if comp.iter().any(|&i| in_source[i]) {
            for i in comp {
                reached[i] = true;
            }
        }
    }
    let interior: Vec<usize> = form
        .free_vertices()
        .iter()
        .copied()
        .filter(|&i| reached[i] && !in_source[i])
        .collect();
    let mut equilibrium = form.indicator(source);
    if !interior.is_empty() {
        let positions: Vec<usize> = interior
            .iter()
            .map(|&i| form.free_position(i).expect("interior vertices are free"))
            .collect();
        let system = form.energy_matrix().principal_submatrix(&positions);
        let rhs: Vec<f64> = interior
            .iter()
            .map(|&i| {
                form.neighbors(i)
                    .iter()
                    .filter(|(j, _)| in_source[*j])
                    .map(|(_, b)| b)
                    .sum()
            })
            .collect();
        let u = SpdSolver::new(&system, None, crate::form::TOL_SOLVE)?.solve(&rhs)?;
        for (&i, v) in interior.iter().zip(u) {
            equilibrium.0[i] = v;
        }
    }
    Ok(Capacity {
        value: form.evaluate(&equilibrium)?,
        equilibrium,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrendVerdict {
    Converges { limit: f64 },
    Diverges,
    Unclear,
}

/// Asymptotics of an increasing positive sequence indexed by radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub verdict: TrendVerdict,
    /// Largest relative change of the raw values over the last three radii.
    pub raw_change: Option<f64>,
    /// Fitted exponent σ in `Δv / Δlog R ~ R^σ` over the last half of the radii.
    pub exponent: Option<f64>,
    /// Richardson limits using the fitted exponent, one per consecutive pair.
    pub extrapolated: Vec<f64>,
    pub extrapolated_change: Option<f64>,
}

fn last_three_change(values: &[f64]) -> Option<f64> {
    if values.len() < 3 {
        return None;
    }
    let k = values.len() - 1;
    let last = values[k];
    Some(
        [values[k - 1], values[k - 2]]
            .iter()
            .map(|v| ((last - v) / last).abs())
            .fold(0.0, f64::max),
    )
}

/// Classifies an increasing sequence `v_R` as convergent, divergent or unclear.
///
/// Raw stabilization is tried first. Otherwise the growth exponent of
/// `dv/dlog R` is fitted; an exponent of at least `EXPONENT_THRESHOLD` means
/// logarithmic or faster growth. Below it, the tail `v_∞ - v_R ~ R^σ` is
/// removed by Richardson extrapolation and stabilization is tested again.
pub fn trend(radii: &[f64], values: &[f64]) -> Trend {
    let raw_change = last_three_change(values);
    let mut out = Trend {
        verdict: TrendVerdict::Unclear,
        raw_change,
        exponent: None,
        extrapolated: Vec::new(),
        extrapolated_change: None,
    };
    if let Some(c) = raw_change {
        if c < TOL_STABLE {
            out.verdict = TrendVerdict::Converges {
                limit: *values.last().expect("nonempty"),
            };
            return out;
        }
    }
    if values.len() < 3 {
        return out;
    }
    let increments: Vec<(f64, f64)> = (1..values.len())
        .map(|k| {
            let dlog = (radii[k] / radii[k - 1]).ln();
            ((radii[k] * radii[k - 1]).sqrt(), (values[k] - values[k - 1]) / dlog)
        })
        .collect();
    let half = increments.len().div_ceil(2).max(2).min(increments.len());
    let window = &increments[increments.len() - half..];
    if window.iter().any(|&(_, d)| d <= 0.0) {
        return out;
    }
    let x: Vec<f64> = window.iter().map(|(r, _)| r.ln()).collect();
    let y: Vec<f64> = window.iter().map(|(_, d)| d.ln()).collect();
    let Some((sigma, _)) = linalg::linear_fit(&x, &y) else {
        return out;
    };
    out.exponent = Some(sigma);
    if sigma >= EXPONENT_THRESHOLD {
        out.verdict = TrendVerdict::Diverges;
        return out;
    }
    let p = -sigma;
    out.extrapolated = (1..values.len())
        .map(|k| {
            let (a, b) = (radii[k].powf(p), radii[k - 1].powf(p));
            (a * values[k] - b * values[k - 1]) / (a - b)
        })
        .collect();
    out.extrapolated_change = last_three_change(&out.extrapolated);
    if let Some(c) = out.extrapolated_change {
        if c < TOL_STABLE {
            out.verdict = TrendVerdict::Converges {
                limit: *out.extrapolated.last().expect("nonempty"),
            };
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Subcritical,
    Critical,
    Inconclusive,
}

/// Values of a function on named vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFunction {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl WindowFunction {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|v| v == id).map(|k| self.values[k])
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn from_form(form: &GraphForm, f: &VertexFunction, vertices: &[usize]) -> Self {
        WindowFunction {
            ids: vertices.iter().map(|&i| form.id(i).to_string()).collect(),
            values: vertices.iter().map(|&i| f[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub tol_cap: f64,
    pub max_radius: Option<usize>,
    /// Graph radius of the window on which ground states are reported.
    pub window_radius: usize,
    /// Build and verify a Hardy weight on the largest level for subcritical verdicts.
    pub hardy_weight: bool,
    pub tol_gs: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tol_cap: TOL_CAP,
            max_radius: None,
            window_radius: 10,
            hardy_weight: true,
            tol_gs: TOL_GS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub root: String,
    pub capacity_trace: Vec<(usize, f64)>,
    /// Capacity limit implied by the trend (`0` for divergent resistance).
    pub extrapolated_capacity: Option<f64>,
    pub resistance_trend: Option<Trend>,
    pub ground_state: Option<WindowFunction>,
    pub hardy_weight: Option<WindowFunction>,
    pub notes: Vec<String>,
}

struct Level {
    radius: usize,
    form: GraphForm,
    root: usize,
    capacity: Capacity,
}

fn solve_levels(exhaustion: &Exhaustion, max_radius: Option<usize>) -> Result<Vec<Level>> {
    let radii: Vec<usize> = exhaustion
        .radii
        .iter()
        .copied()
        .filter(|&r| max_radius.is_none_or(|m| r <= m))
        .collect();
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radius within the configured maximum".into()));
    }
    radii
        .par_iter()
        .map(|&radius| {
            let form = exhaustion.level(radius)?;
            let root = form.index_of(&exhaustion.root)?;
            if form.is_boundary(root) {
                return Err(Error::InvalidArgument(format!(
                    "root {} is on the boundary at radius {radius}",
                    exhaustion.root
                )));
            }
            let capacity = capacity(&form, &[root])?;
            Ok(Level {
                radius,
                form,
                root,
                capacity,
            })
        })
        .collect()
}

fn standing_notes(config: &ClassifyConfig) -> Vec<String> {
    vec![
        "the alternative ker q+ = {0, inf} is unreachable: finite and kernel-operator settings always admit strictly positive excessive functions".into(),
        format!(
            "thresholds: tol_cap = {:e}, stabilization {:e} relative over the last 3 radii, resistance exponent threshold {}, subcritical floor {:e}",
            config.tol_cap, TOL_STABLE, EXPONENT_THRESHOLD, 10.0 * config.tol_cap
        ),
        "root recorded as metadata only; the verdict is root-independent for irreducible forms".into(),
    ]
}

/// Subcritical / critical / inconclusive verdict from the capacity of the root.
pub fn classify(exhaustion: &Exhaustion, config: &ClassifyConfig) -> Result<ClassificationReport> {
    let levels = solve_levels(exhaustion, config.max_radius)?;
    classify_levels(exhaustion, &levels, config)
}

fn classify_levels(exhaustion: &Exhaustion, levels: &[Level], config: &ClassifyConfig) -> Result<ClassificationReport> {
    let mut notes = standing_notes(config);
    let capacity_trace: Vec<(usize, f64)> = levels.iter().map(|l| (l.radius, l.capacity.value)).collect();
    for w in capacity_trace.windows(2) {
        if w[1].1 > w[0].1 * (1.0 + 1e-9) + 1e-14 {
            notes.push(format!(
                "capacity increased from radius {} to {}: levels may not be nested",
                w[0].0, w[1].0
            ));
        }
    }
    let last = capacity_trace.last().expect("at least one level").1;
    let mut resistance_trend = None;
    let (verdict, extrapolated_capacity) = if last < config.tol_cap {
        notes.push(format!("capacity {last:e} at the largest radius is below tol_cap"));
        (Verdict::Critical, Some(0.0))
    } else {
        let radii: Vec<f64> = capacity_trace.iter().map(|&(r, _)| r as f64).collect();
        let resistance: Vec<f64> = capacity_trace.iter().map(|&(_, c)| 1.0 / c).collect();
        let t = trend(&radii, &resistance);
        let outcome = match t.verdict {
            TrendVerdict::Converges { limit } => {
                let cap = 1.0 / limit;
                if cap > 10.0 * config.tol_cap {
                    notes.push(format!("capacity stabilizes at {cap:.6e}"));
                    (Verdict::Subcritical, Some(cap))
                } else {
                    notes.push(format!("capacity limit {cap:e} lies between tol_cap and the floor"));
                    (Verdict::Inconclusive, Some(cap))
                }
            }
            TrendVerdict::Diverges => {
                notes.push(format!(
                    "resistance 1/cap grows with exponent {:.3} per log-radius increment; capacity limit 0",
                    t.exponent.unwrap_or(f64::NAN)
                ));
                (Verdict::Critical, Some(0.0))
            }
            TrendVerdict::Unclear => {
                notes.push("capacity trace neither stabilized nor decayed; add radii".into());
                (Verdict::Inconclusive, None)
            }
        };
        resistance_trend = Some(t);
        outcome
    };

    let mut report = ClassificationReport {
        verdict,
        root: exhaustion.root.clone(),
        capacity_trace,
        extrapolated_capacity,
        resistance_trend,
        ground_state: None,
        hardy_weight: None,
        notes,
    };
    match verdict {
        Verdict::Critical => match ground_state_from_levels(levels, config.window_radius, config.tol_gs) {
            Ok(gs) => {
                report.notes.push(format!(
                    "ground state on window radius {}: change {:.2e}, residual |Lh| {:.2e}",
                    config.window_radius, gs.change, gs.residual
                ));
                report.ground_state = Some(gs.window);
            }
            Err(e) => report.notes.push(format!("ground state not attached: {e}")),
        },
        Verdict::Subcritical if config.hardy_weight => {
            let level = levels.last().expect("at least one level");
            let g = level.form.constant(1.0);
            match hardy::hardy_weight(&level.form, &g, &GreenConfig::default(), 0) {
                Ok(w) => {
                    report.notes.push(format!(
                        "Hardy weight g/Gg with g = 1 on radius {} verified: sampled ratio {:.12}",
                        level.radius, w.verification.sampled_ratio
                    ));
                    report.hardy_weight =
                        Some(WindowFunction::from_form(&level.form, &w.weight, level.form.free_vertices()));
                }
                Err(e) => report.notes.push(format!("Hardy weight not attached: {e}")),
            }
        }
        _ => {}
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateConfig {
    pub window_radius: usize,
    pub tol_gs: f64,
    pub classify: ClassifyConfig,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        GroundStateConfig {
            window_radius: 10,
            tol_gs: TOL_GS,
            classify: ClassifyConfig {
                hardy_weight: false,
                ..ClassifyConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub root: String,
    pub window: WindowFunction,
    /// Sup-norm change between the last two approximants on the window.
    pub change: f64,
    /// `max |Lh|` over the window, evaluated on the largest level.
    pub residual: f64,
    pub radii_used: Vec<usize>,
}

/// Value of the equilibrium potential of `level` at vertex `id` (zero outside).
fn potential_at(level: &Level, lookup: &HashMap<&str, usize>, id: &str) -> f64 {
    lookup.get(id).map_or(0.0, |&i| level.capacity.equilibrium[i])
}

/// Extrapolates `φ_R` linearly in `cap_R` to `cap = 0` using two levels.
fn extrapolant(coarse: &Level, fine: &Level, ids: &[String]) -> Vec<f64> {
    let coarse_lookup: HashMap<&str, usize> = coarse.form.ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let fine_lookup: HashMap<&str, usize> = fine.form.ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let (c0, c1) = (coarse.capacity.value, fine.capacity.value);
    ids.iter()
        .map(|id| {
            let p0 = potential_at(coarse, &coarse_lookup, id);
            let p1 = potential_at(fine, &fine_lookup, id);
            if (c0 - c1).abs() <= 1e-15 * c0.max(c1) || c0 == c1 {
                p1
            } else {
                p1 - c1 * (p1 - p0) / (c1 - c0)
            }
        })
        .collect()
}

fn ground_state_from_levels(levels: &[Level], window_radius: usize, tol_gs: f64) -> Result<GroundState> {
    let k = levels.len();
    let used = &levels[k.saturating_sub(3)..];
    let smallest = &used[0];
    let dist = smallest.form.graph_distances(smallest.root);
    let window: Vec<usize> = (0..smallest.form.n_vertices())
        .filter(|&i| !smallest.form.is_boundary(i) && dist[i].is_some_and(|d| d <= window_radius))
        .collect();
    let ids: Vec<String> = window.iter().map(|&i| smallest.form.id(i).to_string()).collect();

    let (latest, change) = match used.len() {
        1 => (
            window.iter().map(|&i| smallest.capacity.equilibrium[i]).collect::<Vec<_>>(),
            0.0,
        ),
        2 => {
            let e = extrapolant(&used[0], &used[1], &ids);
            let lookup: HashMap<&str, usize> = used[1].form.ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            let raw: Vec<f64> = ids.iter().map(|id| potential_at(&used[1], &lookup, id)).collect();
            let change = e.iter().zip(&raw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (e, change)
        }
        _ => {
            let e1 = extrapolant(&used[0], &used[1], &ids);
            let e2 = extrapolant(&used[1], &used[2], &ids);
            let change = e1.iter().zip(&e2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (e2, change)
        }
    };

    // Residual of the latest approximant on the largest level's generator.
    let top = used.last().expect("nonempty");
    let full_ids: Vec<String> = top.form.ids().to_vec();
    let full = if used.len() >= 2 {
        extrapolant(&used[used.len() - 2], top, &full_ids)
    } else {
        top.capacity.equilibrium.0.clone()
    };
    let h = top.form.from_fn(|i| full[i]);
    let lh = top.form.apply_generator(&h);
    let residual = ids
        .iter()
        .map(|id| top.form.index_of(id).map(|i| lh[i].abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    if change > tol_gs {
        return Err(Error::NoConvergence {
            change,
            tolerance: tol_gs,
        });
    }
    let window_fn = WindowFunction { ids, values: latest };
    if window_fn.min() <= 0.0 {
        return Err(Error::NoConvergence {
            change: window_fn.min(),
            tolerance: tol_gs,
        });
    }
    Ok(GroundState {
        root: smallest.form.id(smallest.root).to_string(),
        window: window_fn,
        change,
        residual,
        radii_used: used.iter().map(|l| l.radius).collect(),
    })
}

/// Agmon ground state on the window around the root, normalized `h(o) = 1`.
pub fn agmon_ground_state(exhaustion: &Exhaustion, config: &GroundStateConfig) -> Result<GroundState> {
    let levels = solve_levels(exhaustion, config.classify.max_radius)?;
    let mut classify_config = config.classify.clone();
    classify_config.hardy_weight = false;
    let report = classify_levels(exhaustion, &levels, &classify_config)?;
    if report.verdict != Verdict::Critical {
        return Err(Error::NotCritical);
    }
    ground_state_from_levels(&levels, config.window_radius, config.tol_gs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullTerm {
    pub radius: usize,
    pub energy: f64,
    pub phi: WindowFunction,
}

/// Equilibrium potentials `φ_R` with `q(φ_R) = cap_R → 0` for the first `n_terms` radii.
pub fn null_sequence(exhaustion: &Exhaustion, n_terms: usize) -> Result<Vec<NullTerm>> {
    let config = ClassifyConfig {
        hardy_weight: false,
        ..ClassifyConfig::default()
    };
    let levels = solve_levels(exhaustion, None)?;
    if classify_levels(exhaustion, &levels, &config)?.verdict != Verdict::Critical {
        return Err(Error::NotCritical);
    }
    Ok(levels
        .iter()
        .take(n_terms)
        .map(|l| NullTerm {
            radius: l.radius,
            energy: l.capacity.value,
            phi: WindowFunction::from_form(&l.form, &l.capacity.equilibrium, &(0..l.form.n_vertices()).collect::<Vec<_>>()),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateLevel {
    pub radius: usize,
    /// `finite`, `diverges` or `inconclusive`.
    pub green: String,
    pub green_sup: Option<f64>,
    /// `κ² = ⟨g, Gg⟩_µ`, the square of the best constant in `Σ|f|gµ ≤ κ q(f)^{1/2}`.
    pub kappa_sq: Option<f64>,
    /// Largest sampled `Σ|f|gµ / q(f)^{1/2}`.
    pub kappa_sampled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateBundle {
    pub levels: Vec<CertificateLevel>,
    pub green_trend: Option<Trend>,
    pub kappa_trend: Option<Trend>,
    /// `Some(true)` for subcritical, `Some(false)` for critical, `None` undecided.
    pub green_finite: Option<bool>,
    pub kappa_finite: Option<bool>,
    pub capacity_verdict: Verdict,
    pub consistent: bool,
}

fn trend_decision(t: &Trend) -> Option<bool> {
    match t.verdict {
        TrendVerdict::Converges { .. } => Some(true),
        TrendVerdict::Diverges => Some(false),
        TrendVerdict::Unclear => None,
    }
}

/// Green existence, the `L¹(g)`-embedding constant and the capacity verdict,
/// cross-checked against each other.
pub fn subcriticality_certificates(
    exhaustion: &Exhaustion,
    g: &(dyn Fn(&str) -> f64 + Sync),
    n_samples: usize,
    seed: u64,
) -> Result<CertificateBundle> {
    let levels = solve_levels(exhaustion, None)?;
    let report = classify_levels(
        exhaustion,
        &levels,
        &ClassifyConfig {
            hardy_weight: false,
            ..ClassifyConfig::default()
        },
    )?;
    let rows: Vec<CertificateLevel> = levels
        .par_iter()
        .enumerate()
        .map(|(k, level)| certificate_level(level, g, n_samples, rng::derived(seed, k as u64)))
        .collect::<Result<_>>()?;

    let any_diverges = rows.iter().any(|r| r.green == "diverges");
    let radii: Vec<f64> = rows.iter().map(|r| r.radius as f64).collect();
    let series = |pick: fn(&CertificateLevel) -> Option<f64>| -> Option<Vec<f64>> { rows.iter().map(pick).collect() };
    let green_trend = series(|r| r.green_sup).map(|v| trend(&radii, &v));
    let kappa_trend = series(|r| r.kappa_sq).map(|v| trend(&radii, &v));
    let green_finite = if any_diverges { Some(false) } else { green_trend.as_ref().and_then(trend_decision) };
    let kappa_finite = if any_diverges { Some(false) } else { kappa_trend.as_ref().and_then(trend_decision) };
    let capacity_decision = match report.verdict {
        Verdict::Subcritical => Some(true),
        Verdict::Critical => Some(false),
        Verdict::Inconclusive => None,
    };
    let decided: Vec<bool> = [green_finite, kappa_finite, capacity_decision].into_iter().flatten().collect();
    let consistent = decided.windows(2).all(|w| w[0] == w[1]);
    if !consistent {
        return Err(Error::InconsistentCertificates(format!(
            "green {green_finite:?}, kappa {kappa_finite:?}, capacity {:?}",
            report.verdict
        )));
    }
    Ok(CertificateBundle {
        levels: rows,
        green_trend,
        kappa_trend,
        green_finite,
        kappa_finite,
        capacity_verdict: report.verdict,
        consistent,
    })
}

fn certificate_level(
    level: &Level,
    g: &(dyn Fn(&str) -> f64 + Sync),
    n_samples: usize,
    mut rng: rand_chacha::ChaCha8Rng,
) -> Result<CertificateLevel> {
    let form = &level.form;
    let gf = form.from_fn(|i| g(form.id(i)));
    if gf.values().iter().any(|&v| v < 0.0) || gf.sup_norm() == 0.0 {
        return Err(Error::NonPositiveInput("certificate weight g must be nonnegative and nonzero".into()));
    }
    let ratio = |f: &VertexFunction| -> Result<f64> {
        let num: f64 = form.inner_product(&f.map(f64::abs), &gf);
        let q = form.evaluate(f)?;
        Ok(if q <= 0.0 {
            if num > 0.0 { f64::INFINITY } else { 0.0 }
        } else {
            num / q.sqrt()
        })
    };
    let mut kappa_sampled = ratio(&form.constant(1.0))?;
    for _ in 0..n_samples {
        kappa_sampled = kappa_sampled.max(ratio(&form.random_function(&mut rng))?);
    }
    let (green, green_sup, kappa_sq) = match green_apply(form, &gf, &GreenConfig::default()) {
        Ok(r) if r.status == GreenStatus::Finite => {
            let value = r.value.expect("finite results carry a value");
            kappa_sampled = kappa_sampled.max(ratio(&value)?);
            ("finite", Some(value.sup_norm()), Some(form.inner_product(&gf, &value)))
        }
        Ok(_) => ("diverges", None, None),
        Err(Error::GreenInconclusive { .. }) => ("inconclusive", None, None),
        Err(e) => return Err(e),
    };
    Ok(CertificateLevel {
        radius: level.radius,
        green: green.into(),
        green_sup,
        kappa_sq,
        kappa_sampled,
    })
}

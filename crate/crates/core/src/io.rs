//! File formats, built-in families, tolerance overrides and the job runner
//! behind the command-line front end.
//!
//! Graph documents are JSON:
//!
//! ```json
//! {"vertices": ["a", "b"], "edges": [["a", "b", 1.0]],
//!  "mu": {"a": 2.0}, "potential": {"b": 0.5}, "dirichlet": []}
//! ```
//!
//! Kernel operators are dense comma-separated matrices, one target point per
//! row, with optional sidecar files holding `ν` (one value per row) and `µ`
//! (one value per column).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::criticality::{self, ClassifyConfig, GroundStateConfig, Verdict};
use crate::error::{Error, Result};
use crate::families::{self, Exhaustion};
use crate::form::{self, build_form, GraphForm, GraphSpec, VertexFunction};
use crate::hardy;
use crate::kernel::{self, KernelOperator};
use crate::resolvent::{self, GreenConfig};
use crate::weak::{self, AlphaProfile, Budget, Mode};

pub const REPORT_SCHEMA: &str = "critform.report/1";
pub const TOOL: &str = "critform";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Prefix of tolerance overrides in the environment.
pub const ENV_TOL_PREFIX: &str = "CRITFORM_TOL_";
pub const ENV_THREADS: &str = "CRITFORM_THREADS";
/// Tolerance keys accepted by `--tol key=value` and `CRITFORM_TOL_<KEY>`.
pub const TOLERANCE_KEYS: [&str; 5] = ["cap", "excessivity", "green", "gs", "lambda"];

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn parse_graph_str(text: &str) -> Result<GraphForm> {
    let spec: GraphSpec = serde_json::from_str(text).map_err(parse_error)?;
    build_form(&spec).map_err(|e| Error::Validation(Box::new(e)))
}

pub fn parse_graph_file(path: &Path) -> Result<GraphForm> {
    parse_graph_str(&std::fs::read_to_string(path)?)
}

/// Description with vertices in lexicographic order and each edge listed
/// once, endpoints ordered, edges sorted.
pub fn canonical_spec(form: &GraphForm) -> GraphSpec {
    let mut spec = form.to_spec();
    spec.vertices.sort();
    for e in spec.edges.iter_mut() {
        if e.1 < e.0 {
            std::mem::swap(&mut e.0, &mut e.1);
        }
    }
    spec.edges.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    spec.dirichlet.sort();
    spec
}

/// Canonical pretty-printed JSON; parsing and re-emitting is the identity.
pub fn emit_canonical(form: &GraphForm) -> String {
    let mut out = serde_json::to_string_pretty(&canonical_spec(form)).expect("graph specs serialize");
    out.push('\n');
    out
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, record) in csv_reader(text).records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            column: 1,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("not a number: {field:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Dense matrix, one comma-separated row per line; `#` starts a comment.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows = csv_rows(text)?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "empty matrix".into(),
        });
    }
    if let Some(k) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Parse {
            line: k + 1,
            column: 1,
            message: format!("row has {} entries, expected {cols}", rows[k].len()),
        });
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Numbers separated by commas or newlines.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    Ok(csv_rows(text)?.into_iter().flatten().collect())
}

pub fn load_kernel(matrix: &Path, nu: Option<&Path>, mu: Option<&Path>, p: f64) -> Result<KernelOperator> {
    let k = parse_matrix_csv(&std::fs::read_to_string(matrix)?)?;
    let read = |path: Option<&Path>, n: usize| -> Result<Vec<f64>> {
        match path {
            Some(path) => parse_vector(&std::fs::read_to_string(path)?),
            None => Ok(vec![1.0; n]),
        }
    };
    let nu = read(nu, k.nrows())?;
    let mu = read(mu, k.ncols())?;
    KernelOperator::new(k, nu, mu, p)
}

fn param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    params
        .get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::BadParams(format!("cannot parse {key}={v}")))
        })
        .transpose()
}

fn radii_param(params: &BTreeMap<String, String>, defaults: Vec<usize>) -> Result<Vec<usize>> {
    if let Some(list) = params.get("radii") {
        return list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::BadParams(format!("cannot parse radius {v}")))
            })
            .collect();
    }
    match param::<usize>(params, "radius")? {
        None => Ok(defaults),
        Some(r) => {
            let mut radii: Vec<usize> = defaults.into_iter().filter(|&d| d < r).collect();
            radii.push(r);
            Ok(radii)
        }
    }
}

fn reject_unknown(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::BadParams(format!("unknown parameter {k}"))),
        None => Ok(()),
    }
}

/// `lattice` (`d`, `radius` or `radii`), `birth_death` (`beta`, `radius` or
/// `radii`) and `dirichlet_path` (`n`).
pub fn builtin_family(name: &str, params: &BTreeMap<String, String>) -> Result<Exhaustion> {
    match name {
        "lattice" => {
            reject_unknown(params, &["d", "radius", "radii"])?;
            let d = param::<usize>(params, "d")?.ok_or_else(|| Error::BadParams("lattice needs d".into()))?;
            if !(1..=3).contains(&d) {
                return Err(Error::BadParams(format!("lattice dimension must be 1, 2 or 3, got {d}")));
            }
            families::lattice(d, Some(radii_param(params, families::default_lattice_radii(d))?))
        }
        "birth_death" => {
            reject_unknown(params, &["beta", "radius", "radii"])?;
            let beta =
                param::<f64>(params, "beta")?.ok_or_else(|| Error::BadParams("birth_death needs beta".into()))?;
            families::birth_death(beta, Some(radii_param(params, families::default_birth_death_radii())?))
        }
        "dirichlet_path" => {
            reject_unknown(params, &["n"])?;
            let n = param::<usize>(params, "n")?.ok_or_else(|| Error::BadParams("dirichlet_path needs n".into()))?;
            families::dirichlet_path(n)
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

/// Effective tolerance overrides; the command line wins over the environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub cap: Option<f64>,
    pub excessivity: Option<f64>,
    pub green: Option<f64>,
    pub gs: Option<f64>,
    pub lambda: Option<f64>,
}

impl Tolerances {
    pub fn resolve(env: &BTreeMap<String, String>, cli: &BTreeMap<String, f64>) -> Result<Self> {
        let mut merged: BTreeMap<String, f64> = BTreeMap::new();
        for (key, value) in env {
            if let Some(k) = key.strip_prefix(ENV_TOL_PREFIX) {
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}={value} is not a number")))?;
                merged.insert(k.to_ascii_lowercase(), v);
            }
        }
        merged.extend(cli.iter().map(|(k, v)| (k.clone(), *v)));
        let mut out = Tolerances::default();
        for (key, value) in merged {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("tolerance {key} must be positive, got {value}")));
            }
            let slot = match key.as_str() {
                "cap" => &mut out.cap,
                "excessivity" => &mut out.excessivity,
                "green" => &mut out.green,
                "gs" => &mut out.gs,
                "lambda" => &mut out.lambda,
                _ => {
                    return Err(Error::Config(format!(
                        "unknown tolerance key {key}; expected one of {}",
                        TOLERANCE_KEYS.join(", ")
                    )))
                }
            };
            *slot = Some(value);
        }
        Ok(out)
    }
}

/// `CRITFORM_*` variables from an environment listing.
pub fn collect_env<I: IntoIterator<Item = (String, String)>>(vars: I) -> BTreeMap<String, String> {
    vars.into_iter().filter(|(k, _)| k.starts_with("CRITFORM_")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Green,
    HardyWeight,
    GroundState,
    AlphaProfile,
    Decay,
    VerifyDecay,
    Excessive,
    Harnack,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Green => "green",
            Command::HardyWeight => "hardy-weight",
            Command::GroundState => "ground-state",
            Command::AlphaProfile => "alpha-profile",
            Command::Decay => "decay",
            Command::VerifyDecay => "verify-decay",
            Command::Excessive => "excessive",
            Command::Harnack => "harnack",
            Command::Check => "check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Input {
    Graph {
        path: PathBuf,
    },
    Family {
        name: String,
        params: BTreeMap<String, String>,
    },
    Kernel {
        matrix: PathBuf,
        nu: Option<PathBuf>,
        mu: Option<PathBuf>,
        p: f64,
    },
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Comparison function for the weak-inequality commands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HChoice {
    /// `h = 1`, excessive whenever the potential is nonnegative.
    #[default]
    One,
    /// `h = G_1 1`.
    Resolvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub root: Option<String>,
    /// Source vertex for `g = δ_source`; `g = 1` when absent.
    pub source: Option<String>,
    pub max_radius: Option<usize>,
    pub window_radius: usize,
    pub mode: Mode,
    pub h: HChoice,
    pub r_grid: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub samples: usize,
    pub starts: usize,
    pub iterations: usize,
    /// Earlier `alpha-profile` report or CSV table for `decay`.
    pub profile: Option<PathBuf>,
    /// Earlier `decay` report for `verify-decay`.
    pub decay: Option<PathBuf>,
    pub target_mass: f64,
    pub reference: Option<Vec<String>>,
}

impl Default for Options {
    fn default() -> Self {
        let budget = Budget::default();
        Options {
            root: None,
            source: None,
            max_radius: None,
            window_radius: 10,
            mode: Mode::Hardy,
            h: HChoice::One,
            r_grid: None,
            t_grid: None,
            samples: 200,
            starts: budget.starts,
            iterations: budget.iterations,
            profile: None,
            decay: None,
            target_mass: 0.5,
            reference: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    pub command: Command,
    pub input: Input,
    pub seed: Option<u64>,
    /// `--tol key=value` overrides.
    pub tolerances: BTreeMap<String, f64>,
    /// `CRITFORM_*` environment variables in effect.
    pub env: BTreeMap<String, String>,
    pub format: Format,
    /// Record wall time in the provenance block (breaks byte stability).
    pub timing: bool,
    pub options: Options,
}

impl JobConfig {
    pub fn new(command: Command, input: Input) -> Self {
        JobConfig {
            command,
            input,
            seed: None,
            tolerances: BTreeMap::new(),
            env: BTreeMap::new(),
            format: Format::Json,
            timing: false,
            options: Options::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub overrides: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: Command,
    pub config: Value,
    pub result: Value,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Numeric table with a one-line header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Comma-separated, dot decimals, shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub struct Outcome {
    pub report: Report,
    /// `0` on success, `2` for inconclusive verdicts.
    pub exit_code: i32,
    pub table: Option<Table>,
}

/// Exit status for a failed job.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::GreenInconclusive { .. } => 2,
        _ => 1,
    }
}

/// Machine-readable error object.
pub fn error_object(error: &Error) -> Value {
    json!({ "error": { "code": error.code(), "message": error.to_string() } })
}

fn needs_seed(job: &JobConfig) -> bool {
    match job.command {
        Command::HardyWeight | Command::AlphaProfile | Command::VerifyDecay | Command::Check => true,
        Command::Decay => job.options.profile.is_none(),
        _ => false,
    }
}

fn seed(job: &JobConfig) -> Result<u64> {
    job.seed
        .ok_or_else(|| Error::Config(format!("{} is randomized and needs --seed", job.command.name())))
}

fn named(form: &GraphForm, f: &VertexFunction) -> BTreeMap<String, f64> {
    form.free_vertices().iter().map(|&i| (form.id(i).to_string(), f[i])).collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn exhaustion_of(job: &JobConfig) -> Result<Exhaustion> {
    let ex = match &job.input {
        Input::Family { name, params } => builtin_family(name, params)?,
        Input::Graph { path } => {
            let form = parse_graph_file(path)?;
            let root = match &job.options.root {
                Some(r) => r.clone(),
                None => form
                    .free_vertices()
                    .first()
                    .map(|&i| form.id(i).to_string())
                    .ok_or(Error::EmptyGraph)?,
            };
            families::constant(form, &root, &path.display().to_string())?
        }
        _ => return Err(Error::Config(format!("{} needs --graph or --family", job.command.name()))),
    };
    match job.options.max_radius {
        Some(r) => ex.truncated(r),
        None => Ok(ex),
    }
}

fn form_of(job: &JobConfig) -> Result<GraphForm> {
    match &job.input {
        Input::Graph { path } => parse_graph_file(path),
        Input::Family { .. } => {
            let ex = exhaustion_of(job)?;
            ex.level(*ex.radii.last().expect("exhaustions are nonempty"))
        }
        _ => Err(Error::Config(format!("{} needs --graph or --family", job.command.name()))),
    }
}

fn source_function(form: &GraphForm, source: &Option<String>) -> Result<VertexFunction> {
    match source {
        Some(id) => {
            let i = form.index_of(id)?;
            Ok(form.indicator(&[i]))
        }
        None => Ok(form.constant(1.0)),
    }
}

fn comparison_function(form: &GraphForm, choice: HChoice) -> Result<VertexFunction> {
    match choice {
        HChoice::One => Ok(form.constant(1.0)),
        HChoice::Resolvent => resolvent::resolvent_apply(form, 1.0, &form.constant(1.0)),
    }
}

fn default_r_grid() -> Vec<f64> {
    weak::log_grid(1e-12, 1e2, 29)
}

fn default_t_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

fn profile_of(job: &JobConfig, form: &GraphForm, seed: u64) -> Result<AlphaProfile> {
    let o = &job.options;
    let w = form.constant(1.0);
    let h = comparison_function(form, o.h)?;
    let grid = o.r_grid.clone().unwrap_or_else(default_r_grid);
    let budget = Budget {
        starts: o.starts,
        iterations: o.iterations,
    };
    weak::alpha_profile(form, &w, &h, &grid, o.mode, budget, seed)
}

fn read_report(path: &Path) -> Result<Report> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(parse_error)
}

/// `(r, alpha_cert)` from an `alpha-profile` report or its CSV table.
fn load_profile_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let report = read_report(path)?;
        let profile: AlphaProfile =
            serde_json::from_value(report.result["profile"].clone()).map_err(parse_error)?;
        return Ok((profile.r_grid, profile.alpha_cert));
    }
    let body = text.lines().skip(1).collect::<Vec<_>>().join("\n");
    let rows = csv_rows(&body)?;
    Ok((rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect()))
}

fn classify_config(job: &JobConfig, tol: &Tolerances) -> ClassifyConfig {
    let mut cfg = ClassifyConfig {
        max_radius: job.options.max_radius,
        window_radius: job.options.window_radius,
        ..ClassifyConfig::default()
    };
    if let Some(v) = tol.cap {
        cfg.tol_cap = v;
    }
    if let Some(v) = tol.gs {
        cfg.tol_gs = v;
    }
    cfg
}

fn green_config(tol: &Tolerances) -> GreenConfig {
    let mut cfg = GreenConfig::default();
    if let Some(v) = tol.green {
        cfg.tol_green = v;
    }
    cfg
}

/// Runs one job. The report is byte-stable for fixed inputs, seed and
/// version unless timing is requested.
pub fn run(job: &JobConfig) -> Result<Outcome> {
    let start = Instant::now();
    let tol = Tolerances::resolve(&job.env, &job.tolerances)?;
    if let Some(threads) = job.env.get(ENV_THREADS) {
        threads
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{ENV_THREADS}={threads} is not a thread count")))?;
    }
    if needs_seed(job) {
        seed(job)?;
    }
    let mut exit_code = 0;
    let mut table = None;
    let o = &job.options;
    let result = match job.command {
        Command::Classify => {
            let ex = exhaustion_of(job)?;
            let report = criticality::classify(&ex, &classify_config(job, &tol))?;
            if report.verdict == Verdict::Inconclusive {
                exit_code = 2;
            }
            table = Some(Table {
                header: vec!["radius", "capacity"],
                rows: report.capacity_trace.iter().map(|&(r, c)| vec![r as f64, c]).collect(),
            });
            json!({ "family": ex.name, "classification": to_value(&report) })
        }
        Command::Green => {
            let form = form_of(job)?;
            let g = source_function(&form, &o.source)?;
            let r = resolvent::green_apply(&form, &g, &green_config(&tol))?;
            json!({
                "status": to_value(&r.status),
                "value": r.value.as_ref().map(|v| named(&form, v)),
                "alpha_trace": r.alpha_trace,
                "direct_solve": r.direct_solve,
            })
        }
        Command::HardyWeight => {
            let form = form_of(job)?;
            let g = source_function(&form, &o.source)?;
            let hw = hardy::hardy_weight(&form, &g, &green_config(&tol), seed(job)?)?;
            json!({
                "weight": named(&form, &hw.weight),
                "alpha_used": hw.alpha_used,
                "verification": to_value(&hw.verification),
            })
        }
        Command::GroundState => {
            let ex = exhaustion_of(job)?;
            let cfg = GroundStateConfig {
                window_radius: o.window_radius,
                tol_gs: tol.gs.unwrap_or(criticality::TOL_GS),
                classify: ClassifyConfig {
                    hardy_weight: false,
                    ..classify_config(job, &tol)
                },
            };
            to_value(&criticality::agmon_ground_state(&ex, &cfg)?)
        }
        Command::AlphaProfile => {
            let form = form_of(job)?;
            let profile = profile_of(job, &form, seed(job)?)?;
            table = Some(Table {
                header: vec!["r", "alpha_cert", "alpha_lb"],
                rows: (0..profile.r_grid.len())
                    .map(|k| vec![profile.r_grid[k], profile.alpha_cert[k], profile.alpha_lb[k]])
                    .collect(),
            });
            json!({ "profile": to_value(&profile) })
        }
        Command::Decay => {
            let t_grid = o.t_grid.clone().unwrap_or_else(default_t_grid);
            let (r_grid, alpha) = match &o.profile {
                Some(path) => load_profile_table(path)?,
                None => {
                    let form = form_of(job)?;
                    let p = profile_of(job, &form, seed(job)?)?;
                    (p.r_grid, p.alpha_cert)
                }
            };
            let decay = weak::decay_rate_from(&r_grid, &alpha, &t_grid)?;
            table = Some(Table {
                header: vec!["t", "xi"],
                rows: decay.t.iter().zip(&decay.xi).map(|(&t, &x)| vec![t, x]).collect(),
            });
            json!({ "decay": to_value(&decay), "r_grid": r_grid, "alpha_cert": alpha })
        }
        Command::VerifyDecay => {
            let form = form_of(job)?;
            let s = seed(job)?;
            let decay = match &o.decay {
                Some(path) => {
                    let report = read_report(path)?;
                    serde_json::from_value(report.result["decay"].clone()).map_err(parse_error)?
                }
                None => {
                    let p = profile_of(job, &form, s)?;
                    weak::decay_rate(&p, &o.t_grid.clone().unwrap_or_else(default_t_grid))?
                }
            };
            let h = comparison_function(&form, o.h)?;
            let report = weak::verify_decay(&form, &h, &decay, o.samples, s)?;
            json!({ "decay": to_value(&decay), "check": to_value(&report) })
        }
        Command::Excessive => {
            let form = form_of(job)?;
            let g = source_function(&form, &o.source)?;
            let reference = o
                .reference
                .as_ref()
                .map(|ids| ids.iter().map(|id| form.index_of(id)).collect::<Result<Vec<usize>>>())
                .transpose()?;
            let r = kernel::construct_excessive(&form, &g, None, reference.as_deref())?;
            let mut excessivity = r.excessivity.clone();
            if let Some(t) = tol.excessivity {
                excessivity = resolvent::is_excessive(&form, &r.h, None, Some(t))?;
            }
            json!({
                "h": named(&form, &r.h),
                "reference": r.reference.iter().map(|&i| form.id(i)).collect::<Vec<_>>(),
                "change": r.change,
                "alphas_used": r.alphas.len(),
                "excessivity": to_value(&excessivity),
            })
        }
        Command::Harnack => {
            let Input::Kernel { matrix, nu, mu, p } = &job.input else {
                return Err(Error::Config("harnack needs --kernel".into()));
            };
            let op = load_kernel(matrix, nu.as_deref(), mu.as_deref(), *p)?;
            let lam = kernel::lambda_of(&op, tol.lambda.unwrap_or(kernel::TOL_LAMBDA))?;
            let excess = kernel::check_super_eigen(&op, lam.lambda, &lam.witness)?;
            let cert = kernel::harnack_sets(&op, o.target_mass, lam.lambda)?;
            let slack = kernel::harnack_slack(&op, &cert, &lam.witness);
            json!({
                "lambda": to_value(&lam),
                "super_eigen_excess": excess,
                "certificate": to_value(&cert),
                "witness_slack": slack,
            })
        }
        Command::Check => {
            let form = form_of(job)?;
            let s = seed(job)?;
            let bd = form::check_first_bd(&form, o.samples, s)?;
            let components = form::irreducible_components(&form);
            let exc = resolvent::is_excessive(&form, &form.constant(1.0), None, tol.excessivity)?;
            json!({
                "vertices": form.n_vertices(),
                "free_vertices": form.n_free(),
                "edges": form.edges().len(),
                "first_beurling_deny": to_value(&bd),
                "components": form::component_ids(&form, &components),
                "lowest_eigenvalue": form.lowest_eigenvalue(),
                "constant_excessive": to_value(&exc),
            })
        }
    };
    if job.format == Format::Csv && table.is_none() {
        return Err(Error::Config(format!("{} has no table output", job.command.name())));
    }
    let mut config = to_value(job);
    if let Value::Object(map) = &mut config {
        map.remove("env");
        map.remove("timing");
    }
    let report = Report {
        schema: REPORT_SCHEMA.to_string(),
        command: job.command,
        config,
        result,
        provenance: Provenance {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            seed: job.seed,
            overrides: job.env.clone(),
            wall_time_seconds: job.timing.then(|| start.elapsed().as_secs_f64()),
        },
    };
    Ok(Outcome {
        report,
        exit_code,
        table,
    })
}

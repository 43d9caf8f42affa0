use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Every variant maps to a stable machine-readable code through [`Error::code`],
/// which the command-line front end emits in its error objects.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge weights are not symmetric between {u} and {v}: {forward} vs {backward}")]
    NonSymmetricWeights {
        u: String,
        v: String,
        forward: f64,
        backward: f64,
    },
    #[error("edge {u} -- {v} has non-positive weight {weight}")]
    NonPositiveWeight { u: String, v: String, weight: f64 },
    #[error("self-loop at vertex {0}")]
    SelfLoop(String),
    #[error("vertex {vertex} has non-positive measure {value}")]
    NonPositiveMeasure { vertex: String, value: f64 },
    #[error("potential at {vertex} is not finite")]
    NonFinitePotential { vertex: String },
    #[error("form is not nonnegative: smallest eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    FormNotNonnegative { eigenvalue: f64, tolerance: f64 },
    #[error("dirichlet vertex {0} is not in the vertex set")]
    DisconnectedDirichletSpec(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),
    #[error("empty vertex set")]
    EmptyGraph,
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("first Beurling-Deny criterion violated by {violation:e}")]
    ViolationFound { violation: f64 },
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("Green limit inconclusive after {} schedule points", trace.len())]
    GreenInconclusive { trace: Vec<(f64, f64)> },
    #[error("form is not critical")]
    NotCritical,
    #[error("ground-state approximants did not converge: change {change:e} > {tolerance:e}")]
    NoConvergence { change: f64, tolerance: f64 },
    #[error("subcriticality certificates disagree: {0}")]
    InconsistentCertificates(String),
    #[error("Green function diverges; no Hardy weight with alpha = 0")]
    GreenDiverges,
    #[error("input must be strictly positive: {0}")]
    NonPositiveInput(String),
    #[error("transform validation failed: relative defect {0:e}")]
    ValidationFailure(f64),
    #[error("comparison function is not in the kernel: |Lh| = {0:e}")]
    KernelMismatch(f64),
    #[error("form has a nontrivial kernel; weak Hardy profiling needs ker q = 0")]
    NonTrivialKernel,
    #[error("operation needs a dense solve but the form has {n} free vertices (limit {limit})")]
    DenseLimit { n: usize, limit: usize },
    #[error("r grid too coarse to bracket xi({t})")]
    GridTooCoarse { t: f64 },
    #[error("h is not excessive: min Lh = {0:e}")]
    ExcessivityFailure(f64),
    #[error("decay inequality violated at t = {t}: lhs {lhs:e} > rhs {rhs:e}")]
    DecayViolation { t: f64, lhs: f64, rhs: f64 },
    #[error("bisection failed to bracket the projection constant")]
    BisectionFailure,
    #[error("iteration did not converge; lambda in [{lower}, {upper}]")]
    LambdaNoConvergence { lower: f64, upper: f64 },
    #[error("no feasible Harnack set for target mass {0}")]
    EmptySelection(f64),
    #[error("form is not irreducible ({0} components)")]
    NotIrreducible(usize),
    #[error("liminf not stabilized: change {change:e} > {tolerance:e}")]
    ScheduleTooShort { change: f64, tolerance: f64 },
    #[error("no ergodicity violation found; kernel is numerically degenerate")]
    NoViolationFound,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("kernel operator invalid: {0}")]
    InvalidKernel(String),
    #[error("unknown family {0}")]
    UnknownFamily(String),
    #[error("bad family parameters: {0}")]
    BadParams(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(Box<Error>),
    #[error("configuration rejected: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier used in machine-readable error objects.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonSymmetricWeights { .. } => "form.non_symmetric_weights",
            Error::NonPositiveWeight { .. } => "form.non_positive_weight",
            Error::SelfLoop(_) => "form.self_loop",
            Error::NonPositiveMeasure { .. } => "form.non_positive_measure",
            Error::NonFinitePotential { .. } => "form.non_finite_potential",
            Error::FormNotNonnegative { .. } => "form.not_nonnegative",
            Error::DisconnectedDirichletSpec(_) => "form.dirichlet_spec",
            Error::UnknownVertex(_) => "form.unknown_vertex",
            Error::DuplicateVertex(_) => "form.duplicate_vertex",
            Error::EmptyGraph => "form.empty",
            Error::DomainMismatch(_) => "form.domain_mismatch",
            Error::ViolationFound { .. } => "form.violation_found",
            Error::SolverFailure(_) => "solver.failure",
            Error::GreenInconclusive { .. } => "green.inconclusive",
            Error::NotCritical => "criticality.not_critical",
            Error::NoConvergence { .. } => "criticality.no_convergence",
            Error::InconsistentCertificates(_) => "criticality.inconsistent_certificates",
            Error::GreenDiverges => "hardy.green_diverges",
            Error::NonPositiveInput(_) => "hardy.non_positive_input",
            Error::ValidationFailure(_) => "hardy.validation_failure",
            Error::KernelMismatch(_) => "weak.kernel_mismatch",
            Error::NonTrivialKernel => "weak.nontrivial_kernel",
            Error::DenseLimit { .. } => "linalg.dense_limit",
            Error::GridTooCoarse { .. } => "weak.grid_too_coarse",
            Error::ExcessivityFailure(_) => "weak.excessivity_failure",
            Error::DecayViolation { .. } => "weak.violation_found",
            Error::BisectionFailure => "weak.bisection_failure",
            Error::LambdaNoConvergence { .. } => "kernel.no_convergence",
            Error::EmptySelection(_) => "kernel.empty_selection",
            Error::NotIrreducible(_) => "kernel.not_irreducible",
            Error::ScheduleTooShort { .. } => "kernel.schedule_too_short",
            Error::NoViolationFound => "kernel.no_violation_found",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidKernel(_) => "kernel.invalid",
            Error::UnknownFamily(_) => "io.unknown_family",
            Error::BadParams(_) => "io.bad_params",
            Error::Parse { .. } => "io.parse_error",
            Error::Validation(_) => "io.validation_error",
            Error::Config(_) => "io.config",
            Error::Io(_) => "io.io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

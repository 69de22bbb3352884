//! Command-line front end.
//!
//! Every successful command writes exactly one JSON object on a single line to
//! stdout; diagnostics go to stderr. Exit codes: 0 success, 1 numeric failure
//! (non-convergence, domain error, failed cross-check), 2 input or usage error.
//!
//! Model files are JSON and are told apart by their keys:
//!
//! * family: `{"N": 2, "order": 1, "family": [[0.3, 0.7], [0.6, 0.4]]}`, row `i` is the
//!   next-symbol distribution after state `i` (1-based states in base `N`, first
//!   symbol most significant);
//! * shift chain: `{"N": 2, "families": [<order-1 family>, <order-2 family>, ...]}`;
//! * recursive spec: `{"N": 3, "kind": "constant" | "mixture" | "bandit", "params": {...}}`
//!   where `params.R` is an array of columns, `params.epsilon` the mixture weight, and
//!   `params.p0`, `params.p1`, `params.delta` the bandit rates.
//!
//! Rows (and columns of `R`) must sum to 1 within `1e-6` and are renormalized on load.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::bandit::{closed_form_ratio, closed_form_stationary, simulate, BanditParams};
use crate::dense::DenseMatrix;
use crate::error::Error;
use crate::markov::{
    build_transition, chain_compose, chain_decompose, stationary, HigherOrderChain, SolverConfig,
};
use crate::recursive::{
    build_truncation, default_fixed_point_config, fixed_point, truncation_convergence,
    RecursiveMap, RecursiveSpec,
};
use crate::shift::{marginal_stationary, shift_matrix, shift_matrix_recursive, ShiftChain};
use crate::simplex::{ConditionalFamily, SimplexVector};
use crate::tensor_ops::check_identities;

/// Row-sum tolerance for probabilities read from model files.
pub const LOAD_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "recmarkov",
    version,
    about = "Higher-order and recursive Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a model file and summarize it.
    Validate(ModelArgs),
    /// Check the operator identities on a random family.
    Identities(IdentityArgs),
    /// Dense transition matrix of a family.
    Build(ModelArgs),
    /// Stationary vector of a family's chain.
    Stationary(ModelSolverArgs),
    /// One-step-ahead `m`-symbol marginal of a family's stationary vector.
    Marginal(MarginalArgs),
    /// k-shift matrix of a shift-chain file.
    Shift(ModelArgs),
    /// Chain-rule decomposition of a family's stationary vector.
    Decompose(ModelSolverArgs),
    /// Fixed point of a recursive spec.
    Fixedpoint(ModelSolverArgs),
    /// Order-k truncation of a recursive spec.
    Truncate(TruncateArgs),
    /// Truncation distances to the fixed point for k = 1..kmax.
    Converge(ConvergeArgs),
    /// Closed-form bandit solution.
    BanditSolve(BanditArgs),
    /// Monte Carlo run of the bandit process.
    BanditSimulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
}

impl SolverArgs {
    fn config(&self, defaults: SolverConfig) -> SolverConfig {
        SolverConfig {
            tolerance: self.tol.unwrap_or(defaults.tolerance),
            max_iterations: self.max_iter.unwrap_or(defaults.max_iterations),
            damping: self.damping.unwrap_or(defaults.damping),
        }
    }
}

#[derive(Debug, Args)]
struct ModelSolverArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct IdentityArgs {
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MarginalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct TruncateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    k: usize,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    kmax: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct BanditArgs {
    #[arg(long)]
    p0: f64,
    #[arg(long)]
    p1: f64,
    #[arg(long)]
    delta: f64,
}

impl BanditArgs {
    fn params(&self) -> Result<BanditParams, CliError> {
        BanditParams::new(self.p0, self.p1, self.delta).map_err(CliError::from)
    }

    fn echo(&self, out: &mut Map<String, Value>) {
        out.insert("p0".into(), json!(self.p0));
        out.insert("p1".into(), json!(self.p1));
        out.insert("delta".into(), json!(self.delta));
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    bandit: BanditArgs,
    #[arg(long)]
    steps: u64,
    #[arg(long = "burn-in", default_value_t = 0)]
    burn_in: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A model file after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Family(ConditionalFamily),
    Shift(ShiftChain),
    Recursive(RecursiveSpec),
}

#[derive(Debug)]
enum CliError {
    /// Bad input: exit 2.
    Input(String),
    /// Numeric failure: exit 1.
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Contract(_) | Error::Capacity { .. } => CliError::Input(e.to_string()),
            Error::NonConvergence { .. } | Error::Domain(_) | Error::CrossCheck { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(record) => match writeln!(stdout, "{record}") {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot write output: {e}");
                2
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(command: Command) -> Result<Value, CliError> {
    match command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Identities(a) => cmd_identities(&a),
        Command::Build(a) => cmd_build(&a),
        Command::Stationary(a) => cmd_stationary(&a),
        Command::Marginal(a) => cmd_marginal(&a),
        Command::Shift(a) => cmd_shift(&a),
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Fixedpoint(a) => cmd_fixedpoint(&a),
        Command::Truncate(a) => cmd_truncate(&a),
        Command::Converge(a) => cmd_converge(&a),
        Command::BanditSolve(a) => cmd_bandit_solve(&a),
        Command::BanditSimulate(a) => cmd_bandit_simulate(&a),
    }
}

fn record(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m
}

fn echo_solver(out: &mut Map<String, Value>, cfg: &SolverConfig) {
    out.insert("tol".into(), json!(cfg.tolerance));
    out.insert("max_iter".into(), json!(cfg.max_iterations));
    out.insert("damping".into(), json!(cfg.damping));
}

fn family_json(f: &ConditionalFamily) -> Value {
    json!({
        "N": f.alphabet(),
        "order": f.order(),
        "family": f.members().collect::<Vec<_>>(),
    })
}

fn matrix_json(m: &DenseMatrix) -> Value {
    json!(m.to_rows())
}

fn expect_family(path: &Path) -> Result<ConditionalFamily, CliError> {
    match load_model(path)? {
        Model::Family(f) => Ok(f),
        _ => Err(CliError::Input(format!(
            "{}: expected a family file (keys N, order, family)",
            path.display()
        ))),
    }
}

fn expect_recursive(path: &Path) -> Result<RecursiveSpec, CliError> {
    match load_model(path)? {
        Model::Recursive(s) => Ok(s),
        _ => Err(CliError::Input(format!(
            "{}: expected a recursive spec file (keys N, kind, params)",
            path.display()
        ))),
    }
}

fn cmd_validate(a: &ModelArgs) -> Result<Value, CliError> {
    let mut out = record("validate");
    match load_model(&a.model)? {
        Model::Family(f) => {
            out.insert("kind".into(), json!("family"));
            out.insert("N".into(), json!(f.alphabet()));
            out.insert("order".into(), json!(f.order()));
            out.insert("members".into(), json!(f.len()));
        }
        Model::Shift(c) => {
            out.insert("kind".into(), json!("shift"));
            out.insert("N".into(), json!(c.alphabet()));
            out.insert("k".into(), json!(c.len()));
        }
        Model::Recursive(s) => {
            out.insert("kind".into(), json!(s.kind()));
            out.insert("N".into(), json!(s.alphabet()));
        }
    }
    Ok(Value::Object(out))
}

fn cmd_identities(a: &IdentityArgs) -> Result<Value, CliError> {
    let report = check_identities(a.n, a.k, a.seed)?;
    let mut out = record("identities");
    out.insert("N".into(), json!(a.n));
    out.insert("k".into(), json!(a.k));
    out.insert("seed".into(), json!(a.seed));
    let mut errors = Map::new();
    for (name, e) in report.stated() {
        errors.insert(name.into(), json!(e));
    }
    out.insert("errors".into(), Value::Object(errors));
    out.insert(
        "branching_rotation_reindexed".into(),
        json!(report.branching_rotation_reindexed),
    );
    out.insert("max_error".into(), json!(report.max_stated_error()));
    out.insert("pass".into(), json!(report.max_stated_error() < 1e-12));
    Ok(Value::Object(out))
}

fn cmd_build(a: &ModelArgs) -> Result<Value, CliError> {
    let family = expect_family(&a.model)?;
    let q = build_transition(&family)?;
    let mut out = record("build");
    out.insert("N".into(), json!(family.alphabet()));
    out.insert("k".into(), json!(family.order()));
    out.insert("states".into(), json!(q.rows()));
    out.insert("Q".into(), matrix_json(&q));
    Ok(Value::Object(out))
}

fn cmd_stationary(a: &ModelSolverArgs) -> Result<Value, CliError> {
    let family = expect_family(&a.model.model)?;
    let cfg = a.solver.config(SolverConfig::default());
    let chain = HigherOrderChain::new(family.clone())?;
    let result = stationary(&chain, &cfg)?;
    let mut out = record("stationary");
    out.insert("N".into(), json!(family.alphabet()));
    out.insert("k".into(), json!(family.order()));
    echo_solver(&mut out, &cfg);
    out.insert("theta".into(), json!(result.theta));
    out.insert("residual".into(), json!(result.residual));
    out.insert("iterations".into(), json!(result.iterations));
    out.insert("direct_check".into(), json!(result.direct_check));
    Ok(Value::Object(out))
}

fn cmd_marginal(a: &MarginalArgs) -> Result<Value, CliError> {
    let family = expect_family(&a.model.model)?;
    let cfg = a.solver.config(SolverConfig::default());
    let omega = marginal_stationary(&family, a.m, &cfg)?;
    let mut out = record("marginal");
    out.insert("N".into(), json!(family.alphabet()));
    out.insert("k".into(), json!(family.order()));
    out.insert("m".into(), json!(a.m));
    echo_solver(&mut out, &cfg);
    out.insert("omega".into(), json!(omega));
    Ok(Value::Object(out))
}

fn cmd_shift(a: &ModelArgs) -> Result<Value, CliError> {
    let chain = match load_model(&a.model)? {
        Model::Shift(c) => c,
        _ => {
            return Err(CliError::Input(format!(
                "{}: expected a shift-chain file (keys N, families)",
                a.model.display()
            )))
        }
    };
    let s = shift_matrix(&chain)?;
    let recursive = shift_matrix_recursive(&chain)?;
    let mut out = record("shift");
    out.insert("N".into(), json!(chain.alphabet()));
    out.insert("k".into(), json!(chain.len()));
    out.insert("S".into(), matrix_json(&s));
    out.insert(
        "recursive_difference".into(),
        json!(s.max_abs_difference(&recursive)),
    );
    Ok(Value::Object(out))
}

fn cmd_decompose(a: &ModelSolverArgs) -> Result<Value, CliError> {
    let family = expect_family(&a.model.model)?;
    let cfg = a.solver.config(SolverConfig::default());
    let chain = HigherOrderChain::new(family.clone())?;
    let theta = stationary(&chain, &cfg)?.theta;
    let d = chain_decompose(&theta, family.alphabet(), family.order())?;
    let roundtrip = chain_compose(&d)?;
    let mut out = record("decompose");
    out.insert("N".into(), json!(family.alphabet()));
    out.insert("k".into(), json!(family.order()));
    echo_solver(&mut out, &cfg);
    out.insert("theta".into(), json!(theta));
    out.insert(
        "levels".into(),
        json!(d.levels.iter().map(family_json).collect::<Vec<_>>()),
    );
    out.insert(
        "roundtrip_error".into(),
        json!(theta.l1_distance(&roundtrip)),
    );
    Ok(Value::Object(out))
}

fn cmd_fixedpoint(a: &ModelSolverArgs) -> Result<Value, CliError> {
    let spec = expect_recursive(&a.model.model)?;
    let cfg = a.solver.config(default_fixed_point_config());
    let n = spec.alphabet();
    let fp = fixed_point(&spec, &cfg, &SimplexVector::uniform(n))?;
    let mut out = record("fixedpoint");
    out.insert("N".into(), json!(n));
    out.insert("kind".into(), json!(spec.kind()));
    echo_solver(&mut out, &cfg);
    out.insert("omega".into(), json!(fp.omega));
    out.insert("residual".into(), json!(fp.residual));
    out.insert("iterations".into(), json!(fp.iterations));
    Ok(Value::Object(out))
}

fn cmd_truncate(a: &TruncateArgs) -> Result<Value, CliError> {
    let spec = expect_recursive(&a.model.model)?;
    let family = build_truncation(&spec, None, a.k)?;
    let mut out = record("truncate");
    out.insert("kind".into(), json!(spec.kind()));
    out.insert("k".into(), json!(a.k));
    out.insert("truncation".into(), family_json(&family));
    Ok(Value::Object(out))
}

fn cmd_converge(a: &ConvergeArgs) -> Result<Value, CliError> {
    let spec = expect_recursive(&a.model.model)?;
    let cfg = a.solver.config(SolverConfig::default());
    let report = truncation_convergence(&spec, None, a.kmax, &cfg)?;
    let mut out = record("converge");
    out.insert("N".into(), json!(spec.alphabet()));
    out.insert("kind".into(), json!(spec.kind()));
    out.insert("kmax".into(), json!(a.kmax));
    echo_solver(&mut out, &cfg);
    out.insert("fixed_point".into(), json!(report.fixed_point.omega));
    out.insert("steps".into(), json!(report.steps));
    Ok(Value::Object(out))
}

fn cmd_bandit_solve(a: &BanditArgs) -> Result<Value, CliError> {
    let params = a.params()?;
    let r = closed_form_ratio(&params)?;
    let omega = closed_form_stationary(&params)?;
    let spec = RecursiveSpec::bandit(params)?;
    let image = spec.map(&omega)?.matvec(&omega)?;
    let mut out = record("bandit-solve");
    a.echo(&mut out);
    out.insert("r".into(), json!(r));
    out.insert("q0".into(), json!(r / (1.0 + r)));
    out.insert("q1".into(), json!(1.0 / (1.0 + r)));
    out.insert("residual".into(), json!(omega.l1_distance(&image)));
    out.insert("omega".into(), json!(omega));
    Ok(Value::Object(out))
}

fn cmd_bandit_simulate(a: &SimulateArgs) -> Result<Value, CliError> {
    let params = a.bandit.params()?;
    let report = simulate(&params, a.steps, a.burn_in, a.seed)?;
    let mut out = record("bandit-simulate");
    a.bandit.echo(&mut out);
    if let Value::Object(fields) = json!(report) {
        out.extend(fields);
    }
    Ok(Value::Object(out))
}

// ---------------------------------------------------------------------------
// model files

/// Reads and validates a model file, dispatching on its keys.
pub fn load_model(path: &Path) -> Result<Model, LoadError> {
    load_model_inner(path).map_err(|e| LoadError(e.message().to_string()))
}

/// Input error raised by [`load_model`]; the message names the file and field.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadError(pub String);

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for LoadError {}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::Input(e.0)
    }
}

fn load_model_inner(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: cannot read: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Input(format!(
            "{}: invalid JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let at = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let obj = value
        .as_object()
        .ok_or_else(|| at("top level must be an object".into()))?;
    if obj.contains_key("kind") {
        parse_recursive(obj).map(Model::Recursive).map_err(at)
    } else if obj.contains_key("families") {
        parse_shift(obj).map(Model::Shift).map_err(at)
    } else if obj.contains_key("family") {
        parse_family(obj, "", None).map(Model::Family).map_err(at)
    } else {
        Err(at(
            "unrecognized model: expected key `family`, `families` or `kind`".into(),
        ))
    }
}

fn field<'a>(obj: &'a Map<String, Value>, prefix: &str, key: &str) -> Result<&'a Value, String> {
    obj.get(key)
        .ok_or_else(|| format!("missing field `{prefix}{key}`"))
}

fn uint_field(obj: &Map<String, Value>, prefix: &str, key: &str) -> Result<usize, String> {
    field(obj, prefix, key)?
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| format!("field `{prefix}{key}` must be a non-negative integer"))
}

fn real_field(obj: &Map<String, Value>, prefix: &str, key: &str) -> Result<f64, String> {
    field(obj, prefix, key)?
        .as_f64()
        .ok_or_else(|| format!("field `{prefix}{key}` must be a number"))
}

/// A probability vector of length `n`, checked to sum to 1 within [`LOAD_SUM_TOLERANCE`]
/// and renormalized.
fn prob_vector(v: &Value, n: usize, path: &str) -> Result<Vec<f64>, String> {
    let arr = v
        .as_array()
        .ok_or_else(|| format!("`{path}` must be an array"))?;
    if arr.len() != n {
        return Err(format!("`{path}` has {} entries, expected {n}", arr.len()));
    }
    let mut row = Vec::with_capacity(n);
    for (j, x) in arr.iter().enumerate() {
        let x = x
            .as_f64()
            .ok_or_else(|| format!("`{path}[{j}]` must be a number"))?;
        if !x.is_finite() || x < 0.0 {
            return Err(format!(
                "`{path}[{j}]` must be a non-negative probability, got {x}"
            ));
        }
        row.push(x);
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > LOAD_SUM_TOLERANCE {
        return Err(format!("`{path}` sums to {sum}, not 1"));
    }
    row.iter_mut().for_each(|x| *x /= sum);
    Ok(row)
}

fn parse_family(
    obj: &Map<String, Value>,
    prefix: &str,
    alphabet: Option<usize>,
) -> Result<ConditionalFamily, String> {
    let n = match (obj.get("N"), alphabet) {
        (None, Some(n)) => n,
        (_, _) => {
            let n = uint_field(obj, prefix, "N")?;
            if let Some(outer) = alphabet {
                if n != outer {
                    return Err(format!("field `{prefix}N` is {n}, expected {outer}"));
                }
            }
            n
        }
    };
    let order = uint_field(obj, prefix, "order")?;
    let count =
        ConditionalFamily::member_count(n, order).map_err(|e| format!("`{prefix}family`: {e}"))?;
    let rows = field(obj, prefix, "family")?
        .as_array()
        .ok_or_else(|| format!("field `{prefix}family` must be an array of rows"))?;
    if rows.len() != count {
        return Err(format!(
            "field `{prefix}family` has {} rows, expected N^order = {count}",
            rows.len()
        ));
    }
    let mut probs = Vec::with_capacity(count * n);
    for (i, row) in rows.iter().enumerate() {
        probs.extend(prob_vector(row, n, &format!("{prefix}family[{i}]"))?);
    }
    ConditionalFamily::from_flat(n, order, probs).map_err(|e| format!("`{prefix}family`: {e}"))
}

fn parse_shift(obj: &Map<String, Value>) -> Result<ShiftChain, String> {
    let n = uint_field(obj, "", "N")?;
    let list = field(obj, "", "families")?
        .as_array()
        .ok_or_else(|| "field `families` must be an array".to_string())?;
    let mut families = Vec::with_capacity(list.len());
    for (m, item) in list.iter().enumerate() {
        let prefix = format!("families[{m}].");
        let inner = item
            .as_object()
            .ok_or_else(|| format!("`families[{m}]` must be an object"))?;
        families.push(parse_family(inner, &prefix, Some(n))?);
    }
    ShiftChain::from_families(families).map_err(|e| format!("`families`: {e}"))
}

fn parse_recursive(obj: &Map<String, Value>) -> Result<RecursiveSpec, String> {
    let n = uint_field(obj, "", "N")?;
    let kind = field(obj, "", "kind")?
        .as_str()
        .ok_or_else(|| "field `kind` must be a string".to_string())?;
    let params = field(obj, "", "params")?
        .as_object()
        .ok_or_else(|| "field `params` must be an object".to_string())?;
    let matrix = || -> Result<DenseMatrix, String> {
        let cols = field(params, "params.", "R")?
            .as_array()
            .ok_or_else(|| "field `params.R` must be an array of columns".to_string())?;
        if cols.len() != n {
            return Err(format!(
                "field `params.R` has {} columns, expected {n}",
                cols.len()
            ));
        }
        let cols = cols
            .iter()
            .enumerate()
            .map(|(j, c)| prob_vector(c, n, &format!("params.R[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        DenseMatrix::from_columns(&cols).map_err(|e| format!("`params.R`: {e}"))
    };
    let spec = match kind {
        "constant" => RecursiveSpec::constant(matrix()?),
        "mixture" => {
            let eps = real_field(params, "params.", "epsilon")?;
            RecursiveSpec::mixture(eps, matrix()?)
        }
        "bandit" => {
            if n != 4 {
                return Err(format!("field `N` must be 4 for a bandit spec, got {n}"));
            }
            let p = BanditParams::new(
                real_field(params, "params.", "p0")?,
                real_field(params, "params.", "p1")?,
                real_field(params, "params.", "delta")?,
            )
            .map_err(|e| format!("`params`: {e}"))?;
            RecursiveSpec::bandit(p)
        }
        other => {
            return Err(format!(
                "field `kind` must be constant, mixture or bandit, got `{other}`"
            ))
        }
    };
    spec.map_err(|e| format!("`params`: {e}"))
}

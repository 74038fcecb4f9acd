//! Command-line front end. Every command reads a JSON system file and
//! prints one JSON report on standard output.
//!
//! Exit codes: 0 success, 1 domain error (no zero, irregular point,
//! failed run), 2 usage error (bad flags, unreadable file, parse errors).

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::chart::Chart;
use crate::closure::augment;
use crate::control::{
    control_for_term, implicit_control, sample_box, verify_control, ChartSource, ControlData, TermSource,
};
use crate::engine::{regularize, EngineOptions};
use crate::jacobian::{grad, is_regular_at, q_witness, FunctionSystem};
use crate::linalg::{combinations, det};
use crate::numeric::{find_zero, flat_probe, SearchBox};
use crate::scalar::Scalar;
use crate::term::{partial, parse, Term};

#[derive(Parser, Debug)]
#[command(name = "regulus", version, about = "Regular zero sets of smooth function systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// System file (JSON).
    pub system: PathBuf,
    /// Target term; overrides the file's `target`.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub tol_res: Option<f64>,
    #[arg(long)]
    pub tol_reg: Option<f64>,
    #[arg(long)]
    pub max_order: Option<u32>,
    /// Box as `lo:hi,lo:hi,…`; a single interval applies to every axis.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub search_box: Option<String>,
    /// Grid points per axis for zero search.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Derivative order for control, verification and flatness commands.
    #[arg(long)]
    pub order: Option<u32>,
    /// Number of random samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed for all random sampling (falls back to REGULUS_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// 1-based function index; all functions when absent.
    #[arg(long = "fn")]
    pub function: Option<usize>,
    /// 1-based variable index for `diff`.
    #[arg(long)]
    pub wrt: Option<usize>,
    /// Comma-separated point; integers and `a/b` are exact.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Partial derivative of one function.
    Diff(Common),
    /// Gradients.
    Grad(Common),
    /// Jacobian matrix.
    Jac(Common),
    /// Sum of squared maximal minors of the Jacobian.
    Qwitness(Common),
    /// Append `x_{n+1}·Q − 1`.
    Augment(Common),
    /// Regularity verdict at `--point`.
    VerifyRegular(Common),
    /// Approximate zeros of one function in `--box`.
    FindZero(Common),
    /// Build a square regular system meeting the target's zero set.
    Regularize(Common),
    /// Derivative control certificates.
    Control(Common),
    /// Sample-check control certificates; with `--point`, the solved
    /// coordinates of the chart through that point.
    VerifyControl(Common),
    /// Whether all derivatives up to `--order` vanish at `--point`.
    FlatProbe(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Diff(_) => "diff",
            Command::Grad(_) => "grad",
            Command::Jac(_) => "jac",
            Command::Qwitness(_) => "qwitness",
            Command::Augment(_) => "augment",
            Command::VerifyRegular(_) => "verify-regular",
            Command::FindZero(_) => "find-zero",
            Command::Regularize(_) => "regularize",
            Command::Control(_) => "control",
            Command::VerifyControl(_) => "verify-control",
            Command::FlatProbe(_) => "flat-probe",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Diff(c)
            | Command::Grad(c)
            | Command::Jac(c)
            | Command::Qwitness(c)
            | Command::Augment(c)
            | Command::VerifyRegular(c)
            | Command::FindZero(c)
            | Command::Regularize(c)
            | Command::Control(c)
            | Command::VerifyControl(c)
            | Command::FlatProbe(c) => c,
        }
    }
}

/// Envelope read from disk.
#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub options: Option<FileOptions>,
}

#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    pub tol_res: Option<f64>,
    pub tol_reg: Option<f64>,
    pub tol_nonflat: Option<f64>,
    pub max_order: Option<u32>,
    #[serde(rename = "box")]
    pub search_box: Option<String>,
    pub grid: Option<usize>,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

enum Failure {
    Usage(String),
    Domain(Value),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn domain(kind: &str, msg: impl Into<String>) -> Failure {
    Failure::Domain(json!({ "kind": kind, "message": msg.into() }))
}

/// Renames user variable names to `x<i>` token by token.
fn rename_variables(src: &str, names: &[String]) -> String {
    let mut out = String::with_capacity(src.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        if let Some(i) = names.iter().position(|n| n == token) {
            out.push_str(&format!("x{}", i + 1));
        } else {
            out.push_str(token);
        }
        token.clear();
    };
    for ch in src.chars() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            flush(&mut token, &mut out);
            out.push(ch);
        } else {
            token.push(ch);
        }
    }
    flush(&mut token, &mut out);
    out
}

struct Loaded {
    file: SystemFile,
    functions: Vec<Term>,
    target: Option<Term>,
    options: EngineOptions,
    seed: u64,
}

impl Loaded {
    fn parse_term(file: &SystemFile, src: &str, what: &str) -> Result<Term, Failure> {
        let src = match &file.variables {
            Some(names) => rename_variables(src, names),
            None => src.to_string(),
        };
        let t = parse(&src).map_err(|e| usage(format!("{what}: {e}")))?;
        if t.arity() > file.n {
            return Err(usage(format!("{what} uses x{} but n = {}", t.arity(), file.n)));
        }
        Ok(t)
    }

    fn load(c: &Common) -> Result<Loaded, Failure> {
        let text = std::fs::read_to_string(&c.system)
            .map_err(|e| usage(format!("cannot read {}: {e}", c.system.display())))?;
        let file: SystemFile =
            serde_json::from_str(&text).map_err(|e| usage(format!("invalid system file: {e}")))?;
        if let Some(v) = &file.variables {
            if v.len() != file.n {
                return Err(usage(format!("{} variable names for n = {}", v.len(), file.n)));
            }
        }
        let functions = file
            .functions
            .iter()
            .enumerate()
            .map(|(i, s)| Loaded::parse_term(&file, s, &format!("function {}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let target = match c.target.as_ref().or(file.target.as_ref()) {
            Some(s) => Some(Loaded::parse_term(&file, s, "target")?),
            None => None,
        };
        let mut options = EngineOptions::default();
        let fo = file.options.clone().unwrap_or_default();
        if let Some(v) = c.tol_res.or(fo.tol_res) {
            options.tol.tol_res = v;
        }
        if let Some(v) = c.tol_reg.or(fo.tol_reg) {
            options.tol.tol_reg = v;
        }
        if let Some(v) = fo.tol_nonflat {
            options.tol.tol_nonflat = v;
        }
        if let Some(v) = c.max_order.or(fo.max_order) {
            options.tol.max_order = v;
        }
        if let Some(v) = c.grid.or(fo.grid) {
            if v < 2 {
                return Err(usage("--grid must be at least 2"));
            }
            options.grid = v;
        }
        if let Some(b) = c.search_box.as_ref().or(fo.search_box.as_ref()) {
            options.search_box = b.parse::<SearchBox>().map_err(|e| usage(e.to_string()))?;
        }
        let seed = match c.seed {
            Some(s) => s,
            None => match std::env::var("REGULUS_SEED") {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| usage(format!("REGULUS_SEED is not an integer: {v}")))?,
                Err(_) => 0,
            },
        };
        Ok(Loaded {
            file,
            functions,
            target,
            options,
            seed,
        })
    }

    fn n(&self) -> usize {
        self.file.n
    }

    fn system(&self) -> Result<FunctionSystem, Failure> {
        FunctionSystem::new(self.n(), self.functions.clone()).map_err(|e| usage(e.to_string()))
    }

    /// Selected function(s): `--fn i` or every function.
    fn selected(&self, c: &Common) -> Result<Vec<(usize, Term)>, Failure> {
        match c.function {
            Some(i) if i >= 1 && i <= self.functions.len() => Ok(vec![(i, self.functions[i - 1].clone())]),
            Some(i) => Err(usage(format!("--fn {i} out of range 1..={}", self.functions.len()))),
            None if self.functions.is_empty() => Err(usage("the system has no functions")),
            None => Ok(self.functions.iter().cloned().enumerate().map(|(i, t)| (i + 1, t)).collect()),
        }
    }

    fn one(&self, c: &Common) -> Result<(usize, Term), Failure> {
        match c.function {
            Some(_) => Ok(self.selected(c)?.remove(0)),
            None if self.functions.len() == 1 => Ok((1, self.functions[0].clone())),
            None => Err(usage("several functions: choose one with --fn")),
        }
    }

    fn input(&self) -> Value {
        json!({
            "n": self.file.n,
            "variables": self.file.variables,
            "functions": self.functions,
            "target": self.target,
        })
    }

    fn bounds(&self, c: &Common, dim: usize, default: (f64, f64)) -> Result<Vec<(f64, f64)>, Failure> {
        let b = match c.search_box.as_ref().or(self.file.options.as_ref().and_then(|o| o.search_box.as_ref())) {
            Some(s) => s.parse::<SearchBox>().map_err(|e| usage(e.to_string()))?,
            None => SearchBox::cube(1, default.0, default.1),
        };
        let b = b.resized(dim);
        Ok(b.lo.into_iter().zip(b.hi).collect())
    }
}

fn parse_point(s: &str, n: usize) -> Result<Vec<Scalar>, Failure> {
    let pts = s
        .split(',')
        .map(|t| t.parse::<Scalar>().map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if pts.len() != n {
        return Err(usage(format!("--point has {} coordinates, expected {n}", pts.len())));
    }
    Ok(pts)
}

fn need_point(c: &Common, n: usize) -> Result<Vec<Scalar>, Failure> {
    parse_point(c.point.as_deref().ok_or_else(|| usage("--point is required"))?, n)
}

/// Printed trees above this many nodes are summarized instead of written out.
const PRINT_LIMIT: u64 = 1 << 20;

/// A term as its printed form, or a size summary when the tree is too large
/// to print.
fn term_json(t: &Term) -> Value {
    let size = t.tree_size();
    if size <= PRINT_LIMIT {
        json!(t.to_string())
    } else {
        json!({ "omitted": true, "tree_size": size, "dag_size": t.dag_size() })
    }
}

fn as_f64(p: &[Scalar]) -> Vec<f64> {
    p.iter().map(Scalar::to_f64).collect()
}

fn execute(cmd: &Command) -> Result<(Value, Value), Failure> {
    let c = cmd.common();
    let l = Loaded::load(c)?;
    let n = l.n();
    let order = c.order.unwrap_or(4) as usize;
    let result = match cmd {
        Command::Diff(_) => {
            let (i, f) = l.one(c)?;
            let j = c.wrt.ok_or_else(|| usage("--wrt is required"))?;
            if j == 0 || j > n {
                return Err(usage(format!("--wrt {j} out of range 1..={n}")));
            }
            json!({ "fn": i, "wrt": j, "result": partial(&f, j) })
        }
        Command::Grad(_) => {
            let rows: Vec<Value> = l
                .selected(c)?
                .into_iter()
                .map(|(i, f)| json!({ "fn": i, "result": grad(&f, n) }))
                .collect();
            json!({ "result": rows })
        }
        Command::Jac(_) => json!({ "result": l.system()?.jacobian() }),
        Command::Qwitness(_) => {
            let q = q_witness(&l.system()?).map_err(|e| domain("determinant_cap", e.to_string()))?;
            json!({ "result": q })
        }
        Command::Augment(_) => {
            let a = augment(&l.system()?).map_err(|e| domain("overdetermined", e.to_string()))?;
            json!({ "result": { "n": a.dim(), "functions": a.functions() } })
        }
        Command::VerifyRegular(_) => {
            let sys = l.system()?;
            let point = need_point(c, n)?;
            let v = is_regular_at(&sys, &point, l.options.tol.tol_res, l.options.tol.tol_reg)
                .map_err(|e| domain("evaluation", e.to_string()))?;
            json!({ "point": point, "result": v })
        }
        Command::FindZero(_) => {
            let (i, f) = match &l.target {
                Some(t) if c.function.is_none() => (0, t.clone()),
                _ => l.one(c)?,
            };
            let zeros = find_zero(&f, &l.options.search_box.resized(n), l.options.grid, l.options.tol.tol_res);
            if zeros.is_empty() {
                return Err(domain("no_zero", "no zero found in the search box"));
            }
            json!({ "fn": i, "box": l.options.search_box.resized(n), "grid": l.options.grid, "result": zeros })
        }
        Command::Regularize(_) => {
            let f = match (&l.target, l.functions.first()) {
                (Some(t), _) => t.clone(),
                (None, Some(f)) => f.clone(),
                (None, None) => return Err(usage("no target: pass --target or list a function")),
            };
            match regularize(&f, n, &l.options) {
                Ok(r) => json!({
                    "options": l.options,
                    "result": {
                        "m": r.m,
                        "functions": r.functions.iter().map(term_json).collect::<Vec<_>>(),
                        "witness": r.witness,
                        "target_residual": r.target_residual,
                        "margins": r.verdict,
                    },
                    "trace": r.trace,
                }),
                Err(e) => return Err(Failure::Domain(serde_json::to_value(&e).expect("serializable"))),
            }
        }
        Command::Control(_) => {
            let items = l
                .selected(c)?
                .into_iter()
                .map(|(i, f)| {
                    control_for_term(&f, n, order)
                        .map(|d| json!({ "fn": i, "result": d }))
                        .map_err(|e| domain("unsupported", e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            json!({ "order": order, "result": items })
        }
        Command::VerifyControl(_) => {
            let samples = c.samples.unwrap_or(100);
            match &c.point {
                None => {
                    let pts = sample_box(&l.bounds(c, n, (-2.0, 2.0))?, samples, l.seed);
                    let mut reports = Vec::new();
                    let mut pass = true;
                    for (i, f) in l.selected(c)? {
                        let d: ControlData =
                            control_for_term(&f, n, order).map_err(|e| domain("unsupported", e.to_string()))?;
                        let src = TermSource { term: f, dim: n };
                        let r = verify_control(&src, &d, &pts, order).map_err(|e| domain("evaluation", e.to_string()))?;
                        pass &= r.pass;
                        reports.push(json!({ "fn": i, "report": r }));
                    }
                    json!({ "seed": l.seed, "samples": samples, "order": order, "pass": pass, "result": reports })
                }
                Some(p) => {
                    let sys = l.system()?;
                    let base = as_f64(&parse_point(p, n)?);
                    let q = sys.len();
                    let jac = sys.jacobian_f64(&base).map_err(|e| domain("evaluation", e.to_string()))?;
                    let mut best = (Vec::new(), 0.0f64);
                    for cols in combinations(n, q) {
                        let sub: Vec<Vec<f64>> = jac.iter().map(|r| cols.iter().map(|&k| r[k]).collect()).collect();
                        let d = det(&sub).abs();
                        if d >= best.1 {
                            best = (cols, d);
                        }
                    }
                    let solved = best.0;
                    let free: Vec<usize> = (0..n).filter(|k| !solved.contains(k)).collect();
                    let chart = Chart::new(sys.clone(), free.clone(), solved.clone(), base.clone())
                        .map_err(|e| domain("chart", e.to_string()))?;
                    let cds = sys
                        .functions()
                        .iter()
                        .map(|g| control_for_term(g, n, order))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| domain("unsupported", e.to_string()))?;
                    let ic = implicit_control(&chart, &ControlData::cover(&cds), order)
                        .map_err(|e| domain("chart", e.to_string()))?;
                    let centre = chart.base_free();
                    let bounds: Vec<(f64, f64)> = match &c.search_box {
                        Some(_) => l.bounds(c, free.len(), (0.0, 0.0))?,
                        None => centre.iter().map(|&y| (y - 0.5, y + 0.5)).collect(),
                    };
                    let pts = sample_box(&bounds, samples, l.seed);
                    let mut reports = Vec::new();
                    let mut pass = true;
                    for k in 0..solved.len() {
                        let src = ChartSource {
                            chart: &chart,
                            solved_index: k,
                        };
                        let r = verify_control(&src, &ic, &pts, order).map_err(|e| domain("chart", e.to_string()))?;
                        pass &= r.pass;
                        reports.push(json!({ "solved": solved[k] + 1, "report": r }));
                    }
                    json!({
                        "seed": l.seed,
                        "samples": samples,
                        "order": order,
                        "free": free.iter().map(|k| k + 1).collect::<Vec<_>>(),
                        "solved": solved.iter().map(|k| k + 1).collect::<Vec<_>>(),
                        "c": ic.c,
                        "e": ic.e,
                        "pass": pass,
                        "result": reports,
                    })
                }
            }
        }
        Command::FlatProbe(_) => {
            let (i, f) = match &l.target {
                Some(t) if c.function.is_none() => (0, t.clone()),
                _ => l.one(c)?,
            };
            let point = as_f64(&need_point(c, n)?);
            let k = c.order.unwrap_or(6);
            let flat = flat_probe(&f, &point, k, l.options.tol.tol_nonflat)
                .map_err(|e| domain("evaluation", e.to_string()))?;
            json!({ "fn": i, "point": point, "order": k, "tol": l.options.tol.tol_nonflat, "result": flat })
        }
    };
    Ok((l.input(), result))
}

fn merge(command: &str, input: Value, body: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("command".into(), json!(command));
    out.insert("input".into(), input);
    if let Value::Object(m) = body {
        out.extend(m);
    }
    Value::Object(out)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            return Outcome {
                code,
                stdout: e.to_string(),
            };
        }
    };
    let name = cli.command.name();
    let (code, value) = match execute(&cli.command) {
        Ok((input, body)) => (0, merge(name, input, body)),
        Err(Failure::Usage(msg)) => (2, json!({ "command": name, "error": { "kind": "usage", "message": msg } })),
        Err(Failure::Domain(err)) => (1, json!({ "command": name, "error": err })),
    };
    Outcome {
        code,
        stdout: serde_json::to_string_pretty(&value).expect("serializable") + "\n",
    }
}

//! Command-line front end. [`run`] maps an argument vector to an exit code
//! and the text written to standard output.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

use crate::check::{check_theorem, fixpoint_caps, CheckOptions, Verdict};
use crate::error::{Error, Result};
use crate::finite::FiniteModel;
use crate::formula::{parse, render, Formula, PpFormula, Var};
use crate::lattice::{IntVec, Lattice};
use crate::orbit::{OrbitOracle, DEFAULT_ORBIT_LIMIT};
use crate::solver::{cover_decide, eval_pp, kernel_and_fiber, satisfies_ppstar, DefinableCoset, Params};
use crate::structure::Structure;
use crate::torus::{approx_member, parse_rational, TorusCoset, TorusPoint};
use crate::types::{basis_generate, extend, fingerprint, type_difference, Caps, Entry};

/// Overrides the largest group the orbit oracle accepts.
pub const ORBIT_ENV: &str = "PPSTAR_MAX_ORBIT";

#[derive(Parser, Debug)]
#[command(name = "ppstar", version, about = "Types and definable sets in abelian structures with a torus character")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct Common {
    /// Structure file (JSON).
    #[arg(long)]
    structure: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Basis caps as "k,atoms,coeff".
    #[arg(long)]
    caps: Option<Caps>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
    /// Tolerance "p/q" for quantifier-free f-value checks in `satisfies`.
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a structure file.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Solution coset of a pp formula.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        formula: String,
        /// Free variable order, comma separated.
        #[arg(long)]
        vars: Option<String>,
    },
    /// Whether a tuple satisfies a formula.
    Satisfies {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        tuple: String,
        #[arg(long)]
        vars: Option<String>,
    },
    /// Whether the target set is covered by the union of the others.
    Cover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        target: String,
        #[arg(long = "by", required = true)]
        by: Vec<String>,
        #[arg(long)]
        vars: Option<String>,
    },
    /// Kernel of the character.
    Kernel {
        #[command(flatten)]
        common: Common,
    },
    /// Fiber of the character over a torus point.
    Fiber {
        #[command(flatten)]
        common: Common,
        /// Torus point as "p/q,p/q,...".
        #[arg(long)]
        point: String,
    },
    /// Fingerprint of a tuple.
    Type {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuple: String,
    },
    /// Whether two tuples have the same fingerprint.
    Eqtype {
        #[command(flatten)]
        common: Common,
        #[arg(long = "tuple-a")]
        tuple_a: String,
        #[arg(long = "tuple-b")]
        tuple_b: String,
    },
    /// Extend a pair of equal-type tuples by one element.
    Extend {
        #[command(flatten)]
        common: Common,
        #[arg(long = "tuple-a")]
        tuple_a: String,
        #[arg(long = "tuple-b")]
        tuple_b: String,
        #[arg(long)]
        element: String,
    },
    /// Whether two tuples lie in the same automorphism orbit.
    Orbit {
        #[command(flatten)]
        common: Common,
        #[arg(long = "tuple-a")]
        tuple_a: String,
        #[arg(long = "tuple-b")]
        tuple_b: String,
    },
    /// Compare fingerprints with automorphism orbits.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        arity: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Validate { common }
            | Command::Eval { common, .. }
            | Command::Satisfies { common, .. }
            | Command::Cover { common, .. }
            | Command::Kernel { common }
            | Command::Fiber { common, .. }
            | Command::Type { common, .. }
            | Command::Eqtype { common, .. }
            | Command::Extend { common, .. }
            | Command::Orbit { common, .. }
            | Command::Check { common, .. } => common,
        }
    }
}

/// A run that ends with a domain verdict other than success.
struct Outcome {
    code: i32,
    body: Value,
}

fn ok(body: Value) -> Result<Outcome> {
    Ok(Outcome { code: 0, body })
}

fn int_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}

fn vec_json(v: &[BigInt]) -> Value {
    Value::Array(v.iter().map(int_json).collect())
}

fn lattice_json(l: &Lattice) -> Value {
    Value::Array(l.basis().iter().map(|r| vec_json(r)).collect())
}

fn coset_json(c: &DefinableCoset) -> Value {
    match c.coset() {
        None => json!({ "empty": true }),
        Some(a) => json!({ "empty": false, "rep": vec_json(a.rep()), "basis": lattice_json(a.lattice()) }),
    }
}

fn torus_coset_json(c: &TorusCoset) -> Value {
    match c {
        TorusCoset::Empty { .. } => json!({ "empty": true }),
        TorusCoset::Coset { rep, group } => json!({
            "empty": false,
            "rep": rep.to_strings(),
            "annihilator": lattice_json(group.annihilator()),
        }),
    }
}

fn parse_element(s: &Structure, text: &str) -> Result<IntVec> {
    let coords: Vec<BigInt> = text
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<BigInt>()
                .map_err(|_| Error::Precondition(format!("'{}' is not an integer", x.trim())))
        })
        .collect::<Result<_>>()?;
    s.check_element(&coords)?;
    Ok(s.reduce(&coords))
}

/// Elements separated by ';', coordinates by ','.
fn parse_tuple(s: &Structure, text: &str) -> Result<Vec<IntVec>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(';').map(|e| parse_element(s, e)).collect()
}

fn var_list(vars: &Option<String>) -> Option<Vec<String>> {
    vars.as_ref().map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
}

fn parse_formula(s: &Structure, text: &str, vars: Option<Vec<String>>) -> Result<Formula> {
    let mut sig = s.signature();
    if let Some(v) = vars {
        sig = sig.with_vars(v);
    }
    parse(text, &sig)
}

fn pp_only(f: Formula) -> Result<PpFormula> {
    match f {
        Formula::Pp(p) => Ok(p),
        _ => Err(Error::Precondition("expected a pp formula".into())),
    }
}

fn check_arity(tuple: &[IntVec], m: usize) -> Result<()> {
    if tuple.len() != m {
        return Err(Error::dims(m, tuple.len()));
    }
    Ok(())
}

fn satisfies(s: &Structure, f: &Formula, tuple: &[IntVec], eps: Option<&BigRational>) -> Result<bool> {
    check_arity(tuple, f.core().free_arity())?;
    let args = Params::new();
    match (f, eps) {
        (Formula::NegPp(n), None) => Ok(!eval_pp(s, n.inner(), &args)?.contains_tuple(tuple)),
        (_, None) => satisfies_ppstar(s, &f.as_ppstar().expect("positive formula"), tuple, &args),
        (_, Some(eps)) => {
            let psi = match f.as_ppstar() {
                Some(p) if p.core().bound_arity() == 0 => p,
                _ => {
                    return Err(Error::Precondition(
                        "--eps applies only to quantifier-free pp* formulas".into(),
                    ))
                }
            };
            if !eval_pp(s, psi.core(), &args)?.contains_tuple(tuple) {
                return Ok(false);
            }
            for (v, p) in psi.f_constraints() {
                let Var::Free(i) = v else {
                    return Err(Error::Precondition("constraint on a bound variable".into()));
                };
                if !approx_member(&s.f(&tuple[*i]), &TorusCoset::point(p.clone()), eps)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

fn orbit_limit() -> Result<u64> {
    match std::env::var(ORBIT_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Precondition(format!("{ORBIT_ENV} must be a nonnegative integer, found '{v}'"))),
        Err(_) => Ok(DEFAULT_ORBIT_LIMIT),
    }
}

fn execute(cmd: &Command, s: &Structure, caps: Caps, eps: Option<&BigRational>) -> Result<Outcome> {
    let args = Params::new();
    match cmd {
        Command::Validate { .. } => ok(json!({
            "valid": true,
            "invariant_factors": s.invariant_factors().iter().map(int_json).collect::<Vec<_>>(),
        })),
        Command::Eval { formula, vars, .. } => {
            let phi = pp_only(parse_formula(s, formula, var_list(vars))?)?;
            let c = eval_pp(s, &phi, &args)?;
            ok(json!({ "arity": phi.free_arity(), "coset": coset_json(&c) }))
        }
        Command::Satisfies { formula, tuple, vars, .. } => {
            let f = parse_formula(s, formula, var_list(vars))?;
            let t = parse_tuple(s, tuple)?;
            ok(json!({ "satisfied": satisfies(s, &f, &t, eps)? }))
        }
        Command::Cover { target, by, vars, .. } => {
            let names = match var_list(vars) {
                Some(v) => v,
                None => {
                    let mut all = BTreeSet::new();
                    for text in std::iter::once(target).chain(by) {
                        all.extend(parse_formula(s, text, None)?.core().free().iter().cloned());
                    }
                    all.into_iter().collect()
                }
            };
            let eval = |text: &str| -> Result<DefinableCoset> {
                eval_pp(s, &pp_only(parse_formula(s, text, Some(names.clone()))?)?, &args)
            };
            let x = eval(target)?;
            let xs = by.iter().map(|t| eval(t)).collect::<Result<Vec<_>>>()?;
            ok(json!({ "covered": cover_decide(&x, &xs)? }))
        }
        Command::Kernel { .. } => ok(json!({ "kernel": coset_json(&kernel_and_fiber(s, None)?) })),
        Command::Fiber { point, .. } => {
            let coords = point
                .split(',')
                .map(|x| parse_rational(x.trim()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(Error::Precondition)?;
            let p = TorusPoint::new(coords);
            ok(json!({ "fiber": coset_json(&kernel_and_fiber(s, Some(&p))?) }))
        }
        Command::Type { tuple, .. } => {
            let t = parse_tuple(s, tuple)?;
            let basis = basis_generate(s, t.len(), caps)?;
            let fp = fingerprint(s, &t, &basis)?;
            let entries: Vec<Value> = basis
                .formulas
                .iter()
                .zip(&fp.entries)
                .map(|(b, e)| {
                    let value = match e {
                        Entry::Bottom => Value::Null,
                        Entry::Coset(c) => torus_coset_json(c),
                    };
                    json!({ "formula": render(&Formula::Pp(b.formula.clone())), "value": value })
                })
                .collect();
            ok(json!({
                "f_values": fp.f_values.iter().map(|p| p.to_strings()).collect::<Vec<_>>(),
                "entries": entries,
            }))
        }
        Command::Eqtype { tuple_a, tuple_b, .. } => {
            let a = parse_tuple(s, tuple_a)?;
            let b = parse_tuple(s, tuple_b)?;
            let basis = basis_generate(s, a.len(), caps)?;
            ok(match type_difference(s, &a, &b, &basis)? {
                None => json!({ "equal": true }),
                Some(w) => json!({ "equal": false, "witness": w }),
            })
        }
        Command::Extend {
            tuple_a,
            tuple_b,
            element,
            ..
        } => {
            let a = parse_tuple(s, tuple_a)?;
            let b = parse_tuple(s, tuple_b)?;
            let c = parse_element(s, element)?;
            let basis = basis_generate(s, a.len(), caps)?;
            let next = basis_generate(s, a.len() + 1, caps)?;
            let d = extend(s, &a, &b, &c, &basis, &next)?;
            ok(json!({ "element": vec_json(&d) }))
        }
        Command::Orbit { tuple_a, tuple_b, .. } => {
            let a = parse_tuple(s, tuple_a)?;
            let b = parse_tuple(s, tuple_b)?;
            check_arity(&b, a.len())?;
            let model = FiniteModel::new(s)?;
            let oracle = OrbitOracle::new(model.clone(), orbit_limit()?)?;
            let ea: Vec<_> = a.iter().map(|v| model.elem(v)).collect();
            let eb: Vec<_> = b.iter().map(|v| model.elem(v)).collect();
            let mut body = json!({
                "same_orbit": false,
                "group_order": oracle.group().order().to_string(),
            });
            if let Some(w) = oracle.witness(&ea, &eb) {
                body["same_orbit"] = json!(true);
                body["witness"] = Value::Array(
                    (0..model.moduli().len())
                        .map(|i| {
                            let g = model.generator(i);
                            json!({
                                "generator": vec_json(&model.vector(g)),
                                "image": vec_json(&model.vector(w.apply(&model, g))),
                            })
                        })
                        .collect(),
                );
            }
            ok(body)
        }
        Command::Check { common, arity, trials } => {
            let caps = match common.caps {
                Some(c) => c,
                None => fixpoint_caps(s, *arity, Caps::default())?,
            };
            let report = check_theorem(
                s,
                &CheckOptions {
                    arity: *arity,
                    caps,
                    trials: *trials,
                    seed: common.seed,
                    orbit_limit: orbit_limit()?,
                },
            )?;
            Ok(Outcome {
                code: if report.verdict == Verdict::Pass { 0 } else { 1 },
                body: report.to_json(),
            })
        }
    }
}

fn error_body(e: &Error) -> Value {
    let mut inner = Map::new();
    match e {
        Error::Schema { path, message } => {
            inner.insert("path".into(), json!(path));
            inner.insert("message".into(), json!(message));
        }
        Error::Parse { position, message } => {
            inner.insert("position".into(), json!(position));
            inner.insert("message".into(), json!(message));
        }
        Error::BasisIncomplete(_) => {
            inner.insert("kind".into(), json!("BASIS_INCOMPLETE"));
            inner.insert("message".into(), json!(e.to_string()));
        }
        Error::TypeMismatch(_) => {
            inner.insert("kind".into(), json!("TYPE_MISMATCH"));
            inner.insert("message".into(), json!(e.to_string()));
        }
        _ => {
            inner.insert("message".into(), json!(e.to_string()));
        }
    }
    json!({ "error": inner })
}

fn render_output(body: &Value, format: OutputFormat) -> String {
    match (format, body) {
        (OutputFormat::Text, Value::Object(map)) => {
            let width = map.keys().map(|k| k.chars().count()).max().unwrap_or(0);
            let mut out = String::new();
            for (k, v) in map {
                let text = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                out.push_str(&format!("{k:<width$}  {text}\n"));
            }
            out
        }
        _ => format!("{body}\n"),
    }
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (0, e.to_string()),
                _ => (2, render_output(&json!({ "error": { "message": e.to_string().trim_end() } }), OutputFormat::Json)),
            };
        }
    };
    let common = cli.command.common();
    let result = (|| -> Result<Outcome> {
        let eps = match &common.eps {
            None => None,
            Some(_) if !matches!(cli.command, Command::Satisfies { .. }) => {
                return Err(Error::Precondition("--eps applies only to satisfies".into()))
            }
            Some(text) => Some(parse_rational(text).map_err(Error::Precondition)?),
        };
        let s = Structure::load(&common.structure)?;
        execute(&cli.command, &s, common.caps.unwrap_or_default(), eps.as_ref())
    })();
    match result {
        Ok(o) => (o.code, render_output(&o.body, common.output)),
        Err(e) => {
            let code = if matches!(e, Error::BasisIncomplete(_)) { 1 } else { 2 };
            (code, render_output(&error_body(&e), common.output))
        }
    }
}

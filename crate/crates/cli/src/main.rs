use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use polybox::correlations::{self, polygon_settings};
use polybox::gpt::{Measurement, ModelSpec};
use polybox::q1::{self, Verdict};
use polybox::{house, io, polygon, selfdual, linalg, JointState};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "polybox", version, about = "Polygon and house-shaped probabilistic models")]
struct Cli {
    /// Tolerance for equality and inequality checks.
    #[arg(long, global = true, default_value_t = polybox::DEFAULT_TOL)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe and validate polygon(n).
    Polygon {
        #[arg(long)]
        n: usize,
        /// Emit the full model as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Brute-force CHSH maximum of the maximally entangled state.
    ChshMax(ChshArgs),
    /// Brute-force and analytic CHSH maxima side by side.
    Fig3 {
        #[arg(long, default_value_t = 3)]
        n_from: usize,
        #[arg(long, default_value_t = 32)]
        n_to: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chained functional with settings e_1..e_N on both sides.
    Chained {
        #[arg(long)]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long)]
        json: bool,
    },
    /// PR-box plus local decomposition of the even-n correlations.
    Distill {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        json: bool,
    },
    /// First-level moment matrix certificate.
    Q1Cert(Q1Args),
    /// Weak and strong self-duality.
    Selfdual {
        /// `polygon:N`, `house`, `classical:N` or a model JSON file.
        #[arg(long)]
        model: String,
        #[arg(long)]
        json: bool,
    },
    /// House model demonstrations.
    House {
        #[command(subcommand)]
        action: HouseAction,
    },
}

#[derive(Args)]
struct ChshArgs {
    #[arg(long, conflicts_with_all = ["n_from", "n_to"])]
    n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    n_from: usize,
    #[arg(long, default_value_t = 32)]
    n_to: usize,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Q1Args {
    #[arg(long)]
    model: String,
    /// `maxent` or a joint state JSON file.
    #[arg(long, default_value = "maxent")]
    state: String,
    /// Number of dichotomic settings per side, using effects 1..k.
    #[arg(long, default_value_t = 2)]
    settings: usize,
    /// Comma-separated 1-based effect labels for Alice, overriding --settings.
    #[arg(long, value_delimiter = ',')]
    alice: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    bob: Vec<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum HouseAction {
    /// Quadratic-functional violation on the extremal house state.
    Demo {
        #[arg(long)]
        json: bool,
    },
}

/// Round to 12 decimals, mapping `-0` to `0`.
fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn num(x: f64) -> String {
    format!("{:.12}", round12(x))
}

fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json!(round12(n.as_f64().expect("f64"))),
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn emit_json(mut v: Value) -> Result<String> {
    if let Value::Object(o) = &mut v {
        o.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    Ok(serde_json::to_string_pretty(&rounded(v))? + "\n")
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(linalg::matrix_to_rows(m))
}

fn write_out(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_polygon(n: usize, json_out: bool, tol: f64) -> Result<String> {
    let m = polygon::polygon(n)?;
    let report = m.validate_with_tol(tol);
    if !report.is_valid() {
        bail!("polygon({n}) failed validation: {report}");
    }
    if json_out {
        return emit_json(json!({ "model": serde_json::to_value(&m)?, "valid": true }));
    }
    let mut s = String::new();
    writeln!(s, "polygon({n}): r^2 = sec(pi/{n}) = {}", num(polygon::radius(n).powi(2)))?;
    for (label, w) in m.state_labels().iter().zip(m.extremal_states()) {
        writeln!(s, "{label} = ({})", w.coords().iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))?;
    }
    for (label, e) in m.effect_labels().iter().zip(m.extremal_effects()) {
        writeln!(s, "{label} = ({})", e.coords().iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))?;
    }
    writeln!(s, "valid")?;
    Ok(s)
}

fn range(n_from: usize, n_to: usize) -> Result<std::ops::RangeInclusive<usize>> {
    if n_from < 3 || n_to < n_from {
        bail!("need 3 <= n-from <= n-to, got {n_from}..{n_to}");
    }
    Ok(n_from..=n_to)
}

fn cmd_chsh_max(a: &ChshArgs) -> Result<String> {
    let ns: Vec<usize> = match a.n {
        Some(n) => vec![n],
        None => range(a.n_from, a.n_to)?.collect(),
    };
    let results: Vec<_> = ns
        .par_iter()
        .map(|&n| correlations::chsh_max_bruteforce(n).map(|o| (n, o)))
        .collect::<polybox::Result<_>>()?;
    if a.json {
        let rows: Vec<Value> = results
            .iter()
            .map(|(n, o)| json!({ "n": n, "value": o.value, "alice": [o.labels()[0], o.labels()[1]], "bob": [o.labels()[2], o.labels()[3]] }))
            .collect();
        return emit_json(json!({ "results": rows }));
    }
    let mut s = String::from("n,S_bruteforce,alice_0,alice_1,bob_0,bob_1\n");
    for (n, o) in &results {
        let [a0, a1, b0, b1] = o.labels();
        writeln!(s, "{n},{},{a0},{a1},{b0},{b1}", num(o.value))?;
    }
    Ok(s)
}

fn cmd_fig3(n_from: usize, n_to: usize) -> Result<String> {
    let rows: Vec<(usize, f64, f64)> = range(n_from, n_to)?
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&n| -> polybox::Result<_> {
            Ok((n, correlations::chsh_max_bruteforce(n)?.value, correlations::chsh_max_analytic(n)?.value))
        })
        .collect::<polybox::Result<_>>()?;
    let mut s = String::from("n,parity,S_bruteforce,S_analytic,residue_class\n");
    for (n, brute, analytic) in rows {
        let parity = if n % 2 == 0 { "even" } else { "odd" };
        writeln!(s, "{n},{parity},{},{},{}", num(brute), num(analytic), n % 8)?;
    }
    Ok(s)
}

fn cmd_chained(n: usize, big_n: usize, json_out: bool, tol: f64) -> Result<String> {
    if big_n < 2 || big_n > n {
        bail!("need 2 <= N <= n, got N = {big_n}, n = {n}");
    }
    let settings = polygon_settings(n, &(0..big_n).collect::<Vec<_>>())?;
    let t = correlations::correlations_from_state(&polygon::max_entangled(n)?, &settings, &settings, tol)?;
    let value = correlations::chained(&t, big_n)?;
    let local_bound = (2 * big_n - 2) as f64;
    if json_out {
        return emit_json(json!({
            "n": n, "N": big_n, "value": value, "local_bound": local_bound,
            "algebraic_max": 2 * big_n, "max_local_fraction": correlations::max_local_fraction(value, big_n),
        }));
    }
    Ok(format!("{:?}\n", round12(value)))
}

fn cmd_distill(n: usize, json_out: bool) -> Result<String> {
    let d = correlations::distill_decompose(n)?;
    if json_out {
        return emit_json(json!({
            "n": n, "epsilon": d.epsilon, "E10": d.e10,
            "table": serde_json::to_value(&d.table)?,
        }));
    }
    Ok(format!(
        "n = {n}\nepsilon = {}\nE10 = {}\nP = epsilon * P_PR + (1 - epsilon) * P_L\n",
        num(d.epsilon),
        num(d.e10)
    ))
}

fn settings_for(model: &ModelSpec, labels: &[usize], count: usize) -> Result<Vec<Measurement>> {
    let rays = model.ray_extremal_effects();
    let labels: Vec<usize> = if labels.is_empty() { (1..=count).collect() } else { labels.to_vec() };
    if labels.is_empty() {
        bail!("need at least one setting");
    }
    labels
        .iter()
        .map(|&l| {
            let e = rays.get(l.wrapping_sub(1)).with_context(|| format!("effect label {l} out of range 1..{}", rays.len()))?;
            Ok(Measurement::dichotomic(e, model)?)
        })
        .collect()
}

fn cmd_q1(a: &Q1Args, tol: f64) -> Result<String> {
    let state: JointState = if a.state == "maxent" {
        let n: usize = a
            .model
            .strip_prefix("polygon:")
            .and_then(|s| s.parse().ok())
            .context("--state maxent needs --model polygon:N")?;
        polygon::max_entangled(n)?
    } else {
        io::load_joint_state(&a.state)?
    };
    let model = io::resolve_model(&a.model)?;
    if **state.model_a() != model || **state.model_b() != model {
        bail!("state is not defined on model `{}`", a.model);
    }
    let ma = settings_for(&model, &a.alice, a.settings)?;
    let mb = settings_for(&model, &a.bob, a.settings)?;
    let table = correlations::correlations_from_state(&state, &ma, &mb, tol)?;
    let conditions = if ma.len() == 2 && mb.len() == 2 { Some(q1::q1_necessary_conditions(&table, tol)?) } else { None };
    let ip = state.is_inner_product_state(tol)?.is_inner_product();
    let cert = if ip { Some(q1::certificate_from_inner_product_state(&state, &ma, &mb, tol)?) } else { None };
    let verdict = q1::classify(&table, cert.as_ref(), tol)?;
    if a.json {
        return emit_json(json!({
            "gamma": cert.as_ref().map(|c| matrix_json(&c.gamma)),
            "spectrum": cert.as_ref().map(|c| c.spectrum.clone()),
            "verdict": verdict,
            "inner_product_state": ip,
            "necessary_conditions": conditions,
        }));
    }
    let mut s = String::new();
    writeln!(s, "inner product state: {ip}")?;
    if let Some(c) = &cert {
        writeln!(s, "spectrum: [{}]", c.spectrum.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))?;
    }
    if let Some(c) = conditions {
        writeln!(s, "CHSH max = {}, Uffink max = {}", num(c.chsh_max), num(c.uffink_max))?;
    }
    writeln!(s, "verdict: {verdict}")?;
    Ok(s)
}

fn cmd_selfdual(model: &str, json_out: bool, tol: f64) -> Result<String> {
    let m = io::resolve_model(model)?;
    let c = selfdual::classify(&m, tol);
    if json_out {
        let witnesses: Vec<Value> = c.witnesses.iter().map(matrix_json).collect();
        let strong_witness = c.strong_witness.map(|i| matrix_json(&c.witnesses[i]));
        return emit_json(json!({
            "model": m.name(), "weak": c.weak, "strong": c.strong,
            "strong_witness": strong_witness, "witnesses": witnesses,
        }));
    }
    let shared = Arc::new(m);
    let mut s = format!("{}: weak = {}, strong = {}, {} isomorphisms\n", shared.name(), c.weak, c.strong, c.witnesses.len());
    if let Some(i) = c.strong_witness {
        let state = selfdual::state_from_isomorphism(&c.witnesses[i], &shared, tol)?;
        let ip = state.is_inner_product_state(tol)?.is_inner_product();
        writeln!(s, "strong witness induces an inner product state: {ip}")?;
    }
    Ok(s)
}

fn cmd_house_demo(json_out: bool) -> Result<String> {
    let demo = house::house_uffink_demo()?;
    let state = house::house_joint_state();
    let tol = polybox::DEFAULT_TOL;
    let verdict = demo.conditions.verdict;
    if json_out {
        return emit_json(json!({
            "uffink": demo.uffink,
            "chsh": demo.chsh,
            "verdict": verdict,
            "extremal": state.is_extremal(tol)?,
            "active_constraint_rank": state.active_constraint_rank(tol),
            "inner_product_state": state.is_inner_product_state(tol)?.is_inner_product(),
            "table": serde_json::to_value(&demo.table)?,
        }));
    }
    let mut s = String::new();
    writeln!(s, "Uffink value: {:?}", round12(demo.uffink))?;
    writeln!(s, "CHSH value: {:?}", round12(demo.chsh))?;
    writeln!(s, "extremal: {}, inner product state: {}", state.is_extremal(tol)?, state.is_inner_product_state(tol)?.is_inner_product())?;
    match verdict {
        Verdict::NotInQ1 => writeln!(s, "not in Q1")?,
        other => writeln!(s, "verdict: {other}")?,
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    let tol = cli.tol;
    if !(tol.is_finite() && tol >= 0.0) {
        bail!("--tol must be a non-negative number");
    }
    let (text, out) = match &cli.command {
        Command::Polygon { n, json } => (cmd_polygon(*n, *json, tol)?, None),
        Command::ChshMax(a) => (cmd_chsh_max(a)?, a.out.as_ref()),
        Command::Fig3 { n_from, n_to, out } => (cmd_fig3(*n_from, *n_to)?, out.as_ref()),
        Command::Chained { n, big_n, json } => (cmd_chained(*n, *big_n, *json, tol)?, None),
        Command::Distill { n, json } => (cmd_distill(*n, *json)?, None),
        Command::Q1Cert(a) => (cmd_q1(a, tol)?, None),
        Command::Selfdual { model, json } => (cmd_selfdual(model, *json, tol)?, None),
        Command::House { action: HouseAction::Demo { json } } => (cmd_house_demo(*json)?, None),
    };
    write_out(&text, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

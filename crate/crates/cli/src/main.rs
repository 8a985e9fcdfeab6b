mod config;

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use sat_local::conditions::check_all;
use sat_local::formula::{parse_dimacs, Formula, VarId};
use sat_local::local_access::{Failure, QueryOutcome, SamplerConfig, SamplerContext};
use sat_local::marking::{validate_marking, Marker, MarkingParams};
use sat_local::tape::Seed;
use sat_local::verify::{run_suites, Suite, VerifyOptions};

use config::{parse_log2_d, parse_seed, Config};

#[derive(Parser, Debug)]
#[command(
    name = "satla",
    version,
    about = "Random local access to uniform satisfying assignments"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// Decimal integer or 64 hex characters.
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta1: Option<f64>,
    #[arg(long, global = true)]
    beta2: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Chain horizon T.
    #[arg(long, global = true)]
    horizon: Option<i64>,
    /// Cap on |R| per margin call.
    #[arg(long, global = true)]
    rcap: Option<usize>,
    /// Largest component enumerated exactly.
    #[arg(long, global = true)]
    caps: Option<usize>,
    /// Enumerate the whole reduced formula when a component is too large.
    #[arg(long, global = true)]
    fallback: bool,
    /// Include per-query traces.
    #[arg(long, global = true)]
    trace: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// key = value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value of one variable in the seed's sample.
    Sample {
        var: u32,
        /// DIMACS file; stdin when omitted or `-`.
        file: Option<PathBuf>,
    },
    /// Values of several variables (`1,4,5` or `all`).
    Batch { vars: String, file: Option<PathBuf> },
    /// The seed's marking with per-variable phase decisions.
    Marking { file: Option<PathBuf> },
    /// The component explored around an unmarked variable.
    Component { var: u32, file: Option<PathBuf> },
    /// Run acceptance suites; exits 2 when one fails.
    Verify {
        file: Option<PathBuf>,
        /// Suite names separated by commas, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Seeds for the joint distribution suite.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seeds_per_instance: Option<u64>,
    },
    /// Evaluate the parameter conditions for given k and d.
    Conditions {
        #[arg(long)]
        k: u64,
        /// A number or `2^x`.
        #[arg(long)]
        d: String,
    },
    /// Formula profile, sampler parameters and aggregate query statistics.
    Stats { file: Option<PathBuf> },
}

/// Sampler failure; maps to exit code 2.
#[derive(Debug)]
struct SamplerFailure(Failure);

impl std::fmt::Display for SamplerFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sampler failure: {}", self.0)
    }
}

impl std::error::Error for SamplerFailure {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, code)) => {
            println!("{out}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<SamplerFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

struct Settings {
    seed: Seed,
    config: Config,
    trace: bool,
    format: Format,
    fallback: bool,
}

impl Settings {
    fn from_args(g: &GlobalArgs) -> Result<Self> {
        let file = match &g.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let flags = Config {
            seed: g.seed.as_deref().map(parse_seed).transpose()?,
            alpha: g.alpha,
            beta1: g.beta1,
            beta2: g.beta2,
            c: None,
            theta: g.theta,
            horizon: g.horizon,
            rcap: g.rcap,
            caps: g.caps,
            fallback: g.fallback.then_some(true),
            format: g.format.map(|f| match f {
                Format::Json => "json".to_string(),
                Format::Text => "text".to_string(),
            }),
        };
        let config = file.overlay(flags);
        let format = match config.format.as_deref() {
            None | Some("json") => Format::Json,
            Some("text") => Format::Text,
            Some(other) => bail!("unknown format `{other}`"),
        };
        Ok(Settings {
            seed: config.seed.unwrap_or_else(|| Seed::from_u64(0)),
            trace: g.trace,
            format,
            fallback: config.fallback.unwrap_or(false),
            config,
        })
    }

    fn marking_params(&self, base: MarkingParams) -> MarkingParams {
        MarkingParams {
            alpha: self.config.alpha.unwrap_or(base.alpha),
            beta1: self.config.beta1.unwrap_or(base.beta1),
            beta2: self.config.beta2.unwrap_or(base.beta2),
            c: self.config.c.unwrap_or(base.c),
            ..base
        }
    }

    fn sampler_config(&self) -> SamplerConfig {
        let mut cfg = SamplerConfig {
            marking: self.marking_params(MarkingParams::desk()),
            theta: self.config.theta,
            horizon: self.config.horizon,
            r_cap: self.config.rcap,
            whole_formula_fallback: self.fallback,
            ..Default::default()
        };
        if let Some(c) = self.config.caps {
            cfg.caps.component = c;
        }
        cfg
    }

    fn context(&self, formula: Formula) -> Result<SamplerContext> {
        SamplerContext::new(formula, self.seed, self.sampler_config()).map_err(|e| anyhow!(SamplerFailure(e)))
    }
}

fn read_formula(file: Option<&PathBuf>) -> Result<Formula> {
    let text = match file {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            s
        }
    };
    Ok(parse_dimacs(&text)?)
}

fn var_in(formula: &Formula, var: u32) -> Result<VarId> {
    if var == 0 || var > formula.num_vars() {
        bail!(
            "VariableOutOfRange: variable {var} is not in 1..={}",
            formula.num_vars()
        );
    }
    Ok(VarId::new(var))
}

fn failure(e: Failure) -> anyhow::Error {
    anyhow!(SamplerFailure(e))
}

fn run(cli: Cli) -> Result<(String, u8)> {
    let s = Settings::from_args(&cli.global)?;
    let result = match &cli.command {
        Command::Sample { var, file } => cmd_sample(&s, file.as_ref(), *var),
        Command::Batch { vars, file } => cmd_batch(&s, file.as_ref(), vars),
        Command::Marking { file } => cmd_marking(&s, file.as_ref()),
        Command::Component { var, file } => cmd_component(&s, file.as_ref(), *var),
        Command::Verify {
            file,
            suite,
            samples,
            seeds_per_instance,
        } => cmd_verify(&s, file.as_ref(), suite, *samples, *seeds_per_instance),
        Command::Conditions { k, d } => cmd_conditions(&s, *k, d),
        Command::Stats { file } => cmd_stats(&s, file.as_ref()),
    };
    let (value, code) = match result {
        Ok(v) => (v, 0),
        Err(e) => match e.downcast::<Failed>() {
            Ok(Failed(v)) => (v, 2),
            Err(e) => return Err(e),
        },
    };
    Ok((render(&value, s.format)?, code))
}

/// Output of a run that completed with a failing verdict; exit code 2.
#[derive(Debug)]
struct Failed(Value);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("failed criteria")
    }
}

impl std::error::Error for Failed {}

fn render(value: &Value, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string(value)?),
        Format::Text => Ok(text_lines(value, "")),
    }
}

fn text_lines(value: &Value, prefix: &str) -> String {
    match value {
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                text_lines(v, &key)
            })
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("\n"),
        Value::Array(items) if items.iter().any(|v| v.is_object()) => items
            .iter()
            .enumerate()
            .map(|(i, v)| text_lines(v, &format!("{prefix}[{i}]")))
            .collect::<Vec<_>>()
            .join("\n"),
        other => format!("{prefix}: {other}"),
    }
}

fn outcome_json(o: &QueryOutcome, trace: bool) -> Value {
    let mut v = json!({
        "var": o.var.index(),
        "value": u8::from(o.value),
        "branch": o.branch,
        "stats": o.stats,
    });
    if !trace {
        if let Some(stats) = v.get_mut("stats").and_then(Value::as_object_mut) {
            stats.retain(|k, _| matches!(k.as_str(), "r_size" | "component_vars" | "cap_hits"));
        }
    }
    v
}

fn prepared_json(ctx: &SamplerContext) -> Result<Value> {
    let p = ctx.prepared().map_err(failure)?;
    Ok(json!({
        "marked": p.marked.len(),
        "theta": p.margin.theta,
        "theta_source": p.theta_source,
        "lower_bound": p.lower_bound,
        "horizon": p.margin.horizon,
        "r_cap": p.margin.r_cap,
    }))
}

fn cmd_sample(s: &Settings, file: Option<&PathBuf>, var: u32) -> Result<Value> {
    let formula = read_formula(file)?;
    let v = var_in(&formula, var)?;
    let ctx = s.context(formula)?;
    let o = ctx.sample_traced(v).map_err(failure)?;
    let mut out = outcome_json(&o, s.trace);
    if s.trace {
        out["trace"] = prepared_json(&ctx)?;
    }
    Ok(out)
}

fn cmd_batch(s: &Settings, file: Option<&PathBuf>, vars: &str) -> Result<Value> {
    let formula = read_formula(file)?;
    let wanted: Vec<VarId> = if vars.trim() == "all" {
        formula.vars().collect()
    } else {
        vars.split(',')
            .map(|t| {
                let n: u32 = t.trim().parse().map_err(|_| anyhow!("bad variable `{t}`"))?;
                var_in(&formula, n)
            })
            .collect::<Result<_>>()?
    };
    let ctx = s.context(formula)?;
    ctx.prepared().map_err(failure)?;
    let mut distinct = wanted.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let outcomes: Vec<(VarId, Result<QueryOutcome, Failure>)> =
        distinct.par_iter().map(|&v| (v, ctx.sample_traced(v))).collect();
    let mut results = Vec::new();
    let mut first_failure = None;
    for (v, r) in outcomes {
        match r {
            Ok(o) => results.push(outcome_json(&o, s.trace)),
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(json!({"var": v.index(), "error": e.to_string()}));
                }
            }
        }
    }
    let mut out = json!({ "results": results });
    if s.trace {
        out["trace"] = prepared_json(&ctx)?;
    }
    match first_failure {
        None => Ok(out),
        Some(f) => {
            out["failure"] = f;
            Err(anyhow!(Failed(out)))
        }
    }
}

fn cmd_marking(s: &Settings, file: Option<&PathBuf>) -> Result<Value> {
    let formula = read_formula(file)?;
    let params = s.marking_params(MarkingParams::desk());
    let marker = Marker::new(&formula, s.seed, params).map_err(|e| failure(e.into()))?;
    let marked = marker.full_marking().map_err(|e| failure(e.into()))?;
    let validation = validate_marking(&formula, &marked, params.alpha);
    let mut out = json!({
        "marked": marked.iter().map(|v| v.index()).collect::<Vec<_>>(),
        "valid": validation.valid,
    });
    if s.trace {
        let decisions: Vec<_> = marker.decide_all().into_iter().filter_map(Result::ok).collect();
        out["decisions"] = serde_json::to_value(decisions)?;
        out["clauses"] = serde_json::to_value(&validation.clauses)?;
    }
    Ok(out)
}

fn cmd_component(s: &Settings, file: Option<&PathBuf>, var: u32) -> Result<Value> {
    let formula = read_formula(file)?;
    let v = var_in(&formula, var)?;
    let ctx = s.context(formula)?;
    if ctx.is_marked(v).map_err(failure)? {
        return Ok(json!({"var": var, "marked": true}));
    }
    let r = ctx.conn(v).map_err(failure)?;
    let mut out = json!({
        "var": var,
        "marked": false,
        "component": r.component,
        "sigma": r.sigma.iter().map(|(w, b)| (w.index().to_string(), json!(u8::from(*b)))).collect::<serde_json::Map<_, _>>(),
        "visited_clauses": r.visited_clause_ids,
    });
    if s.trace {
        out["trace"] = prepared_json(&ctx)?;
    }
    Ok(out)
}

fn cmd_verify(
    s: &Settings,
    file: Option<&PathBuf>,
    suite: &str,
    samples: Option<u64>,
    seeds_per_instance: Option<u64>,
) -> Result<Value> {
    let suites: Vec<Suite> = if suite.trim() == "all" {
        Suite::ALL.to_vec()
    } else {
        suite
            .split(',')
            .map(|name| Suite::from_name(name.trim()).ok_or_else(|| anyhow!("unknown suite `{name}`")))
            .collect::<Result<_>>()?
    };
    let mut opts = VerifyOptions {
        marking: s.marking_params(MarkingParams::desk()),
        ..Default::default()
    };
    if let Some(f) = file {
        opts.formulas = Some(vec![read_formula(Some(f))?]);
    }
    if let Some(n) = samples {
        opts.tv_samples = n;
    }
    if let Some(n) = seeds_per_instance {
        opts.seeds_per_instance = n;
    }
    let report = run_suites(&suites, &opts);
    let out = serde_json::to_value(&report)?;
    if report.all_pass {
        Ok(out)
    } else {
        Err(anyhow!(Failed(out)))
    }
}

fn cmd_conditions(s: &Settings, k: u64, d: &str) -> Result<Value> {
    let log2_d = parse_log2_d(d)?;
    let params = s.marking_params(MarkingParams::asymptotic());
    Ok(serde_json::to_value(check_all(k, log2_d, &params))?)
}

#[derive(Serialize, Default)]
struct Aggregate {
    queries: usize,
    failures: usize,
    marked: usize,
    mean_r_size: f64,
    max_r_size: usize,
    cap_hits: usize,
    max_component_vars: usize,
    max_component_clauses: usize,
}

fn cmd_stats(s: &Settings, file: Option<&PathBuf>) -> Result<Value> {
    let formula = read_formula(file)?;
    let profile = formula.degree_profile();
    let n = formula.num_vars();
    let clauses = formula.num_clauses();
    let ctx = s.context(formula)?;
    let prepared = prepared_json(&ctx)?;
    let vars: Vec<VarId> = ctx.formula().vars().collect();
    let outcomes: Vec<Result<QueryOutcome, Failure>> =
        vars.par_iter().map(|&v| ctx.sample_traced(v)).collect();
    let mut agg = Aggregate::default();
    let mut r_total = 0usize;
    let mut r_count = 0usize;
    for o in &outcomes {
        agg.queries += 1;
        match o {
            Ok(o) => {
                if o.stats.margin_calls > 0 {
                    r_total += o.stats.r_size;
                    r_count += 1;
                }
                if o.branch == sat_local::local_access::Branch::Marked {
                    agg.marked += 1;
                }
                agg.max_r_size = agg.max_r_size.max(o.stats.r_size);
                agg.cap_hits += o.stats.cap_hits;
                agg.max_component_vars = agg.max_component_vars.max(o.stats.component_vars.unwrap_or(0));
                agg.max_component_clauses = agg
                    .max_component_clauses
                    .max(o.stats.component_clauses.unwrap_or(0));
            }
            Err(_) => agg.failures += 1,
        }
    }
    if r_count > 0 {
        agg.mean_r_size = r_total as f64 / r_count as f64;
    }
    Ok(json!({
        "n": n,
        "clauses": clauses,
        "k": profile.k_max,
        "d": profile.d,
        "delta": profile.delta,
        "sampler": prepared,
        "queries": agg,
    }))
}

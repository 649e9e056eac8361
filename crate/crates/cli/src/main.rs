//! `ccs`: check, compose, generate obligations for and simulate component
//! models written in the `.ccs` format.
//!
//! Exit codes: 0 on success, 1 when a gate, check or simulation fails, 2 on
//! usage, input or parse errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccs_core::ast::format_rational;
use ccs_core::check::{check_bounded, BoundedConfig, DomainBox, Verdict};
use ccs_core::composition::CostModel;
use ccs_core::dsl::{self, DslError, Elaborated, Model, Value};
use ccs_core::export;
use ccs_core::obligation::{self, ProofObligation, Status, Theorem};
use ccs_core::par::Execution;
use ccs_core::semantics::{must_bound_vars, StaticSemantics};
use ccs_core::sim::{self, BatchConfig, InitSpec, Simulator, Strategy};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

#[derive(Parser)]
#[command(name = "ccs", version, about = "Component-based hybrid system models: gates, obligations, simulation")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Load a model, apply every construction gate and report the results.
    Check {
        /// Model file.
        file: PathBuf,
        /// Also print FV/BV/MBV of every declared component.
        #[arg(long)]
        vars: bool,
        /// JSON map from controller name to resource label.
        #[arg(long)]
        cost_model: Option<PathBuf>,
    },
    /// Write a system as one plant under a parallel of controllers.
    Compose {
        /// Model file.
        file: PathBuf,
        /// System to compose (default: the last one declared).
        #[arg(long)]
        system: Option<String>,
        /// JSON map from controller name to resource label.
        #[arg(long)]
        cost_model: Option<PathBuf>,
        /// Write the model here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate the proof obligations of a composition.
    Obligations {
        /// Model file.
        file: PathBuf,
        /// System to use (default: the last one declared).
        #[arg(long)]
        system: Option<String>,
        /// auto, thm1, thm2, thm3, thm4 or cor1.
        #[arg(long, default_value = "auto")]
        theorem: String,
        /// JSON map from controller name to resource label.
        #[arg(long)]
        cost_model: Option<PathBuf>,
        /// Write the obligations here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Falsify every obligation on a grid before writing it.
        #[arg(long)]
        check: bool,
        /// JSON map from variable to a value or a [lo, hi] interval.
        #[arg(long = "box", requires = "check")]
        domain_box: Option<PathBuf>,
        /// Samples per free variable.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        /// Loop unrolling depth.
        #[arg(long, default_value_t = 2)]
        unroll: usize,
        /// Run on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a batch of seeded schedules and monitor the guarantees.
    Simulate {
        /// Model file.
        file: PathBuf,
        /// System to simulate (default: the last one declared).
        #[arg(long)]
        system: Option<String>,
        /// Number of runs.
        #[arg(long, default_value_t = 500)]
        schedules: usize,
        /// Base seed; run i uses a seed derived from it and i.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Simulated time per run.
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        /// JSON map overriding the model's scenario.
        #[arg(long)]
        init: Option<PathBuf>,
        /// random, lazy or round-robin.
        #[arg(long, default_value = "random")]
        strategy: String,
        /// Scheduler steps per run before it is cut off.
        #[arg(long, default_value_t = 1_000_000)]
        max_iterations: usize,
        /// JSON map from controller name to resource label.
        #[arg(long)]
        cost_model: Option<PathBuf>,
        /// `*.csv` receives the trace of the first schedule, anything else the summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Write one KeYmaera X archive per obligation.
    ExportKyx {
        /// Obligations as written by `ccs obligations`.
        obligations: PathBuf,
        /// Directory to create the archives in.
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// A failed command: exit code plus what to report.
struct Failure {
    code: u8,
    message: String,
    report: Option<Json>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
            report: None,
        }
    }
}

type Outcome = Result<Output, Failure>;

/// A successful or verification-failing run: what to print and the exit code.
struct Output {
    json: Json,
    text: String,
    code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match run(cli.command) {
        Ok(out) => {
            match format {
                Format::Json => say(&format!("{}\n", serde_json::to_string_pretty(&out.json).expect("json"))),
                Format::Text => say(&out.text),
            }
            ExitCode::from(out.code)
        }
        Err(f) => {
            if let Some(report) = &f.report {
                match format {
                    Format::Json => say(&format!("{}\n", serde_json::to_string_pretty(report).expect("json"))),
                    Format::Text => say(&format!("FAIL {}\n", f.message)),
                }
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Write to stdout, tolerating a closed pipe.
fn say(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Check {
            file,
            vars,
            cost_model,
        } => check(&file, vars, cost_model.as_deref()),
        Command::Compose {
            file,
            system,
            cost_model,
            output,
        } => compose(&file, system.as_deref(), cost_model.as_deref(), output.as_deref()),
        Command::Obligations {
            file,
            system,
            theorem,
            cost_model,
            output,
            check,
            domain_box,
            grid,
            unroll,
            sequential,
        } => {
            let checking = check.then(|| CheckOptions {
                domain_box,
                cfg: BoundedConfig::default()
                    .with_grid(grid)
                    .with_unroll(unroll)
                    .with_execution(execution(sequential)),
            });
            obligations(
                &file,
                system.as_deref(),
                &theorem,
                cost_model.as_deref(),
                output.as_deref(),
                checking,
            )
        }
        Command::Simulate {
            file,
            system,
            schedules,
            seed,
            horizon,
            init,
            strategy,
            max_iterations,
            cost_model,
            out,
            sequential,
        } => {
            let strategy = Strategy::parse(&strategy)
                .ok_or_else(|| Failure::usage(format!("unknown strategy `{strategy}`")))?;
            let mut cfg = BatchConfig::new(schedules, seed, horizon);
            cfg.strategy = strategy;
            cfg.max_iterations = max_iterations;
            cfg.execution = execution(sequential);
            simulate(
                &file,
                system.as_deref(),
                &cfg,
                init.as_deref(),
                cost_model.as_deref(),
                out.as_deref(),
            )
        }
        Command::ExportKyx {
            obligations,
            output,
        } => export_kyx(&obligations, &output),
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn read_json(path: &Path) -> Result<Json, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_model(file: &Path, cost_model: Option<&Path>) -> Result<Model, Failure> {
    let cm: Option<CostModel> = match cost_model {
        None => None,
        Some(p) => Some(
            serde_json::from_value(read_json(p)?)
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?,
        ),
    };
    let text = fs::read_to_string(file)
        .map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    dsl::parse_model(&text)
        .and_then(|m| dsl::elaborate(m, cm.as_ref()))
        .map_err(|e| load_failure(file, e))
}

/// Gate violations exit with 1 and a report; everything else is an input error.
fn load_failure(file: &Path, e: DslError) -> Failure {
    let message = format!("{}:{e}", file.display());
    match &e {
        DslError::Component { pos, source } => {
            let violations = match source {
                ccs_core::component::ComponentError::Interference(v) => {
                    serde_json::to_value(v).expect("json")
                }
                _ => Json::Array(Vec::new()),
            };
            Failure {
                code: 1,
                report: Some(json!({
                    "file": file.display().to_string(),
                    "passed": false,
                    "error": {
                        "line": pos.line,
                        "col": pos.col,
                        "message": source.to_string(),
                        "violations": violations,
                    },
                })),
                message,
            }
        }
        _ => Failure::usage(message),
    }
}

fn pick<'a>(model: &'a Model, system: Option<&'a str>) -> Result<(&'a str, &'a Elaborated), Failure> {
    match system {
        Some(name) => model
            .system(name)
            .map(|e| (name, e))
            .ok_or_else(|| Failure::usage(format!("no system named `{name}`"))),
        None => model
            .main_system()
            .ok_or_else(|| Failure::usage("the model declares no system")),
    }
}

fn check(file: &Path, vars: bool, cost_model: Option<&Path>) -> Outcome {
    let model = load_model(file, cost_model)?;
    let mut text = String::new();
    let mut systems = Vec::new();
    let mut passed = true;
    for (name, e) in &model.systems {
        let gates = e.gates();
        passed &= gates.iter().all(|g| g.passed());
        let mut entry = json!({
            "name": name,
            "kind": e.value.kind().trim_start_matches("a "),
            "gates": gates,
        });
        let mut line = format!("system {name}: {} gate(s) passed", gates.len());
        if let Value::Mccs(s) = &e.value {
            entry["reactivity"] = json!(format_rational(&s.reactivity()));
            entry["controllability"] = json!(format_rational(&s.controllability()));
            line.push_str(&format!(
                ", reactivity {} <= controllability {}",
                format_rational(&s.reactivity()),
                format_rational(&s.controllability())
            ));
        }
        for g in &gates {
            for w in &g.warnings {
                line.push_str(&format!("\n  warning: {w}"));
            }
        }
        text.push_str(&line);
        text.push('\n');
        systems.push(entry);
    }
    let mut report = json!({
        "file": file.display().to_string(),
        "passed": passed,
        "systems": systems,
    });
    if vars {
        let mut components = Vec::new();
        for rc in &model.controllers {
            let p = rc.to_program();
            components.push(json!({
                "name": rc.name,
                "kind": "controller",
                "reactivity": format_rational(&rc.reactivity),
                "timestamp": rc.timestamp,
                "program": p.to_string(),
                "fv": p.free_vars(),
                "bv": p.bound_vars(),
                "mbv": must_bound_vars(&p),
            }));
        }
        for pl in &model.plants {
            let p = pl.to_program();
            components.push(json!({
                "name": pl.name,
                "kind": "plant",
                "controllability": format_rational(&pl.controllability),
                "program": p.to_string(),
                "fv": p.free_vars(),
                "bv": p.bound_vars(),
                "mbv": must_bound_vars(&p),
            }));
        }
        for c in &components {
            text.push_str(&format!(
                "{} {}: fv {} bv {} mbv {}\n",
                c["kind"].as_str().unwrap_or_default(),
                c["name"].as_str().unwrap_or_default(),
                c["fv"],
                c["bv"],
                c["mbv"]
            ));
        }
        report["components"] = Json::Array(components);
    }
    Ok(Output {
        json: report,
        text,
        code: if passed { 0 } else { 1 },
    })
}

fn compose(file: &Path, system: Option<&str>, cost_model: Option<&Path>, output: Option<&Path>) -> Outcome {
    let model = load_model(file, cost_model)?;
    let (name, _) = pick(&model, system)?;
    let flat = model
        .flatten(name)
        .ok_or_else(|| Failure::usage(format!("`{name}` is not a controller-plant system")))?;
    let text = dsl::print::model(&flat);
    if let Some(path) = output {
        write(path, &text)?;
    }
    Ok(Output {
        json: json!({ "system": name, "model": text }),
        text,
        code: 0,
    })
}

struct CheckOptions {
    domain_box: Option<PathBuf>,
    cfg: BoundedConfig,
}

fn parse_box(v: &Json) -> Result<DomainBox, Failure> {
    let obj = v
        .as_object()
        .ok_or_else(|| Failure::usage("box: expected an object"))?;
    let mut b = DomainBox::new();
    for (k, v) in obj {
        let num = |v: &Json| v.as_f64().ok_or_else(|| Failure::usage(format!("box: `{k}` is not a number")));
        b = match v {
            Json::Array(a) if a.len() == 2 => b.interval(k, num(&a[0])?, num(&a[1])?),
            _ => b.point(k, num(v)?),
        };
    }
    Ok(b)
}

fn obligations(
    file: &Path,
    system: Option<&str>,
    theorem: &str,
    cost_model: Option<&Path>,
    output: Option<&Path>,
    checking: Option<CheckOptions>,
) -> Outcome {
    let theorem = match theorem {
        "auto" => None,
        t => Some(Theorem::parse(t).ok_or_else(|| Failure::usage(format!("unknown theorem `{t}`")))?),
    };
    let model = load_model(file, cost_model)?;
    let (name, e) = pick(&model, system)?;
    let env = match &e.value {
        Value::Mccs(s) => s.environment.clone(),
        _ => model.environment.clone(),
    };
    let mut obs = obligation::generate(e, theorem, &model.cost_model, &env).map_err(|err| Failure {
        code: 1,
        message: format!("{name}: {err}"),
        report: Some(json!({ "system": name, "error": err.to_string() })),
    })?;
    let mut verdicts = Vec::new();
    if let Some(opts) = checking {
        let b = match &opts.domain_box {
            Some(p) => parse_box(&read_json(p)?)?,
            None => DomainBox::new(),
        }
        .with_constants(&env);
        for o in obs.iter_mut() {
            let v = check_bounded(o, &b, &opts.cfg)
                .map_err(|err| Failure::usage(format!("{}: {err}", o.id)))?;
            o.status = v.status();
            verdicts.push((o.id.clone(), v));
        }
    }
    let json = serde_json::to_value(&obs).expect("json");
    if let Some(path) = output {
        write(path, &serde_json::to_string_pretty(&json).expect("json"))?;
    }
    let mut text = String::new();
    for o in &obs {
        text.push_str(&format!(
            "{} [{}] {}: {}\n",
            o.id,
            serde_json::to_value(o.status).expect("json").as_str().unwrap_or_default(),
            serde_json::to_value(o.hint).expect("json").as_str().unwrap_or_default(),
            o.goal
        ));
    }
    let failed = obs.iter().any(|o| o.status == Status::Counterexample);
    let json = if verdicts.is_empty() {
        json
    } else {
        let details: Vec<Json> = verdicts
            .iter()
            .filter(|(_, v)| matches!(v, Verdict::Counterexample { .. }))
            .map(|(id, v)| json!({ "id": id, "verdict": v }))
            .collect();
        for d in &details {
            text.push_str(&format!("counterexample {}: {}\n", d["id"], d["verdict"]["witness"]));
        }
        json!({ "obligations": json, "counterexamples": details })
    };
    Ok(Output {
        json,
        text,
        code: if failed { 1 } else { 0 },
    })
}

fn simulate(
    file: &Path,
    system: Option<&str>,
    cfg: &BatchConfig,
    init: Option<&Path>,
    cost_model: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let model = load_model(file, cost_model)?;
    let (name, e) = pick(&model, system)?;
    let Value::Mccs(s) = &e.value else {
        return Err(Failure::usage(format!("`{name}` is not a controller-plant system")));
    };
    let sim_err = |err: sim::SimError| Failure::usage(format!("{name}: {err}"));
    let sim = Simulator::new(s).map_err(sim_err)?;
    let mut spec = InitSpec::new(model.scenario.clone());
    if let Some(p) = init {
        spec = spec.overlay(&InitSpec::from_json(&read_json(p)?).map_err(sim_err)?);
    }
    let summary = sim::run_batch(&sim, &spec, cfg).map_err(sim_err)?;
    let json = serde_json::to_value(&summary).expect("json");
    if let Some(path) = out {
        if path.extension().is_some_and(|x| x == "csv") {
            let trace = sim::batch_member(&sim, &spec, cfg, 0).map_err(sim_err)?;
            write(path, &trace.to_csv())?;
        } else {
            write(path, &serde_json::to_string_pretty(&json).expect("json"))?;
        }
    }
    let mut text = format!(
        "{name}: {} run(s), {} with violations, {} violation(s), {} truncated\n",
        summary.runs, summary.runs_with_violations, summary.violations, summary.truncated_runs
    );
    for (m, n) in &summary.per_monitor {
        text.push_str(&format!("  {m}: {n}\n"));
    }
    Ok(Output {
        json,
        text,
        code: if summary.violations == 0 { 0 } else { 1 },
    })
}

fn export_kyx(obligations: &Path, output: &Path) -> Outcome {
    let obs: Vec<ProofObligation> = serde_json::from_value(read_json(obligations)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", obligations.display())))?;
    fs::create_dir_all(output).map_err(|e| Failure::usage(format!("{}: {e}", output.display())))?;
    let mut files = Vec::new();
    for o in &obs {
        let path = output.join(format!("{}.kyx", o.id));
        write(&path, &export::entry(o))?;
        files.push(path.display().to_string());
    }
    Ok(Output {
        text: files.iter().map(|f| format!("{f}\n")).collect(),
        json: json!({ "written": files }),
        code: 0,
    })
}

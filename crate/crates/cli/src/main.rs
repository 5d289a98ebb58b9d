//! `odd-assure`: hazard rating, cause trees, requirement closure and
//! scenario runs from the command line.
//!
//! Exit status: 0 success or PASS, 1 FAIL verdicts or closure findings,
//! 2 usage errors, 3 input or format errors. Results go to stdout or the
//! named output file, diagnostics to stderr.

mod overrides;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use odd_assure::cause_tree::{parse_tree, ValidationTarget};
use odd_assure::fixtures;
use odd_assure::requirements::{
    derive_from_property, trace::closure_summary, trace::findings_jsonl, trace_check, Property,
    Quantity, RequirementRegistry, TraceGraph,
};
use odd_assure::risk_model::{
    determine_asil, evaluate_registry, parse_registry, rra_required, Controllability, Exposure,
    GateMode, Severity,
};
use odd_assure::scenario_sim::{
    compare_pair, evaluate_targets, generate, metrics, parse_trace, replay, write_trace,
    MetricsReport, RunRecord, ScenarioSpec, Thresholds, Verdict,
};
use odd_assure::MonitorConfig;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "odd-assure",
    version,
    about = "Safety assurance toolkit for AI-based ODD detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ASIL for one S/E/C rating.
    Asil {
        #[arg(long)]
        s: Severity,
        #[arg(long)]
        e: Exposure,
        #[arg(long)]
        c: Controllability,
    },
    /// Whether a residual risk assessment is required.
    Gate {
        #[arg(long)]
        s: Severity,
        #[arg(long)]
        c: Controllability,
        /// `or` (either rating above zero) or `and` (both).
        #[arg(long, default_value = "or")]
        mode: GateMode,
    },
    /// Evaluate a hazard registry file.
    Hara {
        registry: PathBuf,
        #[arg(long, default_value = "or")]
        mode: GateMode,
        #[arg(long)]
        json: bool,
    },
    /// Minimal cut sets of a cause tree.
    CtreeCutsets { tree: PathBuf },
    /// Allocate a global acceptance criterion over a tree's scenario classes.
    CtreeAllocate {
        tree: PathBuf,
        /// Events per km.
        #[arg(long, default_value_t = fixtures::ACCEPTANCE_CRITERION)]
        criterion: f64,
        #[arg(long, default_value_t = fixtures::TARGET_CONFIDENCE)]
        confidence: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Derive a requirement from an AI safety property.
    Derive {
        /// Requirement registry holding the baseline.
        registry: PathBuf,
        #[arg(long)]
        property: Property,
        /// Template parameter, e.g. `accuracy=">= 99 %"`.
        #[arg(long = "param", value_name = "NAME=QUANTITY")]
        params: Vec<String>,
    },
    /// Closure check of a trace graph (default: the bundled case study).
    TraceCheck {
        graph: Option<PathBuf>,
        #[arg(long, default_value = "or")]
        mode: GateMode,
        /// Drop a requirement and its links before checking.
        #[arg(long, value_name = "REQ_ID")]
        without: Vec<String>,
        /// Write findings as JSON lines.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Generate a trace from a scenario spec.
    Gen {
        spec: PathBuf,
        /// Overrides the spec's seed; required so every trace is reproducible.
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Replay a trace through the monitor.
    Run {
        trace: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Requirement metrics of a run against its trace.
    Metrics {
        run: PathBuf,
        trace: PathBuf,
        /// Metrics report of the unperturbed twin, for the degradation check.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        /// Requirement registry supplying the thresholds.
        #[arg(long)]
        requirements: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Residual-risk verdict of metrics reports against validation targets.
    Verdict {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Targets file from `ctree-allocate` (default: bundled case study).
        #[arg(long)]
        targets: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Output {
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// Monitor config file.
    #[arg(long, env = "ODD_ASSURE_CONFIG")]
    config: Option<PathBuf>,
    /// Override one config field, e.g. `--set confidence_floor=0.7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

/// Whether the command's result is clean (exit 0) or reports failures.
enum Status {
    Clean,
    Failing,
}

type Outcome = Result<Status, Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn check_writable(path: &Path, force: bool) -> Result<(), Failure> {
    if path.exists() && !force {
        return Err(usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn emit(out: &Output, text: &str) -> Result<(), Failure> {
    match &out.output {
        Some(path) => {
            check_writable(path, out.force)?;
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TargetsFile {
    target: Vec<ValidationTarget<f64>>,
}

fn load_config(args: &ConfigArgs) -> Result<MonitorConfig, Failure> {
    let base = match &args.config {
        Some(path) => toml::from_str::<MonitorConfig>(&read(path)?)
            .with_context(|| format!("bad monitor config {}", path.display()))?,
        None => MonitorConfig::default(),
    };
    base.validate()
        .map_err(|e| Failure::Input(anyhow!("monitor config: {e}")))?;
    overrides::apply(&base, &args.set).map_err(Failure::Usage)
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, Quantity>, Failure> {
    raw.iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| usage(format!("--param '{p}' is not NAME=QUANTITY")))?;
            let q: Quantity = v.parse().map_err(|e| usage(format!("--param {k}: {e}")))?;
            Ok((k.trim().to_string(), q))
        })
        .collect()
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Asil { s, e, c } => {
            println!("{}", determine_asil(s, e, c));
            Ok(Status::Clean)
        }
        Command::Gate { s, c, mode } => {
            let rra = rra_required(s, c, mode);
            println!(
                "{}",
                if rra {
                    "RRA_REQUIRED"
                } else {
                    "RRA_NOT_REQUIRED"
                }
            );
            Ok(Status::Clean)
        }
        Command::Hara {
            registry,
            mode,
            json,
        } => {
            let records = parse_registry(&read(&registry)?)
                .with_context(|| format!("bad hazard registry {}", registry.display()))?;
            let verdicts = evaluate_registry(&records, mode).map_err(|e| anyhow!(e))?;
            for v in &verdicts {
                if json {
                    println!("{}", serde_json::to_string(v).expect("verdict serializes"));
                } else {
                    println!("{v}");
                }
            }
            Ok(Status::Clean)
        }
        Command::CtreeCutsets { tree } => {
            let tree = parse_tree::<f64>(&read(&tree)?)
                .with_context(|| format!("bad cause tree {}", tree.display()))?;
            let sets = tree.minimal_cut_sets().map_err(|e| anyhow!(e))?;
            for set in sets {
                let ids: Vec<&str> = set.iter().map(String::as_str).collect();
                println!("{{{}}}", ids.join(", "));
            }
            Ok(Status::Clean)
        }
        Command::CtreeAllocate {
            tree,
            criterion,
            confidence,
            out,
        } => {
            let tree = parse_tree::<f64>(&read(&tree)?)
                .with_context(|| format!("bad cause tree {}", tree.display()))?;
            let target = tree
                .allocate_targets(criterion, confidence)
                .map_err(|e| usage(e.to_string()))?;
            let text = toml::to_string(&TargetsFile { target }).expect("targets serialize");
            emit(&out, &text)?;
            Ok(Status::Clean)
        }
        Command::Derive {
            registry,
            property,
            params,
        } => {
            let reg = RequirementRegistry::from_toml(&read(&registry)?)
                .with_context(|| format!("bad requirement registry {}", registry.display()))?;
            let baseline = reg.baseline().expect("registry holds its baseline");
            let params = parse_params(&params)?;
            let req = derive_from_property(baseline, property, &params)
                .map_err(|e| usage(e.to_string()))?;
            let file = toml::to_string(&BTreeMap::from([("requirement", [req])]))
                .expect("requirement serializes");
            print!("{file}");
            Ok(Status::Clean)
        }
        Command::TraceCheck {
            graph,
            mode,
            without,
            jsonl,
            force,
        } => {
            let mut g = match &graph {
                Some(path) => TraceGraph::from_toml(&read(path)?)
                    .with_context(|| format!("bad trace graph {}", path.display()))?,
                None => fixtures::trace_graph(),
            };
            for id in &without {
                if g.requirements.get(id).is_none() {
                    return Err(usage(format!("--without {id}: no such requirement")));
                }
                g = g.without_requirement(id);
            }
            if let Some(path) = &jsonl {
                check_writable(path, force)?;
            }
            let findings = trace_check(&g, mode).map_err(|e| anyhow!(e))?;
            if let Some(path) = &jsonl {
                fs::write(path, findings_jsonl(&findings))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            print!("{}", closure_summary(&g, mode, &findings));
            Ok(if findings.is_empty() {
                Status::Clean
            } else {
                Status::Failing
            })
        }
        Command::Gen { spec, seed, out } => {
            let mut s = ScenarioSpec::from_toml(&read(&spec)?)
                .with_context(|| format!("bad scenario spec {}", spec.display()))?;
            s.seed = seed;
            let trace = generate(&s).map_err(|e| anyhow!(e))?;
            emit(&out, &write_trace(&trace))?;
            Ok(Status::Clean)
        }
        Command::Run { trace, config, out } => {
            let cfg = load_config(&config)?;
            let t = parse_trace(&read(&trace)?)
                .with_context(|| format!("bad trace {}", trace.display()))?;
            let run = replay(&t, &cfg).map_err(|e| anyhow!(e))?;
            emit(&out, &run.to_jsonl())?;
            Ok(Status::Clean)
        }
        Command::Metrics {
            run,
            trace,
            baseline,
            confidence,
            requirements,
            out,
        } => {
            if !(confidence > 0.0 && confidence < 1.0) {
                return Err(usage("--confidence must lie strictly between 0 and 1"));
            }
            let th = match &requirements {
                Some(path) => Thresholds::from_requirements(
                    &RequirementRegistry::from_toml(&read(path)?)
                        .with_context(|| format!("bad requirement registry {}", path.display()))?,
                ),
                None => Thresholds::default(),
            };
            let r = RunRecord::from_jsonl(&read(&run)?)
                .with_context(|| format!("bad run record {}", run.display()))?;
            let t = parse_trace(&read(&trace)?)
                .with_context(|| format!("bad trace {}", trace.display()))?;
            let mut report = metrics(&r, &t, confidence, &th).map_err(|e| anyhow!(e))?;
            let mut summary = String::new();
            if let Some(path) = &baseline {
                let base: MetricsReport = serde_json::from_str(&read(path)?)
                    .with_context(|| format!("bad metrics report {}", path.display()))?;
                let d = compare_pair(&base, &report, &th).map_err(|e| anyhow!(e))?;
                report.verdicts.insert("REQ-2".into(), d.verdict);
                summary = format!(
                    "degradation vs {}: {:.3} pp -> {}\n",
                    d.baseline, d.degradation_pp, d.verdict
                );
            }
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            match &out.output {
                Some(_) => {
                    emit(&out, &json)?;
                    print!("{}{summary}", report.summary());
                }
                None => print!("{json}"),
            }
            Ok(if report.verdicts.values().any(|v| *v == Verdict::Fail) {
                Status::Failing
            } else {
                Status::Clean
            })
        }
        Command::Verdict { reports, targets } => {
            let targets = match &targets {
                Some(path) => {
                    toml::from_str::<TargetsFile>(&read(path)?)
                        .with_context(|| format!("bad targets file {}", path.display()))?
                        .target
                }
                None => fixtures::trace_graph().targets.into_values().collect(),
            };
            let reports = reports
                .iter()
                .map(|p| {
                    serde_json::from_str::<MetricsReport>(&read(p)?)
                        .with_context(|| format!("bad metrics report {}", p.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let v = evaluate_targets(&reports, &targets).map_err(|e| anyhow!(e))?;
            print!("{}", v.summary());
            Ok(if v.aggregate == Verdict::Pass {
                Status::Clean
            } else {
                Status::Failing
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Failing) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

//! Batch command-line surface over the core library: generation, bound
//! certification, quantum evaluation, visibility, facet checking, and
//! scenario optimization, with table and JSON output.
//!
//! Exit codes: 0 success, 2 invalid arguments or malformed inputs,
//! 3 resource-limit (enumeration cap), 4 internal inconsistency.

mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use svetlichny_core::behaviors::{self, EnumerationCaps, Partition};
use svetlichny_core::bell_expr::BellExpression;
use svetlichny_core::polytope::{self, PolytopeOptions};
use svetlichny_core::quantum::{self, QuantumScenario, StateFamily};
use svetlichny_core::Error as CoreError;

use report::{expression_table, facet_table, BoundReport, QuantumReport};

#[derive(Parser)]
#[command(
    name = "svetlichny",
    version,
    about = "Generalized Svetlichny-CGLMP inequalities: generation, exact bound certification, facet checks, quantum violations"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormArg {
    Correlator,
    Bracket,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Local,
    Bipartition,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Ghz,
    Gamma,
}

#[derive(Args)]
struct Output {
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on enumerated vertices per stream
    #[arg(long, default_value_t = 10_000_000)]
    cap: u64,
    /// Worker threads (default: machine parallelism); results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a family expression (S_m for --form correlator, S_{m,d} otherwise)
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[command(flatten)]
        output: Output,
    },
    /// Certify the local or bipartition bound by exact enumeration
    Bound {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[arg(long, value_enum, default_value_t = ModelArg::Bipartition)]
        model: ModelArg,
        /// Restrict to one bipartition, e.g. "1,2|3"
        #[arg(long)]
        partition: Option<String>,
        /// Evaluate an expression file instead of a builder
        #[arg(long)]
        expr: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Evaluate a measurement scenario against the family expression
    Quantum {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        /// "paper" for the built-in settings, or a scenario JSON path
        #[arg(long, default_value = "paper")]
        scenario: String,
        #[arg(long)]
        expr: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Critical white-noise visibility of a scenario
    Visibility {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[arg(long, default_value = "paper")]
        scenario: String,
        #[arg(long)]
        expr: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Verify the facet property of S_{m,d} on the bipartition polytope
    Facet {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        /// Randomized one-sided mode for sizes beyond exhaustive reach (m=4)
        #[arg(long)]
        sampled: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample budget in sampled mode
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long)]
        expr: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Search measurement settings (and gamma) maximizing the violation
    Optimize {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[arg(long)]
        seed: u64,
        /// State family (default: gamma for d=3, ghz otherwise)
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[command(flatten)]
        output: Output,
    },
}

struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        let code = match &e {
            CoreError::InvalidArgument(_) | CoreError::NoViolation { .. } => 2,
            CoreError::ResourceLimit { .. } => 3,
            CoreError::Inconsistency(_) | CoreError::Overflow => 4,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap prints usage to stderr and exits 2 on bad arguments
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Generate { m, d, form, output } => {
            let e = build_expression(m, d, form)?;
            emit(&output, &e, expression_table(&e))
        }
        Cmd::Bound {
            m,
            d,
            form,
            model,
            partition,
            expr,
            output,
        } => {
            let e = resolve_expression(m, d, form, expr.as_deref())?;
            let caps = caps_of(&output)?;
            init_threads(output.threads);
            let report = match model {
                ModelArg::Local => BoundReport::local(&behaviors::local_bound(&e, &caps)?),
                ModelArg::Bipartition => {
                    let full = behaviors::bipartition_bound(&e, &caps)?;
                    match &partition {
                        None => BoundReport::bipartition(&full),
                        Some(s) => {
                            let p = Partition::parse(s, e.m())?;
                            let one = full
                                .per_partition
                                .iter()
                                .find(|pb| pb.partition == p)
                                .ok_or_else(|| CliError::usage("partition not found"))?;
                            BoundReport::bipartition(&behaviors::BipartitionBound {
                                value: one.value,
                                per_partition: vec![one.clone()],
                            })
                        }
                    }
                }
            };
            let table = report.table();
            emit(&output, &report, table)
        }
        Cmd::Quantum {
            m,
            d,
            form,
            scenario,
            expr,
            output,
        } => {
            let e = resolve_expression(m, d, form, expr.as_deref())?;
            let s = resolve_scenario(&scenario, &e)?;
            let behavior = quantum::scenario_behavior(&s)?;
            let value = e.evaluate(&behavior)?;
            let report = QuantumReport::new(&e, s, &behavior, value, None);
            let table = report.table();
            emit(&output, &report, table)
        }
        Cmd::Visibility {
            m,
            d,
            form,
            scenario,
            expr,
            output,
        } => {
            let e = resolve_expression(m, d, form, expr.as_deref())?;
            let s = resolve_scenario(&scenario, &e)?;
            let behavior = quantum::scenario_behavior(&s)?;
            let value = e.evaluate(&behavior)?;
            let w = quantum::critical_visibility(&e, &s)?;
            let report = QuantumReport::new(&e, s, &behavior, value, Some(w));
            let table = report.table();
            emit(&output, &report, table)
        }
        Cmd::Facet {
            m,
            d,
            sampled,
            seed,
            samples,
            expr,
            output,
        } => {
            let e = match expr {
                Some(path) => load_expression(&path)?,
                None => {
                    let (m, d) = require_md(m, d)?;
                    BellExpression::smd(m, d)?
                }
            };
            init_threads(output.threads);
            let opts = PolytopeOptions {
                caps: caps_of(&output)?,
                cache_dir: polytope::default_cache_dir(),
            };
            let report = if sampled {
                polytope::facet_check_sampled(&e, seed, samples, &opts)?
            } else {
                polytope::facet_check(&e, &opts)?
            };
            let table = facet_table(&report);
            emit(&output, &report, table)
        }
        Cmd::Optimize {
            m,
            d,
            form,
            seed,
            family,
            restarts,
            output,
        } => {
            let e = build_expression(m, d, form)?;
            init_threads(output.threads);
            let family = match family {
                Some(FamilyArg::Ghz) => StateFamily::Ghz,
                Some(FamilyArg::Gamma) => StateFamily::Gamma,
                None if d == 3 => StateFamily::Gamma,
                None => StateFamily::Ghz,
            };
            let opts = quantum::OptimizeOptions {
                restarts,
                ..quantum::OptimizeOptions::default()
            };
            let (s, value) = quantum::optimize_scenario_with(&e, family, seed, &opts)?;
            let behavior = quantum::scenario_behavior(&s)?;
            let visibility = quantum::critical_visibility(&e, &s).ok();
            let report = QuantumReport::new(&e, s, &behavior, value, visibility);
            let table = report.table();
            emit(&output, &report, table)
        }
    }
}

fn caps_of(output: &Output) -> Result<EnumerationCaps, CliError> {
    if output.cap == 0 {
        return Err(CliError::usage("--cap must be positive"));
    }
    Ok(EnumerationCaps::new(output.cap))
}

fn require_md(m: Option<usize>, d: Option<usize>) -> Result<(usize, usize), CliError> {
    match (m, d) {
        (Some(m), Some(d)) => Ok((m, d)),
        _ => Err(CliError::usage("--m and --d are required without --expr")),
    }
}

/// The family expression for (m, d): the correlator Svetlichny polynomial for
/// d=2, the bracket S_{m,d} otherwise (or as forced by --form).
fn build_expression(m: usize, d: usize, form: Option<FormArg>) -> Result<BellExpression, CliError> {
    let form = form.unwrap_or(if d == 2 {
        FormArg::Correlator
    } else {
        FormArg::Bracket
    });
    Ok(match form {
        FormArg::Correlator => {
            if d != 2 {
                return Err(CliError::usage("--form correlator requires --d 2"));
            }
            BellExpression::svetlichny(m)?
        }
        FormArg::Bracket => BellExpression::smd(m, d)?,
    })
}

fn resolve_expression(
    m: Option<usize>,
    d: Option<usize>,
    form: Option<FormArg>,
    expr: Option<&std::path::Path>,
) -> Result<BellExpression, CliError> {
    match expr {
        Some(path) => {
            let e = load_expression(path)?;
            if let (Some(m), Some(d)) = (m, d) {
                if e.m() != m || e.d() != d {
                    return Err(CliError::usage(format!(
                        "expression file has m={}, d={}, but --m {m} --d {d} was given",
                        e.m(),
                        e.d()
                    )));
                }
            }
            Ok(e)
        }
        None => {
            let (m, d) = require_md(m, d)?;
            build_expression(m, d, form)
        }
    }
}

fn load_expression(path: &std::path::Path) -> Result<BellExpression, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed expression file {}: {e}", path.display())))
}

fn resolve_scenario(arg: &str, e: &BellExpression) -> Result<QuantumScenario, CliError> {
    if arg == "paper" {
        return quantum::paper_scenario(e.m(), e.d()).ok_or_else(|| {
            CliError::usage(format!(
                "no built-in scenario for m={}, d={}; pass a scenario file",
                e.m(),
                e.d()
            ))
        });
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|err| CliError::usage(format!("cannot read scenario {arg}: {err}")))?;
    let s: QuantumScenario = serde_json::from_str(&text)
        .map_err(|err| CliError::usage(format!("malformed scenario {arg}: {err}")))?;
    if s.m() != e.m() || s.d() != e.d() {
        return Err(CliError::usage(format!(
            "scenario shape ({}, {}) does not match expression ({}, {})",
            s.m(),
            s.d(),
            e.m(),
            e.d()
        )));
    }
    Ok(s)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // results are independent of the pool size; ignore re-init errors
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn emit<R: serde::Serialize>(output: &Output, report: &R, table: String) -> Result<(), CliError> {
    let text = match output.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| CliError::usage(format!("serialization failed: {e}")))?;
            s.push('\n');
            s
        }
        Format::Table => table,
    };
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

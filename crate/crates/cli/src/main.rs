use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nwrob::harness::generator::{acceptance_corpus, gen_instance, GenParams};
use nwrob::harness::report::{read_csv, render_text, write_csv, ReportRow};
use nwrob::harness::{run_experiment, run_suite, Instance, RunConfig, Variant};

/// Environment variable that overrides `--seed`.
const SEED_ENV: &str = "ROB_SEED";

#[derive(Parser)]
#[command(name = "nwrob", version, about = "Online node-weighted rent-or-buy Steiner forest experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Randomized,
    Deterministic,
    Dual,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Randomized => Variant::Randomized,
            VariantArg::Deterministic => Variant::Deterministic,
            VariantArg::Dual => Variant::Dual,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen {
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "M")]
        m: Option<u32>,
        #[arg(long = "k-tilde")]
        k_tilde: Option<u32>,
        /// Recipe knob as key=value; repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one variant on one instance.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "dual")]
        variant: VariantArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "M")]
        m: Option<u32>,
        #[arg(long = "k-tilde")]
        k_tilde: Option<u32>,
        /// File listing the terminal ids known in advance.
        #[arg(long = "declare-T", value_name = "PATH")]
        declare_t: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the full JSON trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run variants over the generated corpus or the given instance files.
    Suite {
        /// Instance files; the generated corpus is used when none are given.
        #[arg(long)]
        instance: Vec<PathBuf>,
        #[arg(long, default_value_t = 500)]
        count: usize,
        /// Seed of the generated corpus.
        #[arg(long, default_value_t = 20_240_601)]
        corpus_seed: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Variants to run; all when omitted.
        #[arg(long, value_enum)]
        variant: Vec<VariantArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Summarize CSV result files.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn seed(flag: Option<u64>) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not a u64")),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => match io::stdout().write_all(bytes) {
            // A closed pipe (e.g. `| head`) is not an error.
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            r => r.context("writing to stdout"),
        },
    }
}

fn render(rows: &[ReportRow], format: Format) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Text => render_text(rows).into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(rows, &mut buf)?;
            buf
        }
    })
}

fn load(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Returns the number of audit violations found.
fn execute(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Gen { recipe, seed: s, m, k_tilde, params, out } => {
            let mut p = GenParams::parse(params.iter().map(String::as_str))?;
            p.m = m.or(p.m);
            p.k_tilde = k_tilde.or(p.k_tilde);
            let inst = gen_instance(&recipe, &p, seed(s)?)?;
            emit(out.as_deref(), inst.to_text().as_bytes())?;
            Ok(0)
        }
        Command::Run { instance, variant, seed: s, m, k_tilde, declare_t, out, format, trace } => {
            let inst = load(&instance)?;
            let mut cfg = RunConfig::new(variant.into(), seed(s)?);
            cfg.m = m;
            cfg.k_tilde = k_tilde;
            if let Some(path) = declare_t {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                cfg.declared_terminals = Some(inst.parse_node_list(&text)?);
            }
            let outcome = run_experiment(&inst, &cfg)?;
            if let Some(path) = trace {
                fs::write(&path, outcome.trace.to_json()).with_context(|| format!("writing {}", path.display()))?;
            }
            for v in outcome.checks.violations() {
                eprintln!("violation: {v}");
            }
            emit(out.as_deref(), &render(&[ReportRow::from_outcome(&outcome)], format)?)?;
            Ok(outcome.checks.violation_count())
        }
        Command::Suite { instance, count, corpus_seed, seed: s, variant, out, format } => {
            let instances = if instance.is_empty() {
                acceptance_corpus(count, corpus_seed)
            } else {
                instance.iter().map(|p| load(p)).collect::<Result<_>>()?
            };
            let variants: Vec<Variant> = if variant.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variant.into_iter().map(Variant::from).collect()
            };
            let mut rows = Vec::new();
            let mut violations = 0;
            for r in run_suite(&instances, &variants, seed(s)?) {
                let o = r?;
                for v in o.checks.violations() {
                    eprintln!("violation: {} {}: {v}", o.instance, o.variant);
                }
                violations += o.checks.violation_count();
                rows.push(ReportRow::from_outcome(&o));
            }
            emit(out.as_deref(), &render(&rows, format)?)?;
            Ok(violations)
        }
        Command::Report { inputs, out, format } => {
            let mut rows = Vec::new();
            for p in &inputs {
                let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                rows.extend(read_csv(f).with_context(|| format!("reading {}", p.display()))?);
            }
            if rows.is_empty() {
                bail!("no rows in the given files");
            }
            emit(out.as_deref(), &render(&rows, format)?)?;
            Ok(rows.iter().map(|r| r.violations).sum())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} audit violations");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

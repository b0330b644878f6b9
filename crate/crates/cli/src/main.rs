use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use webrank_core::examples;
use webrank_core::report::{self, exit, RunOptions, Step};
use webrank_core::LoadedDocument;

mod render;

#[derive(Parser)]
#[command(name = "webrank", version, about = "Ordinariness, rank bounds, abelian relations and curvature of codimension-one webs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Clone)]
struct Global {
    /// Sampling seed (overrides the document).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sample points (overrides the document).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Rank tolerance, or flatness tolerance for `curvature`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Highest jet order k for `jets`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    order: Option<i32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Structured)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Monomial counts, k₀, and the two rank bounds.
    Bounds { n: usize, d: usize },
    /// Ordinariness, integrability and general position at sample points.
    Check(Input),
    /// Exact Veronese ranks and the rank of an affine web.
    AffineRank(Input),
    /// Exact abelian relations of an affine web.
    Abelian {
        #[command(flatten)]
        input: Input,
        /// Polynomial degree cap (default k₀ − 1).
        #[arg(long)]
        degree_cap: Option<u32>,
        /// Print the relation basis.
        #[arg(long)]
        basis: bool,
    },
    /// Dimension ladders of formal abelian relations.
    Jets(Input),
    /// Connection, curvature and flatness verdict (requires d = c(n,k₀)).
    Curvature(Input),
    /// Emit a built-in web document.
    Example {
        /// six_web, fifteen_web or conic_affine.
        name: String,
        /// Parameter bindings `name=value` (a, b, c, e, h, psi, off_conic, g).
        #[arg(long = "set", value_parser = parse_binding)]
        set: Vec<(String, String)>,
    },
    /// Run several steps on one document.
    Pipeline {
        #[command(flatten)]
        input: Input,
        /// Comma-separated steps: check, affine-rank, abelian, jets, curvature.
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<String>,
    },
}

#[derive(Args)]
struct Input {
    /// Web document (JSON); reads stdin when absent or `-`.
    file: Option<PathBuf>,
}

fn parse_binding(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected name=value, got `{s}`"))
}

fn read_input(input: &Input) -> Result<LoadedDocument, String> {
    let text = match &input.file {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| format!("stdin: {e}"))?;
            s
        }
    };
    LoadedDocument::parse(&text).map_err(|e| format!("input: {e}"))
}

fn emit(value: &Value, format: Format) {
    match format {
        Format::Structured => println!("{}", serde_json::to_string_pretty(value).expect("json")),
        Format::Table => print!("{}", render::table(value)),
    }
}

fn command_echo() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!("webrank {}", args.join(" "))
}

fn run(cli: Cli) -> Result<i32, String> {
    let g = cli.global;
    let mut opts = RunOptions {
        seed: g.seed,
        trials: g.trials,
        tol: g.tol,
        order: g.order,
        ..RunOptions::default()
    };
    let echo = command_echo();
    let (input, steps) = match cli.command {
        Command::Bounds { n, d } => {
            let v = report::bounds_report(&echo, n, d).map_err(|e| e.to_string())?;
            emit(&v, g.format);
            return Ok(exit::OK);
        }
        Command::Example { name, set } => {
            let bindings: BTreeMap<String, String> = set.into_iter().collect();
            let doc = examples::by_name(&name, &bindings).map_err(|e| e.to_string())?;
            emit(&serde_json::to_value(&doc).expect("json"), g.format);
            return Ok(exit::OK);
        }
        Command::Check(i) => (i, vec![Step::Check]),
        Command::AffineRank(i) => (i, vec![Step::AffineRank]),
        Command::Abelian { input, degree_cap, basis } => {
            opts.degree_cap = degree_cap;
            opts.basis = basis;
            (input, vec![Step::Abelian])
        }
        Command::Jets(i) => (i, vec![Step::Jets]),
        Command::Curvature(i) => (i, vec![Step::Curvature]),
        Command::Pipeline { input, steps } => {
            let parsed = steps
                .iter()
                .map(|s| Step::parse(s.trim()).ok_or_else(|| format!("unknown step `{s}`")))
                .collect::<Result<Vec<_>, _>>()?;
            (input, parsed)
        }
    };
    let doc = read_input(&input)?;
    let rep = report::run(&echo, &doc, &steps, &opts).map_err(|e| e.to_string())?;
    emit(&serde_json::to_value(&rep).expect("json"), g.format);
    Ok(rep.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use c3dsm_core::cnf::{
    decode_model, read_dimacs, read_var_map, write_formula, write_var_map, VarMap,
};
use c3dsm_core::model::{serialize_instance, stable_matchings};
use c3dsm_core::solver::{parse_solver_output, solve, solve_external};
use c3dsm_core::{Budget, EncodeOptions, SolveResult, SolverConfig, Symmetry, Variant, Verdict};
use c3dsm_harness::counts::{instance_count, published_sizes, reduced_instance_count, scientific};
use c3dsm_harness::pool::default_jobs;
use c3dsm_harness::{
    oracle_equivalence, remark1_check, verify_exhaustive, CampaignReport, OracleConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for usage and I/O errors; verdicts use 0, 10 and 20.
const EXIT_ERROR: u8 = 2;
const EXIT_CAMPAIGN_FAILED: u8 = 1;

#[derive(Parser)]
#[command(
    name = "c3dsm",
    version,
    about = "Stable matching with cyclic preferences: SAT encodings and verification campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a DIMACS formula and its variable map.
    Encode(EncodeArgs),
    /// Solve a DIMACS file (exit 0 = UNSAT, 10 = SAT, 20 = UNKNOWN).
    Solve(SolveArgs),
    /// Brute-force every canonical instance with n = 3.
    #[command(name = "verify-n3")]
    VerifyN3 {
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare brute force, CNF evaluation and the solver on random instances.
    OracleCheck(OracleArgs),
    /// Check the mutual-top-triple extension property on random instances.
    #[command(name = "remark1-check")]
    Remark1Check(Remark1Args),
    /// Formula sizes and instance counts.
    Stats(StatsArgs),
    /// Decode a model into the instance it describes.
    DecodeModel(DecodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(name = "F")]
    F,
    #[value(name = "Fprime", alias = "fprime")]
    FPrime,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::F => Variant::F,
            VariantArg::FPrime => Variant::FPrime,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SymArg {
    On,
    Off,
    /// Relabeling units only.
    Relabel,
}

impl SymArg {
    fn resolve(self, n: usize) -> Symmetry {
        match self {
            SymArg::On => Symmetry::from_switch(true, n),
            SymArg::Off => Symmetry::Off,
            SymArg::Relabel => Symmetry::Relabel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Internal,
    External,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "F")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "on")]
    sym: SymArg,
    /// DIMACS path; the variable map goes to `<output>.vars`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print sizes without writing anything.
    #[arg(long)]
    stats_only: bool,
}

#[derive(Args)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "internal")]
    engine: Engine,
    /// Command template with `{file}`, e.g. `kissat -q {file}`.
    /// Falls back to $C3DSM_SOLVER_CMD.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model path for SAT answers (default `<input>.model`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Skip the embedded-solver path.
    #[arg(long)]
    no_solver: bool,
}

#[derive(Args)]
struct Remark1Args {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// A single size or an inclusive range such as `3..6`.
    #[arg(long, default_value = "3..6")]
    n: String,
    #[arg(long, value_enum, default_value = "F")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "on")]
    sym: SymArg,
}

#[derive(Args)]
struct DecodeArgs {
    /// Solver output or model file with `v` lines.
    model: PathBuf,
    /// Variable map written by `encode`.
    #[arg(long)]
    vars: PathBuf,
    /// Also write the instance here.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Encode(args) => encode(args),
        Command::Solve(args) => solve_cmd(args),
        Command::VerifyN3 { jobs } => {
            campaign(verify_exhaustive(3, jobs.unwrap_or_else(default_jobs))?)
        }
        Command::OracleCheck(args) => {
            let mut cfg = OracleConfig::new(args.n, args.trials, args.seed);
            cfg.jobs = args.jobs.unwrap_or_else(default_jobs);
            cfg.use_solver &= !args.no_solver;
            campaign(oracle_equivalence(&cfg)?)
        }
        Command::Remark1Check(args) => campaign(remark1_check(
            args.n,
            args.trials,
            args.seed,
            args.jobs.unwrap_or_else(default_jobs),
        )?),
        Command::Stats(args) => stats(args),
        Command::DecodeModel(args) => decode(args),
    }
}

fn campaign(report: CampaignReport) -> Result<u8> {
    println!("{report}");
    Ok(if report.passed() {
        0
    } else {
        EXIT_CAMPAIGN_FAILED
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn print_sizes(opts: &EncodeOptions) -> Result<()> {
    let stats = opts.stats()?;
    println!("{stats}");
    if opts.symmetry == Symmetry::from_switch(true, opts.n) {
        if let Some((vars, clauses)) = published_sizes(opts.n, opts.variant) {
            println!("published_vars: {vars}");
            println!("published_clauses: {clauses}");
            println!("delta_vars: {}", stats.num_vars() as i128 - vars as i128);
            println!(
                "delta_clauses: {}",
                stats.num_clauses() as i128 - clauses as i128
            );
            if opts.variant == Variant::FPrime {
                println!("delta_note: sequential at-most-one layout (3m-4 clauses, m-1 registers); other layouts differ by one");
            }
        }
    }
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<u8> {
    let opts = EncodeOptions::new(args.n, args.variant.into(), args.sym.resolve(args.n));
    if args.n < 3 {
        bail!("n must be at least 3 (got {})", args.n);
    }
    if args.stats_only {
        print_sizes(&opts)?;
        return Ok(0);
    }
    let output = args
        .output
        .unwrap_or_else(|| PathBuf::from(format!("c3dsm-n{}-{}.cnf", args.n, opts.variant.name())));
    let sidecar = with_suffix(&output, ".vars");
    let file =
        File::create(&output).with_context(|| format!("cannot create {}", output.display()))?;
    write_formula(&opts, BufWriter::new(file))
        .with_context(|| format!("writing {}", output.display()))?;
    let vm = VarMap::new(opts.n, opts.variant)?;
    let file =
        File::create(&sidecar).with_context(|| format!("cannot create {}", sidecar.display()))?;
    write_var_map(&vm, &opts.comment(), BufWriter::new(file))
        .with_context(|| format!("writing {}", sidecar.display()))?;
    println!("output: {}", output.display());
    println!("variable_map: {}", sidecar.display());
    print_sizes(&opts)?;
    Ok(0)
}

fn write_model(path: &Path, model: &[bool]) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "s SATISFIABLE")?;
    for chunk in model.chunks(16).enumerate().map(|(i, c)| (i * 16, c)) {
        let (base, values) = chunk;
        let lits: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let var = (base + j + 1) as i64;
                (if v { var } else { -var }).to_string()
            })
            .collect();
        writeln!(out, "v {}", lits.join(" "))?;
    }
    writeln!(out, "v 0")?;
    out.flush()?;
    Ok(())
}

fn solve_cmd(args: SolveArgs) -> Result<u8> {
    let timeout = args.timeout.map(Duration::from_secs_f64);
    let external = matches!(args.engine, Engine::External);
    let result: SolveResult = match args.engine {
        Engine::Internal => {
            let file = File::open(&args.input)
                .with_context(|| format!("cannot open {}", args.input.display()))?;
            let formula = read_dimacs(BufReader::new(file))?;
            let config = SolverConfig {
                budget: timeout.map_or_else(Budget::unlimited, Budget::time),
                seed: args.seed,
            };
            solve(&formula, &[], &config)?
        }
        Engine::External => {
            let template = match args.solver_cmd {
                Some(t) => t,
                None => std::env::var("C3DSM_SOLVER_CMD")
                    .context("external engine needs --solver-cmd or C3DSM_SOLVER_CMD")?,
            };
            solve_external(&args.input, &template, timeout.unwrap_or(Duration::MAX))?
        }
    };
    println!("engine: {}", if external { "external" } else { "internal" });
    println!("verdict: {}", result.verdict);
    if external {
        // the adapter only measures wall time
        println!("elapsed_s: {:.3}", result.stats.elapsed.as_secs_f64());
    } else {
        println!("{}", result.stats);
    }
    if let Some(model) = &result.model {
        let model_path = args
            .output
            .unwrap_or_else(|| with_suffix(&args.input, ".model"));
        write_model(&model_path, model)?;
        println!("model: {}", model_path.display());
        let sidecar = with_suffix(&args.input, ".vars");
        if sidecar.exists() {
            let instance_path = model_path.with_extension("instance");
            decode_to(&sidecar, model, Some(&instance_path))?;
        }
    }
    Ok(verdict_code(result.verdict))
}

fn verdict_code(v: Verdict) -> u8 {
    v.exit_code() as u8
}

fn decode_to(sidecar: &Path, model: &[bool], output: Option<&Path>) -> Result<()> {
    let file = File::open(sidecar).with_context(|| format!("cannot open {}", sidecar.display()))?;
    let (vm, _) = read_var_map(BufReader::new(file))
        .with_context(|| format!("reading {}", sidecar.display()))?;
    let inst = decode_model(&vm, model)?;
    let text = serialize_instance(&inst);
    if let Some(path) = output {
        fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
        println!("instance: {}", path.display());
    }
    print!("{text}");
    if let Ok(stable) = stable_matchings(&inst) {
        println!("# stable_matchings: {}", stable.len());
    }
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("cannot read {}", args.model.display()))?;
    let parsed = parse_solver_output(&text)?;
    if parsed.status.is_some_and(|s| s != Verdict::Sat) {
        bail!(
            "{} does not hold a satisfying assignment",
            args.model.display()
        );
    }
    let len = parsed
        .values
        .iter()
        .map(|v| v.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    let mut model = vec![false; len];
    for v in parsed.values {
        model[v.unsigned_abs() as usize - 1] = v > 0;
    }
    decode_to(&args.vars, &model, args.output.as_deref())?;
    Ok(0)
}

fn parse_range(text: &str) -> Result<(usize, usize)> {
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .with_context(|| format!("invalid size `{s}`"))
    };
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (parse(lo)?, parse(hi.trim_start_matches('='))?),
        None => match text.split_once('-') {
            Some((lo, hi)) => (parse(lo)?, parse(hi)?),
            None => (parse(text)?, parse(text)?),
        },
    };
    if lo < 3 || hi < lo {
        bail!("size range must satisfy 3 <= low <= high (got `{text}`)");
    }
    Ok((lo, hi))
}

fn stats(args: StatsArgs) -> Result<u8> {
    let (lo, hi) = parse_range(&args.n)?;
    for n in lo..=hi {
        if n > lo {
            println!("---");
        }
        print_sizes(&EncodeOptions::new(
            n,
            args.variant.into(),
            args.sym.resolve(n),
        ))?;
        let all = instance_count(n);
        let reduced = reduced_instance_count(n);
        println!("instances: {all}");
        println!("instances_sci: {}", scientific(&all));
        println!("instances_reduced: {reduced}");
        println!("instances_reduced_sci: {}", scientific(&reduced));
    }
    Ok(0)
}

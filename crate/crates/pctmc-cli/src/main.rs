//! Command-line front end for parametric CTMC estimation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pctmc::{Error, ObservationKind, Result};
use pctmc_cli::drive::FitSpec;
use pctmc_cli::report::to_json;
use pctmc_cli::{bench, commands, sir};

#[derive(Parser)]
#[command(
    name = "pctmc",
    version,
    about = "Estimate rate parameters of parametric CTMCs from partially observable executions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a model and print its state-space summary.
    Build(BuildArgs),
    /// Simulate observation sequences from a fully bound model.
    Simulate(SimulateArgs),
    /// Estimate free parameters from a dataset.
    Fit(FitArgs),
    /// Estimation benchmark on the bundled tandem queueing model.
    BenchTandem(BenchArgs),
    /// Two-step estimation pipeline on the bundled epidemic model.
    CaseSir(SirArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model source file.
    model: PathBuf,
    /// Constant bindings, e.g. `-const c=4,SIZE=1000`.
    #[arg(long = "const", value_name = "NAME=VALUE", value_delimiter = ',', value_parser = parse_binding)]
    bindings: Vec<(String, f64)>,
    /// Defined double constants to turn back into free parameters.
    #[arg(long, value_name = "NAME", value_delimiter = ',')]
    param: Vec<String>,
}

impl ModelArgs {
    fn bindings(&self) -> BTreeMap<String, f64> {
        self.bindings.iter().cloned().collect()
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observable variables; all variables when omitted.
    #[arg(long, value_name = "NAME", value_delimiter = ',')]
    observables: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observable variables making up each label.
    #[arg(long, value_name = "NAME", value_delimiter = ',', required = true)]
    observables: Vec<String>,
    /// Number of independent sequences.
    #[arg(long, default_value_t = 10)]
    seqs: usize,
    /// Jumps per sequence.
    #[arg(long, default_value_t = 30)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop dwell times, keeping only the label sequences.
    #[arg(long)]
    untimed: bool,
    /// Output dataset path (JSON lines).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Dataset produced by `simulate` (JSON lines).
    dataset: PathBuf,
    /// Parameters pinned to known values during the fit.
    #[arg(long, value_name = "NAME=VALUE", value_delimiter = ',', value_parser = parse_binding)]
    fix: Vec<(String, f64)>,
    /// Stop once a sweep improves the log-likelihood by at most this much.
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Uniform sampling interval for restart initializations.
    #[arg(long, value_name = "LO:HI", value_parser = parse_range, default_value = "0.1:5.0")]
    init_range: (f64, f64),
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore dwell times even if the dataset has them.
    #[arg(long)]
    untimed: bool,
    /// JSON file of true parameter values; enables relative-error metrics.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    /// Null all wall-time fields so reports are byte-reproducible.
    #[arg(long)]
    strip_timings: bool,
    /// Report path; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 4)]
    cmin: u32,
    #[arg(long, default_value_t = 8)]
    cmax: u32,
    #[arg(long, default_value_t = 2)]
    step: u32,
    /// Wall-clock budget in seconds; rows past it are marked skipped.
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
    #[arg(long, default_value_t = 100)]
    seqs: usize,
    #[arg(long, default_value_t = 30)]
    len: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, value_name = "LO:HI", value_parser = parse_range, default_value = "0.1:5.0")]
    init_range: (f64, f64),
    #[arg(long)]
    strip_timings: bool,
    /// Report path; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write the row table as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SirArgs {
    /// Population divisor: the pipeline runs at SIZE = 100000 / scale.
    #[arg(long, default_value_t = 100)]
    scale: u32,
    #[arg(long, default_value_t = 1)]
    seqs: usize,
    #[arg(long, default_value_t = 30)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, value_name = "LO:HI", value_parser = parse_range, default_value = "0.01:1.0")]
    init_range: (f64, f64),
    #[arg(long)]
    strip_timings: bool,
    /// Report path; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write the parameter table as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Directory for the generated datasets and the reduced model source.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

fn parse_binding(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("`{s}` is not NAME=VALUE"))?;
    if name.is_empty() {
        return Err(format!("`{s}` has an empty constant name"));
    }
    let value: f64 = value.parse().map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.to_string(), value))
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("`{s}` is not LO:HI"))?;
    let lo: f64 = lo.parse().map_err(|_| format!("`{lo}` is not a number"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("`{hi}` is not a number"))?;
    if !(lo > 0.0 && hi >= lo) {
        return Err(format!("`{s}` must satisfy 0 < LO <= HI"));
    }
    Ok((lo, hi))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_truth(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("truth file {}: {e}", path.display())))
}

fn cmd_build(args: &BuildArgs) -> Result<u8> {
    let (src, _) = pctmc_cli::read_model(&args.model.model)?;
    let observables = (!args.observables.is_empty()).then_some(args.observables.as_slice());
    let summary =
        commands::build_summary(&src, &args.model.bindings(), &args.model.param, observables)?;
    print!("{}", to_json(&summary));
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8> {
    let (src, model_sha) = pctmc_cli::read_model(&args.model.model)?;
    if !args.model.param.is_empty() {
        return Err(Error::Invalid("simulation needs every parameter bound, not freed".into()));
    }
    let kind = if args.untimed { ObservationKind::Untimed } else { ObservationKind::Timed };
    let data = commands::simulate_dataset(
        &src,
        &args.model.bindings(),
        &args.observables,
        args.seqs,
        args.len,
        kind,
        args.seed,
    )?;
    data.save(&args.out)?;
    let summary = serde_json::json!({
        "model_sha256": model_sha,
        "dataset_sha256": pctmc_cli::sha256_hex(data.to_jsonl().as_bytes()),
        "sequences": data.len(),
        "steps": args.len,
        "kind": if args.untimed { "untimed" } else { "timed" },
        "path": args.out.display().to_string(),
    });
    print!("{}", to_json(&summary));
    Ok(0)
}

fn cmd_fit(args: &FitArgs) -> Result<u8> {
    let (src, _) = pctmc_cli::read_model(&args.model.model)?;
    let (data, dataset_sha) = pctmc_cli::read_dataset(&args.dataset)?;
    let truth = args.truth.as_deref().map(read_truth).transpose()?;
    let spec = FitSpec {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        init_lo: args.init_range.0,
        init_hi: args.init_range.1,
        restarts: args.restarts,
        seed: args.seed,
        mode: args.untimed.then_some(ObservationKind::Untimed),
        fixed: args.fix.iter().cloned().collect(),
        strip_timings: args.strip_timings,
    };
    let report = commands::run_fit(
        &src,
        &args.model.bindings(),
        &args.model.param,
        &data,
        Some(dataset_sha),
        &spec,
        truth.as_ref(),
    )?;
    emit(&to_json(&report), args.out.as_deref())?;
    if !report.aggregate.all_converged {
        let stuck = report.restarts.iter().filter(|r| !r.converged).count();
        eprintln!("warning: {stuck} of {} restarts hit the iteration budget", args.restarts);
        return Ok(pctmc_cli::EXIT_UNCONVERGED);
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let opts = bench::BenchOptions {
        cmin: args.cmin,
        cmax: args.cmax,
        step: args.step,
        timeout_s: args.timeout,
        seqs: args.seqs,
        len: args.len,
        restarts: args.restarts,
        seed: args.seed,
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        init_lo: args.init_range.0,
        init_hi: args.init_range.1,
        strip_timings: args.strip_timings,
    };
    let report = bench::bench_tandem(&opts)?;
    if let Some(path) = &args.csv {
        std::fs::write(path, bench::bench_csv(&report))?;
    }
    emit(&to_json(&report), args.out.as_deref())?;
    Ok(0)
}

fn cmd_case_sir(args: &SirArgs) -> Result<u8> {
    let opts = sir::SirOptions {
        scale: args.scale,
        seqs: args.seqs,
        len: args.len,
        seed: args.seed,
        restarts: args.restarts,
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        init_lo: args.init_range.0,
        init_hi: args.init_range.1,
        strip_timings: args.strip_timings,
    };
    let (report, d1, d2) = sir::run_case(&opts)?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        d1.save(dir.join("sir-no-lockdown.jsonl"))?;
        d2.save(dir.join("sir-lockdown.jsonl"))?;
        std::fs::write(dir.join("sir-reduced.prism"), &report.fit_model_source)?;
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, sir::sir_csv(&report))?;
    }
    emit(&to_json(&report), args.out.as_deref())?;
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Build(args) => cmd_build(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::BenchTandem(args) => cmd_bench(args),
        Cmd::CaseSir(args) => cmd_case_sir(args),
    }
}

fn main() -> ExitCode {
    // accept the single-dash spelling `-const` used by PRISM tooling
    let argv = std::env::args().map(|a| if a == "-const" { "--const".to_string() } else { a });
    let cli = Cli::parse_from(argv);
    pctmc_cli::configure_threads();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pctmc_cli::exit_code(&e))
        }
    }
}

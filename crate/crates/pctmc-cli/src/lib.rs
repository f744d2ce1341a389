//! Drivers behind the `pctmc` binary: report types, multi-restart fitting,
//! and the bundled benchmark and case-study pipelines. The binary itself
//! only parses arguments and maps errors to exit codes.

pub mod bench;
pub mod commands;
pub mod drive;
pub mod report;
pub mod sir;

pub use bench::{bench_csv, bench_tandem, BenchOptions, BenchReport};
pub use commands::{build_summary, run_fit, simulate_dataset, BuildSummary};
pub use drive::{aggregate, fit_restarts, read_dataset, read_model, FitSpec};
pub use report::{sha256_hex, to_json, RunReport};
pub use sir::{run_case, sir_csv, SirOptions, SirReport};

/// Honor the `PCTMC_THREADS` worker-count override. Must run before any
/// parallel work; later calls are ignored once the pool exists.
pub fn configure_threads() {
    if let Ok(v) = std::env::var("PCTMC_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Exit code classes: usage errors are 2 (the parser's default), model
/// parse errors 10, semantic errors 11, I/O and data-format errors 12,
/// estimation and convergence failures 13.
pub fn exit_code(e: &pctmc::Error) -> u8 {
    use pctmc::Error::*;
    match e {
        Parse { .. } => 10,
        Semantic(_) | Invalid(_) | Dimension(_) => 11,
        Io(_) | DatasetFormat { .. } => 12,
        Estimation(_) | Numerical(_) | NoRoot(_) => 13,
    }
}

/// Exit code for a fit whose restarts did not all converge.
pub const EXIT_UNCONVERGED: u8 = 13;

//! `permswap`: swap, budget and verify categorical microdata from the shell.
//!
//! Exit status is 0 on success, 2 for invalid input or parameters, 3 when a
//! verification check fails, and 4 when an exact computation would exceed
//! the enumeration guard.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permswap::synth::StratumSpec;
use permswap::utility::Axis;

use output::Format;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;
pub const EXIT_GUARD: u8 = 4;

#[derive(Parser)]
#[command(name = "permswap", version, about = "Permutation swapping for categorical microdata")]
struct Cli {
    /// TOML file with default values for input, roles, categories, p, seed
    /// and format. Flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Microdata CSV with a header row.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,

    /// TOML role assignment; defaults to columns named match, hold and swap.
    #[arg(long, value_name = "FILE")]
    roles: Option<PathBuf>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Destination file; standard output when omitted.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the swapping mechanism once and write the swapped table.
    Swap(SwapArgs),
    /// Privacy-loss budget for swap rates and stratum bounds.
    Budget(BudgetArgs),
    /// Budget as a function of swap rate, with the minimum of each curve.
    Curve(CurveArgs),
    /// Check the privacy guarantee exactly on a small instance.
    Verify(VerifyArgs),
    /// zCDP conversions and composition for the 2020 Census products.
    TdaReport(TdaArgs),
    /// Generate seeded synthetic microdata.
    Synth(SynthArgs),
    /// Repeated swapping runs scored by MAPE of a two-way table.
    Utility(UtilityArgs),
}

#[derive(Args)]
struct SwapArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Swap rate in [0, 1].
    #[arg(long)]
    p: Option<f64>,
    /// Falls back to the config file, then PERMSWAP_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report of the invariants and budget. Defaults to
    /// `<output>.sidecar.json`, or standard error without --output.
    #[arg(long, value_name = "FILE")]
    sidecar: Option<PathBuf>,
    /// Also write the swapped microdata as CSV.
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Swap rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Stratum bounds, comma separated; derived from --input when omitted.
    #[arg(long, value_delimiter = ',')]
    b: Vec<u64>,
    /// Budgets for the 2020 Census swapping strata at the counterfactual rates.
    #[arg(long)]
    table5: bool,
    /// Replacement for the built-in swapping strata file.
    #[arg(long, value_name = "FILE")]
    strata: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    out: OutArgs,
    /// Stratum bounds, each at least 2.
    #[arg(long, value_delimiter = ',', required = true)]
    b: Vec<u64>,
    /// Explicit swap rates; overrides --grid.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Number of evenly spaced interior rates.
    #[arg(long, default_value_t = 999)]
    grid: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Exhaustive sweep over every small dataset instead of one input.
    #[arg(long)]
    exhaustive: bool,
    /// Exact swap rates such as `1/10` or `0.25`, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<String>,
    /// Per-unit budget to check against instead of the closed form.
    #[arg(long, value_name = "EPSILON")]
    budget: Option<f64>,
    /// Sweep domain as match,hold,swap level counts.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 2, 2])]
    domain: Vec<usize>,
    /// Largest dataset size in the sweep.
    #[arg(long, default_value_t = 4)]
    max_records: u64,
}

#[derive(Args)]
struct TdaArgs {
    #[command(flatten)]
    out: OutArgs,
    /// Replacement for the built-in zCDP constants file.
    #[arg(long, value_name = "FILE")]
    constants: Option<PathBuf>,
    /// Replacement for the built-in swapping strata file.
    #[arg(long, value_name = "FILE")]
    strata: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Stratum sizes, each `N`, `N:mixed` or `N:identical`, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    strata: Vec<StratumSpec>,
    /// Number of hold categories.
    #[arg(long, default_value_t = 2)]
    hold: usize,
    /// Number of swap categories.
    #[arg(long = "swap", default_value_t = 2)]
    swap_levels: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Destination CSV; standard output when omitted.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Also write a role file declaring every category, for lossless reload.
    #[arg(long, value_name = "FILE")]
    roles_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Match,
    Hold,
    Swap,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Match => Axis::Match,
            AxisArg::Hold => Axis::Hold,
            AxisArg::Swap => Axis::Swap,
        }
    }
}

#[derive(Args)]
struct UtilityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Swap rates, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    rates: Vec<f64>,
    /// Replications per rate.
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Axis summed out before scoring.
    #[arg(long, value_enum, default_value = "match")]
    axis: AxisArg,
    /// Also write the per-rate summary as JSON.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<commands::VerificationFailed>().is_some() {
        return EXIT_VERIFICATION;
    }
    let guard = e.chain().any(|c| {
        matches!(
            c.downcast_ref::<permswap::Error>(),
            Some(permswap::Error::EnumerationBudgetExceeded { .. })
        )
    });
    if guard {
        EXIT_GUARD
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("permswap: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `ltispec` — rational-function power spectral densities of stochastic
//! LTI systems from the command line.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 stability refusal,
//! 4 numerical failure, 5 simulation blow-up.

use clap::{Parser, Subcommand};
use ltispec_cli::commands::{self, InputArgs};

#[derive(Debug, Parser)]
#[command(name = "ltispec", version, about = "Noise power spectra of stochastic LTI systems as explicit rational functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the rational-function coefficients (q and P/P′ stacks, or one
    /// element's polynomials) as JSON.
    Coeffs {
        #[command(flatten)]
        input: InputArgs,
        /// recursive (whole matrix) or elementwise (single element).
        #[arg(long, default_value = "recursive")]
        method: String,
        /// Element "i,j" (1-based) for the element-wise method.
        #[arg(long)]
        element: Option<String>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<String>,
    },
    /// Evaluate spectra on a frequency grid.
    Spectrum {
        #[command(flatten)]
        input: InputArgs,
        /// Grid "min:max:count:log|lin" in ordinary frequency.
        #[arg(long)]
        freqs: String,
        /// Elements to evaluate, 1-based: "1,1;1,2" (default: all autos).
        #[arg(long)]
        pairs: Option<String>,
        /// recursive | elementwise | oracle.
        #[arg(long, default_value = "recursive")]
        method: String,
        /// Attach the coefficient dump to JSON output.
        #[arg(long)]
        dump_coeffs: bool,
        /// Output file; `.csv` or `.json` by extension (default: CSV to stdout).
        #[arg(long)]
        out: Option<String>,
    },
    /// Simulate a nonlinear model and estimate spectra by Welch averaging.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-total", default_value_t = 2000.0)]
        t_total: f64,
        #[arg(long = "burn-in", default_value_t = 100.0)]
        burn_in: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-realization stream counter.
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long = "segment-len", default_value_t = 16384)]
        segment_len: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        /// hann | rect
        #[arg(long, default_value = "hann")]
        window: String,
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// Also dump the raw trajectory as CSV.
        #[arg(long = "traj-out")]
        traj_out: Option<String>,
    },
    /// Run recursive, element-wise, and oracle methods on one grid and
    /// report their maximum relative discrepancies.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "0.001:10:101:log")]
        freqs: String,
        #[arg(long)]
        pairs: Option<String>,
        /// Pass/fail threshold on analytic-method agreement.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Also simulate and report Welch mid-band agreement.
        #[arg(long)]
        with_welch: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// List the built-in models and their default parameters.
    Models,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Coeffs {
            input,
            method,
            element,
            out,
        } => commands::cmd_coeffs(&input, &method, element.as_deref(), out.as_deref()),
        Command::Spectrum {
            input,
            freqs,
            pairs,
            method,
            dump_coeffs,
            out,
        } => commands::cmd_spectrum(
            &input,
            &freqs,
            pairs.as_deref(),
            &method,
            dump_coeffs,
            out.as_deref(),
        ),
        Command::Simulate {
            input,
            dt,
            t_total,
            burn_in,
            seed,
            stream,
            segment_len,
            overlap,
            window,
            pairs,
            out,
            traj_out,
        } => commands::cmd_simulate(
            &input,
            commands::SimulateArgs {
                dt,
                t_total,
                burn_in,
                seed,
                stream,
                segment_len,
                overlap,
                window,
            },
            pairs.as_deref(),
            out.as_deref(),
            traj_out.as_deref(),
        ),
        Command::Compare {
            input,
            freqs,
            pairs,
            tol,
            with_welch,
            seed,
            out,
        } => commands::cmd_compare(
            &input,
            &freqs,
            pairs.as_deref(),
            tol,
            with_welch,
            seed,
            out.as_deref(),
        ),
        Command::Models => commands::cmd_models(),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message);
        std::process::exit(err.code);
    }
}

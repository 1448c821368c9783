use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperuni_cli::{run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "hyperuni", version, about = "Hyperuniformity diagnostics for point sets on spheres")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write point sets of a family (random, fibonacci, maxdist) with JSON sidecars
    Generate(Flags),
    /// Variance profiles, Weyl sums, worst-case errors and identity checks per input set
    Analyze(Flags),
    /// Classify a sequence of point sets in the large, small and threshold cap regimes
    Classify(Flags),
}

#[derive(Args)]
struct Flags {
    /// Point-set files or directories of `.txt` files
    inputs: Vec<PathBuf>,
    /// Flat `key = value` file, or a report whose embedded config is replayed
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated point counts
    #[arg(long)]
    sizes: Option<String>,
    /// Single point count
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Riesz parameter of the distance maximizer, in (d/2, d/2 + 1)
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    /// Replicas of the averaged random family in `classify`
    #[arg(long)]
    replicas: Option<String>,
    /// `a:b:steps` or a comma list; values may use `pi`, e.g. `pi/18:4pi/9:8`
    #[arg(long)]
    phi_grid: Option<String>,
    #[arg(long)]
    t_grid: Option<String>,
    /// Sobolev smoothness values
    #[arg(long)]
    s: Option<String>,
    /// Truncation tolerance of the stolarsky and l2 checks
    #[arg(long)]
    tol: Option<String>,
    /// Absolute truncation tolerance of spectral variance profiles
    #[arg(long)]
    variance_tol: Option<String>,
    /// spectral, monte-carlo or pair-kernel
    #[arg(long)]
    method: Option<String>,
    /// Number of Monte Carlo cap centers
    #[arg(long)]
    centers: Option<String>,
    /// uniform or fibonacci cap centers
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    weyl_degree: Option<String>,
    /// Small-cap window w(N) = scale · ln N
    #[arg(long)]
    window_scale: Option<String>,
    /// stolarsky and/or l2
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// json, csv or both
    #[arg(long)]
    format: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let flags = [
            ("d", &self.d),
            ("family", &self.family),
            ("sizes", &self.sizes),
            ("n", &self.n),
            ("seed", &self.seed),
            ("tau", &self.tau),
            ("restarts", &self.restarts),
            ("max-iterations", &self.max_iterations),
            ("replicas", &self.replicas),
            ("phi-grid", &self.phi_grid),
            ("t-grid", &self.t_grid),
            ("s", &self.s),
            ("tol", &self.tol),
            ("variance-tol", &self.variance_tol),
            ("method", &self.method),
            ("centers", &self.centers),
            ("sampling", &self.sampling),
            ("weyl-degree", &self.weyl_degree),
            ("window-scale", &self.window_scale),
            ("check", &self.check),
            ("out", &self.out),
            ("format", &self.format),
        ];
        flags
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

fn configure(command: Command, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut config = match &flags.config {
        Some(path) => RunConfig::load(command, path)?,
        None => RunConfig::new(command),
    };
    for (key, value) in flags.overrides() {
        config.apply(key, &value)?;
    }
    if !flags.inputs.is_empty() {
        config.input = flags.inputs.clone();
    }
    config.resolve()
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("HYPERUNI_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("HYPERUNI_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Cmd::Generate(f) => (Command::Generate, f),
        Cmd::Analyze(f) => (Command::Analyze, f),
        Cmd::Classify(f) => (Command::Classify, f),
    };
    let result = init_threads()
        .and_then(|()| configure(command, flags))
        .and_then(run);
    match result {
        Ok(outcome) => {
            for path in &outcome.written {
                println!("{}", path.display());
            }
            if outcome.unconverged {
                eprintln!("warning: optimizer did not converge; outputs are flagged");
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weighted_minnorm::experiments::{self, Command, ExperimentSpec, Format};
use weighted_minnorm::montecarlo::McConfig;
use weighted_minnorm::Error;

/// Minimum-norm Fourier regression: risk curves, Monte Carlo checks and
/// interpolation experiments.
#[derive(Parser)]
#[command(name = "wmn", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Theoretical risk over a (r, q, p) grid.
    RiskCurve(Common),
    /// Theoretical risk next to Monte Carlo estimates.
    McRisk(Common),
    /// Long-format (r, p, risk) table for heat maps.
    Heatmap(Common),
    /// Closed-form risk against the asymptotic rate bound.
    BoundCheck(Common),
    /// Fit interpolants to a target function or sample file.
    Interp(Common),
    /// Empirical deviation tails against the concentration bound.
    Concentration(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (a directory for `interp`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Ambient dimension D.
    #[arg(long)]
    dim: Option<usize>,
    /// Sample count n (per axis for `interp`).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated feature counts.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Comma-separated decay rates.
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    /// Comma-separated weights (sets the fixed q rule).
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn build_spec(command: Command, a: Common) -> Result<ExperimentSpec, Error> {
    let mut spec = match &a.config {
        Some(path) => {
            let spec = ExperimentSpec::load(path)?;
            if spec.command != command {
                return Err(Error::InvalidConfiguration(format!(
                    "{} declares command `{}`, invoked as `{}`",
                    path.display(),
                    spec.command.as_str(),
                    command.as_str()
                )));
            }
            spec
        }
        None => ExperimentSpec::default_for(command),
    };
    if let Some(out) = a.out {
        spec.output.path = Some(out);
    }
    if let Some(f) = a.format {
        spec.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if a.seed.is_some() || a.trials.is_some() {
        let mc = spec.mc.get_or_insert(McConfig::new(100, 0));
        if let Some(seed) = a.seed {
            mc.seed = seed;
        }
        if let Some(trials) = a.trials {
            mc.trials = trials;
        }
        if let (Some(seed), Some(interp)) = (a.seed, spec.interp.as_mut()) {
            interp.noise_seed = seed;
        }
    }
    if a.threads.is_some() {
        spec.threads = a.threads;
    }
    if command == Command::Interp {
        if let Some(interp) = spec.interp.as_mut() {
            if let Some(n) = a.n {
                interp.n_axis = Some(n);
            }
            if let Some(p) = a.p.as_ref().and_then(|p| p.first()) {
                interp.p_axis = *p;
            }
            if let Some(d) = a.dim {
                interp.dim_axis = d;
            }
            if let Some(q) = a.q.as_ref().and_then(|q| q.first()) {
                interp.q = *q;
            }
        }
        return Ok(spec);
    }
    let g = &mut spec.grid;
    if a.dim.is_some() {
        g.dim = a.dim;
    }
    if let Some(n) = a.n {
        g.n = Some(n);
        g.n_list = None;
    }
    if a.p.is_some() {
        g.p_list = a.p;
        g.l_list = None;
        g.tau_multiples = None;
    }
    if let Some(r) = a.r {
        g.r_list = r;
    }
    if a.q.is_some() {
        g.q_list = a.q;
        g.q_rule = experiments::QRule::Fixed;
    }
    Ok(spec)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_numerical() => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::RiskCurve(a) => (Command::RiskCurve, a),
        Cmd::McRisk(a) => (Command::McRisk, a),
        Cmd::Heatmap(a) => (Command::Heatmap, a),
        Cmd::BoundCheck(a) => (Command::BoundCheck, a),
        Cmd::Interp(a) => (Command::Interp, a),
        Cmd::Concentration(a) => (Command::Concentration, a),
    };
    let result = build_spec(command, args).and_then(|spec| {
        let out = experiments::run(&spec)?;
        out.write(&spec.output_path())?;
        eprint!("{}", experiments::describe(&spec, &out));
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `rdx`: exponents, regime classification, transforms, closed-form
//! solutions, profile shooting, simulation and residual verification.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{CliError, CommandResult};

#[derive(Debug, Parser)]
#[command(name = "rdx", version, about = "Weighted reaction-diffusion toolkit")]
struct Cli {
    /// Print the versioned JSON envelope instead of a text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

/// Equation parameters shared by most subcommands.
#[derive(Debug, Clone, Args)]
pub struct EqArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long = "N", value_name = "N", allow_negative_numbers = true)]
    pub n: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    /// Reaction coefficient (default 1).
    #[arg(long, allow_negative_numbers = true)]
    pub reaction: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolutionName {
    /// `K r^(-(s2+2)/(p-m))`
    Stationary,
    /// Explicit backward solution with linear reaction.
    ExplicitP1,
    /// Its one-dimensional profile.
    #[value(name = "explicit-1d")]
    Explicit1d,
    /// Traveling-wave solution of the `m = 1`, `sigma1 = -2` equation.
    #[value(name = "tw-composed", alias = "wave")]
    Wave,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Forward,
    Backward,
    Exponential,
    Separate,
    Stationary,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    #[value(name = "compact-support", alias = "compact")]
    Compact,
    Decay,
    Bounded,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical exponents and constants.
    Exponents {
        #[command(flatten)]
        eq: EqArgs,
        /// One CSV row per entry (name,value,defined,citation) instead of a summary.
        #[arg(long)]
        csv: bool,
    },
    /// Regime facts: sign of L, expected self-similar form, thresholds.
    Classify(EqArgs),
    /// Build a change of variables and optionally map points.
    Transform {
        /// main, second, euler or fisher.
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        eq: EqArgs,
        /// Source radii to map.
        #[arg(long = "r", value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// CSV of sampled (r,t,u) to map; writes transformed.csv under --out.
        #[arg(long)]
        apply: Option<PathBuf>,
    },
    /// Closed-form solutions, sampled to CSV with --out.
    Solution {
        #[arg(long, value_enum)]
        name: SolutionName,
        #[command(flatten)]
        eq: EqArgs,
        /// Blow-up time of backward solutions.
        #[arg(long = "T", value_name = "T")]
        t_blow: Option<f64>,
        /// Wave speed.
        #[arg(long, allow_negative_numbers = true)]
        c: Option<f64>,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long, default_value_t = 201)]
        nr: usize,
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Shoot for a self-similar profile.
    Profile {
        #[command(flatten)]
        eq: EqArgs,
        #[arg(long, value_enum)]
        form: FormArg,
        /// Origin behavior class (q1, q1var, exp_q1, pos_origin, cpower1, ...).
        #[arg(long, visible_alias = "behavior")]
        class: String,
        #[arg(long, value_enum, default_value = "compact-support")]
        target: TargetArg,
        #[arg(long)]
        decay_rate: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        xi_max: Option<f64>,
        #[arg(long)]
        param_min: Option<f64>,
        #[arg(long)]
        param_max: Option<f64>,
        #[arg(long)]
        scan_points: Option<usize>,
        /// Blow-up time for backward and separate-variable forms.
        #[arg(long = "T", value_name = "T")]
        t_blow: Option<f64>,
    },
    /// Integrate a run config (or an array of them with --sweep).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sweep: bool,
    },
    /// Residual of a named solution or of sampled data.
    Verify {
        #[arg(long, value_enum, conflicts_with = "samples")]
        solution: Option<SolutionName>,
        /// CSV with columns r,t,u on a tensor grid.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[command(flatten)]
        eq: EqArgs,
        #[arg(long = "T", value_name = "T")]
        t_blow: Option<f64>,
        /// Wave speed.
        #[arg(long, allow_negative_numbers = true)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long)]
        ht: Option<f64>,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 91)]
        points: usize,
        /// Draw this many random sample points (uses --seed) instead of a grid.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long)]
        one_sided: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Exponents { .. } => "exponents",
            Command::Classify(_) => "classify",
            Command::Transform { .. } => "transform",
            Command::Solution { .. } => "solution",
            Command::Profile { .. } => "profile",
            Command::Simulate { .. } => "simulate",
            Command::Verify { .. } => "verify",
        }
    }
}

pub struct Context {
    pub out: Option<PathBuf>,
    pub seed: u64,
}

fn dispatch(cmd: Command, ctx: &Context) -> Result<CommandResult, CliError> {
    use commands as c;
    match cmd {
        Command::Exponents { eq, csv } => c::exponents(&eq, csv),
        Command::Classify(eq) => c::classify(&eq),
        Command::Transform { kind, eq, radii, t, apply } => c::transform(ctx, &kind, &eq, &radii, t, apply.as_deref()),
        Command::Solution { name, eq, t_blow, c: speed, r_min, r_max, nr, times } => {
            c::solution(ctx, name, &eq, c::SolutionOpts { t_blow, speed, r_min, r_max, nr, times })
        }
        Command::Profile {
            eq,
            form,
            class,
            target,
            decay_rate,
            eps,
            xi_max,
            param_min,
            param_max,
            scan_points,
            t_blow,
        } => c::profile(
            ctx,
            &eq,
            form,
            &class,
            c::ProfileOpts { target, decay_rate, eps, xi_max, param_min, param_max, scan_points, t_blow },
        ),
        Command::Simulate { config, sweep } => c::simulate(ctx, &config, sweep),
        Command::Verify {
            solution,
            samples,
            eq,
            t_blow,
            c: speed,
            h,
            ht,
            r_min,
            r_max,
            t,
            points,
            random,
            one_sided,
        } => c::verify(
            ctx,
            &eq,
            c::VerifyOpts { solution, samples, t_blow, speed, h, ht, r_min, r_max, t, points, random, one_sided },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() && std::env::args().any(|a| a == "--json") => {
            let err = CliError::Usage(e.kind().to_string());
            println!("{}", CommandResult::error("rdx", &err).to_json());
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    let name = cli.command.name();
    let json = cli.json;
    let ctx = Context { out: cli.out, seed: cli.seed };
    let (result, code) = match dispatch(cli.command, &ctx) {
        Ok(r) => (r, 0),
        Err(e) => {
            if !json {
                eprintln!("error: {e}");
            }
            (CommandResult::error(name, &e), e.exit_code())
        }
    };
    // A closed pipe is not an error worth reporting.
    let mut stdout = std::io::stdout().lock();
    let _ = if json {
        writeln!(stdout, "{}", result.to_json())
    } else if let (0, Some(text)) = (code, &result.raw) {
        write!(stdout, "{text}")
    } else if code == 0 {
        writeln!(stdout, "{}", result.to_text())
    } else {
        Ok(())
    };
    ExitCode::from(code as u8)
}

//! Command-line front end. Payloads (documents and reports) go to standard
//! output, diagnostics to standard error; `-` names standard input/output.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::eval::{evaluate, simulate, EvalConfig};
use crate::instances::{
    blackwell_counterexample, goal_reaching_house, ornstein_abc, random_positive_mdp, AbcParams,
    BlackwellParams, HouseParams,
};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::solver::{
    brute_force_optimal, check_excessive, check_p_eps_optimal, check_weak_p_eps_optimal,
    construct_eps_optimal_stationary, value_iterate,
};
use crate::textio::{self, TextError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExitStatus {
    pub code: i32,
}

impl ExitStatus {
    pub const SUCCESS: Self = Self { code: 0 };
    pub const CHECK_FAILED: Self = Self { code: 1 };
    pub const USAGE: Self = Self { code: 2 };
    pub const COMPUTATION: Self = Self { code: 3 };
}

#[derive(Parser, Debug)]
#[command(name = "posdp", version, about = "Positive dynamic programming toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a built-in model.
    #[command(subcommand)]
    Instance(InstanceCommand),
    /// Value iteration from zero.
    Solve(SolveArgs),
    /// Income of a stationary policy.
    Eval(EvalArgs),
    /// Monte Carlo estimate of a policy's income from one state.
    Simulate(SimulateArgs),
    /// Check that a value function is excessive.
    CheckBound(CheckBoundArgs),
    /// Check (p, ε)-optimality of a stationary policy.
    CheckOpt(CheckOptArgs),
    /// Build an ε-optimal stationary policy through a discount schedule.
    Construct(ConstructArgs),
    /// Brute-force optimal values for small models.
    Oracle(OracleArgs),
}

#[derive(Subcommand, Debug)]
enum InstanceCommand {
    Blackwell {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        lumped: bool,
    },
    Abc {
        #[arg(long = "max-n")]
        max_n: usize,
    },
    House {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        gambles: usize,
        #[arg(long)]
        seed: u64,
    },
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long, default_value_t = 0.1)]
        absorb: f64,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct Output {
    /// Destination of the payload document.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 1_000_000)]
    max_iter: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Label of the starting state.
    #[arg(long)]
    start: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    rollouts: usize,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args, Debug)]
struct CheckBoundArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    value: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
}

#[derive(Args, Debug)]
struct CheckOptArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    eps: f64,
    /// Compare p-averages instead of every charged state.
    #[arg(long)]
    weak: bool,
    /// Optimal value to compare against; computed by value iteration if absent.
    #[arg(long)]
    value: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long = "max-schedule", default_value_t = 30)]
    max_schedule: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    horizon: usize,
    #[arg(long = "terminating-only")]
    terminating_only: bool,
    #[command(flatten)]
    output: Output,
}

/// A failure with its exit status and one-line diagnostic.
struct Failure {
    status: ExitStatus,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::USAGE,
            message: message.into(),
        }
    }
}

impl From<Error<f64>> for Failure {
    fn from(e: Error<f64>) -> Self {
        let status = match e {
            Error::InvalidParameter(_)
            | Error::RegimeMismatch { .. }
            | Error::InvalidModel(_)
            | Error::InvalidPolicy(_)
            | Error::TooDeep { .. }
            | Error::TooLarge(_) => ExitStatus::USAGE,
            _ => ExitStatus::COMPUTATION,
        };
        let message = match &e {
            Error::ScheduleExhausted { best } => {
                let d = &best.1;
                format!(
                    "{e}; best plan: beta_used={} schedule_steps={} achieved_ratio={}",
                    d.beta_used.to_canonical_string(),
                    d.schedule_steps,
                    d.achieved_ratio.to_canonical_string()
                )
            }
            _ => e.to_string(),
        };
        Self { status, message }
    }
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn read(&mut self, path: &PathBuf) -> Result<String, Failure> {
        let mut text = String::new();
        if path.as_os_str() == "-" {
            self.stdin
                .read_to_string(&mut text)
                .map_err(|e| Failure::usage(format!("reading standard input: {e}")))?;
        } else {
            text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("reading {}: {e}", path.display())))?;
        }
        Ok(text)
    }

    fn write(&mut self, path: &PathBuf, text: &str) -> Result<(), Failure> {
        if path.as_os_str() == "-" {
            self.stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::usage(format!("writing standard output: {e}")))
        } else {
            std::fs::write(path, text)
                .map_err(|e| Failure::usage(format!("writing {}: {e}", path.display())))
        }
    }

    fn report(&mut self, text: &str) -> Result<(), Failure> {
        self.write(&PathBuf::from("-"), text)
    }

    fn diagnostic(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "{text}");
    }

    fn model(&mut self, path: &PathBuf) -> Result<Model<f64>, Failure> {
        let text = self.read(path)?;
        textio::parse_model(&text).map_err(|e| in_file(path, e))
    }
}

fn in_file(path: &Path, e: TextError) -> Failure {
    Failure::usage(format!("{}: {e}", path.display()))
}

/// Runs one invocation; `args` excludes the program name.
pub fn run<I, S>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> ExitStatus
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("posdp"))
        .chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return ExitStatus::SUCCESS;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("usage error");
            let _ = writeln!(stderr, "{line}");
            return ExitStatus::USAGE;
        }
    };
    let mut io = Io {
        stdin,
        stdout,
        stderr,
    };
    match dispatch(cli.command, &mut io) {
        Ok(status) => status,
        Err(f) => {
            io.diagnostic(&format!("error: {}", f.message));
            f.status
        }
    }
}

fn pass_status(passes: bool) -> ExitStatus {
    if passes {
        ExitStatus::SUCCESS
    } else {
        ExitStatus::CHECK_FAILED
    }
}

fn dispatch(command: Command, io: &mut Io<'_>) -> Result<ExitStatus, Failure> {
    match command {
        Command::Instance(which) => {
            let model = match which {
                InstanceCommand::Blackwell { depth, lumped } => {
                    let params = if lumped {
                        BlackwellParams::lumped(depth)
                    } else {
                        BlackwellParams::explicit(depth)
                    };
                    blackwell_counterexample::<f64>(params)?
                }
                InstanceCommand::Abc { max_n } => ornstein_abc(AbcParams {
                    max_gamble_index: max_n,
                })?,
                InstanceCommand::House {
                    states,
                    gambles,
                    seed,
                } => goal_reaching_house(HouseParams {
                    states,
                    gambles_per_state: gambles,
                    seed,
                })?,
                InstanceCommand::Random {
                    states,
                    actions,
                    absorb,
                    seed,
                } => random_positive_mdp(states, actions, absorb, seed)?,
            };
            io.report(&textio::serialize_model(&model))?;
            Ok(ExitStatus::SUCCESS)
        }
        Command::Solve(a) => {
            let model = io.model(&a.model)?;
            let (v, iterations) = value_iterate(&model, a.beta, a.tol, a.max_iter)?;
            io.diagnostic(&format!(
                "iterations={iterations} residual={} converged={}",
                v.residual.to_canonical_string(),
                v.converged
            ));
            io.write(&a.output.out, &textio::serialize_value(&v, &model))?;
            Ok(ExitStatus::SUCCESS)
        }
        Command::Eval(a) => {
            let model = io.model(&a.model)?;
            let text = io.read(&a.policy)?;
            let f = textio::parse_policy(&text, &model).map_err(|e| in_file(&a.policy, e))?;
            let v = evaluate(&model, &f.into(), &EvalConfig::with_beta(a.beta))?;
            io.write(&a.output.out, &textio::serialize_value(&v, &model))?;
            Ok(ExitStatus::SUCCESS)
        }
        Command::Simulate(a) => {
            let model = io.model(&a.model)?;
            let text = io.read(&a.policy)?;
            let f = textio::parse_policy(&text, &model).map_err(|e| in_file(&a.policy, e))?;
            let start = model
                .state_by_label(&a.start)
                .ok_or_else(|| Failure::usage(format!("unknown state {}", a.start)))?;
            let est = simulate(&model, &f.into(), start, a.beta, a.horizon, a.seed, a.rollouts)?;
            io.report(&format!(
                "mean {}\nstderr {}\nrollouts {}\ntruncated {}\n",
                est.mean.to_canonical_string(),
                est.stderr.to_canonical_string(),
                est.rollouts,
                est.truncated
            ))?;
            Ok(ExitStatus::SUCCESS)
        }
        Command::CheckBound(a) => {
            let model = io.model(&a.model)?;
            let text = io.read(&a.value)?;
            let u = textio::parse_value(&text, &model).map_err(|e| in_file(&a.value, e))?;
            let rep = check_excessive(&model, &u, a.beta, a.tol)?;
            let mut out = format!(
                "passes {}\nworst_violation {}\n",
                rep.passes,
                rep.worst_violation.to_canonical_string()
            );
            if let Some((s, act)) = rep.witness {
                let _ = writeln!(
                    out,
                    "witness {} {}",
                    model.label(s),
                    model.action_label(s, act)
                );
            }
            io.report(&out)?;
            Ok(pass_status(rep.passes))
        }
        Command::CheckOpt(a) => {
            let model = io.model(&a.model)?;
            let text = io.read(&a.policy)?;
            let f = textio::parse_policy(&text, &model).map_err(|e| in_file(&a.policy, e))?;
            let text = io.read(&a.dist)?;
            let p = textio::parse_dist(&text, &model).map_err(|e| in_file(&a.dist, e))?;
            let ustar = match &a.value {
                Some(path) => {
                    let text = io.read(path)?;
                    textio::parse_value(&text, &model).map_err(|e| in_file(path, e))?
                }
                None => value_iterate(&model, 1.0, 1e-12, 10_000_000)?.0,
            };
            let cfg = EvalConfig::default();
            let rep = if a.weak {
                check_weak_p_eps_optimal(&model, &f, &p, a.eps, &ustar, &cfg)?
            } else {
                check_p_eps_optimal(&model, &f, &p, a.eps, &ustar, &cfg)?
            };
            let mut out = format!("passes {}\n", rep.passes);
            if let Some(s) = rep.witness {
                let _ = writeln!(out, "witness {}", model.label(s));
            }
            let _ = write!(
                out,
                "deficit_at_witness {}\naggregate_gap {}\n",
                rep.deficit_at_witness.to_canonical_string(),
                rep.aggregate_gap.to_canonical_string()
            );
            io.report(&out)?;
            Ok(pass_status(rep.passes))
        }
        Command::Construct(a) => {
            let model = io.model(&a.model)?;
            let (f, d) = construct_eps_optimal_stationary(&model, a.eps, None, a.max_schedule)?;
            io.diagnostic(&format!(
                "beta_used={} schedule_steps={} achieved_ratio={} succeeded={}",
                d.beta_used.to_canonical_string(),
                d.schedule_steps,
                d.achieved_ratio.to_canonical_string(),
                d.succeeded
            ));
            io.write(&a.output.out, &textio::serialize_policy(&f, &model))?;
            Ok(ExitStatus::SUCCESS)
        }
        Command::Oracle(a) => {
            let model = io.model(&a.model)?;
            let v = brute_force_optimal(&model, a.beta, a.horizon, a.terminating_only)?;
            io.diagnostic(&format!(
                "discrepancy={}",
                v.residual.to_canonical_string()
            ));
            io.write(&a.output.out, &textio::serialize_value(&v, &model))?;
            Ok(ExitStatus::SUCCESS)
        }
    }
}

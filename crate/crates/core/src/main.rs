use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinwire::runner::{execute, Command, ScenarioConfig};
use spinwire::Error;

#[derive(Parser, Debug)]
#[command(name = "spinwire", version, about = "Entanglement and information transfer through XXZ spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// First entanglement peak of the end-to-end pair.
    Peak(Flags),
    /// Peak over an anisotropy grid.
    SweepDelta(Flags),
    /// Peak over chain lengths.
    SweepLength(Flags),
    /// End-pair entanglement at t_opt over temperatures.
    SweepTemp(Flags),
    /// End-pair entanglement and capacity at t_opt over noise rates.
    SweepGamma(Flags),
    /// Single-use classical capacity of the end-pair channel.
    Capacity(Flags),
    /// Recurrence distillation of the peak state.
    Distill(Flags),
    /// Concurrence between 0' and every site over time.
    Hopping(Flags),
    /// t_opt against the spin-wave 1/v_F.
    Velocity(Flags),
    /// Invariant suite.
    Check(Flags),
}

impl Cmd {
    fn split(&self) -> (Command, &Flags) {
        match self {
            Cmd::Peak(f) => (Command::Peak, f),
            Cmd::SweepDelta(f) => (Command::SweepDelta, f),
            Cmd::SweepLength(f) => (Command::SweepLength, f),
            Cmd::SweepTemp(f) => (Command::SweepTemp, f),
            Cmd::SweepGamma(f) => (Command::SweepGamma, f),
            Cmd::Capacity(f) => (Command::Capacity, f),
            Cmd::Distill(f) => (Command::Distill, f),
            Cmd::Hopping(f) => (Command::Hopping, f),
            Cmd::Velocity(f) => (Command::Velocity, f),
            Cmd::Check(f) => (Command::Check, f),
        }
    }
}

/// Every flag maps onto a configuration key of the same name; flags
/// override the configuration file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel sites 1..=N (independent of the length convention).
    #[arg(long)]
    n_channel: Option<String>,
    /// Chain length label, read through --length-convention.
    #[arg(long)]
    length: Option<String>,
    #[arg(long)]
    length_convention: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    j: Option<String>,
    #[arg(long)]
    h_break: Option<String>,
    #[arg(long)]
    t_max: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    /// auto, krylov or eigen.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    temperature: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Sweep start.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<String>,
    /// Sweep stop (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    to: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Also write the end-pair time series (peak only).
    #[arg(long)]
    series: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// Re-locate the peak under noise or temperature.
    #[arg(long)]
    reoptimize: bool,
    /// Target concurrence for distillation.
    #[arg(long)]
    target: Option<String>,
    /// Fixed number of distillation rounds.
    #[arg(long)]
    iterations: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let opt = [
            ("n-channel", &self.n_channel),
            ("length", &self.length),
            ("length-convention", &self.length_convention),
            ("delta", &self.delta),
            ("j", &self.j),
            ("h-break", &self.h_break),
            ("t-max", &self.t_max),
            ("dt", &self.dt),
            ("method", &self.method),
            ("temperature", &self.temperature),
            ("gamma", &self.gamma),
            ("from", &self.from),
            ("to", &self.to),
            ("step", &self.step),
            ("out", &self.out),
            ("series", &self.series),
            ("format", &self.format),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("target", &self.target),
            ("iterations", &self.iterations),
        ];
        let mut out: Vec<(&'static str, String)> = opt
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v.clone())))
            .collect();
        if self.reoptimize {
            out.push(("reoptimize", "true".into()));
        }
        out
    }

    fn config(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => ScenarioConfig::default(),
        };
        cfg.apply_pairs(self.pairs())?;
        Ok(cfg)
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        2
    } else {
        3
    }
}

/// Exit code and standard-error lines of one invocation.
struct Report {
    code: u8,
    stderr: Vec<String>,
}

impl Report {
    fn error(e: &Error, line: String) -> Self {
        Self {
            code: exit_code(e),
            stderr: vec![line],
        }
    }
}

fn run(cli: &Cli) -> Report {
    let (command, flags) = cli.command.split();
    let cfg = match flags.config() {
        Ok(c) => c,
        Err(e) => return Report::error(&e, format!("error: {e}")),
    };
    match execute(command, &cfg) {
        Ok(outcome) => {
            let mut stderr = outcome.notes.clone();
            for f in &outcome.failures {
                stderr.push(format!("error: {command} point {}: {}", f.point, f.error));
            }
            let code = outcome.failures.iter().map(|f| exit_code(&f.error)).max().unwrap_or(0);
            Report { code, stderr }
        }
        Err(e) if e.is_config() => Report::error(&e, format!("error: {e}")),
        Err(e) => {
            let point = format!(
                "delta={} j={} n_channel={}",
                cfg.delta,
                cfg.j,
                cfg.n_channel().map_or_else(|_| "?".to_string(), |n| n.to_string())
            );
            Report::error(&e, format!("error: {command} point {point}: {e}"))
        }
    }
}

fn main() -> ExitCode {
    let report = run(&Cli::parse());
    for line in &report.stderr {
        eprintln!("{line}");
    }
    ExitCode::from(report.code)
}

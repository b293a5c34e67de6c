//! Experiment drivers: peak finding, sweeps, output tables and the command
//! dispatch used by the binary.

pub mod check;
pub mod config;
pub mod output;
pub mod peak;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

pub use check::{check_table, run_checks, CheckLine};
pub use config::{parse_key_values, LengthConvention, ScenarioConfig, SweepAxis};
pub use output::{format_sig, round_sig, Cell, OutputFormat, Table};
pub use peak::{Environment, PairSample, PeakResult, Scenario, Trajectory, PEAK_THRESHOLD};
pub use sweep::{channel_capacity, spearman, Outcome, PointFailure};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Peak,
    SweepDelta,
    SweepLength,
    SweepTemp,
    SweepGamma,
    Capacity,
    Distill,
    Hopping,
    Velocity,
    Check,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Peak,
        Command::SweepDelta,
        Command::SweepLength,
        Command::SweepTemp,
        Command::SweepGamma,
        Command::Capacity,
        Command::Distill,
        Command::Hopping,
        Command::Velocity,
        Command::Check,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Peak => "peak",
            Command::SweepDelta => "sweep-delta",
            Command::SweepLength => "sweep-length",
            Command::SweepTemp => "sweep-temp",
            Command::SweepGamma => "sweep-gamma",
            Command::Capacity => "capacity",
            Command::Distill => "distill",
            Command::Hopping => "hopping",
            Command::Velocity => "velocity",
            Command::Check => "check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// Run `command`, write its table to `cfg.out` (stdout when unset) and
/// return the outcome. Failed checks are reported as point failures.
pub fn execute(command: Command, cfg: &ScenarioConfig) -> Result<Outcome> {
    cfg.validate()?;
    let outcome = match command {
        Command::Peak => {
            let (outcome, series) = sweep::peak(cfg)?;
            if let (Some(t), Some(path)) = (series, &cfg.series) {
                t.write(Some(path), cfg.format)?;
            }
            outcome
        }
        Command::SweepDelta => sweep::sweep_delta(cfg)?,
        Command::SweepLength => sweep::sweep_length(cfg)?,
        Command::SweepTemp => sweep::sweep_temperature(cfg)?,
        Command::SweepGamma => sweep::sweep_gamma(cfg)?,
        Command::Capacity => sweep::capacity_sweep(cfg)?,
        Command::Distill => sweep::distill(cfg)?,
        Command::Hopping => sweep::hopping_map(cfg)?,
        Command::Velocity => sweep::velocity_compare(cfg)?,
        Command::Check => {
            let lines = run_checks(cfg.seed)?;
            let failures = lines
                .iter()
                .filter(|l| !l.passed)
                .map(|l| PointFailure {
                    point: l.name.to_string(),
                    error: Error::Convergence(format!("invariant violated (worst {:.3e})", l.worst)),
                })
                .collect();
            Outcome {
                table: check_table(&lines),
                failures,
                notes: Vec::new(),
            }
        }
    };
    outcome.table.write(cfg.out.as_deref(), cfg.format)?;
    Ok(outcome)
}

//! Parameter sweeps and the single-point drivers behind each command.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::capacity::{equatorial_h1, maximize_c1, CapacityResult, Regime};
use crate::channel::{tomograph_pauli, PauliChannelParams, SingletChannel};
use crate::distill::{distill_rounds, distill_to_target, BellDiagonal, DistillOptions};
use crate::error::{Error, Result};
use crate::measures::concurrence;
use crate::model::{spin_wave, ModelParams};
use crate::solve::{LindbladParams, ThermalParams};
use crate::spinalg::{Mat4, Site};

use super::config::ScenarioConfig;
use super::output::{Cell, Table};
use super::peak::{Environment, PairSample, PeakResult, Scenario};

pub const PEAK_COLUMNS: &[&str] = &[
    "delta", "j", "n_channel", "t_opt", "e_peak", "f_at_peak", "p_i", "p_x", "p_y", "p_z",
];
pub const HOPPING_COLUMNS: &[&str] = &["t", "site", "concurrence"];
pub const CAPACITY_COLUMNS: &[&str] = &["delta", "t_opt", "h1", "theta_opt", "regime"];
pub const VELOCITY_COLUMNS: &[&str] = &["delta", "t_opt", "inv_vf"];
pub const DISTILL_COLUMNS: &[&str] = &[
    "iteration",
    "p_psi_minus",
    "p_phi_minus",
    "p_phi_plus",
    "p_psi_plus",
    "success_prob",
    "concurrence",
    "expected_pairs",
];
pub const TEMPERATURE_COLUMNS: &[&str] = &[
    "temperature", "delta", "j", "n_channel", "t_opt", "e_at_t_opt", "f_at_t_opt",
];
pub const GAMMA_COLUMNS: &[&str] = &[
    "gamma", "delta", "j", "n_channel", "t_opt", "e_at_t_opt", "f_at_t_opt", "c1",
];
pub const SERIES_COLUMNS: &[&str] = &["t", "concurrence", "singlet_fraction"];

/// Stand-in for `1/v_F` where the velocity vanishes.
pub const INV_VF_CAP: f64 = 1e6;

/// A grid point that could not be computed.
#[derive(Debug)]
pub struct PointFailure {
    pub point: String,
    pub error: Error,
}

/// Result table of a command plus anything that went wrong per point.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub failures: Vec<PointFailure>,
    /// Human-readable summary lines for standard error.
    pub notes: Vec<String>,
}

impl Outcome {
    fn single(table: Table) -> Self {
        Self {
            table,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// The environment selected by the configuration.
pub fn environment(cfg: &ScenarioConfig) -> Result<Environment> {
    match (cfg.thermal()?, cfg.lindblad()?) {
        (Some(_), Some(_)) => Err(Error::Config("temperature and gamma are mutually exclusive".into())),
        (Some(t), None) => Ok(Environment::Thermal(t)),
        (None, Some(l)) => Ok(Environment::Lindblad(l)),
        (None, None) => Ok(Environment::Closed),
    }
}

fn closed_scenario(cfg: &ScenarioConfig, params: ModelParams, n: usize) -> Result<Scenario> {
    Ok(Scenario::new(params, n, cfg.plan(n)?))
}

/// The peak under `environment`. Unless `reoptimize` is set, noisy and
/// thermal runs are read out at the noiseless `t_opt`.
pub fn peak_point(cfg: &ScenarioConfig, params: ModelParams, n: usize, environment: &Environment) -> Result<PeakResult> {
    let base = closed_scenario(cfg, params, n)?;
    if *environment == Environment::Closed || cfg.reoptimize {
        return base.with_environment(environment.clone()).find_first_peak();
    }
    let closed = base.find_first_peak()?;
    readout(&base, closed.t_opt, environment)
}

fn readout(base: &Scenario, t: f64, environment: &Environment) -> Result<PeakResult> {
    let rho = base.clone().with_environment(environment.clone()).end_pair_at(t)?;
    Ok(PeakResult::new(&base.params, base.n_channel, PairSample::new(t, rho)?))
}

fn peak_row(p: &PeakResult) -> Vec<Cell> {
    let mut row = vec![
        Cell::from(p.delta),
        Cell::from(p.j),
        Cell::from(p.n_channel),
        Cell::from(p.t_opt),
        Cell::from(p.e_peak),
        Cell::from(p.f_at_peak),
    ];
    row.extend(p.bell.iter().map(|&x| Cell::from(x)));
    row
}

/// Single-use capacity of the channel whose half-singlet output is `rho`.
/// Bell-diagonal outputs with `p_x = p_y` go through the Pauli
/// classification; anything else is evaluated on equatorial inputs.
pub fn channel_capacity(rho: &Mat4) -> Result<CapacityResult> {
    if let Ok(p) = tomograph_pauli(rho) {
        if (p.p_x - p.p_y).abs() <= 1e-6 {
            let xy = 0.5 * (p.p_x + p.p_y);
            let sym = PauliChannelParams::new([p.p_i, xy, xy, p.p_z])?;
            return maximize_c1(&sym);
        }
    }
    let (h1, _) = equatorial_h1(&SingletChannel::new(*rho));
    Ok(CapacityResult {
        h1,
        theta_opt: PI / 2.0,
        regime: Regime::Equator,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut k = i;
            while k + 1 < idx.len() && v[idx[k + 1]] == v[idx[i]] {
                k += 1;
            }
            let avg = (i + k) as f64 / 2.0 + 1.0;
            for &j in &idx[i..=k] {
                r[j] = avg;
            }
            i = k + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

struct Point<T> {
    key: Cell,
    label: String,
    input: T,
}

/// Evaluate `points` on a pool of `cfg.workers` threads, skipping keys
/// already present in the output file, then merge, dedup on the key column
/// and sort by it.
fn resumable<T, F>(cfg: &ScenarioConfig, columns: &[&str], key: &str, points: Vec<Point<T>>, eval: F) -> Result<Outcome>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<Cell>> + Sync,
{
    let existing = match &cfg.out {
        Some(path) => Table::read_existing(path, cfg.format, columns)?,
        None => None,
    };
    let mut table = existing.unwrap_or_else(|| Table::new(columns));
    let key_idx = table.column_index(key).expect("key is one of the columns");
    let done: BTreeSet<String> = table.rows.iter().map(|r| r[key_idx].to_string()).collect();
    let todo: Vec<&Point<T>> = points
        .iter()
        .filter(|p| !done.contains(&p.key.to_string()))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<Vec<Cell>>> = pool.install(|| todo.par_iter().map(|p| eval(&p.input)).collect());
    let mut failures = Vec::new();
    for (p, r) in todo.iter().zip(results) {
        match r {
            Ok(row) => table.push(row),
            Err(error) => failures.push(PointFailure {
                point: p.label.clone(),
                error,
            }),
        }
    }
    let mut seen = BTreeSet::new();
    table.rows.retain(|r| seen.insert(r[key_idx].to_string()));
    table.sort_by_key(key);
    Ok(Outcome {
        table,
        failures,
        notes: Vec::new(),
    })
}

fn delta_points(cfg: &ScenarioConfig) -> Result<Vec<Point<f64>>> {
    let values = match cfg.axis {
        Some(_) => cfg.axis()?.values(),
        None => vec![cfg.delta],
    };
    Ok(values
        .into_iter()
        .map(|d| Point {
            key: Cell::from(d),
            label: format!("delta={d}"),
            input: d,
        })
        .collect())
}

fn params_at(cfg: &ScenarioConfig, delta: f64) -> Result<ModelParams> {
    let mut c = cfg.clone();
    c.delta = delta;
    c.model()
}

/// `peak` rows over the Δ axis.
pub fn sweep_delta(cfg: &ScenarioConfig) -> Result<Outcome> {
    cfg.axis()?;
    let n = cfg.n_channel()?;
    let env = environment(cfg)?;
    resumable(cfg, PEAK_COLUMNS, "delta", delta_points(cfg)?, |&d| {
        Ok(peak_row(&peak_point(cfg, params_at(cfg, d)?, n, &env)?))
    })
}

/// `peak` rows over chain lengths; axis values are length labels read
/// through the configured convention.
pub fn sweep_length(cfg: &ScenarioConfig) -> Result<Outcome> {
    let params = cfg.model()?;
    let env = environment(cfg)?;
    let points = cfg
        .axis()?
        .values()
        .into_iter()
        .map(|v| {
            if v.fract() != 0.0 || v < 0.0 {
                return Err(Error::Config(format!("length {v} is not a whole number")));
            }
            let n = cfg.length_convention.n_channel(v as usize)?;
            Ok(Point {
                key: Cell::from(n),
                label: format!("n_channel={n}"),
                input: n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    resumable(cfg, PEAK_COLUMNS, "n_channel", points, |&n| {
        let mut c = cfg.clone();
        c.n_channel = Some(n);
        Ok(peak_row(&peak_point(&c, params, n, &env)?))
    })
}

fn noisy_points(cfg: &ScenarioConfig, name: &str) -> Result<Vec<Point<f64>>> {
    Ok(cfg
        .axis()?
        .values()
        .into_iter()
        .map(|v| Point {
            key: Cell::from(v),
            label: format!("{name}={v}"),
            input: v,
        })
        .collect())
}

/// End-pair state at `t_opt` over a temperature or noise axis. `t_opt`
/// comes from the closed ground-state run unless re-optimization is on.
fn noisy_sweep<F>(cfg: &ScenarioConfig, columns: &[&str], key: &str, env_at: F) -> Result<Outcome>
where
    F: Fn(f64) -> Result<Environment> + Sync,
{
    let other = if key == "gamma" { cfg.temperature.is_some() } else { cfg.gamma.is_some() };
    if other {
        return Err(Error::Config("temperature and gamma are mutually exclusive".into()));
    }
    let params = cfg.model()?;
    let n = cfg.n_channel()?;
    let base = closed_scenario(cfg, params, n)?;
    let t_closed = if cfg.reoptimize {
        None
    } else {
        Some(base.find_first_peak()?.t_opt)
    };
    let with_c1 = key == "gamma";
    resumable(cfg, columns, key, noisy_points(cfg, key)?, |&v| {
        let env = env_at(v)?;
        let p = match t_closed {
            Some(t) => readout(&base, t, &env)?,
            None => base.clone().with_environment(env).find_first_peak()?,
        };
        let mut row = vec![
            Cell::from(v),
            Cell::from(p.delta),
            Cell::from(p.j),
            Cell::from(p.n_channel),
            Cell::from(p.t_opt),
            Cell::from(p.e_peak),
            Cell::from(p.f_at_peak),
        ];
        if with_c1 {
            row.push(Cell::from(channel_capacity(&p.rho)?.h1));
        }
        Ok(row)
    })
}

pub fn sweep_temperature(cfg: &ScenarioConfig) -> Result<Outcome> {
    noisy_sweep(cfg, TEMPERATURE_COLUMNS, "temperature", |t| {
        Ok(Environment::Thermal(
            ThermalParams::new(t).map_err(|e| Error::Config(e.to_string()))?,
        ))
    })
}

pub fn sweep_gamma(cfg: &ScenarioConfig) -> Result<Outcome> {
    noisy_sweep(cfg, GAMMA_COLUMNS, "gamma", |g| {
        Ok(Environment::Lindblad(
            LindbladParams::new(g).map_err(|e| Error::Config(e.to_string()))?,
        ))
    })
}

/// Capacity of the end-pair channel at `t_opt`, over the Δ axis when one is
/// given.
pub fn capacity_sweep(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.n_channel()?;
    let env = environment(cfg)?;
    resumable(cfg, CAPACITY_COLUMNS, "delta", delta_points(cfg)?, |&d| {
        let p = peak_point(cfg, params_at(cfg, d)?, n, &env)?;
        let c = channel_capacity(&p.rho)?;
        Ok(vec![
            Cell::from(d),
            Cell::from(p.t_opt),
            Cell::from(c.h1),
            Cell::from(c.theta_opt),
            Cell::from(c.regime.to_string().as_str()),
        ])
    })
}

/// `t_opt` next to the spin-wave `1/v_F` over Δ, with their rank
/// correlation as a note.
pub fn velocity_compare(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.n_channel()?;
    let points = delta_points(cfg)?;
    if let Some(p) = points.iter().find(|p| !(p.input > -1.0 && p.input <= 1.0)) {
        return Err(Error::Config(format!("velocity comparison needs -1 < delta <= 1, got {}", p.input)));
    }
    let mut out = resumable(cfg, VELOCITY_COLUMNS, "delta", points, |&d| {
        let p = closed_scenario(cfg, params_at(cfg, d)?, n)?.find_first_peak()?;
        let inv = spin_wave(d)?.inverse_velocity();
        let inv = if inv.is_finite() { inv.min(INV_VF_CAP) } else { INV_VF_CAP };
        Ok(vec![Cell::from(d), Cell::from(p.t_opt), Cell::from(inv)])
    })?;
    let col = |name: &str| -> Vec<f64> {
        out.table
            .column(name)
            .expect("velocity column")
            .iter()
            .filter_map(|c| c.as_f64())
            .collect()
    };
    let (t, v) = (col("t_opt"), col("inv_vf"));
    if t.len() >= 2 {
        out.notes.push(format!("spearman(t_opt, inv_vf) = {:.6}", spearman(&t, &v)));
    }
    Ok(out)
}

/// Peak row for the configured point, plus the end-pair time series when a
/// series path is configured.
pub fn peak(cfg: &ScenarioConfig) -> Result<(Outcome, Option<Table>)> {
    let params = cfg.model()?;
    let n = cfg.n_channel()?;
    let env = environment(cfg)?;
    let p = peak_point(cfg, params, n, &env)?;
    let mut table = Table::new(PEAK_COLUMNS);
    table.push(peak_row(&p));
    let series = match cfg.series {
        Some(_) => {
            let s = closed_scenario(cfg, params, n)?.with_environment(env).time_series()?;
            let mut t = Table::new(SERIES_COLUMNS);
            for x in s {
                t.push(vec![
                    Cell::from(x.time),
                    Cell::from(x.concurrence),
                    Cell::from(x.singlet_fraction),
                ]);
            }
            Some(t)
        }
        None => None,
    };
    Ok((Outcome::single(table), series))
}

/// Concurrence between `0'` and every site `0..=N` over the sample grid.
pub fn hopping_map(cfg: &ScenarioConfig) -> Result<Outcome> {
    let params = cfg.model()?;
    let n = cfg.n_channel()?;
    let scenario = closed_scenario(cfg, params, n)?.with_environment(environment(cfg)?);
    let mut traj = scenario.start()?;
    let mut table = Table::new(HOPPING_COLUMNS);
    for t in scenario.plan.sample_times() {
        traj.advance_to(t)?;
        for site in 0..=n {
            let rho = traj.pair(Site::Prime, Site::Chain(site))?;
            table.push(vec![Cell::from(t), Cell::from(site), Cell::from(concurrence(&rho)?)]);
        }
    }
    Ok(Outcome::single(table))
}

/// Recurrence distillation of the peak state: a fixed number of rounds
/// when `iterations` is set, otherwise until the target concurrence.
pub fn distill(cfg: &ScenarioConfig) -> Result<Outcome> {
    let params = cfg.model()?;
    let n = cfg.n_channel()?;
    let p = peak_point(cfg, params, n, &environment(cfg)?)?;
    let state = BellDiagonal::from_matrix(&p.rho)?;
    let opts = DistillOptions::default();
    let trace = match cfg.iterations {
        Some(k) => distill_rounds(&state, k, &opts)?,
        None => distill_to_target(&state, cfg.target, &opts)?,
    };
    let mut table = Table::new(DISTILL_COLUMNS);
    let row = |k: usize, s: &BellDiagonal, success: f64| -> Vec<Cell> {
        let mut r = vec![Cell::from(k)];
        r.extend(s.probabilities().iter().map(|&x| Cell::from(x)));
        r.push(Cell::from(success));
        r.push(Cell::from(s.concurrence()));
        r.push(Cell::from(trace.expected_pairs(k)));
        r
    };
    table.push(row(0, &trace.initial, 1.0));
    for (k, step) in trace.steps.iter().enumerate() {
        table.push(row(k + 1, &step.output, step.success));
    }
    let mut out = Outcome::single(table);
    out.notes.push(format!(
        "start E = {:.6} at t_opt = {:.6}; {} rounds to E = {:.6}",
        p.e_peak,
        p.t_opt,
        trace.iterations(),
        trace.final_concurrence()
    ));
    Ok(out)
}

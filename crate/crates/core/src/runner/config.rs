//! Scenario configuration: flat `key = value` files merged with command-line
//! flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solve::{EvolutionPlan, LindbladParams, PropagationMethod, ThermalParams};
use crate::spinalg::MAX_CHANNEL_SITES;

use super::output::{round_sig, OutputFormat};

/// How a requested chain length maps to channel sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LengthConvention {
    /// The length counts channel sites `1..=N` only.
    Channel,
    /// The length counts every site including `0'` and `0`, so
    /// `N = length - 2`. Default.
    #[default]
    Total,
}

impl LengthConvention {
    pub fn n_channel(&self, length: usize) -> Result<usize> {
        let n = match self {
            Self::Channel => Some(length),
            Self::Total => length.checked_sub(2),
        };
        match n {
            Some(n) if (2..=MAX_CHANNEL_SITES).contains(&n) => Ok(n),
            _ => Err(Error::Config(format!(
                "length {length} ({self:?} convention) gives a channel outside 2..={MAX_CHANNEL_SITES} sites"
            ))),
        }
    }

    pub fn length(&self, n_channel: usize) -> usize {
        match self {
            Self::Channel => n_channel,
            Self::Total => n_channel + 2,
        }
    }
}

impl FromStr for LengthConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channel" => Ok(Self::Channel),
            "total" => Ok(Self::Total),
            _ => Err(Error::Config(format!("unknown length convention {s:?} (channel or total)"))),
        }
    }
}

/// An inclusive arithmetic grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepAxis {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(start <= stop) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::Config(format!(
                "sweep axis needs start <= stop and step > 0 (got {start}, {stop}, {step})"
            )));
        }
        Ok(Self { start, stop, step })
    }

    /// Grid values rounded to 12 significant digits so that they survive a
    /// text round trip unchanged.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| round_sig(self.start + k as f64 * self.step)).collect()
    }
}

/// Everything a runner command needs. Unset optional values fall back to
/// per-command defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub j: f64,
    pub delta: f64,
    pub h_break: Option<f64>,
    /// Explicit channel size; takes precedence over `length`.
    pub n_channel: Option<usize>,
    /// Chain length label read through `length_convention`.
    pub length: usize,
    pub length_convention: LengthConvention,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub method: PropagationMethod,
    pub temperature: Option<f64>,
    pub gamma: Option<f64>,
    pub axis: Option<SweepAxis>,
    pub out: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
    pub workers: usize,
    pub reoptimize: bool,
    pub target: f64,
    pub iterations: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            j: 1.0,
            delta: 1.0,
            h_break: None,
            n_channel: None,
            length: 10,
            length_convention: LengthConvention::Total,
            t_max: None,
            dt: None,
            method: PropagationMethod::Auto,
            temperature: None,
            gamma: None,
            axis: None,
            out: None,
            series: None,
            format: OutputFormat::Csv,
            seed: 1,
            workers: 1,
            reoptimize: false,
            target: 0.99,
            iterations: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse {key} = {value:?} as a boolean"))),
    }
}

pub fn parse_method(value: &str) -> Result<PropagationMethod> {
    match value {
        "auto" => Ok(PropagationMethod::Auto),
        "krylov" => Ok(PropagationMethod::Krylov),
        "eigen" | "eigendecomposition" => Ok(PropagationMethod::Eigendecomposition),
        _ => Err(Error::Config(format!(
            "unknown method {value:?} (auto, krylov or eigen)"
        ))),
    }
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped and
/// keys may use `-` or `_`.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

impl ScenarioConfig {
    /// Apply one setting. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('_', "-");
        match key.as_str() {
            "j" => self.j = parse(&key, value)?,
            "delta" => self.delta = parse(&key, value)?,
            "h-break" => self.h_break = Some(parse(&key, value)?),
            "n-channel" => self.n_channel = Some(parse(&key, value)?),
            "length" => {
                self.length = parse(&key, value)?;
                self.n_channel = None;
            }
            "length-convention" => self.length_convention = value.parse()?,
            "t-max" => self.t_max = Some(parse(&key, value)?),
            "dt" => self.dt = Some(parse(&key, value)?),
            "method" => self.method = parse_method(value)?,
            "temperature" => self.temperature = Some(parse(&key, value)?),
            "gamma" => self.gamma = Some(parse(&key, value)?),
            "from" | "to" | "step" => {
                let mut axis = self.axis.unwrap_or(SweepAxis {
                    start: f64::NAN,
                    stop: f64::NAN,
                    step: f64::NAN,
                });
                let x: f64 = parse(&key, value)?;
                match key.as_str() {
                    "from" => axis.start = x,
                    "to" => axis.stop = x,
                    _ => axis.step = x,
                }
                self.axis = Some(axis);
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "series" => self.series = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "seed" => self.seed = parse(&key, value)?,
            "workers" => self.workers = parse(&key, value)?,
            "reoptimize" => self.reoptimize = parse_bool(&key, value)?,
            "target" => self.target = parse(&key, value)?,
            "iterations" => self.iterations = Some(parse(&key, value)?),
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_pairs<I, K, V>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in pairs {
            self.set(k.as_ref(), v.as_ref())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_pairs(parse_key_values(&text)?)?;
        Ok(cfg)
    }

    pub fn n_channel(&self) -> Result<usize> {
        match self.n_channel {
            Some(n) => LengthConvention::Channel.n_channel(n),
            None => self.length_convention.n_channel(self.length),
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        let p = ModelParams::new(self.j, self.delta).map_err(|e| Error::Config(e.to_string()))?;
        match self.h_break {
            Some(h) => p.with_h_break(h).map_err(|e| Error::Config(e.to_string())),
            None => Ok(p),
        }
    }

    /// Evolution grid for a channel of `n_channel` sites. Without an explicit
    /// `t_max` the window is `2 (N + 2) / |J|`; the default sample step is
    /// `0.02 / |J|`.
    pub fn plan(&self, n_channel: usize) -> Result<EvolutionPlan> {
        let t_max = self.t_max.unwrap_or(2.0 * (n_channel + 2) as f64 / self.j.abs());
        let dt = self.dt.unwrap_or(0.02 / self.j.abs());
        EvolutionPlan::new(t_max, dt)
            .map(|p| p.with_method(self.method))
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn thermal(&self) -> Result<Option<ThermalParams>> {
        self.temperature
            .map(|t| ThermalParams::new(t).map_err(|e| Error::Config(e.to_string())))
            .transpose()
    }

    pub fn lindblad(&self) -> Result<Option<LindbladParams>> {
        self.gamma
            .map(|g| LindbladParams::new(g).map_err(|e| Error::Config(e.to_string())))
            .transpose()
    }

    /// The sweep grid, or a configuration error naming the missing keys.
    pub fn axis(&self) -> Result<SweepAxis> {
        let a = self
            .axis
            .ok_or_else(|| Error::Config("sweep needs from, to and step".into()))?;
        SweepAxis::new(a.start, a.stop, a.step)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.n_channel()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("dt = {dt} must be positive")));
            }
        }
        self.thermal()?;
        self.lindblad()?;
        if let Some(a) = self.axis {
            SweepAxis::new(a.start, a.stop, a.step)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let text = "# chain\nj = -1\ndelta=0.5  # anisotropy\nlength = 8\nlength-convention = channel\n\nfrom = -1\nto = 1\nstep = 0.25\n";
        let mut cfg = ScenarioConfig::default();
        cfg.apply_pairs(parse_key_values(text).unwrap()).unwrap();
        assert_eq!(cfg.j, -1.0);
        assert_eq!(cfg.n_channel().unwrap(), 8);
        cfg.apply_pairs([("delta", "2"), ("length-convention", "total")]).unwrap();
        assert_eq!(cfg.delta, 2.0);
        assert_eq!(cfg.n_channel().unwrap(), 6);
        cfg.set("n_channel", "5").unwrap();
        assert_eq!(cfg.n_channel().unwrap(), 5);
        cfg.set("length", "12").unwrap();
        assert_eq!(cfg.n_channel().unwrap(), 10);
        assert_eq!(cfg.axis().unwrap().values(), vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_are_config_errors() {
        let mut cfg = ScenarioConfig::default();
        assert!(cfg.set("colour", "blue").unwrap_err().is_config());
        assert!(cfg.set("delta", "abc").unwrap_err().is_config());
        assert!(parse_key_values("no equals sign").unwrap_err().is_config());
        cfg.set("j", "0").unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
        let mut cfg = ScenarioConfig::default();
        cfg.set("n-channel", "1").unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
        let mut cfg = ScenarioConfig::default();
        cfg.apply_pairs([("from", "1"), ("to", "0"), ("step", "0.1")]).unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
    }

    #[test]
    fn defaults() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.n_channel().unwrap(), 8);
        let plan = cfg.plan(8).unwrap();
        assert_eq!(plan.t_max, 20.0);
        assert_eq!(plan.dt_sample, 0.02);
    }

    #[test]
    fn axis_values_are_clean() {
        let a = SweepAxis::new(0.0, 0.3, 0.1).unwrap();
        assert_eq!(a.values(), vec![0.0, 0.1, 0.2, 0.3]);
    }
}

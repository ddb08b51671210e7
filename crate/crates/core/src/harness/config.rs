//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Example
//! r = 15
//! theta = 1.5
//! lambda1 = 0.1
//! lambda2 = 0.2
//! rho = 0.5
//! c1 = 5
//! c2 = 10
//! repetitions = 1000
//! seed = 7
//! sweep.n = 20, 30, 50, 80, 90, 100
//! ```
//!
//! The swept parameter may be omitted from the fixed keys. Every sweep point
//! is validated when the file is parsed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mcmc::MhConfig;
use crate::model::ModelConfig;
use crate::posterior::{EntropyMode, LossConstants};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("no `sweep.<param>` line")]
    NoSweep,
    #[error("more than one sweep line")]
    MultipleSweeps,
    #[error("sweep list is empty")]
    EmptySweep,
    #[error("invalid sweep value {value} for `{param}`: {message}")]
    BadSweepValue { param: SweepParam, value: f64, message: String },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

/// The parameter varied across the rows of one table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepParam {
    N,
    R,
    Theta,
    Rho,
    Lambda1,
    Lambda2,
    C1,
    C2,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::R => "r",
            SweepParam::Theta => "theta",
            SweepParam::Rho => "rho",
            SweepParam::Lambda1 => "lambda1",
            SweepParam::Lambda2 => "lambda2",
            SweepParam::C1 => "c1",
            SweepParam::C2 => "c2",
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, SweepParam::N | SweepParam::R)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "n" => SweepParam::N,
            "r" => SweepParam::R,
            "theta" => SweepParam::Theta,
            "rho" => SweepParam::Rho,
            "lambda1" => SweepParam::Lambda1,
            "lambda2" => SweepParam::Lambda2,
            "c1" => SweepParam::C1,
            "c2" => SweepParam::C2,
            other => return Err(format!("unknown sweep parameter `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Fixed settings of every sweep point, before the swept value is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSettings {
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub theta: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub rho: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub k: (f64, f64),
    pub l: (f64, f64),
    pub m: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: BaseSettings,
    pub sweep: Sweep,
    pub repetitions: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub inter_sample_gap: usize,
    pub within_sample_gap: usize,
    /// `None` means `(λ1 + λ2) / 2` at each sweep point.
    pub proposal_rate: Option<f64>,
    pub entropy_mode: EntropyMode,
    pub output_path: PathBuf,
}

/// Everything needed to simulate one row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub model: ModelConfig,
    pub n: usize,
    pub r: usize,
    pub loss: LossConstants,
    pub mh: MhConfig,
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "r",
    "theta",
    "lambda1",
    "lambda2",
    "rho",
    "c1",
    "c2",
    "k1",
    "k2",
    "l1",
    "l2",
    "m1",
    "m2",
    "repetitions",
    "seed",
    "burn_in",
    "inter_sample_gap",
    "within_sample_gap",
    "proposal_rate",
    "entropy_mode",
    "output",
];

impl ExperimentConfig {
    /// Settings for the sweep point taking `value`.
    pub fn point(&self, value: f64) -> Result<PointConfig, ConfigError> {
        let param = self.sweep.param;
        let bad = |message: String| ConfigError::BadSweepValue { param, value, message };
        let b = &self.base;
        let pick = |p: SweepParam, fixed: Option<f64>, key: &'static str| -> Result<f64, ConfigError> {
            if p == param {
                Ok(value)
            } else {
                fixed.ok_or(ConfigError::Missing(key))
            }
        };
        let as_count = |x: f64, key: &'static str| -> Result<usize, ConfigError> {
            if x.fract() != 0.0 || x < 1.0 || !x.is_finite() {
                Err(ConfigError::Invalid(format!("`{key}` must be a positive integer, got {x}")))
            } else {
                Ok(x as usize)
            }
        };
        let n = as_count(pick(SweepParam::N, b.n.map(|x| x as f64), "n")?, "n").map_err(|e| {
            if param == SweepParam::N { bad(e.to_string()) } else { e }
        })?;
        let r = as_count(pick(SweepParam::R, b.r.map(|x| x as f64), "r")?, "r").map_err(|e| {
            if param == SweepParam::R { bad(e.to_string()) } else { e }
        })?;
        if r > n {
            let msg = format!("r = {r} exceeds n = {n}");
            return Err(if param.is_integer() { bad(msg) } else { ConfigError::Invalid(msg) });
        }
        let theta = pick(SweepParam::Theta, b.theta, "theta")?;
        let lambda1 = pick(SweepParam::Lambda1, b.lambda1, "lambda1")?;
        let lambda2 = pick(SweepParam::Lambda2, b.lambda2, "lambda2")?;
        let rho = pick(SweepParam::Rho, b.rho, "rho")?;
        let model = ModelConfig::new(theta, lambda1, lambda2, rho).map_err(|e| {
            if matches!(param, SweepParam::Theta | SweepParam::Lambda1 | SweepParam::Lambda2 | SweepParam::Rho) {
                bad(e.to_string())
            } else {
                ConfigError::Invalid(e.to_string())
            }
        })?;
        let c1 = pick(SweepParam::C1, b.c1, "c1")?;
        let c2 = pick(SweepParam::C2, b.c2, "c2")?;
        let loss = LossConstants { c1, c2, k1: b.k.0, k2: b.k.1, l1: b.l.0, l2: b.l.1, m1: b.m.0, m2: b.m.1 }
            .validated()
            .map_err(|e| {
                if matches!(param, SweepParam::C1 | SweepParam::C2) {
                    bad(e.to_string())
                } else {
                    ConfigError::Invalid(e.to_string())
                }
            })?;
        let mh = MhConfig {
            burn_in: self.burn_in,
            inter_sample_gap: self.inter_sample_gap,
            within_sample_gap: self.within_sample_gap,
            proposal_rate: self.proposal_rate.unwrap_or(0.5 * (lambda1 + lambda2)),
            seed: self.seed,
        }
        .validated()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(PointConfig { model, n, r, loss, mh })
    }

    /// Validates every sweep point.
    pub fn points(&self) -> Result<Vec<PointConfig>, ConfigError> {
        if self.sweep.values.is_empty() {
            return Err(ConfigError::EmptySweep);
        }
        self.sweep.values.iter().map(|&v| self.point(v)).collect()
    }

    /// SHA-256 of the canonical `key = value` rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_string().as_bytes()))
    }
}

fn fmt_opt<T: fmt::Display>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|x| x.to_string())
}

impl fmt::Display for ExperimentConfig {
    /// Canonical form: one key per line in a fixed order, parseable again.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.base;
        let fixed = [
            ("n", fmt_opt(&b.n)),
            ("r", fmt_opt(&b.r)),
            ("theta", fmt_opt(&b.theta)),
            ("lambda1", fmt_opt(&b.lambda1)),
            ("lambda2", fmt_opt(&b.lambda2)),
            ("rho", fmt_opt(&b.rho)),
            ("c1", fmt_opt(&b.c1)),
            ("c2", fmt_opt(&b.c2)),
            ("k1", Some(b.k.0.to_string())),
            ("k2", Some(b.k.1.to_string())),
            ("l1", Some(b.l.0.to_string())),
            ("l2", Some(b.l.1.to_string())),
            ("m1", Some(b.m.0.to_string())),
            ("m2", Some(b.m.1.to_string())),
            ("repetitions", Some(self.repetitions.to_string())),
            ("seed", Some(self.seed.to_string())),
            ("burn_in", Some(self.burn_in.to_string())),
            ("inter_sample_gap", Some(self.inter_sample_gap.to_string())),
            ("within_sample_gap", Some(self.within_sample_gap.to_string())),
            ("proposal_rate", fmt_opt(&self.proposal_rate)),
            ("entropy_mode", Some(self.entropy_mode.as_str().to_string())),
            ("output", Some(self.output_path.display().to_string())),
        ];
        for (key, value) in fixed {
            if let Some(v) = value {
                writeln!(f, "{key} = {v}")?;
            }
        }
        let values: Vec<String> = self.sweep.values.iter().map(|v| v.to_string()).collect();
        writeln!(f, "sweep.{} = {}", self.sweep.param, values.join(", "))
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut sweep: Option<(usize, SweepParam, &str)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(param) = key.strip_prefix("sweep.") {
                if sweep.is_some() {
                    return Err(ConfigError::MultipleSweeps);
                }
                let param = param.parse::<SweepParam>().map_err(syntax)?;
                sweep = Some((line_no, param, value));
                continue;
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(syntax(format!("unknown key `{key}`")));
            }
            if entries.insert(key, (line_no, value)).is_some() {
                return Err(syntax(format!("duplicate key `{key}`")));
            }
        }

        fn parse<T: FromStr>(entries: &BTreeMap<&str, (usize, &str)>, key: &str) -> Result<Option<T>, ConfigError>
        where
            T::Err: fmt::Display,
        {
            match entries.get(key) {
                None => Ok(None),
                Some(&(line, v)) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Syntax {
                    line,
                    message: format!("bad value `{v}` for `{key}`: {e}"),
                }),
            }
        }
        let weight = |key: &str| -> Result<f64, ConfigError> { Ok(parse::<f64>(&entries, key)?.unwrap_or(1.0)) };

        let (sweep_line, param, list) = sweep.ok_or(ConfigError::NoSweep)?;
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| ConfigError::Syntax {
                    line: sweep_line,
                    message: format!("bad sweep value `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.is_empty() {
            return Err(ConfigError::EmptySweep);
        }

        let entropy_mode = match entries.get("entropy_mode") {
            None => EntropyMode::default(),
            Some(&(line, v)) => v.parse().map_err(|message| ConfigError::Syntax { line, message })?,
        };
        let repetitions = parse::<usize>(&entries, "repetitions")?.unwrap_or(1000);
        if repetitions == 0 {
            return Err(ConfigError::Invalid("repetitions must be at least 1".into()));
        }

        let config = ExperimentConfig {
            base: BaseSettings {
                n: parse(&entries, "n")?,
                r: parse(&entries, "r")?,
                theta: parse(&entries, "theta")?,
                lambda1: parse(&entries, "lambda1")?,
                lambda2: parse(&entries, "lambda2")?,
                rho: parse(&entries, "rho")?,
                c1: parse(&entries, "c1")?,
                c2: parse(&entries, "c2")?,
                k: (weight("k1")?, weight("k2")?),
                l: (weight("l1")?, weight("l2")?),
                m: (weight("m1")?, weight("m2")?),
            },
            sweep: Sweep { param, values },
            repetitions,
            seed: parse(&entries, "seed")?.unwrap_or(1),
            burn_in: parse(&entries, "burn_in")?.unwrap_or(5000),
            inter_sample_gap: parse(&entries, "inter_sample_gap")?.unwrap_or(100),
            within_sample_gap: parse(&entries, "within_sample_gap")?.unwrap_or(0),
            proposal_rate: parse(&entries, "proposal_rate")?,
            entropy_mode,
            output_path: parse::<String>(&entries, "output")?.unwrap_or_else(|| "out".into()).into(),
        };
        config.points()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# varying n
r = 15
theta = 1.5
lambda1 = 0.1
lambda2 = 0.2
rho = 0.5
c1 = 5
c2 = 10
repetitions = 200
seed = 42
sweep.n = 20, 30, 50, 80, 90, 100
";

    #[test]
    fn parses_table_layout() {
        let cfg: ExperimentConfig = BASE.parse().unwrap();
        assert_eq!(cfg.sweep.param, SweepParam::N);
        assert_eq!(cfg.sweep.values.len(), 6);
        assert_eq!(cfg.repetitions, 200);
        assert_eq!(cfg.entropy_mode, EntropyMode::DropDivergent);
        let p = cfg.point(50.0).unwrap();
        assert_eq!((p.n, p.r), (50, 15));
        assert!((p.mh.proposal_rate - 0.15).abs() < 1e-15);
        assert_eq!(p.mh.burn_in, 5000);
        assert_eq!(p.mh.inter_sample_gap, 100);
        assert_eq!(p.loss.k1, 1.0);
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg: ExperimentConfig = BASE.parse().unwrap();
        let again: ExperimentConfig = cfg.to_string().parse().unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        let other: ExperimentConfig = BASE.replace("seed = 42", "seed = 43").parse().unwrap();
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn rejects_bad_input() {
        let err = BASE.replace("sweep.n = 20, 30, 50, 80, 90, 100", "sweep.n = ").parse::<ExperimentConfig>();
        assert_eq!(err, Err(ConfigError::EmptySweep));
        let err = BASE.replace("sweep.n = 20, 30, 50, 80, 90, 100", "sweep.n = 10, 20").parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::BadSweepValue { .. })));
        let err = BASE.replace("rho = 0.5", "rho = 0.5\nrho = 0.1").parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::Syntax { line: 7, .. })));
        let err = BASE.replace("theta = 1.5", "thetta = 1.5").parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::Syntax { line: 3, .. })));
        let err = BASE.replace("theta = 1.5", "theta = x").parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::Syntax { line: 3, .. })));
        let err = BASE.replace("theta = 1.5\n", "").parse::<ExperimentConfig>();
        assert_eq!(err, Err(ConfigError::Missing("theta")));
        let err = format!("{BASE}sweep.rho = 0.1").parse::<ExperimentConfig>();
        assert_eq!(err, Err(ConfigError::MultipleSweeps));
        let err = BASE.replace("sweep.n = 20, 30, 50, 80, 90, 100\n", "n = 50\n").parse::<ExperimentConfig>();
        assert_eq!(err, Err(ConfigError::NoSweep));
        let err = BASE.replace("sweep.n = 20, 30, 50, 80, 90, 100", "n = 50\nsweep.rho = 0, 1.5")
            .parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::BadSweepValue { param: SweepParam::Rho, .. })));
        let err = BASE.replace("sweep.n = 20, 30, 50, 80, 90, 100", "n = 50\nsweep.c1 = 5, 0")
            .parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::BadSweepValue { param: SweepParam::C1, .. })));
        let err = BASE.replace("sweep.n = 20, 30, 50, 80, 90, 100", "sweep.n = 20, 30.5")
            .parse::<ExperimentConfig>();
        assert!(matches!(err, Err(ConfigError::BadSweepValue { .. })));
    }
}

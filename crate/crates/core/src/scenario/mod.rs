//! Scenario configuration plus the two drivers built on it: canned
//! counterexamples and seeded verification campaigns.

mod counterexample;
mod verify;

pub use counterexample::{run_counterexample, CounterexampleOutcome, COUNTEREXAMPLES};
pub use verify::{verify, Campaign, RunResult};

use std::path::PathBuf;

use num_traits::{Signed, ToPrimitive};
use serde::Deserialize;
use thiserror::Error;

use crate::bounds::{cbr_bounds, sp_bounds, tandem_bounds, BoundsReport};
use crate::minplus::{CurveError, TokenBucketParams};
use crate::rational::{fmt_q, int, parse_rational, q, Q};
use crate::simulator::SimError;
use crate::traffic::TraceError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn config_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

/// A number in a config file: `"p/q"`, a decimal string, or a JSON integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Num(pub Q);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Num(int(n))),
            Raw::Str(s) => parse_rational(&s)
                .map(Num)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// Parameters shared by all commands. Absent fields take the per-command
/// defaults, which reproduce the textbook constructions.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `cbr`, `sp` or `tandem`.
    pub setting: Option<String>,
    pub rate: Option<Num>,
    pub rates: Option<Vec<Num>>,
    pub rho: Option<Num>,
    pub sigma: Option<Num>,
    /// Packet length of the canned constructions.
    pub length: Option<Num>,
    /// First arrival instant of the canned constructions.
    pub arrival: Option<Num>,
    pub tau: Option<Num>,
    pub packets: Option<usize>,
    pub l_min: Option<Num>,
    pub l_max: Option<Num>,
    /// Lower-priority class: bucket and length range.
    pub lo_rho: Option<Num>,
    pub lo_sigma: Option<Num>,
    pub lo_l_min: Option<Num>,
    pub lo_l_max: Option<Num>,
    /// Largest lower-priority packet, for `bounds` and `sp-service`.
    pub l_max_lo: Option<Num>,
    pub horizon: Option<Num>,
    pub seed: Option<u64>,
    pub seeds: Option<u64>,
    /// Truncates generated traces; `0` gives empty traces.
    pub max_packets: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub(crate) fn num(&self, field: &Option<Num>, default: Q) -> Q {
        field.as_ref().map(|n| n.0.clone()).unwrap_or(default)
    }

    pub(crate) fn positive(
        &self,
        name: &str,
        field: &Option<Num>,
        default: Q,
    ) -> Result<Q, ScenarioError> {
        let x = self.num(field, default);
        if !x.is_positive() {
            return Err(config_err(format!("{name} must be > 0, got {}", fmt_q(&x))));
        }
        Ok(x)
    }

    pub(crate) fn nonnegative(
        &self,
        name: &str,
        field: &Option<Num>,
        default: Q,
    ) -> Result<Q, ScenarioError> {
        let x = self.num(field, default);
        if x.is_negative() {
            return Err(config_err(format!(
                "{name} must be >= 0, got {}",
                fmt_q(&x)
            )));
        }
        Ok(x)
    }

    /// A packet length: a positive integer number of bits.
    pub(crate) fn length(
        &self,
        name: &str,
        field: &Option<Num>,
        default: u64,
    ) -> Result<u64, ScenarioError> {
        let x = self.num(field, int(default as i64));
        match (x.is_integer(), x.to_integer().to_u64()) {
            (true, Some(n)) if n >= 1 => Ok(n),
            _ => Err(config_err(format!(
                "{name} must be a positive integer, got {}",
                fmt_q(&x)
            ))),
        }
    }

    pub(crate) fn rates_or(&self, default: Vec<Q>) -> Result<Vec<Q>, ScenarioError> {
        let rates = match (&self.rates, &self.rate) {
            (Some(list), _) => list.iter().map(|n| n.0.clone()).collect(),
            (None, Some(r)) => vec![r.0.clone()],
            (None, None) => default,
        };
        if rates.is_empty() || rates.iter().any(|r| !r.is_positive()) {
            return Err(config_err(
                "rates must be a nonempty list of positive numbers",
            ));
        }
        Ok(rates)
    }

    pub(crate) fn bucket(&self, rho: Q, sigma: Q) -> Result<TokenBucketParams, ScenarioError> {
        let rho = self.nonnegative("rho", &self.rho, rho)?;
        let sigma = self.nonnegative("sigma", &self.sigma, sigma)?;
        Ok(TokenBucketParams::new(rho, sigma)?)
    }

    pub fn setting_or(&self, default: &str) -> Result<String, ScenarioError> {
        let s = self.setting.clone().unwrap_or_else(|| default.to_string());
        match s.as_str() {
            "cbr" | "sp" | "tandem" => Ok(s),
            other => Err(config_err(format!(
                "unknown setting `{other}` (expected cbr, sp or tandem)"
            ))),
        }
    }
}

/// `bounds` command: defaults are (ρ=2/3, σ=2, c=1, l^M=2) for CBR,
/// (ρ=1/2, σ=2, c=1, l^M=2, l^Ml=1) for SP and (ρ=1, σ=1, c=(1,1), l^M=1)
/// for a tandem.
pub fn bounds_report(cfg: &ScenarioConfig) -> Result<BoundsReport, ScenarioError> {
    let report = match cfg.setting_or("cbr")?.as_str() {
        "cbr" => {
            let bucket = cfg.bucket(q(2, 3), int(2))?;
            let c = single_rate(cfg)?;
            let l = cfg.nonnegative("l_max", &cfg.l_max, int(2))?;
            cbr_bounds(&bucket, &c, &l)?
        }
        "sp" => {
            let bucket = cfg.bucket(q(1, 2), int(2))?;
            let c = single_rate(cfg)?;
            let l = cfg.nonnegative("l_max", &cfg.l_max, int(2))?;
            let lo = cfg.nonnegative("l_max_lo", &cfg.l_max_lo, int(1))?;
            sp_bounds(&bucket, &c, &l, &lo)?
        }
        _ => {
            let bucket = cfg.bucket(int(1), int(1))?;
            let rates = cfg.rates_or(vec![int(1), int(1)])?;
            let l = cfg.nonnegative("l_max", &cfg.l_max, int(1))?;
            let lo = cfg.l_max_lo.as_ref().map(|n| n.0.clone());
            tandem_bounds(&bucket, &rates, &l, lo.as_ref())?
        }
    };
    Ok(report)
}

pub(crate) fn single_rate(cfg: &ScenarioConfig) -> Result<Q, ScenarioError> {
    let rates = cfg.rates_or(vec![int(1)])?;
    match rates.as_slice() {
        [c] => Ok(c.clone()),
        _ => Err(config_err("this setting takes a single rate")),
    }
}

//! Seeded campaigns that simulate conformant traffic and test every
//! corrected bound on the result.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{config_err, single_rate, ScenarioConfig, ScenarioError};
use crate::bounds::{
    cbr_bounds, faulty_sp_curve, sp_bounds, tandem_bounds, BoundSet, BoundsReport,
};
use crate::checker::{check_service_curve, check_strict_service_curve, Verdict};
use crate::minplus::{Curve, TokenBucketParams};
use crate::rational::{fmt_q, int, q, Q};
use crate::report::{self, exact};
use crate::simulator::{simulate_cbr, simulate_strict_priority, simulate_tandem, DepartureTrace};
use crate::traffic::{check_arrival_curve, PacketTrace, RandomFlowSpec};

/// Seed offset separating the low-priority generator from the high one.
const LOW_CLASS_SEED: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub seed: u64,
    pub packets: usize,
    /// `l^M` and `l^Ml` read off the trace.
    pub l_max: u64,
    pub l_max_lo: u64,
    pub corrected_curve: Curve,
    /// `None` for tandems, where strict curves do not compose.
    pub strict: Option<Verdict>,
    pub service: Verdict,
    pub max_backlog: Q,
    pub backlog_bound: Q,
    pub max_delay: Q,
    pub delay_bound: Q,
    /// `σ/c`, CBR only.
    pub packetizer_delay_bound: Option<Q>,
    pub output_conforms: bool,
    /// Strict check of `c(t − l^Ml/c)+`, SP only.
    pub naive_strict: Option<Verdict>,
}

impl RunResult {
    /// Failed assertions, empty when the run passes.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.strict.as_ref().is_some_and(|v| !v.holds()) {
            out.push("strict service curve");
        }
        if !self.service.holds() {
            out.push("service curve");
        }
        if self.max_backlog > self.backlog_bound {
            out.push("backlog bound");
        }
        if self.max_delay > self.delay_bound {
            out.push("delay bound");
        }
        if self
            .packetizer_delay_bound
            .as_ref()
            .is_some_and(|b| &self.max_delay > b)
        {
            out.push("packetizer delay bound");
        }
        if !self.output_conforms {
            out.push("output arrival curve");
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Strict pass implies plain pass.
    pub fn strict_implies_service(&self) -> bool {
        !self.strict.as_ref().is_some_and(Verdict::holds) || self.service.holds()
    }

    pub fn naive_failed(&self) -> bool {
        self.naive_strict.as_ref().is_some_and(|v| !v.holds())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "packets": self.packets,
            "l_max": self.l_max,
            "l_max_lo": self.l_max_lo,
            "corrected_curve": self.corrected_curve.to_string(),
            "strict": self.strict.as_ref().map(report::verdict),
            "service": report::verdict(&self.service),
            "max_backlog": exact(&self.max_backlog),
            "backlog_bound": exact(&self.backlog_bound),
            "max_delay": exact(&self.max_delay),
            "delay_bound": exact(&self.delay_bound),
            "packetizer_delay_bound": self.packetizer_delay_bound.as_ref().map(exact),
            "output_conforms": self.output_conforms,
            "naive_strict": self.naive_strict.as_ref().map(report::verdict),
            "failures": self.failures(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Campaign {
    pub setting: String,
    pub bucket: TokenBucketParams,
    pub rates: Vec<Q>,
    /// Sorted by seed.
    pub runs: Vec<RunResult>,
}

impl Campaign {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(RunResult::passed)
    }

    pub fn naive_failures(&self) -> usize {
        self.runs.iter().filter(|r| r.naive_failed()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "setting": self.setting,
            "rho": exact(&self.bucket.rho),
            "sigma": exact(&self.bucket.sigma),
            "rates": report::exact_list(&self.rates),
            "seeds": self.runs.len(),
            "passed": self.passed(),
            "failed_runs": self.runs.iter().filter(|r| !r.passed()).count(),
            "naive_strict_failures": (self.setting == "sp").then(|| self.naive_failures()),
            "runs": self.runs.iter().map(RunResult::to_json).collect::<Vec<_>>(),
        })
    }
}

struct Plan {
    setting: String,
    bucket: TokenBucketParams,
    rates: Vec<Q>,
    flow: RandomFlowSpec,
    low: Option<RandomFlowSpec>,
    max_packets: Option<usize>,
}

/// Defaults: CBR and tandem use the bucket `(1/2, 4)` with lengths in
/// `[1, 4]`; SP adds a low class `(1/4, 2)` with lengths in `[1, 2]`.
/// Rates default to 1 (two hops for a tandem), horizon 40, 100 seeds from 0.
fn plan(cfg: &ScenarioConfig) -> Result<Plan, ScenarioError> {
    let setting = cfg.setting_or("cbr")?;
    let rates = match setting.as_str() {
        "tandem" => cfg.rates_or(vec![int(1), int(1)])?,
        _ => vec![single_rate(cfg)?],
    };
    let bucket = cfg.bucket(q(1, 2), int(4))?;
    let horizon = cfg.nonnegative("horizon", &cfg.horizon, int(40))?;
    let flow = RandomFlowSpec {
        bucket: bucket.clone(),
        l_min: cfg.length("l_min", &cfg.l_min, 1)?,
        l_max: cfg.length("l_max", &cfg.l_max, 4)?,
        horizon: horizon.clone(),
    };
    let low = if setting == "sp" {
        let rho = cfg.nonnegative("lo_rho", &cfg.lo_rho, q(1, 4))?;
        let sigma = cfg.nonnegative("lo_sigma", &cfg.lo_sigma, int(2))?;
        Some(RandomFlowSpec {
            bucket: TokenBucketParams::new(rho, sigma)?,
            l_min: cfg.length("lo_l_min", &cfg.lo_l_min, 1)?,
            l_max: cfg.length("lo_l_max", &cfg.lo_l_max, 2)?,
            horizon,
        })
    } else {
        None
    };
    let min_rate = rates.iter().min().expect("nonempty");
    let load = &bucket.rho
        + low
            .as_ref()
            .map(|l| l.bucket.rho.clone())
            .unwrap_or_default();
    if &load > min_rate {
        return Err(config_err(format!(
            "unstable: offered rate {} exceeds link rate {}",
            fmt_q(&load),
            fmt_q(min_rate)
        )));
    }
    // surface generator parameter errors once, before the campaign
    flow.generate(0)?;
    if let Some(low) = &low {
        low.generate(0)?;
    }
    Ok(Plan {
        setting,
        bucket,
        rates,
        flow,
        low,
        max_packets: cfg.max_packets,
    })
}

fn truncate(trace: PacketTrace, max: Option<usize>) -> Result<PacketTrace, ScenarioError> {
    match max {
        Some(n) if n < trace.len() => {
            let order = trace.arrival_order();
            let keep: std::collections::HashSet<usize> = order.into_iter().take(n).collect();
            let kept: Vec<_> = trace
                .packets()
                .iter()
                .enumerate()
                .filter(|(i, _)| keep.contains(i))
                .map(|(_, p)| p.clone())
                .collect();
            Ok(PacketTrace::new(kept)?)
        }
        _ => Ok(trace),
    }
}

fn checks(
    arrivals: &DepartureTrace,
    beta: &Curve,
    strict: bool,
) -> Result<(Option<Verdict>, Verdict), ScenarioError> {
    let (a, d) = (
        arrivals.cumulative_arrivals(),
        arrivals.cumulative_departures(),
    );
    let err = |e: crate::checker::CheckError| config_err(e.to_string());
    let strict = if strict {
        Some(check_strict_service_curve(&a, &d, beta).map_err(err)?)
    } else {
        None
    };
    Ok((strict, check_service_curve(&a, &d, beta).map_err(err)?))
}

fn corrected_of(report: &BoundsReport) -> &BoundSet {
    &report.corrected
}

fn run_seed(plan: &Plan, seed: u64) -> Result<RunResult, ScenarioError> {
    let hi = truncate(plan.flow.generate(seed)?, plan.max_packets)?;
    let l_max = hi.max_length();
    let lq = int(l_max as i64);
    match plan.setting.as_str() {
        "cbr" => {
            let c = &plan.rates[0];
            let bounds = cbr_bounds(&plan.bucket, c, &lq)?;
            let sim = simulate_cbr(&hi, c)?;
            let b = corrected_of(&bounds);
            let (strict, service) = checks(
                &sim.departures,
                b.service_curve.as_ref().expect("set"),
                true,
            )?;
            Ok(RunResult {
                seed,
                packets: hi.len(),
                l_max,
                l_max_lo: 0,
                corrected_curve: b.service_curve.clone().expect("set"),
                strict,
                service,
                max_backlog: sim.max_backlog.clone(),
                backlog_bound: b.backlog.clone(),
                max_delay: sim.max_delay.clone(),
                delay_bound: b.delay.clone(),
                packetizer_delay_bound: bounds.packetizer.as_ref().map(|p| p.delay.clone()),
                output_conforms: check_arrival_curve(
                    &sim.departures.output_trace(),
                    &b.output_curve,
                )
                .is_ok(),
                naive_strict: None,
            })
        }
        "sp" => {
            let low_flow = plan.low.as_ref().expect("sp plan has a low class");
            let lo = truncate(
                low_flow.generate(seed.wrapping_add(LOW_CLASS_SEED))?,
                plan.max_packets,
            )?
            .relabel("lo", 1)?;
            let hi = hi.relabel("hi", 0)?;
            let l_max_lo = lo.max_length();
            let trace = PacketTrace::merge([hi.clone(), lo])?;
            let c = &plan.rates[0];
            let bounds = sp_bounds(&plan.bucket, c, &lq, &int(l_max_lo as i64))?;
            let sim = simulate_strict_priority(&trace, c)?;
            let high = sim.departures.priority_class(0);
            let b = corrected_of(&bounds);
            let beta = b.service_curve.clone().expect("set");
            let (strict, service) = checks(&high, &beta, true)?;
            let naive = faulty_sp_curve(c, &int(l_max_lo as i64))?;
            let (naive_strict, _) = checks(&high, &naive, true)?;
            let stats = sim.class(0);
            Ok(RunResult {
                seed,
                packets: hi.len(),
                l_max,
                l_max_lo,
                corrected_curve: beta,
                strict,
                service,
                max_backlog: stats.map(|s| s.max_backlog.clone()).unwrap_or_default(),
                backlog_bound: b.backlog.clone(),
                max_delay: stats.map(|s| s.max_delay.clone()).unwrap_or_default(),
                delay_bound: b.delay.clone(),
                packetizer_delay_bound: None,
                output_conforms: check_arrival_curve(&high.output_trace(), &b.output_curve).is_ok(),
                naive_strict,
            })
        }
        _ => {
            let bounds = tandem_bounds(&plan.bucket, &plan.rates, &lq, None)?;
            let sim = simulate_tandem(&hi, &plan.rates)?;
            let b = corrected_of(&bounds);
            let e2e = &sim.end_to_end;
            let beta = b.service_curve.clone().expect("set");
            let (strict, service) = checks(&e2e.departures, &beta, false)?;
            Ok(RunResult {
                seed,
                packets: hi.len(),
                l_max,
                l_max_lo: 0,
                corrected_curve: beta,
                strict,
                service,
                max_backlog: e2e.max_backlog.clone(),
                backlog_bound: b.backlog.clone(),
                max_delay: e2e.max_delay.clone(),
                delay_bound: b.delay.clone(),
                packetizer_delay_bound: None,
                output_conforms: check_arrival_curve(
                    &e2e.departures.output_trace(),
                    &b.output_curve,
                )
                .is_ok(),
                naive_strict: None,
            })
        }
    }
}

/// Runs seeds `seed .. seed + seeds` (defaults 0 and 100) in parallel.
pub fn verify(cfg: &ScenarioConfig) -> Result<Campaign, ScenarioError> {
    let plan = plan(cfg)?;
    let first = cfg.seed.unwrap_or(0);
    let count = cfg.seeds.unwrap_or(100);
    let mut runs = (first..first.saturating_add(count))
        .into_par_iter()
        .map(|seed| run_seed(&plan, seed))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.seed);
    Ok(Campaign {
        setting: plan.setting,
        bucket: plan.bucket,
        rates: plan.rates,
        runs,
    })
}

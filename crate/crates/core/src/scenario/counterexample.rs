//! The failure constructions for the fluid curves.

use serde_json::{json, Value};

use super::{config_err, single_rate, ScenarioConfig, ScenarioError};
use crate::bounds::{
    cbr_bounds, cbr_corrected_curve, faulty_cbr_curve, faulty_sp_curve, sp_corrected_curve,
    tandem_bounds,
};
use crate::checker::{check_service_curve, check_strict_service_curve, Verdict};
use crate::minplus::{Curve, TokenBucketParams};
use crate::rational::{int, q, Q};
use crate::report::{self, exact};
use crate::simulator::{simulate_cbr, simulate_strict_priority, simulate_tandem};
use crate::traffic::{
    check_arrival_curve, constant_flow, periodic_flow, CumulativeProcess, PacketTrace,
};

pub const COUNTEREXAMPLES: [&str; 6] = [
    "cbr-service",
    "cbr-strict",
    "cbr-output",
    "cbr-backlog",
    "sp-service",
    "concat-delay",
];

#[derive(Debug, Clone)]
pub struct CounterexampleOutcome {
    pub name: String,
    /// The predicted violation was found and the corrected counterpart held.
    pub reproduced: bool,
    pub report: Value,
}

impl CounterexampleOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.reproduced {
            0
        } else {
            1
        }
    }
}

pub fn run_counterexample(
    name: &str,
    cfg: &ScenarioConfig,
) -> Result<CounterexampleOutcome, ScenarioError> {
    let (reproduced, body) = match name {
        "cbr-service" => lone_packet(cfg, false)?,
        "cbr-strict" => lone_packet(cfg, true)?,
        "cbr-output" => periodic(cfg, false)?,
        "cbr-backlog" => periodic(cfg, true)?,
        "sp-service" => sp_service(cfg)?,
        "concat-delay" => concat_delay(cfg)?,
        other => {
            return Err(config_err(format!(
                "unknown counterexample `{other}` (expected one of {})",
                COUNTEREXAMPLES.join(", ")
            )))
        }
    };
    let mut report = json!({ "scenario": name, "reproduced": reproduced });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    Ok(CounterexampleOutcome {
        name: name.to_string(),
        reproduced,
        report,
    })
}

fn check(
    strict: bool,
    a: &CumulativeProcess,
    d: &CumulativeProcess,
    beta: &Curve,
) -> Result<Verdict, ScenarioError> {
    let v = if strict {
        check_strict_service_curve(a, d, beta)
    } else {
        check_service_curve(a, d, beta)
    };
    v.map_err(|e| config_err(e.to_string()))
}

/// One packet `(a, l)` on a link of rate `c`; defaults `a = 0, l = 2, c = 1`.
fn lone_packet(cfg: &ScenarioConfig, strict: bool) -> Result<(bool, Value), ScenarioError> {
    let a = cfg.nonnegative("arrival", &cfg.arrival, int(0))?;
    let l = cfg.length("length", &cfg.length, 2)?;
    let c = single_rate(cfg)?;
    let trace = PacketTrace::from_arrivals("f0", 0, [(a.clone(), l)])?;
    let sim = simulate_cbr(&trace, &c)?;
    let (arr, dep) = (
        sim.departures.cumulative_arrivals(),
        sim.departures.cumulative_departures(),
    );
    let faulty = faulty_cbr_curve(&c)?;
    let corrected = cbr_corrected_curve(&c, &int(l as i64))?;
    let naive = check(strict, &arr, &dep, &faulty)?;
    let fixed = check(strict, &arr, &dep, &corrected)?;
    let body = json!({
        "parameters": { "arrival": exact(&a), "length": l, "rate": exact(&c) },
        "check": if strict { "strict" } else { "service" },
        "faulty_curve": report::curve(&faulty),
        "faulty": report::verdict(&naive),
        "corrected_curve": report::curve(&corrected),
        "corrected": report::verdict(&fixed),
        "departure": exact(&sim.departures.records()[0].departure),
    });
    Ok((!naive.holds() && fixed.holds(), body))
}

/// Periodic flow with an oversized first packet; defaults `τ = 3/2, l = 1,
/// σ = 2, c = 1`, 10 packets, bucket `(l/τ, σ)`.
fn periodic(cfg: &ScenarioConfig, backlog: bool) -> Result<(bool, Value), ScenarioError> {
    let tau = cfg.positive("tau", &cfg.tau, q(3, 2))?;
    let l = cfg.length("length", &cfg.length, 1)?;
    let sigma = cfg.length("sigma", &cfg.sigma, 2)?;
    let count = cfg.packets.unwrap_or(10);
    let c = single_rate(cfg)?;
    let trace = periodic_flow(&tau, l, sigma, &int(0), count)?;
    let bucket = TokenBucketParams::new(int(l as i64) / &tau, int(sigma as i64))?;
    let bounds = cbr_bounds(&bucket, &c, &int(trace.max_length() as i64))?;
    let sim = simulate_cbr(&trace, &c)?;
    let params = json!({
        "tau": exact(&tau), "length": l, "sigma": sigma, "packets": count,
        "rate": exact(&c), "rho": exact(&bucket.rho),
    });
    let departures: Vec<Value> = sim
        .departures
        .records()
        .iter()
        .map(|d| exact(&d.departure))
        .collect();
    if backlog {
        let reproduced =
            sim.max_backlog > bounds.faulty.backlog && sim.max_backlog <= bounds.corrected.backlog;
        return Ok((
            reproduced,
            json!({
                "parameters": params,
                "departures": departures,
                "max_backlog": exact(&sim.max_backlog),
                "faulty_backlog_bound": exact(&bounds.faulty.backlog),
                "corrected_backlog_bound": exact(&bounds.corrected.backlog),
            }),
        ));
    }
    let output = sim.departures.output_trace();
    let alpha = Curve::token_bucket(&bucket)?;
    let naive = check_arrival_curve(&output, &alpha);
    let fixed = check_arrival_curve(&output, &bounds.corrected.output_curve);
    let reproduced = naive.is_err() && fixed.is_ok();
    Ok((
        reproduced,
        json!({
            "parameters": params,
            "departures": departures,
            "faulty_output_curve": report::curve(&alpha),
            "faulty": naive.as_ref().err().map(report::arrival_violation),
            "corrected_output_curve": report::curve(&bounds.corrected.output_curve),
            "corrected_holds": fixed.is_ok(),
            "corrected_violation": fixed.as_ref().err().map(report::arrival_violation),
        }),
    ))
}

/// High-priority packet `(a = 0, l = 2)` alone on an SP link with `c = 1`
/// and `l^Ml = 1`.
fn sp_service(cfg: &ScenarioConfig) -> Result<(bool, Value), ScenarioError> {
    let a = cfg.nonnegative("arrival", &cfg.arrival, int(0))?;
    let l = cfg.length("length", &cfg.length, 2)?;
    let lo = cfg.nonnegative("l_max_lo", &cfg.l_max_lo, int(1))?;
    let c = single_rate(cfg)?;
    let trace = PacketTrace::from_arrivals("hi", 0, [(a.clone(), l)])?;
    let sim = simulate_strict_priority(&trace, &c)?;
    let hi = sim.departures.priority_class(0);
    let (arr, dep) = (hi.cumulative_arrivals(), hi.cumulative_departures());
    let faulty = faulty_sp_curve(&c, &lo)?;
    let corrected = sp_corrected_curve(&c, &int(l as i64), &lo)?;
    let naive_strict = check(true, &arr, &dep, &faulty)?;
    let naive_plain = check(false, &arr, &dep, &faulty)?;
    let fixed_strict = check(true, &arr, &dep, &corrected)?;
    let fixed_plain = check(false, &arr, &dep, &corrected)?;
    let reproduced = !naive_strict.holds() && fixed_strict.holds() && fixed_plain.holds();
    Ok((
        reproduced,
        json!({
            "parameters": { "arrival": exact(&a), "length": l, "l_max_lo": exact(&lo), "rate": exact(&c) },
            "faulty_curve": report::curve(&faulty),
            "faulty_strict": report::verdict(&naive_strict),
            "faulty_service": report::verdict(&naive_plain),
            "corrected_curve": report::curve(&corrected),
            "corrected_strict": report::verdict(&fixed_strict),
            "corrected_service": report::verdict(&fixed_plain),
        }),
    ))
}

/// Packets of length `l = 1` every `τ = 1` through two links of rate 1,
/// bucket `(l/τ, l)`; 10 packets.
fn concat_delay(cfg: &ScenarioConfig) -> Result<(bool, Value), ScenarioError> {
    let l = cfg.length("length", &cfg.length, 1)?;
    let tau = cfg.positive("tau", &cfg.tau, int(1))?;
    let count = cfg.packets.unwrap_or(10);
    let rates = cfg.rates_or(vec![int(1), int(1)])?;
    let lq = int(l as i64);
    let sigma = cfg.nonnegative("sigma", &cfg.sigma, lq.clone())?;
    if sigma < lq {
        return Err(config_err("sigma must be at least the packet length"));
    }
    let trace = constant_flow(&tau, l, &int(0), count)?;
    let bucket = TokenBucketParams::new(&lq / &tau, sigma)?;
    let bounds = tandem_bounds(&bucket, &rates, &lq, None)?;
    let sim = simulate_tandem(&trace, &rates)?;
    let delays: Vec<Q> = sim
        .end_to_end
        .departures
        .records()
        .iter()
        .map(|d| d.delay())
        .collect();
    let exceeds = !delays.is_empty() && delays.iter().all(|d| d > &bounds.faulty.delay);
    let within = delays.iter().all(|d| d <= &bounds.corrected.delay);
    Ok((
        exceeds && within,
        json!({
            "parameters": {
                "length": l, "tau": exact(&tau), "packets": count,
                "rates": report::exact_list(&rates), "rho": exact(&bucket.rho), "sigma": exact(&bucket.sigma),
            },
            "delays": report::exact_list(&delays),
            "faulty_delay_bound": exact(&bounds.faulty.delay),
            "corrected_delay_bound": exact(&bounds.corrected.delay),
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(name: &str) -> CounterexampleOutcome {
        run_counterexample(name, &ScenarioConfig::default()).unwrap()
    }

    #[test]
    fn all_defaults_reproduce() {
        for name in COUNTEREXAMPLES {
            assert!(run(name).reproduced, "{name}");
        }
    }

    #[test]
    fn cbr_service_witness() {
        let r = run("cbr-service").report;
        let v = &r["faulty"]["violation"];
        assert_eq!(v["t"]["exact"], "1");
        assert_eq!(v["required"]["exact"], "1");
        assert_eq!(v["provided"]["exact"], "0");
    }

    #[test]
    fn backlog_and_concat_values() {
        let r = run("cbr-backlog").report;
        assert_eq!(r["max_backlog"]["exact"], "3");
        assert_eq!(r["faulty_backlog_bound"]["exact"], "2");
        let r = run("concat-delay").report;
        assert!(r["delays"]
            .as_array()
            .unwrap()
            .iter()
            .all(|d| d["exact"] == "2"));
        assert_eq!(r["corrected_delay_bound"]["exact"], "3");
    }

    #[test]
    fn output_witness_window() {
        let r = run("cbr-output").report;
        assert_eq!(r["faulty"]["amount"]["exact"], "3");
        assert_eq!(r["faulty"]["allowance"]["exact"], "8/3");
    }

    #[test]
    fn fails_when_prediction_is_absent() {
        // zero-length packets are a config error, not a failed reproduction
        let cfg = ScenarioConfig::from_json(r#"{"length": 0}"#).unwrap();
        assert!(run_counterexample("cbr-service", &cfg).is_err());
        assert!(run_counterexample("nope", &ScenarioConfig::default()).is_err());
        // a lower-class allowance larger than the packet: the naive curve holds
        let cfg = ScenarioConfig::from_json(r#"{"l_max_lo": 2}"#).unwrap();
        assert!(!run_counterexample("sp-service", &cfg).unwrap().reproduced);
    }
}

//! JSON rendering. Every rational appears as `{"exact": "p/q", "decimal": x}`;
//! the decimal is for humans and plotting only.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::bounds::{BoundSet, BoundsReport};
use crate::checker::{ServiceViolation, Verdict};
use crate::minplus::Curve;
use crate::rational::{fmt_q, to_f64, Q};
use crate::simulator::{ClassStats, DepartureTrace, SimResult};
use crate::traffic::{ArrivalViolation, Period};

pub fn exact(x: &Q) -> Value {
    json!({ "exact": fmt_q(x), "decimal": to_f64(x) })
}

pub fn exact_list(xs: &[Q]) -> Value {
    Value::Array(xs.iter().map(exact).collect())
}

pub fn curve(c: &Curve) -> Value {
    let segments: Vec<Value> = c
        .segments()
        .iter()
        .map(|s| {
            json!({
                "start_x": exact(&s.start_x),
                "start_y": exact(&s.start_y),
                "slope": exact(&s.slope),
            })
        })
        .collect();
    json!({ "text": c.to_string(), "segments": segments })
}

pub fn period(p: &Period) -> Value {
    json!({ "start": exact(&p.start), "end": exact(&p.end) })
}

pub fn violation(v: &ServiceViolation) -> Value {
    json!({
        "kind": v.kind.as_str(),
        "s": v.s.as_ref().map(exact),
        "t": exact(&v.t),
        "required": exact(&v.required),
        "provided": exact(&v.provided),
    })
}

pub fn verdict(v: &Verdict) -> Value {
    match v {
        Verdict::Holds => json!({ "holds": true }),
        Verdict::Violated(x) => json!({ "holds": false, "violation": violation(x) }),
    }
}

pub fn arrival_violation(v: &ArrivalViolation) -> Value {
    json!({
        "first": v.first,
        "last": v.last,
        "amount": exact(&v.amount),
        "allowance": exact(&v.allowance),
    })
}

fn bound_set(b: &BoundSet) -> Value {
    let mut m = Map::new();
    if let Some(beta) = &b.service_curve {
        m.insert("service_curve".into(), curve(beta));
    }
    m.insert("output_curve".into(), curve(&b.output_curve));
    m.insert("output_burst".into(), exact(b.output_burst()));
    m.insert("backlog_bound".into(), exact(&b.backlog));
    m.insert("delay_bound".into(), exact(&b.delay));
    Value::Object(m)
}

pub fn bounds(r: &BoundsReport) -> Value {
    let i = &r.inputs;
    json!({
        "setting": r.setting.as_str(),
        "inputs": {
            "rho": exact(&i.bucket.rho),
            "sigma": exact(&i.bucket.sigma),
            "rates": exact_list(&i.rates),
            "l_max": exact(&i.l_max),
            "l_max_lo": exact(&i.l_max_lo),
        },
        "corrected": bound_set(&r.corrected),
        "faulty": bound_set(&r.faulty),
        "packetizer": r.packetizer.as_ref().map(bound_set),
        "comparison": r.comparison.map(|c| json!({
            "corrected_output_tighter": c.output_tighter,
            "corrected_backlog_tighter": c.backlog_tighter,
            "packetizer_delay_tighter": c.packetizer_delay_tighter,
        })),
    })
}

fn class_stats(c: &ClassStats) -> Value {
    json!({
        "priority": c.priority,
        "max_backlog": exact(&c.max_backlog),
        "max_delay": exact(&c.max_delay),
        "busy_periods": c.busy_periods.iter().map(period).collect::<Vec<_>>(),
    })
}

/// Summary without the per-packet records.
pub fn sim_summary(r: &SimResult) -> Value {
    json!({
        "packets": r.departures.len(),
        "max_backlog": exact(&r.max_backlog),
        "max_delay": exact(&r.max_delay),
        "busy_periods": r.busy_periods.iter().map(period).collect::<Vec<_>>(),
        "classes": r.classes.iter().map(class_stats).collect::<Vec<_>>(),
    })
}

pub const DEPARTURE_HEADER: [&str; 5] = ["flow_id", "index", "arrival", "departure", "delay"];

/// Departure CSV with exact-fraction times.
pub fn write_departures(writer: impl Write, d: &DepartureTrace) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(DEPARTURE_HEADER)?;
    for r in d.records() {
        wtr.write_record([
            r.flow_id.clone(),
            r.index.to_string(),
            fmt_q(&r.arrival),
            fmt_q(&r.departure),
            fmt_q(&r.delay()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

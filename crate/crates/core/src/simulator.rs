//! Exact event-driven simulation of a work-conserving constant-bit-rate link,
//! with FIFO or non-preemptive strict-priority selection, and of tandems of
//! FIFO links.
//!
//! A packet becomes eligible at `a(n)`, when its last bit has arrived, and
//! counts as served at `d(n)`, when its last bit has left.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::Q;
use crate::traffic::{backlogged_periods, CumulativeProcess, PacketRecord, PacketTrace, Period};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("link rate must be positive, got {0}")]
    InvalidRate(String),
    #[error("a tandem needs at least one hop")]
    EmptyTandem,
    #[error("output never reaches {0}: virtual delay is unbounded")]
    Unbounded(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    Fifo,
    StrictPriority,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub rate: Q,
    pub discipline: Discipline,
}

/// Service record of one input packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Departure {
    pub flow_id: String,
    pub index: u64,
    pub priority: u32,
    pub length: u64,
    pub arrival: Q,
    /// Instant the first bit goes on the wire.
    pub start: Q,
    pub departure: Q,
}

impl Departure {
    fn new(p: &PacketRecord, start: Q, departure: Q) -> Self {
        Departure {
            flow_id: p.flow_id.clone(),
            index: p.index,
            priority: p.priority,
            length: p.length,
            arrival: p.arrival.clone(),
            start,
            departure,
        }
    }

    /// `D(n) = d(n) − a(n)`.
    pub fn delay(&self) -> Q {
        &self.departure - &self.arrival
    }
}

/// Departures listed in the input trace order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepartureTrace {
    records: Vec<Departure>,
}

impl DepartureTrace {
    pub fn records(&self) -> &[Departure] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn filter(&self, keep: impl Fn(&Departure) -> bool) -> DepartureTrace {
        DepartureTrace {
            records: self.records.iter().filter(|d| keep(d)).cloned().collect(),
        }
    }

    pub fn priority_class(&self, priority: u32) -> DepartureTrace {
        self.filter(|d| d.priority == priority)
    }

    /// `A(t)` of the served packets.
    pub fn cumulative_arrivals(&self) -> CumulativeProcess {
        CumulativeProcess::from_events(self.records.iter().map(|d| (d.arrival.clone(), d.length)))
    }

    /// `A*(t)`: jumps by `l(n)` at `d(n)`.
    pub fn cumulative_departures(&self) -> CumulativeProcess {
        CumulativeProcess::from_events(self.records.iter().map(|d| (d.departure.clone(), d.length)))
    }

    /// The output as a trace whose arrival instants are the departures.
    pub fn output_trace(&self) -> PacketTrace {
        let mut order: Vec<&Departure> = self.records.iter().collect();
        order.sort_by(|a, b| a.departure.cmp(&b.departure));
        let packets = order
            .into_iter()
            .map(|d| PacketRecord {
                index: d.index,
                arrival: d.departure.clone(),
                length: d.length,
                flow_id: d.flow_id.clone(),
                priority: d.priority,
            })
            .collect();
        PacketTrace::new(packets).expect("per-flow FIFO service keeps flows ordered")
    }

    pub fn max_delay(&self) -> Q {
        self.records
            .iter()
            .map(Departure::delay)
            .max()
            .unwrap_or_else(Q::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassStats {
    pub priority: u32,
    pub max_backlog: Q,
    pub max_delay: Q,
    pub busy_periods: Vec<Period>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub departures: DepartureTrace,
    /// Supremum of `B(t)`, including left limits at departures.
    pub max_backlog: Q,
    pub max_delay: Q,
    pub busy_periods: Vec<Period>,
    /// Per priority class, ascending.
    pub classes: Vec<ClassStats>,
}

/// `(sup B, backlogged periods)` of a drained system.
fn backlog_stats(departures: &DepartureTrace) -> (Q, Vec<Period>) {
    let a = departures.cumulative_arrivals();
    let d = departures.cumulative_departures();
    // B is right-continuous and piecewise constant, so its supremum is a
    // right value at some event; left limits equal earlier right values.
    let max_backlog = a
        .instants()
        .chain(d.instants())
        .map(|t| a.right(t) - d.right(t))
        .max()
        .unwrap_or_else(Q::zero);
    let (periods, open) = backlogged_periods(&a, &d);
    debug_assert!(open.is_none(), "simulations always drain");
    (max_backlog, periods)
}

impl SimResult {
    pub fn from_departures(departures: DepartureTrace) -> Self {
        let (max_backlog, busy_periods) = backlog_stats(&departures);
        let mut priorities: Vec<u32> = departures.records.iter().map(|d| d.priority).collect();
        priorities.sort_unstable();
        priorities.dedup();
        let classes = priorities
            .into_iter()
            .map(|priority| {
                let class = departures.priority_class(priority);
                let (max_backlog, busy_periods) = backlog_stats(&class);
                ClassStats {
                    priority,
                    max_backlog,
                    max_delay: class.max_delay(),
                    busy_periods,
                }
            })
            .collect();
        SimResult {
            max_delay: departures.max_delay(),
            departures,
            max_backlog,
            busy_periods,
            classes,
        }
    }

    pub fn class(&self, priority: u32) -> Option<&ClassStats> {
        self.classes.iter().find(|c| c.priority == priority)
    }
}

fn check_rate(rate: &Q) -> Result<(), SimError> {
    if !rate.is_positive() {
        return Err(SimError::InvalidRate(rate.to_string()));
    }
    Ok(())
}

fn transmission(p: &PacketRecord, rate: &Q) -> Q {
    p.length_q() / rate
}

/// FIFO link: `d(n) = max(a(n), d(n−1)) + l(n)/c`, `d(0) = 0`.
pub fn simulate_cbr(trace: &PacketTrace, rate: &Q) -> Result<SimResult, SimError> {
    check_rate(rate)?;
    let packets = trace.packets();
    let mut slots: Vec<Option<Departure>> = vec![None; packets.len()];
    let mut last = Q::zero();
    for i in trace.arrival_order() {
        let p = &packets[i];
        let start = p.arrival.clone().max(last);
        last = &start + transmission(p, rate);
        slots[i] = Some(Departure::new(p, start, last.clone()));
    }
    Ok(SimResult::from_departures(DepartureTrace {
        records: slots
            .into_iter()
            .map(|d| d.expect("every packet served"))
            .collect(),
    }))
}

/// Non-preemptive strict priority over one link; class 0 is served first.
///
/// At every instant the server becomes free, arrivals up to and including
/// that instant are queued before the head of the lowest-numbered nonempty
/// class starts transmitting. Classes are FIFO internally.
pub fn simulate_strict_priority(trace: &PacketTrace, rate: &Q) -> Result<SimResult, SimError> {
    check_rate(rate)?;
    let packets = trace.packets();
    let order = trace.arrival_order();
    let mut slots: Vec<Option<Departure>> = vec![None; packets.len()];
    let mut queues: BTreeMap<u32, VecDeque<usize>> = BTreeMap::new();
    let mut next = 0;
    let mut now = Q::zero();
    loop {
        while next < order.len() && packets[order[next]].arrival <= now {
            let i = order[next];
            queues.entry(packets[i].priority).or_default().push_back(i);
            next += 1;
        }
        let head = queues.values_mut().find_map(|q| q.pop_front());
        match head {
            Some(i) => {
                let p = &packets[i];
                let done = &now + transmission(p, rate);
                slots[i] = Some(Departure::new(p, now.clone(), done.clone()));
                now = done;
            }
            None if next < order.len() => now = packets[order[next]].arrival.clone(),
            None => break,
        }
    }
    Ok(SimResult::from_departures(DepartureTrace {
        records: slots
            .into_iter()
            .map(|d| d.expect("every packet served"))
            .collect(),
    }))
}

pub fn simulate(trace: &PacketTrace, config: &ServerConfig) -> Result<SimResult, SimError> {
    match config.discipline {
        Discipline::Fifo => simulate_cbr(trace, &config.rate),
        Discipline::StrictPriority => simulate_strict_priority(trace, &config.rate),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TandemResult {
    pub hops: Vec<SimResult>,
    /// Departures from the last hop measured against the original arrivals.
    pub end_to_end: SimResult,
}

/// FIFO links in series; packet `n` arrives at hop `k+1` at `d_k(n)`.
pub fn simulate_tandem(trace: &PacketTrace, rates: &[Q]) -> Result<TandemResult, SimError> {
    if rates.is_empty() {
        return Err(SimError::EmptyTandem);
    }
    let mut hops: Vec<SimResult> = Vec::with_capacity(rates.len());
    let mut input = trace.clone();
    for rate in rates {
        let hop = simulate_cbr(&input, rate)?;
        input = hop.departures.output_trace();
        hops.push(hop);
    }
    let last = &hops.last().expect("nonempty").departures;
    let by_packet: BTreeMap<(&str, u64), &Departure> = last
        .records
        .iter()
        .map(|d| ((d.flow_id.as_str(), d.index), d))
        .collect();
    let first = &hops[0].departures;
    let records = trace
        .iter()
        .zip(first.records.iter())
        .map(|(p, d1)| {
            let out = by_packet[&(p.flow_id.as_str(), p.index)];
            Departure::new(p, d1.start.clone(), out.departure.clone())
        })
        .collect();
    Ok(TandemResult {
        end_to_end: SimResult::from_departures(DepartureTrace { records }),
        hops,
    })
}

/// `D(t) = inf{τ ≥ 0 : A(t) ≤ A*(t + τ)}`.
pub fn virtual_delay(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
    t: &Q,
) -> Result<Q, SimError> {
    reach_delay(&arrivals.eval(t), departures, t)
}

fn reach_delay(target: &Q, departures: &CumulativeProcess, t: &Q) -> Result<Q, SimError> {
    if &departures.eval(t) >= target {
        return Ok(Q::zero());
    }
    departures
        .instants()
        .find(|e| *e >= t && &departures.right(e) >= target)
        .map(|e| e - t)
        .ok_or_else(|| SimError::Unbounded(target.to_string()))
}

/// `sup_t D(t)`. Between arrivals `A` is constant and `D` decreases, so the
/// supremum is approached right after an arrival instant.
pub fn max_virtual_delay(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
) -> Result<Q, SimError> {
    let mut best = Q::zero();
    for t in arrivals.instants() {
        best = best.max(reach_delay(&arrivals.right(t), departures, t)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use crate::traffic::{constant_flow, periodic_flow};
    use proptest::prelude::*;

    fn departures(r: &SimResult) -> Vec<Q> {
        r.departures
            .records()
            .iter()
            .map(|d| d.departure.clone())
            .collect()
    }

    #[test]
    fn lone_packet() {
        let t = PacketTrace::from_arrivals("f", 0, [(int(0), 2)]).unwrap();
        let r = simulate_cbr(&t, &int(1)).unwrap();
        assert_eq!(departures(&r), vec![int(2)]);
        assert_eq!(r.max_delay, int(2));
        assert_eq!(
            r.busy_periods,
            vec![Period {
                start: int(0),
                end: int(2)
            }]
        );
    }

    #[test]
    fn periodic_counterexample_schedule() {
        let t = periodic_flow(&q(3, 2), 1, 2, &int(0), 5).unwrap();
        let r = simulate_cbr(&t, &int(1)).unwrap();
        assert_eq!(
            departures(&r),
            vec![int(2), int(3), int(4), q(11, 2), int(7)]
        );
        // σ + l, held on [3/2, 2)
        assert_eq!(r.max_backlog, int(3));
        let t3 = periodic_flow(&q(3, 2), 1, 2, &int(0), 3).unwrap();
        let r3 = simulate_cbr(&t3, &int(1)).unwrap();
        assert_eq!(
            r3.busy_periods,
            vec![Period {
                start: int(0),
                end: int(4)
            }]
        );
    }

    #[test]
    fn strict_priority_is_non_preemptive() {
        let low = PacketTrace::from_arrivals("lo", 1, [(int(0), 10)]).unwrap();
        let high = PacketTrace::from_arrivals("hi", 0, [(int(1), 2)]).unwrap();
        let t = PacketTrace::merge([low, high]).unwrap();
        let r = simulate_strict_priority(&t, &int(1)).unwrap();
        let hi = r.departures.priority_class(0).records()[0].clone();
        let lo = r.departures.priority_class(1).records()[0].clone();
        assert_eq!(lo.departure, int(10));
        assert_eq!(hi.departure, int(12));
        assert_eq!(hi.delay(), int(11));
        assert_eq!(r.class(0).unwrap().max_delay, int(11));
    }

    #[test]
    fn strict_priority_lone_high_packet() {
        let t = PacketTrace::from_arrivals("hi", 0, [(int(0), 2)]).unwrap();
        let r = simulate_strict_priority(&t, &int(1)).unwrap();
        assert_eq!(departures(&r), vec![int(2)]);
        let served = r.departures.cumulative_departures();
        for k in 0..20 {
            assert_eq!(served.eval(&q(k, 10)), int(0));
        }
    }

    #[test]
    fn arrivals_at_a_completion_instant_are_eligible() {
        // high packet lands exactly when the low one finishes: it goes first
        let t = PacketTrace::merge([
            PacketTrace::from_arrivals("lo", 1, [(int(0), 2), (int(0), 2)]).unwrap(),
            PacketTrace::from_arrivals("hi", 0, [(int(2), 1)]).unwrap(),
        ])
        .unwrap();
        let r = simulate_strict_priority(&t, &int(1)).unwrap();
        assert_eq!(
            r.departures.priority_class(0).records()[0].departure,
            int(3)
        );
        assert_eq!(
            r.departures.priority_class(1).records()[1].departure,
            int(5)
        );
    }

    #[test]
    fn tandem_lone_and_periodic() {
        let t = PacketTrace::from_arrivals("f", 0, [(int(0), 1)]).unwrap();
        let r = simulate_tandem(&t, &[int(1), int(1)]).unwrap();
        assert_eq!(r.end_to_end.max_delay, int(2));
        let t = constant_flow(&int(2), 1, &int(0), 4).unwrap();
        let r = simulate_tandem(&t, &[int(1), int(1)]).unwrap();
        assert!(r
            .end_to_end
            .departures
            .records()
            .iter()
            .all(|d| d.delay() == int(2)));
        let one = simulate_tandem(&t, &[int(1)]).unwrap();
        assert_eq!(one.end_to_end, simulate_cbr(&t, &int(1)).unwrap());
    }

    #[test]
    fn tandem_rejects_empty_rates() {
        assert_eq!(
            simulate_tandem(&PacketTrace::default(), &[]),
            Err(SimError::EmptyTandem)
        );
        assert!(simulate_cbr(&PacketTrace::default(), &int(0)).is_err());
    }

    #[test]
    fn virtual_delay_values() {
        let t = PacketTrace::from_arrivals("f", 0, [(int(1), 2)]).unwrap();
        let r = simulate_cbr(&t, &int(1)).unwrap();
        let a = r.departures.cumulative_arrivals();
        let d = r.departures.cumulative_departures();
        assert_eq!(virtual_delay(&a, &d, &q(1, 2)).unwrap(), int(0));
        assert_eq!(virtual_delay(&a, &d, &q(3, 2)).unwrap(), q(3, 2));
        assert_eq!(virtual_delay(&a, &d, &int(5)).unwrap(), int(0));

        let t = PacketTrace::from_arrivals("f", 0, [(int(0), 2)]).unwrap();
        let r = simulate_cbr(&t, &int(1)).unwrap();
        let a = r.departures.cumulative_arrivals();
        let d = r.departures.cumulative_departures();
        let eps = q(1, 1000);
        assert_eq!(virtual_delay(&a, &d, &eps).unwrap(), int(2) - &eps);
        assert_eq!(max_virtual_delay(&a, &d).unwrap(), int(2));
        assert!(matches!(
            virtual_delay(&a, &CumulativeProcess::default(), &int(1)),
            Err(SimError::Unbounded(_))
        ));
    }

    #[test]
    fn max_virtual_delay_periodic() {
        let t = periodic_flow(&q(3, 2), 1, 2, &int(0), 5).unwrap();
        let r = simulate_cbr(&t, &int(1)).unwrap();
        let a = r.departures.cumulative_arrivals();
        let d = r.departures.cumulative_departures();
        assert_eq!(max_virtual_delay(&a, &d).unwrap(), int(2));
    }

    fn trace_strategy() -> impl Strategy<Value = PacketTrace> {
        prop::collection::vec((0i64..12, 1u64..6, 0u32..3), 0..25).prop_map(|mut v| {
            v.sort_by_key(|x| x.0);
            let mut per_class: BTreeMap<u32, Vec<(Q, u64)>> = BTreeMap::new();
            for (a, l, p) in v {
                per_class.entry(p).or_default().push((q(a, 2), l));
            }
            PacketTrace::merge(
                per_class
                    .into_iter()
                    .map(|(p, arr)| PacketTrace::from_arrivals(&format!("c{p}"), p, arr).unwrap()),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn single_class_priority_equals_fifo(trace in trace_strategy(), c in 1i64..4) {
            let lone = trace.clone().relabel("f", 0).unwrap();
            let rate = q(c, 2);
            prop_assert_eq!(
                simulate_strict_priority(&lone, &rate).unwrap(),
                simulate_cbr(&lone, &rate).unwrap()
            );
        }

        #[test]
        fn service_invariants(trace in trace_strategy(), c in 1i64..4) {
            let rate = q(c, 2);
            for r in [simulate_cbr(&trace, &rate).unwrap(), simulate_strict_priority(&trace, &rate).unwrap()] {
                let recs = r.departures.records();
                for d in recs {
                    prop_assert!(d.departure >= &d.arrival + Q::from_integer(d.length.into()) / &rate);
                    prop_assert!(d.start >= d.arrival);
                }
                // transmissions never overlap
                let mut spans: Vec<(&Q, &Q)> = recs.iter().map(|d| (&d.start, &d.departure)).collect();
                spans.sort();
                for w in spans.windows(2) {
                    prop_assert!(w[0].1 <= w[1].0);
                }
                // FIFO within a class
                for class in &r.classes {
                    let ds = r.departures.priority_class(class.priority);
                    for w in ds.records().windows(2) {
                        prop_assert!(w[0].departure < w[1].departure);
                    }
                }
                // conservation
                let a = r.departures.cumulative_arrivals();
                let d = r.departures.cumulative_departures();
                prop_assert_eq!(a.total(), d.total());
                prop_assert!(r.max_backlog >= Q::zero());
            }
        }

        #[test]
        fn fifo_work_conserving(trace in trace_strategy(), c in 1i64..4) {
            let rate = q(c, 2);
            let r = simulate_cbr(&trace, &rate).unwrap();
            let order = trace.arrival_order();
            let recs = r.departures.records();
            for w in order.windows(2) {
                let (prev, cur) = (&recs[w[0]], &recs[w[1]]);
                if cur.arrival <= prev.departure {
                    prop_assert_eq!(&cur.departure - &prev.departure, Q::from_integer(cur.length.into()) / &rate);
                }
            }
        }

        #[test]
        fn fifo_virtual_delay_is_packet_delay(trace in trace_strategy(), c in 1i64..4) {
            let r = simulate_cbr(&trace, &q(c, 2)).unwrap();
            let a = r.departures.cumulative_arrivals();
            let d = r.departures.cumulative_departures();
            prop_assert_eq!(max_virtual_delay(&a, &d).unwrap(), r.max_delay.clone());
        }
    }
}

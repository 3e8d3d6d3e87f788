//! Packet traces as marked point processes `(a(n), l(n))`.
//!
//! A trace may hold several flows. Within a flow, packet indices run
//! `1, 2, ...` in file order and arrivals are nondecreasing. Simultaneous
//! arrivals are allowed; their relative order is the trace order.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::minplus::{Curve, TokenBucketParams};
use crate::rational::{fmt_q, Q};

pub mod csv;
mod process;

pub use process::{backlogged_periods, CumulativeProcess, Period};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("invalid packet: {0}")]
    Packet(String),
    #[error("line {line}: {msg}")]
    Csv { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    /// Position within its flow, starting at 1.
    pub index: u64,
    /// Instant the last bit arrives.
    pub arrival: Q,
    /// Length in bits, at least 1.
    pub length: u64,
    pub flow_id: String,
    /// 0 is the highest priority.
    pub priority: u32,
}

impl PacketRecord {
    pub fn length_q(&self) -> Q {
        Q::from_integer(self.length.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PacketTrace {
    packets: Vec<PacketRecord>,
}

impl PacketTrace {
    /// Validates per-flow ordering, index contiguity and packet marks.
    pub fn new(packets: Vec<PacketRecord>) -> Result<Self, TraceError> {
        struct FlowState<'a> {
            next_index: u64,
            last_arrival: &'a Q,
            priority: u32,
        }
        let mut flows: BTreeMap<&str, FlowState> = BTreeMap::new();
        for p in &packets {
            if p.length == 0 {
                return Err(TraceError::Packet(format!(
                    "flow {} packet {}: length must be at least 1",
                    p.flow_id, p.index
                )));
            }
            if p.arrival.is_negative() {
                return Err(TraceError::Packet(format!(
                    "flow {} packet {}: negative arrival {}",
                    p.flow_id, p.index, p.arrival
                )));
            }
            let state = flows.entry(&p.flow_id).or_insert(FlowState {
                next_index: 1,
                last_arrival: &p.arrival,
                priority: p.priority,
            });
            if p.index != state.next_index {
                return Err(TraceError::Packet(format!(
                    "flow {}: expected index {}, found {}",
                    p.flow_id, state.next_index, p.index
                )));
            }
            if &p.arrival < state.last_arrival {
                return Err(TraceError::Packet(format!(
                    "flow {} packet {}: arrival {} precedes previous arrival {}",
                    p.flow_id, p.index, p.arrival, state.last_arrival
                )));
            }
            if p.priority != state.priority {
                return Err(TraceError::Packet(format!(
                    "flow {} packet {}: priority {} differs from the flow's priority {}",
                    p.flow_id, p.index, p.priority, state.priority
                )));
            }
            state.next_index += 1;
            state.last_arrival = &p.arrival;
        }
        Ok(PacketTrace { packets })
    }

    /// Single-flow trace from `(arrival, length)` pairs.
    pub fn from_arrivals(
        flow_id: &str,
        priority: u32,
        arrivals: impl IntoIterator<Item = (Q, u64)>,
    ) -> Result<Self, TraceError> {
        let packets = arrivals
            .into_iter()
            .enumerate()
            .map(|(i, (arrival, length))| PacketRecord {
                index: i as u64 + 1,
                arrival,
                length,
                flow_id: flow_id.to_string(),
                priority,
            })
            .collect();
        Self::new(packets)
    }

    /// Interleaves traces by arrival time; ties keep argument order.
    pub fn merge(traces: impl IntoIterator<Item = PacketTrace>) -> Result<Self, TraceError> {
        let mut packets: Vec<PacketRecord> = traces.into_iter().flat_map(|t| t.packets).collect();
        packets.sort_by(|a, b| a.arrival.cmp(&b.arrival));
        Self::new(packets)
    }

    /// Same arrivals and lengths under a new flow label and priority.
    pub fn relabel(self, flow_id: &str, priority: u32) -> Result<Self, TraceError> {
        let arrivals = self.packets.into_iter().map(|p| (p.arrival, p.length));
        Self::from_arrivals(flow_id, priority, arrivals)
    }

    pub fn packets(&self) -> &[PacketRecord] {
        &self.packets
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PacketRecord> {
        self.packets.iter()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Positions into [`Self::packets`] sorted by arrival, ties in trace order.
    pub fn arrival_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.packets.len()).collect();
        order.sort_by(|&a, &b| self.packets[a].arrival.cmp(&self.packets[b].arrival));
        order
    }

    /// Packets satisfying `keep`, in trace order.
    pub fn filter(&self, keep: impl Fn(&PacketRecord) -> bool) -> PacketTrace {
        PacketTrace {
            packets: self.packets.iter().filter(|p| keep(p)).cloned().collect(),
        }
    }

    pub fn flow(&self, flow_id: &str) -> PacketTrace {
        self.filter(|p| p.flow_id == flow_id)
    }

    pub fn max_length(&self) -> u64 {
        self.packets.iter().map(|p| p.length).max().unwrap_or(0)
    }

    pub fn total_length(&self) -> u64 {
        self.packets.iter().map(|p| p.length).sum()
    }

    /// Jumps by `l(n)` at each `a(n)`.
    pub fn cumulative_arrivals(&self) -> CumulativeProcess {
        CumulativeProcess::from_events(self.packets.iter().map(|p| (p.arrival.clone(), p.length)))
    }
}

impl<'a> IntoIterator for &'a PacketTrace {
    type Item = &'a PacketRecord;
    type IntoIter = std::slice::Iter<'a, PacketRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.packets.iter()
    }
}

/// Periodic flow whose first packet is oversized: packet 1 of length
/// `sigma_first` at `start`, then packets of length `l` every `tau`.
pub fn periodic_flow(
    tau: &Q,
    l: u64,
    sigma_first: u64,
    start: &Q,
    count: usize,
) -> Result<PacketTrace, TraceError> {
    if !tau.is_positive() || l == 0 || count == 0 {
        return Err(TraceError::Param(format!(
            "periodic flow needs tau > 0, l >= 1, count >= 1 (tau={tau}, l={l}, count={count})"
        )));
    }
    if sigma_first <= l {
        return Err(TraceError::Param(format!(
            "first packet length {sigma_first} must exceed l = {l}"
        )));
    }
    PacketTrace::from_arrivals(
        "f0",
        0,
        (0..count).map(|n| {
            let len = if n == 0 { sigma_first } else { l };
            (start + tau * Q::from_integer((n as i64).into()), len)
        }),
    )
}

/// `count` packets of length `l`, one every `tau` starting at `start`.
pub fn constant_flow(tau: &Q, l: u64, start: &Q, count: usize) -> Result<PacketTrace, TraceError> {
    if !tau.is_positive() || l == 0 {
        return Err(TraceError::Param(format!(
            "constant flow needs tau > 0 and l >= 1 (tau={tau}, l={l})"
        )));
    }
    PacketTrace::from_arrivals(
        "f0",
        0,
        (0..count).map(|n| (start + tau * Q::from_integer((n as i64).into()), l)),
    )
}

/// Parameters of a randomized token-bucket-conformant flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomFlowSpec {
    pub bucket: TokenBucketParams,
    pub l_min: u64,
    pub l_max: u64,
    pub horizon: Q,
}

impl RandomFlowSpec {
    fn validate(&self) -> Result<(), TraceError> {
        let TokenBucketParams { rho, sigma } = &self.bucket;
        if rho.is_negative() || sigma.is_negative() {
            return Err(TraceError::Param(
                "token bucket parameters must be nonnegative".into(),
            ));
        }
        if self.l_min == 0 || self.l_min > self.l_max {
            return Err(TraceError::Param(format!(
                "need 1 <= l_min <= l_max, got [{}, {}]",
                self.l_min, self.l_max
            )));
        }
        if Q::from_integer(self.l_max.into()) > *sigma {
            return Err(TraceError::Param(format!(
                "l_max = {} exceeds the bucket size {}",
                self.l_max,
                fmt_q(sigma)
            )));
        }
        Ok(())
    }

    /// Deterministic trace for `seed`.
    ///
    /// Generation, driven by `ChaCha8Rng::seed_from_u64(seed)`: the bucket
    /// starts full at `σ`. For each packet draw a length uniformly in
    /// `[l_min, l_max]`; with probability 1/2 draw an idle gap of `k/4`
    /// times `l_max/ρ` (or `k/4` when `ρ = 0`), `k` uniform in `1..=8`.
    /// The packet leaves at the end of the gap, or later once the bucket
    /// holds enough tokens. Generation stops past the horizon, or when an
    /// empty bucket can never refill.
    pub fn generate(&self, seed: u64) -> Result<PacketTrace, TraceError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let TokenBucketParams { rho, sigma } = &self.bucket;
        let unit = if rho.is_zero() {
            Q::from_integer(1.into())
        } else {
            Q::from_integer(self.l_max.into()) / rho
        };
        let mut level = sigma.clone();
        let mut now = Q::zero();
        let mut arrivals = Vec::new();
        loop {
            let len = rng.gen_range(self.l_min..=self.l_max);
            let gap = if rng.gen_bool(0.5) {
                Q::zero()
            } else {
                let k: i64 = rng.gen_range(1..=8);
                &unit * Q::new(k.into(), 4.into())
            };
            let mut send = &now + &gap;
            let mut available = (&level + rho * &gap).min(sigma.clone());
            let need = Q::from_integer(len.into());
            if available < need {
                if rho.is_zero() {
                    break;
                }
                send += (&need - &available) / rho;
                available = need.clone();
            }
            if send > self.horizon {
                break;
            }
            level = available - need;
            now = send.clone();
            arrivals.push((send, len));
        }
        PacketTrace::from_arrivals("f0", 0, arrivals)
    }
}

/// Shorthand for [`RandomFlowSpec::generate`].
pub fn random_conformant_flow(
    bucket: &TokenBucketParams,
    l_min: u64,
    l_max: u64,
    horizon: &Q,
    seed: u64,
) -> Result<PacketTrace, TraceError> {
    RandomFlowSpec {
        bucket: bucket.clone(),
        l_min,
        l_max,
        horizon: horizon.clone(),
    }
    .generate(seed)
}

/// First window of packets exceeding the arrival curve.
///
/// `first` and `last` are 1-based positions in arrival order, which are the
/// packet indices for a single-flow trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalViolation {
    pub first: usize,
    pub last: usize,
    pub amount: Q,
    pub allowance: Q,
}

/// Checks `A(s, t) ≤ α(t − s)` over all packet windows.
///
/// For a step arrival process and a continuous `α`, testing every pair
/// `i ≤ j` with `Σ_{i..j} l ≤ α(a(j) − a(i))` is equivalent to testing all
/// real `s ≤ t`.
#[allow(clippy::result_large_err)]
pub fn check_arrival_curve(trace: &PacketTrace, alpha: &Curve) -> Result<(), ArrivalViolation> {
    let order = trace.arrival_order();
    let packets = trace.packets();
    for (i, &pi) in order.iter().enumerate() {
        let start = &packets[pi].arrival;
        let mut amount = Q::zero();
        for (j, &pj) in order.iter().enumerate().skip(i) {
            amount += packets[pj].length_q();
            let allowance = alpha.value_at(&(&packets[pj].arrival - start));
            if amount > allowance {
                return Err(ArrivalViolation {
                    first: i + 1,
                    last: j + 1,
                    amount,
                    allowance,
                });
            }
        }
    }
    Ok(())
}

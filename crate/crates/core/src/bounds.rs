//! Service curves and performance bounds for packetized servers.
//!
//! Three families are offered side by side:
//!
//! - `faulty`: the fluid curves `ct` (CBR) and `c(t − l^Ml/c)+` (highest
//!   class of non-preemptive strict priority), which are not valid under the
//!   last-bit packet convention;
//! - `corrected`: the rate-latency curves with the extra `l^M/c` latency;
//! - `packetizer`: the fluid bounds with `l^M` added after a packetizer.
//!
//! Every bound is obtained through the min-plus core (deconvolution and the
//! two deviations of a token bucket against the curve), never from a
//! separately coded formula.

use num_traits::{Signed, Zero};

use crate::minplus::{
    convolve, deconvolve, horizontal_deviation, vertical_deviation, Curve, CurveError,
    RateLatencyParams, TokenBucketParams,
};
use crate::rational::{fmt_q, Q};

fn rate_latency(rate: &Q, latency: Q) -> Result<Curve, CurveError> {
    Curve::rate_latency(&RateLatencyParams::new(rate.clone(), latency)?)
}

fn check_length(name: &str, l: &Q) -> Result<(), CurveError> {
    if l.is_negative() {
        return Err(CurveError::Domain(format!(
            "{name} must be >= 0, got {}",
            fmt_q(l)
        )));
    }
    Ok(())
}

/// `c(t − l^M/c)+`, strict and plain service curve of a packetized CBR link.
pub fn cbr_corrected_curve(c: &Q, l_max: &Q) -> Result<Curve, CurveError> {
    sp_corrected_curve(c, l_max, &Q::zero())
}

/// `c(t − (l^M + l^Ml)/c)+` for the highest class of a non-preemptive
/// strict-priority link.
pub fn sp_corrected_curve(c: &Q, l_max_hi: &Q, l_max_lo: &Q) -> Result<Curve, CurveError> {
    check_length("l_max", l_max_hi)?;
    check_length("l_max_lo", l_max_lo)?;
    if !c.is_positive() {
        return Err(CurveError::Domain(format!(
            "rate must be > 0, got {}",
            fmt_q(c)
        )));
    }
    rate_latency(c, (l_max_hi + l_max_lo) / c)
}

/// The fluid curve `ct`; fails under the packet convention.
pub fn faulty_cbr_curve(c: &Q) -> Result<Curve, CurveError> {
    faulty_sp_curve(c, &Q::zero())
}

/// The fluid curve `c(t − l^Ml/c)+`; fails under the packet convention.
pub fn faulty_sp_curve(c: &Q, l_max_lo: &Q) -> Result<Curve, CurveError> {
    check_length("l_max_lo", l_max_lo)?;
    if !c.is_positive() {
        return Err(CurveError::Domain(format!(
            "rate must be > 0, got {}",
            fmt_q(c)
        )));
    }
    rate_latency(c, l_max_lo / c)
}

/// End-to-end curve of corrected hops in series, by convolution.
pub fn tandem_corrected_curve(
    rates: &[Q],
    l_max: &Q,
    l_max_lo: Option<&Q>,
) -> Result<Curve, CurveError> {
    let lo = l_max_lo.cloned().unwrap_or_else(Q::zero);
    fold_hops(rates, |c| sp_corrected_curve(c, l_max, &lo))
}

/// End-to-end fluid curve of hops in series.
pub fn tandem_faulty_curve(rates: &[Q], l_max_lo: Option<&Q>) -> Result<Curve, CurveError> {
    let lo = l_max_lo.cloned().unwrap_or_else(Q::zero);
    fold_hops(rates, |c| faulty_sp_curve(c, &lo))
}

fn fold_hops(
    rates: &[Q],
    hop: impl Fn(&Q) -> Result<Curve, CurveError>,
) -> Result<Curve, CurveError> {
    let (first, rest) = rates
        .split_first()
        .ok_or_else(|| CurveError::Domain("a tandem needs at least one rate".into()))?;
    rest.iter()
        .try_fold(hop(first)?, |acc, c| convolve(&acc, &hop(c)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Cbr,
    Sp,
    Tandem,
}

impl Setting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Cbr => "cbr",
            Setting::Sp => "sp",
            Setting::Tandem => "tandem",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundsInputs {
    pub bucket: TokenBucketParams,
    /// One rate for CBR and SP, one per hop for a tandem.
    pub rates: Vec<Q>,
    pub l_max: Q,
    pub l_max_lo: Q,
}

/// Output arrival curve, backlog bound and delay bound for one service curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundSet {
    pub service_curve: Option<Curve>,
    pub output_curve: Curve,
    pub backlog: Q,
    pub delay: Q,
}

impl BoundSet {
    /// Bounds of a token bucket through `β`: `α ⊘ β`, `v(α, β)`, `h(α, β)`.
    pub fn through(alpha: &Curve, beta: &Curve) -> Result<Self, CurveError> {
        Ok(BoundSet {
            service_curve: Some(beta.clone()),
            output_curve: deconvolve(alpha, beta)?,
            backlog: vertical_deviation(alpha, beta)?,
            delay: horizontal_deviation(alpha, beta)?,
        })
    }

    /// Output burst `α*(0)`.
    pub fn output_burst(&self) -> &Q {
        self.output_curve.value_at_zero()
    }
}

/// Corrected against packetizer bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Comparison {
    /// Corrected output burst ≤ packetizer output burst.
    pub output_tighter: bool,
    /// Corrected backlog ≤ packetizer backlog.
    pub backlog_tighter: bool,
    /// Packetizer delay ≤ corrected delay.
    pub packetizer_delay_tighter: bool,
}

impl Comparison {
    pub fn all(&self) -> bool {
        self.output_tighter && self.backlog_tighter && self.packetizer_delay_tighter
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundsReport {
    pub setting: Setting,
    pub inputs: BoundsInputs,
    pub corrected: BoundSet,
    pub faulty: BoundSet,
    /// Not defined for tandems.
    pub packetizer: Option<BoundSet>,
    pub comparison: Option<Comparison>,
}

fn check_stable(bucket: &TokenBucketParams, rates: &[Q]) -> Result<(), CurveError> {
    if let Some(c) = rates.iter().min() {
        if &bucket.rho > c {
            return Err(CurveError::Unstable(format!(
                "arrival rate {} exceeds service rate {}",
                fmt_q(&bucket.rho),
                fmt_q(c)
            )));
        }
    }
    Ok(())
}

/// Fluid bounds followed by a packetizer: output and backlog grow by `l^M`,
/// the delay is unchanged.
fn packetizer_bounds(faulty: &BoundSet, l_max: &Q) -> Result<BoundSet, CurveError> {
    Ok(BoundSet {
        service_curve: None,
        output_curve: faulty.output_curve.plus_const(l_max)?,
        backlog: &faulty.backlog + l_max,
        delay: faulty.delay.clone(),
    })
}

fn single_link(
    setting: Setting,
    bucket: &TokenBucketParams,
    c: &Q,
    l_max: &Q,
    l_max_lo: &Q,
) -> Result<BoundsReport, CurveError> {
    check_stable(bucket, std::slice::from_ref(c))?;
    let alpha = Curve::token_bucket(bucket)?;
    let corrected = BoundSet::through(&alpha, &sp_corrected_curve(c, l_max, l_max_lo)?)?;
    let faulty = BoundSet::through(&alpha, &faulty_sp_curve(c, l_max_lo)?)?;
    let packetizer = packetizer_bounds(&faulty, l_max)?;
    let comparison = Comparison {
        output_tighter: corrected.output_burst() <= packetizer.output_burst(),
        backlog_tighter: corrected.backlog <= packetizer.backlog,
        packetizer_delay_tighter: packetizer.delay <= corrected.delay,
    };
    Ok(BoundsReport {
        setting,
        inputs: BoundsInputs {
            bucket: bucket.clone(),
            rates: vec![c.clone()],
            l_max: l_max.clone(),
            l_max_lo: l_max_lo.clone(),
        },
        corrected,
        faulty,
        packetizer: Some(packetizer),
        comparison: Some(comparison),
    })
}

/// Bounds for a token-bucket flow on a packetized CBR link.
pub fn cbr_bounds(
    bucket: &TokenBucketParams,
    c: &Q,
    l_max: &Q,
) -> Result<BoundsReport, CurveError> {
    single_link(Setting::Cbr, bucket, c, l_max, &Q::zero())
}

/// Bounds for the highest class of a non-preemptive strict-priority link.
pub fn sp_bounds(
    bucket: &TokenBucketParams,
    c: &Q,
    l_max_hi: &Q,
    l_max_lo: &Q,
) -> Result<BoundsReport, CurveError> {
    single_link(Setting::Sp, bucket, c, l_max_hi, l_max_lo)
}

/// End-to-end bounds over FIFO hops in series.
pub fn tandem_bounds(
    bucket: &TokenBucketParams,
    rates: &[Q],
    l_max: &Q,
    l_max_lo: Option<&Q>,
) -> Result<BoundsReport, CurveError> {
    check_stable(bucket, rates)?;
    let alpha = Curve::token_bucket(bucket)?;
    let corrected = BoundSet::through(&alpha, &tandem_corrected_curve(rates, l_max, l_max_lo)?)?;
    let faulty = BoundSet::through(&alpha, &tandem_faulty_curve(rates, l_max_lo)?)?;
    Ok(BoundsReport {
        setting: Setting::Tandem,
        inputs: BoundsInputs {
            bucket: bucket.clone(),
            rates: rates.to_vec(),
            l_max: l_max.clone(),
            l_max_lo: l_max_lo.cloned().unwrap_or_else(Q::zero),
        },
        corrected,
        faulty,
        packetizer: None,
        comparison: None,
    })
}

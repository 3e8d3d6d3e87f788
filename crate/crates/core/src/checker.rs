/*! Service-curve and strict-service-curve verification on a concrete
input/output pair `(A, A*)`.

Verdicts are exact. `A` and `A*` are step functions and `β` is continuous
and piecewise linear, so every inequality only has to be examined at jump
instants, their one-sided limits, and the points where a shifted copy of `β`
crosses a constant level. Reported witnesses are concrete instants (the
midpoint of the first violating stretch), never limits. */

use std::collections::BTreeSet;

use num_traits::Zero;
use thiserror::Error;

use crate::minplus::{Curve, UpperInverse};
use crate::rational::Q;
use crate::traffic::{backlogged_periods, CumulativeProcess, Period};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("candidate curve must vanish at 0, found {0}")]
    NotInF0(String),
    #[error("output never drains: backlog persists from {0}")]
    NotDrained(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `A*(t) < A ⊗ β(t)`.
    Service,
    /// `A*(s, t) < β(t − s)` on a backlogged `(s, t]`.
    Strict,
}

impl ViolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationKind::Service => "service",
            ViolationKind::Strict => "strict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceViolation {
    pub kind: ViolationKind,
    /// Interval start for strict violations.
    pub s: Option<Q>,
    pub t: Q,
    /// `A ⊗ β(t)` or `β(t − s)`.
    pub required: Q,
    /// `A*(t)` or `A*(s, t)`.
    pub provided: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Verdict {
    Holds,
    Violated(ServiceViolation),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn violation(&self) -> Option<&ServiceViolation> {
        match self {
            Verdict::Holds => None,
            Verdict::Violated(v) => Some(v),
        }
    }
}

fn require_f0(beta: &Curve) -> Result<(), CheckError> {
    if !beta.is_in_f0() {
        return Err(CheckError::NotInF0(beta.value_at_zero().to_string()));
    }
    Ok(())
}

/// `A ⊗ β(t) = inf_{0≤s≤t} A(s) + β(t − s)`.
///
/// On each constant piece of `A` the infimum is approached as `s` reaches
/// the next jump from the left, so the candidates are `s = 0`, the left
/// limits at jumps `≤ t`, and `s = t`.
pub fn min_plus_conv_process(arrivals: &CumulativeProcess, beta: &Curve, t: &Q) -> Q {
    let mut best = (arrivals.eval(t) + beta.value_at(&Q::zero())).min(beta.value_at(t));
    for e in arrivals.instants().take_while(|e| *e <= t) {
        best = best.min(arrivals.left(e) + beta.value_at(&(t - e)));
    }
    best
}

/// `(A ⊗ β(t), A*(t))` at a single instant.
pub fn service_deficit_at(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
    beta: &Curve,
    t: &Q,
) -> (Q, Q) {
    (min_plus_conv_process(arrivals, beta, t), departures.eval(t))
}

/// `(β(t − s), A*(s, t))` for `s ≤ t`.
pub fn strict_deficit_at(departures: &CumulativeProcess, beta: &Curve, s: &Q, t: &Q) -> (Q, Q) {
    (beta.value_at(&(t - s)), departures.increment(s, t))
}

/// Lower end of a violating stretch: `None` when the whole piece violates.
#[derive(Debug)]
enum Threshold {
    Never,
    After(Q),
    Always,
}

impl Threshold {
    fn tighten(self, other: Threshold) -> Threshold {
        match (self, other) {
            (Threshold::Never, _) | (_, Threshold::Never) => Threshold::Never,
            (Threshold::Always, x) | (x, Threshold::Always) => x,
            (Threshold::After(a), Threshold::After(b)) => Threshold::After(a.max(b)),
        }
    }
}

/// `t > offset + x` makes `β(t − offset) > y` exactly when `x = sup{β ≤ y}`.
fn exceed_after(beta: &Curve, offset: &Q, y: &Q) -> Threshold {
    match beta.upper_inverse(y) {
        UpperInverse::Below => Threshold::Always,
        UpperInverse::At(x) => Threshold::After(offset + x),
        UpperInverse::Unbounded => Threshold::Never,
    }
}

/// Connected violating set `[lo, hi]` with open/closed ends; `hi = None` is +∞.
#[derive(Debug)]
struct Stretch {
    lo: Q,
    hi: Option<Q>,
}

impl Stretch {
    fn witness(&self) -> Q {
        match &self.hi {
            Some(hi) => (&self.lo + hi) / Q::from_integer(2.into()),
            None => &self.lo + Q::from_integer(1.into()),
        }
    }
}

/// Verifies `A*(t) ≥ A ⊗ β(t)` for all `t ≥ 0`.
pub fn check_service_curve(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
    beta: &Curve,
) -> Result<Verdict, CheckError> {
    require_f0(beta)?;
    let mut events: BTreeSet<Q> = arrivals
        .instants()
        .chain(departures.instants())
        .cloned()
        .collect();
    events.insert(Q::zero());
    let events: Vec<Q> = events.into_iter().collect();

    let mut stretch: Option<Stretch> = None;
    for (k, e) in events.iter().enumerate() {
        let next = events.get(k + 1);
        let (req, prov) = service_deficit_at(arrivals, departures, beta, e);
        let point_violates = req > prov;
        match (&mut stretch, point_violates) {
            (None, true) => {
                stretch = Some(Stretch {
                    lo: e.clone(),
                    hi: Some(e.clone()),
                })
            }
            (Some(_), false) => break,
            _ => {}
        }

        // open piece (e, next): A and A* are constant there
        let level_a = arrivals.right(e);
        let level_out = departures.right(e);
        let threshold = if level_a <= level_out {
            Threshold::Never
        } else {
            arrivals
                .instants()
                .take_while(|j| *j <= e)
                .fold(exceed_after(beta, &Q::zero(), &level_out), |acc, j| {
                    acc.tighten(exceed_after(beta, j, &(&level_out - arrivals.left(j))))
                })
        };
        let lo = match threshold {
            Threshold::Never => None,
            Threshold::Always => Some(e.clone()),
            Threshold::After(x) => Some(x.max(e.clone())),
        }
        .filter(|lo| next.is_none_or(|n| lo < n));

        match (&mut stretch, lo) {
            (Some(s), Some(lo)) if &lo == e && point_violates => s.hi = next.cloned(),
            (Some(_), _) => break,
            (None, Some(lo)) => {
                stretch = Some(Stretch {
                    lo,
                    hi: next.cloned(),
                });
                // a stretch ending at `next` may continue through it
            }
            (None, None) => {}
        }
        if let Some(s) = &stretch {
            if s.hi.as_ref() != next || next.is_none() {
                break;
            }
        }
    }

    Ok(match stretch {
        None => Verdict::Holds,
        Some(s) => {
            let t = s.witness();
            let (required, provided) = service_deficit_at(arrivals, departures, beta, &t);
            debug_assert!(required > provided);
            Verdict::Violated(ServiceViolation {
                kind: ViolationKind::Service,
                s: None,
                t,
                required,
                provided,
            })
        }
    })
}

/// Maximal `(start, end]` with `B > 0`; the output must drain.
pub fn find_backlogged_periods(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
) -> Result<Vec<Period>, CheckError> {
    match backlogged_periods(arrivals, departures) {
        (periods, None) => Ok(periods),
        (_, Some(start)) => Err(CheckError::NotDrained(start.to_string())),
    }
}

/// Verifies `A*(s, t) ≥ β(t − s)` for every `(s, t]` inside a backlogged
/// period.
///
/// For fixed `t`, moving `s` left inside a constant piece of `A*` only
/// raises `β(t − s)`; for fixed `s`, moving `t` right does too. The
/// candidates are therefore `s` at the period start or at a departure, and
/// `t` just before a departure or at the period end.
pub fn check_strict_service_curve(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
    beta: &Curve,
) -> Result<Verdict, CheckError> {
    require_f0(beta)?;
    for period in find_backlogged_periods(arrivals, departures)? {
        let outs: Vec<&Q> = departures
            .instants()
            .filter(|d| **d > period.start && **d <= period.end)
            .collect();
        let starts =
            std::iter::once(&period.start).chain(outs.iter().copied().filter(|d| **d < period.end));
        for s in starts {
            let served_by_s = departures.right(s);
            for d in outs.iter().filter(|d| **d > s) {
                let provided = departures.left(d) - &served_by_s;
                if beta.value_at(&(*d - s)) > provided {
                    let lo = match beta.upper_inverse(&provided) {
                        UpperInverse::At(x) => (s + x).max(s.clone()),
                        _ => s.clone(),
                    };
                    let t = (lo + *d) / Q::from_integer(2.into());
                    return Ok(Verdict::Violated(strict_violation(departures, beta, s, t)));
                }
                if **d == period.end {
                    let provided = departures.right(d) - &served_by_s;
                    if beta.value_at(&(*d - s)) > provided {
                        return Ok(Verdict::Violated(strict_violation(
                            departures,
                            beta,
                            s,
                            (*d).clone(),
                        )));
                    }
                }
            }
        }
    }
    Ok(Verdict::Holds)
}

fn strict_violation(departures: &CumulativeProcess, beta: &Curve, s: &Q, t: Q) -> ServiceViolation {
    let (required, provided) = strict_deficit_at(departures, beta, s, &t);
    debug_assert!(required > provided);
    ServiceViolation {
        kind: ViolationKind::Strict,
        s: Some(s.clone()),
        t,
        required,
        provided,
    }
}

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use crate::rational::Q;

/// Cumulative step process such as `A(t)`, `A*(t)`.
///
/// Jumps are visible from their own instant on: for `t > 0`,
/// `F(t) = Σ{l : instant ≤ t}`. The origin is pinned to `F(0) = 0`, so a
/// packet at time 0 only shows up in `F(0+)`. [`Self::left`] and
/// [`Self::right`] give the one-sided limits explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CumulativeProcess {
    /// `(instant, value from that instant on)`, instants strictly increasing.
    jumps: Vec<(Q, Q)>,
}

impl CumulativeProcess {
    /// Builds from `(instant, amount)` events in any order.
    pub fn from_events(events: impl IntoIterator<Item = (Q, u64)>) -> Self {
        let mut events: Vec<(Q, u64)> = events.into_iter().filter(|(_, l)| *l > 0).collect();
        events.sort_by(|a, b| a.0.cmp(&b.0));
        let mut jumps: Vec<(Q, Q)> = Vec::with_capacity(events.len());
        let mut total = Q::zero();
        for (t, l) in events {
            total += Q::from_integer(l.into());
            match jumps.last_mut() {
                Some((last, value)) if *last == t => *value = total.clone(),
                _ => jumps.push((t, total.clone())),
            }
        }
        CumulativeProcess { jumps }
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn total(&self) -> Q {
        self.jumps
            .last()
            .map(|(_, v)| v.clone())
            .unwrap_or_else(Q::zero)
    }

    /// Jump instants in increasing order.
    pub fn instants(&self) -> impl Iterator<Item = &Q> {
        self.jumps.iter().map(|(t, _)| t)
    }

    /// `F(t)` under the process convention.
    pub fn eval(&self, t: &Q) -> Q {
        if !t.is_positive() {
            return Q::zero();
        }
        self.right(t)
    }

    /// `F(t+) = Σ{l : instant ≤ t}`.
    pub fn right(&self, t: &Q) -> Q {
        let n = self.jumps.partition_point(|(u, _)| u <= t);
        self.value_before(n)
    }

    /// `F(t−) = Σ{l : instant < t}`.
    pub fn left(&self, t: &Q) -> Q {
        let n = self.jumps.partition_point(|(u, _)| u < t);
        self.value_before(n)
    }

    fn value_before(&self, n: usize) -> Q {
        if n == 0 {
            Q::zero()
        } else {
            self.jumps[n - 1].1.clone()
        }
    }

    /// `F(t) − F(s)` under the process convention.
    pub fn increment(&self, s: &Q, t: &Q) -> Q {
        self.eval(t) - self.eval(s)
    }

    /// Instants strictly increasing and values nondecreasing.
    pub fn is_monotone(&self) -> bool {
        self.jumps
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
    }
}

/// Maximal backlogged period `(start, end]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Period {
    pub start: Q,
    pub end: Q,
}

impl Period {
    pub fn length(&self) -> Q {
        &self.end - &self.start
    }
}

/// Maximal periods where `B(t) = A(t) − A*(t) > 0`, plus the start of a
/// trailing period that never drains.
pub fn backlogged_periods(
    arrivals: &CumulativeProcess,
    departures: &CumulativeProcess,
) -> (Vec<Period>, Option<Q>) {
    let instants: BTreeSet<&Q> = arrivals.instants().chain(departures.instants()).collect();
    let mut periods = Vec::new();
    let mut open: Option<Q> = None;
    for t in instants {
        let backlogged = arrivals.right(t) > departures.right(t);
        match (&open, backlogged) {
            (None, true) => open = Some(t.clone()),
            (Some(_), false) => {
                let start = open.take().expect("checked");
                periods.push(Period {
                    start,
                    end: t.clone(),
                });
            }
            _ => {}
        }
    }
    (periods, open)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};

    #[test]
    fn conventions_at_jumps() {
        let f = CumulativeProcess::from_events([(int(0), 2), (int(3), 1), (int(3), 4)]);
        assert_eq!(f.eval(&int(0)), int(0));
        assert_eq!(f.right(&int(0)), int(2));
        assert_eq!(f.eval(&int(1)), int(2));
        assert_eq!(f.left(&int(3)), int(2));
        assert_eq!(f.eval(&int(3)), int(7));
        assert_eq!(f.total(), int(7));
        assert_eq!(f.instants().count(), 2);
        assert_eq!(f.increment(&int(2), &int(2)), int(0));
        assert!(f.is_monotone());
    }

    #[test]
    fn single_packet_period() {
        let a = CumulativeProcess::from_events([(int(0), 2)]);
        let d = CumulativeProcess::from_events([(int(2), 2)]);
        let (periods, open) = backlogged_periods(&a, &d);
        assert_eq!(
            periods,
            vec![Period {
                start: int(0),
                end: int(2)
            }]
        );
        assert_eq!(open, None);
    }

    #[test]
    fn back_to_back_periods_merge() {
        // second packet arrives exactly when the first departs
        let a = CumulativeProcess::from_events([(int(0), 1), (int(1), 1)]);
        let d = CumulativeProcess::from_events([(int(1), 1), (int(2), 1)]);
        let (periods, _) = backlogged_periods(&a, &d);
        assert_eq!(
            periods,
            vec![Period {
                start: int(0),
                end: int(2)
            }]
        );
    }

    #[test]
    fn undrained_tail_is_reported() {
        let a = CumulativeProcess::from_events([(q(1, 2), 1)]);
        let (periods, open) = backlogged_periods(&a, &CumulativeProcess::default());
        assert!(periods.is_empty());
        assert_eq!(open, Some(q(1, 2)));
    }
}

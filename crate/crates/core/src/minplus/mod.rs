/*! Exact piecewise-linear min-plus algebra.

A [`Curve`] is a continuous, nonnegative, nondecreasing piecewise-linear
function on `[0, ∞)` with rational breakpoints. It is the common
representation of arrival curves (token buckets, `α(0) = σ`), service
curves (rate-latency, `β(0) = 0`) and output arrival curves.

The operations in [`ops`] are exact. Extrema of piecewise-linear
differences occur at breakpoints, so deviations and deconvolutions are
computed by enumerating breakpoints; divergence is detected from the
terminal slopes. [`grid`] holds an approximate sampled convolution for
shapes outside the convex family. */

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::{self, fmt_q, Q};

pub mod grid;
pub mod ops;

pub use ops::{convolve, deconvolve, horizontal_deviation, vertical_deviation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("curve evaluated at negative time {0}")]
    NegativeTime(String),
    #[error("invalid curve: {0}")]
    Invalid(String),
    #[error("unstable: {0}")]
    Unstable(String),
    #[error("exact convolution is only available for convex curves")]
    NonConvex,
    #[error("curve text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One linear piece, valid from `start_x` up to the next segment's start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start_x: Q,
    pub start_y: Q,
    pub slope: Q,
}

impl Segment {
    pub fn new(start_x: Q, start_y: Q, slope: Q) -> Self {
        Segment {
            start_x,
            start_y,
            slope,
        }
    }

    fn value_at(&self, t: &Q) -> Q {
        &self.start_y + &self.slope * (t - &self.start_x)
    }
}

/// Token bucket `α(t) = ρt + σ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBucketParams {
    pub rho: Q,
    pub sigma: Q,
}

impl TokenBucketParams {
    pub fn new(rho: Q, sigma: Q) -> Result<Self, CurveError> {
        let p = TokenBucketParams { rho, sigma };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), CurveError> {
        if self.rho.is_negative() || self.sigma.is_negative() {
            return Err(CurveError::Domain(format!(
                "token bucket needs rho >= 0 and sigma >= 0, got rho={} sigma={}",
                self.rho, self.sigma
            )));
        }
        Ok(())
    }
}

/// Rate-latency `β(t) = R(t − T)+`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateLatencyParams {
    pub rate: Q,
    pub latency: Q,
}

impl RateLatencyParams {
    pub fn new(rate: Q, latency: Q) -> Result<Self, CurveError> {
        let p = RateLatencyParams { rate, latency };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), CurveError> {
        if !self.rate.is_positive() || self.latency.is_negative() {
            return Err(CurveError::Domain(format!(
                "rate-latency needs R > 0 and T >= 0, got R={} T={}",
                self.rate, self.latency
            )));
        }
        Ok(())
    }
}

/// Result of [`Curve::upper_inverse`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpperInverse {
    /// `y < f(0)`: no `x` satisfies `f(x) <= y`.
    Below,
    At(Q),
    /// `f(x) <= y` for every `x`.
    Unbounded,
}

/// Continuous nonnegative nondecreasing piecewise-linear function on `[0, ∞)`.
///
/// Segments are kept normalized: adjacent segments never share a slope, so
/// two curves describing the same function compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Curve {
    segments: Vec<Segment>,
}

impl Curve {
    /// Validates and normalizes a segment list.
    pub fn new(segments: Vec<Segment>) -> Result<Self, CurveError> {
        let first = segments
            .first()
            .ok_or_else(|| CurveError::Invalid("no segments".into()))?;
        if !first.start_x.is_zero() {
            return Err(CurveError::Invalid(format!(
                "first segment starts at {} instead of 0",
                first.start_x
            )));
        }
        for seg in &segments {
            if seg.start_y.is_negative() {
                return Err(CurveError::Invalid(format!(
                    "negative value {} at x={}",
                    seg.start_y, seg.start_x
                )));
            }
            if seg.slope.is_negative() {
                return Err(CurveError::Invalid(format!(
                    "negative slope {} at x={}",
                    seg.slope, seg.start_x
                )));
            }
        }
        for w in segments.windows(2) {
            if w[1].start_x <= w[0].start_x {
                return Err(CurveError::Invalid(format!(
                    "breakpoints not strictly increasing at x={}",
                    w[1].start_x
                )));
            }
            let end = w[0].value_at(&w[1].start_x);
            if end != w[1].start_y {
                return Err(CurveError::Invalid(format!(
                    "discontinuity at x={}: {} then {}",
                    w[1].start_x, end, w[1].start_y
                )));
            }
        }
        Ok(Self::normalized(segments))
    }

    fn normalized(segments: Vec<Segment>) -> Self {
        let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
        for seg in segments {
            match out.last() {
                Some(prev) if prev.slope == seg.slope => {}
                _ => out.push(seg),
            }
        }
        Curve { segments: out }
    }

    /// Builds a curve from points `(x, y)` joined linearly, continuing with
    /// `tail_slope` after the last point.
    pub fn from_points(points: &[(Q, Q)], tail_slope: Q) -> Result<Self, CurveError> {
        let mut segments = Vec::with_capacity(points.len());
        for (i, (x, y)) in points.iter().enumerate() {
            let slope = match points.get(i + 1) {
                Some((nx, ny)) => {
                    if nx <= x {
                        return Err(CurveError::Invalid(format!(
                            "points not strictly increasing at x={nx}"
                        )));
                    }
                    (ny - y) / (nx - x)
                }
                None => tail_slope.clone(),
            };
            segments.push(Segment::new(x.clone(), y.clone(), slope));
        }
        Self::new(segments)
    }

    pub fn zero() -> Self {
        Curve {
            segments: vec![Segment::new(Q::zero(), Q::zero(), Q::zero())],
        }
    }

    /// `y0 + slope·t`.
    pub fn affine(y0: Q, slope: Q) -> Result<Self, CurveError> {
        Self::new(vec![Segment::new(Q::zero(), y0, slope)])
    }

    /// `ρt + σ`, with value `σ` at `t = 0`.
    pub fn token_bucket(p: &TokenBucketParams) -> Result<Self, CurveError> {
        p.validate()?;
        Self::affine(p.sigma.clone(), p.rho.clone())
    }

    /// `R(t − T)+`.
    pub fn rate_latency(p: &RateLatencyParams) -> Result<Self, CurveError> {
        p.validate()?;
        if p.latency.is_zero() {
            return Self::affine(Q::zero(), p.rate.clone());
        }
        Self::new(vec![
            Segment::new(Q::zero(), Q::zero(), Q::zero()),
            Segment::new(p.latency.clone(), Q::zero(), p.rate.clone()),
        ])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = &Q> {
        self.segments.iter().map(|s| &s.start_x)
    }

    pub fn terminal_slope(&self) -> &Q {
        &self.segments.last().expect("curve has a segment").slope
    }

    fn segment_index(&self, t: &Q) -> usize {
        self.segments.partition_point(|s| &s.start_x <= t) - 1
    }

    /// Exact value at `t >= 0`.
    pub fn eval(&self, t: &Q) -> Result<Q, CurveError> {
        if t.is_negative() {
            return Err(CurveError::NegativeTime(fmt_q(t)));
        }
        Ok(self.value_at(t))
    }

    /// Value at `t`; negative arguments evaluate to `f(0)`.
    pub(crate) fn value_at(&self, t: &Q) -> Q {
        if t.is_negative() {
            return self.segments[0].start_y.clone();
        }
        self.segments[self.segment_index(t)].value_at(t)
    }

    /// Slope just to the right of `t`.
    pub(crate) fn right_slope(&self, t: &Q) -> &Q {
        &self.segments[self.segment_index(&t.clone().max(Q::zero()))].slope
    }

    /// Slope just to the left of `t > 0`.
    pub(crate) fn left_slope(&self, t: &Q) -> &Q {
        let idx = self.segments.partition_point(|s| &s.start_x < t);
        &self.segments[idx.saturating_sub(1)].slope
    }

    pub fn value_at_zero(&self) -> &Q {
        &self.segments[0].start_y
    }

    /// Membership in `F₀`: the curve vanishes at the origin.
    pub fn is_in_f0(&self) -> bool {
        self.value_at_zero().is_zero()
    }

    pub fn is_convex(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].slope <= w[1].slope)
    }

    pub fn is_concave(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].slope >= w[1].slope)
    }

    pub fn as_token_bucket(&self) -> Option<TokenBucketParams> {
        match self.segments.as_slice() {
            [only] => Some(TokenBucketParams {
                rho: only.slope.clone(),
                sigma: only.start_y.clone(),
            }),
            _ => None,
        }
    }

    pub fn as_rate_latency(&self) -> Option<RateLatencyParams> {
        match self.segments.as_slice() {
            [only] if only.start_y.is_zero() && only.slope.is_positive() => {
                Some(RateLatencyParams {
                    rate: only.slope.clone(),
                    latency: Q::zero(),
                })
            }
            [flat, ramp] if flat.start_y.is_zero() && flat.slope.is_zero() => {
                Some(RateLatencyParams {
                    rate: ramp.slope.clone(),
                    latency: ramp.start_x.clone(),
                })
            }
            _ => None,
        }
    }

    /// `inf{x >= 0 : f(x) >= y}`, or `None` when the curve never reaches `y`.
    pub fn lower_inverse(&self, y: &Q) -> Option<Q> {
        if y <= self.value_at_zero() {
            return Some(Q::zero());
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.slope.is_zero() {
                continue;
            }
            let reaches = match self.segments.get(i + 1) {
                Some(next) => y <= &next.start_y,
                None => true,
            };
            if reaches {
                return Some(&seg.start_x + (y - &seg.start_y) / &seg.slope);
            }
        }
        None
    }

    /// `sup{x >= 0 : f(x) <= y}`.
    pub fn upper_inverse(&self, y: &Q) -> UpperInverse {
        if y < self.value_at_zero() {
            return UpperInverse::Below;
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let exceeds = match self.segments.get(i + 1) {
                Some(next) => &next.start_y > y,
                None => seg.slope.is_positive(),
            };
            if exceeds {
                // f(start_x) <= y < f(end)
                return UpperInverse::At(&seg.start_x + (y - &seg.start_y) / &seg.slope);
            }
        }
        UpperInverse::Unbounded
    }

    /// Pointwise sum with a constant.
    pub(crate) fn plus_const(&self, c: &Q) -> Result<Curve, CurveError> {
        Curve::new(
            self.segments
                .iter()
                .map(|s| Segment::new(s.start_x.clone(), &s.start_y + c, s.slope.clone()))
                .collect(),
        )
    }
}

/// One line per segment: `start_x start_y slope`, exact fractions.
impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            writeln!(f, "{} {} {}", seg.start_x, seg.start_y, seg.slope)?;
        }
        Ok(())
    }
}

impl FromStr for Curve {
    type Err = CurveError;

    /// Blank lines and `#` comments are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut segments = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(CurveError::Parse {
                    line: i + 1,
                    msg: format!("expected `start_x start_y slope`, got `{line}`"),
                });
            }
            let parse = |f: &str| {
                rational::parse_rational(f).map_err(|e| CurveError::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })
            };
            segments.push(Segment::new(
                parse(fields[0])?,
                parse(fields[1])?,
                parse(fields[2])?,
            ));
        }
        Curve::new(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};

    fn tb(rho: Q, sigma: Q) -> Curve {
        Curve::token_bucket(&TokenBucketParams { rho, sigma }).unwrap()
    }

    fn rl(rate: Q, latency: Q) -> Curve {
        Curve::rate_latency(&RateLatencyParams { rate, latency }).unwrap()
    }

    #[test]
    fn token_bucket_values() {
        assert_eq!(tb(int(0), int(0)), Curve::zero());
        let a = tb(q(2, 3), int(2));
        assert_eq!(a.eval(&int(3)).unwrap(), int(4));
        assert_eq!(a.eval(&int(0)).unwrap(), int(2));
        // l/τ with l = 1, τ = 3/2
        let a = tb(int(1) / q(3, 2), int(2));
        assert_eq!(a.terminal_slope(), &q(2, 3));
    }

    #[test]
    fn token_bucket_rejects_negative() {
        let err = Curve::token_bucket(&TokenBucketParams {
            rho: int(-1),
            sigma: int(1),
        });
        assert!(matches!(err, Err(CurveError::Domain(_))));
        assert!(TokenBucketParams::new(int(1), q(-1, 2)).is_err());
    }

    #[test]
    fn rate_latency_values() {
        assert_eq!(rl(int(1), int(0)), Curve::affine(int(0), int(1)).unwrap());
        let b = rl(int(1), int(2));
        assert_eq!(b.eval(&int(2)).unwrap(), int(0));
        assert_eq!(b.eval(&int(3)).unwrap(), int(1));
        assert_eq!(b.eval(&int(5)).unwrap(), int(3));
        assert_eq!(rl(int(1), int(3)).eval(&int(2)).unwrap(), int(0));
        assert!(b.is_in_f0());
        assert!(b.is_convex());
        assert!(!b.is_concave());
    }

    #[test]
    fn rate_latency_rejects_nonpositive_rate() {
        assert!(RateLatencyParams::new(int(0), int(1)).is_err());
        assert!(Curve::rate_latency(&RateLatencyParams {
            rate: int(-2),
            latency: int(0)
        })
        .is_err());
    }

    #[test]
    fn eval_rejects_negative_time() {
        assert!(matches!(
            Curve::zero().eval(&q(-1, 2)),
            Err(CurveError::NegativeTime(_))
        ));
        assert_eq!(Curve::zero().eval(&int(100)).unwrap(), int(0));
    }

    #[test]
    fn construction_invariants() {
        let bad_start = Curve::new(vec![Segment::new(int(1), int(0), int(1))]);
        assert!(bad_start.is_err());
        let jump = Curve::new(vec![
            Segment::new(int(0), int(0), int(1)),
            Segment::new(int(1), int(5), int(1)),
        ]);
        assert!(jump.is_err());
        let decreasing = Curve::new(vec![Segment::new(int(0), int(1), int(-1))]);
        assert!(decreasing.is_err());
        assert!(Curve::new(vec![]).is_err());
    }

    #[test]
    fn normalization_merges_collinear_segments() {
        let c = Curve::new(vec![
            Segment::new(int(0), int(0), int(1)),
            Segment::new(int(2), int(2), int(1)),
            Segment::new(int(3), int(3), int(2)),
        ])
        .unwrap();
        assert_eq!(c.segments().len(), 2);
    }

    #[test]
    fn shape_recognition() {
        assert_eq!(
            rl(int(2), int(1)).as_rate_latency(),
            Some(RateLatencyParams {
                rate: int(2),
                latency: int(1)
            })
        );
        assert_eq!(tb(int(1), int(2)).as_rate_latency(), None);
        assert_eq!(
            tb(int(1), int(2)).as_token_bucket(),
            Some(TokenBucketParams {
                rho: int(1),
                sigma: int(2)
            })
        );
    }

    #[test]
    fn inverses() {
        let b = rl(int(2), int(1));
        assert_eq!(b.lower_inverse(&int(0)), Some(int(0)));
        assert_eq!(b.lower_inverse(&int(4)), Some(int(3)));
        assert_eq!(b.upper_inverse(&int(0)), UpperInverse::At(int(1)));
        assert_eq!(b.upper_inverse(&int(4)), UpperInverse::At(int(3)));
        let a = tb(int(1), int(2));
        assert_eq!(a.upper_inverse(&int(1)), UpperInverse::Below);
        let flat = Curve::from_points(&[(int(0), int(0)), (int(1), int(3))], int(0)).unwrap();
        assert_eq!(flat.lower_inverse(&int(4)), None);
        assert_eq!(flat.upper_inverse(&int(3)), UpperInverse::Unbounded);
        assert_eq!(flat.upper_inverse(&int(2)), UpperInverse::At(q(2, 3)));
    }

    #[test]
    fn text_format() {
        let c = rl(q(3, 2), q(1, 4));
        let text = c.to_string();
        assert_eq!(text, "0 0 0\n1/4 0 3/2\n");
        assert_eq!(text.parse::<Curve>().unwrap(), c);
        let with_comments = "# service\n0 0 0\n\n0.25 0 1.5 # ramp\n";
        assert_eq!(with_comments.parse::<Curve>().unwrap(), c);
        let err = "0 0\n".parse::<Curve>().unwrap_err();
        assert!(matches!(err, CurveError::Parse { line: 1, .. }));
    }
}

//! Convolution, deconvolution and the two deviations.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use super::{Curve, CurveError, RateLatencyParams, Segment, UpperInverse};
use crate::rational::Q;

/// Exact min-plus convolution `(f ⊗ g)(t) = inf_{0≤s≤t} f(s) + g(t − s)`.
///
/// Two rate-latency curves use the closed form `R = min(R1, R2)`,
/// `T = T1 + T2`. Other convex inputs are merged by slope. Non-convex
/// inputs return [`CurveError::NonConvex`]; see [`super::grid`] for a
/// sampled approximation.
pub fn convolve(f: &Curve, g: &Curve) -> Result<Curve, CurveError> {
    if let (Some(a), Some(b)) = (f.as_rate_latency(), g.as_rate_latency()) {
        return Curve::rate_latency(&RateLatencyParams {
            rate: a.rate.min(b.rate),
            latency: a.latency + b.latency,
        });
    }
    if f.is_convex() && g.is_convex() {
        return Ok(convolve_convex(f, g));
    }
    Err(CurveError::NonConvex)
}

/// Finite pieces `(length, slope)` and the tail slope of a curve.
fn pieces(c: &Curve) -> (Vec<(Q, Q)>, Q) {
    let segs = c.segments();
    let finite = segs
        .windows(2)
        .map(|w| (&w[1].start_x - &w[0].start_x, w[0].slope.clone()))
        .collect();
    (finite, c.terminal_slope().clone())
}

fn convolve_convex(f: &Curve, g: &Curve) -> Curve {
    let (mut finite, tail_f) = pieces(f);
    let (finite_g, tail_g) = pieces(g);
    finite.extend(finite_g);
    let tail = tail_f.min(tail_g);
    finite.retain(|(_, slope)| slope < &tail);
    finite.sort_by(|a, b| a.1.cmp(&b.1));

    let mut x = Q::zero();
    let mut y = f.value_at_zero() + g.value_at_zero();
    let mut segments = Vec::with_capacity(finite.len() + 1);
    for (len, slope) in finite {
        segments.push(Segment::new(x.clone(), y.clone(), slope.clone()));
        y += &slope * &len;
        x += len;
    }
    segments.push(Segment::new(x, y, tail));
    Curve::normalized(segments)
}

fn unstable(what: &str, fr: &Q, gr: &Q) -> CurveError {
    CurveError::Unstable(format!(
        "{what} is unbounded: long-run slope {fr} exceeds {gr}"
    ))
}

fn check_stable(what: &str, alpha: &Curve, beta: &Curve) -> Result<(), CurveError> {
    if alpha.terminal_slope() > beta.terminal_slope() {
        return Err(unstable(
            what,
            alpha.terminal_slope(),
            beta.terminal_slope(),
        ));
    }
    Ok(())
}

/// `sup_{t≥0} α(t) − β(t)`: the backlog bound.
pub fn vertical_deviation(alpha: &Curve, beta: &Curve) -> Result<Q, CurveError> {
    check_stable("vertical deviation", alpha, beta)?;
    let xs: BTreeSet<&Q> = alpha.breakpoints().chain(beta.breakpoints()).collect();
    Ok(xs
        .into_iter()
        .map(|x| alpha.value_at(x) - beta.value_at(x))
        .max()
        .expect("at least the origin"))
}

/// `sup_{t≥0} inf{τ ≥ 0 : α(t) ≤ β(t + τ)}`: the delay bound.
pub fn horizontal_deviation(alpha: &Curve, beta: &Curve) -> Result<Q, CurveError> {
    check_stable("horizontal deviation", alpha, beta)?;
    let mut ts: BTreeSet<Q> = alpha.breakpoints().cloned().collect();
    for seg in beta.segments() {
        if let Some(t) = alpha.lower_inverse(&seg.start_y) {
            ts.insert(t);
        }
        if let UpperInverse::At(t) = alpha.upper_inverse(&seg.start_y) {
            ts.insert(t);
        }
    }
    let never =
        || CurveError::Unstable("horizontal deviation is unbounded: β never catches up".into());
    let mut best = Q::zero();
    for t in &ts {
        let y = alpha.value_at(t);
        let reach = beta.lower_inverse(&y).ok_or_else(never)?;
        best = best.max(&reach - t);
        if alpha.right_slope(t).is_positive() {
            match beta.upper_inverse(&y) {
                UpperInverse::At(x) => best = best.max(x - t),
                UpperInverse::Unbounded => return Err(never()),
                UpperInverse::Below => {}
            }
        }
    }
    Ok(best)
}

/// Min-plus deconvolution `α ⊘ β (t) = sup_{u≥0} α(t + u) − β(u)`: the
/// output arrival curve.
///
/// Token bucket over rate-latency takes the closed form `ρt + σ + ρT`.
/// Other inputs go through [`deconvolve_general`].
pub fn deconvolve(alpha: &Curve, beta: &Curve) -> Result<Curve, CurveError> {
    check_stable("deconvolution", alpha, beta)?;
    if let (Some(a), Some(b)) = (alpha.as_token_bucket(), beta.as_rate_latency()) {
        return Curve::affine(&a.sigma + &a.rho * &b.latency, a.rho);
    }
    deconvolve_general(alpha, beta)
}

/// Exact deconvolution of arbitrary continuous piecewise-linear curves.
///
/// For fixed `t` the supremum over `u` sits at a breakpoint of either
/// `u ↦ α(t + u)` or `β`, so `α ⊘ β` is the upper envelope of finitely many
/// affine pieces between the offsets `x_α − x_β ≥ 0`.
pub fn deconvolve_general(alpha: &Curve, beta: &Curve) -> Result<Curve, CurveError> {
    check_stable("deconvolution", alpha, beta)?;
    let xa: Vec<&Q> = alpha.breakpoints().collect();
    let xb: Vec<&Q> = beta.breakpoints().collect();
    let mut cuts: BTreeSet<Q> = BTreeSet::new();
    cuts.insert(Q::zero());
    for a in &xa {
        for b in &xb {
            let d = *a - *b;
            if !d.is_negative() {
                cuts.insert(d);
            }
        }
    }
    let cuts: Vec<Q> = cuts.into_iter().collect();

    let mut segments: Vec<Segment> = Vec::new();
    for (k, p) in cuts.iter().enumerate() {
        let q = cuts.get(k + 1);
        // (value at p, slope in t) for each candidate u
        let mut lines: Vec<(Q, Q)> = Vec::with_capacity(xa.len() + xb.len());
        for u in &xb {
            let at = p + *u;
            lines.push((
                alpha.value_at(&at) - beta.value_at(u),
                alpha.right_slope(&at).clone(),
            ));
        }
        if let Some(q) = q {
            for x in xa.iter().filter(|x| **x >= q) {
                let u = *x - p;
                lines.push((
                    alpha.value_at(x) - beta.value_at(&u),
                    beta.left_slope(&u).clone(),
                ));
            }
        }
        upper_envelope(p, q, &lines, &mut segments);
    }
    let curve = Curve::normalized(segments);
    if curve.segments().iter().any(|s| s.start_y.is_negative()) {
        return Err(CurveError::Invalid(
            "deconvolution produced negative values".into(),
        ));
    }
    Ok(curve)
}

/// Appends the upper envelope of `lines` over `[p, q)` to `out`.
fn upper_envelope(p: &Q, q: Option<&Q>, lines: &[(Q, Q)], out: &mut Vec<Segment>) {
    let mut cur = lines
        .iter()
        .max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("u = 0 is always a candidate");
    let mut x = p.clone();
    out.push(Segment::new(x.clone(), cur.0.clone(), cur.1.clone()));
    loop {
        let mut next: Option<(Q, &(Q, Q))> = None;
        for line in lines.iter().filter(|l| l.1 > cur.1) {
            let cross = p + (&cur.0 - &line.0) / (&line.1 - &cur.1);
            if cross <= x || q.is_some_and(|q| &cross >= q) {
                continue;
            }
            let better = match &next {
                None => true,
                Some((nx, nl)) => cross < *nx || (&cross == nx && line.1 > nl.1),
            };
            if better {
                next = Some((cross, line));
            }
        }
        let Some((at, line)) = next else { break };
        cur = line;
        x = at;
        let y = &cur.0 + &cur.1 * (&x - p);
        out.push(Segment::new(x.clone(), y, cur.1.clone()));
    }
}

use std::io::Cursor;

use proptest::prelude::*;

use pnc::rational::{int, q};
use pnc::traffic::csv::{read_trace, write_trace};
use pnc::traffic::{check_arrival_curve, random_conformant_flow, PacketTrace};
use pnc::{Curve, TokenBucketParams, Q};

fn trace_strategy() -> impl Strategy<Value = PacketTrace> {
    prop::collection::vec((0i64..6, 1i64..=3, 1u64..=5), 0..12).prop_map(|raw| {
        let mut t = Q::from_integer(0.into());
        let arrivals: Vec<(Q, u64)> = raw
            .into_iter()
            .map(|(n, d, l)| {
                t += q(n, d);
                (t.clone(), l)
            })
            .collect();
        PacketTrace::from_arrivals("f", 0, arrivals).unwrap()
    })
}

proptest! {
    #[test]
    fn cumulative_arrivals_are_monotone(trace in trace_strategy()) {
        let f = trace.cumulative_arrivals();
        prop_assert!(f.is_monotone());
        prop_assert_eq!(f.total(), int(trace.total_length() as i64));
    }

    #[test]
    fn increments_are_nonnegative(trace in trace_strategy(), s in 0i64..40, w in 0i64..40) {
        let f = trace.cumulative_arrivals();
        let (s, t) = (q(s, 4), q(s + w, 4));
        prop_assert!(f.increment(&s, &t) >= Q::from_integer(0.into()));
        prop_assert_eq!(f.increment(&t, &t), Q::from_integer(0.into()));
    }

    #[test]
    fn csv_round_trip(trace in trace_strategy()) {
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = read_trace(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn generated_traces_conform(
        rho in 0i64..=6, sigma in 4i64..=10, l_max in 1u64..=4, seed in any::<u64>(),
    ) {
        let bucket = TokenBucketParams::new(q(rho, 4), int(sigma)).unwrap();
        let trace = random_conformant_flow(&bucket, 1, l_max, &int(30), seed).unwrap();
        prop_assert!(check_arrival_curve(&trace, &Curve::token_bucket(&bucket).unwrap()).is_ok());
        prop_assert!(trace.max_length() <= l_max);
    }
}

#[test]
fn zero_width_window_violation() {
    let trace = PacketTrace::from_arrivals("f", 0, [(int(0), 2), (int(0), 2)]).unwrap();
    let alpha = Curve::affine(int(2), int(1)).unwrap();
    let v = check_arrival_curve(&trace, &alpha).unwrap_err();
    assert_eq!(
        (v.first, v.last, v.amount, v.allowance),
        (1, 2, int(4), int(2))
    );
}

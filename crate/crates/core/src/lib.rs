/*!
# pnc

Packetization-aware deterministic network calculus.

Packets count as arrived (served) only once their last bit has arrived
(departed). Under that convention the fluid service curves usually quoted for
a constant-bit-rate link (`ct`) and for the highest class of a non-preemptive
strict-priority link (`c(t − l^Ml/c)+`) do not hold. This crate provides:

- [`minplus`]: exact piecewise-linear min-plus algebra over rationals;
- [`traffic`]: packet traces, generators, cumulative processes and
  arrival-curve conformance;
- [`simulator`]: exact event-driven CBR, strict-priority and tandem servers;
- [`checker`]: service-curve and strict-service-curve verification with exact
  violation witnesses;
- [`bounds`]: faulty, corrected and packetizer-style curves and bounds;
- [`scenario`]: canned counterexamples and randomized verification campaigns;
- [`report`]: JSON rendering with exact fractions.
*/

pub mod bounds;
pub mod checker;
pub mod minplus;
pub mod rational;
pub mod report;
pub mod scenario;
pub mod simulator;
pub mod traffic;

pub use minplus::{Curve, CurveError, RateLatencyParams, TokenBucketParams};
pub use rational::Q;

//! Desk-scale toolkit for scheduling electric arc furnaces against volatile
//! electricity prices.
//!
//! The crate models a melt shop of one or more furnaces that alternate
//! between a high-power melting stage and a base-power stage, and benchmarks
//! three dispatch policies on 5-minute price data:
//!
//! * a rolling-horizon MILP with an embedded branch-and-bound solver
//!   ([`rolling`], [`milp`], [`lp`]),
//! * a tabular Q-learning dispatcher driven by day-ahead price features
//!   ([`qlearn`]),
//! * fixed-cycle baselines that ignore prices entirely ([`baseline`]).
//!
//! Ground-truth checks for small instances live in [`oracle`]; experiment
//! orchestration and report files in [`experiment`].

pub mod baseline;
pub mod config;
pub mod dispatch;
pub mod experiment;
pub mod lp;
pub mod milp;
pub mod oracle;
pub mod plant;
pub mod prices;
pub mod qlearn;
pub mod rolling;
pub mod template;

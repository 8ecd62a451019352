//! Nonlinear stochastic wavelet (NSW) trading model.
//!
//! Prices are mapped to a few wavelet coefficient modes, an Ito SDE with
//! Hermite-polynomial drift and diffusion is fitted to a rolling window of
//! those modes, and the fitted model's stationary density drives buy/sell
//! decisions gated by a Kolmogorov-type quasi-stationarity check. Several
//! instruments can be combined into a parcel whose weights maximize the
//! probability of beating a fraction of the expected return.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod timeseries;
pub mod wavelet;
pub mod sde_fit;
pub mod stationary;
pub mod signal;
pub mod portfolio;
pub mod baselines;
pub mod backtest;
pub mod config;

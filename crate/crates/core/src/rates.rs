//! Closed-form average sum-rates of IA with per-stream zero-forcing over
//! Rayleigh-faded effective channels.

use std::f64::consts::LOG2_E;

use crate::channel::NetworkConfig;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_SWITCH: f64 = 1.0;
const MAX_TERMS: usize = 10_000;

/// Power series of `E1(x)` for `0 < x <= 1`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= -x / kf;
        let add = -term / kf;
        sum += add;
        if add.abs() < sum.abs() * f64::EPSILON * 0.25 {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// Continued fraction for `e^x E1(x)`, `x > 1` (modified Lentz).
fn scaled_e1_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    h
}

/// Exponential integral `E1(eta) = int_1^inf e^{-eta t} / t dt`.
pub fn exp_integral_e1(eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!(
            "E1 needs a positive argument, got {eta}"
        )));
    }
    Ok(if eta <= SERIES_SWITCH {
        e1_series(eta)
    } else {
        (-eta).exp() * scaled_e1_fraction(eta)
    })
}

/// `e^eta E1(eta)`, without forming `e^eta` for large arguments.
pub fn scaled_e1(eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!(
            "E1 needs a positive argument, got {eta}"
        )));
    }
    if eta == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(if eta <= SERIES_SWITCH {
        eta.exp() * e1_series(eta)
    } else {
        scaled_e1_fraction(eta)
    })
}

fn rate_scale(cfg: &NetworkConfig) -> f64 {
    cfg.total_streams() as f64 * LOG2_E
}

/// Perfect-CSI average sum-rate `K d log2(e) e^{1/rho} E1(1/rho)` in bits/s/Hz.
pub fn avg_sum_rate(cfg: &NetworkConfig, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    rate_scale(cfg) * scaled_e1(1.0 / rho).unwrap_or(0.0)
}

/// First and second derivatives of [`avg_sum_rate`] with respect to `rho`.
pub fn rate_derivatives(cfg: &NetworkConfig, rho: f64) -> (f64, f64) {
    let c = rate_scale(cfg);
    let r = avg_sum_rate(cfg, rho);
    let d1 = (c - r / rho) / rho;
    let d2 = -(c + d1 - 2.0 * r / rho) / (rho * rho);
    (d1, d2)
}

/// Effective per-stream SINR when each channel entry is known with error
/// variance `sigma2h`: `rho (1 - s) / (rho K d s + 1)`.
///
/// `sigma2h` is clamped to `[0, 1]`; at 1 the estimate carries no
/// information and the SINR is 0.
pub fn effective_sinr(cfg: &NetworkConfig, rho: f64, sigma2h: f64) -> f64 {
    let s = sigma2h.clamp(0.0, 1.0);
    rho * (1.0 - s) / (rho * cfg.total_streams() as f64 * s + 1.0)
}

/// Imperfect-CSI average sum-rate: the perfect-CSI law at `rho_eff`.
/// A zero effective SINR gives zero rate.
pub fn avg_sum_rate_imperfect(cfg: &NetworkConfig, rho_eff: f64) -> f64 {
    avg_sum_rate(cfg, rho_eff)
}

/// Rate curve sample with its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCurvePoint {
    pub rho: f64,
    pub rate: f64,
    pub d_rate: f64,
    pub dd_rate: f64,
}

impl RateCurvePoint {
    pub fn at(cfg: &NetworkConfig, rho: f64) -> Self {
        let (d_rate, dd_rate) = rate_derivatives(cfg, rho);
        Self {
            rho,
            rate: avg_sum_rate(cfg, rho),
            d_rate,
            dd_rate,
        }
    }
}

/// CSI error variance together with the resulting effective SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorState {
    pub sigma2h: f64,
    pub rho_eff: f64,
}

impl CsiErrorState {
    pub fn new(cfg: &NetworkConfig, rho: f64, sigma2h: f64) -> Self {
        Self {
            sigma2h,
            rho_eff: effective_sinr(cfg, rho, sigma2h),
        }
    }

    pub fn sum_rate(&self, cfg: &NetworkConfig) -> f64 {
        avg_sum_rate_imperfect(cfg, self.rho_eff)
    }
}

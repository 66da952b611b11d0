//! Overhead fraction optimization: exact effective rate under the optimal
//! training/feedback split, its second-order expansion in the Doppler
//! frequency, the closed-form optimum it yields, and a numerical reference.

use crate::channel::{FadingFrame, LinkBudget, NetworkConfig};
use crate::csi::{alpha_min, min_error_variance, optimal_split, split_weights, OverheadAllocation};
use crate::error::{Error, Result};
use crate::rates::{avg_sum_rate, effective_sinr, rate_derivatives};

/// Distortion constant `mu^2 / (g (K Nt - Nr))`, so that the minimum error
/// variance is `s2 beta / (P alpha T)`.
pub fn beta(cfg: &NetworkConfig, gamma: f64) -> Result<f64> {
    let mu: f64 = split_weights(cfg, gamma)?.iter().sum();
    Ok(mu * mu / (gamma * cfg.feedback_margin() as f64))
}

/// An optimized overhead fraction and what it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadDesign {
    pub alpha_star: f64,
    /// Optimizer output before clamping to `[alpha_min, 1]`.
    pub alpha_unclamped: f64,
    pub clamped: bool,
    /// Integer split of `floor(alpha_star T)` symbols.
    pub allocation: OverheadAllocation,
    /// Minimum (continuous) error variance at `alpha_star`.
    pub sigma2h: f64,
    /// Rate predicted by the method that produced the design.
    pub reff_star: f64,
    /// Exact effective rate at `alpha_star`.
    pub reff_achieved: f64,
    pub beta: f64,
}

fn check_alpha(cfg: &NetworkConfig, frame: &FadingFrame, alpha: f64) -> Result<f64> {
    let amin = alpha_min(cfg, frame.length())?;
    if !(alpha >= amin * (1.0 - 1e-12) && alpha <= 1.0) {
        return Err(Error::InfeasibleBudget(format!(
            "alpha {alpha} outside [{amin}, 1]"
        )));
    }
    Ok(amin)
}

/// Effective sum rate `(1 - alpha) R(rho_eff)` with the error variance of the
/// optimal continuous split of `alpha T` overhead symbols.
pub fn effective_rate(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
    alpha: f64,
) -> Result<f64> {
    check_alpha(cfg, frame, alpha)?;
    Ok(effective_rate_unchecked(cfg, budget, frame.length(), alpha))
}

fn effective_rate_unchecked(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    length: f64,
    alpha: f64,
) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let rho = budget.stream_snr(cfg.streams());
    let s2 = min_error_variance(cfg, budget, alpha * length).unwrap_or(f64::INFINITY);
    (1.0 - alpha) * avg_sum_rate(cfg, effective_sinr(cfg, rho, s2))
}

/// Coefficients `(A, B, C)` of the expansion
/// `(1 - alpha) (A - B / alpha + C / alpha^2)` in powers of `f_d`.
fn expansion_coefficients(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    fd: f64,
) -> Result<(f64, f64, f64)> {
    let d = cfg.streams() as f64;
    let kd = cfg.total_streams() as f64;
    let rho = budget.stream_snr(cfg.streams());
    let b = beta(cfg, budget.gamma())?;
    let r = avg_sum_rate(cfg, rho);
    let (r1, r2) = rate_derivatives(cfg, rho);
    let lift = 1.0 + rho * kd;
    let c = 2.0 * b / d;
    Ok((
        r,
        lift * c * r1 * fd,
        lift * c * c * (r2 * lift + 2.0 * kd * r1) * fd * fd / 2.0,
    ))
}

/// Second-order (or lower, via `order`) expansion of [`effective_rate`]
/// around `f_d = 0`.
pub fn expansion_effective_rate(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
    alpha: f64,
    order: u32,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1]")));
    }
    let (a, b, c) = expansion_coefficients(cfg, budget, frame.doppler())?;
    let mut inner = a;
    if order >= 1 {
        inner -= b / alpha;
    }
    if order >= 2 {
        inner += c / (alpha * alpha);
    }
    Ok((1.0 - alpha) * inner)
}

/// Largest real root in `(0, 1]` of the stationarity cubic
/// `A a^3 - (B + C) a + 2 C = 0` of the expansion; `None` if there is none.
pub fn expansion_cubic_root(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
) -> Result<Option<f64>> {
    let (a, b, c) = expansion_coefficients(cfg, budget, frame.doppler())?;
    let roots = depressed_cubic_roots(-(b + c) / a, 2.0 * c / a);
    Ok(roots
        .into_iter()
        .filter(|&x| x > 0.0 && x <= 1.0)
        .reduce(f64::max))
}

/// Real roots of `x^3 + p x + q`.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let phi = (3.0 * q / (p * r)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    }
}

fn design(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
    alpha_unclamped: f64,
    clamped_at_min: bool,
    predicted: Option<f64>,
) -> Result<OverheadDesign> {
    let amin = alpha_min(cfg, frame.length())?;
    let alpha_star = alpha_unclamped.clamp(amin, 1.0);
    let clamped = clamped_at_min || alpha_unclamped < amin;
    let symbols =
        (alpha_star * frame.length()).max(OverheadAllocation::minimum(cfg).total() as f64);
    let split = optimal_split(cfg, budget, symbols)?;
    let reff_achieved = effective_rate_unchecked(cfg, budget, frame.length(), alpha_star);
    Ok(OverheadDesign {
        alpha_star,
        alpha_unclamped,
        clamped,
        allocation: split.allocation,
        sigma2h: split.sigma2h_continuous,
        reff_star: if clamped {
            reff_achieved
        } else {
            predicted.unwrap_or(reff_achieved)
        },
        reff_achieved,
        beta: beta(cfg, budget.gamma())?,
    })
}

/// Closed-form optimum of the second-order expansion:
/// `alpha* = sqrt(2 beta (1 + rho K d)/d R'/R f_d) - beta/d (R''/R' (1 + rho K d) + 2 K d) f_d`,
/// clamped to `[alpha_min, 1]`.
pub fn alpha_star_expansion(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
) -> Result<OverheadDesign> {
    let fd = frame.doppler();
    let d = cfg.streams() as f64;
    let kd = cfg.total_streams() as f64;
    let rho = budget.stream_snr(cfg.streams());
    let b = beta(cfg, budget.gamma())?;
    let r = avg_sum_rate(cfg, rho);
    let (r1, r2) = rate_derivatives(cfg, rho);
    let lift = 1.0 + rho * kd;
    let alpha =
        (2.0 * b * lift / d * r1 / r * fd).sqrt() - b / d * (r2 / r1 * lift + 2.0 * kd) * fd;
    let predicted = r - 2.0 * (2.0 * b / d * lift * r1 * r * fd).sqrt();
    design(cfg, budget, frame, alpha, false, Some(predicted))
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .into_iter()
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(mid)
}

/// Numerical maximizer of [`effective_rate`] over `[alpha_min, 1]`,
/// accurate to `1e-6` in `alpha`.
pub fn alpha_star_numeric(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
) -> Result<OverheadDesign> {
    let amin = alpha_min(cfg, frame.length())?;
    beta(cfg, budget.gamma())?;
    let t = frame.length();
    let f = |a: f64| effective_rate_unchecked(cfg, budget, t, a);
    let alpha = golden_section_max(f, amin, 1.0, 1e-7);
    let at_min = alpha - amin < 1e-6 && f(amin) >= f(amin + 1e-6);
    design(
        cfg,
        budget,
        frame,
        if at_min { amin } else { alpha },
        at_min,
        None,
    )
}

/// Number of sign changes of the forward-difference slope of
/// [`effective_rate`] on `points` equally spaced values of `alpha`.
pub fn slope_sign_changes(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
    points: usize,
) -> Result<usize> {
    let amin = alpha_min(cfg, frame.length())?;
    let t = frame.length();
    let grid: Vec<f64> = (0..points)
        .map(|i| amin + (1.0 - amin) * i as f64 / (points - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid
        .iter()
        .map(|&a| effective_rate_unchecked(cfg, budget, t, a))
        .collect();
    let slopes: Vec<f64> = vals
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|s| *s != 0.0)
        .collect();
    Ok(slopes
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count())
}

/// High-SNR effective degrees of freedom under the two readings of the
/// minimum overhead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDof {
    /// Minimum overhead `K Nt + K Nr + K^2 Nt`, matching the pilot-length constraints.
    pub constraint: f64,
    /// Minimum overhead `K Nt + K Nr + K^2 Nt Nr`.
    pub product: f64,
}

pub fn effective_dof(cfg: &NetworkConfig, frame: &FadingFrame) -> Result<EffectiveDof> {
    let t = frame.length();
    alpha_min(cfg, t)?;
    let (k, nt, nr) = (
        cfg.users() as f64,
        cfg.tx_antennas() as f64,
        cfg.rx_antennas() as f64,
    );
    let kd = cfg.total_streams() as f64;
    Ok(EffectiveDof {
        constraint: (1.0 - (k * nt + k * nr + k * k * nt) / t) * kd,
        product: (1.0 - (k * nt + k * nr + k * k * nt * nr) / t) * kd,
    })
}

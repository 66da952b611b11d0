use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{make_frame, sample_channels_with, LinkBudget, NetworkConfig};
use crate::cluster::admission_rule;
use crate::csi::{
    feedback_training, forward_training, optimal_split, NoiseSources, OverheadAllocation,
};
use crate::error::Result;
use crate::ia::{align, SolverOptions};
use crate::linalg::frob_sq;
use crate::overhead::alpha_star_expansion;
use crate::pipeline::{
    csi_error_statistics, direct_gain_samples, gain_moments, monte_carlo_sum_rate,
};
use crate::rng;
use crate::stats::linear_fit;

use super::ExperimentSpec;

/// Trial counts for the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSettings {
    pub ia_draws: u64,
    pub gain_trials: u64,
    pub csi_trials: u64,
    pub random_allocations: u64,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self {
            ia_draws: 1000,
            gain_trials: 100_000,
            csi_trials: 10_000,
            random_allocations: 1000,
        }
    }
}

/// Closed forms the suite checks against simulation. Swappable so a broken
/// formula can be shown to fail its check.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub avg_sum_rate: fn(&NetworkConfig, f64) -> f64,
    pub rate_derivatives: fn(&NetworkConfig, f64) -> (f64, f64),
    pub error_variance: fn(&NetworkConfig, &LinkBudget, &OverheadAllocation) -> Result<f64>,
}

impl Default for Formulas {
    fn default() -> Self {
        Self {
            avg_sum_rate: crate::rates::avg_sum_rate,
            rate_derivatives: crate::rates::rate_derivatives,
            error_variance: crate::csi::error_variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    IaAlignment,
    DirectGainMoments,
    AverageSumRate,
    RateDerivatives,
    TrainingErrorVariance,
    FeedbackEnergy,
    CsiErrorClosedForm,
    MmseNoWorseThanZf,
    ErrorCovariance,
    SplitOptimality,
    AdmissionThreshold,
    OverheadScaling,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::IaAlignment => "ia_alignment",
            Check::DirectGainMoments => "direct_gain_moments",
            Check::AverageSumRate => "average_sum_rate",
            Check::RateDerivatives => "rate_derivatives",
            Check::TrainingErrorVariance => "training_error_variance",
            Check::FeedbackEnergy => "feedback_energy",
            Check::CsiErrorClosedForm => "csi_error_closed_form",
            Check::MmseNoWorseThanZf => "mmse_no_worse_than_zf",
            Check::ErrorCovariance => "error_covariance",
            Check::SplitOptimality => "split_optimality",
            Check::AdmissionThreshold => "admission_threshold",
            Check::OverheadScaling => "overhead_scaling",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn outcome(&self, check: Check) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| o.check == check)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,passed,detail\n");
        for o in &self.outcomes {
            out.push_str(&format!("{},{},\"{}\"\n", o.check, o.passed, o.detail));
        }
        out
    }
}

fn outcome(check: Check, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        check,
        passed,
        detail,
    }
}

/// Runs every check on the spec's network (the single-stream `(3, 2, 2)`
/// reference network is used for checks whose tolerances assume it).
pub fn run_validate(
    spec: &ExperimentSpec,
    settings: &ValidateSettings,
    formulas: &Formulas,
) -> Result<ValidateReport> {
    spec.validate()?;
    let cfg = spec.network()?;
    let seed = spec.seed;
    let mut outcomes = Vec::new();

    let draws = (0..settings.ia_draws)
        .into_par_iter()
        .map(|t| {
            let ch = sample_channels_with(&cfg, &mut rng::stream(seed, &[0xa1, t]));
            align(
                &ch,
                &cfg,
                &SolverOptions::with_seed(rng::derive_seed(seed, &[0xa1, t, 1])),
            )
            .map(|s| s.leakage < 1e-9 && s.max_residual < 1e-9)
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = draws.iter().filter(|&&b| b).count() as f64 / draws.len().max(1) as f64;
    outcomes.push(outcome(
        Check::IaAlignment,
        ok >= 0.99,
        format!("aligned fraction {ok:.4} (need >= 0.99)"),
    ));

    let streams = cfg.total_streams();
    let (gains, _) =
        direct_gain_samples(&cfg, settings.gain_trials, rng::derive_seed(seed, &[0xa2]))?;
    let moments = gain_moments(&gains, streams);
    let worst_mean = moments.iter().map(|m| m.mean.norm()).fold(0.0, f64::max);
    let worst_var = moments
        .iter()
        .map(|m| (m.variance - 1.0).abs())
        .fold(0.0, f64::max);
    let worst_skew = moments
        .iter()
        .map(|m| m.real.skewness.abs().max(m.imag.skewness.abs()))
        .fold(0.0, f64::max);
    outcomes.push(outcome(
        Check::DirectGainMoments,
        worst_mean < 0.01 && worst_var < 0.03 && worst_skew < 0.05,
        format!(
            "max |mean| {worst_mean:.4}, max |var-1| {worst_var:.4}, max |skew| {worst_skew:.4}"
        ),
    ));

    let mut rate_ok = true;
    let mut detail = Vec::new();
    for rho in [1.0, 10.0, 100.0] {
        let mc = monte_carlo_sum_rate(&gains, streams, rho);
        let analytic = (formulas.avg_sum_rate)(&cfg, rho);
        let rel = (mc / analytic - 1.0).abs();
        rate_ok &= rel < 0.01;
        detail.push(format!("rho {rho}: {rel:.4}"));
    }
    outcomes.push(outcome(
        Check::AverageSumRate,
        rate_ok,
        format!("relative gaps {}", detail.join("; ")),
    ));

    let h = 1e-4;
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for rho in [1.0, 10.0, 100.0] {
        let (d1, d2) = (formulas.rate_derivatives)(&cfg, rho);
        let r = |x| crate::rates::avg_sum_rate(&cfg, x);
        e1 = e1.max((d1 - (r(rho + h) - r(rho - h)) / (2.0 * h)).abs());
        e2 = e2.max((d2 - (r(rho + h) - 2.0 * r(rho) + r(rho - h)) / (h * h)).abs());
    }
    outcomes.push(outcome(
        Check::RateDerivatives,
        e1 < 1e-6 && e2 < 1e-4,
        format!("first {e1:.2e} (< 1e-6), second {e2:.2e} (< 1e-4)"),
    ));

    outcomes.push(training_check(&cfg, settings.csi_trials, seed)?);

    let reference = NetworkConfig::new(3, 2, 2, 1)?;
    let cells = [10.0, 100.0, 1000.0];
    let mut closed_ok = true;
    let mut mmse_ok = true;
    let mut energy = Vec::new();
    let mut cov_worst: f64 = 0.0;
    let mut closed_detail = Vec::new();
    for (i, &rho) in cells.iter().enumerate() {
        let b = LinkBudget::from_stream_snr(rho, 1, 1.0)?;
        let alloc = optimal_split(&reference, &b, 100.0)?.allocation;
        let stats = csi_error_statistics(
            &reference,
            &b,
            &alloc,
            settings.csi_trials,
            rng::derive_seed(seed, &[0xa3]),
            i as u64,
        )?;
        let closed = (formulas.error_variance)(&reference, &b, &alloc)?;
        let rel = stats.zero_forcing / closed - 1.0;
        if rho == 100.0 {
            closed_ok = rel.abs() < 0.05;
        }
        closed_detail.push(format!("rho {rho}: {rel:+.4}"));
        mmse_ok &= stats.mmse <= stats.zero_forcing;
        energy.push(stats.energy_ratio);
        cov_worst = cov_worst.max(stats.covariance_offdiag);
    }
    outcomes.push(outcome(
        Check::CsiErrorClosedForm,
        closed_ok,
        format!(
            "zero-forcing vs closed form {} (|gap| < 0.05 at rho 100)",
            closed_detail.join("; ")
        ),
    ));
    outcomes.push(outcome(
        Check::MmseNoWorseThanZf,
        mmse_ok,
        "mmse <= zero-forcing in every cell".to_string(),
    ));
    let energy_ok = energy.iter().all(|e| (0.99..=1.01).contains(e));
    outcomes.push(outcome(
        Check::FeedbackEnergy,
        energy_ok,
        format!("energy ratios {energy:.4?}"),
    ));
    outcomes.push(outcome(
        Check::ErrorCovariance,
        cov_worst < 0.05,
        format!("max off-diagonal ratio {cov_worst:.4}"),
    ));

    outcomes.push(split_check(
        &reference,
        settings.random_allocations,
        seed,
        formulas,
    )?);

    let below = admission_rule(3, 1.0 / 300.0 * (1.0 - 1e-12))?;
    let at = admission_rule(3, 1.0 / 300.0)?;
    outcomes.push(outcome(
        Check::AdmissionThreshold,
        below && !at,
        format!("extends just below 1/300: {below}, at 1/300: {at}"),
    ));

    let b = LinkBudget::from_stream_snr(100.0, 1, 1.0)?;
    let fds: Vec<f64> = (0..21)
        .map(|i| 1e-6 * 10f64.powf(i as f64 / 10.0))
        .collect();
    let ys = fds
        .iter()
        .map(|&fd| {
            Ok(alpha_star_expansion(&reference, &b, &make_frame(fd)?)?
                .alpha_unclamped
                .ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (slope, _) = linear_fit(&fds.iter().map(|f| f.ln()).collect::<Vec<_>>(), &ys);
    outcomes.push(outcome(
        Check::OverheadScaling,
        (slope - 0.5).abs() < 0.05,
        format!("log-log slope {slope:.4}"),
    ));

    Ok(ValidateReport { outcomes })
}

fn training_check(cfg: &NetworkConfig, trials: u64, seed: u64) -> Result<CheckOutcome> {
    // Forward: tau P / Nt = 100; feedback: tau Pf / Nr = 50.
    let nt = cfg.tx_antennas() as f64;
    let nr = cfg.rx_antennas() as f64;
    let tau_t = cfg.users() * cfg.tx_antennas();
    let tau_p = cfg.users() * cfg.rx_antennas();
    let power = 100.0 * nt / tau_t as f64;
    let b = LinkBudget::new(power, 50.0 * nr / (tau_p as f64 * power), 1.0)?;
    let noise = NoiseSources::default();
    let sums = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let mut r = rng::stream(seed, &[0xa4, t]);
            let ch = sample_channels_with(cfg, &mut r);
            let rx = forward_training(&ch, cfg, &b, tau_t, &noise, &mut r)?;
            let fb = feedback_training(&ch, cfg, &b, tau_p, &noise, &mut r)?;
            let fe: f64 = rx
                .estimates
                .iter()
                .zip(ch.forward())
                .map(|(e, h)| frob_sq(&(h - e)))
                .sum();
            let be: f64 = fb
                .estimates
                .iter()
                .zip(ch.feedback())
                .map(|(e, g)| frob_sq(&(g - e)))
                .sum();
            Ok((fe, be))
        })
        .collect::<Result<Vec<_>>>()?;
    let entries =
        (cfg.users() * cfg.users() * cfg.tx_antennas() * cfg.rx_antennas()) as f64 * trials as f64;
    let fwd = sums.iter().map(|s| s.0).sum::<f64>() / entries;
    let back = sums.iter().map(|s| s.1).sum::<f64>() / entries;
    let (gf, gb) = (fwd * 101.0 - 1.0, back * 51.0 - 1.0);
    Ok(outcome(
        Check::TrainingErrorVariance,
        gf.abs() < 0.03 && gb.abs() < 0.03,
        format!("forward {fwd:.5} vs 1/101 ({gf:+.4}), feedback {back:.5} vs 1/51 ({gb:+.4})"),
    ))
}

fn split_check(
    cfg: &NetworkConfig,
    samples: u64,
    seed: u64,
    formulas: &Formulas,
) -> Result<CheckOutcome> {
    let b = LinkBudget::from_stream_snr(10.0, 1, 1.0)?;
    let total = 100usize;
    let best = optimal_split(cfg, &b, total as f64)?;
    let best_value = (formulas.error_variance)(cfg, &b, &best.allocation)?;
    let min = OverheadAllocation::minimum(cfg);
    let spare = total - min.total();
    let mut r = rng::stream(seed, &[0xa5]);
    let mut wins = 0u64;
    for _ in 0..samples {
        let x = r.random_range(0..=spare);
        let y = r.random_range(0..=spare - x);
        let a = OverheadAllocation::new(
            min.forward_training + x,
            min.feedback_training + y,
            min.feedback + spare - x - y,
        );
        if best_value <= (formulas.error_variance)(cfg, &b, &a)? {
            wins += 1;
        }
    }
    Ok(outcome(
        Check::SplitOptimality,
        wins == samples,
        format!("optimal split no worse in {wins}/{samples} draws"),
    ))
}

//! Monte Carlo drivers.
//!
//! Every trial draws from its own RNG streams keyed by `(seed, point, trial)`,
//! so results do not depend on how trials are scheduled across threads.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{sample_channels_with, ChannelSet, FadingFrame, LinkBudget, NetworkConfig};
use crate::csi::{acquire_csi, AcquisitionOptions, OverheadAllocation};
use crate::error::Result;
use crate::ia::{align, effective_gains, SolverOptions};
use crate::rng;
use crate::stats::Moments;

const CHANNEL_STREAM: u64 = 0;
const CSI_STREAM: u64 = 1;
const SOLVER_STREAM: u64 = 2;

fn trial_channels(cfg: &NetworkConfig, seed: u64, point: u64, trial: u64) -> ChannelSet {
    sample_channels_with(cfg, &mut rng::stream(seed, &[point, trial, CHANNEL_STREAM]))
}

fn solver(seed: u64, point: u64, trial: u64) -> SolverOptions {
    SolverOptions::with_seed(rng::derive_seed(seed, &[point, trial, SOLVER_STREAM]))
}

/// Effective direct gains `w* H_ii f` of perfect-CSI IA, trial-major then
/// user-major, along with the number of trials whose solver missed its
/// tolerance (their best iterate is still used).
pub fn direct_gain_samples(
    cfg: &NetworkConfig,
    trials: u64,
    seed: u64,
) -> Result<(Vec<Complex64>, usize)> {
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ch = trial_channels(cfg, seed, 0, t);
            align(&ch, cfg, &solver(seed, 0, t)).map(|s| (s.gains, s.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    let missed = per_trial.iter().filter(|(_, ok)| !ok).count();
    Ok((per_trial.into_iter().flat_map(|(g, _)| g).collect(), missed))
}

/// Moments of one stream's complex gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainMoments {
    pub mean: Complex64,
    /// `E|g - mean|^2`.
    pub variance: f64,
    pub real: Moments,
    pub imag: Moments,
}

/// Per-stream moments of samples laid out as by [`direct_gain_samples`].
pub fn gain_moments(samples: &[Complex64], streams: usize) -> Vec<GainMoments> {
    (0..streams)
        .map(|s| {
            let re: Vec<f64> = samples
                .iter()
                .skip(s)
                .step_by(streams)
                .map(|g| g.re)
                .collect();
            let im: Vec<f64> = samples
                .iter()
                .skip(s)
                .step_by(streams)
                .map(|g| g.im)
                .collect();
            let (real, imag) = (Moments::of(&re), Moments::of(&im));
            GainMoments {
                mean: Complex64::new(real.mean, imag.mean),
                variance: real.variance + imag.variance,
                real,
                imag,
            }
        })
        .collect()
}

/// Sample mean of `sum_s log2(1 + rho |g_s|^2)` over trials.
pub fn monte_carlo_sum_rate(samples: &[Complex64], streams: usize, rho: f64) -> f64 {
    let total: f64 = samples.iter().map(|g| (rho * g.norm_sqr()).ln_1p()).sum();
    total / std::f64::consts::LN_2 / (samples.len() / streams) as f64
}

/// Outcome of [`simulate_effective_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEnd {
    /// `(1 - overhead/T)` times the simulated average sum rate.
    pub effective_rate: f64,
    pub sum_rate: f64,
    /// Mean of `(P/d) sum_k |w_i* (H_ik - Hhat_ik) f_k|^2` per stream.
    pub mean_leakage: f64,
    /// Mean of `(P/d) |w_i* Hhat_ii f_i|^2` per stream.
    pub mean_signal: f64,
    /// Empirical per-entry CSI error variance.
    pub csi_error: f64,
    pub unconverged: usize,
}

/// Full link simulation: three-phase CSI acquisition with `alloc`, IA and
/// zero-forcing on the estimates, and the sum rate that treats leakage
/// through the estimation error as Gaussian noise of matching power.
#[allow(clippy::too_many_arguments)]
pub fn simulate_effective_rate(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
    alloc: &OverheadAllocation,
    opts: &AcquisitionOptions,
    trials: u64,
    seed: u64,
    point: u64,
) -> Result<EndToEnd> {
    let k = cfg.users();
    let d = cfg.streams();
    let per_stream_power = budget.power() / d as f64;

    struct Trial {
        signal: Vec<f64>,
        leakage: f64,
        csi_error: f64,
        converged: bool,
    }

    let trials_out = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Trial> {
            let ch = trial_channels(cfg, seed, point, t);
            let mut csi_rng = rng::stream(seed, &[point, t, CSI_STREAM]);
            let est = acquire_csi(&ch, cfg, budget, alloc, opts, &mut csi_rng)?;
            let est_ch = ch.with_forward(est.estimates.clone())?;
            let sol = align(&est_ch, cfg, &solver(seed, point, t))?;
            let signal = effective_gains(&sol.precoders, &sol.combiners, &est_ch)
                .iter()
                .map(|g| per_stream_power * g.norm_sqr())
                .collect();
            let mut leakage = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let err = ch.h(i, j) - est_ch.h(i, j);
                    let cross = sol.combiners[i].adjoint() * err * &sol.precoders[j];
                    leakage += cross.iter().map(|c| c.norm_sqr()).sum::<f64>();
                }
            }
            Ok(Trial {
                signal,
                leakage: per_stream_power * leakage,
                csi_error: est.empirical_error(&ch),
                converged: sol.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trials as f64;
    let streams = (k * d) as f64;
    let mean_leakage = trials_out.iter().map(|t| t.leakage).sum::<f64>() / (n * streams);
    let mean_signal = trials_out.iter().flat_map(|t| &t.signal).sum::<f64>() / (n * streams);
    let floor = mean_leakage + budget.noise_var();
    let sum_rate = trials_out
        .iter()
        .map(|t| t.signal.iter().map(|s| (s / floor).ln_1p()).sum::<f64>())
        .sum::<f64>()
        / std::f64::consts::LN_2
        / n;
    let overhead = alloc.total() as f64 / frame.length();
    Ok(EndToEnd {
        effective_rate: (1.0 - overhead) * sum_rate,
        sum_rate,
        mean_leakage,
        mean_signal,
        csi_error: trials_out.iter().map(|t| t.csi_error).sum::<f64>() / n,
        unconverged: trials_out.iter().filter(|t| !t.converged).count(),
    })
}

/// Transmitter-side CSI error of both estimators on common channel and
/// noise draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorStatistics {
    pub mmse: f64,
    pub zero_forcing: f64,
    /// Mean feedback energy over its budget `tau_f Pf`.
    pub energy_ratio: f64,
    /// Largest off-diagonal magnitude over the mean diagonal of the
    /// zero-forcing per-column error covariance.
    pub covariance_offdiag: f64,
    /// Relative spread of that covariance's diagonal.
    pub covariance_diag_spread: f64,
}

pub fn csi_error_statistics(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    alloc: &OverheadAllocation,
    trials: u64,
    seed: u64,
    point: u64,
) -> Result<CsiErrorStatistics> {
    use crate::csi::EstimatorVariant;
    use crate::CMatrix;

    let nr = cfg.rx_antennas();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, f64, CMatrix)> {
            let ch = trial_channels(cfg, seed, point, t);
            let run = |variant| {
                let opts = AcquisitionOptions {
                    variant,
                    ..Default::default()
                };
                acquire_csi(
                    &ch,
                    cfg,
                    budget,
                    alloc,
                    &opts,
                    &mut rng::stream(seed, &[point, t, CSI_STREAM]),
                )
            };
            let mmse = run(EstimatorVariant::Mmse)?;
            let zf = run(EstimatorVariant::ZeroForcing)?;
            let mut cov = CMatrix::zeros(nr, nr);
            for (e, h) in zf.estimates.iter().zip(ch.forward()) {
                let err = h - e;
                cov += &err * err.adjoint();
            }
            Ok((
                mmse.empirical_error(&ch),
                zf.empirical_error(&ch),
                zf.feedback_energy.iter().sum(),
                cov,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trials as f64;
    let mut cov = CMatrix::zeros(nr, nr);
    for (_, _, _, c) in &per_trial {
        cov += c;
    }
    let diag: Vec<f64> = (0..nr).map(|i| cov[(i, i)].re).collect();
    let diag_mean = diag.iter().sum::<f64>() / nr as f64;
    let mut offdiag: f64 = 0.0;
    for i in 0..nr {
        for j in 0..nr {
            if i != j {
                offdiag = offdiag.max(cov[(i, j)].norm());
            }
        }
    }
    let spread = diag
        .iter()
        .map(|d| (d / diag_mean - 1.0).abs())
        .fold(0.0, f64::max);
    let budget_energy = (cfg.users() * alloc.feedback) as f64 * budget.feedback_power();
    Ok(CsiErrorStatistics {
        mmse: per_trial.iter().map(|t| t.0).sum::<f64>() / n,
        zero_forcing: per_trial.iter().map(|t| t.1).sum::<f64>() / n,
        energy_ratio: per_trial.iter().map(|t| t.2).sum::<f64>() / n / budget_energy,
        covariance_offdiag: offdiag / diag_mean,
        covariance_diag_spread: spread,
    })
}

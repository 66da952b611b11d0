//! Three-phase CSI acquisition: forward training, feedback-channel training
//! and analog feedback of the receivers' estimates, plus the closed-form
//! distortion it leaves at the transmitters and the overhead split that
//! minimizes it.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelSet, LinkBudget, NetworkConfig};
use crate::error::{Error, Result};
use crate::linalg::{dft_rows, frob_sq, gaussian_matrix};
use crate::CMatrix;

/// Symbol counts for the three acquisition phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct OverheadAllocation {
    pub forward_training: usize,
    pub feedback_training: usize,
    pub feedback: usize,
}

impl OverheadAllocation {
    pub fn new(forward_training: usize, feedback_training: usize, feedback: usize) -> Self {
        Self {
            forward_training,
            feedback_training,
            feedback,
        }
    }

    /// Smallest allocation with orthogonal pilots and spreading codes:
    /// `(K Nt, K Nr, K^2 Nt)`.
    pub fn minimum(cfg: &NetworkConfig) -> Self {
        let (k, nt, nr) = (cfg.users(), cfg.tx_antennas(), cfg.rx_antennas());
        Self::new(k * nt, k * nr, k * k * nt)
    }

    pub fn total(&self) -> usize {
        self.forward_training + self.feedback_training + self.feedback
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        let min = Self::minimum(cfg);
        for (phase, required, given) in [
            (
                "forward training",
                min.forward_training,
                self.forward_training,
            ),
            (
                "feedback training",
                min.feedback_training,
                self.feedback_training,
            ),
            ("analog feedback", min.feedback, self.feedback),
        ] {
            if given < required {
                return Err(Error::PilotLength {
                    phase,
                    required,
                    given,
                });
            }
        }
        Ok(())
    }

    fn as_f64(&self) -> [f64; 3] {
        [
            self.forward_training as f64,
            self.feedback_training as f64,
            self.feedback as f64,
        ]
    }
}

/// Minimum overhead fraction `K (Nt + Nr + K Nt) / Tframe`.
pub fn alpha_min(cfg: &NetworkConfig, frame_length: f64) -> Result<f64> {
    let symbols = OverheadAllocation::minimum(cfg).total() as f64;
    if frame_length < symbols {
        return Err(Error::InfeasibleBudget(format!(
            "frame of {frame_length} symbols is shorter than the {symbols}-symbol minimum overhead"
        )));
    }
    Ok(symbols / frame_length)
}

fn margin(cfg: &NetworkConfig) -> Result<f64> {
    match cfg.feedback_margin() {
        0 => Err(Error::InvalidConfig(
            "closed-form CSI error needs K*Nt > Nr".into(),
        )),
        m => Ok(m as f64),
    }
}

/// How the feedback-noise term is normalized in [`error_terms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackNoiseScaling {
    /// Feedback noise averaged over the analog feedback interval `tau_f`.
    #[default]
    FeedbackInterval,
    /// Same term normalized by the feedback-training interval `tau_p`
    /// instead; kept only to compare against that alternative reading.
    TrainingInterval,
}

/// The three additive contributions to the transmitter-side error variance,
/// in high-SNR (zero-forcing) form: forward training, feedback-channel
/// training, and analog feedback noise.
pub fn error_terms_at(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    taus: [f64; 3],
    scaling: FeedbackNoiseScaling,
) -> Result<[f64; 3]> {
    let m = margin(cfg)?;
    let (k, nt, nr) = (
        cfg.users() as f64,
        cfg.tx_antennas() as f64,
        cfg.rx_antennas() as f64,
    );
    let (p, g, s2) = (budget.power(), budget.gamma(), budget.noise_var());
    let [tt, tp, tf] = taus;
    let noise_interval = match scaling {
        FeedbackNoiseScaling::FeedbackInterval => tf,
        FeedbackNoiseScaling::TrainingInterval => tp,
    };
    Ok([
        nt * s2 / (tt * p),
        s2 / (p * m) * nr * nr / (g * tp),
        s2 / (p * m) * k * nt * nr / (g * noise_interval),
    ])
}

/// Per-term error variance for an integer allocation.
pub fn error_terms(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    alloc: &OverheadAllocation,
    scaling: FeedbackNoiseScaling,
) -> Result<[f64; 3]> {
    alloc.validate(cfg)?;
    error_terms_at(cfg, budget, alloc.as_f64(), scaling)
}

/// Closed-form CSI error variance after training and analog feedback,
/// evaluated at real-valued phase lengths.
pub fn error_variance_at(cfg: &NetworkConfig, budget: &LinkBudget, taus: [f64; 3]) -> Result<f64> {
    Ok(
        error_terms_at(cfg, budget, taus, FeedbackNoiseScaling::FeedbackInterval)?
            .iter()
            .sum(),
    )
}

/// Closed-form CSI error variance
/// `Nt s2/(tt P) + s2/(P (K Nt - Nr)) (Nr^2/(g tp) + K Nt Nr/(g tf))`.
pub fn error_variance(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    alloc: &OverheadAllocation,
) -> Result<f64> {
    alloc.validate(cfg)?;
    error_variance_at(cfg, budget, alloc.as_f64())
}

/// Error variance before the final high-SNR simplification: the feedback
/// term keeps the `1 + Nr s2 / (tp Pf)` penalty for imperfect feedback
/// channel estimates.
pub fn error_variance_unsimplified(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    alloc: &OverheadAllocation,
) -> Result<f64> {
    alloc.validate(cfg)?;
    let m = margin(cfg)?;
    let (k, nt, nr) = (
        cfg.users() as f64,
        cfg.tx_antennas() as f64,
        cfg.rx_antennas() as f64,
    );
    let (p, pf, s2) = (budget.power(), budget.feedback_power(), budget.noise_var());
    let [tt, tp, tf] = alloc.as_f64();
    Ok(nt * s2 / (tt * p)
        + s2 / (m * pf) * (nr * nr / tp + k * nt * nr / tf * (1.0 + nr * s2 / (tp * pf))))
}

/// Weights `(sqrt(g Nt (K Nt - Nr)), Nr, sqrt(K Nt Nr))` of the optimal split;
/// their sum is the normalizer `mu`.
pub fn split_weights(cfg: &NetworkConfig, gamma: f64) -> Result<[f64; 3]> {
    let m = margin(cfg)?;
    let (k, nt, nr) = (
        cfg.users() as f64,
        cfg.tx_antennas() as f64,
        cfg.rx_antennas() as f64,
    );
    Ok([(gamma * nt * m).sqrt(), nr, (k * nt * nr).sqrt()])
}

/// Result of [`optimal_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalSplit {
    /// Continuous minimizer `(tt*, tp*, tf*)` of the error variance.
    pub continuous: [f64; 3],
    /// Error variance at the continuous minimizer.
    pub sigma2h_continuous: f64,
    /// Best integer allocation using `floor(budget)` symbols.
    pub allocation: OverheadAllocation,
    /// Error variance of `allocation` (never below `sigma2h_continuous`).
    pub sigma2h: f64,
}

/// Minimum error variance for a continuous overhead budget of
/// `overhead_symbols`: `s2 mu^2 / (g P (K Nt - Nr) alpha T)`.
pub fn min_error_variance(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    overhead_symbols: f64,
) -> Result<f64> {
    let w = split_weights(cfg, budget.gamma())?;
    let mu: f64 = w.iter().sum();
    Ok(budget.noise_var() * mu * mu
        / (budget.gamma() * budget.power() * margin(cfg)? * overhead_symbols))
}

/// Splits an overhead budget between the three phases to minimize the
/// CSI error variance.
///
/// The continuous optimum is proportional to [`split_weights`]. The integer
/// allocation searches the lattice neighbours of that point under the sum
/// and minimum-length constraints; when the continuous optimum itself
/// violates a minimum length, the exact greedy allocation for separable
/// convex costs is used instead.
pub fn optimal_split(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    overhead_symbols: f64,
) -> Result<OptimalSplit> {
    let min = OverheadAllocation::minimum(cfg);
    if !(overhead_symbols >= min.total() as f64) {
        return Err(Error::InfeasibleBudget(format!(
            "{overhead_symbols} overhead symbols is below the {}-symbol minimum",
            min.total()
        )));
    }
    let w = split_weights(cfg, budget.gamma())?;
    let mu: f64 = w.iter().sum();
    let continuous = w.map(|x| x / mu * overhead_symbols);
    let sigma2h_continuous = error_variance_at(cfg, budget, continuous)?;

    let total = overhead_symbols.floor() as usize;
    let mins = [min.forward_training, min.feedback_training, min.feedback];
    let cost = |a: [usize; 3]| error_variance_at(cfg, budget, a.map(|x| x as f64));

    let interior = continuous.iter().zip(&mins).all(|(&c, &m)| c >= m as f64);
    let mut best: Option<([usize; 3], f64)> = None;
    if interior {
        let span = |c: f64| {
            let lo = (c.floor() as i64 - 1).max(0) as usize;
            lo..=(c.ceil() as usize + 1)
        };
        for t in span(continuous[0]) {
            for p in span(continuous[1]) {
                if t + p > total {
                    continue;
                }
                let cand = [t, p, total - t - p];
                if cand.iter().zip(&mins).any(|(&x, &m)| x < m) {
                    continue;
                }
                if (cand[2] as f64 - continuous[2]).abs() > 3.0 {
                    continue;
                }
                let v = cost(cand)?;
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((cand, v));
                }
            }
        }
    }
    let (alloc, sigma2h) = match best {
        Some(b) => b,
        None => {
            let a = greedy_split(cfg, budget, mins, total)?;
            (a, cost(a)?)
        }
    };
    Ok(OptimalSplit {
        continuous,
        sigma2h_continuous,
        allocation: OverheadAllocation::new(alloc[0], alloc[1], alloc[2]),
        sigma2h,
    })
}

/// Hands out symbols one at a time to the phase with the largest error
/// reduction, starting from the minimum lengths.
fn greedy_split(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    mins: [usize; 3],
    total: usize,
) -> Result<[usize; 3]> {
    let mut alloc = mins;
    let unit = |a: [usize; 3]| {
        error_terms_at(
            cfg,
            budget,
            a.map(|x| x as f64),
            FeedbackNoiseScaling::FeedbackInterval,
        )
    };
    let mut terms = unit(alloc)?;
    for _ in mins.iter().sum::<usize>()..total {
        let mut gain = [0.0; 3];
        for (j, g) in gain.iter_mut().enumerate() {
            let n = alloc[j] as f64;
            *g = terms[j] * (1.0 - n / (n + 1.0));
        }
        let j = (0..3)
            .max_by(|&a, &b| gain[a].total_cmp(&gain[b]))
            .unwrap_or(0);
        alloc[j] += 1;
        terms = unit(alloc)?;
    }
    Ok(alloc)
}

/// Which transmitter-side estimator to run on the analog feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorVariant {
    /// Linear MMSE with both regularizers.
    #[default]
    Mmse,
    /// Regularizers dropped (high-SNR simplification).
    ZeroForcing,
}

/// Which noise sources are active; disabling one makes that phase noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSources {
    pub forward_training: bool,
    pub feedback_training: bool,
    pub feedback: bool,
}

impl Default for NoiseSources {
    fn default() -> Self {
        Self {
            forward_training: true,
            feedback_training: true,
            feedback: true,
        }
    }
}

impl NoiseSources {
    pub fn only(term: usize) -> Self {
        Self {
            forward_training: term == 0,
            feedback_training: term == 1,
            feedback: term == 2,
        }
    }

    fn mask(&self) -> [bool; 3] {
        [self.forward_training, self.feedback_training, self.feedback]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AcquisitionOptions {
    pub variant: EstimatorVariant,
    pub noise: NoiseSources,
}

/// Orthogonal pilot bank: `users` blocks of `per_user` rows of a
/// `length`-point unitary DFT, so `Phi_i Phi_k* = delta_ik I`.
pub fn pilot_bank(users: usize, per_user: usize, length: usize) -> Result<Vec<CMatrix>> {
    if length < users * per_user {
        return Err(Error::Dimension(format!(
            "{users} x {per_user} orthogonal rows need length >= {}",
            users * per_user
        )));
    }
    Ok((0..users)
        .map(|k| dft_rows(length, k * per_user, per_user))
        .collect())
}

/// MMSE channel estimates from one training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingEstimates {
    /// Same indexing as the underlying link in [`ChannelSet`].
    pub estimates: Vec<CMatrix>,
    pub symbols: usize,
    /// Per-entry estimate variance `(tau P'/N)/(s2 + tau P'/N)`.
    pub estimate_variance: f64,
    /// Per-entry error variance `s2/(s2 + tau P'/N)`.
    pub error_variance: f64,
}

/// Generic orthogonal-pilot training: transmitter `k` of `users` sends
/// `amp * Phi_k`; receiver `r` observes `sum_k C_{r,k} amp Phi_k + noise`
/// and forms `amp/(s2 + amp^2) Y_r Phi_k*`.
fn train<R: Rng + ?Sized>(
    link: impl Fn(usize, usize) -> CMatrix,
    users: usize,
    rx_dim: usize,
    tx_dim: usize,
    amp: f64,
    noise_var: f64,
    symbols: usize,
    rng: &mut R,
) -> Result<TrainingEstimates> {
    let pilots = pilot_bank(users, tx_dim, symbols)?;
    let gain = amp / (noise_var + amp * amp);
    let amp_c = Complex64::new(amp, 0.0);
    let mut estimates = vec![CMatrix::zeros(rx_dim, tx_dim); users * users];
    for r in 0..users {
        let mut y = gaussian_matrix(rx_dim, symbols, noise_var, rng);
        for (k, phi) in pilots.iter().enumerate() {
            y += link(r, k) * phi * amp_c;
        }
        for (k, phi) in pilots.iter().enumerate() {
            estimates[r * users + k] = &y * phi.adjoint() * Complex64::new(gain, 0.0);
        }
    }
    let snr = amp * amp;
    Ok(TrainingEstimates {
        estimates,
        symbols,
        estimate_variance: snr / (noise_var + snr),
        error_variance: noise_var / (noise_var + snr),
    })
}

/// Forward training: receivers estimate `H_{i,k}` from `tau_t` pilot symbols.
/// `estimates[i * K + k]` is receiver `i`'s estimate of `H_{i,k}`.
pub fn forward_training<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    symbols: usize,
    noise: &NoiseSources,
    rng: &mut R,
) -> Result<TrainingEstimates> {
    let min = OverheadAllocation::minimum(cfg).forward_training;
    if symbols < min {
        return Err(Error::PilotLength {
            phase: "forward training",
            required: min,
            given: symbols,
        });
    }
    let amp = (symbols as f64 * budget.power() / cfg.tx_antennas() as f64).sqrt();
    let s2 = if noise.forward_training {
        budget.noise_var()
    } else {
        0.0
    };
    train(
        |i, k| channels.h(i, k).clone(),
        cfg.users(),
        cfg.rx_antennas(),
        cfg.tx_antennas(),
        amp,
        s2,
        symbols,
        rng,
    )
}

/// Feedback-channel training: transmitters estimate `G_{l,i}` from the
/// receivers' `tau_p` pilot symbols. `estimates[l * K + i]` estimates `G_{l,i}`.
pub fn feedback_training<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    symbols: usize,
    noise: &NoiseSources,
    rng: &mut R,
) -> Result<TrainingEstimates> {
    let min = OverheadAllocation::minimum(cfg).feedback_training;
    if symbols < min {
        return Err(Error::PilotLength {
            phase: "feedback training",
            required: min,
            given: symbols,
        });
    }
    let amp = (symbols as f64 * budget.feedback_power() / cfg.rx_antennas() as f64).sqrt();
    let s2 = if noise.feedback_training {
        budget.noise_var()
    } else {
        0.0
    };
    // Train with transmitter i as the observer; re-index to [l * K + i].
    let by_observer = train(
        |i, l| channels.g(l, i).clone(),
        cfg.users(),
        cfg.tx_antennas(),
        cfg.rx_antennas(),
        amp,
        s2,
        symbols,
        rng,
    )?;
    let k = cfg.users();
    let mut estimates = vec![CMatrix::zeros(0, 0); k * k];
    for i in 0..k {
        for l in 0..k {
            estimates[l * k + i] = by_observer.estimates[i * k + l].clone();
        }
    }
    Ok(TrainingEstimates {
        estimates,
        ..by_observer
    })
}

/// Transmitter-common forward-channel estimate after analog feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiEstimate {
    /// `estimates[i * K + k]` estimates `H_{i,k}`.
    pub estimates: Vec<CMatrix>,
    /// Closed-form error variance for the active noise sources.
    pub sigma2h: f64,
    pub variant: EstimatorVariant,
    /// `trace(X_i X_i*)` of each receiver's feedback transmission.
    pub feedback_energy: Vec<f64>,
}

impl CsiEstimate {
    /// Per-entry mean squared error against the true forward channels.
    pub fn empirical_error(&self, channels: &ChannelSet) -> f64 {
        let n: usize = self.estimates.iter().map(|m| m.len()).sum();
        let sq: f64 = self
            .estimates
            .iter()
            .zip(channels.forward())
            .map(|(e, h)| frob_sq(&(h - e)))
            .sum();
        sq / n as f64
    }
}

/// Analog feedback of the receivers' estimates followed by the transmitters'
/// cooperative estimate of every forward channel.
///
/// Receiver `i` spreads `[H^r_{i,1} ... H^r_{i,K}]` with `Psi_i`
/// (`K Nt x tau_f`, mutually orthogonal across receivers) at a gain meeting
/// the feedback energy budget `tau_f Pf` on average. The transmitters stack
/// their observations, despread with `Psi_i*` and invert the estimated
/// feedback channel `G_i = [G_{i,1}; ...; G_{i,K}]`.
#[allow(clippy::too_many_arguments)]
pub fn analog_feedback<R: Rng + ?Sized>(
    receiver: &TrainingEstimates,
    feedback_channel: &TrainingEstimates,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    symbols: usize,
    opts: &AcquisitionOptions,
    rng: &mut R,
) -> Result<CsiEstimate> {
    let (k, nt, nr) = (cfg.users(), cfg.tx_antennas(), cfg.rx_antennas());
    let min = OverheadAllocation::minimum(cfg).feedback;
    if symbols < min {
        return Err(Error::PilotLength {
            phase: "analog feedback",
            required: min,
            given: symbols,
        });
    }
    if k * nt < nr {
        return Err(Error::Dimension(
            "analog feedback estimation needs K*Nt >= Nr".into(),
        ));
    }
    let knt = k * nt;
    let (p, pf) = (budget.power(), budget.feedback_power());
    let fb_noise = if opts.noise.feedback {
        budget.noise_var()
    } else {
        0.0
    };
    let fwd_noise = if opts.noise.forward_training {
        budget.noise_var()
    } else {
        0.0
    };

    let est_var = receiver.estimate_variance;
    let tx_gain = (symbols as f64 * pf / (knt * nr) as f64 / est_var).sqrt();
    let spreading = pilot_bank(k, knt, symbols)?;

    let concat = |blocks: &dyn Fn(usize) -> CMatrix, rows: usize, cols: usize| {
        let mut out = CMatrix::zeros(rows, cols * k);
        for j in 0..k {
            out.columns_mut(j * cols, cols).copy_from(&blocks(j));
        }
        out
    };
    let stack = |blocks: Vec<&CMatrix>| {
        let mut out = CMatrix::zeros(knt, nr);
        for (j, b) in blocks.into_iter().enumerate() {
            out.rows_mut(j * nt, nt).copy_from(b);
        }
        out
    };

    let mut received = gaussian_matrix(knt, symbols, fb_noise, rng);
    let mut feedback_energy = Vec::with_capacity(k);
    for i in 0..k {
        let hr = concat(&|j| receiver.estimates[i * k + j].clone(), nr, nt);
        let x = hr * &spreading[i] * Complex64::new(tx_gain, 0.0);
        feedback_energy.push(frob_sq(&x));
        let g = stack((0..k).map(|j| channels.g(i, j)).collect());
        received += g * x;
    }

    let (gamma1, gamma2) = match opts.variant {
        EstimatorVariant::ZeroForcing => (0.0, 0.0),
        EstimatorVariant::Mmse => {
            let g1 = nt as f64 * fwd_noise / (p * receiver.symbols as f64);
            let g2 = (1.0 + g1)
                * (fb_noise * (knt * nr) as f64 / (symbols as f64 * pf)
                    + nr as f64 * feedback_channel.error_variance);
            (g1, g2)
        }
    };
    let rx_gain = Complex64::new(
        ((knt * nr) as f64 / (symbols as f64 * pf) / est_var).sqrt(),
        0.0,
    );

    let mut estimates = vec![CMatrix::zeros(nr, nt); k * k];
    for i in 0..k {
        let ghat = stack(
            (0..k)
                .map(|j| &feedback_channel.estimates[i * k + j])
                .collect(),
        );
        let gram = ghat.adjoint() * &ghat;
        let reg = &gram * Complex64::new(1.0 + gamma1, 0.0)
            + CMatrix::identity(nr, nr) * Complex64::new(gamma2, 0.0);
        let chol = Cholesky::new(reg).ok_or(Error::SingularFeedback(i))?;
        let despread = &received * spreading[i].adjoint();
        let hi = chol.solve(&(ghat.adjoint() * despread)) * rx_gain;
        for j in 0..k {
            estimates[i * k + j] = hi.columns(j * nt, nt).into_owned();
        }
    }

    let alloc = [receiver.symbols, feedback_channel.symbols, symbols].map(|x| x as f64);
    let terms = error_terms_at(cfg, budget, alloc, FeedbackNoiseScaling::FeedbackInterval)?;
    let sigma2h = terms
        .iter()
        .zip(opts.noise.mask())
        .filter(|(_, on)| *on)
        .map(|(t, _)| t)
        .sum();
    Ok(CsiEstimate {
        estimates,
        sigma2h,
        variant: opts.variant,
        feedback_energy,
    })
}

/// Runs all three phases for `alloc`, drawing noise from `rng` in phase order.
pub fn acquire_csi<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    alloc: &OverheadAllocation,
    opts: &AcquisitionOptions,
    rng: &mut R,
) -> Result<CsiEstimate> {
    alloc.validate(cfg)?;
    let rx = forward_training(
        channels,
        cfg,
        budget,
        alloc.forward_training,
        &opts.noise,
        rng,
    )?;
    let fb = feedback_training(
        channels,
        cfg,
        budget,
        alloc.feedback_training,
        &opts.noise,
        rng,
    )?;
    analog_feedback(&rx, &fb, channels, cfg, budget, alloc.feedback, opts, rng)
}

//! Network, link and fading configuration, and i.i.d. Rayleigh channel draws.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::gaussian_matrix;
use crate::{rng, CMatrix};

/// Homogeneous K-user MIMO interference network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct NetworkConfig {
    users: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    streams: usize,
}

impl NetworkConfig {
    pub fn new(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        streams: usize,
    ) -> Result<Self> {
        if users < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 users, got {users}"
            )));
        }
        if tx_antennas == 0 || rx_antennas == 0 {
            return Err(Error::InvalidConfig(
                "antenna counts must be positive".into(),
            ));
        }
        if streams == 0 || streams > tx_antennas.min(rx_antennas) {
            return Err(Error::InvalidConfig(format!(
                "streams per user must lie in 1..={}, got {streams}",
                tx_antennas.min(rx_antennas)
            )));
        }
        if users * tx_antennas < rx_antennas {
            return Err(Error::InvalidConfig(format!(
                "feedback estimation needs K*Nt >= Nr ({} < {rx_antennas})",
                users * tx_antennas
            )));
        }
        Ok(Self {
            users,
            tx_antennas,
            rx_antennas,
            streams,
        })
    }

    /// Single-stream cluster of `users` pairs with `Nt + Nr = K + 1` and
    /// `Nt = ceil((K+1)/2)`.
    pub fn single_stream_cluster(users: usize) -> Result<Self> {
        let tx = (users + 2) / 2;
        Self::new(users, tx, users + 1 - tx, 1)
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }
    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }
    pub fn streams(&self) -> usize {
        self.streams
    }

    /// Total number of streams `K d`.
    pub fn total_streams(&self) -> usize {
        self.users * self.streams
    }

    /// Proper-system test `d (K + 1) <= Nt + Nr`.
    pub fn is_ia_feasible(&self) -> bool {
        self.streams * (self.users + 1) <= self.tx_antennas + self.rx_antennas
    }

    /// `K Nt - Nr`, the degrees of freedom left for feedback estimation.
    pub fn feedback_margin(&self) -> usize {
        self.users * self.tx_antennas - self.rx_antennas
    }
}

/// Forward power, feedback power ratio and noise level.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkBudget {
    power: f64,
    gamma: f64,
    noise_var: f64,
}

impl LinkBudget {
    pub fn new(power: f64, gamma: f64, noise_var: f64) -> Result<Self> {
        for (name, v) in [
            ("power", power),
            ("gamma", gamma),
            ("noise variance", noise_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidBudget(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            power,
            gamma,
            noise_var,
        })
    }

    /// Unit-noise budget reaching per-stream SNR `rho` with `streams` streams.
    pub fn from_stream_snr(rho: f64, streams: usize, gamma: f64) -> Result<Self> {
        Self::new(rho * streams as f64, gamma, 1.0)
    }

    pub fn power(&self) -> f64 {
        self.power
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
    pub fn feedback_power(&self) -> f64 {
        self.gamma * self.power
    }

    /// Per-stream SNR `P / (d sigma^2)`.
    pub fn stream_snr(&self, streams: usize) -> f64 {
        self.power / (streams as f64 * self.noise_var)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.power, gamma, self.noise_var)
    }
}

/// Block-fading coherence interval tied to an effective Doppler spread.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FadingFrame {
    doppler: f64,
    length: f64,
    alpha: Option<f64>,
}

impl FadingFrame {
    pub fn doppler(&self) -> f64 {
        self.doppler
    }

    /// Coherence block length in symbols, `1 / (2 fd)`.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Overhead symbols `alpha * Tframe`, if an overhead fraction is set.
    pub fn overhead_symbols(&self) -> Option<f64> {
        self.alpha.map(|a| a * self.length)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InfeasibleBudget(format!(
                "overhead fraction must lie in (0, 1], got {alpha}"
            )));
        }
        self.alpha = Some(alpha);
        Ok(self)
    }

    /// Frame of `length` symbols; the Doppler spread is `1 / (2 length)`.
    pub fn from_length(length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidDoppler(1.0 / (2.0 * length)));
        }
        Ok(Self {
            doppler: 1.0 / (2.0 * length),
            length,
            alpha: None,
        })
    }
}

/// Block length `Tframe = 1 / (2 fd)` for normalized Doppler `fd`.
pub fn make_frame(doppler: f64) -> Result<FadingFrame> {
    if !(doppler > 0.0 && doppler.is_finite()) {
        return Err(Error::InvalidDoppler(doppler));
    }
    Ok(FadingFrame {
        doppler,
        length: 1.0 / (2.0 * doppler),
        alpha: None,
    })
}

/// Normalized Doppler `v / (lambda * Wc)` for speed `v` (m/s), carrier
/// wavelength `lambda` (m) and coherence bandwidth `Wc` (Hz).
pub fn normalized_doppler(speed: f64, wavelength: f64, coherence_bandwidth: f64) -> f64 {
    speed / (wavelength * coherence_bandwidth)
}

/// One block's forward (`H`) and feedback (`G`) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    users: usize,
    /// `forward[i * K + k]` is `H_{i,k}`: transmitter `k` to receiver `i`, `Nr x Nt`.
    forward: Vec<CMatrix>,
    /// `feedback[l * K + i]` is `G_{l,i}`: receiver `l` to transmitter `i`, `Nt x Nr`.
    feedback: Vec<CMatrix>,
}

impl ChannelSet {
    pub fn from_parts(users: usize, forward: Vec<CMatrix>, feedback: Vec<CMatrix>) -> Result<Self> {
        if forward.len() != users * users || feedback.len() != users * users {
            return Err(Error::Dimension(format!(
                "expected {} matrices per link direction",
                users * users
            )));
        }
        Ok(Self {
            users,
            forward,
            feedback,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// `H_{rx,tx}`.
    pub fn h(&self, rx: usize, tx: usize) -> &CMatrix {
        &self.forward[rx * self.users + tx]
    }

    /// `G_{rx,tx}`: from (forward) receiver `rx` to (forward) transmitter `tx`.
    pub fn g(&self, rx: usize, tx: usize) -> &CMatrix {
        &self.feedback[rx * self.users + tx]
    }

    pub fn forward(&self) -> &[CMatrix] {
        &self.forward
    }

    pub fn feedback(&self) -> &[CMatrix] {
        &self.feedback
    }

    /// Copy with the forward channels replaced, e.g. by transmitter-side estimates.
    pub fn with_forward(&self, forward: Vec<CMatrix>) -> Result<Self> {
        Self::from_parts(self.users, forward, self.feedback.clone())
    }

    /// Copy with every cross (interfering) forward channel scaled by `factor`.
    pub fn scale_cross(&self, factor: f64) -> Self {
        let k = self.users;
        let forward = self
            .forward
            .iter()
            .enumerate()
            .map(|(idx, h)| {
                if idx / k == idx % k {
                    h.clone()
                } else {
                    h * num_complex::Complex64::new(factor, 0.0)
                }
            })
            .collect();
        Self {
            users: k,
            forward,
            feedback: self.feedback.clone(),
        }
    }
}

/// Draws a [`ChannelSet`] with i.i.d. CN(0,1) entries from `rng`.
///
/// All forward matrices are drawn before any feedback matrix.
pub fn sample_channels_with<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> ChannelSet {
    let k = cfg.users();
    let (nt, nr) = (cfg.tx_antennas(), cfg.rx_antennas());
    let forward = (0..k * k)
        .map(|_| gaussian_matrix(nr, nt, 1.0, rng))
        .collect();
    let feedback = (0..k * k)
        .map(|_| gaussian_matrix(nt, nr, 1.0, rng))
        .collect();
    ChannelSet {
        users: k,
        forward,
        feedback,
    }
}

/// Deterministic channel draw for `seed`.
pub fn sample_channels(cfg: &NetworkConfig, seed: u64) -> ChannelSet {
    sample_channels_with(cfg, &mut rng::stream(seed, &[]))
}

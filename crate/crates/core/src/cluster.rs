//! Cluster sizing: how many single-stream users should cooperate.

use rayon::prelude::*;

use crate::channel::{make_frame, LinkBudget, NetworkConfig};
use crate::csi::OverheadAllocation;
use crate::error::{Error, Result};
use crate::overhead::alpha_star_numeric;

pub const DEFAULT_MAX_USERS: usize = 10;

/// Overhead growth polynomial `4K^3 + 15K^2 + 17K + 6`.
pub fn admission_polynomial(users: usize) -> f64 {
    let k = users as f64;
    ((4.0 * k + 15.0) * k + 17.0) * k + 6.0
}

/// Whether a `users`-user cluster should grow by one more user at
/// normalized Doppler `doppler`.
pub fn admission_rule(users: usize, doppler: f64) -> Result<bool> {
    if users < 2 {
        return Err(Error::InvalidConfig(format!(
            "cluster needs at least 2 users, got {users}"
        )));
    }
    if !(doppler > 0.0) {
        return Err(Error::InvalidDoppler(doppler));
    }
    Ok(admission_polynomial(users) < 1.0 / doppler)
}

/// Smallest `K` in `[2, max_users]` that the admission rule refuses to
/// extend, or `max_users`.
pub fn cluster_size_rule(doppler: f64, max_users: usize) -> Result<usize> {
    if max_users < 2 {
        return Err(Error::InvalidConfig(format!(
            "max_users must be at least 2, got {max_users}"
        )));
    }
    for k in 2..max_users {
        if !admission_rule(k, doppler)? {
            return Ok(k);
        }
    }
    Ok(max_users)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizingMethod {
    Exhaustive,
    AdmissionRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterCandidate {
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Optimized effective sum rate; zero when the frame cannot hold the
    /// minimum overhead.
    pub reff_star: f64,
    pub alpha_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDesign {
    pub k_star: usize,
    pub per_k: Vec<ClusterCandidate>,
    pub method: SizingMethod,
}

impl ClusterDesign {
    pub fn candidate(&self, users: usize) -> Option<&ClusterCandidate> {
        self.per_k.iter().find(|c| c.users == users)
    }

    pub fn best(&self) -> &ClusterCandidate {
        self.candidate(self.k_star)
            .expect("k_star is always evaluated")
    }

    /// Same candidates, sized by the admission rule instead.
    pub fn with_rule(&self, doppler: f64) -> Result<Self> {
        let kmax = self.per_k.iter().map(|c| c.users).max().unwrap_or(2);
        Ok(Self {
            k_star: cluster_size_rule(doppler, kmax)?,
            per_k: self.per_k.clone(),
            method: SizingMethod::AdmissionRule,
        })
    }

    /// Whether the rate sequence over `K` rises then falls (plateaus allowed).
    pub fn is_unimodal(&self) -> bool {
        let r: Vec<f64> = self.per_k.iter().map(|c| c.reff_star).collect();
        let peak = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        r[..=peak].windows(2).all(|w| w[1] >= w[0]) && r[peak..].windows(2).all(|w| w[1] <= w[0])
    }
}

/// Evaluates one cluster size with numerically optimized overhead.
pub fn evaluate_cluster(
    users: usize,
    budget: &LinkBudget,
    doppler: f64,
) -> Result<ClusterCandidate> {
    let cfg = NetworkConfig::single_stream_cluster(users)?;
    let frame = make_frame(doppler)?;
    let (reff_star, alpha_star) =
        if frame.length() < OverheadAllocation::minimum(&cfg).total() as f64 {
            (0.0, 1.0)
        } else {
            let d = alpha_star_numeric(&cfg, budget, &frame)?;
            (d.reff_achieved, d.alpha_star)
        };
    Ok(ClusterCandidate {
        users,
        tx_antennas: cfg.tx_antennas(),
        rx_antennas: cfg.rx_antennas(),
        reff_star,
        alpha_star,
    })
}

/// Evaluates every `K` in `[2, max_users]` and returns the best; ties go to
/// the smaller cluster.
pub fn cluster_size_exhaustive(
    budget: &LinkBudget,
    doppler: f64,
    max_users: usize,
) -> Result<ClusterDesign> {
    if max_users < 2 {
        return Err(Error::InvalidConfig(format!(
            "max_users must be at least 2, got {max_users}"
        )));
    }
    let per_k = (2..=max_users)
        .into_par_iter()
        .map(|k| evaluate_cluster(k, budget, doppler))
        .collect::<Result<Vec<_>>>()?;
    let mut best = &per_k[0];
    for c in &per_k[1..] {
        if c.reff_star > best.reff_star {
            best = c;
        }
    }
    Ok(ClusterDesign {
        k_star: best.users,
        per_k,
        method: SizingMethod::Exhaustive,
    })
}

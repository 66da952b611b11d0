//! Interference alignment by alternating leakage minimization, followed by
//! per-stream zero-forcing receivers.
//!
//! Precoders are computed from the cross channels only; the direct channels
//! `H_{i,i}` enter solely through the zero-forcing combiners (inter-stream
//! terms) and the reported effective gains.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelSet, NetworkConfig};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, gaussian_matrix, hermitian_eigh, smallest_eigenvectors};
use crate::{rng, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on both the total leakage power and every
    /// individual alignment residual `|w* H f|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the random unitary initialization.
    pub seed: u64,
    /// Keep the per-iteration leakage trace in [`IaSolution::history`].
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 5000,
            seed: 0,
            record_history: false,
        }
    }
}

impl SolverOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Precoders, combiners and resulting effective direct gains.
#[derive(Debug, Clone, PartialEq)]
pub struct IaSolution {
    /// `Nt x d` precoder per transmitter, orthonormal columns.
    pub precoders: Vec<CMatrix>,
    /// `Nr x d` zero-forcing combiner per receiver, unit-norm columns.
    pub combiners: Vec<CMatrix>,
    /// Total interference power `sum |w_i^m* H_{i,k} f_k^l|^2` over `(k,l) != (i,m)`.
    pub leakage: f64,
    /// Largest single alignment residual `|w_i^m* H_{i,k} f_k^l|`.
    pub max_residual: f64,
    /// `gains[i * d + m] = w_i^m* H_{i,i} f_i^m`.
    pub gains: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// Subspace leakage after each iteration (empty unless requested).
    pub history: Vec<f64>,
}

fn check_dims(channels: &ChannelSet, cfg: &NetworkConfig) -> Result<()> {
    if channels.users() != cfg.users() {
        return Err(Error::Dimension(format!(
            "channel set has {} users, config has {}",
            channels.users(),
            cfg.users()
        )));
    }
    let shape = (cfg.rx_antennas(), cfg.tx_antennas());
    if channels.forward().iter().any(|h| h.shape() != shape) {
        return Err(Error::Dimension(format!(
            "forward channels must be {}x{}",
            shape.0, shape.1
        )));
    }
    Ok(())
}

fn random_unitary<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(rows, cols, 1.0, rng);
    let q = g.qr().q();
    q.columns(0, cols).into_owned()
}

/// `sum_{k != i} ||U_i* H_{i,k} V_k||_F^2` with subspace receivers `U`, and
/// the largest single entry magnitude.
fn subspace_leakage(channels: &ChannelSet, rx: &[CMatrix], tx: &[CMatrix]) -> (f64, f64) {
    let k = channels.users();
    let mut total = 0.0;
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let block = rx[i].adjoint() * channels.h(i, j) * &tx[j];
            total += frob_sq(&block);
            worst = block.iter().map(|z| z.norm()).fold(worst, f64::max);
        }
    }
    (total, worst)
}

struct Combining {
    combiners: Vec<CMatrix>,
    /// Smallest-to-largest singular value ratio of each stream's interference matrix.
    conditioning: Vec<f64>,
}

/// Per-stream zero-forcing: `w_i^m` spans the least-energy direction of the
/// interference seen by stream `(i, m)`, which is its null space whenever
/// alignment holds.
fn null_combiners(precoders: &[CMatrix], channels: &ChannelSet, cfg: &NetworkConfig) -> Combining {
    let (k, d, nr) = (cfg.users(), cfg.streams(), cfg.rx_antennas());
    let mut combiners = Vec::with_capacity(k);
    let mut conditioning = Vec::with_capacity(k * d);
    for i in 0..k {
        let directions: Vec<CMatrix> = (0..k).map(|j| channels.h(i, j) * &precoders[j]).collect();
        let mut w = CMatrix::zeros(nr, d);
        for m in 0..d {
            let mut cov = CMatrix::zeros(nr, nr);
            for (j, dir) in directions.iter().enumerate() {
                for l in 0..d {
                    if (j, l) == (i, m) {
                        continue;
                    }
                    let a = dir.column(l);
                    cov += a * a.adjoint();
                }
            }
            let (values, vectors) = hermitian_eigh(&cov);
            let top = values[nr - 1].max(0.0);
            let ratio = if top > 0.0 {
                (values[0].max(0.0) / top).sqrt()
            } else {
                0.0
            };
            conditioning.push(ratio);
            w.set_column(m, &vectors.column(0));
        }
        combiners.push(w);
    }
    Combining {
        combiners,
        conditioning,
    }
}

/// Interference power and the largest residual for a precoder/combiner set.
pub fn alignment_residuals(
    precoders: &[CMatrix],
    combiners: &[CMatrix],
    channels: &ChannelSet,
    cfg: &NetworkConfig,
) -> (f64, f64) {
    let (k, d) = (cfg.users(), cfg.streams());
    let mut power = 0.0;
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let cross = combiners[i].adjoint() * channels.h(i, j) * &precoders[j];
            for m in 0..d {
                for l in 0..d {
                    if (j, l) == (i, m) {
                        continue;
                    }
                    let r = cross[(m, l)].norm();
                    power += r * r;
                    worst = worst.max(r);
                }
            }
        }
    }
    (power, worst)
}

/// Per-stream zero-forcing combiners for fixed precoders.
///
/// Fails with [`Error::RankDeficiency`] when a stream's interference
/// directions span the whole receive space (relative smallest singular
/// value above `1e-6`).
pub fn zf_combiners(
    precoders: &[CMatrix],
    channels: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<Vec<CMatrix>> {
    check_dims(channels, cfg)?;
    const RANK_TOL: f64 = 1e-6;
    let combining = null_combiners(precoders, channels, cfg);
    let d = cfg.streams();
    if let Some(idx) = combining.conditioning.iter().position(|&r| r > RANK_TOL) {
        return Err(Error::RankDeficiency {
            receiver: idx / d,
            stream: idx % d,
        });
    }
    Ok(combining.combiners)
}

/// Effective direct gains `w_i^m* H_{i,i} f_i^m`, ordered user-major.
pub fn effective_gains(
    precoders: &[CMatrix],
    combiners: &[CMatrix],
    channels: &ChannelSet,
) -> Vec<Complex64> {
    let mut gains = Vec::new();
    for (i, (f, w)) in precoders.iter().zip(combiners).enumerate() {
        let g = w.adjoint() * channels.h(i, i) * f;
        gains.extend((0..f.ncols()).map(|m| g[(m, m)]));
    }
    gains
}

fn assemble(
    precoders: Vec<CMatrix>,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    iterations: usize,
    tol: f64,
    history: Vec<f64>,
) -> IaSolution {
    let combiners = null_combiners(&precoders, channels, cfg).combiners;
    let (leakage, max_residual) = alignment_residuals(&precoders, &combiners, channels, cfg);
    let gains = effective_gains(&precoders, &combiners, channels);
    IaSolution {
        precoders,
        combiners,
        leakage,
        max_residual,
        gains,
        iterations,
        converged: leakage < tol && max_residual < tol,
        history,
    }
}

/// Alternating leakage minimization.
///
/// Always returns the final iterate; `converged` tells whether it met the
/// tolerance. [`solve_ia`] turns non-convergence into an error.
pub fn align(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
) -> Result<IaSolution> {
    check_dims(channels, cfg)?;
    if !cfg.is_ia_feasible() {
        return Err(Error::InfeasibleConfig(format!(
            "d(K+1) = {} exceeds Nt+Nr = {}",
            cfg.streams() * (cfg.users() + 1),
            cfg.tx_antennas() + cfg.rx_antennas()
        )));
    }
    let (k, d, nt, nr) = (
        cfg.users(),
        cfg.streams(),
        cfg.tx_antennas(),
        cfg.rx_antennas(),
    );
    let mut rng = rng::stream(opts.seed, &[0x1a]);
    let mut tx: Vec<CMatrix> = (0..k).map(|_| random_unitary(nt, d, &mut rng)).collect();
    if d == 1 {
        return Ok(align_single_stream(channels, cfg, opts, tx));
    }
    let mut rx: Vec<CMatrix> = vec![CMatrix::zeros(nr, d); k];
    let mut history = Vec::new();

    for it in 1..=opts.max_iter {
        for i in 0..k {
            let mut q = CMatrix::zeros(nr, nr);
            for j in (0..k).filter(|&j| j != i) {
                let a = channels.h(i, j) * &tx[j];
                q += &a * a.adjoint();
            }
            rx[i] = smallest_eigenvectors(&q, d);
        }
        for j in 0..k {
            let mut q = CMatrix::zeros(nt, nt);
            for i in (0..k).filter(|&i| i != j) {
                let b = channels.h(i, j).adjoint() * &rx[i];
                q += &b * b.adjoint();
            }
            tx[j] = smallest_eigenvectors(&q, d);
        }
        let (leak, worst) = subspace_leakage(channels, &rx, &tx);
        if opts.record_history {
            history.push(leak);
        }
        if leak < opts.tol && worst < opts.tol {
            let sol = assemble(
                tx.clone(),
                channels,
                cfg,
                it,
                opts.tol,
                std::mem::take(&mut history),
            );
            if sol.converged {
                return Ok(sol);
            }
            history = sol.history;
        }
    }
    Ok(assemble(
        tx,
        channels,
        cfg,
        opts.max_iter,
        opts.tol,
        history,
    ))
}

/// Smallest-eigenvalue unit eigenvector of the Hermitian `n x n` matrix in
/// `q` (column-major), written to `out`.
fn min_eigvec(q: &[Complex64], n: usize, out: &mut [Complex64]) {
    match n {
        1 => out[0] = Complex64::new(1.0, 0.0),
        2 => {
            let (a, c) = (q[0].re, q[3].re);
            let b = (q[2] + q[1].conj()) * 0.5;
            let lambda = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
            let u = [b, Complex64::new(lambda - a, 0.0)];
            let v = [Complex64::new(lambda - c, 0.0), b.conj()];
            let nu = u[0].norm_sqr() + u[1].norm_sqr();
            let nv = v[0].norm_sqr() + v[1].norm_sqr();
            let (pick, norm) = if nu >= nv { (u, nu) } else { (v, nv) };
            if norm == 0.0 {
                out[0] = Complex64::new(1.0, 0.0);
                out[1] = Complex64::new(0.0, 0.0);
                return;
            }
            let scale = 1.0 / norm.sqrt();
            out[0] = pick[0] * scale;
            out[1] = pick[1] * scale;
        }
        _ => {
            let m = CMatrix::from_column_slice(n, n, q);
            let v = smallest_eigenvectors(&m, 1);
            out.copy_from_slice(v.as_slice());
        }
    }
}

/// `d = 1` iteration on flat buffers; same updates as the general path.
fn align_single_stream(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
    init: Vec<CMatrix>,
) -> IaSolution {
    let (k, nt, nr) = (cfg.users(), cfg.tx_antennas(), cfg.rx_antennas());
    let zero = Complex64::new(0.0, 0.0);
    let mut v: Vec<Complex64> = init.iter().flat_map(|f| f.iter().copied()).collect();
    let mut u = vec![zero; k * nr];
    let mut q = vec![zero; nr.max(nt) * nr.max(nt)];
    let mut a = vec![zero; nr.max(nt)];
    let h: Vec<&[Complex64]> = channels.forward().iter().map(|m| m.as_slice()).collect();
    let mut history = Vec::new();

    let to_precoders = |v: &[Complex64]| -> Vec<CMatrix> {
        (0..k)
            .map(|j| {
                let mut col = crate::CVector::from_column_slice(&v[j * nt..(j + 1) * nt]);
                crate::linalg::normalize_phase(&mut col);
                CMatrix::from_column_slice(nt, 1, col.as_slice())
            })
            .collect()
    };

    for it in 1..=opts.max_iter {
        for i in 0..k {
            q[..nr * nr].fill(zero);
            for j in (0..k).filter(|&j| j != i) {
                let hij = h[i * k + j];
                for r in 0..nr {
                    a[r] = (0..nt).map(|c| hij[c * nr + r] * v[j * nt + c]).sum();
                }
                for c in 0..nr {
                    for r in 0..nr {
                        q[c * nr + r] += a[r] * a[c].conj();
                    }
                }
            }
            min_eigvec(&q[..nr * nr], nr, &mut u[i * nr..(i + 1) * nr]);
        }
        for j in 0..k {
            q[..nt * nt].fill(zero);
            for i in (0..k).filter(|&i| i != j) {
                let hij = h[i * k + j];
                for c in 0..nt {
                    a[c] = (0..nr)
                        .map(|r| hij[c * nr + r].conj() * u[i * nr + r])
                        .sum();
                }
                for c in 0..nt {
                    for r in 0..nt {
                        q[c * nt + r] += a[r] * a[c].conj();
                    }
                }
            }
            min_eigvec(&q[..nt * nt], nt, &mut v[j * nt..(j + 1) * nt]);
        }
        let mut leak = 0.0;
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                let hij = h[i * k + j];
                let mut s = zero;
                for c in 0..nt {
                    let hv: Complex64 = (0..nr)
                        .map(|r| u[i * nr + r].conj() * hij[c * nr + r])
                        .sum();
                    s += hv * v[j * nt + c];
                }
                leak += s.norm_sqr();
                worst = worst.max(s.norm_sqr());
            }
        }
        if opts.record_history {
            history.push(leak);
        }
        if leak < opts.tol && worst.sqrt() < opts.tol {
            let sol = assemble(
                to_precoders(&v),
                channels,
                cfg,
                it,
                opts.tol,
                std::mem::take(&mut history),
            );
            if sol.converged {
                return sol;
            }
            history = sol.history;
        }
    }
    assemble(
        to_precoders(&v),
        channels,
        cfg,
        opts.max_iter,
        opts.tol,
        history,
    )
}

/// Computes an IA solution meeting `opts.tol`, or reports non-convergence
/// with the best iterate attached.
pub fn solve_ia(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    opts: &SolverOptions,
) -> Result<IaSolution> {
    let sol = align(channels, cfg, opts)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence {
            iterations: sol.iterations,
            leakage: sol.leakage,
            best: Box::new(sol),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channels;
    use crate::linalg::unitarity_defect;

    fn cfg322() -> NetworkConfig {
        NetworkConfig::new(3, 2, 2, 1).unwrap()
    }

    #[test]
    fn converges_on_three_user_two_by_two() {
        let cfg = cfg322();
        let ch = sample_channels(&cfg, 11);
        let sol = solve_ia(&ch, &cfg, &SolverOptions::default()).unwrap();
        assert!(sol.leakage < 1e-9);
        assert!(sol.max_residual < 1e-9);
        for f in &sol.precoders {
            assert!(unitarity_defect(f) < 1e-10);
        }
        for w in &sol.combiners {
            assert!((w.column(0).norm() - 1.0).abs() < 1e-12);
        }
        assert!(sol.gains.iter().all(|g| g.norm() > 0.0));
    }

    #[test]
    fn multi_stream_path_converges() {
        // K=2, Nt=Nr=4, d=2: proper (2*3 <= 8) and well inside the feasible region.
        let cfg = NetworkConfig::new(2, 4, 4, 2).unwrap();
        let ch = sample_channels(&cfg, 2);
        let sol = solve_ia(&ch, &cfg, &SolverOptions::default()).unwrap();
        assert!(sol.max_residual < 1e-9);
        assert_eq!(sol.gains.len(), 4);
        for f in &sol.precoders {
            assert!(unitarity_defect(f) < 1e-10);
        }
    }

    #[test]
    fn single_antenna_pair_is_infeasible() {
        let cfg = NetworkConfig::new(2, 1, 1, 1).unwrap();
        let ch = sample_channels(&cfg, 1);
        assert!(matches!(
            solve_ia(&ch, &cfg, &SolverOptions::default()),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn leakage_is_monotone() {
        let cfg = cfg322();
        let ch = sample_channels(&cfg, 5);
        let opts = SolverOptions {
            record_history: true,
            ..SolverOptions::default()
        };
        let sol = align(&ch, &cfg, &opts).unwrap();
        assert!(sol.history.len() > 1);
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-300, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn cross_scaling_keeps_alignment() {
        let cfg = cfg322();
        let ch = sample_channels(&cfg, 8);
        let opts = SolverOptions::default();
        let sol = solve_ia(&ch, &cfg, &opts).unwrap();
        let scaled = ch.scale_cross(2.0);
        // The alignment conditions are homogeneous in the cross channels.
        let w = zf_combiners(&sol.precoders, &scaled, &cfg).unwrap();
        let (_, worst) = alignment_residuals(&sol.precoders, &w, &scaled, &cfg);
        assert!(worst <= 2.0 * sol.max_residual + 1e-15);
        let resolved = solve_ia(&scaled, &cfg, &opts).unwrap();
        assert!(resolved.max_residual < opts.tol);
        for (a, b) in sol.precoders.iter().zip(&resolved.precoders) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn zf_rejects_unaligned_interference() {
        let cfg = cfg322();
        let ch = sample_channels(&cfg, 9);
        let mut r = rng::stream(1, &[]);
        let f: Vec<CMatrix> = (0..3).map(|_| random_unitary(2, 1, &mut r)).collect();
        assert!(matches!(
            zf_combiners(&f, &ch, &cfg),
            Err(Error::RankDeficiency { .. })
        ));
    }

    #[test]
    fn gains_on_identity_channels() {
        let cfg = cfg322();
        let mut forward = Vec::new();
        for i in 0..3 {
            for k in 0..3 {
                let mut h = CMatrix::zeros(2, 2);
                if i == k {
                    h[(0, 0)] = Complex64::new(0.5, -1.5);
                    h[(1, 1)] = Complex64::new(2.0, 0.25);
                } else {
                    // Interference lands on the second receive antenna only.
                    h[(1, 0)] = Complex64::new(1.0, 0.0);
                }
                forward.push(h);
            }
        }
        let ch = ChannelSet::from_parts(3, forward, vec![CMatrix::zeros(2, 2); 9]).unwrap();
        let e0 =
            CMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let f = vec![e0.clone(); 3];
        let w = zf_combiners(&f, &ch, &cfg).unwrap();
        let g = effective_gains(&f, &w, &ch);
        for gi in g {
            assert_eq!(gi, Complex64::new(0.5, -1.5));
        }
    }
}

//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use ia_overhead::channel::{make_frame, sample_channels_with, LinkBudget, NetworkConfig};
use ia_overhead::cluster::{admission_rule, cluster_size_exhaustive, DEFAULT_MAX_USERS};
use ia_overhead::csi::{error_variance, optimal_split, split_weights, OverheadAllocation};
use ia_overhead::ia::{align, SolverOptions};
use ia_overhead::overhead::{alpha_star_expansion, alpha_star_numeric, effective_rate};
use ia_overhead::pipeline::{
    csi_error_statistics, direct_gain_samples, gain_moments, monte_carlo_sum_rate,
    simulate_effective_rate,
};
use ia_overhead::rates::{avg_sum_rate, rate_derivatives};
use ia_overhead::stats::linear_fit;
use ia_overhead::{rng, Complex64};
use rand::Rng;

const SEED: u64 = 2024;

type Verdict = (bool, String);

fn reference() -> NetworkConfig {
    NetworkConfig::new(3, 2, 2, 1).unwrap()
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn budget(rho: f64, gamma: f64) -> LinkBudget {
    LinkBudget::from_stream_snr(rho, 1, gamma).unwrap()
}

fn ia_correctness() -> Verdict {
    let cfg = reference();
    let start = Instant::now();
    let mut good = 0;
    for t in 0..1000u64 {
        let ch = sample_channels_with(&cfg, &mut rng::stream(SEED, &[1, t]));
        let sol = align(
            &ch,
            &cfg,
            &SolverOptions::with_seed(rng::derive_seed(SEED, &[1, t, 1])),
        )
        .unwrap();
        if sol.leakage < 1e-9 && sol.max_residual < 1e-9 {
            good += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        good >= 990 && secs < 10.0,
        format!("{good}/1000 draws aligned below 1e-9 in {secs:.2} s"),
    )
}

fn direct_gain_statistics(gains: &[Complex64]) -> Verdict {
    let m = gain_moments(gains, 3);
    let mean = m.iter().map(|g| g.mean.norm()).fold(0.0, f64::max);
    let var = m
        .iter()
        .map(|g| (g.variance - 1.0).abs())
        .fold(0.0, f64::max);
    let skew = m
        .iter()
        .map(|g| g.real.skewness.abs().max(g.imag.skewness.abs()))
        .fold(0.0, f64::max);
    (
        mean < 0.01 && var < 0.03 && skew < 0.05,
        format!("max |mean| {mean:.4}, max |variance - 1| {var:.4}, max |skewness| {skew:.4} over 1e5 trials"),
    )
}

fn average_rate_match(gains: &[Complex64]) -> Verdict {
    let cfg = reference();
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in [1.0, 10.0, 100.0] {
        let rel = monte_carlo_sum_rate(gains, 3, rho) / avg_sum_rate(&cfg, rho) - 1.0;
        ok &= rel.abs() < 0.01;
        parts.push(format!("rho {rho}: {rel:+.4}"));
    }
    (ok, parts.join(", "))
}

fn derivative_match() -> Verdict {
    let cfg = reference();
    let h = 1e-4;
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for rho in [1.0, 10.0, 100.0] {
        let r = |x| avg_sum_rate(&cfg, x);
        let (d1, d2) = rate_derivatives(&cfg, rho);
        e1 = e1.max((d1 - (r(rho + h) - r(rho - h)) / (2.0 * h)).abs());
        e2 = e2.max((d2 - (r(rho + h) - 2.0 * r(rho) + r(rho - h)) / (h * h)).abs());
    }
    (
        e1 < 1e-6 && e2 < 1e-4,
        format!("first derivative error {e1:.2e}, second {e2:.2e}"),
    )
}

fn estimator_match() -> Verdict {
    let cfg = reference();
    let b = budget(100.0, 1.0);
    let mut zf_ok = true;
    let mut mmse_ok = true;
    let mut parts = Vec::new();
    for (cell, symbols) in [50.0, 100.0, 200.0].into_iter().enumerate() {
        let split = optimal_split(&cfg, &b, symbols).unwrap();
        let s =
            csi_error_statistics(&cfg, &b, &split.allocation, 10_000, SEED, cell as u64).unwrap();
        let closed = error_variance(&cfg, &b, &split.allocation).unwrap();
        let rel = s.zero_forcing / closed - 1.0;
        zf_ok &= rel.abs() < 0.05;
        mmse_ok &= s.mmse <= s.zero_forcing;
        parts.push(format!(
            "overhead {symbols}: zf {rel:+.4}, mmse/zf - 1 {:+.2e}",
            s.mmse / s.zero_forcing - 1.0
        ));
    }
    (zf_ok && mmse_ok, format!("at 20 dB {}", parts.join("; ")))
}

fn split_optimality() -> Verdict {
    let cfg = reference();
    let b = budget(10.0, 1.0);
    let total = 100usize;
    let best = optimal_split(&cfg, &b, total as f64).unwrap();
    let min = OverheadAllocation::minimum(&cfg);
    let spare = total - min.total();
    let mut r = rng::stream(SEED, &[6]);
    let mut wins = 0;
    for _ in 0..1000 {
        let x = r.random_range(0..=spare);
        let y = r.random_range(0..=spare - x);
        let a = OverheadAllocation::new(
            min.forward_training + x,
            min.feedback_training + y,
            min.feedback + spare - x - y,
        );
        if best.sigma2h <= error_variance(&cfg, &b, &a).unwrap() {
            wins += 1;
        }
    }
    let w = split_weights(&cfg, 1.0).unwrap();
    let mu: f64 = w.iter().sum();
    let frac = w.map(|x| x / mu);
    let frac_ok = frac
        .iter()
        .zip([0.3411, 0.2412, 0.4177])
        .all(|(f, e)| (f - e).abs() <= 1e-4);
    (
        wins == 1000 && frac_ok,
        format!("split no worse than {wins}/1000 random allocations; fractions {frac:.4?}"),
    )
}

fn expansion_accuracy() -> Verdict {
    let cfg = reference();
    let mut worst_alpha: (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut worst_gap: f64 = 0.0;
    let mut failing = Vec::new();
    for rho_db in [10.0, 15.0, 20.0, 25.0, 30.0] {
        for i in 0..=8 {
            let fd = 1e-5 * 10f64.powf(i as f64 * 0.25);
            let b = budget(db(rho_db), 1.0);
            let f = make_frame(fd).unwrap();
            let e = alpha_star_expansion(&cfg, &b, &f).unwrap();
            let n = alpha_star_numeric(&cfg, &b, &f).unwrap();
            let rel = (e.alpha_star / n.alpha_star - 1.0).abs();
            let gap = 1.0 - effective_rate(&cfg, &b, &f, e.alpha_star).unwrap() / n.reff_achieved;
            if rel > worst_alpha.0 {
                worst_alpha = (rel, rho_db, fd);
            }
            worst_gap = worst_gap.max(gap);
            if rel > 0.10 {
                failing.push(format!("({rho_db} dB, {fd:.1e})"));
            }
        }
    }
    let ok = worst_alpha.0 <= 0.10 && worst_gap <= 0.01;
    let mut detail = format!(
        "worst alpha gap {:.4} at {} dB, fd {:.1e}; worst rate gap {worst_gap:.5}",
        worst_alpha.0, worst_alpha.1, worst_alpha.2
    );
    if !failing.is_empty() {
        detail.push_str(&format!("; alpha outside 10% at {}", failing.join(" ")));
    }
    (ok, detail)
}

fn scaling_laws() -> Verdict {
    let cfg = reference();
    let b = budget(100.0, 1.0);
    let fds: Vec<f64> = (0..=20)
        .map(|i| 1e-6 * 10f64.powf(i as f64 * 0.1))
        .collect();
    let xs: Vec<f64> = fds.iter().map(|f| f.ln()).collect();
    let ys: Vec<f64> = fds
        .iter()
        .map(|&fd| {
            alpha_star_expansion(&cfg, &b, &make_frame(fd).unwrap())
                .unwrap()
                .alpha_unclamped
                .ln()
        })
        .collect();
    let (slope, _) = linear_fit(&xs, &ys);
    let f = make_frame(1e-4).unwrap();
    let alphas: Vec<(f64, f64)> = [4.0, 1.0, 0.25, 0.0625]
        .iter()
        .map(|&g| {
            let b = LinkBudget::new(100.0, g, 1.0).unwrap();
            (
                alpha_star_expansion(&cfg, &b, &f).unwrap().alpha_star,
                alpha_star_numeric(&cfg, &b, &f).unwrap().alpha_star,
            )
        })
        .collect();
    let increasing = alphas
        .windows(2)
        .all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
    (
        (slope - 0.5).abs() <= 0.05 && increasing,
        format!("log-log slope {slope:.4}; alpha* rises as gamma falls: {increasing}"),
    )
}

fn end_to_end() -> Verdict {
    let cfg = reference();
    let f = make_frame(5e-4).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, snr) in [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
        .into_iter()
        .enumerate()
    {
        let b = budget(db(snr), 1.0);
        let d = alpha_star_numeric(&cfg, &b, &f).unwrap();
        let sim = simulate_effective_rate(
            &cfg,
            &b,
            &f,
            &d.allocation,
            &Default::default(),
            10_000,
            SEED,
            i as u64,
        )
        .unwrap();
        let rel = sim.effective_rate / d.reff_achieved - 1.0;
        if snr >= 10.0 {
            ok &= rel.abs() < 0.05;
        }
        parts.push(format!("{snr} dB {rel:+.4}"));
    }
    (
        ok,
        format!("relative gap (checked from 10 dB): {}", parts.join(", ")),
    )
}

fn cluster_sizing() -> Verdict {
    let b = budget(db(35.0), 1.0);
    let mut worst_k = 0;
    let mut worst_loss: f64 = 0.0;
    let mut worst_at = 0.0;
    for i in 0..=64 {
        let t = 10f64.powf(2.0 + i as f64 / 16.0);
        let fd = 1.0 / (2.0 * t);
        let ex = cluster_size_exhaustive(&b, fd, DEFAULT_MAX_USERS).unwrap();
        let rule = ex.with_rule(fd).unwrap();
        worst_k = worst_k.max(ex.k_star.abs_diff(rule.k_star));
        let loss = 1.0 - rule.best().reff_star / ex.best().reff_star;
        if loss > worst_loss {
            worst_loss = loss;
            worst_at = t;
        }
    }
    let below = admission_rule(3, (1.0 / 300.0) * (1.0 - 1e-12)).unwrap();
    let at = admission_rule(3, 1.0 / 300.0).unwrap();
    (
        worst_k <= 1 && worst_loss <= 0.02 && below && !at,
        format!("max |K_rule - K_exhaustive| {worst_k}, max rate loss {worst_loss:.4} at frame length {worst_at:.0}; K=3 extends below 1/300: {below}, at 1/300: {at}"),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str], name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ia-overhead"))
            .arg("sweep")
            .args(args)
            .arg("--output")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let snr = [
        "--kind", "snr", "--points", "5", "--trials", "300", "--seed", "11",
    ];
    let cluster = [
        "--kind", "cluster", "--min", "100", "--max", "1e5", "--scale", "log", "--points", "6",
    ];
    let same_snr = run(&snr, "a") == run(&snr, "b");
    let same_cluster = run(&cluster, "c") == run(&cluster, "d");
    (
        same_snr && same_cluster,
        format!("snr sweep identical: {same_snr}; cluster sweep identical: {same_cluster}"),
    )
}

fn main() -> ExitCode {
    let (gains, _) = direct_gain_samples(&reference(), 100_000, SEED).unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 IA correctness", Box::new(ia_correctness)),
        (
            "2 direct gain statistics",
            Box::new(|| direct_gain_statistics(&gains)),
        ),
        (
            "3 average sum rate vs Monte Carlo",
            Box::new(|| average_rate_match(&gains)),
        ),
        ("4 rate derivatives", Box::new(derivative_match)),
        (
            "5 analog feedback error variance",
            Box::new(estimator_match),
        ),
        ("6 split optimality", Box::new(split_optimality)),
        ("7 expansion optimum accuracy", Box::new(expansion_accuracy)),
        ("8 scaling laws", Box::new(scaling_laws)),
        ("9 end-to-end effective rate", Box::new(end_to_end)),
        ("10 cluster sizing", Box::new(cluster_sizing)),
        ("11 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

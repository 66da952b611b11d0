use ia_overhead::channel::{sample_channels_with, LinkBudget, NetworkConfig};
use ia_overhead::csi::*;
use ia_overhead::linalg::frob_sq;
use ia_overhead::{rng, CMatrix};
use rand::Rng;

const TRIALS: u64 = 2000;

fn cfg() -> NetworkConfig {
    NetworkConfig::new(3, 2, 2, 1).unwrap()
}

fn mean_error(
    budget: &LinkBudget,
    alloc: &OverheadAllocation,
    opts: &AcquisitionOptions,
    seed: u64,
) -> f64 {
    let c = cfg();
    let mut acc = 0.0;
    for t in 0..TRIALS {
        let ch = sample_channels_with(&c, &mut rng::stream(seed, &[t]));
        let est = acquire_csi(
            &ch,
            &c,
            budget,
            alloc,
            opts,
            &mut rng::stream(seed, &[t, 1]),
        )
        .unwrap();
        acc += est.empirical_error(&ch);
    }
    acc / TRIALS as f64
}

#[test]
fn training_phases_match_their_error_variance() {
    let c = cfg();
    let b = LinkBudget::new(25.0, 4.0 / 7.0, 1.0).unwrap();
    let n = NoiseSources::default();
    let (mut fwd, mut back) = (0.0, 0.0);
    let mut expected = (0.0, 0.0);
    for t in 0..TRIALS {
        let ch = sample_channels_with(&c, &mut rng::stream(3, &[t]));
        let mut r = rng::stream(3, &[t, 1]);
        let rx = forward_training(&ch, &c, &b, 8, &n, &mut r).unwrap();
        let fb = feedback_training(&ch, &c, &b, 7, &n, &mut r).unwrap();
        fwd += rx
            .estimates
            .iter()
            .zip(ch.forward())
            .map(|(e, h)| frob_sq(&(h - e)))
            .sum::<f64>()
            / 36.0;
        back += fb
            .estimates
            .iter()
            .zip(ch.feedback())
            .map(|(e, g)| frob_sq(&(g - e)))
            .sum::<f64>()
            / 36.0;
        expected = (rx.error_variance, fb.error_variance);
    }
    let (fwd, back) = (fwd / TRIALS as f64, back / TRIALS as f64);
    assert!(
        (fwd / expected.0 - 1.0).abs() < 0.03,
        "{fwd} vs {}",
        expected.0
    );
    assert!(
        (back / expected.1 - 1.0).abs() < 0.03,
        "{back} vs {}",
        expected.1
    );
    assert!((expected.0 - 1.0 / 101.0).abs() < 1e-15);
    assert!((expected.1 - 1.0 / 51.0).abs() < 1e-14);
}

#[test]
fn feedback_meets_energy_budget_on_average() {
    let c = cfg();
    let b = LinkBudget::from_stream_snr(10.0, 1, 0.5).unwrap();
    let alloc = OverheadAllocation::new(10, 8, 30);
    let (mut energy, mut n) = (0.0, 0.0);
    for t in 0..TRIALS {
        let ch = sample_channels_with(&c, &mut rng::stream(5, &[t]));
        let est = acquire_csi(
            &ch,
            &c,
            &b,
            &alloc,
            &AcquisitionOptions::default(),
            &mut rng::stream(5, &[t, 1]),
        )
        .unwrap();
        energy += est.feedback_energy.iter().sum::<f64>();
        n += est.feedback_energy.len() as f64;
    }
    let ratio = energy / n / (alloc.feedback as f64 * b.feedback_power());
    assert!((0.99..=1.01).contains(&ratio), "{ratio}");
}

#[test]
fn zero_forcing_matches_closed_form_and_mmse_is_no_worse() {
    for (&rho, seed) in [10.0, 100.0].iter().zip(11..) {
        let b = LinkBudget::from_stream_snr(rho, 1, 1.0).unwrap();
        let split = optimal_split(&cfg(), &b, 60.0).unwrap();
        let zf_opts = AcquisitionOptions {
            variant: EstimatorVariant::ZeroForcing,
            ..Default::default()
        };
        let zf = mean_error(&b, &split.allocation, &zf_opts, seed);
        let mmse = mean_error(&b, &split.allocation, &AcquisitionOptions::default(), seed);
        assert!(
            (zf / split.sigma2h - 1.0).abs() < 0.05,
            "rho {rho}: {zf} vs {}",
            split.sigma2h
        );
        assert!(mmse <= zf, "rho {rho}: {mmse} > {zf}");
    }
}

#[test]
fn ablated_noise_sources_match_individual_terms() {
    let c = cfg();
    let b = LinkBudget::from_stream_snr(20.0, 1, 0.5).unwrap();
    let alloc = OverheadAllocation::new(12, 10, 36);
    let terms = error_terms(&c, &b, &alloc, FeedbackNoiseScaling::FeedbackInterval).unwrap();
    for (j, term) in terms.iter().enumerate() {
        let opts = AcquisitionOptions {
            variant: EstimatorVariant::ZeroForcing,
            noise: NoiseSources::only(j),
        };
        let sim = mean_error(&b, &alloc, &opts, 20 + j as u64);
        assert!((sim / term - 1.0).abs() < 0.05, "term {j}: {sim} vs {term}");
    }
    let alt = error_terms(&c, &b, &alloc, FeedbackNoiseScaling::TrainingInterval).unwrap();
    assert_eq!(alt[..2], terms[..2]);
    assert!((alt[2] / terms[2] - 36.0 / 10.0).abs() < 1e-12);
}

#[test]
fn error_covariance_is_scaled_identity() {
    let c = cfg();
    let b = LinkBudget::from_stream_snr(10.0, 1, 1.0).unwrap();
    let alloc = optimal_split(&c, &b, 50.0).unwrap().allocation;
    let mut cov = CMatrix::zeros(2, 2);
    let mut cols = 0.0;
    for t in 0..TRIALS {
        let ch = sample_channels_with(&c, &mut rng::stream(9, &[t]));
        let est = acquire_csi(
            &ch,
            &c,
            &b,
            &alloc,
            &AcquisitionOptions::default(),
            &mut rng::stream(9, &[t, 1]),
        )
        .unwrap();
        for (e, h) in est.estimates.iter().zip(ch.forward()) {
            let err = h - e;
            for col in err.column_iter() {
                cov += &col * col.adjoint();
                cols += 1.0;
            }
        }
    }
    cov /= num_complex::Complex64::new(cols, 0.0);
    let scale = 0.5 * (cov[(0, 0)].re + cov[(1, 1)].re);
    assert!((cov[(0, 0)].re / cov[(1, 1)].re - 1.0).abs() < 0.05);
    assert!(cov[(0, 1)].norm() < 0.05 * scale);
}

#[test]
fn split_beats_random_allocations() {
    let c = cfg();
    let mut r = rng::stream(99, &[]);
    let min = OverheadAllocation::minimum(&c);
    for &gamma in &[0.1, 1.0, 4.0] {
        let b = LinkBudget::from_stream_snr(30.0, 1, gamma).unwrap();
        let total = 120usize;
        let best = optimal_split(&c, &b, total as f64).unwrap();
        for _ in 0..500 {
            let spare = total - min.total();
            let x = r.random_range(0..=spare);
            let y = r.random_range(0..=spare - x);
            let a = OverheadAllocation::new(
                min.forward_training + x,
                min.feedback_training + y,
                min.feedback + spare - x - y,
            );
            assert!(best.sigma2h <= error_variance(&c, &b, &a).unwrap());
            assert!(best.sigma2h_continuous <= error_variance(&c, &b, &a).unwrap());
        }
    }
}

use ia_overhead::channel::LinkBudget;
use ia_overhead::csi::{error_variance, OverheadAllocation};
use ia_overhead::experiment::*;
use ia_overhead::NetworkConfig;

fn inflated_error_variance(
    cfg: &NetworkConfig,
    b: &LinkBudget,
    a: &OverheadAllocation,
) -> ia_overhead::Result<f64> {
    Ok(1.3 * error_variance(cfg, b, a)?)
}

fn quick() -> ValidateSettings {
    ValidateSettings {
        ia_draws: 50,
        gain_trials: 2000,
        csi_trials: 2000,
        random_allocations: 200,
    }
}

#[test]
fn corrupted_error_formula_fails_its_check() {
    let spec = ExperimentSpec {
        kind: SweepKind::Validate,
        ..Default::default()
    };
    let good = run_validate(&spec, &quick(), &Formulas::default()).unwrap();
    assert!(good.outcome(Check::CsiErrorClosedForm).unwrap().passed);
    let bad = Formulas {
        error_variance: inflated_error_variance,
        ..Formulas::default()
    };
    let report = run_validate(&spec, &quick(), &bad).unwrap();
    assert!(!report.outcome(Check::CsiErrorClosedForm).unwrap().passed);
    assert!(!report.passed());
}

#[test]
fn verdicts_are_stable_across_seeds() {
    let settings = ValidateSettings::default();
    for seed in [1, 2] {
        let spec = ExperimentSpec {
            kind: SweepKind::Validate,
            seed,
            ..Default::default()
        };
        let report = run_validate(&spec, &settings, &Formulas::default()).unwrap();
        for o in &report.outcomes {
            assert!(o.passed, "seed {seed}: {} {}", o.check, o.detail);
        }
    }
}

#[test]
fn sweeps_fill_every_column() {
    let mut spec = ExperimentSpec {
        trials: 20,
        ..Default::default()
    };
    spec.grid = Grid {
        min: 10.0,
        max: 30.0,
        points: 3,
        scale: GridScale::Linear,
    };
    for kind in [
        SweepKind::Snr,
        SweepKind::Doppler,
        SweepKind::Tframe,
        SweepKind::Gamma,
    ] {
        spec.kind = kind;
        spec.grid = match kind {
            SweepKind::Doppler => Grid {
                min: 1e-5,
                max: 1e-3,
                points: 3,
                scale: GridScale::Log,
            },
            SweepKind::Tframe => Grid {
                min: 500.0,
                max: 50_000.0,
                points: 3,
                scale: GridScale::Log,
            },
            SweepKind::Gamma => Grid {
                min: 0.1,
                max: 10.0,
                points: 3,
                scale: GridScale::Log,
            },
            _ => spec.grid,
        };
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.columns.len(), 12);
        for row in &table.rows {
            assert_eq!(row.len(), 12);
            assert!(row.iter().all(|v| v.is_finite()));
            assert!(row[2] <= row[1], "{kind:?}: analytic above genie");
        }
    }
}

#[test]
fn cluster_sweep_reports_both_sizes() {
    let mut spec = ExperimentSpec {
        kind: SweepKind::Cluster,
        ..Default::default()
    };
    spec.link.snr_db = 35.0;
    spec.grid = Grid {
        min: 100.0,
        max: 1e4,
        points: 3,
        scale: GridScale::Log,
    };
    let table = run_sweep(&spec).unwrap();
    assert_eq!(table.columns[2..4], ["k_exhaustive", "k_rule"]);
    assert_eq!(table.rows[0][2], 3.0);
    assert_eq!(table.rows[0][3], 3.0);
    let csv = table.to_csv(&spec);
    assert!(csv.starts_with("# ia-overhead"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn validate_kind_is_not_a_sweep() {
    let spec = ExperimentSpec {
        kind: SweepKind::Validate,
        ..Default::default()
    };
    assert!(run_sweep(&spec).is_err());
}

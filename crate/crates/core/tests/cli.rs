use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ia-overhead"))
}

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = bin()
            .args([
                "sweep", "--kind", "snr", "--min", "0", "--max", "30", "--points", "4", "--trials",
                "50", "--seed", "7",
            ])
            .arg("--output")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("# seed = 7"));
    assert!(text.lines().any(|l| l.starts_with("snr_db,genie_rate")));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "kind = \"tframe\"\ntrials = 10\n[grid]\nmin = 200.0\nmax = 2000.0\npoints = 2\nscale = \"log\"\n",
    )
    .unwrap();
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--points", "3"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kind = \"tframe\""));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn bad_input_exits_nonzero() {
    let out = bin().args(["sweep", "--users", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["sweep", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_validation_exits_one() {
    let out = bin()
        .args([
            "validate",
            "--gain-trials",
            "20",
            "--csi-trials",
            "20",
            "--ia-draws",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL direct_gain_moments"));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("check,passed,detail"));
}

//! Parameter sweeps and self-validation behind the `ia-overhead` binary.
//!
//! An [`ExperimentSpec`] is read from TOML; see `README.md` for the format.
//! SNR values are given in dB here and converted to linear scale before
//! reaching any other module.

mod validate;

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{make_frame, FadingFrame, LinkBudget, NetworkConfig};
use crate::cluster::{cluster_size_exhaustive, DEFAULT_MAX_USERS};
use crate::csi::{alpha_min, AcquisitionOptions};
use crate::error::{Error, Result};
use crate::overhead::{alpha_star_expansion, alpha_star_numeric};
use crate::pipeline::simulate_effective_rate;
use crate::rates::avg_sum_rate;

pub use validate::{run_validate, Check, CheckOutcome, Formulas, ValidateReport, ValidateSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Snr,
    Doppler,
    Tframe,
    Gamma,
    Cluster,
    Validate,
}

impl SweepKind {
    fn axis(&self) -> &'static str {
        match self {
            SweepKind::Snr => "snr_db",
            SweepKind::Doppler => "doppler",
            SweepKind::Tframe | SweepKind::Cluster => "frame_length",
            SweepKind::Gamma => "gamma",
            SweepKind::Validate => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: GridScale,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::InvalidConfig("grid needs at least one point".into()));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::InvalidConfig(format!(
                "grid bounds [{}, {}] are not ordered",
                self.min, self.max
            )));
        }
        if self.scale == GridScale::Log && self.min <= 0.0 {
            return Err(Error::InvalidConfig(
                "log grid needs a positive minimum".into(),
            ));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = |i: usize| i as f64 / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| match self.scale {
                GridScale::Linear => self.min + (self.max - self.min) * step(i),
                GridScale::Log => self.min * (self.max / self.min).powf(step(i)),
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub streams: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// Per-stream SNR in dB (unit noise variance).
    pub snr_db: f64,
    pub gamma: f64,
    pub doppler: f64,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: SweepKind,
    pub seed: u64,
    /// Monte Carlo trials per grid point.
    pub trials: u64,
    pub max_users: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub network: NetworkSpec,
    pub link: LinkSpec,
    pub grid: Grid,
    pub validate: ValidateSettings,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: SweepKind::Snr,
            seed: 1,
            trials: 1000,
            max_users: DEFAULT_MAX_USERS,
            output: None,
            network: NetworkSpec {
                users: 3,
                tx_antennas: 2,
                rx_antennas: 2,
                streams: 1,
            },
            link: LinkSpec {
                snr_db: 20.0,
                gamma: 1.0,
                doppler: 5e-4,
            },
            grid: Grid {
                min: 0.0,
                max: 40.0,
                points: 9,
                scale: GridScale::Linear,
            },
            validate: ValidateSettings::default(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec always serializes")
    }

    pub fn network(&self) -> Result<NetworkConfig> {
        let n = &self.network;
        NetworkConfig::new(n.users, n.tx_antennas, n.rx_antennas, n.streams)
    }

    fn budget(&self, snr_db: f64, gamma: f64) -> Result<LinkBudget> {
        LinkBudget::from_stream_snr(db_to_linear(snr_db), self.network.streams, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig(
                "trial count must be at least 1".into(),
            ));
        }
        self.network()?;
        self.budget(self.link.snr_db, self.link.gamma)?;
        make_frame(self.link.doppler)?;
        if self.kind != SweepKind::Validate {
            self.grid.values()?;
        }
        Ok(())
    }
}

/// One sweep output table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    /// Producing function for each column, written into the CSV preamble.
    pub sources: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// CSV with a `#`-prefixed preamble echoing the spec.
    pub fn to_csv(&self, spec: &ExperimentSpec) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# ia-overhead {}", env!("CARGO_PKG_VERSION"));
        let echo = ExperimentSpec {
            output: None,
            ..spec.clone()
        };
        for line in echo.to_toml().lines().filter(|l| !l.is_empty()) {
            let _ = writeln!(out, "# {line}");
        }
        for (c, s) in self.columns.iter().zip(&self.sources) {
            let _ = writeln!(out, "# column {c}: {s}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

const RATE_COLUMNS: [(&str, &str); 11] = [
    ("genie_rate", "rates::avg_sum_rate at the nominal SNR"),
    (
        "analytic_rate",
        "overhead::alpha_star_numeric reff_achieved",
    ),
    ("expansion_rate", "overhead::alpha_star_expansion reff_star"),
    (
        "expansion_rate_exact",
        "overhead::alpha_star_expansion reff_achieved",
    ),
    (
        "monte_carlo_rate",
        "pipeline::simulate_effective_rate at the numeric design",
    ),
    ("alpha_numeric", "overhead::alpha_star_numeric alpha_star"),
    (
        "alpha_expansion",
        "overhead::alpha_star_expansion alpha_star",
    ),
    ("alpha_min", "csi::alpha_min"),
    ("sigma2h", "csi::min_error_variance at the numeric design"),
    ("frame_length", "channel::make_frame length"),
    ("clamped", "overhead::alpha_star_expansion clamped (0/1)"),
];

fn rate_row(
    cfg: &NetworkConfig,
    budget: &LinkBudget,
    frame: &FadingFrame,
    spec: &ExperimentSpec,
    point: u64,
) -> Result<Vec<f64>> {
    let numeric = alpha_star_numeric(cfg, budget, frame)?;
    let expansion = alpha_star_expansion(cfg, budget, frame)?;
    let mc = simulate_effective_rate(
        cfg,
        budget,
        frame,
        &numeric.allocation,
        &AcquisitionOptions::default(),
        spec.trials,
        spec.seed,
        point,
    )?;
    Ok(vec![
        avg_sum_rate(cfg, budget.stream_snr(cfg.streams())),
        numeric.reff_achieved,
        expansion.reff_star,
        expansion.reff_achieved,
        mc.effective_rate,
        numeric.alpha_star,
        expansion.alpha_star,
        alpha_min(cfg, frame.length())?,
        numeric.sigma2h,
        frame.length(),
        f64::from(u8::from(expansion.clamped)),
    ])
}

fn frame_for_length(length: f64) -> Result<FadingFrame> {
    if !(length > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "frame length must be positive, got {length}"
        )));
    }
    make_frame(1.0 / (2.0 * length))
}

/// Runs a sweep. Grid points are evaluated in parallel and reported in grid
/// order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let grid = spec.grid.values()?;
    let cfg = spec.network()?;
    let link = spec.link;

    if spec.kind == SweepKind::Validate {
        return Err(Error::InvalidConfig(
            "validate is not a sweep; use run_validate".into(),
        ));
    }
    if spec.kind == SweepKind::Cluster {
        let budget = spec.budget(link.snr_db, link.gamma)?;
        let rows = grid
            .par_iter()
            .map(|&t| -> Result<Vec<f64>> {
                let fd = frame_for_length(t)?.doppler();
                let ex = cluster_size_exhaustive(&budget, fd, spec.max_users)?;
                let rule = ex.with_rule(fd)?;
                let (re, rr) = (ex.best().reff_star, rule.best().reff_star);
                Ok(vec![
                    t,
                    fd,
                    ex.k_star as f64,
                    rule.k_star as f64,
                    re,
                    rr,
                    if re > 0.0 { 1.0 - rr / re } else { 0.0 },
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Table {
            columns: vec![
                "frame_length",
                "doppler",
                "k_exhaustive",
                "k_rule",
                "rate_exhaustive",
                "rate_rule",
                "rate_loss",
            ],
            sources: vec![
                "grid value",
                "channel::make_frame doppler",
                "cluster::cluster_size_exhaustive k_star",
                "cluster::cluster_size_rule",
                "cluster::cluster_size_exhaustive best reff_star",
                "reff_star of the rule-sized cluster",
                "1 - rate_rule / rate_exhaustive",
            ],
            rows,
        });
    }

    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| -> Result<Vec<f64>> {
            let (snr_db, gamma, frame) = match spec.kind {
                SweepKind::Snr => (x, link.gamma, make_frame(link.doppler)?),
                SweepKind::Doppler => (link.snr_db, link.gamma, make_frame(x)?),
                SweepKind::Tframe => (link.snr_db, link.gamma, frame_for_length(x)?),
                SweepKind::Gamma => (link.snr_db, x, make_frame(link.doppler)?),
                SweepKind::Cluster | SweepKind::Validate => unreachable!(),
            };
            let budget = spec.budget(snr_db, gamma)?;
            let mut row = vec![x];
            row.extend(rate_row(&cfg, &budget, &frame, spec, i as u64)?);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![spec.kind.axis()];
    let mut sources = vec!["grid value"];
    for (c, s) in RATE_COLUMNS {
        columns.push(c);
        sources.push(s);
    }
    Ok(Table {
        columns,
        sources,
        rows,
    })
}

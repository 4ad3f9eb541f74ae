//! Table and sweep pipelines: fit a pair of GMMs on disjoint halves of a
//! dataset and compare bounds, or sweep the separation between two 1D
//! mixtures.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, BoundReport, ReportConfig};
use crate::error::{Error, Result};
use crate::ground::GroundKind;
use crate::io::{load_csv, load_idx};
use crate::learn::{fit_em_with, pca_fit_transform, EmConfig};
use crate::mixture::{Component, Family, Mixture};
use crate::numeric::mean_std;
use crate::points::Points;
use crate::rng::{derive_seed, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub format: DataFormat,
    /// Project onto this many principal components before fitting.
    pub pca_dim: Option<usize>,
    /// Relative sample size; each half gets `floor(fraction * n / 2)` points.
    pub fraction: f64,
    pub repeats: usize,
    pub components: usize,
    pub target: GroundKind,
    pub report: ReportConfig,
    pub seed: u64,
    /// Fit both mixtures on the same subset, which makes every transport
    /// column vanish. Used as a sanity check of the pipeline.
    #[serde(default)]
    pub identical_halves: bool,
}

impl ExperimentConfig {
    pub fn new(data: impl Into<PathBuf>, format: DataFormat, target: GroundKind, seed: u64) -> Self {
        ExperimentConfig {
            data: data.into(),
            format,
            pca_dim: None,
            fraction: 1.0,
            repeats: 1,
            components: 10,
            target,
            report: ReportConfig::new(seed),
            seed,
            identical_halves: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::param("fraction", format!("{} is not in (0, 1]", self.fraction)));
        }
        if self.repeats == 0 {
            return Err(Error::param("repeats", "must be at least 1"));
        }
        if self.components == 0 {
            return Err(Error::param("components", "must be at least 1"));
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<Points> {
        match self.format {
            DataFormat::Csv => load_csv(&self.data),
            DataFormat::Idx => Ok(load_idx(&self.data)?.to_points()),
        }
    }
}

/// Shuffles `0..n` under `seed` and returns two disjoint index sets of
/// `floor(fraction * n / 2)` each.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let half = (fraction * n as f64 / 2.0).floor() as usize;
    let second = order[half..2 * half].to_vec();
    order.truncate(half);
    (order, second)
}

/// Fits a diagonal GMM by EM on each of two disjoint random subsets of
/// `data`, after an optional PCA fitted on the full set.
pub fn split_two_gmm(data: &Points, cfg: &ExperimentConfig) -> Result<(Mixture, Mixture)> {
    cfg.validate()?;
    let (first, second) = split_indices(data.len(), cfg.fraction, derive_seed(cfg.seed, &[0]));
    if first.len() < cfg.components.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} points per half for {} components",
            first.len(),
            cfg.components
        )));
    }
    let projected;
    let data = match cfg.pca_dim {
        Some(d) if d < data.dim() => {
            projected = pca_fit_transform(data, d)?.0;
            &projected
        }
        _ => data,
    };
    let second = if cfg.identical_halves { &first } else { &second };
    let fit = |indices: &[usize], stream: u64| -> Result<Mixture> {
        let em = EmConfig::new(cfg.components, derive_seed(cfg.seed, &[1, stream]));
        Ok(fit_em_with(&data.select(indices), &em)?.mixture)
    };
    Ok((fit(&first, 0)?, fit(second, if cfg.identical_halves { 0 } else { 1 })?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatFailure {
    pub repeat: usize,
    pub error: String,
}

/// Per-repeat bound reports and their aggregation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub target: GroundKind,
    pub reports: Vec<BoundReport>,
    pub failures: Vec<RepeatFailure>,
}

/// Column name and per-repeat value of every report entry, with the
/// reference estimate first when present.
fn report_columns(r: &BoundReport) -> Vec<(String, f64)> {
    let mut cols = Vec::new();
    if let Some(e) = &r.reference {
        cols.push(("mc".to_string(), e.estimate));
    }
    cols.extend(r.bounds.iter().map(|b| (b.name.clone(), b.value)));
    cols
}

impl TableResult {
    /// Column names in the order of the first successful repeat.
    pub fn columns(&self) -> Vec<String> {
        self.reports
            .first()
            .map(|r| report_columns(r).into_iter().map(|c| c.0).collect())
            .unwrap_or_default()
    }

    /// `(column, mean, std)` over the successful repeats; the standard
    /// deviation of a single repeat is reported as 0.
    pub fn summary(&self) -> Vec<(String, f64, f64)> {
        self.columns()
            .into_iter()
            .map(|name| {
                let values: Vec<f64> = self
                    .reports
                    .iter()
                    .filter_map(|r| report_columns(r).into_iter().find(|c| c.0 == name).map(|c| c.1))
                    .collect();
                let (mean, std) = mean_std(&values);
                (name, mean, if values.len() < 2 { 0.0 } else { std })
            })
            .collect()
    }

    /// One header row of `<column>_mean,<column>_std` pairs and one value row.
    pub fn to_csv(&self) -> Result<String> {
        let summary = self.summary();
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = summary
            .iter()
            .flat_map(|(n, _, _)| [format!("{n}_mean"), format!("{n}_std")])
            .collect();
        w.write_record(&header)?;
        let row: Vec<String> = summary
            .iter()
            .flat_map(|(_, m, s)| [m.to_string(), s.to_string()])
            .collect();
        w.write_record(&row)?;
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

/// Loads the configured dataset and runs [`run_table_on`].
pub fn run_table(cfg: &ExperimentConfig) -> Result<TableResult> {
    cfg.validate()?;
    run_table_on(&cfg.load_data()?, cfg)
}

/// For every repeat, fits a GMM pair with [`split_two_gmm`] under a derived
/// seed and evaluates the bound report for the configured target. A failed
/// repeat is recorded and skipped; the run fails only if every repeat does.
pub fn run_table_on(data: &Points, cfg: &ExperimentConfig) -> Result<TableResult> {
    cfg.validate()?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut last_error = None;
    for repeat in 0..cfg.repeats {
        let seed = derive_seed(cfg.seed, &[repeat as u64]);
        let run = ExperimentConfig {
            seed,
            report: ReportConfig {
                seed,
                mc: crate::estimators::McConfig {
                    seed,
                    ..cfg.report.mc
                },
                ..cfg.report.clone()
            },
            ..cfg.clone()
        };
        let outcome = split_two_gmm(data, &run).and_then(|(a, b)| bound_report(&a, &b, cfg.target, &run.report));
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) => {
                failures.push(RepeatFailure {
                    repeat,
                    error: e.to_string(),
                });
                last_error = Some(e);
            }
        }
    }
    if reports.is_empty() {
        return Err(last_error.expect("at least one repeat ran"));
    }
    Ok(TableResult {
        target: cfg.target,
        reports,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    pub components: usize,
    pub targets: Vec<GroundKind>,
    pub separations: Vec<f64>,
    pub report: ReportConfig,
    pub seed: u64,
}

impl SweepConfig {
    /// TV, KL and the square-rooted Jensen-Shannon divergences for
    /// `alpha` in `{0.1, 0.5, 0.9}` over separations `0, 0.5, ..., 5`.
    pub fn new(family: Family, seed: u64) -> Self {
        SweepConfig {
            family,
            components: 3,
            targets: vec![
                GroundKind::Tv,
                GroundKind::Kl,
                GroundKind::JsSqrt(0.1),
                GroundKind::JsSqrt(0.5),
                GroundKind::JsSqrt(0.9),
            ],
            separations: (0..=10).map(|i| 0.5 * i as f64).collect(),
            report: ReportConfig {
                sinkhorn_levels: vec![10.0],
                ..ReportConfig::new(seed)
            },
            seed,
        }
    }
}

/// Random one-dimensional base mixture of the sweep.
pub fn sweep_base(family: Family, k: usize, seed: u64) -> Result<Mixture> {
    let mut rng = seeded(seed);
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let components = (0..k)
        .map(|_| match family {
            Family::Gaussian1d | Family::GaussianDiag => {
                Component::gaussian_1d(rng.random_range(-2.0..2.0), rng.random_range(0.5..1.5))
            }
            Family::Gamma => Component::gamma(rng.random_range(1.0..5.0), rng.random_range(0.5..2.0)),
            Family::Rayleigh => Component::rayleigh(rng.random_range(0.5..2.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(weights, components)
}

/// Moves every component of `m` by `s`: a shift of the mean for Gaussians,
/// and a scaling by `e^s` for the positive families.
pub fn separate(m: &Mixture, s: f64) -> Result<Mixture> {
    let components = m
        .components()
        .iter()
        .map(|c| match c {
            Component::Gaussian1d(g) => Component::gaussian_1d(g.mu() + s, g.sigma()),
            Component::GaussianDiag(g) => {
                let mean = g.mean().iter().map(|x| x + s).collect();
                Component::gaussian_diag(mean, g.var().to_vec())
            }
            Component::Gamma(g) => Component::gamma(g.shape(), g.scale() * s.exp()),
            Component::Rayleigh(r) => Component::rayleigh(r.scale() * s.exp()),
        })
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(m.weights().to_vec(), components)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub separation: f64,
    pub report: BoundReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Long format: `target,separation,name,value,stderr`, one line per
    /// reference estimate and per bound.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["target", "separation", "name", "value", "stderr"])?;
        for row in &self.rows {
            let target = row.report.target.to_string();
            let sep = row.separation.to_string();
            if let Some(r) = &row.report.reference {
                w.write_record([&target, &sep, "mc", &r.estimate.to_string(), &r.stderr.to_string()])?;
            }
            for b in &row.report.bounds {
                w.write_record([&target, &sep, &b.name, &b.value.to_string(), &b.stderr.to_string()])?;
            }
        }
        csv_string(w)
    }
}

/// Evaluates the bound report of every target between a random base
/// mixture and its separated copy, for each separation.
pub fn run_figure_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.family == Family::GaussianDiag {
        return Err(Error::Unsupported("the sweep runs on one-dimensional families".into()));
    }
    let base = sweep_base(cfg.family, cfg.components, derive_seed(cfg.seed, &[0]))?;
    let mut rows = Vec::new();
    for &target in &cfg.targets {
        for (i, &s) in cfg.separations.iter().enumerate() {
            let moved = separate(&base, s)?;
            let seed = derive_seed(cfg.seed, &[1, i as u64]);
            let report_cfg = ReportConfig {
                seed,
                mc: crate::estimators::McConfig {
                    seed,
                    ..cfg.report.mc
                },
                ..cfg.report.clone()
            };
            rows.push(SweepRow {
                separation: s,
                report: bound_report(&base, &moved, target, &report_cfg)?,
            });
        }
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::McConfig;

    fn blobs(n: usize, seed: u64) -> Points {
        let m = Mixture::uniform(vec![
            Component::gaussian_diag(vec![0.0, 0.0], vec![0.2, 0.2]).unwrap(),
            Component::gaussian_diag(vec![3.0, 0.0], vec![0.3, 0.1]).unwrap(),
            Component::gaussian_diag(vec![0.0, 3.0], vec![0.1, 0.3]).unwrap(),
        ])
        .unwrap();
        m.sample(n, &mut seeded(seed)).unwrap()
    }

    fn cfg(target: GroundKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("unused.csv", DataFormat::Csv, target, 9);
        c.components = 3;
        c.report.mc = McConfig::new(5000, 9);
        c
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let (a, b) = split_indices(1000, 0.1, 4);
        assert_eq!((a.len(), b.len()), (50, 50));
        assert!(a.iter().all(|i| !b.contains(i)));
        let (a, b) = split_indices(400, 1.0, 4);
        assert_eq!((a.len(), b.len()), (200, 200));
        assert_eq!(split_indices(400, 1.0, 4), (a, b));
    }

    #[test]
    fn split_two_gmm_is_deterministic() {
        let data = blobs(600, 1);
        let c = cfg(GroundKind::Kl);
        assert_eq!(split_two_gmm(&data, &c).unwrap(), split_two_gmm(&data, &c).unwrap());
        let mut tiny = c.clone();
        tiny.fraction = 0.005;
        assert!(matches!(split_two_gmm(&data, &tiny), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn table_row_satisfies_the_sandwich() {
        let data = blobs(800, 2);
        let t = run_table_on(&data, &cfg(GroundKind::Kl)).unwrap();
        assert_eq!(t.reports.len(), 1);
        let r = &t.reports[0];
        let mc = r.reference.unwrap();
        let exact = r.get("crot_exact").unwrap().value;
        let s10 = r.get("sinkhorn_10").unwrap().value;
        let s1 = r.get("sinkhorn_1").unwrap().value;
        assert!(mc.lower(3.0) <= exact && exact <= s10 + 1e-12 && s10 <= s1 + 1e-12);
        let csv = t.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("mc_mean,mc_std,crot_exact_mean"));
    }

    #[test]
    fn identical_halves_give_zero_transport() {
        let data = blobs(600, 3);
        let mut c = cfg(GroundKind::Tv);
        c.identical_halves = true;
        let t = run_table_on(&data, &c).unwrap();
        assert!(t.reports[0].get("crot_exact").unwrap().value < 1e-12);
    }

    #[test]
    fn sweep_endpoints() {
        let mut c = SweepConfig::new(Family::Gaussian1d, 5);
        c.targets = vec![GroundKind::Tv];
        c.separations = vec![0.0, 40.0];
        c.report.mc = McConfig::new(4000, 5);
        let s = run_figure_sweep(&c).unwrap();
        let zero = &s.rows[0].report;
        let far = &s.rows[1].report;
        assert!(zero.get("crot_exact").unwrap().value < 1e-12);
        assert!(zero.reference.unwrap().estimate.abs() < 0.05);
        assert!((far.get("crot_exact").unwrap().value - 1.0).abs() < 1e-9);
        assert!((far.reference.unwrap().estimate - 1.0).abs() < 1e-6);
        assert!(s.to_csv().unwrap().starts_with("target,separation,name,value,stderr"));
    }

    #[test]
    fn separation_moves_positive_families_by_scaling() {
        let m = sweep_base(Family::Rayleigh, 2, 1).unwrap();
        let moved = separate(&m, 2f64.ln()).unwrap();
        if let (Component::Rayleigh(a), Component::Rayleigh(b)) = (&m.components()[0], &moved.components()[0]) {
            assert!((b.scale() - 2.0 * a.scale()).abs() < 1e-12);
        } else {
            panic!("family changed");
        }
    }
}

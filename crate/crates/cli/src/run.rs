//! One experiment end to end: engines, CSVs, comparison, fit, summary.

use std::path::{Path, PathBuf};

use lattice_zeno::analysis::{
    compare_series, default_window, estimate_plateau, expected_exponent, fit_exponential,
    fit_power_law, ComparisonReport,
};
use lattice_zeno::dynamics::{first_detection_stats, DetectionStats};
use lattice_zeno::effective::ring_survival;
use lattice_zeno::lattice::{DetectorLayout, Geometry};
use lattice_zeno::series::snapshot_csv;
use lattice_zeno::SurvivalSeries;
use serde::Serialize;

use crate::config::{Engine, Experiment, FitMode, FitSection, Metric, PlateauSpec};
use crate::engines::{prepare, run_engine, AbsorbingInfo, EngineRun, Prepared};
use crate::output::OutputDir;
use crate::CliError;

const DEFAULT_TAIL_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `compare.tolerance`.
    pub tolerance: Option<f64>,
    /// Overrides the configured engine list.
    pub engines: Option<Vec<Engine>>,
    /// Overrides `compare.reference`.
    pub reference: Option<Engine>,
}

#[derive(Debug, Serialize)]
pub struct EngineSummary {
    pub engine: &'static str,
    pub rows: usize,
    pub final_survival: f64,
    pub detection: DetectionStats,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absorbing: Option<AbsorbingInfo>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub geometry: Geometry,
    pub n_sites: usize,
    pub gamma: f64,
    pub tau: f64,
    pub n_max: usize,
    pub detectors: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_site: Option<usize>,
    pub warnings: Vec<String>,
    pub engines: Vec<EngineSummary>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairComparison {
    pub engine: &'static str,
    #[serde(flatten)]
    pub report: ComparisonReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_tolerance: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub reference: &'static str,
    pub metric: Metric,
    pub tolerance: Option<f64>,
    pub comparisons: Vec<PairComparison>,
}

impl Comparison {
    pub fn failures(&self) -> Vec<String> {
        self.comparisons
            .iter()
            .filter(|c| c.within_tolerance == Some(false))
            .map(|c| {
                format!(
                    "{} vs {}: {:?} = {:e} exceeds {:e}",
                    c.engine,
                    self.reference,
                    self.metric,
                    metric_value(&c.report, self.metric),
                    self.tolerance.unwrap_or(f64::NAN)
                )
            })
            .collect()
    }
}

pub fn metric_value(r: &ComparisonReport, m: Metric) -> f64 {
    match m {
        Metric::MaxRelErr => r.max_rel_err,
        Metric::MaxAbsErr => r.max_abs_err,
        Metric::RmsErr => r.rms_err,
    }
}

/// Compare every series against the reference.
pub fn compare_all(
    reference: (Engine, &SurvivalSeries),
    others: &[(Engine, &SurvivalSeries)],
    metric: Metric,
    tolerance: Option<f64>,
) -> Result<Comparison, CliError> {
    let mut comparisons = Vec::new();
    for &(engine, s) in others {
        let report = compare_series(reference.1, s).map_err(|e| {
            CliError::from_core(
                &format!("compare {} vs {}", engine.name(), reference.0.name()),
                e,
            )
        })?;
        comparisons.push(PairComparison {
            engine: engine.name(),
            within_tolerance: tolerance.map(|t| metric_value(&report, metric) <= t),
            report,
        });
    }
    Ok(Comparison {
        reference: reference.0.name(),
        metric,
        tolerance,
        comparisons,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FitResult {
    Power {
        exponent: f64,
        intercept: f64,
        stderr: f64,
        window: (f64, f64),
        n_points: usize,
        plateau: f64,
        plateau_source: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        expected_exponent: Option<f64>,
    },
    Exponential {
        rate: f64,
        intercept: f64,
        stderr: f64,
        window: (f64, f64),
        n_points: usize,
        plateau: f64,
        plateau_source: &'static str,
    },
    Plateau {
        value: f64,
        std: f64,
        n_points: usize,
        tail_fraction: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub engine: &'static str,
    #[serde(flatten)]
    pub result: FitResult,
}

/// What the fit needs to know about the lattice beyond the series.
pub struct FitContext {
    pub geometry: Geometry,
    pub side: usize,
    pub tau: f64,
    pub analytic_plateau: Option<f64>,
    pub square_case: Option<lattice_zeno::SquareCase>,
}

pub fn fit_series(
    s: &SurvivalSeries,
    fit: &FitSection,
    ctx: &FitContext,
) -> Result<FitResult, CliError> {
    let core = |e| CliError::from_core("fit", e);
    let tail = fit.tail_fraction.unwrap_or(DEFAULT_TAIL_FRACTION);
    let (plateau, source) = match &fit.plateau {
        Some(PlateauSpec::Value(v)) => (*v, "config"),
        Some(PlateauSpec::Keyword(_)) => {
            (estimate_plateau(s, tail).map_err(core)?.value, "estimate")
        }
        None => match ctx.analytic_plateau {
            Some(v) => (v, "analytic"),
            None => (0.0, "zero"),
        },
    };
    let default = default_window(ctx.geometry, ctx.side, ctx.tau, fit.edge);
    let window = (
        fit.t_min.unwrap_or(default.0),
        fit.t_max.unwrap_or(default.1),
    );
    Ok(match fit.mode {
        FitMode::Power => {
            let f = fit_power_law(s, window, plateau).map_err(core)?;
            FitResult::Power {
                exponent: f.exponent,
                intercept: f.intercept,
                stderr: f.stderr,
                window: f.window,
                n_points: f.n_points,
                plateau,
                plateau_source: source,
                expected_exponent: expected_exponent(ctx.geometry, ctx.square_case, fit.edge),
            }
        }
        FitMode::Exponential => {
            let f = fit_exponential(s, window, plateau).map_err(core)?;
            FitResult::Exponential {
                rate: f.rate,
                intercept: f.intercept,
                stderr: f.stderr,
                window: f.window,
                n_points: f.n_points,
                plateau,
                plateau_source: source,
            }
        }
        FitMode::Plateau => {
            let p = estimate_plateau(s, tail).map_err(core)?;
            FitResult::Plateau {
                value: p.value,
                std: p.std,
                n_points: p.n_points,
                tail_fraction: tail,
            }
        }
    })
}

fn fit_context(exp: &Experiment, p: &Prepared) -> FitContext {
    let spec = p.spec.as_ref();
    let analytic_plateau = match (spec, exp.start_site) {
        (Some(s), Some(ell)) if s.geometry == Geometry::Ring && s.layout == DetectorLayout::End => {
            ring_survival(s.n, ell, s.gamma * exp.tau, 0.0)
                .ok()
                .map(|r| r.plateau)
        }
        _ => None,
    };
    FitContext {
        geometry: p.geometry(),
        side: p.side(),
        tau: exp.tau,
        analytic_plateau,
        square_case: match spec.map(|s| &s.layout) {
            Some(DetectorLayout::Square(c)) => Some(*c),
            _ => None,
        },
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
    pub comparison: Option<Comparison>,
    pub fit: Option<FitReport>,
}

impl Outcome {
    pub fn tolerance_failures(&self) -> Vec<String> {
        self.comparison
            .as_ref()
            .map(Comparison::failures)
            .unwrap_or_default()
    }
}

/// Compute every engine, then write all artifacts into `dir`. Files are only
/// kept if the whole run succeeds; a tolerance failure still keeps them.
pub fn run_experiment(
    exp: &Experiment,
    dir: &Path,
    opts: &RunOptions,
) -> Result<Outcome, CliError> {
    let engines = opts.engines.clone().unwrap_or_else(|| exp.engines.clone());
    if engines.is_empty() {
        return Err(CliError::Config(
            "engines: at least one engine is required".into(),
        ));
    }
    let prepared = prepare(exp)?;
    let runs: Vec<EngineRun> = engines
        .iter()
        .map(|&e| run_engine(exp, &prepared, e))
        .collect::<Result<_, _>>()?;

    let compare_cfg = exp
        .compare
        .clone()
        .unwrap_or(crate::config::CompareSection {
            reference: None,
            tolerance: None,
            metric: Metric::default(),
        });
    let comparison = if runs.len() >= 2 {
        let reference = opts
            .reference
            .or(compare_cfg.reference)
            .unwrap_or(runs[0].engine);
        let ref_run = runs.iter().find(|r| r.engine == reference).ok_or_else(|| {
            CliError::Config(format!(
                "compare.reference: `{}` was not run",
                reference.name()
            ))
        })?;
        let others: Vec<_> = runs
            .iter()
            .filter(|r| r.engine != reference)
            .map(|r| (r.engine, &r.series))
            .collect();
        let tolerance = opts.tolerance.or(compare_cfg.tolerance);
        Some(compare_all(
            (reference, &ref_run.series),
            &others,
            compare_cfg.metric,
            tolerance,
        )?)
    } else {
        None
    };

    let fit = match &exp.fit {
        Some(f) => {
            let engine = f
                .engine
                .filter(|e| engines.contains(e))
                .unwrap_or(runs[0].engine);
            let run = runs
                .iter()
                .find(|r| r.engine == engine)
                .expect("engine was run");
            let result = fit_series(&run.series, f, &fit_context(exp, &prepared))?;
            Some(FitReport {
                engine: engine.name(),
                result,
            })
        }
        None => None,
    };

    let mut out = OutputDir::create(dir)?;
    let mut names = Vec::new();
    let mut engine_summaries = Vec::new();
    for run in &runs {
        let name = format!("{}.csv", run.engine.name());
        out.write(&name, &run.series.to_csv())?;
        names.push(name);
        for snap in run.series.snapshots() {
            let name = format!("{}_snapshot_{}.csv", run.engine.name(), snap.n);
            out.write(&name, &snapshot_csv(&snap.state))?;
            names.push(name);
        }
        engine_summaries.push(EngineSummary {
            engine: run.engine.name(),
            rows: run.series.len(),
            final_survival: run.series.rows().last().map_or(1.0, |r| r.survival),
            detection: first_detection_stats(&run.series)
                .map_err(|e| CliError::from_core(run.engine.name(), e))?,
            notes: run.notes.clone(),
            absorbing: run.absorbing,
        });
    }
    if let Some(c) = &comparison {
        out.write_json("comparison.json", c)?;
        names.push("comparison.json".into());
    }
    if let Some(f) = &fit {
        out.write_json("fit.json", f)?;
        names.push("fit.json".into());
    }
    names.push("summary.json".into());
    let summary = Summary {
        name: exp.name.clone(),
        geometry: prepared.geometry(),
        n_sites: prepared.h.n_sites(),
        gamma: prepared.h.gamma(),
        tau: exp.tau,
        n_max: exp.n_max,
        detectors: prepared.d.detected_one_based(),
        start_site: exp.start_site,
        warnings: prepared.warnings.clone(),
        engines: engine_summaries,
        files: names,
    };
    out.write_json("summary.json", &summary)?;
    let dir = out.path().to_path_buf();
    let files = out.commit();
    Ok(Outcome {
        dir,
        files,
        summary,
        comparison,
        fit,
    })
}

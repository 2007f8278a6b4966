#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod engines;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lattice_zeno::analysis::compare_series;
use lattice_zeno::lattice::{build, load_graph, Geometry};
use lattice_zeno::meanfield::{mf_series, mf_solve, mf_total_detection};
use lattice_zeno::SurvivalSeries;
use rayon::prelude::*;
use serde::Serialize;

use config::{Engine, Experiment, FitMode, FitSection, LatticeSource, Metric, PlateauSpec};
use output::OutputDir;
use run::{compare_all, fit_series, run_experiment, FitContext, RunOptions};

pub const OUT_ENV: &str = "LATTICE_ZENO_OUT";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Tolerance(String),
    Other(String),
}

impl CliError {
    /// Attach context to a library error and sort it into an exit class.
    pub fn from_core(ctx: &str, e: lattice_zeno::Error) -> Self {
        use lattice_zeno::Error as E;
        let msg = format!("{ctx}: {e}");
        match e {
            E::NumericalFailure { .. } | E::Consistency { .. } => CliError::Numerical(msg),
            E::Io(_) => CliError::Other(msg),
            _ => CliError::Config(msg),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical consistency failure: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance exceeded: {m}"),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

/// Survival and first-detection statistics of a particle on a lattice under
/// repeated projective measurements.
#[derive(Parser, Debug)]
#[command(name = "lattice-zeno", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment file, or a directory of them for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; beats the environment variable and the config file.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Largest accepted comparison error; overrides `compare.tolerance`.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Worker threads for batch runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment file or every `*.toml` in a directory.
    Run {
        /// Validate the configs and print the plan without computing.
        #[arg(long)]
        dry_run: bool,
        /// Comma-separated engine list replacing the configured one.
        #[arg(long)]
        engines: Option<String>,
    },
    /// Compare engines of one experiment, two experiments, or two CSV files.
    Compare {
        /// Comma-separated engines to run and compare.
        #[arg(long)]
        engines: Option<String>,
        /// Engine every other series is measured against.
        #[arg(long)]
        reference: Option<String>,
        /// Second experiment; its first engine is compared with the first file's reference.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Two survival CSVs, reference first.
        #[arg(long, num_args = 1)]
        csv: Vec<PathBuf>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
    },
    /// Fit the survival decay of an experiment or of a CSV file.
    Fit {
        #[arg(long)]
        csv: Option<PathBuf>,
        /// power, exponential or plateau.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<FitMode>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// A number or `estimate`.
        #[arg(long)]
        plateau: Option<String>,
        #[arg(long)]
        tail_fraction: Option<f64>,
        /// Start next to the boundary: use the late default window.
        #[arg(long)]
        edge: bool,
    },
    /// Closed-form complete-graph series.
    Meanfield {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tau: f64,
        /// 1-based start site; `n` is the detector.
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
    },
    /// Validate a graph file (or the lattice of an experiment) and describe it.
    GraphCheck {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "max_rel_err" => Ok(Metric::MaxRelErr),
        "max_abs_err" => Ok(Metric::MaxAbsErr),
        "rms_err" => Ok(Metric::RmsErr),
        _ => Err(format!(
            "unknown metric `{s}` (max_rel_err, max_abs_err, rms_err)"
        )),
    }
}

fn parse_mode(s: &str) -> Result<FitMode, String> {
    match s {
        "power" => Ok(FitMode::Power),
        "exponential" => Ok(FitMode::Exponential),
        "plateau" => Ok(FitMode::Plateau),
        _ => Err(format!(
            "unknown fit mode `{s}` (power, exponential, plateau)"
        )),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(t) = g.tolerance {
        if !(t >= 0.0) {
            return Err(CliError::Config(format!(
                "--tolerance must be non-negative, got {t}"
            )));
        }
    }
    match &cli.command {
        Command::Run { dry_run, engines } => cmd_run(g, *dry_run, engines.as_deref()),
        Command::Compare {
            engines,
            reference,
            against,
            csv,
            metric,
        } => cmd_compare(
            g,
            engines.as_deref(),
            reference.as_deref(),
            against.as_deref(),
            csv,
            *metric,
        ),
        Command::Fit {
            csv,
            mode,
            t_min,
            t_max,
            plateau,
            tail_fraction,
            edge,
        } => {
            let plateau = match plateau.as_deref() {
                None => None,
                Some("estimate") => Some(PlateauSpec::Keyword("estimate".into())),
                Some(v) => Some(PlateauSpec::Value(v.parse().map_err(|_| {
                    CliError::Config(format!(
                        "--plateau: expected a number or `estimate`, got `{v}`"
                    ))
                })?)),
            };
            let flags = FitSection {
                engine: None,
                mode: mode.unwrap_or_default(),
                t_min: *t_min,
                t_max: *t_max,
                plateau,
                tail_fraction: *tail_fraction,
                edge: *edge,
            };
            cmd_fit(g, csv.as_deref(), flags, mode.is_some())
        }
        Command::Meanfield { n, tau, ell, n_max } => cmd_meanfield(g, *n, *tau, *ell, *n_max),
        Command::GraphCheck { graph } => cmd_graph_check(g, graph.as_deref()),
    }
}

fn need_config(g: &Global) -> Result<&Path, CliError> {
    g.config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))
}

/// `--out` (or the environment variable), then `output_dir` from the file,
/// then `out/<name>`.
fn output_dir(g: &Global, exp: &Experiment) -> PathBuf {
    g.out
        .clone()
        .or_else(|| exp.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&exp.name))
}

fn engines_flag(s: Option<&str>) -> Result<Option<Vec<Engine>>, CliError> {
    s.map(Engine::parse_list).transpose()
}

fn experiment_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no .toml experiment files",
            dir.display()
        )));
    }
    Ok(files)
}

fn describe(exp: &Experiment, dir: &Path) -> String {
    let lattice = match &exp.lattice {
        LatticeSource::Builtin(s) => format!("{} N={} detectors={:?}", s.geometry, s.n, s.layout),
        LatticeSource::Graph(p) => format!("graph {}", p.display()),
    };
    let engines: Vec<&str> = exp.engines.iter().map(|e| e.name()).collect();
    format!(
        "{}: {lattice}, tau={}, n_max={}, engines=[{}] -> {}",
        exp.name,
        exp.tau,
        exp.n_max,
        engines.join(","),
        dir.display()
    )
}

fn finish_run(outcome: &run::Outcome) -> Result<(), CliError> {
    for w in &outcome.summary.warnings {
        eprintln!("warning: {}: {w}", outcome.summary.name);
    }
    for e in &outcome.summary.engines {
        for n in &e.notes {
            eprintln!("note: {}: {}: {n}", outcome.summary.name, e.engine);
        }
    }
    let failures = outcome.tolerance_failures();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failures.join("; ")))
    }
}

fn cmd_run(g: &Global, dry_run: bool, engines: Option<&str>) -> Result<(), CliError> {
    let path = need_config(g)?;
    let opts = RunOptions {
        tolerance: g.tolerance,
        engines: engines_flag(engines)?,
        reference: None,
    };
    if !path.is_dir() {
        let exp = config::load(path)?;
        let dir = output_dir(g, &exp);
        if dry_run {
            println!("{}", describe(&exp, &dir));
            return Ok(());
        }
        let outcome = run_experiment(&exp, &dir, &opts)?;
        println!(
            "{}: wrote {} files to {}",
            exp.name,
            outcome.files.len(),
            outcome.dir.display()
        );
        return finish_run(&outcome);
    }

    let files = experiment_files(path)?;
    let base = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let jobs = g.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Other(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<(PathBuf, Result<String, CliError>)> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let result = config::load(f).and_then(|exp| {
                    let dir = base.join(&exp.name);
                    if dry_run {
                        return Ok(describe(&exp, &dir));
                    }
                    let outcome = run_experiment(&exp, &dir, &opts)?;
                    finish_run(&outcome)?;
                    Ok(format!(
                        "{}: wrote {} files to {}",
                        exp.name,
                        outcome.files.len(),
                        dir.display()
                    ))
                });
                (f.clone(), result)
            })
            .collect()
    });
    let mut first_error = None;
    for (file, result) in results {
        match result {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("error: {}: {e}", file.display());
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serialises")
    );
}

fn read_csv(path: &Path) -> Result<SurvivalSeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    SurvivalSeries::from_csv(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_compare(
    g: &Global,
    engines: Option<&str>,
    reference: Option<&str>,
    against: Option<&Path>,
    csv: &[PathBuf],
    metric: Option<Metric>,
) -> Result<(), CliError> {
    let reference = reference.map(Engine::parse).transpose()?;
    if !csv.is_empty() {
        if csv.len() != 2 {
            return Err(CliError::Config(format!(
                "--csv must be given twice, got {}",
                csv.len()
            )));
        }
        let (a, b) = (read_csv(&csv[0])?, read_csv(&csv[1])?);
        let report = compare_series(&a, &b).map_err(|e| CliError::from_core("compare", e))?;
        let metric = metric.unwrap_or_default();
        let value = run::metric_value(&report, metric);
        #[derive(Serialize)]
        struct CsvComparison {
            reference: String,
            other: String,
            metric: Metric,
            tolerance: Option<f64>,
            #[serde(flatten)]
            report: lattice_zeno::analysis::ComparisonReport,
        }
        let doc = CsvComparison {
            reference: csv[0].display().to_string(),
            other: csv[1].display().to_string(),
            metric,
            tolerance: g.tolerance,
            report,
        };
        if let Some(dir) = &g.out {
            let mut out = OutputDir::create(dir)?;
            out.write_json("comparison.json", &doc)?;
            out.commit();
        }
        print_json(&doc);
        return match g.tolerance {
            Some(t) if value > t => Err(CliError::Tolerance(format!(
                "{metric:?} = {value:e} exceeds {t:e}"
            ))),
            _ => Ok(()),
        };
    }

    let path = need_config(g)?;
    let mut exp = config::load(path)?;
    if let Some(m) = metric {
        exp.compare
            .get_or_insert(config::CompareSection {
                reference: None,
                tolerance: None,
                metric: m,
            })
            .metric = m;
    }
    let dir = output_dir(g, &exp);
    if let Some(other_path) = against {
        let other = config::load(other_path)?;
        let ref_engine = reference.unwrap_or(exp.engines[0]);
        let a = run_experiment(
            &exp,
            &dir.join("reference"),
            &RunOptions {
                engines: Some(vec![ref_engine]),
                ..RunOptions::default()
            },
        )?;
        let b_engine = engines_flag(engines)?.map_or(other.engines[0], |v| v[0]);
        let b = run_experiment(
            &other,
            &dir.join("other"),
            &RunOptions {
                engines: Some(vec![b_engine]),
                ..RunOptions::default()
            },
        )?;
        let series =
            |o: &run::Outcome, e: Engine| read_csv(&o.dir.join(format!("{}.csv", e.name())));
        let (sa, sb) = (series(&a, ref_engine)?, series(&b, b_engine)?);
        let metric = exp.compare.as_ref().map(|c| c.metric).unwrap_or_default();
        let tolerance = g
            .tolerance
            .or(exp.compare.as_ref().and_then(|c| c.tolerance));
        let cmp = compare_all((ref_engine, &sa), &[(b_engine, &sb)], metric, tolerance)?;
        let mut out = OutputDir::create(&dir)?;
        out.write_json("comparison.json", &cmp)?;
        out.commit();
        print_json(&cmp);
        let failures = cmp.failures();
        return if failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Tolerance(failures.join("; ")))
        };
    }

    let engines = engines_flag(engines)?;
    let count = engines.as_ref().map_or(exp.engines.len(), Vec::len);
    if count < 2 {
        return Err(CliError::Config(
            "compare needs at least two engines".into(),
        ));
    }
    let outcome = run_experiment(
        &exp,
        &dir,
        &RunOptions {
            tolerance: g.tolerance,
            engines,
            reference,
        },
    )?;
    if let Some(c) = &outcome.comparison {
        print_json(c);
    }
    finish_run(&outcome)
}

fn cmd_fit(
    g: &Global,
    csv: Option<&Path>,
    flags: FitSection,
    mode_given: bool,
) -> Result<(), CliError> {
    if let Some(path) = csv {
        let s = read_csv(path)?;
        if flags.mode != FitMode::Plateau && (flags.t_min.is_none() || flags.t_max.is_none()) {
            return Err(CliError::Config(
                "fit --csv needs --t-min and --t-max".into(),
            ));
        }
        let ctx = FitContext {
            geometry: Geometry::Custom,
            side: 1,
            tau: 1.0,
            analytic_plateau: None,
            square_case: None,
        };
        let result = fit_series(&s, &flags, &ctx)?;
        if let Some(dir) = &g.out {
            let mut out = OutputDir::create(dir)?;
            out.write_json("fit.json", &result)?;
            out.commit();
        }
        print_json(&result);
        return Ok(());
    }
    let path = need_config(g)?;
    let mut exp = config::load(path)?;
    let merged = match exp.fit.take() {
        Some(base) => FitSection {
            engine: base.engine,
            mode: if mode_given { flags.mode } else { base.mode },
            t_min: flags.t_min.or(base.t_min),
            t_max: flags.t_max.or(base.t_max),
            plateau: flags.plateau.or(base.plateau),
            tail_fraction: flags.tail_fraction.or(base.tail_fraction),
            edge: flags.edge || base.edge,
        },
        None => flags,
    };
    exp.fit = Some(merged);
    let dir = output_dir(g, &exp);
    let outcome = run_experiment(
        &exp,
        &dir,
        &RunOptions {
            tolerance: g.tolerance,
            ..RunOptions::default()
        },
    )?;
    if let Some(f) = &outcome.fit {
        print_json(f);
    }
    finish_run(&outcome)
}

#[derive(Serialize)]
struct MeanfieldReport {
    n: usize,
    tau: f64,
    ell: usize,
    x: f64,
    xi: f64,
    total_detection: f64,
    resonant: bool,
}

fn cmd_meanfield(g: &Global, n: usize, tau: f64, ell: usize, n_max: usize) -> Result<(), CliError> {
    let core = |e| CliError::from_core("meanfield", e);
    if !(tau > 0.0) {
        return Err(CliError::Config(format!(
            "--tau must be positive, got {tau}"
        )));
    }
    let sol = mf_solve(n, tau).map_err(core)?;
    let series = mf_series(&sol, ell, n_max).map_err(core)?;
    let report = MeanfieldReport {
        n,
        tau,
        ell,
        x: sol.x,
        xi: sol.xi,
        total_detection: mf_total_detection(n, ell).map_err(core)?,
        resonant: sol.c.is_none(),
    };
    match &g.out {
        Some(dir) => {
            let mut out = OutputDir::create(dir)?;
            out.write("meanfield.csv", &series.to_csv())?;
            out.write_json("summary.json", &report)?;
            out.commit();
            print_json(&report);
        }
        None => print!("{}", series.to_csv()),
    }
    Ok(())
}

#[derive(Serialize)]
struct GraphReport {
    geometry: Geometry,
    n_sites: usize,
    gamma: f64,
    detectors: Vec<usize>,
    edges: usize,
    /// System sites with no path to a detector; their weight never decays.
    unreachable: Vec<usize>,
    warnings: Vec<String>,
}

fn cmd_graph_check(g: &Global, graph: Option<&Path>) -> Result<(), CliError> {
    let ((h, d), warnings) = match (graph, g.config.as_deref()) {
        (Some(p), _) => (
            load_graph(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            Vec::new(),
        ),
        (None, Some(c)) => {
            let exp = config::load(c)?;
            match &exp.lattice {
                LatticeSource::Graph(p) => (
                    load_graph(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                    Vec::new(),
                ),
                LatticeSource::Builtin(spec) => (
                    build(spec).map_err(|e| CliError::from_core("lattice", e))?,
                    spec.warnings(),
                ),
            }
        }
        (None, None) => {
            return Err(CliError::Config(
                "graph-check needs --graph or --config".into(),
            ))
        }
    };
    let m = h.matrix().matrix();
    let n = h.n_sites();
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = d.detected().to_vec();
    for &s in &stack {
        reached[s] = true;
    }
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !reached[j] && m[(i, j)] != 0.0 {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    let edges = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| m[(i, j)] != 0.0)
        .count();
    let report = GraphReport {
        geometry: h.geometry(),
        n_sites: n,
        gamma: h.gamma(),
        detectors: d.detected_one_based(),
        edges,
        unreachable: (0..n).filter(|&i| !reached[i]).map(|i| i + 1).collect(),
        warnings,
    };
    print_json(&report);
    Ok(())
}

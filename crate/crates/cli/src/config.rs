//! Experiment files: one TOML document per experiment.

use std::path::{Path, PathBuf};

use lattice_zeno::dynamics::InitialState;
use lattice_zeno::lattice::{square_index, DetectorLayout, Geometry, LatticeSpec};
use lattice_zeno::StateVector;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Exact,
    /// Exact dynamics on the full matrix even when a factorised form exists.
    ExactDense,
    Effective,
    Analytic,
    Meanfield,
    Absorbing,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::ExactDense => "exact-dense",
            Engine::Effective => "effective",
            Engine::Analytic => "analytic",
            Engine::Meanfield => "meanfield",
            Engine::Absorbing => "absorbing",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>, CliError> {
        s.split(',').map(Self::parse).collect()
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        let e = match s.trim() {
            "exact" => Engine::Exact,
            "exact-dense" => Engine::ExactDense,
            "effective" => Engine::Effective,
            "analytic" => Engine::Analytic,
            "meanfield" => Engine::Meanfield,
            "absorbing" => Engine::Absorbing,
            other => return Err(CliError::Config(format!("unknown engine `{other}`"))),
        };
        Ok(e)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub engines: Vec<Engine>,
    pub lattice: RawLattice,
    pub protocol: RawProtocol,
    pub initial: RawInitial,
    pub absorbing: Option<AbsorbingSection>,
    pub fit: Option<FitSection>,
    pub compare: Option<CompareSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLattice {
    pub geometry: String,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub detectors: Option<String>,
    /// Edge-list file for `custom` geometry, relative to the config file.
    pub graph: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProtocol {
    pub tau: f64,
    pub n_max: usize,
    #[serde(default)]
    pub snapshots: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Site {
    Flat(usize),
    Grid([usize; 2]),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub position: Option<Site>,
    pub eigenstate: Option<usize>,
    /// `site,re,im` CSV, relative to the config file.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingSection {
    /// Dimensionless Γ; defaults to 2/(γτ).
    pub coupling: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    #[default]
    Power,
    Exponential,
    Plateau,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PlateauSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub engine: Option<Engine>,
    #[serde(default)]
    pub mode: FitMode,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    /// A number, or `"estimate"` to take the tail mean.
    pub plateau: Option<PlateauSpec>,
    pub tail_fraction: Option<f64>,
    /// Use the late (boundary) default window.
    #[serde(default)]
    pub edge: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::enum_variant_names)]
pub enum Metric {
    #[default]
    MaxRelErr,
    MaxAbsErr,
    RmsErr,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub reference: Option<Engine>,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub metric: Metric,
}

#[derive(Clone, Debug)]
pub enum LatticeSource {
    Builtin(LatticeSpec),
    Graph(PathBuf),
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub output_dir: Option<PathBuf>,
    pub engines: Vec<Engine>,
    pub lattice: LatticeSource,
    pub tau: f64,
    pub n_max: usize,
    pub snapshots: Vec<usize>,
    pub initial: InitialState,
    /// 1-based flattened start site, when the initial state is a position.
    pub start_site: Option<usize>,
    pub absorbing: Option<AbsorbingSection>,
    pub fit: Option<FitSection>,
    pub compare: Option<CompareSection>,
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

pub fn load(path: &Path) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw: RawConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    validate(raw, Some(path), stem).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
pub fn parse_str(text: &str, name: &str) -> Result<Experiment, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    validate(raw, None, name.to_string())
}

fn relative(base: Option<&Path>, p: &Path) -> PathBuf {
    match base.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn validate(raw: RawConfig, path: Option<&Path>, stem: String) -> Result<Experiment, CliError> {
    if raw.engines.is_empty() {
        return Err(field("engines", "at least one engine is required"));
    }
    let mut seen = Vec::new();
    for e in &raw.engines {
        if seen.contains(e) {
            return Err(field("engines", format!("`{}` listed twice", e.name())));
        }
        seen.push(*e);
    }
    let p = &raw.protocol;
    if !(p.tau > 0.0 && p.tau.is_finite()) {
        return Err(field(
            "protocol.tau",
            format!("must be positive, got {}", p.tau),
        ));
    }
    if p.n_max == 0 {
        return Err(field("protocol.n_max", "must be at least 1"));
    }
    if let Some(&bad) = p.snapshots.iter().find(|&&s| s == 0 || s > p.n_max) {
        return Err(field(
            "protocol.snapshots",
            format!("{bad} outside 1..={}", p.n_max),
        ));
    }

    let geometry: Geometry = raw
        .lattice
        .geometry
        .parse()
        .map_err(|e| field("lattice.geometry", e))?;
    let lattice = if geometry == Geometry::Custom {
        let graph = raw
            .lattice
            .graph
            .as_ref()
            .ok_or_else(|| field("lattice.graph", "required for custom geometry"))?;
        LatticeSource::Graph(relative(path, graph))
    } else {
        let n = raw.lattice.n.ok_or_else(|| field("lattice.n", "missing"))?;
        let layout: DetectorLayout = raw
            .lattice
            .detectors
            .as_deref()
            .unwrap_or("end")
            .parse()
            .map_err(|e| field("lattice.detectors", e))?;
        let mut spec = LatticeSpec::new(geometry, n, layout);
        if let Some(g) = raw.lattice.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(field("lattice.gamma", format!("must be positive, got {g}")));
            }
            spec.gamma = g;
        }
        spec.analytic = raw.engines.contains(&Engine::Analytic);
        LatticeSource::Builtin(spec)
    };

    let side = match &lattice {
        LatticeSource::Builtin(s) => Some(s.n),
        LatticeSource::Graph(_) => None,
    };
    let init = &raw.initial;
    let given = [
        init.position.is_some(),
        init.eigenstate.is_some(),
        init.file.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(field(
            "initial",
            "set exactly one of position, eigenstate, file",
        ));
    }
    let (initial, start_site) = if let Some(site) = &init.position {
        let flat = match (site, geometry) {
            (Site::Flat(s), _) => *s,
            (Site::Grid([x, y]), Geometry::SquareOpen) => {
                let n = side.unwrap_or(0);
                if *x == 0 || *y == 0 || *x > n || *y > n {
                    return Err(field(
                        "initial.position",
                        format!("({x}, {y}) outside the {n}x{n} lattice"),
                    ));
                }
                square_index(n, *x, *y) + 1
            }
            (Site::Grid(_), _) => {
                return Err(field(
                    "initial.position",
                    "grid coordinates need square-open geometry",
                ))
            }
        };
        (InitialState::Position(flat), Some(flat))
    } else if let Some(s) = init.eigenstate {
        (InitialState::Eigenstate(s), None)
    } else {
        let file = relative(path, init.file.as_ref().unwrap());
        let n_sites = match &lattice {
            LatticeSource::Builtin(s) => s.n_sites(),
            LatticeSource::Graph(g) => lattice_zeno::lattice::load_graph(g)
                .map_err(|e| field("lattice.graph", e))?
                .0
                .n_sites(),
        };
        let text = std::fs::read_to_string(&file)
            .map_err(|e| field("initial.file", format!("{}: {e}", file.display())))?;
        let state = StateVector::from_csv(&text, n_sites).map_err(|e| field("initial.file", e))?;
        (InitialState::Amplitudes(state), None)
    };

    if let Some(fit) = &raw.fit {
        if let Some(e) = fit.engine {
            if !raw.engines.contains(&e) {
                return Err(field(
                    "fit.engine",
                    format!("`{}` is not in engines", e.name()),
                ));
            }
        }
        if let Some(PlateauSpec::Keyword(k)) = &fit.plateau {
            if k != "estimate" {
                return Err(field(
                    "fit.plateau",
                    format!("expected a number or \"estimate\", got \"{k}\""),
                ));
            }
        }
    }
    if let Some(c) = &raw.compare {
        if let Some(e) = c.reference {
            if !raw.engines.contains(&e) {
                return Err(field(
                    "compare.reference",
                    format!("`{}` is not in engines", e.name()),
                ));
            }
        }
        if let Some(t) = c.tolerance {
            if !(t >= 0.0) {
                return Err(field("compare.tolerance", "must be non-negative"));
            }
        }
    }
    if let Some(AbsorbingSection { coupling: Some(c) }) = &raw.absorbing {
        if !(*c >= 0.0 && c.is_finite()) {
            return Err(field("absorbing.coupling", "must be non-negative"));
        }
    }

    Ok(Experiment {
        name: raw.name.unwrap_or(stem),
        output_dir: raw.output_dir,
        engines: raw.engines,
        lattice,
        tau: p.tau,
        n_max: p.n_max,
        snapshots: p.snapshots.clone(),
        initial,
        start_site,
        absorbing: raw.absorbing,
        fit: raw.fit,
        compare: raw.compare,
    })
}

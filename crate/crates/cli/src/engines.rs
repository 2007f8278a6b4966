//! Dispatch from an experiment to the core engines.

use lattice_zeno::absorbing::{build_hnh, evolve_hnh, gamma_for_tau, MappingValidity};
use lattice_zeno::dynamics::{
    evolve, evolve_square, step_operator, MeasurementProtocol, SquareStepOperator,
};
use lattice_zeno::effective::{
    build_heff, evolve_heff, open_chain_survival, ring_survival, square_survival,
    two_end_chain_survival,
};
use lattice_zeno::lattice::{
    build, load_graph, DetectorLayout, DetectorSet, Geometry, Hamiltonian, LatticeSpec,
};
use lattice_zeno::meanfield::{mf_series, mf_solve};
use lattice_zeno::{StateVector, SurvivalSeries};
use serde::Serialize;

use crate::config::{Engine, Experiment, LatticeSource};
use crate::CliError;

/// The lattice an experiment runs on, built once and shared by all engines.
pub struct Prepared {
    pub spec: Option<LatticeSpec>,
    pub h: Hamiltonian,
    pub d: DetectorSet,
    pub psi0: StateVector,
    pub warnings: Vec<String>,
}

impl Prepared {
    /// Sites per dimension (the site count for graphs).
    pub fn side(&self) -> usize {
        self.spec.as_ref().map_or(self.h.n_sites(), |s| s.n)
    }

    pub fn geometry(&self) -> Geometry {
        self.h.geometry()
    }
}

pub fn prepare(exp: &Experiment) -> Result<Prepared, CliError> {
    let (spec, (h, d), mut warnings) = match &exp.lattice {
        LatticeSource::Builtin(spec) => {
            let built = build(spec).map_err(|e| CliError::from_core("lattice", e))?;
            (Some(spec.clone()), built, spec.warnings())
        }
        LatticeSource::Graph(path) => {
            let built = load_graph(path)
                .map_err(|e| CliError::Config(format!("lattice.graph: {}: {e}", path.display())))?;
            (None, built, Vec::new())
        }
    };
    let psi0 = exp
        .initial
        .prepare(&h, &d)
        .map_err(|e| CliError::from_core("initial", e))?;
    if d.detected()
        .iter()
        .any(|&s| psi0.amplitudes()[s].norm_sqr() > 0.0)
    {
        warnings.push(
            "initial state overlaps the detectors; it is evolved once before the first projection"
                .into(),
        );
    }
    Ok(Prepared {
        spec,
        h,
        d,
        psi0,
        warnings,
    })
}

pub struct EngineRun {
    pub engine: Engine,
    pub series: SurvivalSeries,
    pub notes: Vec<String>,
    pub absorbing: Option<AbsorbingInfo>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AbsorbingInfo {
    pub coupling: f64,
    pub validity: MappingValidity,
}

pub fn run_engine(exp: &Experiment, p: &Prepared, engine: Engine) -> Result<EngineRun, CliError> {
    let ctx = engine.name();
    let core = |e| CliError::from_core(ctx, e);
    let proto = MeasurementProtocol::new(exp.tau, exp.n_max)
        .map_err(core)?
        .with_snapshots(exp.snapshots.clone());
    let mut notes = Vec::new();
    let mut absorbing = None;
    let series = match engine {
        Engine::Exact => match (&p.spec, p.geometry()) {
            (
                Some(LatticeSpec {
                    layout: DetectorLayout::Square(case),
                    n,
                    gamma,
                    ..
                }),
                Geometry::SquareOpen,
            ) => {
                let op = SquareStepOperator::new(*n, *gamma, *case, exp.tau).map_err(core)?;
                evolve_square(&op, &p.psi0, &proto).map_err(core)?
            }
            _ => {
                let u = step_operator(&p.h, &p.d, exp.tau).map_err(core)?;
                evolve(&u, &p.psi0, &proto).map_err(core)?
            }
        },
        Engine::ExactDense => {
            let u = step_operator(&p.h, &p.d, exp.tau).map_err(core)?;
            evolve(&u, &p.psi0, &proto).map_err(core)?
        }
        Engine::Effective => {
            let heff = build_heff(&p.h, &p.d, exp.tau).map_err(core)?;
            let leak: f64 =
                p.d.detected()
                    .iter()
                    .map(|&s| p.psi0.amplitudes()[s].norm_sqr())
                    .sum();
            if leak > 0.0 {
                return Err(CliError::Config(format!(
                    "effective: initial state has weight {leak:e} on the detectors"
                )));
            }
            let local = p.psi0.restrict(p.d.system());
            evolve_heff(&heff, &local, exp.n_max).map_err(core)?
        }
        Engine::Analytic => analytic(exp, p)?,
        Engine::Meanfield => meanfield(exp, p)?,
        Engine::Absorbing => {
            let coupling = match exp.absorbing.as_ref().and_then(|a| a.coupling) {
                Some(c) => c,
                None => gamma_for_tau(p.h.gamma(), exp.tau).map_err(core)?,
            };
            let validity = MappingValidity::assess(p.h.gamma(), exp.tau, coupling);
            if !validity.holds() {
                notes.push(format!(
                    "outside the strong-coupling/fast-measurement regime (Γ = {coupling}, γτ = {})",
                    p.h.gamma() * exp.tau
                ));
            }
            absorbing = Some(AbsorbingInfo { coupling, validity });
            let a = build_hnh(&p.h, &p.d, coupling).map_err(core)?;
            evolve_hnh(&a, &p.psi0, exp.tau, exp.n_max).map_err(core)?
        }
    };
    Ok(EngineRun {
        engine,
        series,
        notes,
        absorbing,
    })
}

fn start(exp: &Experiment, engine: &str) -> Result<usize, CliError> {
    exp.start_site.ok_or_else(|| {
        CliError::Config(format!(
            "{engine}: closed forms need a position initial state"
        ))
    })
}

fn analytic(exp: &Experiment, p: &Prepared) -> Result<SurvivalSeries, CliError> {
    let spec = p
        .spec
        .as_ref()
        .ok_or_else(|| CliError::Config("analytic: no closed form for custom graphs".into()))?;
    let ell = start(exp, "analytic")?;
    let (n, g) = (spec.n, spec.gamma);
    let tau = g * exp.tau;
    let core = |e| CliError::from_core("analytic", e);
    let survival: Box<dyn Fn(f64) -> lattice_zeno::Result<f64>> =
        match (spec.geometry, &spec.layout) {
            (Geometry::ChainOpen, DetectorLayout::End) => {
                Box::new(move |t| open_chain_survival(n, ell, tau, g * t))
            }
            (Geometry::ChainOpen, DetectorLayout::BothEnds) => {
                Box::new(move |t| two_end_chain_survival(n, ell, tau, g * t))
            }
            (Geometry::Ring, DetectorLayout::End) => {
                Box::new(move |t| ring_survival(n, ell, tau, g * t).map(|r| r.survival))
            }
            (Geometry::SquareOpen, DetectorLayout::Square(case)) => {
                let (lx, ly) = ((ell - 1) / n + 1, (ell - 1) % n + 1);
                let case = *case;
                Box::new(move |t| square_survival(case, n, lx, ly, tau, g * t))
            }
            (Geometry::Complete, DetectorLayout::End) => return meanfield(exp, p),
            (geo, layout) => {
                return Err(CliError::Config(format!(
                    "analytic: no closed form for {geo} with detectors {layout:?}"
                )))
            }
        };
    let mut points = Vec::with_capacity(exp.n_max);
    for k in 1..=exp.n_max {
        let t = k as f64 * exp.tau;
        points.push((t, survival(t).map_err(core)?));
    }
    SurvivalSeries::from_survival(points).map_err(core)
}

fn meanfield(exp: &Experiment, p: &Prepared) -> Result<SurvivalSeries, CliError> {
    let spec = match &p.spec {
        Some(s) if s.geometry == Geometry::Complete && s.layout == DetectorLayout::End => s,
        _ => {
            return Err(CliError::Config(
                "meanfield: needs geometry = \"complete\" with detectors = \"end\"".into(),
            ))
        }
    };
    let ell = start(exp, "meanfield")?;
    let core = |e| CliError::from_core("meanfield", e);
    let sol = mf_solve(spec.n, spec.gamma * exp.tau).map_err(core)?;
    // The solution is in units of γ; put the rows back on the physical grid.
    Ok(mf_series(&sol, ell, exp.n_max)
        .map_err(core)?
        .rescale_time(1.0 / spec.gamma))
}

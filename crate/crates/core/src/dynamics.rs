//! Exact stroboscopic evolution: unitary step of length τ followed by the
//! projection onto the undetected sites, repeated until `n_max`.
//!
//! `|ψ_n^+> = Ũⁿ |ψ(0)>` with `Ũ = B e^{-iHτ}`; the survival after n
//! measurements is `‖ψ_n^+‖²` and the first-detection probability is the
//! drop in survival across step n.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{DetectorSet, Hamiltonian, SquareCase};
use crate::numerics::{
    eig_sym, propagator, ComplexMatrix, RealSymMatrix, SplitMatrix, SplitVector, C64,
};
use crate::series::{SeriesRecorder, SurvivalSeries};
use crate::state::StateVector;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementProtocol {
    tau: f64,
    n_max: usize,
    snapshots: Vec<usize>,
}

impl MeasurementProtocol {
    pub fn new(tau: f64, n_max: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        Ok(Self {
            tau,
            n_max,
            snapshots: Vec::new(),
        })
    }

    /// Record `|ψ_n^+>` (un-normalised) at these measurement counts.
    pub fn with_snapshots(mut self, mut snapshots: Vec<usize>) -> Self {
        snapshots.sort_unstable();
        snapshots.dedup();
        self.snapshots = snapshots;
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn snapshots(&self) -> &[usize] {
        &self.snapshots
    }

    fn wants_snapshot(&self, n: usize) -> bool {
        self.snapshots.binary_search(&n).is_ok()
    }
}

/// `Ũ = B e^{-iHτ}` on the full site space; rows of detected sites are zero.
#[derive(Clone, Debug)]
pub struct StepOperator {
    matrix: ComplexMatrix,
    detectors: DetectorSet,
    tau: f64,
}

impl StepOperator {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn detectors(&self) -> &DetectorSet {
        &self.detectors
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Block of Ũ acting within the system subspace.
    fn system_block(&self) -> DMatrix<C64> {
        let s = self.detectors.system();
        let m = self.matrix.matrix();
        DMatrix::from_fn(s.len(), s.len(), |i, j| m[(s[i], s[j])])
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

fn projected(mut u: DMatrix<C64>, d: &DetectorSet) -> DMatrix<C64> {
    for &row in d.detected() {
        u.row_mut(row).fill(C64::new(0.0, 0.0));
    }
    u
}

pub fn step_operator(h: &Hamiltonian, d: &DetectorSet, tau: f64) -> Result<StepOperator> {
    check_tau(tau)?;
    if d.n_sites() != h.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: h.n_sites(),
            actual: d.n_sites(),
        });
    }
    let u = propagator(&eig_sym(h.matrix())?, tau)?;
    Ok(StepOperator {
        matrix: ComplexMatrix::new(projected(u.into_inner(), d))?,
        detectors: d.clone(),
        tau,
    })
}

/// Iterate `ψ <- Ũψ` by matrix-vector products and record the survival series.
///
/// The initial state may overlap detector sites: it is evolved for one step
/// before the first projection, and `P_0 = 1` regardless.
pub fn evolve(
    u: &StepOperator,
    psi0: &StateVector,
    proto: &MeasurementProtocol,
) -> Result<SurvivalSeries> {
    psi0.require_normalized()?;
    let n_sites = u.matrix.dim();
    if psi0.dim() != n_sites {
        return Err(Error::DimensionMismatch {
            expected: n_sites,
            actual: psi0.dim(),
        });
    }
    let tau = proto.tau();
    let system = u.detectors.system();
    let mut rec = SeriesRecorder::new();

    // After the first projection the state lives on the system sites only, so
    // later steps use the system block of Ũ.
    let first = u.matrix.apply(psi0.amplitudes());
    let first = DVector::from_iterator(system.len(), system.iter().map(|&s| first[s]));
    let mut psi = SplitVector::from_complex(&first);
    let block = SplitMatrix::new(&u.system_block());
    let mut next = SplitVector::zeros(system.len());

    for n in 1..=proto.n_max() {
        if n > 1 {
            block.apply(&psi, &mut next);
            std::mem::swap(&mut psi, &mut next);
        }
        rec.push(n as f64 * tau, psi.norm_sq())?;
        if proto.wants_snapshot(n) {
            let local = StateVector::from_raw(psi.to_complex());
            rec.snapshot(n, local.embed(n_sites, system)?);
        }
    }
    Ok(rec.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionStats {
    /// `Σ p_n`.
    pub total: f64,
    /// `Σ n p_n / Σ p_n`; absent when nothing was detected.
    pub mean_n: Option<f64>,
}

pub fn first_detection_stats(s: &SurvivalSeries) -> Result<DetectionStats> {
    if s.is_empty() {
        return Err(Error::invalid("empty survival series"));
    }
    let total: f64 = s.detection().sum();
    let weighted: f64 = s.rows().iter().map(|r| r.n as f64 * r.detection).sum();
    Ok(DetectionStats {
        total,
        mean_n: (total >= 1e-12).then(|| weighted / total),
    })
}

/// How the initial wavefunction is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// Position eigenstate at a 1-based (flattened) site.
    Position(usize),
    /// The `s`-th (1-based, ascending energy) eigenstate of the system-block
    /// Hamiltonian `H_S`, embedded in the full lattice.
    Eigenstate(usize),
    /// Explicit amplitudes over all sites.
    Amplitudes(StateVector),
}

impl InitialState {
    pub fn prepare(&self, h: &Hamiltonian, d: &DetectorSet) -> Result<StateVector> {
        let n = h.n_sites();
        match self {
            InitialState::Position(site) => {
                if *site == 0 || *site > n {
                    return Err(Error::SiteOutOfRange {
                        site: *site,
                        n_sites: n,
                    });
                }
                StateVector::position(n, site - 1)
            }
            InitialState::Eigenstate(s) => {
                let system = d.system();
                if *s == 0 || *s > system.len() {
                    return Err(Error::invalid(format!(
                        "eigenstate index {s} out of range 1..={}",
                        system.len()
                    )));
                }
                let hs = RealSymMatrix::new(h.matrix().submatrix(system, system))?;
                let spec = eig_sym(&hs)?;
                let col = spec.eigenvectors().column(s - 1);
                let local: Vec<f64> = col.iter().copied().collect();
                StateVector::from_real(&local)?.embed(n, system)
            }
            InitialState::Amplitudes(state) => {
                if state.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: state.dim(),
                    });
                }
                Ok(state.clone())
            }
        }
    }
}

/// Step factors of a square-lattice case: `Ũ_2D = X ⊗ Y` with
/// `X = B_x e^{-iHτ}` and `Y = B_y e^{-iHτ}` for the N-site open chain `H`.
#[derive(Clone, Debug)]
pub struct SquareStepOperator {
    n: usize,
    case: SquareCase,
    x: DMatrix<C64>,
    y: DMatrix<C64>,
    tau: f64,
}

impl SquareStepOperator {
    pub fn new(n: usize, gamma: f64, case: SquareCase, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let chain = Hamiltonian::chain_open(n, gamma)?;
        let u = propagator(&eig_sym(chain.matrix())?, tau)?.into_inner();
        let (ax, ay) = case.axis_layouts();
        let factor = |axis: crate::lattice::AxisDetectors| -> Result<DMatrix<C64>> {
            let system = axis.system_sites(n);
            let d = DetectorSet::new(n, (0..n).filter(|i| !system.contains(i)))?;
            Ok(projected(u.clone(), &d))
        };
        Ok(Self {
            n,
            case,
            x: factor(ax)?,
            y: factor(ay)?,
            tau,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn case(&self) -> SquareCase {
        self.case
    }

    pub fn factors(&self) -> (&DMatrix<C64>, &DMatrix<C64>) {
        (&self.x, &self.y)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// One step on a flattened state.
    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        let grid = to_grid(psi, self.n);
        from_grid(&(&self.x * grid * self.y.transpose()))
    }
}

// ψ[(lx-1)N + (ly-1)] <-> Ψ[(lx-1, ly-1)]
fn to_grid(psi: &DVector<C64>, n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |i, j| psi[i * n + j])
}

fn from_grid(grid: &DMatrix<C64>) -> DVector<C64> {
    let n = grid.nrows();
    DVector::from_fn(n * n, |k, _| grid[(k / n, k % n)])
}

/// Stroboscopic evolution on the square lattice without forming the
/// `N² × N²` operator: `Ψ <- X Ψ Yᵀ` per step, with the state reshaped to an
/// `N × N` grid.
pub fn evolve_square(
    op: &SquareStepOperator,
    psi0: &StateVector,
    proto: &MeasurementProtocol,
) -> Result<SurvivalSeries> {
    psi0.require_normalized()?;
    let n = op.n;
    if psi0.dim() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            actual: psi0.dim(),
        });
    }
    let yt = op.y.transpose();
    let mut grid = to_grid(psi0.amplitudes(), n);
    let mut scratch = DMatrix::zeros(n, n);
    let mut rec = SeriesRecorder::new();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    for step in 1..=proto.n_max() {
        scratch.gemm(one, &op.x, &grid, zero);
        grid.gemm(one, &scratch, &yt, zero);
        let norm_sq: f64 = grid.iter().map(|z| z.norm_sqr()).sum();
        rec.push(step as f64 * proto.tau(), norm_sq)?;
        if proto.wants_snapshot(step) {
            rec.snapshot(step, StateVector::from_raw(from_grid(&grid)));
        }
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build, DetectorLayout, Geometry, LatticeSpec};

    fn chain(n: usize, layout: DetectorLayout) -> (Hamiltonian, DetectorSet) {
        build(&LatticeSpec::new(Geometry::ChainOpen, n, layout)).unwrap()
    }

    #[test]
    fn tiny_tau_step_is_the_projector() {
        let (h, d) = chain(4, DetectorLayout::End);
        let u = step_operator(&h, &d, 1e-12).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j && i < 3 { 1.0 } else { 0.0 };
                assert!((u.matrix().get(i, j) - C64::new(expected, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn detected_rows_are_zero_and_norm_bounded() {
        let (h, d) = chain(6, DetectorLayout::BothEnds);
        let u = step_operator(&h, &d, 0.7).unwrap();
        for &r in d.detected() {
            assert!(u
                .matrix()
                .matrix()
                .row(r)
                .iter()
                .all(|z| *z == C64::new(0.0, 0.0)));
        }
        let sv = u.matrix().matrix().clone().singular_values();
        assert!(sv.max() <= 1.0 + 1e-9);
    }

    #[test]
    fn rejects_nonpositive_tau() {
        let (h, d) = chain(3, DetectorLayout::End);
        assert!(step_operator(&h, &d, 0.0).is_err());
        assert!(MeasurementProtocol::new(-1.0, 3).is_err());
        assert!(MeasurementProtocol::new(0.1, 0).is_err());
    }

    #[test]
    fn start_on_detector_is_detected_at_once() {
        let (h, d) = chain(3, DetectorLayout::End);
        let u = step_operator(&h, &d, 1e-12).unwrap();
        let psi = StateVector::position(3, 2).unwrap();
        let s = evolve(&u, &psi, &MeasurementProtocol::new(1e-12, 1).unwrap()).unwrap();
        assert!(s.rows()[0].survival < 1e-20);
        assert!((s.rows()[0].detection - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalised_input_is_rejected() {
        let (h, d) = chain(3, DetectorLayout::End);
        let u = step_operator(&h, &d, 0.1).unwrap();
        let psi = StateVector::from_real(&[1.0, 1.0, 0.0]).unwrap();
        assert!(evolve(&u, &psi, &MeasurementProtocol::new(0.1, 2).unwrap()).is_err());
    }

    #[test]
    fn snapshots_match_recorded_norms() {
        let (h, d) = chain(8, DetectorLayout::End);
        let u = step_operator(&h, &d, 0.1).unwrap();
        let psi = StateVector::position(8, 0).unwrap();
        let proto = MeasurementProtocol::new(0.1, 50)
            .unwrap()
            .with_snapshots(vec![10, 50]);
        let s = evolve(&u, &psi, &proto).unwrap();
        assert_eq!(s.snapshots().len(), 2);
        for snap in s.snapshots() {
            assert_eq!(snap.state.dim(), 8);
            assert_eq!(snap.state.amplitudes()[7], C64::new(0.0, 0.0));
            let row = s.rows()[snap.n - 1].survival;
            assert!((snap.state.norm_sq() - row).abs() < 1e-15);
        }
    }

    #[test]
    fn stats_of_empty_and_silent_series() {
        assert!(first_detection_stats(&SurvivalSeries::default()).is_err());
        let s = SurvivalSeries::from_survival([(1.0, 1.0), (2.0, 1.0)]).unwrap();
        let st = first_detection_stats(&s).unwrap();
        assert_eq!(st.total, 0.0);
        assert!(st.mean_n.is_none());
        let s = SurvivalSeries::from_survival([(1.0, 0.5), (2.0, 0.0)]).unwrap();
        let st = first_detection_stats(&s).unwrap();
        assert!((st.mean_n.unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn eigenstate_initial_condition() {
        let (h, d) = chain(6, DetectorLayout::End);
        let psi = InitialState::Eigenstate(1).prepare(&h, &d).unwrap();
        assert!(psi.is_normalized(1e-12));
        assert_eq!(psi.amplitudes()[5], C64::new(0.0, 0.0));
        // lowest mode of the 5-site system: sqrt(2/6) sin(π l / 6)
        for l in 1..=5 {
            let expected = (2.0 / 6.0f64).sqrt() * (std::f64::consts::PI * l as f64 / 6.0).sin();
            assert!((psi.amplitudes()[l - 1].re - expected).abs() < 1e-12);
        }
        assert!(InitialState::Eigenstate(6).prepare(&h, &d).is_err());
        assert!(InitialState::Position(7).prepare(&h, &d).is_err());
    }
}

//! Perturbative non-Hermitian description of the measured dynamics.
//!
//! For small τ, `B e^{-iHτ} B = e^{-i H_eff τ} + O(τ³)` on the system sites
//! with `H_eff = H_S - (iτ/2) V_SD V_DS`, where `V_SD` is the block of `H`
//! coupling system sites to detector sites. The closed-form survival
//! functions below follow from first-order perturbation theory in that
//! anti-Hermitian term, with time in units of 1/γ (hopping set to 1).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{AxisDetectors, DetectorSet, Geometry, Hamiltonian, SquareCase};
use crate::numerics::{eig_sym, expm_complex, ComplexMatrix, RealSymMatrix, C64};
use crate::series::{SeriesRecorder, SurvivalSeries};
use crate::state::StateVector;

#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    matrix: ComplexMatrix,
    tau: f64,
    system: Vec<usize>,
}

impl EffectiveHamiltonian {
    /// Matrix over the system sites, ordered as [`system`](Self::system).
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// 0-based lattice sites indexing the rows of the matrix.
    pub fn system(&self) -> &[usize] {
        &self.system
    }
}

pub fn build_heff(h: &Hamiltonian, d: &DetectorSet, tau: f64) -> Result<EffectiveHamiltonian> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let system = d.system();
    if system.is_empty() {
        return Err(Error::invalid("every site is a detector; no system left"));
    }
    let hs = h.matrix().submatrix(system, system);
    let v = h.matrix().submatrix(system, d.detected());
    let absorb = &v * v.transpose();
    let m = DMatrix::from_fn(system.len(), system.len(), |i, j| {
        C64::new(hs[(i, j)], -0.5 * tau * absorb[(i, j)])
    });
    Ok(EffectiveHamiltonian {
        matrix: ComplexMatrix::new(m)?,
        tau,
        system: system.to_vec(),
    })
}

/// Stroboscopic evolution under `e^{-i H_eff τ}`, sampled at `t = nτ`.
///
/// `psi0` lives on the system sites (see [`StateVector::restrict`]).
pub fn evolve_heff(
    heff: &EffectiveHamiltonian,
    psi0: &StateVector,
    n_max: usize,
) -> Result<SurvivalSeries> {
    psi0.require_normalized()?;
    if psi0.dim() != heff.system.len() {
        return Err(Error::DimensionMismatch {
            expected: heff.system.len(),
            actual: psi0.dim(),
        });
    }
    let step = expm_complex(&heff.matrix.scale(C64::new(0.0, -heff.tau)))?.into_inner();
    let mut psi = psi0.amplitudes().clone();
    let mut next = DVector::zeros(psi.len());
    let mut rec = SeriesRecorder::new();
    for n in 1..=n_max {
        next.gemv(C64::new(1.0, 0.0), &step, &psi, C64::new(0.0, 0.0));
        std::mem::swap(&mut psi, &mut next);
        rec.push(n as f64 * heff.tau, psi.iter().map(|z| z.norm_sqr()).sum())?;
    }
    Ok(rec.finish())
}

/// Dimensionless time scales of the asymptotic forms: `x = tτ/N` and
/// `x' = 2tτ/(N-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticScale {
    pub x: f64,
    pub x_prime: f64,
}

impl AsymptoticScale {
    pub fn new(n: usize, tau: f64, t: f64) -> Self {
        let n = n as f64;
        Self {
            x: t * tau / n,
            x_prime: 2.0 * t * tau / (n - 1.0),
        }
    }
}

fn check_site(site: usize, lo: usize, hi: usize, n_sites: usize) -> Result<()> {
    if site < lo || site > hi {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    Ok(())
}

/// Survival of an open N-site chain with the detector at site N, starting at
/// site `ell` (1-based, `1..=N-1`):
/// `Σ_{s=1}^{N-1} (2/N) sin²(sπℓ/N) exp(-(2τt/N) sin²(sπ/N))`.
pub fn open_chain_survival(n: usize, ell: usize, tau: f64, t: f64) -> Result<f64> {
    check_site(ell, 1, n.saturating_sub(1), n)?;
    let nf = n as f64;
    Ok((1..n)
        .map(|s| {
            let q = s as f64 * PI / nf;
            let weight = (2.0 / nf) * (q * ell as f64).sin().powi(2);
            weight * (-(2.0 * tau * t / nf) * q.sin().powi(2)).exp()
        })
        .sum())
}

/// Survival of an open N-site chain with detectors at sites 1 and N, starting
/// at `ell` in `2..=N-1`. Modes `sqrt(2/(N-1)) sin(sπ(l-1)/(N-1))` decay at
/// `α'_s = (4τ/(N-1)) sin²(sπ/(N-1))`.
pub fn two_end_chain_survival(n: usize, ell: usize, tau: f64, t: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(
            "a chain with two end detectors needs N >= 3",
        ));
    }
    check_site(ell, 2, n - 1, n)?;
    let m = (n - 1) as f64;
    Ok((1..n - 1)
        .map(|s| {
            let q = s as f64 * PI / m;
            let weight = (2.0 / m) * (q * (ell - 1) as f64).sin().powi(2);
            weight * (-(4.0 * tau * t / m) * q.sin().powi(2)).exp()
        })
        .sum())
}

/// Large-N continuum form of [`open_chain_survival`],
/// `(1/√(2πx)) [1 - e^{-ℓ²/2x}]` with `x = tτ/N`.
///
/// Valid for `tτ/N ≫ 1` and `tτ/N³ ≪ 1`. Both band edges (`q ≈ 0` and
/// `q ≈ π`) contribute equally to the mode sum, hence the prefactor
/// `1/√(2πx)` rather than the single-edge `1/√(8πx)`.
pub fn open_chain_survival_asymptotic(ell: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("x must be positive, got {x}")));
    }
    Ok((1.0 - (-ell * ell / (2.0 * x)).exp()) / (2.0 * PI * x).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RingSurvival {
    pub survival: f64,
    /// `t -> ∞` limit: weight of the initial state on measurement-immune modes.
    pub plateau: f64,
}

/// Survival on an N-site ring (N even) measured at site N, starting at
/// `ell` in `1..=N`.
///
/// The system block is the (N-1)-site open chain with modes
/// `φ_k(l) = sqrt(2/N) sin(klπ/N)`. Even `k` vanish on both neighbours of
/// the detector and never decay; odd `k` decay at `α_k = 4τ φ_k(1)²`.
/// Starting on the detector gives zero at this order.
pub fn ring_survival(n: usize, ell: usize, tau: f64, t: f64) -> Result<RingSurvival> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid(format!(
            "ring formulas need even N, got {n}"
        )));
    }
    check_site(ell, 1, n, n)?;
    if ell == n {
        return Ok(RingSurvival {
            survival: 0.0,
            plateau: 0.0,
        });
    }
    let nf = n as f64;
    let mut plateau = 0.0;
    let mut decaying = 0.0;
    for k in 1..n {
        let q = k as f64 * PI / nf;
        let weight = (2.0 / nf) * (q * ell as f64).sin().powi(2);
        if k % 2 == 0 {
            plateau += weight;
        } else {
            let rate = 4.0 * tau * (2.0 / nf) * q.sin().powi(2);
            decaying += weight * (-rate * t).exp();
        }
    }
    Ok(RingSurvival {
        survival: plateau + decaying,
        plateau,
    })
}

/// Large-N form of the ring's decaying part,
/// `(1/(4√(2πx))) [1 - e^{-ℓ²/8x}]` with `x = tτ/N`; both band edges
/// included as in [`open_chain_survival_asymptotic`]. Not valid at `ℓ = N/2`,
/// where every decaying mode has unit weight.
pub fn ring_excess_asymptotic(ell: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("x must be positive, got {x}")));
    }
    Ok((1.0 - (-ell * ell / (8.0 * x)).exp()) / (4.0 * (2.0 * PI * x).sqrt()))
}

fn axis_survival(axis: AxisDetectors, n: usize, ell: usize, tau: f64, t: f64) -> Result<f64> {
    match axis {
        AxisDetectors::Free => {
            check_site(ell, 1, n, n)?;
            Ok(1.0)
        }
        AxisDetectors::End => open_chain_survival(n, ell, tau, t),
        AxisDetectors::BothEnds => two_end_chain_survival(n, ell, tau, t),
    }
}

/// Survival on the open N×N square for a detector case, starting at
/// `(ellx, elly)`: the product of the per-axis chain survivals, since the
/// step operator factorises as `[B_x U] ⊗ [B_y U]`.
pub fn square_survival(
    case: SquareCase,
    n: usize,
    ellx: usize,
    elly: usize,
    tau: f64,
    t: f64,
) -> Result<f64> {
    let (ax, ay) = case.axis_layouts();
    Ok(axis_survival(ax, n, ellx, tau, t)? * axis_survival(ay, n, elly, tau, t)?)
}

/// First-order decay mode `μ_s = ε_s - (i/2) α_s` of `H_eff`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayMode {
    /// 1-based mode label (ascending energy in the numerical route, the
    /// wavenumber in the closed-form routes).
    pub index: usize,
    pub energy: f64,
    pub rate: f64,
    /// Amplitude over the system sites.
    pub profile: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayModes {
    /// Sorted by rate, ascending.
    pub modes: Vec<DecayMode>,
    /// Set when `H_S` has (near-)degenerate levels and no closed-form basis was
    /// available; non-degenerate first-order rates are then unreliable.
    pub degenerate: bool,
}

fn sort_modes(mut modes: Vec<DecayMode>, degenerate: bool) -> DecayModes {
    modes.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(a.index.cmp(&b.index)));
    DecayModes { modes, degenerate }
}

/// Decay modes from first-order perturbation theory.
///
/// Open chains with a block of end detectors or with both ends detected, and
/// even rings detected at site N, use the closed-form sine bases; everything
/// else goes through [`decay_modes_numerical`].
pub fn decay_modes(h: &Hamiltonian, d: &DetectorSet, tau: f64) -> Result<DecayModes> {
    let n = h.n_sites();
    let g = h.gamma();
    let detected = d.detected();
    let sine_modes = |count: usize, period: f64, rate: &dyn Fn(usize, f64) -> f64| {
        let modes = (1..=count)
            .map(|s| {
                let q = s as f64 * PI / period;
                DecayMode {
                    index: s,
                    energy: -2.0 * g * q.cos(),
                    rate: rate(s, q),
                    profile: (1..=count)
                        .map(|l| (2.0 / period).sqrt() * (q * l as f64).sin())
                        .collect(),
                }
            })
            .collect();
        sort_modes(modes, false)
    };

    match h.geometry() {
        Geometry::ChainOpen
            if !detected.is_empty() && detected == (n - detected.len()..n).collect::<Vec<_>>() =>
        {
            let size = (n - detected.len() + 1) as f64;
            Ok(sine_modes(n - detected.len(), size, &|_, q| {
                2.0 * tau * g * g / size * q.sin().powi(2)
            }))
        }
        Geometry::ChainOpen if n >= 3 && detected == [0, n - 1] => {
            let size = (n - 1) as f64;
            Ok(sine_modes(n - 2, size, &|_, q| {
                4.0 * tau * g * g / size * q.sin().powi(2)
            }))
        }
        Geometry::Ring if n.is_multiple_of(2) && detected == [n - 1] => {
            let size = n as f64;
            Ok(sine_modes(n - 1, size, &|k, q| {
                if k % 2 == 0 {
                    0.0
                } else {
                    4.0 * tau * g * g * (2.0 / size) * q.sin().powi(2)
                }
            }))
        }
        _ => decay_modes_numerical(h, d, tau),
    }
}

/// First-order rates `α_s = -2 Im <φ_s|V_eff|φ_s> = τ Σ_α (Σ_l φ_s(l) V_{lα})²`
/// over the numerical eigenbasis of `H_S`.
pub fn decay_modes_numerical(h: &Hamiltonian, d: &DetectorSet, tau: f64) -> Result<DecayModes> {
    let system = d.system();
    if system.is_empty() {
        return Err(Error::invalid("every site is a detector; no system left"));
    }
    let hs = RealSymMatrix::new(h.matrix().submatrix(system, system))?;
    let v = h.matrix().submatrix(system, d.detected());
    let spec = eig_sym(&hs)?;
    let q = spec.eigenvectors();
    let overlaps = q.transpose() * &v;
    let ev = spec.eigenvalues();
    let degenerate = ev
        .as_slice()
        .windows(2)
        .any(|w| (w[1] - w[0]).abs() < 1e-9 * w[1].abs().max(1.0));
    let modes = (0..system.len())
        .map(|s| DecayMode {
            index: s + 1,
            energy: ev[s],
            rate: tau * overlaps.row(s).iter().map(|x| x * x).sum::<f64>(),
            profile: q.column(s).iter().copied().collect(),
        })
        .collect();
    Ok(sort_modes(modes, degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build, DetectorLayout, LatticeSpec};

    fn lattice(g: Geometry, n: usize, layout: DetectorLayout) -> (Hamiltonian, DetectorSet) {
        build(&LatticeSpec::new(g, n, layout)).unwrap()
    }

    fn anti_hermitian(heff: &EffectiveHamiltonian) -> DMatrix<f64> {
        heff.matrix().matrix().map(|z| z.im)
    }

    #[test]
    fn end_detector_absorbs_on_last_system_site() {
        let tau = 0.1;
        let (h, d) = lattice(Geometry::ChainOpen, 6, DetectorLayout::End);
        let heff = build_heff(&h, &d, tau).unwrap();
        let im = anti_hermitian(&heff);
        let mut expected = DMatrix::zeros(5, 5);
        expected[(4, 4)] = -tau / 2.0;
        assert_eq!(im, expected);
        let re = heff.matrix().matrix().map(|z| z.re);
        assert_eq!(re, h.matrix().submatrix(d.system(), d.system()));
    }

    #[test]
    fn both_end_detectors_absorb_on_both_sides() {
        let tau = 0.1;
        let (h, d) = lattice(Geometry::ChainOpen, 6, DetectorLayout::BothEnds);
        let im = anti_hermitian(&build_heff(&h, &d, tau).unwrap());
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 0)] = -tau / 2.0;
        expected[(3, 3)] = -tau / 2.0;
        assert_eq!(im, expected);
    }

    #[test]
    fn ring_couples_the_detector_neighbours() {
        let tau = 0.1;
        let (h, d) = lattice(Geometry::Ring, 6, DetectorLayout::End);
        let im = anti_hermitian(&build_heff(&h, &d, tau).unwrap());
        let mut expected = DMatrix::zeros(5, 5);
        for (i, j) in [(0, 0), (4, 4), (0, 4), (4, 0)] {
            expected[(i, j)] = -tau / 2.0;
        }
        assert_eq!(im, expected);
    }

    #[test]
    fn no_system_sites_is_an_error() {
        let (h, d) = lattice(Geometry::ChainOpen, 2, DetectorLayout::Explicit(vec![1, 2]));
        assert!(build_heff(&h, &d, 0.1).is_err());
    }

    #[test]
    fn uncoupled_system_never_decays() {
        let (h, d) = lattice(Geometry::ChainOpen, 4, DetectorLayout::Explicit(vec![]));
        let heff = build_heff(&h, &d, 0.1).unwrap();
        let psi = StateVector::position(4, 1).unwrap();
        let s = evolve_heff(&heff, &psi, 200).unwrap();
        assert!(s.survival().all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn chain_survival_is_one_at_t0_and_reflection_symmetric() {
        for n in [5, 12, 20] {
            for ell in 1..n {
                assert!((open_chain_survival(n, ell, 0.1, 0.0).unwrap() - 1.0).abs() < 1e-12);
                let a = open_chain_survival(n, ell, 0.1, 137.0).unwrap();
                let b = open_chain_survival(n, n - ell, 0.1, 137.0).unwrap();
                assert!((a - b).abs() < 1e-14, "N={n} ell={ell}");
            }
        }
        assert!(open_chain_survival(5, 5, 0.1, 1.0).is_err());
        assert!(open_chain_survival(5, 0, 0.1, 1.0).is_err());
    }

    #[test]
    fn two_end_chain_is_one_at_t0() {
        for ell in 2..=9 {
            assert!((two_end_chain_survival(10, ell, 0.1, 0.0).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(two_end_chain_survival(10, 1, 0.1, 0.0).is_err());
    }

    #[test]
    fn chain_asymptotic_limits() {
        let x = 7.0;
        let bulk = open_chain_survival_asymptotic(1e6, x).unwrap();
        assert!((bulk - 1.0 / (2.0 * PI * x).sqrt()).abs() < 1e-15);
        // small ℓ, large x: ℓ²/(2x) / sqrt(2πx), the t^{-3/2} regime
        let x = 1e4;
        let edge = open_chain_survival_asymptotic(1.0, x).unwrap();
        let lead = 1.0 / (2.0 * x) / (2.0 * PI * x).sqrt();
        assert!((edge / lead - 1.0).abs() < 1e-4);
        assert!(open_chain_survival_asymptotic(1.0, 0.0).is_err());
    }

    #[test]
    fn chain_asymptotic_matches_finite_sum_in_window() {
        // x = tτ/N = 10, tτ/N³ = 2.5e-4
        let (n, tau, t) = (200, 0.1, 20000.0);
        let exact = open_chain_survival(n, 100, tau, t).unwrap();
        let x = AsymptoticScale::new(n, tau, t).x;
        let approx = open_chain_survival_asymptotic(100.0, x).unwrap();
        assert!((approx / exact - 1.0).abs() < 0.03, "{approx} vs {exact}");
    }

    #[test]
    fn ring_plateaus() {
        let r = ring_survival(20, 10, 0.1, 50.0).unwrap();
        assert!(r.plateau.abs() < 1e-14);
        for ell in [1, 3, 7, 13, 19] {
            let r = ring_survival(20, ell, 0.1, 50.0).unwrap();
            assert!((r.plateau - 0.5).abs() < 1e-12, "ell {ell}: {}", r.plateau);
        }
        let r0 = ring_survival(20, 1, 0.1, 0.0).unwrap();
        assert!((r0.survival - 1.0).abs() < 1e-12);
        assert_eq!(ring_survival(20, 20, 0.1, 5.0).unwrap().survival, 0.0);
        assert!(ring_survival(21, 1, 0.1, 0.0).is_err());
    }

    #[test]
    fn ring_asymptotic_matches_finite_sum_in_window() {
        let (n, tau, t) = (200, 0.1, 20000.0);
        let r = ring_survival(n, 50, tau, t).unwrap();
        let x = AsymptoticScale::new(n, tau, t).x;
        let approx = ring_excess_asymptotic(50.0, x).unwrap();
        let excess = r.survival - r.plateau;
        assert!((approx / excess - 1.0).abs() < 0.05, "{approx} vs {excess}");
    }

    #[test]
    fn ring_asymptotic_exponents() {
        let slope = |ell: f64, x0: f64| {
            let x1 = x0 * 2.0;
            let a = ring_excess_asymptotic(ell, x0).unwrap();
            let b = ring_excess_asymptotic(ell, x1).unwrap();
            (b / a).ln() / 2f64.ln()
        };
        assert!((slope(1e5, 10.0) + 0.5).abs() < 1e-6);
        assert!((slope(1.0, 1e6) + 1.5).abs() < 1e-5);
    }

    #[test]
    fn square_products() {
        for case in SquareCase::ALL {
            let p = square_survival(case, 10, 5, 5, 0.1, 0.0).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
        let t = 300.0;
        let p3 = square_survival(SquareCase::III, 10, 4, 6, 0.1, t).unwrap();
        let expected = open_chain_survival(10, 4, 0.1, t).unwrap()
            * open_chain_survival(10, 6, 0.1, t).unwrap();
        assert!((p3 - expected).abs() < 1e-15);
        let p1 = square_survival(SquareCase::I, 10, 4, 10, 0.1, t).unwrap();
        assert_eq!(p1, open_chain_survival(10, 4, 0.1, t).unwrap());
        assert!(square_survival(SquareCase::V, 10, 1, 5, 0.1, t).is_err());
        assert!(square_survival(SquareCase::III, 10, 5, 10, 0.1, t).is_err());
    }

    #[test]
    fn chain_rates_closed_form() {
        let (h, d) = lattice(Geometry::ChainOpen, 20, DetectorLayout::End);
        let modes = decay_modes(&h, &d, 0.1).unwrap();
        assert!(!modes.degenerate);
        let slowest = &modes.modes[0];
        assert_eq!(slowest.index, 1);
        let expected = 0.2 / 20.0 * (PI / 20.0).sin().powi(2);
        assert!((slowest.rate - expected).abs() < 1e-17);
        for m in &modes.modes {
            let norm: f64 = m.profile.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn numerical_rates_match_closed_forms() {
        for (g, layout, n) in [
            (Geometry::ChainOpen, DetectorLayout::End, 10),
            (Geometry::ChainOpen, DetectorLayout::BlockEnd(3), 10),
            (Geometry::ChainOpen, DetectorLayout::BothEnds, 10),
            (Geometry::Ring, DetectorLayout::End, 10),
        ] {
            let (h, d) = lattice(g, n, layout.clone());
            let a = decay_modes(&h, &d, 0.1).unwrap();
            let b = decay_modes_numerical(&h, &d, 0.1).unwrap();
            assert_eq!(a.modes.len(), b.modes.len());
            for (x, y) in a.modes.iter().zip(&b.modes) {
                assert!((x.rate - y.rate).abs() < 1e-12, "{g:?} {layout:?}");
            }
            // energies agree as sets
            let mut ea: Vec<f64> = a.modes.iter().map(|m| m.energy).collect();
            let mut eb: Vec<f64> = b.modes.iter().map(|m| m.energy).collect();
            ea.sort_by(f64::total_cmp);
            eb.sort_by(f64::total_cmp);
            for (x, y) in ea.iter().zip(&eb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ring_has_immune_modes() {
        let n = 12;
        let (h, d) = lattice(Geometry::Ring, n, DetectorLayout::End);
        let modes = decay_modes(&h, &d, 0.1).unwrap();
        let immune: Vec<_> = modes.modes.iter().filter(|m| m.rate == 0.0).collect();
        assert_eq!(immune.len(), (n - 2) / 2);
        assert!(immune.iter().all(|m| m.index % 2 == 0));
    }

    #[test]
    fn degenerate_custom_spectrum_is_flagged() {
        // two disconnected identical dimers share their levels
        let text = "sites 5\n1 2 -1\n3 4 -1\n4 5 -1\ndetect 5\n";
        let (h, d) = crate::lattice::parse_graph(text).unwrap();
        let modes = decay_modes(&h, &d, 0.1).unwrap();
        assert!(modes.degenerate);
    }

    #[test]
    fn eigenmode_decays_exponentially() {
        let (n, tau) = (12, 0.05);
        let (h, d) = lattice(Geometry::ChainOpen, n, DetectorLayout::End);
        let heff = build_heff(&h, &d, tau).unwrap();
        let modes = decay_modes(&h, &d, tau).unwrap();
        let mode = modes.modes.iter().find(|m| m.index == 3).unwrap();
        let psi = StateVector::from_real(&mode.profile).unwrap();
        let s = evolve_heff(&heff, &psi, 2000).unwrap();
        for row in s.rows().iter().step_by(100) {
            let expected = (-mode.rate * row.t).exp();
            // first-order rate; mode mixing enters at O(τ²)
            assert!((row.survival / expected - 1.0).abs() < 5e-3, "t={}", row.t);
        }
    }
}

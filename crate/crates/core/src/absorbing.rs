//! Continuous-time evolution with a large imaginary potential on the detector
//! sites, `H_NH = H - iγΓ Σ_{α∈D} |α><α|`.
//!
//! Eliminating the detector sites to second order gives the same effective
//! Hamiltonian as the measured dynamics when `τ/2 = 1/(γΓ)`, so the two
//! survival curves agree for `τγ ≪ 1`, `Γ ≫ 1`.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{DetectorSet, Hamiltonian};
use crate::numerics::{expm_complex, ComplexMatrix, C64};
use crate::series::{SeriesRecorder, SurvivalSeries};
use crate::state::StateVector;

/// Γ below this is not "large" for the purposes of [`MappingValidity`].
pub const STRONG_COUPLING_MIN: f64 = 10.0;
/// τγ above this is not "small".
pub const FAST_MEASUREMENT_MAX: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct AbsorbingHamiltonian {
    matrix: ComplexMatrix,
    gamma: f64,
    coupling: f64,
    detected: DetectorSet,
}

impl AbsorbingHamiltonian {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dimensionless Γ.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn detected(&self) -> &DetectorSet {
        &self.detected
    }
}

pub fn build_hnh(h: &Hamiltonian, d: &DetectorSet, coupling: f64) -> Result<AbsorbingHamiltonian> {
    if !(coupling >= 0.0 && coupling.is_finite()) {
        return Err(Error::invalid(format!(
            "Γ must be non-negative, got {coupling}"
        )));
    }
    if d.n_sites() != h.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: h.n_sites(),
            actual: d.n_sites(),
        });
    }
    let mut m = h.matrix().to_complex().into_inner();
    for &a in d.detected() {
        m[(a, a)] -= C64::new(0.0, h.gamma() * coupling);
    }
    Ok(AbsorbingHamiltonian {
        matrix: ComplexMatrix::new(m)?,
        gamma: h.gamma(),
        coupling,
        detected: d.clone(),
    })
}

/// Survival `‖e^{-i H_NH t} ψ(0)‖²` on the uniform grid `t = k·dt`,
/// `k = 1..=n_steps`, using one precomputed step exponential.
pub fn evolve_hnh(
    a: &AbsorbingHamiltonian,
    psi0: &StateVector,
    dt: f64,
    n_steps: usize,
) -> Result<SurvivalSeries> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let times: Vec<f64> = (1..=n_steps).map(|k| k as f64 * dt).collect();
    evolve_hnh_on_grid(a, psi0, &times)
}

/// Survival at arbitrary ascending times `t >= 0`. Segments of equal length
/// share one matrix exponential, so a uniform grid costs a single `expm`.
pub fn evolve_hnh_on_grid(
    a: &AbsorbingHamiltonian,
    psi0: &StateVector,
    times: &[f64],
) -> Result<SurvivalSeries> {
    psi0.require_normalized()?;
    if psi0.dim() != a.matrix.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.matrix.dim(),
            actual: psi0.dim(),
        });
    }
    let generator = a.matrix.scale(C64::new(0.0, -1.0));
    let mut cache: HashMap<u64, ComplexMatrix> = HashMap::new();
    let mut psi: DVector<C64> = psi0.amplitudes().clone();
    let mut rec = SeriesRecorder::new();
    let mut now = 0.0;
    for &t in times {
        if !(t >= now) || !t.is_finite() {
            return Err(Error::invalid(format!(
                "time grid must be ascending and non-negative, got {t} after {now}"
            )));
        }
        let dt = t - now;
        if dt > 0.0 {
            let step = match cache.get(&dt.to_bits()) {
                Some(m) => m,
                None => {
                    let m = expm_complex(&generator.scale(C64::new(dt, 0.0)))?;
                    cache.entry(dt.to_bits()).or_insert(m)
                }
            };
            psi = step.apply(&psi);
        }
        rec.push(t, psi.iter().map(|z| z.norm_sqr()).sum())?;
        now = t;
    }
    Ok(rec.finish())
}

/// `Γ = 2/(γτ)`, the coupling that reproduces measurements every τ.
pub fn gamma_for_tau(gamma: f64, tau: f64) -> Result<f64> {
    if !(gamma > 0.0 && tau > 0.0) {
        return Err(Error::invalid("gamma and tau must be positive"));
    }
    Ok(2.0 / (gamma * tau))
}

/// Inverse of [`gamma_for_tau`].
pub fn tau_for_gamma(gamma: f64, coupling: f64) -> Result<f64> {
    if !(gamma > 0.0 && coupling > 0.0) {
        return Err(Error::invalid("gamma and Γ must be positive"));
    }
    Ok(2.0 / (gamma * coupling))
}

/// Whether the measurement/absorption correspondence is expected to hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MappingValidity {
    /// Γ ≥ [`STRONG_COUPLING_MIN`].
    pub strong_coupling: bool,
    /// τγ ≤ [`FAST_MEASUREMENT_MAX`].
    pub fast_measurement: bool,
}

impl MappingValidity {
    pub fn assess(gamma: f64, tau: f64, coupling: f64) -> Self {
        Self {
            strong_coupling: coupling >= STRONG_COUPLING_MIN,
            fast_measurement: tau * gamma <= FAST_MEASUREMENT_MAX,
        }
    }

    pub fn holds(&self) -> bool {
        self.strong_coupling && self.fast_measurement
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub n: usize,
    pub potential: f64,
    pub ell: usize,
    pub max_rel_dev: f64,
    pub max_abs_dev: f64,
    /// Time of the largest relative deviation.
    pub t_at_max: f64,
}

/// Compare an open N-site chain with `-iV` on site N against the (N-1)-site
/// chain with `-i/V` on site N-1, both started at site `ell` and sampled at
/// `t = k·dt` for `k = 1..=n_steps`. Hopping is 1.
pub fn strong_weak_corollary_check(
    n: usize,
    potential: f64,
    ell: usize,
    dt: f64,
    n_steps: usize,
) -> Result<CorollaryReport> {
    if n < 3 {
        return Err(Error::invalid("corollary needs N >= 3"));
    }
    if !(potential > 0.0 && potential.is_finite()) {
        return Err(Error::invalid(format!(
            "potential must be positive, got {potential}"
        )));
    }
    if ell == 0 || ell >= n {
        return Err(Error::SiteOutOfRange {
            site: ell,
            n_sites: n - 1,
        });
    }
    let strong_h = Hamiltonian::chain_open(n, 1.0)?;
    let strong = build_hnh(&strong_h, &DetectorSet::new(n, [n - 1])?, potential)?;
    let weak_h = Hamiltonian::chain_open(n - 1, 1.0)?;
    let weak = build_hnh(&weak_h, &DetectorSet::new(n - 1, [n - 2])?, 1.0 / potential)?;

    let a = evolve_hnh(&strong, &StateVector::position(n, ell - 1)?, dt, n_steps)?;
    let b = evolve_hnh(&weak, &StateVector::position(n - 1, ell - 1)?, dt, n_steps)?;
    let cmp = crate::analysis::compare_series(&a, &b)?;
    Ok(CorollaryReport {
        n,
        potential,
        ell,
        max_rel_dev: cmp.max_rel_err,
        max_abs_dev: cmp.max_abs_err,
        t_at_max: a.rows()[cmp.argmax_n - 1].t,
    })
}

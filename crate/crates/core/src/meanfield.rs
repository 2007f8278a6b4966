//! Closed-form solution of the complete-graph model with one detector.
//!
//! With `H = -Σ_{j,k} |j><k|` (γ = 1, diagonal included) the propagator is
//! `e^{-iHτ} = I - H/c` with `c = N/(e^{iτN} - 1)`, so `Ũ = B(I - H/c)` has
//! eigenvalues `0`, `λ₂ = 1 + (N-1)/c` and `1` (N-2 times). The detector sits
//! at site N; sites are 1-based in the public API.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::series::{SeriesRow, SurvivalSeries};
use crate::state::StateVector;

// |e^{iτN} - 1| below this counts as τN ≡ 0 (mod 2π).
const RESONANCE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanFieldSolution {
    pub n: usize,
    pub tau: f64,
    /// `N/(e^{iτN} - 1)`; absent when τN is a multiple of 2π and `U_τ = I`.
    #[serde(skip)]
    pub c: Option<C64>,
    /// `(2/N)(1 - 1/N)(1 - cos τN)`; the per-step decay `|λ₂|² = 1 - x`.
    pub x: f64,
    /// `(2/N)(1 - cos τN)`, the large-N rate.
    pub xi: f64,
    #[serde(skip)]
    pub lambda2: C64,
}

pub fn mf_solve(n: usize, tau: f64) -> Result<MeanFieldSolution> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "mean-field model needs N >= 2, got {n}"
        )));
    }
    if !tau.is_finite() {
        return Err(Error::invalid("tau must be finite"));
    }
    let nf = n as f64;
    let theta = tau * nf;
    let phase_minus_one = C64::from_polar(1.0, theta) - 1.0;
    if phase_minus_one.norm() < RESONANCE_TOL {
        return Ok(MeanFieldSolution {
            n,
            tau,
            c: None,
            x: 0.0,
            xi: 0.0,
            lambda2: C64::new(1.0, 0.0),
        });
    }
    let one_minus_cos = 1.0 - theta.cos();
    Ok(MeanFieldSolution {
        n,
        tau,
        c: Some(nf / phase_minus_one),
        x: (2.0 / nf) * (1.0 - 1.0 / nf) * one_minus_cos,
        xi: (2.0 / nf) * one_minus_cos,
        // 1 + (N-1)/c without dividing by c
        lambda2: 1.0 + phase_minus_one * ((nf - 1.0) / nf),
    })
}

impl MeanFieldSolution {
    /// `e^{-iHτ} = I - H/c`.
    pub fn propagator(&self) -> ComplexMatrix {
        let n = self.n;
        let hop = match self.c {
            // -H/c with H = -J
            Some(c) => 1.0 / c,
            None => C64::new(0.0, 0.0),
        };
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + hop } else { hop });
        ComplexMatrix::new(m).expect("finite mean-field propagator")
    }

    /// Characteristic period `2π/N` in τ.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.n as f64
    }
}

/// Exact first-detection and survival series for a start at `ell`.
///
/// For `ell != N`: `p_n = x/(N-1) (1-x)^{n-1}` and
/// `P_n = 1 - (1 - (1-x)^n)/(N-1)`. For `ell == N`: `p_1 = 1 - x`,
/// `P_1 = x`, and for `n > 1` `p_n = x² (1-x)^{n-2}`, `P_n = x (1-x)^{n-1}`.
pub fn mf_series(sol: &MeanFieldSolution, ell: usize, n_max: usize) -> Result<SurvivalSeries> {
    let n = sol.n;
    if ell == 0 || ell > n {
        return Err(Error::SiteOutOfRange {
            site: ell,
            n_sites: n,
        });
    }
    let x = sol.x;
    let nm1 = (n - 1) as f64;
    let rows = (1..=n_max)
        .map(|k| {
            let kf = k as i32;
            let (survival, detection) = if ell != n {
                (
                    1.0 - (1.0 - (1.0 - x).powi(kf)) / nm1,
                    x / nm1 * (1.0 - x).powi(kf - 1),
                )
            } else if k == 1 {
                (x, 1.0 - x)
            } else {
                (x * (1.0 - x).powi(kf - 1), x * x * (1.0 - x).powi(kf - 2))
            };
            SeriesRow {
                n: k,
                t: k as f64 * sol.tau,
                survival,
                detection,
            }
        })
        .collect();
    Ok(SurvivalSeries::from_rows(rows))
}

/// `Σ_n p_n` over all n: `1/(N-1)` off the detector, 1 on it.
pub fn mf_total_detection(n: usize, ell: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "mean-field model needs N >= 2, got {n}"
        )));
    }
    if ell == 0 || ell > n {
        return Err(Error::SiteOutOfRange {
            site: ell,
            n_sites: n,
        });
    }
    Ok(if ell == n { 1.0 } else { 1.0 / (n - 1) as f64 })
}

/// Long-time limit of `|ψ_n^+>` for a start at `ell != N`:
/// `(N-2)/(N-1)` on `ell`, `-1/(N-1)` on the other system sites, 0 on N.
/// It has zero overlap with the uniform state, so `Ũ` leaves it unchanged.
pub fn mf_steady_state(n: usize, ell: usize) -> Result<StateVector> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "mean-field model needs N >= 2, got {n}"
        )));
    }
    if ell == n {
        return Err(Error::invalid(
            "starting on the detector leads to certain detection; no steady state",
        ));
    }
    if ell == 0 || ell > n {
        return Err(Error::SiteOutOfRange {
            site: ell,
            n_sites: n,
        });
    }
    let nm1 = (n - 1) as f64;
    let v: Vec<f64> = (1..=n)
        .map(|j| {
            if j == n {
                0.0
            } else if j == ell {
                (n - 2) as f64 / nm1
            } else {
                -1.0 / nm1
            }
        })
        .collect();
    StateVector::from_real(&v)
}

/// Eigenvalue with its right and left eigenvectors.
pub type EigenTriple = (C64, DVector<C64>, DVector<C64>);

/// Biorthogonal eigensystem of `Ũ`: `(λ_s, |R_s>, <L_s|)` with
/// `Ũ = Σ λ_s |R_s><L_s|` and `<L_s|R_{s'}> = δ_{ss'}`.
///
/// `<L_s|` is returned as the row of coefficients, not conjugated again.
pub fn mf_eigensystem(sol: &MeanFieldSolution) -> Result<Vec<EigenTriple>> {
    let c = sol
        .c
        .ok_or_else(|| Error::invalid("τN is a multiple of 2π; Ũ = B has no c"))?;
    let n = sol.n;
    let nf = n as f64;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(n);

    let last = one - c - nf;
    let r1 = DVector::from_fn(n, |i, _| if i + 1 == n { one } else { one / last });
    let l1 = DVector::from_fn(n, |i, _| if i + 1 == n { one } else { zero });
    out.push((zero, r1, l1));

    let r2 = DVector::from_fn(n, |i, _| if i + 1 == n { zero } else { one / (nf - 1.0) });
    let l2 = DVector::from_fn(n, |i, _| {
        if i + 1 == n {
            (nf - 1.0) / (c + nf - 1.0)
        } else {
            one
        }
    });
    out.push((sol.lambda2, r2, l2));

    for s in 3..=n {
        let omega = C64::from_polar(1.0, 2.0 * PI * (s - 2) as f64 / (nf - 1.0));
        let r = DVector::from_fn(n, |i, _| {
            if i + 1 == n {
                zero
            } else {
                omega.powu(i as u32) / (nf - 1.0)
            }
        });
        let l = DVector::from_fn(n, |i, _| {
            if i + 1 == n {
                zero
            } else {
                omega.conj().powu(i as u32)
            }
        });
        out.push((one, r, l));
    }
    Ok(out)
}

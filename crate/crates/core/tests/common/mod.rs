#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub const TAYLOR_ORDER: usize = 30;

/// `Σ_{k≤30} A^k/k!` applied to `A/m` and raised to the `m`-th power, with
/// `m` chosen so each piece has 1-norm at most 1/2.
pub fn taylor_expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let pieces = ((2.0 * norm).ceil() as usize).max(1);
    let piece = a / C64::new(pieces as f64, 0.0);
    let mut sum = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=TAYLOR_ORDER {
        term = &term * &piece / C64::new(k as f64, 0.0);
        sum += &term;
    }
    let mut out = DMatrix::<C64>::identity(n, n);
    for _ in 0..pieces {
        out = &out * &sum;
    }
    out
}

/// `e^{-iHt}` for real symmetric `H`.
pub fn taylor_propagator(h: &DMatrix<f64>, t: f64) -> DMatrix<C64> {
    taylor_expm(&h.map(|x| C64::new(0.0, -x * t)))
}

pub fn chain(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { -1.0 } else { 0.0 })
}

/// Survival after each of `n_max` measurements, by brute-force
/// `ψ <- B e^{-iHτ} ψ` with the Taylor propagator.
pub fn oracle_survival(
    h: &DMatrix<f64>,
    detected: &[usize],
    start: usize,
    tau: f64,
    n_max: usize,
) -> Vec<f64> {
    let mut u = taylor_propagator(h, tau);
    for &d in detected {
        u.row_mut(d).fill(C64::new(0.0, 0.0));
    }
    let mut psi = nalgebra::DVector::<C64>::zeros(h.nrows());
    psi[start] = C64::new(1.0, 0.0);
    (0..n_max)
        .map(|_| {
            psi = &u * &psi;
            psi.norm_squared()
        })
        .collect()
}

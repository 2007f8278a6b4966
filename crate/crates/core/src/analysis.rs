//! Power-law fits, plateau estimates and pointwise series comparison.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Geometry, SquareCase};
use crate::series::SurvivalSeries;

/// Fewest points accepted by the fits.
pub const MIN_FIT_POINTS: usize = 5;
/// Floor of the relative-error denominator.
pub const REL_ERR_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Intercept of `log(P - plateau)` against `log t`.
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentialFit {
    /// Decay rate `κ` in `P - plateau ≈ A e^{-κ t}`.
    pub rate: f64,
    /// `log A`.
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub value: f64,
    pub std: f64,
    pub n_points: usize,
}

/// Pointwise errors of `b` against the reference `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Measurement index of the largest relative error.
    pub argmax_n: usize,
    pub rms_err: f64,
}

struct LineFit {
    slope: f64,
    intercept: f64,
    slope_stderr: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if xs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
    }
}

/// `(t, log(P - plateau))` for rows in the window, failing on the first row
/// whose excess is not positive.
fn log_excess(
    s: &SurvivalSeries,
    window: (f64, f64),
    plateau: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t_min, t_max) = window;
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::Window(format!(
            "window ({t_min}, {t_max}) must satisfy 0 < t_min < t_max"
        )));
    }
    let (first, last) = match (s.rows().first(), s.rows().last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(Error::Window("empty series".into())),
    };
    if t_min < first || t_max > last {
        return Err(Error::Window(format!(
            "window ({t_min}, {t_max}) outside series range ({first}, {last})"
        )));
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for r in s.rows().iter().filter(|r| r.t >= t_min && r.t <= t_max) {
        let excess = r.survival - plateau;
        if !(excess > 0.0) {
            return Err(Error::Window(format!(
                "P - plateau = {excess:e} is not positive at n = {}",
                r.n
            )));
        }
        ts.push(r.t);
        ys.push(excess.ln());
    }
    if ts.len() < MIN_FIT_POINTS {
        return Err(Error::Window(format!(
            "{} points in window, need at least {MIN_FIT_POINTS}",
            ts.len()
        )));
    }
    Ok((ts, ys))
}

/// Least-squares fit of `log(P - plateau)` against `log t` over rows with
/// `t_min <= t <= t_max`.
pub fn fit_power_law(s: &SurvivalSeries, window: (f64, f64), plateau: f64) -> Result<PowerLawFit> {
    let (ts, ys) = log_excess(s, window, plateau)?;
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let fit = ols(&xs, &ys);
    Ok(PowerLawFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
        window,
        n_points: xs.len(),
    })
}

/// Least-squares fit of `log(P - plateau)` against `t`.
pub fn fit_exponential(
    s: &SurvivalSeries,
    window: (f64, f64),
    plateau: f64,
) -> Result<ExponentialFit> {
    let (ts, ys) = log_excess(s, window, plateau)?;
    let fit = ols(&ts, &ys);
    Ok(ExponentialFit {
        rate: -fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
        window,
        n_points: ts.len(),
    })
}

/// Mean and standard deviation of `P_n` over the last `tail_fraction` of the
/// series.
pub fn estimate_plateau(s: &SurvivalSeries, tail_fraction: f64) -> Result<Plateau> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::invalid(format!(
            "tail fraction must lie in (0, 0.5], got {tail_fraction}"
        )));
    }
    let count = (s.len() as f64 * tail_fraction).floor() as usize;
    if count < 2 {
        return Err(Error::Window(format!(
            "series of {} rows is too short for a tail fraction of {tail_fraction}",
            s.len()
        )));
    }
    let tail = &s.rows()[s.len() - count..];
    let mean = tail.iter().map(|r| r.survival).sum::<f64>() / count as f64;
    let var = tail
        .iter()
        .map(|r| (r.survival - mean).powi(2))
        .sum::<f64>()
        / count as f64;
    Ok(Plateau {
        value: mean,
        std: var.sqrt(),
        n_points: count,
    })
}

/// Pointwise survival errors. Both series must share the same grid of
/// measurement times; `max_rel_err` divides by `max(|a_n|, 1e-15)`.
pub fn compare_series(a: &SurvivalSeries, b: &SurvivalSeries) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            row: a.len().min(b.len()) + 1,
            left: a.len() as f64,
            right: b.len() as f64,
        });
    }
    for (ra, rb) in a.rows().iter().zip(b.rows()) {
        let scale = ra.t.abs().max(rb.t.abs()).max(1.0);
        if ra.n != rb.n || (ra.t - rb.t).abs() > 1e-9 * scale {
            return Err(Error::GridMismatch {
                row: ra.n,
                left: ra.t,
                right: rb.t,
            });
        }
    }
    Ok(metrics(
        a.rows()
            .iter()
            .zip(b.rows())
            .map(|(ra, rb)| (ra.n, ra.survival, rb.survival)),
    ))
}

/// Compare on the grid of `a`, reading `b` as a step function of time.
pub fn compare_series_resampled(
    a: &SurvivalSeries,
    b: &SurvivalSeries,
) -> Result<ComparisonReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Window("cannot compare an empty series".into()));
    }
    Ok(metrics(a.rows().iter().map(|r| {
        (r.n, r.survival, b.survival_at(r.t + 1e-12 * r.t.abs()))
    })))
}

fn metrics(points: impl Iterator<Item = (usize, f64, f64)>) -> ComparisonReport {
    let mut report = ComparisonReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        argmax_n: 0,
        rms_err: 0.0,
    };
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for (n, pa, pb) in points {
        let abs = (pa - pb).abs();
        let rel = abs / pa.abs().max(REL_ERR_FLOOR);
        if count == 0 || rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.argmax_n = n;
        }
        report.max_abs_err = report.max_abs_err.max(abs);
        sum_sq += abs * abs;
        count += 1;
    }
    if count > 0 {
        report.rms_err = (sum_sq / count as f64).sqrt();
    }
    report
}

/// Exponent the survival excess should follow in the intermediate window.
pub fn expected_exponent(
    geometry: Geometry,
    case: Option<SquareCase>,
    at_edge: bool,
) -> Option<f64> {
    match (geometry, case) {
        (Geometry::ChainOpen, _) => Some(if at_edge { -1.5 } else { -0.5 }),
        (Geometry::Ring, _) => Some(if at_edge { -1.5 } else { -0.5 }),
        (Geometry::SquareOpen, Some(SquareCase::III)) => Some(-1.0),
        (Geometry::SquareOpen, Some(SquareCase::IV)) => Some(-3.0),
        (Geometry::SquareOpen, Some(SquareCase::V)) => Some(-2.0),
        _ => None,
    }
}

/// Default fit window in `t`, expressed through `x = tτ/N`: the power laws
/// need `x` large but `x/N²` small. Chains use `x ∈ [5, 50]`, or `[10, 50]`
/// next to a boundary; the square lattice uses `x ∈ [2, 10]`. The upper end
/// is capped at `N²/10`.
pub fn default_window(geometry: Geometry, n: usize, tau: f64, at_edge: bool) -> (f64, f64) {
    let (lo, hi) = match geometry {
        Geometry::SquareOpen => (2.0, 10.0),
        _ if at_edge => (10.0, 50.0),
        _ => (5.0, 50.0),
    };
    let hi = f64::min(hi, (n * n) as f64 / 10.0).max(lo * 2.0);
    let scale = n as f64 / tau;
    (lo * scale, hi * scale)
}

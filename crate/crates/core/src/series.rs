//! Survival/first-detection series and their CSV form.
//!
//! CSV schema: header `n,t,P,p`, one row per measurement, floats written in
//! shortest round-trip form. Snapshots use `site,re,im,prob` with 1-based
//! sites.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Slack allowed on probabilities before they count as a numerical bug.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: usize,
    pub t: f64,
    /// Survival probability after the n-th measurement.
    pub survival: f64,
    /// First-detection probability at the n-th measurement.
    pub detection: f64,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub n: usize,
    pub state: StateVector,
}

/// Survival record with `P_0 = 1` implied.
#[derive(Clone, Debug, Default)]
pub struct SurvivalSeries {
    rows: Vec<SeriesRow>,
    snapshots: Vec<Snapshot>,
}

impl SurvivalSeries {
    pub fn rows(&self) -> &[SeriesRow] {
        &self.rows
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn survival(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.survival)
    }

    pub fn detection(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.detection)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.t)
    }

    /// Survival at the last row with `t <= time`, or 1 before the first row.
    pub fn survival_at(&self, time: f64) -> f64 {
        let idx = self.rows.partition_point(|r| r.t <= time);
        if idx == 0 {
            1.0
        } else {
            self.rows[idx - 1].survival
        }
    }

    /// Build a series from survival values, checking and clamping them.
    pub fn from_survival(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut rec = SeriesRecorder::new();
        for (t, p) in points {
            rec.push(t, p)?;
        }
        Ok(rec.finish())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t,P,p\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.n, r.t, r.survival, r.detection);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "n,t,P,p" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header `n,t,P,p`".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| Error::Parse {
                line: idx + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err("expected 4 columns"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err("invalid number"));
            rows.push(SeriesRow {
                n: f[0].trim().parse().map_err(|_| err("invalid row index"))?,
                t: num(f[1])?,
                survival: num(f[2])?,
                detection: num(f[3])?,
            });
        }
        Ok(Self {
            rows,
            snapshots: Vec::new(),
        })
    }

    /// Multiply every time stamp by `factor` (e.g. to undo a `γ` rescaling).
    pub fn rescale_time(mut self, factor: f64) -> Self {
        for r in &mut self.rows {
            r.t *= factor;
        }
        self
    }

    /// Rows already known to be consistent (closed-form series).
    pub(crate) fn from_rows(rows: Vec<SeriesRow>) -> Self {
        Self {
            rows,
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn push_snapshot(&mut self, n: usize, state: StateVector) {
        self.snapshots.push(Snapshot { n, state });
    }
}

/// Incremental builder that enforces the probability bookkeeping: survival
/// never below `-1e-9`, never rising by more than `1e-9`, clamped into
/// `[0, 1]` afterwards.
#[derive(Debug)]
pub struct SeriesRecorder {
    series: SurvivalSeries,
    previous: f64,
}

impl Default for SeriesRecorder {
    fn default() -> Self {
        Self::new()
    }
}

impl SeriesRecorder {
    pub fn new() -> Self {
        Self {
            series: SurvivalSeries::default(),
            previous: 1.0,
        }
    }

    pub fn push(&mut self, t: f64, survival: f64) -> Result<()> {
        let n = self.series.rows.len() + 1;
        if !(survival >= -PROBABILITY_SLACK) || survival > 1.0 + PROBABILITY_SLACK {
            return Err(Error::Consistency {
                n,
                quantity: "P_n",
                value: survival,
            });
        }
        let detection = self.previous - survival;
        if detection < -PROBABILITY_SLACK {
            return Err(Error::Consistency {
                n,
                quantity: "p_n",
                value: detection,
            });
        }
        let survival = survival.clamp(0.0, 1.0);
        self.series.rows.push(SeriesRow {
            n,
            t,
            survival,
            detection: detection.clamp(0.0, 1.0),
        });
        self.previous = survival;
        Ok(())
    }

    pub fn snapshot(&mut self, n: usize, state: StateVector) {
        self.series.push_snapshot(n, state);
    }

    pub fn finish(self) -> SurvivalSeries {
        self.series
    }
}

/// Snapshot CSV (`site,re,im,prob`, 1-based sites, un-normalised amplitudes).
pub fn snapshot_csv(state: &StateVector) -> String {
    let mut out = String::from("site,re,im,prob\n");
    for (i, z) in state.amplitudes().iter().enumerate() {
        let _ = writeln!(out, "{},{:?},{:?},{:?}", i + 1, z.re, z.im, z.norm_sqr());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorder_differences_and_clamps() {
        let s = SurvivalSeries::from_survival([(0.1, 0.9), (0.2, 0.5), (0.3, -1e-12)]).unwrap();
        let p: Vec<f64> = s.detection().collect();
        assert!((p[0] - 0.1).abs() < 1e-15);
        assert!((p[1] - 0.4).abs() < 1e-15);
        assert_eq!(s.rows()[2].survival, 0.0);
    }

    #[test]
    fn recorder_rejects_growth_and_negatives() {
        let grow = SurvivalSeries::from_survival([(1.0, 0.5), (2.0, 0.6)]).unwrap_err();
        assert!(matches!(
            grow,
            Error::Consistency {
                n: 2,
                quantity: "p_n",
                ..
            }
        ));
        let neg = SurvivalSeries::from_survival([(1.0, -1e-6)]).unwrap_err();
        assert!(matches!(
            neg,
            Error::Consistency {
                n: 1,
                quantity: "P_n",
                ..
            }
        ));
        let nan = SurvivalSeries::from_survival([(1.0, f64::NAN)]).unwrap_err();
        assert!(matches!(nan, Error::Consistency { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let s =
            SurvivalSeries::from_survival([(0.1, 0.75), (0.2, 1.0 / 3.0), (0.3, 1e-20)]).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("n,t,P,p\n1,0.1,0.75,0.25\n"));
        let back = SurvivalSeries::from_csv(&text).unwrap();
        assert_eq!(back.rows(), s.rows());
    }

    #[test]
    fn survival_lookup() {
        let s = SurvivalSeries::from_survival([(1.0, 0.9), (2.0, 0.8)]).unwrap();
        assert_eq!(s.survival_at(0.5), 1.0);
        assert_eq!(s.survival_at(1.5), 0.9);
        assert_eq!(s.survival_at(9.0), 0.8);
    }
}

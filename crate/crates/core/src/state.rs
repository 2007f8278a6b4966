use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::C64;

/// Complex amplitudes over lattice sites with a cached squared norm.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    norm_sq: f64,
}

impl StateVector {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("state vector must have at least one site"));
        }
        if amplitudes
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::invalid("state vector has non-finite amplitudes"));
        }
        Ok(Self::from_raw(amplitudes))
    }

    pub(crate) fn from_raw(amplitudes: DVector<C64>) -> Self {
        let norm_sq = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        Self {
            amplitudes,
            norm_sq,
        }
    }

    /// Position eigenstate at the 0-based `site`.
    pub fn position(n_sites: usize, site: usize) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::SiteOutOfRange {
                site: site + 1,
                n_sites,
            });
        }
        let mut v = DVector::zeros(n_sites);
        v[site] = C64::new(1.0, 0.0);
        Ok(Self::from_raw(v))
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.norm_sq == 0.0 {
            return Err(Error::invalid("cannot normalise the zero state"));
        }
        Ok(Self::from_raw(
            &self.amplitudes / C64::new(self.norm_sq.sqrt(), 0.0),
        ))
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq - 1.0).abs() <= tol
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if !self.is_normalized(1e-12) {
            return Err(Error::invalid(format!(
                "initial state must be normalised, |psi|^2 = {}",
                self.norm_sq
            )));
        }
        Ok(())
    }

    /// Amplitudes on the given 0-based sites, in order.
    pub fn restrict(&self, sites: &[usize]) -> StateVector {
        Self::from_raw(DVector::from_iterator(
            sites.len(),
            sites.iter().map(|&s| self.amplitudes[s]),
        ))
    }

    /// Inverse of [`restrict`](Self::restrict): place amplitudes on `sites` of
    /// an `n_sites` lattice, zero elsewhere.
    pub fn embed(&self, n_sites: usize, sites: &[usize]) -> Result<StateVector> {
        if sites.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: sites.len(),
                actual: self.dim(),
            });
        }
        let mut v = DVector::zeros(n_sites);
        for (k, &s) in sites.iter().enumerate() {
            v[s] = self.amplitudes[k];
        }
        Ok(Self::from_raw(v))
    }

    /// Parse `site,re,im[,prob]` rows (1-based sites, header required). The
    /// result is normalised.
    pub fn from_csv(text: &str, n_sites: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim().starts_with("site,re,im") => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header `site,re,im`".into(),
                })
            }
        }
        let mut v = DVector::zeros(n_sites);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: String| Error::Parse {
                line: idx + 1,
                message: m,
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() < 3 {
                return Err(err("expected at least 3 columns".into()));
            }
            let site: usize = f[0]
                .parse()
                .map_err(|_| err(format!("bad site `{}`", f[0])))?;
            if site == 0 || site > n_sites {
                return Err(err(format!("site {site} out of range 1..={n_sites}")));
            }
            let re: f64 = f[1]
                .parse()
                .map_err(|_| err(format!("bad number `{}`", f[1])))?;
            let im: f64 = f[2]
                .parse()
                .map_err(|_| err(format!("bad number `{}`", f[2])))?;
            v[site - 1] = C64::new(re, im);
        }
        Self::new(v)?.normalized()
    }
}

//! Tight-binding Hamiltonians and detector layouts.
//!
//! All user-facing site numbers are 1-based. Internally sites are 0-based;
//! the conversion happens only in this module. On the square lattice the site
//! `(l_x, l_y)` with `1 <= l_x, l_y <= N` is flattened to
//! `(l_x - 1) * N + l_y` (1-based), i.e. row-major with `l_x` as the slow
//! index. This matches the Kronecker convention of [`crate::numerics::kron`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealSymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    ChainOpen,
    Ring,
    SquareOpen,
    /// Every site hops to every site, including itself (mean-field model).
    Complete,
    Custom,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::ChainOpen => "chain-open",
            Geometry::Ring => "ring",
            Geometry::SquareOpen => "square-open",
            Geometry::Complete => "complete",
            Geometry::Custom => "custom",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chain-open" => Geometry::ChainOpen,
            "ring" => Geometry::Ring,
            "square-open" => Geometry::SquareOpen,
            "complete" => Geometry::Complete,
            "custom" => Geometry::Custom,
            other => return Err(Error::invalid(format!("unknown geometry `{other}`"))),
        })
    }
}

/// Detector arrangements on the open square lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SquareCase {
    /// Column `l_x = N`.
    I,
    /// Columns `l_x = 1` and `l_x = N`.
    II,
    /// Row `l_y = N` and column `l_x = N`.
    III,
    /// Columns `l_x = 1`, `l_x = N` and row `l_y = N`.
    IV,
    /// All four edges.
    V,
}

impl SquareCase {
    pub const ALL: [SquareCase; 5] = [
        SquareCase::I,
        SquareCase::II,
        SquareCase::III,
        SquareCase::IV,
        SquareCase::V,
    ];

    /// Which 1D detector arrangement each axis carries: the propagator of the
    /// case factorises as `[B_x U] ⊗ [B_y U]`.
    pub fn axis_layouts(self) -> (AxisDetectors, AxisDetectors) {
        use AxisDetectors::*;
        match self {
            SquareCase::I => (End, Free),
            SquareCase::II => (BothEnds, Free),
            SquareCase::III => (End, End),
            SquareCase::IV => (BothEnds, End),
            SquareCase::V => (BothEnds, BothEnds),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SquareCase::I => "i",
            SquareCase::II => "ii",
            SquareCase::III => "iii",
            SquareCase::IV => "iv",
            SquareCase::V => "v",
        }
    }
}

/// Per-axis detector arrangement of a factorised square-lattice case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisDetectors {
    Free,
    End,
    BothEnds,
}

impl AxisDetectors {
    /// 0-based system sites of an `n`-site axis.
    pub fn system_sites(self, n: usize) -> Vec<usize> {
        match self {
            AxisDetectors::Free => (0..n).collect(),
            AxisDetectors::End => (0..n - 1).collect(),
            AxisDetectors::BothEnds => (1..n - 1).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorLayout {
    /// Site `N`.
    End,
    /// Sites `1` and `N`.
    BothEnds,
    /// The last `n_d` sites.
    BlockEnd(usize),
    /// One 1-based site.
    Single(usize),
    Square(SquareCase),
    /// Arbitrary 1-based (flattened) sites.
    Explicit(Vec<usize>),
}

impl FromStr for DetectorLayout {
    type Err = Error;

    /// Parses `end`, `both-ends`, `block-end:K`, `single:I`, `2d-case-i` ..
    /// `2d-case-v`, or `explicit:I,J,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown detector layout `{s}`"));
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        Ok(match s {
            "end" => DetectorLayout::End,
            "both-ends" => DetectorLayout::BothEnds,
            "2d-case-i" => DetectorLayout::Square(SquareCase::I),
            "2d-case-ii" => DetectorLayout::Square(SquareCase::II),
            "2d-case-iii" => DetectorLayout::Square(SquareCase::III),
            "2d-case-iv" => DetectorLayout::Square(SquareCase::IV),
            "2d-case-v" => DetectorLayout::Square(SquareCase::V),
            _ => match s.split_once(':') {
                Some(("block-end", v)) => DetectorLayout::BlockEnd(num(v)?),
                Some(("single", v)) => DetectorLayout::Single(num(v)?),
                Some(("explicit", v)) => {
                    DetectorLayout::Explicit(v.split(',').map(num).collect::<Result<Vec<_>>>()?)
                }
                _ => return Err(bad()),
            },
        })
    }
}

/// Parameters of a built-in lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    /// Sites per dimension.
    pub n: usize,
    pub gamma: f64,
    pub layout: DetectorLayout,
    /// Whether closed-form ring results will be requested; those require even `N`.
    #[serde(default)]
    pub analytic: bool,
}

impl LatticeSpec {
    pub fn new(geometry: Geometry, n: usize, layout: DetectorLayout) -> Self {
        Self {
            geometry,
            n,
            gamma: 1.0,
            layout,
            analytic: false,
        }
    }

    pub fn n_sites(&self) -> usize {
        match self.geometry {
            Geometry::SquareOpen => self.n * self.n,
            _ => self.n,
        }
    }

    /// Non-fatal findings about the spec (currently: odd ring).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.geometry == Geometry::Ring && self.n % 2 == 1 {
            out.push(format!(
                "ring with odd N = {} has no closed-form survival; exact dynamics only",
                self.n
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: RealSymMatrix,
    gamma: f64,
    geometry: Geometry,
    lattice_dims: Vec<usize>,
}

impl Hamiltonian {
    pub fn from_parts(
        matrix: RealSymMatrix,
        gamma: f64,
        geometry: Geometry,
        lattice_dims: Vec<usize>,
    ) -> Self {
        Self {
            matrix,
            gamma,
            geometry,
            lattice_dims,
        }
    }

    /// Open chain with hopping `-gamma`.
    pub fn chain_open(n: usize, gamma: f64) -> Result<Self> {
        let m = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { -gamma } else { 0.0 });
        Ok(Self::from_parts(
            RealSymMatrix::new(m)?,
            gamma,
            Geometry::ChainOpen,
            vec![n],
        ))
    }

    pub fn matrix(&self) -> &RealSymMatrix {
        &self.matrix
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lattice_dims(&self) -> &[usize] {
        &self.lattice_dims
    }

    pub fn n_sites(&self) -> usize {
        self.matrix.dim()
    }
}

/// Partition of the sites into detected (`D`) and system (`S`) sets, both
/// 0-based and ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorSet {
    detected: Vec<usize>,
    system: Vec<usize>,
}

impl DetectorSet {
    /// From 0-based detected sites. Duplicates are merged.
    pub fn new(n_sites: usize, detected: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut is_detected = vec![false; n_sites];
        for site in detected {
            if site >= n_sites {
                return Err(Error::SiteOutOfRange {
                    site: site + 1,
                    n_sites,
                });
            }
            is_detected[site] = true;
        }
        let (detected, system) = (0..n_sites).partition(|&i| is_detected[i]);
        Ok(Self { detected, system })
    }

    /// From 1-based site numbers.
    pub fn from_one_based(n_sites: usize, sites: &[usize]) -> Result<Self> {
        let zero_based = sites
            .iter()
            .map(|&s| {
                if s == 0 || s > n_sites {
                    Err(Error::SiteOutOfRange { site: s, n_sites })
                } else {
                    Ok(s - 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_sites, zero_based)
    }

    pub fn detected(&self) -> &[usize] {
        &self.detected
    }

    pub fn system(&self) -> &[usize] {
        &self.system
    }

    pub fn n_sites(&self) -> usize {
        self.detected.len() + self.system.len()
    }

    pub fn is_detected(&self, site: usize) -> bool {
        self.detected.binary_search(&site).is_ok()
    }

    /// Detected sites as 1-based numbers.
    pub fn detected_one_based(&self) -> Vec<usize> {
        self.detected.iter().map(|s| s + 1).collect()
    }
}

/// 0-based flattened index of the 1-based square-lattice site `(lx, ly)`.
pub fn square_index(n: usize, lx: usize, ly: usize) -> usize {
    (lx - 1) * n + (ly - 1)
}

fn square_detectors(n: usize, case: SquareCase) -> Vec<usize> {
    let mut sites = Vec::new();
    let mut push = |lx: usize, ly: usize| sites.push(square_index(n, lx, ly));
    match case {
        SquareCase::I => (1..=n).for_each(|ly| push(n, ly)),
        SquareCase::II => (1..=n).for_each(|ly| {
            push(1, ly);
            push(n, ly);
        }),
        SquareCase::III => {
            (1..=n).for_each(|lx| push(lx, n));
            (1..n).for_each(|ly| push(n, ly));
        }
        SquareCase::IV => {
            (1..=n).for_each(|ly| {
                push(1, ly);
                push(n, ly);
            });
            (2..n).for_each(|lx| push(lx, n));
        }
        SquareCase::V => {
            (1..=n).for_each(|lx| {
                push(lx, 1);
                push(lx, n);
            });
            (2..n).for_each(|ly| {
                push(1, ly);
                push(n, ly);
            });
        }
    }
    sites
}

/// Build the Hamiltonian and detector set of a built-in lattice.
pub fn build(spec: &LatticeSpec) -> Result<(Hamiltonian, DetectorSet)> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::invalid(format!("N must be at least 2, got {n}")));
    }
    if !spec.gamma.is_finite() {
        return Err(Error::invalid("gamma must be finite"));
    }
    if spec.geometry == Geometry::Ring && spec.analytic && n % 2 == 1 {
        return Err(Error::invalid(format!(
            "closed-form ring results need even N, got {n}"
        )));
    }
    let g = spec.gamma;
    let (matrix, dims) = match spec.geometry {
        Geometry::ChainOpen => (
            DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { -g } else { 0.0 }),
            vec![n],
        ),
        Geometry::Ring => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let j = (i + 1) % n;
                // N = 2 ring: both bonds connect the same pair
                m[(i, j)] -= g;
                m[(j, i)] -= g;
            }
            if n == 2 {
                m /= 2.0;
            }
            (m, vec![n])
        }
        Geometry::SquareOpen => {
            let sites = n * n;
            let mut m = DMatrix::zeros(sites, sites);
            for lx in 1..=n {
                for ly in 1..=n {
                    let here = square_index(n, lx, ly);
                    if lx < n {
                        let there = square_index(n, lx + 1, ly);
                        m[(here, there)] = -g;
                        m[(there, here)] = -g;
                    }
                    if ly < n {
                        let there = square_index(n, lx, ly + 1);
                        m[(here, there)] = -g;
                        m[(there, here)] = -g;
                    }
                }
            }
            (m, vec![n, n])
        }
        Geometry::Complete => (DMatrix::from_element(n, n, -g), vec![n]),
        Geometry::Custom => {
            return Err(Error::invalid(
                "custom geometry is loaded from a graph file, not built",
            ))
        }
    };
    let sites = spec.n_sites();
    let detectors = match (&spec.layout, spec.geometry) {
        (DetectorLayout::Square(case), Geometry::SquareOpen) => {
            DetectorSet::new(sites, square_detectors(n, *case))?
        }
        (DetectorLayout::Square(_), g) => {
            return Err(Error::invalid(format!(
                "square-lattice detector layout used with geometry {g}"
            )))
        }
        (DetectorLayout::Explicit(list), _) => DetectorSet::from_one_based(sites, list)?,
        (DetectorLayout::Single(site), _) => DetectorSet::from_one_based(sites, &[*site])?,
        (_, Geometry::SquareOpen) => {
            return Err(Error::invalid(
                "square-open geometry needs a 2d-case or explicit detector layout",
            ))
        }
        (DetectorLayout::End, _) => DetectorSet::new(sites, [n - 1])?,
        (DetectorLayout::BothEnds, _) => DetectorSet::new(sites, [0, n - 1])?,
        (DetectorLayout::BlockEnd(nd), _) => {
            if *nd == 0 || *nd >= n {
                return Err(Error::invalid(format!(
                    "block of {nd} end detectors does not fit N = {n}"
                )));
            }
            DetectorSet::new(sites, n - nd..n)?
        }
    };
    let h = Hamiltonian::from_parts(RealSymMatrix::new(matrix)?, g, spec.geometry, dims);
    Ok((h, detectors))
}

/// Parse a graph description.
///
/// ```text
/// # comment
/// sites N
/// i j w        # symmetric entry H_ij = H_ji = w, 1-based; i == j sets a diagonal
/// detect i1 i2 ...
/// ```
///
/// Repeating an edge with the same weight is accepted; a different weight is
/// a conflict. The returned Hamiltonian has geometry `custom` and its `gamma`
/// is the largest absolute off-diagonal weight (1 when there are no edges).
pub fn parse_graph(text: &str) -> Result<(Hamiltonian, DetectorSet)> {
    let mut n_sites: Option<usize> = None;
    let mut edges: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    let mut detected: Vec<(usize, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let site = |tok: &str| -> Result<usize> {
            tok.parse::<usize>()
                .map_err(|_| err(format!("expected a site number, found `{tok}`")))
        };
        match fields[0] {
            "sites" => {
                if n_sites.is_some() {
                    return Err(err("duplicate `sites` header".into()));
                }
                if fields.len() != 2 {
                    return Err(err("expected `sites N`".into()));
                }
                let n = site(fields[1])?;
                if n == 0 {
                    return Err(err("graph must have at least one site".into()));
                }
                n_sites = Some(n);
            }
            "detect" => {
                for tok in &fields[1..] {
                    detected.push((site(tok)?, line_no));
                }
            }
            _ => {
                let n = n_sites.ok_or_else(|| err("edge before the `sites N` header".into()))?;
                if fields.len() != 3 {
                    return Err(err(format!("expected `i j w`, found `{line}`")));
                }
                let (i, j) = (site(fields[0])?, site(fields[1])?);
                let w: f64 = fields[2]
                    .parse()
                    .ok()
                    .filter(|w: &f64| w.is_finite())
                    .ok_or_else(|| err(format!("invalid weight `{}`", fields[2])))?;
                for s in [i, j] {
                    if s == 0 || s > n {
                        return Err(err(format!("site {s} out of range 1..={n}")));
                    }
                }
                let key = (i.min(j), i.max(j));
                if let Some(&(prev, prev_line)) = edges.get(&key) {
                    if prev != w {
                        return Err(err(format!(
                            "edge {i}-{j} weight {w} conflicts with {prev} on line {prev_line}"
                        )));
                    }
                } else {
                    edges.insert(key, (w, line_no));
                }
            }
        }
    }

    let n = n_sites.ok_or(Error::Parse {
        line: 0,
        message: "missing `sites N` header".into(),
    })?;
    let mut m = DMatrix::zeros(n, n);
    let mut gamma: f64 = 0.0;
    for (&(i, j), &(w, _)) in &edges {
        m[(i - 1, j - 1)] = w;
        m[(j - 1, i - 1)] = w;
        if i != j {
            gamma = gamma.max(w.abs());
        }
    }
    if gamma == 0.0 {
        gamma = 1.0;
    }
    let mut det = Vec::with_capacity(detected.len());
    for (s, line) in detected {
        if s == 0 || s > n {
            return Err(Error::Parse {
                line,
                message: format!("detector site {s} out of range 1..={n}"),
            });
        }
        det.push(s - 1);
    }
    let h = Hamiltonian::from_parts(RealSymMatrix::new(m)?, gamma, Geometry::Custom, vec![n]);
    Ok((h, DetectorSet::new(n, det)?))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<(Hamiltonian, DetectorSet)> {
    parse_graph(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron;

    fn spec(g: Geometry, n: usize, layout: DetectorLayout) -> LatticeSpec {
        LatticeSpec::new(g, n, layout)
    }

    #[test]
    fn open_chain_with_end_detector() {
        let (h, d) = build(&spec(Geometry::ChainOpen, 3, DetectorLayout::End)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., -1., 0., -1., 0., -1., 0., -1., 0.]);
        assert_eq!(h.matrix().matrix(), &expected);
        assert_eq!(d.detected(), &[2]);
        assert_eq!(d.system(), &[0, 1]);
    }

    #[test]
    fn complete_graph_includes_diagonal() {
        let (h, d) = build(&spec(Geometry::Complete, 2, DetectorLayout::Single(2))).unwrap();
        assert_eq!(h.matrix().matrix(), &DMatrix::from_element(2, 2, -1.0));
        assert_eq!(d.detected_one_based(), vec![2]);
    }

    #[test]
    fn ring_wraps_around() {
        let (h, _) = build(&spec(Geometry::Ring, 4, DetectorLayout::End)).unwrap();
        let m = h.matrix();
        assert_eq!(m.get(0, 3), -1.0);
        assert_eq!(m.get(3, 0), -1.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn case_v_leaves_only_the_centre() {
        let (_, d) = build(&spec(
            Geometry::SquareOpen,
            3,
            DetectorLayout::Square(SquareCase::V),
        ))
        .unwrap();
        assert_eq!(d.detected().len(), 8);
        assert_eq!(d.system(), &[square_index(3, 2, 2)]);
    }

    #[test]
    fn case_iii_corner_belongs_to_the_row() {
        let n = 4;
        let (_, d) = build(&spec(
            Geometry::SquareOpen,
            n,
            DetectorLayout::Square(SquareCase::III),
        ))
        .unwrap();
        assert_eq!(d.detected().len(), 2 * n - 1);
        assert!(d.is_detected(square_index(n, n, n)));
    }

    #[test]
    fn square_cases_match_axis_factorisation() {
        let n = 5;
        for case in SquareCase::ALL {
            let (_, d) =
                build(&spec(Geometry::SquareOpen, n, DetectorLayout::Square(case))).unwrap();
            let (ax, ay) = case.axis_layouts();
            let mut system: Vec<usize> = Vec::new();
            for &x in &ax.system_sites(n) {
                for &y in &ay.system_sites(n) {
                    system.push(x * n + y);
                }
            }
            assert_eq!(d.system(), system.as_slice(), "case {case:?}");
        }
    }

    #[test]
    fn square_hamiltonian_is_kronecker_sum() {
        let n = 4;
        let (h2, _) = build(&spec(
            Geometry::SquareOpen,
            n,
            DetectorLayout::Square(SquareCase::I),
        ))
        .unwrap();
        let h1 = Hamiltonian::chain_open(n, 1.0)
            .unwrap()
            .matrix()
            .to_complex();
        let id = crate::numerics::ComplexMatrix::identity(n);
        let sum = kron(&h1, &id).unwrap().into_inner() + kron(&id, &h1).unwrap().into_inner();
        assert_eq!(&sum, h2.matrix().to_complex().matrix());
    }

    #[test]
    fn partition_property_for_every_layout() {
        let layouts = [
            (Geometry::ChainOpen, DetectorLayout::End),
            (Geometry::ChainOpen, DetectorLayout::BothEnds),
            (Geometry::ChainOpen, DetectorLayout::BlockEnd(3)),
            (Geometry::Ring, DetectorLayout::Single(4)),
            (Geometry::Complete, DetectorLayout::Explicit(vec![1, 6])),
        ];
        for (g, layout) in layouts {
            let (_, d) = build(&spec(g, 6, layout)).unwrap();
            let mut all: Vec<usize> = d.detected().iter().chain(d.system()).copied().collect();
            all.sort();
            assert_eq!(all, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build(&spec(Geometry::ChainOpen, 4, DetectorLayout::Single(5))).is_err());
        assert!(build(&spec(Geometry::ChainOpen, 1, DetectorLayout::End)).is_err());
        assert!(build(&spec(Geometry::ChainOpen, 4, DetectorLayout::BlockEnd(4))).is_err());
        assert!(build(&spec(
            Geometry::ChainOpen,
            4,
            DetectorLayout::Square(SquareCase::I)
        ))
        .is_err());
        let mut odd = spec(Geometry::Ring, 5, DetectorLayout::End);
        assert!(build(&odd).is_ok());
        assert_eq!(odd.warnings().len(), 1);
        odd.analytic = true;
        assert!(build(&odd).is_err());
    }

    #[test]
    fn layout_strings() {
        assert_eq!(
            "end".parse::<DetectorLayout>().unwrap(),
            DetectorLayout::End
        );
        assert_eq!(
            "block-end:3".parse::<DetectorLayout>().unwrap(),
            DetectorLayout::BlockEnd(3)
        );
        assert_eq!(
            "explicit:1,4".parse::<DetectorLayout>().unwrap(),
            DetectorLayout::Explicit(vec![1, 4])
        );
        assert_eq!(
            "2d-case-iv".parse::<DetectorLayout>().unwrap(),
            DetectorLayout::Square(SquareCase::IV)
        );
        assert!("middle".parse::<DetectorLayout>().is_err());
    }

    #[test]
    fn two_node_graph() {
        let (h, d) = parse_graph("sites 2\n1 2 1.0\ndetect 2\n").unwrap();
        assert_eq!(
            h.matrix().matrix(),
            &DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.])
        );
        assert_eq!(d.detected(), &[1]);
        assert_eq!(h.geometry(), Geometry::Custom);
    }

    #[test]
    fn ring_edge_list_matches_builder() {
        let text = "# ring of four\nsites 4\n1 2 -1\n2 3 -1\n3 4 -1\n4 1 -1\ndetect 4\n";
        let (h, d) = parse_graph(text).unwrap();
        let (hb, db) = build(&spec(Geometry::Ring, 4, DetectorLayout::End)).unwrap();
        assert_eq!(h.matrix(), hb.matrix());
        assert_eq!(d, db);
    }

    #[test]
    fn complete_edge_list_with_self_loops_matches_builder() {
        let mut text = String::from("sites 5\n");
        for i in 1..=5 {
            for j in i..=5 {
                text.push_str(&format!("{i} {j} -1\n"));
            }
        }
        text.push_str("detect 5\n");
        let (h, _) = parse_graph(&text).unwrap();
        let (hb, _) = build(&spec(Geometry::Complete, 5, DetectorLayout::End)).unwrap();
        assert_eq!(h.matrix(), hb.matrix());
    }

    #[test]
    fn graph_errors_carry_line_numbers() {
        let conflict = parse_graph("sites 3\n1 2 1\n2 1 0.5\n").unwrap_err();
        assert!(
            matches!(conflict, Error::Parse { line: 3, .. }),
            "{conflict}"
        );
        let malformed = parse_graph("sites 3\n\n1 2\n").unwrap_err();
        assert!(matches!(malformed, Error::Parse { line: 3, .. }));
        let range = parse_graph("sites 3\n1 2 1\ndetect 4\n").unwrap_err();
        assert!(matches!(range, Error::Parse { line: 3, .. }));
        let header = parse_graph("1 2 1\n").unwrap_err();
        assert!(matches!(header, Error::Parse { line: 1, .. }));
        // same weight twice is fine
        assert!(parse_graph("sites 2\n1 2 1\n2 1 1\n").is_ok());
    }
}

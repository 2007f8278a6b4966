mod common;

use common::{chain, taylor_expm, taylor_propagator};
use lattice_zeno::dynamics::{evolve, step_operator, MeasurementProtocol};
use lattice_zeno::effective::build_heff;
use lattice_zeno::lattice::{build, DetectorLayout, Geometry, LatticeSpec};
use lattice_zeno::numerics::{eig_sym, expm_complex, propagator, ComplexMatrix, RealSymMatrix};
use lattice_zeno::StateVector;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

// Values computed once with the order-30 Taylor oracle in `common`.
const TWO_SITE_TRANSFER_AT_HALF_PI: f64 = 0.9999999999999996;
const CHAIN3_SURVIVAL: [f64; 3] = [0.9999750832084456, 0.9997530652730502, 0.9991473814056745];
const HEFF3_STEP: [[C64; 2]; 2] = [
    [
        C64::new(0.9950124798851459, 0.0),
        C64::new(0.0, 0.0995842486275559),
    ],
    [
        C64::new(0.0, 0.0995842486275559),
        C64::new(0.9900332674537681, 0.0),
    ],
];
const RING6_SURVIVAL: [f64; 4] = [
    0.9177911293153593,
    0.8614306708935715,
    0.8301654946706567,
    0.8162014674322003,
];
const COMPLETE5_SURVIVAL: [f64; 5] = [
    0.9256589761334162,
    0.8734243035849603,
    0.8367223471908558,
    0.810934234861729,
    0.7928145812291374,
];
const CHAIN20_SURVIVAL_AT_5000: f64 = 0.2715109518179807;

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn symmetric(dim: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            m[(i, j)] = entries[k];
            m[(j, i)] = entries[k];
            k += 1;
        }
    }
    m
}

fn random_symmetric() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=10).prop_flat_map(|dim| {
        prop::collection::vec(-2.0f64..2.0, dim * (dim + 1) / 2)
            .prop_map(move |e| symmetric(dim, &e))
    })
}

fn random_complex() -> impl Strategy<Value = DMatrix<C64>> {
    (1usize..=10).prop_flat_map(|dim| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |e| {
            DMatrix::from_iterator(dim, dim, e.into_iter().map(|(re, im)| C64::new(re, im)))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spectral_propagator_matches_taylor(h in random_symmetric(), t in -3.0f64..3.0) {
        let spectral = propagator(&eig_sym(&RealSymMatrix::new(h.clone()).unwrap()).unwrap(), t).unwrap();
        let diff = max_diff(spectral.matrix(), &taylor_propagator(&h, t));
        prop_assert!(diff <= 1e-12, "diff {diff:e}");
    }

    #[test]
    fn pade_matches_taylor(a in random_complex(), s in 0.01f64..4.0) {
        let a = a * C64::new(s, 0.0);
        let pade = expm_complex(&ComplexMatrix::new(a.clone()).unwrap()).unwrap();
        let oracle = taylor_expm(&a);
        let scale = oracle.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(max_diff(pade.matrix(), &oracle) <= 1e-11 * scale);
    }
}

#[test]
fn two_site_transfer() {
    let h = RealSymMatrix::new(chain(2)).unwrap();
    let u = propagator(&eig_sym(&h).unwrap(), std::f64::consts::FRAC_PI_2).unwrap();
    assert!((u.get(1, 0).norm_sqr() - TWO_SITE_TRANSFER_AT_HALF_PI).abs() < 1e-12);
    assert!(u.get(0, 0).norm() < 1e-12);
}

#[test]
fn two_site_step_operator() {
    let (h, d) = build(&LatticeSpec::new(
        Geometry::ChainOpen,
        2,
        DetectorLayout::End,
    ))
    .unwrap();
    let u = step_operator(&h, &d, std::f64::consts::FRAC_PI_2).unwrap();
    assert!(u.matrix().get(0, 0).norm() < 1e-12);
    assert_eq!(u.matrix().get(1, 0), C64::new(0.0, 0.0));
    assert_eq!(u.matrix().get(1, 1), C64::new(0.0, 0.0));
}

fn survival(geometry: Geometry, n: usize, start: usize, tau: f64, n_max: usize) -> Vec<f64> {
    let (h, d) = build(&LatticeSpec::new(geometry, n, DetectorLayout::End)).unwrap();
    let u = step_operator(&h, &d, tau).unwrap();
    let psi = StateVector::position(n, start).unwrap();
    evolve(&u, &psi, &MeasurementProtocol::new(tau, n_max).unwrap())
        .unwrap()
        .survival()
        .collect()
}

#[test]
fn three_site_chain_first_measurements() {
    let p = survival(Geometry::ChainOpen, 3, 0, 0.1, 3);
    for (a, b) in p.iter().zip(CHAIN3_SURVIVAL) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn ring_first_measurements() {
    let p = survival(Geometry::Ring, 6, 0, 0.3, 4);
    for (a, b) in p.iter().zip(RING6_SURVIVAL) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn complete_graph_first_measurements() {
    let p = survival(Geometry::Complete, 5, 1, 0.3, 5);
    for (a, b) in p.iter().zip(COMPLETE5_SURVIVAL) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn long_chain_run() {
    let p = survival(Geometry::ChainOpen, 20, 9, 0.1, 5000);
    assert!((p[4999] - CHAIN20_SURVIVAL_AT_5000).abs() < 1e-10);
}

#[test]
fn effective_step_matches_oracle() {
    let (h, d) = build(&LatticeSpec::new(
        Geometry::ChainOpen,
        3,
        DetectorLayout::End,
    ))
    .unwrap();
    let heff = build_heff(&h, &d, 0.1).unwrap();
    let step = expm_complex(&heff.matrix().scale(C64::new(0.0, -0.1))).unwrap();
    for (i, row) in HEFF3_STEP.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            assert!((step.get(i, j) - z).norm() < 1e-12);
        }
    }
}

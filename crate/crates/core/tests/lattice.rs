use magspec::field::{Domain, FieldSpec, MagneticFamily, PotentialFamily, VectorPotential};
use magspec::lattice::{GridSpec, LatticeOperator, DEFAULT_NODE_CAP};
use magspec::spectral::{eigs_window, EigsOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

fn field(b: f64, potential: PotentialFamily, gauge: Option<VectorPotential>, domain: Domain) -> FieldSpec {
    let m = DMatrix::from_row_slice(2, 2, &[0.0, b, -b, 0.0]);
    FieldSpec::new(MagneticFamily::Constant(m), potential, gauge, domain, None).unwrap()
}

fn dense_eigs(op: &LatticeOperator) -> Vec<f64> {
    let mut e: Vec<f64> = op.to_dense().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn lowest(op: &LatticeOperator, top: f64) -> f64 {
    let ew = eigs_window(op, (-1.0, top), &EigsOptions::default()).unwrap();
    assert!(ew.complete_flag);
    ew.lambdas[0]
}

#[test]
fn anisotropic_three_dimensional_laplacian_matches_closed_form() {
    let fs = FieldSpec::new(
        MagneticFamily::Constant(DMatrix::zeros(3, 3)),
        PotentialFamily::Zero,
        None,
        Domain::new(vec![0.0; 3], vec![1.0, 2.0, 1.5]).unwrap(),
        None,
    )
    .unwrap();
    let n = vec![8, 9, 10];
    let g = GridSpec::new(&fs.domain, n.clone(), DEFAULT_NODE_CAP).unwrap();
    let hbar = 0.7;
    let op = LatticeOperator::assemble(&fs, &g, hbar).unwrap();
    // ħ²·Σ_a (4/h_a²) sin²(π m_a / (2(n_a+1)))
    let mut want = Vec::new();
    for i in 1..=n[0] {
        for j in 1..=n[1] {
            for k in 1..=n[2] {
                let s: f64 = [(i, 0), (j, 1), (k, 2)]
                    .iter()
                    .map(|&(m, a)| {
                        let t = (PI * m as f64 / (2.0 * (n[a] + 1) as f64)).sin();
                        4.0 / (g.h[a] * g.h[a]) * t * t
                    })
                    .sum();
                want.push(hbar * hbar * s);
            }
        }
    }
    want.sort_by(f64::total_cmp);
    for (a, b) in dense_eigs(&op).iter().zip(&want) {
        assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn landau_and_symmetric_gauges_are_unitarily_equivalent() {
    let dom = Domain::centered(2, 1.0);
    let hbar = 0.13;
    let sym = field(
        1.3,
        PotentialFamily::Zero,
        Some(VectorPotential::Symmetric { center: vec![0.0, 0.0] }),
        dom.clone(),
    );
    let lan = field(
        1.3,
        PotentialFamily::Zero,
        Some(VectorPotential::Landau { center: vec![0.0, 0.0] }),
        dom,
    );
    let g = GridSpec::uniform(&sym.domain, 12, DEFAULT_NODE_CAP).unwrap();
    let hs = LatticeOperator::assemble(&sym, &g, hbar).unwrap();
    let hl = LatticeOperator::assemble(&lan, &g, hbar).unwrap();
    // A_sym − A_landau = ∇χ with χ = −b·x₁x₂/2; midpoint links integrate it exactly
    let moved = hl.gauge_transform(|x| -0.65 * x[0] * x[1]);
    assert_eq!(moved.col, hs.col);
    for (a, b) in moved.val.iter().zip(&hs.val) {
        assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "{a} vs {b}");
    }
    for (a, b) in dense_eigs(&hs).iter().zip(dense_eigs(&hl)) {
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
    }
}

#[test]
fn harmonic_oscillator_converges_at_second_order() {
    // ħ = 1, V = |x|²: −Δ + |x|² has ground energy 2 on ℝ²
    let dom = Domain::centered(2, 6.0);
    let f = field(
        0.0,
        PotentialFamily::Harmonic {
            v0: 0.0,
            v2: 1.0,
            center: vec![0.0, 0.0],
        },
        None,
        dom,
    );
    let errs: Vec<f64> = [29, 59, 119]
        .iter()
        .map(|&n| {
            let g = GridSpec::uniform(&f.domain, n, DEFAULT_NODE_CAP).unwrap();
            let op = LatticeOperator::assemble(&f, &g, 1.0).unwrap();
            (lowest(&op, 2.5) - 2.0).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order} from {errs:?}");
    }
}

#[test]
fn lowest_landau_level_ignores_a_larger_box() {
    // same spacing, boxes ±1.5 and ±2.5; the wall shifts the ground level by
    // about exp(−1.5²/2ħ) ≈ 2e-10
    let hbar = 0.05;
    let h = 0.05;
    let at = |half: f64| {
        let f = field(1.0, PotentialFamily::Zero, None, Domain::centered(2, half));
        let g = GridSpec::with_spacing(&f.domain, h, DEFAULT_NODE_CAP).unwrap();
        assert!((g.h[0] - h).abs() < 1e-12);
        lowest(&LatticeOperator::assemble(&f, &g, hbar).unwrap(), 1.5)
    };
    let (small, large) = (at(1.5), at(2.5));
    assert!((small - large).abs() < 1e-8, "{small} vs {large}");
    assert!((small - 1.0).abs() < 0.05, "{small}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_operator_is_hermitian(
        b0 in -2.0f64..2.0, b2 in -1.0f64..1.0, hbar in 0.05f64..1.0, n in 8usize..14,
    ) {
        let fs = FieldSpec::new(
            MagneticFamily::RadialWell { b0, b2, center: vec![0.1, -0.2] },
            PotentialFamily::Harmonic { v0: 0.3, v2: 0.5, center: vec![0.0, 0.0] },
            None,
            Domain::centered(2, 1.0),
            None,
        ).unwrap();
        let g = GridSpec::uniform(&fs.domain, n, DEFAULT_NODE_CAP).unwrap();
        let op = LatticeOperator::assemble(&fs, &g, hbar).unwrap();
        let m = op.to_dense();
        prop_assert_eq!(&m, &m.adjoint());
        prop_assert_eq!(op.hermiticity_violations(), 0);
        // every link is a pure phase times −ħ²/h²
        let k = hbar * hbar / (g.h[0] * g.h[0]);
        for i in 0..op.dim() {
            let (c, v) = op.row(i);
            for (&j, x) in c.iter().zip(v) {
                if j != i {
                    prop_assert!((x.norm() - k).abs() < 1e-12 * k);
                }
            }
        }
    }

    #[test]
    fn constant_potential_shifts_the_spectrum(v in -3.0f64..3.0, hbar in 0.1f64..1.0) {
        let dom = Domain::centered(2, 1.0);
        let base = field(0.8, PotentialFamily::Zero, None, dom.clone());
        let moved = field(0.8, PotentialFamily::Constant(v), None, dom);
        let g = GridSpec::uniform(&base.domain, 9, DEFAULT_NODE_CAP).unwrap();
        let a = dense_eigs(&LatticeOperator::assemble(&base, &g, hbar).unwrap());
        let b = dense_eigs(&LatticeOperator::assemble(&moved, &g, hbar).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - x - hbar * v).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn arbitrary_gauge_transform_preserves_the_spectrum(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
        let f = field(1.0, PotentialFamily::Zero, None, Domain::centered(2, 1.0));
        let g = GridSpec::uniform(&f.domain, 9, DEFAULT_NODE_CAP).unwrap();
        let op = LatticeOperator::assemble(&f, &g, 0.2).unwrap();
        let t = op.gauge_transform(|x| c1 * x[0].sin() + c2 * x[0] * x[1] * x[1]);
        for (x, y) in dense_eigs(&op).iter().zip(dense_eigs(&t)) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }
}

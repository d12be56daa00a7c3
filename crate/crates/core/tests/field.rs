use magspec::field::{skew_spectrum, Domain, FieldSpec, MagneticFamily, ModelSpectrum, PotentialFamily};
use magspec::Complex64;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn radial_well() -> FieldSpec {
    FieldSpec::new(
        MagneticFamily::RadialWell {
            b0: 1.0,
            b2: 1.0,
            center: vec![0.0, 0.0],
        },
        PotentialFamily::Zero,
        None,
        Domain::centered(2, 2.0),
        None,
    )
    .unwrap()
}

fn constant(b: DMatrix<f64>) -> FieldSpec {
    let d = b.nrows();
    FieldSpec::new(
        MagneticFamily::Constant(b),
        PotentialFamily::Zero,
        None,
        Domain::centered(d, 1.0),
        None,
    )
    .unwrap()
}

/// Eigenvalues of the Hermitian matrix `iB`, ascending.
fn ib_eigenvalues(b: &DMatrix<f64>) -> Vec<f64> {
    let ib = b.map(|v| Complex64::new(0.0, v));
    let mut ev: Vec<f64> = SymmetricEigen::new(ib).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `{±a_j} ∪ {0…}`, ascending.
fn paired(ms: &ModelSpectrum) -> Vec<f64> {
    let mut v: Vec<f64> = ms.a.iter().flat_map(|&a| [a, -a]).collect();
    v.extend(std::iter::repeat_n(0.0, ms.zero_modes));
    v.sort_by(f64::total_cmp);
    v
}

fn antisymmetric(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i + 1..d {
            b[(i, j)] = entries[k];
            b[(j, i)] = -entries[k];
            k += 1;
        }
    }
    b
}

#[test]
fn radial_well_is_evaluated_by_formula() {
    let fs = radial_well();
    let b = fs.b(&[1.0, 0.0]);
    assert_eq!(b, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]));
    let ms = skew_spectrum(&fs, &[1.0, 0.0], None).unwrap();
    assert!((ms.a[0] - 2.0).abs() < 1e-12);
}

#[test]
fn three_dimensional_rank_two_field() {
    let mut b = DMatrix::zeros(3, 3);
    b[(0, 1)] = 1.0;
    b[(1, 0)] = -1.0;
    let ms = skew_spectrum(&constant(b), &[0.0; 3], None).unwrap();
    assert_eq!((ms.rank, ms.zero_modes), (2, 1));
    assert!((ms.a[0] - 1.0).abs() < 1e-12);
}

#[test]
fn block_diagonal_matches_dense_oracle() {
    let b = antisymmetric(4, &[2.0, 0.0, 0.0, 0.0, 0.0, 3.0]);
    let ms = skew_spectrum(&constant(b.clone()), &[0.0; 4], None).unwrap();
    let oracle: Vec<f64> = ib_eigenvalues(&b).into_iter().filter(|&v| v > 0.0).rev().collect();
    assert_eq!(ms.a.len(), 2);
    for (a, o) in ms.a.iter().zip(&oracle) {
        assert!((a - o).abs() < 1e-10, "{a} vs {o}");
    }
    assert!((ms.a[0] - 3.0).abs() < 1e-12 && (ms.a[1] - 2.0).abs() < 1e-12);
}

#[test]
fn six_dimensional_field_builds_and_pairs() {
    let entries: Vec<f64> = (0..15).map(|k| ((k * 7 % 11) as f64 - 5.0) / 5.0).collect();
    let b = antisymmetric(6, &entries);
    let ms = skew_spectrum(&constant(b.clone()), &[0.0; 6], None).unwrap();
    for (p, q) in paired(&ms).iter().zip(&ib_eigenvalues(&b)) {
        assert!((p - q).abs() < 1e-10);
    }
}

#[test]
fn antisymmetry_holds_at_many_points() {
    let fs = radial_well();
    let pts = fs.domain.sample_grid(0.13);
    assert!(pts.len() >= 900);
    for x in pts {
        let b = fs.b(&x);
        assert_eq!(&b + b.transpose(), DMatrix::zeros(2, 2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_matches_hermitian_eigensolve(
        half in 1usize..4,
        entries in proptest::collection::vec(-1.0f64..1.0, 15),
    ) {
        let d = 2 * half;
        let b = antisymmetric(d, &entries);
        let ms = ModelSpectrum::from_matrix(&vec![0.0; d], &b, 0.0, None).unwrap();
        let ours = paired(&ms);
        let oracle = ib_eigenvalues(&b);
        prop_assert_eq!(ours.len(), oracle.len());
        for (p, q) in ours.iter().zip(&oracle) {
            prop_assert!((p - q).abs() < 1e-10, "{} vs {}", p, q);
        }
    }

    #[test]
    fn level_is_lipschitz_on_the_radial_well(
        x in proptest::collection::vec(-2.0f64..2.0, 2),
        y in proptest::collection::vec(-2.0f64..2.0, 2),
    ) {
        let fs = radial_well();
        let a = |p: &[f64]| skew_spectrum(&fs, p, None).unwrap().a[0];
        let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        // |∇B| = 2|x| ≤ 2 max(|x|, |y|) along the segment
        let lip = 2.0 * (x[0].hypot(x[1])).max(y[0].hypot(y[1]));
        prop_assert!((a(&x) - a(&y)).abs() <= lip * dist + 1e-12);
    }
}

use magspec::field::{Domain, FieldSpec, MagneticFamily, PotentialFamily};
use magspec::fit::{fit_line, fit_power_law};
use magspec::landau::{kset, sample_sigma};
use magspec::lattice::{GridSpec, DEFAULT_NODE_CAP};
use magspec::spectral::{EigsOptions, TestFunction};
use magspec::verify::{
    check_gap_ldos, check_ldos_leading, check_localization, check_offdiag_decay, check_spectrum_inclusion,
    distance_transform, GridRule, Rung, Scenario,
};
use magspec::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::sync::OnceLock;

const LADDER: [f64; 3] = [0.2, 0.14, 0.1];
const WINDOW: (f64, f64) = (0.0, 2.5);

fn radial(half: f64) -> FieldSpec {
    FieldSpec::new(
        MagneticFamily::RadialWell {
            b0: 1.0,
            b2: 1.0,
            center: vec![0.0, 0.0],
        },
        PotentialFamily::Zero,
        None,
        Domain::centered(2, half),
        None,
    )
    .unwrap()
}

fn constant(half: f64) -> FieldSpec {
    FieldSpec::new(
        MagneticFamily::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
        PotentialFamily::Zero,
        None,
        Domain::centered(2, half),
        None,
    )
    .unwrap()
}

fn scenario() -> Scenario {
    Scenario::new(
        radial(1.5),
        GridRule { h0: 0.09, power: 0.5 },
        DEFAULT_NODE_CAP,
        EigsOptions::default(),
    )
    .unwrap()
}

fn rungs() -> &'static [Rung] {
    static R: OnceLock<Vec<Rung>> = OnceLock::new();
    R.get_or_init(|| scenario().solve_ladder(&LADDER, WINDOW).unwrap())
}

#[test]
fn distance_transform_of_an_annulus() {
    // Λ₀ = 1 + |x|² ∈ [2, 2.9] on the annulus 1 ≤ |x| ≤ √1.9; Λ₁ ≥ 3 stays out
    let fs = radial(2.0);
    let g = GridSpec::uniform(&fs.domain, 81, DEFAULT_NODE_CAP).unwrap();
    let mask = kset(&fs, (2.0, 2.9), &g, 0.0).unwrap();
    assert!(mask.compact_flag);
    let dist = distance_transform(&mask).unwrap();
    let h = g.h[0];
    for i in 0..g.len() {
        let x = g.coord(i);
        let r = x[0].hypot(x[1]);
        let exact = (1.0 - r).max(r - 1.9f64.sqrt()).max(0.0);
        // the mask is sampled on the nodes, so the distance is exact up to one diagonal
        assert!(
            (dist.values[i] - exact).abs() <= h * 2f64.sqrt(),
            "{x:?}: {} vs {exact}",
            dist.values[i]
        );
    }
}

#[test]
fn solves_are_deterministic() {
    let again = scenario().solve_ladder(&LADDER[..1], WINDOW).unwrap();
    assert_eq!(again[0].ew.lambdas, rungs()[0].ew.lambdas);
    assert_eq!(again[0].ew.vectors, rungs()[0].ew.vectors);
}

#[test]
fn inclusion_certificate_is_bounded_by_the_raw_distance() {
    let fs = radial(1.5);
    let sa = sample_sigma(&fs, &fs.domain, 4.0, 0.02).unwrap();
    let rep = check_spectrum_inclusion(rungs(), &sa).unwrap();
    assert_eq!(rep.rungs.len(), LADDER.len());
    for r in &rep.rungs {
        assert!(r.max_distance <= r.raw_distance);
        assert!((r.distance - r.hbar * r.max_distance).abs() <= 1e-15 * (1.0 + r.distance));
        assert!(r.covered <= r.count);
        // every eigenvalue of this operator is at least the bottom of Σ up to O(ħ)
        assert!(r.lowest.unwrap() >= 1.0 - 1.0 * r.hbar.sqrt());
    }
    assert!(rep.pass, "{:?}", rep.notes);
}

#[test]
fn exterior_mass_only_mode() {
    let fs = radial(1.5);
    let rep = check_localization(rungs(), &fs, (1.5, 2.5), (1.6, 2.4), &[0.0]).unwrap();
    assert!(rep.fit.is_none() && rep.c.is_none());
    for r in &rep.rungs {
        assert_eq!(r.envelope.len(), 1);
        assert!(r.masses.iter().all(|m| m[0] >= 0.0 && m[0] <= 1.0 + 1e-9));
    }
}

#[test]
fn exterior_mass_decreases_with_radius() {
    let fs = radial(1.5);
    let radii: Vec<f64> = (0..6).map(|k| 0.5 * k as f64).collect();
    let rep = check_localization(rungs(), &fs, (1.5, 2.5), (1.6, 2.4), &radii).unwrap();
    assert!(rep.monotone);
    assert!(!rep.rungs.is_empty());
}

#[test]
fn localization_rejects_noncompact_sets_and_bad_windows() {
    // a constant field puts every node in K
    let c = constant(1.5);
    let sc = Scenario::new(
        c.clone(),
        GridRule { h0: 0.09, power: 0.5 },
        DEFAULT_NODE_CAP,
        EigsOptions::default(),
    )
    .unwrap();
    let r = sc.solve_ladder(&[0.2], (0.0, 2.0)).unwrap();
    let got = check_localization(&r, &c, (0.5, 1.5), (0.6, 1.4), &[0.0]);
    assert!(matches!(got, Err(Error::NotCompact(..))), "{got:?}");
    let fs = radial(1.5);
    for inner in [(1.5, 2.4), (1.6, 2.5), (2.0, 1.8)] {
        assert!(matches!(
            check_localization(rungs(), &fs, (1.5, 2.5), inner, &[0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }
    assert!(check_localization(rungs(), &fs, (1.5, 2.5), (1.6, 2.4), &[1.0, 0.5]).is_err());
}

#[test]
fn short_ladders_and_misplaced_supports_are_rejected() {
    let fs = radial(1.5);
    let phi = TestFunction::bump(0.5, 2.5).unwrap();
    let pts = vec![vec![0.0, 0.0]];
    assert!(matches!(
        check_ldos_leading(&rungs()[..2], &fs, &phi, &pts),
        Err(Error::Fit(_))
    ));
    assert!(matches!(
        check_offdiag_decay(&rungs()[..2], &phi, &pts, 0.5),
        Err(Error::Fit(_))
    ));
    // Σ of the radial well on this box is one interval from 1 up, so there is no gap
    let sa = sample_sigma(&fs, &fs.domain, 4.0, 0.02).unwrap();
    let inside = TestFunction::bump(1.5, 2.0).unwrap();
    assert!(matches!(
        check_gap_ldos(rungs(), &sa, &inside, &pts),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn ldos_report_shapes() {
    let fs = radial(1.5);
    let phi = TestFunction::bump(0.5, 2.5).unwrap();
    let pts = vec![vec![0.0, 0.0], vec![0.3, -0.2]];
    let rep = check_ldos_leading(rungs(), &fs, &phi, &pts).unwrap();
    assert_eq!(rep.rungs.len(), LADDER.len());
    for r in &rep.rungs {
        assert_eq!(r.points.len(), pts.len());
    }
    // points closer than a quarter box to a wall are refused
    assert!(check_ldos_leading(rungs(), &fs, &phi, &[vec![1.2, 0.0]]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_law_fit_recovers_exponent(c in 0.01f64..100.0, alpha in -3.0f64..3.0, n in 3usize..8) {
        let xs: Vec<f64> = (0..n).map(|k| 0.2 / 2f64.powi(k as i32)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(alpha)).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        prop_assert!((f.slope - alpha).abs() < 1e-9);
        prop_assert!((10f64.powf(f.intercept) - c).abs() < 1e-8 * c);
        prop_assert!(f.rms_residual < 1e-9);
    }

    #[test]
    fn line_fit_residuals_are_orthogonal(ys in proptest::collection::vec(-5.0f64..5.0, 3..10)) {
        let xs: Vec<f64> = (0..ys.len()).map(|k| k as f64 * 0.7 - 1.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        let res: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - f.eval(*x)).collect();
        prop_assert!(res.iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(res.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-9);
        prop_assert!(f.max_residual >= f.rms_residual - 1e-12);
    }
}

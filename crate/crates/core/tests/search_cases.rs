use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use blender_forge_core::arithmetic::{
    eval_gh, search_pairs, target_admissible, SearchParams, TorusTarget, DEFAULT_MARGIN_MIN,
};
use blender_forge_core::blender_certifier::BlenderKind;
use blender_forge_core::cycle_model::{
    build_moduli, classify_case, ArithClass, CaseTag, CycleSpec, CycleType, ModuliDecl, Quantity, UMinus,
};
use blender_forge_core::return_map::coeffs;
use blender_forge_core::Error;

fn df(omega1: f64, omega2: f64, theta: f64) -> CycleSpec {
    CycleSpec {
        cycle_type: CycleType::DoubleFocus,
        lambda: 2f64.powf(-theta),
        gamma: 2.0,
        omega1,
        omega2: Some(omega2),
        cap_a: 1.0,
        cap_b: 1.0,
        b_coef: 0.3,
        u_minus: UMinus::Vector([1.0, 0.4]),
        eta1: 0.4,
        eta2: 1.3,
        eta3: Some(0.1),
        d: 3,
        d1: 1,
        d2: 2,
        delta: 0.01,
        c_frac: 0.5,
    }
}

fn sf(omega: f64, theta: f64) -> CycleSpec {
    CycleSpec {
        cycle_type: CycleType::SaddleFocus,
        lambda: 2f64.powf(-theta),
        gamma: 2.0,
        omega1: omega,
        omega2: None,
        cap_a: 1.0,
        cap_b: 1.3,
        b_coef: 0.8,
        u_minus: UMinus::Scalar(0.7),
        eta1: 0.3,
        eta2: 1.1,
        eta3: None,
        d: 3,
        d1: 1,
        d2: 2,
        delta: 0.1,
        c_frac: 0.5,
    }
}

fn rel(pairs: &[(Quantity, i64)]) -> BTreeMap<Quantity, i64> {
    pairs.iter().copied().collect()
}

fn params(k_max: i64) -> SearchParams {
    SearchParams {
        k_max,
        m_max: 100_000,
        ..Default::default()
    }
}

fn rational(num: i64, den: i64) -> Option<ArithClass> {
    Some(ArithClass::Rational { num, den })
}

#[test]
fn df1_pairs_track_the_horizontal_line() {
    let s = df(2.0 * PI / 3.0, 2.0 * PI / 5.0, SQRT_2);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: rational(1, 3),
        omega2: rational(1, 5),
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Df1);
    let seq = search_pairs(&s, &m, &c, &params(20_000)).unwrap();
    assert!(seq.len() >= 3);
    let t_star = seq.t_star.unwrap();
    let Some(TorusTarget::HorizontalLine { s_star, w_star }) = seq.target.clone() else {
        panic!("expected a horizontal line")
    };
    assert!(target_admissible(&s, seq.target.as_ref().unwrap(), DEFAULT_MARGIN_MIN).unwrap().admissible);
    let alpha = seq.witness.as_ref().unwrap().alpha;
    for (i, &(t, ss, w)) in seq.target_values.iter().enumerate() {
        assert!((t - t_star).abs() <= 1e-3);
        assert!((ss - s_star).abs() < 1e-12 && (w - w_star).abs() < 1e-12);
        let (g, h) = eval_gh(&s, t, ss, w).unwrap();
        assert!(h.abs() <= 1e-2);
        assert!((g.abs() - 1.0).abs() >= 0.05);
        assert!((g / alpha - 1.0).abs() < 1e-2);
        let (k, mm) = seq.pairs[i];
        assert_eq!(coeffs(&s, k, mm).unwrap().b_km, seq.b_values[i]);
    }
}

#[test]
fn df21_fixes_w_and_finds_both_sides() {
    let x1 = SQRT_2 / 4.0;
    let s = df(2.0 * PI * x1, 2.0 * PI / 5.0, 3f64.sqrt() / 2.0);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: Some(ArithClass::Irrational),
        omega2: rational(1, 5),
        independent: vec![vec![Quantity::Theta, Quantity::Omega1, Quantity::One]],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Df21);
    let seq = search_pairs(&s, &m, &c, &params(100_000)).unwrap();
    let r2 = seq.pairs[0].1.rem_euclid(5);
    assert!(seq.pairs.iter().all(|p| p.1.rem_euclid(5) == r2));
    assert!(seq.b_values.iter().all(|b| b.abs() <= 1e-3));
    assert!(!seq.indices_of(BlenderKind::Cs).is_empty());
    assert!(!seq.indices_of(BlenderKind::Cu).is_empty());
}

#[test]
fn df22_pairs_lie_on_the_lattice_exactly() {
    let x1 = SQRT_2 / 4.0;
    let theta = x1 + 0.5;
    let s = df(2.0 * PI * x1, 2.0 * PI / 5.0, theta);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: Some(ArithClass::Irrational),
        omega2: rational(1, 5),
        relations: vec![rel(&[(Quantity::Theta, 2), (Quantity::Omega1, -2), (Quantity::One, -1)])],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Df22);
    let p = SearchParams { k_max: 200_000, m_max: 400_000, eps: 1e-2, ..Default::default() };
    let seq = search_pairs(&s, &m, &c, &p).unwrap();
    let Some(TorusTarget::TiltedLine { a1, b, w_star: Some(w), .. }) = seq.target.clone() else {
        panic!("expected a tilted line")
    };
    assert_eq!(a1, -1.0);
    let r2 = b as i64;
    assert_eq!(w, (r2 as f64) / 5.0);
    for (i, &(k, mm)) in seq.pairs.iter().enumerate() {
        assert_eq!(k % 10, 0);
        assert_eq!((mm - r2).rem_euclid(5), 0);
        let t = seq.target_values[i].0;
        let drift = t + k as f64 * x1;
        assert!((drift - drift.round()).abs() < 1e-9 * k as f64);
        assert!(seq.a_values[i].abs() > 1.0);
    }
    assert_eq!(seq.expected_kinds, vec![BlenderKind::Cu]);
}

#[test]
fn sf2_lattice_and_kind() {
    let x = SQRT_2 / 4.0;
    let s = sf(2.0 * PI * x, x + 0.5);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: Some(ArithClass::Irrational),
        relations: vec![rel(&[(Quantity::Theta, 2), (Quantity::Omega1, -2), (Quantity::One, -1)])],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Sf2);
    let seq = search_pairs(&s, &m, &c, &params(50_000)).unwrap();
    for (i, &(k, mm)) in seq.pairs.iter().enumerate() {
        assert_eq!(k % 2, 0);
        assert_eq!((mm - k / 2).rem_euclid(2), 0);
        assert!(seq.a_values[i].abs() >= 1.05);
    }
}

#[test]
fn sf3_has_both_kinds() {
    let x = SQRT_2 / 4.0;
    let s = sf(2.0 * PI * x, 3f64.sqrt() / 2.0);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: Some(ArithClass::Irrational),
        independent: vec![vec![Quantity::Theta, Quantity::Omega1, Quantity::One]],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Sf3);
    let seq = search_pairs(&s, &m, &c, &params(20_000)).unwrap();
    assert!(!seq.indices_of(BlenderKind::Cs).is_empty());
    assert!(!seq.indices_of(BlenderKind::Cu).is_empty());
}

#[test]
fn df3_cases_scan_the_window() {
    let x1 = SQRT_2 / 4.0;
    let x2 = 5f64.sqrt() / 7.0;
    let s = df(2.0 * PI * x1, 2.0 * PI * x2, 3f64.sqrt() / 2.0);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: Some(ArithClass::Irrational),
        omega2: Some(ArithClass::Irrational),
        independent: vec![vec![
            Quantity::Theta,
            Quantity::Omega1,
            Quantity::ThetaOmega2,
            Quantity::One,
        ]],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Df31);
    let seq = search_pairs(&s, &m, &c, &SearchParams { k_max: 3_000, ..params(0) }).unwrap();
    assert!(seq.b_values.iter().all(|b| b.abs() <= 1e-3));
    assert!(seq.target.is_none());
}

#[test]
fn df331_relations_fix_the_lattice() {
    // θ = x₁ + 1/2 and θ·x₂ = x₁/3 + 1/4
    let x1 = SQRT_2 / 4.0;
    let theta = x1 + 0.5;
    let x2 = (x1 / 3.0 + 0.25) / theta;
    let s = df(2.0 * PI * x1, 2.0 * PI * x2, theta);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: Some(ArithClass::Irrational),
        omega2: Some(ArithClass::Irrational),
        relations: vec![
            rel(&[(Quantity::Theta, 2), (Quantity::Omega1, -2), (Quantity::One, -1)]),
            rel(&[(Quantity::ThetaOmega2, 12), (Quantity::Omega1, -4), (Quantity::One, -3)]),
        ],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert_eq!(c.tag, CaseTag::Df331);
    let seq = search_pairs(&s, &m, &c, &SearchParams { k_max: 40_000, eps: 1e-2, ..params(0) }).unwrap();
    for &(k, mm) in &seq.pairs {
        assert_eq!(k % 8, 0);
        assert_eq!((mm - k / 8 * 4).rem_euclid(3), 0);
    }
    assert!(matches!(seq.target, Some(TorusTarget::TiltedLine { a2: Some(_), .. })));
}

#[test]
fn rational_and_mirrored_cases_have_no_search() {
    let s = sf(PI / 2.0, 1.0);
    let decl = ModuliDecl {
        theta: rational(1, 1),
        omega1: rational(1, 4),
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert!(matches!(search_pairs(&s, &m, &c, &params(100)), Err(Error::NotApplicable { .. })));

    let s = df(2.0 * PI / 3.0, 2.0 * PI * SQRT_2 / 4.0, 3f64.sqrt() / 2.0);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: rational(1, 3),
        omega2: Some(ArithClass::Irrational),
        independent: vec![vec![Quantity::ThetaInv, Quantity::Omega2, Quantity::One]],
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    assert!(c.mirrored);
    assert!(matches!(search_pairs(&s, &m, &c, &params(100)), Err(Error::NotApplicable { .. })));
}

#[test]
fn tiny_window_is_exhausted() {
    let s = sf(PI / 2.0, SQRT_2);
    let decl = ModuliDecl {
        theta: Some(ArithClass::Irrational),
        omega1: rational(1, 4),
        ..Default::default()
    };
    let m = build_moduli(&s, &decl).unwrap();
    let c = classify_case(&m, &s).unwrap();
    let r = search_pairs(&s, &m, &c, &SearchParams { k_max: 10, eps: 1e-9, ..params(0) });
    match r {
        Err(Error::WindowExhausted { found, best_distance, .. }) => {
            assert_eq!(found, 0);
            assert!(best_distance > 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

use didimpact::counterfactual::{CounterfactualSeries, Retransform};
use didimpact::impact::{
    build_impact_table, impact_row, impact_table, parse_preset, split_effects, ImpactError, IndustryCoefficients,
    DEFAULT_PRESET, RAW_STATISTICS_PRESET,
};
use didimpact::panel::Period;
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i128>;

fn q(hundredths: i128) -> Q {
    Q::new(hundredths, 100)
}

fn exact_coefficients() -> Vec<IndustryCoefficients<Q>> {
    [("Hospitality", 8249, 1056, 9671, 5098), ("Retail sale", 1724, 1485, 3580, 5730), ("Other services", 1977, 1192, 9115, 5832)]
        .into_iter()
        .map(|(name, avex, theta, psi, omega)| IndustryCoefficients {
            industry: name.into(),
            avex: q(avex),
            theta: q(theta),
            psi: q(psi),
            omega: q(omega),
        })
        .collect()
}

#[test]
fn direct_plus_indirect_is_production_value_exactly() {
    let table = impact_table(Q::from_integer(4691), &exact_coefficients()).unwrap();
    for r in table.rows.iter().chain(std::iter::once(&table.total)) {
        assert_eq!(r.direct_effects + r.indirect_effects, r.production_value, "{}", r.industry);
    }
    // Hospitality gross turnover is exactly 4691 × 82.49.
    assert_eq!(table.rows[0].gross_turnover, Q::new(4691 * 8249, 100));
}

#[test]
fn float_cascade_tracks_the_exact_one() {
    let exact = impact_table(Q::from_integer(4691), &exact_coefficients()).unwrap();
    let float = impact_table(4691.0, &parse_preset(DEFAULT_PRESET).unwrap()).unwrap();
    let to_f = |v: &Q| *v.numer() as f64 / *v.denom() as f64;
    for (a, b) in exact.rows.iter().zip(&float.rows) {
        assert!((to_f(&a.direct_effects) - b.direct_effects).abs() < 1e-6);
        assert!((to_f(&a.indirect_effects) - b.indirect_effects).abs() < 1e-6);
    }
}

#[test]
fn raw_preset_derives_the_published_coefficients() {
    let raw = parse_preset(RAW_STATISTICS_PRESET).unwrap();
    let published = parse_preset(DEFAULT_PRESET).unwrap();
    assert_eq!(raw, published);
}

#[test]
fn negative_gap_aborts() {
    let coeffs = parse_preset(DEFAULT_PRESET).unwrap();
    assert!(matches!(impact_table(-3.0, &coeffs), Err(ImpactError::NoUplift(_))));
}

#[test]
fn table_follows_the_counterfactual_gap() {
    let series = CounterfactualSeries {
        unit: "h".into(),
        window: vec![Period(0), Period(1)],
        observed: vec![1000.0, 1200.0],
        expected: vec![900.0, 1000.0],
        gap: vec![100.0, 200.0],
        cumulative_gap: 300.0,
        retransform: Retransform::Naive,
    };
    let coeffs = parse_preset(DEFAULT_PRESET).unwrap();
    assert_eq!(build_impact_table(&series, &coeffs).unwrap(), impact_table(300.0, &coeffs).unwrap());
}

fn arb_coefficients() -> impl Strategy<Value = IndustryCoefficients<f64>> {
    (1.0f64..200.0, 0.0f64..30.0, 1.0f64..110.0, 1.0f64..100.0).prop_map(|(avex, theta, psi, omega)| {
        IndustryCoefficients { industry: "x".into(), avex, theta, psi, omega }
    })
}

proptest! {
    #[test]
    fn cascade_is_linear_in_units(a in 0.0f64..1e5, b in 0.0f64..1e5, c in arb_coefficients()) {
        let ra = impact_row(a, &c).unwrap();
        let rb = impact_row(b, &c).unwrap();
        let rab = impact_row(a + b, &c).unwrap();
        let tol = 1e-9 * (rab.gross_turnover + 1.0);
        prop_assert!((ra.direct_effects + rb.direct_effects - rab.direct_effects).abs() <= tol);
        prop_assert!((ra.indirect_effects + rb.indirect_effects - rab.indirect_effects).abs() <= tol);
        prop_assert!((ra.gross_turnover + rb.gross_turnover - rab.gross_turnover).abs() <= tol);
    }

    #[test]
    fn higher_vat_lowers_both_effects(units in 1.0f64..1e5, c in arb_coefficients(), bump in 0.0f64..20.0) {
        let mut hi = c.clone();
        hi.theta = (c.theta + bump).min(99.0);
        let (lo_r, hi_r) = (impact_row(units, &c).unwrap(), impact_row(units, &hi).unwrap());
        prop_assert!(hi_r.direct_effects <= lo_r.direct_effects);
        prop_assert!(hi_r.indirect_effects <= lo_r.indirect_effects);
    }

    #[test]
    fn higher_value_added_share_shifts_indirect_to_direct(pv in 1.0f64..1e6, omega in 1.0f64..90.0, bump in 0.001f64..10.0) {
        let (de0, ie0) = split_effects(pv, omega).unwrap();
        let (de1, ie1) = split_effects(pv, omega + bump).unwrap();
        prop_assert!(de1 > de0);
        prop_assert!(ie1 < ie0);
        prop_assert!((de1 + ie1 - pv).abs() <= 1e-9 * pv);
    }
}

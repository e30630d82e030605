use afc_core::waveguide::{
    fresnel_loss_db, overlap_efficiency, read_budget_csv, reproduce_table1, write_budget_csv,
    GaussianMode, CRYSTAL_LENGTH_CM,
};
use proptest::prelude::*;

#[test]
fn budget_csv_round_trip() {
    let budgets = reproduce_table1().unwrap();
    let mut buf = Vec::new();
    write_budget_csv(&mut buf, &budgets).unwrap();
    let back = read_budget_csv(buf.as_slice(), CRYSTAL_LENGTH_CM).unwrap();
    assert_eq!(back.len(), budgets.len());
    for (a, b) in budgets.iter().zip(&back) {
        assert!((a.coupling_db - b.coupling_db).abs() <= 5e-5);
        assert!((a.propagation_db_per_cm - b.propagation_db_per_cm).abs() <= 5e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn overlap_is_symmetric_and_bounded(
        ah in 2.0f64..15.0, av in 2.0f64..15.0, bh in 2.0f64..15.0, bv in 2.0f64..15.0,
    ) {
        let a = GaussianMode::new(ah, av).unwrap();
        let b = GaussianMode::new(bh, bv).unwrap();
        let ab = overlap_efficiency(&a, &b);
        let ba = overlap_efficiency(&b, &a);
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab > 0.0 && ab <= 1.0);
        prop_assert!((overlap_efficiency(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fresnel_is_reciprocal(n in 1.01f64..4.0) {
        let direct = fresnel_loss_db(n).unwrap();
        let inverse = fresnel_loss_db(1.0 / n).unwrap();
        prop_assert!((direct - inverse).abs() < 1e-12);
        prop_assert!(direct > 0.0);
    }
}

mod common;

use common::*;
use fedosov_core::fedosov::Contraction;
use fedosov_core::operator::{
    decompose, exp_field, is_multiplicative_on, log_phi, log_phi_iteration, log_phi_series, operator_homotopy_failures,
    DiffOp, ShiftingOperator,
};
use fedosov_core::{Base, FormalFunction, LiePair, Shape, SplittingOffset};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composition_is_application(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 4);
        let a = random_op(&mut rng, shape, 5, 0);
        let b = random_op(&mut rng, shape, 5, -1);
        let f = random_function(&mut rng, shape, 4, 2);
        prop_assert_eq!(a.compose(&b).apply(&f), a.apply(&b.apply(&f)));
    }

    #[test]
    fn commutator_is_graded(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 4);
        let a = random_op(&mut rng, shape, 4, 0);
        let b = random_op(&mut rng, shape, 4, 0);
        let ab = a.commutator(&b);
        let ba = b.commutator(&a);
        if a.form_degrees().iter().all(|d| d % 2 == 0) {
            let mut sum = ab.clone();
            sum.add_assign(&ba);
            prop_assert!(sum.is_zero());
        }
    }

    #[test]
    fn field_bracket_matches_operator_commutator(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = Shape::new(rng.gen_range(1..=2), 1, Base::Point, 5);
        let x = random_admissible_field(&mut rng, shape, 3);
        let y = random_admissible_field(&mut rng, shape, 3);
        let lhs = DiffOp::from_field(&x.bracket(&y));
        prop_assert_eq!(DiffOp::from_field(&x).commutator(&DiffOp::from_field(&y)), lhs);
    }

    #[test]
    fn operator_homotopy_identities(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 4);
        let pair = LiePair::new(Base::Point, shape.rank_b, shape.rank_a);
        let mut offset = SplittingOffset::zero(&pair);
        if shape.rank_a > 0 {
            offset.set(0, shape.rank_a - 1, fedosov_core::Coefficient::constant(Base::Point, small_rational(&mut rng)));
        }
        let d = random_op(&mut rng, shape, 6, -3);
        for ctr in [Contraction::reference(), Contraction::for_offset(&offset, shape)] {
            prop_assert!(operator_homotopy_failures(&d, &ctr).is_empty());
        }
    }

    #[test]
    fn decompose_rebuild_round_trip(seed in any::<u64>(), shift in -2i64..=2) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 4);
        let d = random_op(&mut rng, shape, 8, shift);
        let got = decompose(shape, shift, |f: &FormalFunction| d.apply(f)).unwrap();
        prop_assert_eq!(got, ShiftingOperator::new(d, shift).unwrap());
    }

    #[test]
    fn shift_bound_is_enforced(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 4);
        let d = random_op(&mut rng, shape, 6, -1);
        let s = d.shift().unwrap_or(0);
        prop_assert!(ShiftingOperator::new(d.clone(), s).is_ok());
        prop_assert!(ShiftingOperator::new(d.clone(), s + 1).is_err());
        prop_assert!(decompose(shape, s + 1, |f: &FormalFunction| d.apply(f)).is_err());
    }

    #[test]
    fn exp_log_inverse(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = Shape::new(rng.gen_range(1..=2), 0, Base::Point, 5);
        let y = random_admissible_field(&mut rng, shape, 4);
        let phi = exp_field(&y).unwrap();
        prop_assert_eq!(log_phi(&phi).unwrap(), y);
        let images = random_images(&mut rng, shape, 3);
        let psi = decompose(shape, 0, |f: &FormalFunction| substitution(&images, f)).unwrap();
        let z = log_phi_iteration(psi.op()).unwrap();
        let mut minus_one = psi.op().clone();
        minus_one.sub_assign(&DiffOp::identity(shape));
        prop_assert_eq!(&log_phi_series(&[minus_one], shape).unwrap(), &z);
        prop_assert_eq!(exp_field(&z).unwrap(), psi);
    }

    #[test]
    fn exponentials_are_algebra_maps(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = Shape::new(rng.gen_range(1..=2), 1, Base::Point, 5);
        let y = random_admissible_field(&mut rng, shape, 3);
        let phi = exp_field(&y).unwrap();
        let f = random_function(&mut rng, shape, 3, 2);
        let g = random_function(&mut rng, shape, 3, 2);
        prop_assert!(is_multiplicative_on(&phi, &f, &g));
    }
}

#[test]
fn exp_of_square_field_is_the_flow() {
    let shape = Shape::new(1, 0, Base::Point, 6);
    let e = FormalFunction::eta(shape, 0);
    let y = fedosov_core::VerticalVectorField::from_components(vec![&e * &e]).unwrap();
    let phi = exp_field(&y).unwrap();
    let img = phi.apply(&e);
    for m in 1..=6u8 {
        assert_eq!(img.coefficient(fedosov_core::ExteriorIndex::EMPTY, &[m]), fedosov_core::Coefficient::from_int(Base::Point, 1));
    }
    let back = decompose(shape, 0, |f: &FormalFunction| phi.apply(f)).unwrap();
    assert_eq!(back, phi);
}

#[test]
fn log_rejects_nontrivial_linear_part() {
    let shape = Shape::new(1, 0, Base::Point, 4);
    let two = DiffOp::identity(shape).scale(&rat(2, 1));
    let op = ShiftingOperator::new(two, 0).unwrap();
    assert!(matches!(log_phi(&op), Err(fedosov_core::Error::Precondition(_))));
}

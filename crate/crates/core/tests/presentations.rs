mod common;

use common::*;
use fedosov_core::enveloping::{transition, Pbw};
use fedosov_core::operator::{dual_of_coalgebra_map, ShiftingOperator};
use fedosov_core::{Error, Presentation, SplittingOffset};

const JACOBI_VIOLATION: &str = r#"{
    "mode": "POINT", "rank_A": 0, "rank_B": 3,
    "bracket": [
        {"u": 1, "v": 2, "w": 2, "coeff": "1"},
        {"u": 2, "v": 3, "w": 1, "coeff": "1"}
    ],
    "connection1": [],
    "truncation_order": 3
}"#;

const CLOSURE_VIOLATION: &str = r#"{
    "mode": "POINT", "rank_A": 2, "rank_B": 1,
    "bracket": [{"u": 2, "v": 3, "w": 1, "coeff": "1"}],
    "connection1": [],
    "truncation_order": 3
}"#;

#[test]
fn shipped_presentations_validate_and_round_trip() {
    for name in SHIPPED {
        let p = load(name);
        assert_eq!(p.name.as_deref(), Some(name));
        assert!(p.order >= 2, "{name}");
        let again = Presentation::from_json(&p.to_json()).unwrap();
        assert_eq!(again.to_json(), p.to_json(), "{name}");
    }
}

#[test]
fn structural_violations_are_reported() {
    let p = Presentation::parse(JACOBI_VIOLATION).unwrap();
    let d = p.diagnostics();
    assert!(!d.is_empty());
    assert!(d.iter().any(|m| m.contains("Jacobi")), "{d:?}");
    assert!(matches!(p.validate(), Err(Error::InvalidPresentation(_))));

    let p = Presentation::parse(CLOSURE_VIOLATION).unwrap();
    assert!(p.validate().is_err());
}

#[test]
fn malformed_files_are_parse_errors() {
    for bad in [
        "",
        "{}",
        r#"{"mode": "SPHERE", "rank_A": 0, "rank_B": 1, "connection1": [], "truncation_order": 2}"#,
        r#"{"mode": "POINT", "rank_A": 0, "rank_B": 1, "anchor": [{"u": 1, "mu": 1, "coeff": "1"}], "connection1": [], "truncation_order": 2}"#,
        r#"{"mode": "POINT", "rank_A": 0, "rank_B": 1, "connection1": [{"u": 1, "i": 1, "k": 1, "coeff": "x"}], "truncation_order": 2}"#,
    ] {
        assert!(matches!(Presentation::parse(bad), Err(Error::Parse(_))), "{bad}");
    }
}

#[test]
fn flat_abelian_pbw_does_not_see_the_splitting() {
    let p = load("abelian");
    let n = 4;
    let pbw1 = Pbw::new(&p.pair, &p.connection1, &SplittingOffset::zero(&p.pair), n).unwrap();
    let pbw2 = Pbw::new(&p.pair, &p.connection1, &p.offset, n).unwrap();
    let phi = dual_of_coalgebra_map(p.pair.shape(n), |k| transition(&pbw1, &pbw2, k)).unwrap();
    assert_eq!(phi, ShiftingOperator::identity(p.pair.shape(n)));
}

mod common;

use common::*;
use fedosov_core::geodesic::{
    central_differences, closed_form_exp_1d, compare_with_pbw, directional_derivative, expected_quadratic,
    geodesic_jet, rk4_exp, rk4_inverse_exp, transition_jet,
};
use fedosov_core::{Base, Coefficient, Connection, Error, LiePair, Rational, Scalar};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::Rng;

fn random_symmetric(rng: &mut StdRng, dim: usize) -> Connection {
    let pair = LiePair::tangent(dim);
    let mut conn = Connection::zero(&pair);
    for k in 0..dim {
        for i in 0..dim {
            for j in i..dim {
                if rng.gen_bool(0.4) {
                    continue;
                }
                let mut c = Coefficient::constant(Base::Chart(dim), small_rational(rng));
                if rng.gen_bool(0.5) {
                    let mu = rng.gen_range(0..dim);
                    c = &c + &Coefficient::coordinate(dim, mu).scale(&small_rational(rng));
                }
                conn.set(i, j, k, c.clone());
                conn.set(j, i, k, c);
            }
        }
    }
    conn
}

fn random_point(rng: &mut StdRng, dim: usize) -> Vec<Rational> {
    (0..dim).map(|_| rat(rng.gen_range(-2..=2), rng.gen_range(1..=3))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratic_term_is_minus_half_christoffel(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dim = rng.gen_range(1..=2);
        let conn = random_symmetric(&mut rng, dim);
        let p = random_point(&mut rng, dim);
        let jet = geodesic_jet(&conn, &p, 4).unwrap();
        prop_assert_eq!(jet.homogeneous_part(2), expected_quadratic(&conn, &p));
        let linear = jet.homogeneous_part(1);
        for k in 0..dim {
            prop_assert_eq!(&linear[k], &Coefficient::coordinate(dim, k));
        }
    }

    #[test]
    fn transition_between_equal_connections_is_identity(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dim = rng.gen_range(1..=2);
        let conn = random_symmetric(&mut rng, dim);
        let p = random_point(&mut rng, dim);
        let psi = transition_jet(&conn, &conn, &p, 4).unwrap();
        let id: Vec<Coefficient> = (0..dim).map(|k| Coefficient::coordinate(dim, k)).collect();
        prop_assert_eq!(psi.displacement(), id);
    }
}

#[test]
fn torsion_is_rejected() {
    let pair = LiePair::tangent(2);
    let mut conn = Connection::zero(&pair);
    conn.set(0, 1, 0, Coefficient::from_int(Base::Chart(2), 1));
    let p = [rat(0, 1), rat(0, 1)];
    assert!(matches!(geodesic_jet(&conn, &p, 3), Err(Error::Torsion(_))));
}

#[test]
fn flat_connection_gives_straight_lines() {
    let pair = LiePair::tangent(2);
    let conn = Connection::zero(&pair);
    let jet = geodesic_jet(&conn, &[rat(1, 2), rat(-1, 3)], 5).unwrap();
    for m in 2..=5 {
        assert!(jet.homogeneous_part(m).iter().all(Coefficient::is_zero));
    }
}

#[test]
fn constant_christoffel_matches_logarithm() {
    let p = load("chart1d");
    let c = rat(2, 1);
    let jet = geodesic_jet(p.connection2_or_first(), &[rat(0, 1)], 6).unwrap();
    for (m, w) in closed_form_exp_1d(&c, 6).iter().enumerate() {
        assert_eq!(jet.coefficient(0, &[m as u8]), *w, "order {m}");
    }
}

#[test]
fn three_way_agreement_on_charts() {
    for (name, point, n) in [
        ("chart1d", vec![rat(0, 1)], 6),
        ("chart1d_x", vec![rat(1, 2)], 5),
        ("chart2d", vec![rat(1, 3), rat(-1, 2)], 4),
    ] {
        let p = load(name);
        let rep = compare_with_pbw(&p.pair, &p.connection1, p.connection2_or_first(), &point, n).unwrap();
        assert!(rep.passed(), "{name}: {:?} {:?} {:?}", rep.jet_vs_pbw, rep.jet_vs_phi, rep.pbw_vs_phi);
        assert!(rep.entries() > 0);
    }
}

#[test]
fn finite_differences_match_jets() {
    let p = load("chart2d");
    let conn = p.connection2_or_first();
    let point = [rat(1, 3), rat(-1, 2)];
    let pf: Vec<f64> = point.iter().map(Scalar::to_f64).collect();
    let jet = geodesic_jet(conn, &point, 4).unwrap();
    for dir in [[1.0, 0.0], [0.3, -0.7], [-0.5, 0.5]] {
        let fd = central_differences(
            |s| {
                let v = [s * dir[0], s * dir[1]];
                let x = rk4_exp(conn, &pf, &v, 1e-3);
                vec![x[0] - pf[0], x[1] - pf[1]]
            },
            1e-3,
        );
        let tol = [1e-6, 1e-5, 1e-4];
        for m in 1..=3 {
            let exact = directional_derivative(&jet, &dir, m);
            for k in 0..2 {
                let err = (fd[m - 1][k] - exact[k]).abs();
                assert!(err < tol[m - 1], "dir {dir:?}, order {m}: error {err:e}");
            }
        }
    }
}

#[test]
fn numerical_inversion_recovers_the_velocity() {
    let p = load("chart2d");
    let point = [0.25, -0.4];
    for v in [[0.05, 0.02], [-0.03, 0.04], [0.0, -0.06]] {
        let target = rk4_exp(p.connection2_or_first(), &point, &v, 1e-3);
        let w = rk4_inverse_exp(p.connection2_or_first(), &point, &target, 1e-3).unwrap();
        for k in 0..2 {
            assert!((w[k] - v[k]).abs() < 1e-8, "{v:?} → {w:?}");
        }
    }
}

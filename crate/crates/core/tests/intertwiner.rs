mod common;

use common::*;
use fedosov_core::enveloping::{transition, Pbw};
use fedosov_core::fedosov::Contraction;
use fedosov_core::function::sym_degree;
use fedosov_core::operator::{
    delta_q, dual_of_coalgebra_map, eth, exp_field, is_multiplicative_on, log_of_solution, pushforward_polydiff,
    solve_phi, verify_intertwining, DiffOp, PolyDiffOp, ShiftingOperator,
};
use fedosov_core::{
    Base, Coefficient, Error, ExteriorIndex, FedosovField, FormalFunction, PolySection, Rational, Shape,
    SplittingOffset, SymIndex, VerticalVectorField,
};
use rand::Rng;
use smallvec::smallvec;

fn chart_const(dim: usize, c: Rational) -> Coefficient {
    Coefficient::constant(Base::Chart(dim), c)
}

fn factorial(m: i64) -> i64 {
    (1..=m).product()
}

#[test]
fn equal_connections_give_identity() {
    for name in SHIPPED {
        let p = load(name);
        let ctr = Contraction::reference();
        let q = FedosovField::new(&p.pair, &p.connection1, 4, &ctr).unwrap();
        let sol = solve_phi(&q, &q, &ctr).unwrap();
        assert_eq!(sol.phi, ShiftingOperator::identity(p.pair.shape(4)), "{name}");
        assert!(log_of_solution(&sol).unwrap().is_zero(), "{name}");
    }
}

#[test]
fn flat_chart_to_constant_christoffel() {
    let p = load("chart1d");
    let n = 6;
    let c = rat(2, 1);
    let (q1, q2) = fields(&p, 1, n);
    let sol = solve_phi(&q1, &q2, &Contraction::reference()).unwrap();
    let shape = p.pair.shape(n);
    let img = sol.phi.apply(&FormalFunction::eta(shape, 0));
    assert_eq!(img.coefficient(ExteriorIndex::EMPTY, &[1]), chart_const(1, rat(1, 1)));
    let pairing = img.coefficient(ExteriorIndex::EMPTY, &[2]).scale(&rat(2, 1));
    assert_eq!(pairing, chart_const(1, c.clone()));
    for m in 1..=n as i64 {
        let want = rat(2i64.pow(m as u32 - 1), factorial(m));
        assert_eq!(img.coefficient(ExteriorIndex::EMPTY, &[m as u8]), chart_const(1, want), "η^{m}");
    }
    let y = log_of_solution(&sol).unwrap();
    assert_eq!(y.component(0).coefficient(ExteriorIndex::EMPTY, &[1]), chart_const(1, rat(0, 1)));
    assert_eq!(y.component(0).coefficient(ExteriorIndex::EMPTY, &[2]), chart_const(1, c / rat(2, 1)));
}

#[test]
fn phi_is_dual_of_pbw_transition() {
    for name in ["solvable", "borel", "chart1d_x", "chart2d"] {
        let p = load(name);
        let n = 4;
        for splitting in [1u8, 2] {
            let offset = if splitting == 1 { SplittingOffset::zero(&p.pair) } else { p.offset.clone() };
            let pbw1 = Pbw::new(&p.pair, &p.connection1, &offset, n).unwrap();
            let pbw2 = Pbw::new(&p.pair, p.connection2_or_first(), &offset, n).unwrap();
            let dual = dual_of_coalgebra_map(p.pair.shape(n), |k| transition(&pbw1, &pbw2, k)).unwrap();
            let (q1, q2) = fields(&p, splitting, n);
            let sol = solve_phi(&q1, &q2, &contraction(&p, splitting, n)).unwrap();
            assert_eq!(sol.phi, dual, "{name}, splitting {splitting}");
        }
    }
}

#[test]
fn dual_rejects_maps_off_the_diagonal() {
    let shape = Shape::new(1, 0, Base::Point, 3);
    let doubled = |k: &SymIndex| {
        let mut s = PolySection::zero(1, Base::Point);
        s.add_term(k.clone(), Coefficient::constant(Base::Point, rat(2, 1)));
        Ok(s)
    };
    assert!(dual_of_coalgebra_map(shape, doubled).is_err());
    let id = |k: &SymIndex| {
        let mut s = PolySection::zero(1, Base::Point);
        s.add_term(k.clone(), Coefficient::constant(Base::Point, rat(1, 1)));
        Ok(s)
    };
    assert_eq!(dual_of_coalgebra_map(shape, id).unwrap(), ShiftingOperator::identity(shape));
}

#[test]
fn phi_is_an_algebra_morphism() {
    let mut rng = rng(17);
    for name in ["solvable", "borel", "chart1d_x"] {
        let p = load(name);
        let n = 5;
        let (q1, q2) = fields(&p, 1, n);
        let sol = solve_phi(&q1, &q2, &Contraction::reference()).unwrap();
        let shape = p.pair.shape(n);
        for _ in 0..10 {
            let mut f = FormalFunction::zero(shape);
            let mut g = FormalFunction::zero(shape);
            for h in [&mut f, &mut g] {
                for _ in 0..3 {
                    let e = random_ext(&mut rng, shape.frame(), 2);
                    let k = random_sym(&mut rng, shape.rank_b, 0, 3);
                    h.add_term(e, k, Coefficient::constant(shape.base, small_rational(&mut rng)));
                }
            }
            assert!(is_multiplicative_on(&sol.phi, &f, &g), "{name}");
        }
    }
}

#[test]
fn terms_gain_one_shift_per_step() {
    for name in ["solvable", "borel", "chart1d", "chart2d"] {
        let p = load(name);
        let (q1, q2) = fields(&p, 1, 4);
        let sol = solve_phi(&q1, &q2, &Contraction::reference()).unwrap();
        for (n, t) in sol.terms.iter().enumerate() {
            if let Some(s) = t.shift() {
                assert!(s >= n as i64, "{name}: term {n} has shift {s}");
            }
        }
        let (k, fail) = verify_intertwining(&sol.phi, &q1, &q2);
        assert!(k > 0 && fail.is_none(), "{name}");
    }
}

#[test]
fn eth_on_trivial_inputs() {
    let p = load("solvable");
    let (q1, q2) = fields(&p, 1, 4);
    let shape = p.pair.shape(4);
    let one = DiffOp::identity(shape);
    let same = delta_q(&q2, &q2).unwrap();
    assert!(same.is_zero());
    assert!(eth(&one, &same, &q2).unwrap().is_zero());
    let dq = delta_q(&q1, &q2).unwrap();
    assert!(!dq.is_zero());
    assert_eq!(eth(&one, &dq, &q2).unwrap(), dq);
    let lowering = DiffOp::monomial(shape, ExteriorIndex::EMPTY, smallvec![0], smallvec![1], Coefficient::from_int(Base::Point, 1));
    assert!(matches!(eth(&lowering, &dq, &q2), Err(Error::Precondition(_))));
}

#[test]
fn pushforward_matches_conjugation() {
    let mut rng = rng(23);
    for trial in 0..20 {
        let n = 5;
        let shape = Shape::new(rng.gen_range(1..=2), 0, Base::Point, n);
        let y = random_admissible_field(&mut rng, shape, 3);
        let i = random_sym(&mut rng, shape.rank_b, 0, 2);
        let js: Vec<SymIndex> = (0..rng.gen_range(1..=2)).map(|_| random_sym(&mut rng, shape.rank_b, 0, 2)).collect();
        let c = Coefficient::constant(Base::Point, small_rational(&mut rng));
        let pf = pushforward_polydiff(&y, &i, &js, &c).unwrap();

        let big = shape.with_order(n + 2);
        let lift = |f: &FormalFunction| f.with_order(n + 2);
        let y_big = VerticalVectorField::from_components(y.components().iter().map(lift).collect()).unwrap();
        let phi = exp_field(&y_big).unwrap();
        let phi_inv = exp_field(&y_big.scale(&rat(-1, 1))).unwrap();
        let p = PolyDiffOp::monomial(big, i.clone(), js.clone(), c.clone());
        let args: Vec<FormalFunction> = js
            .iter()
            .map(|_| {
                let mut f = FormalFunction::zero(big);
                for _ in 0..3 {
                    let k = random_sym(&mut rng, shape.rank_b, 0, n);
                    f.add_term(ExteriorIndex::EMPTY, k, Coefficient::constant(Base::Point, small_rational(&mut rng)));
                }
                f
            })
            .collect();
        let pulled: Vec<FormalFunction> = args.iter().map(|f| phi_inv.apply(f)).collect();
        let want = phi.apply(&p.evaluate(&pulled).unwrap()).with_order(n);
        let small_args: Vec<FormalFunction> = args.iter().map(|f| f.with_order(n)).collect();
        let got = pf.full.evaluate(&small_args).unwrap();
        let extra = js.iter().map(|j| sym_degree(j)).max().unwrap_or(0);
        assert!(agree_through(&got, &want, n - extra), "trial {trial}");
        let lead_plus_rest = pf.leading.evaluate(&small_args).unwrap().try_add(&pf.remainder.evaluate(&small_args).unwrap()).unwrap();
        assert_eq!(lead_plus_rest, got, "trial {trial}");
    }
}

//! Acceptance criteria 1–10. Prints one line per criterion and exits nonzero
//! if any criterion fails or exceeds its time limit.

mod common;

use std::time::{Duration, Instant};

use common::*;
use fedosov_core::enveloping::{verify_coalgebra_morphism, verify_kapranov, verify_q_equals_lightning, Pbw};
use fedosov_core::fedosov::{verify_homotopy, Contraction};
use fedosov_core::geodesic::{
    closed_form_exp_1d, closed_form_transition_1d, compare_with_pbw, rk4_exp, rk4_inverse_exp, transition_jet,
};
use fedosov_core::operator::{
    decompose, exp_field, fixed_point_residual, log_of_solution, log_phi, operator_homotopy_failures,
    pushforward_polydiff, solve_phi, verify_intertwining, ShiftingOperator,
};
use fedosov_core::{
    Base, Coefficient, FormalFunction, LiePair, Rational, Scalar, Shape, SplittingOffset,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn criterion_1() -> Outcome {
    let mut checked = 0;
    for r in 1..=3 {
        let shape = Shape::new(r, r, Base::Point, 6);
        let pair = LiePair::new(Base::Point, r, r);
        let mut offset = SplittingOffset::zero(&pair);
        for i in 0..r {
            offset.set(i, (i + 1) % r, Coefficient::constant(Base::Point, rat(i as i64 + 1, 2)));
        }
        for (name, ctr) in [
            ("splitting 1", Contraction::reference()),
            ("splitting 2", Contraction::for_offset(&offset, shape)),
        ] {
            if let Some((f, res)) = verify_homotopy(shape, &ctr) {
                return Err(format!("r = {r}, {name}: kh + hk ≠ id − σ₀ on {f}, residual {res}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} shapes, all basis monomials to N = 6"))
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    for name in ["abelian", "solvable", "chart1d", "chart2d"] {
        let p = load(name);
        for splitting in [1, 2] {
            let (q1, q2) = fields(&p, splitting, 6);
            for (label, q) in [("∇₁", &q1), ("∇₂", &q2)] {
                let rep = q.verify_q_squared();
                check(rep.passed(), || {
                    let (f, r) = rep.failure.clone().unwrap();
                    format!("{name} {label} splitting {splitting}: Q²({f}) = {r}")
                })?;
                checked += rep.checked;
            }
        }
    }
    Ok(format!("{checked} monomials, N = 6"))
}

fn criterion_3() -> Outcome {
    let mut checked = 0;
    let n = 5;
    for name in SHIPPED {
        let p = load(name);
        for splitting in [1u8, 2] {
            let offset = if splitting == 1 { SplittingOffset::zero(&p.pair) } else { p.offset.clone() };
            let (q1, q2) = fields(&p, splitting, n);
            for (label, conn, q) in [("∇₁", &p.connection1, &q1), ("∇₂", p.connection2_or_first(), &q2)] {
                let pbw = Pbw::new(&p.pair, conn, &offset, n + 1).map_err(|e| e.to_string())?;
                let rep = verify_q_equals_lightning(q, &pbw).map_err(|e| e.to_string())?;
                check(rep.passed(), || {
                    let (f, r) = rep.failure.clone().unwrap();
                    format!("{name} {label} splitting {splitting}: (Q − d^∇⚡)({f}) = {r}")
                })?;
                checked += rep.checked;
            }
        }
    }
    Ok(format!("{checked} basis functions over {} presentations, N = {n}", SHIPPED.len()))
}

fn criterion_4() -> Outcome {
    let mut rng = rng(4);
    for trial in 0..100 {
        let shape = random_shape(&mut rng, 4);
        let pair = LiePair::new(Base::Point, shape.rank_b, shape.rank_a);
        let mut offset = SplittingOffset::zero(&pair);
        if trial % 2 == 1 && shape.rank_a > 0 {
            offset.set(0, 0, Coefficient::constant(Base::Point, small_rational(&mut rng)));
        }
        let ctr = Contraction::for_offset(&offset, shape);
        let d = random_op(&mut rng, shape, 8, -2);
        let failures = operator_homotopy_failures(&d, &ctr);
        check(failures.is_empty(), || format!("trial {trial}: {failures:?} fail on {d:?}"))?;
    }
    Ok("100 random operators, four identities each".into())
}

fn criterion_5() -> Outcome {
    let n = 6;
    let mut checked = 0;
    for name in ["solvable", "borel", "chart1d", "chart1d_x", "chart2d"] {
        let p = load(name);
        for splitting in [1u8, 2] {
            let (q1, q2) = fields(&p, splitting, n);
            let c1 = Contraction::reference();
            let c2 = contraction(&p, 2, n);
            let ctr = if splitting == 1 { &c1 } else { &c2 };
            let sol = solve_phi(&q1, &q2, ctr).map_err(|e| e.to_string())?;
            let fp = fixed_point_residual(sol.phi.op(), &q1, &q2, ctr).map_err(|e| e.to_string())?;
            check(fp.is_zero(), || format!("{name}: φ − 1 − h_♮∂φ = {fp:?}"))?;
            let (k, fail) = verify_intertwining(&sol.phi, &q1, &q2);
            check(fail.is_none(), || format!("{name}: φQ₂ − Q₁φ ≠ 0 on {}", fail.clone().unwrap().0))?;
            checked += k;
            let other = if splitting == 1 { &c2 } else { &c1 };
            let alt = solve_phi(&q1, &q2, other).map_err(|e| e.to_string())?;
            let a = serde_json::to_string(&sol.phi.to_json()).unwrap();
            let b = serde_json::to_string(&alt.phi.to_json()).unwrap();
            check(a == b, || format!("{name} splitting {splitting}: φ depends on the homotopy"))?;
        }
    }
    Ok(format!("{checked} intertwining checks, N = {n}"))
}

fn criterion_6() -> Outcome {
    let mut rng = rng(6);
    for trial in 0..50 {
        let shape = Shape::new(rng.gen_range(1..=2), 0, Base::Point, 5);
        if trial % 2 == 0 {
            let y = random_admissible_field(&mut rng, shape, 4);
            let phi = exp_field(&y).map_err(|e| e.to_string())?;
            let back = log_phi(&phi).map_err(|e| format!("trial {trial}: {e}"))?;
            check(back == y, || format!("trial {trial}: log(exp Y) ≠ Y for Y = {y:?}"))?;
        } else {
            let images = random_images(&mut rng, shape, 3);
            let phi = decompose(shape, 0, |f: &FormalFunction| substitution(&images, f)).map_err(|e| e.to_string())?;
            let y = log_phi(&phi).map_err(|e| format!("trial {trial}: {e}"))?;
            let again = exp_field(&y).map_err(|e| e.to_string())?;
            check(again == phi, || format!("trial {trial}: exp(log φ) ≠ φ"))?;
        }
    }
    for name in ["solvable", "chart1d", "chart1d_x"] {
        let p = load(name);
        let (q1, q2) = fields(&p, 1, 5);
        let sol = solve_phi(&q1, &q2, &Contraction::reference()).map_err(|e| e.to_string())?;
        let y = log_of_solution(&sol).map_err(|e| format!("{name}: {e}"))?;
        let e = exp_field(&y).map_err(|e| e.to_string())?;
        check(e == sol.phi, || format!("{name}: e^Y ≠ φ"))?;
    }
    Ok("50 random inputs plus 3 intertwiners, N = 5".into())
}

fn criterion_7() -> Outcome {
    let p = load("chart1d");
    let n = 6;
    let c = p.connection2_or_first().get(0, 0, 0).as_constant().unwrap();
    let rep = compare_with_pbw(&p.pair, &p.connection1, p.connection2_or_first(), &[Rational::from_int(0)], n)
        .map_err(|e| e.to_string())?;
    check(rep.passed(), || format!("three-way mismatch: {:?} {:?} {:?}", rep.jet_vs_pbw, rep.jet_vs_phi, rep.pbw_vs_phi))?;
    let psi = transition_jet(&p.connection1, p.connection2_or_first(), &[Rational::from_int(0)], n)
        .map_err(|e| e.to_string())?;
    for (m, w) in closed_form_transition_1d(&c, n).iter().enumerate() {
        check(psi.coefficient(0, &[m as u8]) == *w, || format!("jet of (e^(cv)−1)/c differs at order {m}"))?;
    }
    let cf = c.to_f64();
    let mut worst: f64 = 0.0;
    for v in [0.1, 0.05, -0.08, 0.02] {
        let x = rk4_exp(p.connection2_or_first(), &[0.0], &[v], 1e-3)[0];
        let want = (1.0 + cf * v).ln() / cf;
        worst = worst.max(((x - want) / want).abs());
        let target = rk4_exp(&p.connection1, &[0.0], &[v], 1e-3);
        let w = rk4_inverse_exp(p.connection2_or_first(), &[0.0], &target, 1e-3).map_err(|e| e.to_string())?[0];
        let want = ((cf * v).exp() - 1.0) / cf;
        worst = worst.max(((w - want) / want).abs());
    }
    check(worst < 1e-8, || format!("RK4 relative error {worst:e} ≥ 1e-8"))?;
    let ln = closed_form_exp_1d(&c, n);
    check(ln[2] == -c.clone() / Rational::from_int(2), || "quadratic exp coefficient is not −c/2".into())?;
    Ok(format!("{} matrix entries agree, N = {n}; RK4 worst relative error {worst:.1e}", rep.entries()))
}

fn criterion_8() -> Outcome {
    let mut checked = 0;
    for name in SHIPPED {
        let p = load(name);
        for offset in [SplittingOffset::zero(&p.pair), p.offset.clone()] {
            for conn in [&p.connection1, p.connection2_or_first()] {
                let pbw = Pbw::new(&p.pair, conn, &offset, 5).map_err(|e| e.to_string())?;
                checked += verify_coalgebra_morphism(&pbw, 5).map_err(|e| format!("{name}: {e}"))?;
                if p.pair.rank_a() > 0 {
                    checked += verify_kapranov(&pbw, 4).map_err(|e| format!("{name}: {e}"))?;
                }
            }
        }
    }
    Ok(format!("{checked} coalgebra and Kapranov checks, degree ≤ 5"))
}

fn criterion_9() -> Outcome {
    let mut rng = rng(9);
    for trial in 0..100 {
        let shape = Shape::new(rng.gen_range(1..=2), 0, Base::Point, 4);
        let y = random_admissible_field(&mut rng, shape, 3);
        let i = random_sym(&mut rng, shape.rank_b, 0, 2);
        let arity = rng.gen_range(1..=2);
        let js: Vec<_> = (0..arity).map(|_| random_sym(&mut rng, shape.rank_b, 0, 2)).collect();
        let c = Coefficient::constant(Base::Point, small_rational(&mut rng));
        let pf = pushforward_polydiff(&y, &i, &js, &c).map_err(|e| e.to_string())?;
        let ord = pf.remainder.filtration_order();
        let deg = fedosov_core::function::sym_degree(&i);
        check(ord.is_none_or(|o| o > deg), || {
            format!("trial {trial}: remainder has order {ord:?} ≤ |I| = {deg}")
        })?;
    }
    Ok("100 random (Y, P) pairs, N = 4".into())
}

fn criterion_10() -> Outcome {
    let mut rng = rng(10);
    for trial in 0..100 {
        let shape = random_shape(&mut rng, 4);
        let shift = rng.gen_range(-1..=1);
        let d = random_op(&mut rng, shape, 8, shift);
        let want = ShiftingOperator::new(d.clone(), shift).map_err(|e| e.to_string())?;
        let got = decompose(shape, shift, |f: &FormalFunction| d.apply(f)).map_err(|e| e.to_string())?;
        check(got == want, || format!("trial {trial}: round trip changed {d:?}"))?;
    }
    Ok("100 random component families".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("function-level homotopy", criterion_1, 1),
        ("Fedosov flatness Q² = 0", criterion_2, 10),
        ("Q = d^∇⚡ (PBW vs Fedosov)", criterion_3, 30),
        ("operator homotopy identities", criterion_4, 10),
        ("intertwiner φ", criterion_5, 60),
        ("exp/log coherence", criterion_6, 30),
        ("geodesic anchor", criterion_7, 10),
        ("coalgebra layer", criterion_8, 10),
        ("pushforward decomposition", criterion_9, 30),
        ("decomposition uniqueness", criterion_10, 5),
    ];
    let mut failed = 0;
    for (n, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let within = elapsed <= Duration::from_secs(*limit);
        let (status, detail) = match (&outcome, within) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the time limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {:>2} {status} {name}: {detail} [{:.2}s of {limit}s]",
            n + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

//! The checks behind each subcommand.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context as _, Result};
use fedosov_core::enveloping::{verify_coalgebra_morphism, verify_kapranov, verify_lightning_flat, verify_q_equals_lightning, Pbw};
use fedosov_core::fedosov::{basis_monomials, require_order, verify_homotopy, Contraction};
use fedosov_core::function::{sym_basis_upto, sym_degree, sym_unit};
use fedosov_core::geodesic::{compare_with_pbw, rk4_exp, rk4_inverse_exp, transition_jet, MatrixMismatch};
use fedosov_core::operator::{
    decompose, delta_q, exp_field, fixed_point_residual, is_multiplicative_on, log_of_solution, log_phi,
    operator_homotopy_failures, pushforward_polydiff, solve_phi, verify_intertwining, PhiSolution,
};
use fedosov_core::presentation::connection_from_json;
use fedosov_core::{
    Base, Coefficient, Connection, Error, FedosovField, FormalFunction, LiePair, Presentation, Rational, Scalar,
    SplittingOffset, SymIndex,
};
use serde_json::{json, Value};

use crate::config::{Cli, Command, GeodesicArgs};
use crate::report::{sha256_hex, Check, Report, Tag};

/// Bad input: unreadable or invalid presentation, unusable flags. Exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Engine errors other than identity failures come from the inputs.
fn engine(e: Error) -> anyhow::Error {
    input(e.to_string())
}

struct Section {
    checks: Vec<Check>,
    data: Value,
}

/// A check backed by an engine verifier that reports failures as errors.
fn verified(name: &str, tag: Tag, r: fedosov_core::Result<usize>) -> Result<Check> {
    match r {
        Ok(n) => Ok(Check::pass(name, tag, n)),
        Err(Error::IdentityFailure(msg)) => Ok(Check::fail(name, tag, 0, "nonzero".into(), Some(msg))),
        Err(e) => Err(engine(e)),
    }
}

fn contraction(p: &Presentation, splitting: u8, order: usize) -> Contraction<Rational> {
    if splitting == 1 {
        Contraction::reference()
    } else {
        Contraction::for_offset(&p.offset, p.pair.shape(order))
    }
}

fn offset(p: &Presentation, splitting: u8) -> SplittingOffset {
    if splitting == 1 {
        SplittingOffset::zero(&p.pair)
    } else {
        p.offset.clone()
    }
}

fn connections(p: &Presentation) -> [(&'static str, &Connection); 2] {
    [("connection1", &p.connection1), ("connection2", p.connection2_or_first())]
}

fn fields(p: &Presentation, order: usize, ctr: &Contraction<Rational>) -> Result<(FedosovField, FedosovField)> {
    let q1 = FedosovField::new(&p.pair, &p.connection1, order, ctr).map_err(engine)?;
    let q2 = FedosovField::new(&p.pair, p.connection2_or_first(), order, ctr).map_err(engine)?;
    Ok((q1, q2))
}

fn load(path: Option<&Path>) -> Result<Presentation> {
    let path = path.ok_or_else(|| input("--config is required for this command"))?;
    Presentation::load(path).map_err(engine)
}

fn require_valid(p: &Presentation) -> Result<()> {
    let d = p.diagnostics();
    if d.is_empty() {
        Ok(())
    } else {
        Err(input(format!("invalid presentation: {}", d.join("; "))))
    }
}

fn validate(p: &Presentation) -> Section {
    let mut checks = Vec::new();
    let violations: Vec<String> = p.pair.validate().iter().map(|v| v.to_string()).collect();
    let frame = p.pair.frame();
    let triples = frame * frame * frame;
    checks.push(if violations.is_empty() {
        Check::pass("antisymmetry, Jacobi and A-closure", Tag::LiePairStructure, triples)
    } else {
        Check::fail(
            "antisymmetry, Jacobi and A-closure",
            Tag::LiePairStructure,
            triples,
            format!("{} violations", violations.len()),
            Some(violations.join("; ")),
        )
    });
    for (label, conn) in connections(p) {
        let name = format!("{label} is torsion-free");
        checks.push(match conn.require_torsion_free(&p.pair) {
            Ok(()) => Check::pass(name, Tag::TorsionFree, frame * frame),
            Err(e) => Check::fail(name, Tag::TorsionFree, frame * frame, "nonzero".into(), Some(e.to_string())),
        });
        let bott = conn.bott_check(&p.pair);
        let name = format!("{label} extends the Bott connection");
        checks.push(match bott.first() {
            None => Check::pass(name, Tag::BottExtension, p.pair.rank_a() * p.pair.rank_b()),
            Some(e) => Check::fail(name, Tag::BottExtension, 0, format!("{} entries", bott.len()), Some(format!("{e:?}"))),
        });
    }
    let data = json!({
        "name": p.name,
        "mode": if p.pair.base() == Base::Point { "POINT" } else { "CHART" },
        "rank_A": p.pair.rank_a(),
        "rank_B": p.pair.rank_b(),
        "chart_dim": p.pair.base().dim(),
        "truncation_order": p.order,
    });
    Section { checks, data }
}

fn fedosov(p: &Presentation, n: usize, splitting: u8) -> Result<Section> {
    let ctr = contraction(p, splitting, n);
    let shape = p.pair.shape(n);
    let mut checks = vec![Check::exact(
        "kh + hk = id − σ₀ on basis monomials",
        Tag::FunctionHomotopy,
        basis_monomials::<Rational>(shape, n).len(),
        verify_homotopy(shape, &ctr),
    )];
    let mut data = serde_json::Map::new();
    let (q1, q2) = fields(p, n, &ctr)?;
    for ((label, _), q) in connections(p).into_iter().zip([&q1, &q2]) {
        let gauge = ctr.h_natural(q.x());
        checks.push(if gauge.is_zero() {
            Check::pass(format!("{label}: h_♮X = 0"), Tag::FedosovGauge, 1)
        } else {
            Check::fail(format!("{label}: h_♮X = 0"), Tag::FedosovGauge, 1, format!("{:?}", gauge.to_json()), None)
        });
        let ord = q.x().filtration_order();
        checks.push(match ord {
            Some(o) if o < 2 => Check::fail(
                format!("{label}: X has filtration order ≥ 2"),
                Tag::FedosovFiltration,
                1,
                o.to_string(),
                None,
            ),
            _ => Check::pass(format!("{label}: X has filtration order ≥ 2"), Tag::FedosovFiltration, 1),
        });
        let rep = q.verify_q_squared();
        checks.push(Check::exact(format!("{label}: Q² = 0"), Tag::QSquared, rep.checked, rep.failure));
        data.insert(label.into(), json!({ "x": q.x().to_json() }));
    }
    Ok(Section {
        checks,
        data: Value::Object(data),
    })
}

fn pbw(p: &Presentation, n: usize, splitting: u8) -> Result<Section> {
    let ctr = contraction(p, splitting, n);
    let off = offset(p, splitting);
    let (q1, q2) = fields(p, n, &ctr)?;
    let mut checks = Vec::new();
    let mut data = serde_json::Map::new();
    for ((label, conn), q) in connections(p).into_iter().zip([&q1, &q2]) {
        let pbw = Pbw::new(&p.pair, conn, &off, n + 1).map_err(engine)?;
        checks.push(verified(
            &format!("{label}: Δ∘pbw = (pbw⊗pbw)∘Δ"),
            Tag::PbwCoalgebra,
            verify_coalgebra_morphism(&pbw, n),
        )?);
        if p.pair.rank_a() > 0 {
            checks.push(verified(
                &format!("{label}: Kapranov action by coderivations"),
                Tag::KapranovAction,
                verify_kapranov(&pbw, n),
            )?);
        }
        checks.push(verified(&format!("{label}: ∇⚡ is flat"), Tag::LightningFlat, verify_lightning_flat(&pbw))?);
        let rep = verify_q_equals_lightning(q, &pbw).map_err(engine)?;
        checks.push(Check::exact(format!("{label}: Q = d^∇⚡"), Tag::QEqualsLightning, rep.checked, rep.failure));
        let table: Vec<Value> = sym_basis_upto(p.pair.rank_b(), n)
            .iter()
            .map(|k| json!({ "k": k.as_slice(), "pbw": pbw.basis_image(k).to_json() }))
            .collect();
        data.insert(label.into(), Value::Array(table));
    }
    Ok(Section {
        checks,
        data: Value::Object(data),
    })
}

struct Solved {
    q1: FedosovField,
    q2: FedosovField,
    sol: PhiSolution<Rational>,
}

fn solve(p: &Presentation, n: usize, splitting: u8) -> Result<Solved> {
    let ctr = contraction(p, splitting, n);
    let (q1, q2) = fields(p, n, &ctr)?;
    let sol = solve_phi(&q1, &q2, &ctr).map_err(engine)?;
    Ok(Solved { q1, q2, sol })
}

fn phi(p: &Presentation, n: usize, splitting: u8) -> Result<Section> {
    let ctr = contraction(p, splitting, n);
    let Solved { q1, q2, sol } = solve(p, n, splitting)?;
    let shape = p.pair.shape(n);
    let mut checks = Vec::new();

    let fp = fixed_point_residual(sol.phi.op(), &q1, &q2, &ctr).map_err(engine)?;
    checks.push(if fp.is_zero() {
        Check::pass("φ = 1 + h_♮∂(φ)", Tag::PhiFixedPoint, fp.len().max(1))
    } else {
        Check::fail("φ = 1 + h_♮∂(φ)", Tag::PhiFixedPoint, 1, format!("{:?}", fp), None)
    });

    let (k, fail) = verify_intertwining(&sol.phi, &q1, &q2);
    checks.push(Check::exact("φ∘Q₂ = Q₁∘φ", Tag::Intertwining, k, fail));

    let other = contraction(p, 3 - splitting, n);
    let alt = solve_phi(&q1, &q2, &other).map_err(engine)?;
    checks.push(if alt.phi == sol.phi {
        Check::pass("φ is independent of the homotopy", Tag::PhiUniqueness, 1)
    } else {
        let mut diff = alt.phi.op().clone();
        diff.sub_assign(sol.phi.op());
        Check::fail("φ is independent of the homotopy", Tag::PhiUniqueness, 1, format!("{diff:?}"), None)
    });

    let low: Vec<FormalFunction> = basis_monomials::<Rational>(shape, n / 2)
        .into_iter()
        .filter(|f| f.form_degrees().iter().all(|&d| d <= 1))
        .collect();
    let mut pairs = 0;
    let mut witness = None;
    'outer: for f in &low {
        for g in &low {
            pairs += 1;
            if !is_multiplicative_on(&sol.phi, f, g) {
                witness = Some((format!("{f} · {g}"), "nonzero"));
                break 'outer;
            }
        }
    }
    checks.push(Check::exact("φ(fg) = φ(f)φ(g)", Tag::AlgebraMorphism, pairs, witness));

    let dq = delta_q(&q1, &q2).map_err(engine)?;
    let mut ops = vec![("ΔQ".to_string(), dq)];
    ops.extend(sol.terms.iter().enumerate().map(|(i, t)| (format!("(h_♮∂)^{i}(1)"), t.clone())));
    let failure = ops.iter().find_map(|(name, op)| {
        let f = operator_homotopy_failures(op, &ctr);
        (!f.is_empty()).then(|| (name.clone(), f.join(", ")))
    });
    checks.push(Check::exact("δ² = 0, h_♮² = 0, h_♮δh_♮ = h_♮, δh_♮ + h_♮δ = id − σ₀", Tag::OperatorHomotopy, ops.len(), failure));

    let rebuilt = decompose(shape, 0, |f: &FormalFunction| sol.phi.apply(f)).map_err(engine)?;
    checks.push(if rebuilt == sol.phi {
        Check::pass("φ is recovered from its action", Tag::Decomposition, sol.phi.op().len())
    } else {
        Check::fail("φ is recovered from its action", Tag::Decomposition, sol.phi.op().len(), "nonzero".into(), None)
    });

    let data = json!({ "phi": sol.phi.to_json(), "iterations": sol.terms.len() });
    Ok(Section { checks, data })
}

fn log(p: &Presentation, n: usize, splitting: u8) -> Result<Section> {
    let Solved { sol, .. } = solve(p, n, splitting)?;
    let mut checks = Vec::new();
    let y = match log_of_solution(&sol) {
        Ok(y) => y,
        Err(Error::IdentityFailure(msg)) => {
            checks.push(Check::fail("recursion and series give the same Y", Tag::LogBackends, 1, "nonzero".into(), Some(msg)));
            return Ok(Section { checks, data: Value::Null });
        }
        Err(e) => return Err(engine(e)),
    };
    checks.push(Check::pass("recursion and series give the same Y", Tag::LogBackends, 1));
    checks.push(verified("series on φ − 1 agrees", Tag::LogBackends, log_phi(&sol.phi).map(|_| 1))?);

    let e = exp_field(&y).map_err(engine)?;
    checks.push(if e == sol.phi {
        Check::pass("e^Y = φ", Tag::ExpLog, 1)
    } else {
        Check::fail("e^Y = φ", Tag::ExpLog, 1, "nonzero".into(), None)
    });
    let ord = y.filtration_order();
    checks.push(match ord {
        Some(o) if o < 2 => Check::fail("Y has filtration order ≥ 2", Tag::ExpLog, 1, o.to_string(), None),
        _ => Check::pass("Y has filtration order ≥ 2", Tag::ExpLog, 1),
    });

    let r = p.pair.rank_b();
    let one = Coefficient::one(p.pair.base());
    let e1 = sym_unit(r, 0);
    let mut e1e1 = e1.clone();
    e1e1[0] = 2;
    let mut e1er = e1.clone();
    e1er[r - 1] += 1;
    let zero: SymIndex = SymIndex::from_elem(0, r);
    let mut cases = 0;
    let mut failure = None;
    for i in [&zero, &e1] {
        for j in [&e1, &e1e1, &e1er] {
            let pf = pushforward_polydiff(&y, i, std::slice::from_ref(j), &one).map_err(engine)?;
            cases += 1;
            if let Some(o) = pf.remainder.filtration_order() {
                if o <= sym_degree(i) && failure.is_none() {
                    failure = Some((format!("η^{:?} ⊗ ∂^{:?}", i.as_slice(), j.as_slice()), format!("remainder order {o}")));
                }
            }
        }
    }
    checks.push(Check::exact("pushforward remainder has order > |I|", Tag::Pushforward, cases, failure));

    Ok(Section {
        checks,
        data: json!({ "y": y.to_json() }),
    })
}

struct GeodesicSetup {
    pair: LiePair,
    conn1: Connection,
    conn2: Connection,
    point: Vec<Rational>,
    order: usize,
}

fn is_tangent(pair: &LiePair) -> bool {
    pair.rank_a() == 0 && pair.base() == Base::Chart(pair.rank_b())
}

/// Accepts `p/q`, integers and terminating decimals such as `-0.25`.
fn parse_rational(t: &str) -> Option<Rational> {
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let num: Rational = format!("{int}{frac}").parse().ok()?;
        let den: Rational = format!("1{}", "0".repeat(frac.len())).parse().ok()?;
        Some(num / den)
    } else {
        t.parse().ok()
    }
}

fn parse_point(s: &str) -> Result<Vec<Rational>> {
    s.split(',')
        .map(|t| parse_rational(t.trim()).ok_or_else(|| input(format!("--point: {t:?} is not a rational"))))
        .collect()
}

fn parse_connection(pair: &LiePair, spec: &str) -> Result<Connection> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?
    } else {
        spec.to_string()
    };
    let v: Value = serde_json::from_str(&text).map_err(|e| input(format!("connection spec: {e}")))?;
    let conn = connection_from_json(pair, &v).map_err(engine)?;
    conn.require_torsion_free(pair).map_err(engine)?;
    Ok(conn)
}

fn geodesic_setup(cli: &Cli, args: &GeodesicArgs) -> Result<GeodesicSetup> {
    let point = args.point.as_deref().map(parse_point).transpose()?;
    let (pair, mut conn1, mut conn2, order, dim) = match &cli.common.config {
        Some(path) => {
            let p = load(Some(path))?;
            require_valid(&p)?;
            if !is_tangent(&p.pair) {
                return Err(input("geodesic comparison needs a CHART presentation with rank_A = 0 and rank_B = chart_dim"));
            }
            let dim = p.pair.rank_b();
            let c2 = p.connection2_or_first().clone();
            (p.pair.clone(), p.connection1.clone(), c2, p.order, dim)
        }
        None => {
            let dim = point
                .as_ref()
                .map(Vec::len)
                .ok_or_else(|| input("geodesic needs --config or --point"))?;
            let pair = LiePair::tangent(dim);
            let zero = Connection::zero(&pair);
            (pair, zero.clone(), zero, 4, dim)
        }
    };
    if let Some(s) = &args.connection1 {
        conn1 = parse_connection(&pair, s)?;
    }
    if let Some(s) = &args.connection2 {
        conn2 = parse_connection(&pair, s)?;
    }
    let point = point.unwrap_or_else(|| vec![Rational::from_int(0); dim]);
    if point.len() != dim {
        return Err(input(format!("--point has {} coordinates, the chart has {dim}", point.len())));
    }
    Ok(GeodesicSetup {
        pair,
        conn1,
        conn2,
        point,
        order: cli.common.order.unwrap_or(order),
    })
}

fn mismatch_check(name: &str, tag: Tag, entries: usize, m: &Option<MatrixMismatch<Rational>>) -> Check {
    match m {
        None => Check::pass(name, tag, entries),
        Some(m) => Check::fail(
            name,
            tag,
            entries,
            (m.left.clone() - m.right.clone()).to_string(),
            Some(format!("M[{:?}][{:?}]: {} vs {}", m.row.as_slice(), m.col.as_slice(), m.left, m.right)),
        ),
    }
}

/// Sampling radius for the RK4 comparison, small enough that the jet
/// truncated at `order` is accurate to well below 1e-8 relative.
fn sample_radius(order: usize) -> f64 {
    0.1f64.powf(10.0 / order as f64).min(0.05)
}

fn geodesic(g: &GeodesicSetup) -> Result<Section> {
    require_order(g.order, 2, "geodesic").map_err(engine)?;
    let rep = compare_with_pbw(&g.pair, &g.conn1, &g.conn2, &g.point, g.order).map_err(engine)?;
    let n = rep.entries();
    let mut checks = vec![
        mismatch_check("geodesic jet = pbw₂⁻¹∘pbw₁", Tag::GeodesicJetPbw, n, &rep.jet_vs_pbw),
        mismatch_check("geodesic jet = e^Y", Tag::GeodesicJetPhi, n, &rep.jet_vs_phi),
        mismatch_check("pbw₂⁻¹∘pbw₁ = e^Y", Tag::GeodesicPbwPhi, n, &rep.pbw_vs_phi),
    ];

    let psi = transition_jet(&g.conn1, &g.conn2, &g.point, g.order).map_err(engine)?;
    let dim = g.point.len();
    let p: Vec<f64> = g.point.iter().map(Scalar::to_f64).collect();
    let radius = sample_radius(g.order);
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .flat_map(|k| {
            [radius, -radius].map(|s| {
                let mut v = vec![0.0; dim];
                v[k] = s;
                v
            })
        })
        .collect();
    dirs.push(vec![0.6 * radius; dim]);
    let mut worst: f64 = 0.0;
    for v in &dirs {
        let target = rk4_exp(&g.conn1, &p, v, 1e-3);
        let w = rk4_inverse_exp(&g.conn2, &p, &target, 1e-3).map_err(engine)?;
        let jet = psi.evaluate_f64(v);
        let norm = jet.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err = w.iter().zip(&jet).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / norm;
        worst = worst.max(err);
    }
    let name = "RK4 exp₂⁻¹∘exp₁ matches the jet to 1e-8";
    checks.push(if worst < 1e-8 {
        Check::pass(name, Tag::GeodesicRk4, dirs.len())
    } else {
        Check::fail(name, Tag::GeodesicRk4, dirs.len(), format!("{worst:.1e}"), None)
    });

    let data = json!({
        "point": g.point.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "order": g.order,
        "rk4_radius": format!("{:.1e}", sample_radius(g.order)),
        "pipelines": ["geodesic jet of exp₂⁻¹∘exp₁", "pbw₂⁻¹∘pbw₁", "e^Y with Y = log φ"],
        "entries": n,
        "transition_jet": psi.to_json(),
    });
    Ok(Section { checks, data })
}

fn prefixed(suite: &str, s: Section, into: &mut Vec<Check>) {
    for mut c in s.checks {
        c.name = format!("{suite}: {}", c.name);
        into.push(c);
    }
}

fn verify_all(p: &Presentation, n: usize, splitting: u8) -> Result<Section> {
    let mut checks = Vec::new();
    let mut suites = vec!["validate"];
    let v = validate(p);
    let ok = v.checks.iter().all(Check::passed);
    prefixed("validate", v, &mut checks);
    if ok {
        prefixed("fedosov", fedosov(p, n, splitting)?, &mut checks);
        prefixed("pbw", pbw(p, n, splitting)?, &mut checks);
        prefixed("phi", phi(p, n, splitting)?, &mut checks);
        prefixed("log", log(p, n, splitting)?, &mut checks);
        suites.extend(["fedosov", "pbw", "phi", "log"]);
        if is_tangent(&p.pair) {
            let g = GeodesicSetup {
                pair: p.pair.clone(),
                conn1: p.connection1.clone(),
                conn2: p.connection2_or_first().clone(),
                point: vec![Rational::from_int(0); p.pair.rank_b()],
                order: n,
            };
            prefixed("geodesic", geodesic(&g)?, &mut checks);
            suites.push("geodesic");
        }
    }
    Ok(Section {
        checks,
        data: json!({ "suites": suites }),
    })
}

/// Runs one command and assembles its report.
pub fn run(cli: &Cli) -> Result<Report> {
    let start = Instant::now();
    let common = &cli.common;
    let (section, inputs) = match &cli.command {
        Command::Geodesic(args) => {
            let g = geodesic_setup(cli, args)?;
            let conn_json = |c: &Connection| {
                let p = Presentation {
                    name: None,
                    pair: g.pair.clone(),
                    offset: SplittingOffset::zero(&g.pair),
                    connection1: c.clone(),
                    connection2: None,
                    order: g.order,
                };
                p.to_json()["connection1"].clone()
            };
            let inputs = json!({
                "dim": g.point.len(),
                "connection1": conn_json(&g.conn1),
                "connection2": conn_json(&g.conn2),
                "point": g.point.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "order": g.order,
            });
            (geodesic(&g)?, inputs)
        }
        cmd => {
            let p = load(common.config.as_deref())?;
            let n = common.order.unwrap_or(p.order);
            let inputs = json!({
                "presentation": p.to_json(),
                "order": n,
                "splitting": common.splitting,
            });
            if !matches!(cmd, Command::Validate) {
                if !matches!(cmd, Command::VerifyAll) {
                    require_valid(&p)?;
                }
                require_order(n, 2, cmd.name()).map_err(engine)?;
            }
            let s = match cmd {
                Command::Validate => validate(&p),
                Command::Fedosov => fedosov(&p, n, common.splitting)?,
                Command::Pbw => pbw(&p, n, common.splitting)?,
                Command::Phi => phi(&p, n, common.splitting)?,
                Command::Log => log(&p, n, common.splitting)?,
                Command::VerifyAll => verify_all(&p, n, common.splitting)?,
                Command::Geodesic(_) => unreachable!(),
            };
            (s, inputs)
        }
    };
    let digest_input = json!({ "command": cli.command.name(), "inputs": inputs });
    Ok(Report {
        command: cli.command.name().into(),
        inputs_digest: sha256_hex(digest_input.to_string().as_bytes()),
        checks: section.checks,
        data: section.data,
        duration_ms: start.elapsed().as_millis() as u64,
    })
}

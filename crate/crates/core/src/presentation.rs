//! JSON presentations of a Lie pair with a second splitting and two
//! connections.
//!
//! Frame indices in files are 1-based: `1..=rank_B` are the lifts `b̃_i`,
//! `rank_B+1..=rank_B+rank_A` are the `a_α`. Splitting offsets index `α`
//! from 1 within `A`. Coefficients are rational strings, or on a chart arrays
//! of `[exponents, "p/q"]` pairs.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::coeff::{Base, Coeff};
use crate::error::{Error, Result};
use crate::lie_pair::{Connection, LiePair, SplittingOffset};
use crate::scalar::Scalar;

/// A parsed presentation file.
#[derive(Clone, Debug)]
pub struct Presentation<S: Scalar> {
    pub name: Option<String>,
    pub pair: LiePair<S>,
    pub offset: SplittingOffset<S>,
    pub connection1: Connection<S>,
    pub connection2: Option<Connection<S>>,
    pub order: usize,
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Parse(format!("missing field {key:?}")))
}

fn usize_field(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    field(obj, key)?
        .as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::Parse(format!("field {key:?} must be a non-negative integer")))
}

fn entries<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a [Value]> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(other) => Err(Error::Parse(format!("field {key:?} must be an array, got {other}"))),
    }
}

/// Reads the 1-based integer `key` of an entry and checks `1 ≤ n ≤ max`.
fn index(entry: &Value, key: &str, max: usize, what: &str) -> Result<usize> {
    let n = entry
        .get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse(format!("{what} entry {entry} needs integer {key:?}")))?
        as usize;
    if n == 0 || n > max {
        return Err(Error::Parse(format!(
            "{what} entry {entry}: {key} = {n} out of range 1..={max}"
        )));
    }
    Ok(n - 1)
}

fn coeff<S: Scalar>(entry: &Value, base: Base, what: &str) -> Result<Coeff<S>> {
    let v = entry
        .get("coeff")
        .ok_or_else(|| Error::Parse(format!("{what} entry {entry} needs \"coeff\"")))?;
    Coeff::from_json(v, base)
}

fn parse_connection<S: Scalar>(
    obj: &Map<String, Value>,
    key: &str,
    pair: &LiePair<S>,
) -> Result<Option<Connection<S>>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => connection_entries(v, pair, key).map(Some),
    }
}

fn connection_entries<S: Scalar>(value: &Value, pair: &LiePair<S>, what: &str) -> Result<Connection<S>> {
    let list = value
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{what} must be an array of entries")))?;
    let mut conn = Connection::zero(pair);
    for e in list {
        let u = index(e, "u", pair.frame(), what)?;
        let i = index(e, "i", pair.rank_b(), what)?;
        let k = index(e, "k", pair.rank_b(), what)?;
        let c = coeff(e, pair.base(), what)?;
        let mut sum = conn.get(u, i, k).clone();
        sum.add_assign_ref(&c);
        conn.set(u, i, k, sum);
    }
    Ok(conn)
}

/// A connection given as a bare array of `{u, i, k, coeff}` entries.
pub fn connection_from_json<S: Scalar>(pair: &LiePair<S>, value: &Value) -> Result<Connection<S>> {
    connection_entries(value, pair, "connection")
}

impl<S: Scalar> Presentation<S> {
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("presentation must be a JSON object".into()))?;
        let mode = field(obj, "mode")?
            .as_str()
            .ok_or_else(|| Error::Parse("\"mode\" must be a string".into()))?;
        let rank_a = usize_field(obj, "rank_A")?;
        let rank_b = usize_field(obj, "rank_B")?;
        let base = match mode.to_ascii_uppercase().as_str() {
            "POINT" => Base::Point,
            "CHART" => Base::Chart(usize_field(obj, "chart_dim")?),
            other => return Err(Error::Parse(format!("unknown mode {other:?}"))),
        };
        if rank_b == 0 {
            return Err(Error::Parse("rank_B must be positive".into()));
        }
        if rank_a + rank_b > 32 {
            return Err(Error::Parse("frame rank above 32 is not supported".into()));
        }
        let order = usize_field(obj, "truncation_order")?;
        let mut pair = LiePair::new(base, rank_b, rank_a);
        let frame = pair.frame();
        for e in entries(obj, "bracket")? {
            let u = index(e, "u", frame, "bracket")?;
            let v = index(e, "v", frame, "bracket")?;
            let w = index(e, "w", frame, "bracket")?;
            if u == v {
                return Err(Error::Parse(format!("bracket entry {e} pairs an element with itself")));
            }
            let c = coeff(e, base, "bracket")?;
            let mut sum = pair.c(u, v, w).clone();
            sum.add_assign_ref(&c);
            pair.set_bracket(u, v, w, sum);
        }
        for e in entries(obj, "anchor")? {
            let Base::Chart(dim) = base else {
                return Err(Error::Parse("anchor entries need CHART mode".into()));
            };
            let u = index(e, "u", frame, "anchor")?;
            let mu = index(e, "mu", dim, "anchor")?;
            let c = coeff(e, base, "anchor")?;
            pair.set_anchor(u, mu, c);
        }
        let mut offset = SplittingOffset::zero(&pair);
        for e in entries(obj, "splitting2_offset")? {
            let i = index(e, "i", rank_b, "splitting2_offset")?;
            let alpha = index(e, "alpha", rank_a, "splitting2_offset")?;
            offset.set(i, alpha, coeff(e, base, "splitting2_offset")?);
        }
        let connection1 = parse_connection(obj, "connection1", &pair)?
            .ok_or_else(|| Error::Parse("missing field \"connection1\"".into()))?;
        let connection2 = parse_connection(obj, "connection2", &pair)?;
        Ok(Presentation {
            name: obj.get("name").and_then(Value::as_str).map(str::to_owned),
            pair,
            offset,
            connection1,
            connection2,
            order,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Structural identities of the pair, then torsion-freeness of each
    /// connection. Empty when the presentation is usable.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .pair
            .validate()
            .into_iter()
            .map(|v| v.to_string())
            .collect();
        if !out.is_empty() {
            return out;
        }
        for (name, conn) in [("connection1", Some(&self.connection1)), ("connection2", self.connection2.as_ref())] {
            if let Some(c) = conn {
                if let Err(e) = c.require_torsion_free(&self.pair) {
                    out.push(format!("{name}: {e}"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidPresentation(d.join("; ")))
        }
    }

    /// The second connection, or the first when only one is given.
    pub fn connection2_or_first(&self) -> &Connection<S> {
        self.connection2.as_ref().unwrap_or(&self.connection1)
    }

    pub fn to_json(&self) -> Value {
        let p = &self.pair;
        let frame = p.frame();
        let mut bracket = Vec::new();
        for u in 0..frame {
            for v in u + 1..frame {
                for w in 0..frame {
                    let c = p.c(u, v, w);
                    if !c.is_zero() {
                        bracket.push(json!({"u": u + 1, "v": v + 1, "w": w + 1, "coeff": c.to_json()}));
                    }
                }
            }
        }
        let mut anchor = Vec::new();
        for u in 0..frame {
            for mu in 0..p.base().dim() {
                let c = p.rho(u, mu);
                if !c.is_zero() {
                    anchor.push(json!({"u": u + 1, "mu": mu + 1, "coeff": c.to_json()}));
                }
            }
        }
        let mut offset = Vec::new();
        for i in 0..p.rank_b() {
            for alpha in 0..p.rank_a() {
                let c = self.offset.get(i, alpha);
                if !c.is_zero() {
                    offset.push(json!({"i": i + 1, "alpha": alpha + 1, "coeff": c.to_json()}));
                }
            }
        }
        let conn = |c: &Connection<S>| {
            let mut out = Vec::new();
            for u in 0..frame {
                for i in 0..p.rank_b() {
                    for k in 0..p.rank_b() {
                        let g = c.get(u, i, k);
                        if !g.is_zero() {
                            out.push(json!({"u": u + 1, "i": i + 1, "k": k + 1, "coeff": g.to_json()}));
                        }
                    }
                }
            }
            Value::Array(out)
        };
        let mut obj = Map::new();
        if let Some(n) = &self.name {
            obj.insert("name".into(), json!(n));
        }
        obj.insert(
            "mode".into(),
            json!(if p.base() == Base::Point { "POINT" } else { "CHART" }),
        );
        obj.insert("rank_A".into(), json!(p.rank_a()));
        obj.insert("rank_B".into(), json!(p.rank_b()));
        obj.insert("chart_dim".into(), json!(p.base().dim()));
        obj.insert("bracket".into(), Value::Array(bracket));
        obj.insert("anchor".into(), Value::Array(anchor));
        obj.insert("splitting2_offset".into(), Value::Array(offset));
        obj.insert("connection1".into(), conn(&self.connection1));
        if let Some(c) = &self.connection2 {
            obj.insert("connection2".into(), conn(c));
        }
        obj.insert("truncation_order".into(), json!(self.order));
        Value::Object(obj)
    }
}

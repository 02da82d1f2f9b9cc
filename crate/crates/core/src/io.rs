//! JSON encoding of POVMs and results, plus a canonical writer.
//!
//! POVM files look like `{"dim": d, "effects": [[[re, im], ...], ...]}` with
//! each effect stored row-major as `d * d` complex pairs. The canonical
//! writer sorts object keys and prints every float with 17 significant
//! digits, so that reading and re-writing a file reproduces it byte for byte.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, ComplexVector, HermitianOperator};
use crate::naimark::Dilation;
use crate::povm::{Povm, PostProcessing, SimulationStrategy};
use crate::simulability::{PartKind, VisibilityResult};
use crate::tol::Tolerances;
use crate::C64;

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encoding")),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string encoding"));
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn complex_to_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn complex_from_json(v: &Value) -> Result<C64> {
    let pair = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| parse_err("expected a [re, im] pair"))?;
    let re = pair[0].as_f64().ok_or_else(|| parse_err("real part is not a number"))?;
    let im = pair[1].as_f64().ok_or_else(|| parse_err("imaginary part is not a number"))?;
    Ok(C64::new(re, im))
}

/// Row-major list of `[re, im]` pairs.
pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    let mut cells = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            cells.push(complex_to_json(m[(i, j)]));
        }
    }
    Value::Array(cells)
}

pub fn matrix_from_json(v: &Value, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    let cells = v.as_array().ok_or_else(|| parse_err("matrix must be an array of [re, im] pairs"))?;
    if cells.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!("expected {} entries, found {}", rows * cols, cells.len())));
    }
    let mut m = ComplexMatrix::zeros(rows, cols);
    for (k, c) in cells.iter().enumerate() {
        m[(k / cols, k % cols)] = complex_from_json(c)?;
    }
    Ok(m)
}

pub fn vector_to_json(v: &ComplexVector) -> Value {
    Value::Array(v.iter().map(|z| complex_to_json(*z)).collect())
}

pub fn vector_from_json(v: &Value) -> Result<ComplexVector> {
    let cells = v.as_array().ok_or_else(|| parse_err("vector must be an array of [re, im] pairs"))?;
    let entries = cells.iter().map(complex_from_json).collect::<Result<Vec<_>>>()?;
    Ok(ComplexVector::from_vec(entries))
}

pub fn povm_to_json(m: &Povm) -> Value {
    json!({
        "dim": m.dim(),
        "effects": m.effects().iter().map(|e| matrix_to_json(e.matrix())).collect::<Vec<_>>(),
    })
}

/// Parses and validates a POVM object; the error names the failing invariant.
pub fn povm_from_json(v: &Value, tol: &Tolerances) -> Result<Povm> {
    let obj = v.as_object().ok_or_else(|| parse_err("POVM must be a JSON object"))?;
    let dim = obj.get("dim").and_then(Value::as_u64).ok_or_else(|| parse_err("missing or invalid 'dim'"))? as usize;
    if dim == 0 {
        return Err(Error::DimensionMismatch("dimension must be positive".into()));
    }
    let effects = obj
        .get("effects")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing or invalid 'effects'"))?;
    let ops = effects
        .iter()
        .map(|e| HermitianOperator::with_tolerance(matrix_from_json(e, dim, dim)?, tol.hermiticity))
        .collect::<Result<Vec<_>>>()?;
    Povm::validate(dim, ops, tol)
}

pub fn read_povm(text: &str, tol: &Tolerances) -> Result<Povm> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    povm_from_json(&v, tol)
}

/// Canonical text of a POVM file, newline-terminated.
pub fn write_povm(m: &Povm) -> String {
    let mut s = canonical_json(&povm_to_json(m));
    s.push('\n');
    s
}

pub fn post_processing_to_json(q: &PostProcessing) -> Value {
    json!(q.rows())
}

pub fn strategy_to_json(s: &SimulationStrategy) -> Value {
    json!({
        "weights": s.weights(),
        "members": s.members().iter().map(povm_to_json).collect::<Vec<_>>(),
        "post": s.post().map(post_processing_to_json),
    })
}

pub fn strategy_from_json(v: &Value, tol: &Tolerances) -> Result<SimulationStrategy> {
    let obj = v.as_object().ok_or_else(|| parse_err("strategy must be a JSON object"))?;
    let weights: Vec<f64> = obj
        .get("weights")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing 'weights'"))?
        .iter()
        .map(|w| w.as_f64().ok_or_else(|| parse_err("weight is not a number")))
        .collect::<Result<_>>()?;
    let members = obj
        .get("members")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing 'members'"))?
        .iter()
        .map(|m| povm_from_json(m, tol))
        .collect::<Result<Vec<_>>>()?;
    let post = match obj.get("post") {
        None | Some(Value::Null) => None,
        Some(p) => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(p.clone()).map_err(|e| parse_err(e.to_string()))?;
            Some(PostProcessing::new(rows)?)
        }
    };
    SimulationStrategy::new(weights, members, post)
}

/// Weighted list of measurements, e.g. a decomposition.
pub fn members_to_json(members: &[(f64, Povm)]) -> Value {
    Value::Array(
        members
            .iter()
            .map(|(w, m)| json!({"weight": w, "povm": povm_to_json(m)}))
            .collect(),
    )
}

pub fn visibility_to_json(r: &VisibilityResult) -> Value {
    let parts: Vec<Value> = r
        .parts
        .iter()
        .map(|p| {
            json!({
                "outcomes": p.outcomes,
                "weight": p.weight,
                "kind": match p.kind {
                    PartKind::General => "general",
                    PartKind::TraceOne => "trace-one",
                },
                "effects": p.effects.iter().map(|e| matrix_to_json(e.matrix())).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "t_star": r.t_star,
        "dim": r.dim,
        "num_outcomes": r.num_outcomes,
        "m": r.m,
        "relaxation": r.relaxation,
        "parts": parts,
    })
}

pub fn dilation_to_json(d: &Dilation) -> Value {
    json!({
        "system_dim": d.system_dim(),
        "ancilla_dim": d.ancilla_dim(),
        "ancilla_state": vector_to_json(&d.ancilla_state),
        "strategy": strategy_to_json(&d.strategy),
        "unitaries": d.unitaries.iter().map(|u| json!({"dim": u.nrows(), "matrix": matrix_to_json(u)})).collect::<Vec<_>>(),
    })
}

pub fn error_to_json(e: &Error) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), json!(e.kind()));
    m.insert("message".into(), json!(e.to_string()));
    match e {
        Error::EffectNotPsd { index, eigenvalue } => {
            m.insert("index".into(), json!(index));
            m.insert("eigenvalue".into(), json!(eigenvalue));
        }
        Error::NotNormalized { deviation } | Error::NonHermitianInput { deviation } => {
            m.insert("deviation".into(), json!(deviation));
        }
        Error::NotTraceOne { index, trace } => {
            m.insert("index".into(), json!(index));
            m.insert("trace".into(), json!(trace));
        }
        _ => {}
    }
    json!({ "error": Value::Object(m) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{fixture, tetrahedral};

    #[test]
    fn canonical_format() {
        let v = json!({"b": [1, 0.25, -0.0], "a": {"z": true, "y": null}, "c": "q\""});
        assert_eq!(
            canonical_json(&v),
            r#"{"a":{"y":null,"z":true},"b":[1,2.5000000000000000e-1,0.0000000000000000e0],"c":"q\""}"#
        );
    }

    #[test]
    fn povm_round_trip_is_byte_stable() {
        for name in ["tetra", "trine", "modified-trine", "double-tetra", "covariant:sic", "covariant:random:4"] {
            let text = write_povm(&fixture(name).unwrap());
            let back = read_povm(&text, &Tolerances::default()).unwrap();
            assert_eq!(write_povm(&back), text, "{name}");
        }
    }

    #[test]
    fn readers_report_invariants() {
        let tol = Tolerances::default();
        let bad_psd = r#"{"dim":2,"effects":[[[1.5,0],[0,0],[0,0],[0.5,0]],[[-0.5,0],[0,0],[0,0],[0.5,0]]]}"#;
        assert!(matches!(read_povm(bad_psd, &tol), Err(Error::EffectNotPsd { index: 1, .. })));
        let bad_norm = r#"{"dim":2,"effects":[[[1,0],[0,0],[0,0],[0.5,0]]]}"#;
        assert!(matches!(read_povm(bad_norm, &tol), Err(Error::NotNormalized { .. })));
        let bad_herm = r#"{"dim":2,"effects":[[[1,0],[0.1,0],[0,0],[1,0]]]}"#;
        assert!(matches!(read_povm(bad_herm, &tol), Err(Error::NonHermitianInput { .. })));
        let bad_shape = r#"{"dim":2,"effects":[[[1,0],[0,0],[1,0]]]}"#;
        assert!(matches!(read_povm(bad_shape, &tol), Err(Error::DimensionMismatch(_))));
        assert!(matches!(read_povm("{", &tol), Err(Error::Parse(_))));
        let e = error_to_json(&read_povm(bad_psd, &tol).unwrap_err());
        assert_eq!(e["error"]["kind"], "EffectNotPsd");
    }

    #[test]
    fn strategy_round_trip() {
        let s = crate::povm::protocol_tetra_optimal();
        let v = strategy_to_json(&s);
        let back = strategy_from_json(&v, &Tolerances::default()).unwrap();
        assert!(back.apply().distance(&s.apply()) < 1e-15);
        assert!(povm_to_json(&tetrahedral())["dim"] == 2);
    }
}

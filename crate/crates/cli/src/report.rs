use ncmaj::decision::TraceRelation;
use ncmaj::hermitian::TOL;
use ncmaj::{Certificate, Decision, CONVENTIONS_VERSION};
use serde_json::{json, Value};

pub fn tolerances() -> Value {
    json!({
        "hermitian": TOL.hermitian,
        "eig": TOL.eig,
        "witness": TOL.witness,
        "psd": TOL.psd,
        "majorization": TOL.majorization,
        "dominance": TOL.dominance,
    })
}

pub fn certificate(c: &Certificate) -> Value {
    let mut v = match c {
        Certificate::Trace { relation, lhs, rhs } => json!({
            "kind": "trace",
            "relation": match relation { TraceRelation::Equal => "equal", TraceRelation::AtLeast => "at-least" },
            "lhs": lhs,
            "rhs": rhs,
        }),
        Certificate::Inequality { subsets, lhs, rhs } => json!({
            "kind": "inequality",
            "subsets": subsets.iter().map(|s| s.elems().to_vec()).collect::<Vec<_>>(),
            "lhs": lhs,
            "rhs": rhs,
        }),
        Certificate::Majorization { k, lhs, rhs } => json!({ "kind": "majorization", "k": k, "lhs": lhs, "rhs": rhs }),
        Certificate::Negativity { block, value } => json!({ "kind": "negativity", "block": block, "value": value }),
        Certificate::Structure(_) => json!({ "kind": "structure" }),
    };
    v["text"] = Value::String(c.to_string());
    v
}

pub fn verdict(d: &Decision) -> Value {
    let mut v = json!({
        "verdict": d.verdict.to_string(),
        "exact": d.exact,
        "tolerances": tolerances(),
        "conventions-version": CONVENTIONS_VERSION,
    });
    if let Some(c) = &d.certificate {
        v["certificate"] = certificate(c);
    }
    v
}

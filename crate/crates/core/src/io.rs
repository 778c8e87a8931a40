//! JSON and CSV encodings. Matrices are nested arrays of `[re, im]` pairs, tensors carry their
//! arity and a flat row-major list of `[re, im]` entries, and every float is rounded to 12
//! significant digits so repeated runs are byte-identical.

use serde_json::{json, Map, Value};

use crate::alg::{Inclusion, LinearMap, Mat, C64};
use crate::distribution::{DistPair, OVDistribution, OperatorModel};
use crate::error::{Error, Result};
use crate::multimap::MultiMap;
use crate::scalar::ScalarDist;
use crate::series::NCSeries;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to 12 significant digits; `-0.0` becomes `0.0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let r: f64 = s.parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn complex(z: C64) -> Value {
    json!([num(z.re), num(z.im)])
}

fn perr(at: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{at}: {msg}"))
}

fn field<'a>(v: &'a Value, key: &str, at: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| perr(at, format!("missing field '{key}'")))
}

fn as_usize(v: &Value, at: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| perr(at, "expected a nonnegative integer"))
}

fn as_array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| perr(at, "expected an array"))
}

/// A number or an `[re, im]` pair.
fn complex_from(v: &Value, at: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(C64::new(x, 0.0));
    }
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => Err(perr(at, "expected numeric [re, im]")),
        },
        _ => Err(perr(at, "expected a number or [re, im]")),
    }
}

pub fn mat_to_json(a: &Mat) -> Value {
    Value::Array(
        (0..a.nrows())
            .map(|r| Value::Array((0..a.ncols()).map(|c| complex(a[(r, c)])).collect()))
            .collect(),
    )
}

pub fn mat_from_json(v: &Value, at: &str) -> Result<Mat> {
    let rows = as_array(v, at)?;
    let nr = rows.len();
    let mut entries = Vec::new();
    let mut nc = None;
    for (r, row) in rows.iter().enumerate() {
        let at_r = format!("{at}[{r}]");
        let row = as_array(row, &at_r)?;
        if *nc.get_or_insert(row.len()) != row.len() {
            return Err(perr(&at_r, "ragged matrix"));
        }
        for (c, z) in row.iter().enumerate() {
            entries.push(complex_from(z, &format!("{at_r}[{c}]"))?);
        }
    }
    let nc = nc.unwrap_or(0);
    if nr == 0 || nc == 0 {
        return Err(perr(at, "empty matrix"));
    }
    Ok(Mat::from_row_slice(nr, nc, &entries))
}

pub fn inclusion_to_json(inc: &Inclusion) -> Value {
    serde_json::to_value(inc).expect("inclusion serializes")
}

pub fn inclusion_from_json(v: &Value, at: &str) -> Result<Inclusion> {
    let inc: Inclusion = serde_json::from_value(v.clone()).map_err(|e| perr(at, e))?;
    inc.validate().map_err(|e| perr(at, e))?;
    Ok(inc)
}

pub fn tensor_to_json(t: &MultiMap) -> Value {
    json!({
        "arity": t.arity(),
        "data": t.data().iter().map(|&z| complex(z)).collect::<Vec<_>>(),
    })
}

pub fn tensor_from_json(v: &Value, d_src: usize, d_tgt: usize, at: &str) -> Result<MultiMap> {
    let arity = as_usize(field(v, "arity", at)?, &format!("{at}.arity"))?;
    let data = as_array(field(v, "data", at)?, &format!("{at}.data"))?;
    let expected = (d_src * d_src).pow(arity as u32) * d_tgt * d_tgt;
    if data.len() != expected {
        return Err(perr(
            at,
            format!("tensor of arity {arity} needs {expected} entries, found {}", data.len()),
        ));
    }
    let entries = data
        .iter()
        .enumerate()
        .map(|(i, z)| complex_from(z, &format!("{at}.data[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiMap::from_raw(arity, d_src, d_tgt, entries))
}

pub fn dist_to_json(d: &OVDistribution) -> Value {
    let mut obj = Map::new();
    obj.insert("inclusion".into(), inclusion_to_json(d.inclusion()));
    obj.insert("order".into(), json!(d.order()));
    obj.insert("mean".into(), mat_to_json(&d.mean()));
    obj.insert(
        "moments".into(),
        Value::Array(d.moments()[1..].iter().map(tensor_to_json).collect()),
    );
    if d.formal {
        obj.insert("formal".into(), json!(true));
    }
    Value::Object(obj)
}

pub fn dist_from_json(v: &Value, at: &str) -> Result<OVDistribution> {
    let inc = inclusion_from_json(field(v, "inclusion", at)?, &format!("{at}.inclusion"))?;
    let order = as_usize(field(v, "order", at)?, &format!("{at}.order"))?;
    let mean = mat_from_json(field(v, "mean", at)?, &format!("{at}.mean"))?;
    if mean.nrows() != inc.d_d || mean.ncols() != inc.d_d {
        return Err(perr(&format!("{at}.mean"), format!("expected a {0}x{0} matrix", inc.d_d)));
    }
    let list = as_array(field(v, "moments", at)?, &format!("{at}.moments"))?;
    if list.len() + 1 != order {
        return Err(perr(
            &format!("{at}.moments"),
            format!("order {order} needs {} tensors, found {}", order.saturating_sub(1), list.len()),
        ));
    }
    let mut moments = vec![MultiMap::constant(inc.d_b, &mean)];
    for (i, t) in list.iter().enumerate() {
        let at_t = format!("{at}.moments[{i}]");
        let m = tensor_from_json(t, inc.d_b, inc.d_d, &at_t)?;
        if m.arity() != i + 1 {
            return Err(perr(&at_t, format!("expected arity {}", i + 1)));
        }
        moments.push(m);
    }
    let mut d = OVDistribution::new(inc, moments)?;
    d.formal = v.get("formal").and_then(Value::as_bool).unwrap_or(false);
    Ok(d)
}

pub fn pair_to_json(p: &DistPair) -> Value {
    json!({ "mu": dist_to_json(&p.mu), "nu": dist_to_json(&p.nu) })
}

pub fn pair_from_json(v: &Value, at: &str) -> Result<DistPair> {
    DistPair::new(
        dist_from_json(field(v, "mu", at)?, &format!("{at}.mu"))?,
        dist_from_json(field(v, "nu", at)?, &format!("{at}.nu"))?,
    )
}

pub fn series_to_json(s: &NCSeries, kind: Option<&str>) -> Value {
    let mut obj = Map::new();
    if let Some(k) = kind {
        obj.insert("kind".into(), json!(k));
    }
    obj.insert("inclusion".into(), inclusion_to_json(s.inclusion()));
    obj.insert("order".into(), json!(s.order()));
    obj.insert(
        "coeffs".into(),
        Value::Array(s.coeffs().iter().map(tensor_to_json).collect()),
    );
    Value::Object(obj)
}

pub fn series_from_json(v: &Value, at: &str) -> Result<NCSeries> {
    let inc = inclusion_from_json(field(v, "inclusion", at)?, &format!("{at}.inclusion"))?;
    let list = as_array(field(v, "coeffs", at)?, &format!("{at}.coeffs"))?;
    let coeffs = list
        .iter()
        .enumerate()
        .map(|(i, t)| tensor_from_json(t, inc.d_b, inc.d_d, &format!("{at}.coeffs[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    NCSeries::new(inc, coeffs)
}

pub fn scalar_to_json(d: &ScalarDist) -> Value {
    let moments: Vec<Value> = d
        .moments()
        .iter()
        .map(|&z| if z.im == 0.0 { num(z.re) } else { complex(z) })
        .collect();
    json!({ "order": d.order(), "moments": moments })
}

pub fn scalar_from_json(v: &Value, at: &str) -> Result<ScalarDist> {
    let list = as_array(field(v, "moments", at)?, &format!("{at}.moments"))?;
    let moments = list
        .iter()
        .enumerate()
        .map(|(i, z)| complex_from(z, &format!("{at}.moments[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if let Some(o) = v.get("order") {
        let order = as_usize(o, &format!("{at}.order"))?;
        if order != moments.len() {
            return Err(perr(at, format!("order {order} but {} moments", moments.len())));
        }
    }
    ScalarDist::new(moments)
}

fn linear_map_to_json(m: &LinearMap) -> Value {
    json!({ "d_in": m.d_in, "d_out": m.d_out, "matrix": mat_to_json(&m.matrix) })
}

fn linear_map_from_json(v: &Value, at: &str) -> Result<LinearMap> {
    let d_in = as_usize(field(v, "d_in", at)?, &format!("{at}.d_in"))?;
    let d_out = as_usize(field(v, "d_out", at)?, &format!("{at}.d_out"))?;
    let matrix = mat_from_json(field(v, "matrix", at)?, &format!("{at}.matrix"))?;
    LinearMap::new(d_in, d_out, matrix)
}

pub fn model_to_json(m: &OperatorModel) -> Value {
    json!({
        "m": m.m,
        "d_b": m.d_b(),
        "X": mat_to_json(&m.x),
        "E_B": linear_map_to_json(&m.e_b),
        "theta": linear_map_to_json(&m.theta),
    })
}

pub fn model_from_json(v: &Value, at: &str) -> Result<OperatorModel> {
    let x = mat_from_json(field(v, "X", at)?, &format!("{at}.X"))?;
    let d_b = as_usize(field(v, "d_b", at)?, &format!("{at}.d_b"))?;
    let e = linear_map_from_json(field(v, "E_B", at)?, &format!("{at}.E_B"))?;
    let theta = linear_map_from_json(field(v, "theta", at)?, &format!("{at}.theta"))?;
    if let Some(m) = v.get("m") {
        if as_usize(m, &format!("{at}.m"))? != x.nrows() {
            return Err(perr(at, "field 'm' disagrees with the size of X"));
        }
    }
    OperatorModel::new(x, e, theta, d_b)
}

/// Any document the CLI reads.
#[derive(Debug, Clone)]
pub enum Document {
    Distribution(OVDistribution),
    Pair(DistPair),
    Series(NCSeries),
    Scalar(ScalarDist),
    Model(OperatorModel),
}

impl Document {
    pub fn to_json(&self) -> Value {
        match self {
            Document::Distribution(d) => dist_to_json(d),
            Document::Pair(p) => pair_to_json(p),
            Document::Series(s) => series_to_json(s, None),
            Document::Scalar(s) => scalar_to_json(s),
            Document::Model(m) => model_to_json(m),
        }
    }
}

pub fn parse_document(text: &str, origin: &str) -> Result<Document> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        perr(origin, format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()))
    })?;
    if v.get("mu").is_some() {
        Ok(Document::Pair(pair_from_json(&v, origin)?))
    } else if v.get("X").is_some() {
        Ok(Document::Model(model_from_json(&v, origin)?))
    } else if v.get("coeffs").is_some() {
        Ok(Document::Series(series_from_json(&v, origin)?))
    } else if v.get("inclusion").is_some() {
        Ok(Document::Distribution(dist_from_json(&v, origin)?))
    } else if v.get("moments").is_some() {
        Ok(Document::Scalar(scalar_from_json(&v, origin)?))
    } else {
        Err(perr(origin, "unrecognized document: expected a distribution, pair, series, scalar distribution or model"))
    }
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

/// Deterministic CSV with a header row; floats use [`fmt_f64`].
pub fn csv<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> String {
    let mut s = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn mat_label(a: &Mat) -> String {
    // a compact single-cell rendering for CSV columns
    let mut parts = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let z = a[(r, c)];
            parts.push(format!("{}{:+}i", fmt_f64(z.re), round_sig(z.im)));
        }
    }
    format!("\"[{}]\"", parts.join(" "))
}

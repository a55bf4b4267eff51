//! Wire conventions shared by every JSON and CSV output.
//!
//! Floats carry 12 significant digits (`%.12g`), infinities print as the
//! strings `"inf"`/`"-inf"` and NaN as `null`. Payloads carry a schema tag.

use serde::{Serialize, Serializer};
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io;

pub const SCHEMA: &str = "rdx/1";

/// Format like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    fmt_g_prec(x, 12)
}

pub fn fmt_g_prec(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let prec = prec.max(1);
    let sci = format!("{:.*e}", prec - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= prec as i32 {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (prec as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parse a wire float, accepting the infinity spellings.
pub fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        "nan" | "NaN" | "null" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

/// JSON value for a real respecting the infinity convention.
pub fn real(x: f64) -> serde_json::Value {
    if x.is_nan() {
        serde_json::Value::Null
    } else if x.is_infinite() {
        serde_json::Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        serde_json::Value::from(x)
    }
}

/// `serialize_with` helper for plain `f64` fields.
pub fn ser_real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    real(*x).serialize(s)
}

/// `serialize_with` helper for optional fields.
pub fn ser_opt_real<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => real(*v).serialize(s),
        None => s.serialize_none(),
    }
}

/// Deserialize a real that may be spelled `"inf"`.
pub fn de_real<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    use serde::de::Error;
    let v = serde_json::Value::deserialize(d)?;
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| D::Error::custom("bad number")),
        serde_json::Value::String(s) => parse_real(&s).ok_or_else(|| D::Error::custom(format!("bad real {s:?}"))),
        serde_json::Value::Null => Ok(f64::NAN),
        other => Err(D::Error::custom(format!("expected real, got {other}"))),
    }
}

use serde::Deserialize;

/// serde_json formatter writing floats with `%.12g`.
pub struct G12<F> {
    inner: F,
}

impl G12<PrettyFormatter<'static>> {
    pub fn pretty() -> Self {
        G12 { inner: PrettyFormatter::new() }
    }
}

impl G12<serde_json::ser::CompactFormatter> {
    pub fn compact() -> Self {
        G12 { inner: serde_json::ser::CompactFormatter }
    }
}

fn write_g<W: ?Sized + io::Write>(w: &mut W, x: f64) -> io::Result<()> {
    if x.is_finite() {
        let s = fmt_g(x);
        w.write_all(s.as_bytes())
    } else if x.is_nan() {
        w.write_all(b"null")
    } else if x > 0.0 {
        w.write_all(b"\"inf\"")
    } else {
        w.write_all(b"\"-inf\"")
    }
}

impl<F: Formatter> Formatter for G12<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, x: f64) -> io::Result<()> {
        write_g(w, x)
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, x: f32) -> io::Result<()> {
        write_g(w, x as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serialize with the wire float convention, pretty-printed.
pub fn to_string_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G12::pretty());
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("utf8 json")
}

/// Serialize with the wire float convention on one line.
pub fn to_string_compact<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G12::compact());
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("utf8 json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (2.0 / 3.0, "0.666666666667"),
            (8.0 / 3.0, "2.66666666667"),
            (1e-5, "1e-05"),
            (1.5e-4, "0.00015"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (-0.014225, "-0.014225"),
            (1e100, "1e+100"),
            (0.0, "0"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g(x), s, "{x}");
        }
    }

    #[test]
    fn infinity_round_trip() {
        assert_eq!(fmt_g(f64::INFINITY), "inf");
        assert_eq!(parse_real("inf"), Some(f64::INFINITY));
        let v = serde_json::json!({"a": 1.0 / 3.0, "b": [2.5, 1e-7]});
        assert_eq!(to_string_compact(&v), r#"{"a":0.333333333333,"b":[2.5,1e-07]}"#);
        #[derive(Serialize)]
        struct S {
            #[serde(serialize_with = "ser_real")]
            x: f64,
        }
        assert_eq!(to_string_compact(&S { x: f64::INFINITY }), r#"{"x":"inf"}"#);
    }
}

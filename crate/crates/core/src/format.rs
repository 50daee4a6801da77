//! Fixed float formatting for CSV and JSON artifacts.
//!
//! Every float is written with 17 significant digits so that a value read
//! back parses to the identical `f64`, and identical runs produce
//! byte-identical files.

use serde::Serializer;
use serde_json::value::RawValue;

/// Formats `x` with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn json_number(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        fmt_f64(x)
    } else {
        "null".to_string()
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

/// `serialize_with` helper for `f64` fields. Non-finite values become `null`.
pub fn f17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_some(&json_number(*x))
}

pub fn f17_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => f17(v, s),
        None => s.serialize_none(),
    }
}

pub fn f17_slice<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&json_number(x))?;
    }
    seq.end()
}

/// Joins one CSV row.
pub(crate) fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.25), "-2.5000000000000000e-1");
    }

    #[test]
    fn json_field() {
        #[derive(serde::Serialize)]
        struct Row {
            #[serde(serialize_with = "f17")]
            v: f64,
        }
        let text = serde_json::to_string(&Row { v: 0.5 }).unwrap();
        assert_eq!(text, r#"{"v":5.0000000000000000e-1}"#);
        let nan = serde_json::to_string(&Row { v: f64::NAN }).unwrap();
        assert_eq!(nan, r#"{"v":null}"#);
    }
}

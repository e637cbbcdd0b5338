//! Plot-ready serialisation of sweep records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "a,h,h_err,lambda,lambda_gap,q,wr,window_period,window_center,holder";

/// One grid point of a sweep. Absent fields mean the corresponding
/// computation was not requested or did not converge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub a: f64,
    pub h: Option<f64>,
    pub h_err: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_gap: Option<f64>,
    pub q: Option<f64>,
    /// `−∞` marks a superattracting parameter.
    #[serde(serialize_with = "ser_wr", deserialize_with = "de_wr")]
    pub wr: Option<f64>,
    pub window_period: Option<usize>,
    pub window_center: Option<f64>,
    pub holder: Option<f64>,
}

impl SweepRecord {
    pub fn empty(a: f64) -> Self {
        SweepRecord {
            a,
            h: None,
            h_err: None,
            lambda: None,
            lambda_gap: None,
            q: None,
            wr: None,
            window_period: None,
            window_center: None,
            holder: None,
        }
    }
}

fn ser_wr<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() && *x < 0.0 => s.serialize_str("-inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

fn de_wr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(x)) => Ok(Some(x)),
        Some(Raw::Text(t)) if t == "-inf" => Ok(Some(f64::NEG_INFINITY)),
        Some(Raw::Text(t)) => Err(serde::de::Error::custom(format!("unexpected wr value {t:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::invalid(format!("unknown format {s:?}"))),
        }
    }
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x < 0.0 {
            "-inf".into()
        } else {
            "inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            float(r.a),
            opt(r.h),
            opt(r.h_err),
            opt(r.lambda),
            opt(r.lambda_gap),
            opt(r.q),
            opt(r.wr),
            r.window_period.map(|p| p.to_string()).unwrap_or_default(),
            opt(r.window_center),
            opt(r.holder),
        );
    }
    out
}

fn json_num(x: Option<f64>) -> String {
    match x {
        None => "null".into(),
        Some(v) if v.is_finite() => float(v),
        Some(v) => format!("\"{}\"", float(v)),
    }
}

pub fn to_json(records: &[SweepRecord]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in records.iter().enumerate() {
        let _ = write!(
            out,
            "  {{\"a\": {}, \"h\": {}, \"h_err\": {}, \"lambda\": {}, \"lambda_gap\": {}, \"q\": {}, \"wr\": {}, \"window_period\": {}, \"window_center\": {}, \"holder\": {}}}",
            float(r.a),
            json_num(r.h),
            json_num(r.h_err),
            json_num(r.lambda),
            json_num(r.lambda_gap),
            json_num(r.q),
            json_num(r.wr),
            r.window_period.map_or("null".into(), |p| p.to_string()),
            json_num(r.window_center),
            json_num(r.holder),
        );
        out.push_str(if i + 1 == records.len() { "\n" } else { ",\n" });
    }
    out.push_str("]\n");
    out
}

pub fn render(records: &[SweepRecord], format: Format) -> Result<String> {
    if records.is_empty() {
        return Err(Error::invalid("no records to export"));
    }
    Ok(match format {
        Format::Csv => to_csv(records),
        Format::Json => to_json(records),
    })
}

pub fn export(records: &[SweepRecord], format: Format, path: &Path) -> Result<()> {
    let text = render(records, format)?;
    fs::write(path, text)?;
    Ok(())
}

fn parse_cell<T: FromStr>(cell: &str, line: usize) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::invalid(format!("line {line}: cannot parse {cell:?}")))
}

pub fn from_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::invalid("CSV header does not match the record schema"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 {
            return Err(Error::invalid(format!("line {n}: expected 10 cells")));
        }
        let f = |k: usize| parse_cell::<f64>(cells[k], n);
        out.push(SweepRecord {
            a: f(0)?.ok_or_else(|| Error::invalid(format!("line {n}: missing a")))?,
            h: f(1)?,
            h_err: f(2)?,
            lambda: f(3)?,
            lambda_gap: f(4)?,
            q: f(5)?,
            wr: f(6)?,
            window_period: parse_cell(cells[7], n)?,
            window_center: f(8)?,
            holder: f(9)?,
        });
    }
    Ok(out)
}

pub fn from_json(text: &str) -> Result<Vec<SweepRecord>> {
    serde_json::from_str(text).map_err(|e| Error::invalid(format!("malformed record JSON: {e}")))
}

/// Read records from a CSV or JSON file, chosen by content.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        from_json(&text)
    } else {
        from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<SweepRecord> {
        vec![
            SweepRecord {
                h: Some(std::f64::consts::LN_2),
                h_err: Some(1e-15),
                wr: Some(0.0),
                ..SweepRecord::empty(-2.0)
            },
            SweepRecord {
                h: Some(0.48121182505960347),
                h_err: Some(2e-14),
                wr: Some(f64::NEG_INFINITY),
                window_period: Some(3),
                window_center: Some(-1.7548776662466927),
                ..SweepRecord::empty(-1.7548776662466927)
            },
        ]
    }

    #[test]
    fn csv_shape() {
        let csv = to_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        // no window: empty cells
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells[7], "");
        assert_eq!(cells[8], "");
        assert_eq!(lines[2].split(',').nth(6), Some("-inf"));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn csv_round_trip() {
        let recs = sample();
        assert_eq!(from_csv(&to_csv(&recs)).unwrap(), recs);
    }

    #[test]
    fn json_round_trip() {
        let recs = sample();
        let text = to_json(&recs);
        assert!(text.contains("\"wr\": \"-inf\""));
        assert_eq!(from_json(&text).unwrap(), recs);
    }

    #[test]
    fn empty_export_rejected() {
        assert!(render(&[], Format::Csv).is_err());
    }

    #[test]
    fn export_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        export(&sample(), Format::Csv, &p).unwrap();
        assert_eq!(read_records(&p).unwrap(), sample());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            -1e3f64..1e3,
            (-300i32..300).prop_map(|e| 1.2345678901234567 * 10f64.powi(e))
        ]
    }

    proptest! {
        #[test]
        fn json_round_trip_any(
            a in -2.0f64..0.25,
            h in proptest::option::of(0.0f64..0.7),
            q in proptest::option::of(finite()),
            wr in proptest::option::of(prop_oneof![finite(), Just(f64::NEG_INFINITY)]),
            p in proptest::option::of(1usize..25),
        ) {
            let r = SweepRecord { h, q, wr, window_period: p, window_center: p.map(|_| a), ..SweepRecord::empty(a) };
            let recs = vec![r];
            prop_assert_eq!(from_json(&to_json(&recs)).unwrap(), recs.clone());
            prop_assert_eq!(from_csv(&to_csv(&recs)).unwrap(), recs);
        }
    }
}

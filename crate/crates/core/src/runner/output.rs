//! Persisted outputs. Every float is written with 17 significant digits so
//! files round-trip exactly and identical runs hash identically.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use sha2::{Digest, Sha256};

use crate::cascade::CascadeReport;
use crate::Result;

/// `{:.16e}` rendering of a float; `null` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

struct FixedFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FixedFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_bytes(value)?)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Header `t, alpha[..], x[..], phi, in_A[..]`.
pub fn timeseries_header(p: usize, n: usize, k: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..p).map(|i| format!("alpha{i}")));
    h.extend((0..n).map(|i| format!("x{i}")));
    h.push("phi".into());
    h.extend((0..k).map(|i| format!("in_A{i}")));
    h
}

pub fn write_timeseries_csv<W: Write>(out: W, report: &CascadeReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let first = report.steps.first();
    let p = first.map_or(0, |s| s.alpha.len());
    let n = first.map_or(0, |s| s.x.len());
    w.write_record(timeseries_header(p, n, report.k))?;
    for s in &report.steps {
        let mut row: Vec<String> = Vec::with_capacity(2 + p + n + report.k);
        row.push(fmt_f64(s.t));
        row.extend(s.alpha.iter().map(|&v| fmt_f64(v)));
        row.extend(s.x.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.phi));
        row.extend((0..report.k).map(|i| u8::from(s.active.contains(&i)).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "null");
        let v: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_round_trips_exactly() {
        let xs = vec![0.1, 1.0 / 3.0, -2.5e-300, 12345.678];
        let bytes = to_json_bytes(&xs).unwrap();
        let back: Vec<f64> = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            timeseries_header(2, 1, 1),
            vec!["t", "alpha0", "alpha1", "x0", "phi", "in_A0"]
        );
    }
}

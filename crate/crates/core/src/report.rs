//! Plain-text serialization helpers: CSV tables and JSON with
//! round-trippable floats.

use serde::Serialize;
use std::io;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// CSV with a header row, comma separators and LF line endings.
pub fn csv_table(headers: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(headers.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = headers.join(",");
    out.push('\n');
    for i in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// serde_json formatter writing every float with 17 significant digits and
/// non-finite values as `null`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Pretty-ish JSON (one value per line is not needed; compact but stable).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// One exact-identity comparison.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IdentityRecord {
    pub name: String,
    pub computed: f64,
    pub exact: Option<f64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
}

impl IdentityRecord {
    pub fn new(name: &str, computed: f64, exact: Option<f64>) -> Self {
        let abs_err = exact.map(|e| (computed - e).abs());
        let rel_err = exact.map(|e| (computed - e).abs() / e.abs().max(f64::MIN_POSITIVE));
        Self { name: name.into(), computed, exact, abs_err, rel_err }
    }
}

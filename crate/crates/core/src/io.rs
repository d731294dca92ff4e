//! Line records, CSV grid dumps and config hashing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::energy::Field;
use crate::error::{Error, Result};
use crate::grid_domain::GridDomain;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One `key=value,…` line. Values never contain `,` or newlines; list
/// values are joined with `;`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    fields: Vec<(String, String)>,
}

pub trait RecordValue {
    fn render(&self) -> String;
}

impl RecordValue for f64 {
    fn render(&self) -> String {
        fmt_f64(*self)
    }
}

impl RecordValue for usize {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl RecordValue for u64 {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl RecordValue for bool {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl RecordValue for str {
    fn render(&self) -> String {
        sanitize(self)
    }
}

impl RecordValue for String {
    fn render(&self) -> String {
        sanitize(self)
    }
}

impl<T: RecordValue> RecordValue for Option<T> {
    fn render(&self) -> String {
        self.as_ref().map_or_else(|| "none".into(), RecordValue::render)
    }
}

impl RecordValue for [f64] {
    fn render(&self) -> String {
        self.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";")
    }
}

impl RecordValue for Vec<f64> {
    fn render(&self) -> String {
        self.as_slice().render()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' => ' ',
            '=' => ':',
            c => c,
        })
        .collect()
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Self::default().with("record", kind)
    }

    pub fn with<V: RecordValue + ?Sized>(mut self, key: &str, value: &V) -> Self {
        self.push(key, value);
        self
    }

    pub fn push<V: RecordValue + ?Sized>(&mut self, key: &str, value: &V) {
        self.fields.push((key.to_string(), value.render()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn line(&self) -> String {
        let mut s = String::new();
        for (n, (k, v)) in self.fields.iter().enumerate() {
            if n > 0 {
                s.push(',');
            }
            let _ = write!(s, "{k}={v}");
        }
        s
    }

    pub fn parse(line: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for part in line.trim_end_matches('\n').split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed record field '{part}'")))?;
            fields.push((k.to_string(), v.to_string()));
        }
        Ok(Self { fields })
    }
}

/// Joins records into LF-terminated text.
pub fn render_records(records: &[Record]) -> String {
    records.iter().map(|r| r.line() + "\n").collect()
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// `ny` rows of `nx` comma-separated values, row `j` holding `y`-index `j`.
pub fn grid_csv(dom: &GridDomain, f: &[f64], header: Option<&str>) -> String {
    let g = dom.to_grid(f);
    let nx = dom.nx();
    let mut s = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    for row in g.chunks(nx) {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Parses a grid dump into `(rows, values)`, skipping `#` lines.
pub fn parse_grid_csv(text: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut widths = Vec::new();
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut w = 0;
        for cell in line.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("grid line {}: '{cell}': {e}", n + 1)))?;
            values.push(v);
            w += 1;
        }
        widths.push(w);
    }
    Ok((widths, values))
}

pub fn write_grid(path: &Path, dom: &GridDomain, f: &[f64], header: Option<&str>) -> Result<()> {
    fs::write(path, grid_csv(dom, f, header)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path, dom: &GridDomain) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (widths, values) = parse_grid_csv(&text)?;
    if widths.len() != dom.ny() || widths.iter().any(|&w| w != dom.nx()) {
        return Err(Error::Config(format!(
            "{}: expected {} rows of {} values",
            path.display(),
            dom.ny(),
            dom.nx()
        )));
    }
    dom.from_grid(&values)
}

/// Writes `u_<i>.csv` for every component into `dir`.
pub fn write_field(dir: &Path, prefix: &str, dom: &GridDomain, u: &Field, header: Option<&str>) -> Result<()> {
    for i in 0..u.k() {
        write_grid(&dir.join(format!("{prefix}{}.csv", i + 1)), dom, u.comp(i), header)?;
    }
    Ok(())
}

pub fn read_field(dir: &Path, prefix: &str, dom: &GridDomain, k: usize) -> Result<Field> {
    (0..k)
        .map(|i| read_grid(&dir.join(format!("{prefix}{}.csv", i + 1)), dom))
        .collect::<Result<Vec<_>>>()
        .map(Field::from_components)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let r = Record::new("x").with("a", &1.5f64).with("b", "p,q").with("c", &vec![1.0, 2.0]);
        let back = Record::parse(&r.line()).unwrap();
        assert_eq!(back.get("b"), Some("p;q"));
        assert_eq!(back.get("a").unwrap().parse::<f64>().unwrap(), 1.5);
        assert_eq!(back.get("c"), Some("1.0000000000000000e0;2.0000000000000000e0"));
    }

    #[test]
    fn float_format_is_exact() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, 6.02e23, -0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea");
    }
}

//! Result tables and their CSV form.
//!
//! A table file starts with `# key=value` metadata lines, then the column
//! header, then one line per row. Floats are written with 17 significant
//! digits so a parse recovers the exact value.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn parse(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        match s.parse::<f64>() {
            Ok(x) => Cell::Float(x),
            Err(_) => Cell::Text(s.to_string()),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) if x.is_finite() => write!(f, "{x:.16e}"),
            Cell::Float(x) => write!(f, "{x}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Run metadata in insertion order (config hash, seeds, tool version).
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        ResultTable {
            schema: schema.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row of {} cells for {}-column table `{}`",
                row.len(),
                self.columns.len(),
                self.schema
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# schema={}\n", self.schema);
        for (k, v) in &self.metadata {
            out += &format!("# {k}={v}\n");
        }
        out += &self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            out += &cells.join(",");
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ResultTable> {
        let mut lines = text.lines();
        let mut schema = None;
        let mut metadata = Vec::new();
        let mut header = None;
        for line in lines.by_ref() {
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad metadata line `{line}`")))?;
                if k == "schema" {
                    schema = Some(v.to_string());
                } else {
                    metadata.push((k.to_string(), v.to_string()));
                }
            } else {
                header = Some(line);
                break;
            }
        }
        let header = header.ok_or_else(|| Error::Parse("table has no header line".into()))?;
        let mut table = ResultTable {
            schema: schema.ok_or_else(|| Error::Parse("table has no schema line".into()))?,
            columns: header.split(',').map(str::to_string).collect(),
            rows: Vec::new(),
            metadata,
        };
        for line in lines.filter(|l| !l.is_empty()) {
            table.push(line.split(',').map(Cell::parse).collect())?;
        }
        Ok(table)
    }
}

pub fn emit_table(table: &ResultTable, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, table.to_csv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new("demo", &["name", "count", "value"])
            .with_meta("config_hash", "abc")
            .with_meta("seeds", "1..3");
        t.push(vec!["x".into(), Cell::Int(3), Cell::Float(0.1)]).unwrap();
        t.push(vec!["y".into(), Cell::Int(-1), Cell::Float(1.0 / 3.0)]).unwrap();
        t.push(vec!["z".into(), Cell::Int(0), Cell::Float(1e-300)]).unwrap();
        t
    }

    #[test]
    fn empty_table_is_metadata_and_header() {
        let t = ResultTable::new("ber", &["a", "b"]).with_meta("k", "v");
        assert_eq!(t.to_csv(), "# schema=ber\n# k=v\na,b\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let back = ResultTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta("seeds"), Some("1..3"));
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(Cell::Float(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(Cell::Float(2.0).to_string(), "2.0000000000000000e0");
    }

    #[test]
    fn arity_enforced() {
        let mut t = ResultTable::new("x", &["a", "b"]);
        assert!(t.push(vec![Cell::Int(1)]).is_err());
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        match emit_table(&sample(), &blocker.join("sub/t.csv")) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("{other:?}"),
        }
        let ok = dir.path().join("out/t.csv");
        emit_table(&sample(), &ok).unwrap();
        assert_eq!(std::fs::read_to_string(ok).unwrap(), sample().to_csv());
    }
}

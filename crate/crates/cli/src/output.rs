//! Documents emitted by the subcommands and their CSV/JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }
}

/// Metadata plus at most one table; rendered as one file.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub meta: Vec<(String, Cell)>,
    pub table: Option<Table>,
}

impl Document {
    pub fn new() -> Self {
        Document {
            meta: Vec::new(),
            table: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Cell>) {
        let value = value.into();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// `# key=value` lines, then the header and rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={}", v.csv());
        }
        if let Some(t) = &self.table {
            out.push_str(&t.columns.join(","));
            out.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut meta = Map::new();
        for (k, v) in &self.meta {
            meta.insert(k.clone(), v.json());
        }
        let mut root = Map::new();
        root.insert("meta".into(), Value::Object(meta));
        if let Some(t) = &self.table {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| {
                    let mut obj = Map::new();
                    for (c, v) in t.columns.iter().zip(r) {
                        obj.insert((*c).to_string(), v.json());
                    }
                    Value::Object(obj)
                })
                .collect();
            root.insert("rows".into(), Value::Array(rows));
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("json values");
        s.push('\n');
        s
    }
}

impl Default for Document {
    fn default() -> Self {
        Self::new()
    }
}

/// One output file. `suffix` distinguishes companion files of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub suffix: Option<&'static str>,
    /// Companion files with a fixed format ignore `--format`.
    pub format: Option<Format>,
    pub document: Document,
}

impl Artifact {
    pub fn primary(document: Document) -> Self {
        Artifact {
            suffix: None,
            format: None,
            document,
        }
    }

    pub fn companion(suffix: &'static str, format: Option<Format>, document: Document) -> Self {
        Artifact {
            suffix: Some(suffix),
            format,
            document,
        }
    }

    pub fn render(&self, default: Format) -> String {
        self.document.render(self.format.unwrap_or(default))
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> Document {
        let mut d = Document::new();
        d.set("command", "demo");
        d.set("f_av", 0.75);
        let mut t = Table::new(vec!["n", "p"]);
        t.push(vec![Cell::from(0usize), Cell::from(0.1)]);
        t.push(vec![Cell::from(1usize), Cell::Empty]);
        d.table = Some(t);
        d
    }

    #[test]
    fn csv_layout() {
        let s = doc().to_csv();
        assert_eq!(
            s,
            "# command=demo\n# f_av=7.5000000000000000e-1\nn,p\n0,1.0000000000000001e-1\n1,\n"
        );
        assert!(!s.contains('\r'));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -123456.789] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn json_layout() {
        let v: Value = serde_json::from_str(&doc().to_json()).unwrap();
        assert_eq!(v["meta"]["f_av"], 0.75);
        assert_eq!(v["rows"][1]["p"], Value::Null);
        assert_eq!(v["rows"][0]["n"], 0);
    }

    #[test]
    fn set_replaces() {
        let mut d = doc();
        d.set("f_av", 0.5);
        assert_eq!(d.get_f64("f_av"), Some(0.5));
        assert_eq!(d.meta.len(), 2);
    }
}

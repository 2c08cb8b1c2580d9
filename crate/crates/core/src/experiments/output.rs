//! Rendering of experiment tables as CSV or JSON lines.

use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, Format};
use crate::error::{Error, Result};

pub const TOOL: &str = "cutoff";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Int(i) => i.to_string(),
            // 17 significant digits round-trip every finite double
            Cell::Real(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Real(x) if x.is_nan() => "nan".into(),
            Cell::Real(x) => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Option<Value> {
        match self {
            Cell::Empty => None,
            Cell::Int(i) => Some(json!(i)),
            Cell::Real(x) if x.is_finite() => Some(json!(x)),
            Cell::Real(_) => Some(Value::String(self.csv())),
            Cell::Text(s) => Some(json!(s)),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        // seeds above i64::MAX keep their exact decimal form
        i64::try_from(x).map(Cell::Int).unwrap_or_else(|_| Cell::Text(x.to_string()))
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// Column-named rows; cells a row does not set stay empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row given as `(column, value)` pairs.
    pub fn push(&mut self, cells: Vec<(&str, Cell)>) {
        let mut row = vec![Cell::Empty; self.columns.len()];
        for (name, cell) in cells {
            match self.columns.iter().position(|c| c == name) {
                Some(i) => row[i] = cell,
                None => {
                    self.columns.push(name.to_string());
                    for r in &mut self.rows {
                        r.push(Cell::Empty);
                    }
                    row.push(cell);
                }
            }
        }
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric cells of `column`, skipping rows where it is empty or text.
    pub fn reals(&self, column: &str) -> Vec<f64> {
        let Some(i) = self.column(column) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|r| match r[i] {
                Cell::Real(x) => Some(x),
                Cell::Int(x) => Some(x as f64),
                _ => None,
            })
            .collect()
    }
}

/// A finished experiment: its table, an optional summary document, and a verdict.
#[derive(Debug, Clone)]
pub struct Output {
    pub config: ExperimentConfig,
    pub table: Table,
    /// Emitted instead of the record lines when the format is JSON.
    pub summary: Option<Value>,
    /// False when a check failed; drives the process exit status.
    pub success: bool,
}

impl Output {
    pub fn render(&self) -> Result<String> {
        match self.config.format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> Result<String> {
        let c = &self.config;
        let mut out = format!("# {TOOL} {} version={VERSION} config={}\n", c.command, c.digest());
        let settings: Vec<String> =
            c.canonical().into_iter().filter(|(_, v)| !v.is_empty()).map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("# {}\n", settings.join("; ")));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.table.columns).map_err(csv_error)?;
        for row in &self.table.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    fn header(&self) -> Map<String, Value> {
        let c = &self.config;
        let mut m = Map::new();
        m.insert("tool".into(), json!(TOOL));
        m.insert("version".into(), json!(VERSION));
        m.insert("command".into(), json!(c.command.as_str()));
        m.insert("config_digest".into(), json!(c.digest()));
        m.insert("config".into(), Value::Object(c.canonical().into_iter().map(|(k, v)| (k, json!(v))).collect()));
        m
    }

    fn render_json(&self) -> Result<String> {
        let mut header = self.header();
        if let Some(summary) = &self.summary {
            header.insert("result".into(), summary.clone());
            return Ok(serde_json::to_string(&Value::Object(header))? + "\n");
        }
        header.insert("columns".into(), json!(self.table.columns));
        let mut out = serde_json::to_string(&json!({ "header": header }))? + "\n";
        for row in &self.table.rows {
            let obj: Map<String, Value> = self
                .table
                .columns
                .iter()
                .zip(row)
                .filter_map(|(name, cell)| cell.json().map(|v| (name.clone(), v)))
                .collect();
            out.push_str(&serde_json::to_string(&obj)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes to the configured path, or returns the text when none is set.
    pub fn write(&self) -> Result<Option<String>> {
        let text = self.render()?;
        match &self.config.out {
            Some(path) => {
                std::fs::write(path, text)?;
                Ok(None)
            }
            None => Ok(Some(text)),
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Command;

    fn sample() -> Output {
        let mut t = Table::new(&["label", "x"]);
        t.push(vec![("label", "a,b".into()), ("x", 0.1.into())]);
        t.push(vec![("label", "c".into()), ("y", 2usize.into())]);
        let mut config = ExperimentConfig::new(Command::Spectrum);
        config.seed = Some(1);
        Output { config, table: t, summary: None, success: true }
    }

    #[test]
    fn csv_round_trips_reals_and_quotes() {
        let text = sample().render().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# cutoff spectrum version="));
        assert_eq!(lines[2], "label,x,y");
        assert_eq!(lines[3], "\"a,b\",1.0000000000000001e-1,");
        assert_eq!(lines[4], "c,,2");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
        assert_eq!(Cell::Real(f64::INFINITY).csv(), "inf");
    }

    #[test]
    fn json_lines_skip_empty_cells() {
        let mut o = sample();
        o.config.format = Format::Json;
        let text = o.render().unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0]["header"]["columns"], json!(["label", "x", "y"]));
        assert_eq!(lines[2], json!({ "label": "c", "y": 2 }));

        o.summary = Some(json!({ "rows": [] }));
        let text = o.render().unwrap();
        assert_eq!(text.lines().count(), 1);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["result"], json!({ "rows": [] }));
        assert_eq!(v["version"], json!(VERSION));
    }
}

//! Success-rate tables and their text, CSV and JSON renderings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Arm, BenchError};

pub const ARM_HEADERS: [&str; 3] = ["w/o Cond", "w/ Cond FromEnv", "w/ Cond from LLM"];
pub const PT_HEADER: &str = "PT Name";
pub const LHT_HEADER: &str = "LHT Name";

/// One table entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    /// Fraction of successful episodes, in `[0, 1]`.
    Rate(f64),
    /// The arm cannot run this case at all.
    Infeasible,
    /// The arm was not selected in the configuration.
    NotRun,
}

impl Cell {
    pub fn rate(self) -> Option<f64> {
        match self {
            Cell::Rate(r) => Some(r),
            _ => None,
        }
    }

    fn text(self) -> String {
        match self {
            Cell::Rate(r) => format!("{:.0}%", 100.0 * r),
            Cell::Infeasible => "-".into(),
            Cell::NotRun => String::new(),
        }
    }

    fn csv(self) -> String {
        match self {
            Cell::Rate(r) => format!("{r:.4}"),
            other => other.text(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    /// Indexed by [`Arm::index`].
    pub cells: [Cell; 3],
}

impl TableRow {
    pub fn cell(&self, arm: Arm) -> Cell {
        self.cells[arm.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name_header: String,
    pub rows: Vec<TableRow>,
}

impl ResultTable {
    pub fn new(name_header: impl Into<String>) -> Self {
        Self {
            name_header: name_header.into(),
            rows: Vec::new(),
        }
    }

    pub fn row(&self, name: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    fn headers(&self) -> [&str; 4] {
        [&self.name_header, ARM_HEADERS[0], ARM_HEADERS[1], ARM_HEADERS[2]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Text, Format::Csv, Format::Json];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub fn render(table: &ResultTable, format: Format) -> Result<String, BenchError> {
    match format {
        Format::Text => {
            let mut out = table.headers().join(" | ");
            out.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.cells.iter().map(|c| c.text()).collect();
                out.push_str(&format!("{} | {}\n", row.name, cells.join(" | ")));
            }
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(table.headers())?;
            for row in &table.rows {
                let mut rec = vec![row.name.clone()];
                rec.extend(row.cells.iter().map(|c| c.csv()));
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))?;
            Ok(String::from_utf8(bytes).expect("csv output of utf-8 input is utf-8"))
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(table)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Writes `table` to `path` in the given format.
pub fn report(table: &ResultTable, format: Format, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    std::fs::write(path, render(table, format)?).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_json(text: &str) -> Result<ResultTable, BenchError> {
    Ok(serde_json::from_str(text)?)
}

//! CSV tables and their JSON run manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
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

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Numbers in scientific notation with `digits` significant digits.
    pub fn to_csv(&self, digits: usize) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_io)?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_number(*v, digits),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            w.write_record(&fields).map_err(csv_io)?;
        }
        w.into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()).into())
    }
}

fn csv_io(e: csv::Error) -> crate::error::CliError {
    std::io::Error::other(e.to_string()).into()
}

pub fn format_number(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{:.*e}", digits - 1, v)
    } else {
        v.to_string()
    }
}

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'static str,
    pub config: &'a ScenarioConfig,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub csv: &'a Path,
    pub rows: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub gbesq: &'static str,
    pub gbesq_cli: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            gbesq: gbesq::VERSION,
            gbesq_cli: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Writes the table and then its manifest.
pub fn write_artifacts(table: &Table, manifest: &Manifest<'_>, digits: usize) -> CliResult<()> {
    let bytes = table.to_csv(digits)?;
    std::fs::write(manifest.csv, bytes)?;
    let json =
        serde_json::to_vec_pretty(manifest).map_err(|e| std::io::Error::other(e.to_string()))?;
    std::fs::write(manifest_path(manifest.csv), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, 6.02214076e23, -0.0] {
            let s = format_number(v, 17);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_number(0.5, 3), "5.00e-1");
    }

    #[test]
    fn text_with_commas_is_quoted() {
        let mut t = Table::new(vec!["id", "detail"]);
        t.push(vec![1usize.into(), "a, b".into()]);
        let s = String::from_utf8(t.to_csv(17).unwrap()).unwrap();
        assert_eq!(s, "id,detail\n1,\"a, b\"\n");
    }

    #[test]
    fn manifest_sits_next_to_the_csv() {
        assert_eq!(
            manifest_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.manifest.json")
        );
    }
}

//! Versioned CSV tables. Every file starts with a comment line naming the
//! schema version, the table kind and the manifest hash of the run that
//! produced it; floats are written with 17 significant digits so they
//! round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{csv_err, input_err, io_err, CliError, Result};

/// Append-only schema version of every table.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    /// Per-circuit statistics.
    Circuits,
    /// Per-point ensemble statistics.
    Ensemble,
    /// First-moment time series.
    Series,
    /// Replica-model collision probabilities.
    Collision,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::Circuits => "circuits",
            TableKind::Ensemble => "ensemble",
            TableKind::Series => "series",
            TableKind::Collision => "collision",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [TableKind::Circuits, TableKind::Ensemble, TableKind::Series, TableKind::Collision]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// 17 significant digits: exact round trip for every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_table(path: &Path, kind: TableKind, manifest: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    // write to a sibling and rename, so an interrupted run never leaves a
    // truncated table behind
    let tmp = path.with_extension("csv.partial");
    let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
    writeln!(
        file,
        "# bernoulli schema={SCHEMA_VERSION} kind={} manifest={manifest}",
        kind.name()
    )
    .map_err(io_err(&tmp))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_err(&tmp))?;
    for row in rows {
        if row.len() != header.len() {
            return input_err(format!("row of {} fields under a {}-column header", row.len(), header.len()));
        }
        w.write_record(row).map_err(csv_err(&tmp))?;
    }
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Clone, Debug)]
pub struct Table {
    pub kind: TableKind,
    pub manifest: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(io_err(path))?;
        let fields: Vec<(&str, &str)> = first
            .trim()
            .strip_prefix("# bernoulli")
            .ok_or_else(|| CliError::Input(format!("{}: missing table header line", path.display())))?
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let get = |key: &str| fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let schema: u32 = get("schema").and_then(|v| v.parse().ok()).unwrap_or(0);
        if schema != SCHEMA_VERSION {
            return input_err(format!(
                "{}: schema version {schema}, this build reads {SCHEMA_VERSION}",
                path.display()
            ));
        }
        let kind = get("kind")
            .and_then(TableKind::parse)
            .ok_or_else(|| CliError::Input(format!("{}: unknown table kind", path.display())))?;
        let manifest = get("manifest").unwrap_or_default().to_string();
        let mut csv = csv::Reader::from_reader(reader);
        let header = csv.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
        let rows = csv
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err(path))?;
        Ok(Table {
            kind,
            manifest,
            header,
            rows,
        })
    }

    pub fn expect_kind(&self, kind: TableKind) -> Result<&Self> {
        if self.kind != kind {
            return input_err(format!("expected a {} table, got {}", kind.name(), self.kind.name()));
        }
        Ok(self)
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("{} table has no column '{name}'", self.kind.name())))
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn column<T: std::str::FromStr>(&self, name: &str) -> Result<Vec<T>> {
        self.column_str(name)?
            .into_iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Input(format!("column '{name}': cannot parse '{s}'")))
            })
            .collect()
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::Serialize;

use crate::config::{Format, RunConfig};

/// A table held as strings; numbers are rendered with `{}` so they round-trip.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(v: f64) -> String {
    v.to_string()
}

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    config: String,
    rows: &'a T,
}

/// Writes a table (CSV) or the serialized rows (JSON) to the configured
/// destination. Both start from the canonical config string.
pub fn emit<T: Serialize>(cfg: &RunConfig, table: &Table, rows: &T) -> io::Result<()> {
    let mut sink: Box<dyn Write> = match &cfg.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    match cfg.format {
        Format::Csv => {
            writeln!(sink, "# config: {}", cfg.canonical())?;
            let mut w = csv::Writer::from_writer(&mut sink);
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &JsonDoc { config: cfg.canonical(), rows })?;
            writeln!(sink)?;
        }
    }
    sink.flush()
}

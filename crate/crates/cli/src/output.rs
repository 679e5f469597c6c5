use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl Format {
    /// Table on a terminal, JSON otherwise.
    pub fn resolve(requested: Option<Format>) -> Format {
        requested.unwrap_or(if io::stdout().is_terminal() {
            Format::Table
        } else {
            Format::Json
        })
    }
}

/// Provenance record written next to every primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Value, seed: Option<u64>, elapsed: Duration) -> Self {
        Self {
            command: command.into(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            duration_secs: elapsed.as_secs_f64(),
        }
    }

    /// Write beside `out` as `<out>.manifest.json`, or to stderr when there is no output file.
    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match out {
            Some(path) => {
                let side = sidecar(path);
                std::fs::write(&side, text + "\n")
                    .with_context(|| format!("writing {}", side.display()))
            }
            None => {
                eprintln!("manifest: {}", serde_json::to_string(self)?);
                Ok(())
            }
        }
    }
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Open `path` for writing, or stdout.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// Render one record.
pub fn write_record<T: Serialize>(out: &mut dyn Write, format: Format, value: &T) -> Result<()> {
    let value = serde_json::to_value(value)?;
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?,
        Format::Csv => write_csv_rows(out, &[value])?,
        Format::Table => {
            let flat = flatten(&value);
            let width = flat.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, v) in &flat {
                writeln!(out, "{k:<width$}  {}", cell(v))?;
            }
        }
    }
    Ok(())
}

/// Render a list of records with a shared schema.
pub fn write_rows<T: Serialize>(out: &mut dyn Write, format: Format, rows: &[T]) -> Result<()> {
    let values: Vec<Value> = rows
        .iter()
        .map(serde_json::to_value)
        .collect::<serde_json::Result<_>>()?;
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&values)?)?,
        Format::Csv => write_csv_rows(out, &values)?,
        Format::Table => {
            let flat: Vec<Map<String, Value>> = values.iter().map(flatten).collect();
            let Some(first) = flat.first() else {
                return Ok(());
            };
            let keys: Vec<&String> = first.keys().collect();
            let cells: Vec<Vec<String>> = flat
                .iter()
                .map(|r| keys.iter().map(|k| cell(&r[k.as_str()])).collect())
                .collect();
            let widths: Vec<usize> = keys
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    cells
                        .iter()
                        .map(|r| r[i].len())
                        .max()
                        .unwrap_or(0)
                        .max(k.len())
                })
                .collect();
            let line = |items: Vec<String>| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(
                out,
                "{}",
                line(keys.iter().map(|k| k.to_string()).collect())
            )?;
            for r in cells {
                writeln!(out, "{}", line(r))?;
            }
        }
    }
    Ok(())
}

fn write_csv_rows(out: &mut dyn Write, values: &[Value]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let flat: Vec<Map<String, Value>> = values.iter().map(flatten).collect();
    if let Some(first) = flat.first() {
        w.write_record(first.keys())?;
        for r in &flat {
            w.write_record(first.keys().map(|k| cell(&r[k.as_str()])))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Nested objects become dotted keys; arrays stay as compact JSON.
fn flatten(value: &Value) -> Map<String, Value> {
    fn walk(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other.clone());
            }
        }
    }
    let mut out = Map::new();
    walk("", value, &mut out);
    out
}

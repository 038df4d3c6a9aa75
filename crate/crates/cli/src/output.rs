//! Report files: JSON, a flat `key: value` text rendering, and gnuplot scripts.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&path)?;
        Ok(Self(path))
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.file(name))?))
    }

    /// Writes `<stem>.json` and `<stem>.txt`.
    pub fn report<T: Serialize>(&self, stem: &str, value: &T) -> Result<(), CliError> {
        let json = serde_json::to_value(value)?;
        let mut w = self.writer(&format!("{stem}.json"))?;
        serde_json::to_writer_pretty(&mut w, &json)?;
        writeln!(w)?;
        w.flush()?;
        fs::write(self.file(&format!("{stem}.txt")), flatten(&json))?;
        Ok(())
    }
}

/// One `dotted.key: value` line per leaf, keys sorted.
pub fn flatten(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            Value::Array(items) if items.iter().any(|i| i.is_object() || i.is_array()) => {
                for (k, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{k}"), child, out);
                }
            }
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(leaf).collect();
                let _ = writeln!(out, "{prefix}: [{}]", joined.join(", "));
            }
            _ => {
                let _ = writeln!(out, "{prefix}: {}", leaf(v));
            }
        }
    }
    fn leaf(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
    let mut out = String::new();
    walk("", value, &mut out);
    out
}

/// CSV float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// gnuplot script plotting column `column` of `t,S,E,I,R,N` files against `t`.
pub fn gnuplot_series(title: &str, files: &[String], columns: &[(usize, &str)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel 't'");
    let mut parts = Vec::new();
    for f in files {
        for (col, name) in columns {
            parts.push(format!("'{f}' using 1:{col} with lines title '{name} ({f})'"));
        }
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

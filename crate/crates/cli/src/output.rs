use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

/// Where a command's CSV and metadata go.
#[derive(Debug, Clone)]
pub enum Sink {
    Stdout,
    Files { csv: PathBuf, meta: PathBuf },
}

impl Sink {
    /// `None` writes CSV to stdout. A path ending in `.csv` is used as the
    /// file itself; anything else is a directory that receives
    /// `<command>.csv`.
    pub fn resolve(out: Option<&Path>, command: &str) -> Result<Sink> {
        let Some(out) = out else {
            return Ok(Sink::Stdout);
        };
        let csv = if out.extension().is_some_and(|e| e == "csv") {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            out.to_path_buf()
        } else {
            fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            out.join(format!("{command}.csv"))
        };
        let meta = csv.with_extension("meta.json");
        Ok(Sink::Files { csv, meta })
    }

    pub fn write(&self, csv: &str, meta: &Value) -> Result<()> {
        match self {
            Sink::Stdout => {
                let mut out = io::stdout().lock();
                out.write_all(csv.as_bytes())?;
                out.flush()?;
            }
            Sink::Files { csv: path, meta: meta_path } => {
                fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
                let mut text = serde_json::to_string_pretty(meta)?;
                text.push('\n');
                fs::write(meta_path, text)
                    .with_context(|| format!("writing {}", meta_path.display()))?;
            }
        }
        Ok(())
    }
}

/// Accumulates CSV text with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    rows: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text, rows: 0 }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

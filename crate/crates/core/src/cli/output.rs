use serde::Serialize;
use serde_json::json;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory for one run. Every file gets a header carrying the tool
/// version, the subcommand and the config hash.
#[derive(Clone, Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub subcommand: &'static str,
    pub config_hash: String,
}

impl OutputDir {
    pub fn create(root: &Path, subcommand: &'static str, config_hash: String) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), subcommand, config_hash })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn meta(&self) -> serde_json::Value {
        json!({
            "tool": "chainwaves",
            "version": VERSION,
            "subcommand": self.subcommand,
            "config_sha256": self.config_hash,
        })
    }

    /// Writes `{"meta": …, "data": value}`.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let doc = json!({ "meta": self.meta(), "data": value });
        let mut w = BufWriter::new(fs::File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    /// CSV with a `#` comment header, then the column names, then rows.
    pub fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# chainwaves {VERSION} {} config_sha256={}", self.subcommand, self.config_hash)?;
        writeln!(w, "{}", columns.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form, so reruns are byte identical.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

//! Writers for the CSV and JSON artifacts.
//!
//! Grid CSVs start with one `#` metadata line, then the header `x,p,<channels>`,
//! then one row per node, `x` outer and `p` inner. Floats use 17 significant
//! digits so values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use wigner_flow::grid::PhaseGrid;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(config_sha256: String) -> Self {
        Self { tool: "wigner-flow", version: env!("CARGO_PKG_VERSION"), config_sha256 }
    }

    fn csv_line(&self) -> String {
        format!("# {} {} config_sha256={}\n", self.tool, self.version, self.config_sha256)
    }
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Sink {
    dir: PathBuf,
    meta: Meta,
    written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, meta: Meta) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), meta, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn grid_csv(&mut self, name: &str, grid: &PhaseGrid, channels: &[&str]) -> Result<()> {
        let spec = grid.spec();
        let data = channels.iter().map(|c| grid.channel(c)).collect::<wigner_flow::Result<Vec<_>>>()?;
        let mut out = self.meta.csv_line();
        out.push_str("x,p");
        for c in channels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for i in 0..spec.n_x {
            for j in 0..spec.n_p {
                let k = spec.index(i, j);
                write!(out, "{},{}", float(spec.x(i)), float(spec.p(j)))?;
                for d in &data {
                    write!(out, ",{}", float(d[k]))?;
                }
                out.push('\n');
            }
        }
        self.write(name, &out)
    }

    /// A CSV with a metadata line and caller-formatted rows.
    pub fn table_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut out = self.meta.csv_line();
        out.push_str(header);
        out.push('\n');
        for r in rows {
            out.push_str(r);
            out.push('\n');
        }
        self.write(name, &out)
    }

    /// A JSON object `{"meta": ..., <fields of value>}`.
    pub fn json_object<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        let obj = v.as_object_mut().context("JSON artifact must be an object")?;
        obj.insert("meta".into(), serde_json::to_value(&self.meta)?);
        let text = serde_json::to_string_pretty(&v)? + "\n";
        self.write(name, &text)
    }

    /// A bare JSON value (used where the schema is an array); its metadata
    /// lives in the manifest.
    pub fn json_value<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, &text)
    }

    /// Writes `manifest.json`, adding this run's artifacts to those already
    /// listed in the directory.
    pub fn finish(mut self) -> Result<Vec<String>> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            files: &'a [String],
        }
        let mut files = self.written.clone();
        if let Ok(text) = fs::read_to_string(self.path("manifest.json")) {
            let old: serde_json::Value = serde_json::from_str(&text).unwrap_or_default();
            if let Some(list) = old["files"].as_array() {
                files.extend(list.iter().filter_map(|v| v.as_str().map(String::from)));
            }
        }
        files.sort();
        files.dedup();
        self.json_object("manifest.json", &Manifest { files: &files })?;
        Ok(files)
    }
}

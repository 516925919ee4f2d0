//! CSV emission and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::Settings;

/// Hash of everything that determines a run's numbers: command, version and
/// the canonical settings (worker count and output directory excluded).
pub fn manifest_hash(command: &str, settings: &Settings) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "command = {command}\nversion = {}\n",
        env!("CARGO_PKG_VERSION")
    ));
    for (k, v) in settings.canonical() {
        h.update(format!("{k} = {v}\n"));
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

/// Accumulates one CSV table in memory and writes it in a single call.
pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(hash: &str, columns: &[&str]) -> Self {
        Self {
            text: format!("# manifest: {hash}\n# {}\n", columns.join(",")),
            columns: columns.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, &self.text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Settings echo plus extracted results, written as `manifest.txt`.
pub struct Manifest {
    hash: String,
    lines: Vec<(String, String)>,
    results: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, settings: &Settings) -> Self {
        let mut lines = vec![
            ("command".to_string(), command.to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ];
        lines.extend(settings.canonical().into_iter().map(|(k, v)| (k.to_string(), v)));
        lines.push(("workers".into(), settings.workers.to_string()));
        lines.push(("out_dir".into(), settings.out_dir.display().to_string()));
        Self {
            hash: manifest_hash(command, settings),
            lines,
            results: Vec::new(),
        }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn results(&self) -> &[(String, String)] {
        &self.results
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut text = format!("# manifest: {}\n", self.hash);
        for (k, v) in &self.lines {
            let _ = writeln!(text, "{k} = {v}");
        }
        for (k, v) in &self.results {
            let _ = writeln!(text, "result.{k} = {v}");
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

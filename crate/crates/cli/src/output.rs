//! Output directory bookkeeping: data files, content hashes, stage verdicts.

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub stage: String,
    pub verdict: Verdict,
    pub detail: String,
}

pub struct OutputDir {
    root: PathBuf,
    pub files: Vec<FileEntry>,
    pub stages: Vec<Stage>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Round-trip decimal formatting with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `prefix1..prefixN`.
pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Trajectory header `t,x1..,dx1..[,y1..,dy1..]`.
pub fn trajectory_header(s: usize, f: Option<usize>) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(columns("x", s));
    h.extend(columns("dx", s));
    if let Some(f) = f {
        h.extend(columns("y", f));
        h.extend(columns("dy", f));
    }
    h
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes a file and records its hash; rewriting a name replaces the entry.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn json<S: Serialize + ?Sized>(&mut self, name: &str, value: &S) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    /// Numeric CSV.
    pub fn table(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> anyhow::Result<()> {
        let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|&v| num(v)).collect()).collect();
        self.csv(name, header, &cells)
    }

    pub fn stage(&mut self, stage: &str, verdict: Verdict, detail: impl Into<String>) {
        let detail = detail.into();
        println!("{stage}: {} ({detail})", verdict.as_str());
        self.stages.push(Stage {
            stage: stage.to_string(),
            verdict,
            detail,
        });
    }
}

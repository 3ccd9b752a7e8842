//! CSV tables and the text run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const MANIFEST_NAME: &str = "manifest.txt";
pub const MANIFEST_FORMAT: u32 = 1;

/// A CSV table held in memory until written.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Cell formatting: shortest round-trip for floats.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for u64 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        (*self).to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        (*self as u8).to_string()
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::output::Cell::cell(&$x)),*]
    };
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    /// Reads a table written by [`Table::to_bytes`].
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?;
        let header = r
            .headers()
            .map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| HarnessError::Csv(path.to_path_buf(), e.to_string()))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column by name.
    pub fn f64s(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let c = self.column(name).ok_or_else(|| HarnessError::Config(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>().map_err(|_| HarnessError::Config(format!("bad number '{}' in '{name}'", r[c])))
            })
            .collect()
    }
}

/// Mean with a batch-means error bar over an averaging window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
}

/// Everything needed to attribute, reproduce and check a run's outputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// canonical configuration text
    pub config: String,
    /// named noise streams: `(name, "seed purpose member")`
    pub streams: Vec<(String, String)>,
    pub stats: Vec<(String, Stat)>,
    pub flags: Vec<(String, String)>,
    /// `(relative path, sha256, data rows, step counter at the last row)`
    pub files: Vec<(String, String, usize, u64)>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64, config: String) -> Self {
        RunManifest { command: command.into(), config_hash, seed, config, ..Default::default() }
    }

    pub fn stat(&mut self, name: impl Into<String>, s: Stat) {
        self.stats.push((name.into(), s));
    }

    pub fn flag(&mut self, name: impl Into<String>, v: impl Into<String>) {
        self.flags.push((name.into(), v.into()));
    }

    pub fn get_stat(&self, name: &str) -> Option<Stat> {
        self.stats.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    pub fn get_flag(&self, name: &str) -> Option<&str> {
        self.flags.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    /// Writes `table` under `dir` and records it.
    pub fn write_table(&mut self, dir: &Path, rel: &str, table: &Table, counter: u64) -> Result<(), HarnessError> {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| HarnessError::Io(parent.to_path_buf(), e))?;
        }
        let bytes = table.to_bytes();
        std::fs::write(&path, &bytes).map_err(|e| HarnessError::Io(path.clone(), e))?;
        self.files.push((rel.to_string(), sha256_hex(&bytes), table.rows.len(), counter));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# bspc run manifest").unwrap();
        writeln!(s, "format = {MANIFEST_FORMAT}").unwrap();
        writeln!(s, "command = {}", self.command).unwrap();
        writeln!(s, "config_hash = {}", self.config_hash).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        for line in self.config.lines() {
            writeln!(s, "config.{line}").unwrap();
        }
        for (n, v) in &self.streams {
            writeln!(s, "stream.{n} = {v}").unwrap();
        }
        for (n, st) in &self.stats {
            writeln!(s, "stat.{n} = {:?} {:?} {:?} {:?} {}", st.mean, st.stderr, st.t0, st.t1, st.samples).unwrap();
        }
        for (n, v) in &self.flags {
            writeln!(s, "flag.{n} = {v}").unwrap();
        }
        for (p, h, rows, c) in &self.files {
            writeln!(s, "file.{p} = {h} {rows} {c}").unwrap();
        }
        for w in &self.warnings {
            writeln!(s, "warning = {w}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let err = |m: String| HarnessError::Manifest(m);
        let mut m = RunManifest::default();
        let mut format = None;
        for line in text.lines() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| err(format!("malformed line '{line}'")))?;
            if let Some(key) = k.strip_prefix("config.") {
                writeln!(m.config, "{key} = {v}").unwrap();
            } else if let Some(n) = k.strip_prefix("stream.") {
                m.streams.push((n.into(), v.into()));
            } else if let Some(n) = k.strip_prefix("stat.") {
                let p: Vec<&str> = v.split_whitespace().collect();
                let num = |i: usize| -> Result<f64, HarnessError> {
                    p.get(i).and_then(|x| x.parse().ok()).ok_or_else(|| err(format!("bad stat '{line}'")))
                };
                let samples = p.get(4).and_then(|x| x.parse().ok()).ok_or_else(|| err(format!("bad stat '{line}'")))?;
                m.stats.push((n.into(), Stat { mean: num(0)?, stderr: num(1)?, t0: num(2)?, t1: num(3)?, samples }));
            } else if let Some(n) = k.strip_prefix("flag.") {
                m.flags.push((n.into(), v.into()));
            } else if let Some(p) = k.strip_prefix("file.") {
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!("bad file entry '{line}'")));
                }
                let rows = parts[1].parse().map_err(|_| err(format!("bad row count '{line}'")))?;
                let c = parts[2].parse().map_err(|_| err(format!("bad counter '{line}'")))?;
                m.files.push((p.into(), parts[0].into(), rows, c));
            } else {
                match k {
                    "format" => format = v.parse::<u32>().ok(),
                    "command" => m.command = v.into(),
                    "config_hash" => m.config_hash = v.into(),
                    "seed" => m.seed = v.parse().map_err(|_| err("bad seed".into()))?,
                    "warning" => m.warnings.push(v.into()),
                    _ => return Err(err(format!("unknown entry '{k}'"))),
                }
            }
        }
        match format {
            Some(MANIFEST_FORMAT) => Ok(m),
            Some(f) => Err(err(format!("manifest format {f} is not supported (expected {MANIFEST_FORMAT})"))),
            None => Err(err("missing format line".into())),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, self.to_text()).map_err(|e| HarnessError::Io(path.clone(), e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Directory name for one diffusivity, e.g. `kappa_1e-4`.
pub fn kappa_dir(kappa: f64) -> String {
    format!("kappa_{kappa:e}")
}

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::config::{parse_config, ConfigError, ExperimentConfig};

/// One CSV field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Uint(u64),
    Float(f64),
}

impl Cell {
    fn write_to(&self, out: &mut String) {
        match self {
            Cell::Int(v) => write!(out, "{v}"),
            Cell::Uint(v) => write!(out, "{v}"),
            Cell::Float(v) => write!(out, "{v:.16e}"),
        }
        .expect("writing to a String cannot fail");
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Uint(v as u64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

const CONFIG_BEGIN: &str = "config begin";
const CONFIG_END: &str = "config end";

/// Table plus a `# `-prefixed preamble echoing the resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvArtifact {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Extra `key = value` lines appended to the preamble.
    pub notes: Vec<(String, String)>,
}

impl CsvArtifact {
    pub fn new(header: &[&str], config: ExperimentConfig, seed: u64) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            config,
            seed,
            notes: Vec::new(),
        }
    }

    /// Appends a row. Panics when the arity does not match the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row arity must match the header");
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    /// Header and rows, without the preamble.
    pub fn body(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.write_to(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the body framed as a git blob (`blob <len>\0<body>`).
    pub fn content_hash(&self) -> String {
        let body = self.body();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(&format!("# levyflow {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("# experiment = {}\n", self.config.experiment));
        out.push_str(&format!("# seed = {}\n", self.seed));
        out.push_str(&format!("# content_hash = {}\n", self.content_hash()));
        for (k, v) in &self.notes {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&format!("# {CONFIG_BEGIN}\n"));
        for line in self.config.render().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str(&format!("# {line}\n"));
            }
        }
        out.push_str(&format!("# {CONFIG_END}\n"));
        out.push_str(&self.body());
        out.into_bytes()
    }
}

/// Recovers the configuration echoed in a CSV preamble.
pub fn config_from_csv(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut inside = false;
    let mut doc = String::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let content = line.strip_prefix("# ").unwrap_or(line.trim_start_matches('#'));
        match content {
            CONFIG_BEGIN => inside = true,
            CONFIG_END => break,
            _ if inside => {
                doc.push_str(content);
                doc.push('\n');
            }
            _ => {}
        }
    }
    parse_config(&doc)
}

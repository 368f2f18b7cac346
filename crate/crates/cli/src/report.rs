use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: String,
    pub seed: Option<u64>,
    pub dataset: String,
    pub dataset_fingerprint: String,
}

impl Provenance {
    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("tool: {} {}", self.tool, self.version),
            format!("command: {}", self.command_line),
            format!("seed: {}", self.seed.map_or("none".to_string(), |s| s.to_string())),
            format!("dataset: {}", self.dataset),
            format!("dataset-sha256: {}", self.dataset_fingerprint),
        ]
    }
}

/// Numeric table written as CSV; every cell is a number so the file loads back
/// through the dataset reader.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Legend lines (feature names, code meanings) emitted as comments.
    pub legend: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub struct Report {
    pub command: &'static str,
    pub body: Value,
    pub table: Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn render_csv(report: &Report, prov: &Provenance) -> String {
    let mut out = String::new();
    for line in prov.comment_lines().iter().chain(&report.table.legend) {
        writeln!(out, "# {line}").unwrap();
    }
    writeln!(out, "{}", report.table.columns.join(",")).unwrap();
    let kinds = vec!["num"; report.table.columns.len()].join(",");
    writeln!(out, "#kind:{kinds}").unwrap();
    for row in &report.table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

fn render_json(report: &Report, prov: &Provenance) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("provenance".into(), serde_json::to_value(prov).unwrap());
    doc.insert("command".into(), Value::String(report.command.into()));
    doc.insert("result".into(), report.body.clone());
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).unwrap();
    s.push('\n');
    s
}

pub fn render(report: &Report, prov: &Provenance, format: Format) -> String {
    match format {
        Format::Csv => render_csv(report, prov),
        Format::Json => render_json(report, prov),
    }
}

/// Writes to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn emit(contents: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

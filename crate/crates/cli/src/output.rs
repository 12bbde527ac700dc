use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    /// SHA-256 of the input file, hex.
    pub input_sha256: Option<String>,
    pub flags: Vec<String>,
}

/// What a command produced: the same data as JSON and as a text table.
pub struct Report {
    pub command: &'static str,
    pub result: Value,
    pub table: String,
    pub warnings: Vec<String>,
    /// Nonzero when the command ran but its check failed.
    pub status: u8,
}

impl Report {
    pub fn new(command: &'static str, result: impl Serialize, table: String) -> Self {
        Report {
            command,
            result: serde_json::to_value(result).expect("results serialize"),
            table,
            warnings: Vec::new(),
            status: 0,
        }
    }

    pub fn render(&self, header: &Header, format: Format) -> String {
        match format {
            Format::Json => {
                let v = json!({
                    "header": header,
                    "command": self.command,
                    "warnings": self.warnings,
                    "result": self.result,
                });
                let mut s = serde_json::to_string_pretty(&v).expect("json");
                s.push('\n');
                s
            }
            Format::Table => {
                let mut s = format!("# {} {}\n", header.tool, header.version);
                if let Some(h) = &header.input_sha256 {
                    s.push_str(&format!("# input sha256 {h}\n"));
                }
                s.push_str(&format!("# flags {}\n", header.flags.join(" ")));
                for w in &self.warnings {
                    s.push_str(&format!("warning: {w}\n"));
                }
                s.push_str(&self.table);
                if !s.ends_with('\n') {
                    s.push('\n');
                }
                s
            }
        }
    }
}

/// Left-aligned columns separated by two spaces.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if k + 1 == cells.len() {
                out.push_str(c);
            } else {
                out.push_str(c);
                out.push_str(&" ".repeat(w - c.chars().count() + 2));
            }
        }
        out.push('\n');
        out
    };
    let mut s = line(headers.to_vec());
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    s
}

pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

pub fn kv(pairs: &[(&str, String)]) -> String {
    let w = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    pairs
        .iter()
        .map(|(k, v)| format!("{k:<w$}  {v}\n"))
        .collect()
}

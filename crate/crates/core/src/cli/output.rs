//! CSV tables with a `#` provenance header, plus the JSON manifest sidecar.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::PathBuf;

use crate::params::SystemParams;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.8e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub comments: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            comments: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: String) {
        self.comments.push(line);
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub enum Target {
    Stdout,
    File(PathBuf),
}

impl Target {
    /// `--out` wins, then `$RSK_OUT_DIR/<subcommand>.csv`, then stdout.
    pub fn resolve(out: Option<PathBuf>, subcommand: &str) -> Self {
        if let Some(p) = out {
            return Self::File(p);
        }
        match std::env::var_os(super::OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::File(PathBuf::from(dir).join(format!("{subcommand}.csv"))),
            _ => Self::Stdout,
        }
    }
}

#[derive(Serialize)]
struct Identity<'a, O: Serialize> {
    tool: &'static str,
    version: &'static str,
    parameters: &'a SystemParams,
    options: &'a O,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Manifest<'a, O: Serialize> {
    #[serde(flatten)]
    identity: Identity<'a, O>,
    digest: String,
    output: String,
    rows: usize,
}

/// SHA-256 over everything that determines the table, output paths excluded.
pub fn manifest_digest<O: Serialize>(params: &SystemParams, options: &O, seed: Option<u64>) -> String {
    let identity = Identity {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parameters: params,
        options,
        seed,
    };
    let bytes = serde_json::to_vec(&identity).expect("manifest serializes");
    hex::encode(Sha256::digest(bytes))
}

fn render<O: Serialize>(table: &Table, params: &SystemParams, options: &O, seed: Option<u64>, digest: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {} {}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")));
    s.push_str(&format!(
        "# options: {}\n",
        serde_json::to_string(options).unwrap_or_default()
    ));
    s.push_str(&format!(
        "# params: {}\n",
        serde_json::to_string(params).unwrap_or_default()
    ));
    match seed {
        Some(v) => s.push_str(&format!("# seed: {v}\n")),
        None => s.push_str("# seed: none\n"),
    }
    s.push_str(&format!("# manifest: {digest}\n"));
    for c in &table.comments {
        s.push_str(&format!("# {c}\n"));
    }
    s.push_str(&table.columns.join(","));
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn emit<O: Serialize>(
    table: &Table,
    params: &SystemParams,
    options: &O,
    seed: Option<u64>,
    target: &Target,
    quiet: bool,
) -> std::io::Result<()> {
    let digest = manifest_digest(params, options, seed);
    let text = render(table, params, options, seed, &digest);
    match target {
        Target::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
        Target::File(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
            let manifest = Manifest {
                identity: Identity {
                    tool: env!("CARGO_PKG_NAME"),
                    version: env!("CARGO_PKG_VERSION"),
                    parameters: params,
                    options,
                    seed,
                },
                digest,
                output: path.display().to_string(),
                rows: table.rows.len(),
            };
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".manifest.json");
            std::fs::write(
                &sidecar,
                serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
            )?;
            if !quiet {
                eprintln!("wrote {} ({} rows)", path.display(), table.rows.len());
            }
            Ok(())
        }
    }
}

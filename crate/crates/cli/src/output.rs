//! Output files: CSV with `#` header comments, JSON documents and the run
//! manifest.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

/// Comma-separated table: `# key: value` comment lines, a column header,
/// then rows. LF line endings, shortest round-trip float formatting.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(hash: &str, comments: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = format!("# config_hash: {hash}\n");
        for (k, v) in comments {
            text.push_str(&format!("# {k}: {v}\n"));
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        let cells: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Collects files written by one command; every write goes through here.
pub struct Writer {
    dir: PathBuf,
    hash: String,
    pub outputs: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
            outputs: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn csv(&mut self, name: &str, csv: Csv) -> Result<()> {
        self.write(name, csv.into_string())
    }

    /// Writes a JSON object with `config_hash` inserted as its first key.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), Value::String(self.hash.clone()));
        match serde_json::to_value(value)? {
            Value::Object(map) => doc.extend(map),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.write(name, text)
    }

    fn write(&mut self, name: &str, text: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub command: String,
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub commands: Vec<CommandRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Adds or replaces the record for `rec.command`. A manifest from a
    /// different configuration is discarded.
    pub fn record(dir: &Path, hash: &str, rec: CommandRecord) -> Result<()> {
        let mut m = match Manifest::load(dir) {
            Ok(m) if m.config_hash == hash => m,
            _ => Manifest {
                config_hash: hash.to_string(),
                artifact_version: ARTIFACT_VERSION.to_string(),
                commands: Vec::new(),
            },
        };
        m.commands.retain(|c| c.command != rec.command);
        m.commands.push(rec);
        m.commands.sort_by(|a, b| a.command.cmp(&b.command));
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }
}

/// Checks that every file the manifest lists exists and carries its hash.
/// Returns the number of files checked.
pub fn verify_manifest(dir: &Path, expected_hash: Option<&str>) -> Result<usize> {
    let m = Manifest::load(dir)?;
    if let Some(h) = expected_hash {
        if h != m.config_hash {
            bail!(
                "manifest hash {} does not match config hash {h}",
                m.config_hash
            );
        }
    }
    let mut checked = 0;
    for rec in &m.commands {
        for name in &rec.outputs {
            let path = dir.join(name);
            let text = fs::read_to_string(&path)
                .with_context(|| format!("{}: listed by `{}` but unreadable", name, rec.command))?;
            let ok = if name.ends_with(".json") {
                serde_json::from_str::<Value>(&text)
                    .ok()
                    .and_then(|v| v.get("config_hash").cloned())
                    == Some(Value::String(m.config_hash.clone()))
            } else {
                text.lines()
                    .take_while(|l| l.starts_with('#'))
                    .any(|l| l == format!("# config_hash: {}", m.config_hash))
            };
            if !ok {
                bail!(
                    "{name}: header does not carry config hash {}",
                    m.config_hash
                );
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("abc", &[("kappa", "2".into())], &["j", "E"]);
        c.row(&[&1, &0.1]);
        c.row(&[&-2, &1e-20]);
        assert_eq!(
            c.into_string(),
            "# config_hash: abc\n# kappa: 2\nj,E\n1,0.1\n-2,0.00000000000000000001\n"
        );
    }

    #[test]
    fn manifest_round_trip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Writer::new(dir.path(), "h1").unwrap();
        w.csv("a.csv", Csv::new("h1", &[], &["x"])).unwrap();
        w.json("b.json", &serde_json::json!({"v": 1})).unwrap();
        Manifest::record(
            dir.path(),
            "h1",
            CommandRecord {
                command: "spectrum".into(),
                outputs: w.outputs.clone(),
                wall_seconds: 0.0,
                warnings: vec![],
            },
        )
        .unwrap();
        assert_eq!(verify_manifest(dir.path(), Some("h1")).unwrap(), 2);
        assert!(verify_manifest(dir.path(), Some("other")).is_err());
        fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        assert!(verify_manifest(dir.path(), None).is_err());
        fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(verify_manifest(dir.path(), None).is_err());
    }
}

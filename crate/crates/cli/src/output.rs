use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Writes data files into one directory, stamping each with the config hash.
pub struct Output {
    pub dir: PathBuf,
    pub config_hash: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'a str,
    config_sha256: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl Output {
    pub fn new(dir: PathBuf, config_hash: String) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, config_hash })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// `{schema, config_sha256, ...body}` as pretty JSON.
    pub fn write_json<T: Serialize>(&self, name: &str, schema: &str, body: &T) -> Result<PathBuf> {
        let env = Envelope { schema, config_sha256: &self.config_hash, body };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV preceded by a `#` line carrying schema and config hash.
    pub fn write_csv<R: Serialize>(&self, name: &str, schema: &str, header: &[&str], rows: &[R]) -> Result<PathBuf> {
        let mut buf = format!("# schema={schema} config_sha256={}\n", self.config_hash).into_bytes();
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.write_bytes(name, &buf)
    }

    /// Appends a timestamped line to the sidecar log; the only place wall
    /// time is recorded.
    pub fn log(&self, line: &str) {
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let path = self.path("rydtwin.log");
        if let Ok(mut f) = fs::OpenOptions::new().create(true).append(true).open(path) {
            let _ = writeln!(f, "{stamp} {line}");
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

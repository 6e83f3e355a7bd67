//! Output directory handling. Files are reserved before any work starts so a
//! run never dies halfway through because of an existing output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

use crate::UsageError;

pub struct RunDir {
    path: PathBuf,
    overwrite: bool,
}

impl RunDir {
    pub fn new(path: PathBuf, overwrite: bool) -> Self {
        Self { path, overwrite }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Creates the directory and checks that none of `names` exist yet
    /// (unless overwriting). Reports every clash at once.
    pub fn reserve(&self, names: &[&str]) -> anyhow::Result<()> {
        if !self.overwrite {
            let taken: Vec<String> = names
                .iter()
                .map(|n| self.file(n))
                .filter(|p| p.exists())
                .map(|p| p.display().to_string())
                .collect();
            if !taken.is_empty() {
                return Err(UsageError(format!(
                    "refusing to overwrite {} (pass --overwrite)",
                    taken.join(", ")
                ))
                .into());
            }
        }
        fs::create_dir_all(&self.path)
            .with_context(|| format!("creating {}", self.path.display()))?;
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let p = self.file(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// `<command>.run.json`: the resolved settings plus a timestamp. This is
    /// the only output that differs between identical reruns.
    pub fn write_manifest<T: Serialize>(&self, command: &str, settings: &T) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            command: &'a str,
            version: &'a str,
            finished_unix: u64,
            settings: &'a T,
        }
        let finished_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.write_json(
            &manifest_name(command),
            &Manifest {
                command,
                version: env!("CARGO_PKG_VERSION"),
                finished_unix,
                settings,
            },
        )?;
        Ok(())
    }
}

pub fn manifest_name(command: &str) -> String {
    format!("{command}.run.json")
}

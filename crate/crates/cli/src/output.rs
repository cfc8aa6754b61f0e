use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::RunConfig;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a CSV with a single header line.
    pub fn csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.into_iter().collect::<Vec<_>>())?;
        }
        w.flush()?;
        Ok(path)
    }

    /// The effective configuration, minus the output location so that
    /// identical runs produce identical files.
    pub fn resolved_config(&self, cfg: &RunConfig) -> Result<PathBuf> {
        let path = self.path("config.resolved.json");
        let cfg = RunConfig { out: None, ..cfg.clone() };
        let mut text = serde_json::to_string_pretty(&cfg)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

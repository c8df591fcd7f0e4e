use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use fope::report::{svg_line_plot, Csv, Precision, RunManifest, Series};

use super::GlobalOpts;

/// Output directory bookkeeping for one command: every file written through
/// here is listed in the manifest.
pub struct Run {
    dir: PathBuf,
    precision: Precision,
    svg: bool,
    manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str, g: &GlobalOpts, config: serde_json::Value, seeds: Vec<u64>) -> Result<Self> {
        fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
        // a stale manifest would claim this run already finished
        let stale = g.out.join(fope::report::MANIFEST_FILE);
        if stale.exists() {
            fs::remove_file(&stale)?;
        }
        Ok(Self { dir: g.out.clone(), precision: g.precision(), svg: !g.no_svg, manifest: RunManifest::new(command, config, seeds) })
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records an artifact that was written by other code.
    pub fn record(&mut self, path: &Path) {
        let s = path.display().to_string();
        if !self.manifest.artifacts.contains(&s) {
            self.manifest.artifacts.push(s);
        }
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<PathBuf> {
        self.text(name, &csv.finish())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.record(&path);
        Ok(path)
    }

    /// Writes a line plot unless `--no-svg` was given.
    pub fn plot(&mut self, name: &str, title: &str, x: &str, y: &str, series: &[Series<'_>]) -> Result<()> {
        if self.svg {
            self.text(name, &svg_line_plot(title, x, y, series))?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.manifest.finish(&self.dir)?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

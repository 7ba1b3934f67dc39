//! CSV emission with pinned schemas.
//!
//! Every data product is a CSV file with a fixed header, floats at full
//! round-trip precision, and a sibling manifest recording exactly the run
//! that produced it. Identical manifests produce byte-identical files, so
//! outputs can be diffed across machines and reruns.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};

use crate::settings::{self, RunManifest};

/// Full round-trip float form: 17 significant digits, exponent notation.
/// Reading the text back yields bit-for-bit the same f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Boolean CSV cell as 0/1.
pub fn fmt_flag(b: bool) -> String {
    if b { "1".to_string() } else { "0".to_string() }
}

/// One CSV data product plus its sibling manifest.
pub struct Product {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Product {
    /// Create `<dir>/<stem>.csv` and write `header` plus the sibling
    /// `<stem>.manifest.toml`. Truncates both if present.
    pub fn create(dir: &Path, stem: &str, header: &[&str], manifest: &RunManifest) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let path = dir.join(format!("{stem}.csv"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(file);
        writer.write_record(header)?;
        write_manifest(dir, stem, manifest)?;
        Ok(Product { path, writer })
    }

    /// Reopen `<dir>/<stem>.csv` for appending; used by resumed scans. The
    /// caller counts committed rows first to pick its resume point.
    pub fn append(dir: &Path, stem: &str, manifest: &RunManifest) -> Result<Self> {
        let path = dir.join(format!("{stem}.csv"));
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .with_context(|| format!("opening {} to resume", path.display()))?;
        let writer = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(file);
        write_manifest(dir, stem, manifest)?;
        Ok(Product { path, writer })
    }

    /// Write one row and flush it; scans must not lose committed points on
    /// an interrupt.
    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Sibling manifest path for a product stem.
pub fn manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.manifest.toml"))
}

fn write_manifest(dir: &Path, stem: &str, manifest: &RunManifest) -> Result<()> {
    let path = manifest_path(dir, stem);
    let mut file =
        File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(settings::emit(manifest).as_bytes())?;
    Ok(())
}

/// Committed data rows in an existing CSV (header excluded); 0 when the
/// file is missing. Counts full lines only, so a row truncated by a crash
/// mid-write is recomputed on resume.
pub fn count_rows(dir: &Path, stem: &str) -> Result<usize> {
    let path = dir.join(format!("{stem}.csv"));
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
    };
    let mut reader = BufReader::new(file);
    let mut lines = 0usize;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        if buf.ends_with('\n') {
            lines += 1;
        }
    }
    Ok(lines.saturating_sub(1))
}

/// Stored manifest beside a product, when present.
pub fn read_manifest(dir: &Path, stem: &str) -> Result<Option<RunManifest>> {
    let path = manifest_path(dir, stem);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    let manifest = settings::load(&text, std::iter::empty())
        .map_err(|e| anyhow::anyhow!("stored manifest {}: {e}", path.display()))?;
    Ok(Some(manifest))
}

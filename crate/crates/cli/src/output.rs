use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cayley_sieve::harness::OutputFormat;
use cayley_sieve::{Result, SieveError};
use serde::Serialize;

/// Default directory for experiment outputs when no path is given.
pub const OUT_DIR_ENV: &str = "CAYLEY_SIEVE_OUT_DIR";

pub fn default_path(stem: &str, format: OutputFormat) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty())?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    Some(PathBuf::from(dir).join(format!("{stem}.{ext}")))
}

fn stdout_err(e: std::io::Error) -> SieveError {
    SieveError::io("<stdout>", e)
}

/// Writes `body` to `path`, creating parent directories, or to stdout.
pub fn write_with(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| SieveError::io(dir, e))?;
            }
            let file = File::create(path).map_err(|e| SieveError::io(path, e))?;
            let mut out = BufWriter::new(file);
            body(&mut out)?;
            out.flush().map_err(|e| SieveError::io(path, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            body(&mut out)?;
            out.flush().map_err(stdout_err)
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_with(path, |out| {
        out.write_all(text.as_bytes()).map_err(|e| match path {
            Some(p) => SieveError::io(p, e),
            None => stdout_err(e),
        })
    })
}

/// CSV with an explicit header, so that an empty table still has one.
pub fn write_csv<T: Serialize>(header: &[&str], records: &[T], path: Option<&Path>) -> Result<()> {
    write_with(path, |out| {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        wtr.write_record(header)?;
        for rec in records {
            wtr.serialize(rec)?;
        }
        wtr.flush().map_err(|e| match path {
            Some(p) => SieveError::io(p, e),
            None => stdout_err(e),
        })
    })
}

pub fn write_records<T: Serialize>(header: &[&str], records: &[T], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(header, records, path),
        OutputFormat::Json => write_json(records, path),
    }
}

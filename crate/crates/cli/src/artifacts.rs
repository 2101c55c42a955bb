use crate::error::CliError;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Floats in CSV bodies carry 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `<command>-<timestamp>.<ext>` files into one directory.
pub struct Artifacts {
    dir: PathBuf,
    enabled: bool,
}

impl Artifacts {
    pub fn new(dir: &Path, enabled: bool) -> Result<Self, CliError> {
        if enabled {
            fs::create_dir_all(dir)?;
        }
        Ok(Artifacts { dir: dir.to_path_buf(), enabled })
    }

    fn path(&self, command: &str, ext: &str) -> PathBuf {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ").to_string();
        let mut path = self.dir.join(format!("{command}-{stamp}.{ext}"));
        let mut n = 1;
        while path.exists() {
            path = self.dir.join(format!("{command}-{stamp}-{n}.{ext}"));
            n += 1;
        }
        path
    }

    fn emit(&self, command: &str, ext: &str, body: &str) -> Result<(), CliError> {
        print!("{body}");
        if self.enabled {
            let path = self.path(command, ext);
            fs::write(&path, body)?;
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&self, command: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.emit(command, "json", &body)
    }

    pub fn csv(&self, command: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
        self.emit(command, "csv", &body)
    }
}

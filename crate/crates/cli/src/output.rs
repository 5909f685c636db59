//! CSV emission. Every file starts with `# config_hash=<hex> seed=<seed>`;
//! reals are printed with 17 significant digits.

use std::io;
use std::path::{Path, PathBuf};

/// Formats a real with 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV file assembled in memory and written in one piece.
pub struct Csv {
    body: String,
}

impl Csv {
    pub fn new(hash: &str, seed: u64, columns: &[&str]) -> Self {
        let mut body = format!("# config_hash={hash} seed={seed}\n");
        body.push_str(&columns.join(","));
        body.push('\n');
        Csv { body }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.body.push_str(&fields.join(","));
        self.body.push('\n');
    }

    pub fn text(&self) -> &str {
        &self.body
    }

    pub fn write(&self, dir: &Path, name: &str) -> io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        std::fs::write(&path, &self.body)?;
        Ok(path)
    }
}

/// `key,value` pairs under the same header.
pub fn key_values(hash: &str, seed: u64, pairs: &[(&str, String)]) -> Csv {
    let mut c = Csv::new(hash, seed, &["key", "value"]);
    for (k, v) in pairs {
        c.row(&[k.to_string(), v.clone()]);
    }
    c
}

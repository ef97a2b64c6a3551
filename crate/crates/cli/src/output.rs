//! Output files. Every file a command will write is created before any
//! computation starts, so an unwritable destination fails fast.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Shortest decimal form that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, File>,
}

impl Outputs {
    pub fn prepare(dir: &Path, names: &[String]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut files = BTreeMap::new();
        for name in names {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            files.insert(name.clone(), file);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn take(&mut self, name: &str) -> File {
        self.files
            .remove(name)
            .unwrap_or_else(|| panic!("output {name} was not prepared"))
    }

    /// Writes `header` and `rows` to the prepared file `name`.
    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_writer(self.take(name));
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let mut file = self.take(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        file.write_all(text.as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .map_err(|e| CliError::io(&path, e))
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a, R: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub results: R,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 1e300, 3.0, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn missing_directory_parent_is_an_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = Outputs::prepare(&blocker.join("sub"), &["a.csv".into()]).err().unwrap();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn csv_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = Outputs::prepare(tmp.path(), &["x.csv".into()]).unwrap();
        out.write_csv("x.csv", &["a", "b"], vec![vec![num(0.5), "true".into()]]).unwrap();
        let text = std::fs::read_to_string(tmp.path().join("x.csv")).unwrap();
        assert_eq!(text, "a,b\n0.5,true\n");
    }
}

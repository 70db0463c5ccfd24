use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use seqmeas::qcore::MetricTrace;

use crate::CliError;

/// One declared check of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: value >= threshold,
            value,
            threshold,
        }
    }

    /// A boolean property; value 1 or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            passed: ok,
            value: f64::from(u8::from(ok)),
            threshold: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub version: String,
    pub threads: usize,
    pub verify: bool,
    pub config: serde_json::Value,
    pub wall_time_ms: f64,
    pub checks: Vec<Check>,
    /// Scalar results worth reporting besides the checks.
    pub results: serde_json::Map<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Collects artifacts, checks and results while an experiment runs.
pub struct Outputs {
    dir: PathBuf,
    pub checks: Vec<Check>,
    pub results: serde_json::Map<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            checks: Vec::new(),
            results: serde_json::Map::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn result<V: Into<serde_json::Value>>(&mut self, key: &str, v: V) {
        self.results.insert(key.to_string(), v.into());
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    /// Opens a CSV artifact for writing and records its name.
    pub fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        self.artifacts.push(name.to_string());
        let f = File::create(self.path(name))?;
        Ok(csv::Writer::from_writer(BufWriter::new(f)))
    }

    /// Raw file handle for artifacts written by library functions.
    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    /// `step` followed by the trace columns, plus any extra columns computed per row.
    pub fn write_trace(
        &mut self,
        name: &str,
        trace: &MetricTrace,
        extra: &[(&str, &dyn Fn(usize) -> f64)],
    ) -> Result<(), CliError> {
        let mut w = self.csv(name)?;
        let mut header = vec!["step".to_string()];
        header.extend(trace.names.iter().cloned());
        header.extend(extra.iter().map(|(n, _)| n.to_string()));
        w.write_record(&header)?;
        for (step, values) in &trace.rows {
            let mut rec = vec![step.to_string()];
            rec.extend(values.iter().map(|v| fmt_f64(*v)));
            rec.extend(extra.iter().map(|(_, f)| fmt_f64(f(*step))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456789.123, -0.0, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}

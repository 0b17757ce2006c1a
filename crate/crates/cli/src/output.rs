//! Result tables, gated reports and their CSV/JSON files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use circoal::stats::TestReport;
use clap::ValueEnum;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One table row: `key` labels non-numeric points, `x` is the abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub table: &'static str,
    pub key: String,
    pub x: Option<f64>,
    pub empirical: Option<f64>,
    pub stderr: Option<f64>,
    pub expected: Option<f64>,
}

impl Row {
    pub fn new(table: &'static str, x: f64) -> Self {
        Row { table, key: String::new(), x: Some(x), empirical: None, stderr: None, expected: None }
    }

    pub fn key(mut self, key: impl Into<String>) -> Self {
        self.key = key.into();
        self
    }

    pub fn no_x(mut self) -> Self {
        self.x = None;
        self
    }

    pub fn empirical(mut self, mean: f64, stderr: f64) -> Self {
        self.empirical = Some(mean);
        self.stderr = Some(stderr);
        self
    }

    pub fn expected(mut self, v: f64) -> Self {
        self.expected = Some(v);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub report: TestReport,
    /// Whether the report counts toward the exit code.
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub columns: Vec<&'static str>,
    pub data: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: &'static str,
    pub config: Vec<(&'static str, String)>,
    pub rows: Vec<Row>,
    pub reports: Vec<Gate>,
    pub samples: Option<Samples>,
    pub low_power: bool,
}

impl Output {
    pub fn new(command: &'static str) -> Self {
        Output { command, config: Vec::new(), rows: Vec::new(), reports: Vec::new(), samples: None, low_power: false }
    }

    pub fn config(&mut self, key: &'static str, value: impl ToString) {
        self.config.push((key, value.to_string()));
    }

    pub fn gate(&mut self, report: TestReport) {
        self.reports.push(Gate { report, gated: true });
    }

    pub fn advisory(&mut self, report: TestReport) {
        self.reports.push(Gate { report, gated: false });
    }

    /// Gated reports count only outside low-power runs.
    pub fn all_passed(&self) -> bool {
        self.low_power || self.reports.iter().all(|g| !g.gated || g.report.passed)
    }

    fn header(&self) -> Vec<(String, String)> {
        let mut h = vec![
            ("program".to_string(), "circoal".to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("command".to_string(), self.command.to_string()),
        ];
        h.extend(self.config.iter().map(|(k, v)| (k.to_string(), v.clone())));
        if self.low_power {
            h.push(("power".to_string(), "LOW-POWER: reports are advisory".to_string()));
        }
        h
    }

    /// Files written for `path` in `format`.
    pub fn paths(&self, path: &Path, format: Format) -> Vec<PathBuf> {
        match format {
            Format::Json => vec![path.to_path_buf()],
            Format::Csv => {
                let mut v = vec![path.to_path_buf(), sibling(path, "reports")];
                if self.samples.is_some() {
                    v.push(sibling(path, "samples"));
                }
                v
            }
        }
    }

    pub fn render(&self, path: &Path, format: Format) -> Vec<(PathBuf, String)> {
        let paths = self.paths(path, format);
        match format {
            Format::Json => vec![(paths[0].clone(), self.to_json())],
            Format::Csv => {
                let mut files = vec![(paths[0].clone(), self.rows_csv()), (paths[1].clone(), self.reports_csv())];
                if let Some(s) = &self.samples {
                    files.push((paths[2].clone(), self.samples_csv(s)));
                }
                files
            }
        }
    }

    /// Writes every file through a temporary sibling and renames it into
    /// place.
    pub fn write(&self, path: &Path, format: Format) -> io::Result<Vec<PathBuf>> {
        let files = self.render(path, format);
        let mut staged = Vec::new();
        for (dest, body) in &files {
            let tmp = temp_path(dest);
            if let Err(e) = fs::write(&tmp, body) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(e);
            }
            staged.push((tmp, dest.clone()));
        }
        for (tmp, dest) in &staged {
            fs::rename(tmp, dest)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }

    fn comment_block(&self) -> String {
        self.header().iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    fn rows_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["table", "key", "x", "empirical", "stderr", "expected"]).unwrap();
        for r in &self.rows {
            w.write_record([
                r.table.to_string(),
                r.key.clone(),
                num(r.x),
                num(r.empirical),
                num(r.stderr),
                num(r.expected),
            ])
            .unwrap();
        }
        self.comment_block() + &finish(w)
    }

    fn reports_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["description", "statistic", "threshold", "passed", "gated"]).unwrap();
        for g in &self.reports {
            let r = &g.report;
            w.write_record([
                r.description.clone(),
                num(Some(r.statistic)),
                num(Some(r.threshold)),
                r.passed.to_string(),
                g.gated.to_string(),
            ])
            .unwrap();
        }
        self.comment_block() + &finish(w)
    }

    fn samples_csv(&self, s: &Samples) -> String {
        let mut w = csv_writer();
        w.write_record(&s.columns).unwrap();
        for row in &s.data {
            w.write_record(row.iter().map(|&v| num(Some(v)))).unwrap();
        }
        self.comment_block() + &finish(w)
    }

    pub fn to_json(&self) -> String {
        let config: Map<String, Value> = self.header().into_iter().map(|(k, v)| (k, Value::String(v))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "table": r.table,
                    "key": r.key,
                    "x": r.x,
                    "empirical": r.empirical,
                    "stderr": r.stderr,
                    "expected": r.expected,
                })
            })
            .collect();
        let reports: Vec<Value> = self
            .reports
            .iter()
            .map(|g| {
                json!({
                    "description": g.report.description,
                    "statistic": g.report.statistic,
                    "threshold": g.report.threshold,
                    "passed": g.report.passed,
                    "gated": g.gated,
                })
            })
            .collect();
        let mut doc = json!({ "config": config, "rows": rows, "reports": reports });
        if let Some(s) = &self.samples {
            doc["samples"] = json!({ "columns": s.columns, "data": s.data });
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
        text.push('\n');
        text
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `dir/stem.ext` -> `dir/stem_<suffix>.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

fn temp_path(dest: &Path) -> PathBuf {
    let name = dest.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    dest.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

//! Suite reports: schema-stable JSON, a CSV companion, atomic file output.
//!
//! The JSON layout is fixed: top-level keys `suite`, `model`, `status`,
//! `metrics`, `grids_and_seeds`, `violations`, in that order, with floats in
//! a 17-significant-digit format.  Identical invocations therefore produce
//! byte-identical files.  The CSV companion holds one row per grid point or
//! sample statistic for plotting: first line header, comma separator, `.`
//! decimal, LF line endings.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use kolmo_core::jsonout::{format_float, Json};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// Attention needed (inconclusive precision, grid sensitivity, a standing
    /// assumption missing) without a concrete property violation.
    Flagged,
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Flagged => "flagged",
            Status::Fail => "fail",
        }
    }

    /// Process exit code for a completed run: violations are code 1, a
    /// flagged report still exits 0 (the report itself carries the caveat).
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass | Status::Flagged => 0,
            Status::Fail => 1,
        }
    }

    fn rank(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Flagged => 1,
            Status::Fail => 2,
        }
    }

    pub fn worst(self, other: Status) -> Status {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn parse(text: &str) -> Option<Status> {
        match text {
            "pass" => Some(Status::Pass),
            "flagged" => Some(Status::Flagged),
            "fail" => Some(Status::Fail),
            _ => None,
        }
    }
}

/// A concrete failure location inside a suite, with its signed margin
/// (negative or zero means the bound was missed).
#[derive(Debug, Clone)]
pub struct Violation {
    pub location: String,
    pub margin: f64,
}

/// One CSV cell: numbers use the canonical float format, labels pass through.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Str(&'static str),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Str(s) => (*s).to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub model: String,
    pub status: Status,
    /// Flat name -> number map; insertion order is emission order.
    pub metrics: Vec<(String, Json)>,
    /// Reproducibility block: grids, seeds and sample counts actually used.
    pub grids_and_seeds: Vec<(String, Json)>,
    pub violations: Vec<Violation>,
    /// CSV companion: fixed header plus one row per grid point or statistic.
    pub csv_header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<Cell>>,
}

impl SuiteReport {
    pub fn new(suite: &str, model: &str) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            model: model.to_string(),
            status: Status::Pass,
            metrics: Vec::new(),
            grids_and_seeds: Vec::new(),
            violations: Vec::new(),
            csv_header: Vec::new(),
            csv_rows: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.push((key.to_string(), Json::Float(value)));
    }

    pub fn metric_int(&mut self, key: &str, value: i64) {
        self.metrics.push((key.to_string(), Json::Int(value)));
    }

    pub fn metric_opt(&mut self, key: &str, value: Option<f64>) {
        let json = match value {
            Some(v) => Json::Float(v),
            None => Json::Null,
        };
        self.metrics.push((key.to_string(), json));
    }

    pub fn grid(&mut self, key: &str, value: Json) {
        self.grids_and_seeds.push((key.to_string(), value));
    }

    pub fn flag(&mut self) {
        self.status = self.status.worst(Status::Flagged);
    }

    /// Records a violation and forces the failed status.
    pub fn violation(&mut self, location: impl Into<String>, margin: f64) {
        self.violations.push(Violation {
            location: location.into(),
            margin,
        });
        self.status = Status::Fail;
    }

    pub fn to_json(&self) -> Json {
        // Invariant: a passing report carries no violations.
        assert!(
            self.status != Status::Pass || self.violations.is_empty(),
            "pass status with recorded violations is a suite bug"
        );
        let mut obj = Json::object();
        obj.push("suite", Json::Str(self.suite.clone()));
        obj.push("model", Json::Str(self.model.clone()));
        obj.push("status", Json::Str(self.status.as_str().to_string()));
        let mut metrics = Json::object();
        for (key, value) in &self.metrics {
            metrics.push(key, value.clone());
        }
        obj.push("metrics", metrics);
        let mut grids = Json::object();
        for (key, value) in &self.grids_and_seeds {
            grids.push(key, value.clone());
        }
        obj.push("grids_and_seeds", grids);
        let mut violations = Vec::new();
        for v in &self.violations {
            let mut entry = Json::object();
            entry.push("location", Json::Str(v.location.clone()));
            entry.push("margin", Json::Float(v.margin));
            violations.push(entry);
        }
        obj.push("violations", Json::Array(violations));
        obj
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_canonical_string()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.csv_header.join(","));
        for row in &self.csv_rows {
            debug_assert_eq!(row.len(), self.csv_header.len(), "ragged CSV row");
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Writes through a temporary file in the destination directory and renames,
/// so readers never observe a half-written report.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::input(format!("output path {} has no file name", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp_path = match dir {
        Some(d) => d.join(format!(".{file_name}.tmp")),
        None => PathBuf::from(format!(".{file_name}.tmp")),
    };
    {
        let mut tmp = std::fs::File::create(&tmp_path)?;
        tmp.write_all(content.as_bytes())?;
        tmp.sync_all()?;
    }
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

/// Merges finished reports into one document: overall status is the worst of
/// the inputs, and each input document is embedded verbatim, preserving its
/// canonical bytes.
pub fn merge_reports(inputs: &[(String, String)]) -> Result<(String, Status)> {
    if inputs.is_empty() {
        return Err(CliError::input(
            "report merge needs at least one input file",
        ));
    }
    let mut overall = Status::Pass;
    for (name, text) in inputs {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::input(format!("report {name}: not valid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::input(format!("report {name}: expected a JSON object")))?;
        for key in [
            "suite",
            "model",
            "status",
            "metrics",
            "grids_and_seeds",
            "violations",
        ] {
            if !obj.contains_key(key) {
                return Err(CliError::input(format!(
                    "report {name}: missing required key '{key}'"
                )));
            }
        }
        let status = obj
            .get("status")
            .and_then(|s| s.as_str())
            .and_then(Status::parse)
            .ok_or_else(|| {
                CliError::input(format!("report {name}: status must be pass/fail/flagged"))
            })?;
        overall = overall.worst(status);
    }
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"overall_status\": \"{}\",", overall.as_str());
    out.push_str("  \"reports\": [\n");
    for (i, (_, text)) in inputs.iter().enumerate() {
        for line in text.trim_end().lines() {
            let _ = writeln!(out, "    {line}");
        }
        if i + 1 < inputs.len() {
            // Attach the comma to the closing brace of the embedded document.
            let brace = out.trim_end_matches('\n').len();
            out.truncate(brace);
            out.push_str(",\n");
        }
    }
    out.push_str("  ]\n}\n");
    Ok((out, overall))
}

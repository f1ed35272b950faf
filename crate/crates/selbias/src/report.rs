//! Tabular report emission. Every simulation subcommand funnels through the
//! same flat record schema so downstream plotting scripts can stay generic.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One output row. Optional fields print as empty CSV cells and are omitted
/// from JSON.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Record {
    pub series: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Step index or threshold level, depending on the series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_or_alpha: Option<f64>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

impl Record {
    pub fn new(series: impl Into<String>, value: f64) -> Self {
        Record {
            series: series.into(),
            family: None,
            k: None,
            n: None,
            i_or_alpha: None,
            value,
            std_error: None,
        }
    }

    pub fn family(mut self, family: impl Into<String>) -> Self {
        self.family = Some(family.into());
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn index(mut self, i_or_alpha: f64) -> Self {
        self.i_or_alpha = Some(i_or_alpha);
        self
    }

    pub fn se(mut self, std_error: f64) -> Self {
        self.std_error = Some(std_error);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Run-level metadata attached to JSON output.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunMeta {
    pub command: String,
    pub root_seed: u64,
    pub version: String,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Report {
    pub meta: RunMeta,
    pub records: Vec<Record>,
}

pub const CSV_HEADER: &str = "series,family,k,n,i_or_alpha,value,std_error";

fn num(v: f64) -> String {
    format!("{v:.8e}")
}

impl Report {
    pub fn new(command: impl Into<String>, root_seed: u64, records: Vec<Record>) -> Self {
        Report {
            meta: RunMeta {
                command: command.into(),
                root_seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                elapsed_seconds: 0.0,
            },
            records,
        }
    }

    pub fn with_elapsed(mut self, seconds: f64) -> Self {
        self.meta.elapsed_seconds = seconds;
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.series);
            out.push(',');
            if let Some(f) = &r.family {
                out.push_str(f);
            }
            out.push(',');
            if let Some(k) = r.k {
                out.push_str(&k.to_string());
            }
            out.push(',');
            if let Some(n) = r.n {
                out.push_str(&n.to_string());
            }
            out.push(',');
            if let Some(i) = r.i_or_alpha {
                // step indices print as integers, thresholds keep decimals
                if i.fract() == 0.0 && i.abs() < 1e15 {
                    out.push_str(&format!("{}", i as i64));
                } else {
                    out.push_str(&format!("{i}"));
                }
            }
            out.push(',');
            out.push_str(&num(r.value));
            out.push(',');
            if let Some(se) = r.std_error {
                out.push_str(&num(se));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Write to `out`, or to stdout when no path is given.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<()> {
        let body = self.render(format);
        match out {
            Some(path) => std::fs::write(path, body)?,
            None => {
                let stdout = std::io::stdout();
                stdout.lock().write_all(body.as_bytes())?;
            }
        }
        Ok(())
    }
}

//! Real score matrices: CSV parsing, winner's-curse audit, and a debiased
//! winner mean based on the Gaussian premium constant of the estimated
//! score covariance.

use std::path::Path;

use crate::error::{Error, Result};
use crate::premium::g_gaussian_mc;
use crate::rng::SeedSpec;

/// Per-observation scores for K models: `rows` observations by `cols` models,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl ScoreMatrix {
    pub fn new(names: Vec<String>, data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidConfig(
                "score matrices need at least one row and one column".into(),
            ));
        }
        if names.len() != cols {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {cols} columns",
                names.len()
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("scores must be finite".into()));
        }
        Ok(ScoreMatrix {
            names,
            data,
            rows,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Parse comma-separated scores. A first line with any non-numeric cell
    /// is taken as a header of model names; otherwise columns are named
    /// `model_1..model_K`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (first_no, first) = lines
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty score file".into()))?;
        let first_cells: Vec<&str> = first.split(',').map(str::trim).collect();
        let has_header = first_cells
            .iter()
            .any(|c| c.parse::<f64>().is_err());
        let cols = first_cells.len();
        let names: Vec<String> = if has_header {
            first_cells.iter().map(|c| c.to_string()).collect()
        } else {
            (1..=cols).map(|k| format!("model_{k}")).collect()
        };

        let mut data = Vec::new();
        let mut rows = 0usize;
        let parse_row = |line_no: usize, line: &str, data: &mut Vec<f64>| -> Result<()> {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != cols {
                return Err(Error::Parse {
                    row: line_no,
                    col: cells.len(),
                    message: format!("expected {cols} columns, found {}", cells.len()),
                });
            }
            for (j, cell) in cells.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: line_no,
                    col: j + 1,
                    message: format!("'{cell}' is not a number"),
                })?;
                data.push(v);
            }
            Ok(())
        };
        if !has_header {
            parse_row(first_no, first, &mut data)?;
            rows += 1;
        }
        for (line_no, line) in lines {
            parse_row(line_no, line, &mut data)?;
            rows += 1;
        }
        ScoreMatrix::new(names, data, rows, cols)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    /// CSV with a name header; values use shortest round-trip formatting, so
    /// save followed by load reproduces the matrix exactly.
    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Winner's-curse audit of a score matrix.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditReport {
    pub names: Vec<String>,
    pub observations: usize,
    pub model_count: usize,
    pub means: Vec<f64>,
    /// Index of the highest sample mean (lowest index on ties).
    pub winner: usize,
    pub winner_mean: f64,
    /// Sample covariance of the score rows, row-major.
    pub sigma_hat: Vec<f64>,
    /// Gaussian premium constant of `sigma_hat`, clipped at zero.
    pub premium_constant: f64,
    pub premium_constant_se: f64,
    /// Estimated optimism of the winner's mean: premium_constant / sqrt(n).
    pub optimism: f64,
    pub debiased_winner_mean: f64,
    /// Times the running leader changed over the observation prefix.
    pub leader_changes: usize,
}

/// Audit per-observation scores for selection optimism. The premium constant
/// is estimated by Monte Carlo from the fitted Gaussian score model.
pub fn audit(scores: &ScoreMatrix, mc_replicas: usize, seed: u64) -> Result<AuditReport> {
    let n = scores.rows();
    let k = scores.cols();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "auditing needs at least 2 observations to estimate a covariance".into(),
        ));
    }
    if mc_replicas < 100 {
        return Err(Error::InvalidConfig(
            "the premium constant needs at least 100 Monte Carlo replicas".into(),
        ));
    }

    let mut means = vec![0.0_f64; k];
    for i in 0..n {
        for (m, &v) in means.iter_mut().zip(scores.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut winner = 0usize;
    for (j, &m) in means.iter().enumerate() {
        if m > means[winner] {
            winner = j;
        }
    }

    let mut sigma_hat = vec![0.0_f64; k * k];
    for i in 0..n {
        let row = scores.row(i);
        for a in 0..k {
            let da = row[a] - means[a];
            for b in a..k {
                sigma_hat[a * k + b] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = sigma_hat[a * k + b] / (n as f64 - 1.0);
            sigma_hat[a * k + b] = v;
            sigma_hat[b * k + a] = v;
        }
    }

    let constant = g_gaussian_mc(&sigma_hat, k, mc_replicas, SeedSpec::new(seed))?;
    let premium_constant = constant.value.max(0.0);
    let optimism = premium_constant / (n as f64).sqrt();

    let mut leader_changes = 0usize;
    let mut prefix = vec![0.0_f64; k];
    let mut leader = None::<usize>;
    for i in 0..n {
        for (p, &v) in prefix.iter_mut().zip(scores.row(i)) {
            *p += v;
        }
        let mut best = 0usize;
        for (j, &p) in prefix.iter().enumerate() {
            if p > prefix[best] {
                best = j;
            }
        }
        if let Some(prev) = leader {
            if prev != best {
                leader_changes += 1;
            }
        }
        leader = Some(best);
    }

    Ok(AuditReport {
        names: scores.names().to_vec(),
        observations: n,
        model_count: k,
        winner_mean: means[winner],
        means,
        winner,
        sigma_hat,
        premium_constant,
        premium_constant_se: constant.std_error,
        optimism,
        debiased_winner_mean: 0.0,
        leader_changes,
    })
    .map(|mut r| {
        r.debiased_winner_mean = r.winner_mean - r.optimism;
        r
    })
}

//! Run records, result tables and design drawings.

mod svg;

use serde::{Deserialize, Serialize};

use crate::benders::PartialConfig;
use crate::formulation::{CoverageStats, DesignSolution};
use crate::mip::{MipLimits, SolveStats};

pub use svg::render_design;

pub const RUN_RECORD_VERSION: u32 = 1;
pub const SOLUTION_FILE_VERSION: u32 = 1;

/// CSV header of [`RunRecord`] rows.
pub const CSV_COLUMNS: [&str; 14] = [
    "instance",
    "method",
    "percentage",
    "type",
    "t",
    "gap",
    "n_cuts",
    "obj_v",
    "demand_R",
    "demand_S",
    "demand_RS",
    "pairs_R",
    "pairs_S",
    "pairs_RS",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Benders,
    Sequential,
    Oracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Benders => "benders",
            Method::Sequential => "sequential",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutCounts {
    pub lazy: usize,
    pub user: usize,
}

/// One solve, as written by `solve`, `sequential` and `oracle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub schema_version: u32,
    pub instance: String,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<PartialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub limits: MipLimits,
    pub stats: SolveStats,
    /// Benders cuts by where they were separated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benders_cuts: Option<CutCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageStats>,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<RunRecord, RecordError> {
        let r: RunRecord = serde_json::from_str(text)?;
        if r.schema_version != RUN_RECORD_VERSION {
            return Err(RecordError::Version {
                found: r.schema_version,
                expected: RUN_RECORD_VERSION,
            });
        }
        Ok(r)
    }

    /// Cell values in [`CSV_COLUMNS`] order.
    pub fn cells(&self) -> Vec<String> {
        let dash = || "-".to_string();
        let (pct, ty) = match &self.partial {
            Some(p) => (num(p.percentage), p.selection.code().to_string()),
            None => (dash(), dash()),
        };
        let gap = match (self.stats.obj_v, self.stats.gap) {
            (Some(_), Some(g)) if g.is_finite() => format!("{g:.2}"),
            (Some(_), Some(_)) => "inf".into(),
            _ => dash(),
        };
        let mut cells = vec![
            self.instance.clone(),
            self.method.label().to_string(),
            pct,
            ty,
            format!("{:.2}", self.stats.t),
            gap,
            self.stats.n_cuts.to_string(),
            self.stats.obj_v.map_or_else(dash, num),
        ];
        match &self.coverage {
            Some(c) => cells.extend([
                num(c.demand_r),
                num(c.demand_s),
                num(c.demand_rs),
                c.pairs_r.to_string(),
                c.pairs_s.to_string(),
                c.pairs_rs.to_string(),
            ]),
            None => cells.extend(std::iter::repeat_n(dash(), 6)),
        }
        cells
    }
}

/// Integers without decimals, everything else with two.
fn num(v: f64) -> String {
    let v = v + 0.0;
    if (v - v.round()).abs() < 1e-9 && v.abs() < 1e15 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let cells: Vec<String> = r.cells().iter().map(|c| csv_escape(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Space-aligned table with the CSV's header and values.
pub fn to_table(records: &[RunRecord]) -> String {
    let rows: Vec<Vec<String>> = std::iter::once(CSV_COLUMNS.iter().map(|s| s.to_string()).collect())
        .chain(records.iter().map(|r| r.cells()))
        .collect();
    let widths: Vec<usize> = (0..CSV_COLUMNS.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                // Text columns left, numbers right.
                if c < 2 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

/// Design, routes and stats as written by `solve --solution` and `oracle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: u32,
    pub instance: String,
    /// Path of the instance file, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_path: Option<String>,
    pub method: Method,
    pub solution: DesignSolution,
}

impl SolutionFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solutions serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<SolutionFile, RecordError> {
        let s: SolutionFile = serde_json::from_str(text)?;
        if s.schema_version != SOLUTION_FILE_VERSION {
            return Err(RecordError::Version {
                found: s.schema_version,
                expected: SOLUTION_FILE_VERSION,
            });
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests;

//! Solver-neutral sparse MILP and its free-format MPS interchange.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lp::{LinearRow, LpProblem, Sense};

/// Branching priority class; lower values branch first on ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarClass {
    RapidEdge = 0,
    SlowEdge = 1,
    RapidStop = 2,
    SlowStop = 3,
    RapidNonStop = 4,
    Coverage = 5,
    Walk = 6,
    Dwell = 7,
    Flow = 8,
    Other = 9,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub obj: f64,
    pub class: VarClass,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<LinearRow>,
    /// One tag per row: constraint family followed by the instance ids,
    /// e.g. `design_1[e=3,i=2]`.
    pub tags: Vec<String>,
    pub maximize: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum MpsError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl MilpModel {
    pub fn new(name: impl Into<String>, maximize: bool) -> Self {
        MilpModel {
            name: name.into(),
            maximize,
            ..Default::default()
        }
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_binary(&mut self, name: String, obj: f64, class: VarClass) -> usize {
        self.add_column(Column {
            name,
            lower: 0.0,
            upper: 1.0,
            integer: true,
            obj,
            class,
        })
    }

    pub fn add_column(&mut self, col: Column) -> usize {
        self.columns.push(col);
        self.columns.len() - 1
    }

    /// Adds a row after merging duplicate columns and dropping zeros. A row
    /// left without coefficients is dropped when trivially satisfied and kept
    /// otherwise (it then makes the model infeasible). Returns the row index
    /// when the row was kept.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, tag: String) -> Option<usize> {
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.last_mut() {
                Some(e) if e.0 == j => e.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        if merged.is_empty() {
            let ok = match sense {
                Sense::Le => 0.0 <= rhs + 1e-9,
                Sense::Ge => 0.0 >= rhs - 1e-9,
                Sense::Eq => rhs.abs() <= 1e-9,
            };
            if ok {
                return None;
            }
        }
        self.rows.push(LinearRow::new(merged, sense, rhs));
        self.tags.push(tag);
        Some(self.rows.len() - 1)
    }

    /// The tag family of row `i` (text before the first `[`).
    pub fn family(&self, i: usize) -> &str {
        let t = &self.tags[i];
        t.split('[').next().unwrap_or(t)
    }

    pub fn count_family(&self, family: &str) -> usize {
        (0..self.rows.len()).filter(|&i| self.family(i) == family).count()
    }

    pub fn objective_integral(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.obj == 0.0 || (c.integer && c.obj.fract() == 0.0))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.obj * v).sum::<f64>() + 0.0
    }

    /// Largest row, bound or integrality violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.columns.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
            if c.integer {
                worst = worst.max((v - v.round()).abs());
            }
        }
        for r in &self.rows {
            worst = worst.max(r.violation(x));
        }
        worst
    }

    /// The continuous relaxation.
    pub fn to_lp(&self) -> LpProblem {
        LpProblem {
            obj: self.columns.iter().map(|c| c.obj).collect(),
            col_lower: self.columns.iter().map(|c| c.lower).collect(),
            col_upper: self.columns.iter().map(|c| c.upper).collect(),
            rows: self.rows.clone(),
            maximize: self.maximize,
        }
    }

    /// Free-format MPS. Row tags are written as comment lines in the ROWS
    /// section; integer columns are bracketed by INTORG/INTEND markers and
    /// every bound is written explicitly.
    pub fn to_mps(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME {}", if self.name.is_empty() { "model" } else { &self.name });
        let _ = writeln!(out, "OBJSENSE");
        let _ = writeln!(out, "    {}", if self.maximize { "MAX" } else { "MIN" });
        let _ = writeln!(out, "ROWS");
        let _ = writeln!(out, " N obj");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(out, "* R{i} {}", self.tags[i]);
            let s = match r.sense {
                Sense::Le => "L",
                Sense::Ge => "G",
                Sense::Eq => "E",
            };
            let _ = writeln!(out, " {s} R{i}");
        }
        let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.columns.len()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                by_col[j].push((i, a));
            }
        }
        let _ = writeln!(out, "COLUMNS");
        let mut in_int = false;
        let mut marker = 0;
        for (j, c) in self.columns.iter().enumerate() {
            if c.integer != in_int {
                let kind = if c.integer { "INTORG" } else { "INTEND" };
                let _ = writeln!(out, "    M{marker} 'MARKER' '{kind}'");
                marker += 1;
                in_int = c.integer;
            }
            let _ = writeln!(out, "    {} obj {}", c.name, fmt_num(c.obj));
            for &(i, a) in &by_col[j] {
                let _ = writeln!(out, "    {} R{i} {}", c.name, fmt_num(a));
            }
        }
        if in_int {
            let _ = writeln!(out, "    M{marker} 'MARKER' 'INTEND'");
        }
        let _ = writeln!(out, "RHS");
        for (i, r) in self.rows.iter().enumerate() {
            if r.rhs != 0.0 {
                let _ = writeln!(out, "    RHS R{i} {}", fmt_num(r.rhs));
            }
        }
        let _ = writeln!(out, "BOUNDS");
        for c in &self.columns {
            let (l, u) = (c.lower, c.upper);
            if l == u {
                let _ = writeln!(out, " FX BND {} {}", c.name, fmt_num(l));
                continue;
            }
            if !l.is_finite() && !u.is_finite() {
                let _ = writeln!(out, " FR BND {}", c.name);
                continue;
            }
            if l.is_finite() {
                let _ = writeln!(out, " LO BND {} {}", c.name, fmt_num(l));
            } else {
                let _ = writeln!(out, " MI BND {}", c.name);
            }
            if u.is_finite() {
                let _ = writeln!(out, " UP BND {} {}", c.name, fmt_num(u));
            } else {
                let _ = writeln!(out, " PL BND {}", c.name);
            }
        }
        let _ = writeln!(out, "ENDATA");
        out
    }

    /// Parses free-format MPS. Comment lines of the form `* <row> <tag>`
    /// restore row tags; other rows get their MPS name as tag. Branching
    /// classes are not part of MPS and come back as [`VarClass::Other`].
    pub fn from_mps(text: &str) -> Result<MilpModel, MpsError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            ObjSense,
            Rows,
            Columns,
            Rhs,
            Ranges,
            Bounds,
        }
        let err = |line: usize, msg: &str| MpsError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let mut model = MilpModel::default();
        let mut section = Section::None;
        let mut obj_name: Option<String> = None;
        let mut row_index: HashMap<String, usize> = HashMap::new();
        let mut col_index: HashMap<String, usize> = HashMap::new();
        let mut pending_tags: HashMap<String, String> = HashMap::new();
        let mut in_int = false;
        let mut explicit_bounds: Vec<bool> = Vec::new();

        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('*') {
                let mut it = rest.split_whitespace();
                if let (Some(row), Some(tag)) = (it.next(), it.next()) {
                    pending_tags.insert(row.to_string(), tag.to_string());
                }
                continue;
            }
            let header = !line.starts_with(' ') && !line.starts_with('\t');
            let toks: Vec<&str> = line.split_whitespace().collect();
            if header {
                match toks[0] {
                    "NAME" => {
                        model.name = toks.get(1).map(|s| s.to_string()).unwrap_or_default();
                        section = Section::None;
                    }
                    "OBJSENSE" => {
                        if let Some(s) = toks.get(1) {
                            model.maximize = s.eq_ignore_ascii_case("MAX") || s.eq_ignore_ascii_case("MAXIMIZE");
                            section = Section::None;
                        } else {
                            section = Section::ObjSense;
                        }
                    }
                    "ROWS" => section = Section::Rows,
                    "COLUMNS" => section = Section::Columns,
                    "RHS" => section = Section::Rhs,
                    "RANGES" => section = Section::Ranges,
                    "BOUNDS" => section = Section::Bounds,
                    "ENDATA" => break,
                    other => return Err(err(ln, &format!("unknown section {other}"))),
                }
                continue;
            }
            match section {
                Section::ObjSense => {
                    model.maximize = toks[0].eq_ignore_ascii_case("MAX") || toks[0].eq_ignore_ascii_case("MAXIMIZE");
                }
                Section::Rows => {
                    if toks.len() < 2 {
                        return Err(err(ln, "row entry needs a type and a name"));
                    }
                    let name = toks[1].to_string();
                    let sense = match toks[0] {
                        "N" => {
                            if obj_name.is_none() {
                                obj_name = Some(name);
                            }
                            continue;
                        }
                        "L" => Sense::Le,
                        "G" => Sense::Ge,
                        "E" => Sense::Eq,
                        t => return Err(err(ln, &format!("unknown row type {t}"))),
                    };
                    let tag = pending_tags.remove(&name).unwrap_or_else(|| name.clone());
                    row_index.insert(name, model.rows.len());
                    model.rows.push(LinearRow::new(Vec::new(), sense, 0.0));
                    model.tags.push(tag);
                }
                Section::Columns => {
                    if toks.len() >= 3 && toks[1].trim_matches('\'') == "MARKER" {
                        match toks[2].trim_matches('\'') {
                            "INTORG" => in_int = true,
                            "INTEND" => in_int = false,
                            m => return Err(err(ln, &format!("unknown marker {m}"))),
                        }
                        continue;
                    }
                    if toks.len() < 3 || toks.len().is_multiple_of(2) {
                        return Err(err(ln, "column entry needs name and (row, value) pairs"));
                    }
                    let j = match col_index.get(toks[0]) {
                        Some(&j) => j,
                        None => {
                            let j = model.columns.len();
                            col_index.insert(toks[0].to_string(), j);
                            model.columns.push(Column {
                                name: toks[0].to_string(),
                                lower: 0.0,
                                upper: if in_int { 1.0 } else { f64::INFINITY },
                                integer: in_int,
                                obj: 0.0,
                                class: VarClass::Other,
                            });
                            explicit_bounds.push(false);
                            j
                        }
                    };
                    for pair in toks[1..].chunks(2) {
                        let v: f64 = pair[1].parse().map_err(|_| err(ln, "bad number"))?;
                        if Some(pair[0]) == obj_name.as_deref() {
                            model.columns[j].obj += v;
                        } else {
                            let &i = row_index
                                .get(pair[0])
                                .ok_or_else(|| err(ln, &format!("unknown row {}", pair[0])))?;
                            model.rows[i].coeffs.push((j, v));
                        }
                    }
                }
                Section::Rhs => {
                    if toks.len() < 3 {
                        return Err(err(ln, "rhs entry needs set, row and value"));
                    }
                    for pair in toks[1..].chunks(2) {
                        if pair.len() < 2 {
                            return Err(err(ln, "dangling rhs token"));
                        }
                        let v: f64 = pair[1].parse().map_err(|_| err(ln, "bad number"))?;
                        if Some(pair[0]) == obj_name.as_deref() {
                            continue;
                        }
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, &format!("unknown row {}", pair[0])))?;
                        model.rows[i].rhs = v;
                    }
                }
                Section::Ranges => return Err(err(ln, "RANGES are not supported")),
                Section::Bounds => {
                    if toks.len() < 3 {
                        return Err(err(ln, "bound entry needs type, set and column"));
                    }
                    let &j = col_index
                        .get(toks[2])
                        .ok_or_else(|| err(ln, &format!("unknown column {}", toks[2])))?;
                    let val = || -> Result<f64, MpsError> {
                        toks.get(3)
                            .ok_or_else(|| err(ln, "bound value missing"))?
                            .parse()
                            .map_err(|_| err(ln, "bad number"))
                    };
                    if !explicit_bounds[j] && model.columns[j].integer {
                        model.columns[j].upper = f64::INFINITY;
                    }
                    explicit_bounds[j] = true;
                    let c = &mut model.columns[j];
                    match toks[0] {
                        "UP" => c.upper = val()?,
                        "LO" => c.lower = val()?,
                        "FX" => {
                            let v = val()?;
                            c.lower = v;
                            c.upper = v;
                        }
                        "FR" => {
                            c.lower = f64::NEG_INFINITY;
                            c.upper = f64::INFINITY;
                        }
                        "MI" => c.lower = f64::NEG_INFINITY,
                        "PL" => c.upper = f64::INFINITY,
                        "BV" => {
                            c.lower = 0.0;
                            c.upper = 1.0;
                            c.integer = true;
                        }
                        "LI" => {
                            c.lower = val()?;
                            c.integer = true;
                        }
                        "UI" => {
                            c.upper = val()?;
                            c.integer = true;
                        }
                        t => return Err(err(ln, &format!("unknown bound type {t}"))),
                    }
                }
                Section::None => return Err(err(ln, "data line outside of a section")),
            }
        }
        Ok(model)
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel {
        let mut m = MilpModel::new("knap", true);
        let a = m.add_binary("a".into(), 3.0, VarClass::Other);
        let b = m.add_binary("b".into(), 2.0, VarClass::Other);
        let c = m.add_column(Column {
            name: "c".into(),
            lower: f64::NEG_INFINITY,
            upper: 2.5,
            integer: false,
            obj: -0.125,
            class: VarClass::Other,
        });
        m.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0, "cap[k=0]".into());
        m.add_row(vec![(c, 1.0), (a, -1.5)], Sense::Ge, -4.0, "link".into());
        m.add_row(vec![(b, 1.0), (c, 0.1)], Sense::Eq, 0.25, "eq[i=1,j=2]".into());
        m
    }

    #[test]
    fn mps_round_trip() {
        let m = sample();
        let text = m.to_mps();
        let back = MilpModel::from_mps(&text).unwrap();
        assert_eq!(back.name, m.name);
        assert_eq!(back.maximize, m.maximize);
        assert_eq!(back.tags, m.tags);
        assert_eq!(back.rows, m.rows);
        for (x, y) in back.columns.iter().zip(&m.columns) {
            assert_eq!((x.lower, x.upper, x.integer, x.obj), (y.lower, y.upper, y.integer, y.obj));
        }
    }

    #[test]
    fn empty_rows() {
        let mut m = MilpModel::new("e", false);
        assert!(m.add_row(vec![], Sense::Le, 1.0, "ok".into()).is_none());
        assert!(m.add_row(vec![(0, 0.0)], Sense::Ge, 1.0, "bad".into()).is_some());
    }

    #[test]
    fn duplicate_coefficients_merge() {
        let mut m = MilpModel::new("d", false);
        m.add_binary("x".into(), 0.0, VarClass::Other);
        m.add_row(vec![(0, 1.0), (0, 1.0)], Sense::Le, 1.0, "r".into());
        assert_eq!(m.rows[0].coeffs, vec![(0, 2.0)]);
    }
}

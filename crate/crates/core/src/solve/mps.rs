//! Free-format MPS export and a reader for round-trip checks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{MilpModel, Relation};

/// Longest row or column name written by [`export_mps`].
pub const DEFAULT_NAME_LEN: usize = 255;

const OBJECTIVE_ROW: &str = "obj";

/// Model index to MPS name mapping produced by an export.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsNames {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    column_index: HashMap<String, usize>,
}

impl MpsNames {
    /// Assigns unique names no longer than `max_len`. Names that fit and are
    /// still free are kept; others are cut and given a `~N` suffix.
    pub fn new(model: &MilpModel, max_len: usize) -> Result<Self> {
        if max_len < 4 {
            return Err(Error::Parameter(format!("MPS name length {max_len} is below 4")));
        }
        let mut taken = HashSet::from([OBJECTIVE_ROW.to_string()]);
        let rows = model
            .constraints()
            .iter()
            .map(|c| unique_name(&c.name, max_len, &mut taken))
            .collect();
        let mut taken = HashSet::new();
        let columns: Vec<String> = model
            .variables()
            .iter()
            .map(|v| unique_name(&v.name, max_len, &mut taken))
            .collect();
        let column_index = columns.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self {
            rows,
            columns,
            column_index,
        })
    }

    /// Model variable index of an MPS column name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.column_index.get(name).copied()
    }
}

fn unique_name(name: &str, max_len: usize, taken: &mut HashSet<String>) -> String {
    let clean: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if clean.len() <= max_len && !clean.contains('~') && taken.insert(clean.clone()) {
        return clean;
    }
    for n in 1usize.. {
        let suffix = format!("~{n}");
        let mut cut = max_len.saturating_sub(suffix.len()).min(clean.len());
        while !clean.is_char_boundary(cut) {
            cut -= 1;
        }
        let candidate = format!("{}{suffix}", &clean[..cut]);
        if taken.insert(candidate.clone()) {
            return candidate;
        }
    }
    unreachable!()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

impl RowKind {
    fn code(self) -> &'static str {
        match self {
            RowKind::Le => "L",
            RowKind::Ge => "G",
            RowKind::Eq => "E",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsColumn {
    pub name: String,
    pub integer: bool,
    pub lower: f64,
    pub upper: f64,
}

/// Everything an MPS file states about a problem, keyed by name.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsMatrix {
    pub name: String,
    pub rows: Vec<(String, RowKind)>,
    pub columns: Vec<MpsColumn>,
    /// `(column, row)` to coefficient; the objective row is `"obj"`.
    pub entries: BTreeMap<(String, String), f64>,
    pub rhs: BTreeMap<String, f64>,
    pub ranges: BTreeMap<String, f64>,
}

impl MpsMatrix {
    pub fn from_model(model: &MilpModel, names: &MpsNames) -> Self {
        let rows = model
            .constraints()
            .iter()
            .zip(&names.rows)
            .map(|(c, name)| {
                let kind = match c.relation {
                    Relation::Le => RowKind::Le,
                    Relation::Ge => RowKind::Ge,
                    Relation::Eq => RowKind::Eq,
                };
                (name.clone(), kind)
            })
            .collect();
        let columns = model
            .variables()
            .iter()
            .zip(&names.columns)
            .map(|(v, name)| {
                let (lower, upper) = v.domain.bounds();
                MpsColumn {
                    name: name.clone(),
                    integer: v.domain.is_integer(),
                    lower,
                    upper,
                }
            })
            .collect();
        let mut entries = BTreeMap::new();
        for &(v, coef) in model.objective() {
            *entries
                .entry((names.columns[v.0].clone(), OBJECTIVE_ROW.to_string()))
                .or_insert(0.0) += coef;
        }
        let mut rhs = BTreeMap::new();
        for (c, row) in model.constraints().iter().zip(&names.rows) {
            for &(v, coef) in &c.terms {
                *entries.entry((names.columns[v.0].clone(), row.clone())).or_insert(0.0) += coef;
            }
            if c.rhs != 0.0 {
                rhs.insert(row.clone(), c.rhs);
            }
        }
        entries.retain(|_, v| *v != 0.0);
        Self {
            name: "IABPLAN".to_string(),
            rows,
            columns,
            entries,
            rhs,
            ranges: BTreeMap::new(),
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME {}", self.name);
        let _ = writeln!(out, "ROWS");
        let _ = writeln!(out, " N  {OBJECTIVE_ROW}");
        for (name, kind) in &self.rows {
            let _ = writeln!(out, " {}  {name}", kind.code());
        }
        let mut by_column: HashMap<&str, Vec<(&str, f64)>> = HashMap::new();
        for ((col, row), &v) in &self.entries {
            by_column.entry(col).or_default().push((row, v));
        }
        let _ = writeln!(out, "COLUMNS");
        let mut in_int = false;
        let mut markers = 0;
        for col in &self.columns {
            if col.integer != in_int {
                let tag = if col.integer { "INTORG" } else { "INTEND" };
                let _ = writeln!(out, "    MARKER{markers} 'MARKER' '{tag}'");
                markers += 1;
                in_int = col.integer;
            }
            match by_column.get(col.name.as_str()) {
                Some(entries) => {
                    for (row, v) in entries {
                        let _ = writeln!(out, "    {} {row} {v}", col.name);
                    }
                }
                None => {
                    let _ = writeln!(out, "    {} {OBJECTIVE_ROW} 0", col.name);
                }
            }
        }
        if in_int {
            let _ = writeln!(out, "    MARKER{markers} 'MARKER' 'INTEND'");
        }
        let _ = writeln!(out, "RHS");
        for (row, v) in &self.rhs {
            let _ = writeln!(out, "    RHS {row} {v}");
        }
        let _ = writeln!(out, "RANGES");
        for (row, v) in &self.ranges {
            let _ = writeln!(out, "    RNG {row} {v}");
        }
        let _ = writeln!(out, "BOUNDS");
        for col in &self.columns {
            let name = &col.name;
            match (col.lower, col.upper) {
                (lo, hi) if lo == hi => {
                    let _ = writeln!(out, " FX BND {name} {lo}");
                }
                (lo, hi) => {
                    if lo == f64::NEG_INFINITY {
                        let _ = writeln!(out, " MI BND {name}");
                    } else if lo != 0.0 {
                        let _ = writeln!(out, " LO BND {name} {lo}");
                    }
                    if hi.is_finite() {
                        let _ = writeln!(out, " UP BND {name} {hi}");
                    }
                }
            }
        }
        let _ = writeln!(out, "ENDATA");
        out
    }
}

/// Writes `model` in free MPS format and returns the names used.
pub fn write_mps(model: &MilpModel, out: &mut impl Write, max_name_len: usize) -> Result<MpsNames> {
    let names = MpsNames::new(model, max_name_len)?;
    let text = MpsMatrix::from_model(model, &names).render();
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Io {
            path: "<mps stream>".into(),
            source: e,
        })?;
    Ok(names)
}

/// Writes `model` to `path` in free MPS format.
pub fn export_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<MpsNames> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    let names = write_mps(model, &mut buf, DEFAULT_NAME_LEN)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    Ok(names)
}

fn number(field: &str, line_no: usize, tok: &str) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::parse(format!("{field} line {line_no}"), format!("bad number {tok:?}")))
}

/// Reads a free MPS file. Only the subset written by [`write_mps`] plus the
/// common bound types are understood.
pub fn parse_mps(text: &str) -> Result<MpsMatrix> {
    let mut m = MpsMatrix {
        name: String::new(),
        rows: Vec::new(),
        columns: Vec::new(),
        entries: BTreeMap::new(),
        rhs: BTreeMap::new(),
        ranges: BTreeMap::new(),
    };
    let mut objective: Option<String> = None;
    let mut row_names = HashSet::new();
    let mut col_pos: HashMap<String, usize> = HashMap::new();
    let mut section = "";
    let mut in_int = false;
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = toks[0];
            match section {
                "NAME" => m.name = toks.get(1).copied().unwrap_or_default().to_string(),
                "ROWS" | "COLUMNS" | "RHS" | "RANGES" | "BOUNDS" => {}
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(Error::parse(format!("line {line_no}"), format!("unknown section {other}"))),
            }
            continue;
        }
        let bad = |msg: &str| Error::parse(format!("{section} line {line_no}"), msg.to_string());
        match section {
            "ROWS" => {
                let [kind, name] = toks[..] else { return Err(bad("expected type and name")) };
                let kind = match kind {
                    "N" => {
                        if objective.is_none() {
                            objective = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    "E" => RowKind::Eq,
                    _ => return Err(bad("unknown row type")),
                };
                if !row_names.insert(name.to_string()) {
                    return Err(bad("duplicate row"));
                }
                m.rows.push((name.to_string(), kind));
            }
            "COLUMNS" => {
                if toks.get(1) == Some(&"'MARKER'") {
                    match toks.get(2).copied() {
                        Some("'INTORG'") => in_int = true,
                        Some("'INTEND'") => in_int = false,
                        _ => return Err(bad("unknown marker")),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("expected column and one or two row/value pairs"));
                }
                let col = toks[0].to_string();
                let pos = *col_pos.entry(col.clone()).or_insert_with(|| {
                    m.columns.push(MpsColumn {
                        name: col.clone(),
                        integer: in_int,
                        lower: 0.0,
                        upper: f64::INFINITY,
                    });
                    m.columns.len() - 1
                });
                if pos + 1 != m.columns.len() {
                    return Err(bad("column entries are not contiguous"));
                }
                for pair in toks[1..].chunks(2) {
                    let row = if Some(pair[0]) == objective.as_deref() {
                        OBJECTIVE_ROW
                    } else if row_names.contains(pair[0]) {
                        pair[0]
                    } else {
                        return Err(bad("unknown row"));
                    };
                    let v = number("COLUMNS", line_no, pair[1])?;
                    if v != 0.0 {
                        m.entries.insert((col.clone(), row.to_string()), v);
                    }
                }
            }
            "RHS" | "RANGES" => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("expected set name and one or two row/value pairs"));
                }
                for pair in toks[1..].chunks(2) {
                    if !row_names.contains(pair[0]) {
                        return Err(bad("unknown row"));
                    }
                    let v = number(section, line_no, pair[1])?;
                    let target = if section == "RHS" { &mut m.rhs } else { &mut m.ranges };
                    target.insert(pair[0].to_string(), v);
                }
            }
            "BOUNDS" => {
                if toks.len() < 3 {
                    return Err(bad("expected type, set and column"));
                }
                let Some(&pos) = col_pos.get(toks[2]) else { return Err(bad("unknown column")) };
                let value = || -> Result<f64> {
                    let tok = toks.get(3).ok_or_else(|| bad("missing bound value"))?;
                    number("BOUNDS", line_no, tok)
                };
                let col = &mut m.columns[pos];
                match toks[0] {
                    "UP" => col.upper = value()?,
                    "LO" => col.lower = value()?,
                    "FX" => {
                        let v = value()?;
                        col.lower = v;
                        col.upper = v;
                    }
                    "MI" => col.lower = f64::NEG_INFINITY,
                    "PL" => col.upper = f64::INFINITY,
                    "FR" => {
                        col.lower = f64::NEG_INFINITY;
                        col.upper = f64::INFINITY;
                    }
                    "BV" => {
                        col.integer = true;
                        col.lower = 0.0;
                        col.upper = 1.0;
                    }
                    _ => return Err(bad("unknown bound type")),
                }
            }
            _ => return Err(bad("data outside a section")),
        }
    }
    if !ended {
        return Err(Error::parse("ENDATA", "missing"));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelParams};
    use crate::scenario::{CandidateEdge, Gnb, Position, ScenarioGraph};

    fn pair_graph() -> ScenarioGraph {
        let nodes = (0..3)
            .map(|i| {
                let mut g = Gnb::new(i, Position::new(i as f64 * 30.0, 0.0, 10.0));
                g.demand_mbps = Some(120.0);
                g
            })
            .collect();
        let edges = [(0, 1), (1, 0), (1, 2), (2, 1)]
            .into_iter()
            .map(|(src, dst)| CandidateEdge {
                src,
                dst,
                snr_db: 25.0,
                capacity_mbps: 520.875,
            })
            .collect();
        ScenarioGraph::new(1000.0, 1.0, nodes, edges).unwrap()
    }

    #[test]
    fn single_node_has_only_u_columns() {
        let nodes = vec![Gnb::new(0, Position::new(0.0, 0.0, 10.0))];
        let g = ScenarioGraph::new(1000.0, 1.0, nodes, vec![]).unwrap();
        let m = build_model(&g, &ModelParams::new(2, 4, 1).with_flow(false)).unwrap();
        let mut buf = Vec::new();
        write_mps(&m, &mut buf, DEFAULT_NAME_LEN).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches(" N  ").count(), 1);
        let parsed = parse_mps(&text).unwrap();
        assert!(parsed.columns.iter().all(|c| c.name.starts_with("u[")));
        assert_eq!(parsed.columns.len(), 3);
    }

    #[test]
    fn round_trip_reproduces_the_matrix() {
        let m = build_model(&pair_graph(), &ModelParams::new(2, 3, 2)).unwrap();
        let names = MpsNames::new(&m, DEFAULT_NAME_LEN).unwrap();
        let expected = MpsMatrix::from_model(&m, &names);
        let parsed = parse_mps(&expected.render()).unwrap();
        assert_eq!(parsed, expected);
        assert!(parsed.columns.iter().filter(|c| c.integer).all(|c| c.upper == 1.0));
    }

    #[test]
    fn short_names_stay_unique() {
        let m = build_model(&pair_graph(), &ModelParams::new(2, 3, 2)).unwrap();
        let names = MpsNames::new(&m, 8).unwrap();
        let rows: HashSet<_> = names.rows.iter().collect();
        let cols: HashSet<_> = names.columns.iter().collect();
        assert_eq!(rows.len(), names.rows.len());
        assert_eq!(cols.len(), names.columns.len());
        assert!(names.rows.iter().chain(&names.columns).all(|n| n.len() <= 8));
        assert!(!rows.contains(&OBJECTIVE_ROW.to_string()));
        assert_eq!(names.column(&names.columns[5]), Some(5));
        let text = MpsMatrix::from_model(&m, &names).render();
        assert_eq!(parse_mps(&text).unwrap(), MpsMatrix::from_model(&m, &names));
    }

    #[test]
    fn truncation_suffix() {
        let mut taken = HashSet::new();
        assert_eq!(unique_name("maxlinkflow[1,2]", 8, &mut taken), "maxlin~1");
        assert_eq!(unique_name("maxlinkflow[1,3]", 8, &mut taken), "maxlin~2");
        assert_eq!(unique_name("u[0,0,1]", 8, &mut taken), "u[0,0,1]");
        assert_eq!(unique_name("u[0,0,1]", 8, &mut taken), "u[0,0,~1");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_mps("NAME x\nROWS\n N obj\n Q r1\nENDATA\n").unwrap_err();
        assert!(err.to_string().contains("ROWS line 4"), "{err}");
        assert!(parse_mps("NAME x\nROWS\n").is_err());
    }
}

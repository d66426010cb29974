//! Incomplete rectangular data: ingestion, pattern indexing, positivity checks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::graph::{Pattern, PatternGraph};

/// An n x d numeric matrix with an observed-cell mask. Unobserved cells hold
/// a quiet NaN sentinel and must never be read; every access goes through
/// [`IncompleteDataset::get`], which enforces the mask.
#[derive(Clone)]
pub struct IncompleteDataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    column_names: Vec<String>,
}

impl IncompleteDataset {
    pub fn new(n: usize, d: usize, values: Vec<f64>, mask: Vec<bool>, column_names: Vec<String>) -> Result<Self> {
        if values.len() != n * d || mask.len() != n * d {
            return Err(Error::Config(format!(
                "shape mismatch: n={n}, d={d}, values={}, mask={}",
                values.len(),
                mask.len()
            )));
        }
        if column_names.len() != d {
            return Err(Error::Config(format!(
                "expected {d} column names, got {}",
                column_names.len()
            )));
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if !mask[i] {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::NonFinite(format!("cell (row {}, col {})", i / d, i % d)));
            }
        }
        Ok(IncompleteDataset {
            n,
            d,
            values,
            mask,
            column_names,
        })
    }

    /// Build from fully observed rows.
    pub fn from_complete_rows(rows: &[Vec<f64>], column_names: Vec<String>) -> Result<Self> {
        let n = rows.len();
        let d = column_names.len();
        let mut values = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: d,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        IncompleteDataset::new(n, d, values, vec![true; n * d], column_names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.d + col]
    }

    /// Observed-cell read; reading a masked cell is a programming error.
    pub fn get(&self, row: usize, col: usize) -> Result<f64> {
        if !self.is_observed(row, col) {
            return Err(Error::MaskedCell { row, col });
        }
        Ok(self.values[row * self.d + col])
    }

    /// The response pattern of a row.
    pub fn row_pattern(&self, row: usize) -> Pattern {
        let bits: Vec<bool> = (0..self.d).map(|j| self.mask[row * self.d + j]).collect();
        Pattern::new(&bits).unwrap()
    }

    /// Observed coordinates of `row` restricted to pattern `p`, in coordinate
    /// order. Errors if `p` requires a cell the row does not observe.
    pub fn row_slice(&self, row: usize, p: &Pattern) -> Result<Vec<f64>> {
        p.ones().map(|j| self.get(row, j)).collect()
    }

    /// Full row; only valid for completely observed rows.
    pub fn full_row(&self, row: usize) -> Result<Vec<f64>> {
        (0..self.d).map(|j| self.get(row, j)).collect()
    }

    pub fn is_complete_row(&self, row: usize) -> bool {
        (0..self.d).all(|j| self.is_observed(row, j))
    }

    /// Rows resampled with replacement (bootstrap).
    pub fn resample(&self, row_ids: &[usize]) -> IncompleteDataset {
        let mut values = Vec::with_capacity(row_ids.len() * self.d);
        let mut mask = Vec::with_capacity(row_ids.len() * self.d);
        for &i in row_ids {
            values.extend_from_slice(&self.values[i * self.d..(i + 1) * self.d]);
            mask.extend_from_slice(&self.mask[i * self.d..(i + 1) * self.d]);
        }
        IncompleteDataset {
            n: row_ids.len(),
            d: self.d,
            values,
            mask,
            column_names: self.column_names.clone(),
        }
    }

    /// Observed minima and maxima per column; columns never observed get
    /// (0, 0). Used as the default tilt bound box.
    pub fn column_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for i in 0..self.n {
            for j in 0..self.d {
                if self.is_observed(i, j) {
                    let v = self.values[i * self.d + j];
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        for j in 0..self.d {
            if !lo[j].is_finite() {
                lo[j] = 0.0;
                hi[j] = 0.0;
            }
        }
        (lo, hi)
    }
}

impl fmt::Debug for IncompleteDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IncompleteDataset(n={}, d={})", self.n, self.d)
    }
}

/// Rows grouped by response pattern.
#[derive(Debug, Clone)]
pub struct PatternIndex {
    groups: BTreeMap<Pattern, Vec<usize>>,
}

impl PatternIndex {
    pub fn groups(&self) -> &BTreeMap<Pattern, Vec<usize>> {
        &self.groups
    }

    pub fn rows(&self, p: &Pattern) -> &[usize] {
        self.groups.get(p).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn count(&self, p: &Pattern) -> usize {
        self.rows(p).len()
    }

    /// Patterns with at least one row, descending pattern order.
    pub fn observed_patterns(&self) -> Vec<Pattern> {
        let mut v: Vec<Pattern> = self.groups.keys().copied().collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }

    pub fn total(&self) -> usize {
        self.groups.values().map(|v| v.len()).sum()
    }
}

/// Assign every row to its response pattern.
pub fn index_patterns(ds: &IncompleteDataset) -> PatternIndex {
    let mut groups: BTreeMap<Pattern, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.n() {
        groups.entry(ds.row_pattern(i)).or_default().push(i);
    }
    PatternIndex { groups }
}

/// Load a comma-separated file: UTF-8, first row column names, numeric cells
/// or the missing token (empty cells always count as missing).
pub fn load_dataset(path: &FsPath, missing_token: &str) -> Result<IncompleteDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, missing_token)
}

pub fn parse_dataset(text: &str, missing_token: &str) -> Result<IncompleteDataset> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => {
                return Err(Error::Parse {
                    line: 0,
                    msg: "empty file: header row required".into(),
                })
            }
        }
    };
    let column_names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let d = column_names.len();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d {
            return Err(Error::RaggedRow {
                row: lineno + 1,
                expected: d,
                got: fields.len(),
            });
        }
        for (j, field) in fields.iter().enumerate() {
            let cell = field.trim();
            if cell.is_empty() || cell == missing_token {
                values.push(f64::NAN);
                mask.push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                    row: lineno + 1,
                    col: j + 1,
                    msg: format!("not a number: {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::BadCell {
                        row: lineno + 1,
                        col: j + 1,
                        msg: "non-finite value".into(),
                    });
                }
                values.push(v);
                mask.push(true);
            }
        }
        n += 1;
    }
    IncompleteDataset::new(n, d, values, mask, column_names)
}

/// Serialize in the same dialect accepted by [`parse_dataset`].
pub fn write_dataset(ds: &IncompleteDataset, missing_token: &str) -> String {
    let mut out = ds.column_names().join(",");
    out.push('\n');
    for i in 0..ds.n() {
        let mut fields = Vec::with_capacity(ds.d());
        for j in 0..ds.d() {
            if ds.is_observed(i, j) {
                // RFC-ish shortest roundtrip formatting.
                fields.push(format!("{:?}", ds.get(i, j).unwrap()));
            } else {
                fields.push(missing_token.to_string());
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &IncompleteDataset, path: &FsPath, missing_token: &str) -> Result<()> {
    std::fs::write(path, write_dataset(ds, missing_token))?;
    Ok(())
}

/// One positivity concern raised by [`positivity_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PositivityFlag {
    /// (a) A graph node with zero sample rows.
    EmptyNode(Pattern),
    /// (b) A pattern whose parents hold fewer than `min_count` rows in total;
    /// an odds fit for it would be degenerate.
    ThinParents { r: Pattern, parent_rows: usize },
    /// (c) An observed pattern that is not a node of the graph. Estimation
    /// cannot proceed while any of these are present.
    PatternNotInGraph(Pattern),
}

impl fmt::Display for PositivityFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositivityFlag::EmptyNode(p) => write!(f, "graph node {p} has no sample rows"),
            PositivityFlag::ThinParents { r, parent_rows } => {
                write!(f, "pattern {r}: parents hold only {parent_rows} rows")
            }
            PositivityFlag::PatternNotInGraph(p) => {
                write!(f, "observed pattern {p} is absent from the graph")
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PositivityReport {
    pub flags: Vec<PositivityFlag>,
}

impl PositivityReport {
    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Whether any flag is a hard error for estimation.
    pub fn has_hard_failure(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, PositivityFlag::PatternNotInGraph(_)))
    }
}

impl fmt::Display for PositivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.flags.is_empty() {
            return write!(f, "no positivity concerns");
        }
        for (i, flag) in self.flags.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{flag}")?;
        }
        Ok(())
    }
}

/// Empirical positivity checks of a sample against a graph.
pub fn positivity_report(idx: &PatternIndex, g: &PatternGraph, min_count: usize) -> PositivityReport {
    let mut flags = Vec::new();
    for node in g.nodes() {
        if idx.count(node) == 0 {
            flags.push(PositivityFlag::EmptyNode(*node));
        }
        if !node.is_full() {
            let parent_rows: usize = g.parents_of(node).unwrap().iter().map(|s| idx.count(s)).sum();
            if parent_rows < min_count {
                flags.push(PositivityFlag::ThinParents {
                    r: *node,
                    parent_rows,
                });
            }
        }
    }
    for p in idx.observed_patterns() {
        if !g.contains(&p) {
            flags.push(PositivityFlag::PatternNotInGraph(p));
        }
    }
    PositivityReport { flags }
}

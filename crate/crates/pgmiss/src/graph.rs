//! Pattern graphs: response patterns, the dominance order, graph validation,
//! path enumeration, counting, perturbation and equivalence moves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// A response pattern: a fixed-width vector of response indicators,
/// bit `j` = 1 meaning variable `j` is observed. Printed as a bit string
/// with coordinate 1 leftmost, e.g. `"110"`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pattern {
    bits: u32,
    d: u8,
}

impl Pattern {
    pub const MAX_D: usize = 16;

    pub fn new(bits: &[bool]) -> Result<Self> {
        if bits.is_empty() || bits.len() > Self::MAX_D {
            return Err(Error::DimensionOutOfRange {
                d: bits.len(),
                lo: 1,
                hi: Self::MAX_D,
            });
        }
        let mut b = 0u32;
        for (j, &v) in bits.iter().enumerate() {
            if v {
                b |= 1 << j;
            }
        }
        Ok(Pattern {
            bits: b,
            d: bits.len() as u8,
        })
    }

    /// The fully observed pattern `1_d`.
    pub fn full(d: usize) -> Self {
        assert!(d >= 1 && d <= Self::MAX_D);
        Pattern {
            bits: (1u32 << d) - 1,
            d: d as u8,
        }
    }

    /// The fully missing pattern `0_d`.
    pub fn empty(d: usize) -> Self {
        assert!(d >= 1 && d <= Self::MAX_D);
        Pattern { bits: 0, d: d as u8 }
    }

    pub fn d(&self) -> usize {
        self.d as usize
    }

    /// Whether coordinate `j` (0-based) is observed.
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.d());
        (self.bits >> j) & 1 == 1
    }

    /// `|r|`: the number of observed coordinates.
    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_full(&self) -> bool {
        self.bits == (1u32 << self.d) - 1
    }

    /// The reversed pattern `r̄ = 1_d - r`.
    pub fn complement(&self) -> Self {
        Pattern {
            bits: !self.bits & ((1u32 << self.d) - 1),
            d: self.d,
        }
    }

    /// Observed coordinates in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.d()).filter(move |&j| self.get(j))
    }

    /// Missing coordinates in increasing order.
    pub fn zeros(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.d()).filter(move |&j| !self.get(j))
    }

    /// Strict dominance `self > other`: every coordinate observed in `other`
    /// is observed in `self`, and the patterns differ.
    pub fn dominates(&self, other: &Pattern) -> Result<bool> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: other.d(),
            });
        }
        Ok(self.bits != other.bits && (self.bits & other.bits) == other.bits)
    }

    /// Weak dominance `self >= other`.
    pub fn dominates_eq(&self, other: &Pattern) -> Result<bool> {
        Ok(*self == *other || self.dominates(other)?)
    }

    /// All `2^d` patterns of dimension `d`, sorted descending (so `1_d` first).
    pub fn all(d: usize) -> Vec<Pattern> {
        assert!(d >= 1 && d <= Self::MAX_D);
        let mut v: Vec<Pattern> = (0..(1u32 << d)).map(|bits| Pattern { bits, d: d as u8 }).collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order used only for deterministic containers and output: dimension
/// first, then lexicographic on the printed bit string. Not the dominance
/// order, which is partial; see [`Pattern::dominates`].
impl Ord for Pattern {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d.cmp(&other.d).then_with(|| {
            for j in 0..self.d() {
                match self.get(j).cmp(&other.get(j)) {
                    std::cmp::Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            std::cmp::Ordering::Equal
        })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.d() {
            write!(f, "{}", if self.get(j) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > Self::MAX_D {
            return Err(Error::DimensionOutOfRange {
                d: s.len(),
                lo: 1,
                hi: Self::MAX_D,
            });
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("invalid pattern character {c:?} in {s:?}"),
                    })
                }
            }
        }
        Pattern::new(&bits)
    }
}

/// Parse a pattern, panicking on malformed input. Test and fixture helper.
pub fn pat(s: &str) -> Pattern {
    s.parse().unwrap()
}

/// Validation mode for a pattern graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    /// (G1) unique source plus (G2) every edge descends in the dominance order.
    Regular,
    /// (G1) unique source plus acyclicity.
    Acyclic,
}

/// A single violated validity condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// (G1): a node other than `1_d` has no parent.
    ExtraSource(Pattern),
    /// (G2): edge `s -> r` without `s > r`.
    NonDescendingEdge { s: Pattern, r: Pattern },
    /// (DAG): a directed cycle, listed in traversal order.
    Cycle(Vec<Pattern>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ExtraSource(p) => write!(f, "(G1) node {p} has no parent but is not the full pattern"),
            Violation::NonDescendingEdge { s, r } => {
                write!(f, "(G2) edge {s} -> {r} does not descend ({s} does not dominate {r})")
            }
            Violation::Cycle(nodes) => {
                let path: Vec<String> = nodes.iter().map(|p| p.to_string()).collect();
                write!(f, "(DAG) directed cycle: {}", path.join(" -> "))
            }
        }
    }
}

/// Outcome of [`PatternGraph::validate`]: every violated condition, empty when valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Default cap on the number of enumerated paths. Saturated graphs blow up
/// combinatorially; the recursive propensity algorithm avoids enumeration.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// A directed graph over response patterns. Immutable after construction.
///
/// `1_d` is always a node and never has parents; everything else about
/// validity (unique source, descending edges, acyclicity) is reported by
/// [`PatternGraph::validate`] rather than enforced here.
#[derive(Clone)]
pub struct PatternGraph {
    d: usize,
    /// Sorted descending, so `1_d` is at index 0.
    nodes: Vec<Pattern>,
    /// Parent indices per node, ascending.
    parents: Vec<Vec<usize>>,
    index: BTreeMap<Pattern, usize>,
}

impl PatternGraph {
    pub fn new(d: usize, nodes: &[Pattern], edges: &[(Pattern, Pattern)]) -> Result<Self> {
        if d < 1 || d > Pattern::MAX_D {
            return Err(Error::DimensionOutOfRange {
                d,
                lo: 1,
                hi: Pattern::MAX_D,
            });
        }
        let full = Pattern::full(d);
        let mut sorted: Vec<Pattern> = nodes.to_vec();
        for p in &sorted {
            if p.d() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.d(),
                });
            }
        }
        sorted.sort_by(|a, b| b.cmp(a));
        sorted.dedup();
        if sorted.first() != Some(&full) {
            return Err(Error::InvalidGraph(format!("node set must contain the full pattern {full}")));
        }
        let index: BTreeMap<Pattern, usize> = sorted.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sorted.len()];
        for (s, r) in edges {
            let si = *index.get(s).ok_or_else(|| Error::NodeNotFound(s.to_string()))?;
            let ri = *index.get(r).ok_or_else(|| Error::NodeNotFound(r.to_string()))?;
            if *r == full {
                return Err(Error::InvalidGraph(format!("the full pattern {full} must not have parents (edge {s} -> {r})")));
            }
            if si == ri {
                return Err(Error::InvalidGraph(format!("self loop at {s}")));
            }
            parents[ri].insert(si);
        }
        Ok(PatternGraph {
            d,
            nodes: sorted,
            parents: parents.into_iter().map(|s| s.into_iter().collect()).collect(),
            index,
        })
    }

    /// Build from edges alone; the node set is the union of edge endpoints plus `1_d`.
    pub fn from_edges(d: usize, edges: &[(Pattern, Pattern)]) -> Result<Self> {
        let mut nodes: BTreeSet<Pattern> = edges.iter().flat_map(|(s, r)| [*s, *r]).collect();
        nodes.insert(Pattern::full(d));
        let nodes: Vec<Pattern> = nodes.into_iter().collect();
        PatternGraph::new(d, &nodes, edges)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn full_pattern(&self) -> Pattern {
        self.nodes[0]
    }

    /// Nodes sorted descending; `1_d` first.
    pub fn nodes(&self) -> &[Pattern] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.index.contains_key(p)
    }

    pub fn node_index(&self, p: &Pattern) -> Result<usize> {
        self.index.get(p).copied().ok_or_else(|| Error::NodeNotFound(p.to_string()))
    }

    pub fn node(&self, i: usize) -> Pattern {
        self.nodes[i]
    }

    /// `PA_r` as patterns, deterministic order.
    pub fn parents_of(&self, r: &Pattern) -> Result<Vec<Pattern>> {
        let ri = self.node_index(r)?;
        Ok(self.parents[ri].iter().map(|&i| self.nodes[i]).collect())
    }

    pub fn parent_indices(&self, ri: usize) -> &[usize] {
        &self.parents[ri]
    }

    /// All edges `(s, r)`, deterministic order.
    pub fn edges(&self) -> Vec<(Pattern, Pattern)> {
        let mut out = Vec::new();
        for (ri, ps) in self.parents.iter().enumerate() {
            for &si in ps {
                out.push((self.nodes[si], self.nodes[ri]));
            }
        }
        out.sort();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    pub fn has_edge(&self, s: &Pattern, r: &Pattern) -> bool {
        match (self.index.get(s), self.index.get(r)) {
            (Some(&si), Some(&ri)) => self.parents[ri].contains(&si),
            _ => false,
        }
    }

    /// Checks (G1), (G2) and (DAG) and reports every violation. Validity
    /// depends on the mode: regular requires (G1)+(G2), acyclic (G1)+(DAG).
    pub fn validate(&self, mode: GraphMode) -> ValidationReport {
        let mut violations = Vec::new();
        for (ri, ps) in self.parents.iter().enumerate() {
            if ps.is_empty() && ri != 0 {
                violations.push(Violation::ExtraSource(self.nodes[ri]));
            }
        }
        match mode {
            GraphMode::Regular => {
                for (ri, ps) in self.parents.iter().enumerate() {
                    for &si in ps {
                        if !self.nodes[si].dominates(&self.nodes[ri]).unwrap() {
                            violations.push(Violation::NonDescendingEdge {
                                s: self.nodes[si],
                                r: self.nodes[ri],
                            });
                        }
                    }
                }
            }
            GraphMode::Acyclic => {
                if let Some(cycle) = self.find_cycle() {
                    violations.push(Violation::Cycle(cycle));
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn is_valid(&self, mode: GraphMode) -> bool {
        self.validate(mode).is_valid()
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.nodes.len()];
        for (ri, ps) in self.parents.iter().enumerate() {
            for &si in ps {
                ch[si].push(ri);
            }
        }
        ch
    }

    fn find_cycle(&self) -> Option<Vec<Pattern>> {
        // Iterative DFS with coloring; returns the first cycle found.
        let children = self.children();
        let n = self.nodes.len();
        let mut color = vec![0u8; n]; // 0 white, 1 grey, 2 black
        let mut parent_of = vec![usize::MAX; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = 1;
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if *next < children[u].len() {
                    let v = children[u][*next];
                    *next += 1;
                    match color[v] {
                        0 => {
                            color[v] = 1;
                            parent_of[v] = u;
                            stack.push((v, 0));
                        }
                        1 => {
                            // Found a back edge u -> v: reconstruct v .. u -> v.
                            let mut cyc = vec![self.nodes[v]];
                            let mut w = u;
                            let mut tail = Vec::new();
                            while w != v {
                                tail.push(self.nodes[w]);
                                w = parent_of[w];
                            }
                            tail.reverse();
                            cyc.extend(tail);
                            cyc.push(self.nodes[v]);
                            return Some(cyc);
                        }
                        _ => {}
                    }
                } else {
                    color[u] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Topological order (node indices), sources first. Errors on a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let children = self.children();
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&u) = ready.iter().next() {
            ready.remove(&u);
            order.push(u);
            for &v in &children[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidGraph("graph has a directed cycle".into()));
        }
        Ok(order)
    }

    /// Generation numbers g(r): longest-path node count from `1_d` minus one.
    /// Requires validity in acyclic mode (unique source, no cycles).
    pub fn generation_numbers(&self) -> Result<Vec<usize>> {
        let report = self.validate(GraphMode::Acyclic);
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        let order = self.topological_order()?;
        let mut g = vec![0usize; self.nodes.len()];
        for &u in &order {
            for &p in &self.parents[u] {
                g[u] = g[u].max(g[p] + 1);
            }
        }
        Ok(g)
    }

    pub fn generation_number(&self, r: &Pattern) -> Result<usize> {
        let ri = self.node_index(r)?;
        Ok(self.generation_numbers()?[ri])
    }

    /// Evaluation order for the propensity recursion: for regular graphs,
    /// by `|r|` descending; for acyclic graphs, by generation number ascending.
    /// `1_d` always comes first.
    pub fn sweep_order(&self) -> Result<Vec<usize>> {
        if self.is_valid(GraphMode::Regular) {
            let mut idx: Vec<usize> = (0..self.nodes.len()).collect();
            idx.sort_by_key(|&i| std::cmp::Reverse(self.nodes[i].count_ones()));
            Ok(idx)
        } else {
            let g = self.generation_numbers()?;
            let mut idx: Vec<usize> = (0..self.nodes.len()).collect();
            idx.sort_by_key(|&i| g[i]);
            Ok(idx)
        }
    }

    /// `Π_r`: every path from `1_d` to `r`, in lexicographic order.
    /// `Π_{1_d}` is the single degenerate path `[1_d]`.
    pub fn enumerate_paths(&self, r: &Pattern) -> Result<Vec<Path>> {
        self.paths_between_capped(&self.full_pattern(), r, DEFAULT_PATH_CAP)
    }

    pub fn enumerate_paths_capped(&self, r: &Pattern, cap: usize) -> Result<Vec<Path>> {
        self.paths_between_capped(&self.full_pattern(), r, cap)
    }

    /// `Υ_{s,r}`: every path from `s` to `r`; empty when `s` is not an
    /// ancestor of `r`; the degenerate path when `s == r`.
    pub fn paths_between(&self, s: &Pattern, r: &Pattern) -> Result<Vec<Path>> {
        self.paths_between_capped(s, r, DEFAULT_PATH_CAP)
    }

    pub fn paths_between_capped(&self, s: &Pattern, r: &Pattern, cap: usize) -> Result<Vec<Path>> {
        let si = self.node_index(s)?;
        let ri = self.node_index(r)?;
        // Memoized upward DFS from r: suffix paths keyed by node.
        let mut memo: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
        let mut count = 0usize;
        let paths = self.paths_up(si, ri, &mut memo, &mut count, cap)?;
        let mut out: Vec<Path> = paths
            .into_iter()
            .map(|idx| Path::new(idx.into_iter().map(|i| self.nodes[i]).collect()))
            .collect();
        out.sort_by(|a, b| a.nodes().cmp(b.nodes()));
        Ok(out)
    }

    fn paths_up(
        &self,
        si: usize,
        ri: usize,
        memo: &mut BTreeMap<usize, Vec<Vec<usize>>>,
        count: &mut usize,
        cap: usize,
    ) -> Result<Vec<Vec<usize>>> {
        if ri == si {
            return Ok(vec![vec![si]]);
        }
        if let Some(cached) = memo.get(&ri) {
            return Ok(cached.clone());
        }
        let mut acc = Vec::new();
        // Guard against cycles: memoization keyed per target is safe only on
        // DAGs, so detect re-entry via a sentinel.
        memo.insert(ri, Vec::new());
        for &pi in self.parents[ri].clone().iter() {
            for mut path in self.paths_up(si, pi, memo, count, cap)? {
                *count += 1;
                if *count > cap {
                    return Err(Error::PathCapExceeded { cap });
                }
                path.push(ri);
                acc.push(path);
            }
        }
        memo.insert(ri, acc.clone());
        Ok(acc)
    }

    /// `Ans_r`: ancestors of `r` including `r` itself, deterministic order.
    pub fn ancestors_of(&self, r: &Pattern) -> Result<Vec<Pattern>> {
        let ri = self.node_index(r)?;
        let mut seen = BTreeSet::new();
        let mut stack = vec![ri];
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                stack.extend(self.parents[u].iter().copied());
            }
        }
        let mut out: Vec<Pattern> = seen.into_iter().map(|i| self.nodes[i]).collect();
        out.sort_by(|a, b| b.cmp(a));
        Ok(out)
    }

    /// Graph with one edge added; the edge must not already exist.
    pub fn with_edge_added(&self, s: &Pattern, r: &Pattern) -> Result<PatternGraph> {
        if self.has_edge(s, r) {
            return Err(Error::EdgeExists {
                s: s.to_string(),
                r: r.to_string(),
            });
        }
        let mut edges = self.edges();
        edges.push((*s, *r));
        PatternGraph::new(self.d, &self.nodes, &edges)
    }

    /// Graph with one edge removed; the edge must exist.
    pub fn with_edge_removed(&self, s: &Pattern, r: &Pattern) -> Result<PatternGraph> {
        if !self.has_edge(s, r) {
            return Err(Error::InvalidGraph(format!("edge {s} -> {r} not present")));
        }
        let edges: Vec<(Pattern, Pattern)> = self.edges().into_iter().filter(|(a, b)| !(a == s && b == r)).collect();
        PatternGraph::new(self.d, &self.nodes, &edges)
    }

    /// `Δ₊₁G ∪ Δ₋₁G`: all single-edge perturbations that preserve (G1-2).
    /// Additions are pairs `(s, r)` with `s > r`, `s ∉ PA_r`; deletions are
    /// existing edges into nodes with more than one parent.
    pub fn perturbation_neighborhood(&self) -> Result<PerturbationSet> {
        let report = self.validate(GraphMode::Regular);
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        let mut additions = Vec::new();
        let mut deletions = Vec::new();
        for (ri, r) in self.nodes.iter().enumerate() {
            if r.is_full() {
                continue;
            }
            for (si, s) in self.nodes.iter().enumerate() {
                if s.dominates(r)? && !self.parents[ri].contains(&si) {
                    additions.push((*s, *r));
                }
            }
            if self.parents[ri].len() > 1 {
                for &si in &self.parents[ri] {
                    deletions.push((self.nodes[si], *r));
                }
            }
        }
        additions.sort();
        deletions.sort();
        Ok(PerturbationSet { additions, deletions })
    }

    /// The equivalence move of acyclic pattern graphs: replaces every edge
    /// into `r` by the single edge `s -> r`, provided `s` blocks all paths
    /// from `1_d` to `r` and every interior node on a path from `s` to `r`
    /// is dominated by `r`. The returned graph identifies the same
    /// full-data law.
    pub fn equivalence_move(&self, s: &Pattern, r: &Pattern) -> Result<PatternGraph> {
        let report = self.validate(GraphMode::Acyclic);
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        let si = self.node_index(s)?;
        let ri = self.node_index(r)?;
        if si == ri {
            return Err(Error::InvalidGraph(format!("equivalence move requires s != r, got {s}")));
        }
        if self.parents[ri].contains(&si) {
            return Err(Error::EdgeExists {
                s: s.to_string(),
                r: r.to_string(),
            });
        }
        // Blocking: every path from 1_d to r passes through s.
        for path in self.enumerate_paths(r)? {
            if !path.nodes().contains(s) {
                return Err(Error::BlockingViolated {
                    s: s.to_string(),
                    r: r.to_string(),
                });
            }
        }
        // Uninformative: every node strictly between s and r on a path from
        // s to r satisfies q < r. The endpoint s may dominate coordinates
        // missing in r; r itself trivially fails the strict order, so both
        // endpoints are exempt.
        for path in self.paths_between(s, r)? {
            for q in path.nodes() {
                if q == s || q == r {
                    continue;
                }
                if !r.dominates(q)? {
                    return Err(Error::UninformativeViolated {
                        s: s.to_string(),
                        r: r.to_string(),
                        q: q.to_string(),
                    });
                }
            }
        }
        let mut edges: Vec<(Pattern, Pattern)> = self.edges().into_iter().filter(|(_, b)| b != r).collect();
        edges.push((*s, *r));
        PatternGraph::new(self.d, &self.nodes, &edges)
    }
}

impl fmt::Debug for PatternGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PatternGraph(d={}, nodes=[", self.d)?;
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "], edges=[")?;
        for (i, (s, r)) in self.edges().iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}->{r}")?;
        }
        write!(f, "])")
    }
}

/// A directed path; for paths from `1_d` the first node is the full pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    nodes: Vec<Pattern>,
}

impl Path {
    pub fn new(nodes: Vec<Pattern>) -> Self {
        assert!(!nodes.is_empty());
        Path { nodes }
    }

    pub fn nodes(&self) -> &[Pattern] {
        &self.nodes
    }

    pub fn first(&self) -> Pattern {
        self.nodes[0]
    }

    pub fn terminal(&self) -> Pattern {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Path nodes excluding the source `1_d`; the nodes whose odds enter
    /// path products.
    pub fn odds_nodes(&self) -> &[Pattern] {
        if self.nodes[0].is_full() {
            &self.nodes[1..]
        } else {
            &self.nodes
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.nodes.len() == 1 {
            return write!(f, "{0}->{0}", self.nodes[0]);
        }
        let parts: Vec<String> = self.nodes.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join("->"))
    }
}

/// Single-edge perturbations of a regular graph: `Δ₊₁G` and `Δ₋₁G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationSet {
    pub additions: Vec<(Pattern, Pattern)>,
    pub deletions: Vec<(Pattern, Pattern)>,
}

impl PerturbationSet {
    pub fn len(&self) -> usize {
        self.additions.len() + self.deletions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `M_d`: the number of distinct regular pattern graphs over the full
/// pattern set `{0,1}^d`. Exact arbitrary-precision arithmetic; supported
/// for `1 <= d <= 8`.
pub fn count_regular_graphs(d: usize) -> Result<BigUint> {
    if d < 1 || d > 8 {
        return Err(Error::DimensionOutOfRange { d, lo: 1, hi: 8 });
    }
    let mut total = BigUint::from(1u32);
    for k in 0..d {
        // A node with |r| = k observed coordinates has 2^{d-k} - 1 strict
        // dominators and picks any nonempty subset of them as parents.
        let dominators = (1u64 << (d - k)) - 1;
        let choices = (BigUint::from(2u32).pow(dominators as u32)) - BigUint::from(1u32);
        let nodes_at_level = binomial(d, k);
        total *= choices.pow(nodes_at_level as u32);
    }
    Ok(total)
}

fn binomial(n: usize, k: usize) -> u64 {
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Brute-force enumeration of all regular pattern graphs over an explicit
/// node set: every assignment of a nonempty parent set drawn from each
/// node's dominators, validated edge by edge. Independent of
/// [`count_regular_graphs`]; practical for `d <= 3`.
pub fn enumerate_regular_graphs(d: usize, nodes: &[Pattern]) -> Result<Vec<PatternGraph>> {
    if d > 3 && nodes.len() > 8 {
        return Err(Error::DimensionOutOfRange { d, lo: 1, hi: 3 });
    }
    let full = Pattern::full(d);
    if !nodes.contains(&full) {
        return Err(Error::InvalidGraph(format!("node set must contain {full}")));
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    sorted.dedup();
    let non_source: Vec<Pattern> = sorted.iter().copied().filter(|p| *p != full).collect();
    let dominators: Vec<Vec<Pattern>> = non_source
        .iter()
        .map(|r| sorted.iter().copied().filter(|s| s.dominates(r).unwrap()).collect())
        .collect();
    if dominators.iter().any(|ds| ds.is_empty()) {
        return Ok(Vec::new());
    }
    // Odometer over nonempty subsets of each node's dominator set.
    let mut subset_masks: Vec<u64> = vec![1; non_source.len()];
    let mut out = Vec::new();
    loop {
        let mut edges = Vec::new();
        for (i, r) in non_source.iter().enumerate() {
            let mask = subset_masks[i];
            for (j, s) in dominators[i].iter().enumerate() {
                if (mask >> j) & 1 == 1 {
                    edges.push((*s, *r));
                }
            }
        }
        let g = PatternGraph::new(d, &sorted, &edges)?;
        if g.is_valid(GraphMode::Regular) {
            out.push(g);
        }
        // Advance the odometer.
        let mut i = 0;
        loop {
            if i == non_source.len() {
                return Ok(out);
            }
            subset_masks[i] += 1;
            if subset_masks[i] < (1u64 << dominators[i].len()) {
                break;
            }
            subset_masks[i] = 1;
            i += 1;
        }
    }
}

/// Builtin graph families and shipped examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinGraph {
    /// Complete-case missing value: every node's parent is `1_d`.
    Ccmv,
    /// Available-case missing value on a monotone family: all patterns with
    /// strictly more observed entries are parents.
    Acmv,
    /// Neighboring-case missing value on a monotone family: the patterns
    /// with exactly one more observed entry are parents.
    Ncmv,
    /// A single descending chain through a totally ordered node set.
    TreeChain,
    /// The four-pattern, four-arrow example graph on two variables.
    ExampleFig2Right,
    /// The conditional-MAR graph: monotone dropout of a three-wave outcome
    /// crossed with a possibly missing baseline variable.
    ExampleCondMar,
}

impl std::str::FromStr for BuiltinGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ccmv" => Ok(BuiltinGraph::Ccmv),
            "acmv" => Ok(BuiltinGraph::Acmv),
            "ncmv" => Ok(BuiltinGraph::Ncmv),
            "tree_chain" => Ok(BuiltinGraph::TreeChain),
            "example_fig2_right" => Ok(BuiltinGraph::ExampleFig2Right),
            "example_condmar" => Ok(BuiltinGraph::ExampleCondMar),
            other => Err(Error::Config(format!("unknown builtin graph kind {other:?}"))),
        }
    }
}

/// Construct a builtin graph over the given node set. The two example kinds
/// have fixed node sets and reject any other input.
pub fn builtin_graph(kind: BuiltinGraph, nodes: &[Pattern]) -> Result<PatternGraph> {
    match kind {
        BuiltinGraph::Ccmv => {
            let d = check_nodes(kind, nodes)?;
            let full = Pattern::full(d);
            let edges: Vec<(Pattern, Pattern)> = nodes.iter().filter(|r| !r.is_full()).map(|r| (full, *r)).collect();
            PatternGraph::new(d, nodes, &edges)
        }
        BuiltinGraph::Acmv => {
            let d = check_monotone(kind, nodes)?;
            let mut edges = Vec::new();
            for r in nodes {
                for s in nodes {
                    if s.count_ones() > r.count_ones() {
                        edges.push((*s, *r));
                    }
                }
            }
            PatternGraph::new(d, nodes, &edges)
        }
        BuiltinGraph::Ncmv => {
            let d = check_monotone(kind, nodes)?;
            let mut edges = Vec::new();
            for r in nodes {
                for s in nodes {
                    if s.count_ones() == r.count_ones() + 1 {
                        edges.push((*s, *r));
                    }
                }
            }
            PatternGraph::new(d, nodes, &edges)
        }
        BuiltinGraph::TreeChain => {
            let d = check_monotone(kind, nodes)?;
            let mut sorted = nodes.to_vec();
            sorted.sort_by_key(|p| std::cmp::Reverse(p.count_ones()));
            let edges: Vec<(Pattern, Pattern)> = sorted.windows(2).map(|w| (w[0], w[1])).collect();
            PatternGraph::new(d, nodes, &edges)
        }
        BuiltinGraph::ExampleFig2Right => {
            let e = [
                (pat("11"), pat("10")),
                (pat("11"), pat("01")),
                (pat("11"), pat("00")),
                (pat("10"), pat("00")),
            ];
            PatternGraph::from_edges(2, &e)
        }
        BuiltinGraph::ExampleCondMar => {
            let e = [
                (pat("1111"), pat("1110")),
                (pat("1111"), pat("1100")),
                (pat("1110"), pat("1100")),
                (pat("1111"), pat("0111")),
                (pat("0111"), pat("0110")),
                (pat("0111"), pat("0100")),
                (pat("0110"), pat("0100")),
            ];
            PatternGraph::from_edges(4, &e)
        }
    }
}

fn check_nodes(kind: BuiltinGraph, nodes: &[Pattern]) -> Result<usize> {
    let d = nodes
        .first()
        .map(|p| p.d())
        .ok_or_else(|| Error::BadBuiltin {
            kind: format!("{kind:?}"),
            msg: "empty node set".into(),
        })?;
    if !nodes.contains(&Pattern::full(d)) {
        return Err(Error::BadBuiltin {
            kind: format!("{kind:?}"),
            msg: format!("node set must contain {}", Pattern::full(d)),
        });
    }
    Ok(d)
}

fn check_monotone(kind: BuiltinGraph, nodes: &[Pattern]) -> Result<usize> {
    let d = check_nodes(kind, nodes)?;
    let mut sorted = nodes.to_vec();
    sorted.sort_by_key(|p| std::cmp::Reverse(p.count_ones()));
    for w in sorted.windows(2) {
        if !w[0].dominates(&w[1])? {
            return Err(Error::BadBuiltin {
                kind: format!("{kind:?}"),
                msg: format!("nodes must form a monotone family; {} and {} are incomparable", w[0], w[1]),
            });
        }
    }
    Ok(d)
}

/// Parse the plain-text graph format:
/// line 1 `d: <int>`, line 2 `patterns: <bit strings>`, then one
/// `<s> -> <r>` edge per line. `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<PatternGraph> {
    let mut d: Option<usize> = None;
    let mut nodes: Option<Vec<Pattern>> = None;
    let mut edges: Vec<(Pattern, Pattern)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("d:") {
            d = Some(rest.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid dimension {:?}", rest.trim()),
            })?);
        } else if let Some(rest) = line.strip_prefix("patterns:") {
            let mut ps = Vec::new();
            for tok in rest.split_whitespace() {
                let p: Pattern = tok.parse().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("{e}"),
                })?;
                ps.push(p);
            }
            nodes = Some(ps);
        } else if let Some((s, r)) = line.split_once("->") {
            let parse_one = |tok: &str| -> Result<Pattern> {
                tok.trim().parse().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("{e}"),
                })
            };
            edges.push((parse_one(s)?, parse_one(r)?));
        } else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unrecognized line {line:?}"),
            });
        }
    }
    let d = d.ok_or(Error::Parse {
        line: 0,
        msg: "missing `d:` header".into(),
    })?;
    let nodes = nodes.ok_or(Error::Parse {
        line: 0,
        msg: "missing `patterns:` header".into(),
    })?;
    for p in &nodes {
        if p.d() != d {
            return Err(Error::Parse {
                line: 0,
                msg: format!("pattern {p} does not match d={d}"),
            });
        }
    }
    PatternGraph::new(d, &nodes, &edges)
}

/// Serialize a graph in the plain-text format accepted by [`parse_graph`].
pub fn write_graph(g: &PatternGraph) -> String {
    let mut out = format!("d: {}\n", g.d());
    let pats: Vec<String> = g.nodes().iter().map(|p| p.to_string()).collect();
    out.push_str(&format!("patterns: {}\n", pats.join(" ")));
    for (s, r) in g.edges() {
        out.push_str(&format!("{s} -> {r}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> PatternGraph {
        builtin_graph(BuiltinGraph::ExampleFig2Right, &[]).unwrap()
    }

    #[test]
    fn dominance_matches_coordinatewise_order() {
        assert!(pat("110").dominates(&pat("100")).unwrap());
        assert!(pat("110").dominates(&pat("010")).unwrap());
        assert!(!pat("110").dominates(&pat("011")).unwrap());
        assert!(!pat("011").dominates(&pat("110")).unwrap());
        assert!(!pat("101").dominates(&pat("101")).unwrap());
        assert!(pat("110").dominates(&pat("100")).unwrap());
        assert!(matches!(
            pat("110").dominates(&pat("10")),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pattern_display_roundtrip() {
        for s in ["110", "0101", "1", "0", "111111"] {
            assert_eq!(pat(s).to_string(), s);
        }
        assert_eq!(pat("110").complement().to_string(), "001");
        assert_eq!(pat("1010").ones().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(pat("1010").zeros().collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn fig2_graph_is_regular() {
        let g = fig2();
        assert!(g.validate(GraphMode::Regular).is_valid());
        assert!(g.validate(GraphMode::Acyclic).is_valid());
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn reversed_edge_violates_g2() {
        let g = PatternGraph::from_edges(
            3,
            &[
                (pat("111"), pat("110")),
                (pat("100"), pat("110")),
                (pat("111"), pat("100")),
            ],
        )
        .unwrap();
        let report = g.validate(GraphMode::Regular);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonDescendingEdge { s, r } if *s == pat("100") && *r == pat("110"))));
    }

    #[test]
    fn acyclic_non_regular_graph_validates_by_mode() {
        let g = crate::golden::fig_b1_g1();
        assert!(g.validate(GraphMode::Acyclic).is_valid());
        let report = g.validate(GraphMode::Regular);
        assert!(!report.is_valid());
        assert!(report.violations.iter().all(|v| matches!(v, Violation::NonDescendingEdge { .. })));
    }

    #[test]
    fn cycle_is_reported_in_acyclic_mode() {
        // 10 -> 00 -> 01 -> 10 is a cycle among incomparable/ascending edges.
        let g = PatternGraph::from_edges(
            2,
            &[
                (pat("11"), pat("10")),
                (pat("10"), pat("00")),
                (pat("00"), pat("01")),
                (pat("01"), pat("10")),
            ],
        )
        .unwrap();
        let report = g.validate(GraphMode::Acyclic);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Cycle(_))));
    }

    #[test]
    fn extra_source_is_reported() {
        let g = PatternGraph::new(2, &[pat("11"), pat("10"), pat("01")], &[(pat("11"), pat("10"))]).unwrap();
        let report = g.validate(GraphMode::Regular);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ExtraSource(p) if *p == pat("01"))));
    }

    #[test]
    fn paths_of_fig2() {
        let g = fig2();
        let paths = g.enumerate_paths(&pat("00")).unwrap();
        let strs: Vec<String> = paths.iter().map(|p| p.to_string()).collect();
        assert_eq!(strs, vec!["11->00", "11->10->00"]);

        // Degenerate path at the source.
        let paths = g.enumerate_paths(&pat("11")).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths[0].is_degenerate());

        // Five paths in total, including the degenerate one.
        let total: usize = g.nodes().iter().map(|r| g.enumerate_paths(r).unwrap().len()).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn ccmv_star_has_single_paths() {
        let g = builtin_graph(BuiltinGraph::Ccmv, &Pattern::all(3)).unwrap();
        assert_eq!(g.edge_count(), 7);
        let paths = g.enumerate_paths(&pat("001")).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].to_string(), "111->001");
    }

    #[test]
    fn paths_between_examples() {
        let g = fig2();
        let ps = g.paths_between(&pat("10"), &pat("00")).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].to_string(), "10->00");

        let ps = g.paths_between(&pat("01"), &pat("00")).unwrap();
        assert!(ps.is_empty());

        let ps = g.paths_between(&pat("10"), &pat("10")).unwrap();
        assert_eq!(ps.len(), 1);
        assert!(ps[0].is_degenerate());

        assert!(matches!(
            g.paths_between(&pat("10"), &pat("111").complement()),
            Err(Error::DimensionMismatch { .. }) | Err(Error::NodeNotFound(_))
        ));
    }

    #[test]
    fn ancestors_union_matches_paths() {
        let g = fig2();
        let anc = g.ancestors_of(&pat("00")).unwrap();
        assert_eq!(anc, vec![pat("11"), pat("10"), pat("00")]);
        for s in g.nodes() {
            let nonempty = !g.paths_between(s, &pat("00")).unwrap().is_empty();
            assert_eq!(nonempty, anc.contains(s));
        }
    }

    #[test]
    fn generation_numbers_on_examples() {
        let g = fig2();
        assert_eq!(g.generation_number(&pat("11")).unwrap(), 0);
        assert_eq!(g.generation_number(&pat("10")).unwrap(), 1);
        assert_eq!(g.generation_number(&pat("00")).unwrap(), 2);

        let ccmv = builtin_graph(BuiltinGraph::Ccmv, &Pattern::all(3)).unwrap();
        for r in ccmv.nodes().iter().skip(1) {
            assert_eq!(ccmv.generation_number(r).unwrap(), 1);
        }
    }

    #[test]
    fn count_matches_known_values() {
        assert_eq!(count_regular_graphs(1).unwrap(), BigUint::from(1u32));
        assert_eq!(count_regular_graphs(2).unwrap(), BigUint::from(7u32));
        assert_eq!(count_regular_graphs(3).unwrap(), BigUint::from(43561u32));
        assert!(count_regular_graphs(4).unwrap() > BigUint::from(10u64).pow(18));
        assert!(count_regular_graphs(0).is_err());
        assert!(count_regular_graphs(9).is_err());
    }

    #[test]
    fn brute_force_enumeration_matches_count_at_d2() {
        let graphs = enumerate_regular_graphs(2, &Pattern::all(2)).unwrap();
        assert_eq!(graphs.len(), 7);
        for g in &graphs {
            assert!(g.is_valid(GraphMode::Regular));
        }
    }

    #[test]
    fn perturbation_neighborhood_of_fig2() {
        let g = fig2();
        let ps = g.perturbation_neighborhood().unwrap();
        assert_eq!(ps.additions, vec![(pat("01"), pat("00"))]);
        assert_eq!(ps.deletions, vec![(pat("10"), pat("00")), (pat("11"), pat("00"))]);
        for (s, r) in &ps.additions {
            assert!(g.with_edge_added(s, r).unwrap().is_valid(GraphMode::Regular));
        }
        for (s, r) in &ps.deletions {
            assert!(g.with_edge_removed(s, r).unwrap().is_valid(GraphMode::Regular));
        }
    }

    #[test]
    fn perturbations_of_stars_and_saturated_graphs() {
        let star = builtin_graph(BuiltinGraph::Ccmv, &Pattern::all(2)).unwrap();
        let ps = star.perturbation_neighborhood().unwrap();
        assert!(ps.deletions.is_empty());

        // Saturated graph: every dominance pair is an edge.
        let mut edges = Vec::new();
        for s in Pattern::all(2) {
            for r in Pattern::all(2) {
                if s.dominates(&r).unwrap() {
                    edges.push((s, r));
                }
            }
        }
        let sat = PatternGraph::from_edges(2, &edges).unwrap();
        let ps = sat.perturbation_neighborhood().unwrap();
        assert!(ps.additions.is_empty());
    }

    #[test]
    fn equivalence_move_g1_to_g2() {
        let g1 = crate::golden::fig_b1_g1();
        let moved = g1.equivalence_move(&pat("11"), &pat("10")).unwrap();
        assert_eq!(moved.edges(), crate::golden::fig_b1_g2().edges());
    }

    #[test]
    fn equivalence_move_g3_to_g4() {
        let g3 = crate::golden::fig_b1_g3();
        let g4 = g3.equivalence_move(&pat("10"), &pat("01")).unwrap();
        assert_eq!(g4.edges(), crate::golden::fig_b1_g4().edges());
    }

    #[test]
    fn equivalence_move_rejects_blocking_violation() {
        let g = fig2();
        // 01 is not on the path 11 -> 00, so it blocks nothing.
        let err = g.equivalence_move(&pat("01"), &pat("00")).unwrap_err();
        assert!(matches!(err, Error::BlockingViolated { .. }));
        // Moving onto an existing edge is its own error.
        let err = g.equivalence_move(&pat("10"), &pat("00")).unwrap_err();
        assert!(matches!(err, Error::EdgeExists { .. }));
        // Original graph untouched.
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn equivalence_move_rejects_uninformative_violation() {
        // 111 -> 110 -> 100, with 110 on the path from 111 to 100;
        // moving (111, 100)... the edge already exists in ccmv. Build a chain:
        let g = PatternGraph::from_edges(
            3,
            &[(pat("111"), pat("110")), (pat("110"), pat("011"))],
        );
        // 110 and 011 are incomparable so this graph is acyclic only.
        let g = g.unwrap();
        let err = g.equivalence_move(&pat("111"), &pat("011")).unwrap_err();
        match err {
            Error::UninformativeViolated { q, .. } => assert_eq!(q, "110"),
            other => panic!("expected uninformative violation, got {other}"),
        }
    }

    #[test]
    fn fig_b2_moves_on_seven_pattern_graph() {
        // Seven-pattern, four-variable graph with a chain 1111 -> 0011 ->
        // 0101 -> 0111; both 0011 and 1111 satisfy the move conditions for
        // target 0111, relocating the single arrow into it.
        let left = PatternGraph::from_edges(
            4,
            &[
                (pat("1111"), pat("0011")),
                (pat("0011"), pat("0101")),
                (pat("0101"), pat("0111")),
                (pat("1111"), pat("1110")),
                (pat("1111"), pat("1100")),
                (pat("1111"), pat("1000")),
            ],
        )
        .unwrap();
        assert_eq!(left.len(), 7);

        let middle = left.equivalence_move(&pat("0011"), &pat("0111")).unwrap();
        assert!(middle.has_edge(&pat("0011"), &pat("0111")));
        assert!(!middle.has_edge(&pat("0101"), &pat("0111")));

        let right = left.equivalence_move(&pat("1111"), &pat("0111")).unwrap();
        assert!(right.has_edge(&pat("1111"), &pat("0111")));
        assert!(!right.has_edge(&pat("0101"), &pat("0111")));
    }

    #[test]
    fn builtin_acmv_and_ncmv_on_monotone_family() {
        let nodes = [pat("111"), pat("110"), pat("100")];
        let acmv = builtin_graph(BuiltinGraph::Acmv, &nodes).unwrap();
        assert_eq!(acmv.parents_of(&pat("100")).unwrap(), vec![pat("111"), pat("110")]);
        assert_eq!(acmv.parents_of(&pat("110")).unwrap(), vec![pat("111")]);

        let ncmv = builtin_graph(BuiltinGraph::Ncmv, &nodes).unwrap();
        assert_eq!(ncmv.parents_of(&pat("100")).unwrap(), vec![pat("110")]);

        let chain = builtin_graph(BuiltinGraph::TreeChain, &nodes).unwrap();
        assert_eq!(chain.edges(), vec![(pat("110"), pat("100")), (pat("111"), pat("110"))]);

        let bad = [pat("111"), pat("110"), pat("011")];
        assert!(matches!(
            builtin_graph(BuiltinGraph::Acmv, &bad),
            Err(Error::BadBuiltin { .. })
        ));
    }

    #[test]
    fn condmar_graph_structure() {
        let g = builtin_graph(BuiltinGraph::ExampleCondMar, &[]).unwrap();
        assert!(g.is_valid(GraphMode::Regular));
        assert_eq!(g.len(), 6);
        assert_eq!(g.parents_of(&pat("1100")).unwrap(), vec![pat("1111"), pat("1110")]);
        assert_eq!(g.parents_of(&pat("0100")).unwrap(), vec![pat("0111"), pat("0110")]);
        assert_eq!(g.parents_of(&pat("0111")).unwrap(), vec![pat("1111")]);
    }

    #[test]
    fn graph_file_roundtrip_and_errors() {
        let g = fig2();
        let text = write_graph(&g);
        let parsed = parse_graph(&text).unwrap();
        assert_eq!(parsed.edges(), g.edges());
        assert_eq!(parsed.nodes(), g.nodes());

        let with_comment = "# example\nd: 2\npatterns: 11 10 01 00\n11 -> 10 # edge\n";
        assert!(parse_graph(with_comment).is_ok());

        let err = parse_graph("d: 2\npatterns: 11 10\n11 -> 2x\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn path_cap_is_enforced() {
        // Saturated d=4 graph has 75 paths into the empty pattern; cap below that.
        let mut edges = Vec::new();
        for s in Pattern::all(4) {
            for r in Pattern::all(4) {
                if s.dominates(&r).unwrap() {
                    edges.push((s, r));
                }
            }
        }
        let g = PatternGraph::from_edges(4, &edges).unwrap();
        assert!(matches!(
            g.enumerate_paths_capped(&pat("0000"), 10),
            Err(Error::PathCapExceeded { cap: 10 })
        ));
        assert_eq!(g.enumerate_paths(&pat("0000")).unwrap().len(), 75);
    }

    #[test]
    fn path_count_recursion_identity_d2() {
        // |Π_r| = Σ_{q ∈ PA_r, q != 1_d} |Π_q| + [1_d ∈ PA_r], checked on
        // every regular graph over the full d=2 pattern set.
        for g in enumerate_regular_graphs(2, &Pattern::all(2)).unwrap() {
            for r in g.nodes() {
                if r.is_full() {
                    continue;
                }
                let count = g.enumerate_paths(r).unwrap().len();
                let mut expected = 0;
                for q in g.parents_of(r).unwrap() {
                    if q.is_full() {
                        expected += 1;
                    } else {
                        expected += g.enumerate_paths(&q).unwrap().len();
                    }
                }
                assert_eq!(count, expected, "graph {g:?} node {r}");
            }
        }
    }
}

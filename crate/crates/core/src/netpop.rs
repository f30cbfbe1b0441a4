//! Population graph model and file ingestion.
//!
//! Node labels from the input files are mapped to dense indices `0..N` at
//! load time. Adjacency is stored in compressed sparse row form with sorted,
//! deduplicated neighbor lists, so the hot sampling loops only touch flat
//! arrays.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetpopError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("edge list contains no edges")]
    Empty,
    #[error("attribute file row {row}: unknown node label `{label}`")]
    UnknownNode { row: usize, label: String },
    #[error("attribute file row {row}, column `{column}`: `{value}` is not numeric")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("attribute file: {0}")]
    Format(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetpopError>;

/// Counts of edge-list lines that were dropped while building a simple graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub lines: usize,
    pub duplicate_edges: usize,
    pub self_loops: usize,
}

/// Immutable simple undirected graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationGraph {
    labels: Vec<String>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edge_count: usize,
}

impl PopulationGraph {
    /// Builds a graph over `labels.len()` nodes from index pairs. Self-loops
    /// and repeated pairs are dropped and counted.
    pub fn from_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> (Self, LoadReport) {
        let n = labels.len();
        let mut report = LoadReport {
            lines: edges.len(),
            ..Default::default()
        };
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge endpoint out of range");
            if a == b {
                report.self_loops += 1;
                continue;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        let mut half_edges = 0usize;
        for list in &mut adj {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            half_edges += before - list.len();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        // each duplicate pair was removed once from each endpoint's list
        report.duplicate_edges = half_edges / 2;
        let edge_count = neighbors.len() / 2;
        (
            PopulationGraph {
                labels,
                offsets,
                neighbors,
                edge_count,
            },
            report,
        )
    }

    /// Graph with unlabeled nodes; labels are the decimal indices.
    pub fn from_index_edges(n: usize, edges: &[(usize, usize)]) -> (Self, LoadReport) {
        Self::from_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Builds a fresh label lookup. Not cached: only ingestion paths need it.
    pub fn label_index(&self) -> HashMap<&str, usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    /// Every undirected edge once, as `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .copied()
                .filter(move |&b| a < b)
                .map(move |b| (a, b))
        })
    }

    /// Connected component id per node, numbered in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Returns a copy with extra isolated nodes appended for each label not
    /// already present.
    pub fn with_isolated<'a>(&self, extra: impl IntoIterator<Item = &'a str>) -> Self {
        let mut labels = self.labels.clone();
        let known = self.label_index();
        let mut added: HashMap<&str, ()> = HashMap::new();
        for l in extra {
            if !known.contains_key(l) && added.insert(l, ()).is_none() {
                labels.push(l.to_string());
            }
        }
        let mut offsets = self.offsets.clone();
        let last = *offsets.last().unwrap();
        offsets.resize(labels.len() + 1, last);
        PopulationGraph {
            labels,
            offsets,
            neighbors: self.neighbors.clone(),
            edge_count: self.edge_count,
        }
    }

    /// Writes the graph as a whitespace-separated edge list.
    pub fn write_edges<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (a, b) in self.edges() {
            writeln!(out, "{} {}", self.labels[a], self.labels[b])?;
        }
        Ok(())
    }
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let mut parts = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty());
    let a = parts.next()?;
    let b = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    Some((a, b))
}

/// Reads a line-oriented edge list. Labels may be any token; `#` lines and
/// blank lines are skipped.
pub fn load_edges<R: BufRead>(source: R) -> Result<(PopulationGraph, LoadReport)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |label: &str, labels: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(label) {
            return i;
        }
        let i = labels.len();
        labels.push(label.to_string());
        index.insert(label.to_string(), i);
        i
    };
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (a, b) = split_pair(trimmed).ok_or_else(|| NetpopError::Parse {
            line: lineno + 1,
            message: format!("expected two node labels, got `{trimmed}`"),
        })?;
        let ia = intern(a, &mut labels);
        let ib = intern(b, &mut labels);
        edges.push((ia, ib));
    }
    if edges.is_empty() {
        return Err(NetpopError::Empty);
    }
    Ok(PopulationGraph::from_edges(labels, &edges))
}

/// Derived per-node variables computed from the graph itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivedVariable {
    Degree,
    Deg2Plus,
}

impl DerivedVariable {
    pub fn name(self) -> &'static str {
        match self {
            DerivedVariable::Degree => "degree",
            DerivedVariable::Deg2Plus => "deg2plus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "degree" => Some(DerivedVariable::Degree),
            "deg2plus" => Some(DerivedVariable::Deg2Plus),
            _ => None,
        }
    }

    /// Value for a node of the given degree.
    pub fn value(self, degree: usize) -> f64 {
        match self {
            DerivedVariable::Degree => degree as f64,
            DerivedVariable::Deg2Plus => f64::from(u8::from(degree >= 2)),
        }
    }
}

pub fn derived_variable(graph: &PopulationGraph, kind: DerivedVariable) -> Vec<f64> {
    (0..graph.node_count())
        .map(|i| kind.value(graph.degree(i)))
        .collect()
}

/// Per-node numeric attributes, one column per variable. Nodes missing from
/// the source file hold 0 in every column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttributeTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl AttributeTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), columns.len());
        AttributeTable { names, columns }
    }

    /// Table with no variables.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn is_binary(&self, name: &str) -> bool {
        self.column(name)
            .is_some_and(|c| c.iter().all(|&v| v == 0.0 || v == 1.0))
    }

    /// Population mean of a variable.
    pub fn mean(&self, name: &str) -> Option<f64> {
        self.column(name)
            .map(|c| c.iter().sum::<f64>() / c.len().max(1) as f64)
    }

    /// Writes the table as CSV keyed by the graph's node labels.
    pub fn write_csv<W: Write>(&self, graph: &PopulationGraph, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for node in 0..graph.node_count() {
            let mut rec = vec![graph.label(node).to_string()];
            rec.extend(self.columns.iter().map(|c| format_number(c[node])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Column value for either a stored attribute or a derived variable.
pub fn variable_values(
    graph: &PopulationGraph,
    attrs: &AttributeTable,
    name: &str,
) -> Result<Vec<f64>> {
    if let Some(col) = attrs.column(name) {
        return Ok(col.to_vec());
    }
    DerivedVariable::from_name(name)
        .map(|kind| derived_variable(graph, kind))
        .ok_or_else(|| NetpopError::UnknownVariable(name.to_string()))
}

struct RawAttributes {
    names: Vec<String>,
    rows: Vec<(usize, String, Vec<Option<f64>>)>,
}

fn read_attribute_rows<R: std::io::Read>(source: R) -> Result<RawAttributes> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(NetpopError::Format("missing header row".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // row numbers count the header as row 1
        let row = i + 2;
        let record = record?;
        let label = record.get(0).unwrap_or_default().to_string();
        let mut values = Vec::with_capacity(names.len());
        for (col, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                values.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| NetpopError::NonNumeric {
                row,
                column: names[col].clone(),
                value: cell.to_string(),
            })?;
            values.push(Some(v));
        }
        rows.push((row, label, values));
    }
    Ok(RawAttributes { names, rows })
}

fn build_table(raw: RawAttributes, graph: &PopulationGraph) -> Result<AttributeTable> {
    let index = graph.label_index();
    let n = graph.node_count();
    let mut columns = vec![vec![0.0; n]; raw.names.len()];
    for (row, label, values) in raw.rows {
        let node = *index
            .get(label.as_str())
            .ok_or_else(|| NetpopError::UnknownNode {
                row,
                label: label.clone(),
            })?;
        for (col, v) in values.into_iter().enumerate() {
            columns[col][node] = v.unwrap_or(0.0);
        }
    }
    Ok(AttributeTable::new(raw.names, columns))
}

/// Reads a CSV attribute file for an already loaded graph. Every row label
/// must name a graph node; empty or `NA` cells become 0.
pub fn load_attributes<R: std::io::Read>(
    source: R,
    graph: &PopulationGraph,
) -> Result<AttributeTable> {
    build_table(read_attribute_rows(source)?, graph)
}

/// Loads an edge list and an attribute file together. Labels present only
/// in the attribute file become isolated nodes.
pub fn load_population<E: BufRead, A: std::io::Read>(
    edges: E,
    attributes: A,
) -> Result<(PopulationGraph, AttributeTable, LoadReport)> {
    let (graph, report) = load_edges(edges)?;
    let raw = read_attribute_rows(attributes)?;
    let graph = graph.with_isolated(raw.rows.iter().map(|(_, l, _)| l.as_str()));
    let table = build_table(raw, &graph)?;
    Ok((graph, table, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> (PopulationGraph, LoadReport) {
        load_edges(text.as_bytes()).unwrap()
    }

    #[test]
    fn duplicates_and_self_loops_dropped() {
        let (g, report) = load("a b\nb a\na a\n");
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(report.duplicate_edges, 1);
        assert_eq!(report.self_loops, 1);
    }

    #[test]
    fn triangle_degrees() {
        let (g, _) = load("1 2\n2 3\n3 1\n");
        assert!((0..3).all(|i| g.degree(i) == 2));
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn comma_separators_and_comments() {
        let (g, _) = load("# header\nx,y\n\ny , z\n");
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = load_edges("a b\nc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NetpopError::Parse { line: 2, .. }), "{err}");
        let err = load_edges("a b c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NetpopError::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_source_rejected() {
        assert!(matches!(
            load_edges("# nothing\n".as_bytes()),
            Err(NetpopError::Empty)
        ));
    }

    #[test]
    fn path_and_star_derived_variables() {
        let (g, _) = load("1 2\n2 3\n");
        assert_eq!(derived_variable(&g, DerivedVariable::Degree), vec![1.0, 2.0, 1.0]);
        assert_eq!(derived_variable(&g, DerivedVariable::Deg2Plus), vec![0.0, 1.0, 0.0]);

        let (g, _) = load("c l1\nc l2\nc l3\nc l4\n");
        let deg = derived_variable(&g, DerivedVariable::Degree);
        assert_eq!(deg[0], 4.0);
        assert!(deg[1..].iter().all(|&d| d == 1.0));
    }

    #[test]
    fn attributes_missing_nodes_get_zero() {
        let (g, _) = load("a b\nb c\n");
        let attrs = load_attributes("node,x,y\na,1,2.5\nc,,1\n".as_bytes(), &g).unwrap();
        assert_eq!(attrs.column("x").unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(attrs.column("y").unwrap(), &[2.5, 0.0, 1.0]);
        assert!(attrs.is_binary("x"));
        assert!(!attrs.is_binary("y"));
    }

    #[test]
    fn all_ones_column_has_unit_mean() {
        let (g, _) = load("a b\nb c\n");
        let attrs = load_attributes("node,one\na,1\nb,1\nc,1\n".as_bytes(), &g).unwrap();
        assert_eq!(attrs.mean("one"), Some(1.0));
    }

    #[test]
    fn attribute_errors_carry_location() {
        let (g, _) = load("a b\n");
        let err = load_attributes("node,x\nzz,1\n".as_bytes(), &g).unwrap_err();
        assert!(matches!(err, NetpopError::UnknownNode { row: 2, .. }));
        let err = load_attributes("node,x\na,1\nb,oops\n".as_bytes(), &g).unwrap_err();
        match err {
            NetpopError::NonNumeric { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn roster_admits_isolated_nodes() {
        let (g, attrs, _) =
            load_population("a b\n".as_bytes(), "node,x\na,1\nlonely,1\n".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.degree(2), 0);
        assert_eq!(g.label(2), "lonely");
        assert_eq!(attrs.column("x").unwrap(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn components_are_labelled() {
        let (g, _) = load("a b\nc d\nd e\n");
        assert_eq!(g.components(), vec![0, 0, 1, 1, 1]);
    }
}

//! Reading and writing graphs, trees, samples and result tables.
//!
//! Every reader reports malformed input as [`Error::Parse`] with the
//! offending line number.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::EstimateReport;
use crate::experiment::{DiagnosticDataset, Figure1Row, RmseTable};
use crate::format::{csv_number, json_number};
use crate::netmodel::WeightedGraph;
use crate::referral::ReferralTree;
use crate::sampler::RdsSample;

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), line, message: message.into() }
}

/// Header plus data rows, each tagged with its 1-based line number.
struct Table {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn read_csv(text: &str, path: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn require_header(table: &Table, expected: &[&str], path: &str) -> Result<()> {
    if table.header.len() < expected.len() || table.header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(path, 1, format!("expected header \"{}\"", expected.join(","))));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(value: &str, what: &str, path: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} \"{value}\"")))
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

/// Edge list: either CSV with header `source,target[,weight]`, or
/// whitespace-separated `i j [w]` lines. Node ids are 0-based; the graph has
/// `max(id) + 1` nodes, or `min_nodes` if larger.
pub fn parse_edge_list(text: &str, path: &str, min_nodes: usize) -> Result<WeightedGraph> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let mut edges = Vec::new();
    if first.contains(',') {
        let table = read_csv(text, path)?;
        require_header(&table, &["source", "target"], path)?;
        let weighted = table.column("weight") == Some(2);
        for (line, row) in &table.rows {
            let i: usize = field(&row[0], "source", path, *line)?;
            let j: usize = field(&row[1], "target", path, *line)?;
            let w: f64 = if weighted { field(&row[2], "weight", path, *line)? } else { 1.0 };
            edges.push((i, j, w, *line));
        }
    } else {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') || l.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = l.split_whitespace().collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(parse_err(path, line, "expected \"source target [weight]\""));
            }
            let i: usize = field(parts[0], "source", path, line)?;
            let j: usize = field(parts[1], "target", path, line)?;
            let w: f64 = match parts.get(2) {
                Some(w) => field(w, "weight", path, line)?,
                None => 1.0,
            };
            edges.push((i, j, w, line));
        }
    }
    let n = edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0).max(min_nodes);
    let mut seen = std::collections::HashSet::new();
    for &(i, j, w, line) in &edges {
        if !(w > 0.0 && w.is_finite()) {
            return Err(parse_err(path, line, format!("weight {w} must be positive")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(parse_err(path, line, format!("duplicate edge {i}-{j}")));
        }
    }
    WeightedGraph::from_edges(n, edges.into_iter().map(|(i, j, w, _)| (i, j, w)))
}

pub fn read_edge_list(path: &Path, min_nodes: usize) -> Result<WeightedGraph> {
    parse_edge_list(&read_text(path)?, &label(path), min_nodes)
}

pub fn edge_list_csv(graph: &WeightedGraph) -> String {
    let mut out = String::from("source,target,weight\n");
    for (i, j, w) in graph.edges() {
        out.push_str(&format!("{i},{j},{}\n", csv_number(w)));
    }
    out
}

/// Per-node attributes: an optional integer `block` column and any number
/// of numeric columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeAttributes {
    pub block: Option<Vec<usize>>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl NodeAttributes {
    pub fn len(&self) -> usize {
        self.block
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.columns.first().map(|c| c.1.len()))
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }
}

/// Attribute CSV: header starting with `node`, rows for nodes `0..N` in order.
pub fn parse_attributes(text: &str, path: &str) -> Result<NodeAttributes> {
    let table = read_csv(text, path)?;
    require_header(&table, &["node"], path)?;
    let block_col = table.column("block");
    let names: Vec<(usize, String)> = table
        .header
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, _)| Some(*i) != block_col)
        .map(|(i, h)| (i, h.clone()))
        .collect();
    let mut block = block_col.map(|_| Vec::with_capacity(table.rows.len()));
    let mut columns: Vec<(String, Vec<f64>)> = names.iter().map(|(_, h)| (h.clone(), Vec::new())).collect();
    for (expected, (line, row)) in table.rows.iter().enumerate() {
        let node: usize = field(&row[0], "node", path, *line)?;
        if node != expected {
            return Err(parse_err(path, *line, format!("expected node {expected}, found {node}")));
        }
        if let (Some(b), Some(c)) = (block.as_mut(), block_col) {
            b.push(field(&row[c], "block", path, *line)?);
        }
        for ((i, name), col) in names.iter().zip(columns.iter_mut()) {
            col.1.push(field(&row[*i], name, path, *line)?);
        }
    }
    Ok(NodeAttributes { block, columns })
}

pub fn read_attributes(path: &Path) -> Result<NodeAttributes> {
    parse_attributes(&read_text(path)?, &label(path))
}

pub fn attributes_csv(attrs: &NodeAttributes) -> String {
    let mut out = String::from("node");
    if attrs.block.is_some() {
        out.push_str(",block");
    }
    for (name, _) in &attrs.columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..attrs.len() {
        out.push_str(&i.to_string());
        if let Some(b) = &attrs.block {
            out.push_str(&format!(",{}", b[i]));
        }
        for (_, col) in &attrs.columns {
            out.push(',');
            out.push_str(&csv_number(col[i]));
        }
        out.push('\n');
    }
    out
}

fn parse_parent(value: &str, path: &str, line: usize) -> Result<Option<usize>> {
    let p: i64 = field(value, "parent", path, line)?;
    match p {
        -1 => Ok(None),
        p if p >= 0 => Ok(Some(p as usize)),
        _ => Err(parse_err(path, line, format!("invalid parent {p}"))),
    }
}

fn parents_from(table: &Table, path: &str) -> Result<Vec<Option<usize>>> {
    let mut parents = Vec::with_capacity(table.rows.len());
    for (expected, (line, row)) in table.rows.iter().enumerate() {
        let node: usize = field(&row[0], "node", path, *line)?;
        if node != expected {
            return Err(parse_err(path, *line, format!("expected node {expected}, found {node}")));
        }
        let parent = parse_parent(&row[1], path, *line)?;
        match parent {
            None if node != 0 => return Err(parse_err(path, *line, "only node 0 may be the root")),
            Some(_) if node == 0 => return Err(parse_err(path, *line, "node 0 must have parent -1")),
            Some(p) if p >= node => return Err(parse_err(path, *line, "parents must precede children")),
            _ => {}
        }
        parents.push(parent);
    }
    if parents.is_empty() {
        return Err(parse_err(path, 1, "no rows"));
    }
    Ok(parents)
}

/// Tree CSV: `node,parent`, root parent `-1`.
pub fn parse_tree(text: &str, path: &str) -> Result<ReferralTree> {
    let table = read_csv(text, path)?;
    require_header(&table, &["node", "parent"], path)?;
    ReferralTree::from_parents(parents_from(&table, path)?)
}

pub fn read_tree(path: &Path) -> Result<ReferralTree> {
    parse_tree(&read_text(path)?, &label(path))
}

fn parent_field(tree: &ReferralTree, tau: usize) -> String {
    tree.parent(tau).map_or("-1".to_string(), |p| p.to_string())
}

pub fn tree_csv(tree: &ReferralTree) -> String {
    let mut out = String::from("node,parent\n");
    for tau in 0..tree.len() {
        out.push_str(&format!("{tau},{}\n", parent_field(tree, tau)));
    }
    out
}

/// Sample CSV: `node,parent,pop_node,y,degree,block`; `block` may be empty
/// on every row.
pub fn parse_sample(text: &str, path: &str) -> Result<RdsSample> {
    let table = read_csv(text, path)?;
    require_header(&table, &["node", "parent", "pop_node", "y", "degree", "block"], path)?;
    let parents = parents_from(&table, path)?;
    let mut node = Vec::new();
    let mut y = Vec::new();
    let mut degree = Vec::new();
    let mut block = Vec::new();
    for (line, row) in &table.rows {
        node.push(field(&row[2], "pop_node", path, *line)?);
        y.push(field(&row[3], "y", path, *line)?);
        degree.push(field(&row[4], "degree", path, *line)?);
        block.push(if row[5].is_empty() { None } else { Some(field::<usize>(&row[5], "block", path, *line)?) });
    }
    let block = match block.iter().filter(|b| b.is_some()).count() {
        0 => None,
        c if c == block.len() => Some(block.into_iter().map(Option::unwrap).collect()),
        _ => {
            let tau = block.iter().position(Option::is_none).unwrap_or(0);
            return Err(Error::MissingLabel { node: tau });
        }
    };
    RdsSample::new(ReferralTree::from_parents(parents)?, node, y, degree, block)
}

pub fn read_sample(path: &Path) -> Result<RdsSample> {
    parse_sample(&read_text(path)?, &label(path))
}

pub fn sample_csv(sample: &RdsSample) -> String {
    let mut out = String::from("node,parent,pop_node,y,degree,block\n");
    for tau in 0..sample.len() {
        let block = sample.block.as_ref().map_or(String::new(), |b| b[tau].to_string());
        out.push_str(&format!(
            "{tau},{},{},{},{},{block}\n",
            parent_field(&sample.tree, tau),
            sample.node[tau],
            csv_number(sample.outcome[tau]),
            csv_number(sample.degree[tau]),
        ));
    }
    out
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn json_array(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|&v| json_number(v)).collect();
    format!("[{}]", items.join(", "))
}

/// JSON object with keys `estimator, mu_hat, eigenvalues, beta2, nugget,
/// rse, n, K, warnings`.
pub fn report_json(report: &EstimateReport) -> String {
    let warnings: Vec<String> = report.warnings.iter().map(|w| json_string(w)).collect();
    let fields = [
        ("estimator", json_string(&report.estimator)),
        ("mu_hat", json_number(report.mu_hat)),
        ("eigenvalues", json_array(&report.eigenvalues)),
        ("beta2", json_array(&report.beta2)),
        ("nugget", json_number(report.nugget)),
        ("rse", report.rse.map_or("null".into(), json_number)),
        ("n", report.n.to_string()),
        ("K", report.k.map_or("null".into(), |k| k.to_string())),
        ("warnings", format!("[{}]", warnings.join(", "))),
    ];
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("  \"{k}\": {v}")).collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

pub fn diagnostics_csv(data: &DiagnosticDataset) -> String {
    let variant = data.variant.name();
    let mut out = String::from("estimator,lambda_hat,rse,variant\n");
    for p in &data.points {
        out.push_str(&format!("{},{},{},{variant}\n", p.estimator, csv_number(p.lambda_hat), csv_number(p.rse)));
    }
    for &(l, r) in &data.curve {
        out.push_str(&format!("ranktwo_curve,{},{},{variant}\n", csv_number(l), csv_number(r)));
    }
    out
}

pub fn rmse_csv(table: &RmseTable) -> String {
    let mut out = String::from("estimator,n,outcome,rmse,bias,sd,replicates,failures\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.estimator,
            r.n,
            r.outcome,
            csv_number(r.rmse),
            csv_number(r.bias),
            csv_number(r.sd),
            r.replicates,
            r.failures
        ));
    }
    out
}

pub fn figure1_csv(rows: &[Figure1Row]) -> String {
    let mut out = String::from("p,levels,n,var_gls,var_mean,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_number(r.p),
            r.levels,
            r.n,
            csv_number(r.var_gls),
            csv_number(r.var_mean),
            csv_number(r.ratio)
        ));
    }
    out
}

/// Square referral-count matrix. The header row names the blocks; each data
/// row may start with a non-numeric label, e.g. `recruiter,B,W,H` followed
/// by `B,5,5,2`.
pub fn parse_counts(text: &str, path: &str) -> Result<DMatrix<f64>> {
    let table = read_csv(text, path)?;
    let k = table.rows.len();
    if k == 0 {
        return Err(parse_err(path, 1, "no rows"));
    }
    let mut values = Vec::with_capacity(k * k);
    for (line, row) in &table.rows {
        let cells = match row.first() {
            Some(first) if first.parse::<f64>().is_err() => &row[1..],
            _ => &row[..],
        };
        if cells.len() != k {
            return Err(parse_err(path, *line, format!("expected {k} counts, found {}", cells.len())));
        }
        for c in cells {
            let v: f64 = field(c, "count", path, *line)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(parse_err(path, *line, format!("count {v} must be nonnegative")));
            }
            values.push(v);
        }
    }
    Ok(DMatrix::from_row_slice(k, k, &values))
}

pub fn read_counts(path: &Path) -> Result<DMatrix<f64>> {
    parse_counts(&read_text(path)?, &label(path))
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, contents)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_matrix() {
        let m = parse_counts("recruiter,B,W\nB,5,2\nW,1,7\n", "c.csv").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[5.0, 2.0, 1.0, 7.0]));
        let m = parse_counts("a,b\n1,2\n3,4\n", "c.csv").unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert!(matches!(parse_counts("a,b\n1,2\n3\n", "c.csv"), Err(Error::Parse { line: 3, .. })));
        assert!(parse_counts("a,b\n1,-2\n3,4\n", "c.csv").is_err());
    }

    #[test]
    fn edge_list_formats() {
        let csv = "source,target,weight\n0,1,2.5\n1,2,1\n";
        let g = parse_edge_list(csv, "e.csv", 0).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.weight(0, 1), 2.5);
        let ws = "# comment\n0 1\n1 2\n\n2 3\n";
        let g = parse_edge_list(ws, "e.txt", 6).unwrap();
        assert_eq!(g.num_nodes(), 6);
        assert_eq!(g.num_edges(), 3);
        let round = parse_edge_list(&edge_list_csv(&g), "x", 6).unwrap();
        assert_eq!(round, g);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_edge_list("source,target\n0,1\n1,x\n", "e.csv", 0) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_edge_list("0 1\n0 1\n", "e.txt", 0) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_tree("node,parent\n0,-1\n1,0\n2,5\n", "t.csv") {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_tree("node,parent\n0,0\n", "t.csv").is_err());
        assert!(parse_tree("a,b\n0,-1\n", "t.csv").is_err());
    }

    #[test]
    fn tree_round_trip() {
        let tree = crate::referral::complete_binary_tree(4).unwrap();
        assert_eq!(parse_tree(&tree_csv(&tree), "t").unwrap(), tree);
    }

    #[test]
    fn sample_round_trip() {
        let tree = ReferralTree::path(3).unwrap();
        let s = RdsSample::new(tree, vec![4, 2, 9], vec![1.0, 0.25, 0.0], vec![3.0, 1.0, 2.0], Some(vec![0, 1, 1])).unwrap();
        assert_eq!(parse_sample(&sample_csv(&s), "s").unwrap(), s);
        let mut unlabeled = s.clone();
        unlabeled.block = None;
        assert_eq!(parse_sample(&sample_csv(&unlabeled), "s").unwrap(), unlabeled);
        let partial = "node,parent,pop_node,y,degree,block\n0,-1,0,1,1,0\n1,0,1,1,1,\n";
        assert!(matches!(parse_sample(partial, "s"), Err(Error::MissingLabel { node: 1 })));
    }

    #[test]
    fn attributes_round_trip() {
        let attrs = NodeAttributes {
            block: Some(vec![0, 2, 1]),
            columns: vec![("y".into(), vec![1.0, 0.0, 0.5]), ("theta".into(), vec![0.1, 0.2, 0.3])],
        };
        let parsed = parse_attributes(&attributes_csv(&attrs), "a").unwrap();
        assert_eq!(parsed, attrs);
        assert_eq!(parsed.column("theta"), Some(&[0.1, 0.2, 0.3][..]));
    }

    #[test]
    fn report_json_shape() {
        let r = crate::estimators::vh_estimator(&[1.0, 0.0], &[1.0, 2.0]).unwrap();
        let json = report_json(&r);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["estimator", "mu_hat", "eigenvalues", "beta2", "nugget", "rse", "n", "K", "warnings"] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(v["mu_hat"].as_f64().unwrap(), 2.0 / 3.0);
    }
}

//! Text formats: whitespace edge lists, `node,label` CSV, dense feature CSV
//! and `node,split` CSV.
//!
//! Edge lists carry one `src dst` pair per line; anything after `#` is a
//! comment. CSV readers skip a leading header row when its first field is
//! not numeric.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, LabeledNodes};

fn ingest_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Raw `(line number, src, dst)` triples from an edge-list file, plus the
/// node count declared by a `# nodes N ...` header if there is one.
fn read_pairs(path: &Path) -> Result<(Vec<(usize, u64, u64)>, Option<usize>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut declared = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let (body, comment) = line.split_once('#').unwrap_or((&line, ""));
        let body = body.trim();
        if idx == 0 {
            let mut words = comment.split_whitespace();
            if words.next() == Some("nodes") {
                let n = words.next().and_then(|w| w.parse().ok());
                declared =
                    Some(n.ok_or_else(|| ingest_err(path, lineno, "malformed `# nodes` header"))?);
            }
        }
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(ingest_err(path, lineno, "expected exactly two node ids"));
        };
        let parse = |t: &str| {
            t.parse::<u64>()
                .map_err(|_| ingest_err(path, lineno, format!("invalid node id `{t}`")))
        };
        out.push((lineno, parse(a)?, parse(b)?));
    }
    Ok((out, declared))
}

/// Read an edge list with dense 0-based ids. Without `num_nodes` the node
/// count comes from a leading `# nodes N` header (as written by
/// [`write_edge_list`]) or else is `max id + 1`.
pub fn read_edge_list(path: impl AsRef<Path>, num_nodes: Option<usize>) -> Result<DirectedGraph> {
    let path = path.as_ref();
    let (raw, declared) = read_pairs(path)?;
    let n = match num_nodes.or(declared) {
        Some(n) => n,
        None => raw
            .iter()
            .map(|&(_, a, b)| a.max(b) as usize + 1)
            .max()
            .unwrap_or(0),
    };
    let mut pairs = Vec::with_capacity(raw.len());
    for (lineno, a, b) in raw {
        let (a, b) = (a as usize, b as usize);
        if a >= n || b >= n {
            return Err(ingest_err(
                path,
                lineno,
                format!("edge ({a}, {b}) out of range for {n} nodes"),
            ));
        }
        pairs.push((a, b));
    }
    DirectedGraph::from_edge_list(&pairs, n)
}

/// Read an edge list with arbitrary integer ids, compacting them to
/// `0..k` in ascending id order. Returns the graph and the original id of
/// every dense node.
pub fn read_edge_list_remapped(path: impl AsRef<Path>) -> Result<(DirectedGraph, Vec<u64>)> {
    let (raw, _) = read_pairs(path.as_ref())?;
    let mut ids: Vec<u64> = raw.iter().flat_map(|&(_, a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let index = |id: u64| ids.binary_search(&id).expect("id collected above");
    let pairs: Vec<_> = raw.iter().map(|&(_, a, b)| (index(a), index(b))).collect();
    let graph = DirectedGraph::from_edge_list(&pairs, ids.len())?;
    Ok((graph, ids))
}

pub fn write_edge_list(graph: &DirectedGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "# nodes {} edges {}",
        graph.num_nodes(),
        graph.num_edges()
    )?;
    for (i, j) in graph.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn is_header(record: &csv::StringRecord, row: usize) -> bool {
    row == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err())
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

/// Read `node,label` rows. Every node in `0..num_nodes` must appear exactly
/// once; with `num_nodes = None` the count is inferred from the largest id.
pub fn read_labels(
    path: impl AsRef<Path>,
    num_nodes: Option<usize>,
    num_classes: Option<usize>,
) -> Result<LabeledNodes> {
    let path = path.as_ref();
    let mut rows: Vec<(usize, usize, usize)> = Vec::new();
    for (row, record) in csv_reader(path)?.records().enumerate() {
        let record = record?;
        if is_header(&record, row) {
            continue;
        }
        let line = record_line(&record, row + 1);
        if record.len() != 2 {
            return Err(ingest_err(path, line, "expected `node,label`"));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| ingest_err(path, line, format!("invalid integer `{t}`")))
        };
        rows.push((line, parse(&record[0])?, parse(&record[1])?));
    }
    let n = num_nodes.unwrap_or_else(|| rows.iter().map(|r| r.1 + 1).max().unwrap_or(0));
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (line, node, label) in rows {
        if node >= n {
            return Err(ingest_err(
                path,
                line,
                format!("node {node} out of range for {n} nodes"),
            ));
        }
        if labels[node].replace(label).is_some() {
            return Err(ingest_err(
                path,
                line,
                format!("node {node} labelled twice"),
            ));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| ingest_err(path, 0, format!("node {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    LabeledNodes::new(labels, num_classes)
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "node,label")?;
    for (i, y) in labels.iter().enumerate() {
        writeln!(w, "{i},{y}")?;
    }
    w.flush()?;
    Ok(())
}

/// Dense feature matrix, row `i` belongs to node `i`.
pub fn read_features(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (row, record) in csv_reader(path)?.records().enumerate() {
        let record = record?;
        if is_header(&record, row) {
            continue;
        }
        let line = record_line(&record, row + 1);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(ingest_err(
                    path,
                    line,
                    format!("row has {} columns, expected {w}", record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| ingest_err(path, line, format!("invalid number `{field}`")))?;
            if !v.is_finite() {
                return Err(ingest_err(path, line, "non-finite feature value"));
            }
            values.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width.unwrap_or(0)), values)
        .map_err(|e| Error::shape(e.to_string()))
}

pub fn write_features(features: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in features.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Node index sets of a train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Read `node,split` rows where split is `train`, `val` or `test`.
/// Nodes may be omitted (they then take no part in training or evaluation).
pub fn read_split(path: impl AsRef<Path>, num_nodes: usize) -> Result<Split> {
    let path = path.as_ref();
    let mut split = Split::default();
    let mut seen = vec![false; num_nodes];
    for (row, record) in csv_reader(path)?.records().enumerate() {
        let record = record?;
        if is_header(&record, row) {
            continue;
        }
        let line = record_line(&record, row + 1);
        if record.len() != 2 {
            return Err(ingest_err(path, line, "expected `node,split`"));
        }
        let node: usize = record[0]
            .parse()
            .map_err(|_| ingest_err(path, line, format!("invalid node `{}`", &record[0])))?;
        if node >= num_nodes {
            return Err(ingest_err(path, line, format!("node {node} out of range")));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(ingest_err(
                path,
                line,
                format!("node {node} assigned twice"),
            ));
        }
        match &record[1] {
            "train" => split.train.push(node),
            "val" | "valid" | "validation" => split.val.push(node),
            "test" => split.test.push(node),
            other => return Err(ingest_err(path, line, format!("unknown split `{other}`"))),
        }
    }
    Ok(split)
}

pub fn write_split(split: &Split, path: impl AsRef<Path>) -> Result<()> {
    let mut rows: Vec<(usize, &str)> = split
        .train
        .iter()
        .map(|&i| (i, "train"))
        .chain(split.val.iter().map(|&i| (i, "val")))
        .chain(split.test.iter().map(|&i| (i, "test")))
        .collect();
    rows.sort_unstable();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "node,split")?;
    for (i, s) in rows {
        writeln!(w, "{i},{s}")?;
    }
    w.flush()?;
    Ok(())
}

//! Dataset loading: the `.content`/`.cites` citation layout, the canonical
//! `GCT1` text format and a converter from loose TSV/CSV files.
//!
//! Canonical layout:
//!
//! ```text
//! GCT1 <n> <m> <d> <k>
//! # optional comment lines
//! <n feature lines, d space-separated reals each>
//! <one line of n labels>
//! <m lines `u v w`>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;

pub const DATA_DIR_ENV: &str = "GRAPHCLUST_DATA";
pub const BUNDLED: [&str; 3] = ["cora", "citeseer", "uat"];
const MAGIC: &str = "GCT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Citations dropped because an endpoint was missing from the content file.
    pub dangling_citations: usize,
    /// Free-text header comments, preserved through the canonical format.
    pub comments: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if n == 0 {
            return Err(Error::Format("empty dataset".into()));
        }
        if features.rows() != n {
            return Err(Error::Format(format!("{} feature rows for {n} nodes", features.rows())));
        }
        if labels.len() != n {
            return Err(Error::Format(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Format(format!("label {bad} outside [0, {num_classes})")));
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
            dangling_citations: 0,
            comments: Vec::new(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// Induced sub-dataset on `nodes`, keeping the class count.
    pub fn subset(&self, nodes: &[usize]) -> Result<Self> {
        let mut ds = Self::new(
            format!("{}-subset", self.name),
            self.graph.subgraph(nodes),
            self.features.select_rows(nodes),
            nodes.iter().map(|&v| self.labels[v]).collect(),
            self.num_classes,
        )?;
        ds.comments = self.comments.clone();
        Ok(ds)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Parses the classic citation layout.
///
/// Content lines are `id f_1 .. f_d class`; cites lines are `cited citing`.
/// Ids are remapped densely in content order and classes are numbered by
/// first appearance. Citations naming an unknown id are dropped and counted.
pub fn parse_content_format(content_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let content = fs::read_to_string(content_path)?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut classes: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut feats = Vec::new();
    let mut dim = None;

    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 2 {
            return Err(parse_err(content_path, lineno, "expected `id features.. class`"));
        }
        let d = toks.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(
                    content_path,
                    lineno,
                    format!("{d} features, earlier lines had {expected}"),
                ))
            }
            _ => {}
        }
        let id = toks[0].to_string();
        if index.contains_key(&id) {
            return Err(parse_err(content_path, lineno, format!("duplicate node id `{id}`")));
        }
        index.insert(id, labels.len());
        for t in &toks[1..toks.len() - 1] {
            let v: f64 = t
                .parse()
                .map_err(|_| parse_err(content_path, lineno, format!("bad feature value `{t}`")))?;
            feats.push(v);
        }
        let next = classes.len();
        labels.push(*classes.entry(toks[toks.len() - 1].to_string()).or_insert(next));
    }

    let n = labels.len();
    let cites = fs::read_to_string(cites_path)?;
    let mut edges = Vec::new();
    let mut dangling = 0;
    for (i, line) in cites.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            [a, b] => match (index.get(*a), index.get(*b)) {
                (Some(&u), Some(&v)) => edges.push((u, v, 1.0)),
                _ => dangling += 1,
            },
            _ => return Err(parse_err(cites_path, i + 1, "expected two ids")),
        }
    }

    let features = DenseMatrix::from_vec(n, dim.unwrap_or(0), feats)?;
    let graph = Graph::build(&edges, n)?;
    let mut ds = Dataset::new(stem(content_path), graph, features, labels, classes.len())?;
    ds.dangling_citations = dangling;
    Ok(ds)
}

/// Reads a canonical `GCT1` file.
pub fn load_canonical(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut comments = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        if let Some(c) = l.strip_prefix('#') {
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            false
        } else {
            true
        }
    });

    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.first() != Some(&MAGIC) {
        return Err(Error::Format(format!(
            "unsupported format version `{}`, expected {MAGIC}",
            h.first().unwrap_or(&"")
        )));
    }
    if h.len() != 5 {
        return Err(parse_err(path, 1, "header must be `GCT1 <n> <m> <d> <k>`"));
    }
    let dims: Vec<usize> = h[1..]
        .iter()
        .map(|t| t.parse().map_err(|_| parse_err(path, 1, format!("bad header field `{t}`"))))
        .collect::<Result<_>>()?;
    let (n, m, d, k) = (dims[0], dims[1], dims[2], dims[3]);
    if n == 0 {
        return Err(Error::Format("empty dataset".into()));
    }

    let mut next_line = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Format(format!("file ends before {what}")))
    };

    let mut feats = Vec::with_capacity(n * d);
    for row in 0..n {
        let (i, line) = next_line(&format!("feature row {row}"))?;
        let before = feats.len();
        for t in line.split_whitespace() {
            feats.push(
                t.parse::<f64>()
                    .map_err(|_| parse_err(path, i + 1, format!("bad feature value `{t}`")))?,
            );
        }
        if feats.len() - before != d {
            return Err(parse_err(path, i + 1, format!("{} features, header says {d}", feats.len() - before)));
        }
    }

    let (i, line) = next_line("label line")?;
    let labels: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(path, i + 1, format!("bad label `{t}`"))))
        .collect::<Result<_>>()?;
    if labels.len() != n {
        return Err(parse_err(path, i + 1, format!("{} labels, header says {n}", labels.len())));
    }

    let mut edges = Vec::with_capacity(m);
    for e in 0..m {
        let (i, line) = next_line(&format!("edge {e}"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(path, i + 1, "edge lines are `u v w`"));
        }
        let u = toks[0].parse().map_err(|_| parse_err(path, i + 1, "bad node id"))?;
        let v = toks[1].parse().map_err(|_| parse_err(path, i + 1, "bad node id"))?;
        let w = toks[2].parse().map_err(|_| parse_err(path, i + 1, "bad weight"))?;
        edges.push((u, v, w));
    }
    if let Some((i, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(path, i + 1, format!("trailing content after {m} edges")));
    }
    drop(lines);

    let graph = Graph::build(&edges, n)?;
    if graph.num_edges() != m {
        return Err(Error::Format(format!(
            "header declares {m} edges but {} are distinct",
            graph.num_edges()
        )));
    }
    let features = DenseMatrix::from_vec(n, d, feats)?;
    let mut ds = Dataset::new(stem(path), graph, features, labels, k)?;
    ds.comments = comments;
    Ok(ds)
}

/// Canonical text for `ds`. Floats use the shortest round-trip representation.
pub fn to_canonical_string(ds: &Dataset) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{MAGIC} {} {} {} {}",
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.num_features(),
        ds.num_classes
    );
    for c in &ds.comments {
        let _ = writeln!(s, "# {c}");
    }
    for i in 0..ds.num_nodes() {
        let row: Vec<String> = ds.features.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    let labels: Vec<String> = ds.labels.iter().map(|l| l.to_string()).collect();
    s.push_str(&labels.join(" "));
    s.push('\n');
    for &(u, v, w) in ds.graph.edges() {
        let _ = writeln!(s, "{u} {v} {w}");
    }
    s
}

pub fn save_canonical(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, to_canonical_string(ds))?;
    Ok(())
}

/// Builds a dataset from loose files: a whitespace-separated edge list
/// (`u v [w]`), a feature CSV with one row per node and a label file with one
/// class string per line (or `node,class`). Lines starting with `#` are skipped.
pub fn convert_loose(
    name: &str,
    edges_path: &Path,
    features_path: &Path,
    labels_path: &Path,
) -> Result<Dataset> {
    let content_lines = |p: &Path| -> Result<Vec<(usize, String)>> {
        Ok(fs::read_to_string(p)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|(i, l)| (i + 1, l.trim().to_string()))
            .collect())
    };

    let mut feats = Vec::new();
    let mut d = None;
    let feature_rows = content_lines(features_path)?;
    for (lineno, line) in &feature_rows {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| parse_err(features_path, *lineno, format!("bad value `{t}`"))))
            .collect::<Result<_>>()?;
        if *d.get_or_insert(row.len()) != row.len() {
            return Err(parse_err(features_path, *lineno, "ragged feature row"));
        }
        feats.extend(row);
    }
    let n = feature_rows.len();

    let mut classes: HashMap<String, usize> = HashMap::new();
    let mut labels = vec![usize::MAX; n];
    let label_rows = content_lines(labels_path)?;
    for (pos, (lineno, line)) in label_rows.iter().enumerate() {
        let (node, class) = match line.split_once(',') {
            Some((a, b)) => (
                a.trim().parse::<usize>().map_err(|_| parse_err(labels_path, *lineno, "bad node id"))?,
                b.trim(),
            ),
            None => (pos, line.as_str()),
        };
        if node >= n {
            return Err(parse_err(labels_path, *lineno, format!("node {node} has no feature row")));
        }
        let next = classes.len();
        labels[node] = *classes.entry(class.to_string()).or_insert(next);
    }
    if let Some(v) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(Error::Format(format!("node {v} has no label")));
    }

    let mut edges = Vec::new();
    for (lineno, line) in content_lines(edges_path)? {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let id = |t: &str| t.parse::<usize>().map_err(|_| parse_err(edges_path, lineno, format!("bad node id `{t}`")));
        let w = match toks.len() {
            2 => 1.0,
            3 => toks[2].parse().map_err(|_| parse_err(edges_path, lineno, "bad weight"))?,
            _ => return Err(parse_err(edges_path, lineno, "expected `u v [w]`")),
        };
        edges.push((id(toks[0])?, id(toks[1])?, w));
    }

    let graph = Graph::build(&edges, n)?;
    let mut ds = Dataset::new(name, graph, DenseMatrix::from_vec(n, d.unwrap_or(0), feats)?, labels, classes.len())?;
    ds.comments.push(format!(
        "converted from {}, {}, {}",
        file_name(edges_path),
        file_name(features_path),
        file_name(labels_path)
    ));
    Ok(ds)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads a dataset from a path (canonical file or `.content` with a sibling
/// `.cites`) or from a name looked up under `$GRAPHCLUST_DATA`.
pub fn resolve(spec: &str) -> Result<Dataset> {
    let direct = Path::new(spec);
    if direct.is_file() {
        return load_path(direct);
    }
    let mut searched = Vec::new();
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            for base in [dir.join(spec), dir.join(spec).join(spec)] {
                for ext in ["gct", "content"] {
                    let p = base.with_extension(ext);
                    if p.is_file() {
                        let mut ds = load_path(&p)?;
                        ds.name = spec.to_string();
                        return Ok(ds);
                    }
                    searched.push(p.display().to_string());
                }
            }
        }
        None => searched.push(format!("${DATA_DIR_ENV} (unset)")),
    }
    Err(Error::DatasetNotFound {
        name: spec.to_string(),
        searched,
    })
}

fn load_path(p: &Path) -> Result<Dataset> {
    if p.extension().is_some_and(|e| e == "content") {
        parse_content_format(p, &p.with_extension("cites"))
    } else {
        load_canonical(p)
    }
}

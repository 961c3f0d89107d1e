//! On-disk dataset bundles and a stochastic-block-model generator.
//!
//! A bundle directory holds:
//! - `nodes.jsonl`: one `{"id", "label", "split", "text"?}` object per line
//! - `edges.csv`: `u,v` per line, referring to node ids (optional `u,v` header)
//! - `embeddings.bin`: `"EMB1"`, u32 `n`, u32 `d`, then `n * d` f32, all
//!   little-endian and row-major in `nodes.jsonl` order
//! - `meta.json` (optional): `{"domain": <template id>, "classes": K}`

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{Graph, NormAdj, Split};
use crate::models::TrainInputs;
use crate::ndmath::Matrix;

const EMB_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub graph: Graph,
    /// `n x d` node features.
    pub features: Matrix,
    pub texts: Option<Vec<String>>,
    /// Original node ids, indexed by dense node index.
    pub node_ids: Vec<String>,
    /// Prompt template id for this dataset's domain.
    pub domain: String,
}

impl DatasetBundle {
    pub fn inputs<'a>(&'a self, adj: &'a NormAdj) -> TrainInputs<'a> {
        TrainInputs { graph: &self.graph, adj, features: &self.features }
    }

    /// Text per node; nodes without text fall back to `Node <id>`.
    pub fn node_texts(&self) -> Vec<String> {
        (0..self.graph.n())
            .map(|i| match self.texts.as_ref().map(|t| t[i].as_str()) {
                Some(t) if !t.trim().is_empty() => t.to_string(),
                _ => format!("Node {}", self.node_ids[i]),
            })
            .collect()
    }

    /// `(node, label)` for every labelled training node.
    pub fn train_labelled(&self) -> Vec<(usize, usize)> {
        self.graph
            .split_nodes(Split::Train)
            .into_iter()
            .filter_map(|i| self.graph.label(i).map(|l| (i, l)))
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct NodeLine {
    id: Value,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    split: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Meta {
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    classes: Option<usize>,
}

fn id_string(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Dataset(format!("node id must be a string or number, got {other}"))),
    }
}

pub fn ingest(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();

    let meta_path = dir.join("meta.json");
    let meta: Meta = if meta_path.exists() {
        serde_json::from_reader(File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?)?
    } else {
        Meta::default()
    };

    let nodes_path = dir.join("nodes.jsonl");
    let reader = BufReader::new(File::open(&nodes_path).map_err(|e| Error::io(&nodes_path, e))?);
    let mut node_ids = Vec::new();
    let mut index = HashMap::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    let mut texts = Vec::new();
    let mut any_text = false;
    for (no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&nodes_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeLine = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("nodes.jsonl line {}: {e}", no + 1)))?;
        let id = id_string(&rec.id)?;
        let split = rec.split.ok_or_else(|| Error::Dataset(format!("node `{id}` has no split")))?;
        let split: Split = split.parse()?;
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(Error::Dataset(format!("duplicate node id `{id}`")));
        }
        any_text |= rec.text.is_some();
        texts.push(rec.text.unwrap_or_default());
        labels.push(rec.label);
        splits.push(split);
        node_ids.push(id);
    }
    let n = node_ids.len();

    let edges_path = dir.join("edges.csv");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(&edges_path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", edges_path.display())))?;
    let mut edges = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Dataset(format!("edges.csv row {}: expected 2 fields, got {}", row + 1, rec.len())));
        }
        if row == 0 && &rec[0] == "u" && &rec[1] == "v" {
            continue;
        }
        let lookup = |s: &str| {
            index.get(s).copied().ok_or_else(|| Error::Dataset(format!("edge endpoint `{s}` is not a known node id")))
        };
        edges.push((lookup(&rec[0])?, lookup(&rec[1])?));
    }

    let features = read_embeddings(&dir.join("embeddings.bin"), n)?;
    let graph = Graph::build(n, &edges, labels, splits, meta.classes)?;
    Ok(DatasetBundle {
        graph,
        features,
        texts: any_text.then_some(texts),
        node_ids,
        domain: meta.domain.unwrap_or_else(|| "generic".into()),
    })
}

/// Reads an `EMB1` file, checking its row count against `expected_rows`.
pub fn read_embeddings(path: &Path, expected_rows: usize) -> Result<Matrix> {
    let bad = |reason: String| Error::EmbeddingsFormat { path: path.to_path_buf(), reason };
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != EMB_MAGIC {
        return Err(bad("magic mismatch, expected \"EMB1\"".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if n != expected_rows {
        return Err(bad(format!("expected {expected_rows} rows (one per node), header says {n}")));
    }
    let payload = &bytes[12..];
    let want = n * d * 4;
    if payload.len() != want {
        return Err(bad(format!("expected {want} payload bytes for {n}x{d}, found {}", payload.len())));
    }
    let data = payload.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
    Matrix::from_vec(n, d, data)
}

pub fn write_embeddings(path: &Path, x: &Matrix) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    w.write_all(EMB_MAGIC).map_err(io)?;
    w.write_all(&(x.rows() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(x.cols() as u32).to_le_bytes()).map_err(io)?;
    for &v in x.as_slice() {
        w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `bundle` in the layout [`ingest`] reads. Features are stored as
/// f32.
pub fn write_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = &bundle.graph;

    let nodes_path = dir.join("nodes.jsonl");
    let mut w = BufWriter::new(File::create(&nodes_path).map_err(|e| Error::io(&nodes_path, e))?);
    for i in 0..g.n() {
        let mut obj = serde_json::json!({
            "id": bundle.node_ids[i],
            "label": g.label(i),
            "split": g.splits()[i].to_string(),
        });
        if let Some(t) = &bundle.texts {
            obj["text"] = Value::String(t[i].clone());
        }
        writeln!(w, "{obj}").map_err(|e| Error::io(&nodes_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&nodes_path, e))?;

    let edges_path = dir.join("edges.csv");
    let mut cw = csv::WriterBuilder::new().has_headers(false).from_path(&edges_path)?;
    for &(u, v) in g.edges() {
        cw.write_record([&bundle.node_ids[u], &bundle.node_ids[v]])?;
    }
    cw.flush().map_err(|e| Error::io(&edges_path, e))?;

    write_embeddings(&dir.join("embeddings.bin"), &bundle.features)?;

    let meta_path = dir.join("meta.json");
    let meta = Meta { domain: Some(bundle.domain.clone()), classes: Some(g.num_classes()) };
    std::fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Heterophilic,
    Homophilic,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heterophilic" => Ok(SynthKind::Heterophilic),
            "homophilic" => Ok(SynthKind::Homophilic),
            other => Err(Error::InvalidArgument(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Parameters of the block-model generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub classes: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    /// Standard deviation of the Gaussian feature noise. Class prototypes are
    /// at unit distance from each other.
    pub feature_noise: f64,
    pub feature_dim: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::Heterophilic,
            n: 400,
            classes: 2,
            p_intra: 0.005,
            p_inter: 0.05,
            feature_noise: 1.0,
            feature_dim: 16,
            train_frac: 0.48,
            val_frac: 0.32,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn heterophilic(p_intra: f64, p_inter: f64) -> Self {
        Self { kind: SynthKind::Heterophilic, p_intra, p_inter, ..Self::default() }
    }

    pub fn homophilic(p_intra: f64, p_inter: f64) -> Self {
        Self { kind: SynthKind::Homophilic, p_intra, p_inter, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        match self.kind {
            SynthKind::Heterophilic if self.p_inter <= self.p_intra => {
                return bad("a heterophilic graph needs p_inter > p_intra".into())
            }
            SynthKind::Homophilic if self.p_intra <= self.p_inter => {
                return bad("a homophilic graph needs p_intra > p_inter".into())
            }
            _ => {}
        }
        if self.classes == 0 || !self.n.is_multiple_of(self.classes) {
            return bad(format!("n = {} is not divisible by {} classes", self.n, self.classes));
        }
        if self.feature_dim < self.classes {
            return bad("feature_dim must be at least the class count".into());
        }
        if !(self.feature_noise >= 0.0) {
            return bad("feature_noise must be non-negative".into());
        }
        if self.train_frac <= 0.0 || self.val_frac < 0.0 || self.train_frac + self.val_frac > 1.0 {
            return bad("split fractions must be positive and sum to at most 1".into());
        }
        Ok(())
    }

    /// Expected edge homophily of two-sided block sampling:
    /// `p_intra (n/K - 1) / (p_intra (n/K - 1) + p_inter (n - n/K))`.
    pub fn expected_edge_homophily(&self) -> f64 {
        let block = (self.n / self.classes) as f64;
        let same = self.p_intra * (block - 1.0);
        let other = self.p_inter * (self.n as f64 - block);
        if same + other == 0.0 {
            1.0
        } else {
            same / (same + other)
        }
    }
}

/// Generates a labelled block-model graph with prototype-plus-noise
/// features. Node `i` has class `i mod K`; splits are stratified per class.
/// Feature values are rounded to f32 so a written bundle reads back exactly.
pub fn synth_dataset(spec: &SynthSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let n = spec.n;
    let k = spec.classes;
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();

    let mut edge_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x00ed_6e5e);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { spec.p_intra } else { spec.p_inter };
            if edge_rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut feat_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x0fea_7e55);
    let noise = Normal::new(0.0, spec.feature_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut features = Matrix::zeros(n, spec.feature_dim);
    for i in 0..n {
        for c in 0..spec.feature_dim {
            let proto = if c == labels[i] { scale } else { 0.0 };
            features[(i, c)] = f64::from((proto + noise.sample(&mut feat_rng)) as f32);
        }
    }

    let mut split_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x05b1_17ed);
    let mut splits = vec![Split::Test; n];
    for c in 0..k {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut split_rng);
        let m = members.len();
        let n_train = ((spec.train_frac * m as f64).round() as usize).max(1);
        let n_val = ((spec.val_frac * m as f64).round() as usize).min(m - n_train);
        for (r, &i) in members.iter().enumerate() {
            splits[i] = if r < n_train {
                Split::Train
            } else if r < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    let graph = Graph::build(n, &edges, labels.into_iter().map(Some).collect(), splits, Some(k))?;
    Ok(DatasetBundle {
        graph,
        features,
        texts: None,
        node_ids: (0..n).map(|i| i.to_string()).collect(),
        domain: "generic".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily;

    #[test]
    fn homophily_extremes() {
        let g = synth_dataset(&SynthSpec::homophilic(0.05, 0.0)).unwrap();
        assert!(g.graph.num_edges() > 0);
        assert_eq!(edge_homophily(&g.graph).unwrap(), 1.0);
        let h = synth_dataset(&SynthSpec::heterophilic(0.0, 0.05)).unwrap();
        assert_eq!(edge_homophily(&h.graph).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(synth_dataset(&SynthSpec::heterophilic(0.1, 1.5)).is_err());
        assert!(synth_dataset(&SynthSpec::heterophilic(0.1, 0.05)).is_err());
        assert!(synth_dataset(&SynthSpec { n: 401, ..SynthSpec::default() }).is_err());
    }

    #[test]
    fn stratified_splits() {
        let b = synth_dataset(&SynthSpec::default()).unwrap();
        let train = b.graph.split_nodes(Split::Train);
        assert_eq!(train.len(), 192);
        assert_eq!(b.graph.split_nodes(Split::Val).len(), 128);
        assert_eq!(b.graph.split_nodes(Split::Test).len(), 80);
        assert_eq!(train.iter().filter(|&&i| b.graph.label(i) == Some(0)).count(), 96);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_dataset(&SynthSpec::default()).unwrap();
        let b = synth_dataset(&SynthSpec::default()).unwrap();
        let c = synth_dataset(&SynthSpec { seed: 1, ..SynthSpec::default() }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.graph.edges(), c.graph.edges());
    }
}

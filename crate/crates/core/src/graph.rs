//! Undirected simple graphs in compressed adjacency form and the operators
//! built on them: degrees, random-walk transition, normalized Laplacian,
//! neighborhood averaging.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::linalg::Mat;
use crate::DEFAULT_ORACLE_CAP;

/// Dense `N × d` node features, one row per node.
pub type FeatureMatrix = Mat;

/// Immutable undirected graph. Adjacency is symmetric, loop-free and
/// duplicate-free; each neighbor list is sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    coords: Option<Mat>,
}

impl Graph {
    /// Builds a graph on `num_nodes` nodes. Edges are symmetrized; self-loops
    /// and duplicates are dropped.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Invalid(alloc::format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = pairs.into_iter().map(|(_, v)| v).collect();
        Ok(Self {
            offsets,
            neighbors,
            coords: None,
        })
    }

    /// Attaches an `N × m` array of embedding-space positions.
    pub fn with_coords(mut self, coords: Mat) -> Result<Self> {
        if coords.rows() != self.num_nodes() {
            return Err(shape_err!(
                "coords have {} rows for {} nodes",
                coords.rows(),
                self.num_nodes()
            ));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn coords(&self) -> Option<&Mat> {
        self.coords.as_ref()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes())
            .flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
            .filter(|(u, v)| u < v)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes())
            .map(|i| self.degree(i))
            .max()
            .unwrap_or(0)
    }

    /// Connected-component label per node, labels `0..count` in order of
    /// first appearance.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.num_nodes();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.components().0 <= 1
    }

    /// Relabels nodes: old node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        check_permutation(perm, n)?;
        let g = Graph::from_edges(n, self.edges().map(|(u, v)| (perm[u], perm[v])))?;
        match &self.coords {
            Some(c) => {
                let mut inv = vec![0; n];
                for (old, &new) in perm.iter().enumerate() {
                    inv[new] = old;
                }
                g.with_coords(c.select_rows(&inv))
            }
            None => Ok(g),
        }
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(shape_err!(
            "permutation of length {} for {} nodes",
            perm.len(),
            n
        ));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Invalid("not a permutation".to_string()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Parses a whitespace-separated edge list (`u v` per line, `#` comments).
/// The node count is the largest id plus one.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_id = None::<usize>;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: "expected two node ids".to_string(),
            })?;
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: alloc::format!("invalid node id {tok:?}"),
            })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "trailing tokens after edge".to_string(),
            });
        }
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }
    match max_id {
        None => Err(Error::NoEdges),
        Some(m) => Graph::from_edges(m + 1, edges),
    }
}

/// Parses an OFF triangle mesh into its vertex graph with coordinates.
pub fn parse_off(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty OFF file".to_string(),
    })?;
    let mut head_tokens = header.split_whitespace();
    if head_tokens.next() != Some("OFF") {
        return Err(Error::Parse {
            line: hline,
            msg: "missing OFF header".to_string(),
        });
    }
    let rest: Vec<&str> = head_tokens.collect();
    let (cline, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or(Error::Parse {
            line: hline + 1,
            msg: "missing count line".to_string(),
        })?;
        (l, c.split_whitespace().collect())
    } else {
        (hline, rest)
    };
    let num = |s: Option<&&str>, line: usize| -> Result<usize> {
        s.and_then(|t| t.parse().ok()).ok_or(Error::Parse {
            line,
            msg: "bad vertex/face counts".to_string(),
        })
    };
    let nv = num(counts.first(), cline)?;
    let nf = num(counts.get(1), cline)?;

    let mut coords = Mat::zeros(nv, 3);
    for v in 0..nv {
        let (l, text) = lines.next().ok_or(Error::Parse {
            line: cline + v + 1,
            msg: "missing vertex line".to_string(),
        })?;
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: l,
                msg: "invalid vertex coordinate".to_string(),
            })?;
        if vals.len() < 3 {
            return Err(Error::Parse {
                line: l,
                msg: "vertex needs three coordinates".to_string(),
            });
        }
        coords.row_mut(v).copy_from_slice(&vals[..3]);
    }

    let mut edges = Vec::with_capacity(3 * nf);
    for _ in 0..nf {
        let (l, text) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "missing face line".to_string(),
        })?;
        let toks: Vec<usize> = text
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: l,
                msg: "invalid face index".to_string(),
            })?;
        match toks.first() {
            Some(3) if toks.len() >= 4 => {}
            Some(3) => {
                return Err(Error::Parse {
                    line: l,
                    msg: "face needs three indices".to_string(),
                })
            }
            _ => return Err(Error::NonTriangleFace { line: l }),
        }
        let (a, b, c) = (toks[1], toks[2], toks[3]);
        for &i in &[a, b, c] {
            if i >= nv {
                return Err(Error::VertexOutOfRange {
                    index: i,
                    count: nv,
                });
            }
        }
        edges.extend_from_slice(&[(a, b), (b, c), (c, a)]);
    }
    Graph::from_edges(nv, edges)?.with_coords(coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Transition,
    NormalizedLaplacian,
    LaplacianPseudoinverse,
}

/// Materialized `N × N` operator. Only built for graphs under the oracle cap.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub data: Mat,
    pub kind: OperatorKind,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.data.rows()
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::OracleOnly { n, cap })
    } else {
        Ok(())
    }
}

/// `𝓛 = I − D^{-1/2} A D^{-1/2}`; isolated nodes get an all-zero row and
/// column.
pub fn normalized_laplacian(g: &Graph) -> Result<DenseOperator> {
    normalized_laplacian_with_cap(g, DEFAULT_ORACLE_CAP)
}

pub fn normalized_laplacian_with_cap(g: &Graph, cap: usize) -> Result<DenseOperator> {
    let n = g.num_nodes();
    check_cap(n, cap)?;
    let inv_sqrt: Vec<f64> = (0..n).map(|i| inv_sqrt_degree(g, i)).collect();
    let mut data = Mat::zeros(n, n);
    for i in 0..n {
        if g.degree(i) == 0 {
            continue;
        }
        data[(i, i)] = 1.0;
        for &j in g.neighbors(i) {
            data[(i, j)] = -inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(DenseOperator {
        data,
        kind: OperatorKind::NormalizedLaplacian,
    })
}

/// `P = D⁻¹A`; zero-degree rows are all-zero.
pub fn transition_matrix(g: &Graph) -> Result<DenseOperator> {
    transition_matrix_with_cap(g, DEFAULT_ORACLE_CAP)
}

pub fn transition_matrix_with_cap(g: &Graph, cap: usize) -> Result<DenseOperator> {
    let n = g.num_nodes();
    check_cap(n, cap)?;
    let mut data = Mat::zeros(n, n);
    for i in 0..n {
        let d = g.degree(i);
        for &j in g.neighbors(i) {
            data[(i, j)] = 1.0 / d as f64;
        }
    }
    Ok(DenseOperator {
        data,
        kind: OperatorKind::Transition,
    })
}

#[inline]
fn inv_sqrt_degree(g: &Graph, i: usize) -> f64 {
    match g.degree(i) {
        0 => 0.0,
        d => 1.0 / libm::sqrt(d as f64),
    }
}

/// Sparse `P · X` with `P = D⁻¹A` (zero rows for isolated nodes).
pub fn transition_apply(g: &Graph, x: &Mat) -> Mat {
    assert_eq!(x.rows(), g.num_nodes());
    let mut out = Mat::zeros(x.rows(), x.cols());
    for i in 0..g.num_nodes() {
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let row = out.row_mut(i);
        for &j in nbrs {
            for (o, v) in row.iter_mut().zip(x.row(j)) {
                *o += v;
            }
        }
        row.iter_mut().for_each(|o| *o *= w);
    }
    out
}

/// Sparse `𝓛 · X`.
pub fn normalized_laplacian_apply(g: &Graph, x: &Mat) -> Mat {
    assert_eq!(x.rows(), g.num_nodes());
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| inv_sqrt_degree(g, i)).collect();
    let mut out = Mat::zeros(n, x.cols());
    for i in 0..n {
        if g.degree(i) == 0 {
            continue;
        }
        let row = out.row_mut(i);
        row.copy_from_slice(x.row(i));
        for &j in g.neighbors(i) {
            let w = inv_sqrt[i] * inv_sqrt[j];
            for (o, v) in row.iter_mut().zip(x.row(j)) {
                *o -= w * v;
            }
        }
    }
    out
}

/// Neighborhood mean of node features. An isolated node keeps its own row.
pub fn graph_convolution(g: &Graph, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.rows() != g.num_nodes() {
        return Err(shape_err!(
            "features have {} rows for {} nodes",
            x.rows(),
            g.num_nodes()
        ));
    }
    let mut out = transition_apply(g, x);
    for i in 0..g.num_nodes() {
        if g.degree(i) == 0 {
            out.row_mut(i).copy_from_slice(x.row(i));
        }
    }
    Ok(out)
}

/// Adjoint of [`graph_convolution`]: `Cᵀ · Y`.
pub fn graph_convolution_adjoint(g: &Graph, y: &Mat) -> Mat {
    assert_eq!(y.rows(), g.num_nodes());
    let mut out = Mat::zeros(y.rows(), y.cols());
    for i in 0..g.num_nodes() {
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            let src: Vec<f64> = y.row(i).to_vec();
            out.row_mut(i)
                .iter_mut()
                .zip(src)
                .for_each(|(o, v)| *o += v);
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        for &j in nbrs {
            let row = out.row_mut(j);
            for (o, v) in row.iter_mut().zip(y.row(i)) {
                *o += w * v;
            }
        }
    }
    out
}

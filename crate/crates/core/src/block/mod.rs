//! The multi-scale block and the stacked model.
//!
//! A block runs three branches in parallel and merges them residually:
//!
//! * feature: a linear transformer on `x`,
//! * local: graph convolution, then a linear transformer,
//! * global: gauge-invariant attention (`Q = K = φ`, `V = xW_V`) added to
//!   `x`, gauge-equivariant attention producing the next `φ`, then a linear
//!   transformer.
//!
//! Each linear transformer computes `Δ(z) = A(z) + F(z + A(z))` with `A`
//! single-head linear attention and `F(h) = relu(h W₁) W₂`. Branch outputs
//! are concatenated and projected by `merge` (`3d × d`, initialized to
//! `(1/3)[I; I; I]`), then added to `x`.
//!
//! The forward pass is written once against [`Backend`], so inference and
//! training share it.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::attention::{uses_kernel_limit, AttentionParams, FeatureMap, DEFAULT_EPS};
use crate::error::{shape_err, Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::linalg::Mat;
use crate::rng;
use crate::spectral::{fastrp_embed, EmbeddingSource, SpectralEmbedding};
use crate::DEFAULT_ORACLE_CAP;

mod ablation;
mod backend;
mod train;

pub use ablation::{run_ablation, AblationRow, AblationSetup, ABLATIONS};
pub use backend::{Backend, Eager, Taped};
pub use train::{accuracy, fit, predict, r_squared, ModelObjective, Targets};

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams {
    pub attn: AttentionParams,
    pub ff1: Mat,
    pub ff2: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBranchParams {
    /// Only `w_v` is used.
    pub gi: AttentionParams,
    /// Only `w_q` and `w_k` are used.
    pub ge: AttentionParams,
    pub post: TransformerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub feature_branch: TransformerParams,
    pub local_branch: TransformerParams,
    pub global_branch: GlobalBranchParams,
    /// `3d × d`; rows `[0, d)` weight the feature branch, and so on.
    pub merge: Mat,
    pub enabled_branches: [bool; 3],
    /// Add the incoming `φ` to the equivariant output instead of replacing it.
    pub phi_residual: bool,
}

fn uniform(rows: usize, cols: usize, rng: &mut rng::Rng) -> Mat {
    let b = 1.0 / libm::sqrt(rows.max(1) as f64);
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-b..b))
}

fn merge_init(d: usize) -> Mat {
    Mat::from_fn(3 * d, d, |i, j| if i % d == j { 1.0 / 3.0 } else { 0.0 })
}

impl TransformerParams {
    pub fn random(d: usize, rng: &mut rng::Rng) -> Self {
        let (q, k, v) = (uniform(d, d, rng), uniform(d, d, rng), uniform(d, d, rng));
        Self {
            attn: AttentionParams::new(q, k, v),
            ff1: uniform(d, d, rng),
            ff2: uniform(d, d, rng),
        }
    }

    pub fn zeros(d: usize) -> Self {
        let z = || Mat::zeros(d, d);
        Self {
            attn: AttentionParams::new(z(), z(), z()),
            ff1: z(),
            ff2: z(),
        }
    }
}

impl BlockParams {
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let feature_branch = TransformerParams::random(d, &mut rng);
        let local_branch = TransformerParams::random(d, &mut rng);
        let gi_v = uniform(d, d, &mut rng);
        let (ge_q, ge_k) = (uniform(d, d, &mut rng), uniform(d, d, &mut rng));
        let post = TransformerParams::random(d, &mut rng);
        Self {
            feature_branch,
            local_branch,
            global_branch: GlobalBranchParams {
                gi: AttentionParams::new(Mat::zeros(d, d), Mat::zeros(d, d), gi_v),
                ge: AttentionParams::new(ge_q, ge_k, Mat::zeros(d, d)),
                post,
            },
            merge: merge_init(d),
            enabled_branches: [true; 3],
            phi_residual: false,
        }
    }

    pub fn zeros(d: usize) -> Self {
        let z = || AttentionParams::new(Mat::zeros(d, d), Mat::zeros(d, d), Mat::zeros(d, d));
        Self {
            feature_branch: TransformerParams::zeros(d),
            local_branch: TransformerParams::zeros(d),
            global_branch: GlobalBranchParams {
                gi: z(),
                ge: z(),
                post: TransformerParams::zeros(d),
            },
            merge: Mat::zeros(3 * d, d),
            enabled_branches: [true; 3],
            phi_residual: false,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.merge.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled_branches.iter().any(|b| *b) {
            return Err(Error::NoBranches);
        }
        if !self.merge.is_finite() {
            return Err(Error::Invalid("merge matrix must be finite".into()));
        }
        let d = self.hidden_dim();
        if self.merge.rows() != 3 * d {
            return Err(shape_err!(
                "merge is {:?}, expected {}×{}",
                self.merge.shape(),
                3 * d,
                d
            ));
        }
        Ok(())
    }

    fn options(&self) -> BlockOptions {
        BlockOptions {
            enabled: self.enabled_branches,
            phi_residual: self.phi_residual,
            feature_map: self.feature_branch.attn.feature_map,
            eps: self.feature_branch.attn.eps,
        }
    }

    fn vars<B: Backend>(&self, b: &mut B) -> BlockVars<B::V> {
        let mut t = |p: &TransformerParams| TransformerVars {
            wq: b.leaf(p.attn.w_q.clone()),
            wk: b.leaf(p.attn.w_k.clone()),
            wv: b.leaf(p.attn.w_v.clone()),
            ff1: b.leaf(p.ff1.clone()),
            ff2: b.leaf(p.ff2.clone()),
        };
        let feature = t(&self.feature_branch);
        let local = t(&self.local_branch);
        let post = t(&self.global_branch.post);
        BlockVars {
            feature,
            local,
            gi_v: b.leaf(self.global_branch.gi.w_v.clone()),
            ge_q: b.leaf(self.global_branch.ge.w_q.clone()),
            ge_k: b.leaf(self.global_branch.ge.w_k.clone()),
            post,
            merge: b.leaf(self.merge.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOptions {
    pub enabled: [bool; 3],
    pub phi_residual: bool,
    pub feature_map: FeatureMap,
    pub eps: f64,
}

struct TransformerVars<T> {
    wq: T,
    wk: T,
    wv: T,
    ff1: T,
    ff2: T,
}

struct BlockVars<T> {
    feature: TransformerVars<T>,
    local: TransformerVars<T>,
    gi_v: T,
    ge_q: T,
    ge_k: T,
    post: TransformerVars<T>,
    merge: T,
}

impl<T: Clone> TransformerVars<T> {
    fn take(it: &mut impl Iterator<Item = T>) -> Option<Self> {
        Some(Self {
            wq: it.next()?,
            wk: it.next()?,
            wv: it.next()?,
            ff1: it.next()?,
            ff2: it.next()?,
        })
    }
}

impl<T: Clone> BlockVars<T> {
    fn take(it: &mut impl Iterator<Item = T>) -> Option<Self> {
        Some(Self {
            feature: TransformerVars::take(it)?,
            local: TransformerVars::take(it)?,
            gi_v: it.next()?,
            ge_q: it.next()?,
            ge_k: it.next()?,
            post: TransformerVars::take(it)?,
            merge: it.next()?,
        })
    }
}

/// `Δ(z) = A(z) + F(z + A(z))`.
fn transformer_delta<B: Backend>(
    b: &mut B,
    t: &TransformerVars<B::V>,
    z: &B::V,
    o: &BlockOptions,
) -> Result<B::V> {
    let q = b.matmul(z, &t.wq)?;
    let k = b.matmul(z, &t.wk)?;
    let v = b.matmul(z, &t.wv)?;
    let a = b.linear_attention(&q, &k, &v, o.feature_map, o.eps)?;
    let h = b.add(z, &a)?;
    let f = b.matmul(&h, &t.ff1)?;
    let f = b.relu(&f);
    let f = b.matmul(&f, &t.ff2)?;
    b.add(&a, &f)
}

fn gauge_invariant<B: Backend>(
    b: &mut B,
    phi: &B::V,
    source: EmbeddingSource,
    v: &B::V,
    o: &BlockOptions,
) -> Result<B::V> {
    if uses_kernel_limit(source, o.feature_map) {
        let n = b.value(phi).rows();
        if n > DEFAULT_ORACLE_CAP {
            return Err(Error::OracleOnly {
                n,
                cap: DEFAULT_ORACLE_CAP,
            });
        }
        let k = b.arccos_kernel(phi);
        b.kernel_attention(&k, v, o.eps)
    } else {
        b.linear_attention(phi, phi, v, o.feature_map, o.eps)
    }
}

fn block_forward<B: Backend>(
    b: &mut B,
    w: &BlockVars<B::V>,
    x: &B::V,
    phi: &B::V,
    source: EmbeddingSource,
    o: &BlockOptions,
) -> Result<(B::V, B::V)> {
    if !o.enabled.iter().any(|e| *e) {
        return Err(Error::NoBranches);
    }
    let (n, d) = b.value(x).shape();
    if b.value(phi).rows() != n {
        return Err(shape_err!(
            "φ has {} rows, x has {}",
            b.value(phi).rows(),
            n
        ));
    }
    let b1 = if o.enabled[0] {
        transformer_delta(b, &w.feature, x, o)?
    } else {
        b.zeros(n, d)
    };
    let b2 = if o.enabled[1] {
        let c = b.graph_conv(x)?;
        let moved = b.sub(&c, x)?;
        let t = transformer_delta(b, &w.local, &c, o)?;
        b.add(&moved, &t)?
    } else {
        b.zeros(n, d)
    };
    let (b3, phi_out) = if o.enabled[2] {
        let v = b.matmul(x, &w.gi_v)?;
        let a = gauge_invariant(b, phi, source, &v, o)?;
        let g = b.add(x, &a)?;
        let q = b.matmul(&g, &w.ge_q)?;
        let k = b.matmul(&g, &w.ge_k)?;
        let mut phi_next = b.linear_attention(&q, &k, phi, o.feature_map, o.eps)?;
        if o.phi_residual {
            phi_next = b.add(&phi_next, phi)?;
        }
        let t = transformer_delta(b, &w.post, &g, o)?;
        (b.add(&a, &t)?, phi_next)
    } else {
        (b.zeros(n, d), phi.clone())
    };
    let cat = b.concat_cols(&[b1, b2, b3])?;
    let mixed = b.matmul(&cat, &w.merge)?;
    Ok((b.add(x, &mixed)?, phi_out))
}

/// One block on plain matrices. The returned embedding keeps the input's
/// source so exact inputs stay on the kernel-limit path downstream.
pub fn multi_scale_block(
    g: &Graph,
    x: &FeatureMatrix,
    phi: &SpectralEmbedding,
    p: &BlockParams,
) -> Result<(FeatureMatrix, SpectralEmbedding)> {
    p.validate()?;
    if x.cols() != p.hidden_dim() {
        return Err(shape_err!(
            "x has {} columns, block expects {}",
            x.cols(),
            p.hidden_dim()
        ));
    }
    let mut b = Eager::new(g);
    let w = p.vars(&mut b);
    let xv = Rc::new(x.clone());
    let pv = Rc::new(phi.data.clone());
    let (xo, po) = block_forward(&mut b, &w, &xv, &pv, phi.source, &p.options())?;
    Ok((
        Rc::unwrap_or_clone(xo),
        SpectralEmbedding::new(Rc::unwrap_or_clone(po), phi.source),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    NodeClassification,
    NodeRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadConfig {
    pub output_dim: usize,
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Multi-scale blocks with `φ` confined to queries/keys and values of
    /// the spectral attentions.
    Gist,
    /// `φ W_pe` added to the embedded features, then plain linear
    /// transformer layers.
    GaugeBroken,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub num_blocks: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub fastrp_k: usize,
    pub head: HeadConfig,
    pub seed: u64,
    /// Plain linear transformer layers after the blocks.
    pub tail_blocks: usize,
    pub architecture: Architecture,
    pub enabled_branches: [bool; 3],
    pub phi_residual: bool,
    pub feature_map: FeatureMap,
    pub eps: f64,
}

impl ModelConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, embed_dim: usize, head: HeadConfig) -> Self {
        Self {
            input_dim,
            num_blocks: 1,
            hidden_dim,
            embed_dim,
            fastrp_k: 3,
            head,
            seed: 0,
            tail_blocks: 0,
            architecture: Architecture::Gist,
            enabled_branches: [true; 3],
            phi_residual: false,
            feature_map: FeatureMap::Relu,
            eps: DEFAULT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("embed_dim", self.embed_dim),
            ("fastrp_k", self.fastrp_k),
            ("output_dim", self.head.output_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Invalid(format!("{name} must be ≥ 1")));
        }
        if self.architecture == Architecture::Gist
            && self.num_blocks > 0
            && !self.enabled_branches.iter().any(|b| *b)
        {
            return Err(Error::NoBranches);
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Invalid("eps must be > 0".into()));
        }
        Ok(())
    }

    fn options(&self) -> BlockOptions {
        BlockOptions {
            enabled: self.enabled_branches,
            phi_residual: self.phi_residual,
            feature_map: self.feature_map,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// Parameter tensors in declaration order.
pub fn weight_layout(cfg: &ModelConfig) -> Vec<WeightSpec> {
    let d = cfg.hidden_dim;
    let mut out = Vec::new();
    let mut push = |name: String, rows, cols| out.push(WeightSpec { name, rows, cols });
    push("embed.w".into(), cfg.input_dim, d);
    push("embed.b".into(), 1, d);
    let transformer = |push: &mut dyn FnMut(String, usize, usize), prefix: &str| {
        for m in ["wq", "wk", "wv", "ff1", "ff2"] {
            push(format!("{prefix}.{m}"), d, d);
        }
    };
    match cfg.architecture {
        Architecture::Gist => {
            for l in 0..cfg.num_blocks {
                transformer(&mut push, &format!("block{l}.feature"));
                transformer(&mut push, &format!("block{l}.local"));
                push(format!("block{l}.global.gi_wv"), d, d);
                push(format!("block{l}.global.ge_wq"), d, d);
                push(format!("block{l}.global.ge_wk"), d, d);
                transformer(&mut push, &format!("block{l}.global.post"));
                push(format!("block{l}.merge"), 3 * d, d);
            }
        }
        Architecture::GaugeBroken => {
            push("pe.w".into(), cfg.embed_dim, d);
            for l in 0..cfg.num_blocks {
                transformer(&mut push, &format!("layer{l}"));
            }
        }
    }
    for l in 0..cfg.tail_blocks {
        transformer(&mut push, &format!("tail{l}"));
    }
    push("head.w".into(), d, cfg.head.output_dim);
    push("head.b".into(), 1, cfg.head.output_dim);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub tensors: Vec<Mat>,
}

impl ModelWeights {
    /// Biases start at zero, merges at `(1/3)[I; I; I]`, everything else
    /// uniform in `±1/√fan_in`. Tensor `i` draws from its own stream.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let tensors = weight_layout(cfg)
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.name.ends_with(".b") {
                    Mat::zeros(s.rows, s.cols)
                } else if s.name.ends_with(".merge") {
                    merge_init(s.cols)
                } else {
                    uniform(s.rows, s.cols, &mut rng::stream(cfg.seed, i as u64))
                }
            })
            .collect();
        Ok(Self { tensors })
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let layout = weight_layout(cfg);
        if layout.len() != self.tensors.len() {
            return Err(shape_err!(
                "{} weight tensors, layout expects {}",
                self.tensors.len(),
                layout.len()
            ));
        }
        for (s, t) in layout.iter().zip(&self.tensors) {
            if t.shape() != (s.rows, s.cols) {
                return Err(shape_err!(
                    "{} is {:?}, expected {}×{}",
                    s.name,
                    t.shape(),
                    s.rows,
                    s.cols
                ));
            }
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.as_slice().len()).sum()
    }
}

/// Generic model body: weights as backend values in layout order.
pub(crate) fn forward<B: Backend>(
    b: &mut B,
    cfg: &ModelConfig,
    weights: &[B::V],
    x: &B::V,
    phi: &B::V,
    source: EmbeddingSource,
) -> Result<B::V> {
    let mut it = weights.iter().cloned();
    let missing = || shape_err!("weight list shorter than the layout");
    let ew = it.next().ok_or_else(missing)?;
    let eb = it.next().ok_or_else(missing)?;
    let h = b.matmul(x, &ew)?;
    let mut h = b.add_row(&h, &eb)?;
    let o = cfg.options();
    match cfg.architecture {
        Architecture::Gist => {
            let mut phi = phi.clone();
            for _ in 0..cfg.num_blocks {
                let w = BlockVars::take(&mut it).ok_or_else(missing)?;
                let (hn, pn) = block_forward(b, &w, &h, &phi, source, &o)?;
                h = hn;
                phi = pn;
            }
        }
        Architecture::GaugeBroken => {
            let pe = it.next().ok_or_else(missing)?;
            let p = b.matmul(phi, &pe)?;
            h = b.add(&h, &p)?;
            for _ in 0..cfg.num_blocks {
                let t = TransformerVars::take(&mut it).ok_or_else(missing)?;
                let dh = transformer_delta(b, &t, &h, &o)?;
                h = b.add(&h, &dh)?;
            }
        }
    }
    for _ in 0..cfg.tail_blocks {
        let t = TransformerVars::take(&mut it).ok_or_else(missing)?;
        let dh = transformer_delta(b, &t, &h, &o)?;
        h = b.add(&h, &dh)?;
    }
    let hw = it.next().ok_or_else(missing)?;
    let hb = it.next().ok_or_else(missing)?;
    let out = b.matmul(&h, &hw)?;
    b.add_row(&out, &hb)
}

/// Predictions with an explicit positional embedding.
pub fn model_forward_with(
    g: &Graph,
    x: &FeatureMatrix,
    phi: &SpectralEmbedding,
    cfg: &ModelConfig,
    weights: &ModelWeights,
) -> Result<Mat> {
    cfg.validate()?;
    weights.check(cfg)?;
    if x.rows() != g.num_nodes() || phi.num_nodes() != g.num_nodes() {
        return Err(shape_err!(
            "graph has {} nodes, x has {} rows, φ has {}",
            g.num_nodes(),
            x.rows(),
            phi.num_nodes()
        ));
    }
    if x.cols() != cfg.input_dim {
        return Err(shape_err!(
            "x has {} columns, config expects {}",
            x.cols(),
            cfg.input_dim
        ));
    }
    if cfg.architecture == Architecture::GaugeBroken && phi.dim() != cfg.embed_dim {
        return Err(shape_err!(
            "φ has {} columns, config expects {}",
            phi.dim(),
            cfg.embed_dim
        ));
    }
    let mut b = Eager::new(g);
    let w: Vec<Rc<Mat>> = weights.tensors.iter().map(|t| Rc::new(t.clone())).collect();
    let xv = Rc::new(x.clone());
    let pv = Rc::new(phi.data.clone());
    let out = forward(&mut b, cfg, &w, &xv, &pv, phi.source)?;
    Ok(Rc::unwrap_or_clone(out))
}

/// Predictions with `φ⁰ = fastrp_embed(g, embed_dim, fastrp_k, seed)`.
pub fn model_forward(
    g: &Graph,
    x: &FeatureMatrix,
    cfg: &ModelConfig,
    weights: &ModelWeights,
) -> Result<Mat> {
    let phi = fastrp_embed(g, cfg.embed_dim, cfg.fastrp_k, cfg.seed)?;
    model_forward_with(g, x, &phi, cfg, weights)
}

#[cfg(test)]
mod tests;

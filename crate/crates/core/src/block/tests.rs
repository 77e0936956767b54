use super::*;
use crate::attention::{gauge_equivariant_attention, gauge_invariant_attention, linear_attention};
use crate::autodiff::{finite_difference_sweep, loss_and_grad};
use crate::graph::{graph_convolution, normalized_laplacian};
use crate::spectral::{apply_gauge, exact_eigenmaps, sample_gauge_transform, GaugeKind};

fn rand_mat(r: usize, c: usize, seed: u64) -> Mat {
    Mat::random_normal(r, c, &mut rng::seeded(seed))
}

/// A ring with chords, plus two leaves on node 0 (a degenerate pair).
fn test_graph(n: usize) -> Graph {
    let mut e: Vec<(usize, usize)> = (0..n - 2).map(|i| (i, (i + 1) % (n - 2))).collect();
    e.push((0, (n - 2) / 2));
    e.push((1, n / 3));
    e.push((0, n - 2));
    e.push((0, n - 1));
    Graph::from_edges(n, e).unwrap()
}

fn eigenmaps(g: &Graph) -> SpectralEmbedding {
    exact_eigenmaps(&normalized_laplacian(g).unwrap(), None).unwrap()
}

#[test]
fn zero_block_is_residual() {
    let g = test_graph(8);
    let x = rand_mat(8, 4, 1);
    let phi = eigenmaps(&g);
    let (xo, po) = multi_scale_block(&g, &x, &phi, &BlockParams::zeros(4)).unwrap();
    assert_eq!(xo, x);
    // zero W_Q, W_K ⇒ relu features vanish ⇒ equivariant output is 0
    assert_eq!(po.data.max_abs(), 0.0);
}

#[test]
fn no_branches_is_error() {
    let g = test_graph(6);
    let mut p = BlockParams::random(3, 0);
    p.enabled_branches = [false; 3];
    let phi = eigenmaps(&g);
    assert_eq!(
        multi_scale_block(&g, &rand_mat(6, 3, 0), &phi, &p).unwrap_err(),
        Error::NoBranches
    );
}

#[test]
fn disabling_local_branch_matters_only_with_weights() {
    let g = Graph::from_edges(2, [(0, 1)]).unwrap();
    let x = Mat::from_rows(&[&[1.0, -0.5], &[0.3, 2.0]]);
    let phi = SpectralEmbedding::new(Mat::from_rows(&[&[0.5], &[-0.5]]), EmbeddingSource::FastRp);
    let mut p = BlockParams::random(2, 3);
    let full = multi_scale_block(&g, &x, &phi, &p).unwrap().0;
    p.enabled_branches[1] = false;
    let ablated = multi_scale_block(&g, &x, &phi, &p).unwrap().0;
    assert!(full.max_abs_diff(&ablated) > 1e-3);

    // zero local weights and zero local merge rows: the branch is inert
    let mut q = BlockParams::random(2, 3);
    q.local_branch = TransformerParams::zeros(2);
    for r in 2..4 {
        q.merge.row_mut(r).fill(0.0);
    }
    let full = multi_scale_block(&g, &x, &phi, &q).unwrap().0;
    q.enabled_branches[1] = false;
    let ablated = multi_scale_block(&g, &x, &phi, &q).unwrap().0;
    assert_eq!(full, ablated);
}

#[test]
fn block_gauge_invariance() {
    let g = test_graph(20);
    let phi = eigenmaps(&g);
    let x = rand_mat(20, 5, 4);
    let p = BlockParams::random(5, 5);
    let (x0, p0) = multi_scale_block(&g, &x, &phi, &p).unwrap();
    for (i, kind) in [
        GaugeKind::SignFlip,
        GaugeKind::BlockRotation,
        GaugeKind::Orthogonal,
    ]
    .into_iter()
    .enumerate()
    {
        let t = sample_gauge_transform(&phi, kind, i as u64).unwrap();
        let rotated = apply_gauge(&phi, &t).unwrap();
        let (x1, p1) = multi_scale_block(&g, &x, &rotated, &p).unwrap();
        assert!(x1.max_abs_diff(&x0) <= 1e-10, "{kind:?}");
        assert!(p1.gram().max_abs_diff(&p0.gram()) <= 1e-10, "{kind:?}");
    }
}

/// The block composed by hand from the public per-op functions.
#[test]
fn p2_block_matches_composed_ops() {
    let g = Graph::from_edges(2, [(0, 1)]).unwrap();
    let x = Mat::from_rows(&[&[0.7, -0.2], &[0.1, 0.9]]);
    let phi = eigenmaps(&g);
    let p = BlockParams::random(2, 7);
    let (xo, po) = multi_scale_block(&g, &x, &phi, &p).unwrap();

    let delta = |t: &TransformerParams, z: &Mat| {
        let a = linear_attention(
            &z.matmul(&t.attn.w_q),
            &z.matmul(&t.attn.w_k),
            &z.matmul(&t.attn.w_v),
            FeatureMap::Relu,
            DEFAULT_EPS,
        )
        .unwrap();
        let f = z.add(&a).matmul(&t.ff1).map(|v| v.max(0.0)).matmul(&t.ff2);
        a.add(&f)
    };
    let b1 = delta(&p.feature_branch, &x);
    let c = graph_convolution(&g, &x).unwrap();
    let b2 = c.sub(&x).add(&delta(&p.local_branch, &c));
    let a = gauge_invariant_attention(&phi, &x, &p.global_branch.gi)
        .unwrap()
        .data;
    let gx = x.add(&a);
    let phi_next = gauge_equivariant_attention(&gx, &phi, &p.global_branch.ge)
        .unwrap()
        .data;
    let b3 = a.add(&delta(&p.global_branch.post, &gx));
    let want = x.add(&Mat::hstack(&[&b1, &b2, &b3]).matmul(&p.merge));
    assert!(xo.max_abs_diff(&want) < 1e-14);
    assert!(po.data.max_abs_diff(&phi_next) < 1e-14);
}

fn classifier(input: usize, blocks: usize) -> ModelConfig {
    let mut c = ModelConfig::new(
        input,
        4,
        3,
        HeadConfig {
            output_dim: 2,
            task: Task::NodeClassification,
        },
    );
    c.num_blocks = blocks;
    c.seed = 11;
    c
}

#[test]
fn zero_blocks_is_head_of_embedding() {
    let g = test_graph(7);
    let x = rand_mat(7, 3, 8);
    let cfg = classifier(3, 0);
    let w = ModelWeights::init(&cfg).unwrap();
    assert_eq!(w.tensors.len(), 4);
    let out = model_forward(&g, &x, &cfg, &w).unwrap();
    let h = x.matmul(&w.tensors[0]).add_row_broadcast(&w.tensors[1]);
    let want = h.matmul(&w.tensors[2]).add_row_broadcast(&w.tensors[3]);
    assert!(out.max_abs_diff(&want) < 1e-14);
}

#[test]
fn permutation_equivariance() {
    let g = test_graph(9);
    let x = rand_mat(9, 3, 9);
    let mut cfg = classifier(3, 2);
    cfg.tail_blocks = 1;
    let w = ModelWeights::init(&cfg).unwrap();
    let phi = SpectralEmbedding::new(rand_mat(9, 3, 10), EmbeddingSource::FastRp);
    let out = model_forward_with(&g, &x, &phi, &cfg, &w).unwrap();
    let perm: Vec<usize> = (0..9).map(|i| (i * 4 + 3) % 9).collect();
    let gp = g.permute(&perm).unwrap();
    let mut inv = alloc::vec![0; 9];
    for (old, &new) in perm.iter().enumerate() {
        inv[new] = old;
    }
    let out_p = model_forward_with(
        &gp,
        &x.select_rows(&inv),
        &phi.permute_rows(&perm),
        &cfg,
        &w,
    )
    .unwrap();
    assert!(out_p.max_abs_diff(&out.select_rows(&inv)) < 1e-12);
}

#[test]
fn model_gauge_invariance() {
    let g = test_graph(16);
    let phi = eigenmaps(&g);
    let x = rand_mat(16, 3, 12);
    let mut cfg = classifier(3, 2);
    cfg.embed_dim = phi.dim();
    let w = ModelWeights::init(&cfg).unwrap();
    let out = model_forward_with(&g, &x, &phi, &cfg, &w).unwrap();
    let t = sample_gauge_transform(&phi, GaugeKind::Orthogonal, 3).unwrap();
    let out2 = model_forward_with(&g, &x, &apply_gauge(&phi, &t).unwrap(), &cfg, &w).unwrap();
    assert!(out.max_abs_diff(&out2) < 1e-8);
}

#[test]
fn taped_forward_matches_eager_and_gradients_check() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let x = rand_mat(3, 2, 13);
    let phi = eigenmaps(&g);
    for arch in [Architecture::Gist, Architecture::GaugeBroken] {
        let mut cfg = classifier(2, 2);
        cfg.architecture = arch;
        cfg.embed_dim = phi.dim();
        cfg.tail_blocks = 1;
        let w = ModelWeights::init(&cfg).unwrap();
        let targets = Targets::Classes(alloc::vec![(0, 1), (1, 0), (2, 1)]);
        let obj = ModelObjective {
            g: &g,
            x: &x,
            phi: &phi,
            cfg: &cfg,
            targets: &targets,
        };
        let (loss, grads) = loss_and_grad(&obj, &w.tensors).unwrap();
        let pred = model_forward_with(&g, &x, &phi, &cfg, &w).unwrap();
        let mut t = crate::autodiff::Tape::new();
        let z = t.leaf(pred);
        let want = t.cross_entropy(z, &[(0, 1), (1, 0), (2, 1)]).unwrap();
        assert!((t.value(want)[(0, 0)] - loss).abs() < 1e-12);
        let r =
            finite_difference_sweep(|p| loss_and_grad(&obj, p).map(|v| v.0), &w.tensors, &grads)
                .unwrap();
        assert!(r.max_error() < 1e-4, "{arch:?}: {r:?}");
    }
}

#[test]
fn weight_layout_is_consistent() {
    let mut cfg = classifier(5, 2);
    cfg.tail_blocks = 1;
    let w = ModelWeights::init(&cfg).unwrap();
    w.check(&cfg).unwrap();
    let layout = weight_layout(&cfg);
    assert_eq!(layout[0].name, "embed.w");
    assert_eq!(layout.last().unwrap().name, "head.b");
    let merge = layout
        .iter()
        .position(|s| s.name == "block0.merge")
        .unwrap();
    assert_eq!(w.tensors[merge], merge_init(4));
    assert_eq!(ModelWeights::init(&cfg).unwrap(), w);
}

//! Linear attention and the two spectral self-attention operators.
//!
//! The gauge-invariant operator uses the positional embedding as both
//! queries and keys, so it only sees inner products `⟨φ_i, φ_j⟩` once the
//! feature map is replaced by its kernel. For exact eigenmaps that
//! replacement is done literally: the relu map is evaluated through its
//! random-feature limit, the order-1 arc-cosine kernel of the Gram matrix,
//! which makes the output an exact function of `Gram(Φ)`. Projected and
//! FastRP embeddings go through the explicit `O(N·r·d)` linear path.
//!
//! The gauge-equivariant operator attends with feature-derived weights over
//! `V = Φ`; it is linear in `Φ`, so it maps Gram-equivalent inputs to
//! Gram-equivalent outputs and its result becomes the next layer's `Φ`.

use core::f64::consts::PI;

use rand::Rng as _;

use crate::error::{shape_err, Error, Result};
use crate::graph::FeatureMatrix;
use crate::linalg::Mat;
use crate::rng;
use crate::spectral::{EmbeddingSource, SpectralEmbedding};
use crate::DEFAULT_ORACLE_CAP;

pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMap {
    #[default]
    Relu,
    EluPlusOne,
}

impl FeatureMap {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            FeatureMap::Relu => x.max(0.0),
            FeatureMap::EluPlusOne => {
                if x > 0.0 {
                    x + 1.0
                } else {
                    libm::exp(x)
                }
            }
        }
    }

    /// Derivative; relu'(0) is taken as 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            FeatureMap::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            FeatureMap::EluPlusOne => {
                if x > 0.0 {
                    1.0
                } else {
                    libm::exp(x)
                }
            }
        }
    }

    pub fn apply(self, m: &Mat) -> Mat {
        m.map(|x| self.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
    pub feature_map: FeatureMap,
    pub eps: f64,
}

impl AttentionParams {
    pub fn new(w_q: Mat, w_k: Mat, w_v: Mat) -> Self {
        Self {
            w_q,
            w_k,
            w_v,
            feature_map: FeatureMap::Relu,
            eps: DEFAULT_EPS,
        }
    }

    /// `d × d` weights drawn uniformly from `(−1/√d, 1/√d)`.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let b = 1.0 / libm::sqrt(d.max(1) as f64);
        let mut draw = || Mat::from_fn(d, d, |_, _| rng.random_range(-b..b));
        let (w_q, w_k, w_v) = (draw(), draw(), draw());
        Self::new(w_q, w_k, w_v)
    }

    pub fn with_feature_map(mut self, fm: FeatureMap) -> Self {
        self.feature_map = fm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Invalid(alloc::format!(
                "eps must be > 0, got {}",
                self.eps
            )));
        }
        if !(self.w_q.is_finite() && self.w_k.is_finite() && self.w_v.is_finite()) {
            return Err(Error::Invalid("attention weights must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppliedTo {
    Features,
    PositionalEmbeddings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub data: Mat,
    pub applied_to: AppliedTo,
}

fn check_qkv(q: &Mat, k: &Mat, v: &Mat) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(shape_err!("Q has {} columns, K has {}", q.cols(), k.cols()));
    }
    if k.rows() != v.rows() {
        return Err(shape_err!("K has {} rows, V has {}", k.rows(), v.rows()));
    }
    Ok(())
}

/// `softmax(QKᵀ/√p) V` with the full `N × N` weight matrix.
pub fn softmax_attention_oracle(q: &Mat, k: &Mat, v: &Mat) -> Result<Mat> {
    check_qkv(q, k, v)?;
    let n = q.rows().max(k.rows());
    if n > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleOnly {
            n,
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    let scale = 1.0 / libm::sqrt(q.cols().max(1) as f64);
    let mut logits = q.matmul_t(k).scale(scale);
    for i in 0..logits.rows() {
        let row = logits.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = libm::exp(*x - m);
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    Ok(logits.matmul(v))
}

/// `O = (φ(Q) S) ⊙ Z` with `S = φ(K)ᵀV`, `Z = 1/(φ(Q)(φ(K)ᵀ1) + ε)`.
pub fn linear_attention(q: &Mat, k: &Mat, v: &Mat, fm: FeatureMap, eps: f64) -> Result<Mat> {
    check_qkv(q, k, v)?;
    let qf = fm.apply(q);
    let kf = fm.apply(k);
    let s = kf.t_matmul(v);
    let ksum = Mat::from_vec(kf.cols(), 1, column_sums(&kf)).expect("column sums");
    let z = qf.matmul(&ksum).map(|x| 1.0 / (x + eps));
    Ok(qf.matmul(&s).scale_rows(&z))
}

fn column_sums(m: &Mat) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, x) in out.iter_mut().zip(m.row(i)) {
            *o += x;
        }
    }
    out
}

/// `O_i = Σ_j κ_ij v_j / (Σ_j κ_ij + ε)` for an explicit `N × N` kernel.
pub fn kernel_attention(kernel: &Mat, v: &Mat, eps: f64) -> Result<Mat> {
    if kernel.cols() != v.rows() {
        return Err(shape_err!(
            "kernel has {} columns, V has {} rows",
            kernel.cols(),
            v.rows()
        ));
    }
    let z = kernel.row_sums().map(|x| 1.0 / (x + eps));
    Ok(kernel.matmul(v).scale_rows(&z))
}

/// Quadratic reference for [`linear_attention`]:
/// `κ_ij = ⟨φ(q_i), φ(k_j)⟩` materialized pair by pair.
pub fn linear_attention_oracle(q: &Mat, k: &Mat, v: &Mat, fm: FeatureMap, eps: f64) -> Result<Mat> {
    check_qkv(q, k, v)?;
    let mut kernel = Mat::zeros(q.rows(), k.rows());
    for i in 0..q.rows() {
        for j in 0..k.rows() {
            kernel[(i, j)] = q
                .row(i)
                .iter()
                .zip(k.row(j))
                .map(|(a, b)| fm.eval(*a) * fm.eval(*b))
                .sum();
        }
    }
    kernel_attention(&kernel, v, eps)
}

/// Order-1 arc-cosine kernel of the rows of `phi`:
/// `κ(a, b) = ‖a‖‖b‖ (sin θ + (π − θ) cos θ) / 2π`, the limit of
/// `⟨relu(Wa), relu(Wb)⟩` for `W` with i.i.d. `N(0, 1/m)` entries.
pub fn arccos_kernel(phi: &Mat) -> Mat {
    arccos_kernel_from_gram(&phi.gram())
}

pub fn arccos_kernel_from_gram(g: &Mat) -> Mat {
    let n = g.rows();
    let norms: alloc::vec::Vec<f64> = (0..n).map(|i| libm::sqrt(g[(i, i)].max(0.0))).collect();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            return 0.5 * g[(i, i)].max(0.0);
        }
        let nn = norms[i] * norms[j];
        if nn == 0.0 {
            return 0.0;
        }
        let theta = libm::acos((g[(i, j)] / nn).clamp(-1.0, 1.0));
        nn * (libm::sin(theta) + (PI - theta) * libm::cos(theta)) / (2.0 * PI)
    })
}

/// Gradient of `Σ κ̄_ij κ_ij` with respect to `phi`, where `κ` is
/// [`arccos_kernel`] of `phi`.
pub fn arccos_kernel_backward(phi: &Mat, kbar: &Mat) -> Mat {
    let g = phi.gram();
    let n = g.rows();
    let t: alloc::vec::Vec<f64> = (0..n).map(|i| g[(i, i)].max(0.0)).collect();
    // ḡ_ij: adjoint with respect to the Gram entries.
    let mut gbar = Mat::zeros(n, n);
    for i in 0..n {
        gbar[(i, i)] += 0.5 * kbar[(i, i)];
        for j in 0..n {
            if i == j {
                continue;
            }
            let nn = libm::sqrt(t[i] * t[j]);
            if nn == 0.0 {
                continue;
            }
            let theta = libm::acos((g[(i, j)] / nn).clamp(-1.0, 1.0));
            let kb = kbar[(i, j)] / (2.0 * PI);
            gbar[(i, j)] += kb * (PI - theta);
            let side = kb * nn * libm::sin(theta);
            gbar[(i, i)] += side / (2.0 * t[i]);
            gbar[(j, j)] += side / (2.0 * t[j]);
        }
    }
    // G = ΦΦᵀ ⇒ Φ̄ = (Ḡ + Ḡᵀ) Φ
    gbar.add(&gbar.transpose()).matmul(phi)
}

fn check_rows(phi: &SpectralEmbedding, x: &Mat) -> Result<()> {
    if phi.num_nodes() != x.rows() {
        return Err(shape_err!(
            "embedding has {} rows, features have {}",
            phi.num_nodes(),
            x.rows()
        ));
    }
    Ok(())
}

/// Whether `phi` is attended through the arc-cosine kernel limit rather than
/// explicit features.
pub fn uses_kernel_limit(source: EmbeddingSource, fm: FeatureMap) -> bool {
    source == EmbeddingSource::ExactEigenmaps && fm == FeatureMap::Relu
}

/// `Q = K = Φ`, `V = x W_V`.
pub fn gauge_invariant_attention(
    phi: &SpectralEmbedding,
    x: &FeatureMatrix,
    params: &AttentionParams,
) -> Result<AttentionOutput> {
    check_rows(phi, x)?;
    params.validate()?;
    if x.cols() != params.w_v.rows() {
        return Err(shape_err!(
            "x has {} columns, W_V has {} rows",
            x.cols(),
            params.w_v.rows()
        ));
    }
    let v = x.matmul(&params.w_v);
    let data = if uses_kernel_limit(phi.source, params.feature_map) {
        if phi.num_nodes() > DEFAULT_ORACLE_CAP {
            return Err(Error::OracleOnly {
                n: phi.num_nodes(),
                cap: DEFAULT_ORACLE_CAP,
            });
        }
        kernel_attention(&arccos_kernel(&phi.data), &v, params.eps)?
    } else {
        linear_attention(&phi.data, &phi.data, &v, params.feature_map, params.eps)?
    };
    Ok(AttentionOutput {
        data,
        applied_to: AppliedTo::Features,
    })
}

/// `Q = x W_Q`, `K = x W_K`, `V = Φ`.
pub fn gauge_equivariant_attention(
    x: &FeatureMatrix,
    phi: &SpectralEmbedding,
    params: &AttentionParams,
) -> Result<AttentionOutput> {
    check_rows(phi, x)?;
    params.validate()?;
    if x.cols() != params.w_q.rows() || x.cols() != params.w_k.rows() {
        return Err(shape_err!(
            "x has {} columns, W_Q/W_K have {}/{} rows",
            x.cols(),
            params.w_q.rows(),
            params.w_k.rows()
        ));
    }
    let q = x.matmul(&params.w_q);
    let k = x.matmul(&params.w_k);
    let data = linear_attention(&q, &k, &phi.data, params.feature_map, params.eps)?;
    Ok(AttentionOutput {
        data,
        applied_to: AppliedTo::PositionalEmbeddings,
    })
}

impl AttentionOutput {
    /// Wraps an equivariant output as the next layer's embedding. The
    /// source is inherited so exact inputs stay on the kernel-limit path.
    pub fn into_embedding(self, source: EmbeddingSource) -> SpectralEmbedding {
        SpectralEmbedding::new(self.data, source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_mat(r: usize, c: usize, seed: u64) -> Mat {
        Mat::random_normal(r, c, &mut rng::seeded(seed))
    }

    #[test]
    fn softmax_single_token() {
        let v = Mat::from_rows(&[&[1.0, -2.0, 3.0]]);
        let q = Mat::from_rows(&[&[0.3, 0.1]]);
        let out = softmax_attention_oracle(&q, &q, &v).unwrap();
        assert!(out.max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn softmax_equal_keys_average() {
        let q = rand_mat(3, 2, 1);
        let k = Mat::filled(3, 2, 0.7);
        let v = rand_mat(3, 4, 2);
        let out = softmax_attention_oracle(&q, &k, &v).unwrap();
        for i in 0..3 {
            for c in 0..4 {
                let m = (v[(0, c)] + v[(1, c)] + v[(2, c)]) / 3.0;
                assert!((out[(i, c)] - m).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn softmax_by_hand() {
        let q = rand_mat(4, 2, 3);
        let k = rand_mat(4, 2, 4);
        let v = rand_mat(4, 3, 5);
        let out = softmax_attention_oracle(&q, &k, &v).unwrap();
        for i in 0..4 {
            let w: alloc::vec::Vec<f64> = (0..4)
                .map(|j| {
                    libm::exp((q[(i, 0)] * k[(j, 0)] + q[(i, 1)] * k[(j, 1)]) / libm::sqrt(2.0))
                })
                .collect();
            let total: f64 = w.iter().sum();
            for c in 0..3 {
                let want: f64 = (0..4).map(|j| w[j] * v[(j, c)]).sum::<f64>() / total;
                assert!((out[(i, c)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_single_token() {
        let q = Mat::from_rows(&[&[2.0, 1.0]]);
        let v = Mat::from_rows(&[&[1.0, -4.0]]);
        let out = linear_attention(&q, &q, &v, FeatureMap::Relu, DEFAULT_EPS).unwrap();
        // ⟨φ(q),φ(q)⟩ = 5
        assert!(out.max_abs_diff(&v) <= DEFAULT_EPS * 4.2 / 5.0);
    }

    #[test]
    fn linear_matches_oracle() {
        for fm in [FeatureMap::Relu, FeatureMap::EluPlusOne] {
            let q = rand_mat(40, 5, 6);
            let k = rand_mat(40, 5, 7);
            let v = rand_mat(40, 3, 8);
            let a = linear_attention(&q, &k, &v, fm, DEFAULT_EPS).unwrap();
            let b = linear_attention_oracle(&q, &k, &v, fm, DEFAULT_EPS).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-10);
        }
    }

    #[test]
    fn dead_relu_gives_zero() {
        let q = rand_mat(5, 3, 9).map(|x| -x.abs() - 0.1);
        let k = rand_mat(5, 3, 10);
        let v = rand_mat(5, 2, 11);
        let out = linear_attention(&q, &k, &v, FeatureMap::Relu, DEFAULT_EPS).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let a = rand_mat(3, 2, 0);
        let b = rand_mat(3, 3, 0);
        assert!(linear_attention(&a, &b, &a, FeatureMap::Relu, 1e-6).is_err());
        let phi = SpectralEmbedding::new(rand_mat(4, 2, 1), EmbeddingSource::FastRp);
        let p = AttentionParams::random(2, 0);
        assert!(gauge_invariant_attention(&phi, &a, &p).is_err());
    }

    #[test]
    fn equal_embeddings_average_values() {
        let v = Mat::from_rows(&[&[1.0, 3.0], &[5.0, -1.0]]);
        let mut p = AttentionParams::random(2, 0);
        p.w_v = Mat::identity(2);
        for source in [EmbeddingSource::ExactEigenmaps, EmbeddingSource::FastRp] {
            let phi = SpectralEmbedding::new(Mat::from_rows(&[&[1.0], &[1.0]]), source);
            let out = gauge_invariant_attention(&phi, &v, &p).unwrap();
            for i in 0..2 {
                assert!((out.data[(i, 0)] - 3.0).abs() < 1e-5);
                assert!((out.data[(i, 1)] - 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_query_weights_kill_equivariant_output() {
        let x = rand_mat(6, 3, 2);
        let phi = SpectralEmbedding::new(rand_mat(6, 4, 3), EmbeddingSource::FastRp);
        let mut p = AttentionParams::random(3, 1);
        p.w_q = Mat::zeros(3, 3);
        p.w_k = Mat::zeros(3, 3);
        let out = gauge_equivariant_attention(&x, &phi, &p).unwrap();
        assert_eq!(out.data.max_abs(), 0.0);
        assert_eq!(out.applied_to, AppliedTo::PositionalEmbeddings);
    }

    #[test]
    fn equivariant_matches_quadratic_oracle() {
        let x = rand_mat(4, 3, 12);
        let phi = SpectralEmbedding::new(rand_mat(4, 2, 13), EmbeddingSource::FastRp);
        let p = AttentionParams::random(3, 14);
        let out = gauge_equivariant_attention(&x, &phi, &p).unwrap();
        let want = linear_attention_oracle(
            &x.matmul(&p.w_q),
            &x.matmul(&p.w_k),
            &phi.data,
            FeatureMap::Relu,
            p.eps,
        )
        .unwrap();
        assert!(out.data.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn arccos_kernel_is_relu_feature_limit() {
        let phi = rand_mat(5, 3, 15);
        let m = 200_000;
        let w = Mat::random_normal(3, m, &mut rng::seeded(16)).scale(1.0 / libm::sqrt(m as f64));
        let feats = phi.matmul(&w).map(|x| x.max(0.0));
        let mc = feats.gram();
        let exact = arccos_kernel(&phi);
        let tol = 0.02 * exact.max_abs();
        assert!(mc.max_abs_diff(&exact) < tol, "{}", mc.max_abs_diff(&exact));
    }

    #[test]
    fn arccos_backward_matches_finite_difference() {
        let phi = rand_mat(4, 3, 17);
        let kbar = rand_mat(4, 4, 18);
        let grad = arccos_kernel_backward(&phi, &kbar);
        let f = |p: &Mat| arccos_kernel(p).zip_map(&kbar, |a, b| a * b).sum();
        let h = 1e-6;
        for i in 0..4 {
            for c in 0..3 {
                let mut up = phi.clone();
                up[(i, c)] += h;
                let mut dn = phi.clone();
                dn[(i, c)] -= h;
                let fd = (f(&up) - f(&dn)) / (2.0 * h);
                assert!((fd - grad[(i, c)]).abs() < 1e-6, "{fd} vs {}", grad[(i, c)]);
            }
        }
    }
}

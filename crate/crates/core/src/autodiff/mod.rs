//! Reverse-mode differentiation on an append-only tape.
//!
//! Each [`Tape`] node stores its forward value and the primitive that
//! produced it. Inputs always precede consumers, so `backward` is a single
//! reverse sweep. Linear and kernel attention are recorded as composites of
//! primitives rather than given custom adjoints.

use alloc::vec;
use alloc::vec::Vec;

use crate::attention::{arccos_kernel, arccos_kernel_backward, FeatureMap};
use crate::error::{shape_err, Error, Result};
use crate::graph::{graph_convolution, graph_convolution_adjoint, Graph};
use crate::linalg::Mat;

mod check;
mod optim;

pub use check::{finite_difference_check, finite_difference_sweep, GradientReport};
pub use optim::{loss_and_grad, train, Objective, Optimizer, OptimizerState, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<'g> {
    Leaf,
    MatMul(Var, Var),
    TMatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Map(Var, FeatureMap),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    SelectRows(Var, Vec<usize>),
    SumAll(Var),
    RowScale(Var, Var),
    RecipAddEps(Var),
    GraphConv(Var, &'g Graph),
    ArcCos(Var),
    Mse(Var, Mat),
    CrossEntropy(Var, Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
struct Node<'g> {
    value: Mat,
    op: Op<'g>,
}

#[derive(Debug, Default, Clone)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| libm::exp(x - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op<'g>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, m: Mat) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.rows() {
            return Err(shape_err!("matmul {:?} × {:?}", x.shape(), y.shape()));
        }
        let v = x.matmul(y);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `aᵀ b`.
    pub fn t_matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(shape_err!("t_matmul {:?}ᵀ × {:?}", x.shape(), y.shape()));
        }
        let v = x.t_matmul(y);
        Ok(self.push(v, Op::TMatMul(a, b)))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (x, y) = (self.value(a).shape(), self.value(b).shape());
        if x != y {
            return Err(shape_err!("{what} {x:?} vs {y:?}"));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let v = self.value(a).add(self.value(b));
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let v = self.value(a).sub(self.value(b));
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// `a + 1 bᵀ` for a `1 × c` row `b`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err!("add_row {:?} + {:?}", x.shape(), r.shape()));
        }
        let v = x.add_row_broadcast(r);
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn feature_map(&mut self, a: Var, fm: FeatureMap) -> Var {
        let v = fm.apply(self.value(a));
        self.push(v, Op::Map(a, fm))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.feature_map(a, FeatureMap::Relu)
    }

    pub fn elu_plus_one(&mut self, a: Var) -> Var {
        self.feature_map(a, FeatureMap::EluPlusOne)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Mat> = parts.iter().map(|p| self.value(*p)).collect();
        if let Some(m) = mats.first() {
            if mats.iter().any(|x| x.rows() != m.rows()) {
                return Err(shape_err!("concat with unequal row counts"));
            }
        }
        let v = Mat::hstack(&mats);
        Ok(self.push(v, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        if start > end || end > x.cols() {
            return Err(shape_err!("slice {start}..{end} of {} columns", x.cols()));
        }
        let v = x.cols_range(start, end);
        Ok(self.push(v, Op::SliceCols(a, start)))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if rows.iter().any(|&r| r >= x.rows()) {
            return Err(shape_err!(
                "row selection out of range for {} rows",
                x.rows()
            ));
        }
        let v = x.select_rows(rows);
        Ok(self.push(v, Op::SelectRows(a, rows.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Mat::filled(1, 1, self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    /// Row `i` of `a` times `z_i`, for an `N × 1` column `z`.
    pub fn row_scale(&mut self, a: Var, z: Var) -> Result<Var> {
        let (x, s) = (self.value(a), self.value(z));
        if s.cols() != 1 || s.rows() != x.rows() {
            return Err(shape_err!("row_scale {:?} by {:?}", x.shape(), s.shape()));
        }
        let v = x.scale_rows(s);
        Ok(self.push(v, Op::RowScale(a, z)))
    }

    /// `1 / (a + eps)` elementwise.
    pub fn recip_add_eps(&mut self, a: Var, eps: f64) -> Var {
        let v = self.value(a).map(|x| 1.0 / (x + eps));
        self.push(v, Op::RecipAddEps(a))
    }

    pub fn graph_conv(&mut self, a: Var, g: &'g Graph) -> Result<Var> {
        let v = graph_convolution(g, self.value(a))?;
        Ok(self.push(v, Op::GraphConv(a, g)))
    }

    pub fn arccos_kernel(&mut self, phi: Var) -> Var {
        let v = arccos_kernel(self.value(phi));
        self.push(v, Op::ArcCos(phi))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &Mat) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(shape_err!(
                "mse {:?} vs target {:?}",
                p.shape(),
                target.shape()
            ));
        }
        let n = p.as_slice().len().max(1) as f64;
        let l = p.zip_map(target, |a, b| (a - b) * (a - b)).sum() / n;
        Ok(self.push(Mat::filled(1, 1, l), Op::Mse(pred, target.clone())))
    }

    /// Mean softmax cross-entropy over `(row, class)` pairs.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[(usize, usize)]) -> Result<Var> {
        let z = self.value(logits);
        if targets.iter().any(|&(r, c)| r >= z.rows() || c >= z.cols()) {
            return Err(shape_err!("cross-entropy target outside {:?}", z.shape()));
        }
        let mut total = 0.0;
        for &(r, c) in targets {
            total -= libm::log(softmax_row(z.row(r))[c]);
        }
        let l = total / targets.len().max(1) as f64;
        Ok(self.push(
            Mat::filled(1, 1, l),
            Op::CrossEntropy(logits, targets.to_vec()),
        ))
    }

    /// `(φ(Q) · φ(K)ᵀV) ⊙ 1/(φ(Q) φ(K)ᵀ1 + ε)` from primitives.
    pub fn linear_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        fm: FeatureMap,
        eps: f64,
    ) -> Result<Var> {
        let qf = self.feature_map(q, fm);
        let kf = if q == k { qf } else { self.feature_map(k, fm) };
        let s = self.t_matmul(kf, v)?;
        let ones = self.leaf(Mat::filled(self.value(kf).rows(), 1, 1.0));
        let ksum = self.t_matmul(kf, ones)?;
        let den = self.matmul(qf, ksum)?;
        let z = self.recip_add_eps(den, eps);
        let num = self.matmul(qf, s)?;
        self.row_scale(num, z)
    }

    /// `(κ V) ⊙ 1/(κ 1 + ε)` for an explicit kernel `κ`.
    pub fn kernel_attention(&mut self, kernel: Var, v: Var, eps: f64) -> Result<Var> {
        let ones = self.leaf(Mat::filled(self.value(kernel).cols(), 1, 1.0));
        let rows = self.matmul(kernel, ones)?;
        let z = self.recip_add_eps(rows, eps);
        let num = self.matmul(kernel, v)?;
        self.row_scale(num, z)
    }

    /// Reverse sweep from a `1 × 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (rows, cols) = self.value(loss).shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut grads: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Mat::filled(1, 1, 1.0));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, gout.matmul_t(self.value(*b)));
                    acc(&mut grads, *b, self.value(*a).t_matmul(&gout));
                }
                Op::TMatMul(a, b) => {
                    acc(&mut grads, *a, self.value(*b).matmul_t(&gout));
                    acc(&mut grads, *b, self.value(*a).matmul(&gout));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, gout.clone());
                    acc(&mut grads, *b, gout.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, gout.clone());
                    acc(&mut grads, *b, gout.scale(-1.0));
                }
                Op::AddRow(a, r) => {
                    let ones = Mat::filled(1, gout.rows(), 1.0);
                    acc(&mut grads, *r, ones.matmul(&gout));
                    acc(&mut grads, *a, gout.clone());
                }
                Op::Scale(a, s) => acc(&mut grads, *a, gout.scale(*s)),
                Op::Map(a, fm) => {
                    let d = self.value(*a).zip_map(&gout, |x, g| g * fm.derivative(x));
                    acc(&mut grads, *a, d);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        acc(&mut grads, *p, gout.cols_range(start, start + w));
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut g = Mat::zeros(src.rows(), src.cols());
                    for i in 0..g.rows() {
                        g.row_mut(i)[*start..*start + gout.cols()].copy_from_slice(gout.row(i));
                    }
                    acc(&mut grads, *a, g);
                }
                Op::SelectRows(a, rows) => {
                    let src = self.value(*a);
                    let mut g = Mat::zeros(src.rows(), src.cols());
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, x) in g.row_mut(r).iter_mut().zip(gout.row(k)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *a, g);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut grads, *a, Mat::filled(r, c, gout[(0, 0)]));
                }
                Op::RowScale(a, z) => {
                    let x = self.value(*a);
                    let s = self.value(*z);
                    acc(&mut grads, *a, gout.scale_rows(s));
                    let zg = gout.zip_map(x, |g, v| g * v).row_sums();
                    acc(&mut grads, *z, zg);
                }
                Op::RecipAddEps(a) => {
                    let d = node.value.zip_map(&gout, |y, g| -g * y * y);
                    acc(&mut grads, *a, d);
                }
                Op::GraphConv(a, g) => acc(&mut grads, *a, graph_convolution_adjoint(g, &gout)),
                Op::ArcCos(a) => acc(
                    &mut grads,
                    *a,
                    arccos_kernel_backward(self.value(*a), &gout),
                ),
                Op::Mse(a, target) => {
                    let p = self.value(*a);
                    let n = p.as_slice().len().max(1) as f64;
                    let s = 2.0 * gout[(0, 0)] / n;
                    acc(&mut grads, *a, p.zip_map(target, |x, t| s * (x - t)));
                }
                Op::CrossEntropy(a, targets) => {
                    let z = self.value(*a);
                    let mut g = Mat::zeros(z.rows(), z.cols());
                    let s = gout[(0, 0)] / targets.len().max(1) as f64;
                    for &(r, c) in targets {
                        let p = softmax_row(z.row(r));
                        for (k, pk) in p.iter().enumerate() {
                            g[(r, k)] += s * (pk - if k == c { 1.0 } else { 0.0 });
                        }
                    }
                    acc(&mut grads, *a, g);
                }
            }
            grads[idx] = Some(gout);
        }
        Ok(Gradients { grads })
    }
}

/// Gradients indexed by tape variable; `None` where the loss does not
/// depend on the variable.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `like` when unreachable.
    pub fn get_or_zeros(&self, v: Var, like: &Mat) -> Mat {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(like.rows(), like.cols()))
    }
}

#[cfg(test)]
mod tests;

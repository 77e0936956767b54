//! One forward definition, two executors: plain matrices for inference and
//! the autodiff tape for training.

use alloc::rc::Rc;
use alloc::vec::Vec;

use crate::attention::{self, arccos_kernel, FeatureMap};
use crate::autodiff::{Tape, Var};
use crate::error::{shape_err, Result};
use crate::graph::{graph_convolution, Graph};
use crate::linalg::Mat;

pub trait Backend {
    type V: Clone;

    fn leaf(&mut self, m: Mat) -> Self::V;
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a Mat;
    fn matmul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn add_row(&mut self, a: &Self::V, row: &Self::V) -> Result<Self::V>;
    fn relu(&mut self, a: &Self::V) -> Self::V;
    fn concat_cols(&mut self, parts: &[Self::V]) -> Result<Self::V>;
    fn graph_conv(&mut self, a: &Self::V) -> Result<Self::V>;
    fn linear_attention(
        &mut self,
        q: &Self::V,
        k: &Self::V,
        v: &Self::V,
        fm: FeatureMap,
        eps: f64,
    ) -> Result<Self::V>;
    fn arccos_kernel(&mut self, phi: &Self::V) -> Self::V;
    fn kernel_attention(&mut self, kernel: &Self::V, v: &Self::V, eps: f64) -> Result<Self::V>;

    fn zeros(&mut self, rows: usize, cols: usize) -> Self::V {
        self.leaf(Mat::zeros(rows, cols))
    }
}

pub struct Eager<'g> {
    graph: &'g Graph,
}

impl<'g> Eager<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Self { graph }
    }
}

fn same_shape(a: &Mat, b: &Mat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

impl Backend for Eager<'_> {
    type V = Rc<Mat>;

    fn leaf(&mut self, m: Mat) -> Rc<Mat> {
        Rc::new(m)
    }

    fn value<'a>(&'a self, v: &'a Rc<Mat>) -> &'a Mat {
        v
    }

    fn matmul(&mut self, a: &Rc<Mat>, b: &Rc<Mat>) -> Result<Rc<Mat>> {
        if a.cols() != b.rows() {
            return Err(shape_err!("matmul {:?} × {:?}", a.shape(), b.shape()));
        }
        Ok(Rc::new(a.matmul(b)))
    }

    fn add(&mut self, a: &Rc<Mat>, b: &Rc<Mat>) -> Result<Rc<Mat>> {
        same_shape(a, b)?;
        Ok(Rc::new(a.add(b)))
    }

    fn sub(&mut self, a: &Rc<Mat>, b: &Rc<Mat>) -> Result<Rc<Mat>> {
        same_shape(a, b)?;
        Ok(Rc::new(a.sub(b)))
    }

    fn add_row(&mut self, a: &Rc<Mat>, row: &Rc<Mat>) -> Result<Rc<Mat>> {
        if row.rows() != 1 || row.cols() != a.cols() {
            return Err(shape_err!("add_row {:?} + {:?}", a.shape(), row.shape()));
        }
        Ok(Rc::new(a.add_row_broadcast(row)))
    }

    fn relu(&mut self, a: &Rc<Mat>) -> Rc<Mat> {
        Rc::new(FeatureMap::Relu.apply(a))
    }

    fn concat_cols(&mut self, parts: &[Rc<Mat>]) -> Result<Rc<Mat>> {
        let mats: Vec<&Mat> = parts.iter().map(|p| &**p).collect();
        if let Some(m) = mats.first() {
            if mats.iter().any(|x| x.rows() != m.rows()) {
                return Err(shape_err!("concat with unequal row counts"));
            }
        }
        Ok(Rc::new(Mat::hstack(&mats)))
    }

    fn graph_conv(&mut self, a: &Rc<Mat>) -> Result<Rc<Mat>> {
        Ok(Rc::new(graph_convolution(self.graph, a)?))
    }

    fn linear_attention(
        &mut self,
        q: &Rc<Mat>,
        k: &Rc<Mat>,
        v: &Rc<Mat>,
        fm: FeatureMap,
        eps: f64,
    ) -> Result<Rc<Mat>> {
        Ok(Rc::new(attention::linear_attention(q, k, v, fm, eps)?))
    }

    fn arccos_kernel(&mut self, phi: &Rc<Mat>) -> Rc<Mat> {
        Rc::new(arccos_kernel(phi))
    }

    fn kernel_attention(&mut self, kernel: &Rc<Mat>, v: &Rc<Mat>, eps: f64) -> Result<Rc<Mat>> {
        Ok(Rc::new(attention::kernel_attention(kernel, v, eps)?))
    }
}

pub struct Taped<'t, 'g> {
    pub tape: &'t mut Tape<'g>,
    graph: &'g Graph,
}

impl<'t, 'g> Taped<'t, 'g> {
    pub fn new(tape: &'t mut Tape<'g>, graph: &'g Graph) -> Self {
        Self { tape, graph }
    }
}

impl Backend for Taped<'_, '_> {
    type V = Var;

    fn leaf(&mut self, m: Mat) -> Var {
        self.tape.leaf(m)
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Mat {
        self.tape.value(*v)
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.tape.matmul(*a, *b)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.tape.add(*a, *b)
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.tape.sub(*a, *b)
    }

    fn add_row(&mut self, a: &Var, row: &Var) -> Result<Var> {
        self.tape.add_row(*a, *row)
    }

    fn relu(&mut self, a: &Var) -> Var {
        self.tape.relu(*a)
    }

    fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.tape.concat_cols(parts)
    }

    fn graph_conv(&mut self, a: &Var) -> Result<Var> {
        self.tape.graph_conv(*a, self.graph)
    }

    fn linear_attention(
        &mut self,
        q: &Var,
        k: &Var,
        v: &Var,
        fm: FeatureMap,
        eps: f64,
    ) -> Result<Var> {
        self.tape.linear_attention(*q, *k, *v, fm, eps)
    }

    fn arccos_kernel(&mut self, phi: &Var) -> Var {
        self.tape.arccos_kernel(*phi)
    }

    fn kernel_attention(&mut self, kernel: &Var, v: &Var, eps: f64) -> Result<Var> {
        self.tape.kernel_attention(*kernel, *v, eps)
    }
}

use super::*;
use crate::attention::{linear_attention, DEFAULT_EPS};
use crate::linalg::{solve, Mat};
use crate::rng;

fn rand_mat(r: usize, c: usize, seed: u64) -> Mat {
    Mat::random_normal(r, c, &mut rng::seeded(seed))
}

/// Builds `f(params)` on a tape and checks it against central differences.
fn check<F>(params: &[Mat], build: F) -> GradientReport
where
    F: for<'g> Fn(&mut Tape<'g>, &[Var]) -> Result<Var>,
{
    struct Wrap<F>(F);
    impl<F> Objective for Wrap<F>
    where
        F: for<'g> Fn(&mut Tape<'g>, &[Var]) -> Result<Var>,
    {
        fn loss<'g>(&'g self, tape: &mut Tape<'g>, params: &[Var]) -> Result<Var> {
            (self.0)(tape, params)
        }
    }
    let obj = Wrap(build);
    let (_, grads) = loss_and_grad(&obj, params).unwrap();
    finite_difference_sweep(|p| loss_and_grad(&obj, p).map(|r| r.0), params, &grads).unwrap()
}

#[test]
fn sum_of_product_by_hand() {
    let mut t = Tape::new();
    let w = t.leaf(Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let x = t.leaf(Mat::from_rows(&[&[5.0], &[7.0]]));
    let y = t.matmul(w, x).unwrap();
    let l = t.sum(y);
    let g = t.backward(l).unwrap();
    assert_eq!(
        g.get(w).unwrap(),
        &Mat::from_rows(&[&[5.0, 7.0], &[5.0, 7.0]])
    );
    assert_eq!(g.get(x).unwrap(), &Mat::from_rows(&[&[4.0], &[6.0]]));
}

#[test]
fn relu_subgradient() {
    let mut t = Tape::new();
    let a = t.leaf(Mat::from_rows(&[&[-1.0, 0.0, 2.0]]));
    let r = t.relu(a);
    let l = t.sum(r);
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(a).unwrap(), &Mat::from_rows(&[&[0.0, 0.0, 1.0]]));
}

#[test]
fn non_scalar_loss_rejected() {
    let mut t = Tape::new();
    let a = t.leaf(Mat::zeros(2, 1));
    assert_eq!(
        t.backward(a).unwrap_err(),
        Error::NonScalarLoss { rows: 2, cols: 1 }
    );
}

#[test]
fn quadratic_exact() {
    let theta = rand_mat(3, 2, 1);
    let (_, g) = {
        struct Q;
        impl Objective for Q {
            fn loss<'g>(&'g self, t: &mut Tape<'g>, p: &[Var]) -> Result<Var> {
                let s = t.t_matmul(p[0], p[0])?;
                let d = t.slice_cols(s, 0, 1)?;
                let d0 = t.select_rows(d, &[0])?;
                let e = t.slice_cols(s, 1, 2)?;
                let e1 = t.select_rows(e, &[1])?;
                let sum = t.add(d0, e1)?;
                Ok(t.sum(sum))
            }
        }
        loss_and_grad(&Q, core::slice::from_ref(&theta)).unwrap()
    };
    assert!(g[0].max_abs_diff(&theta.scale(2.0)) < 1e-12);
    let r = finite_difference_check(
        |p| Ok(p[0].as_slice().iter().map(|x| x * x).sum()),
        core::slice::from_ref(&theta),
        &g,
        1e-4,
    )
    .unwrap();
    assert!(r.max_error() < 1e-9);
}

#[test]
fn kink_is_reported_not_failed() {
    let p = [Mat::from_rows(&[&[0.0, 1.5]])];
    let g = [Mat::from_rows(&[&[0.0, 1.0]])];
    let r = finite_difference_check(
        |p| Ok(p[0].as_slice().iter().map(|x| x.max(0.0)).sum()),
        &p,
        &g,
        1e-5,
    )
    .unwrap();
    assert_eq!(r.kinks, 1);
    assert!(r.max_error() < 1e-8);
}

#[test]
fn primitives_match_finite_differences() {
    let a = rand_mat(5, 3, 2);
    let b = rand_mat(3, 4, 3);
    let row = rand_mat(1, 4, 4);
    let r = check(&[a, b, row], |t, p| {
        let m = t.matmul(p[0], p[1])?;
        let m = t.add_row(m, p[2])?;
        let e = t.elu_plus_one(m);
        let sq = t.scale(e, 0.7);
        let z = t.slice_cols(sq, 1, 2)?;
        let z = t.recip_add_eps(z, 0.5);
        let rs = t.row_scale(sq, z)?;
        let c = t.concat_cols(&[rs, m])?;
        let tm = t.t_matmul(c, c)?;
        let d = t.sub(tm, tm)?;
        let both = t.add(tm, d)?;
        let target = Mat::filled(8, 8, 0.1);
        t.mse(both, &target)
    });
    assert!(r.max_error() < 1e-4, "{r:?}");
}

struct ConvClassifier {
    g: crate::graph::Graph,
}

impl Objective for ConvClassifier {
    fn loss<'g>(&'g self, t: &mut Tape<'g>, p: &[Var]) -> Result<Var> {
        let h = t.graph_conv(p[0], &self.g)?;
        let z = t.matmul(h, p[1])?;
        t.cross_entropy(z, &[(0, 1), (2, 3), (4, 0)])
    }
}

#[test]
fn cross_entropy_and_graph_conv() {
    let obj = ConvClassifier {
        g: crate::graph::Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]).unwrap(),
    };
    let params = [rand_mat(5, 3, 5), rand_mat(3, 4, 6)];
    let (_, grads) = loss_and_grad(&obj, &params).unwrap();
    let r =
        finite_difference_sweep(|p| loss_and_grad(&obj, p).map(|r| r.0), &params, &grads).unwrap();
    assert!(r.max_error() < 1e-4, "{r:?}");
}

#[test]
fn kernel_attention_composite() {
    let phi = rand_mat(6, 3, 7);
    let v = rand_mat(6, 2, 8);
    let r = check(&[phi, v], |t, p| {
        let k = t.arccos_kernel(p[0]);
        let o = t.kernel_attention(k, p[1], DEFAULT_EPS)?;
        let o2 = t.t_matmul(o, p[1])?;
        let o3 = t.relu(o2);
        Ok(t.sum(o3))
    });
    assert!(r.max_error() < 1e-4, "{r:?}");
}

#[test]
fn linear_attention_grad_wrt_wv() {
    let x = rand_mat(8, 3, 9);
    let q = rand_mat(8, 4, 10);
    let wv = rand_mat(3, 3, 11);
    let mut t = Tape::new();
    let (qv, xv) = (t.leaf(q.clone()), t.leaf(x.clone()));
    let w = t.leaf(wv.clone());
    let v = t.matmul(xv, w).unwrap();
    let o = t
        .linear_attention(qv, qv, v, FeatureMap::Relu, DEFAULT_EPS)
        .unwrap();
    assert!(
        t.value(o).max_abs_diff(
            &linear_attention(&q, &q, &x.matmul(&wv), FeatureMap::Relu, DEFAULT_EPS).unwrap()
        ) < 1e-12
    );
    let l = t.sum(o);
    let grad = t.backward(l).unwrap().get(w).unwrap().clone();
    let f = |p: &[Mat]| {
        Ok(linear_attention(&q, &q, &x.matmul(&p[0]), FeatureMap::Relu, DEFAULT_EPS)?.sum())
    };
    let r = finite_difference_sweep(f, &[wv], &[grad]).unwrap();
    assert!(r.max_error() < 1e-5);
}

struct LeastSquares {
    x: Mat,
    y: Mat,
}

impl Objective for LeastSquares {
    fn loss<'g>(&'g self, t: &mut Tape<'g>, p: &[Var]) -> Result<Var> {
        let x = t.leaf(self.x.clone());
        let pred = t.matmul(x, p[0])?;
        t.mse(pred, &self.y)
    }
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let obj = LeastSquares {
        x: rand_mat(10, 3, 12),
        y: rand_mat(10, 1, 13),
    };
    let w0 = rand_mat(3, 1, 14);
    for opt in [Optimizer::sgd(0.0), Optimizer::adam(0.0)] {
        let mut w = [w0.clone()];
        train(&obj, &mut w, opt, 5).unwrap();
        assert_eq!(w[0], w0);
    }
}

#[test]
fn regression_reaches_normal_equations() {
    let x = rand_mat(40, 3, 15);
    let y = x
        .matmul(&Mat::column(&[1.0, -2.0, 0.5]))
        .add(&rand_mat(40, 1, 16).scale(0.1));
    let want = solve(&x.t_matmul(&x), &x.t_matmul(&y)).unwrap();
    let obj = LeastSquares { x, y };
    let mut w = [Mat::zeros(3, 1)];
    train(&obj, &mut w, Optimizer::adam(0.05), 1500).unwrap();
    assert!(w[0].max_abs_diff(&want) < 1e-3, "{:?} vs {:?}", w[0], want);
}

#[test]
fn divergence_reports_epoch() {
    let obj = LeastSquares {
        x: rand_mat(10, 3, 17).scale(10.0),
        y: rand_mat(10, 1, 18),
    };
    let mut w = [Mat::zeros(3, 1)];
    match train(&obj, &mut w, Optimizer::sgd(10.0), 500) {
        Err(Error::Diverged { epoch }) => assert!(epoch > 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

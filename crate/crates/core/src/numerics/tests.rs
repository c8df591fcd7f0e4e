use std::rc::Rc;

use proptest::prelude::*;

use super::*;

fn rand4(seed: u64) -> Matrix {
    Matrix::randn(4, 4, 1.0, &mut RngSeed(seed).rng())
}

/// Weights the op output with a fixed random matrix so that ops whose plain
/// sum is constant (softmax, layer norm) still have informative gradients.
fn weighted_root(g: &mut Graph, out: NodeId, seed: u64) -> NodeId {
    let (r, c) = g.shape(out);
    let w = g.input(Matrix::randn(r, c, 1.0, &mut RngSeed(seed).rng()));
    let prod = g.mul(out, w).unwrap();
    g.sum(prod).unwrap()
}

fn check_all(g: &mut Graph, root: NodeId, params: &[NodeId]) -> f64 {
    params
        .iter()
        .map(|&p| grad_check(g, root, p, GRAD_CHECK_STEP).unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut g = Graph::new();
    let x = g.input(Matrix::from_rows(&[[0.0, 0.0]]));
    let y = g.softmax_rows(x).unwrap();
    assert_eq!(g.value(y).data(), &[0.5, 0.5]);
}

#[test]
fn layer_norm_of_one_three() {
    let mut g = Graph::new();
    let x = g.input(Matrix::from_rows(&[[1.0, 3.0]]));
    let gain = g.param(Matrix::filled(1, 2, 1.0));
    let bias = g.param(Matrix::zeros(1, 2));
    let y = g.layer_norm(x, Some(gain), Some(bias), 0.0).unwrap();
    assert_eq!(g.value(y).data(), &[-1.0, 1.0]);
    // eps only perturbs the scale by ~eps/2
    let y = g.layer_norm(x, Some(gain), Some(bias), 1e-5).unwrap();
    assert!(g.value(y).max_abs_diff(&Matrix::from_rows(&[[-1.0, 1.0]])) < 1e-5);
}

#[test]
fn quadratic_gradient() {
    let mut g = Graph::new();
    let x = g.param(Matrix::row_vector(vec![1.0, 2.0, 3.0]));
    let sq = g.mul(x, x).unwrap();
    let root = g.sum(sq).unwrap();
    g.backward(root).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
}

#[test]
fn uniform_cross_entropy_gradient_closed_form() {
    let (batch, vocab) = (3, 5);
    let targets = [0usize, 4, 2];
    let mut g = Graph::new();
    let logits = g.param(Matrix::zeros(batch, vocab));
    let loss = g.cross_entropy(logits, &targets).unwrap();
    assert!((g.value(loss).get(0, 0) - (vocab as f64).ln()).abs() < 1e-12);
    g.backward(loss).unwrap();
    let grad = g.grad(logits).unwrap();
    for (r, &t) in targets.iter().enumerate() {
        for c in 0..vocab {
            let onehot = if c == t { 1.0 } else { 0.0 };
            let expect = (1.0 / vocab as f64 - onehot) / batch as f64;
            assert!((grad.get(r, c) - expect).abs() < 1e-15);
        }
    }
}

#[test]
fn ignored_targets_do_not_contribute() {
    let mut g = Graph::new();
    let logits = g.param(rand4(3));
    let loss = g
        .cross_entropy(logits, &[1, IGNORE_TARGET, 2, IGNORE_TARGET])
        .unwrap();
    g.backward(loss).unwrap();
    let grad = g.grad(logits).unwrap();
    assert!(grad.row(1).iter().all(|&v| v == 0.0));
    assert!(grad.row(3).iter().all(|&v| v == 0.0));
    assert!(grad_check(&mut g, loss, logits, GRAD_CHECK_STEP).unwrap() < 1e-4);
}

#[test]
fn identity_root_has_zero_error() {
    let mut g = Graph::new();
    let x = g.param(Matrix::filled(1, 1, 0.5));
    let root = g.scale(x, 1.0).unwrap();
    // dyadic step keeps the difference quotient exact
    assert_eq!(grad_check(&mut g, root, x, 1.0 / 65536.0).unwrap(), 0.0);
}

#[test]
fn silu_at_zero() {
    let mut g = Graph::new();
    let x = g.param(Matrix::filled(1, 1, 0.0));
    let y = g.silu(x).unwrap();
    let root = g.sum(y).unwrap();
    assert!(grad_check(&mut g, root, x, 1e-5).unwrap() < 1e-4);
    assert!((g.grad(x).unwrap().get(0, 0) - 0.5).abs() < 1e-15);
}

#[test]
fn every_op_kind_passes_grad_check() {
    let mut worst = Vec::new();

    macro_rules! case {
        ($name:expr, |$g:ident, $a:ident, $b:ident| $body:expr) => {{
            let mut $g = Graph::new();
            let $a = $g.param(rand4(1));
            let $b = $g.param(rand4(2));
            let out: NodeId = $body;
            let root = weighted_root(&mut $g, out, 99);
            worst.push(($name, check_all(&mut $g, root, &[$a, $b])));
        }};
    }

    case!("matmul", |g, a, b| g.matmul(a, b).unwrap());
    case!("matmul_nt", |g, a, b| g.matmul_nt(a, b).unwrap());
    case!("add", |g, a, b| g.add(a, b).unwrap());
    case!("mul", |g, a, b| g.mul(a, b).unwrap());
    case!("add_row", |g, a, b| {
        let row = g.block(b, 0, 0, 1, 4).unwrap();
        g.add_row(a, row).unwrap()
    });
    case!("add_const", |g, a, b| {
        let _ = b;
        let mut mask = Matrix::zeros(4, 4);
        mask.set(0, 3, f64::NEG_INFINITY);
        let m = g.add_const(a, Rc::new(mask)).unwrap();
        g.softmax_rows(m).unwrap()
    });
    case!("transpose", |g, a, b| {
        let t = g.transpose(a).unwrap();
        g.mul(t, b).unwrap()
    });
    case!("softmax", |g, a, b| {
        let _ = b;
        g.softmax_rows(a).unwrap()
    });
    case!("layer_norm", |g, a, b| {
        let gain = g.block(b, 0, 0, 1, 4).unwrap();
        let bias = g.block(b, 1, 0, 1, 4).unwrap();
        g.layer_norm(a, Some(gain), Some(bias), 1e-5).unwrap()
    });
    case!("silu", |g, a, b| {
        let s = g.silu(a).unwrap();
        g.add(s, b).unwrap()
    });
    case!("scale", |g, a, b| {
        let s = g.scale(a, -2.5).unwrap();
        g.mul(s, b).unwrap()
    });
    case!("concat_cols", |g, a, b| {
        let c = g.concat_cols(&[a, b]).unwrap();
        g.matmul_nt(c, c).unwrap()
    });
    case!("concat_rows", |g, a, b| {
        let c = g.concat_rows(&[a, b]).unwrap();
        g.matmul(c, b).unwrap()
    });
    case!("block", |g, a, b| {
        let x = g.block(a, 1, 1, 3, 2).unwrap();
        let y = g.block(b, 0, 1, 2, 3).unwrap();
        g.matmul(x, y).unwrap()
    });
    case!("gather", |g, a, b| {
        let e = g.gather_rows(a, &[3, 0, 3, 1]).unwrap();
        g.mul(e, b).unwrap()
    });
    case!("rotary", |g, a, b| {
        let mut rng = RngSeed(7).rng();
        let cos = Rc::new(Matrix::randn(4, 2, 1.0, &mut rng));
        let sin = Rc::new(Matrix::randn(4, 2, 1.0, &mut rng));
        let r = g.rotary(a, cos, sin).unwrap();
        g.mul(r, b).unwrap()
    });

    // cross-entropy is scalar already
    {
        let mut g = Graph::new();
        let a = g.param(rand4(1));
        let b = g.param(rand4(2));
        let z = g.matmul(a, b).unwrap();
        let root = g.cross_entropy(z, &[0, 3, 1, 2]).unwrap();
        worst.push(("cross_entropy", check_all(&mut g, root, &[a, b])));
    }

    for (name, err) in &worst {
        assert!(*err < 1e-4, "{name}: grad check error {err}");
    }
}

#[test]
fn non_scalar_root_rejected() {
    let mut g = Graph::new();
    let x = g.param(rand4(1));
    assert_eq!(g.backward(x).unwrap_err(), NumericsError::NonScalarRoot(4, 4));
}

#[test]
fn shape_errors_name_dimensions() {
    let mut g = Graph::new();
    let a = g.param(Matrix::zeros(2, 3));
    let b = g.param(Matrix::zeros(2, 3));
    let msg = g.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("2x3"), "{msg}");
    assert!(g.add_row(a, b).is_err());
    assert!(g.gather_rows(a, &[5]).is_err());
    assert!(g.block(a, 1, 1, 2, 2).is_err());
}

#[test]
fn seeded_graphs_are_bit_identical() {
    let run = || {
        let mut g = Graph::new();
        let mut rng = RngSeed(11).rng();
        let a = g.param(Matrix::randn(6, 5, 1.0, &mut rng));
        let b = g.param(Matrix::randn(5, 3, 1.0, &mut rng));
        let z = g.matmul(a, b).unwrap();
        let s = g.silu(z).unwrap();
        let loss = g.cross_entropy(s, &[0, 1, 2, 0, 1, 2]).unwrap();
        g.backward(loss).unwrap();
        (g.value(loss).clone(), g.grad(a).unwrap().clone(), g.grad(b).unwrap().clone())
    };
    assert_eq!(run(), run());
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-50.0f64..50.0, rows * cols)
        .prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(m in matrix_strategy(3, 7)) {
        let mut g = Graph::new();
        let x = g.input(m);
        let y = g.softmax_rows(x).unwrap();
        for r in 0..3 {
            let s: f64 = g.value(y).row(r).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_rows_are_standardised(m in matrix_strategy(3, 8)) {
        let spread = (0..3).all(|r| {
            let row = m.row(r);
            row.iter().any(|v| (v - row[0]).abs() > 1e-3)
        });
        prop_assume!(spread);
        let mut g = Graph::new();
        let x = g.input(m);
        let y = g.layer_norm(x, None, None, 0.0).unwrap();
        for r in 0..3 {
            let row = g.value(y).row(r);
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((var - 1.0).abs() < 1e-8);
        }
    }
}

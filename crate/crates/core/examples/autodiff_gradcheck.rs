// Usage: cargo run --release --example autodiff_gradcheck
//
// Builds a small attention-shaped graph on the tape, runs the backward pass
// and checks every parameter against central finite differences.

use std::rc::Rc;

use anyhow::Result;

use fope::model::LAYER_NORM_EPS;
use fope::numerics::{grad_check, Graph, Matrix, RngSeed, GRAD_CHECK_STEP};

pub fn main() -> Result<()> {
    let mut rng = RngSeed(11).rng();
    let mut g = Graph::new();
    let x = g.input(Matrix::randn(4, 6, 1.0, &mut rng));
    let wq = g.param(Matrix::randn(6, 6, 0.5, &mut rng));
    let wk = g.param(Matrix::randn(6, 6, 0.5, &mut rng));
    let gain = g.param(Matrix::randn(1, 6, 1.0, &mut rng));
    let bias = g.param(Matrix::randn(1, 6, 0.1, &mut rng));
    let head = g.param(Matrix::randn(6, 5, 0.5, &mut rng));

    let h = g.layer_norm(x, Some(gain), Some(bias), LAYER_NORM_EPS)?;
    let q = g.matmul(h, wq)?;
    let k = g.matmul(h, wk)?;
    let angles: Vec<f64> = (0..4).flat_map(|p| (0..3).map(move |m| p as f64 * 0.5f64.powi(m))).collect();
    let cos = Rc::new(Matrix::new(4, 3, angles.iter().map(|a| a.cos()).collect())?);
    let sin = Rc::new(Matrix::new(4, 3, angles.iter().map(|a| a.sin()).collect())?);
    let q = g.rotary(q, cos.clone(), sin.clone())?;
    let k = g.rotary(k, cos, sin)?;
    let scores = g.matmul_nt(q, k)?;
    let scores = g.scale(scores, 1.0 / 6f64.sqrt())?;
    let attn = g.softmax_rows(scores)?;
    let mixed = g.matmul(attn, h)?;
    let act = g.silu(mixed)?;
    let logits = g.matmul(act, head)?;
    let loss = g.cross_entropy(logits, &[1, 4, 0, 2])?;
    println!("graph of {} nodes, loss {:.6}", g.len(), g.value(loss).get(0, 0));

    for (name, p) in [("wq", wq), ("wk", wk), ("gain", gain), ("bias", bias), ("head", head)] {
        let err = grad_check(&mut g, loss, p, GRAD_CHECK_STEP)?;
        println!("  {name:5} relative error {err:.2e}");
    }
    Ok(())
}

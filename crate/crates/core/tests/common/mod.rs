#![allow(dead_code)]

use std::sync::Arc;

use pncl::diffcore::{finite_difference_grad, grad, gradient_discrepancy, CsrMatrix, Graph, ParamStore, Tensor, Var};
use pncl::rng::rng_from;
use pncl::Result;
use rand::Rng;

pub const FD_STEP: f64 = 1e-6;

fn random(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = rng_from(seed);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Contracts a node of any shape against fixed irregular weights so every
/// output entry reaches the scalar loss.
fn contract(g: &mut Graph, out: Var) -> Result<Var> {
    let shape = g.value(out).shape().to_vec();
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|i| (1.3 * i as f64 + 0.7).sin()).collect())?;
    let w = g.constant(w);
    let p = g.mul(out, w)?;
    Ok(g.sum(p))
}

/// Worst analytic-vs-central-difference discrepancy of one operation.
pub fn check_op<F>(inputs: Vec<Tensor>, op: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut params = ParamStore::new();
    for (i, t) in inputs.into_iter().enumerate() {
        params.insert(format!("x{i}"), t).unwrap();
    }
    let (_, analytic) = grad(&params, |g, v| {
        let out = op(g, v)?;
        contract(g, out)
    })
    .unwrap();
    let numeric = finite_difference_grad(
        |p| {
            grad(p, |g, v| {
                let out = op(g, v)?;
                contract(g, out)
            })
            .map(|r| r.0)
        },
        &params,
        FD_STEP,
    )
    .unwrap();
    gradient_discrepancy(&analytic, &numeric).unwrap()
}

/// Gradient check of every tape primitive on small random inputs.
pub fn primitive_checks() -> Vec<(&'static str, f64)> {
    let a = || random(3, 4, -1.0, 1.0, 1);
    let b = || random(3, 4, -1.0, 1.0, 2);
    let row = || random(1, 4, -1.0, 1.0, 3);
    let pos_col = || random(3, 1, 0.5, 1.5, 4);
    let csr = Arc::new(CsrMatrix::from_rows(3, vec![vec![(0, 1.0), (2, -2.0)], vec![(1, 0.5)]]));
    vec![
        ("add", check_op(vec![a(), b()], |g, v| g.add(v[0], v[1]))),
        ("sub", check_op(vec![a(), b()], |g, v| g.sub(v[0], v[1]))),
        ("mul", check_op(vec![a(), b()], |g, v| g.mul(v[0], v[1]))),
        ("scale", check_op(vec![a()], |g, v| Ok(g.scale(v[0], -2.5)))),
        ("add_const", check_op(vec![a()], |g, v| Ok(g.add_const(v[0], 0.3)))),
        ("matmul", check_op(vec![a(), random(4, 2, -1.0, 1.0, 5)], |g, v| g.matmul(v[0], v[1]))),
        ("transpose", check_op(vec![a()], |g, v| Ok(g.transpose(v[0])))),
        ("add_row", check_op(vec![a(), row()], |g, v| g.add_row(v[0], v[1]))),
        ("mul_row", check_op(vec![a(), row()], |g, v| g.mul_row(v[0], v[1]))),
        ("div_col", check_op(vec![a(), pos_col()], |g, v| g.div_col(v[0], v[1]))),
        ("sum_rows", check_op(vec![a()], |g, v| Ok(g.sum_rows(v[0])))),
        ("sum", check_op(vec![a()], |g, v| Ok(g.sum(v[0])))),
        ("mean", check_op(vec![a()], |g, v| Ok(g.mean(v[0])))),
        ("softmax", check_op(vec![a()], |g, v| Ok(g.softmax(v[0])))),
        ("layer_norm", check_op(vec![a()], |g, v| Ok(g.layer_norm(v[0], 1e-12)))),
        ("gelu", check_op(vec![a()], |g, v| Ok(g.gelu(v[0])))),
        ("relu", check_op(vec![a()], |g, v| Ok(g.relu(v[0])))),
        ("col_slice", check_op(vec![a()], |g, v| g.col_slice(v[0], 1, 2))),
        ("concat_cols", check_op(vec![a(), random(3, 2, -1.0, 1.0, 6)], |g, v| g.concat_cols(&[v[0], v[1]]))),
        ("sparse", check_op(vec![random(3, 2, -1.0, 1.0, 7)], move |g, v| g.sparse(&csr, v[0]))),
    ]
}

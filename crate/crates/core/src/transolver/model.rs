use rand::Rng as _;
use rayon::prelude::*;

use super::config::TransolverConfig;
use super::lora::LoraAdapter;
use crate::data::{GridField, GridSample};
use crate::diffcore::{grad, Graph, ParamStore, Tensor, Var};
use crate::rng::rng_from;
use crate::{Error, Result};

pub(crate) const LN_EPS: f64 = 1e-12;
const SLICE_EPS: f64 = 1e-30;

/// Projections that carry a bias (`W`, `b`) inside each layer.
pub(crate) const LAYER_LINEAR: [&str; 5] = ["u", "m", "o", "ff1", "ff2"];
/// Bias-free projections inside each layer.
pub(crate) const LAYER_PLAIN: [&str; 3] = ["q", "k", "v"];

pub fn layer_param(layer: usize, name: &str) -> String {
    format!("layer{layer}.{name}")
}

/// Transolver operator. Weights live in a [`ParamStore`] under dotted names,
/// e.g. `layer0.q.w`; LoRA factors sit next to their base matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransolverModel {
    pub(crate) config: TransolverConfig,
    pub(crate) params: ParamStore,
    pub(crate) adapters: Vec<LoraAdapter>,
}

/// `(x, y, k)` per grid node, grid order.
pub fn point_features(k: &GridField) -> Tensor {
    let (nx, ny) = (k.nx(), k.ny());
    let mut data = Vec::with_capacity(3 * k.len());
    for j in 0..ny {
        for i in 0..nx {
            data.extend_from_slice(&[i as f64 * k.hx(), j as f64 * k.hy(), k.at(i, j)]);
        }
    }
    Tensor::matrix(k.len(), 3, data).expect("non-empty grid")
}

fn uniform(rng: &mut crate::rng::Rng, rows: usize, cols: usize) -> Tensor {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, data).expect("positive shape")
}

/// Parameter lookup for one graph build.
pub(crate) struct Bound<'a> {
    model: &'a TransolverModel,
    vars: &'a [Var],
}

impl Bound<'_> {
    fn var(&self, name: &str) -> Result<Var> {
        self.model
            .params
            .index_of(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::InvalidArgument(format!("model has no parameter `{name}`")))
    }

    /// Base weight, plus `α·A·B` when an adapter targets it.
    fn weight(&self, g: &mut Graph, name: &str) -> Result<Var> {
        let w = self.var(name)?;
        match self.model.adapters.iter().find(|a| a.target == name) {
            None => Ok(w),
            Some(a) => {
                let la = self.var(&a.a_name())?;
                let lb = self.var(&a.b_name())?;
                let ab = g.matmul(la, lb)?;
                let s = g.scale(ab, a.alpha);
                g.add(w, s)
            }
        }
    }

    fn linear(&self, g: &mut Graph, x: Var, prefix: &str) -> Result<Var> {
        let w = self.weight(g, &format!("{prefix}.w"))?;
        let b = self.var(&format!("{prefix}.b"))?;
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }

    fn plain(&self, g: &mut Graph, x: Var, prefix: &str) -> Result<Var> {
        let w = self.weight(g, &format!("{prefix}.w"))?;
        g.matmul(x, w)
    }

    fn norm(&self, g: &mut Graph, x: Var, prefix: &str) -> Result<Var> {
        let n = g.layer_norm(x, LN_EPS);
        let gain = self.var(&format!("{prefix}.g"))?;
        let bias = self.var(&format!("{prefix}.b"))?;
        let y = g.mul_row(n, gain)?;
        g.add_row(y, bias)
    }

    fn encode(&self, g: &mut Graph, points: Var) -> Result<Var> {
        let h = self.linear(g, points, "enc.l1")?;
        let h = g.gelu(h);
        let h = self.linear(g, h, "enc.l2")?;
        self.norm(g, h, "enc.ln")
    }

    fn slice(&self, g: &mut Graph, l: usize, x: Var) -> Result<(Var, Var)> {
        let u = self.linear(g, x, &layer_param(l, "u"))?;
        let logits = self.linear(g, x, &layer_param(l, "m"))?;
        let m = g.softmax(logits);
        let z = slice_node(g, u, m)?;
        Ok((z, m))
    }

    fn attend(&self, g: &mut Graph, l: usize, z: Var) -> Result<Var> {
        let cfg = &self.model.config;
        let q = self.plain(g, z, &layer_param(l, "q"))?;
        let k = self.plain(g, z, &layer_param(l, "k"))?;
        let v = self.plain(g, z, &layer_param(l, "v"))?;
        let d = cfg.head_dim();
        let scale = 1.0 / (d as f64).sqrt();
        let mut heads = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let qh = g.col_slice(q, h * d, d)?;
            let kh = g.col_slice(k, h * d, d)?;
            let vh = g.col_slice(v, h * d, d)?;
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale);
            let att = g.softmax(scores);
            heads.push(g.matmul(att, vh)?);
        }
        let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? };
        self.linear(g, cat, &layer_param(l, "o"))
    }

    fn layer(&self, g: &mut Graph, l: usize, x: Var) -> Result<Var> {
        let h = self.norm(g, x, &layer_param(l, "ln1"))?;
        let (z, m) = self.slice(g, l, h)?;
        let zt = self.attend(g, l, z)?;
        let xt = g.matmul(m, zt)?;
        let x = g.add(x, xt)?;
        let h = self.norm(g, x, &layer_param(l, "ln2"))?;
        let h = self.linear(g, h, &layer_param(l, "ff1"))?;
        let h = g.gelu(h);
        let h = self.linear(g, h, &layer_param(l, "ff2"))?;
        g.add(x, h)
    }

    fn forward(&self, g: &mut Graph, points: Var) -> Result<Var> {
        let check = |g: &Graph, v: Var, what: String| {
            if g.value(v).is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite { context: what })
            }
        };
        let mut x = self.encode(g, points)?;
        check(g, x, "encoder".into())?;
        for l in 0..self.model.config.layers {
            x = self.layer(g, l, x)?;
            check(g, x, format!("layer {l}"))?;
        }
        let h = self.norm(g, x, "dec.ln")?;
        let h = self.linear(g, h, "dec.l1")?;
        let h = g.gelu(h);
        let out = self.linear(g, h, "dec.l2")?;
        check(g, out, "decoder".into())?;
        Ok(out)
    }
}

/// `Z = Mᵀ U / (colsum(M) + ε)`.
fn slice_node(g: &mut Graph, u: Var, m: Var) -> Result<Var> {
    let mt = g.transpose(m);
    let num = g.matmul(mt, u)?;
    let mass = g.sum_rows(m);
    let mass = g.transpose(mass);
    let mass = g.add_const(mass, SLICE_EPS);
    g.div_col(num, mass)
}

fn check_points(cfg: &TransolverConfig, points: &Tensor) -> Result<()> {
    if points.shape().len() != 2 || points.cols() != cfg.input_features {
        return Err(Error::InvalidArgument(format!(
            "expected N×{} points, got {:?}",
            cfg.input_features,
            points.shape()
        )));
    }
    Ok(())
}

impl TransolverModel {
    /// Fresh model: weights uniform in `±1/√fan_in`, zero biases, unit norm gains.
    pub fn new(config: TransolverConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from(seed);
        let (f, c, s) = (config.input_features, config.channels, config.slices);
        let mut p = ParamStore::new();
        let mut linear = |p: &mut ParamStore, name: &str, d: usize, m: usize, bias: bool| -> Result<()> {
            p.insert(format!("{name}.w"), uniform(&mut rng, d, m))?;
            if bias {
                p.insert(format!("{name}.b"), Tensor::zeros(&[1, m]))?;
            }
            Ok(())
        };
        let norm = |p: &mut ParamStore, name: &str| -> Result<()> {
            p.insert(format!("{name}.g"), Tensor::full(&[1, c], 1.0))?;
            p.insert(format!("{name}.b"), Tensor::zeros(&[1, c]))?;
            Ok(())
        };
        linear(&mut p, "enc.l1", f, c, true)?;
        linear(&mut p, "enc.l2", c, c, true)?;
        norm(&mut p, "enc.ln")?;
        for l in 0..config.layers {
            norm(&mut p, &layer_param(l, "ln1"))?;
            linear(&mut p, &layer_param(l, "u"), c, c, true)?;
            linear(&mut p, &layer_param(l, "m"), c, s, true)?;
            for name in LAYER_PLAIN {
                linear(&mut p, &layer_param(l, name), c, c, false)?;
            }
            linear(&mut p, &layer_param(l, "o"), c, c, true)?;
            norm(&mut p, &layer_param(l, "ln2"))?;
            linear(&mut p, &layer_param(l, "ff1"), c, c, true)?;
            linear(&mut p, &layer_param(l, "ff2"), c, c, true)?;
        }
        norm(&mut p, "dec.ln")?;
        linear(&mut p, "dec.l1", c, c, true)?;
        linear(&mut p, "dec.l2", c, 1, true)?;
        Ok(Self { config, params: p, adapters: Vec::new() })
    }

    pub fn config(&self) -> &TransolverConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn adapters(&self) -> &[LoraAdapter] {
        &self.adapters
    }

    /// Names of every weight matrix a LoRA adapter may target.
    pub fn weight_matrices(&self) -> Vec<String> {
        self.params.iter().map(|(n, _, _)| n).filter(|n| n.ends_with(".w")).map(String::from).collect()
    }

    /// Runs `f` on a graph where every parameter is a constant.
    fn eval<T>(&self, f: impl FnOnce(&Bound, &mut Graph) -> Result<T>) -> Result<T> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self.params.iter().map(|(_, t, _)| g.constant(t.clone())).collect();
        let b = Bound { model: self, vars: &vars };
        f(&b, &mut g)
    }

    /// Point-wise encoder, `N×F → N×C`.
    pub fn encode(&self, points: &Tensor) -> Result<Tensor> {
        check_points(&self.config, points)?;
        self.eval(|b, g| {
            let p = g.constant(points.clone());
            let x = b.encode(g, p)?;
            Ok(g.value(x).clone())
        })
    }

    /// Physics-aware tokens of layer `l` for already-normalized features:
    /// returns `(Z: S×C, M: N×S)`.
    pub fn slice(&self, l: usize, x: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_layer(l)?;
        self.check_width(x)?;
        self.eval(|b, g| {
            let xv = g.constant(x.clone());
            let (z, m) = b.slice(g, l, xv)?;
            Ok((g.value(z).clone(), g.value(m).clone()))
        })
    }

    /// Multi-head attention of layer `l` over the tokens, `S×C → S×C`.
    pub fn attend(&self, l: usize, z: &Tensor) -> Result<Tensor> {
        self.check_layer(l)?;
        self.check_width(z)?;
        self.eval(|b, g| {
            let zv = g.constant(z.clone());
            let out = b.attend(g, l, zv)?;
            Ok(g.value(out).clone())
        })
    }

    fn check_layer(&self, l: usize) -> Result<()> {
        if l >= self.config.layers {
            return Err(Error::InvalidArgument(format!("layer {l} out of range ({} layers)", self.config.layers)));
        }
        Ok(())
    }

    fn check_width(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.config.channels {
            return Err(Error::InvalidArgument(format!(
                "expected ?×{} features, got {:?}",
                self.config.channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Raw network output (no boundary treatment) on the grid of `k`.
    pub fn predict(&self, k: &GridField) -> Result<GridField> {
        let points = point_features(k);
        let out = self.eval(|b, g| {
            let p = g.constant(points);
            let o = b.forward(g, p)?;
            Ok(g.value(o).clone())
        })?;
        GridField::new(k.nx(), k.ny(), out.into_data())
    }

    pub fn forward(&self, sample: &GridSample) -> Result<GridField> {
        self.predict(&sample.k)
    }

    /// Predictions for many fields, in input order.
    pub fn predict_many(&self, ks: &[&GridField]) -> Result<Vec<GridField>> {
        ks.par_iter().map(|k| self.predict(k)).collect()
    }

    /// Appends the forward pass to `g`; `vars` holds one leaf per parameter
    /// in store order. Returns the `N×1` raw output.
    pub fn forward_graph(&self, g: &mut Graph, vars: &[Var], points: &Tensor) -> Result<Var> {
        check_points(&self.config, points)?;
        if vars.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!("{} vars for {} parameters", vars.len(), self.params.len())));
        }
        let p = g.constant(points.clone());
        Bound { model: self, vars }.forward(g, p)
    }

    /// Loss value and gradient for every parameter (zeros for frozen ones).
    /// `loss` receives the raw output node.
    pub fn loss_and_grad<F>(&self, k: &GridField, loss: F) -> Result<(f64, Vec<Tensor>)>
    where
        F: FnOnce(&mut Graph, Var) -> Result<Var>,
    {
        let points = point_features(k);
        grad(&self.params, |g, vars| {
            let out = self.forward_graph(g, vars, &points)?;
            loss(g, out)
        })
    }
}

/// `Z_J = Σ_I M_IJ U_I / Σ_I M_IJ` for given slice weights.
pub fn slice_tokens(u: &Tensor, m: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let uv = g.constant(u.clone());
    let mv = g.constant(m.clone());
    let z = slice_node(&mut g, uv, mv)?;
    Ok(g.value(z).clone())
}

/// `Xᵗ = M·Zᵗ`: every point takes the slice-weighted mix of token rows.
pub fn deslice(zt: &Tensor, m: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let zv = g.constant(zt.clone());
    let mv = g.constant(m.clone());
    let x = g.matmul(mv, zv)?;
    Ok(g.value(x).clone())
}

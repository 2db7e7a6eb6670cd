//! Fully-connected layers and the configurable MLP stack used by the
//! attention sub-networks and the temporal-context streams.

use crate::elem::{fl, Elem};
use crate::error::{Error, Result};
use crate::nn::activations::relu;
use crate::params::{GradBuffer, Init, ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Mat;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;
const PRELU_INIT: f64 = 0.25;

/// Dense layer `y = W x (+ b)` with weight layout `[out, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    weight: ParamId,
    bias: Option<ParamId>,
}

impl Linear {
    pub fn new<F: Elem>(
        store: &mut ParamStore<F>,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        with_bias: bool,
    ) -> Self {
        let weight = store.register(
            &format!("{prefix}.weight"),
            &[out_dim, in_dim],
            Init::KaimingUniform { fan_in: in_dim },
        );
        let bias =
            with_bias.then(|| store.register(&format!("{prefix}.bias"), &[out_dim], Init::Zeros));
        Linear {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    pub fn forward_vec<F: Elem>(&self, store: &ParamStore<F>, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.in_dim);
        let weight = store.value(self.weight);
        let mut out = vec![F::zero(); self.out_dim];
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = F::zero();
            for (w, v) in row.iter().zip(x.iter()) {
                acc = acc + *w * *v;
            }
            *out_v = acc;
        }
        if let Some(b) = self.bias {
            for (o, bv) in out.iter_mut().zip(store.value(b)) {
                *o = *o + *bv;
            }
        }
        out
    }

    /// Batched forward over rows of `x` (B×in → B×out).
    pub fn forward_batch<F: Elem>(&self, store: &ParamStore<F>, x: &Mat<F>) -> Mat<F> {
        debug_assert_eq!(x.cols(), self.in_dim);
        let mut out = Mat::zeros(x.rows(), self.out_dim);
        for r in 0..x.rows() {
            let y = self.forward_vec(store, x.row(r));
            out.row_mut(r).copy_from_slice(&y);
        }
        out
    }

    pub fn backward_batch<F: Elem>(
        &self,
        store: &ParamStore<F>,
        x: &Mat<F>,
        d_out: &Mat<F>,
        grads: &mut GradBuffer<F>,
    ) -> Mat<F> {
        let weight = store.value(self.weight).to_vec();
        let mut d_x = Mat::zeros(x.rows(), self.in_dim);
        {
            let d_weight = grads.grad_mut(self.weight);
            for r in 0..x.rows() {
                let xin = x.row(r);
                let g = d_out.row(r);
                for (o, &go) in g.iter().enumerate() {
                    let wrow = &weight[o * self.in_dim..(o + 1) * self.in_dim];
                    let dw_row = &mut d_weight[o * self.in_dim..(o + 1) * self.in_dim];
                    let dx_row = d_x.row_mut(r);
                    for i in 0..self.in_dim {
                        dw_row[i] = dw_row[i] + go * xin[i];
                        dx_row[i] = dx_row[i] + go * wrow[i];
                    }
                }
            }
        }
        if let Some(b) = self.bias {
            let d_bias = grads.grad_mut(b);
            for r in 0..d_out.rows() {
                for (db, &g) in d_bias.iter_mut().zip(d_out.row(r)) {
                    *db = *db + g;
                }
            }
        }
        d_x
    }
}

/// One stage of an [`Mlp`].
#[derive(Debug, Clone)]
pub enum LayerSpec {
    Linear {
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    },
    BatchNorm,
    ReLU,
    PReLU,
    Dropout(f64),
}

#[derive(Debug, Clone)]
enum Stage {
    Linear(Linear),
    BatchNorm {
        dim: usize,
        gamma: ParamId,
        beta: ParamId,
        running_mean: ParamId,
        running_var: ParamId,
    },
    ReLU,
    PReLU {
        alpha: ParamId,
    },
    Dropout(f64),
}

enum Tape<F> {
    Linear {
        input: Mat<F>,
    },
    BatchNorm {
        x_hat: Mat<F>,
        centered: Mat<F>,
        inv_std: Vec<F>,
    },
    ReLU {
        output: Mat<F>,
    },
    PReLU {
        input: Mat<F>,
    },
    Dropout {
        mask: Mat<F>,
    },
    Identity,
}

/// Forward-pass tape for [`Mlp::backward`].
pub struct MlpCache<F> {
    tapes: Vec<Tape<F>>,
}

/// A sequential stack of dense layers with optional batch norm, PReLU / ReLU
/// and dropout. Batch norm uses batch statistics in training (updating its
/// running averages with momentum 0.1) and the running averages in eval;
/// dropout is inverted in training and the identity in eval.
#[derive(Debug, Clone)]
pub struct Mlp {
    stages: Vec<Stage>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Mlp {
    pub fn new<F: Elem>(store: &mut ParamStore<F>, prefix: &str, specs: &[LayerSpec]) -> Result<Self> {
        let mut stages = Vec::with_capacity(specs.len());
        let mut width: Option<usize> = None;
        let mut first: Option<usize> = None;
        for (i, spec) in specs.iter().enumerate() {
            match *spec {
                LayerSpec::Linear { in_dim, out_dim, bias } => {
                    if let Some(wd) = width {
                        if wd != in_dim {
                            return Err(Error::Config(format!(
                                "{prefix}: layer {i} expects width {in_dim}, previous produced {wd}"
                            )));
                        }
                    }
                    first.get_or_insert(in_dim);
                    stages.push(Stage::Linear(Linear::new(
                        store,
                        &format!("{prefix}.l{i}"),
                        in_dim,
                        out_dim,
                        bias,
                    )));
                    width = Some(out_dim);
                }
                LayerSpec::BatchNorm => {
                    let dim = width.ok_or_else(|| {
                        Error::Config(format!("{prefix}: batch norm before any linear layer"))
                    })?;
                    stages.push(Stage::BatchNorm {
                        dim,
                        gamma: store.register(&format!("{prefix}.l{i}.gamma"), &[dim], Init::Const(1.0)),
                        beta: store.register(&format!("{prefix}.l{i}.beta"), &[dim], Init::Zeros),
                        running_mean: store.register_buffer(
                            &format!("{prefix}.l{i}.running_mean"),
                            &[dim],
                            Init::Zeros,
                        ),
                        running_var: store.register_buffer(
                            &format!("{prefix}.l{i}.running_var"),
                            &[dim],
                            Init::Const(1.0),
                        ),
                    });
                }
                LayerSpec::ReLU => stages.push(Stage::ReLU),
                LayerSpec::PReLU => stages.push(Stage::PReLU {
                    alpha: store.register(&format!("{prefix}.l{i}.alpha"), &[1], Init::Const(PRELU_INIT)),
                }),
                LayerSpec::Dropout(rate) => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::Config(format!(
                            "{prefix}: dropout rate {rate} outside [0, 1)"
                        )));
                    }
                    stages.push(Stage::Dropout(rate));
                }
            }
        }
        let in_dim = first.ok_or_else(|| Error::Config(format!("{prefix}: no linear layer")))?;
        Ok(Mlp {
            stages,
            in_dim,
            out_dim: width.unwrap(),
        })
    }

    pub fn check_input<F: Elem>(&self, x: &Mat<F>) -> Result<()> {
        if x.cols() != self.in_dim {
            return Err(Error::shape(
                "Mlp input",
                format!("width {}", self.in_dim),
                format!("width {}", x.cols()),
            ));
        }
        Ok(())
    }

    /// Eval-mode forward: running batch-norm statistics, dropout disabled.
    pub fn forward_eval<F: Elem>(&self, store: &ParamStore<F>, x: &Mat<F>) -> Mat<F> {
        let mut cur = x.clone();
        for stage in &self.stages {
            cur = match stage {
                Stage::Linear(l) => l.forward_batch(store, &cur),
                Stage::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    let (g, b) = (store.value(*gamma), store.value(*beta));
                    let (rm, rv) = (store.value(*running_mean), store.value(*running_var));
                    let mut out = cur.clone();
                    for r in 0..out.rows() {
                        for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                            let inv = (rv[j] + fl(BN_EPS)).sqrt().recip();
                            *v = g[j] * (*v - rm[j]) * inv + b[j];
                        }
                    }
                    out
                }
                Stage::ReLU => {
                    let mut out = cur.clone();
                    out.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
                    out
                }
                Stage::PReLU { alpha } => {
                    let a = store.value(*alpha)[0];
                    let mut out = cur.clone();
                    out.as_mut_slice()
                        .iter_mut()
                        .for_each(|v| *v = if *v > F::zero() { *v } else { a * *v });
                    out
                }
                Stage::Dropout(_) => cur,
            };
        }
        cur
    }

    /// Eval-mode forward of a single vector.
    pub fn forward_vec_eval<F: Elem>(&self, store: &ParamStore<F>, x: &[F]) -> Vec<F> {
        let m = Mat::from_vec(1, x.len(), x.to_vec()).expect("vector as a 1-row matrix");
        self.forward_eval(store, &m).into_vec()
    }

    /// Train-mode forward: batch statistics for batch norm (running averages
    /// updated in place), inverted dropout drawn from `rng`.
    pub fn forward_train<F: Elem>(
        &self,
        store: &mut ParamStore<F>,
        x: &Mat<F>,
        rng: &mut Rng,
    ) -> (Mat<F>, MlpCache<F>) {
        let batch = x.rows();
        let mut tapes = Vec::with_capacity(self.stages.len());
        let mut cur = x.clone();
        for stage in &self.stages {
            match stage {
                Stage::Linear(l) => {
                    let out = l.forward_batch(store, &cur);
                    tapes.push(Tape::Linear { input: cur });
                    cur = out;
                }
                Stage::BatchNorm {
                    dim,
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    let d = *dim;
                    let inv_b = fl::<F>(1.0 / batch as f64);
                    let mut mean = vec![F::zero(); d];
                    for r in 0..batch {
                        for (m, &v) in mean.iter_mut().zip(cur.row(r)) {
                            *m = *m + v;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m = *m * inv_b);
                    let mut var = vec![F::zero(); d];
                    for r in 0..batch {
                        for (j, &v) in cur.row(r).iter().enumerate() {
                            let c = v - mean[j];
                            var[j] = var[j] + c * c;
                        }
                    }
                    var.iter_mut().for_each(|v| *v = *v * inv_b);

                    let inv_std: Vec<F> =
                        var.iter().map(|&v| (v + fl(BN_EPS)).sqrt().recip()).collect();
                    let mut centered = cur.clone();
                    for r in 0..batch {
                        for (j, v) in centered.row_mut(r).iter_mut().enumerate() {
                            *v = *v - mean[j];
                        }
                    }
                    let mut x_hat = centered.clone();
                    for r in 0..batch {
                        for (j, v) in x_hat.row_mut(r).iter_mut().enumerate() {
                            *v = *v * inv_std[j];
                        }
                    }
                    let g = store.value(*gamma).to_vec();
                    let b = store.value(*beta).to_vec();
                    let mut out = x_hat.clone();
                    for r in 0..batch {
                        for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                            *v = g[j] * *v + b[j];
                        }
                    }
                    // Momentum update of running statistics; unbiased variance
                    // when the batch allows it.
                    let unbias = if batch > 1 {
                        batch as f64 / (batch - 1) as f64
                    } else {
                        1.0
                    };
                    let m: F = fl(BN_MOMENTUM);
                    let keep = F::one() - m;
                    {
                        let rm = store.value_mut(*running_mean);
                        for (r, &mu) in rm.iter_mut().zip(mean.iter()) {
                            *r = keep * *r + m * mu;
                        }
                    }
                    {
                        let rv = store.value_mut(*running_var);
                        for (r, &v) in rv.iter_mut().zip(var.iter()) {
                            *r = keep * *r + m * (v * fl(unbias));
                        }
                    }
                    tapes.push(Tape::BatchNorm {
                        x_hat,
                        centered,
                        inv_std,
                    });
                    cur = out;
                }
                Stage::ReLU => {
                    cur.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
                    tapes.push(Tape::ReLU { output: cur.clone() });
                }
                Stage::PReLU { alpha } => {
                    let a = store.value(*alpha)[0];
                    let input = cur.clone();
                    cur.as_mut_slice()
                        .iter_mut()
                        .for_each(|v| *v = if *v > F::zero() { *v } else { a * *v });
                    tapes.push(Tape::PReLU { input });
                }
                Stage::Dropout(rate) => {
                    if *rate == 0.0 {
                        tapes.push(Tape::Identity);
                    } else {
                        let keep = 1.0 - rate;
                        let scale = fl::<F>(1.0 / keep);
                        let mut mask = Mat::zeros(cur.rows(), cur.cols());
                        for v in mask.as_mut_slice() {
                            let u: f64 = rand::Rng::random(rng);
                            *v = if u < keep { scale } else { F::zero() };
                        }
                        for (v, &m) in cur.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                            *v = *v * m;
                        }
                        tapes.push(Tape::Dropout { mask });
                    }
                }
            }
        }
        (cur, MlpCache { tapes })
    }

    /// Backward through a train-mode forward.
    pub fn backward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        cache: &MlpCache<F>,
        d_out: &Mat<F>,
        grads: &mut GradBuffer<F>,
    ) -> Mat<F> {
        let mut d = d_out.clone();
        for (stage, tape) in self.stages.iter().zip(cache.tapes.iter()).rev() {
            d = match (stage, tape) {
                (Stage::Linear(l), Tape::Linear { input }) => {
                    l.backward_batch(store, input, &d, grads)
                }
                (
                    Stage::BatchNorm { gamma, beta, .. },
                    Tape::BatchNorm {
                        x_hat,
                        centered,
                        inv_std,
                    },
                ) => {
                    let batch = d.rows();
                    let dim = d.cols();
                    let g = store.value(*gamma).to_vec();
                    {
                        let d_gamma = grads.grad_mut(*gamma);
                        for r in 0..batch {
                            for (j, &gr) in d.row(r).iter().enumerate() {
                                d_gamma[j] = d_gamma[j] + gr * x_hat.at(r, j);
                            }
                        }
                    }
                    {
                        let d_beta = grads.grad_mut(*beta);
                        for r in 0..batch {
                            for (j, &gr) in d.row(r).iter().enumerate() {
                                d_beta[j] = d_beta[j] + gr;
                            }
                        }
                    }
                    // Standard batch-norm input gradient with batch statistics.
                    let inv_b = fl::<F>(1.0 / batch as f64);
                    let mut sum_dxhat = vec![F::zero(); dim];
                    let mut sum_dxhat_xhat = vec![F::zero(); dim];
                    let mut d_xhat = Mat::zeros(batch, dim);
                    for r in 0..batch {
                        for j in 0..dim {
                            let v = d.at(r, j) * g[j];
                            *d_xhat.at_mut(r, j) = v;
                            sum_dxhat[j] = sum_dxhat[j] + v;
                            sum_dxhat_xhat[j] = sum_dxhat_xhat[j] + v * x_hat.at(r, j);
                        }
                    }
                    let mut d_x = Mat::zeros(batch, dim);
                    for r in 0..batch {
                        for j in 0..dim {
                            let term = d_xhat.at(r, j)
                                - inv_b * sum_dxhat[j]
                                - inv_b * x_hat.at(r, j) * sum_dxhat_xhat[j];
                            *d_x.at_mut(r, j) = term * inv_std[j];
                        }
                    }
                    let _ = centered;
                    d_x
                }
                (Stage::ReLU, Tape::ReLU { output }) => {
                    let mut d_x = d.clone();
                    for (v, &o) in d_x.as_mut_slice().iter_mut().zip(output.as_slice()) {
                        if o <= F::zero() {
                            *v = F::zero();
                        }
                    }
                    d_x
                }
                (Stage::PReLU { alpha }, Tape::PReLU { input }) => {
                    let a = store.value(*alpha)[0];
                    let mut d_alpha = F::zero();
                    let mut d_x = d.clone();
                    for (v, &x) in d_x.as_mut_slice().iter_mut().zip(input.as_slice()) {
                        if x > F::zero() {
                            // passthrough
                        } else {
                            d_alpha = d_alpha + *v * x;
                            *v = *v * a;
                        }
                    }
                    let ga = grads.grad_mut(*alpha);
                    ga[0] = ga[0] + d_alpha;
                    d_x
                }
                (Stage::Dropout(_), Tape::Dropout { mask }) => {
                    let mut d_x = d.clone();
                    for (v, &m) in d_x.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                        *v = *v * m;
                    }
                    d_x
                }
                (Stage::Dropout(_), Tape::Identity) => d,
                _ => unreachable!("tape does not match stage"),
            };
        }
        d
    }
}

/// Spec recipe for the temporal-context streams: three blocks of
/// linear → batch norm → PReLU → dropout.
pub fn context_stream_spec(widths: &[usize; 4], dropout: f64) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for i in 0..3 {
        specs.push(LayerSpec::Linear {
            in_dim: widths[i],
            out_dim: widths[i + 1],
            bias: true,
        });
        specs.push(LayerSpec::BatchNorm);
        specs.push(LayerSpec::PReLU);
        specs.push(LayerSpec::Dropout(dropout));
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identity_network_is_identity() {
        let mut store: ParamStore<f64> = ParamStore::new(0);
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[LayerSpec::Linear {
                in_dim: 3,
                out_dim: 3,
                bias: true,
            }],
        )
        .unwrap();
        let w = store.lookup("m.l0.weight").unwrap();
        let wv = store.value_mut(w);
        wv.fill(0.0);
        for i in 0..3 {
            wv[i * 3 + i] = 1.0;
        }
        let x = vec![0.4, -2.0, 7.5];
        assert_eq!(mlp.forward_vec_eval(&store, &x), x);
    }

    #[test]
    fn single_layer_hand_arithmetic() {
        // W = [[2,0],[0,3]], b = [1,-1], x = [1,1] -> [3,2]
        let mut store: ParamStore<f64> = ParamStore::new(0);
        let lin = Linear::new(&mut store, "l", 2, 2, true);
        store
            .value_mut(store.lookup("l.weight").unwrap())
            .copy_from_slice(&[2.0, 0.0, 0.0, 3.0]);
        store
            .value_mut(store.lookup("l.bias").unwrap())
            .copy_from_slice(&[1.0, -1.0]);
        assert_eq!(lin.forward_vec(&store, &[1.0, 1.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn two_layer_net_matches_explicit_matmul_oracle() {
        let mut store: ParamStore<f64> = ParamStore::new(21);
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[
                LayerSpec::Linear { in_dim: 4, out_dim: 3, bias: true },
                LayerSpec::ReLU,
                LayerSpec::Linear { in_dim: 3, out_dim: 2, bias: true },
            ],
        )
        .unwrap();
        let mut r = rng::seeded(5);
        let x: Vec<f64> = (0..4).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let got = mlp.forward_vec_eval(&store, &x);

        let w1 = store.value(store.lookup("m.l0.weight").unwrap());
        let b1 = store.value(store.lookup("m.l0.bias").unwrap());
        let w2 = store.value(store.lookup("m.l2.weight").unwrap());
        let b2 = store.value(store.lookup("m.l2.bias").unwrap());
        let mut h = vec![0.0; 3];
        for o in 0..3 {
            h[o] = b1[o] + (0..4).map(|i| w1[o * 4 + i] * x[i]).sum::<f64>();
            h[o] = h[o].max(0.0);
        }
        let mut y = vec![0.0; 2];
        for o in 0..2 {
            y[o] = b2[o] + (0..3).map(|i| w2[o * 3 + i] * h[i]).sum::<f64>();
        }
        for (a, b) in got.iter().zip(y.iter()) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn width_mismatch_is_a_configuration_error() {
        let mut store: ParamStore<f64> = ParamStore::new(0);
        let err = Mlp::new(
            &mut store,
            "bad",
            &[
                LayerSpec::Linear { in_dim: 4, out_dim: 3, bias: true },
                LayerSpec::Linear { in_dim: 5, out_dim: 2, bias: true },
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn dropout_is_identity_in_eval_and_scales_in_train() {
        let mut store: ParamStore<f64> = ParamStore::new(4);
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[
                LayerSpec::Linear { in_dim: 2, out_dim: 2, bias: true },
                LayerSpec::Dropout(0.5),
            ],
        )
        .unwrap();
        let x = Mat::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let eval1 = mlp.forward_eval(&store, &x);
        let eval2 = mlp.forward_eval(&store, &x);
        assert_eq!(eval1, eval2);

        // Inverted dropout keeps surviving units scaled by 1/keep.
        let mut r = rng::seeded(0);
        let (train, _) = mlp.forward_train(&mut store, &x, &mut r);
        for (t, e) in train.as_slice().iter().zip(eval1.as_slice()) {
            assert!(*t == 0.0 || (*t - 2.0 * e).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_norm_normalizes_in_train_mode() {
        let mut store: ParamStore<f64> = ParamStore::new(4);
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[
                LayerSpec::Linear { in_dim: 1, out_dim: 1, bias: true },
                LayerSpec::BatchNorm,
            ],
        )
        .unwrap();
        store.value_mut(store.lookup("m.l0.weight").unwrap())[0] = 1.0;
        store.value_mut(store.lookup("m.l0.bias").unwrap())[0] = 0.0;
        let x = Mat::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut r = rng::seeded(0);
        let (y, _) = mlp.forward_train(&mut store, &x, &mut r);
        let mean: f64 = y.as_slice().iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-9);
        // Running stats moved toward the batch statistics.
        let rm = store.value(store.lookup("m.l1.running_mean").unwrap())[0];
        assert!((rm - 0.25).abs() < 1e-12);
    }
}

//! Finite-difference verification of every differentiable operation and of
//! the two composed forward passes (attention module, context network).
//!
//! Each case builds a scalar probe loss `L = Σ w_i · out_i` with a fixed
//! random projection `w`, computes analytic gradients through the backward
//! pass, and compares them against central differences.

use crate::attention::{W3Config, W3Module};
use crate::ctxt::{CtxtNet, LogitWindow, VocabConfig};
use crate::nn::activations::{sigmoid, sigmoid_grad_from_output, softmax};
use crate::nn::conv::{
    conv1d_same, conv1d_same_backward, conv2d_same, conv2d_same_backward, conv3d_same,
    conv3d_same_backward,
};
use crate::nn::gradcheck::{grad_check, GradCheckReport};
use crate::nn::linear::{LayerSpec, Mlp};
use crate::nn::pool::{
    channel_pool_backward, channel_pool_cached, spatial_pool_backward, spatial_pool_cached,
    PoolMode,
};
use crate::nn::shift::{temporal_shift, temporal_shift_backward};
use crate::params::{GradBuffer, ParamStore};
use crate::rng;
use crate::tensor::{FeatureMap, Mat, Vol};

pub struct SuiteCase {
    pub name: String,
    pub report: GradCheckReport,
}

fn projection(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng::derived(seed, 0x7e57);
    (0..n).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random-looking values whose pairwise gaps are at least half a grid slot,
/// `(hi - lo) / (2n)`, so max-pool argmax choices are stable under the
/// finite-difference step: a shuffled grid with half-slot jitter.
fn well_separated(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    debug_assert!((hi - lo) / (2.0 * n as f64) > 1e-3, "slot too fine for fd step");
    let mut r = rng::derived(seed, 0x5e9);
    let slots = rng::shuffled_indices(&mut r, n);
    slots
        .into_iter()
        .map(|s| {
            let jitter: f64 = rng::uniform(&mut r, 0.0, 0.5);
            lo + (hi - lo) * (s as f64 + jitter) / n as f64
        })
        .collect()
}

/// Gradient checks for every primitive operation.
pub fn op_gradient_checks(seed: u64, epsilon: f64, tolerance: f64) -> Vec<SuiteCase> {
    let mut cases = Vec::new();
    let mut push = |name: &str, report: GradCheckReport| {
        cases.push(SuiteCase {
            name: name.to_string(),
            report,
        });
    };

    // conv1d: input and kernel gradients.
    {
        let mut r = rng::derived(seed, 1);
        let x: Vec<f64> = (0..7).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let k: Vec<f64> = (0..3).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let w = projection(seed, 7);
        let (d_x, d_k) = conv1d_same_backward(&x, &k, &w);
        push(
            "conv1d/input",
            grad_check(
                |v| dot(&conv1d_same(v, &k).unwrap(), &w),
                &x,
                &d_x,
                epsilon,
                tolerance,
            ),
        );
        push(
            "conv1d/kernel",
            grad_check(
                |v| dot(&conv1d_same(&x, v).unwrap(), &w),
                &k,
                &d_k,
                epsilon,
                tolerance,
            ),
        );
    }

    // conv2d.
    {
        let mut r = rng::derived(seed, 2);
        let x = Mat::from_fn(4, 5, |_, _| rng::uniform(&mut r, -1.0, 1.0));
        let k = Mat::from_fn(3, 3, |_, _| rng::uniform(&mut r, -1.0, 1.0));
        let w = projection(seed + 1, 20);
        let w_mat = Mat::from_vec(4, 5, w.clone()).unwrap();
        let (d_x, d_k) = conv2d_same_backward(&x, &k, &w_mat);
        push(
            "conv2d/input",
            grad_check(
                |v| {
                    let xm = Mat::from_vec(4, 5, v.to_vec()).unwrap();
                    dot(conv2d_same(&xm, &k).unwrap().as_slice(), &w)
                },
                x.as_slice(),
                d_x.as_slice(),
                epsilon,
                tolerance,
            ),
        );
        push(
            "conv2d/kernel",
            grad_check(
                |v| {
                    let km = Mat::from_vec(3, 3, v.to_vec()).unwrap();
                    dot(conv2d_same(&x, &km).unwrap().as_slice(), &w)
                },
                k.as_slice(),
                d_k.as_slice(),
                epsilon,
                tolerance,
            ),
        );
    }

    // conv3d.
    {
        let mut r = rng::derived(seed, 3);
        let x = Vol::from_vec(3, 3, 3, (0..27).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect()).unwrap();
        let k = Vol::from_vec(3, 3, 3, (0..27).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect()).unwrap();
        let w = projection(seed + 2, 27);
        let w_vol = Vol::from_vec(3, 3, 3, w.clone()).unwrap();
        let (d_x, d_k) = conv3d_same_backward(&x, &k, &w_vol);
        push(
            "conv3d/input",
            grad_check(
                |v| {
                    let xv = Vol::from_vec(3, 3, 3, v.to_vec()).unwrap();
                    dot(conv3d_same(&xv, &k).unwrap().as_slice(), &w)
                },
                x.as_slice(),
                d_x.as_slice(),
                epsilon,
                tolerance,
            ),
        );
        push(
            "conv3d/kernel",
            grad_check(
                |v| {
                    let kv = Vol::from_vec(3, 3, 3, v.to_vec()).unwrap();
                    dot(conv3d_same(&x, &kv).unwrap().as_slice(), &w)
                },
                k.as_slice(),
                d_k.as_slice(),
                epsilon,
                tolerance,
            ),
        );
    }

    // Pooling (avg and max, both reductions), via the transparent loss.
    {
        let vals = well_separated(seed, 2 * 3 * 3 * 3, -2.0, 2.0);
        let f = FeatureMap::from_vec(2, 3, 3, 3, vals.clone()).unwrap();
        for mode in [PoolMode::Avg, PoolMode::Max] {
            let tag = match mode {
                PoolMode::Avg => "avg",
                PoolMode::Max => "max",
            };
            let (pooled, arg) = spatial_pool_cached(&f, mode);
            let w = projection(seed + 3, pooled.as_slice().len());
            let mut d_f = FeatureMap::zeros(2, 3, 3, 3);
            let w_mat = Mat::from_vec(2, 3, w.clone()).unwrap();
            spatial_pool_backward(&w_mat, mode, arg.as_deref(), &mut d_f);
            push(
                &format!("spatial_pool/{tag}"),
                grad_check(
                    |v| {
                        let fm = FeatureMap::from_vec(2, 3, 3, 3, v.to_vec()).unwrap();
                        dot(spatial_pool_cached(&fm, mode).0.as_slice(), &w)
                    },
                    &vals,
                    d_f.as_slice(),
                    epsilon,
                    tolerance,
                ),
            );

            let (pooled_c, arg_c) = channel_pool_cached(&f, mode);
            let wc = projection(seed + 4, pooled_c.as_slice().len());
            let mut d_fc = FeatureMap::zeros(2, 3, 3, 3);
            let w_vol = Vol::from_vec(2, 3, 3, wc.clone()).unwrap();
            channel_pool_backward(&w_vol, mode, arg_c.as_deref(), &mut d_fc);
            push(
                &format!("channel_pool/{tag}"),
                grad_check(
                    |v| {
                        let fm = FeatureMap::from_vec(2, 3, 3, 3, v.to_vec()).unwrap();
                        dot(channel_pool_cached(&fm, mode).0.as_slice(), &wc)
                    },
                    &vals,
                    d_fc.as_slice(),
                    epsilon,
                    tolerance,
                ),
            );
        }
    }

    // Temporal shift.
    {
        let mut r = rng::derived(seed, 5);
        let f = FeatureMap::from_fn(3, 6, 2, 2, |_, _, _, _| rng::uniform(&mut r, -1.0, 1.0));
        let w = projection(seed + 5, f.as_slice().len());
        let w_map = FeatureMap::from_vec(3, 6, 2, 2, w.clone()).unwrap();
        let d_f = temporal_shift_backward(&w_map, 0.5);
        push(
            "temporal_shift",
            grad_check(
                |v| {
                    let fm = FeatureMap::from_vec(3, 6, 2, 2, v.to_vec()).unwrap();
                    dot(temporal_shift(&fm, 0.5).unwrap().as_slice(), &w)
                },
                f.as_slice(),
                d_f.as_slice(),
                epsilon,
                tolerance,
            ),
        );
    }

    // Sigmoid and softmax.
    {
        let mut r = rng::derived(seed, 6);
        let x: Vec<f64> = (0..6).map(|_| rng::uniform(&mut r, -2.0, 2.0)).collect();
        let w = projection(seed + 6, 6);
        let analytic: Vec<f64> = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * sigmoid_grad_from_output(sigmoid(xi)))
            .collect();
        push(
            "sigmoid",
            grad_check(
                |v| v.iter().zip(&w).map(|(&xi, &wi)| wi * sigmoid(xi)).sum(),
                &x,
                &analytic,
                epsilon,
                tolerance,
            ),
        );

        // Softmax Jacobian: d/dx_j (w . p) = p_j (w_j - w . p).
        let p = softmax(&x);
        let wp = dot(&w, &p);
        let analytic: Vec<f64> = p.iter().zip(&w).map(|(&pj, &wj)| pj * (wj - wp)).collect();
        push(
            "softmax",
            grad_check(|v| dot(&softmax(v), &w), &x, &analytic, epsilon, tolerance),
        );
    }

    // MLP with batch norm (train mode), PReLU and a linear stack.
    {
        let mut store: ParamStore<f64> = ParamStore::new(seed ^ 0xab);
        let mlp = Mlp::new(
            &mut store,
            "probe",
            &[
                LayerSpec::Linear { in_dim: 4, out_dim: 5, bias: true },
                LayerSpec::BatchNorm,
                LayerSpec::PReLU,
                LayerSpec::Dropout(0.0),
                LayerSpec::Linear { in_dim: 5, out_dim: 3, bias: true },
            ],
        )
        .unwrap();
        let mut r = rng::derived(seed, 7);
        let x = Mat::from_fn(3, 4, |_, _| rng::uniform(&mut r, -1.0, 1.0));
        let w = projection(seed + 7, 9);

        let mut dropout_rng = rng::seeded(0);
        let (out, tape) = mlp.forward_train(&mut store, &x, &mut dropout_rng);
        let mut grads = GradBuffer::zeros_like(&store);
        let d_out = Mat::from_vec(3, 3, w.clone()).unwrap();
        let d_x = mlp.backward(&store, &tape, &d_out, &mut grads);
        let _ = out;

        let flat = store.flatten_trainable();
        let analytic_params = grads.flatten_trainable(&store);
        push(
            "mlp_bn_prelu/params",
            grad_check(
                |v| {
                    store.load_trainable(v);
                    let mut rng0 = rng::seeded(0);
                    let (out, _) = mlp.forward_train(&mut store, &x, &mut rng0);
                    dot(out.as_slice(), &w)
                },
                &flat,
                &analytic_params,
                epsilon,
                tolerance,
            ),
        );
        store.load_trainable(&flat);
        push(
            "mlp_bn_prelu/input",
            grad_check(
                |v| {
                    let xm = Mat::from_vec(3, 4, v.to_vec()).unwrap();
                    let mut rng0 = rng::seeded(0);
                    let (out, _) = mlp.forward_train(&mut store, &xm, &mut rng0);
                    dot(out.as_slice(), &w)
                },
                x.as_slice(),
                d_x.as_slice(),
                epsilon,
                tolerance,
            ),
        );
    }

    cases
}

/// Gradient checks for the composed attention module and context network.
pub fn composed_gradient_checks(seed: u64, epsilon: f64, tolerance: f64) -> Vec<SuiteCase> {
    let mut cases = Vec::new();

    // Full attention pass, W3 and W2 variants: parameters and input.
    for (variant, temporal) in [("w3", true), ("w2", false)] {
        let mut cfg = W3Config::new(6);
        cfg.reduction_ratio = 4;
        cfg.spatial_kernel = 3;
        cfg.temporal_enabled = temporal;
        let mut store: ParamStore<f64> = ParamStore::new(seed ^ 0x3a);
        let module = W3Module::new(&mut store, "w3", cfg).unwrap();
        let vals = well_separated(seed ^ 0x11, 3 * 6 * 4 * 4, -1.5, 1.5);
        let f = FeatureMap::from_vec(3, 6, 4, 4, vals.clone()).unwrap();
        let w = projection(seed + 8, f.as_slice().len());

        let (_, _, tape) = module.forward(&store, &f).unwrap();
        let mut grads = GradBuffer::zeros_like(&store);
        let d_out = FeatureMap::from_vec(3, 6, 4, 4, w.clone()).unwrap();
        let d_f = module.backward(&store, &f, &tape, &d_out, &mut grads);

        let flat = store.flatten_trainable();
        let analytic_params = grads.flatten_trainable(&store);
        cases.push(SuiteCase {
            name: format!("apply_{variant}/params"),
            report: grad_check(
                |v| {
                    store.load_trainable(v);
                    let (out, _, _) = module.forward(&store, &f).unwrap();
                    dot(out.as_slice(), &w)
                },
                &flat,
                &analytic_params,
                epsilon,
                tolerance,
            ),
        });
        store.load_trainable(&flat);
        cases.push(SuiteCase {
            name: format!("apply_{variant}/input"),
            report: grad_check(
                |v| {
                    let fm = FeatureMap::from_vec(3, 6, 4, 4, v.to_vec()).unwrap();
                    let (out, _, _) = module.forward(&store, &fm).unwrap();
                    dot(out.as_slice(), &w)
                },
                &vals,
                d_f.as_slice(),
                epsilon,
                tolerance,
            ),
        });
    }

    // Context network (train mode, dropout disabled for a deterministic
    // probe), parameters and window inputs.
    {
        let vocab = VocabConfig::new(4, 5, 2, 3).unwrap();
        let mut store: ParamStore<f64> = ParamStore::new(seed ^ 0x77);
        let net = CtxtNet::new(&mut store, "ctxt", vocab.clone(), [8, 8], 0.0).unwrap();
        let mut r = rng::derived(seed, 9);
        let windows: Vec<LogitWindow<f64>> = (0..3)
            .map(|_| LogitWindow {
                verb_logits: Mat::from_fn(3, 4, |_, _| rng::uniform(&mut r, -1.0, 1.0)),
                noun_logits: Mat::from_fn(3, 5, |_, _| rng::uniform(&mut r, -1.0, 1.0)),
                center_index: 1,
            })
            .collect();
        let w = projection(seed + 9, 3 * 4 * 5);

        let mut rng0 = rng::seeded(0);
        let (mats, tape) = net.forward_train_batch(&mut store, &windows, &mut rng0).unwrap();
        let mut grads = GradBuffer::zeros_like(&store);
        let d_scores: Vec<Mat<f64>> = (0..3)
            .map(|s| Mat::from_vec(4, 5, w[s * 20..(s + 1) * 20].to_vec()).unwrap())
            .collect();
        net.backward_batch(&store, &tape, &d_scores, &mut grads);
        let _ = mats;

        let loss = |store: &mut ParamStore<f64>, windows: &[LogitWindow<f64>]| -> f64 {
            let mut rng0 = rng::seeded(0);
            let (mats, _) = net.forward_train_batch(store, windows, &mut rng0).unwrap();
            mats.iter()
                .enumerate()
                .map(|(s, m)| dot(m.scores.as_slice(), &w[s * 20..(s + 1) * 20]))
                .sum()
        };

        let flat = store.flatten_trainable();
        let analytic_params = grads.flatten_trainable(&store);
        cases.push(SuiteCase {
            name: "ctxtnet_forward/params".into(),
            report: grad_check(
                |v| {
                    store.load_trainable(v);
                    loss(&mut store, &windows)
                },
                &flat,
                &analytic_params,
                epsilon,
                tolerance,
            ),
        });
    }

    cases
}

/// The full suite at the contract's epsilon (1e-4) and tolerance (1e-3).
pub fn full_suite(seed: u64) -> Vec<SuiteCase> {
    let mut cases = op_gradient_checks(seed, 1e-4, 1e-3);
    cases.extend(composed_gradient_checks(seed, 1e-4, 1e-3));
    cases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_checks_pass_across_20_seeds() {
        for seed in 0..20 {
            for case in op_gradient_checks(seed, 1e-4, 1e-3) {
                assert!(
                    case.report.passed(),
                    "seed {seed} case {}: {}",
                    case.name,
                    case.report
                );
            }
        }
    }

    #[test]
    fn composed_checks_pass() {
        for seed in [0u64, 1, 2] {
            for case in composed_gradient_checks(seed, 1e-4, 1e-3) {
                assert!(
                    case.report.passed(),
                    "seed {seed} case {}: {}",
                    case.name,
                    case.report
                );
            }
        }
    }

}

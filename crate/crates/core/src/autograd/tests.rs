use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::check::{numeric_gradient, relative_error};
use super::*;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Compares the analytic gradient of `f` w.r.t. each input with central
/// differences.
fn assert_grads(inputs: &[Tensor], f: impl for<'a> Fn(&[Var<'a>]) -> Var<'a> + Copy) {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&vars);
    let grads = tape.backward(out);
    for (which, input) in inputs.iter().enumerate() {
        let numeric = numeric_gradient(
            |probe| {
                let tape = Tape::new();
                let vars: Vec<Var> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, t)| tape.constant(if j == which { probe.clone() } else { t.clone() }))
                    .collect();
                f(&vars).item()
            },
            input,
            1e-5,
        );
        let analytic = grads.get(vars[which]).expect("missing gradient");
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            assert!(relative_error(*a, *n, 1e-6) < 1e-6, "input {which}: analytic {a} vs numeric {n}");
        }
    }
}

#[test]
fn elementwise_gradients() {
    let x = random(&[3, 4], 1);
    let y = random(&[3, 4], 2);
    assert_grads(&[x.clone(), y.clone()], |v| (v[0] * v[1] + v[0].tanh() - v[1].sigmoid()).sum());
    assert_grads(&[x.clone()], |v| v[0].leaky_relu(0.1).square().mean());
    assert_grads(&[x.clone()], |v| v[0].exp().add_scalar(1.0).ln().scale(3.0).sum());
    assert_grads(&[x.clone()], |v| v[0].softplus().abs().sum());
}

#[test]
fn matmul_and_bias_gradients() {
    let a = random(&[3, 5], 3);
    let b = random(&[5, 2], 4);
    let bias = random(&[2], 5);
    assert_grads(&[a, b, bias], |v| v[0].matmul(v[1]).add_bias_last(v[2]).tanh().sum());
    let x = random(&[2, 3, 4], 6);
    let c = random(&[3], 7);
    assert_grads(&[x, c], |v| v[0].add_bias_channel(v[1]).square().sum());
}

#[test]
fn gather_softmax_concat_gradients() {
    let x = random(&[2, 3], 8);
    let y = random(&[4], 9);
    assert_grads(&[x.clone(), y], |v| {
        let joined = concat(&[v[0], v[1]]);
        let idx = Rc::new(vec![0, 9, ZERO_INDEX, 3, 3, 7]);
        joined.gather(idx, &[2, 3]).softmax_last().square().sum()
    });
    assert_grads(&[x], |v| v[0].transpose2d().matmul(v[0]).sum());
}

#[test]
fn conv_gradients() {
    let x = random(&[2, 3, 11], 10);
    let w = random(&[4, 3, 3], 11);
    let b = random(&[4], 12);
    for spec in [
        Conv1dSpec::same(3, 1),
        Conv1dSpec::same(3, 2),
        Conv1dSpec::strided(3, 2),
        Conv1dSpec { stride: 3, dilation: 1, pad_left: 0, pad_right: 0 },
    ] {
        assert_grads(&[x.clone(), w.clone(), b.clone()], move |v| {
            v[0].conv1d(v[1], Some(v[2]), spec).square().sum()
        });
    }
    let wt = random(&[3, 2, 4], 13);
    let bt = random(&[2], 14);
    for (crop, out_len) in [(1, 22), (0, 25), (3, 15)] {
        assert_grads(&[x.clone(), wt.clone(), bt.clone()], move |v| {
            let spec = ConvTranspose1dSpec { stride: 2, crop_left: crop };
            v[0].conv_transpose1d(v[1], Some(v[2]), spec, out_len).square().sum()
        });
    }
}

#[test]
fn conv1d_matches_direct_sum() {
    let x = random(&[1, 2, 9], 15);
    let w = random(&[3, 2, 3], 16);
    let spec = Conv1dSpec { stride: 2, dilation: 2, pad_left: 2, pad_right: 1 };
    let tape = Tape::new();
    let out = tape.constant(x.clone()).conv1d(tape.constant(w.clone()), None, spec).value();
    let out_len = spec.out_len(9, 3);
    assert_eq!(out.shape(), &[1, 3, out_len]);
    for o in 0..3 {
        for t in 0..out_len {
            let mut acc = 0.0;
            for i in 0..2 {
                for k in 0..3 {
                    let pos = (t * 2 + k * 2) as isize - 2;
                    if (0..9).contains(&pos) {
                        acc += w.data()[(o * 2 + i) * 3 + k] * x.data()[i * 9 + pos as usize];
                    }
                }
            }
            assert!((out.data()[o * out_len + t] - acc).abs() < 1e-12);
        }
    }
}

#[test]
fn detached_and_constant_paths_have_no_gradient() {
    let tape = Tape::new();
    let a = tape.leaf(random(&[3], 17));
    let b = tape.leaf(random(&[3], 18));
    let out = (a * b.detach()).sum() + tape.constant(random(&[3], 19)).sum();
    let grads = tape.backward(out);
    assert!(grads.get(a).is_some());
    assert!(grads.get(b).is_none());
}

#[test]
fn random_access_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let _: f64 = rng.random();
    let x = random(&[4, 4], 20);
    let run = || {
        let tape = Tape::new();
        let v = tape.leaf(x.clone());
        let out = v.matmul(v).tanh().sum();
        tape.backward(out).get(v).unwrap().clone()
    };
    assert_eq!(run(), run());
}

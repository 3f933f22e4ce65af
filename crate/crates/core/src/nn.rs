//! Parameter storage, layers and the AdamW optimizer shared by both models.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Conv1dSpec, ConvTranspose1dSpec, Grads, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

/// Ordered collection of named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter `{name}`");
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Puts all parameters on `tape`, as leaves or as constants.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Bound<'t> {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    /// Order-sensitive FNV-1a hash over names, shapes and raw bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, t) in self.iter() {
            eat(name.as_bytes());
            for d in t.shape() {
                eat(&d.to_le_bytes());
            }
            for v in t.data() {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Parameters of one store placed on a tape.
pub struct Bound<'t> {
    vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    pub fn get(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }

    /// Gradient per parameter, `None` where the output does not depend on it.
    pub fn grads(&self, grads: &mut Grads) -> Vec<Option<Tensor>> {
        self.vars.iter().map(|v| grads.take(*v)).collect()
    }
}

/// Uniform in `±1/sqrt(fan_in)`.
pub fn init_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-bound..bound))
}

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, input: usize, output: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), init_uniform(rng, &[input, output], input));
        let bias = store.add(format!("{name}.bias"), init_uniform(rng, &[output], input));
        Linear { weight, bias }
    }

    /// `x[N, in] -> [N, out]`
    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Var<'t> {
        x.matmul(p.get(self.weight)).add_bias_last(p.get(self.bias))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub spec: Conv1dSpec,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        (cin, cout, kernel): (usize, usize, usize),
        spec: Conv1dSpec,
    ) -> Self {
        let fan_in = cin * kernel;
        let weight = store.add(format!("{name}.weight"), init_uniform(rng, &[cout, cin, kernel], fan_in));
        let bias = store.add(format!("{name}.bias"), init_uniform(rng, &[cout], fan_in));
        Conv1d { weight, bias, spec }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Var<'t> {
        x.conv1d(p.get(self.weight), Some(p.get(self.bias)), self.spec)
    }

    pub fn out_len(&self, store: &ParamStore, len: usize) -> usize {
        self.spec.out_len(len, store.get(self.weight).shape()[2])
    }
}

/// Transposed convolution with kernel `2 * stride` that upsamples by exactly `stride`.
#[derive(Clone, Copy, Debug)]
pub struct Upsample1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
}

impl Upsample1d {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize, stride: usize) -> Self {
        let kernel = 2 * stride;
        let fan_in = cout * kernel;
        let weight = store.add(format!("{name}.weight"), init_uniform(rng, &[cin, cout, kernel], fan_in));
        let bias = store.add(format!("{name}.bias"), init_uniform(rng, &[cout], fan_in));
        Upsample1d { weight, bias, stride }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Var<'t> {
        let len = x.shape()[2];
        let spec = ConvTranspose1dSpec {
            stride: self.stride,
            crop_left: self.stride / 2,
        };
        x.conv_transpose1d(p.get(self.weight), Some(p.get(self.bias)), spec, len * self.stride)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// AdamW with decoupled weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamW {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update at learning rate `lr`; parameters without a gradient
    /// are left untouched.
    pub fn update(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>], cfg: &AdamWConfig, lr: f64) {
        assert_eq!(grads.len(), store.len());
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for (i, grad) in grads.iter().enumerate() {
            let Some(grad) = grad else {
                continue;
            };
            let param = store.tensors[i].data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..param.len() {
                let g = grad.data()[j];
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                param[j] -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * param[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn upsample_length_is_exact() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for stride in [2, 3, 4, 5] {
            let up = Upsample1d::new(&mut store, &mut rng, &format!("up{stride}"), 3, 2, stride);
            let tape = Tape::new();
            let p = store.bind(&tape, false);
            let x = tape.constant(Tensor::full(&[1, 3, 7], 0.5));
            assert_eq!(up.forward(&p, x).shape(), vec![1, 2, 7 * stride]);
        }
    }

    #[test]
    fn adamw_moves_against_gradient() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(&[2], vec![1.0, -1.0]));
        let mut opt = AdamW::new(&store);
        let cfg = AdamWConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 };
        let grads = vec![Some(Tensor::new(&[2], vec![2.0, -3.0]))];
        opt.update(&mut store, &grads, &cfg, cfg.lr);
        // first bias-corrected step is lr * sign(g)
        let w = store.get(id).data();
        assert!((w[0] - 0.9).abs() < 1e-6 && (w[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn missing_gradient_leaves_parameter() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::new(&[1], vec![1.0]));
        let before = store.clone();
        let mut opt = AdamW::new(&store);
        let cfg = AdamWConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.1 };
        opt.update(&mut store, &[None], &cfg, cfg.lr);
        assert_eq!(store, before);
        assert_eq!(store.fingerprint(), before.fingerprint());
    }
}

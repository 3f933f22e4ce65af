use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;

use super::{Tape, Tensor, Var};

/// Index value that makes [`Var::gather`] emit a zero.
pub const ZERO_INDEX: usize = usize::MAX;

fn unary<'t>(
    x: Var<'t>,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64, f64) -> f64 + 'static,
) -> Var<'t> {
    let value = x.value().map(f);
    x.tape.record(
        &[x],
        value,
        Box::new(move |g, inputs, out, _| {
            let data = g
                .data()
                .iter()
                .zip(inputs[0].data())
                .zip(out.data())
                .map(|((&g, &x), &y)| g * df(x, y))
                .collect();
            vec![Some(Tensor::new(g.shape(), data))]
        }),
    )
}

impl<'t> Var<'t> {
    pub fn reshape(self, shape: &[usize]) -> Var<'t> {
        let in_shape = self.shape();
        let value = (*self.value()).clone().reshaped(shape);
        self.tape.record(
            &[self],
            value,
            Box::new(move |g, _, _, _| vec![Some(g.clone().reshaped(&in_shape))]),
        )
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        unary(self, |x| c * x, move |_, _| c)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        unary(self, |x| x + c, |_, _| 1.0)
    }

    pub fn tanh(self) -> Var<'t> {
        unary(self, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn sigmoid(self) -> Var<'t> {
        unary(self, |x| 1.0 / (1.0 + (-x).exp()), |_, y| y * (1.0 - y))
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        unary(
            self,
            |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn exp(self) -> Var<'t> {
        unary(self, f64::exp, |_, y| y)
    }

    pub fn ln(self) -> Var<'t> {
        unary(self, f64::ln, |x, _| 1.0 / x)
    }

    pub fn abs(self) -> Var<'t> {
        unary(self, f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn square(self) -> Var<'t> {
        unary(self, |x| x * x, |x, _| 2.0 * x)
    }

    /// `ln(1 + e^x)`, stable for large `|x|`.
    pub fn softplus(self) -> Var<'t> {
        unary(
            self,
            |x| if x > 30.0 { x } else { x.exp().ln_1p() },
            |x, _| 1.0 / (1.0 + (-x).exp()),
        )
    }

    pub fn sum(self) -> Var<'t> {
        let shape = self.shape();
        let value = Tensor::scalar(self.value().sum());
        self.tape.record(
            &[self],
            value,
            Box::new(move |g, _, _, _| vec![Some(Tensor::full(&shape, g.item()))]),
        )
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len();
        self.sum().scale(1.0 / n as f64)
    }

    /// `x[.., F] + b[F]`
    pub fn add_bias_last(self, bias: Var<'t>) -> Var<'t> {
        let x = self.value();
        let b = bias.value();
        let f = b.len();
        assert_eq!(*x.shape().last().expect("add_bias_last on scalar"), f);
        let mut value = (*x).clone();
        for (i, v) in value.data_mut().iter_mut().enumerate() {
            *v += b.data()[i % f];
        }
        self.tape.record(
            &[self, bias],
            value,
            Box::new(move |g, _, _, needs| {
                let gb = needs[1].then(|| {
                    let mut acc = vec![0.0; f];
                    for (i, v) in g.data().iter().enumerate() {
                        acc[i % f] += v;
                    }
                    Tensor::new(&[f], acc)
                });
                vec![needs[0].then(|| g.clone()), gb]
            }),
        )
    }

    /// `x[B, C, T] + b[C]`
    pub fn add_bias_channel(self, bias: Var<'t>) -> Var<'t> {
        let x = self.value();
        let b = bias.value();
        let [_, c, t] = *x.shape() else {
            panic!("add_bias_channel expects [B, C, T], got {:?}", x.shape());
        };
        assert_eq!(b.len(), c);
        let mut value = (*x).clone();
        for (i, v) in value.data_mut().iter_mut().enumerate() {
            *v += b.data()[(i / t) % c];
        }
        self.tape.record(
            &[self, bias],
            value,
            Box::new(move |g, _, _, needs| {
                let gb = needs[1].then(|| {
                    let mut acc = vec![0.0; c];
                    for (i, v) in g.data().iter().enumerate() {
                        acc[(i / t) % c] += v;
                    }
                    Tensor::new(&[c], acc)
                });
                vec![needs[0].then(|| g.clone()), gb]
            }),
        )
    }

    /// Scalar broadcast multiply: `self * s` where `s` has one element.
    pub fn mul_scalar_var(self, s: Var<'t>) -> Var<'t> {
        let x = self.value();
        let sv = s.value().item();
        let value = x.map(|v| v * sv);
        self.tape.record(
            &[self, s],
            value,
            Box::new(move |g, inputs, _, needs| {
                let gs = needs[1].then(|| {
                    let dot: f64 = g.data().iter().zip(inputs[0].data()).map(|(a, b)| a * b).sum();
                    Tensor::scalar(dot)
                });
                vec![needs[0].then(|| g.map(|v| v * sv)), gs]
            }),
        )
    }

    /// `[M, K] x [K, N]`
    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        let a = self.value();
        let b = rhs.value();
        let ([m, k], [k2, n]) = (a.shape(), b.shape()) else {
            panic!("matmul expects 2-D operands, got {:?} x {:?}", a.shape(), b.shape());
        };
        let (m, k, n) = (*m, *k, *n);
        assert_eq!(k, *k2, "matmul inner dimension mismatch");
        let value = Tensor::new(&[m, n], matmul_raw(a.data(), b.data(), m, k, n));
        self.tape.record(
            &[self, rhs],
            value,
            Box::new(move |g, inputs, _, needs| {
                let (a, b) = (inputs[0].data(), inputs[1].data());
                let g = g.data();
                // dA = G B^T, dB = A^T G
                let ga = needs[0].then(|| {
                    let mut out = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &b[p * n..(p + 1) * n];
                            out[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    Tensor::new(&[m, k], out)
                });
                let gb = needs[1].then(|| {
                    let mut out = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = a[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (o, gv) in out[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += av * gv;
                            }
                        }
                    }
                    Tensor::new(&[k, n], out)
                });
                vec![ga, gb]
            }),
        )
    }

    pub fn transpose2d(self) -> Var<'t> {
        let [r, c] = *self.shape() else {
            panic!("transpose2d expects a 2-D tensor");
        };
        let idx: Vec<usize> = (0..c)
            .flat_map(|j| (0..r).map(move |i| i * c + j))
            .collect();
        self.gather(Rc::new(idx), &[c, r])
    }

    /// `out[i] = self.flat[indices[i]]`, or zero where the index is
    /// [`ZERO_INDEX`]. Covers reshapes, permutations, slicing, padding and
    /// row lookups.
    pub fn gather(self, indices: Rc<Vec<usize>>, out_shape: &[usize]) -> Var<'t> {
        let x = self.value();
        assert_eq!(indices.len(), out_shape.iter().product::<usize>());
        let src = x.data();
        let data = indices
            .iter()
            .map(|&i| if i == ZERO_INDEX { 0.0 } else { src[i] })
            .collect();
        let in_shape = x.shape().to_vec();
        let in_len = x.len();
        self.tape.record(
            &[self],
            Tensor::new(out_shape, data),
            Box::new(move |g, _, _, _| {
                let mut acc = vec![0.0; in_len];
                for (&i, &v) in indices.iter().zip(g.data()) {
                    if i != ZERO_INDEX {
                        acc[i] += v;
                    }
                }
                vec![Some(Tensor::new(&in_shape, acc))]
            }),
        )
    }

    /// Softmax over the last axis.
    pub fn softmax_last(self) -> Var<'t> {
        let x = self.value();
        let f = *x.shape().last().expect("softmax on scalar");
        let mut value = (*x).clone();
        for row in value.data_mut().chunks_mut(f) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        self.tape.record(
            &[self],
            value,
            Box::new(move |g, _, out, _| {
                let mut data = vec![0.0; g.len()];
                for ((dst, grow), yrow) in data
                    .chunks_mut(f)
                    .zip(g.data().chunks(f))
                    .zip(out.data().chunks(f))
                {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((d, &gv), &y) in dst.iter_mut().zip(grow).zip(yrow) {
                        *d = y * (gv - dot);
                    }
                }
                vec![Some(Tensor::new(g.shape(), data))]
            }),
        )
    }

    /// Elementwise `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(self, floor: f64) -> Var<'t> {
        unary(
            self,
            move |x| if x > floor { x } else { floor },
            move |x, _| if x > floor { 1.0 } else { 0.0 },
        )
    }
}

/// Flat concatenation of all inputs, shape `[Σ len]`.
pub fn concat<'t>(parts: &[Var<'t>]) -> Var<'t> {
    let tape: &'t Tape = parts.first().expect("concat of nothing").tape;
    let values: Vec<Rc<Tensor>> = parts.iter().map(|v| v.value()).collect();
    let lens: Vec<usize> = values.iter().map(|v| v.len()).collect();
    let shapes: Vec<Vec<usize>> = values.iter().map(|v| v.shape().to_vec()).collect();
    let mut data = Vec::with_capacity(lens.iter().sum());
    for v in &values {
        data.extend_from_slice(v.data());
    }
    let total = data.len();
    tape.record(
        parts,
        Tensor::new(&[total], data),
        Box::new(move |g, _, _, needs| {
            let mut offset = 0;
            lens.iter()
                .zip(&shapes)
                .zip(needs)
                .map(|((&len, shape), &need)| {
                    let part = need.then(|| Tensor::new(shape, g.data()[offset..offset + len].to_vec()));
                    offset += len;
                    part
                })
                .collect()
        }),
    )
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

fn binary<'t>(
    a: Var<'t>,
    b: Var<'t>,
    f: impl Fn(f64, f64) -> f64,
    grads: impl Fn(&Tensor, &Tensor, &Tensor, usize) -> Tensor + 'static,
) -> Var<'t> {
    let (av, bv) = (a.value(), b.value());
    assert_eq!(av.shape(), bv.shape(), "elementwise shape mismatch");
    let value = av.zip_map(&bv, f);
    a.tape.record(
        &[a, b],
        value,
        Box::new(move |g, inputs, _, needs| {
            (0..2)
                .map(|i| needs[i].then(|| grads(g, inputs[0], inputs[1], i)))
                .collect()
        }),
    )
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        binary(self, rhs, |a, b| a + b, |g, _, _, _| g.clone())
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        binary(
            self,
            rhs,
            |a, b| a - b,
            |g, _, _, i| if i == 0 { g.clone() } else { g.map(|v| -v) },
        )
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        binary(
            self,
            rhs,
            |a, b| a * b,
            |g, a, b, i| if i == 0 { g.zip_map(b, |g, b| g * b) } else { g.zip_map(a, |g, a| g * a) },
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

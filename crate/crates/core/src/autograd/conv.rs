use super::{Tensor, Var};

/// 1-D convolution geometry. Padding is zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub stride: usize,
    pub dilation: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl Conv1dSpec {
    /// Stride 1 with output length equal to input length.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        let total = dilation * (kernel - 1);
        Conv1dSpec {
            stride: 1,
            dilation,
            pad_left: total / 2,
            pad_right: total - total / 2,
        }
    }

    pub fn strided(kernel: usize, stride: usize) -> Self {
        let total = kernel - 1;
        Conv1dSpec {
            stride,
            dilation: 1,
            pad_left: total / 2,
            pad_right: total - total / 2,
        }
    }

    pub fn out_len(&self, len: usize, kernel: usize) -> usize {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + self.pad_left + self.pad_right;
        if padded < span {
            0
        } else {
            (padded - span) / self.stride + 1
        }
    }
}

/// Transposed 1-D convolution producing `out_len` samples starting
/// `crop_left` samples into the full (uncropped) output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvTranspose1dSpec {
    pub stride: usize,
    pub crop_left: usize,
}

// Valid output positions t for which t*stride + offset - pad lands in [0, len).
fn valid_range(len: usize, out: usize, stride: usize, offset: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > offset {
        (pad - offset).div_ceil(stride)
    } else {
        0
    };
    let top = len as isize - 1 + pad as isize - offset as isize;
    if top < 0 {
        return (0, 0);
    }
    let hi = (top as usize / stride + 1).min(out);
    (lo.min(hi), hi)
}

impl<'t> Var<'t> {
    /// `x[B, Cin, T] * w[Cout, Cin, K] (+ b[Cout]) -> [B, Cout, T']`
    pub fn conv1d(self, weight: Var<'t>, bias: Option<Var<'t>>, spec: Conv1dSpec) -> Var<'t> {
        let x = self.value();
        let w = weight.value();
        let [bsz, cin, len] = *x.shape() else {
            panic!("conv1d input must be [B, C, T], got {:?}", x.shape());
        };
        let [cout, cin_w, k] = *w.shape() else {
            panic!("conv1d weight must be [Cout, Cin, K], got {:?}", w.shape());
        };
        assert_eq!(cin, cin_w, "conv1d channel mismatch");
        let out_len = spec.out_len(len, k);
        assert!(out_len > 0, "conv1d input of length {len} too short for kernel {k}");
        let mut out = vec![0.0; bsz * cout * out_len];
        let (xd, wd) = (x.data(), w.data());
        for b in 0..bsz {
            for o in 0..cout {
                let orow = &mut out[(b * cout + o) * out_len..(b * cout + o + 1) * out_len];
                for i in 0..cin {
                    let xrow = &xd[(b * cin + i) * len..(b * cin + i + 1) * len];
                    for kk in 0..k {
                        let wv = wd[(o * cin + i) * k + kk];
                        let offset = kk * spec.dilation;
                        let (lo, hi) = valid_range(len, out_len, spec.stride, offset, spec.pad_left);
                        if lo >= hi {
                            continue;
                        }
                        if spec.stride == 1 {
                            let start = lo + offset - spec.pad_left;
                            for (ov, xv) in orow[lo..hi].iter_mut().zip(&xrow[start..start + hi - lo]) {
                                *ov += wv * xv;
                            }
                        } else {
                            let start = lo * spec.stride + offset - spec.pad_left;
                            for (ov, xv) in orow[lo..hi].iter_mut().zip(xrow[start..].iter().step_by(spec.stride)) {
                                *ov += wv * xv;
                            }
                        }
                    }
                }
            }
        }
        let mut value = Tensor::new(&[bsz, cout, out_len], out);
        let mut inputs = vec![self, weight];
        if let Some(bias) = bias {
            let bv = bias.value();
            assert_eq!(bv.len(), cout);
            for (idx, v) in value.data_mut().iter_mut().enumerate() {
                *v += bv.data()[(idx / out_len) % cout];
            }
            inputs.push(bias);
        }
        self.tape().record(
            &inputs,
            value,
            Box::new(move |g, inputs, _, needs| {
                let (xd, wd, gd) = (inputs[0].data(), inputs[1].data(), g.data());
                let mut gx = needs[0].then(|| vec![0.0; bsz * cin * len]);
                let mut gw = needs[1].then(|| vec![0.0; cout * cin * k]);
                for b in 0..bsz {
                    for o in 0..cout {
                        let grow = &gd[(b * cout + o) * out_len..(b * cout + o + 1) * out_len];
                        for i in 0..cin {
                            let xoff = (b * cin + i) * len;
                            for kk in 0..k {
                                let widx = (o * cin + i) * k + kk;
                                let offset = kk * spec.dilation;
                                let (lo, hi) = valid_range(len, out_len, spec.stride, offset, spec.pad_left);
                                if lo >= hi {
                                    continue;
                                }
                                // first valid input position, at t = lo
                                let first = xoff + lo * spec.stride + offset - spec.pad_left;
                                let span = (hi - lo - 1) * spec.stride + 1;
                                let gslice = &grow[lo..hi];
                                if let Some(gx) = gx.as_mut() {
                                    let wv = wd[widx];
                                    let dst = &mut gx[first..first + span];
                                    if spec.stride == 1 {
                                        for (d, gv) in dst.iter_mut().zip(gslice) {
                                            *d += wv * gv;
                                        }
                                    } else {
                                        for (d, gv) in dst.iter_mut().step_by(spec.stride).zip(gslice) {
                                            *d += wv * gv;
                                        }
                                    }
                                }
                                if let Some(gw) = gw.as_mut() {
                                    let src = &xd[first..first + span];
                                    let acc: f64 = if spec.stride == 1 {
                                        src.iter().zip(gslice).fold(0.0, |a, (x, g)| a + g * x)
                                    } else {
                                        src.iter().step_by(spec.stride).zip(gslice).fold(0.0, |a, (x, g)| a + g * x)
                                    };
                                    gw[widx] += acc;
                                }
                            }
                        }
                    }
                }
                let mut result = vec![
                    gx.map(|d| Tensor::new(&[bsz, cin, len], d)),
                    gw.map(|d| Tensor::new(&[cout, cin, k], d)),
                ];
                if inputs.len() == 3 {
                    result.push(needs[2].then(|| channel_sums(gd, bsz, cout, out_len)));
                }
                result
            }),
        )
    }

    /// `x[B, Cin, T]` with `w[Cin, Cout, K]` (+ `b[Cout]`) `-> [B, Cout, out_len]`.
    pub fn conv_transpose1d(
        self,
        weight: Var<'t>,
        bias: Option<Var<'t>>,
        spec: ConvTranspose1dSpec,
        out_len: usize,
    ) -> Var<'t> {
        let x = self.value();
        let w = weight.value();
        let [bsz, cin, len] = *x.shape() else {
            panic!("conv_transpose1d input must be [B, C, T], got {:?}", x.shape());
        };
        let [cin_w, cout, k] = *w.shape() else {
            panic!("conv_transpose1d weight must be [Cin, Cout, K]");
        };
        assert_eq!(cin, cin_w, "conv_transpose1d channel mismatch");
        let s = spec.stride;
        let crop = spec.crop_left;
        // t*s + kk - crop in [0, out_len)
        let range = move |kk: usize| -> (usize, usize) {
            let lo = if crop > kk { (crop - kk).div_ceil(s) } else { 0 };
            let top = out_len as isize - 1 + crop as isize - kk as isize;
            if top < 0 {
                return (0, 0);
            }
            let hi = (top as usize / s + 1).min(len);
            (lo.min(hi), hi)
        };
        let mut out = vec![0.0; bsz * cout * out_len];
        let (xd, wd) = (x.data(), w.data());
        for b in 0..bsz {
            for i in 0..cin {
                let xrow = &xd[(b * cin + i) * len..(b * cin + i + 1) * len];
                for o in 0..cout {
                    let obase = (b * cout + o) * out_len;
                    for kk in 0..k {
                        let wv = wd[(i * cout + o) * k + kk];
                        let (lo, hi) = range(kk);
                        for (t, xv) in xrow.iter().enumerate().take(hi).skip(lo) {
                            out[obase + t * s + kk - crop] += wv * xv;
                        }
                    }
                }
            }
        }
        let mut value = Tensor::new(&[bsz, cout, out_len], out);
        let mut inputs = vec![self, weight];
        if let Some(bias) = bias {
            let bv = bias.value();
            assert_eq!(bv.len(), cout);
            for (idx, v) in value.data_mut().iter_mut().enumerate() {
                *v += bv.data()[(idx / out_len) % cout];
            }
            inputs.push(bias);
        }
        self.tape().record(
            &inputs,
            value,
            Box::new(move |g, inputs, _, needs| {
                let (xd, wd, gd) = (inputs[0].data(), inputs[1].data(), g.data());
                let mut gx = needs[0].then(|| vec![0.0; bsz * cin * len]);
                let mut gw = needs[1].then(|| vec![0.0; cin * cout * k]);
                for b in 0..bsz {
                    for i in 0..cin {
                        let xoff = (b * cin + i) * len;
                        for o in 0..cout {
                            let obase = (b * cout + o) * out_len;
                            for kk in 0..k {
                                let widx = (i * cout + o) * k + kk;
                                let (lo, hi) = range(kk);
                                if let Some(gx) = gx.as_mut() {
                                    let wv = wd[widx];
                                    for t in lo..hi {
                                        gx[xoff + t] += wv * gd[obase + t * s + kk - crop];
                                    }
                                }
                                if let Some(gw) = gw.as_mut() {
                                    let mut acc = 0.0;
                                    for t in lo..hi {
                                        acc += xd[xoff + t] * gd[obase + t * s + kk - crop];
                                    }
                                    gw[widx] += acc;
                                }
                            }
                        }
                    }
                }
                let mut result = vec![
                    gx.map(|d| Tensor::new(&[bsz, cin, len], d)),
                    gw.map(|d| Tensor::new(&[cin, cout, k], d)),
                ];
                if inputs.len() == 3 {
                    result.push(needs[2].then(|| channel_sums(gd, bsz, cout, out_len)));
                }
                result
            }),
        )
    }
}

fn channel_sums(g: &[f64], bsz: usize, c: usize, t: usize) -> Tensor {
    let mut acc = vec![0.0; c];
    for b in 0..bsz {
        for (ch, a) in acc.iter_mut().enumerate() {
            let off = (b * c + ch) * t;
            *a += g[off..off + t].iter().sum::<f64>();
        }
    }
    Tensor::new(&[c], acc)
}

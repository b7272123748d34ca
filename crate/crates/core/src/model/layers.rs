//! Layers with explicit forward caches and backward passes.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array, Array1, Array2, Array3, Array4, ArrayView2, Axis, Dimension, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Borrowed view of one parameter tensor.
pub struct TensorRef<'a> {
    pub name: &'static str,
    pub data: &'a [f64],
    pub shape: Vec<usize>,
}

pub struct TensorMut<'a> {
    pub name: &'static str,
    pub data: &'a mut [f64],
}

fn uniform_fill<R: Rng, Sh: ndarray::ShapeBuilder>(shape: Sh, bound: f64, rng: &mut R) -> Array<f64, Sh::Dim> {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array::from_shape_simple_fn(shape, || dist.sample(rng))
}

/// `n × n` orthogonal matrix from Gram-Schmidt on a Gaussian draw.
fn orthogonal<R: Rng>(n: usize, rng: &mut R) -> Array2<f64> {
    let mut q = Array2::from_shape_simple_fn((n, n), || StandardNormal.sample(rng));
    for j in 0..n {
        for k in 0..j {
            let proj: f64 = q.column(j).dot(&q.column(k));
            let qk = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-proj, &qk);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > 1e-12 {
            q.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    q
}

/// Valid-mode convolution along the time axis, shared across sensor
/// channels, followed by ReLU.
///
/// Activations are `[batch, time, sensor channel, feature map]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `[kernel, in maps, out maps]`.
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

pub struct ConvCache {
    input: Array4<f64>,
    output: Array4<f64>,
}

impl Conv1d {
    pub fn new<R: Rng>(kernel: usize, in_maps: usize, out_maps: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((kernel * in_maps) as f64).sqrt();
        Conv1d {
            weight: uniform_fill((kernel, in_maps, out_maps), bound, rng),
            bias: Array1::zeros(out_maps),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Conv1d {
            weight: Array3::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn kernel(&self) -> usize {
        self.weight.len_of(Axis(0))
    }

    pub fn in_maps(&self) -> usize {
        self.weight.len_of(Axis(1))
    }

    pub fn out_maps(&self) -> usize {
        self.weight.len_of(Axis(2))
    }

    pub fn forward(&self, input: Array4<f64>) -> (Array4<f64>, ConvCache) {
        let (b, t, c, fin) = input.dim();
        assert_eq!(fin, self.in_maps(), "conv input maps");
        let k = self.kernel();
        let fout = self.out_maps();
        assert!(t >= k, "time axis shorter than kernel");
        let tout = t - k + 1;
        let x = input
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * t * c, fin))
            .expect("contiguous");
        let mut out = Array2::<f64>::zeros((b * tout * c, fout));
        for sample in 0..b {
            let out_rows = sample * tout * c..(sample + 1) * tout * c;
            let mut dst = out.slice_mut(s![out_rows, ..]);
            for tau in 0..k {
                let start = sample * t * c + tau * c;
                let src = x.slice(s![start..start + tout * c, ..]);
                general_mat_mul(1.0, &src, &self.weight.index_axis(Axis(0), tau), 1.0, &mut dst);
            }
        }
        Zip::from(out.rows_mut()).for_each(|mut row| {
            Zip::from(&mut row).and(&self.bias).for_each(|v, &bb| *v = (*v + bb).max(0.0));
        });
        let output = out
            .into_shape_with_order((b, tout, c, fout))
            .expect("contiguous");
        (output.clone(), ConvCache { input, output })
    }

    /// Returns the gradient w.r.t. the input; parameter gradients are added
    /// into `grad`.
    pub fn backward(&self, cache: &ConvCache, d_out: &Array4<f64>, grad: &mut Conv1d) -> Array4<f64> {
        let (b, t, c, fin) = cache.input.dim();
        let (_, tout, _, fout) = cache.output.dim();
        let k = self.kernel();
        let mut d_pre = d_out.as_standard_layout().into_owned();
        Zip::from(&mut d_pre)
            .and(&cache.output)
            .for_each(|d, &o| {
                if o <= 0.0 {
                    *d = 0.0;
                }
            });
        let d_pre = d_pre
            .into_shape_with_order((b * tout * c, fout))
            .expect("contiguous");
        grad.bias += &d_pre.sum_axis(Axis(0));

        let x = cache
            .input
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * t * c, fin))
            .expect("contiguous");
        let mut d_x = Array2::<f64>::zeros((b * t * c, fin));
        for tau in 0..k {
            let w_tau = self.weight.index_axis(Axis(0), tau);
            let mut g_tau = grad.weight.index_axis_mut(Axis(0), tau);
            for sample in 0..b {
                let out_rows = sample * tout * c..(sample + 1) * tout * c;
                let dp = d_pre.slice(s![out_rows, ..]);
                let start = sample * t * c + tau * c;
                let rows = start..start + tout * c;
                general_mat_mul(1.0, &x.slice(s![rows.clone(), ..]).t(), &dp, 1.0, &mut g_tau);
                general_mat_mul(1.0, &dp, &w_tau.t(), 1.0, &mut d_x.slice_mut(s![rows, ..]));
            }
        }
        d_x.into_shape_with_order((b, t, c, fin)).expect("contiguous")
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef {
                name: "weight",
                data: self.weight.as_slice().expect("standard layout"),
                shape: self.weight.shape().to_vec(),
            },
            TensorRef {
                name: "bias",
                data: self.bias.as_slice().expect("standard layout"),
                shape: self.bias.shape().to_vec(),
            },
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        vec![
            TensorMut {
                name: "weight",
                data: self.weight.as_slice_mut().expect("standard layout"),
            },
            TensorMut {
                name: "bias",
                data: self.bias.as_slice_mut().expect("standard layout"),
            },
        ]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// LSTM layer; gate order in the packed weights is input, forget, cell,
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// `[input dim, 4 × hidden]`.
    pub w_input: Array2<f64>,
    /// `[hidden, 4 × hidden]`.
    pub w_hidden: Array2<f64>,
    pub bias: Array1<f64>,
}

pub struct LstmCache {
    input: Array3<f64>,
    /// `hs[t]` is the state before step `t`; `hs[T]` the final state.
    hs: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    /// Activated gates per step, `[B × 4H]`.
    gates: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
}

impl LstmCache {
    /// Hidden states for every step, `[B × T × H]`.
    pub fn outputs(&self) -> Array3<f64> {
        let steps = self.hs.len() - 1;
        let (b, h) = self.hs[0].dim();
        let mut out = Array3::zeros((b, steps, h));
        for t in 0..steps {
            out.slice_mut(s![.., t, ..]).assign(&self.hs[t + 1]);
        }
        out
    }

    pub fn last(&self) -> &Array2<f64> {
        self.hs.last().expect("at least the initial state")
    }
}

impl Lstm {
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let w_input = uniform_fill((input_dim, 4 * hidden), 1.0 / (input_dim as f64).sqrt(), rng);
        let mut w_hidden = Array2::zeros((hidden, 4 * hidden));
        for gate in 0..4 {
            w_hidden
                .slice_mut(s![.., gate * hidden..(gate + 1) * hidden])
                .assign(&orthogonal(hidden, rng));
        }
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Lstm { w_input, w_hidden, bias }
    }

    pub fn zeros_like(&self) -> Self {
        Lstm {
            w_input: Array2::zeros(self.w_input.raw_dim()),
            w_hidden: Array2::zeros(self.w_hidden.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.nrows()
    }

    pub fn forward(&self, input: Array3<f64>) -> LstmCache {
        let (b, steps, d) = input.dim();
        assert_eq!(d, self.input_dim(), "lstm input dim");
        let h = self.hidden();
        let mut hs = vec![Array2::zeros((b, h))];
        let mut cs = vec![Array2::zeros((b, h))];
        let mut gates = Vec::with_capacity(steps);
        let mut tanh_c = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut z = Array2::from_shape_fn((b, 4 * h), |(_, j)| self.bias[j]);
            general_mat_mul(1.0, &input.slice(s![.., t, ..]), &self.w_input, 1.0, &mut z);
            general_mat_mul(1.0, &hs[t], &self.w_hidden, 1.0, &mut z);
            for mut row in z.rows_mut() {
                for j in 0..4 * h {
                    row[j] = if (2 * h..3 * h).contains(&j) {
                        row[j].tanh()
                    } else {
                        sigmoid(row[j])
                    };
                }
            }
            let c_prev = &cs[t];
            let c = Array2::from_shape_fn((b, h), |(r, j)| {
                z[[r, h + j]] * c_prev[[r, j]] + z[[r, j]] * z[[r, 2 * h + j]]
            });
            let tc = c.mapv(f64::tanh);
            let hn = Array2::from_shape_fn((b, h), |(r, j)| z[[r, 3 * h + j]] * tc[[r, j]]);
            gates.push(z);
            tanh_c.push(tc);
            cs.push(c);
            hs.push(hn);
        }
        LstmCache { input, hs, cs, gates, tanh_c }
    }

    /// `d_outputs` is the gradient w.r.t. every step's hidden state
    /// `[B × T × H]`. Returns the gradient w.r.t. the input sequence.
    pub fn backward(&self, cache: &LstmCache, d_outputs: &Array3<f64>, grad: &mut Lstm) -> Array3<f64> {
        let (b, steps, d) = cache.input.dim();
        let h = self.hidden();
        let mut d_input = Array3::zeros((b, steps, d));
        let mut dh_next = Array2::<f64>::zeros((b, h));
        let mut dc_next = Array2::<f64>::zeros((b, h));
        let mut dz = Array2::<f64>::zeros((b, 4 * h));
        for t in (0..steps).rev() {
            let z = &cache.gates[t];
            let tc = &cache.tanh_c[t];
            let c_prev = &cache.cs[t];
            let dh = &d_outputs.slice(s![.., t, ..]) + &dh_next;
            for r in 0..b {
                for j in 0..h {
                    let (i, f, g, o) = (z[[r, j]], z[[r, h + j]], z[[r, 2 * h + j]], z[[r, 3 * h + j]]);
                    let dhv = dh[[r, j]];
                    let do_ = dhv * tc[[r, j]];
                    let dc = dhv * o * (1.0 - tc[[r, j]] * tc[[r, j]]) + dc_next[[r, j]];
                    dz[[r, j]] = dc * g * i * (1.0 - i);
                    dz[[r, h + j]] = dc * c_prev[[r, j]] * f * (1.0 - f);
                    dz[[r, 2 * h + j]] = dc * i * (1.0 - g * g);
                    dz[[r, 3 * h + j]] = do_ * o * (1.0 - o);
                    dc_next[[r, j]] = dc * f;
                }
            }
            let x_t = cache.input.slice(s![.., t, ..]);
            general_mat_mul(1.0, &x_t.t(), &dz, 1.0, &mut grad.w_input);
            general_mat_mul(1.0, &cache.hs[t].t(), &dz, 1.0, &mut grad.w_hidden);
            grad.bias += &dz.sum_axis(Axis(0));
            general_mat_mul(1.0, &dz, &self.w_input.t(), 0.0, &mut d_input.slice_mut(s![.., t, ..]));
            general_mat_mul(1.0, &dz, &self.w_hidden.t(), 0.0, &mut dh_next);
        }
        d_input
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef {
                name: "w_input",
                data: self.w_input.as_slice().expect("standard layout"),
                shape: self.w_input.shape().to_vec(),
            },
            TensorRef {
                name: "w_hidden",
                data: self.w_hidden.as_slice().expect("standard layout"),
                shape: self.w_hidden.shape().to_vec(),
            },
            TensorRef {
                name: "bias",
                data: self.bias.as_slice().expect("standard layout"),
                shape: self.bias.shape().to_vec(),
            },
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        vec![
            TensorMut {
                name: "w_input",
                data: self.w_input.as_slice_mut().expect("standard layout"),
            },
            TensorMut {
                name: "w_hidden",
                data: self.w_hidden.as_slice_mut().expect("standard layout"),
            },
            TensorMut {
                name: "bias",
                data: self.bias.as_slice_mut().expect("standard layout"),
            },
        ]
    }
}

/// Fully connected layer producing logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[in, out]`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            weight: uniform_fill((inputs, outputs), 1.0 / (inputs as f64).sqrt(), rng),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn backward(&self, x: &ArrayView2<f64>, d_out: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
        general_mat_mul(1.0, &x.t(), d_out, 1.0, &mut grad.weight);
        grad.bias += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.weight.t())
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef {
                name: "weight",
                data: self.weight.as_slice().expect("standard layout"),
                shape: self.weight.shape().to_vec(),
            },
            TensorRef {
                name: "bias",
                data: self.bias.as_slice().expect("standard layout"),
                shape: self.bias.shape().to_vec(),
            },
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        vec![
            TensorMut {
                name: "weight",
                data: self.weight.as_slice_mut().expect("standard layout"),
            },
            TensorMut {
                name: "bias",
                data: self.bias.as_slice_mut().expect("standard layout"),
            },
        ]
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Weighted mean cross-entropy `(1/N) Σ wᵢ·(−log p[i, yᵢ])` and its gradient
/// w.r.t. the logits.
pub fn cross_entropy(logits: &Array2<f64>, targets: &[usize], weights: &[f64]) -> (f64, Array2<f64>) {
    let n = targets.len();
    assert_eq!(logits.nrows(), n);
    assert_eq!(weights.len(), n);
    let probs = softmax(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (i, (&y, &w)) in targets.iter().zip(weights).enumerate() {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += w * (log_sum - row[y]);
        grad[[i, y]] -= 1.0;
        grad.row_mut(i).mapv_inplace(|g| g * w / n as f64);
    }
    (loss / n as f64, grad)
}

/// Gradient reversal, forward pass: the identity.
pub fn grl_forward<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.clone()
}

/// Gradient reversal, backward pass: `−λ · upstream`.
pub fn grl_backward<D: Dimension>(upstream: &Array<f64, D>, lambda: f64) -> Array<f64, D> {
    upstream.mapv(|g| -lambda * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grl_is_identity_forward_and_negates_backward() {
        let x = array![[1.5, -2.0], [0.0, 3.25]];
        assert_eq!(grl_forward(&x), x);
        assert_eq!(grl_backward(&x, 1.0), -&x);
        assert_eq!(grl_backward(&x, 2.5), x.mapv(|v| -2.5 * v));
    }

    #[test]
    fn conv_shrinks_time_by_kernel_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv1d::new(5, 1, 4, &mut rng);
        let (out, _) = conv.forward(Array4::zeros((2, 24, 3, 1)));
        assert_eq!(out.dim(), (2, 20, 3, 4));
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv1d::new(3, 2, 2, &mut rng);
        let x = Array4::from_shape_fn((2, 6, 3, 2), |(b, t, c, f)| {
            ((b * 31 + t * 7 + c * 3 + f) % 11) as f64 / 5.0 - 1.0
        });
        let (out, _) = conv.forward(x.clone());
        for b in 0..2 {
            for t in 0..4 {
                for c in 0..3 {
                    for g in 0..2 {
                        let mut v = conv.bias[g];
                        for tau in 0..3 {
                            for f in 0..2 {
                                v += x[[b, t + tau, c, f]] * conv.weight[[tau, f, g]];
                            }
                        }
                        assert!((out[[b, t, c, g]] - v.max(0.0)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn orthogonal_init_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = orthogonal(6, &mut rng);
        let eye = q.t().dot(&q);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cross_entropy_unit_weights_match_unweighted_formula() {
        let logits = array![[1.0, 2.0, 0.5], [0.1, -1.0, 0.3]];
        let (loss, grad) = cross_entropy(&logits, &[1, 2], &[1.0, 1.0]);
        let p = softmax(&logits);
        let want = -(p[[0, 1]].ln() + p[[1, 2]].ln()) / 2.0;
        assert!((loss - want).abs() < 1e-12);
        assert!((grad[[0, 1]] - (p[[0, 1]] - 1.0) / 2.0).abs() < 1e-12);
        assert!((grad[[1, 0]] - p[[1, 0]] / 2.0).abs() < 1e-12);
    }
}

//! Batched forward pass with input tangents and its reverse sweep.
//!
//! Columns of every layer matrix are stacked in blocks
//! `[values | d/dx_0 | d/dx_1 | ...]`, one column per point within a block,
//! so each layer is a single matrix product over all blocks.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, ArrayViewMut2};

use super::{NetworkParams, CLAMPED, OUTPUTS};
use crate::autodiff::DualPoint;

/// Cached activations of one batched forward pass.
#[derive(Clone, Debug)]
pub struct BatchForward {
    n: usize,
    dirs: usize,
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    out: Array2<f64>,
    active: Vec<bool>,
}

impl BatchForward {
    /// Runs the network on `points`, using the first `input_dim` coordinates
    /// of each point and one tangent direction per input coordinate.
    pub fn compute(params: &NetworkParams, points: &[[f64; 3]]) -> Self {
        let d = params.input_dim();
        assert!(d <= 3, "at most three input coordinates");
        assert_eq!(params.output_dim(), OUTPUTS);
        let n = points.len();
        let cols = n * (d + 1);
        let mut input = Array2::zeros((d, n));
        for (p, pt) in points.iter().enumerate() {
            for i in 0..d {
                input[[i, p]] = pt[i];
            }
        }
        let layers = params.layer_count();
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut act: Vec<Array2<f64>> = Vec::with_capacity(layers - 1);
        for (k, slot) in params.slots().iter().enumerate() {
            let w = ArrayView2::from_shape((slot.rows, slot.cols), params.weights(k))
                .expect("weight shape");
            let mut z = Array2::zeros((slot.rows, cols));
            if k == 0 {
                general_mat_mul(1.0, &w, &input, 0.0, &mut z.slice_mut(s![.., 0..n]));
                for j in 0..d {
                    for r in 0..slot.rows {
                        z.slice_mut(s![r, (j + 1) * n..(j + 2) * n]).fill(w[[r, j]]);
                    }
                }
            } else {
                general_mat_mul(1.0, &w, &act[k - 1], 0.0, &mut z);
            }
            for (r, &b) in params.bias(k).iter().enumerate() {
                z.slice_mut(s![r, 0..n]).mapv_inplace(|v| v + b);
            }
            if k + 1 < layers {
                act.push(activate(&z, n, d, params.gain(k)));
            }
            pre.push(z);
        }

        let mut out = pre[layers - 1].clone();
        let mut active = vec![true; CLAMPED.len() * n];
        let alpha = params.alpha_clamp();
        for (ci, &c) in CLAMPED.iter().enumerate() {
            for p in 0..n {
                if out[[c, p]] < alpha {
                    active[ci * n + p] = false;
                    out[[c, p]] = alpha;
                    for j in 1..=d {
                        out[[c, j * n + p]] = 0.0;
                    }
                }
            }
        }
        Self {
            n,
            dirs: d,
            input,
            pre,
            act,
            out,
            active,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dirs(&self) -> usize {
        self.dirs
    }

    /// Clamped output channel `c` at point `p`.
    pub fn value(&self, p: usize, c: usize) -> f64 {
        self.out[[c, p]]
    }

    /// Derivative of output channel `c` along input `dir` at point `p`.
    pub fn tangent(&self, p: usize, dir: usize, c: usize) -> f64 {
        self.out[[c, (dir + 1) * self.n + p]]
    }

    pub fn output(&self, p: usize) -> [DualPoint; 4] {
        std::array::from_fn(|c| {
            let t: Vec<f64> = (0..self.dirs).map(|j| self.tangent(p, j, c)).collect();
            DualPoint::new(self.value(p, c), &t)
        })
    }

    /// Zeroed adjoint buffer matching the output layout.
    pub fn adjoint_buffer(&self) -> Array2<f64> {
        Array2::zeros((OUTPUTS, self.n * (self.dirs + 1)))
    }

    /// Adds to the adjoint of channel `c` at point `p`; `block` 0 is the
    /// value, `block = j + 1` the tangent along input `j`.
    pub fn add_adjoint(&self, adj: &mut Array2<f64>, p: usize, c: usize, block: usize, v: f64) {
        adj[[c, block * self.n + p]] += v;
    }

    /// Accumulates parameter gradients of `sum(adj * outputs)` into `grad`.
    pub fn backward(&self, params: &NetworkParams, adj: &Array2<f64>, grad: &mut [f64]) {
        assert_eq!(grad.len(), params.len());
        let (n, d) = (self.n, self.dirs);
        let mut g = adj.clone();
        for (ci, &c) in CLAMPED.iter().enumerate() {
            for p in 0..n {
                if !self.active[ci * n + p] {
                    for j in 0..=d {
                        g[[c, j * n + p]] = 0.0;
                    }
                }
            }
        }
        for k in (0..params.layer_count()).rev() {
            let slot = params.slots()[k];
            {
                let mut dw = ArrayViewMut2::from_shape(
                    (slot.rows, slot.cols),
                    &mut grad[slot.weights..slot.weights + slot.rows * slot.cols],
                )
                .expect("weight shape");
                if k == 0 {
                    general_mat_mul(1.0, &g.slice(s![.., 0..n]), &self.input.t(), 1.0, &mut dw);
                    for j in 0..d {
                        for r in 0..slot.rows {
                            dw[[r, j]] += g.slice(s![r, (j + 1) * n..(j + 2) * n]).sum();
                        }
                    }
                } else {
                    general_mat_mul(1.0, &g, &self.act[k - 1].t(), 1.0, &mut dw);
                }
            }
            for r in 0..slot.rows {
                grad[slot.bias + r] += g.slice(s![r, 0..n]).sum();
            }
            if k == 0 {
                break;
            }
            let w = ArrayView2::from_shape((slot.rows, slot.cols), params.weights(k))
                .expect("weight shape");
            let abar = w.t().dot(&g);
            let gain = params.gain(k - 1);
            let (next, sbar) = activation_adjoint(&abar, &self.pre[k - 1], &self.act[k - 1], n, d, gain);
            let slope = params.slots()[k - 1].slope.expect("hidden layer slope");
            grad[slope] += params.scale_n() * sbar;
            g = next;
        }
    }
}

fn activate(z: &Array2<f64>, n: usize, d: usize, gain: f64) -> Array2<f64> {
    let mut a = Array2::zeros(z.raw_dim());
    for (zr, mut ar) in z.rows().into_iter().zip(a.rows_mut()) {
        let zr = zr.as_slice().expect("standard layout");
        let ar = ar.as_slice_mut().expect("standard layout");
        for p in 0..n {
            let t = (gain * zr[p]).tanh();
            ar[p] = t;
            let slope = gain * (1.0 - t * t);
            for j in 1..=d {
                ar[j * n + p] = slope * zr[j * n + p];
            }
        }
    }
    a
}

/// Pulls adjoints of `A = [tanh(sZ) | s(1 - tanh^2) Z_T]` back to `Z`.
/// Returns the pre-activation adjoint and the adjoint of the gain `s`.
fn activation_adjoint(
    abar: &Array2<f64>,
    z: &Array2<f64>,
    a: &Array2<f64>,
    n: usize,
    d: usize,
    gain: f64,
) -> (Array2<f64>, f64) {
    let mut out = Array2::zeros(z.raw_dim());
    let mut sbar = 0.0;
    for r in 0..z.nrows() {
        let ab = abar.row(r);
        let ab = ab.as_slice().expect("standard layout");
        let zr = z.row(r);
        let zr = zr.as_slice().expect("standard layout");
        let ar = a.row(r);
        let ar = ar.as_slice().expect("standard layout");
        let mut orow = out.row_mut(r);
        let or = orow.as_slice_mut().expect("standard layout");
        for p in 0..n {
            let av = ar[p];
            let gg = 1.0 - av * av;
            let zv = zr[p];
            let mut cross = 0.0;
            sbar += ab[p] * gg * zv;
            let chain = 1.0 - 2.0 * gain * av * zv;
            for j in 1..=d {
                let i = j * n + p;
                or[i] = gain * gg * ab[i];
                cross += ab[i] * zr[i];
                sbar += ab[i] * gg * zr[i] * chain;
            }
            or[p] = gain * gg * ab[p] - 2.0 * gain * gain * av * gg * cross;
        }
    }
    (out, sbar)
}

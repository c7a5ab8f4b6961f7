//! Feed-forward networks with layer-wise adaptive tanh activations.
//!
//! A network maps an input point (x, y[, t]) to primitive variables in the
//! fixed channel order (rho, u, v, p). Density and pressure are clamped from
//! below by `alpha_clamp`. Every hidden layer `k` has a trainable slope `a_k`
//! and applies `tanh(scale_n * a_k * z)`.

mod batch;
mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{DualPoint, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::Membership;

pub use batch::BatchForward;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};

/// Number of network output channels.
pub const OUTPUTS: usize = 4;
/// Output channels subject to the positivity clamp.
pub const CLAMPED: [usize; 2] = [0, 3];

pub const DEFAULT_SCALE_N: f64 = 10.0;
pub const DEFAULT_ALPHA_CLAMP: f64 = 1e-6;

/// Offsets of one layer's parameters inside the flat vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlots {
    pub rows: usize,
    pub cols: usize,
    pub weights: usize,
    pub bias: usize,
    pub slope: Option<usize>,
}

/// Trainable parameters stored flat in canonical layer-major order:
/// `W1, b1, a1, W2, b2, a2, ..., WL, bL` with row-major weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    sizes: Vec<usize>,
    values: Vec<f64>,
    slots: Vec<LayerSlots>,
    scale_n: f64,
    alpha_clamp: f64,
    seed: u64,
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 3 {
        return Err(Error::config(
            "network needs an input layer, at least one hidden layer and an output layer",
        ));
    }
    if sizes.contains(&0) {
        return Err(Error::config(format!("layer sizes must be positive: {sizes:?}")));
    }
    Ok(())
}

fn layout(sizes: &[usize]) -> (Vec<LayerSlots>, usize) {
    let mut slots = Vec::with_capacity(sizes.len() - 1);
    let mut off = 0;
    let last = sizes.len() - 2;
    for k in 0..sizes.len() - 1 {
        let (cols, rows) = (sizes[k], sizes[k + 1]);
        let weights = off;
        off += rows * cols;
        let bias = off;
        off += rows;
        let slope = (k < last).then(|| {
            off += 1;
            off - 1
        });
        slots.push(LayerSlots {
            rows,
            cols,
            weights,
            bias,
            slope,
        });
    }
    (slots, off)
}

impl NetworkParams {
    /// Parameters from a flat vector in canonical order.
    pub fn from_values(
        sizes: &[usize],
        values: Vec<f64>,
        scale_n: f64,
        alpha_clamp: f64,
        seed: u64,
    ) -> Result<Self> {
        validate_sizes(sizes)?;
        if !(alpha_clamp > 0.0 && alpha_clamp < 1.0) {
            return Err(Error::config(format!(
                "alpha_clamp must lie in (0, 1), got {alpha_clamp}"
            )));
        }
        if !(scale_n > 0.0) {
            return Err(Error::config("scale_n must be positive"));
        }
        let (slots, count) = layout(sizes);
        if values.len() != count {
            return Err(Error::config(format!(
                "expected {count} parameters for sizes {sizes:?}, got {}",
                values.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            values,
            slots,
            scale_n,
            alpha_clamp,
            seed,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len(), "parameter count mismatch");
        self.values.copy_from_slice(values);
    }

    pub fn slots(&self) -> &[LayerSlots] {
        &self.slots
    }

    pub fn scale_n(&self) -> f64 {
        self.scale_n
    }

    pub fn alpha_clamp(&self) -> f64 {
        self.alpha_clamp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_scale_n(&mut self, scale_n: f64) {
        self.scale_n = scale_n;
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = &self.slots[layer];
        &self.values[s.weights..s.weights + s.rows * s.cols]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.slots[layer];
        &mut self.values[s.weights..s.weights + s.rows * s.cols]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = &self.slots[layer];
        &self.values[s.bias..s.bias + s.rows]
    }

    /// Trainable slope `a_k` of hidden layer `layer`.
    pub fn slope(&self, layer: usize) -> Option<f64> {
        self.slots[layer].slope.map(|i| self.values[i])
    }

    /// Effective activation gain `scale_n * a_k`.
    pub fn gain(&self, layer: usize) -> f64 {
        self.scale_n * self.slope(layer).expect("hidden layer")
    }

    pub fn slope_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().filter_map(|s| s.slope)
    }

    pub fn hidden_layers(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn layer_count(&self) -> usize {
        self.slots.len()
    }
}

/// Xavier/Glorot-normal weights, zero biases, slopes with `scale_n * a = 1`.
pub fn xavier_init(sizes: &[usize], seed: u64) -> Result<NetworkParams> {
    xavier_init_with(sizes, seed, DEFAULT_SCALE_N, DEFAULT_ALPHA_CLAMP)
}

pub fn xavier_init_with(
    sizes: &[usize],
    seed: u64,
    scale_n: f64,
    alpha_clamp: f64,
) -> Result<NetworkParams> {
    validate_sizes(sizes)?;
    let (slots, count) = layout(sizes);
    let mut values = vec![0.0; count];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &slots {
        let std = (2.0 / (s.rows + s.cols) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        for w in &mut values[s.weights..s.weights + s.rows * s.cols] {
            *w = normal.sample(&mut rng);
        }
        if let Some(a) = s.slope {
            values[a] = 1.0 / scale_n;
        }
    }
    NetworkParams::from_values(sizes, values, scale_n, alpha_clamp, seed)
}

/// Network prediction with input tangents on every channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkOutput {
    pub rho: DualPoint,
    pub u: DualPoint,
    pub v: DualPoint,
    pub p: DualPoint,
}

impl NetworkOutput {
    pub fn from_array(a: [DualPoint; 4]) -> Self {
        Self {
            rho: a[0],
            u: a[1],
            v: a[2],
            p: a[3],
        }
    }

    pub fn to_array(&self) -> [DualPoint; 4] {
        [self.rho, self.u, self.v, self.p]
    }

    pub fn values(&self) -> [f64; 4] {
        self.to_array().map(|d| d.value())
    }
}

/// Generic forward pass; `input` holds one value per input coordinate.
fn forward_generic<S: Real>(params: &NetworkParams, input: &[S], load: impl Fn(usize) -> S) -> Vec<S> {
    let mut h: Vec<S> = input.to_vec();
    let layers = params.layer_count();
    for (k, s) in params.slots.iter().enumerate() {
        if k > 0 {
            let gain = load(params.slots[k - 1].slope.expect("hidden")) * params.scale_n;
            h = h.into_iter().map(|z| (z * gain).tanh()).collect();
        }
        let mut next = Vec::with_capacity(s.rows);
        for r in 0..s.rows {
            let mut acc = load(s.bias + r);
            for c in 0..s.cols {
                acc = acc + load(s.weights + r * s.cols + c) * h[c];
            }
            next.push(acc);
        }
        h = next;
        debug_assert!(k < layers);
    }
    for &c in CLAMPED.iter() {
        h[c] = h[c].max_const(params.alpha_clamp);
    }
    h
}

/// Evaluates the network at `point`, carrying tangents along every input.
pub fn forward(params: &NetworkParams, point: &[f64]) -> Result<NetworkOutput> {
    check_point(params, point)?;
    let dirs = point.len();
    let input: Vec<DualPoint> = point
        .iter()
        .enumerate()
        .map(|(i, &x)| DualPoint::variable(x, i, dirs))
        .collect();
    let out = forward_generic(params, &input, |i| DualPoint::constant(params.values[i]));
    Ok(NetworkOutput::from_array([out[0], out[1], out[2], out[3]]))
}

/// Forward pass recorded on a tape with parameters as leaves.
///
/// Returns the four output nodes. Input coordinates become tape inputs, so
/// `tangent(dir)` on the outputs gives input derivatives whose parameter
/// gradients are available from the same tape.
pub fn forward_on_tape<'t>(
    params: &NetworkParams,
    tape: &'t Tape,
    param_vars: &[Var<'t>],
    point: &[f64],
) -> Result<[Var<'t>; 4]> {
    check_point(params, point)?;
    if param_vars.len() != params.len() {
        return Err(Error::config("parameter leaf count mismatch"));
    }
    let input: Vec<Var<'t>> = point
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i < tape.dirs() {
                tape.input(x, i)
            } else {
                tape.constant(x)
            }
        })
        .collect();
    let out = forward_generic(params, &input, |i| param_vars[i]);
    Ok([out[0], out[1], out[2], out[3]])
}

fn check_point(params: &NetworkParams, point: &[f64]) -> Result<()> {
    if point.len() != params.input_dim() {
        return Err(Error::config(format!(
            "point has {} coordinates, network expects {}",
            point.len(),
            params.input_dim()
        )));
    }
    if params.output_dim() != OUTPUTS {
        return Err(Error::config(format!(
            "network must have {OUTPUTS} outputs, has {}",
            params.output_dim()
        )));
    }
    Ok(())
}

/// Something that can say whether it owns a point.
pub trait Indicator {
    fn membership(&self, point: [f64; 2]) -> Membership;
}

/// Stitched prediction over a partition.
///
/// The owning subnet answers for interior points; on an interface the
/// outputs of all adjacent subnets are averaged.
pub fn stitched_forward(
    subnets: &[(&NetworkParams, &dyn Indicator)],
    point: &[f64],
) -> Result<NetworkOutput> {
    let xy = [point[0], point[1]];
    let mut boundary = Vec::new();
    for (params, region) in subnets {
        match region.membership(xy) {
            Membership::Inside => return forward(params, point),
            Membership::Boundary => boundary.push(*params),
            Membership::Outside => {}
        }
    }
    if boundary.is_empty() {
        return Err(Error::domain(format!("point {point:?} lies outside every subdomain")));
    }
    let outs = boundary
        .iter()
        .map(|p| forward(p, point))
        .collect::<Result<Vec<_>>>()?;
    let inv = 1.0 / outs.len() as f64;
    let avg: [DualPoint; 4] = std::array::from_fn(|c| {
        let sum = outs
            .iter()
            .skip(1)
            .fold(outs[0].to_array()[c], |acc, o| acc + o.to_array()[c]);
        sum * inv
    });
    Ok(NetworkOutput::from_array(avg))
}

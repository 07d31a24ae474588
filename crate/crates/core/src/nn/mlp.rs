//! Multilayer perceptron over a flat parameter vector, with exact
//! reverse-mode gradients.
//!
//! Weights for a layer with `n_in` inputs and `n_out` outputs are stored
//! input-major (`w[j * n_out + k]`), so both the forward pass and the weight
//! gradient accumulate along contiguous rows.

use serde::{Deserialize, Serialize};

use crate::rng::Pcg32;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("expected input of length {expected}, got {got}")]
    InputDimension { expected: usize, got: usize },
    #[error("expected upstream gradient of length {expected}, got {got}")]
    UpstreamDimension { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, spec needs {expected}")]
    ParamDimension { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// Raw linear output.
    Linear,
    /// Output is [mean | log_std] for a tanh-squashed Gaussian policy.
    SquashedGaussian,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub head: OutputHead,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        head: OutputHead,
    ) -> Self {
        assert!(input_dim >= 1 && output_dim >= 1);
        assert!(hidden.iter().all(|&h| h >= 1));
        MlpSpec {
            input_dim,
            hidden,
            output_dim,
            activation,
            head,
        }
    }

    /// Layer widths including input and output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden);
        d.push(self.output_dim);
        d
    }

    pub fn layout(&self) -> Layout {
        let dims = self.dims();
        let mut entries = Vec::with_capacity(dims.len() - 1);
        let mut offset = 0;
        for w in dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            entries.push(LayerSlot {
                n_in,
                n_out,
                w_offset: offset,
                b_offset: offset + n_in * n_out,
            });
            offset += n_in * n_out + n_out;
        }
        Layout {
            entries,
            total: offset,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub n_in: usize,
    pub n_out: usize,
    pub w_offset: usize,
    pub b_offset: usize,
}

/// Offsets of every weight matrix and bias vector in the flat array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub entries: Vec<LayerSlot>,
    pub total: usize,
}

/// Flat parameter array plus the layout that interprets it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    data: Vec<f64>,
    layout: Layout,
}

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layout = spec.layout();
        ParamVector {
            data: vec![0.0; layout.total],
            layout,
        }
    }

    /// Xavier-uniform weights, zero biases; the final layer is scaled down
    /// so fresh policies start near the action-range midpoint.
    pub fn init(spec: &MlpSpec, rng: &mut Pcg32) -> Self {
        let layout = spec.layout();
        let mut data = vec![0.0; layout.total];
        let last = layout.entries.len() - 1;
        for (l, slot) in layout.entries.iter().enumerate() {
            let bound = (6.0 / (slot.n_in + slot.n_out) as f64).sqrt()
                * if l == last { 0.01 } else { 1.0 };
            for w in &mut data[slot.w_offset..slot.w_offset + slot.n_in * slot.n_out] {
                *w = rng.uniform_in(-bound, bound);
            }
        }
        ParamVector { data, layout }
    }

    pub fn from_data(spec: &MlpSpec, data: Vec<f64>) -> Result<Self, NnError> {
        let layout = spec.layout();
        if data.len() != layout.total {
            return Err(NnError::ParamDimension {
                expected: layout.total,
                got: data.len(),
            });
        }
        Ok(ParamVector { data, layout })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Polyak update: self = (1 - rho) * self + rho * other.
    pub fn smooth_from(&mut self, other: &ParamVector, rho: f64) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (t, o) in self.data.iter_mut().zip(&other.data) {
            *t = (1.0 - rho) * *t + rho * *o;
        }
    }
}

/// Cached per-layer post-activations from a forward pass.
/// `layers[0]` is the input; the last entry is the linear output.
pub struct ForwardCache {
    pub layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache has at least the input")
    }
}

fn check_input(spec: &MlpSpec, params: &ParamVector, x: &[f64]) -> Result<(), NnError> {
    if x.len() != spec.input_dim {
        return Err(NnError::InputDimension {
            expected: spec.input_dim,
            got: x.len(),
        });
    }
    if params.len() != params.layout.total || params.layout != spec.layout() {
        return Err(NnError::ParamDimension {
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("input"));
    }
    Ok(())
}

#[inline]
fn activate(activation: Activation, z: &mut [f64]) {
    match activation {
        Activation::Relu => {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Activation::Tanh => {
            for v in z.iter_mut() {
                *v = v.tanh();
            }
        }
    }
}

/// d activation / d z expressed through the post-activation value.
#[inline]
fn activation_grad(activation: Activation, post: f64) -> f64 {
    match activation {
        Activation::Relu => {
            if post > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => 1.0 - post * post,
    }
}

/// Deterministic forward pass.
pub fn forward(spec: &MlpSpec, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>, NnError> {
    Ok(forward_cached(spec, params, x)?.layers.pop().unwrap())
}

/// Forward pass retaining per-layer activations for a later backward pass.
pub fn forward_cached(
    spec: &MlpSpec,
    params: &ParamVector,
    x: &[f64],
) -> Result<ForwardCache, NnError> {
    check_input(spec, params, x)?;
    let n_layers = params.layout.entries.len();
    let mut layers = Vec::with_capacity(n_layers + 1);
    layers.push(x.to_vec());
    for (l, slot) in params.layout.entries.iter().enumerate() {
        let a_prev = &layers[l];
        let w = &params.data[slot.w_offset..slot.w_offset + slot.n_in * slot.n_out];
        let b = &params.data[slot.b_offset..slot.b_offset + slot.n_out];
        let mut z = b.to_vec();
        for (j, &aj) in a_prev.iter().enumerate() {
            if aj != 0.0 {
                let row = &w[j * slot.n_out..(j + 1) * slot.n_out];
                for (zk, wk) in z.iter_mut().zip(row) {
                    *zk += aj * wk;
                }
            }
        }
        if l + 1 < n_layers {
            activate(spec.activation, &mut z);
        }
        layers.push(z);
    }
    Ok(ForwardCache { layers })
}

/// Exact reverse-mode gradients of the forward computation.
/// Returns (parameter gradient, input gradient).
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    x: &[f64],
    upstream: &[f64],
) -> Result<(ParamVector, Vec<f64>), NnError> {
    let cache = forward_cached(spec, params, x)?;
    let mut grad = ParamVector::zeros(spec);
    let input_grad = backward_cached(spec, params, &cache, upstream, &mut grad)?;
    Ok((grad, input_grad))
}

/// Backward pass over a cached forward, accumulating parameter gradients
/// into `grad_accum` (callers batching samples keep one accumulator).
pub fn backward_cached(
    spec: &MlpSpec,
    params: &ParamVector,
    cache: &ForwardCache,
    upstream: &[f64],
    grad_accum: &mut ParamVector,
) -> Result<Vec<f64>, NnError> {
    if upstream.len() != spec.output_dim {
        return Err(NnError::UpstreamDimension {
            expected: spec.output_dim,
            got: upstream.len(),
        });
    }
    debug_assert_eq!(grad_accum.len(), params.len());
    let entries = &params.layout.entries;
    let mut g = upstream.to_vec();
    for (l, slot) in entries.iter().enumerate().rev() {
        let a_prev = &cache.layers[l];
        let w = &params.data[slot.w_offset..slot.w_offset + slot.n_in * slot.n_out];
        // Bias gradient.
        {
            let gb = &mut grad_accum.data[slot.b_offset..slot.b_offset + slot.n_out];
            for (b, u) in gb.iter_mut().zip(&g) {
                *b += u;
            }
        }
        // Weight gradient: outer product of input activation and upstream.
        {
            let gw = &mut grad_accum.data[slot.w_offset..slot.w_offset + slot.n_in * slot.n_out];
            for (j, &aj) in a_prev.iter().enumerate() {
                if aj != 0.0 {
                    let row = &mut gw[j * slot.n_out..(j + 1) * slot.n_out];
                    for (rk, u) in row.iter_mut().zip(&g) {
                        *rk += aj * u;
                    }
                }
            }
        }
        // Downstream gradient.
        let mut g_prev = vec![0.0; slot.n_in];
        for (j, gj) in g_prev.iter_mut().enumerate() {
            let row = &w[j * slot.n_out..(j + 1) * slot.n_out];
            let mut acc = 0.0;
            for (wk, u) in row.iter().zip(&g) {
                acc += wk * u;
            }
            *gj = acc;
        }
        if l > 0 {
            for (gj, &aj) in g_prev.iter_mut().zip(a_prev) {
                *gj *= activation_grad(spec.activation, aj);
            }
        }
        g = g_prev;
    }
    Ok(g)
}

/// Input gradient only, skipping parameter-gradient accumulation. Used where
/// a network is differentiated through but not being trained (the critic
/// inside the actor objective).
pub fn backward_input_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<Vec<f64>, NnError> {
    if upstream.len() != spec.output_dim {
        return Err(NnError::UpstreamDimension {
            expected: spec.output_dim,
            got: upstream.len(),
        });
    }
    let entries = &params.layout.entries;
    let mut g = upstream.to_vec();
    for (l, slot) in entries.iter().enumerate().rev() {
        let a_prev = &cache.layers[l];
        let w = &params.data[slot.w_offset..slot.w_offset + slot.n_in * slot.n_out];
        let mut g_prev = vec![0.0; slot.n_in];
        for (j, gj) in g_prev.iter_mut().enumerate() {
            let row = &w[j * slot.n_out..(j + 1) * slot.n_out];
            let mut acc = 0.0;
            for (wk, u) in row.iter().zip(&g) {
                acc += wk * u;
            }
            *gj = acc;
        }
        if l > 0 {
            for (gj, &aj) in g_prev.iter_mut().zip(a_prev) {
                *gj *= activation_grad(spec.activation, aj);
            }
        }
        g = g_prev;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input: usize, hidden: &[usize], output: usize, act: Activation) -> MlpSpec {
        MlpSpec::new(input, hidden.to_vec(), output, act, OutputHead::Linear)
    }

    /// Independent straight-line evaluator: per-neuron dot products, written
    /// without any of the library's layout helpers.
    fn naive_forward(spec: &MlpSpec, flat: &[f64], x: &[f64]) -> Vec<f64> {
        let dims = spec.dims();
        let mut a = x.to_vec();
        let mut cursor = 0;
        for l in 0..dims.len() - 1 {
            let (n_in, n_out) = (dims[l], dims[l + 1]);
            let mut z = vec![0.0; n_out];
            #[allow(clippy::needless_range_loop)]
            for k in 0..n_out {
                let mut acc = flat[cursor + n_in * n_out + k];
                for j in 0..n_in {
                    acc += a[j] * flat[cursor + j * n_out + k];
                }
                z[k] = acc;
            }
            cursor += n_in * n_out + n_out;
            if l < dims.len() - 2 {
                for v in z.iter_mut() {
                    *v = match spec.activation {
                        Activation::Relu => v.max(0.0),
                        Activation::Tanh => v.tanh(),
                    };
                }
            }
            a = z;
        }
        a
    }

    #[test]
    fn zero_params_give_zero_output() {
        let s = spec(4, &[8], 3, Activation::Relu);
        let p = ParamVector::zeros(&s);
        let y = forward(&s, &p, &[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let s = spec(3, &[], 3, Activation::Relu);
        let mut p = ParamVector::zeros(&s);
        for i in 0..3 {
            p.as_mut_slice()[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.7, 2.2];
        assert_eq!(forward(&s, &p, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_agrees_with_independent_evaluator() {
        let mut rng = Pcg32::new(31, 7);
        for (hidden, act) in [
            (vec![5], Activation::Relu),
            (vec![7, 4], Activation::Tanh),
            (vec![3, 3, 3], Activation::Relu),
        ] {
            let s = MlpSpec::new(6, hidden, 2, act, OutputHead::Linear);
            let p = ParamVector::init(&s, &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let ours = forward(&s, &p, &x).unwrap();
            let theirs = naive_forward(&s, p.as_slice(), &x);
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = Pcg32::new(2, 2);
        let s = spec(5, &[16, 16], 4, Activation::Relu);
        let p = ParamVector::init(&s, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let a = forward(&s, &p, &x).unwrap();
        let b = forward(&s, &p, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let s = spec(4, &[4], 2, Activation::Relu);
        let p = ParamVector::zeros(&s);
        assert!(matches!(
            forward(&s, &p, &[1.0, 2.0]),
            Err(NnError::InputDimension { .. })
        ));
        assert!(matches!(
            forward(&s, &p, &[1.0, f64::NAN, 0.0, 0.0]),
            Err(NnError::NonFinite(_))
        ));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn linear_layer_weight_gradient_is_outer_product() {
        let s = spec(3, &[], 2, Activation::Relu);
        let mut rng = Pcg32::new(4, 4);
        let p = ParamVector::init(&s, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let upstream = [0.7, -0.3];
        let (grad, input_grad) = backward(&s, &p, &x, &upstream).unwrap();
        for j in 0..3 {
            for k in 0..2 {
                assert!((grad.as_slice()[j * 2 + k] - x[j] * upstream[k]).abs() < 1e-15);
            }
        }
        // Bias gradient equals upstream; input gradient is W g.
        assert!((grad.as_slice()[6] - 0.7).abs() < 1e-15);
        assert!((grad.as_slice()[7] + 0.3).abs() < 1e-15);
        for j in 0..3 {
            let expected =
                p.as_slice()[j * 2] * upstream[0] + p.as_slice()[j * 2 + 1] * upstream[1];
            assert!((input_grad[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let s = spec(4, &[6], 3, Activation::Tanh);
        let mut rng = Pcg32::new(6, 6);
        let p = ParamVector::init(&s, &mut rng);
        let (grad, input_grad) = backward(&s, &p, &[0.1, 0.2, 0.3, 0.4], &[0.0; 3]).unwrap();
        assert!(grad.as_slice().iter().all(|&g| g == 0.0));
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    /// Central finite differences over both parameters and inputs.
    pub(crate) fn finite_difference_check(s: &MlpSpec, seed: u64) -> f64 {
        let mut rng = Pcg32::new(seed, 17);
        let p = ParamVector::init(s, &mut rng);
        let x: Vec<f64> = (0..s.input_dim).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
        let upstream: Vec<f64> = (0..s.output_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let loss = |params: &ParamVector, input: &[f64]| -> f64 {
            forward(s, params, input)
                .unwrap()
                .iter()
                .zip(&upstream)
                .map(|(y, u)| y * u)
                .sum()
        };
        let (grad, input_grad) = backward(s, &p, &x, &upstream).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        };
        for i in 0..p.len() {
            let mut hi = p.clone();
            hi.as_mut_slice()[i] += h;
            let mut lo = p.clone();
            lo.as_mut_slice()[i] -= h;
            check(grad.as_slice()[i], (loss(&hi, &x) - loss(&lo, &x)) / (2.0 * h));
        }
        for i in 0..x.len() {
            let mut hi = x.clone();
            hi[i] += h;
            let mut lo = x.clone();
            lo[i] -= h;
            check(input_grad[i], (loss(&p, &hi) - loss(&p, &lo)) / (2.0 * h));
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (i, s) in [
            spec(3, &[8], 2, Activation::Tanh),
            spec(5, &[12, 6], 3, Activation::Relu),
            spec(2, &[4, 4, 4], 1, Activation::Tanh),
        ]
        .iter()
        .enumerate()
        {
            let worst = finite_difference_check(s, 100 + i as u64);
            assert!(worst < 1e-4, "config {i}: relative error {worst}");
        }
    }

    #[test]
    fn input_only_backward_matches_full_backward() {
        let s = spec(6, &[10, 8], 3, Activation::Relu);
        let mut rng = Pcg32::new(21, 5);
        let p = ParamVector::init(&s, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let upstream = [0.3, -0.8, 1.1];
        let (_, full) = backward(&s, &p, &x, &upstream).unwrap();
        let cache = forward_cached(&s, &p, &x).unwrap();
        let fast = backward_input_grad(&s, &p, &cache, &upstream).unwrap();
        assert_eq!(full, fast);
    }

    #[test]
    fn smooth_from_is_elementwise_polyak() {
        let s = spec(2, &[], 2, Activation::Relu);
        let mut rng = Pcg32::new(9, 9);
        let mut target = ParamVector::init(&s, &mut rng);
        let online = ParamVector::init(&s, &mut rng);
        let before = target.clone();
        let rho = 0.005;
        target.smooth_from(&online, rho);
        for i in 0..target.len() {
            let expected = (1.0 - rho) * before.as_slice()[i] + rho * online.as_slice()[i];
            assert!((target.as_slice()[i] - expected).abs() < 1e-15);
        }
    }
}

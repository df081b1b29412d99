use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("expected input of length {expected}, got {got}")]
    Input { expected: usize, got: usize },
    #[error("expected output gradient of length {expected}, got {got}")]
    Output { expected: usize, got: usize },
    #[error("expected {expected} parameters, got {got}")]
    Params { expected: usize, got: usize },
    #[error("a network needs at least an input and an output layer")]
    TooFewLayers,
}

/// Dense network with tanh hidden layers and an identity output layer.
///
/// Parameters are stored flat, layer by layer: the row-major `out x in`
/// weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations cached by [`Mlp::forward_trace`]; required by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input followed by each layer's post-activation output.
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self, ShapeError> {
        if sizes.len() < 2 {
            return Err(ShapeError::TooFewLayers);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights, zero biases. The output layer's weights are
    /// multiplied by `output_scale`.
    pub fn init<R: Rng>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Result<Self, ShapeError> {
        let mut net = Self::zeros(sizes)?;
        let layers = sizes.len() - 1;
        let mut off = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let scale = if l + 1 == layers { output_scale } else { 1.0 };
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.gen_range(-limit..limit) * scale;
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, ShapeError> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(ShapeError::Params {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ShapeError> {
        Ok(self.forward_trace(x)?.activations.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, ShapeError> {
        if x.len() != self.input_len() {
            return Err(ShapeError::Input {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &activations[l];
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    dot(row, input) + b[o]
                })
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
            off += n_in * n_out + n_out;
        }
        Ok(Trace { activations })
    }

    /// Reverse-mode pass. Adds `d loss / d params` into `grads` and returns
    /// `d loss / d input`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut [f64]) -> Result<Vec<f64>, ShapeError> {
        if grad_out.len() != self.output_len() {
            return Err(ShapeError::Output {
                expected: self.output_len(),
                got: grad_out.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(ShapeError::Params {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                // tanh' = 1 - y^2
                for (d, y) in delta.iter_mut().zip(&trace.activations[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let off = offsets[l];
            let input = &trace.activations[l];
            let w = &self.params[off..off + n_in * n_out];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = o * n_in..(o + 1) * n_in;
                for (((g, n), wv), x) in gw[row.clone()].iter_mut().zip(next.iter_mut()).zip(&w[row]).zip(input) {
                    *g += d * x;
                    *n += d * wv;
                }
            }
            delta = next;
        }
        Ok(delta)
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

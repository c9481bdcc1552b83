//! Fully connected networks with snake activations and residual blocks.
//!
//! Layout: an input layer `snake(h W + b)`, then `blocks` residual blocks
//! `h + snake(h W + b)`, then a linear head. Parameters are kept as a flat
//! list of weight and bias tensors in that order.

use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{Jet2, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub inputs: usize,
    pub width: usize,
    pub blocks: usize,
    pub outputs: usize,
}

impl NetworkShape {
    /// `(rows, cols)` of every tensor, weights before biases.
    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        let mut s = vec![(self.inputs, self.width), (1, self.width)];
        for _ in 0..self.blocks {
            s.push((self.width, self.width));
            s.push((1, self.width));
        }
        s.push((self.width, self.outputs));
        s.push((1, self.outputs));
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_shapes().iter().map(|(r, c)| r * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub shape: NetworkShape,
    pub snake_a: f64,
    pub tensors: Vec<Array2<f64>>,
}

impl Network {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot(shape: NetworkShape, snake_a: f64, rng: &mut impl Rng) -> Self {
        let tensors = shape
            .tensor_shapes()
            .into_iter()
            .map(|(r, c)| {
                if r == 1 {
                    Array2::zeros((r, c))
                } else {
                    let lim = (6.0 / (r + c) as f64).sqrt();
                    Array2::from_shape_simple_fn((r, c), || rng.gen_range(-lim..lim))
                }
            })
            .collect();
        Self {
            shape,
            snake_a,
            tensors,
        }
    }

    pub fn zeros(shape: NetworkShape, snake_a: f64) -> Self {
        let tensors = shape
            .tensor_shapes()
            .into_iter()
            .map(Array2::zeros)
            .collect();
        Self {
            shape,
            snake_a,
            tensors,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Array2::len).sum()
    }

    pub fn leaves<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.tensors.iter().map(|w| tape.leaf(w.clone())).collect()
    }

    pub fn constants<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.tensors.iter().map(|w| tape.constant(w.clone())).collect()
    }

    /// Propagates an input jet (rows = points) through the network bound to `params`.
    pub fn forward<'t>(&self, params: &[Var<'t>], input: &Jet2<Var<'t>>) -> Jet2<Var<'t>> {
        assert_eq!(params.len(), self.tensors.len());
        let a = self.snake_a;
        let dense = |h: &Jet2<Var<'t>>, w: Var<'t>, b: Var<'t>| Jet2 {
            v: h.v.matmul(w) + b,
            t: h.t.map(|s| s.matmul(w)),
            tt: h.tt.map(|s| s.matmul(w)),
            x: h.x.map(|s| s.matmul(w)),
        };
        let act = |z: &Jet2<Var<'t>>| z.chain(z.v.snake(a), z.v.snake_d1(a), || z.v.snake_d2(a));
        let mut h = act(&dense(input, params[0], params[1]));
        for k in 0..self.shape.blocks {
            let z = dense(&h, params[2 + 2 * k], params[3 + 2 * k]);
            h = h.clone() + act(&z);
        }
        let n = params.len();
        dense(&h, params[n - 2], params[n - 1])
    }

    /// Plain forward pass for a batch of inputs.
    pub fn eval(&self, input: &Array2<f64>) -> Array2<f64> {
        let tape = Tape::new();
        let p = self.constants(&tape);
        let x = Jet2::constant(tape.constant(input.clone()));
        self.forward(&p, &x).v.value()
    }
}

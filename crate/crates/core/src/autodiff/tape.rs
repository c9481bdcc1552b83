use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use ndarray::{Array2, Axis};

use super::{sigmoid, softplus, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unary {
    AddConst(f64),
    MulConst(f64),
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Recip,
    Square,
    Softplus,
    Sigmoid,
    /// `x + sin²(a x) / a`
    Snake(f64),
    /// `1 + sin(2 a x)`, the first derivative of `Snake(a)`.
    SnakeD1(f64),
    /// `2 a cos(2 a x)`, the second derivative of `Snake(a)`.
    SnakeD2(f64),
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::AddConst(c) => x + c,
            Unary::MulConst(c) => x * c,
            Unary::Neg => -x,
            Unary::Sin => x.sin(),
            Unary::Cos => x.cos(),
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Sqrt => x.sqrt(),
            Unary::Recip => x.recip(),
            Unary::Square => x * x,
            Unary::Softplus => softplus(x),
            Unary::Sigmoid => sigmoid(x),
            Unary::Snake(a) => {
                let s = (a * x).sin();
                x + s * s / a
            }
            Unary::SnakeD1(a) => 1.0 + (2.0 * a * x).sin(),
            Unary::SnakeD2(a) => 2.0 * a * (2.0 * a * x).cos(),
        }
    }

    /// Derivative at input `x` with output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::AddConst(_) => 1.0,
            Unary::MulConst(c) => c,
            Unary::Neg => -1.0,
            Unary::Sin => x.cos(),
            Unary::Cos => -x.sin(),
            Unary::Exp => y,
            Unary::Ln => x.recip(),
            Unary::Sqrt => 0.5 / y,
            Unary::Recip => -y * y,
            Unary::Square => 2.0 * x,
            Unary::Softplus => sigmoid(x),
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Snake(a) => 1.0 + (2.0 * a * x).sin(),
            Unary::SnakeD1(a) => 2.0 * a * (2.0 * a * x).cos(),
            Unary::SnakeD2(a) => -4.0 * a * a * (2.0 * a * x).sin(),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Unary(usize, Unary),
    MatMul(usize, usize),
    Col(usize, usize),
    Sum(usize),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Records batched tensor operations for reverse-mode differentiation.
///
/// Every value is a 2-D array (rows = collocation points, columns =
/// features). Binary elementwise operations broadcast `1×1`, `1×n` and
/// `m×1` operands the usual way, and their adjoints are summed back down
/// to the operand shape.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({} nodes)", self.len())
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.idx, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input (network weight, trainable scalar).
    pub fn leaf(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    pub fn scalar_leaf(&self, value: f64) -> Var<'_> {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    pub fn constant(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Const, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), value))
    }

    /// Column vector constant from a slice.
    pub fn column(&self, values: &[f64]) -> Var<'_> {
        self.constant(Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap())
    }

    fn push(&self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes.borrow()[i].needs_grad
    }

    fn binary(&self, a: usize, b: usize, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'_> {
        let value = {
            let nodes = self.nodes.borrow();
            let (va, vb) = (&nodes[a].value, &nodes[b].value);
            let shape = broadcast_shape(va.dim(), vb.dim());
            let va = va.broadcast(shape).expect("broadcastable operands");
            let vb = vb.broadcast(shape).expect("broadcastable operands");
            ndarray::Zip::from(&va).and(&vb).map_collect(|&x, &y| f(x, y))
        };
        let needs = self.needs(a) || self.needs(b);
        self.push(value, op, needs)
    }

    fn unary(&self, a: usize, u: Unary) -> Var<'_> {
        let value = self.nodes.borrow()[a].value.mapv(|x| u.apply(x));
        let needs = self.needs(a);
        self.push(value, Op::Unary(a, u), needs)
    }

    /// Reverse sweep from the scalar `root`.
    pub fn gradients(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[root.idx].value.dim(), (1, 1), "root must be scalar");
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; nodes.len()];
        adj[root.idx] = Some(Array2::ones((1, 1)));
        let accumulate = |adj: &mut Vec<Option<Array2<f64>>>, i: usize, g: Array2<f64>| {
            if !nodes[i].needs_grad {
                return;
            }
            match &mut adj[i] {
                Some(acc) => *acc += &g,
                slot @ None => *slot = Some(g),
            }
        };
        for i in (0..=root.idx).rev() {
            let node = &nodes[i];
            if matches!(node.op, Op::Leaf | Op::Const) {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            match node.op {
                Op::Leaf | Op::Const => unreachable!(),
                Op::Add(a, b) => {
                    accumulate(&mut adj, a, reduce_to(&g, nodes[a].value.dim()));
                    accumulate(&mut adj, b, reduce_to(&g, nodes[b].value.dim()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, a, reduce_to(&g, nodes[a].value.dim()));
                    accumulate(&mut adj, b, -reduce_to(&g, nodes[b].value.dim()));
                }
                Op::Mul(a, b) => {
                    if nodes[a].needs_grad {
                        let ga = &g * &nodes[b].value;
                        accumulate(&mut adj, a, reduce_to(&ga, nodes[a].value.dim()));
                    }
                    if nodes[b].needs_grad {
                        let gb = &g * &nodes[a].value;
                        accumulate(&mut adj, b, reduce_to(&gb, nodes[b].value.dim()));
                    }
                }
                Op::Div(a, b) => {
                    if nodes[a].needs_grad {
                        let ga = &g / &nodes[b].value;
                        accumulate(&mut adj, a, reduce_to(&ga, nodes[a].value.dim()));
                    }
                    if nodes[b].needs_grad {
                        let gb = -(&g * &node.value) / &nodes[b].value;
                        accumulate(&mut adj, b, reduce_to(&gb, nodes[b].value.dim()));
                    }
                }
                Op::Unary(a, u) => {
                    let mut ga = g;
                    ndarray::Zip::from(&mut ga)
                        .and(&nodes[a].value)
                        .and(&node.value)
                        .for_each(|g, &x, &y| *g *= u.derivative(x, y));
                    accumulate(&mut adj, a, ga);
                }
                Op::MatMul(a, b) => {
                    if nodes[a].needs_grad {
                        accumulate(&mut adj, a, g.dot(&nodes[b].value.t()));
                    }
                    if nodes[b].needs_grad {
                        accumulate(&mut adj, b, nodes[a].value.t().dot(&g));
                    }
                }
                Op::Col(a, j) => {
                    let mut ga = Array2::zeros(nodes[a].value.dim());
                    ga.column_mut(j).assign(&g.column(0));
                    accumulate(&mut adj, a, ga);
                }
                Op::Sum(a) => {
                    let ga = Array2::from_elem(nodes[a].value.dim(), g[[0, 0]]);
                    accumulate(&mut adj, a, ga);
                }
            }
        }
        let mut out = Gradients { adj };
        for (i, node) in nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) {
                if let Some(g) = &out.adj[i] {
                    if g.iter().any(|v| !v.is_finite()) {
                        let node = nodes
                            .iter()
                            .position(|n| n.value.iter().any(|v| !v.is_finite()))
                            .unwrap_or(i);
                        return Err(Error::NonFinite { node });
                    }
                }
            } else {
                out.adj[i] = None;
            }
        }
        Ok(out)
    }
}

/// Adjoints of the leaves of a tape.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient with respect to a leaf; exactly zero when the leaf did not
    /// influence the root.
    pub fn wrt(&self, v: &Var<'_>) -> Array2<f64> {
        match &self.adj[v.idx] {
            Some(g) => g.clone(),
            None => Array2::zeros(v.shape()),
        }
    }
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            x
        } else if x == 1 {
            y
        } else {
            panic!("incompatible shapes {a:?} and {b:?}")
        }
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

fn reduce_to(g: &Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    if g.dim() == shape {
        return g.clone();
    }
    let mut r = g.clone();
    if shape.0 == 1 && r.nrows() != 1 {
        r = r.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && r.ncols() != 1 {
        r = r.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    r
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Array2<f64> {
        self.tape.nodes.borrow()[self.idx].value.clone()
    }

    /// Value of a `1×1` variable.
    pub fn scalar(&self) -> f64 {
        let nodes = self.tape.nodes.borrow();
        let v = &nodes[self.idx].value;
        assert_eq!(v.dim(), (1, 1), "not a scalar");
        v[[0, 0]]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.idx].value.dim()
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.idx].value.dot(&nodes[rhs.idx].value)
        };
        let needs = self.tape.needs(self.idx) || self.tape.needs(rhs.idx);
        self.tape.push(value, Op::MatMul(self.idx, rhs.idx), needs)
    }

    /// Column `j` as an `m×1` variable.
    pub fn col(self, j: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.idx].value.column(j).to_owned().insert_axis(Axis(1))
        };
        let needs = self.tape.needs(self.idx);
        self.tape.push(value, Op::Col(self.idx, j), needs)
    }

    pub fn sum(self) -> Var<'t> {
        let value = Array2::from_elem((1, 1), self.tape.nodes.borrow()[self.idx].value.sum());
        let needs = self.tape.needs(self.idx);
        self.tape.push(value, Op::Sum(self.idx), needs)
    }

    pub fn mean(self) -> Var<'t> {
        let (r, c) = self.shape();
        self.sum() * (1.0 / (r * c) as f64)
    }

    pub fn snake(self, a: f64) -> Var<'t> {
        self.tape.unary(self.idx, Unary::Snake(a))
    }

    pub fn snake_d1(self, a: f64) -> Var<'t> {
        self.tape.unary(self.idx, Unary::SnakeD1(a))
    }

    pub fn snake_d2(self, a: f64) -> Var<'t> {
        self.tape.unary(self.idx, Unary::SnakeD2(a))
    }

    /// Gradients of this scalar with respect to every leaf.
    pub fn backward(self) -> Result<Gradients> {
        self.tape.gradients(self)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.tape.binary(self.idx, rhs.idx, Op::Add(self.idx, rhs.idx), |a, b| a + b)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.tape.binary(self.idx, rhs.idx, Op::Sub(self.idx, rhs.idx), |a, b| a - b)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.tape.binary(self.idx, rhs.idx, Op::Mul(self.idx, rhs.idx), |a, b| a * b)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        self.tape.binary(self.idx, rhs.idx, Op::Div(self.idx, rhs.idx), |a, b| a / b)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.tape.unary(self.idx, Unary::Neg)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.tape.unary(self.idx, Unary::AddConst(rhs))
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.tape.unary(self.idx, Unary::AddConst(-rhs))
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.tape.unary(self.idx, Unary::MulConst(rhs))
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        self.tape.unary(self.idx, Unary::MulConst(1.0 / rhs))
    }
}

impl Real for Var<'_> {
    fn sqrt(&self) -> Self {
        self.tape.unary(self.idx, Unary::Sqrt)
    }
    fn exp(&self) -> Self {
        self.tape.unary(self.idx, Unary::Exp)
    }
    fn ln(&self) -> Self {
        self.tape.unary(self.idx, Unary::Ln)
    }
    fn sin(&self) -> Self {
        self.tape.unary(self.idx, Unary::Sin)
    }
    fn cos(&self) -> Self {
        self.tape.unary(self.idx, Unary::Cos)
    }
    fn recip(&self) -> Self {
        self.tape.unary(self.idx, Unary::Recip)
    }
    fn softplus(&self) -> Self {
        self.tape.unary(self.idx, Unary::Softplus)
    }
    fn sigmoid(&self) -> Self {
        self.tape.unary(self.idx, Unary::Sigmoid)
    }
    fn square(&self) -> Self {
        self.tape.unary(self.idx, Unary::Square)
    }
}

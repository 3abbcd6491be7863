use crate::error::{Error, Result};
use crate::numerics::kernels::{self, Padding};
use crate::numerics::tensor::Tensor;
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Conv2d { input: Var, kernel: Var, bias: Var, padding: Padding },
    Dense { x: Var, w: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, T),
    Reshape(Var),
    MeanAxis1(Var),
    SelectAxis1(Var, usize),
    Gather { src: Var, indices: Vec<usize>, k: usize },
    Concat(Var, Var),
    Sum(Var),
    SumSquares(Var),
    CrossEntropy { logits: Var, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Record of executed operations for reverse-mode differentiation.
///
/// Values are appended in execution order; [`Tape::backward`] walks them in
/// reverse, visiting each node once.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients indexed by [`Var`], produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Leaf that does not receive a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var], name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::matmul(self.value(a), self.value(b))?;
        self.push(y, Op::MatMul(a, b), &[a, b], "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let y = kernels::transpose_last2(self.value(a))?;
        self.push(y, Op::Transpose(a), &[a], "transpose")
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, padding: Padding) -> Result<Var> {
        let y = kernels::conv2d(self.value(input), self.value(kernel), self.value(bias), padding)?;
        self.push(
            y,
            Op::Conv2d {
                input,
                kernel,
                bias,
                padding,
            },
            &[input, kernel, bias],
            "conv2d",
        )
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = kernels::dense(self.value(x), self.value(w), self.value(b))?;
        self.push(y, Op::Dense { x, w, b }, &[x, w, b], "dense")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let y = kernels::relu(self.value(a));
        self.push(y, Op::Relu(a), &[a], "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let y = kernels::sigmoid(self.value(a));
        self.push(y, Op::Sigmoid(a), &[a], "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let y = kernels::tanh(self.value(a));
        self.push(y, Op::Tanh(a), &[a], "tanh")
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let y = kernels::softmax_lastdim(self.value(a))?;
        self.push(y, Op::Softmax(a), &[a], "softmax")
    }

    fn zip_with(&self, a: Var, b: Var, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::Shape {
                op,
                lhs: x.shape().to_vec(),
                rhs: y.shape().to_vec(),
            });
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.zip_with(a, b, "add", |p, q| p + q)?;
        self.push(y, Op::Add(a, b), &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.zip_with(a, b, "sub", |p, q| p - q)?;
        self.push(y, Op::Sub(a, b), &[a, b], "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.zip_with(a, b, "mul", |p, q| p * q)?;
        self.push(y, Op::Mul(a, b), &[a, b], "mul")
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let y = self.value(a).map(|v| T::one() - v);
        self.push(y, Op::OneMinus(a), &[a], "one_minus")
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Result<Var> {
        let y = self.value(a).map(|v| v * factor);
        self.push(y, Op::Scale(a, factor), &[a], "scale")
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(a).clone().reshape(shape)?;
        self.push(y, Op::Reshape(a), &[a], "reshape")
    }

    pub fn mean_axis1(&mut self, a: Var) -> Result<Var> {
        let y = kernels::mean_axis1(self.value(a))?;
        self.push(y, Op::MeanAxis1(a), &[a], "mean_axis1")
    }

    pub fn select_axis1(&mut self, a: Var, index: usize) -> Result<Var> {
        let y = kernels::select_axis1(self.value(a), index)?;
        self.push(y, Op::SelectAxis1(a, index), &[a], "select_axis1")
    }

    /// Gathers rows along axis 1; gradients flow to the gathered values
    /// only, never to whatever produced the indices.
    pub fn gather(&mut self, src: Var, indices: Vec<usize>, k: usize) -> Result<Var> {
        let y = kernels::gather_axis1(self.value(src), &indices, k)?;
        self.push(y, Op::Gather { src, indices, k }, &[src], "gather")
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::concat_axis1(self.value(a), self.value(b))?;
        self.push(y, Op::Concat(a, b), &[a, b], "concat")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let y = Tensor::scalar(self.value(a).sum());
        self.push(y, Op::Sum(a), &[a], "sum")
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let y = Tensor::scalar(self.value(a).data().iter().map(|&v| v * v).sum());
        self.push(y, Op::SumSquares(a), &[a], "sum_squares")
    }

    /// Mean softmax cross-entropy of `batch × classes` logits.
    pub fn cross_entropy(&mut self, logits: Var, labels: Vec<usize>) -> Result<Var> {
        let y = Tensor::scalar(kernels::cross_entropy(self.value(logits), &labels)?);
        self.push(y, Op::CrossEntropy { logits, labels }, &[logits], "cross_entropy")
    }

    /// Reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::Dimension(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(root.value.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                for (var, contribution) in self.local_grads(node, &g) {
                    if !self.nodes[var.0].requires_grad {
                        continue;
                    }
                    match &mut grads[var.0] {
                        Some(acc) => acc.add_assign(&contribution),
                        slot @ None => *slot = Some(contribution),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node<T>, g: &Tensor<T>) -> Vec<(Var, Tensor<T>)> {
        let val = |v: Var| self.value(v);
        let y = &node.value;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (da, db) = kernels::matmul_backward(val(*a), val(*b), g);
                vec![(*a, da), (*b, db)]
            }
            Op::Transpose(a) => {
                vec![(*a, kernels::transpose_last2(g).expect("rank checked in forward"))]
            }
            Op::Conv2d {
                input,
                kernel,
                bias,
                padding,
            } => {
                let (dx, dk, db) = kernels::conv2d_backward(val(*input), val(*kernel), *padding, g);
                vec![(*input, dx), (*kernel, dk), (*bias, db)]
            }
            Op::Dense { x, w, b } => {
                let (dx, dw, db) = kernels::dense_backward(val(*x), val(*w), g);
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::Relu(a) => {
                let x = val(*a);
                let d = zip(x, g, |xv, gv| if xv > T::zero() { gv } else { T::zero() });
                vec![(*a, d)]
            }
            Op::Sigmoid(a) => vec![(*a, zip(y, g, |s, gv| gv * s * (T::one() - s)))],
            Op::Tanh(a) => vec![(*a, zip(y, g, |t, gv| gv * (T::one() - t * t)))],
            Op::Softmax(a) => vec![(*a, kernels::softmax_backward(y, g))],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|v| -v))],
            Op::Mul(a, b) => {
                let da = zip(val(*b), g, |p, q| p * q);
                let db = zip(val(*a), g, |p, q| p * q);
                vec![(*a, da), (*b, db)]
            }
            Op::OneMinus(a) => vec![(*a, g.map(|v| -v))],
            Op::Scale(a, f) => {
                let f = *f;
                vec![(*a, g.map(|v| v * f))]
            }
            Op::Reshape(a) => {
                let shape = val(*a).shape().to_vec();
                vec![(*a, g.clone().reshape(&shape).expect("same element count"))]
            }
            Op::MeanAxis1(a) => {
                let x = val(*a);
                let (n, t, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let inv = T::one() / T::of(t as f64);
                let mut d = Tensor::zeros(x.shape());
                for b in 0..n {
                    let grow = &g.data()[b * c..(b + 1) * c];
                    for row in d.data_mut()[b * t * c..(b + 1) * t * c].chunks_mut(c) {
                        for (dv, &gv) in row.iter_mut().zip(grow) {
                            *dv = gv * inv;
                        }
                    }
                }
                vec![(*a, d)]
            }
            Op::SelectAxis1(a, index) => {
                let x = val(*a);
                let (n, t, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let mut d = Tensor::zeros(x.shape());
                for b in 0..n {
                    let o = (b * t + index) * c;
                    d.data_mut()[o..o + c].copy_from_slice(&g.data()[b * c..(b + 1) * c]);
                }
                vec![(*a, d)]
            }
            Op::Gather { src, indices, k } => {
                let x = val(*src);
                let (t, c) = (x.shape()[1], x.shape()[2]);
                let mut d = Tensor::zeros(x.shape());
                for (slot, &ix) in indices.iter().enumerate() {
                    let b = slot / k;
                    let o = (b * t + ix) * c;
                    for (dv, &gv) in d.data_mut()[o..o + c].iter_mut().zip(&g.data()[slot * c..(slot + 1) * c]) {
                        *dv += gv;
                    }
                }
                vec![(*src, d)]
            }
            Op::Concat(a, b) => {
                let (xa, xb) = (val(*a), val(*b));
                let (n, ta, c) = (xa.shape()[0], xa.shape()[1], xa.shape()[2]);
                let tb = xb.shape()[1];
                let mut da = Vec::with_capacity(xa.len());
                let mut db = Vec::with_capacity(xb.len());
                for i in 0..n {
                    let o = i * (ta + tb) * c;
                    da.extend_from_slice(&g.data()[o..o + ta * c]);
                    db.extend_from_slice(&g.data()[o + ta * c..o + (ta + tb) * c]);
                }
                vec![
                    (*a, Tensor::new(xa.shape().to_vec(), da).expect("sizes match")),
                    (*b, Tensor::new(xb.shape().to_vec(), db).expect("sizes match")),
                ]
            }
            Op::Sum(a) => {
                let gv = g.item();
                vec![(*a, Tensor::full(val(*a).shape(), gv))]
            }
            Op::SumSquares(a) => {
                let two_g = T::of(2.0) * g.item();
                vec![(*a, val(*a).map(|v| two_g * v))]
            }
            Op::CrossEntropy { logits, labels } => {
                vec![(*logits, kernels::cross_entropy_backward(val(*logits), labels, g.item()))]
            }
        }
    }
}

fn zip<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&p, &q)| f(p, q)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes equal by construction")
}

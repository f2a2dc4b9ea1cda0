use super::tensor::{axis_split, Tensor};
use super::DiffError;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise operations. Binary variants need operands of identical shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Div,
    /// `atan2(args[0], args[1])`, i.e. `atan2(y, x)`.
    Atan2,
    Neg,
    Square,
    Sqrt,
    Scale(f64),
    Relu,
    Exp,
    Ln,
    Cos,
    Sin,
}

impl Elementwise {
    fn arity(self) -> usize {
        match self {
            Elementwise::Add
            | Elementwise::Sub
            | Elementwise::Mul
            | Elementwise::Div
            | Elementwise::Atan2 => 2,
            _ => 1,
        }
    }
}

/// Reductions along one axis (or over all elements).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reduce {
    Sum,
    Mean,
    /// Hard minimum; the gradient goes to the first minimizing element.
    Min,
    /// Hard maximum; the gradient goes to the first maximizing element.
    Max,
    /// `tau * ln(sum(exp(x / tau)))`, a smooth upper bound of `Max`.
    LogSumExp(f64),
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Unary(Elementwise, NodeId),
    Binary(Elementwise, NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Reduce {
        x: NodeId,
        axis: Option<usize>,
        kind: ReduceBackward,
    },
    Concat {
        parts: Vec<NodeId>,
        axis: usize,
    },
    Slice {
        x: NodeId,
        axis: usize,
        start: usize,
    },
    Reshape(NodeId),
}

/// Data kept from the forward pass of a reduction for its backward pass.
#[derive(Debug)]
enum ReduceBackward {
    Sum,
    Mean,
    /// Flat index into the input for every output element.
    Select(Vec<usize>),
    /// Softmax weights, one per input element.
    Weights(Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation graph. Nodes are appended in evaluation order,
/// so the node list is always topologically sorted.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

type Res = Result<NodeId, DiffError>;

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a differentiable input.
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, true)
    }

    /// Adds an input that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Gradient from the last [`backward`](Self::backward) call. Nodes that the
    /// root does not depend on report a zero gradient.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad()
    }

    pub fn item(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.values()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].requires_grad)
    }

    fn check_finite(&self, t: &Tensor, what: &str, inputs: &[NodeId]) -> Result<(), DiffError> {
        if !t.is_finite() && inputs.iter().all(|i| self.nodes[i.0].value.is_finite()) {
            return Err(DiffError::NonFinite(what.to_string()));
        }
        Ok(())
    }

    /// Matrix product of a `[m, k]` and a `[k, n]` tensor.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Res {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(DiffError::Dimension(format!(
                "matmul {:?} x {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = matmul_raw(ta.values(), tb.values(), m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        self.check_finite(&t, "matmul", &[a, b])?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(t, Op::MatMul(a, b), rg))
    }

    /// Applies an elementwise operation to one or two operands.
    pub fn elementwise(&mut self, op: Elementwise, args: &[NodeId]) -> Res {
        if args.len() != op.arity() {
            return Err(DiffError::Usage(format!(
                "{op:?} takes {} argument(s), got {}",
                op.arity(),
                args.len()
            )));
        }
        if op.arity() == 1 {
            self.unary(op, args[0])
        } else {
            self.binary(op, args[0], args[1])
        }
    }

    fn unary(&mut self, op: Elementwise, x: NodeId) -> Res {
        let tx = self.value(x);
        let f: fn(f64) -> f64 = match op {
            Elementwise::Neg => |v| -v,
            Elementwise::Square => |v| v * v,
            Elementwise::Sqrt => {
                if tx.values().iter().any(|&v| v < 0.0) {
                    return Err(DiffError::Domain("sqrt of a negative value".into()));
                }
                f64::sqrt
            }
            Elementwise::Relu => |v| if v > 0.0 { v } else { 0.0 },
            Elementwise::Exp => f64::exp,
            Elementwise::Ln => {
                if tx.values().iter().any(|&v| v <= 0.0) {
                    return Err(DiffError::Domain("ln of a non-positive value".into()));
                }
                f64::ln
            }
            Elementwise::Cos => f64::cos,
            Elementwise::Sin => f64::sin,
            Elementwise::Scale(c) => {
                let vals = tx.values().iter().map(|v| v * c).collect();
                let t = Tensor::new(tx.shape().to_vec(), vals)?;
                self.check_finite(&t, "scale", &[x])?;
                let rg = self.needs(&[x]);
                return Ok(self.push(t, Op::Unary(op, x), rg));
            }
            _ => unreachable!("binary op routed to unary"),
        };
        let vals = tx.values().iter().map(|&v| f(v)).collect();
        let t = Tensor::new(tx.shape().to_vec(), vals)?;
        self.check_finite(&t, "elementwise", &[x])?;
        let rg = self.needs(&[x]);
        Ok(self.push(t, Op::Unary(op, x), rg))
    }

    fn binary(&mut self, op: Elementwise, a: NodeId, b: NodeId) -> Res {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(DiffError::Dimension(format!(
                "{op:?} of {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let f: fn(f64, f64) -> f64 = match op {
            Elementwise::Add => |x, y| x + y,
            Elementwise::Sub => |x, y| x - y,
            Elementwise::Mul => |x, y| x * y,
            Elementwise::Div => {
                if tb.values().iter().any(|&v| v == 0.0) {
                    return Err(DiffError::Domain("division by zero".into()));
                }
                |x, y| x / y
            }
            Elementwise::Atan2 => f64::atan2,
            _ => unreachable!("unary op routed to binary"),
        };
        let vals = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), vals)?;
        self.check_finite(&t, "elementwise", &[a, b])?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(t, Op::Binary(op, a, b), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Res {
        self.binary(Elementwise::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Res {
        self.binary(Elementwise::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Res {
        self.binary(Elementwise::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Res {
        self.binary(Elementwise::Div, a, b)
    }

    pub fn atan2(&mut self, y: NodeId, x: NodeId) -> Res {
        self.binary(Elementwise::Atan2, y, x)
    }

    pub fn neg(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Neg, x)
    }

    pub fn square(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Square, x)
    }

    pub fn sqrt(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Sqrt, x)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Res {
        self.unary(Elementwise::Scale(c), x)
    }

    pub fn relu(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Relu, x)
    }

    pub fn exp(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Exp, x)
    }

    pub fn ln(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Ln, x)
    }

    pub fn cos(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Cos, x)
    }

    pub fn sin(&mut self, x: NodeId) -> Res {
        self.unary(Elementwise::Sin, x)
    }

    /// `x + c` for a constant `c`.
    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Res {
        let shape = self.shape(x).to_vec();
        let k = self.constant(Tensor::full(&shape, c));
        self.add(x, k)
    }

    /// Adds a bias of shape `[n]` or `[1, n]` to every row of a `[m, n]` tensor.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Res {
        let (tx, tb) = (self.value(x), self.value(bias));
        let n = *tx.shape().last().unwrap_or(&0);
        if tx.rank() != 2 || tb.len() != n {
            return Err(DiffError::Dimension(format!(
                "bias {:?} does not broadcast over {:?}",
                tb.shape(),
                tx.shape()
            )));
        }
        let bv = tb.values();
        let vals = tx
            .values()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(a, b)| a + b))
            .collect();
        let t = Tensor::new(tx.shape().to_vec(), vals)?;
        self.check_finite(&t, "add_bias", &[x, bias])?;
        let rg = self.needs(&[x, bias]);
        Ok(self.push(t, Op::AddBias(x, bias), rg))
    }

    /// Reduces along `axis`, removing it from the shape, or over every element
    /// when `axis` is `None` (yielding a scalar).
    pub fn reduce(&mut self, op: Reduce, x: NodeId, axis: Option<usize>) -> Res {
        let tx = self.value(x);
        let (shape, outer, len, inner) = match axis {
            None => (Vec::new(), 1, tx.len(), 1),
            Some(ax) => {
                if ax >= tx.rank() {
                    return Err(DiffError::Dimension(format!(
                        "axis {ax} out of range for {:?}",
                        tx.shape()
                    )));
                }
                let (o, l, i) = axis_split(tx.shape(), ax);
                let mut s = tx.shape().to_vec();
                s.remove(ax);
                (s, o, l, i)
            }
        };
        if len == 0 {
            return Err(DiffError::Domain("empty reduction".into()));
        }
        if let Reduce::LogSumExp(tau) = op {
            if !(tau > 0.0) {
                return Err(DiffError::Domain(format!("logsumexp temperature {tau}")));
            }
        }
        let v = tx.values();
        let mut out = vec![0.0; outer * inner];
        let mut select = Vec::new();
        let mut weights = Vec::new();
        if matches!(op, Reduce::LogSumExp(_)) {
            weights = vec![0.0; v.len()];
        }
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| o * len * inner + k * inner + i;
                let r = match op {
                    Reduce::Sum => (0..len).map(|k| v[at(k)]).sum(),
                    Reduce::Mean => (0..len).map(|k| v[at(k)]).sum::<f64>() / len as f64,
                    Reduce::Min | Reduce::Max => {
                        let mut best = at(0);
                        for k in 1..len {
                            let better = match op {
                                Reduce::Min => v[at(k)] < v[best],
                                _ => v[at(k)] > v[best],
                            };
                            if better {
                                best = at(k);
                            }
                        }
                        select.push(best);
                        v[best]
                    }
                    Reduce::LogSumExp(tau) => {
                        let m = (0..len).map(|k| v[at(k)]).fold(f64::NEG_INFINITY, f64::max);
                        let mut s = 0.0;
                        for k in 0..len {
                            let e = ((v[at(k)] - m) / tau).exp();
                            weights[at(k)] = e;
                            s += e;
                        }
                        for k in 0..len {
                            weights[at(k)] /= s;
                        }
                        m + tau * s.ln()
                    }
                };
                out[o * inner + i] = r;
            }
        }
        let t = Tensor::new(shape, out)?;
        self.check_finite(&t, "reduce", &[x])?;
        let kind = match op {
            Reduce::Sum => ReduceBackward::Sum,
            Reduce::Mean => ReduceBackward::Mean,
            Reduce::Min | Reduce::Max => ReduceBackward::Select(select),
            Reduce::LogSumExp(_) => ReduceBackward::Weights(weights),
        };
        let rg = self.needs(&[x]);
        Ok(self.push(t, Op::Reduce { x, axis, kind }, rg))
    }

    pub fn sum(&mut self, x: NodeId) -> Res {
        self.reduce(Reduce::Sum, x, None)
    }

    pub fn mean(&mut self, x: NodeId) -> Res {
        self.reduce(Reduce::Mean, x, None)
    }

    /// Concatenates along `axis`. Parts with zero extent along `axis` are allowed.
    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Res {
        let first = parts
            .iter()
            .map(|p| self.value(*p))
            .find(|t| !t.is_empty())
            .or_else(|| parts.first().map(|p| self.value(*p)))
            .ok_or_else(|| DiffError::Usage("concat of zero parts".into()))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(DiffError::Dimension(format!("concat axis {axis} for rank {rank}")));
        }
        let template = first.shape().to_vec();
        let mut total = 0;
        for p in parts {
            let s = self.shape(*p);
            let empty_part = s.len() == rank && s[axis] == 0;
            let compatible = s.len() == rank
                && s.iter()
                    .zip(&template)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible && !empty_part {
                return Err(DiffError::Dimension(format!(
                    "concat {:?} with {:?} along {axis}",
                    s, template
                )));
            }
            total += s[axis];
        }
        let mut shape = template.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_split(&shape, axis);
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let chunk = t.shape()[axis] * inner;
                if chunk > 0 {
                    out.extend_from_slice(&t.values()[o * chunk..(o + 1) * chunk]);
                }
            }
        }
        let t = Tensor::new(shape, out)?;
        let rg = self.needs(parts);
        Ok(self.push(
            t,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Sub-range `[start, end)` along `axis`.
    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, end: usize) -> Res {
        let tx = self.value(x);
        if axis >= tx.rank() || start > end || end > tx.shape()[axis] {
            return Err(DiffError::Dimension(format!(
                "slice {start}..{end} along {axis} of {:?}",
                tx.shape()
            )));
        }
        let (outer, len, inner) = axis_split(tx.shape(), axis);
        let mut shape = tx.shape().to_vec();
        shape[axis] = end - start;
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * len * inner;
            out.extend_from_slice(&tx.values()[base + start * inner..base + end * inner]);
        }
        let t = Tensor::new(shape, out)?;
        let rg = self.needs(&[x]);
        Ok(self.push(t, Op::Slice { x, axis, start }, rg))
    }

    /// Splits along `axis` into consecutive pieces of the given sizes.
    pub fn split(&mut self, x: NodeId, axis: usize, sizes: &[usize]) -> Result<Vec<NodeId>, DiffError> {
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &s in sizes {
            out.push(self.slice(x, axis, start, start + s)?);
            start += s;
        }
        if self.value(x).shape().get(axis) != Some(&start) {
            return Err(DiffError::Dimension("split sizes do not cover the axis".into()));
        }
        Ok(out)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Res {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.needs(&[x]);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    /// Populates the gradient of every node with respect to the scalar `root`.
    /// Earlier gradients are discarded first.
    pub fn backward(&mut self, root: NodeId) -> Result<(), DiffError> {
        if root.0 >= self.nodes.len() {
            return Err(DiffError::Usage("root is not a node of this graph".into()));
        }
        if self.nodes[root.0].value.len() != 1 {
            return Err(DiffError::Usage(format!(
                "backward needs a scalar root, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if self.nodes[idx].requires_grad {
                self.propagate(idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            let n = node.value.len();
            node.value.set_grad(Some(g.unwrap_or_else(|| vec![0.0; n])));
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.value.values();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.nodes[a.0].requires_grad {
                    // dA = G * B^T
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[i * n + j] * tb.values()[p * n + j];
                            }
                            da[i * k + p] = s;
                        }
                    }
                    accumulate(grads, *a, &da);
                }
                if self.nodes[b.0].requires_grad {
                    // dB = A^T * G
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = ta.values()[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += av * g[i * n + j];
                            }
                        }
                    }
                    accumulate(grads, *b, &db);
                }
            }
            Op::Unary(op, x) => {
                if !self.nodes[x.0].requires_grad {
                    return;
                }
                let xv = self.value(*x).values();
                let d: Vec<f64> = match op {
                    Elementwise::Neg => g.iter().map(|g| -g).collect(),
                    Elementwise::Square => g.iter().zip(xv).map(|(g, x)| 2.0 * x * g).collect(),
                    // Gradient at exactly 0 is taken as 0 instead of +inf.
                    Elementwise::Sqrt => g
                        .iter()
                        .zip(out)
                        .map(|(g, y)| if *y > 0.0 { g * 0.5 / y } else { 0.0 })
                        .collect(),
                    Elementwise::Scale(c) => g.iter().map(|g| g * c).collect(),
                    Elementwise::Relu => g
                        .iter()
                        .zip(xv)
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect(),
                    Elementwise::Exp => g.iter().zip(out).map(|(g, y)| g * y).collect(),
                    Elementwise::Ln => g.iter().zip(xv).map(|(g, x)| g / x).collect(),
                    Elementwise::Cos => g.iter().zip(xv).map(|(g, x)| -g * x.sin()).collect(),
                    Elementwise::Sin => g.iter().zip(xv).map(|(g, x)| g * x.cos()).collect(),
                    _ => unreachable!(),
                };
                accumulate(grads, *x, &d);
            }
            Op::Binary(op, a, b) => {
                let (av, bv) = (self.value(*a).values(), self.value(*b).values());
                let (ra, rb) = (self.nodes[a.0].requires_grad, self.nodes[b.0].requires_grad);
                let (da, db): (Vec<f64>, Vec<f64>) = match op {
                    Elementwise::Add => (g.to_vec(), g.to_vec()),
                    Elementwise::Sub => (g.to_vec(), g.iter().map(|g| -g).collect()),
                    Elementwise::Mul => (
                        g.iter().zip(bv).map(|(g, b)| g * b).collect(),
                        g.iter().zip(av).map(|(g, a)| g * a).collect(),
                    ),
                    Elementwise::Div => (
                        g.iter().zip(bv).map(|(g, b)| g / b).collect(),
                        g.iter()
                            .zip(av.iter().zip(bv))
                            .map(|(g, (a, b))| -g * a / (b * b))
                            .collect(),
                    ),
                    Elementwise::Atan2 => {
                        // d/dy atan2(y,x) = x/r^2, d/dx = -y/r^2; zero at the origin.
                        let r2: Vec<f64> = av.iter().zip(bv).map(|(y, x)| x * x + y * y).collect();
                        (
                            g.iter()
                                .zip(bv.iter().zip(&r2))
                                .map(|(g, (x, r2))| if *r2 > 0.0 { g * x / r2 } else { 0.0 })
                                .collect(),
                            g.iter()
                                .zip(av.iter().zip(&r2))
                                .map(|(g, (y, r2))| if *r2 > 0.0 { -g * y / r2 } else { 0.0 })
                                .collect(),
                        )
                    }
                    _ => unreachable!(),
                };
                if ra {
                    accumulate(grads, *a, &da);
                }
                if rb {
                    accumulate(grads, *b, &db);
                }
            }
            Op::AddBias(x, bias) => {
                if self.nodes[x.0].requires_grad {
                    accumulate(grads, *x, g);
                }
                if self.nodes[bias.0].requires_grad {
                    let n = self.value(*bias).len();
                    let mut db = vec![0.0; n];
                    for row in g.chunks(n) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    accumulate(grads, *bias, &db);
                }
            }
            Op::Reduce { x, axis, kind } => {
                if !self.nodes[x.0].requires_grad {
                    return;
                }
                let tx = self.value(*x);
                let (outer, len, inner) = match axis {
                    None => (1, tx.len(), 1),
                    Some(ax) => axis_split(tx.shape(), *ax),
                };
                let mut d = vec![0.0; tx.len()];
                match kind {
                    ReduceBackward::Select(sel) => {
                        for (oi, &src) in sel.iter().enumerate() {
                            d[src] += g[oi];
                        }
                    }
                    _ => {
                        for o in 0..outer {
                            for i in 0..inner {
                                let go = g[o * inner + i];
                                for k in 0..len {
                                    let at = o * len * inner + k * inner + i;
                                    d[at] = match kind {
                                        ReduceBackward::Sum => go,
                                        ReduceBackward::Mean => go / len as f64,
                                        ReduceBackward::Weights(w) => go * w[at],
                                        ReduceBackward::Select(_) => unreachable!(),
                                    };
                                }
                            }
                        }
                    }
                }
                accumulate(grads, *x, &d);
            }
            Op::Concat { parts, axis } => {
                let shape = node.value.shape();
                let (outer, _, inner) = axis_split(shape, *axis);
                let total = shape[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let tp = self.value(*p);
                    let chunk = tp.shape()[*axis] * inner;
                    if self.nodes[p.0].requires_grad && chunk > 0 {
                        let mut d = Vec::with_capacity(tp.len());
                        for o in 0..outer {
                            let base = o * total + offset;
                            d.extend_from_slice(&g[base..base + chunk]);
                        }
                        accumulate(grads, *p, &d);
                    }
                    offset += chunk;
                }
            }
            Op::Slice { x, axis, start } => {
                if !self.nodes[x.0].requires_grad {
                    return;
                }
                let tx = self.value(*x);
                let (outer, len, inner) = axis_split(tx.shape(), *axis);
                let width = node.value.shape()[*axis] * inner;
                let mut d = vec![0.0; tx.len()];
                for o in 0..outer {
                    let base = o * len * inner + start * inner;
                    d[base..base + width].copy_from_slice(&g[o * width..(o + 1) * width]);
                }
                accumulate(grads, *x, &d);
            }
            Op::Reshape(x) => {
                if self.nodes[x.0].requires_grad {
                    accumulate(grads, *x, g);
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, d: &[f64]) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(d) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(d.to_vec()),
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

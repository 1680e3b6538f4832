use super::conv;
use super::Tensor;
use crate::error::{check_len, Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of a custom op: maps the output gradient to one
/// gradient per input, in input order.
pub type BackwardFn<'a> = Box<dyn Fn(&Tensor) -> Result<Vec<Tensor>> + Send + Sync + 'a>;

enum Op<'a> {
    Leaf,
    Add(Var, Var),
    MulConst(Var, Tensor),
    Sum(Var),
    Relu(Var),
    Conv2d { input: Var, weight: Var, bias: Var },
    Normalize { input: Var, norm: f64 },
    Custom {
        inputs: Vec<Var>,
        backward: BackwardFn<'a>,
    },
}

struct Node<'a> {
    value: Tensor,
    op: Op<'a>,
}

/// Records operations for a single forward pass.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar with respect to every node it depends on.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// The gradient for `var`, or zeros of `like`'s shape when `var` did not
    /// influence the loss.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op<'a>, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::invalid(format!(
                "add: shapes {:?} and {:?} differ",
                x.shape(),
                y.shape()
            )));
        }
        let mut out = x.clone();
        out.add_assign(y);
        self.push(out, Op::Add(a, b), "add")
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        let v = self.value(x);
        if v.shape() != c.shape() {
            return Err(Error::invalid("mul_const: shape mismatch"));
        }
        let data = v.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
        let out = Tensor::new(v.shape(), data)?;
        self.push(out, Op::MulConst(x, c), "mul_const")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let data = v.data().iter().map(|a| a.max(0.0)).collect();
        let out = Tensor::new(v.shape(), data)?;
        self.push(out, Op::Relu(x), "relu")
    }

    /// Same-padded 2-D cross-correlation. `input` is `[B, C_in, H, W]`,
    /// `weight` `[C_out, C_in, k, k]` with odd `k`, `bias` `[C_out]`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = conv::forward(self.value(input), self.value(weight), self.value(bias))?;
        self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
            },
            "conv2d",
        )
    }

    /// `x/‖x‖` over all elements.
    pub fn normalize(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let norm = v.norm();
        if !(norm >= 1e-30) {
            return Err(Error::DegenerateNormalization { norm });
        }
        let data = v.data().iter().map(|a| a / norm).collect();
        let out = Tensor::new(v.shape(), data)?;
        self.push(out, Op::Normalize { input: x, norm }, "normalize")
    }

    /// Records an op whose value was computed by the caller.
    pub fn custom(
        &mut self,
        name: &str,
        inputs: &[Var],
        value: Tensor,
        backward: BackwardFn<'a>,
    ) -> Result<Var> {
        self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                backward,
            },
            name,
        )
    }

    /// Reverse accumulation from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let contributions: Vec<(Var, Tensor)> = match &node.op {
                Op::Leaf => Vec::new(),
                Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
                Op::MulConst(x, c) => {
                    let data = g.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
                    vec![(*x, Tensor::new(c.shape(), data)?)]
                }
                Op::Sum(x) => {
                    let s = g.data()[0];
                    vec![(*x, Tensor::full(self.value(*x).shape(), s))]
                }
                Op::Relu(x) => {
                    let input = self.value(*x);
                    let data = g
                        .data()
                        .iter()
                        .zip(input.data())
                        .map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 })
                        .collect();
                    vec![(*x, Tensor::new(input.shape(), data)?)]
                }
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                } => {
                    let (gi, gw, gb) =
                        conv::backward(self.value(*input), self.value(*weight), &g)?;
                    vec![(*input, gi), (*weight, gw), (*bias, gb)]
                }
                Op::Normalize { input, norm } => {
                    let y = &node.value;
                    let proj = y.dot(&g);
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(gi, yi)| (gi - yi * proj) / norm)
                        .collect();
                    vec![(*input, Tensor::new(y.shape(), data)?)]
                }
                Op::Custom { inputs, backward } => {
                    let gs = backward(&g)?;
                    check_len("custom op gradients", inputs.len(), gs.len())?;
                    for (x, gx) in inputs.iter().zip(&gs) {
                        if gx.shape() != self.value(*x).shape() {
                            return Err(Error::invalid(
                                "custom op returned a gradient of the wrong shape",
                            ));
                        }
                    }
                    inputs.iter().copied().zip(gs).collect()
                }
            };
            for (var, contribution) in contributions {
                assert!(var.0 < id, "tape is not topologically ordered");
                if !contribution.is_finite() {
                    return Err(Error::NonFinite("backward pass".into()));
                }
                match &mut grads[var.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot => *slot = Some(contribution),
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn linear_function_gradient_is_exact() {
        let mut tape = Tape::new();
        let c = t(&[2, 3], &[1.5, -2.0, 0.25, 3.0, 0.0, -7.5]);
        let p = tape.leaf(t(&[2, 3], &[0.1, 0.2, -0.3, 4.0, 5.0, 6.0])).unwrap();
        let prod = tape.mul_const(p, c.clone()).unwrap();
        let loss = tape.sum(prod).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(p).unwrap(), &c);
    }

    #[test]
    fn relu_edges() {
        let mut tape = Tape::new();
        let neg = tape.leaf(t(&[3], &[-1.0, -2.0, -0.5])).unwrap();
        let pos = tape.leaf(t(&[3], &[1.0, 2.0, 0.5])).unwrap();
        let rn = tape.relu(neg).unwrap();
        let rp = tape.relu(pos).unwrap();
        assert!(tape.value(rn).data().iter().all(|x| *x == 0.0));
        assert_eq!(tape.value(rp), tape.value(pos));
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = sum(x + x) → gradient 2
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[3.0, -1.0])).unwrap();
        let y = tape.add(x, x).unwrap();
        let loss = tape.sum(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[3.0, -1.0])).unwrap();
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut tape = Tape::new();
        assert!(matches!(
            tape.leaf(t(&[1], &[f64::NAN])),
            Err(Error::NonFinite(_))
        ));
        let x = tape.leaf(t(&[1], &[1e308])).unwrap();
        let c = t(&[1], &[1e10]);
        assert!(tape.mul_const(x, c).is_err());
    }

    #[test]
    fn normalize_zero_is_degenerate() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[4])).unwrap();
        assert!(matches!(
            tape.normalize(x),
            Err(Error::DegenerateNormalization { .. })
        ));
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::full(&[2], 1.0)).unwrap();
        let unused = tape.leaf(Tensor::full(&[3], 1.0)).unwrap();
        let loss = tape.sum(x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(unused).is_none());
        assert_eq!(
            grads.get_or_zeros(unused, tape.value(unused)),
            Tensor::zeros(&[3])
        );
    }
}

use std::cell::{Cell, RefCell};
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{DualPoint, Real, MAX_DIRS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Unary {
        a: usize,
        da: DualPoint,
    },
    Binary {
        a: usize,
        da: DualPoint,
        b: usize,
        db: DualPoint,
    },
    /// Value is the `dir` tangent of node `a`; its own tangents are dropped.
    Project {
        a: usize,
        dir: usize,
    },
}

#[derive(Clone, Copy, Debug)]
struct Node {
    value: DualPoint,
    op: Op,
    name: &'static str,
}

/// Append-only record of primitive operations.
///
/// Node values are [`DualPoint`]s (value plus input tangents) and every local
/// partial is itself a `DualPoint`, so one reverse sweep yields gradients of
/// expressions that mix values and input derivatives.
pub struct Tape {
    dirs: usize,
    nodes: RefCell<Vec<Node>>,
    fault: Cell<Option<(usize, &'static str)>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

/// Parameter gradient in the caller's parameter ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Tape {
    pub fn new(dirs: usize) -> Self {
        assert!(dirs <= MAX_DIRS, "at most {MAX_DIRS} input directions");
        Self {
            dirs,
            nodes: RefCell::new(Vec::with_capacity(256)),
            fault: Cell::new(None),
        }
    }

    pub fn dirs(&self) -> usize {
        self.dirs
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input coordinate `dir` with a unit tangent.
    pub fn input(&self, value: f64, dir: usize) -> Var<'_> {
        self.push(DualPoint::variable(value, dir, self.dirs), Op::Leaf, "input")
    }

    /// Trainable leaf: no dependence on the inputs.
    pub fn parameter(&self, value: f64) -> Var<'_> {
        self.push(DualPoint::constant(value), Op::Leaf, "parameter")
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(DualPoint::constant(value), Op::Leaf, "constant")
    }

    fn push(&self, value: DualPoint, op: Op, name: &'static str) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, name });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    fn value_of(&self, idx: usize) -> DualPoint {
        self.nodes.borrow()[idx].value
    }

    fn flag(&self, idx: usize, what: &'static str) {
        if self.fault.get().is_none() {
            self.fault.set(Some((idx, what)));
        }
    }

    /// First evaluation fault recorded while building expressions.
    pub fn status(&self) -> Result<()> {
        match self.fault.get() {
            None => Ok(()),
            Some((node, what)) => Err(Error::Evaluation {
                node,
                message: what.to_string(),
            }),
        }
    }

    /// Reverse sweep from `output`, returning d(output value)/d(wrt).
    pub fn gradient(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Result<GradientVector> {
        self.status()?;
        let nodes = self.nodes.borrow();
        let end = output.idx + 1;
        if let Some(bad) = nodes[..end].iter().position(|n| !n.value.is_finite()) {
            return Err(Error::Evaluation {
                node: bad,
                message: format!("non-finite value in `{}`", nodes[bad].name),
            });
        }
        let mut adj_v = vec![0.0; end];
        let mut adj_t = vec![[0.0; MAX_DIRS]; end];
        adj_v[output.idx] = 1.0;
        for i in (0..end).rev() {
            let ov = adj_v[i];
            let ot = adj_t[i];
            if ov == 0.0 && ot.iter().all(|&t| t == 0.0) {
                continue;
            }
            let mut spread = |a: usize, d: &DualPoint| {
                let mut v = ov * d.value();
                for k in 0..self.dirs {
                    v += ot[k] * d.tangent(k);
                    adj_t[a][k] += ot[k] * d.value();
                }
                adj_v[a] += v;
            };
            match nodes[i].op {
                Op::Leaf => {}
                Op::Unary { a, da } => spread(a, &da),
                Op::Binary { a, da, b, db } => {
                    spread(a, &da);
                    spread(b, &db);
                }
                Op::Project { a, dir } => adj_t[a][dir] += ov,
            }
        }
        if let Some(bad) = (0..end)
            .find(|&i| !adj_v[i].is_finite() || adj_t[i].iter().any(|t| !t.is_finite()))
        {
            return Err(Error::Evaluation {
                node: bad,
                message: format!("non-finite adjoint in `{}`", nodes[bad].name),
            });
        }
        Ok(GradientVector(wrt.iter().map(|v| adj_v[v.idx]).collect()))
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx
    }

    pub fn dual(&self) -> DualPoint {
        self.tape.value_of(self.idx)
    }

    /// Derivative of this node along input `dir`, as a new node.
    pub fn tangent(&self, dir: usize) -> Var<'t> {
        assert!(dir < self.tape.dirs, "direction out of range");
        let value = DualPoint::constant(self.dual().tangent(dir));
        self.tape
            .push(value, Op::Project { a: self.idx, dir }, "tangent")
    }

    fn unary(self, value: DualPoint, da: DualPoint, name: &'static str) -> Var<'t> {
        self.tape.push(value, Op::Unary { a: self.idx, da }, name)
    }

    fn binary(self, rhs: Var<'t>, value: DualPoint, da: DualPoint, db: DualPoint, name: &'static str) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape), "operands from different tapes");
        self.tape.push(
            value,
            Op::Binary {
                a: self.idx,
                da,
                b: rhs.idx,
                db,
            },
            name,
        )
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        let one = DualPoint::constant(1.0);
        self.binary(rhs, self.dual() + rhs.dual(), one, one, "add")
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(
            rhs,
            self.dual() - rhs.dual(),
            DualPoint::constant(1.0),
            DualPoint::constant(-1.0),
            "sub",
        )
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.dual(), rhs.dual());
        self.binary(rhs, a * b, b, a, "mul")
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let (a, b) = (self.dual(), rhs.dual());
        let out = self.binary(rhs, a / b, DualPoint::constant(1.0) / b, -(a / (b * b)), "div");
        if b.value() == 0.0 {
            self.tape.flag(out.idx, "division by zero");
        }
        out
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(-self.dual(), DualPoint::constant(-1.0), "neg")
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.dual() + rhs, DualPoint::constant(1.0), "add_const")
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.dual() - rhs, DualPoint::constant(1.0), "sub_const")
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.dual() * rhs, DualPoint::constant(rhs), "scale")
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        let out = self.unary(self.dual() / rhs, DualPoint::constant(1.0 / rhs), "div_const");
        if rhs == 0.0 {
            self.tape.flag(out.idx, "division by zero");
        }
        out
    }
}

impl<'t> Real for Var<'t> {
    fn value(&self) -> f64 {
        self.dual().value()
    }

    fn lift(&self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn exp(self) -> Self {
        let e = self.dual().exp();
        self.unary(e, e, "exp")
    }

    fn ln(self) -> Self {
        let a = self.dual();
        let out = self.unary(a.ln(), DualPoint::constant(1.0) / a, "log");
        if a.value() <= 0.0 {
            self.tape.flag(out.idx, "log of non-positive value");
        }
        out
    }

    fn tanh(self) -> Self {
        let t = self.dual().tanh();
        let slope = -(t * t) + 1.0;
        self.unary(t, slope, "tanh")
    }

    fn sin(self) -> Self {
        let a = self.dual();
        self.unary(a.sin(), a.cos(), "sin")
    }

    fn cos(self) -> Self {
        let a = self.dual();
        self.unary(a.cos(), -a.sin(), "cos")
    }

    fn sqrt(self) -> Self {
        let a = self.dual();
        let s = a.sqrt();
        let out = self.unary(s, DualPoint::constant(0.5) / s, "sqrt");
        if a.value() <= 0.0 {
            self.tape.flag(out.idx, "sqrt of non-positive value");
        }
        out
    }

    fn powi(self, n: i32) -> Self {
        let a = self.dual();
        if n == 0 {
            return self.unary(DualPoint::constant(1.0), DualPoint::constant(0.0), "powi");
        }
        self.unary(a.powi(n), a.powi(n - 1) * f64::from(n), "powi")
    }

    fn max_const(self, c: f64) -> Self {
        let a = self.dual();
        if a.value() >= c {
            self.unary(a, DualPoint::constant(1.0), "max")
        } else {
            self.unary(DualPoint::constant(c), DualPoint::constant(0.0), "max")
        }
    }
}

/// Records `f` at input point `x` and returns its value and input gradient.
pub fn evaluate_with_input_derivatives<F>(f: F, x: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    if x.len() > MAX_DIRS {
        return Err(Error::config(format!(
            "at most {MAX_DIRS} input directions, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite input point"));
    }
    let tape = Tape::new(x.len());
    let inputs: Vec<Var<'_>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| tape.input(v, i))
        .collect();
    let out = f(&tape, &inputs);
    tape.status()?;
    let d = out.dual();
    Ok((d.value(), (0..x.len()).map(|k| d.tangent(k)).collect()))
}

/// Gradient of a recorded scalar with respect to parameter leaves.
pub fn parameter_gradient(tape: &Tape, loss: Var<'_>, params: &[Var<'_>]) -> Result<GradientVector> {
    tape.gradient(loss, params)
}

//! Reverse-mode gradient tape over real scalars.
//!
//! Every recorded node has at most two parents and stores the local
//! partial derivative with respect to each. Nodes are appended in
//! evaluation order, so the tape is topologically sorted by construction
//! and the backward pass is a single reverse sweep.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Affine,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Abs,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    kind: OpKind,
    parents: [u32; 2],
    partials: [f64; 2],
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    values: Vec<f64>,
    leaves: Vec<u32>,
}

/// Single-writer record of a computation. Use one tape per thread.
#[derive(Default)]
pub struct GradientTape {
    inner: RefCell<Inner>,
}

/// A scalar recorded on a [`GradientTape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t GradientTape,
    idx: u32,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.val)
    }
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        let t = Self::default();
        {
            let mut inner = t.inner.borrow_mut();
            inner.nodes.reserve(n);
            inner.values.reserve(n);
        }
        t
    }

    fn push(&self, kind: OpKind, parents: [u32; 2], partials: [f64; 2], val: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len() as u32;
        inner.nodes.push(Node {
            kind,
            parents,
            partials,
        });
        inner.values.push(val);
        Var {
            tape: self,
            idx,
            val,
        }
    }

    /// A differentiable input.
    pub fn var(&self, value: f64) -> Var<'_> {
        let v = self.push(OpKind::Leaf, [NONE, NONE], [0.0, 0.0], value);
        self.inner.borrow_mut().leaves.push(v.idx);
        v
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&x| self.var(x)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(OpKind::Const, [NONE, NONE], [0.0, 0.0], value)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_leaves(&self) -> usize {
        self.inner.borrow().leaves.len()
    }

    pub fn value_at(&self, idx: usize) -> Option<f64> {
        self.inner.borrow().values.get(idx).copied()
    }

    pub fn kind_at(&self, idx: usize) -> Option<OpKind> {
        self.inner.borrow().nodes.get(idx).map(|n| n.kind)
    }

    /// Adjoints of every node with respect to node `output`.
    pub fn backward_from(&self, output: usize) -> Result<Gradients> {
        let inner = self.inner.borrow();
        if output >= inner.nodes.len() {
            return Err(Error::domain(format!(
                "output index {output} out of range for tape of {} nodes",
                inner.nodes.len()
            )));
        }
        let mut adj = vec![0.0; output + 1];
        adj[output] = 1.0;
        for i in (0..=output).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &inner.nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NONE {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        let leaves = inner
            .leaves
            .iter()
            .map(|&l| if (l as usize) <= output { adj[l as usize] } else { 0.0 })
            .collect();
        Ok(Gradients { adjoints: adj, leaves })
    }

    pub fn backward(&self, output: Var<'_>) -> Gradients {
        self.backward_from(output.idx as usize)
            .expect("var belongs to this tape")
    }

    /// Drop all nodes, keeping allocations.
    pub fn clear(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.clear();
        inner.values.clear();
        inner.leaves.clear();
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
    leaves: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints.get(v.idx as usize).copied().unwrap_or(0.0)
    }

    /// Gradient per leaf, in leaf creation order.
    pub fn leaves(&self) -> &[f64] {
        &self.leaves
    }

    pub fn into_leaves(self) -> Vec<f64> {
        self.leaves
    }
}

impl<'t> Var<'t> {
    #[inline]
    pub fn index(self) -> usize {
        self.idx as usize
    }

    #[inline]
    pub fn tape(self) -> &'t GradientTape {
        self.tape
    }

    #[inline]
    fn unary(self, kind: OpKind, val: f64, d: f64) -> Self {
        self.tape.push(kind, [self.idx, NONE], [d, 0.0], val)
    }

    #[inline]
    fn binary(self, o: Self, kind: OpKind, val: f64, da: f64, db: f64) -> Self {
        debug_assert!(std::ptr::eq(self.tape, o.tape), "mixing tapes");
        self.tape.push(kind, [self.idx, o.idx], [da, db], val)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.binary(o, OpKind::Add, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.binary(o, OpKind::Sub, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.binary(o, OpKind::Mul, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, OpKind::Div, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(OpKind::Neg, -self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, c: f64) -> Self {
        self.unary(OpKind::Affine, self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, c: f64) -> Self {
        self.unary(OpKind::Affine, self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        self.unary(OpKind::Affine, self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, c: f64) -> Self {
        self.unary(OpKind::Affine, self.val / c, 1.0 / c)
    }
}

impl<'t> Real for Var<'t> {
    #[inline]
    fn value(self) -> f64 {
        self.val
    }
    #[inline]
    fn lift(self, c: f64) -> Self {
        self.tape.constant(c)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(OpKind::Sqrt, s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(OpKind::Exp, e, e)
    }
    fn ln(self) -> Self {
        self.unary(OpKind::Ln, self.val.ln(), 1.0 / self.val)
    }
    fn sin(self) -> Self {
        self.unary(OpKind::Sin, self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(OpKind::Cos, self.val.cos(), -self.val.sin())
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(OpKind::Tanh, t, 1.0 - t * t)
    }
    fn abs(self) -> Self {
        let d = if self.val < 0.0 { -1.0 } else { 1.0 };
        self.unary(OpKind::Abs, self.val.abs(), d)
    }
    fn sigmoid(self) -> Self {
        let s = 1.0 / (1.0 + (-self.val).exp());
        self.unary(OpKind::Sigmoid, s, s * (1.0 - s))
    }
    fn powf(self, e: f64) -> Self {
        let p = self.val.powf(e);
        self.unary(OpKind::Exp, p, e * p / self.val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = GradientTape::new();
        let x = tape.var(3.0);
        let y = x * x;
        assert_eq!(y.value(), 9.0);
        assert_eq!(tape.backward(y).wrt(x), 6.0);
    }

    #[test]
    fn product_plus_sine() {
        // d/dx (x y + sin x) = y + cos x ; d/dy = x
        let tape = GradientTape::new();
        let x = tape.var(1.0);
        let y = tape.var(2.0);
        let f = x * y + x.sin();
        let g = tape.backward(f);
        assert!((g.wrt(x) - (2.0 + 1f64.cos())).abs() < 1e-15);
        assert_eq!(g.wrt(y), 1.0);
        assert_eq!(g.leaves(), &[2.0 + 1f64.cos(), 1.0]);
    }

    #[test]
    fn out_of_range_output_is_an_error() {
        let tape = GradientTape::new();
        let _ = tape.var(1.0);
        assert!(tape.backward_from(5).is_err());
    }

    #[test]
    fn nodes_are_topologically_ordered() {
        let tape = GradientTape::new();
        let x = tape.var(0.3);
        let y = (x * 2.0).exp() / (x + 1.0);
        assert!(y.index() > x.index());
        assert_eq!(tape.kind_at(0), Some(OpKind::Leaf));
        assert_eq!(tape.kind_at(y.index()), Some(OpKind::Div));
    }

    #[test]
    fn reused_node_accumulates() {
        // f = x*x*x, f' = 3x^2
        let tape = GradientTape::new();
        let x = tape.var(2.0);
        let f = x * x * x;
        assert_eq!(tape.backward(f).wrt(x), 12.0);
    }

    #[test]
    fn backward_is_deterministic() {
        let tape = GradientTape::new();
        let xs = tape.vars(&[0.1, -0.7, 2.5]);
        let f = (xs[0] * xs[1]).tanh() + xs[2].ln() * xs[0].sigmoid();
        let a = tape.backward(f).into_leaves();
        let b = tape.backward(f).into_leaves();
        assert_eq!(a, b);
    }
}

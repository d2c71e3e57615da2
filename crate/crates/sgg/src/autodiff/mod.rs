//! Minimal reverse-mode automatic differentiation on `f64` tensors.
//!
//! A [`Tape`] records every operation; [`Tape::backward`] walks the record
//! in reverse and accumulates gradients. Values are `ndarray::ArrayD<f64>`
//! throughout; scalars are rank-0 arrays. Each op registers, per parent, a
//! closure mapping the upstream gradient to that parent's contribution, so
//! backward never re-reads the tape and all captured state is immutable.
//!
//! The op set is exactly what the model needs: elementwise math,
//! matrix/vector products, 2-d convolution, bilinear sampling, nearest
//! upsampling, softmax variants, and a handful of shape utilities.

mod ops;

pub mod check;

use ndarray::{ArrayD, IxDyn};
use std::cell::RefCell;
use std::rc::Rc;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type GradFn = Box<dyn Fn(&ArrayD<f64>) -> ArrayD<f64>>;

pub(crate) struct Node {
    pub(crate) value: Rc<ArrayD<f64>>,
    pub(crate) parents: Vec<(usize, GradFn)>,
}

#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert a leaf (input or parameter). Gradients accumulate here but do
    /// not propagate further.
    pub fn leaf(&self, value: ArrayD<f64>) -> Var {
        self.push(value, Vec::new())
    }

    /// Leaf from a scalar.
    pub fn scalar(&self, value: f64) -> Var {
        self.leaf(ArrayD::from_elem(IxDyn(&[]), value))
    }

    pub(crate) fn push(&self, value: ArrayD<f64>, parents: Vec<(usize, GradFn)>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            parents,
        });
        Var(nodes.len() - 1)
    }

    /// Clone out the value of a node.
    pub fn value(&self, v: Var) -> ArrayD<f64> {
        (*self.nodes.borrow()[v.0].value).clone()
    }

    /// Shared handle to the value of a node (no copy).
    pub fn value_rc(&self, v: Var) -> Rc<ArrayD<f64>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Value of a rank-0 (or single-element) node as f64.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let nodes = self.nodes.borrow();
        let val = &nodes[v.0].value;
        debug_assert_eq!(val.len(), 1, "scalar_value on non-scalar");
        *val.iter().next().expect("empty tensor")
    }

    /// Reverse pass from a scalar root. Returns per-node gradients; nodes
    /// not on any path to the root have gradient `None`.
    pub fn backward(&self, root: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        let n = nodes.len();
        let mut grads: Vec<Option<ArrayD<f64>>> = Vec::with_capacity(n);
        grads.resize_with(n, || None);
        let root_val = &nodes[root.0].value;
        assert_eq!(root_val.len(), 1, "backward root must be a scalar");
        grads[root.0] = Some(ArrayD::ones(IxDyn(root_val.shape())));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].clone() else { continue };
            for (p, f) in &nodes[i].parents {
                let contrib = f(&g);
                match &mut grads[*p] {
                    Some(acc) => acc.zip_mut_with(&contrib, |a, b| *a += *b),
                    slot => *slot = Some(contrib),
                }
            }
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Gradients { grads, shapes }
    }
}

pub struct Gradients {
    grads: Vec<Option<ArrayD<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`, if any path reached it.
    pub fn wrt(&self, v: Var) -> Option<&ArrayD<f64>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient with respect to `v`, zeros when unreached.
    pub fn wrt_or_zeros(&self, v: Var) -> ArrayD<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => ArrayD::zeros(IxDyn(&self.shapes[v.0])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_rule_through_reused_node() {
        // y = x*x + x  =>  dy/dx = 2x + 1
        let t = Tape::new();
        let x = t.scalar(3.0);
        let sq = t.mul(x, x);
        let y = t.add(sq, x);
        let g = t.backward(y);
        let gx = g.wrt(x).unwrap();
        assert!((gx[[]] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn unreached_nodes_have_no_grad() {
        let t = Tape::new();
        let x = t.scalar(1.0);
        let unused = t.scalar(2.0);
        let y = t.mul(x, x);
        let g = t.backward(y);
        assert!(g.wrt(unused).is_none());
        assert_eq!(g.wrt_or_zeros(unused)[[]], 0.0);
    }
}

//! N-dimensional tensors with reverse-mode automatic differentiation.
//!
//! Tensors are immutable values recorded in an implicit computation graph:
//! every primitive produces a fresh tensor holding references to its operands
//! and the rule needed to push gradients back through it. Calling
//! [`Tensor::backward`] on a scalar loss walks that graph once in reverse
//! topological order and accumulates gradients into every tensor created with
//! `requires_grad`.
//!
//! Activations live in `(batch, height, width, channels)` row-major layout.
//! The element type is generic: `f64` for oracle/gradient-check mode, `f32`
//! for training.

use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{MagnetError, Result};

mod autodiff;
mod check;
mod ops;

pub use autodiff::Graph;
pub use check::{finite_difference_grad, max_rel_error};
pub use ops::Padding;

pub(crate) use ops::Op;

/// Scalar element type of a tensor.
///
/// `f64` is the oracle/test mode, `f32` the training mode; the mode is picked
/// per use site by instantiating the generic structures with one or the other.
pub trait Element:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + 'static
{
    fn from_f64c(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    fn from_f32c(x: f32) -> Self {
        Self::from_f32(x).expect("literal not representable")
    }

    fn to_f64c(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("value not representable as f64")
    }

    fn to_f32c(self) -> f32 {
        num_traits::ToPrimitive::to_f32(&self).unwrap_or(f32::NAN)
    }
}

impl Element for f32 {}
impl Element for f64 {}

/// Element count implied by a shape (empty shape is a scalar).
pub fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

static NEXT_TENSOR_ID: AtomicU64 = AtomicU64::new(0);

pub(crate) struct TensorInner<T: Element> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    parents: Vec<Tensor<T>>,
    op: Op<T>,
}

/// Shared handle to a tensor value and its position in the autodiff graph.
pub struct Tensor<T: Element> {
    inner: Rc<TensorInner<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Element> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

impl<T: Element> Tensor<T> {
    fn leaf(data: Vec<T>, shape: Vec<usize>, requires_grad: bool) -> Self {
        Tensor {
            inner: Rc::new(TensorInner {
                id: NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                requires_grad,
                grad: RefCell::new(None),
                parents: Vec::new(),
                op: Op::Leaf,
            }),
        }
    }

    pub(crate) fn from_op(op: Op<T>, parents: Vec<Tensor<T>>, data: Vec<T>, shape: Vec<usize>) -> Self {
        debug_assert_eq!(data.len(), numel_of(&shape));
        let requires_grad = parents.iter().any(|p| p.inner.requires_grad);
        Tensor {
            inner: Rc::new(TensorInner {
                id: NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                requires_grad,
                grad: RefCell::new(None),
                parents,
                op,
            }),
        }
    }

    /// Build a constant tensor (no gradient tracking).
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if data.len() != numel_of(shape) {
            return Err(MagnetError::Shape(format!(
                "data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape,
                numel_of(shape)
            )));
        }
        Ok(Self::leaf(data, shape.to_vec(), false))
    }

    /// Build a leaf tensor that participates in gradient computation.
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let t = Self::from_vec(data, shape)?;
        Ok(Self::leaf(t.to_vec(), shape.to_vec(), true))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::leaf(vec![T::zero(); numel_of(shape)], shape.to_vec(), false)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::leaf(vec![T::one(); numel_of(shape)], shape.to_vec(), false)
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::leaf(vec![value; numel_of(shape)], shape.to_vec(), false)
    }

    /// Scalar tensor (rank 0).
    pub fn scalar(value: T) -> Self {
        Self::leaf(vec![value], Vec::new(), false)
    }

    pub(crate) fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        numel_of(&self.inner.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub(crate) fn parents(&self) -> &[Tensor<T>] {
        &self.inner.parents
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    /// Mutable access to the raw buffer. Intended for in-place parameter
    /// updates between passes; never call while a forward/backward graph
    /// referencing this tensor is being evaluated.
    pub fn data_mut(&self) -> RefMut<'_, Vec<T>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Extract the value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(MagnetError::Contract(format!(
                "item() requires a single-element tensor, shape is {:?}",
                self.shape()
            )));
        }
        Ok(self.inner.data.borrow()[0])
    }

    /// Overwrite the buffer contents (shape is fixed).
    pub fn set_data(&self, values: &[T]) -> Result<()> {
        if values.len() != self.numel() {
            return Err(MagnetError::Shape(format!(
                "set_data length {} does not match tensor of {} elements",
                values.len(),
                self.numel()
            )));
        }
        self.inner.data.borrow_mut().copy_from_slice(values);
        Ok(())
    }

    /// Current gradient buffer, if backward has populated one.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, delta: &[T]) {
        debug_assert_eq!(delta.len(), self.numel());
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (g, d) in buf.iter_mut().zip(delta) {
                    *g = *g + *d;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    /// Copy of the value detached from the graph (constant leaf).
    pub fn detach(&self) -> Tensor<T> {
        Self::leaf(self.to_vec(), self.inner.shape.clone(), false)
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    /// Reverse-mode gradient computation from a scalar loss.
    ///
    /// Gradients accumulate (`+=`) into every `requires_grad` tensor in the
    /// graph; call [`Tensor::zero_grad`] on parameters between steps.
    pub fn backward(&self) -> Result<()> {
        autodiff::backward(self)
    }
}

//! Evaluable scalar fields and nodal coefficient vectors.

use std::ops::{Deref, DerefMut};

/// A scalar function on the physical domain. Points are `[x, y]`; 1D fields ignore `y`.
pub trait ScalarField: Sync {
    fn value(&self, x: [f64; 2]) -> f64;
}

/// A field with a known gradient, used as an exact reference in error norms.
pub trait GradientField: ScalarField {
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

impl<F> ScalarField for F
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    fn value(&self, x: [f64; 2]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _x: [f64; 2]) -> f64 {
        self.0
    }
}

impl GradientField for Constant {
    fn gradient(&self, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Field assembled from a value closure and a gradient closure.
pub struct FnField<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> ScalarField for FnField<V, G>
where
    V: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }
}

impl<V, G> GradientField for FnField<V, G>
where
    V: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        (self.gradient)(x)
    }
}

/// Sum of two fields.
pub struct Sum<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: ScalarField + ?Sized, B: ScalarField + ?Sized> ScalarField for Sum<'_, A, B> {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.0.value(x) + self.1.value(x)
    }
}

/// `base + scale * other`, the coefficient `a0 + ε η` of a perturbed problem.
pub struct Perturbed<'a, A: ?Sized, B: ?Sized> {
    pub base: &'a A,
    pub scale: f64,
    pub other: &'a B,
}

impl<A: ScalarField + ?Sized, B: ScalarField + ?Sized> ScalarField for Perturbed<'_, A, B> {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.base.value(x) + self.scale * self.other.value(x)
    }
}

/// Nodal coefficients of a P1 function, indexed by interior DOF.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldVector(pub Vec<f64>);

impl FieldVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for FieldVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FieldVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

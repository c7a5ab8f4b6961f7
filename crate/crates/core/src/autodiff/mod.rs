//! Nested differentiation engine.
//!
//! Spatial derivatives of network outputs are carried forward as tangents
//! ([`DualPoint`], [`Jet`]); parameter gradients come from a reverse sweep
//! over a [`Tape`] whose nodes hold tangent-carrying values, so gradients of
//! loss terms that contain input derivatives are exact.
//!
//! Physics code is written once against the [`Real`] trait and then runs on
//! plain `f64`, on forward-mode jets, or recorded on a tape.

mod check;
mod dual;
mod jet;
mod tape;

use std::ops::{Add, Div, Mul, Neg, Sub};

pub use check::{central_difference_gradient, finite_difference_check};
pub use dual::{DualPoint, MAX_DIRS};
pub use jet::Jet;
pub use tape::{evaluate_with_input_derivatives, parameter_gradient, GradientVector, Tape, Var};

/// Scalar arithmetic shared by `f64`, forward-mode duals and taped variables.
///
/// Mixed arithmetic is only provided with `f64` on the right-hand side.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Primal value.
    fn value(&self) -> f64;
    /// A constant living in the same evaluation context as `self`.
    fn lift(&self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    /// `max(c, self)`; at a tie the variable branch is taken.
    fn max_const(self, c: f64) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// `max(0, self)`.
    fn relu(self) -> Self {
        self.max_const(0.0)
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn max_const(self, c: f64) -> Self {
        if self >= c {
            self
        } else {
            c
        }
    }
}

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{Jet, Real};

/// Largest number of input directions: (x, y) for steady problems, plus t.
pub const MAX_DIRS: usize = 3;

/// A value together with its derivatives along the input directions.
///
/// Constants carry zero directions and combine with any context; otherwise
/// all operands in one expression share the same direction count.
#[derive(Clone, Copy, PartialEq)]
pub struct DualPoint {
    jet: Jet<MAX_DIRS>,
    dirs: u8,
}

impl DualPoint {
    pub fn constant(value: f64) -> Self {
        Self {
            jet: Jet::constant(value),
            dirs: 0,
        }
    }

    /// Independent input `dir` in a context with `dirs` directions.
    pub fn variable(value: f64, dir: usize, dirs: usize) -> Self {
        assert!(dir < dirs && dirs <= MAX_DIRS, "direction out of range");
        Self {
            jet: Jet::variable(value, dir),
            dirs: dirs as u8,
        }
    }

    pub fn new(value: f64, tangents: &[f64]) -> Self {
        assert!(tangents.len() <= MAX_DIRS, "too many tangent directions");
        let mut jet = Jet::constant(value);
        jet.grad[..tangents.len()].copy_from_slice(tangents);
        Self {
            jet,
            dirs: tangents.len() as u8,
        }
    }

    pub fn value(&self) -> f64 {
        self.jet.value
    }

    pub fn dirs(&self) -> usize {
        usize::from(self.dirs)
    }

    pub fn tangents(&self) -> &[f64] {
        &self.jet.grad[..self.dirs()]
    }

    /// Derivative along `dir`; zero for directions beyond the context.
    pub fn tangent(&self, dir: usize) -> f64 {
        if dir < MAX_DIRS {
            self.jet.grad[dir]
        } else {
            0.0
        }
    }

    pub fn with_dirs(mut self, dirs: usize) -> Self {
        assert!(dirs <= MAX_DIRS);
        for g in &mut self.jet.grad[dirs..] {
            *g = 0.0;
        }
        self.dirs = dirs as u8;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.jet.value.is_finite() && self.tangents().iter().all(|t| t.is_finite())
    }

    #[inline]
    fn wrap(jet: Jet<MAX_DIRS>, dirs: u8) -> Self {
        Self { jet, dirs }
    }
}

impl fmt::Debug for DualPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DualPoint({} ; {:?})", self.value(), self.tangents())
    }
}

macro_rules! binary {
    ($tr:ident, $m:ident) => {
        impl $tr for DualPoint {
            type Output = Self;
            #[inline]
            fn $m(self, rhs: Self) -> Self {
                debug_assert!(
                    self.dirs == 0 || rhs.dirs == 0 || self.dirs == rhs.dirs,
                    "mixed tangent contexts"
                );
                Self::wrap(self.jet.$m(rhs.jet), self.dirs.max(rhs.dirs))
            }
        }
        impl $tr<f64> for DualPoint {
            type Output = Self;
            #[inline]
            fn $m(self, rhs: f64) -> Self {
                Self::wrap(self.jet.$m(rhs), self.dirs)
            }
        }
    };
}

binary!(Add, add);
binary!(Sub, sub);
binary!(Mul, mul);
binary!(Div, div);

impl Neg for DualPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::wrap(-self.jet, self.dirs)
    }
}

impl Real for DualPoint {
    fn value(&self) -> f64 {
        self.jet.value
    }
    fn lift(&self, c: f64) -> Self {
        Self::constant(c)
    }
    fn exp(self) -> Self {
        Self::wrap(self.jet.exp(), self.dirs)
    }
    fn ln(self) -> Self {
        Self::wrap(self.jet.ln(), self.dirs)
    }
    fn tanh(self) -> Self {
        Self::wrap(self.jet.tanh(), self.dirs)
    }
    fn sin(self) -> Self {
        Self::wrap(self.jet.sin(), self.dirs)
    }
    fn cos(self) -> Self {
        Self::wrap(self.jet.cos(), self.dirs)
    }
    fn sqrt(self) -> Self {
        Self::wrap(self.jet.sqrt(), self.dirs)
    }
    fn powi(self, n: i32) -> Self {
        Self::wrap(self.jet.powi(n), self.dirs)
    }
    fn max_const(self, c: f64) -> Self {
        Self::wrap(self.jet.max_const(c), self.dirs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_on_two_inputs() {
        let x = DualPoint::variable(2.0, 0, 2);
        let y = DualPoint::variable(3.0, 1, 2);
        let f = x * y;
        assert_eq!(f.value(), 6.0);
        assert_eq!(f.tangents(), &[3.0, 2.0]);
    }

    #[test]
    fn tanh_slope_at_origin() {
        let x = DualPoint::variable(0.0, 0, 1);
        let f = x.tanh();
        assert_eq!(f.value(), 0.0);
        assert_eq!(f.tangents(), &[1.0]);
    }

    #[test]
    fn sine_of_sum_vanishes_at_quarter_points() {
        let pi = std::f64::consts::PI;
        let x = DualPoint::variable(0.25, 0, 2);
        let y = DualPoint::variable(0.25, 1, 2);
        let f = ((x + y) * pi).sin();
        // d/dx sin(pi(x+y)) = pi cos(pi/2)
        let expected = pi * (pi / 2.0).cos();
        assert!((f.tangent(0) - expected).abs() < 1e-15);
        assert!(f.tangent(0).abs() < 1e-15);
    }

    #[test]
    fn constants_adopt_context() {
        let x = DualPoint::variable(1.0, 0, 3);
        let c = DualPoint::constant(4.0);
        let f = c + x;
        assert_eq!(f.dirs(), 3);
        assert_eq!(f.tangents(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn tangents_are_linear() {
        let a = DualPoint::new(1.5, &[0.3, -1.0]);
        let b = DualPoint::new(-0.5, &[2.0, 4.0]);
        let s = a + b;
        assert_eq!(s.tangents(), &[2.3, 3.0]);
    }
}

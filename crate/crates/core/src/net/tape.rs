//! Scalar reverse-mode differentiation on a recording tape.
//!
//! The tape records every primitive operation applied to [`Var`] handles;
//! a backward sweep over the records yields exact adjoints for all inputs.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::numerics::{digamma, log_gamma};

#[derive(Clone, Copy)]
struct Record {
    parents: [usize; 2],
    partials: [f64; 2],
}

/// Arena of recorded primitive operations plus their local derivatives.
#[derive(Default)]
pub struct GradientTape {
    records: RefCell<Vec<Record>>,
}

/// Handle to a scalar value living on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t GradientTape,
    index: usize,
    value: f64,
}

/// Adjoints of every tape position after a backward sweep.
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Introduce a leaf input.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(0, 0, 0.0, 0.0);
        Var {
            tape: self,
            index,
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.records.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, p0: usize, p1: usize, d0: f64, d1: f64) -> usize {
        let mut records = self.records.borrow_mut();
        let index = records.len();
        records.push(Record {
            parents: [p0, p1],
            partials: [d0, d1],
        });
        index
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    fn unary(self, value: f64, partial: f64) -> Var<'t> {
        let index = self.tape.push(self.index, self.index, partial, 0.0);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    fn binary(self, rhs: Var<'t>, value: f64, d_lhs: f64, d_rhs: f64) -> Var<'t> {
        let index = self.tape.push(self.index, rhs.index, d_lhs, d_rhs);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn sqrt(self) -> Var<'t> {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }

    pub fn tanh(self) -> Var<'t> {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    /// |x|, with the subgradient sign(x) at the origin fixed to 0.
    pub fn abs(self) -> Var<'t> {
        self.unary(self.value.abs(), self.value.signum() * f64::from(self.value != 0.0))
    }

    /// Numerically stable ln(1 + eˣ); derivative is the logistic sigmoid.
    pub fn softplus(self) -> Var<'t> {
        let x = self.value;
        let value = x.max(0.0) + (-x.abs()).exp().ln_1p();
        let sigmoid = if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        };
        self.unary(value, sigmoid)
    }

    /// ln Γ(x) for x > 0; derivative is the digamma function.
    pub fn ln_gamma(self) -> Var<'t> {
        let value = log_gamma(self.value).expect("ln_gamma tape input must be positive");
        let partial = digamma(self.value).expect("digamma tape input must be positive");
        self.unary(value, partial)
    }

    pub fn recip(self) -> Var<'t> {
        let r = 1.0 / self.value;
        self.unary(r, -r * r)
    }

    pub fn square(self) -> Var<'t> {
        self.unary(self.value * self.value, 2.0 * self.value)
    }

    /// Backward sweep from this scalar; returns adjoints for the whole tape.
    pub fn grad(self) -> Gradients {
        let records = self.tape.records.borrow();
        let mut adjoints = vec![0.0; records.len()];
        adjoints[self.index] = 1.0;
        for i in (0..=self.index).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let rec = &records[i];
            if rec.parents[0] != i {
                adjoints[rec.parents[0]] += a * rec.partials[0];
            }
            if rec.parents[1] != i {
                adjoints[rec.parents[1]] += a * rec.partials[1];
            }
        }
        Gradients { adjoints }
    }
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints[v.index]
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let inv = 1.0 / rhs.value;
        self.binary(rhs, self.value * inv, inv, -self.value * inv * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(self - rhs.value, -1.0)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(self + rhs.value, 1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(self * rhs.value, self)
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let inv = 1.0 / rhs.value;
        rhs.unary(self * inv, -self * inv * inv)
    }
}

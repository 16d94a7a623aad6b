//! Truncated multi-jets.
//!
//! A multidual number of order `r` is `a = Σ_{A ⊆ {1..r}} a_A ε_A` with
//! `ε_i ε_i = 0`. Block `A` is stored at index `A` read as a bitmask
//! (generator `ε_j` in bit `j - 1`). Evaluating a function on multiduals
//! reads off all of its square-free mixed partials at once, which is how
//! vertical and complete lifts of functions are computed in this crate.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{GeomError, Result};
use crate::mask;

/// Largest jet order accepted by the checked constructors.
pub const DEFAULT_MAX_ORDER: usize = 6;

type Blocks = SmallVec<[f64; 8]>;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiDual {
    order: usize,
    blocks: Blocks,
}

/// Binary operations exposed through [`arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Elementary functions lifted to jets by splitting on the highest
/// generator: `f(u + ε v) = f(u) + ε f'(u) v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Powi(i32),
    Powf(f64),
}

impl MultiDual {
    /// Build a jet from its `2^order` blocks.
    pub fn new(order: usize, blocks: Vec<f64>) -> Result<Self> {
        Self::with_cap(order, blocks, DEFAULT_MAX_ORDER)
    }

    pub fn with_cap(order: usize, blocks: Vec<f64>, cap: usize) -> Result<Self> {
        if order > cap {
            return Err(GeomError::OrderCap { order, cap });
        }
        if blocks.len() != 1 << order {
            return Err(GeomError::DimensionMismatch {
                expected: 1 << order,
                got: blocks.len(),
            });
        }
        Ok(Self {
            order,
            blocks: Blocks::from_vec(blocks),
        })
    }

    pub fn constant(order: usize, value: f64) -> Self {
        let mut blocks = Blocks::from_elem(0.0, 1 << order);
        blocks[0] = value;
        Self { order, blocks }
    }

    pub fn real(value: f64) -> Self {
        Self::constant(0, value)
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(order, 0.0)
    }

    pub fn one(order: usize) -> Self {
        Self::constant(order, 1.0)
    }

    /// The generator `ε_j` (1-based) inside jets of the given order.
    pub fn generator(order: usize, j: usize) -> Self {
        assert!(j >= 1 && j <= order, "generator {j} outside order {order}");
        let mut out = Self::zero(order);
        out.blocks[mask::bit(j)] = 1.0;
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    /// Coefficient of `ε_A`.
    pub fn block(&self, mask: usize) -> f64 {
        self.blocks[mask]
    }

    pub fn value(&self) -> f64 {
        self.blocks[0]
    }

    /// Embed into a higher order; new generators carry zero coefficients.
    pub fn promote(&self, order: usize) -> Self {
        assert!(order >= self.order);
        let mut blocks = Blocks::from_elem(0.0, 1 << order);
        blocks[..self.blocks.len()].copy_from_slice(&self.blocks);
        Self { order, blocks }
    }

    /// `self + ε_{r+1} tangent`, a jet of order `r + 1`.
    pub fn extend(&self, tangent: &MultiDual) -> Result<Self> {
        check(self, tangent)?;
        let mut blocks = Blocks::with_capacity(2 * self.blocks.len());
        blocks.extend_from_slice(&self.blocks);
        blocks.extend_from_slice(&tangent.blocks);
        Ok(Self {
            order: self.order + 1,
            blocks,
        })
    }

    /// Split `u + ε_r v` into `(u, v)`; both of order `r - 1`.
    pub fn split_top(&self) -> (Self, Self) {
        assert!(self.order > 0, "cannot split an order-0 jet");
        let half = self.blocks.len() / 2;
        let lower = Self {
            order: self.order - 1,
            blocks: Blocks::from_slice(&self.blocks[..half]),
        };
        let upper = Self {
            order: self.order - 1,
            blocks: Blocks::from_slice(&self.blocks[half..]),
        };
        (lower, upper)
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        check(self, rhs)?;
        Ok(self.zip(rhs, |a, b| a + b))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        check(self, rhs)?;
        Ok(self.zip(rhs, |a, b| a - b))
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        check(self, rhs)?;
        Ok(self.mul_unchecked(rhs))
    }

    pub fn try_div(&self, rhs: &Self) -> Result<Self> {
        check(self, rhs)?;
        Ok(self.mul_unchecked(&rhs.recip()?))
    }

    pub fn recip(&self) -> Result<Self> {
        if self.order == 0 {
            let v = self.blocks[0];
            if v == 0.0 {
                return Err(GeomError::SingularJet);
            }
            return Ok(Self::real(1.0 / v));
        }
        // 1/(u + εv) = 1/u - ε v/u²
        let (u, v) = self.split_top();
        let inv = u.recip()?;
        let d = -(&(&v * &inv) * &inv);
        inv.extend(&d)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|a| a * k)
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        if self.order == 0 {
            let (s, c) = self.blocks[0].sin_cos();
            return (Self::real(s), Self::real(c));
        }
        let (u, v) = self.split_top();
        let (su, cu) = u.sin_cos();
        let ds = &cu * &v;
        let dc = -(&su * &v);
        (su.extend(&ds).unwrap(), cu.extend(&dc).unwrap())
    }

    pub fn exp(&self) -> Self {
        if self.order == 0 {
            return Self::real(self.blocks[0].exp());
        }
        let (u, v) = self.split_top();
        let eu = u.exp();
        let d = &eu * &v;
        eu.extend(&d).unwrap()
    }

    pub fn ln(&self) -> Result<Self> {
        if self.blocks[0] <= 0.0 {
            return Err(GeomError::DomainError(format!(
                "ln of non-positive real part {}",
                self.blocks[0]
            )));
        }
        if self.order == 0 {
            return Ok(Self::real(self.blocks[0].ln()));
        }
        let (u, v) = self.split_top();
        let d = v.try_div(&u)?;
        u.ln()?.extend(&d)
    }

    pub fn sqrt(&self) -> Result<Self> {
        let re = self.blocks[0];
        if re < 0.0 || (re == 0.0 && self.order > 0) {
            return Err(GeomError::DomainError(format!(
                "sqrt of real part {re} at jet order {}",
                self.order
            )));
        }
        if self.order == 0 {
            return Ok(Self::real(re.sqrt()));
        }
        let (u, v) = self.split_top();
        let su = u.sqrt()?;
        let d = v.try_div(&su.scale(2.0))?;
        su.extend(&d)
    }

    pub fn powi(&self, k: i32) -> Result<Self> {
        if k < 0 && self.blocks[0] == 0.0 {
            return Err(GeomError::DomainError(format!(
                "negative power {k} of a jet with zero real part"
            )));
        }
        if self.order == 0 {
            return Ok(Self::real(self.blocks[0].powi(k)));
        }
        if k == 0 {
            return Ok(Self::one(self.order));
        }
        let (u, v) = self.split_top();
        let pu = u.powi(k)?;
        let d = &u.powi(k - 1)?.scale(k as f64) * &v;
        pu.extend(&d)
    }

    pub fn powf(&self, a: f64) -> Result<Self> {
        if self.blocks[0] <= 0.0 {
            return Err(GeomError::DomainError(format!(
                "real power of non-positive real part {}",
                self.blocks[0]
            )));
        }
        if self.order == 0 {
            return Ok(Self::real(self.blocks[0].powf(a)));
        }
        let (u, v) = self.split_top();
        let pu = u.powf(a)?;
        let d = &u.powf(a - 1.0)?.scale(a) * &v;
        pu.extend(&d)
    }

    pub fn apply(&self, f: Elementary) -> Result<Self> {
        match f {
            Elementary::Sin => Ok(self.sin()),
            Elementary::Cos => Ok(self.cos()),
            Elementary::Exp => Ok(self.exp()),
            Elementary::Ln => self.ln(),
            Elementary::Sqrt => self.sqrt(),
            Elementary::Powi(k) => self.powi(k),
            Elementary::Powf(a) => self.powf(a),
        }
    }

    fn zip(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(&rhs.blocks)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            order: self.order,
            blocks,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            order: self.order,
            blocks: self.blocks.iter().map(|&a| f(a)).collect(),
        }
    }

    // (a·b)_A = Σ_{B ⊆ A} a_B b_{A∖B}
    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let len = self.blocks.len();
        let mut blocks = Blocks::from_elem(0.0, len);
        for (a, out) in blocks.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut b = a;
            loop {
                acc += self.blocks[b] * rhs.blocks[a ^ b];
                if b == 0 {
                    break;
                }
                b = (b - 1) & a;
            }
            *out = acc;
        }
        Self {
            order: self.order,
            blocks,
        }
    }
}

fn check(a: &MultiDual, b: &MultiDual) -> Result<()> {
    if a.order != b.order {
        return Err(GeomError::OrderMismatch {
            left: a.order,
            right: b.order,
        });
    }
    Ok(())
}

/// Checked binary arithmetic on two jets of equal order.
pub fn arith(a: &MultiDual, b: &MultiDual, op: ArithOp) -> Result<MultiDual> {
    match op {
        ArithOp::Add => a.try_add(b),
        ArithOp::Sub => a.try_sub(b),
        ArithOp::Mul => a.try_mul(b),
        ArithOp::Div => a.try_div(b),
    }
}

// Operator sugar for closures that build spray coefficients. Mixing orders
// is a programming error here and panics; use the `try_*` methods to get
// `OrderMismatch` instead.
macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr<&MultiDual> for &MultiDual {
            type Output = MultiDual;
            fn $method(self, rhs: &MultiDual) -> MultiDual {
                self.$checked(rhs).expect(concat!("MultiDual::", stringify!($method)))
            }
        }
        impl $tr<MultiDual> for MultiDual {
            type Output = MultiDual;
            fn $method(self, rhs: MultiDual) -> MultiDual {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&MultiDual> for MultiDual {
            type Output = MultiDual;
            fn $method(self, rhs: &MultiDual) -> MultiDual {
                (&self).$method(rhs)
            }
        }
        impl $tr<MultiDual> for &MultiDual {
            type Output = MultiDual;
            fn $method(self, rhs: MultiDual) -> MultiDual {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);
binop!(Div, div, try_div);

impl Neg for &MultiDual {
    type Output = MultiDual;
    fn neg(self) -> MultiDual {
        self.map(|a| -a)
    }
}

impl Neg for MultiDual {
    type Output = MultiDual;
    fn neg(self) -> MultiDual {
        -&self
    }
}

impl Mul<f64> for &MultiDual {
    type Output = MultiDual;
    fn mul(self, k: f64) -> MultiDual {
        self.scale(k)
    }
}

impl Mul<f64> for MultiDual {
    type Output = MultiDual;
    fn mul(self, k: f64) -> MultiDual {
        self.scale(k)
    }
}

impl Add<f64> for &MultiDual {
    type Output = MultiDual;
    fn add(self, k: f64) -> MultiDual {
        let mut out = self.clone();
        out.blocks[0] += k;
        out
    }
}

impl Add<f64> for MultiDual {
    type Output = MultiDual;
    fn add(mut self, k: f64) -> MultiDual {
        self.blocks[0] += k;
        self
    }
}

/// A scalar function on `T^s M` whose `n · 2^s` coordinates are laid out
/// block by block in bitmask order, evaluable over jets of any order.
pub type ScalarFn = dyn Fn(&[MultiDual]) -> Result<MultiDual> + Send + Sync;

#[derive(Clone)]
pub struct BundleFunction {
    n: usize,
    order: usize,
    f: Arc<ScalarFn>,
}

/// Which lift [`md_lift`] produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lift {
    Vertical,
    Complete,
}

impl BundleFunction {
    pub fn new(
        n: usize,
        order: usize,
        f: impl Fn(&[MultiDual]) -> Result<MultiDual> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            order,
            f: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coordinate_count(&self) -> usize {
        self.n << self.order
    }

    pub fn eval(&self, coords: &[MultiDual]) -> Result<MultiDual> {
        if coords.len() != self.coordinate_count() {
            return Err(GeomError::DimensionMismatch {
                expected: self.coordinate_count(),
                got: coords.len(),
            });
        }
        (self.f)(coords)
    }

    pub fn eval_real(&self, coords: &[f64]) -> Result<f64> {
        let jets: Vec<MultiDual> = coords.iter().map(|&c| MultiDual::real(c)).collect();
        Ok(self.eval(&jets)?.value())
    }
}

/// Vertical or complete lift of a function on `T^s M` to `T^{s+1} M`.
///
/// The lifted function applies `κ_{s+1}` to its argument, splits it into a
/// base point and a tangent on `T^s M`, evaluates `f` on
/// `base + ε tangent` with one extra generator and keeps the `ε`-free
/// (vertical) or `ε`-linear (complete) part.
pub fn md_lift(f: &BundleFunction, which: Lift) -> BundleFunction {
    let n = f.n;
    let s = f.order;
    let inner = f.clone();
    BundleFunction::new(n, s + 1, move |coords: &[MultiDual]| {
        let blocks = 1usize << (s + 1);
        if coords.len() != n * blocks {
            return Err(GeomError::DimensionMismatch {
                expected: n * blocks,
                got: coords.len(),
            });
        }
        // κ_{s+1} swaps tangent levels s and s+1; for s = 0 it is the identity.
        let permuted = |m: usize| if s >= 1 { mask::swap(m, s, s + 1) } else { m };
        let half = blocks / 2;
        let mut args = Vec::with_capacity(n * half);
        for m in 0..half {
            for i in 0..n {
                let base = &coords[permuted(m) * n + i];
                let tangent = &coords[permuted(m | half) * n + i];
                args.push(base.extend(tangent)?);
            }
        }
        let value = inner.eval(&args)?;
        let (vertical, complete) = value.split_top();
        Ok(match which {
            Lift::Vertical => vertical,
            Lift::Complete => complete,
        })
    })
}

//! Holomorphic forward-mode differentiation.
//!
//! A [`Jet`] carries the value of an analytic function of the chart
//! parameters together with its complex gradient and, at order two, the
//! symmetric Hessian. Gradients of different lengths interoperate: missing
//! entries are zero, so a jet with an empty gradient acts as a constant.
//!
//! All logarithms use the principal branch with the cut on the closed
//! negative real axis.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// `2πi`.
pub const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

/// Number of packed entries of a symmetric `n×n` array.
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Principal logarithm, refusing points on the cut.
pub fn principal_ln(z: C64) -> Result<C64> {
    if z.im == 0.0 && z.re <= 0.0 {
        return Err(Error::Branch {
            value: z,
            context: "principal logarithm".into(),
        });
    }
    Ok(z.ln())
}

/// Truncated Taylor expansion of an analytic function of `n` chart parameters.
#[derive(Clone, PartialEq)]
pub struct Jet {
    value: C64,
    grad: Vec<C64>,
    /// Packed upper triangle of the Hessian; `None` for order-one jets.
    hess: Option<Vec<C64>>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("value", &self.value)
            .field("grad", &self.grad)
            .field("order", &self.order())
            .finish()
    }
}

impl Jet {
    pub fn constant(value: C64) -> Jet {
        Jet {
            value,
            grad: Vec::new(),
            hess: None,
        }
    }

    /// Coordinate function `x_index` of an `n`-dimensional chart.
    pub fn variable(value: C64, index: usize, n: usize, order: u8) -> Jet {
        let mut grad = vec![C64::new(0.0, 0.0); n];
        grad[index] = C64::new(1.0, 0.0);
        let hess = (order >= 2).then(|| vec![C64::new(0.0, 0.0); packed_len(n)]);
        Jet { value, grad, hess }
    }

    pub fn from_parts(value: C64, grad: Vec<C64>, hess: Option<Vec<C64>>) -> Jet {
        if let Some(h) = &hess {
            assert_eq!(h.len(), packed_len(grad.len()), "hessian length");
        }
        Jet { value, grad, hess }
    }

    pub fn value(&self) -> C64 {
        self.value
    }

    /// Number of chart directions carried (zero for constants).
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn order(&self) -> u8 {
        if self.hess.is_some() {
            2
        } else {
            1
        }
    }

    pub fn grad(&self) -> &[C64] {
        &self.grad
    }

    /// `∂_i` of the represented function (zero beyond the carried dimension).
    pub fn partial(&self, i: usize) -> C64 {
        self.grad.get(i).copied().unwrap_or_default()
    }

    /// Gradient padded with zeros to length `n`.
    pub fn gradient(&self, n: usize) -> Vec<C64> {
        (0..n).map(|i| self.partial(i)).collect()
    }

    /// `∂_i ∂_j`; zero for order-one jets.
    pub fn hess(&self, i: usize, j: usize) -> C64 {
        let n = self.grad.len();
        match &self.hess {
            Some(h) if i < n && j < n => h[packed_index(n, i, j)],
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Order-one jet of the partial derivative `∂_i` of an order-two jet.
    pub fn derivative(&self, i: usize) -> Jet {
        let n = self.grad.len();
        let grad = (0..n).map(|j| self.hess(i, j)).collect();
        Jet {
            value: self.partial(i),
            grad,
            hess: None,
        }
    }

    /// Drop the second-order part.
    pub fn truncate(&self) -> Jet {
        Jet {
            value: self.value,
            grad: self.grad.clone(),
            hess: None,
        }
    }

    /// Reparametrise along `x = x0 + t (y - x0)` for fixed `t`: every
    /// derivative with respect to `y` picks up one factor of `t`.
    pub fn scale_derivatives(&self, t: f64) -> Jet {
        Jet {
            value: self.value,
            grad: self.grad.iter().map(|g| g * t).collect(),
            hess: self
                .hess
                .as_ref()
                .map(|h| h.iter().map(|v| v * (t * t)).collect()),
        }
    }

    /// Apply an analytic scalar function given its value and first two
    /// derivatives at `self.value`.
    fn compose(&self, f0: C64, f1: C64, f2: C64) -> Jet {
        let n = self.grad.len();
        let grad: Vec<C64> = self.grad.iter().map(|g| f1 * g).collect();
        let hess = self.hess.as_ref().map(|h| {
            let mut out = Vec::with_capacity(h.len());
            for i in 0..n {
                for j in i..n {
                    out.push(f1 * h[packed_index(n, i, j)] + f2 * self.grad[i] * self.grad[j]);
                }
            }
            out
        });
        Jet {
            value: f0,
            grad,
            hess,
        }
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.compose(c, -s, -c)
    }

    /// Principal logarithm with gradient `grad / value`.
    pub fn ln(&self) -> Result<Jet> {
        let l = principal_ln(self.value)?;
        let r = self.value.inv();
        Ok(self.compose(l, r, -r * r))
    }

    pub fn recip(&self) -> Jet {
        let r = self.value.inv();
        self.compose(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, k: i32) -> Jet {
        match k {
            0 => Jet::constant(C64::new(1.0, 0.0)),
            1 => self.clone(),
            _ => {
                let z = self.value;
                let kf = k as f64;
                self.compose(z.powi(k), kf * z.powi(k - 1), kf * (kf - 1.0) * z.powi(k - 2))
            }
        }
    }

    /// `exp(theta · Log z)` with propagation in both arguments.
    pub fn powc(&self, theta: &Jet) -> Result<Jet> {
        Ok((theta.clone() * self.ln()?).exp())
    }

    /// Principal square root `exp(½ Log z)`.
    pub fn sqrt(&self) -> Result<Jet> {
        Ok((self.ln()? * C64::new(0.5, 0.0)).exp())
    }

    fn binary(&self, other: &Jet, value: C64, da: C64, db: C64, dab: C64) -> Jet {
        // Generic bilinear rule: f(a, b) with ∂f/∂a = da, ∂f/∂b = db,
        // ∂²f/∂a∂b = dab and vanishing pure second derivatives.
        let n = self.grad.len().max(other.grad.len());
        let grad = (0..n)
            .map(|i| da * self.partial(i) + db * other.partial(i))
            .collect();
        let hess = if self.hess.is_some() || other.hess.is_some() {
            let mut out = Vec::with_capacity(packed_len(n));
            for i in 0..n {
                for j in i..n {
                    out.push(
                        da * self.hess(i, j)
                            + db * other.hess(i, j)
                            + dab * (self.partial(i) * other.partial(j) + self.partial(j) * other.partial(i)),
                    );
                }
            }
            Some(out)
        } else {
            None
        };
        Jet { value, grad, hess }
    }
}

/// Coordinate jets for a chart point.
pub fn seed_chart(values: &[C64], order: u8) -> Result<Vec<Jet>> {
    if values.is_empty() {
        return Err(Error::Usage("cannot seed an empty chart".into()));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::Usage(format!("jet order must be 1 or 2, got {order}")));
    }
    let n = values.len();
    Ok(values
        .iter()
        .enumerate()
        .map(|(k, &v)| Jet::variable(v, k, n, order))
        .collect())
}

/// Principal logarithm of a jet.
pub fn principal_log(z: &Jet) -> Result<Jet> {
    z.ln()
}

/// `z^θ = exp(θ · Log z)`.
pub fn complex_power(z: &Jet, theta: &Jet) -> Result<Jet> {
    z.powc(theta)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let one = C64::new(1.0, 0.0);
        self.binary(&rhs, self.value + rhs.value, one, one, C64::new(0.0, 0.0))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let one = C64::new(1.0, 0.0);
        self.binary(&rhs, self.value - rhs.value, one, -one, C64::new(0.0, 0.0))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.binary(&rhs, self.value * rhs.value, rhs.value, self.value, C64::new(1.0, 0.0))
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * C64::new(-1.0, 0.0)
    }
}

impl Add<C64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: C64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<C64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: C64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: C64) -> Jet {
        self.value *= rhs;
        self.grad.iter_mut().for_each(|g| *g *= rhs);
        if let Some(h) = self.hess.as_mut() {
            h.iter_mut().for_each(|v| *v *= rhs);
        }
        self
    }
}

impl Div<C64> for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: C64) -> Jet {
        self * rhs.inv()
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = std::mem::replace(self, Jet::constant(C64::default())) + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = std::mem::replace(self, Jet::constant(C64::default())) - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = std::mem::replace(self, Jet::constant(C64::default())) * rhs;
    }
}

/// Field operations shared by plain complex numbers and jets, so that matrix
/// and form algebra can be written once.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<C64, Output = Self>
    + Sub<C64, Output = Self>
    + Mul<C64, Output = Self>
    + Div<C64, Output = Self>
    + AddAssign
{
    /// Jet order needed so that values and first derivatives of `Self`
    /// can be read off a seeded family.
    const SEED_ORDER: u8;

    fn from_c64(c: C64) -> Self;
    fn value(&self) -> C64;
    /// `self` seen one derivative order lower (the value for `C64`).
    fn lower(j: &Jet) -> Self;
    /// `∂_i j` at the same reduced order.
    fn lower_partial(j: &Jet, i: usize) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Result<Self>;
    fn recip(&self) -> Self;
    fn powi(&self, k: i32) -> Self;

    fn zero() -> Self {
        Self::from_c64(C64::new(0.0, 0.0))
    }
    fn one() -> Self {
        Self::from_c64(C64::new(1.0, 0.0))
    }
    fn real(x: f64) -> Self {
        Self::from_c64(C64::new(x, 0.0))
    }
    fn powc(&self, theta: &Self) -> Result<Self> {
        Ok((theta.clone() * self.ln()?).exp())
    }
    /// Principal square root.
    fn sqrt(&self) -> Result<Self> {
        Ok((self.ln()? * C64::new(0.5, 0.0)).exp())
    }
}

impl Scalar for C64 {
    const SEED_ORDER: u8 = 1;
    fn lower(j: &Jet) -> Self {
        j.value()
    }
    fn lower_partial(j: &Jet, i: usize) -> Self {
        j.partial(i)
    }
    fn from_c64(c: C64) -> Self {
        c
    }
    fn value(&self) -> C64 {
        *self
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Result<Self> {
        principal_ln(*self)
    }
    fn recip(&self) -> Self {
        self.inv()
    }
    fn powi(&self, k: i32) -> Self {
        Complex64::powi(self, k)
    }
}

impl Scalar for Jet {
    const SEED_ORDER: u8 = 2;
    fn lower(j: &Jet) -> Self {
        j.truncate()
    }
    fn lower_partial(j: &Jet, i: usize) -> Self {
        j.derivative(i)
    }
    fn from_c64(c: C64) -> Self {
        Jet::constant(c)
    }
    fn value(&self) -> C64 {
        self.value
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Result<Self> {
        Jet::ln(self)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
    fn powi(&self, k: i32) -> Self {
        Jet::powi(self, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn packed_layout_is_row_major_upper_triangle() {
        let n = 4;
        let mut expected = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(packed_index(n, i, j), expected);
                assert_eq!(packed_index(n, j, i), expected);
                expected += 1;
            }
        }
        assert_eq!(expected, packed_len(n));
    }

    #[test]
    fn seeding() {
        let jets = seed_chart(&[c(2.0, 0.0)], 1).unwrap();
        assert_eq!(jets[0].value(), c(2.0, 0.0));
        assert_eq!(jets[0].grad(), &[c(1.0, 0.0)]);
        assert!(seed_chart(&[], 1).is_err());
        assert!(seed_chart(&[c(1.0, 0.0)], 3).is_err());
        let jets = seed_chart(&[c(1.0, 0.0), c(0.0, 1.0)], 2).unwrap();
        assert_eq!(jets[1].order(), 2);
        assert_eq!(jets[1].hess(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn square_has_derivative_six_at_three() {
        let x = seed_chart(&[c(3.0, 0.0)], 1).unwrap().remove(0);
        let y = x.clone() * x;
        assert_eq!(y.value(), c(9.0, 0.0));
        assert_eq!(y.partial(0), c(6.0, 0.0));
    }

    #[test]
    fn exponential_of_scaled_log_two() {
        // d/ds 2^s at s = 1 is 2 ln 2; compare also with a central difference.
        let s = seed_chart(&[c(1.0, 0.0)], 1).unwrap().remove(0);
        let y = (s * c(2f64.ln(), 0.0)).exp();
        let exact = 2.0 * 2f64.ln();
        assert!((y.partial(0).re - exact).abs() < 1e-14);
        let h = 1e-6;
        let fd = ((2f64.ln() * (1.0 + h)).exp() - (2f64.ln() * (1.0 - h)).exp()) / (2.0 * h);
        assert!((y.partial(0).re - fd).abs() < 1e-8);
    }

    #[test]
    fn principal_log_values_and_cut() {
        let one = Jet::constant(c(1.0, 0.0));
        assert_eq!(principal_log(&one).unwrap().value(), c(0.0, 0.0));
        let i = Jet::constant(I);
        assert!(close(principal_log(&i).unwrap().value(), c(0.0, PI / 2.0), 1e-15));
        for bad in [c(-1.0, 0.0), c(0.0, 0.0), c(-2.5, -0.0)] {
            match principal_log(&Jet::constant(bad)) {
                Err(Error::Branch { value, .. }) => assert_eq!(value, bad),
                other => panic!("expected branch error, got {other:?}"),
            }
        }
    }

    #[test]
    fn principal_log_gradient_matches_central_difference() {
        let z0 = c(2.0, 3.0);
        let z = seed_chart(&[z0], 1).unwrap().remove(0);
        let g = principal_log(&z).unwrap().partial(0);
        let h = 1e-6;
        let fd = ((z0 + h).ln() - (z0 - h).ln()) / (2.0 * h);
        assert!(close(g, fd, 1e-8));
    }

    #[test]
    fn complex_power_cases() {
        let four = Jet::constant(c(4.0, 0.0));
        let half = Jet::constant(c(0.5, 0.0));
        assert!(close(complex_power(&four, &half).unwrap().value(), c(2.0, 0.0), 1e-15));

        let z = seed_chart(&[c(1.5, 0.5)], 1).unwrap().remove(0);
        let p = complex_power(&z, &Jet::constant(c(0.0, 0.0))).unwrap();
        assert_eq!(p.value(), c(1.0, 0.0));
        assert_eq!(p.partial(0), c(0.0, 0.0));

        // ∂θ 3^θ at θ = 0.7 is 3^0.7 ln 3.
        let v = seed_chart(&[c(3.0, 0.0), c(0.7, 0.0)], 1).unwrap();
        let p = complex_power(&v[0], &v[1]).unwrap();
        let h = 1e-6;
        let fd = (3f64.powf(0.7 + h) - 3f64.powf(0.7 - h)) / (2.0 * h);
        assert!((p.partial(1).re - fd).abs() < 1e-8 * fd.abs());
        assert!((p.partial(1).re - 3f64.powf(0.7) * 3f64.ln()).abs() < 1e-13);

        assert!(complex_power(&Jet::constant(c(-1.0, 0.0)), &half).is_err());
    }

    #[test]
    fn second_order_matches_nested_first_order() {
        // f(x, y) = exp(x y) / (1 + x^2): compare the Hessian with a
        // first-order jet of the analytically differentiated gradient.
        let p = [c(0.3, 0.2), c(-0.4, 0.7)];
        let v = seed_chart(&p, 2).unwrap();
        let f = |x: Jet, y: Jet| (x.clone() * y).exp() / (x.clone() * x + c(1.0, 0.0));
        let out = f(v[0].clone(), v[1].clone());
        assert_eq!(out.hess(0, 1), out.hess(1, 0));

        let w = seed_chart(&p, 1).unwrap();
        let (x, y) = (w[0].clone(), w[1].clone());
        let den = x.clone() * x.clone() + c(1.0, 0.0);
        let e = (x.clone() * y.clone()).exp();
        let fx = e.clone() * y.clone() / den.clone() - e.clone() * x.clone() * c(2.0, 0.0) / (den.clone() * den.clone());
        let fy = e * x / den;
        for j in 0..2 {
            assert!(close(out.hess(0, j), fx.partial(j), 1e-12));
            assert!(close(out.hess(1, j), fy.partial(j), 1e-12));
        }
        let d0 = out.derivative(0);
        assert!(close(d0.value(), fx.value(), 1e-13));
        assert_eq!(d0.order(), 1);
    }

    #[test]
    fn constants_broadcast_against_jets() {
        let v = seed_chart(&[c(1.0, 0.0), c(2.0, 0.0)], 2).unwrap();
        let k = Jet::constant(c(3.0, 0.0));
        let s = k.clone() * v[1].clone() + k;
        assert_eq!(s.dim(), 2);
        assert_eq!(s.order(), 2);
        assert_eq!(s.partial(1), c(3.0, 0.0));
        assert_eq!(s.partial(0), c(0.0, 0.0));
    }

    #[test]
    fn cauchy_riemann_consistency() {
        // For holomorphic f the derivative along a real step equals the
        // derivative along an imaginary step divided by i.
        let z0 = c(0.8, -0.3);
        let z = seed_chart(&[z0], 1).unwrap().remove(0);
        let f = |z: Jet| -> Jet { (z.clone() * z.clone()).exp() * z.ln().unwrap() };
        let g = f(z).partial(0);
        let h = 1e-6;
        let fc = |z: C64| (z * z).exp() * z.ln();
        let real = (fc(z0 + h) - fc(z0 - h)) / (2.0 * h);
        let imag = (fc(z0 + I * h) - fc(z0 - I * h)) / (2.0 * h * I);
        assert!(close(g, real, 1e-8));
        assert!(close(g, imag, 1e-8));
    }
}

//! Small dense complex matrices and forms in chart directions.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jets::{seed_chart, Jet, Scalar, C64};

/// Condition estimates above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e13;

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S = C64> {
    r: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(r: usize) -> Self {
        Matrix {
            r,
            data: vec![S::zero(); r * r],
        }
    }

    pub fn identity(r: usize) -> Self {
        let mut m = Self::zeros(r);
        for i in 0..r {
            m.data[i * r + i] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 || rows.iter().any(|row| row.len() != r) {
            return Err(Error::Usage("matrix rows must form a nonempty square".into()));
        }
        Ok(Matrix {
            r,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn diag(entries: Vec<S>) -> Self {
        let r = entries.len();
        let mut m = Self::zeros(r);
        for (i, e) in entries.into_iter().enumerate() {
            m.data[i * r + i] = e;
        }
        m
    }

    pub fn from_fn(r: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                data.push(f(i, j));
            }
        }
        Matrix { r, data }
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.r + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.r + j] = v;
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix {
            r: self.r,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn values(&self) -> Matrix<C64> {
        self.map(|s| s.value())
    }

    pub fn scale(&self, k: C64) -> Self {
        self.map(|s| s.clone() * k)
    }

    pub fn trace(&self) -> S {
        let mut t = S::zero();
        for i in 0..self.r {
            t += self.get(i, i).clone();
        }
        t
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|s| s.value().norm()).fold(0.0, f64::max)
    }

    fn check_conformable(&self, other: &Self) -> Result<()> {
        if self.r != other.r {
            return Err(Error::Usage(format!(
                "matrix dimension mismatch: {} vs {}",
                self.r, other.r
            )));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_conformable(other)?;
        Ok(self * other)
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Inverse by Gaussian elimination with partial pivoting.
    ///
    /// The condition estimate is the larger of the extreme pivot ratio and
    /// `‖M‖·‖M⁻¹‖` in the max norm; inputs exceeding [`CONDITION_LIMIT`] are refused.
    pub fn inverse(&self) -> Result<Self> {
        let r = self.r;
        let mut a = self.clone();
        let mut inv = Self::identity(r);
        let mut max_pivot: f64 = 0.0;
        let mut min_pivot = f64::INFINITY;
        for col in 0..r {
            let (p, mag) = (col..r)
                .map(|row| (row, a.get(row, col).value().norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            max_pivot = max_pivot.max(mag);
            min_pivot = min_pivot.min(mag);
            if mag == 0.0 || !mag.is_finite() {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                    context: "matrix inverse".into(),
                });
            }
            if p != col {
                for j in 0..r {
                    a.data.swap(p * r + j, col * r + j);
                    inv.data.swap(p * r + j, col * r + j);
                }
            }
            let pivot_inv = a.get(col, col).recip();
            for j in 0..r {
                a.data[col * r + j] = a.data[col * r + j].clone() * pivot_inv.clone();
                inv.data[col * r + j] = inv.data[col * r + j].clone() * pivot_inv.clone();
            }
            for row in 0..r {
                if row == col {
                    continue;
                }
                let factor = a.get(row, col).clone();
                for j in 0..r {
                    let av = a.data[row * r + j].clone() - factor.clone() * a.data[col * r + j].clone();
                    a.data[row * r + j] = av;
                    let iv = inv.data[row * r + j].clone() - factor.clone() * inv.data[col * r + j].clone();
                    inv.data[row * r + j] = iv;
                }
            }
        }
        let condition = (max_pivot / min_pivot).max(self.max_abs() * inv.values().max_abs());
        if !condition.is_finite() || condition > CONDITION_LIMIT {
            return Err(Error::Singular {
                condition,
                context: "matrix inverse".into(),
            });
        }
        Ok(inv)
    }
}

impl Matrix<C64> {
    pub fn to_jets(&self) -> Matrix<Jet> {
        self.map(|c| Jet::constant(*c))
    }
}

impl Matrix<Jet> {
    /// Values and first derivatives at the level of `S` (see [`Scalar::lower`]).
    pub fn lower<S: Scalar>(&self) -> Matrix<S> {
        self.map(|j| S::lower(j))
    }

    pub fn lower_partial<S: Scalar>(&self, i: usize) -> Matrix<S> {
        self.map(|j| S::lower_partial(j, i))
    }
}

impl<S: Scalar> Mul for &Matrix<S> {
    type Output = Matrix<S>;
    fn mul(self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.r, rhs.r, "matrix dimension mismatch");
        let r = self.r;
        Matrix::from_fn(r, |i, j| {
            let mut acc = S::zero();
            for k in 0..r {
                acc += self.data[i * r + k].clone() * rhs.data[k * r + j].clone();
            }
            acc
        })
    }
}

impl<S: Scalar> Add for &Matrix<S> {
    type Output = Matrix<S>;
    fn add(self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.r, rhs.r, "matrix dimension mismatch");
        Matrix {
            r: self.r,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }
}

impl<S: Scalar> Sub for &Matrix<S> {
    type Output = Matrix<S>;
    fn sub(self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.r, rhs.r, "matrix dimension mismatch");
        Matrix {
            r: self.r,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }
}

impl<S: Scalar> Neg for &Matrix<S> {
    type Output = Matrix<S>;
    fn neg(self) -> Matrix<S> {
        self.map(|s| -s.clone())
    }
}

/// Ordered product `ms[a] · ms[a+1] ⋯ ms[b-1]`; the identity when `a >= b`.
pub fn ordered_product<S: Scalar>(ms: &[Matrix<S>], a: usize, b: usize, r: usize) -> Matrix<S> {
    let mut out = Matrix::identity(r);
    for m in ms.iter().take(b).skip(a) {
        out = &out * m;
    }
    out
}

/// A matrix-valued function of the chart, evaluated on seeded jets.
pub type Family = Arc<dyn Fn(&[Jet]) -> Result<Matrix<Jet>> + Send + Sync>;

pub fn family(f: impl Fn(&[Jet]) -> Result<Matrix<Jet>> + Send + Sync + 'static) -> Family {
    Arc::new(f)
}

/// Family evaluated on `M(x)⁻¹`.
pub fn inverted(f: &Family) -> Family {
    let f = f.clone();
    Arc::new(move |x| f(x)?.inverse())
}

/// Constant family.
pub fn constant_family(m: Matrix<C64>) -> Family {
    Arc::new(move |_| Ok(m.to_jets()))
}

/// One coefficient matrix per chart direction.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixOneForm<S = C64> {
    pub coeffs: Vec<Matrix<S>>,
}

impl<S: Scalar> MatrixOneForm<S> {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn rank(&self) -> usize {
        self.coeffs.first().map_or(0, |m| m.dim())
    }

    pub fn conjugate(&self, left: &Matrix<S>, right: &Matrix<S>) -> Self {
        MatrixOneForm {
            coeffs: self.coeffs.iter().map(|c| &(left * c) * right).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        MatrixOneForm {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

/// Evaluate a family at `point` and return `M` and `Ξ = δM·M⁻¹` at scalar
/// level `S`: plain values for `C64`, first-order jets for `Jet`.
pub fn family_with_maurer_cartan<S: Scalar>(f: &Family, point: &[C64]) -> Result<(Matrix<S>, MatrixOneForm<S>)> {
    let x = seed_chart(point, S::SEED_ORDER)?;
    let m = f(&x)?;
    maurer_cartan_of(&m, point.len())
}

/// `M` and `Ξ` from an already evaluated jet matrix.
pub fn maurer_cartan_of<S: Scalar>(m: &Matrix<Jet>, n: usize) -> Result<(Matrix<S>, MatrixOneForm<S>)> {
    let value: Matrix<S> = m.lower();
    let inv = value.inverse()?;
    let coeffs = (0..n).map(|i| &m.lower_partial::<S>(i) * &inv).collect();
    Ok((value, MatrixOneForm { coeffs }))
}

/// `Ξ_i = (∂_i M)·M⁻¹`.
pub fn maurer_cartan(f: &Family, point: &[C64]) -> Result<MatrixOneForm> {
    Ok(family_with_maurer_cartan::<C64>(f, point)?.1)
}

/// Antisymmetric form `Σ_{i<j} c_ij dx_i∧dx_j`, stored on `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoForm<S = C64> {
    n: usize,
    packed: Vec<S>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl<S: Scalar> TwoForm<S> {
    pub fn zeros(n: usize) -> Self {
        TwoForm {
            n,
            packed: vec![S::zero(); n * n.saturating_sub(1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Signed coefficient: `get(j, i) = −get(i, j)` and the diagonal is zero.
    pub fn get(&self, i: usize, j: usize) -> S {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.packed[pair_index(self.n, i, j)].clone(),
            std::cmp::Ordering::Greater => -self.packed[pair_index(self.n, j, i)].clone(),
            std::cmp::Ordering::Equal => S::zero(),
        }
    }

    /// Add `v · dx_i∧dx_j`.
    pub fn add_term(&mut self, i: usize, j: usize, v: S) {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => {
                let k = pair_index(self.n, i, j);
                self.packed[k] = self.packed[k].clone() + v;
            }
            std::cmp::Ordering::Greater => {
                let k = pair_index(self.n, j, i);
                self.packed[k] = self.packed[k].clone() - v;
            }
            std::cmp::Ordering::Equal => {}
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TwoForm<T> {
        TwoForm {
            n: self.n,
            packed: self.packed.iter().map(f).collect(),
        }
    }

    pub fn values(&self) -> TwoForm<C64> {
        self.map(|s| s.value())
    }

    pub fn scale(&self, k: C64) -> Self {
        self.map(|s| s.clone() * k)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "two-form dimension mismatch");
        TwoForm {
            n: self.n,
            packed: self
                .packed
                .iter()
                .zip(&other.packed)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    /// Full antisymmetric `n×n` array of values.
    pub fn to_matrix(&self) -> Vec<Vec<C64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).value()).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().map(|s| s.value().norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "two-form dimension mismatch");
        self.packed
            .iter()
            .zip(&other.packed)
            .map(|(a, b)| (a.value() - b.value()).norm())
            .fold(0.0, f64::max)
    }
}

impl TwoForm<C64> {
    /// From a full array; the strict lower triangle is ignored.
    pub fn from_upper(c: &[Vec<C64>]) -> Self {
        let n = c.len();
        let mut f = TwoForm::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                f.add_term(i, j, c[i][j]);
            }
        }
        f
    }
}

/// Totally antisymmetric three-form, stored on `i < j < k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeForm {
    n: usize,
    packed: Vec<C64>,
}

impl ThreeForm {
    pub fn zeros(n: usize) -> Self {
        let len = if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 };
        ThreeForm {
            n,
            packed: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let mut idx = 0;
        for a in 0..self.n {
            for b in a + 1..self.n {
                for c in b + 1..self.n {
                    if (a, b, c) == (i, j, k) {
                        return idx;
                    }
                    idx += 1;
                }
            }
        }
        unreachable!("three-form index out of range")
    }

    fn sorted(i: usize, j: usize, k: usize) -> Option<((usize, usize, usize), f64)> {
        if i == j || j == k || i == k {
            return None;
        }
        let mut v = [i, j, k];
        let mut sign = 1.0;
        for a in 0..3 {
            for b in 0..2 - a {
                if v[b] > v[b + 1] {
                    v.swap(b, b + 1);
                    sign = -sign;
                }
            }
        }
        Some(((v[0], v[1], v[2]), sign))
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        match Self::sorted(i, j, k) {
            Some(((a, b, c), s)) => self.packed[self.index(a, b, c)] * s,
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn set_sorted(&mut self, i: usize, j: usize, k: usize, v: C64) {
        let idx = self.index(i, j, k);
        self.packed[idx] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// `coeffs[i][j] = Tr(P·A_i·Q·B_j·R) − Tr(P·A_j·Q·B_i·R)`.
pub fn trace_wedge<S: Scalar>(
    p: &Matrix<S>,
    a: &MatrixOneForm<S>,
    q: &Matrix<S>,
    b: &MatrixOneForm<S>,
    r: &Matrix<S>,
) -> Result<TwoForm<S>> {
    let dim = p.dim();
    if a.dim() != b.dim() {
        return Err(Error::Usage(format!(
            "one-forms have {} and {} chart directions",
            a.dim(),
            b.dim()
        )));
    }
    if [q.dim(), r.dim()]
        .into_iter()
        .chain(a.coeffs.iter().chain(&b.coeffs).map(|m| m.dim()))
        .any(|d| d != dim)
    {
        return Err(Error::Usage("trace_wedge: matrix dimensions are not conformable".into()));
    }
    let n = a.dim();
    let left: Vec<Matrix<S>> = a.coeffs.iter().map(|ai| &(p * ai) * q).collect();
    let right: Vec<Matrix<S>> = b.coeffs.iter().map(|bj| bj * r).collect();
    let tr = |x: &Matrix<S>, y: &Matrix<S>| {
        let mut t = S::zero();
        for i in 0..dim {
            for k in 0..dim {
                t += x.get(i, k).clone() * y.get(k, i).clone();
            }
        }
        t
    };
    let mut out = TwoForm::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            out.add_term(i, j, tr(&left[i], &right[j]) - tr(&left[j], &right[i]));
        }
    }
    Ok(out)
}

/// A two-form depending on the chart point.
pub trait TwoFormField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, point: &[C64]) -> Result<TwoForm>;
    /// Coefficients as first-order jets in the chart coordinates.
    fn eval_jet(&self, point: &[C64]) -> Result<TwoForm<Jet>>;
}

/// A one-form depending on the chart point.
pub trait OneFormField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, point: &[C64]) -> Result<Vec<C64>>;
    fn eval_jet(&self, point: &[C64]) -> Result<Vec<Jet>>;
}

/// Two-form given by an explicit analytic expression in the coordinates.
pub trait TwoFormExpr: Send + Sync {
    fn dim(&self) -> usize;
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<TwoForm<S>>;
}

/// One-form given by an explicit analytic expression in the coordinates.
pub trait OneFormExpr: Send + Sync {
    fn dim(&self) -> usize;
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>>;
}

/// Adapter turning an expression into a field.
#[derive(Clone, Debug)]
pub struct Analytic<E>(pub E);

fn check_point(n: usize, point: &[C64]) -> Result<()> {
    if point.len() != n {
        return Err(Error::Usage(format!(
            "chart point has {} coordinates, expected {n}",
            point.len()
        )));
    }
    Ok(())
}

impl<E: TwoFormExpr> TwoFormField for Analytic<E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, point: &[C64]) -> Result<TwoForm> {
        check_point(self.0.dim(), point)?;
        self.0.coeffs(point)
    }
    fn eval_jet(&self, point: &[C64]) -> Result<TwoForm<Jet>> {
        check_point(self.0.dim(), point)?;
        self.0.coeffs(&seed_chart(point, 1)?)
    }
}

impl<E: OneFormExpr> OneFormField for Analytic<E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, point: &[C64]) -> Result<Vec<C64>> {
        check_point(self.0.dim(), point)?;
        self.0.coeffs(point)
    }
    fn eval_jet(&self, point: &[C64]) -> Result<Vec<Jet>> {
        check_point(self.0.dim(), point)?;
        self.0.coeffs(&seed_chart(point, 1)?)
    }
}

/// `(dη)_{ijk} = ∂_i η_{jk} − ∂_j η_{ik} + ∂_k η_{ij}`.
pub fn exterior_derivative_2form(field: &dyn TwoFormField, point: &[C64]) -> Result<ThreeForm> {
    let eta = field.eval_jet(point)?;
    let n = eta.dim();
    let mut out = ThreeForm::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let v = eta.get(j, k).partial(i) - eta.get(i, k).partial(j) + eta.get(i, j).partial(k);
                out.set_sorted(i, j, k, v);
            }
        }
    }
    Ok(out)
}

/// `(dθ)_{ij} = ∂_i θ_j − ∂_j θ_i`.
pub fn exterior_derivative_1form(field: &dyn OneFormField, point: &[C64]) -> Result<TwoForm> {
    let theta = field.eval_jet(point)?;
    let n = theta.len();
    let mut out = TwoForm::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            out.add_term(i, j, theta[j].partial(i) - theta[i].partial(j));
        }
    }
    Ok(out)
}

/// `max_{i<j} ‖∂_iΞ_j − ∂_jΞ_i − [Ξ_i, Ξ_j]‖`, from second-order jets.
pub fn check_flatness(f: &Family, point: &[C64]) -> Result<f64> {
    let (_, xi) = family_with_maurer_cartan::<Jet>(f, point)?;
    let n = point.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let di_xj = xi.coeffs[j].map(|e| e.partial(i));
            let dj_xi = xi.coeffs[i].map(|e| e.partial(j));
            let xi_i = xi.coeffs[i].values();
            let xi_j = xi.coeffs[j].values();
            let defect = &(&di_xj - &dj_xi) - &xi_i.commutator(&xi_j);
            worst = worst.max(defect.max_abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{principal_ln, I};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn m2(a: C64, b: C64, cc: C64, d: C64) -> Matrix {
        Matrix::from_rows(vec![vec![a, b], vec![cc, d]]).unwrap()
    }

    fn upper(s: Jet) -> Matrix<Jet> {
        Matrix::from_rows(vec![
            vec![Jet::constant(c(1.0, 0.0)), s],
            vec![Jet::constant(c(0.0, 0.0)), Jet::constant(c(1.0, 0.0))],
        ])
        .unwrap()
    }

    fn lower_tri(s: Jet) -> Matrix<Jet> {
        Matrix::from_rows(vec![
            vec![Jet::constant(c(1.0, 0.0)), Jet::constant(c(0.0, 0.0))],
            vec![s, Jet::constant(c(1.0, 0.0))],
        ])
        .unwrap()
    }

    fn diag_l(l: Jet) -> Matrix<Jet> {
        Matrix::diag(vec![l.clone(), l.recip()])
    }

    /// `C(s)⁻¹ Λ(λ) C(s) · C'(t)⁻¹ Λ'(μ) C'(t)` on the chart `(s, λ, t, μ)`.
    fn two_factor_family() -> Family {
        family(|x| {
            let c1 = upper(x[0].clone());
            let c2 = lower_tri(x[2].clone());
            let a = &(&c1.inverse()? * &diag_l(x[1].clone())) * &c1;
            let b = &(&c2.inverse()? * &diag_l(x[3].clone())) * &c2;
            Ok(&a * &b)
        })
    }

    fn fd_partial(f: &Family, p: &[C64], i: usize) -> Matrix {
        let h = 1e-6;
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[i] += h;
        b[i] -= h;
        let fa = f(&seed_chart(&a, 1).unwrap()).unwrap().values();
        let fb = f(&seed_chart(&b, 1).unwrap()).unwrap().values();
        (&fa - &fb).scale(c(0.5 / h, 0.0))
    }

    #[test]
    fn inverse_and_singular_detection() {
        let m = m2(c(2.0, 1.0), c(0.5, 0.0), c(-1.0, 0.3), c(1.0, -2.0));
        let inv = m.inverse().unwrap();
        assert!((&(&m * &inv) - &Matrix::identity(2)).max_abs() < 1e-14);
        let s = m2(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        match s.inverse() {
            Err(Error::Singular { .. }) => {}
            other => panic!("expected singular error, got {other:?}"),
        }
        let z = Matrix::<C64>::zeros(3);
        assert!(z.inverse().is_err());
    }

    #[test]
    fn jet_inverse_derivative() {
        // d(M⁻¹) = −M⁻¹ dM M⁻¹ for M = [[1, s], [s, 2]].
        let x = seed_chart(&[c(0.3, 0.1)], 1).unwrap();
        let one = Jet::constant(c(1.0, 0.0));
        let m = Matrix::from_rows(vec![vec![one.clone(), x[0].clone()], vec![x[0].clone(), one * c(2.0, 0.0)]]).unwrap();
        let inv = m.inverse().unwrap();
        let mv = m.values();
        let iv = mv.inverse().unwrap();
        let dm = m2(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let expected = -&(&(&iv * &dm) * &iv);
        assert!((&inv.map(|j| j.partial(0)) - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn maurer_cartan_constant_family_vanishes() {
        let f = constant_family(m2(c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
        let xi = maurer_cartan(&f, &[c(0.2, 0.0), c(0.5, 0.5)]).unwrap();
        assert!(xi.coeffs.iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn maurer_cartan_abelian_power() {
        let z0 = c(0.5, 0.8);
        let a = c(-0.3, 0.1);
        let f = family(move |x| Ok(Matrix::diag(vec![Jet::constant(z0 - a).powc(&-x[0].clone())?])));
        let xi = maurer_cartan(&f, &[c(0.37, -0.2)]).unwrap();
        assert!((*xi.coeffs[0].get(0, 0) + principal_ln(z0 - a).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn maurer_cartan_matches_finite_difference() {
        let lam = c(0.7, 0.4);
        let f = family(move |x| {
            let cm = upper(x[0].clone());
            Ok(&(&cm.inverse()? * &diag_l(Jet::constant(lam))) * &cm)
        });
        let p = [c(0.4, -0.9)];
        let xi = maurer_cartan(&f, &p).unwrap();
        let m = f(&seed_chart(&p, 1).unwrap()).unwrap().values();
        let fd = &fd_partial(&f, &p, 0) * &m.inverse().unwrap();
        assert!((&xi.coeffs[0] - &fd).max_abs() < 1e-8);
    }

    #[test]
    fn trace_of_maurer_cartan_is_log_det_gradient() {
        let f = two_factor_family();
        let f2 = family(move |x| {
            let base = two_factor_family()(x)?;
            let extra = Matrix::diag(vec![x[0].clone() + c(2.0, 0.0), x[1].clone() * x[3].clone()]);
            Ok(&base * &extra)
        });
        let p = [c(0.3, 0.2), c(1.2, -0.4), c(-0.5, 0.6), c(0.8, 0.9)];
        for fam in [f, f2] {
            let xi = maurer_cartan(&fam, &p).unwrap();
            let x = seed_chart(&p, 1).unwrap();
            let m = fam(&x).unwrap();
            let det = m.get(0, 0).clone() * m.get(1, 1).clone() - m.get(0, 1).clone() * m.get(1, 0).clone();
            let dlog = det.ln().unwrap();
            for i in 0..p.len() {
                assert!((xi.coeffs[i].trace() - dlog.partial(i)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_wedge_scalar_self_wedge_vanishes() {
        let one = Matrix::identity(1);
        let a = MatrixOneForm {
            coeffs: vec![Matrix::diag(vec![c(1.0, 2.0)]), Matrix::diag(vec![c(-0.5, 0.3)]), Matrix::diag(vec![c(0.2, 0.0)])],
        };
        let w = trace_wedge(&one, &a, &one, &a, &one).unwrap();
        assert_eq!(w.max_abs(), 0.0);
    }

    #[test]
    fn trace_wedge_sparsity() {
        let id = Matrix::identity(2);
        let e = m2(c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0));
        let mut a = MatrixOneForm { coeffs: vec![Matrix::zeros(2); 3] };
        let mut b = a.clone();
        a.coeffs[0] = e.clone();
        b.coeffs[2] = e.clone();
        let w = trace_wedge(&id, &a, &id, &b, &id).unwrap();
        assert_eq!(w.get(0, 2), (&e * &e).trace());
        assert_eq!(w.get(0, 1), c(0.0, 0.0));
        assert_eq!(w.get(1, 2), c(0.0, 0.0));
    }

    #[test]
    fn trace_wedge_dimension_mismatch() {
        let a = MatrixOneForm { coeffs: vec![Matrix::<C64>::identity(2)] };
        let b = MatrixOneForm { coeffs: vec![Matrix::<C64>::identity(3)] };
        let id = Matrix::identity(2);
        assert!(matches!(trace_wedge(&id, &a, &id, &b, &id), Err(Error::Usage(_))));
    }

    #[test]
    fn two_form_accessor_signs() {
        let mut f = TwoForm::<C64>::zeros(4);
        f.add_term(2, 1, c(3.0, 0.0));
        assert_eq!(f.get(1, 2), c(-3.0, 0.0));
        assert_eq!(f.get(2, 1), c(3.0, 0.0));
        assert_eq!(f.get(2, 2), c(0.0, 0.0));
        let mut g = ThreeForm::zeros(4);
        g.set_sorted(0, 2, 3, c(1.0, 0.0));
        assert_eq!(g.get(2, 0, 3), c(-1.0, 0.0));
        assert_eq!(g.get(3, 0, 2), c(1.0, 0.0));
        assert_eq!(g.get(0, 0, 3), c(0.0, 0.0));
    }

    struct Monomial;
    impl TwoFormExpr for Monomial {
        fn dim(&self) -> usize {
            3
        }
        fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<TwoForm<S>> {
            let mut f = TwoForm::zeros(3);
            f.add_term(1, 2, x[0].clone());
            Ok(f)
        }
    }

    struct Constant;
    impl TwoFormExpr for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn coeffs<S: Scalar>(&self, _x: &[S]) -> Result<TwoForm<S>> {
            let mut f = TwoForm::zeros(3);
            f.add_term(0, 1, S::real(2.0));
            f.add_term(1, 2, S::from_c64(I));
            Ok(f)
        }
    }

    #[test]
    fn exterior_derivatives_of_simple_forms() {
        let p = [c(0.4, 0.0), c(1.0, 1.0), c(-2.0, 0.5)];
        let d = exterior_derivative_2form(&Analytic(Monomial), &p).unwrap();
        assert_eq!(d.get(0, 1, 2), c(1.0, 0.0));
        let d = exterior_derivative_2form(&Analytic(Constant), &p).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn flatness_of_families() {
        let p = [c(0.3, 0.2), c(1.2, -0.4), c(-0.5, 0.6), c(0.8, 0.9)];
        let constant = constant_family(Matrix::identity(2));
        assert_eq!(check_flatness(&constant, &p).unwrap(), 0.0);
        let abelian = family(|x| Ok(Matrix::diag(vec![(x[0].clone() * x[1].clone()).exp() * x[2].clone()])));
        assert!(check_flatness(&abelian, &p).unwrap() < 1e-14);
        assert!(check_flatness(&two_factor_family(), &p).unwrap() < 1e-9);
    }

    fn complex() -> impl Strategy<Value = C64> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| c(a, b))
    }

    fn matrix2() -> impl Strategy<Value = Matrix> {
        prop::collection::vec(complex(), 4).prop_map(|v| m2(v[0], v[1], v[2], v[3]))
    }

    proptest! {
        #[test]
        fn trace_wedge_is_antisymmetric(
            p in matrix2(), q in matrix2(), r in matrix2(),
            a in prop::collection::vec(matrix2(), 3),
            b in prop::collection::vec(matrix2(), 3),
        ) {
            let w = trace_wedge(&p, &MatrixOneForm { coeffs: a.clone() }, &q, &MatrixOneForm { coeffs: b.clone() }, &r).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let direct = (&(&(&(&p * &a[i]) * &q) * &b[j]) * &r).trace() - (&(&(&(&p * &a[j]) * &q) * &b[i]) * &r).trace();
                    prop_assert!((w.get(i, j) - direct).norm() < 1e-12);
                    prop_assert!((w.get(i, j) + w.get(j, i)).norm() == 0.0);
                }
            }
        }

        #[test]
        fn inverse_is_accurate(m in matrix2()) {
            if let Ok(inv) = m.inverse() {
                let scale = m.max_abs() * inv.max_abs();
                prop_assert!((&(&m * &inv) - &Matrix::identity(2)).max_abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}

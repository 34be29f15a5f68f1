//! Stokes data of the second Painlevé equation.
//!
//! Six unipotent Stokes matrices, alternately upper and lower triangular,
//! followed by the formal monodromy `diag(λ, 1/λ)`, with
//! `S_1⋯S_6·diag(λ, 1/λ) = 1`. Free chart `(λ, s1, s3, s5)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jets::{Jet, Scalar, C64};
use crate::linalg::{family, ordered_product, Family, Matrix, OneFormExpr, TwoForm, TwoFormExpr};
use crate::vertex::{eta_vertex, ContourGraphModel, IncidentArc, VertexConfig};

use super::{
    denominator, diag_pair, lower_unipotent, require_away_from_zero, upper_unipotent, ChartModel, SAMPLE_MARGIN,
};

/// `(s2, s4, s6)` from `(λ, s1, s3, s5)`.
pub fn pii_solve_constraint<S: Scalar>(lambda: &S, s1: &S, s3: &S, s5: &S) -> Result<(S, S, S)> {
    let (l, s1, s3, s5) = (lambda.clone(), s1.clone(), s3.clone(), s5.clone());
    let d2 = denominator("s3·λ·s1", s3.clone() * l.clone() * s1.clone())?;
    let d4 = denominator("s3·s5", s3.clone() * s5.clone())?;
    let d6 = denominator("s1·λ²·s5", s1.clone() * l.clone() * l.clone() * s5.clone())?;
    let s2 = -(s5.clone() + s3.clone() * l.clone() + l.clone() * s1.clone()) / d2;
    let s4 = -(l.clone() * s1.clone() + s5.clone() + s3.clone()) / d4;
    let s6 = -(s5 + s3 * l.clone() + s1 * l.clone() * l) / d6;
    Ok((s2, s4, s6))
}

/// `[S_1, …, S_6, diag(λ, 1/λ)]` at a chart point.
pub fn pii_stokes_matrices<S: Scalar>(x: &[S]) -> Result<Vec<Matrix<S>>> {
    let (s2, s4, s6) = pii_solve_constraint(&x[0], &x[1], &x[2], &x[3])?;
    Ok(vec![
        upper_unipotent(x[1].clone()),
        lower_unipotent(s2),
        upper_unipotent(x[2].clone()),
        lower_unipotent(s4),
        upper_unipotent(x[3].clone()),
        lower_unipotent(s6),
        diag_pair(x[0].clone()),
    ])
}

/// Stokes matrices on the slice `λ = 1, s4 = s1, s5 = s2, s6 = s3`, chart `(s1, s3)`.
pub fn pii_slice_matrices<S: Scalar>(x: &[S]) -> Result<Vec<Matrix<S>>> {
    let (s1, s3) = (x[0].clone(), x[1].clone());
    let d = denominator("s1·s3 + 1", s1.clone() * s3.clone() + C64::new(1.0, 0.0))?;
    let s2 = -(s3.clone() + s1.clone()) / d;
    Ok(vec![
        upper_unipotent(s1.clone()),
        lower_unipotent(s2.clone()),
        upper_unipotent(s3.clone()),
        lower_unipotent(s1),
        upper_unipotent(s2),
        lower_unipotent(s3),
        Matrix::identity(2),
    ])
}

fn families_from(matrices: fn(&[Jet]) -> Result<Vec<Matrix<Jet>>>) -> Vec<Family> {
    (0..7)
        .map(|k| family(move |x| Ok(matrices(x)?.swap_remove(k))))
        .collect()
}

fn stokes_vertex(families: Vec<Family>) -> VertexConfig {
    let arcs = families
        .into_iter()
        .enumerate()
        .map(|(k, f)| IncidentArc::outward(format!("S{}", k + 1), f))
        .collect();
    VertexConfig::new("infinity", arcs)
}

/// Vertex form of an all-outward fan `S_1, …, S_{2r}, S_{2r+1} = e^{2πiL}`.
pub fn stokes_eta_generic(families: &[Family], point: &[C64]) -> Result<TwoForm> {
    if families.len() < 2 || families.len().is_multiple_of(2) {
        return Err(Error::Usage(format!(
            "expected 2r + 1 Stokes families, got {}",
            families.len()
        )));
    }
    eta_vertex(&stokes_vertex(families.to_vec()), point)
}

fn product_residual(ms: &[Matrix<C64>]) -> f64 {
    (&ordered_product(ms, 0, ms.len(), 2) - &Matrix::identity(2)).max_abs()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Pii;

impl Pii {
    pub fn families(&self) -> Vec<Family> {
        families_from(pii_stokes_matrices::<Jet>)
    }

    pub fn vertex(&self) -> VertexConfig {
        stokes_vertex(self.families())
    }

    pub fn contour_graph(&self) -> ContourGraphModel {
        ContourGraphModel {
            dim: 4,
            chart_labels: self.chart_labels(),
            vertices: vec![self.vertex()],
        }
    }

    pub fn constraint_residual(&self, x: &[C64]) -> Result<f64> {
        Ok(product_residual(&pii_stokes_matrices(x)?))
    }
}

impl ChartModel for Pii {
    fn name(&self) -> &'static str {
        "pii"
    }
    fn chart_labels(&self) -> Vec<String> {
        ["lambda", "s1", "s3", "s5"].map(String::from).to_vec()
    }
    fn check_admissible(&self, x: &[C64]) -> Result<()> {
        require_away_from_zero(
            SAMPLE_MARGIN,
            &[("lambda", x[0]), ("s1", x[1]), ("s3", x[2]), ("s5", x[3])],
        )
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PiiSlice;

impl PiiSlice {
    pub fn families(&self) -> Vec<Family> {
        families_from(pii_slice_matrices::<Jet>)
    }

    pub fn vertex(&self) -> VertexConfig {
        stokes_vertex(self.families())
    }

    pub fn contour_graph(&self) -> ContourGraphModel {
        ContourGraphModel {
            dim: 2,
            chart_labels: self.chart_labels(),
            vertices: vec![self.vertex()],
        }
    }

    pub fn constraint_residual(&self, x: &[C64]) -> Result<f64> {
        Ok(product_residual(&pii_slice_matrices(x)?))
    }
}

impl ChartModel for PiiSlice {
    fn name(&self) -> &'static str {
        "pii-slice"
    }
    fn chart_labels(&self) -> Vec<String> {
        ["s1", "s3"].map(String::from).to_vec()
    }
    fn check_admissible(&self, x: &[C64]) -> Result<()> {
        require_away_from_zero(
            SAMPLE_MARGIN,
            &[("s1", x[0]), ("s3", x[1]), ("s1·s3 + 1", x[0] * x[1] + 1.0)],
        )
    }
}

fn k2() -> C64 {
    1.0 / C64::new(0.0, 2.0 * PI)
}

fn k4() -> C64 {
    1.0 / C64::new(0.0, 4.0 * PI)
}

/// Log-canonical form in `(λ, s1, s3, s5)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PiiEta;

impl TwoFormExpr for PiiEta {
    fn dim(&self) -> usize {
        4
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<TwoForm<S>> {
        let (l, s1, s3, s5) = (x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone());
        let k = k2();
        let mut f = TwoForm::zeros(4);
        f.add_term(1, 0, (s1.clone() * l.clone()).recip() * k);
        f.add_term(2, 0, -(l.clone() * s3.clone()).recip() * k);
        f.add_term(3, 0, (l * s5.clone()).recip() * k);
        f.add_term(2, 1, -(s3.clone() * s1.clone()).recip() * k);
        f.add_term(3, 1, (s1 * s5.clone()).recip() * k);
        f.add_term(3, 2, -(s3 * s5).recip() * k);
        Ok(f)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PiiTheta;

impl OneFormExpr for PiiTheta {
    fn dim(&self) -> usize {
        4
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let (l, s1, s3, s5) = (x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone());
        let k = k4();
        Ok(vec![
            (s5.clone() * s1.clone() / s3.clone()).ln()? * k / l.clone(),
            -(s3.clone() * l.clone() / s5.clone()).ln()? * k / s1.clone(),
            (s1.clone() * l.clone() / s5.clone()).ln()? * k / s3.clone(),
            -(s1 * l / s3).ln()? * k / s5,
        ])
    }
}

/// `ds1∧ds3 / (iπ(s1 s3 + 1))` on the slice.
#[derive(Clone, Copy, Debug, Default)]
pub struct PiiSliceEta;

impl TwoFormExpr for PiiSliceEta {
    fn dim(&self) -> usize {
        2
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<TwoForm<S>> {
        let mut f = TwoForm::zeros(2);
        let d = (x[0].clone() * x[1].clone() + C64::new(1.0, 0.0)) * C64::new(0.0, PI);
        f.add_term(0, 1, d.recip());
        Ok(f)
    }
}

/// `Log(s1 s3 + 1)/(2πi) · (ds3/s3 − ds1/s1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PiiSliceTheta;

impl OneFormExpr for PiiSliceTheta {
    fn dim(&self) -> usize {
        2
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let lg = (x[0].clone() * x[1].clone() + C64::new(1.0, 0.0)).ln()? * k2();
        Ok(vec![-lg.clone() / x[0].clone(), lg / x[1].clone()])
    }
}

pub fn pii_eta_closed_form(point: &[C64]) -> Result<TwoForm> {
    PiiEta.coeffs(point)
}

pub fn pii_theta_closed_form(point: &[C64]) -> Result<Vec<C64>> {
    PiiTheta.coeffs(point)
}

/// `e01 e23 − e02 e13 + e03 e12`; nonzero exactly when the form is nondegenerate.
pub fn pfaffian4(f: &TwoForm) -> C64 {
    f.get(0, 1) * f.get(2, 3) - f.get(0, 2) * f.get(1, 3) + f.get(0, 3) * f.get(1, 2)
}

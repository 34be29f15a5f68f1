//! Four-pole rank-two character variety of the sixth Painlevé equation.
//!
//! Chart `(λ1, λ2, λ3, s1, s3)` with `C_1 = U(s1)`, `C_2 = L(s2)`,
//! `C_3 = U(s3)`, `C_4 = L(s4)` (unipotent upper/lower) and
//! `Λ_j = diag(λ_j, 1/λ_j)`; `λ4, s2, s4` are fixed by `𝓜_1𝓜_2𝓜_3𝓜_4 = 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::jets::{Scalar, C64};
use crate::linalg::{OneFormExpr, TwoForm, TwoFormExpr};

use super::fuchsian::{exponent_pair, FuchsianCharVarModel, FuchsianData, FuchsianGeometry};
use super::{denominator, lower_unipotent, require_away_from_zero, upper_unipotent, ChartModel, SAMPLE_MARGIN};

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// `(λ4, s2, s4)`.
pub fn pvi_solve_constraint<S: Scalar>(l1: &S, l2: &S, l3: &S, s1: &S, s3: &S) -> Result<(S, S, S)> {
    let (l1, l2, l3, s1, s3) = (l1.clone(), l2.clone(), l3.clone(), s1.clone(), s3.clone());
    let q1 = l1.clone() * l1.clone() - one();
    let q2 = l2.clone() * l2.clone() - one();
    let q3 = l3.clone() * l3.clone() - one();
    let l4 = -(s3.clone() * l1.clone() * l2.clone() * q3.clone())
        / denominator("λ3·s1·(λ1² − 1)", l3.clone() * s1.clone() * q1.clone())?;
    let l12 = l1.clone() * l1.clone() * l2.clone() * l2.clone();
    let num = s3.clone() * l12.clone() * l3.clone() * l3.clone() - s3.clone() * l12 + l1.clone() * l1.clone() * s1.clone()
        - s1.clone();
    let s2 = num.clone()
        / denominator(
            "s3·s1·(λ3² − 1)(λ2² − 1)(λ1² − 1)",
            s3.clone() * s1.clone() * q3.clone() * q2 * q1.clone(),
        )?;
    let a = q1 * l3.clone() * s1;
    let b = s3 * l1 * l2;
    let f1 = a.clone() + b.clone() - b.clone() * l3.clone() * l3.clone();
    let f2 = a - b.clone() + b * l3.clone() * l3.clone();
    let s4 = -(num * l3.clone() * l3) / denominator("second companion denominator", f1 * f2)?;
    Ok((l4, s2, s4))
}

pub fn pvi_data<S: Scalar>(x: &[S]) -> Result<FuchsianData<S>> {
    let (l4, s2, s4) = pvi_solve_constraint(&x[0], &x[1], &x[2], &x[3], &x[4])?;
    Ok(FuchsianData {
        c: vec![
            upper_unipotent(x[3].clone()),
            lower_unipotent(s2),
            upper_unipotent(x[4].clone()),
            lower_unipotent(s4),
        ],
        l: vec![exponent_pair(&x[0])?, exponent_pair(&x[1])?, exponent_pair(&x[2])?, exponent_pair(&l4)?],
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Pvi;

impl Pvi {
    pub fn model(&self) -> FuchsianCharVarModel {
        FuchsianCharVarModel {
            name: "pvi",
            k: 4,
            r: 2,
            chart_labels: self.chart_labels(),
            chart: Arc::new(pvi_data),
            admissible: Arc::new(|x| Pvi.check_admissible(x)),
            geometry: FuchsianGeometry::regular(4),
        }
    }
}

impl ChartModel for Pvi {
    fn name(&self) -> &'static str {
        "pvi"
    }
    fn chart_labels(&self) -> Vec<String> {
        ["lambda1", "lambda2", "lambda3", "s1", "s3"].map(String::from).to_vec()
    }
    fn check_admissible(&self, x: &[C64]) -> Result<()> {
        let (l1, l2, l3, s1, s3) = (x[0], x[1], x[2], x[3], x[4]);
        require_away_from_zero(
            SAMPLE_MARGIN,
            &[
                ("lambda1", l1),
                ("lambda2", l2),
                ("lambda3", l3),
                ("lambda1 - 1", l1 - 1.0),
                ("lambda1 + 1", l1 + 1.0),
                ("lambda2 - 1", l2 - 1.0),
                ("lambda2 + 1", l2 + 1.0),
                ("lambda3 - 1", l3 - 1.0),
                ("lambda3 + 1", l3 + 1.0),
                ("s1", s1),
                ("s3", s3),
            ],
        )?;
        let (l4, s2, s4) = pvi_solve_constraint(&l1, &l2, &l3, &s1, &s3)?;
        let a = (l1 * l1 - 1.0) * l3 * s1;
        let b = s3 * l1 * l2;
        require_away_from_zero(
            SAMPLE_MARGIN,
            &[
                ("lambda4", l4),
                ("s2", s2),
                ("s4", s4),
                ("first companion factor", a + b - b * l3 * l3),
                ("second companion factor", a - b + b * l3 * l3),
            ],
        )
    }
}

fn k2() -> C64 {
    1.0 / C64::new(0.0, 2.0 * PI)
}

/// Closed-form vertex form in `(λ1, λ2, λ3, s1, s3)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PviEta;

impl TwoFormExpr for PviEta {
    fn dim(&self) -> usize {
        5
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<TwoForm<S>> {
        let (l1, l2, l3, s1, s3) = (x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone(), x[4].clone());
        let k = k2();
        let sq1 = l1.clone() * l1.clone();
        let sq3 = l3.clone() * l3.clone();
        let q1 = sq1.clone() - one();
        let q3 = sq3.clone() - one();
        let p1 = sq1.clone() + one();
        let p3 = sq3.clone() + one();
        let mut f = TwoForm::zeros(5);
        f.add_term(0, 1, p1.clone() / (l2.clone() * q1.clone() * l1.clone()) * k);
        f.add_term(
            0,
            2,
            (sq1.clone() * sq3.clone() + sq3.clone() + sq1 + one()) / (q3.clone() * l3.clone() * l1.clone() * q1.clone()) * k,
        );
        f.add_term(0, 3, -(l1.clone() * s1.clone()).recip() * k);
        f.add_term(0, 4, p1 / (l1 * s3.clone() * q1) * k);
        f.add_term(1, 2, -(p3.clone() / (l2.clone() * l3.clone() * q3.clone())) * k);
        f.add_term(1, 3, -(s1.clone() * l2.clone()).recip() * k);
        f.add_term(1, 4, -(s3.clone() * l2).recip() * k);
        f.add_term(2, 3, -(p3 / (s1.clone() * q3 * l3.clone())) * k);
        f.add_term(2, 4, -(s3.clone() * l3).recip() * k);
        f.add_term(3, 4, (s1 * s3).recip() * k);
        Ok(f)
    }
}

/// Potential of [`PviEta`] with principal logarithms.
#[derive(Clone, Copy, Debug, Default)]
pub struct PviTheta;

impl OneFormExpr for PviTheta {
    fn dim(&self) -> usize {
        5
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let (l1, l2, l3, s1, s3) = (x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone(), x[4].clone());
        let k = k2();
        let sq1 = l1.clone() * l1.clone();
        let sq3 = l3.clone() * l3.clone();
        let q3 = sq3.clone() - one();
        let t2 = (sq3 * (s1.clone() * s3.clone()).ln()? + (s1.clone() / s3.clone()).ln()?) / (l3.clone() * q3.clone()) * k;
        let t3 = -(s3.ln()? / s1.clone()) * k;
        let t1 = (s3.clone() * s1.clone() * q3.clone() / l3.clone()).ln()? / l2.clone() * k;
        let t0 = -(sq1.clone() * (s3.clone() * q3.clone() * l2.clone() / (s1.clone() * l3.clone())).ln()?
            + (s3 * s1 * l2 * q3 / l3).ln()?)
            / ((sq1 - one()) * l1)
            * k;
        Ok(vec![t0, t1, t2, t3, S::zero()])
    }
}

pub fn pvi_eta_closed_form(point: &[C64]) -> Result<TwoForm> {
    PviEta.coeffs(point)
}

pub fn pvi_theta_closed_form(point: &[C64]) -> Result<Vec<C64>> {
    PviTheta.coeffs(point)
}

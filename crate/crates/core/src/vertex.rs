//! The vertex two-form of a contour graph.
//!
//! Each vertex is a counterclockwise fan of incident jump families. After
//! normalising every arc to point outward, the fan carries matrices
//! `M_1, …, M_n` with `M_1⋯M_n = 1` and Maurer–Cartan forms `Ξ_ℓ`, and
//!
//! ```text
//! η_v = −1/(4πi) Σ_{ℓ=2..n} Σ_{m<ℓ} Tr(M_[1:m−1] Ξ_m M_[m:ℓ−1] ∧ Ξ_ℓ M_[ℓ:n])
//! ```
//!
//! with empty products equal to the identity.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jets::{Jet, Scalar, C64};
use crate::linalg::{
    exterior_derivative_2form, family_with_maurer_cartan, ordered_product, trace_wedge, Family, Matrix,
    MatrixOneForm, TwoForm, TwoFormField,
};

/// Largest `‖M_1⋯M_n − 1‖` at which the vertex form is still evaluated.
pub const NO_MONODROMY_GATE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Outward,
    Inward,
}

impl Orientation {
    pub fn sign(self) -> i32 {
        match self {
            Orientation::Outward => 1,
            Orientation::Inward => -1,
        }
    }
}

#[derive(Clone)]
pub struct IncidentArc {
    pub label: String,
    /// Jump limit at the vertex as a function of the chart.
    pub family: Family,
    pub orientation: Orientation,
}

impl IncidentArc {
    pub fn new(label: impl Into<String>, family: Family, orientation: Orientation) -> Self {
        IncidentArc {
            label: label.into(),
            family,
            orientation,
        }
    }

    pub fn outward(label: impl Into<String>, family: Family) -> Self {
        Self::new(label, family, Orientation::Outward)
    }

    pub fn inward(label: impl Into<String>, family: Family) -> Self {
        Self::new(label, family, Orientation::Inward)
    }
}

impl std::fmt::Debug for IncidentArc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IncidentArc")
            .field("label", &self.label)
            .field("orientation", &self.orientation)
            .finish()
    }
}

/// Arcs incident to a vertex, enumerated counterclockwise.
#[derive(Clone, Debug)]
pub struct VertexConfig {
    pub label: String,
    pub arcs: Vec<IncidentArc>,
}

impl VertexConfig {
    pub fn new(label: impl Into<String>, arcs: Vec<IncidentArc>) -> Self {
        VertexConfig {
            label: label.into(),
            arcs,
        }
    }

    /// Same fan enumerated from arc `k` onward.
    pub fn rotated(&self, k: usize) -> Self {
        let mut arcs = self.arcs.clone();
        let len = arcs.len().max(1);
        arcs.rotate_left(k % len);
        VertexConfig {
            label: self.label.clone(),
            arcs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContourGraphModel {
    pub dim: usize,
    pub chart_labels: Vec<String>,
    pub vertices: Vec<VertexConfig>,
}

/// Normalised fan: one `(M_ℓ, Ξ_ℓ)` per arc, all oriented outward.
pub type Fan<S> = Vec<(Matrix<S>, MatrixOneForm<S>)>;

/// Orient every arc outward: inward arcs become `(M⁻¹, −M⁻¹ΞM)`.
pub fn normalize_vertex<S: Scalar>(v: &VertexConfig, point: &[C64]) -> Result<Fan<S>> {
    v.arcs
        .iter()
        .enumerate()
        .map(|(k, arc)| {
            let label = format!("vertex {} arc {k} ({})", v.label, arc.label);
            let (m, xi) = family_with_maurer_cartan::<S>(&arc.family, point).map_err(|e| e.within(&label))?;
            match arc.orientation {
                Orientation::Outward => Ok((m, xi)),
                Orientation::Inward => {
                    let inv = m.inverse().map_err(|e| e.within(&label))?;
                    let xi = xi.conjugate(&inv, &m).neg();
                    Ok((inv, xi))
                }
            }
        })
        .collect()
}

fn rank_of<S: Scalar>(fan: &Fan<S>) -> Result<usize> {
    let r = fan
        .first()
        .map(|(m, _)| m.dim())
        .ok_or_else(|| Error::Usage("vertex has no incident arcs".into()))?;
    if fan.iter().any(|(m, _)| m.dim() != r) {
        return Err(Error::Usage("incident jumps have different matrix sizes".into()));
    }
    Ok(r)
}

fn product_residual<S: Scalar>(fan: &Fan<S>) -> Result<f64> {
    let r = rank_of(fan)?;
    let ms: Vec<Matrix<S>> = fan.iter().map(|(m, _)| m.clone()).collect();
    Ok((&ordered_product(&ms, 0, ms.len(), r).values() - &Matrix::identity(r)).max_abs())
}

fn gate<S: Scalar>(v: &VertexConfig, fan: &Fan<S>) -> Result<()> {
    let residual = product_residual(fan)?;
    if residual.is_nan() || residual > NO_MONODROMY_GATE {
        return Err(Error::Constraint {
            residual,
            tolerance: NO_MONODROMY_GATE,
            context: format!("vertex {}: local no-monodromy condition", v.label),
        });
    }
    Ok(())
}

/// `‖M_1⋯M_n − 1‖` after normalisation.
pub fn check_no_monodromy(v: &VertexConfig, point: &[C64]) -> Result<f64> {
    product_residual(&normalize_vertex::<C64>(v, point)?)
}

/// `max_i ‖Σ_j M_[1:j−1] (Ξ_j)_i M_[j:n]‖`; refused off the constraint set.
pub fn check_sum_rule(v: &VertexConfig, point: &[C64]) -> Result<f64> {
    let fan = normalize_vertex::<C64>(v, point)?;
    gate(v, &fan)?;
    let r = rank_of(&fan)?;
    let ms: Vec<Matrix> = fan.iter().map(|(m, _)| m.clone()).collect();
    let n = point.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut acc = Matrix::<C64>::zeros(r);
        for (j, (_, xi)) in fan.iter().enumerate() {
            let term = &(&ordered_product(&ms, 0, j, r) * &xi.coeffs[i]) * &ordered_product(&ms, j, ms.len(), r);
            acc = &acc + &term;
        }
        worst = worst.max(acc.max_abs());
    }
    Ok(worst)
}

/// Vertex form of an already normalised, all-outward fan in `n` chart directions.
pub fn eta_from_fan<S: Scalar>(fan: &Fan<S>, n: usize) -> Result<TwoForm<S>> {
    let r = rank_of(fan)?;
    let ms: Vec<Matrix<S>> = fan.iter().map(|(m, _)| m.clone()).collect();
    let count = ms.len();
    let mut eta = TwoForm::zeros(n);
    for l in 1..count {
        let tail = ordered_product(&ms, l, count, r);
        for m in 0..l {
            let head = ordered_product(&ms, 0, m, r);
            let mid = ordered_product(&ms, m, l, r);
            eta = eta.add(&trace_wedge(&head, &fan[m].1, &mid, &fan[l].1, &tail)?);
        }
    }
    Ok(eta.scale(-1.0 / C64::new(0.0, 4.0 * PI)))
}

fn eta_vertex_at<S: Scalar>(v: &VertexConfig, point: &[C64]) -> Result<TwoForm<S>> {
    let fan = normalize_vertex::<S>(v, point)?;
    gate(v, &fan)?;
    eta_from_fan(&fan, point.len())
}

pub fn eta_vertex(v: &VertexConfig, point: &[C64]) -> Result<TwoForm> {
    eta_vertex_at::<C64>(v, point)
}

/// Vertex form with first-order jet coefficients.
pub fn eta_vertex_jet(v: &VertexConfig, point: &[C64]) -> Result<TwoForm<Jet>> {
    eta_vertex_at::<Jet>(v, point)
}

fn eta_total_at<S: Scalar>(model: &ContourGraphModel, point: &[C64]) -> Result<TwoForm<S>> {
    if point.len() != model.dim {
        return Err(Error::Usage(format!(
            "chart point has {} coordinates, model expects {}",
            point.len(),
            model.dim
        )));
    }
    let parts: Vec<TwoForm<S>> = model
        .vertices
        .par_iter()
        .map(|v| eta_vertex_at::<S>(v, point))
        .collect::<Result<_>>()?;
    Ok(parts.iter().fold(TwoForm::zeros(model.dim), |acc, p| acc.add(p)))
}

/// Sum of the vertex forms over all vertices.
pub fn eta_total(model: &ContourGraphModel, point: &[C64]) -> Result<TwoForm> {
    eta_total_at::<C64>(model, point)
}

impl TwoFormField for ContourGraphModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, point: &[C64]) -> Result<TwoForm> {
        eta_total_at::<C64>(self, point)
    }
    fn eval_jet(&self, point: &[C64]) -> Result<TwoForm<Jet>> {
        eta_total_at::<Jet>(self, point)
    }
}

/// Max-norm of the exterior derivative of `eta_total`.
pub fn check_eta_closed(model: &ContourGraphModel, point: &[C64]) -> Result<f64> {
    Ok(exterior_derivative_2form(model, point)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::TWO_PI_I;
    use crate::linalg::{constant_family, family, inverted, maurer_cartan};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar(f: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static) -> Family {
        family(move |x| Ok(Matrix::diag(vec![f(x)?])))
    }

    fn generic2() -> Family {
        family(|x| {
            let one = Jet::constant(c(1.0, 0.0));
            Matrix::from_rows(vec![
                vec![x[0].clone() + c(2.0, 0.0), x[1].clone() * x[0].clone()],
                vec![x[1].exp() - one, x[0].clone() * x[0].clone() + x[1].clone() + c(1.5, 0.0)],
            ])
        })
    }

    #[test]
    fn identity_arc_normalizes_to_trivial_pair() {
        let v = VertexConfig::new("v", vec![IncidentArc::outward("a", constant_family(Matrix::identity(2)))]);
        let fan = normalize_vertex::<C64>(&v, &[c(0.1, 0.0)]).unwrap();
        assert_eq!(fan[0].0, Matrix::identity(2));
        assert_eq!(fan[0].1.coeffs[0].max_abs(), 0.0);
    }

    #[test]
    fn inward_scalar_exponential() {
        let f = scalar(|x| Ok((x[0].clone() * TWO_PI_I).exp()));
        let v = VertexConfig::new("v", vec![IncidentArc::inward("a", f)]);
        let theta = c(0.3, 0.1);
        let fan = normalize_vertex::<C64>(&v, &[theta]).unwrap();
        assert!((*fan[0].0.get(0, 0) - (-TWO_PI_I * theta).exp()).norm() < 1e-14);
        assert!((*fan[0].1.coeffs[0].get(0, 0) + TWO_PI_I).norm() < 1e-14);
    }

    #[test]
    fn inward_matches_inverted_family() {
        let f = generic2();
        let p = [c(0.3, -0.2), c(0.5, 0.4)];
        let v = VertexConfig::new("v", vec![IncidentArc::inward("a", f.clone())]);
        let fan = normalize_vertex::<C64>(&v, &p).unwrap();
        let direct = maurer_cartan(&inverted(&f), &p).unwrap();
        for i in 0..2 {
            assert!((&fan[0].1.coeffs[i] - &direct.coeffs[i]).max_abs() < 1e-12);
        }
    }

    #[test]
    fn singular_arc_is_named() {
        let f = constant_family(Matrix::zeros(2));
        let v = VertexConfig::new("v0", vec![IncidentArc::outward("bad", f)]);
        match normalize_vertex::<C64>(&v, &[c(1.0, 0.0)]) {
            Err(Error::Singular { context, .. }) => assert!(context.contains("arc 0")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn pair_fan_telescopes() {
        let f = generic2();
        let v = VertexConfig::new(
            "v",
            vec![IncidentArc::outward("a", f.clone()), IncidentArc::outward("b", inverted(&f))],
        );
        let p = [c(0.3, -0.2), c(0.5, 0.4)];
        assert!(check_no_monodromy(&v, &p).unwrap() < 1e-14);
        assert!(check_sum_rule(&v, &p).unwrap() < 1e-12);
        // The same arc traversed in and out is the same statement.
        let w = VertexConfig::new(
            "w",
            vec![IncidentArc::outward("a", f.clone()), IncidentArc::inward("b", f)],
        );
        assert!(check_sum_rule(&w, &p).unwrap() < 1e-12);
    }

    #[test]
    fn sum_rule_refuses_off_constraint() {
        let f = generic2();
        let g = inverted(&f);
        let perturbed = family(move |x| {
            let mut m = g(x)?;
            let e = m.get(0, 0).clone() + c(1e-3, 0.0);
            m.set(0, 0, e);
            Ok(m)
        });
        let v = VertexConfig::new(
            "v",
            vec![IncidentArc::outward("a", f), IncidentArc::outward("b", perturbed)],
        );
        let p = [c(0.3, -0.2), c(0.5, 0.4)];
        match check_sum_rule(&v, &p) {
            Err(Error::Constraint { residual, .. }) => assert!(residual > 1e-4 && residual < 1e-2),
            other => panic!("expected constraint error, got {other:?}"),
        }
        assert!(eta_vertex(&v, &p).is_err());
    }

    #[test]
    fn constant_fan_has_zero_eta() {
        let a = Matrix::from_rows(vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]).unwrap();
        let ainv = a.inverse().unwrap();
        let v = VertexConfig::new(
            "v",
            vec![IncidentArc::outward("a", constant_family(a)), IncidentArc::outward("b", constant_family(ainv))],
        );
        let eta = eta_vertex(&v, &[c(0.1, 0.0), c(0.2, 0.0)]).unwrap();
        assert_eq!(eta.max_abs(), 0.0);
    }

    /// Three scalar rays `e^{2πiθ_k}` with `θ_3 = −θ_1 − θ_2`: the fan form is
    /// `−1/(4πi) Σ_{m<ℓ} (2πi)² (dθ_m∧dθ_ℓ)` summed over pairs.
    #[test]
    fn abelian_fan_matches_hand_computation() {
        let ray = |k: usize| {
            scalar(move |x| {
                let th = match k {
                    0 => x[0].clone(),
                    1 => x[1].clone(),
                    _ => -(x[0].clone() + x[1].clone()),
                };
                Ok((th * TWO_PI_I).exp())
            })
        };
        let v = VertexConfig::new("z0", (0..3).map(|k| IncidentArc::outward(format!("r{k}"), ray(k))).collect());
        let eta = eta_vertex(&v, &[c(0.21, 0.05), c(-0.4, 0.1)]).unwrap();
        // dθ1∧dθ2 + dθ1∧dθ3 + dθ2∧dθ3 reduces to dθ1∧dθ2.
        let expected = -(TWO_PI_I * TWO_PI_I) / c(0.0, 4.0 * PI);
        assert!((eta.get(0, 1) - expected).norm() < 1e-12);
    }

    #[test]
    fn jet_and_value_paths_agree() {
        let f = generic2();
        let v = VertexConfig::new(
            "v",
            vec![
                IncidentArc::outward("a", f.clone()),
                IncidentArc::outward("b", constant_family(Matrix::identity(2))),
                IncidentArc::inward("c", f),
            ],
        );
        let p = [c(0.3, -0.2), c(0.5, 0.4)];
        let a = eta_vertex(&v, &p).unwrap();
        let b = eta_vertex_jet(&v, &p).unwrap().values();
        assert!(a.max_abs_diff(&b) < 1e-14);
        let model = ContourGraphModel {
            dim: 2,
            chart_labels: vec!["x".into(), "y".into()],
            vertices: vec![v.clone()],
        };
        assert!(eta_total(&model, &p).unwrap().max_abs_diff(&a) == 0.0);
    }
}

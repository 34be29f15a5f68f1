//! Local potentials of closed two-forms by the homotopy operator along
//! segments from a base point, and checks of `δθ = η`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jets::{seed_chart, Jet, C64};
use crate::linalg::{exterior_derivative_1form, exterior_derivative_2form, OneFormField, TwoForm, TwoFormField};
use crate::models::ChartModel;
use crate::quadrature::gauss_legendre;

pub const DEFAULT_QUAD_ORDER: usize = 64;

/// Points sampled along a segment for the admissibility test.
pub const SEGMENT_SAMPLES: usize = 256;

/// Largest `‖dη‖` accepted before building a potential.
pub const CLOSEDNESS_PRECONDITION: f64 = 1e-6;

pub type Admissibility = Arc<dyn Fn(&[C64]) -> Result<()> + Send + Sync>;

/// Base point together with the admissibility predicate of the chart.
#[derive(Clone)]
pub struct StarChart {
    pub base: Vec<C64>,
    pub admissible: Admissibility,
}

impl std::fmt::Debug for StarChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StarChart").field("base", &self.base).finish_non_exhaustive()
    }
}

impl StarChart {
    pub fn new(base: Vec<C64>, admissible: Admissibility) -> Result<Self> {
        admissible(&base).map_err(|e| Error::Admissibility(format!("base point is not admissible: {e}")))?;
        Ok(StarChart { base, admissible })
    }

    /// Chart with no singular locus.
    pub fn unrestricted(base: Vec<C64>) -> Self {
        StarChart { base, admissible: Arc::new(|_| Ok(())) }
    }

    pub fn for_model<M: ChartModel + Clone + 'static>(model: &M, base: Vec<C64>) -> Result<Self> {
        let m = model.clone();
        StarChart::new(base, Arc::new(move |x| m.check_admissible(x)))
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// The segment `x₀ → x` stays admissible at every sample point.
    pub fn check_segment(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Usage(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim()
            )));
        }
        for s in 0..=SEGMENT_SAMPLES {
            let t = s as f64 / SEGMENT_SAMPLES as f64;
            let p: Vec<C64> = self.base.iter().zip(x).map(|(b, y)| b + (y - b) * t).collect();
            if let Err(e) = (self.admissible)(&p) {
                return Err(Error::Path(format!(
                    "segment from the base point leaves the admissible set at t = {t:.4} ({e}); choose a different base point"
                )));
            }
        }
        Ok(())
    }
}

fn check_closed(eta: &dyn TwoFormField, x: &[C64]) -> Result<()> {
    let defect = exterior_derivative_2form(eta, x)?.max_abs();
    if !(defect < CLOSEDNESS_PRECONDITION) {
        return Err(Error::Validity(format!(
            "two-form is not closed at the point (|d eta| = {defect:.3e})"
        )));
    }
    Ok(())
}

fn node_point(chart: &StarChart, x: &[C64], t: f64) -> Vec<C64> {
    chart.base.iter().zip(x).map(|(b, y)| b + (y - b) * t).collect()
}

/// `θ_i(x) = Σ_j (x − x₀)_j ∫₀¹ t η_{ji}(x₀ + t(x − x₀)) dt`.
pub fn homotopy_potential(eta: &dyn TwoFormField, chart: &StarChart, x: &[C64], quad_order: usize) -> Result<Vec<C64>> {
    chart.check_segment(x)?;
    check_closed(eta, x)?;
    homotopy_values(eta, chart, x, quad_order)
}

fn homotopy_values(eta: &dyn TwoFormField, chart: &StarChart, x: &[C64], quad_order: usize) -> Result<Vec<C64>> {
    let n = chart.dim();
    let dx: Vec<C64> = chart.base.iter().zip(x).map(|(b, y)| y - b).collect();
    let rule = gauss_legendre(quad_order)?;
    let parts: Vec<Vec<C64>> = rule
        .par_iter()
        .map(|&(u, w)| {
            let t = 0.5 * (u + 1.0);
            let e = eta.eval(&node_point(chart, x, t))?;
            let weight = 0.5 * w * t;
            Ok((0..n).map(|i| (0..n).map(|j| dx[j] * e.get(j, i)).sum::<C64>() * weight).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..n).map(|i| parts.iter().map(|p| p[i]).sum()).collect())
}

/// Same as [`homotopy_potential`] with first derivatives in `x`.
pub fn homotopy_potential_jet(eta: &dyn TwoFormField, chart: &StarChart, x: &[C64], quad_order: usize) -> Result<Vec<Jet>> {
    chart.check_segment(x)?;
    let n = chart.dim();
    let xs = seed_chart(x, 1)?;
    let dx: Vec<Jet> = xs.iter().zip(&chart.base).map(|(y, b)| y.clone() - *b).collect();
    let rule = gauss_legendre(quad_order)?;
    let parts: Vec<Vec<Jet>> = rule
        .par_iter()
        .map(|&(u, w)| {
            let t = 0.5 * (u + 1.0);
            let e: TwoForm<Jet> = eta.eval_jet(&node_point(chart, x, t))?;
            let weight = C64::new(0.5 * w * t, 0.0);
            Ok((0..n)
                .map(|i| {
                    let mut acc = Jet::constant(C64::new(0.0, 0.0));
                    for (j, d) in dx.iter().enumerate() {
                        acc += d.clone() * e.get(j, i).scale_derivatives(t);
                    }
                    acc * weight
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..n)
        .map(|i| {
            parts
                .iter()
                .fold(Jet::constant(C64::new(0.0, 0.0)), |acc, p| acc + p[i].clone())
        })
        .collect())
}

/// The homotopy potential as a one-form field.
#[derive(Clone)]
pub struct HomotopyPotential {
    pub eta: Arc<dyn TwoFormField>,
    pub chart: StarChart,
    pub quad_order: usize,
}

impl HomotopyPotential {
    pub fn new(eta: Arc<dyn TwoFormField>, chart: StarChart, quad_order: usize) -> Result<Self> {
        if eta.dim() != chart.dim() {
            return Err(Error::Usage("two-form and chart dimensions differ".into()));
        }
        Ok(HomotopyPotential { eta, chart, quad_order })
    }
}

impl OneFormField for HomotopyPotential {
    fn dim(&self) -> usize {
        self.chart.dim()
    }
    fn eval(&self, point: &[C64]) -> Result<Vec<C64>> {
        homotopy_potential(self.eta.as_ref(), &self.chart, point, self.quad_order)
    }
    fn eval_jet(&self, point: &[C64]) -> Result<Vec<Jet>> {
        homotopy_potential_jet(self.eta.as_ref(), &self.chart, point, self.quad_order)
    }
}

/// `max_{i<j} |∂_iθ_j − ∂_jθ_i − η_{ij}|`.
pub fn verify_potential(theta: &dyn OneFormField, eta: &dyn TwoFormField, x: &[C64]) -> Result<f64> {
    Ok(exterior_derivative_1form(theta, x)?.max_abs_diff(&eta.eval(x)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialComparison {
    /// `‖δ(θ_a − θ_b)‖`.
    pub defect: f64,
    /// `θ_a − θ_b` at the point.
    pub difference: Vec<C64>,
}

/// Two potentials of one form differ by a closed form.
pub fn compare_potentials(a: &dyn OneFormField, b: &dyn OneFormField, x: &[C64]) -> Result<PotentialComparison> {
    let (da, db) = (exterior_derivative_1form(a, x)?, exterior_derivative_1form(b, x)?);
    let difference = a.eval(x)?.iter().zip(b.eval(x)?).map(|(p, q)| p - q).collect();
    Ok(PotentialComparison { defect: da.max_abs_diff(&db), difference })
}

/// `|δθ − η|` for the homotopy potential at each node count in `orders`.
pub fn potential_convergence(eta: Arc<dyn TwoFormField>, chart: &StarChart, x: &[C64], orders: &[usize]) -> Result<Vec<(usize, f64)>> {
    orders
        .iter()
        .map(|&q| {
            let pot = HomotopyPotential::new(eta.clone(), chart.clone(), q)?;
            Ok((q, verify_potential(&pot, eta.as_ref(), x)?))
        })
        .collect()
}

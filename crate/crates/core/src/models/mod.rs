//! Concrete monodromy manifolds: charts, constraint solvers, contour graphs
//! and closed-form vertex forms.

pub mod fuchsian;
pub mod pii;
pub mod pvi;
pub mod scalar;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::jets::{Scalar, C64};
use crate::linalg::Matrix;

pub use fuchsian::{fuchsian_eta_closed_form, FuchsianCharVarModel, FuchsianData, FuchsianGeometry};
pub use pii::{pii_solve_constraint, stokes_eta_generic, Pii, PiiSlice};
pub use pvi::{pvi_solve_constraint, Pvi};
pub use scalar::ScalarFuchsianModel;

/// Distance from singular loci below which sampled points are rejected.
pub const SAMPLE_MARGIN: f64 = 1e-2;

/// Smallest denominator modulus accepted by the constraint solvers.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

pub type SampleRng = Xoshiro256PlusPlus;

pub fn sample_rng(seed: u64) -> SampleRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Radius uniform in `[0.3, 2]`, argument uniform in `[0, 2π)`.
pub fn sample_annulus(rng: &mut SampleRng) -> C64 {
    let r = rng.random_range(0.3..2.0);
    let t = rng.random_range(0.0..2.0 * PI);
    C64::from_polar(r, t)
}

/// Draw until `accept` succeeds, giving up after a fixed number of tries.
pub fn rejection_sample<T>(
    rng: &mut SampleRng,
    mut draw: impl FnMut(&mut SampleRng) -> T,
    mut accept: impl FnMut(&T) -> bool,
) -> Result<T> {
    for _ in 0..100_000 {
        let candidate = draw(rng);
        if accept(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::Domain("rejection sampler found no admissible point".into()))
}

/// Refuse when any named quantity is within `margin` of zero.
pub fn require_away_from_zero(margin: f64, items: &[(&str, C64)]) -> Result<()> {
    for (name, v) in items {
        if !(v.norm() >= margin) {
            return Err(Error::Admissibility(format!(
                "{name} = {v} is within {margin:.0e} of a singular locus"
            )));
        }
    }
    Ok(())
}

pub fn denominator<S: Scalar>(name: &str, d: S) -> Result<S> {
    require_away_from_zero(DENOMINATOR_FLOOR, &[(name, d.value())])?;
    Ok(d)
}

pub fn upper_unipotent<S: Scalar>(s: S) -> Matrix<S> {
    Matrix::from_fn(2, |i, j| match (i, j) {
        (0, 1) => s.clone(),
        (a, b) if a == b => S::one(),
        _ => S::zero(),
    })
}

pub fn lower_unipotent<S: Scalar>(s: S) -> Matrix<S> {
    Matrix::from_fn(2, |i, j| match (i, j) {
        (1, 0) => s.clone(),
        (a, b) if a == b => S::one(),
        _ => S::zero(),
    })
}

/// `diag(λ, 1/λ)`.
pub fn diag_pair<S: Scalar>(lambda: S) -> Matrix<S> {
    let inv = lambda.recip();
    Matrix::diag(vec![lambda, inv])
}

/// A model whose points are plain chart coordinates.
pub trait ChartModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn chart_labels(&self) -> Vec<String>;
    fn dim(&self) -> usize {
        self.chart_labels().len()
    }
    /// Admissibility error when `x` is near a singular locus.
    fn check_admissible(&self, x: &[C64]) -> Result<()>;
    fn sample(&self, rng: &mut SampleRng) -> Result<Vec<C64>> {
        let n = self.dim();
        rejection_sample(
            rng,
            |r| (0..n).map(|_| sample_annulus(r)).collect::<Vec<_>>(),
            |x| self.check_admissible(x).is_ok(),
        )
    }
}

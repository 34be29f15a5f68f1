//! Scalar Riemann–Hilbert problem with jumps `(z − a_k)^{−θ_k}` on small
//! counterclockwise circles around the poles and `e^{−2πiθ_k}` on segments
//! from the circles to a common base point `z₀`.
//!
//! Chart `(a_1, …, a_n, θ_1, …, θ_{n−1})`; `θ_n = −Σ_{k<n} θ_k`. The junction
//! `β_k = a_k + ρ_k e^{iψ_k}` moves rigidly with `a_k`. All logarithms are
//! principal; random models avoid configurations where the contour crosses
//! the principal cut `{a_j − t : t ≥ 0}` of a pole.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::jets::{Jet, Scalar, C64, I, TWO_PI_I};
use crate::linalg::{family, Analytic, Family, Matrix, OneFormExpr, OneFormField, TwoForm};
use crate::vertex::{ContourGraphModel, IncidentArc, VertexConfig};

use super::fuchsian::ccw_fan;
use super::{rejection_sample, SampleRng, SAMPLE_MARGIN};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFuchsianModel {
    pub a: Vec<C64>,
    /// Free exponents `θ_1, …, θ_{n−1}`.
    pub theta: Vec<C64>,
    pub z0: C64,
    pub radii: Vec<f64>,
    /// Direction of `β_k` seen from `a_k`, in `(−π, π]`.
    pub psi: Vec<f64>,
}

/// All `n` exponents from the chart; the last one closes `Σθ = 0`.
pub fn theta_full<S: Scalar>(x: &[S], n: usize) -> Vec<S> {
    let mut t: Vec<S> = x[n..2 * n - 1].to_vec();
    let sum = t.iter().cloned().fold(S::zero(), |acc, v| acc + v);
    t.push(-sum);
    t
}

/// Pull a one-form in `(a_1..a_n, θ_1..θ_n)` back to the chart.
fn pullback_one<S: Scalar>(ca: Vec<S>, ct: Vec<S>) -> Vec<S> {
    let last = ct.last().cloned().unwrap_or_else(S::zero);
    let mut out = ca;
    out.extend(ct[..ct.len() - 1].iter().map(|c| c.clone() - last.clone()));
    out
}

fn point_ray_distance(p: C64, apex: C64) -> f64 {
    if p.re <= apex.re {
        (p.im - apex.im).abs()
    } else {
        (p - apex).norm()
    }
}

/// Distance between a segment and the cut `{apex − t : t ≥ 0}`; zero on crossing.
fn segment_cut_clearance(p: C64, q: C64, apex: C64) -> f64 {
    let dy = q.im - p.im;
    if dy != 0.0 {
        let s = (apex.im - p.im) / dy;
        if (0.0..=1.0).contains(&s) && p.re + s * (q.re - p.re) <= apex.re {
            return 0.0;
        }
    }
    let d = q - p;
    let t = (((apex - p) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    point_ray_distance(p, apex)
        .min(point_ray_distance(q, apex))
        .min((apex - (p + d * t)).norm())
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let t = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

impl ScalarFuchsianModel {
    pub fn new(a: Vec<C64>, theta: Vec<C64>, z0: C64, radii: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        let n = a.len();
        if n < 2 || theta.len() != n - 1 || radii.len() != n || psi.len() != n {
            return Err(Error::Usage(
                "scalar model needs n >= 2 poles, n - 1 free exponents, n radii and n directions".into(),
            ));
        }
        let m = ScalarFuchsianModel { a, theta, z0, radii, psi };
        m.check_admissible(&m.point())?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn point(&self) -> Vec<C64> {
        self.a.iter().chain(&self.theta).copied().collect()
    }

    pub fn with_point(&self, x: &[C64]) -> Self {
        let n = self.n();
        ScalarFuchsianModel {
            a: x[..n].to_vec(),
            theta: x[n..].to_vec(),
            ..self.clone()
        }
    }

    pub fn chart_labels(&self) -> Vec<String> {
        let n = self.n();
        (1..=n)
            .map(|k| format!("a{k}"))
            .chain((1..n).map(|k| format!("theta{k}")))
            .collect()
    }

    pub fn dim(&self) -> usize {
        2 * self.n() - 1
    }

    /// `Log(β_k − a_k) = ln ρ_k + iψ_k`, constant on the chart.
    pub fn junction_log(&self, k: usize) -> C64 {
        C64::new(self.radii[k].ln(), self.psi[k])
    }

    pub fn beta(&self, x: &[C64], k: usize) -> C64 {
        x[k] + C64::from_polar(self.radii[k], self.psi[k])
    }

    /// Pole labels in counterclockwise order of their segments around `z₀`.
    pub fn ccw_order(&self, x: &[C64]) -> Vec<usize> {
        let n = self.n();
        let angle = |k: usize| (self.beta(x, k) - self.z0).arg().rem_euclid(2.0 * PI);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| angle(i).total_cmp(&angle(j)));
        order
    }

    pub fn check_admissible(&self, x: &[C64]) -> Result<()> {
        let n = self.n();
        if x.len() != self.dim() {
            return Err(Error::Usage(format!(
                "scalar chart point has {} coordinates, expected {}",
                x.len(),
                self.dim()
            )));
        }
        let bad = |msg: String| Err(Error::Admissibility(msg));
        let margin = SAMPLE_MARGIN;
        for k in 0..n {
            if !(self.radii[k] > 0.0) || !(self.psi[k] > -PI && self.psi[k] <= PI) {
                return bad(format!("pole {}: radius must be positive and direction in (-pi, pi]", k + 1));
            }
            if PI - self.psi[k] < margin {
                return bad(format!("junction of pole {} lies on its own branch cut", k + 1));
            }
            let (a, b) = (x[k], self.beta(x, k));
            if (self.z0 - a).norm() <= self.radii[k] + margin {
                return bad(format!("z0 is inside the disk of pole {}", k + 1));
            }
            for j in 0..n {
                if j == k {
                    continue;
                }
                if j < k && (x[j] - a).norm() <= self.radii[j] + self.radii[k] + margin {
                    return bad(format!("disks {} and {} overlap", j + 1, k + 1));
                }
                if segment_distance(x[j], b, self.z0) <= self.radii[j] + margin {
                    return bad(format!("segment of pole {} meets disk {}", k + 1, j + 1));
                }
                if segment_cut_clearance(a, b, x[j]) < margin || segment_cut_clearance(b, self.z0, x[j]) < margin {
                    return bad(format!("contour of pole {} crosses the branch cut of pole {}", k + 1, j + 1));
                }
            }
            if segment_cut_clearance(b, self.z0, a) < margin {
                return bad(format!("segment of pole {} crosses its own branch cut", k + 1));
            }
            for s in 1..=64 {
                let q = b + (self.z0 - b) * (s as f64 / 64.0);
                if (q - a).norm() < self.radii[k] {
                    return bad(format!("segment of pole {} re-enters its disk", k + 1));
                }
            }
        }
        let order = self.ccw_order(x);
        for w in order.windows(2) {
            let gap = (self.beta(x, w[1]) - self.z0).arg() - (self.beta(x, w[0]) - self.z0).arg();
            if gap.abs() < margin {
                return bad(format!("poles {} and {} lie on the same ray from z0", w[0] + 1, w[1] + 1));
            }
        }
        Ok(())
    }

    /// Random model with `n` poles left of `z₀ = 3`, labels counterclockwise
    /// around `z₀` and junctions facing `z₀`.
    pub fn sample(n: usize, rng: &mut SampleRng) -> Result<Self> {
        if n < 2 {
            return Err(Error::Usage("scalar model needs at least two poles".into()));
        }
        let z0 = C64::new(3.0, 0.0);
        rejection_sample(
            rng,
            |r| {
                let mut a: Vec<C64> = (0..n)
                    .map(|_| C64::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)))
                    .collect();
                a.sort_by(|p, q| (p - z0).arg().rem_euclid(2.0 * PI).total_cmp(&(q - z0).arg().rem_euclid(2.0 * PI)));
                let theta = (0..n - 1)
                    .map(|_| C64::new(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)))
                    .collect();
                let radii = (0..n).map(|_| r.random_range(0.1..0.25)).collect();
                let psi = a.iter().map(|ak| (z0 - ak).arg()).collect();
                ScalarFuchsianModel { a, theta, z0, radii, psi }
            },
            |m| {
                let x = m.point();
                m.check_admissible(&x).is_ok() && m.ccw_order(&x).iter().enumerate().all(|(i, &j)| i == j)
            },
        )
    }

    fn scalar_family(f: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static) -> Family {
        family(move |x| Ok(Matrix::diag(vec![f(x)?])))
    }

    fn segment_family(&self, k: usize) -> Family {
        let n = self.n();
        Self::scalar_family(move |x| Ok((theta_full(x, n)[k].clone() * (-TWO_PI_I)).exp()))
    }

    fn circle_family(&self, k: usize, log_value: C64) -> Family {
        let n = self.n();
        Self::scalar_family(move |x| Ok((-theta_full(x, n)[k].clone() * log_value).exp()))
    }

    /// Junction vertices `β_k` and the base vertex `z₀`, fans ordered at the
    /// model's own point.
    pub fn contour_graph(&self) -> ContourGraphModel {
        let x = self.point();
        let mut vertices = Vec::with_capacity(self.n() + 1);
        for k in 0..self.n() {
            let b = self.beta(&x, k);
            let start = self.junction_log(k);
            let arcs = vec![
                IncidentArc::outward(format!("segment{}", k + 1), self.segment_family(k)),
                IncidentArc::outward(format!("circle{}-out", k + 1), self.circle_family(k, start)),
                IncidentArc::inward(format!("circle{}-in", k + 1), self.circle_family(k, start + TWO_PI_I)),
            ];
            let dirs = [(self.z0 - b).arg(), self.psi[k] + PI / 2.0, self.psi[k] - PI / 2.0];
            vertices.push(ccw_fan(format!("beta{}", k + 1), dirs.into_iter().zip(arcs).collect()));
        }
        let rays = self
            .ccw_order(&x)
            .into_iter()
            .map(|k| IncidentArc::inward(format!("segment{}", k + 1), self.segment_family(k)))
            .collect();
        vertices.push(VertexConfig::new("z0", rays));
        ContourGraphModel {
            dim: self.dim(),
            chart_labels: self.chart_labels(),
            vertices,
        }
    }

    /// `iπ Σ_j Σ_{k<j} dθ_j∧dθ_k` with `j, k` in counterclockwise order.
    pub fn eta_expected(&self, x: &[C64]) -> TwoForm {
        let n = self.n();
        let order = self.ccw_order(x);
        // dθ_k in chart coordinates.
        let dtheta = |k: usize| -> Vec<f64> {
            (0..n - 1)
                .map(|i| if k == n - 1 { -1.0 } else if i == k { 1.0 } else { 0.0 })
                .collect()
        };
        let mut f = TwoForm::zeros(self.dim());
        for (pj, &j) in order.iter().enumerate() {
            for &k in &order[..pj] {
                let (u, v) = (dtheta(j), dtheta(k));
                for p in 0..n - 1 {
                    for q in 0..n - 1 {
                        if u[p] * v[q] != 0.0 {
                            f.add_term(n + p, n + q, I * PI * (u[p] * v[q]));
                        }
                    }
                }
            }
        }
        f
    }

    pub fn omega_field(&self) -> Analytic<ScalarOmega> {
        Analytic(ScalarOmega { n: self.n() })
    }

    pub fn omega_closed_form(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.omega_field().eval(x)
    }

    /// `Π_{k<ℓ} (a_k − a_ℓ)^{θ_kθ_ℓ} Π_k e^{−iπθ_k²/2}`, principal branch;
    /// integer exponents are evaluated without a logarithm.
    pub fn tau_generic<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let n = self.n();
        let t = theta_full(x, n);
        let mut acc = S::one();
        let mut quad = S::zero();
        for l in 0..n {
            for k in 0..l {
                let p = t[k].clone() * t[l].clone();
                let d = x[k].clone() - x[l].clone();
                let pv = p.value();
                acc = acc
                    * if pv.im == 0.0 && pv.re.fract() == 0.0 && pv.re.abs() < 64.0 {
                        d.powi(pv.re as i32)
                    } else {
                        (p * d.ln()?).exp()
                    };
            }
            quad += t[l].clone() * t[l].clone();
        }
        Ok(acc * (quad * C64::new(0.0, -PI / 2.0)).exp())
    }

    pub fn tau(&self, x: &[C64]) -> Result<C64> {
        self.tau_generic(x)
    }

    /// Gradient of `ln τ` in the chart.
    pub fn dlog_tau(&self, x: &[C64]) -> Result<Vec<C64>> {
        let jets = crate::jets::seed_chart(x, 1)?;
        let tau = self.tau_generic(&jets)?;
        let v = tau.value();
        Ok(tau.gradient(x.len()).into_iter().map(|g| g / v).collect())
    }

    /// `Σ_{k<ℓ} θ_k dθ_ℓ` in the chart.
    pub fn correction(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n();
        let t = theta_full(x, n);
        let ct: Vec<C64> = (0..n).map(|l| t[..l].iter().sum()).collect();
        pullback_one(vec![C64::new(0.0, 0.0); n], ct)
    }

    /// `Σ_k ½ θ_k (Log(β_k − a_k) + iπ) dθ_k` in the chart.
    pub fn vartheta_closed_form(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n();
        let t = theta_full(x, n);
        let ct: Vec<C64> = (0..n)
            .map(|k| 0.5 * t[k] * (self.junction_log(k) + I * PI))
            .collect();
        pullback_one(vec![C64::new(0.0, 0.0); n], ct)
    }
}

/// The Malgrange form of the scalar problem in closed form.
#[derive(Clone, Copy, Debug)]
pub struct ScalarOmega {
    pub n: usize,
}

impl OneFormExpr for ScalarOmega {
    fn dim(&self) -> usize {
        2 * self.n - 1
    }
    fn coeffs<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.n;
        let t = theta_full(x, n);
        let mut ca = vec![S::zero(); n];
        let mut ct = vec![S::zero(); n];
        for j in 0..n {
            for k in 0..n {
                if k == j {
                    continue;
                }
                let diff = x[k].clone() - x[j].clone();
                if diff.value().norm() == 0.0 {
                    return Err(Error::Domain(format!("poles {} and {} coincide", j + 1, k + 1)));
                }
                ca[k] += t[j].clone() * t[k].clone() / diff.clone();
                ct[k] += t[j].clone() * diff.ln()?;
            }
            ct[j] += t[j].clone() * C64::new(0.0, -PI);
        }
        Ok(pullback_one(ca, ct))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::exterior_derivative_1form;
    use crate::models::sample_rng;
    use crate::vertex::{check_eta_closed, eta_total, eta_vertex};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_pole(theta: C64) -> ScalarFuchsianModel {
        let z0 = c(3.0, 0.0);
        let a = vec![c(0.0, 1.0), c(0.0, -1.0)];
        let psi = a.iter().map(|ak: &C64| (z0 - ak).arg()).collect();
        ScalarFuchsianModel::new(a, vec![theta], z0, vec![0.2, 0.2], psi).unwrap()
    }

    #[test]
    fn tau_examples() {
        let m = two_pole(c(0.0, 0.0));
        assert_eq!(m.tau(&m.point()).unwrap(), c(1.0, 0.0));
        // θ = (1, −1) at a = (0, 1).
        let x = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        let tau = m.tau(&x).unwrap();
        assert!((tau - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn two_pole_omega_by_hand() {
        let th = c(0.3, 0.2);
        let m = two_pole(th);
        let x = m.point();
        let w = m.omega_closed_form(&x).unwrap();
        let d = x[0] - x[1];
        assert!((w[0] + th * th / d).norm() < 1e-14);
        assert!((w[1] - th * th / d).norm() < 1e-14);
        let expected = -th * ((x[0] - x[1]).ln() + (x[1] - x[0]).ln()) - 2.0 * I * PI * th;
        assert!((w[2] - expected).norm() < 1e-14);
    }

    #[test]
    fn zero_exponents_give_zero_forms() {
        let m = two_pole(c(0.0, 0.0));
        let x = m.point();
        assert!(m.omega_closed_form(&x).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(m.vartheta_closed_form(&x).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn coincident_poles_are_refused() {
        let m = two_pole(c(0.1, 0.0));
        let x = [c(0.0, 1.0), c(0.0, 1.0), c(0.1, 0.0)];
        assert!(matches!(m.omega_closed_form(&x), Err(Error::Domain(_))));
        assert!(m.check_admissible(&x).is_err());
    }

    #[test]
    fn graph_eta_matches_expected_and_omega_curvature() {
        let mut rng = sample_rng(30);
        for n in [2, 3, 4] {
            for _ in 0..5 {
                let m = ScalarFuchsianModel::sample(n, &mut rng).unwrap();
                let x = m.point();
                let graph = m.contour_graph();
                let eta = eta_total(&graph, &x).unwrap();
                assert!(eta.max_abs_diff(&m.eta_expected(&x)) < 1e-9);
                let d_omega = exterior_derivative_1form(&m.omega_field(), &x).unwrap();
                assert!(eta.max_abs_diff(&d_omega) < 1e-9);
                for v in graph.vertices.iter().filter(|v| v.label.starts_with("beta")) {
                    assert!(eta_vertex(v, &x).unwrap().max_abs() < 1e-12);
                }
                assert!(check_eta_closed(&graph, &x).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn tau_discrepancy_is_i_pi() {
        let mut rng = sample_rng(31);
        for _ in 0..10 {
            let m = ScalarFuchsianModel::sample(3, &mut rng).unwrap();
            let x = m.point();
            let dlt = m.dlog_tau(&x).unwrap();
            let w = m.omega_closed_form(&x).unwrap();
            let corr = m.correction(&x);
            for i in 0..x.len() {
                assert!((dlt[i] - w[i] - I * PI * corr[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_labels_are_counterclockwise() {
        let mut rng = sample_rng(32);
        let m = ScalarFuchsianModel::sample(4, &mut rng).unwrap();
        assert_eq!(m.ccw_order(&m.point()), vec![0, 1, 2, 3]);
    }

    #[test]
    fn cut_clearance() {
        let apex = c(0.0, 0.0);
        assert_eq!(segment_cut_clearance(c(-1.0, 1.0), c(-1.0, -1.0), apex), 0.0);
        assert!((segment_cut_clearance(c(1.0, 1.0), c(1.0, -1.0), apex) - 1.0).abs() < 1e-15);
        assert!((segment_cut_clearance(c(-2.0, 0.5), c(-1.0, 0.5), apex) - 0.5).abs() < 1e-15);
    }
}

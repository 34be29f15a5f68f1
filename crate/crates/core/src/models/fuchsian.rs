//! Fuchsian character varieties and their contour graphs.
//!
//! Monodromies are `𝓜_j = C_j⁻¹ Λ_j C_j` with `Λ_j = e^{2πi L_j}` diagonal
//! and `𝓜_1⋯𝓜_K = 1`. Around pole `a_j` the graph has an outer circle
//! (jump `C_j⁻¹`), an inner circle (jump `(z − a_j)^{−L_j}`), a segment from
//! the outer junction `p_j` to the inner junction `β_j` (jump `Λ_j`) and a
//! ray from the base point `z₀` to `p_j` (jump `𝓜_j`).

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jets::{seed_chart, Jet, Scalar, C64, TWO_PI_I};
use crate::linalg::{
    family, trace_wedge, Family, Matrix, MatrixOneForm, TwoForm, TwoFormField,
};
use crate::vertex::{ContourGraphModel, IncidentArc, Orientation, VertexConfig};

use super::{denominator, require_away_from_zero, ChartModel, SampleRng, SAMPLE_MARGIN};

/// Connection data at a chart point: `C_j` and the diagonal of `L_j`.
#[derive(Clone, Debug)]
pub struct FuchsianData<S = Jet> {
    pub c: Vec<Matrix<S>>,
    pub l: Vec<Vec<S>>,
}

pub type FuchsianChart = Arc<dyn Fn(&[Jet]) -> Result<FuchsianData> + Send + Sync>;
pub type Admissibility = Arc<dyn Fn(&[C64]) -> Result<()> + Send + Sync>;

/// `Λ = e^{2πi L}` for diagonal `L`.
pub fn lambda_matrix<S: Scalar>(l: &[S]) -> Matrix<S> {
    Matrix::diag(l.iter().map(|x| (x.clone() * TWO_PI_I).exp()).collect())
}

/// `L = diag(Log λ, −Log λ)/(2πi)`, so that `e^{2πiL} = diag(λ, 1/λ)`.
pub fn exponent_pair<S: Scalar>(lambda: &S) -> Result<Vec<S>> {
    let l = lambda.ln()? / TWO_PI_I;
    Ok(vec![l.clone(), -l])
}

/// Positions of poles, base point and circle data.
#[derive(Clone, Debug, PartialEq)]
pub struct FuchsianGeometry {
    pub a: Vec<C64>,
    pub z0: C64,
    pub outer_radius: Vec<f64>,
    pub inner_radius: Vec<f64>,
    /// Direction of the outer junction `p_j` seen from `a_j`.
    pub phi: Vec<f64>,
    /// Direction of the inner junction `β_j` seen from `a_j`.
    pub psi: Vec<f64>,
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let t = ((p - a) * d.conj()).re / d.norm_sqr();
    (p - (a + d * t.clamp(0.0, 1.0))).norm()
}

fn angle_from(reference: f64, angle: f64) -> f64 {
    (angle - reference).rem_euclid(2.0 * PI)
}

/// Order arcs counterclockwise by their outgoing direction, starting with the first.
pub(crate) fn ccw_fan(label: String, mut arcs: Vec<(f64, IncidentArc)>) -> VertexConfig {
    let reference = arcs[0].0;
    arcs.sort_by(|x, y| angle_from(reference, x.0).total_cmp(&angle_from(reference, y.0)));
    VertexConfig::new(label, arcs.into_iter().map(|(_, a)| a).collect())
}

impl FuchsianGeometry {
    /// Poles on a circle of radius 2.5 around `z₀ = 0`, junctions facing `z₀`.
    pub fn regular(k: usize) -> Self {
        let a: Vec<C64> = (0..k)
            .map(|j| C64::from_polar(2.5, 0.3 + 2.0 * PI * j as f64 / k as f64))
            .collect();
        let z0 = C64::new(0.0, 0.0);
        let phi: Vec<f64> = a.iter().map(|aj| (z0 - aj).arg()).collect();
        FuchsianGeometry {
            outer_radius: vec![0.6; k],
            inner_radius: vec![0.25; k],
            psi: phi.clone(),
            phi,
            a,
            z0,
        }
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self, j: usize) -> C64 {
        self.a[j] + C64::from_polar(self.outer_radius[j], self.phi[j])
    }

    pub fn beta(&self, j: usize) -> C64 {
        self.a[j] + C64::from_polar(self.inner_radius[j], self.psi[j])
    }

    /// Labels sorted counterclockwise around `z₀`, rotated to start at 0.
    pub fn ray_order(&self) -> Result<Vec<usize>> {
        let k = self.k();
        let angles: Vec<f64> = (0..k).map(|j| (self.p(j) - self.z0).arg()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&x, &y| angle_from(angles[0], angles[x]).total_cmp(&angle_from(angles[0], angles[y])));
        for w in order.windows(2) {
            if angle_from(angles[w[0]], angles[w[1]]) < 1e-6 {
                return Err(Error::Domain(format!(
                    "poles {} and {} lie on the same ray from z0",
                    w[0] + 1,
                    w[1] + 1
                )));
            }
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if [self.outer_radius.len(), self.inner_radius.len(), self.phi.len(), self.psi.len()]
            .iter()
            .any(|&l| l != k)
        {
            return Err(Error::Domain("geometry arrays have inconsistent lengths".into()));
        }
        for j in 0..k {
            let (big, small) = (self.outer_radius[j], self.inner_radius[j]);
            if !(small > 0.0 && big > small) {
                return Err(Error::Domain(format!("pole {}: need 0 < inner < outer radius", j + 1)));
            }
            if (self.z0 - self.a[j]).norm() <= big {
                return Err(Error::Domain(format!("z0 lies inside the outer disk of pole {}", j + 1)));
            }
            for i in 0..j {
                if (self.a[i] - self.a[j]).norm() <= self.outer_radius[i] + big {
                    return Err(Error::Domain(format!("outer disks {} and {} overlap", i + 1, j + 1)));
                }
            }
            // Segment p_j → β_j stays outside the inner disk except at β_j.
            let (p, b) = (self.p(j), self.beta(j));
            for s in 0..64 {
                let q = p + (b - p) * (s as f64 / 64.0);
                if (q - self.a[j]).norm() < small * (1.0 - 1e-9) {
                    return Err(Error::Domain(format!("segment of pole {} enters the inner disk", j + 1)));
                }
            }
            // Ray z₀ → p_j meets no other disk and enters its own only at p_j.
            for i in 0..k {
                if i != j && segment_distance(self.a[i], self.z0, p) <= self.outer_radius[i] {
                    return Err(Error::Domain(format!("ray to pole {} crosses disk {}", j + 1, i + 1)));
                }
            }
            for s in 0..64 {
                let q = self.z0 + (p - self.z0) * (s as f64 / 64.0);
                if (q - self.a[j]).norm() < big * (1.0 - 1e-9) {
                    return Err(Error::Domain(format!("ray to pole {} enters its disk early", j + 1)));
                }
            }
        }
        let order = self.ray_order()?;
        if order.iter().enumerate().any(|(i, &j)| i != j) {
            return Err(Error::Domain(
                "rays from z0 must be counterclockwise in label order".into(),
            ));
        }
        Ok(())
    }

    /// Random admissible perturbation of size about `scale`.
    pub fn perturbed(&self, rng: &mut SampleRng, scale: f64) -> Result<Self> {
        use rand::Rng;
        super::rejection_sample(
            rng,
            |r| {
                let mut jitter = |s: f64| C64::new(r.random_range(-s..s), r.random_range(-s..s));
                let a = self.a.iter().map(|aj| aj + jitter(scale)).collect();
                let z0 = self.z0 + jitter(scale);
                let outer = self.outer_radius.iter().map(|x| x * (1.0 + jitter(scale).re)).collect();
                let inner = self.inner_radius.iter().map(|x| x * (1.0 + jitter(scale).re)).collect();
                let phi = self.phi.iter().map(|x| x + jitter(scale).re).collect();
                let psi = self.psi.iter().map(|x| x + jitter(scale).re).collect();
                FuchsianGeometry {
                    a,
                    z0,
                    outer_radius: outer,
                    inner_radius: inner,
                    phi,
                    psi,
                }
            },
            |g| g.validate().is_ok(),
        )
    }
}

#[derive(Clone)]
pub struct FuchsianCharVarModel {
    pub name: &'static str,
    pub k: usize,
    pub r: usize,
    pub chart_labels: Vec<String>,
    pub chart: FuchsianChart,
    pub admissible: Admissibility,
    pub geometry: FuchsianGeometry,
}

impl std::fmt::Debug for FuchsianCharVarModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FuchsianCharVarModel")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("r", &self.r)
            .field("chart_labels", &self.chart_labels)
            .field("geometry", &self.geometry)
            .finish()
    }
}

impl FuchsianCharVarModel {
    pub fn with_geometry(&self, geometry: FuchsianGeometry) -> Result<Self> {
        if geometry.k() != self.k {
            return Err(Error::Domain("geometry has the wrong number of poles".into()));
        }
        geometry.validate()?;
        Ok(FuchsianCharVarModel {
            geometry,
            ..self.clone()
        })
    }

    fn data(&self, x: &[Jet]) -> Result<FuchsianData> {
        let d = (self.chart)(x)?;
        if d.c.len() != self.k || d.l.len() != self.k {
            return Err(Error::Usage("chart map returned the wrong number of poles".into()));
        }
        Ok(d)
    }

    fn component(&self, j: usize, pick: fn(&FuchsianData, usize) -> Result<Matrix<Jet>>) -> Family {
        let model = self.clone();
        family(move |x| pick(&model.data(x)?, j))
    }

    pub fn connection_family(&self, j: usize) -> Family {
        self.component(j, |d, j| Ok(d.c[j].clone()))
    }

    pub fn connection_inverse_family(&self, j: usize) -> Family {
        self.component(j, |d, j| d.c[j].inverse())
    }

    pub fn lambda_family(&self, j: usize) -> Family {
        self.component(j, |d, j| Ok(lambda_matrix(&d.l[j])))
    }

    pub fn monodromy_family(&self, j: usize) -> Family {
        self.component(j, |d, j| Ok(&(&d.c[j].inverse()? * &lambda_matrix(&d.l[j])) * &d.c[j]))
    }

    /// `(z − a_j)^{−L_j}` with `log(z − a_j) = ℓ` held fixed.
    fn inner_family(&self, j: usize, log_value: C64) -> Family {
        let model = self.clone();
        family(move |x| {
            let d = model.data(x)?;
            Ok(Matrix::diag(d.l[j].iter().map(|l| (-l.clone() * log_value).exp()).collect()))
        })
    }

    /// Monodromy matrices at a chart point.
    pub fn monodromies(&self, point: &[C64]) -> Result<Vec<Matrix>> {
        let x = seed_chart(point, 1)?;
        let d = self.data(&x)?;
        (0..self.k)
            .map(|j| Ok((&(&d.c[j].inverse()? * &lambda_matrix(&d.l[j])) * &d.c[j]).values()))
            .collect()
    }

    /// `‖𝓜_1⋯𝓜_K − 1‖`.
    pub fn monodromy_residual(&self, point: &[C64]) -> Result<f64> {
        let ms = self.monodromies(point)?;
        let prod = ms.iter().fold(Matrix::identity(self.r), |acc, m| &acc * m);
        Ok((&prod - &Matrix::identity(self.r)).max_abs())
    }

    /// The contour graph: base point, outer junctions `p_j`, inner junctions `β_j`.
    pub fn contour_graph(&self) -> Result<ContourGraphModel> {
        let g = &self.geometry;
        g.validate()?;
        let order = g.ray_order()?;
        let mut vertices = Vec::with_capacity(2 * self.k + 1);

        let rays = order
            .iter()
            .map(|&j| IncidentArc::outward(format!("ray{}", j + 1), self.monodromy_family(j)))
            .collect();
        vertices.push(VertexConfig::new("z0", rays));

        for j in 0..self.k {
            let (a, p, b) = (g.a[j], g.p(j), g.beta(j));
            let out = (p - a).arg();
            let arcs = vec![
                ((b - p).arg(), IncidentArc::outward(format!("segment{}", j + 1), self.lambda_family(j))),
                (
                    out - PI / 2.0,
                    IncidentArc::inward(format!("outer{}-in", j + 1), self.connection_inverse_family(j)),
                ),
                ((g.z0 - p).arg(), IncidentArc::inward(format!("ray{}", j + 1), self.monodromy_family(j))),
                (
                    out + PI / 2.0,
                    IncidentArc::outward(format!("outer{}-out", j + 1), self.connection_inverse_family(j)),
                ),
            ];
            vertices.push(ccw_fan(format!("p{}", j + 1), arcs));

            let start = C64::new(g.inner_radius[j].ln(), g.psi[j]);
            let inward = (b - a).arg();
            let arcs = vec![
                ((p - b).arg(), IncidentArc::new(format!("segment{}", j + 1), self.lambda_family(j), Orientation::Inward)),
                (inward + PI / 2.0, IncidentArc::outward(format!("inner{}-out", j + 1), self.inner_family(j, start))),
                (
                    inward - PI / 2.0,
                    IncidentArc::inward(format!("inner{}-in", j + 1), self.inner_family(j, start + TWO_PI_I)),
                ),
            ];
            vertices.push(ccw_fan(format!("beta{}", j + 1), arcs));
        }
        Ok(ContourGraphModel {
            dim: self.chart_labels.len(),
            chart_labels: self.chart_labels.clone(),
            vertices,
        })
    }

    /// Pairwise monodromy term plus per-pole connection term, at level `S`.
    pub fn closed_form_at<S: Scalar>(&self, point: &[C64]) -> Result<TwoForm<S>> {
        let n = point.len();
        let r = self.r;
        let x = seed_chart(point, S::SEED_ORDER)?;
        let d = self.data(&x)?;
        let id = Matrix::<S>::identity(r);
        let mut total = TwoForm::<S>::zeros(n);
        let mut ms = Vec::with_capacity(self.k);
        let mut dms = Vec::with_capacity(self.k);
        for j in 0..self.k {
            let c: Matrix<S> = d.c[j].lower();
            let c_inv = c.inverse()?;
            let lam_jet = lambda_matrix(&d.l[j]);
            let lam: Matrix<S> = lam_jet.lower();
            let lam_inv = lam.inverse()?;
            let dc = MatrixOneForm {
                coeffs: (0..n).map(|i| &d.c[j].lower_partial::<S>(i) * &c_inv).collect(),
            };
            let dl = MatrixOneForm {
                coeffs: (0..n).map(|i| &lam_inv * &lam_jet.lower_partial::<S>(i)).collect(),
            };
            total = total
                .add(&trace_wedge(&lam, &dc, &lam_inv, &dc, &id)?)
                .add(&trace_wedge(&id, &dl, &id, &dc, &id)?.scale(C64::new(2.0, 0.0)));
            let m_jet = &(&d.c[j].inverse()? * &lam_jet) * &d.c[j];
            ms.push(m_jet.lower::<S>());
            dms.push(MatrixOneForm {
                coeffs: (0..n).map(|i| m_jet.lower_partial::<S>(i)).collect(),
            });
        }
        let prod = ms.iter().fold(Matrix::identity(r), |acc, m| &acc * m);
        let residual = (&prod.values() - &Matrix::identity(r)).max_abs();
        if residual.is_nan() || residual > crate::vertex::NO_MONODROMY_GATE {
            return Err(Error::Constraint {
                residual,
                tolerance: crate::vertex::NO_MONODROMY_GATE,
                context: "monodromy relation".into(),
            });
        }
        let span = |a: usize, b: usize| crate::linalg::ordered_product(&ms, a, b, r);
        for l in 1..self.k {
            for k in 0..l {
                total = total.add(&trace_wedge(&span(0, k), &dms[k], &span(k + 1, l), &dms[l], &span(l + 1, self.k))?);
            }
        }
        Ok(total.scale(-1.0 / C64::new(0.0, 4.0 * PI)))
    }

    pub fn closed_form_field(&self) -> FuchsianEtaClosed {
        FuchsianEtaClosed(self.clone())
    }
}

pub fn fuchsian_eta_closed_form(model: &FuchsianCharVarModel, point: &[C64]) -> Result<TwoForm> {
    model.closed_form_at::<C64>(point)
}

#[derive(Clone, Debug)]
pub struct FuchsianEtaClosed(pub FuchsianCharVarModel);

impl TwoFormField for FuchsianEtaClosed {
    fn dim(&self) -> usize {
        self.0.chart_labels.len()
    }
    fn eval(&self, point: &[C64]) -> Result<TwoForm> {
        self.0.closed_form_at::<C64>(point)
    }
    fn eval_jet(&self, point: &[C64]) -> Result<TwoForm<Jet>> {
        self.0.closed_form_at::<Jet>(point)
    }
}

impl ChartModel for FuchsianCharVarModel {
    fn name(&self) -> &'static str {
        self.name
    }
    fn chart_labels(&self) -> Vec<String> {
        self.chart_labels.clone()
    }
    fn check_admissible(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.chart_labels.len() {
            return Err(Error::Usage(format!(
                "chart point has {} coordinates, expected {}",
                x.len(),
                self.chart_labels.len()
            )));
        }
        (self.admissible)(x)
    }
}

fn det2<S: Scalar>(m: &Matrix<S>) -> S {
    m.get(0, 0).clone() * m.get(1, 1).clone() - m.get(0, 1).clone() * m.get(1, 0).clone()
}

fn general2<S: Scalar>(x: &[S]) -> Result<Matrix<S>> {
    Matrix::from_rows(vec![vec![x[0].clone(), x[1].clone()], vec![x[2].clone(), x[3].clone()]])
}

/// Two poles with `C_2 = diag(d1, d2)·C_1` and `L_2 = −L_1`, so `𝓜_2 = 𝓜_1⁻¹`.
/// Chart `(c11, c12, c21, c22, λ, d1, d2)`.
pub fn twisted_pair_data<S: Scalar>(x: &[S]) -> Result<FuchsianData<S>> {
    let c1 = general2(&x[0..4])?;
    let dmat = Matrix::diag(vec![x[5].clone(), x[6].clone()]);
    let c2 = &dmat * &c1;
    let l1 = exponent_pair(&x[4])?;
    let l2 = l1.iter().map(|v| -v.clone()).collect();
    Ok(FuchsianData { c: vec![c1, c2], l: vec![l1, l2] })
}

/// Three poles; the third closes the relation through the eigen-decomposition
/// of `(𝓜_1 𝓜_2)⁻¹`. Chart `(C_1 entries, λ1, C_2 entries, λ2)`.
pub fn three_pole_data<S: Scalar>(x: &[S]) -> Result<FuchsianData<S>> {
    let c1 = general2(&x[0..4])?;
    let c2 = general2(&x[5..9])?;
    let l1 = exponent_pair(&x[4])?;
    let l2 = exponent_pair(&x[9])?;
    let m1 = &(&c1.inverse()? * &lambda_matrix(&l1)) * &c1;
    let m2 = &(&c2.inverse()? * &lambda_matrix(&l2)) * &c2;
    let m3 = (&m1 * &m2).inverse()?;
    let (a, c, d) = (m3.get(0, 0).clone(), m3.get(1, 0).clone(), m3.get(1, 1).clone());
    let trace = a.clone() + d;
    let det = det2(&m3);
    let disc = trace.clone() * trace.clone() - det * C64::new(4.0, 0.0);
    let root = denominator("discriminant of M3", disc)?.sqrt()?;
    let mu_plus = (trace.clone() + root.clone()) * C64::new(0.5, 0.0);
    let mu_minus = (trace - root) * C64::new(0.5, 0.0);
    let c = denominator("lower-left entry of M3", c)?;
    let c3 = Matrix::from_rows(vec![vec![c.clone(), mu_plus.clone() - a.clone()], vec![c, mu_minus - a]])?;
    let l3 = exponent_pair(&mu_plus)?;
    Ok(FuchsianData { c: vec![c1, c2, c3], l: vec![l1, l2, l3] })
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl FuchsianCharVarModel {
    /// Smallest nontrivial case: two poles with mutually inverse monodromy.
    pub fn twisted_pair() -> Self {
        FuchsianCharVarModel {
            name: "fuchsian-pair",
            k: 2,
            r: 2,
            chart_labels: labels(&["c11", "c12", "c21", "c22", "lambda", "d1", "d2"]),
            chart: Arc::new(twisted_pair_data),
            admissible: Arc::new(|x| {
                let c1 = general2(&x[0..4])?;
                require_away_from_zero(
                    SAMPLE_MARGIN,
                    &[
                        ("det C1", det2(&c1)),
                        ("lambda - 1", x[4] - 1.0),
                        ("lambda + 1", x[4] + 1.0),
                        ("d1", x[5]),
                        ("d2", x[6]),
                    ],
                )
            }),
            geometry: FuchsianGeometry::regular(2),
        }
    }

    /// Three poles with general rank-two connection matrices.
    pub fn three_pole() -> Self {
        FuchsianCharVarModel {
            name: "fuchsian",
            k: 3,
            r: 2,
            chart_labels: labels(&[
                "c1_11", "c1_12", "c1_21", "c1_22", "lambda1", "c2_11", "c2_12", "c2_21", "c2_22", "lambda2",
            ]),
            chart: Arc::new(three_pole_data),
            admissible: Arc::new(|x| {
                let c1 = general2(&x[0..4])?;
                let c2 = general2(&x[5..9])?;
                require_away_from_zero(
                    SAMPLE_MARGIN,
                    &[
                        ("det C1", det2(&c1)),
                        ("det C2", det2(&c2)),
                        ("lambda1 - 1", x[4] - 1.0),
                        ("lambda1 + 1", x[4] + 1.0),
                        ("lambda2 - 1", x[9] - 1.0),
                        ("lambda2 + 1", x[9] + 1.0),
                    ],
                )?;
                let d = three_pole_data(x)?;
                let l3 = (d.l[2][0] * TWO_PI_I).exp();
                require_away_from_zero(
                    SAMPLE_MARGIN,
                    &[
                        ("lambda3 - 1", l3 - 1.0),
                        ("lambda3 + 1", l3 + 1.0),
                        ("det C3", det2(&d.c[2])),
                    ],
                )
            }),
            geometry: FuchsianGeometry::regular(3),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_rng;
    use crate::vertex::{check_eta_closed, check_no_monodromy, eta_total, eta_vertex};

    #[test]
    fn regular_geometry_is_valid() {
        for k in 2..6 {
            FuchsianGeometry::regular(k).validate().unwrap();
        }
        let mut g = FuchsianGeometry::regular(3);
        g.a.swap(0, 1);
        assert!(g.validate().is_err());
        let mut g = FuchsianGeometry::regular(2);
        g.z0 = g.a[0];
        assert!(g.validate().is_err());
    }

    #[test]
    fn every_vertex_closes() {
        for model in [FuchsianCharVarModel::twisted_pair(), FuchsianCharVarModel::three_pole()] {
            let mut rng = sample_rng(21);
            let x = model.sample(&mut rng).unwrap();
            assert!(model.monodromy_residual(&x).unwrap() < 1e-12);
            let graph = model.contour_graph().unwrap();
            for v in &graph.vertices {
                assert!(check_no_monodromy(v, &x).unwrap() < 1e-12, "{}", v.label);
            }
        }
    }

    #[test]
    fn graph_matches_closed_form_and_inner_vertices_vanish() {
        for model in [FuchsianCharVarModel::twisted_pair(), FuchsianCharVarModel::three_pole()] {
            let mut rng = sample_rng(4);
            let graph = model.contour_graph().unwrap();
            for _ in 0..5 {
                let x = model.sample(&mut rng).unwrap();
                let generic = eta_total(&graph, &x).unwrap();
                let closed = fuchsian_eta_closed_form(&model, &x).unwrap();
                assert!(generic.max_abs_diff(&closed) < 1e-9, "{}", generic.max_abs_diff(&closed));
                assert!(generic.max_abs() > 1e-3);
                for v in graph.vertices.iter().filter(|v| v.label.starts_with("beta")) {
                    assert!(eta_vertex(v, &x).unwrap().max_abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn independent_of_geometry() {
        let model = FuchsianCharVarModel::three_pole();
        let mut rng = sample_rng(17);
        let x = model.sample(&mut rng).unwrap();
        let base = eta_total(&model.contour_graph().unwrap(), &x).unwrap();
        for _ in 0..3 {
            let g = model.geometry.perturbed(&mut rng, 0.2).unwrap();
            let moved = model.with_geometry(g).unwrap();
            let other = eta_total(&moved.contour_graph().unwrap(), &x).unwrap();
            assert!(base.max_abs_diff(&other) < 1e-9);
        }
    }

    #[test]
    fn closed_form_is_closed() {
        let model = FuchsianCharVarModel::twisted_pair();
        let mut rng = sample_rng(2);
        let x = model.sample(&mut rng).unwrap();
        let d = crate::linalg::exterior_derivative_2form(&model.closed_form_field(), &x).unwrap();
        assert!(d.max_abs() < 1e-8);
        assert!(check_eta_closed(&model.contour_graph().unwrap(), &x).unwrap() < 1e-8);
    }

    #[test]
    fn constant_data_gives_zero() {
        let mut model = FuchsianCharVarModel::twisted_pair();
        model.chart = Arc::new(|_| {
            twisted_pair_data(&[1.0, 0.5, 0.2, 1.0, 0.3, 2.0, 0.7].map(|v| Jet::constant(C64::new(v, 0.1))))
        });
        let x = [C64::new(0.4, 0.0); 7];
        assert_eq!(fuchsian_eta_closed_form(&model, &x).unwrap().max_abs(), 0.0);
    }
}

//! Contour quadrature and singular integrals: Gauss–Legendre rules on
//! segments and circle arcs, Cauchy principal values, the iterated-integral
//! identity for antisymmetric kernels, the star integral `J`, and direct
//! quadrature of the Malgrange forms of the scalar model.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc as Shared, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jets::{Jet, C64, TWO_PI_I};
use crate::linalg::TwoForm;
use crate::models::{SampleRng, ScalarFuchsianModel};

/// Largest rule tried by the adaptive routines.
pub const MAX_NODES: usize = 1 << 14;

/// Offsets used for off-contour boundary values.
pub const PLEMELJ_OFFSETS: [f64; 3] = [1e-3, 1e-4, 1e-5];

type Rule = Shared<Vec<(f64, f64)>>;

/// Gauss–Legendre nodes and weights on `[−1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let degree = NonZeroUsize::new(n).ok_or_else(|| Error::Usage("quadrature needs at least one node".into()))?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache").get(&n) {
        return Ok(rule.clone());
    }
    let rule: Rule = Shared::new(GaussLegendre::new(degree).as_node_weight_pairs().to_vec());
    cache.lock().expect("quadrature cache").insert(n, rule.clone());
    Ok(rule)
}

/// `∫_a^b f(t) dt` with an `n`-point rule.
pub fn integrate_interval(f: impl Fn(f64) -> C64, a: f64, b: f64, n: usize) -> Result<C64> {
    let rule = gauss_legendre(n)?;
    let (half, mid) = (0.5 * (b - a), 0.5 * (b + a));
    Ok(rule.iter().map(|&(x, w)| f(mid + half * x) * w).sum::<C64>() * half)
}

/// An oriented smooth arc parametrised by `t ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arc {
    Segment { from: C64, to: C64 },
    /// `center + radius·e^{iφ}` for `φ` running from `start` to `end`.
    CircleArc { center: C64, radius: f64, start: f64, end: f64 },
}

impl Arc {
    pub fn segment(from: C64, to: C64) -> Result<Arc> {
        if !((to - from).norm() > 0.0) {
            return Err(Error::Usage("segment has zero length".into()));
        }
        Ok(Arc::Segment { from, to })
    }

    pub fn circle(center: C64, radius: f64, start: f64, end: f64) -> Result<Arc> {
        if !(radius > 0.0) || !(end != start) || !(end - start).is_finite() {
            return Err(Error::Usage("circle arc needs positive radius and nonzero sweep".into()));
        }
        Ok(Arc::CircleArc { center, radius, start, end })
    }

    /// Full counterclockwise circle starting at angle `start`.
    pub fn full_circle(center: C64, radius: f64, start: f64) -> Result<Arc> {
        Arc::circle(center, radius, start, start + 2.0 * PI)
    }

    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Arc::Segment { from, to } => from + (to - from) * t,
            Arc::CircleArc { center, radius, start, end } => center + C64::from_polar(radius, start + (end - start) * t),
        }
    }

    /// `dz/dt`.
    pub fn tangent(&self, t: f64) -> C64 {
        match *self {
            Arc::Segment { from, to } => to - from,
            Arc::CircleArc { center, start, end, .. } => (self.point(t) - center) * C64::new(0.0, end - start),
        }
    }

    pub fn start_point(&self) -> C64 {
        self.point(0.0)
    }

    pub fn end_point(&self) -> C64 {
        self.point(1.0)
    }

    /// Signed angle swept; zero for segments.
    pub fn sweep(&self) -> f64 {
        match *self {
            Arc::Segment { .. } => 0.0,
            Arc::CircleArc { start, end, .. } => end - start,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Arc::Segment { from, to } => (to - from).norm(),
            Arc::CircleArc { radius, start, end, .. } => radius * (end - start).abs(),
        }
    }

    /// Parameter of a point on the arc, if it lies on it.
    pub fn locate(&self, z: C64) -> Option<f64> {
        let tol = 1e-10 * (1.0 + self.length());
        let t = match *self {
            Arc::Segment { from, to } => {
                let d = to - from;
                ((z - from) * d.conj()).re / d.norm_sqr()
            }
            Arc::CircleArc { center, start, end, .. } => {
                let phi = (z - center).arg();
                let sweep = end - start;
                let rel = if sweep > 0.0 {
                    (phi - start).rem_euclid(2.0 * PI)
                } else {
                    -(start - phi).rem_euclid(2.0 * PI)
                };
                rel / sweep
            }
        };
        ((-1e-14..=1.0 + 1e-14).contains(&t) && (self.point(t) - z).norm() <= tol).then_some(t.clamp(0.0, 1.0))
    }

    /// Unit normal pointing to the left of the orientation (the `+` side).
    pub fn left_normal(&self, t: f64) -> C64 {
        let d = self.tangent(t);
        C64::new(0.0, 1.0) * d / d.norm()
    }
}

/// `∫_arc f(z) dz/(2πi)` with an `n`-point rule.
pub fn contour_quadrature(f: impl Fn(C64) -> C64, arc: &Arc, nodes: usize) -> Result<C64> {
    Ok(integrate_interval(|t| f(arc.point(t)) * arc.tangent(t), 0.0, 1.0, nodes)? / TWO_PI_I)
}

/// Result of an adaptive doubling run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adaptive {
    pub value: C64,
    pub nodes: usize,
    /// `|I_{2n} − I_n|` at the accepted step.
    pub change: f64,
}

/// Double the node count from `start` until two successive values agree to `tol`.
pub fn adaptive(mut eval: impl FnMut(usize) -> Result<C64>, start: usize, tol: f64) -> Result<Adaptive> {
    let mut n = start.max(1);
    let mut prev = eval(n)?;
    while n < MAX_NODES {
        n *= 2;
        let next = eval(n)?;
        let change = (next - prev).norm();
        if !change.is_finite() {
            return Err(Error::Convergence("quadrature produced a non-finite value".into()));
        }
        if change <= tol {
            return Ok(Adaptive { value: next, nodes: n, change });
        }
        prev = next;
    }
    Err(Error::Convergence(format!(
        "quadrature did not stabilise to {tol:.1e} within {MAX_NODES} nodes"
    )))
}

pub fn adaptive_contour_quadrature(f: impl Fn(C64) -> C64, arc: &Arc, tol: f64) -> Result<Adaptive> {
    adaptive(|n| contour_quadrature(&f, arc, n), 16, tol)
}

/// `PV ∫ dw/(w − z)` along the arc for `z = arc.point(t)`.
fn pv_log_increment(arc: &Arc, z: C64) -> C64 {
    let (a, b) = (arc.start_point(), arc.end_point());
    C64::new((b - z).norm().ln() - (a - z).norm().ln(), 0.5 * arc.sweep())
}

fn interior_parameter(arc: &Arc, z: C64) -> Result<f64> {
    let t = arc
        .locate(z)
        .ok_or_else(|| Error::Domain(format!("point {z} is not on the arc")))?;
    if t <= 1e-12 || t >= 1.0 - 1e-12 {
        return Err(Error::Domain(format!("principal value requested at the endpoint {z}")));
    }
    Ok(t)
}

fn pv_with_nodes(f: &dyn Fn(C64) -> C64, arc: &Arc, z: C64, nodes: usize) -> Result<C64> {
    let fz = f(z);
    let regular = integrate_interval(
        |t| {
            let w = arc.point(t);
            let d = w - z;
            if d.norm() == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                (f(w) - fz) / d * arc.tangent(t)
            }
        },
        0.0,
        1.0,
        nodes,
    )?;
    Ok((regular + fz * pv_log_increment(arc, z)) / TWO_PI_I)
}

/// `⨍ f(w)/(w − z) dw/(2πi)` for `z` interior to the arc, by subtraction.
pub fn cauchy_principal_value(f: impl Fn(C64) -> C64, arc: &Arc, z: C64) -> Result<C64> {
    interior_parameter(arc, z)?;
    Ok(adaptive(|n| pv_with_nodes(&f, arc, z, n), 32, 1e-13)?.value)
}

/// Panel breakpoints refined geometrically towards `t_star`.
fn graded_breakpoints(t_star: f64, min_width: f64) -> Vec<f64> {
    let mut pts = vec![0.0, 1.0];
    if t_star > 0.0 && t_star < 1.0 {
        pts.push(t_star);
    }
    let mut h = 0.5;
    while h > min_width {
        for p in [t_star - h, t_star + h] {
            if p > 0.0 && p < 1.0 {
                pts.push(p);
            }
        }
        h *= 0.5;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
    pts
}

/// `∫_arc f(w)/(w − ζ) dw/(2πi)` for `ζ` off the arc, near the point of parameter `t_star`.
pub fn cauchy_transform(f: impl Fn(C64) -> C64, arc: &Arc, zeta: C64, t_star: f64) -> Result<C64> {
    let z_star = arc.point(t_star);
    let f_star = f(z_star);
    let distance = (zeta - z_star).norm();
    if distance == 0.0 {
        return Err(Error::Domain("Cauchy transform evaluated on the arc".into()));
    }
    let pts = graded_breakpoints(t_star, 0.25 * distance / arc.length());
    let mut regular = C64::new(0.0, 0.0);
    let mut log_increment = C64::new(0.0, 0.0);
    for w in pts.windows(2) {
        regular += integrate_interval(
            |t| {
                let p = arc.point(t);
                (f(p) - f_star) / (p - zeta) * arc.tangent(t)
            },
            w[0],
            w[1],
            24,
        )?;
        log_increment += ((arc.point(w[1]) - zeta) / (arc.point(w[0]) - zeta)).ln();
    }
    Ok((regular + f_star * log_increment) / TWO_PI_I)
}

/// Boundary values `(C₊f, C₋f)(z)` from off-contour transforms at the
/// offsets [`PLEMELJ_OFFSETS`], Richardson-extrapolated to the arc.
pub fn plemelj_offcontour_limits(f: impl Fn(C64) -> C64, arc: &Arc, z: C64) -> Result<(C64, C64)> {
    let t = interior_parameter(arc, z)?;
    let normal = arc.left_normal(t);
    let side = |sign: f64| -> Result<C64> {
        let v: Vec<C64> = PLEMELJ_OFFSETS
            .iter()
            .map(|&e| cauchy_transform(&f, arc, z + normal * (sign * e), t))
            .collect::<Result<_>>()?;
        let r1 = (v[1] * 10.0 - v[0]) / 9.0;
        let r2 = (v[2] * 10.0 - v[1]) / 9.0;
        Ok((r2 * 100.0 - r1) / 99.0)
    };
    Ok((side(1.0)?, side(-1.0)?))
}

/// Outcome of the iterated-integral identity check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub diff: f64,
}

/// Kernel `φ(w, z)` written over jets so that `∂_w φ` is available.
pub type Kernel<'a> = &'a (dyn Fn(&Jet, &Jet) -> Jet + Sync);

fn kernel_value(phi: Kernel, w: C64, z: C64) -> C64 {
    phi(&Jet::constant(w), &Jet::constant(z)).value()
}

fn kernel_dw(phi: Kernel, w: C64, z: C64) -> C64 {
    phi(&Jet::variable(w, 0, 1, 1), &Jet::constant(z)).partial(0)
}

/// Quintic map `[0,1] → [0,1]` with vanishing first and second derivatives at the ends.
fn smooth_map(u: f64) -> (f64, f64) {
    let t = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let dt = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    (t, dt)
}

const INNER_NODES: usize = 96;

/// `∫∫ φ(w,z)/(w − z₋)² dw/(2πi) dz/(2πi)` against `−½ ∫ ∂_wφ(w,z)|_{w=z} dz/(2πi)`.
///
/// The left side is computed by integrating by parts in `w` and taking the
/// minus-side boundary value of the Cauchy transform of `∂_wφ`.
pub fn lemma_iterated_integral_check(phi: Kernel, arc: &Arc) -> Result<LemmaCheck> {
    for i in 0..6 {
        for j in 0..6 {
            let (w, z) = (arc.point((i as f64 + 0.5) / 6.0), arc.point((j as f64 + 0.3) / 6.0));
            let (a, b) = (kernel_value(phi, w, z), kernel_value(phi, z, w));
            if (a + b).norm() > 1e-10 * (1.0 + a.norm()) {
                return Err(Error::Usage(format!(
                    "kernel is not antisymmetric: phi(w,z) + phi(z,w) = {} at w = {w}, z = {z}",
                    a + b
                )));
            }
        }
    }
    let (a, b) = (arc.start_point(), arc.end_point());
    let inner = |z: C64| -> Result<C64> {
        let boundary = (-kernel_value(phi, b, z) / (b - z) + kernel_value(phi, a, z) / (a - z)) / TWO_PI_I;
        let pv = pv_with_nodes(&|w| kernel_dw(phi, w, z), arc, z, INNER_NODES)?;
        Ok(boundary + pv - 0.5 * kernel_dw(phi, z, z))
    };
    let lhs = adaptive(
        |n| {
            let rule = gauss_legendre(n)?;
            let terms: Vec<C64> = rule
                .par_iter()
                .map(|&(x, w)| {
                    let (t, dt) = smooth_map(0.5 * (x + 1.0));
                    Ok(inner(arc.point(t))? * arc.tangent(t) * (0.5 * w * dt))
                })
                .collect::<Result<_>>()?;
            Ok(terms.into_iter().sum::<C64>() / TWO_PI_I)
        },
        16,
        1e-10,
    )?
    .value;
    let rhs = adaptive_contour_quadrature(|z| -0.5 * kernel_dw(phi, z, z), arc, 1e-13)?.value;
    Ok(LemmaCheck { lhs, rhs, diff: (lhs - rhs).norm() })
}

/// One seeded kernel/arc pair for the iterated-integral identity.
pub struct LemmaCase {
    pub name: String,
    pub arc: Arc,
    pub kernel: Box<dyn Fn(&Jet, &Jet) -> Jet + Send + Sync>,
}

impl std::fmt::Debug for LemmaCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LemmaCase").field("name", &self.name).field("arc", &self.arc).finish_non_exhaustive()
    }
}

/// `count` antisymmetric polynomial and trigonometric kernels, alternating
/// between segments and circle arcs.
pub fn lemma_cases(rng: &mut SampleRng, count: usize) -> Result<Vec<LemmaCase>> {
    let unit = |r: &mut SampleRng| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    (0..count)
        .map(|i| {
            let arc = if i % 2 == 0 {
                let a = unit(rng);
                Arc::segment(a, a + C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..2.0 * PI)))?
            } else {
                let start = rng.random_range(0.0..2.0 * PI);
                let sweep = rng.random_range(0.5..4.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                Arc::circle(unit(rng), rng.random_range(0.5..1.5), start, start + sweep)?
            };
            let (p, q, s) = (unit(rng), unit(rng), unit(rng));
            let (name, kernel): (&str, Box<dyn Fn(&Jet, &Jet) -> Jet + Send + Sync>) = match i % 5 {
                0 => ("linear", Box::new(move |w: &Jet, z: &Jet| (w.clone() - z.clone()) * p)),
                1 => (
                    "odd cubic",
                    Box::new(move |w: &Jet, z: &Jet| {
                        let d = w.clone() - z.clone();
                        d.powi(3) * p + d * q
                    }),
                ),
                2 => (
                    "quadratic wedge",
                    Box::new(move |w: &Jet, z: &Jet| {
                        let f = |x: &Jet| x.clone() * x.clone() * p + x.clone() * q;
                        let g = |x: &Jet| x.clone() * s + C64::new(1.0, 0.0);
                        f(w) * g(z) - f(z) * g(w)
                    }),
                ),
                3 => ("sine", Box::new(move |w: &Jet, z: &Jet| ((w.clone() - z.clone()) * q).sin() * p)),
                _ => (
                    "exponential weight",
                    Box::new(move |w: &Jet, z: &Jet| {
                        (w.clone() - z.clone()) * ((w.clone() + z.clone()) * (q * 0.5)).exp() * p
                    }),
                ),
            };
            let kind = if i % 2 == 0 { "segment" } else { "circle arc" };
            Ok(LemmaCase { name: format!("{name} on {kind}"), arc, kernel })
        })
        .collect()
}

/// Rays `v → σ_ℓ` in counterclockwise order with an antisymmetric,
/// zero-row-sum coupling `φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarConfig {
    pub v: C64,
    pub sigma: Vec<C64>,
    pub phi: Vec<Vec<C64>>,
}

impl StarConfig {
    pub fn new(v: C64, sigma: Vec<C64>, phi: Vec<Vec<C64>>) -> Result<Self> {
        let n = sigma.len();
        if n < 2 || phi.len() != n || phi.iter().any(|r| r.len() != n) {
            return Err(Error::Usage("star needs n >= 2 rays and an n x n coupling".into()));
        }
        for (l, s) in sigma.iter().enumerate() {
            if (s - v).norm() == 0.0 {
                return Err(Error::Usage(format!("ray {} has zero length", l + 1)));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if (phi[i][j] + phi[j][i]).norm() > 1e-12 {
                    return Err(Error::Invariant(format!("coupling is not antisymmetric at ({}, {})", i + 1, j + 1)));
                }
            }
            let row: C64 = phi[i].iter().sum();
            if row.norm() > 1e-12 {
                return Err(Error::Invariant(format!("row {} of the coupling sums to {row}, not zero", i + 1)));
            }
        }
        let first = (sigma[0] - v).arg();
        let angles: Vec<f64> = sigma.iter().map(|s| ((s - v).arg() - first).rem_euclid(2.0 * PI)).collect();
        if angles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("ray directions must be distinct and counterclockwise".into()));
        }
        Ok(StarConfig { v, sigma, phi })
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// Random star: sorted directions at least 0.3 apart, lengths in `[0.5, 2]`,
    /// coupling `P_{ij} − (r_i − r_j)/n` from a random antisymmetric `P`.
    pub fn random(n: usize, rng: &mut SampleRng) -> Result<Self> {
        let dirs = crate::models::rejection_sample(
            rng,
            |r| {
                let mut d: Vec<f64> = (0..n).map(|_| r.random_range(0.0..2.0 * PI)).collect();
                d.sort_by(f64::total_cmp);
                d
            },
            |d| (0..n).all(|i| (d[(i + 1) % n] - d[i]).rem_euclid(2.0 * PI) >= 0.3),
        )?;
        let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let sigma = dirs
            .iter()
            .map(|&t| v + C64::from_polar(rng.random_range(0.5..2.0), t))
            .collect();
        let mut p = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let x = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                p[i][j] = x;
                p[j][i] = -x;
            }
        }
        let r: Vec<C64> = p.iter().map(|row| row.iter().sum()).collect();
        let phi = (0..n)
            .map(|i| (0..n).map(|j| p[i][j] - (r[i] - r[j]) / n as f64).collect())
            .collect();
        StarConfig::new(v, sigma, phi)
    }

    /// Move `v` and every endpoint by at most `scale`.
    pub fn perturbed(&self, rng: &mut SampleRng, scale: f64) -> Result<Self> {
        let mut jitter = || C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
        let v = self.v + jitter();
        let sigma = self.sigma.iter().map(|s| s + jitter()).collect();
        StarConfig::new(v, sigma, self.phi.clone())
    }

    /// `−(1/4πi) Σ_{m<ℓ} φ_{mℓ}`.
    pub fn closed_form(&self) -> C64 {
        let n = self.n();
        let s: C64 = (0..n).flat_map(|l| (0..l).map(move |m| (m, l))).map(|(m, l)| self.phi[m][l]).sum();
        -s / (2.0 * TWO_PI_I)
    }

    /// `Σ_ℓ Σ_{m≠ℓ} φ_{mℓ}/(2πi)² ln_ℓ((σ_ℓ − σ_m)/(v − σ_m))`. Along the
    /// straight ray `ℓ` the argument of `z − σ_m` changes by less than `π`,
    /// so the principal logarithm realises `ln_ℓ`.
    pub fn log_sum(&self) -> Result<C64> {
        let n = self.n();
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..n {
            for m in 0..n {
                if m != l {
                    let ratio = (self.sigma[l] - self.sigma[m]) / (self.v - self.sigma[m]);
                    acc += self.phi[m][l] * crate::jets::principal_ln(ratio)?;
                }
            }
        }
        Ok(acc / (TWO_PI_I * TWO_PI_I))
    }

    fn ray(&self, l: usize) -> Result<Arc> {
        Arc::segment(self.v, self.sigma[l])
    }

    /// `Σ_ℓ ∫_{γ_ℓ} dz/(2πi) Σ_{m≠ℓ} φ_{mℓ}/(2πi(z − σ_m))` by quadrature.
    pub fn ray_quadrature(&self) -> Result<C64> {
        let n = self.n();
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..n {
            let f = |z: C64| -> C64 {
                (0..n)
                    .filter(|&m| m != l)
                    .map(|m| self.phi[m][l] / (TWO_PI_I * (z - self.sigma[m])))
                    .sum()
            };
            acc += adaptive_contour_quadrature(f, &self.ray(l)?, 1e-14)?.value;
        }
        Ok(acc)
    }

    /// Symmetrised double integral with the auxiliary point `c`: the
    /// antisymmetric part vanishes and the rest is integrated with the inner
    /// `w`-integral in closed form.
    pub fn c_route(&self, c: C64) -> Result<C64> {
        let n = self.n();
        for l in 0..n {
            let ray = self.ray(l)?;
            let Arc::Segment { from, to } = ray else { unreachable!() };
            let d = to - from;
            let t = ((c - from) * d.conj()).re / d.norm_sqr();
            let dist = (c - (from + d * t.clamp(0.0, 1.0))).norm();
            if dist < 1e-3 * d.norm() {
                return Err(Error::Domain(format!("auxiliary point {c} lies on ray {}", l + 1)));
            }
        }
        let v = self.v;
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..n {
            let dir = v - self.sigma[l];
            let f = |z: C64| -> C64 {
                let a = (c - z).powi(-2);
                let g = (z - c).inv();
                let log_vz = C64::new((v - z).norm().ln(), dir.arg());
                let mut s = C64::new(0.0, 0.0);
                for m in (0..n).filter(|&m| m != l) {
                    let sm = self.sigma[m];
                    let dagger = (v - c) / ((z - c) * (z - sm));
                    let lambda = ((sm - z) / (v - z)).ln() + log_vz;
                    let heart = (v - c) * (a * ((sm - c) / (v - c)).ln() - a * lambda - g / (sm - z));
                    s += self.phi[m][l] * (dagger + heart);
                }
                0.5 * s / TWO_PI_I
            };
            acc += adaptive_contour_quadrature(f, &self.ray(l)?, 1e-14)?.value;
        }
        Ok(acc)
    }

    /// Two auxiliary points: in the sector from the last ray to the first,
    /// and in the sector between the first two rays.
    pub fn default_c_placements(&self) -> [C64; 2] {
        let n = self.n();
        let reach = self.sigma.iter().map(|s| (s - self.v).norm()).fold(f64::INFINITY, f64::min);
        let angle = |l: usize| (self.sigma[l] - self.v).arg();
        let mid = |from: f64, to: f64| from + 0.5 * (to - from).rem_euclid(2.0 * PI);
        [
            self.v + C64::from_polar(0.5 * reach, mid(angle(n - 1), angle(0))),
            self.v + C64::from_polar(0.5 * reach, mid(angle(0), angle(1))),
        ]
    }
}

/// All evaluations of `J` for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct StarJ {
    pub log_sum: C64,
    pub ray_quadrature: C64,
    /// `(c, J)` for each auxiliary point.
    pub c_route: Vec<(C64, C64)>,
    pub closed_form: C64,
    /// Largest distance from the closed form over all numeric routes.
    pub max_diff: f64,
}

#[allow(non_snake_case)]
pub fn star_integral_J(config: &StarConfig, c: &[C64]) -> Result<StarJ> {
    let closed_form = config.closed_form();
    let log_sum = config.log_sum()?;
    let ray_quadrature = config.ray_quadrature()?;
    let c_route: Vec<(C64, C64)> = c.iter().map(|&p| Ok((p, config.c_route(p)?))).collect::<Result<_>>()?;
    let max_diff = std::iter::once(log_sum)
        .chain(std::iter::once(ray_quadrature))
        .chain(c_route.iter().map(|p| p.1))
        .map(|x| (x - closed_form).norm())
        .fold(0.0, f64::max);
    Ok(StarJ { log_sum, ray_quadrature, c_route, closed_form, max_diff })
}

/// Chart direction split into pole and full exponent components.
fn direction_components(m: &ScalarFuchsianModel, direction: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.n();
    if direction >= m.dim() {
        return Err(Error::Usage(format!("direction {direction} outside a chart of dimension {}", m.dim())));
    }
    let mut da = vec![0.0; n];
    let mut dt = vec![0.0; n];
    if direction < n {
        da[direction] = 1.0;
    } else {
        dt[direction - n] = 1.0;
        dt[n - 1] = -1.0;
    }
    Ok((da, dt))
}

/// Circle of pole `k` and the continuous `log(z − a_k)` on it.
fn pole_circle(m: &ScalarFuchsianModel, k: usize) -> Result<(Arc, impl Fn(C64) -> C64 + Sync)> {
    let (a, r, psi) = (m.a[k], m.radii[k], m.psi[k]);
    let arc = Arc::full_circle(a, r, psi)?;
    let log = move |z: C64| {
        let u = (z - a) / C64::from_polar(r, psi);
        C64::new(r.ln(), psi + u.arg().rem_euclid(2.0 * PI))
    };
    Ok((arc, log))
}

/// Quadrature tolerance for the scalar forms.
pub const SCALAR_TOLERANCE: f64 = 1e-12;

/// `ω_M(∂)` for one chart direction, by quadrature over all circles and segments.
pub fn scalar_omega_quadrature(m: &ScalarFuchsianModel, direction: usize) -> Result<C64> {
    m.check_admissible(&m.point())?;
    let (da, dt) = direction_components(m, direction)?;
    let n = m.n();
    let theta = crate::models::scalar::theta_full(&m.point(), n);
    let x = m.point();
    let resolvent = |z: C64| -> C64 { (0..n).map(|j| theta[j] / (z - m.a[j])).sum() };
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let (circle, log) = pole_circle(m, k)?;
        let integrand = |z: C64| resolvent(z) * (theta[k] * da[k] / (z - m.a[k]) - dt[k] * log(z));
        acc += adaptive_contour_quadrature(integrand, &circle, SCALAR_TOLERANCE)?.value;
        if dt[k] != 0.0 {
            let seg = Arc::segment(m.beta(&x, k), m.z0)?;
            let integrand = |z: C64| -TWO_PI_I * dt[k] * resolvent(z);
            acc += adaptive_contour_quadrature(integrand, &seg, SCALAR_TOLERANCE)?.value;
        }
    }
    Ok(acc)
}

/// `ϑ(∂)` for one chart direction; only the circles carry a `z`-dependent jump.
pub fn vartheta_quadrature(m: &ScalarFuchsianModel, direction: usize) -> Result<C64> {
    m.check_admissible(&m.point())?;
    let (da, dt) = direction_components(m, direction)?;
    let n = m.n();
    let theta = crate::models::scalar::theta_full(&m.point(), n);
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let (circle, log) = pole_circle(m, k)?;
        let integrand = |z: C64| {
            let dlog_jump = -theta[k] / (z - m.a[k]);
            0.5 * dlog_jump * (-dt[k] * log(z) + theta[k] * da[k] / (z - m.a[k]))
        };
        acc += adaptive_contour_quadrature(integrand, &circle, SCALAR_TOLERANCE)?.value;
    }
    Ok(acc)
}

/// Every chart component of `ω_M`, evaluated in parallel.
pub fn scalar_omega_quadrature_all(m: &ScalarFuchsianModel) -> Result<Vec<C64>> {
    (0..m.dim()).into_par_iter().map(|d| scalar_omega_quadrature(m, d)).collect()
}

pub fn vartheta_quadrature_all(m: &ScalarFuchsianModel) -> Result<Vec<C64>> {
    (0..m.dim()).into_par_iter().map(|d| vartheta_quadrature(m, d)).collect()
}

/// `(dθ)_{ij} = ∂_iθ_j − ∂_jθ_i` from fourth-order central differences with step `h`.
pub fn fd_exterior_derivative(f: &(dyn Fn(&[C64]) -> Result<Vec<C64>> + Sync), x: &[C64], h: f64) -> Result<TwoForm> {
    let n = x.len();
    let shifted = |i: usize, s: f64| -> Result<Vec<C64>> {
        let mut y = x.to_vec();
        y[i] += s;
        f(&y)
    };
    let partials: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (m2, m1, p1, p2) = (shifted(i, -2.0 * h)?, shifted(i, -h)?, shifted(i, h)?, shifted(i, 2.0 * h)?);
            Ok((0..n).map(|j| (m2[j] - 8.0 * m1[j] + 8.0 * p1[j] - p2[j]) / (12.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = TwoForm::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            out.add_term(i, j, partials[i][j] - partials[j][i]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::I;
    use crate::models::sample_rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn residue_and_analytic_integrands() {
        let circle = Arc::full_circle(c(0.0, 0.0), 1.0, 0.0).unwrap();
        assert!((contour_quadrature(|z| z.inv(), &circle, 64).unwrap() - 1.0).norm() < 1e-14);
        assert!(contour_quadrature(|z| z, &circle, 64).unwrap().norm() < 1e-14);
        let seg = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let expected = (std::f64::consts::E - 1.0) / TWO_PI_I;
        assert!((contour_quadrature(|z| z.exp(), &seg, 16).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn degenerate_arcs_are_refused() {
        assert!(Arc::segment(c(1.0, 1.0), c(1.0, 1.0)).is_err());
        assert!(Arc::circle(c(0.0, 0.0), 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(5).unwrap();
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = adaptive(|n| Ok(c(n as f64, 0.0)), 4, 1e-10);
        assert!(matches!(r, Err(Error::Convergence(_))));
    }

    #[test]
    fn principal_value_examples() {
        let seg = Arc::segment(c(-1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(cauchy_principal_value(|_| c(1.0, 0.0), &seg, c(0.0, 0.0)).unwrap().norm() < 1e-15);
        let pv = cauchy_principal_value(|w| w, &seg, c(0.0, 0.0)).unwrap();
        assert!((pv - 1.0 / (I * PI)).norm() < 1e-15);
        assert!(matches!(
            cauchy_principal_value(|w| w, &seg, c(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
        // Full circle: PV of 1/(w−z) is iπ, i.e. ½ after dividing by 2πi.
        let circle = Arc::full_circle(c(0.0, 0.0), 1.0, 0.0).unwrap();
        let pv = cauchy_principal_value(|_| c(1.0, 0.0), &circle, c(-1.0, 0.0)).unwrap();
        assert!((pv - 0.5).norm() < 1e-14);
    }

    #[test]
    fn plemelj_jumps_match_offcontour_limits() {
        let f = |w: C64| (w * 0.7).exp() + w * w;
        let arcs = [
            Arc::segment(c(-1.0, -0.5), c(1.0, 0.7)).unwrap(),
            Arc::circle(c(0.2, 0.1), 1.3, 0.4, 2.9).unwrap(),
            Arc::circle(c(0.0, 0.0), 1.0, 1.0, -1.5).unwrap(),
        ];
        for arc in arcs {
            for t in [0.23, 0.5, 0.81] {
                let z = arc.point(t);
                let pv = cauchy_principal_value(f, &arc, z).unwrap();
                let (plus, minus) = plemelj_offcontour_limits(f, &arc, z).unwrap();
                assert!((plus - (pv + 0.5 * f(z))).norm() < 1e-7, "{arc:?} {t}");
                assert!((minus - (pv - 0.5 * f(z))).norm() < 1e-7, "{arc:?} {t}");
            }
        }
    }

    #[test]
    fn lemma_examples() {
        let seg = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let zero = |_: &Jet, _: &Jet| Jet::constant(c(0.0, 0.0));
        let r = lemma_iterated_integral_check(&zero, &seg).unwrap();
        assert_eq!((r.lhs, r.rhs, r.diff), (c(0.0, 0.0), c(0.0, 0.0), 0.0));
        let linear = |w: &Jet, z: &Jet| w.clone() - z.clone();
        let r = lemma_iterated_integral_check(&linear, &seg).unwrap();
        assert!((r.rhs + 1.0 / (2.0 * TWO_PI_I)).norm() < 1e-15);
        assert!(r.diff < 1e-6);
        let quarter = Arc::circle(c(0.0, 0.0), 1.0, 0.0, PI / 2.0).unwrap();
        let sine = |w: &Jet, z: &Jet| (w.clone() - z.clone()).sin();
        assert!(lemma_iterated_integral_check(&sine, &quarter).unwrap().diff < 1e-6);
        let symmetric = |w: &Jet, z: &Jet| w.clone() * z.clone();
        assert!(matches!(lemma_iterated_integral_check(&symmetric, &seg), Err(Error::Usage(_))));
    }

    #[test]
    fn seeded_lemma_suite() {
        let mut rng = sample_rng(9);
        for case in lemma_cases(&mut rng, 10).unwrap() {
            let r = lemma_iterated_integral_check(case.kernel.as_ref(), &case.arc).unwrap();
            assert!(r.diff < 1e-6, "{}: {r:?}", case.name);
        }
    }

    #[test]
    fn star_examples() {
        let one = c(1.0, 0.0);
        let rays = vec![c(1.0, 0.0), c(-1.0, 0.5)];
        let bad = StarConfig::new(c(0.0, 0.0), rays, vec![vec![c(0.0, 0.0), one], vec![-one, c(0.0, 0.0)]]);
        assert!(matches!(bad, Err(Error::Invariant(_))));
        let z = c(0.0, 0.0);
        let phi = vec![vec![z, one, -one], vec![-one, z, one], vec![one, -one, z]];
        let sigma = vec![c(1.0, 0.2), c(-0.6, 1.0), c(-0.4, -1.1)];
        let cfg = StarConfig::new(c(0.1, 0.0), sigma, phi).unwrap();
        assert!((cfg.closed_form() + one / (2.0 * TWO_PI_I)).norm() < 1e-16);
        let j = star_integral_J(&cfg, &cfg.default_c_placements()).unwrap();
        assert!(j.max_diff < 1e-10, "{j:?}");
    }

    #[test]
    fn star_invariance_under_perturbation() {
        let mut rng = sample_rng(5);
        for n in [3, 4, 5] {
            let cfg = StarConfig::random(n, &mut rng).unwrap();
            let j = star_integral_J(&cfg, &cfg.default_c_placements()).unwrap();
            assert!(j.max_diff < 1e-10, "{j:?}");
            let moved = cfg.perturbed(&mut rng, 0.05).unwrap();
            let jm = star_integral_J(&moved, &moved.default_c_placements()).unwrap();
            assert!((jm.log_sum - j.log_sum).norm() < 1e-10);
        }
    }

    #[test]
    fn scalar_quadrature_matches_closed_forms() {
        let mut rng = sample_rng(40);
        let m = ScalarFuchsianModel::sample(3, &mut rng).unwrap();
        let x = m.point();
        let quad = scalar_omega_quadrature_all(&m).unwrap();
        let closed = m.omega_closed_form(&x).unwrap();
        for (q, w) in quad.iter().zip(&closed) {
            assert!((q - w).norm() < 1e-8, "{q} vs {w}");
        }
        let vt = vartheta_quadrature_all(&m).unwrap();
        for (q, w) in vt.iter().zip(m.vartheta_closed_form(&x)) {
            assert!((q - w).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_exponents_give_zero_quadrature() {
        let z0 = c(3.0, 0.0);
        let a = vec![c(0.0, 1.0), c(0.0, -1.0)];
        let psi = a.iter().map(|ak: &C64| (z0 - ak).arg()).collect();
        let m = ScalarFuchsianModel::new(a, vec![c(0.0, 0.0)], z0, vec![0.2, 0.2], psi).unwrap();
        for d in 0..m.dim() {
            assert!(scalar_omega_quadrature(&m, d).unwrap().norm() < 1e-14);
            assert!(vartheta_quadrature(&m, d).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn finite_difference_curvature_of_linear_form() {
        let f = |x: &[C64]| Ok(vec![-x[1], x[0]]);
        let d = fd_exterior_derivative(&f, &[c(0.3, 0.1), c(-0.2, 0.4)], 1e-3).unwrap();
        assert!((d.get(0, 1) - 2.0).norm() < 1e-12);
    }
}

//! Batch driver: load or sample model points, run one verification and
//! emit a JSON (or text) report.
//!
//! Points are JSON objects `{"model": str, "chart": {label: [re, im]}, "aux": {...}}`;
//! a bare `{label: [re, im]}` map is accepted too. The scalar model reads
//! `aux.z0` (`[re, im]`), `aux.radii` and `aux.psi` (lists of reals) and
//! defaults to `z0 = 3`, radii `0.2` and junctions facing `z0`. The
//! `potential` command reads an optional base point from `aux.base`
//! (a chart map).
//!
//! Exit codes: 0 when every point passes, 1 when a residual exceeds the
//! tolerance, 2 on usage, domain or input errors.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::jets::{C64, I};
use crate::linalg::{exterior_derivative_2form, Analytic, OneFormField, TwoForm, TwoFormField};
use crate::models::pii::{pii_eta_closed_form, PiiEta, PiiSliceEta, PiiSliceTheta, PiiTheta};
use crate::models::pvi::{pvi_eta_closed_form, PviEta, PviTheta};
use crate::models::{
    fuchsian_eta_closed_form, sample_rng, ChartModel, FuchsianCharVarModel, Pii, PiiSlice, Pvi, SampleRng,
    ScalarFuchsianModel,
};
use crate::potential::{homotopy_potential, verify_potential, HomotopyPotential, StarChart, DEFAULT_QUAD_ORDER};
use crate::quadrature::{
    lemma_cases, lemma_iterated_integral_check, scalar_omega_quadrature_all, star_integral_J, vartheta_quadrature_all,
    StarConfig,
};
use crate::vertex::{check_eta_closed, check_no_monodromy, eta_total, ContourGraphModel};

#[derive(Parser, Debug)]
#[command(name = "isotau", version, about = "Verify vertex forms, potentials and singular integrals on explicit monodromy models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Vertex form from the contour graph against its closed form.
    Eta,
    /// Exterior derivative of the vertex form.
    Closedness,
    /// Homotopy potential and closed-form potential satisfy dθ = η.
    Potential,
    /// d ln τ against ω plus the correction term (scalar model).
    Tau,
    /// Contour quadrature of ω and ϑ against closed forms (scalar model).
    OmegaQuadrature,
    /// Iterated-integral identity on seeded antisymmetric kernels.
    LemmaCheck,
    /// Star integral J by several routes against its closed form.
    StarJ,
    /// Monodromy or Stokes relation residual.
    Constraints,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eta => "eta",
            Command::Closedness => "closedness",
            Command::Potential => "potential",
            Command::Tau => "tau",
            Command::OmegaQuadrature => "omega-quadrature",
            Command::LemmaCheck => "lemma-check",
            Command::StarJ => "star-j",
            Command::Constraints => "constraints",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Scalar,
    Fuchsian,
    Pvi,
    Pii,
    PiiSlice,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Scalar => "scalar",
            ModelKind::Fuchsian => "fuchsian",
            ModelKind::Pvi => "pvi",
            ModelKind::Pii => "pii",
            ModelKind::PiiSlice => "pii-slice",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Options {
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelKind>,
    /// Inline JSON point or path to a JSON file.
    #[arg(long, global = true, conflicts_with = "random")]
    pub point: Option<String>,
    #[arg(long, global = true)]
    pub random: bool,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    pub count: usize,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long = "quad-order", global = true, default_value_t = DEFAULT_QUAD_ORDER)]
    pub quad_order: usize,
    /// Number of poles for random scalar models.
    #[arg(long, global = true, default_value_t = 3)]
    pub poles: usize,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct PointResult {
    pub index: usize,
    pub point: Value,
    pub residual: f64,
    pub pass: bool,
    pub details: Value,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub command: String,
    pub model: String,
    pub seed: Option<u64>,
    pub points_tested: usize,
    pub tolerance: f64,
    pub quad_order: usize,
    pub results: Vec<PointResult>,
    pub max_residual: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {}: {} (max residual {:.3e}, tolerance {:.1e}, {} points)\n",
            self.command,
            self.model,
            if self.pass { "PASS" } else { "FAIL" },
            self.max_residual,
            self.tolerance,
            self.points_tested
        );
        for r in &self.results {
            s += &format!(
                "  [{}] {} residual {:.3e}\n",
                r.index,
                if r.pass { "pass" } else { "FAIL" },
                r.residual
            );
        }
        s
    }
}

/// A chart point, or a whole scalar model (whose geometry is part of the point).
#[derive(Clone, Debug)]
pub enum ModelPoint {
    Chart(Vec<C64>),
    Scalar(ScalarFuchsianModel),
}

impl ModelPoint {
    fn coords(&self) -> Vec<C64> {
        match self {
            ModelPoint::Chart(x) => x.clone(),
            ModelPoint::Scalar(m) => m.point(),
        }
    }
}

fn c_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn parse_c(v: &Value, what: &str) -> Result<C64> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => Err(Error::Usage(format!("{what} must be [re, im] with numeric entries"))),
        },
        _ => Err(Error::Usage(format!("{what} must be a [re, im] pair"))),
    }
}

fn chart_json(labels: &[String], x: &[C64]) -> Value {
    Value::Object(labels.iter().zip(x).map(|(l, z)| (l.clone(), c_json(*z))).collect())
}

fn parse_chart(labels: &[String], map: &Map<String, Value>) -> Result<Vec<C64>> {
    if let Some(k) = map.keys().find(|k| !labels.contains(k)) {
        return Err(Error::Usage(format!(
            "unknown chart coordinate '{k}'; expected {}",
            labels.join(", ")
        )));
    }
    labels
        .iter()
        .map(|l| {
            let v = map
                .get(l)
                .ok_or_else(|| Error::Usage(format!("missing chart coordinate '{l}'")))?;
            parse_c(v, l)
        })
        .collect()
}

fn fuchsian() -> FuchsianCharVarModel {
    FuchsianCharVarModel::three_pole()
}

fn chart_model(kind: ModelKind) -> Option<Box<dyn ChartModel>> {
    match kind {
        ModelKind::Scalar => None,
        ModelKind::Fuchsian => Some(Box::new(fuchsian())),
        ModelKind::Pvi => Some(Box::new(Pvi)),
        ModelKind::Pii => Some(Box::new(Pii)),
        ModelKind::PiiSlice => Some(Box::new(PiiSlice)),
    }
}

fn scalar_labels(n: usize) -> Vec<String> {
    (1..=n)
        .map(|k| format!("a{k}"))
        .chain((1..n).map(|k| format!("theta{k}")))
        .collect()
}

fn parse_scalar(chart: &Map<String, Value>, aux: Option<&Map<String, Value>>) -> Result<ScalarFuchsianModel> {
    let n = chart.keys().filter(|k| k.starts_with('a')).count();
    if n < 2 {
        return Err(Error::Usage("scalar point needs coordinates a1, a2, ...".into()));
    }
    let x = parse_chart(&scalar_labels(n), chart)?;
    let reals = |key: &str| -> Result<Option<Vec<f64>>> {
        match aux.and_then(|a| a.get(key)) {
            None => Ok(None),
            Some(v) => v
                .as_array()
                .filter(|a| a.len() == n)
                .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                .map(Some)
                .ok_or_else(|| Error::Usage(format!("aux.{key} must be a list of {n} reals"))),
        }
    };
    let z0 = match aux.and_then(|a| a.get("z0")) {
        Some(v) => parse_c(v, "aux.z0")?,
        None => C64::new(3.0, 0.0),
    };
    let radii = reals("radii")?.unwrap_or_else(|| vec![0.2; n]);
    let psi = match reals("psi")? {
        Some(p) => p,
        None => x[..n].iter().map(|a| (z0 - a).arg()).collect(),
    };
    ScalarFuchsianModel::new(x[..n].to_vec(), x[n..].to_vec(), z0, radii, psi)
}

fn load_point_text(arg: &str) -> Result<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).map_err(|e| Error::Io(format!("cannot read point file '{arg}': {e}")))
}

/// Parse `--point` for a model, returning the point and any `aux` object.
pub fn parse_point(kind: ModelKind, text: &str) -> Result<(ModelPoint, Option<Map<String, Value>>)> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Usage(format!("point is not valid JSON: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Usage("point must be a JSON object".into()))?;
    let (chart, aux) = match obj.get("chart") {
        Some(c) => {
            if let Some(m) = obj.get("model").and_then(Value::as_str) {
                if m != kind.name() {
                    return Err(Error::Usage(format!("point is for model '{m}', not '{}'", kind.name())));
                }
            }
            let chart = c
                .as_object()
                .ok_or_else(|| Error::Usage("'chart' must be an object".into()))?;
            let aux = match obj.get("aux") {
                None => None,
                Some(a) => Some(
                    a.as_object()
                        .ok_or_else(|| Error::Usage("'aux' must be an object".into()))?
                        .clone(),
                ),
            };
            (chart.clone(), aux)
        }
        None => (obj.clone(), None),
    };
    let point = match chart_model(kind) {
        None => ModelPoint::Scalar(parse_scalar(&chart, aux.as_ref())?),
        Some(m) => {
            let x = parse_chart(&m.chart_labels(), &chart)?;
            m.check_admissible(&x)?;
            ModelPoint::Chart(x)
        }
    };
    Ok((point, aux))
}

fn point_json(kind: ModelKind, p: &ModelPoint) -> Value {
    match p {
        ModelPoint::Chart(x) => {
            let labels = chart_model(kind).map(|m| m.chart_labels()).unwrap_or_default();
            json!({"model": kind.name(), "chart": chart_json(&labels, x)})
        }
        ModelPoint::Scalar(m) => json!({
            "model": "scalar",
            "chart": chart_json(&m.chart_labels(), &m.point()),
            "aux": {"z0": c_json(m.z0), "radii": m.radii, "psi": m.psi},
        }),
    }
}

fn sample_point(kind: ModelKind, rng: &mut SampleRng, poles: usize) -> Result<ModelPoint> {
    match chart_model(kind) {
        None => Ok(ModelPoint::Scalar(ScalarFuchsianModel::sample(poles, rng)?)),
        Some(m) => Ok(ModelPoint::Chart(m.sample(rng)?)),
    }
}

fn form_json(labels: &[String], f: &TwoForm) -> Value {
    let mut map = Map::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let v = f.get(i, j);
            if v.norm() != 0.0 {
                map.insert(format!("{}^{}", labels[i], labels[j]), c_json(v));
            }
        }
    }
    Value::Object(map)
}

fn one_form_json(labels: &[String], v: &[C64]) -> Value {
    chart_json(labels, v)
}

fn labels_of(kind: ModelKind, p: &ModelPoint) -> Vec<String> {
    match p {
        ModelPoint::Scalar(m) => m.chart_labels(),
        ModelPoint::Chart(_) => chart_model(kind).map(|m| m.chart_labels()).unwrap_or_default(),
    }
}

fn graph_of(kind: ModelKind, p: &ModelPoint) -> Result<ContourGraphModel> {
    match (kind, p) {
        (_, ModelPoint::Scalar(m)) => Ok(m.contour_graph()),
        (ModelKind::Pii, _) => Ok(Pii.contour_graph()),
        (ModelKind::PiiSlice, _) => Ok(PiiSlice.contour_graph()),
        (ModelKind::Pvi, _) => Pvi.model().contour_graph(),
        _ => fuchsian().contour_graph(),
    }
}

fn closed_eta_field(kind: ModelKind, p: &ModelPoint) -> Result<Arc<dyn TwoFormField>> {
    Ok(match (kind, p) {
        (_, ModelPoint::Scalar(m)) => Arc::new(m.contour_graph()),
        (ModelKind::Pii, _) => Arc::new(Analytic(PiiEta)),
        (ModelKind::PiiSlice, _) => Arc::new(Analytic(PiiSliceEta)),
        (ModelKind::Pvi, _) => Arc::new(Analytic(PviEta)),
        _ => Arc::new(fuchsian().closed_form_field()),
    })
}

fn closed_eta(kind: ModelKind, p: &ModelPoint) -> Result<TwoForm> {
    let x = p.coords();
    match (kind, p) {
        (_, ModelPoint::Scalar(m)) => Ok(m.eta_expected(&x)),
        (ModelKind::Pii, _) => pii_eta_closed_form(&x),
        (ModelKind::PiiSlice, _) => Analytic(PiiSliceEta).eval(&x),
        (ModelKind::Pvi, _) => pvi_eta_closed_form(&x),
        _ => fuchsian_eta_closed_form(&fuchsian(), &x),
    }
}

type Outcome = Result<(f64, Value)>;

fn run_eta(kind: ModelKind, p: &ModelPoint) -> Outcome {
    let x = p.coords();
    let labels = labels_of(kind, p);
    let graph = eta_total(&graph_of(kind, p)?, &x)?;
    let closed = closed_eta(kind, p)?;
    Ok((
        graph.max_abs_diff(&closed),
        json!({"eta": form_json(&labels, &graph), "closed_form": form_json(&labels, &closed)}),
    ))
}

fn run_closedness(kind: ModelKind, p: &ModelPoint) -> Outcome {
    let x = p.coords();
    let graph_defect = check_eta_closed(&graph_of(kind, p)?, &x)?;
    let closed_defect = exterior_derivative_2form(closed_eta_field(kind, p)?.as_ref(), &x)?.max_abs();
    Ok((
        graph_defect.max(closed_defect),
        json!({"graph_defect": graph_defect, "closed_form_defect": closed_defect}),
    ))
}

fn model_admissibility(kind: ModelKind, p: &ModelPoint) -> crate::potential::Admissibility {
    match p {
        ModelPoint::Scalar(m) => {
            let m = m.clone();
            Arc::new(move |x| m.check_admissible(x))
        }
        ModelPoint::Chart(_) => {
            let m: Arc<dyn ChartModel> = Arc::from(chart_model(kind).expect("chart model"));
            Arc::new(move |x| m.check_admissible(x))
        }
    }
}

/// Base point for the homotopy: `aux.base` if given, otherwise a seeded
/// nearby point whose segment to `x` is admissible.
fn potential_chart(kind: ModelKind, p: &ModelPoint, aux: Option<&Map<String, Value>>, seed: u64) -> Result<StarChart> {
    let x = p.coords();
    let admissible = model_admissibility(kind, p);
    if let Some(base) = aux.and_then(|a| a.get("base")) {
        let map = base
            .as_object()
            .ok_or_else(|| Error::Usage("aux.base must be a chart map".into()))?;
        let chart = StarChart::new(parse_chart(&labels_of(kind, p), map)?, admissible)?;
        chart.check_segment(&x)?;
        return Ok(chart);
    }
    let mut rng = sample_rng(seed);
    let base = crate::models::rejection_sample(
        &mut rng,
        |r| {
            x.iter()
                .map(|z| z + C64::from_polar(0.15 * z.norm().max(0.1), r.random_range(0.0..2.0 * PI)))
                .collect::<Vec<_>>()
        },
        |b| {
            StarChart::new(b.clone(), admissible.clone())
                .and_then(|c| c.check_segment(&x))
                .is_ok()
        },
    )
    .map_err(|_| Error::Path("no admissible base point found near the point; pass aux.base".into()))?;
    StarChart::new(base, admissible)
}

fn run_potential(kind: ModelKind, p: &ModelPoint, aux: Option<&Map<String, Value>>, seed: u64, quad_order: usize) -> Outcome {
    let x = p.coords();
    let labels = labels_of(kind, p);
    let eta = closed_eta_field(kind, p)?;
    let chart = potential_chart(kind, p, aux, seed)?;
    let theta = homotopy_potential(eta.as_ref(), &chart, &x, quad_order)?;
    let pot = HomotopyPotential::new(eta.clone(), chart.clone(), quad_order)?;
    let homotopy_residual = verify_potential(&pot, eta.as_ref(), &x)?;
    let closed: Option<Box<dyn OneFormField>> = match kind {
        ModelKind::Pii => Some(Box::new(Analytic(PiiTheta))),
        ModelKind::PiiSlice => Some(Box::new(Analytic(PiiSliceTheta))),
        ModelKind::Pvi => Some(Box::new(Analytic(PviTheta))),
        _ => None,
    };
    let mut details = json!({
        "base": chart_json(&labels, &chart.base),
        "theta": one_form_json(&labels, &theta),
        "homotopy_residual": homotopy_residual,
    });
    let mut residual = homotopy_residual;
    if let Some(th) = closed {
        let r = verify_potential(th.as_ref(), eta.as_ref(), &x)?;
        details["closed_form_residual"] = json!(r);
        residual = residual.max(r);
    }
    Ok((residual, details))
}

fn require_scalar(p: &ModelPoint) -> Result<&ScalarFuchsianModel> {
    match p {
        ModelPoint::Scalar(m) => Ok(m),
        ModelPoint::Chart(_) => Err(Error::Usage("this command needs --model scalar".into())),
    }
}

fn run_tau(p: &ModelPoint) -> Outcome {
    let m = require_scalar(p)?;
    let x = m.point();
    let labels = m.chart_labels();
    let dlt = m.dlog_tau(&x)?;
    let omega = m.omega_closed_form(&x)?;
    let corr = m.correction(&x);
    let r: Vec<C64> = dlt.iter().zip(&omega).map(|(a, b)| a - b).collect();
    let cc: f64 = corr.iter().map(|c| c.norm_sqr()).sum();
    let kappa = if cc > 0.0 {
        corr.iter().zip(&r).map(|(c, v)| c.conj() * v).sum::<C64>() / cc
    } else {
        C64::new(0.0, 0.0)
    };
    let residual = r
        .iter()
        .zip(&corr)
        .map(|(v, c)| (v - kappa * c).norm())
        .fold(0.0, f64::max);
    Ok((
        residual,
        json!({
            "tau": c_json(m.tau(&x)?),
            "kappa": c_json(kappa),
            "kappa_minus_i_pi": (kappa - I * PI).norm(),
            "dlog_tau_minus_omega": one_form_json(&labels, &r),
            "correction": one_form_json(&labels, &corr),
        }),
    ))
}

fn run_omega_quadrature(p: &ModelPoint) -> Outcome {
    let m = require_scalar(p)?;
    let x = m.point();
    let labels = m.chart_labels();
    let wq = scalar_omega_quadrature_all(m)?;
    let wc = m.omega_closed_form(&x)?;
    let vq = vartheta_quadrature_all(m)?;
    let vc = m.vartheta_closed_form(&x);
    let diff = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    let (rw, rv) = (diff(&wq, &wc), diff(&vq, &vc));
    Ok((
        rw.max(rv),
        json!({
            "omega_quadrature": one_form_json(&labels, &wq),
            "omega_closed_form": one_form_json(&labels, &wc),
            "omega_residual": rw,
            "vartheta_quadrature": one_form_json(&labels, &vq),
            "vartheta_residual": rv,
        }),
    ))
}

fn run_constraints(kind: ModelKind, p: &ModelPoint) -> Outcome {
    let x = p.coords();
    let residual = match (kind, p) {
        (_, ModelPoint::Scalar(m)) => {
            let g = m.contour_graph();
            g.vertices
                .iter()
                .map(|v| check_no_monodromy(v, &x))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max)
        }
        (ModelKind::Pii, _) => Pii.constraint_residual(&x)?,
        (ModelKind::PiiSlice, _) => PiiSlice.constraint_residual(&x)?,
        (ModelKind::Pvi, _) => Pvi.model().monodromy_residual(&x)?,
        _ => fuchsian().monodromy_residual(&x)?,
    };
    Ok((residual, json!({})))
}

fn default_tolerance(command: Command, kind: Option<ModelKind>) -> f64 {
    match command {
        Command::Eta => 1e-9,
        Command::Closedness => 1e-8,
        Command::Potential => 1e-7,
        Command::Tau => 1e-10,
        Command::OmegaQuadrature => 1e-8,
        Command::LemmaCheck => 1e-6,
        Command::StarJ => 1e-10,
        Command::Constraints => match kind {
            Some(ModelKind::Pii) | Some(ModelKind::PiiSlice) => 1e-10,
            _ => 1e-12,
        },
    }
}

fn finish(
    command: Command,
    model: &str,
    seed: Option<u64>,
    tolerance: f64,
    quad_order: usize,
    rows: Vec<(Value, f64, Value)>,
) -> VerificationReport {
    let results: Vec<PointResult> = rows
        .into_iter()
        .enumerate()
        .map(|(index, (point, residual, details))| PointResult {
            index,
            point,
            residual,
            pass: residual <= tolerance,
            details,
        })
        .collect();
    let max_residual = results
        .iter()
        .map(|r| if r.residual.is_nan() { f64::INFINITY } else { r.residual })
        .fold(0.0, f64::max);
    let pass = !results.is_empty() && results.iter().all(|r| r.pass);
    VerificationReport {
        command: command.name().into(),
        model: model.into(),
        seed,
        points_tested: results.len(),
        tolerance,
        quad_order,
        results,
        max_residual,
        pass,
    }
}

fn run_lemma(opts: &Options, tolerance: f64) -> Result<VerificationReport> {
    let mut rng = sample_rng(opts.seed);
    let cases = lemma_cases(&mut rng, opts.count.max(1))?;
    let rows = cases
        .par_iter()
        .map(|case| {
            let r = lemma_iterated_integral_check(case.kernel.as_ref(), &case.arc)?;
            Ok((
                json!({"kernel": case.name, "arc": format!("{:?}", case.arc)}),
                r.diff,
                json!({"lhs": c_json(r.lhs), "rhs": c_json(r.rhs)}),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(Command::LemmaCheck, "none", Some(opts.seed), tolerance, opts.quad_order, rows))
}

fn run_star(opts: &Options, tolerance: f64) -> Result<VerificationReport> {
    let mut rng = sample_rng(opts.seed);
    let mut configs = Vec::new();
    for i in 0..opts.count.max(1) {
        let cfg = StarConfig::random(3 + i % 4, &mut rng)?;
        let moved = cfg.perturbed(&mut rng, 0.05)?;
        configs.push((cfg, moved));
    }
    let rows = configs
        .par_iter()
        .map(|(cfg, moved)| {
            let j = star_integral_J(cfg, &cfg.default_c_placements())?;
            let jm = star_integral_J(moved, &moved.default_c_placements())?;
            let invariance = (jm.log_sum - j.log_sum).norm();
            Ok((
                json!({"v": c_json(cfg.v), "sigma": cfg.sigma.iter().map(|s| c_json(*s)).collect::<Vec<_>>()}),
                j.max_diff.max(jm.max_diff).max(invariance),
                json!({
                    "closed_form": c_json(j.closed_form),
                    "log_sum": c_json(j.log_sum),
                    "ray_quadrature": c_json(j.ray_quadrature),
                    "c_route": j.c_route.iter().map(|(c, v)| json!({"c": c_json(*c), "value": c_json(*v)})).collect::<Vec<_>>(),
                    "perturbation_change": invariance,
                }),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(Command::StarJ, "none", Some(opts.seed), tolerance, opts.quad_order, rows))
}

/// Run one parsed command line.
pub fn execute(cli: &Cli) -> Result<VerificationReport> {
    let opts = &cli.opts;
    if opts.quad_order == 0 {
        return Err(Error::Usage("--quad-order must be positive".into()));
    }
    let tolerance = opts.tolerance.unwrap_or_else(|| default_tolerance(cli.command, opts.model));
    if !(tolerance >= 0.0) {
        return Err(Error::Usage("--tolerance must be a non-negative number".into()));
    }
    match cli.command {
        Command::LemmaCheck => return run_lemma(opts, tolerance),
        Command::StarJ => return run_star(opts, tolerance),
        _ => {}
    }
    let kind = opts
        .model
        .ok_or_else(|| Error::Usage(format!("{} needs --model", cli.command.name())))?;
    if matches!(cli.command, Command::Tau | Command::OmegaQuadrature) && kind != ModelKind::Scalar {
        return Err(Error::Usage(format!("{} needs --model scalar", cli.command.name())));
    }
    let (points, aux, seed): (Vec<ModelPoint>, Option<Map<String, Value>>, Option<u64>) =
        match (&opts.point, opts.random) {
            (Some(text), false) => {
                let (p, aux) = parse_point(kind, &load_point_text(text)?)?;
                (vec![p], aux, None)
            }
            (None, true) => {
                if opts.count == 0 {
                    return Err(Error::Usage("--count must be positive".into()));
                }
                let mut rng = sample_rng(opts.seed);
                let pts = (0..opts.count)
                    .map(|_| sample_point(kind, &mut rng, opts.poles))
                    .collect::<Result<_>>()?;
                (pts, None, Some(opts.seed))
            }
            _ => return Err(Error::Usage("give either --point or --random".into())),
        };
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (residual, details) = match cli.command {
                Command::Eta => run_eta(kind, p),
                Command::Closedness => run_closedness(kind, p),
                Command::Potential => {
                    run_potential(kind, p, aux.as_ref(), opts.seed.wrapping_add(i as u64), opts.quad_order)
                }
                Command::Tau => run_tau(p),
                Command::OmegaQuadrature => run_omega_quadrature(p),
                Command::Constraints => run_constraints(kind, p),
                Command::LemmaCheck | Command::StarJ => unreachable!(),
            }
            .map_err(|e| Error::Domain(format!("point {i}: {e}")))?;
            Ok((point_json(kind, p), residual, details))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(cli.command, kind.name(), seed, tolerance, opts.quad_order, rows))
}

/// Parse arguments (without the program name) and run them.
pub fn run_args<I, T>(args: I) -> Result<VerificationReport>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("isotau")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Usage(e.to_string()))?;
    execute(&cli)
}

/// Parse arguments, run, write the report; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("isotau: {e}");
            return 2;
        }
    };
    let text = match cli.opts.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    match &cli.opts.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("isotau: cannot write '{}': {e}", path.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    if report.pass {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<VerificationReport> {
        let cli = Cli::try_parse_from(std::iter::once("isotau").chain(args.iter().copied()))
            .map_err(|e| Error::Usage(e.to_string()))?;
        execute(&cli)
    }

    #[test]
    fn slice_eta_at_unit_point() {
        let r = run(&["eta", "--model", "pii-slice", "--point", r#"{"s1":[1,0],"s3":[1,0]}"#]).unwrap();
        assert!(r.pass);
        let v = &r.results[0].details["eta"]["s1^s3"];
        let expected = 1.0 / (2.0 * PI);
        assert!(v[0].as_f64().unwrap().abs() < 1e-15);
        assert!((v[1].as_f64().unwrap() + expected).abs() < 1e-15);
    }

    #[test]
    fn usage_errors() {
        assert!(matches!(run(&["eta", "--random"]), Err(Error::Usage(_))));
        assert!(matches!(run(&["tau", "--model", "pii", "--random"]), Err(Error::Usage(_))));
        assert!(matches!(run(&["eta", "--model", "pii"]), Err(Error::Usage(_))));
        assert!(matches!(
            run(&["eta", "--model", "pii-slice", "--point", r#"{"s1":[1,0]}"#]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            run(&["eta", "--model", "pii-slice", "--point", r#"{"s1":[1,0],"s3":[1,0],"x":[0,0]}"#]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(run(&["eta", "--model", "pii-slice", "--point", "/no/such/file"]), Err(Error::Io(_))));
        assert!(matches!(
            run(&["eta", "--model", "pii-slice", "--point", r#"{"s1":[0,0],"s3":[1,0]}"#]),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn round_trip_of_scalar_point() {
        let r = run(&["eta", "--model", "scalar", "--random", "--seed", "4"]).unwrap();
        let text = serde_json::to_string(&r.results[0].point).unwrap();
        let (p, _) = parse_point(ModelKind::Scalar, &text).unwrap();
        let ModelPoint::Scalar(m) = p else { panic!() };
        assert_eq!(point_json(ModelKind::Scalar, &ModelPoint::Scalar(m)), r.results[0].point);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run(&["closedness", "--model", "pvi", "--random", "--seed", "2", "--count", "3"]).unwrap();
        let b = run(&["closedness", "--model", "pvi", "--random", "--seed", "2", "--count", "3"]).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["isotau", "constraints", "--model", "pii", "--random", "--out", "/dev/null"]), 0);
        assert_eq!(
            main_with_args(["isotau", "constraints", "--model", "pii", "--random", "--tolerance", "0", "--out", "/dev/null"]),
            1
        );
        assert_eq!(main_with_args(["isotau", "constraints", "--model", "nope", "--random"]), 2);
        assert_eq!(main_with_args(["isotau", "frobnicate"]), 2);
    }
}

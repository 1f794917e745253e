//! Experiments that compare oracle polynomials with the asymptotic
//! predictors, rate fits, and the zero-cluster study.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::asympt::{
    interval_envelope, lemma2_check, predict_interval_prec, predict_phi_formula,
    predict_residue_sum, predict_sigma0, ErrorOrder,
};
use crate::conformal::{
    classify, in_domain_d, lambda_map, psi, sigma0_boundary, v_pm, CurveParams, RegionLabel,
    DEFAULT_CLASSIFY_TOL,
};
use crate::error::{Error, Result};
use crate::mp::{format_decimal, MpComplex};
use crate::oracle::{
    cache_dir_from_env, cached_moments, default_bits, eval_pn, orthonormalize, pn_zeros,
    OrthoBasis,
};
use crate::special::{chi, chi_integral, f_q, kernel, varrho_pow, ChiEvalOptions};

/// Experiment ids accepted by [`run_experiment`].
pub const EXPERIMENT_IDS: [&str; 9] = [
    "carleman", "sigma1", "mainthm", "thm4a", "thm4b", "thm8", "residue", "lemma2", "chi",
];

/// Distance thresholds reported by [`zero_cluster_sweep`].
pub const CLUSTER_THRESHOLDS: [f64; 4] = [0.05, 0.1, 0.15, 0.2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub r: f64,
    /// Evaluation points as `[re, im]`: `z` values, or `t` values for
    /// mainthm, thm8, lemma2 and chi.
    pub points: Vec<[f64; 2]>,
    /// Degrees `n` (the scales `gamma` for chi).
    pub degrees: Vec<usize>,
    /// Second degree list: the endpoint degrees of thm4b and the mixed
    /// sequence of thm8.
    pub aux_degrees: Vec<usize>,
    pub basis_degree: Option<usize>,
    pub precision_bits: Option<u32>,
    /// Working precision of the chi-based predictors.
    pub chi_bits: u32,
    pub q: f64,
    pub record_runtime: bool,
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn default_for(id: &str) -> Result<Self> {
        let base = ExperimentConfig {
            r: 2.5,
            points: vec![],
            degrees: vec![],
            aux_degrees: vec![],
            basis_degree: None,
            precision_bits: None,
            chi_bits: 160,
            q: 0.0,
            record_runtime: false,
            cache_dir: None,
        };
        let cfg = match id {
            "carleman" => ExperimentConfig {
                points: vec![[3.0, 0.0]],
                degrees: vec![10, 20, 30],
                ..base
            },
            "sigma1" => ExperimentConfig {
                points: vec![[0.0, 1.5], [-3.0, 0.5]],
                degrees: vec![10, 20, 30],
                ..base
            },
            "mainthm" => ExperimentConfig {
                points: vec![[0.5, 0.0], [0.45, 0.2]],
                degrees: vec![16, 32, 64],
                precision_bits: Some(512),
                ..base
            },
            "thm4a" => {
                // psi(mu e^{i theta}) lies on the boundary of Sigma0
                let p = CurveParams::new(base.r)?;
                let pts = [2.0 * std::f64::consts::FRAC_PI_3, std::f64::consts::PI]
                    .iter()
                    .map(|&th| {
                        let z = crate::conformal::level_curve(p.mu, th, &p, 64)?.to_c64();
                        Ok([z.re, z.im])
                    })
                    .collect::<Result<Vec<_>>>()?;
                ExperimentConfig {
                    points: pts,
                    degrees: vec![16, 32, 64],
                    ..base
                }
            }
            "thm4b" => {
                let p = CurveParams::new(base.r)?;
                ExperimentConfig {
                    points: vec![[1.0, 0.0], [p.x_mu, 0.0]],
                    degrees: vec![32, 40, 48],
                    aux_degrees: vec![16, 32, 64],
                    ..base
                }
            }
            "thm8" => ExperimentConfig {
                points: vec![[0.45, 0.2]],
                degrees: vec![16, 256],
                aux_degrees: vec![16, 24, 256],
                precision_bits: Some(1152),
                ..base
            },
            "residue" => ExperimentConfig {
                points: vec![[-1.0, 0.0], [0.0, 1.5], [1.0, 0.0]],
                degrees: vec![24],
                precision_bits: Some(320),
                ..base
            },
            "lemma2" => ExperimentConfig {
                points: vec![[0.5, 0.0]],
                degrees: vec![32, 64, 128],
                ..base
            },
            "chi" => ExperimentConfig {
                points: vec![[0.5, 0.0], [0.45, 0.2], [1.2, -0.7], [0.05, 0.3]],
                degrees: vec![1, 3, 16],
                chi_bits: 128,
                ..base
            },
            other => return Err(Error::UnknownExperiment(other.to_string())),
        };
        Ok(cfg)
    }

    /// The defaults for `id` overlaid with the fields present in `json`.
    pub fn from_json_over(id: &str, json: &str) -> Result<Self> {
        let mut base = serde_json::to_value(Self::default_for(id)?)?;
        let over: serde_json::Value = serde_json::from_str(json)?;
        let serde_json::Value::Object(over) = over else {
            return Err(Error::Parse("experiment config must be a JSON object".into()));
        };
        let obj = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in over {
            obj.insert(k, v);
        }
        Ok(serde_json::from_value(base)?)
    }

    fn params(&self) -> Result<CurveParams> {
        CurveParams::new(self.r)
    }

    fn max_degree(&self) -> usize {
        self.degrees.iter().chain(&self.aux_degrees).copied().max().unwrap_or(0)
    }

    fn bits(&self) -> u32 {
        self.precision_bits
            .unwrap_or_else(|| default_bits(self.basis_degree.unwrap_or(self.max_degree())))
    }

    fn chi_opts(&self) -> ChiEvalOptions {
        ChiEvalOptions::default().with_bits(self.chi_bits)
    }
}

/// One cell of the error table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub point: usize,
    pub degree: usize,
    pub error: f64,
}

/// Least-squares slopes of `ln err` against `ln n` and against `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub algebraic: f64,
    pub geometric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRate {
    pub point: usize,
    pub tag: ErrorOrder,
    pub fit: RateFit,
}

/// A named sub-check contributing to `pass`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub precision_bits: u32,
    pub basis_degree: usize,
    pub quadrature_nodes: usize,
    pub chi_bits: u32,
    pub runtime_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelZeros {
    pub q: f64,
    /// Zeros counted by the argument principle over the cells that meet `D`.
    pub winding_count: usize,
    /// Newton-polished zeros in those cells.
    pub newton_zeros: Vec<[String; 2]>,
    /// Polished zeros lying in `D`.
    pub zeros_in_d: usize,
    /// Every cell had as many distinct polished zeros as its winding number.
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCluster {
    pub thresholds: Vec<f64>,
    /// `fractions[i][j]`: share of zeros of `p_{degrees[i]}` within `thresholds[j]`.
    pub fractions: Vec<Vec<f64>>,
    pub kernel: Vec<KernelZeros>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment_id: String,
    pub params: CurveParams,
    pub points: Vec<[String; 2]>,
    pub degrees: Vec<usize>,
    pub errors: Vec<ErrorEntry>,
    pub fitted_rate: Vec<PointRate>,
    pub rule: String,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub budget: Budget,
    pub notes: Vec<String>,
    pub zero_cluster: Option<ZeroCluster>,
}

fn decimal_pair(z: &MpComplex) -> [String; 2] {
    let d = crate::mp::display_digits(z.prec());
    [format_decimal(z.re(), d), format_decimal(z.im(), d)]
}

impl VerificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per table cell.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["experiment_id", "point", "re", "im", "degree", "error"])?;
        for e in &self.errors {
            let [re, im] = &self.points[e.point];
            w.write_record([
                self.experiment_id.as_str(),
                &e.point.to_string(),
                re,
                im,
                &e.degree.to_string(),
                &format_decimal(&Float::with_val(64, e.error), 17),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Errors of one point in degree order of the table.
    pub fn series(&self, point: usize) -> (Vec<usize>, Vec<f64>) {
        self.errors
            .iter()
            .filter(|e| e.point == point)
            .map(|e| (e.degree, e.error))
            .unzip()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Slopes of `ln err` against `ln n` (algebraic) and `n` (geometric).
pub fn fit_rate(ns: &[usize], errs: &[f64]) -> Result<RateFit> {
    if ns.len() != errs.len() || ns.len() < 3 {
        return Err(Error::Domain(format!(
            "fit_rate needs two series of equal length >= 3, got {} and {}",
            ns.len(),
            errs.len()
        )));
    }
    if let Some(bad) = errs.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Domain(format!("fit_rate needs positive finite errors, got {bad}")));
    }
    if ns.iter().any(|&n| n == 0) || ns.iter().all(|&n| n == ns[0]) {
        return Err(Error::Domain("fit_rate needs distinct positive degrees".into()));
    }
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let slope = |x: &[f64]| {
        let m = x.len() as f64;
        let mx = x.iter().sum::<f64>() / m;
        let my = y.iter().sum::<f64>() / m;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxy / sxx
    };
    let ln_n: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let lin_n: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(RateFit {
        algebraic: slope(&ln_n),
        geometric: slope(&lin_n),
    })
}

/// An orthonormal basis with the node count of its moment quadrature.
#[derive(Debug)]
pub struct StoredBasis {
    pub basis: OrthoBasis,
    pub quadrature_nodes: usize,
}

type BasisKey = (u64, usize, u32);

fn store() -> &'static Mutex<HashMap<BasisKey, Arc<StoredBasis>>> {
    static STORE: OnceLock<Mutex<HashMap<BasisKey, Arc<StoredBasis>>>> = OnceLock::new();
    STORE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Basis of degree `n` at `bits`, memoized in-process and, when `dir` is
/// given, backed by the on-disk moment cache.
pub fn basis_for(
    params: &CurveParams,
    n: usize,
    bits: u32,
    dir: Option<&Path>,
) -> Result<Arc<StoredBasis>> {
    let key = (params.r.to_bits(), n, bits);
    if let Some(b) = store().lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    let m = cached_moments(params, n, bits, dir)?;
    let stored = Arc::new(StoredBasis {
        basis: orthonormalize(&m)?,
        quadrature_nodes: m.quadrature_nodes,
    });
    store().lock().unwrap().insert(key, stored.clone());
    Ok(stored)
}

fn point(p: &[f64; 2], bits: u32) -> MpComplex {
    MpComplex::new(bits, p[0], p[1])
}

fn rel_err(a: &MpComplex, b: &MpComplex) -> f64 {
    (a - b).abs_f64() / b.abs_f64()
}

fn relative_spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    hi / lo
}

struct Ctx<'a> {
    id: &'a str,
    cfg: &'a ExperimentConfig,
    params: CurveParams,
    points: Vec<[String; 2]>,
    errors: Vec<ErrorEntry>,
    rates: Vec<PointRate>,
    checks: Vec<Check>,
    notes: Vec<String>,
    basis: Option<Arc<StoredBasis>>,
}

impl<'a> Ctx<'a> {
    fn new(id: &'a str, cfg: &'a ExperimentConfig) -> Result<Self> {
        Ok(Ctx {
            id,
            cfg,
            params: cfg.params()?,
            points: vec![],
            errors: vec![],
            rates: vec![],
            checks: vec![],
            notes: vec![],
            basis: None,
        })
    }

    fn basis(&mut self) -> Result<Arc<StoredBasis>> {
        if let Some(b) = &self.basis {
            return Ok(b.clone());
        }
        let n = self.cfg.basis_degree.unwrap_or(self.cfg.max_degree());
        let dir = self.cfg.cache_dir.clone().or_else(cache_dir_from_env);
        let b = basis_for(&self.params, n, self.cfg.bits(), dir.as_deref())?;
        self.basis = Some(b.clone());
        Ok(b)
    }

    fn add_point(&mut self, z: &MpComplex) -> usize {
        self.points.push(decimal_pair(z));
        self.points.len() - 1
    }

    fn record(&mut self, point: usize, degree: usize, error: f64) {
        self.errors.push(ErrorEntry {
            point,
            degree,
            error,
        });
    }

    fn check(&mut self, name: String, value: f64, pass: bool) {
        self.checks.push(Check { name, value, pass });
    }

    fn fit(&mut self, point: usize, tag: ErrorOrder, ns: &[usize], errs: &[f64]) -> Option<RateFit> {
        match fit_rate(ns, errs) {
            Ok(fit) => {
                self.rates.push(PointRate { point, tag, fit });
                Some(fit)
            }
            Err(e) => {
                self.notes.push(format!("point {point}: no rate fit ({e})"));
                None
            }
        }
    }

    /// Strictly decreasing errors and a negative geometric slope.
    fn geometric_rule(&mut self, point: usize, ns: &[usize], errs: &[f64]) {
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        self.check(format!("point {point}: strictly decreasing"), errs[errs.len() - 1], decreasing);
        if let Some(fit) = self.fit(point, ErrorOrder::Geometric, ns, errs) {
            self.check(format!("point {point}: geometric slope"), fit.geometric, fit.geometric < 0.0);
        }
    }

    /// `n E_n` within a factor 4 of each other.
    fn one_over_n_window(&mut self, point: usize, ns: &[usize], errs: &[f64]) {
        let scaled: Vec<f64> = ns.iter().zip(errs).map(|(&n, e)| n as f64 * e).collect();
        let spread = relative_spread(&scaled);
        self.check(format!("point {point}: n*E_n spread"), spread, spread < 4.0);
        self.fit(point, ErrorOrder::OneOverN, ns, errs);
    }

    fn finish(self, started: Instant) -> Result<VerificationReport> {
        if self.checks.is_empty() {
            return Err(Error::Domain(format!(
                "experiment {} evaluated no admissible point",
                self.id
            )));
        }
        let pass = self.checks.iter().all(|c| c.pass);
        let mut degrees: Vec<usize> = self.errors.iter().map(|e| e.degree).collect();
        degrees.sort_unstable();
        degrees.dedup();
        let (bits, nodes, deg) = match &self.basis {
            Some(b) => (b.basis.precision_bits, b.quadrature_nodes, b.basis.degree),
            None => (0, 0, 0),
        };
        Ok(VerificationReport {
            experiment_id: self.id.to_string(),
            params: self.params,
            points: self.points,
            degrees,
            errors: self.errors,
            fitted_rate: self.rates,
            rule: rule_text(self.id).to_string(),
            checks: self.checks,
            pass,
            budget: Budget {
                precision_bits: bits,
                basis_degree: deg,
                quadrature_nodes: nodes,
                chi_bits: self.cfg.chi_bits,
                runtime_ms: self
                    .cfg
                    .record_runtime
                    .then(|| started.elapsed().as_millis() as u64),
            },
            notes: self.notes,
            zero_cluster: None,
        })
    }
}

fn rule_text(id: &str) -> &'static str {
    match id {
        "carleman" | "sigma1" => {
            "relative error strictly decreasing in n with negative geometric slope at every point"
        }
        "mainthm" => "n * |sqrt(n) mu^-n (P_n - prediction)| within a factor 4 over the degrees",
        "thm4a" => "n * relative error at most 4 times its value at the first degree",
        "thm4b" => {
            "interior: eps_n strictly decreasing with negative geometric slope; \
             at x_mu: n * eps_n within a factor 4 over the endpoint degrees"
        }
        "thm8" => {
            "|sqrt(n) mu^-n P_n - f_q| strictly decreasing; max pairwise spread over the mixed \
             degrees exceeds twice the last error"
        }
        "residue" => "relative error below 1e-4",
        "lemma2" => "consecutive ratios of |LHS/RHS - 1| in [0.25, 0.75] over degree doubling",
        "chi" => "|series - integral| below 1e-10",
        "zero-cluster" => "at least 80% of zeros within 0.15 for every degree",
        _ => "",
    }
}

fn require_degrees(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.degrees.is_empty() || cfg.points.is_empty() {
        return Err(Error::Domain("experiment needs at least one point and one degree".into()));
    }
    Ok(())
}

/// Runs experiment `id` and returns its report.
pub fn run_experiment(id: &str, cfg: &ExperimentConfig) -> Result<VerificationReport> {
    if !EXPERIMENT_IDS.contains(&id) {
        return Err(Error::UnknownExperiment(id.to_string()));
    }
    require_degrees(cfg)?;
    let started = Instant::now();
    let mut ctx = Ctx::new(id, cfg)?;
    match id {
        "carleman" | "sigma1" | "thm4a" => exp_phi(&mut ctx)?,
        "mainthm" => exp_mainthm(&mut ctx)?,
        "thm4b" => exp_thm4b(&mut ctx)?,
        "thm8" => exp_thm8(&mut ctx)?,
        "residue" => exp_residue(&mut ctx)?,
        "lemma2" => exp_lemma2(&mut ctx)?,
        "chi" => exp_chi(&mut ctx)?,
        _ => unreachable!(),
    }
    ctx.finish(started)
}

fn exp_phi(ctx: &mut Ctx) -> Result<()> {
    let b = ctx.basis()?;
    let bits = b.basis.precision_bits;
    let p = ctx.params;
    for raw in &ctx.cfg.points {
        let z = point(raw, bits);
        let label = classify(&z, &p, DEFAULT_CLASSIFY_TOL);
        let on_edge = (v_pm(&z, &p).0.abs_f64() - p.mu).abs() < 1e-9;
        let admissible = match ctx.id {
            "carleman" => matches!(label, RegionLabel::Exterior),
            "sigma1" => matches!(label, RegionLabel::Sigma1),
            _ => matches!(label, RegionLabel::Sigma1) || on_edge,
        };
        if !admissible {
            ctx.notes.push(format!("skipped {z}: classified {}", label.as_str()));
            continue;
        }
        let idx = ctx.add_point(&z);
        let mut errs = vec![];
        for &n in &ctx.cfg.degrees {
            let pred = predict_phi_formula(&z, n, &p)?.value;
            let e = rel_err(&pred, &eval_pn(&b.basis, n, &z)?);
            ctx.record(idx, n, e);
            errs.push(e);
        }
        let ns = ctx.cfg.degrees.clone();
        if ctx.id == "thm4a" {
            let first = ns[0] as f64 * errs[0];
            let worst = ns
                .iter()
                .zip(&errs)
                .map(|(&n, e)| n as f64 * e / first)
                .fold(0.0, f64::max);
            ctx.check(format!("point {idx}: n*E_n growth"), worst, worst <= 4.0);
            ctx.fit(idx, ErrorOrder::OneOverN, &ns, &errs);
        } else {
            ctx.geometric_rule(idx, &ns, &errs);
        }
    }
    Ok(())
}

/// `sqrt(n) mu^{-n}` at `prec`.
fn sigma0_scale(n: usize, mu: &Float) -> Float {
    let prec = mu.prec();
    Float::with_val(prec, n).sqrt() / Float::with_val(prec, rug::ops::Pow::pow(mu, n as u32))
}

fn sigma0_z(t: &MpComplex, p: &CurveParams) -> Result<MpComplex> {
    psi(&lambda_map(t, p)?, p)
}

fn exp_mainthm(ctx: &mut Ctx) -> Result<()> {
    let b = ctx.basis()?;
    let bits = b.basis.precision_bits;
    let p = ctx.params;
    let opts = ctx.cfg.chi_opts();
    let mu = p.consts(opts.precision_bits).mu;
    for raw in &ctx.cfg.points {
        let t = point(raw, bits);
        let z = sigma0_z(&t, &p)?;
        let idx = ctx.add_point(&t);
        let mut errs = vec![];
        for &n in &ctx.cfg.degrees {
            let pred = predict_sigma0(&t, n, &p, &opts)?.value;
            let o = eval_pn(&b.basis, n, &z)?.with_prec(opts.precision_bits);
            let e = (&o - &pred).scale(&sigma0_scale(n, &mu)).abs_f64();
            ctx.record(idx, n, e);
            errs.push(e);
        }
        let ns = ctx.cfg.degrees.clone();
        ctx.one_over_n_window(idx, &ns, &errs);
    }
    Ok(())
}

fn exp_thm4b(ctx: &mut Ctx) -> Result<()> {
    let b = ctx.basis()?;
    let bits = b.basis.precision_bits;
    let p = ctx.params;
    let c = p.consts(bits);
    for raw in &ctx.cfg.points {
        if raw[1] != 0.0 || raw[0] < p.x_mu - 1e-12 || raw[0] > 2.0 {
            ctx.notes.push(format!("skipped {raw:?}: not on [x_mu, 2]"));
            continue;
        }
        let endpoint = (raw[0] - p.x_mu).abs() < 1e-12;
        let x = if endpoint {
            c.x_mu.clone()
        } else {
            Float::with_val(bits, raw[0])
        };
        let theta = Float::with_val(bits, Float::with_val(bits, &x / 2u32).acos_ref());
        let z = MpComplex::from_real(x);
        let idx = ctx.add_point(&z);
        let ns = if endpoint {
            ctx.cfg.aux_degrees.clone()
        } else {
            ctx.cfg.degrees.clone()
        };
        let mut errs = vec![];
        for &n in &ns {
            let pred = predict_interval_prec(&theta, n, &p)?.value;
            let env = interval_envelope(&theta, n, &p)?;
            let diff = (&eval_pn(&b.basis, n, &z)? - &pred).abs();
            let e = Float::with_val(bits, diff / &env).to_f64();
            ctx.record(idx, n, e);
            errs.push(e);
        }
        if endpoint {
            ctx.one_over_n_window(idx, &ns, &errs);
        } else {
            ctx.geometric_rule(idx, &ns, &errs);
        }
    }
    Ok(())
}

fn exp_thm8(ctx: &mut Ctx) -> Result<()> {
    let b = ctx.basis()?;
    let bits = b.basis.precision_bits;
    let p = ctx.params;
    let opts = ctx.cfg.chi_opts();
    let mu = p.consts(opts.precision_bits).mu;
    for raw in &ctx.cfg.points {
        let t = point(raw, bits);
        let z = sigma0_z(&t, &p)?;
        let limit = f_q(&t, ctx.cfg.q, &p, &opts)?;
        let idx = ctx.add_point(&t);
        let scaled = |n: usize| -> Result<MpComplex> {
            let o = eval_pn(&b.basis, n, &z)?.with_prec(opts.precision_bits);
            Ok(o.scale(&sigma0_scale(n, &mu)))
        };
        let mut errs = vec![];
        for &n in &ctx.cfg.degrees {
            let e = (&scaled(n)? - &limit).abs_f64();
            ctx.record(idx, n, e);
            errs.push(e);
        }
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        ctx.check(format!("point {idx}: decreasing along the subsequence"), errs[errs.len() - 1], decreasing);
        if !ctx.cfg.aux_degrees.is_empty() {
            let vals = ctx
                .cfg
                .aux_degrees
                .iter()
                .map(|&n| scaled(n))
                .collect::<Result<Vec<_>>>()?;
            let mut spread = 0f64;
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    spread = spread.max((&vals[i] - &vals[j]).abs_f64());
                }
            }
            let last = errs[errs.len() - 1];
            ctx.check(format!("point {idx}: mixed spread / last error"), spread / last, spread > 2.0 * last);
        }
    }
    Ok(())
}

fn exp_residue(ctx: &mut Ctx) -> Result<()> {
    let b = ctx.basis()?;
    let bits = b.basis.precision_bits;
    let p = ctx.params;
    for raw in &ctx.cfg.points {
        let z = point(raw, bits);
        let idx = ctx.add_point(&z);
        for &n in &ctx.cfg.degrees {
            let pred = predict_residue_sum(&z, n, &p, None)?.value;
            let e = rel_err(&pred, &eval_pn(&b.basis, n, &z)?);
            ctx.record(idx, n, e);
            ctx.check(format!("point {idx}, n = {n}: relative error"), e, e < 1e-4);
        }
    }
    Ok(())
}

fn exp_lemma2(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.params;
    for raw in &ctx.cfg.points {
        let t = point(raw, 128);
        let idx = ctx.add_point(&t);
        let mut errs = vec![];
        for &n in &ctx.cfg.degrees {
            let e = lemma2_check(&t, n, &p)?;
            ctx.record(idx, n, e);
            errs.push(e);
        }
        for (w, ns) in errs.windows(2).zip(ctx.cfg.degrees.windows(2)) {
            let r = w[1] / w[0];
            let name = format!("point {idx}: ratio {} -> {}", ns[0], ns[1]);
            ctx.check(name, r, (0.25..=0.75).contains(&r));
        }
        let ns = ctx.cfg.degrees.clone();
        ctx.fit(idx, ErrorOrder::OneOverN, &ns, &errs);
    }
    Ok(())
}

fn exp_chi(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.params;
    let opts = ctx.cfg.chi_opts();
    for raw in &ctx.cfg.points {
        let t = point(raw, opts.precision_bits);
        let idx = ctx.add_point(&t);
        for &g in &ctx.cfg.degrees {
            let gamma = Float::with_val(opts.precision_bits, g);
            let series = chi(&t.scale(&gamma), &p, &opts)?;
            let e = (&chi_integral(&t, g as f64, &p, &opts)? - &series).abs_f64();
            ctx.record(idx, g, e);
            ctx.check(format!("point {idx}, gamma = {g}"), e, e < 1e-10);
        }
    }
    Ok(())
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0)
    };
    (p - (a + d * s)).norm()
}

/// Distance from `z` to `Sigma0 + [x_mu, 2]`, with `Sigma0` represented by
/// its boundary polyline; points classified into `Sigma0` are at distance 0.
pub fn cluster_distance(z: &MpComplex, boundary: &[Complex64], params: &CurveParams) -> f64 {
    if classify(z, params, DEFAULT_CLASSIFY_TOL) == RegionLabel::Sigma0 {
        return 0.0;
    }
    let p = z.to_c64();
    let seg = segment_distance(p, Complex64::new(params.x_mu, 0.0), Complex64::new(2.0, 0.0));
    boundary
        .windows(2)
        .map(|w| segment_distance(p, w[0], w[1]))
        .fold(seg, f64::min)
}

/// Vertices of the polyline of the boundary of Sigma0 used by [`cluster_distance`].
pub const CLUSTER_POLYLINE_POINTS: usize = 2048;

/// Zeros of `p_n` for each `n`, their distances to `Sigma0 + [x_mu, 2]`, and
/// kernel zeros in `D` for `q` in `{0, 1/4, 1/2, 3/4}`.
///
/// `precision` defaults to the oracle default for the largest degree.
pub fn zero_cluster_sweep(
    n_list: &[usize],
    params: &CurveParams,
    precision: Option<u32>,
) -> Result<VerificationReport> {
    zero_cluster_sweep_with(n_list, params, precision, cache_dir_from_env().as_deref())
}

pub fn zero_cluster_sweep_with(
    n_list: &[usize],
    params: &CurveParams,
    precision: Option<u32>,
    cache_dir: Option<&Path>,
) -> Result<VerificationReport> {
    let Some(&top) = n_list.iter().max() else {
        return Err(Error::Domain("zero_cluster_sweep needs at least one degree".into()));
    };
    if n_list.contains(&0) {
        return Err(Error::Domain("p_0 has no zeros".into()));
    }
    let bits = precision.unwrap_or_else(|| default_bits(top));
    let stored = basis_for(params, top, bits, cache_dir)?;
    let boundary: Vec<Complex64> = sigma0_boundary(CLUSTER_POLYLINE_POINTS, params, 64)?
        .iter()
        .map(|z| z.to_c64())
        .collect();
    let mut points = vec![];
    let mut errors = vec![];
    let mut fractions = vec![];
    let mut checks = vec![];
    for &n in n_list {
        let zeros = pn_zeros(&stored.basis, n)?;
        let mut within = [0usize; CLUSTER_THRESHOLDS.len()];
        for z in &zeros {
            let d = cluster_distance(z, &boundary, params);
            errors.push(ErrorEntry {
                point: points.len(),
                degree: n,
                error: d,
            });
            points.push(decimal_pair(z));
            for (k, th) in CLUSTER_THRESHOLDS.iter().enumerate() {
                if d <= *th {
                    within[k] += 1;
                }
            }
        }
        let frac: Vec<f64> = within.iter().map(|&w| w as f64 / zeros.len() as f64).collect();
        checks.push(Check {
            name: format!("n = {n}: fraction within 0.15"),
            value: frac[2],
            pass: frac[2] >= 0.8,
        });
        fractions.push(frac);
    }
    let kernel = [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|&q| kernel_zeros(q, params))
        .collect::<Result<Vec<_>>>()?;
    for k in &kernel {
        checks.push(Check {
            name: format!("q = {}: winding and Newton agree", k.q),
            value: k.winding_count as f64,
            pass: k.agree,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    let mut degrees = n_list.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    Ok(VerificationReport {
        experiment_id: "zero-cluster".into(),
        params: *params,
        points,
        degrees,
        errors,
        fitted_rate: vec![],
        rule: rule_text("zero-cluster").into(),
        checks,
        pass,
        budget: Budget {
            precision_bits: bits,
            basis_degree: top,
            quadrature_nodes: stored.quadrature_nodes,
            chi_bits: KERNEL_NEWTON_BITS,
            runtime_ms: None,
        },
        notes: vec![],
        zero_cluster: Some(ZeroCluster {
            thresholds: CLUSTER_THRESHOLDS.to_vec(),
            fractions,
            kernel,
        }),
    })
}

const KERNEL_GRID: usize = 6;
const KERNEL_NEWTON_BITS: u32 = 128;

struct KernelFn {
    scale_lo: Float,
    scale_hi: Float,
    params: CurveParams,
    lo: ChiEvalOptions,
    hi: ChiEvalOptions,
}

impl KernelFn {
    fn new(q: f64, params: &CurveParams) -> Result<Self> {
        let lo = ChiEvalOptions::new(64, 1e-15, 100_000)?;
        let hi = ChiEvalOptions::new(KERNEL_NEWTON_BITS, 1e-32, 100_000)?;
        Ok(KernelFn {
            scale_lo: varrho_pow(q, &params.consts(72)),
            scale_hi: varrho_pow(q, &params.consts(KERNEL_NEWTON_BITS + 8)),
            params: *params,
            lo,
            hi,
        })
    }

    fn eval(&self, t: Complex64) -> Result<Complex64> {
        let v = kernel(&MpComplex::from_c64(64, t), &self.scale_lo, &self.params, &self.lo)?;
        Ok(v.to_c64())
    }

    fn eval_hi(&self, t: &MpComplex) -> Result<MpComplex> {
        kernel(t, &self.scale_hi, &self.params, &self.hi)
    }
}

/// Change of `arg f` along the segment `a -> b`, refined until no step
/// turns by more than 0.5 rad.
fn arg_change<F>(f: &F, a: Complex64, b: Complex64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut total = 0.0;
    let mut stack = vec![(a, f(a)?, b, f(b)?, 0u32)];
    while let Some((x, fx, y, fy, depth)) = stack.pop() {
        let d = (fy / fx).arg();
        if d.abs() <= 0.5 || depth >= 24 {
            if depth >= 24 {
                return Err(Error::NonConvergence(format!(
                    "argument-principle path passes too close to a zero near {x}"
                )));
            }
            total += d;
            continue;
        }
        let m = (x + y) / 2.0;
        let fm = f(m)?;
        stack.push((m, fm, y, fy, depth + 1));
        stack.push((x, fx, m, fm, depth + 1));
    }
    Ok(total)
}

fn newton(f: &KernelFn, start: Complex64) -> Result<Option<MpComplex>> {
    let prec = KERNEL_NEWTON_BITS;
    let h = MpComplex::new(prec, 1e-10, 0.0);
    let mut t = MpComplex::from_c64(prec, start);
    for _ in 0..60 {
        if t.re().to_f64() <= 0.0 {
            return Ok(None);
        }
        let v = f.eval_hi(&t)?;
        let d = &(&f.eval_hi(&(&t + &h))? - &f.eval_hi(&(&t - &h))?) / &h.scale_f64(2.0);
        let step = &v / &d;
        t = &t - &step;
        if step.abs_f64() < 1e-24 {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Zeros of the `q` kernel in cells of a grid covering `D`.
pub fn kernel_zeros(q: f64, params: &CurveParams) -> Result<KernelZeros> {
    let f = KernelFn::new(q, params)?;
    let inv_r = 1.0 / params.r;
    // Offsets keep the cell edges away from symmetric positions.
    let (x0, x1) = (params.r * params.mu * params.mu / 2.0 - 1e-3, 2.0 * inv_r + 1.3e-3);
    let (y0, y1) = (-inv_r - 1.1e-3, inv_r + 0.7e-3);
    let (dx, dy) = ((x1 - x0) / KERNEL_GRID as f64, (y1 - y0) / KERNEL_GRID as f64);
    let mut winding_count = 0usize;
    let mut zeros: Vec<MpComplex> = vec![];
    let mut agree = true;
    for i in 0..KERNEL_GRID {
        for j in 0..KERNEL_GRID {
            let (ax, ay) = (x0 + i as f64 * dx, y0 + j as f64 * dy);
            let corners = [
                Complex64::new(ax, ay),
                Complex64::new(ax + dx, ay),
                Complex64::new(ax + dx, ay + dy),
                Complex64::new(ax, ay + dy),
            ];
            if !cell_meets_d(&corners, params) {
                continue;
            }
            let mut total = 0.0;
            for k in 0..4 {
                total += arg_change(&|t| f.eval(t), corners[k], corners[(k + 1) % 4])?;
            }
            let count = (total / std::f64::consts::TAU).round();
            if count < 0.0 {
                return Err(Error::NonConvergence(format!("negative winding {count} in a cell")));
            }
            let count = count as usize;
            winding_count += count;
            if count == 0 {
                continue;
            }
            let mut found: Vec<MpComplex> = vec![];
            let starts = (0..=4 * count).map(|s| {
                let u = (s as f64 + 0.5) / (4 * count + 1) as f64;
                Complex64::new(ax + dx * (0.5 + 0.4 * (u * 7.0).sin()), ay + dy * u)
            });
            for s in starts {
                if let Some(r) = newton(&f, s)? {
                    let rc = r.to_c64();
                    let inside = rc.re >= ax && rc.re < ax + dx && rc.im >= ay && rc.im < ay + dy;
                    if inside && found.iter().all(|g| (g - &r).abs_f64() > 1e-12) {
                        found.push(r);
                    }
                }
                if found.len() == count {
                    break;
                }
            }
            agree &= found.len() == count;
            zeros.extend(found);
        }
    }
    let zeros_in_d = zeros.iter().filter(|z| in_domain_d(z, params)).count();
    Ok(KernelZeros {
        q,
        winding_count,
        newton_zeros: zeros.iter().map(decimal_pair).collect(),
        zeros_in_d,
        agree,
    })
}

fn cell_meets_d(corners: &[Complex64; 4], params: &CurveParams) -> bool {
    let inv_r = 1.0 / params.r;
    let cut = params.r * params.mu * params.mu / 2.0;
    let (xa, xb) = (corners[0].re, corners[2].re);
    let (ya, yb) = (corners[0].im, corners[2].im);
    if xb <= cut {
        return false;
    }
    // nearest point of the cell to the disk centre
    let cx = inv_r.clamp(xa, xb);
    let cy = 0f64.clamp(ya, yb);
    (Complex64::new(cx, cy) - inv_r).norm() < inv_r
}

//! Closed-form asymptotic predictors for `p_n`, the finite residue-sum
//! representation, and numeric checks of the two technical lemmas behind the
//! interior asymptotics.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::conformal::{
    classify, in_domain_d, lambda_prime_with, lambda_with, sqrt_branch, t_pm, v_pm, CurveConsts,
    CurveParams, RegionLabel, DEFAULT_CLASSIFY_TOL,
};
use crate::error::{Error, Result};
use crate::mp::{eps_f64, MpComplex};
use crate::special::{chi, kernel, prefactor, ChiEvalOptions};

/// Error order a predictor claims at the point it was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorOrder {
    #[serde(rename = "O(1/n)")]
    OneOverN,
    #[serde(rename = "O(rho^{2n})")]
    RhoTwoN,
    #[serde(rename = "geometric")]
    Geometric,
    #[serde(rename = "unknown")]
    Unknown,
}

impl ErrorOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorOrder::OneOverN => "O(1/n)",
            ErrorOrder::RhoTwoN => "O(rho^{2n})",
            ErrorOrder::Geometric => "geometric",
            ErrorOrder::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PredictorResult {
    pub value: MpComplex,
    pub validity_region: Vec<RegionLabel>,
    pub claimed_error_order: ErrorOrder,
}

/// Distance in `|v_+|` below which a point counts as lying on the boundary of Sigma0.
const SIGMA0_EDGE_TOL: f64 = 1e-8;

fn require_degree(n: usize, min: usize) -> Result<u32> {
    if n < min {
        return Err(Error::Domain(format!("degree must be at least {min}, got {n}")));
    }
    u32::try_from(n).map_err(|_| Error::Overflow(format!("degree {n} does not fit in u32")))
}

fn pole_at_pm2(s: &MpComplex, what: &str) -> Result<()> {
    if s.abs_f64() <= eps_f64(s.prec().saturating_sub(8)).sqrt() {
        return Err(Error::Pole(format!("{what} is singular at z = +-2")));
    }
    Ok(())
}

/// `sqrt(n+1) v_+^n (z + s) / (2R s)`, `s = sqrt(z^2 - 4)`: the exterior
/// (Carleman) formula continued to Sigma1 and the boundary of Sigma0.
///
/// The value is returned at any `z` other than `+-2`; the validity region
/// says where it describes `p_n`.
pub fn predict_phi_formula(z: &MpComplex, n: usize, params: &CurveParams) -> Result<PredictorResult> {
    let nn = require_degree(n, 0)?;
    let prec = z.prec();
    let s = sqrt_branch(z);
    pole_at_pm2(&s, "the Carleman predictor")?;
    let (vp, _) = v_pm(z, params);
    let c = params.consts(prec);
    let two_r = Float::with_val(prec, 2u32 * &c.r);
    let tail = &(z + &s) / &s.scale(&two_r);
    let root = Float::with_val(prec, n as u64 + 1).sqrt();
    let value = (&vp.powu(nn) * &tail).scale(&root);
    let edge = (vp.abs_f64() - params.mu).abs() <= SIGMA0_EDGE_TOL;
    Ok(PredictorResult {
        value,
        validity_region: vec![RegionLabel::Exterior, RegionLabel::OnL1, RegionLabel::Sigma1],
        claimed_error_order: if edge {
            ErrorOrder::OneOverN
        } else {
            ErrorOrder::Geometric
        },
    })
}

/// Main term for `P_n(t) = p_n(psi(lambda(t)))` on `D`:
/// `(mu^n / sqrt n) * prefactor(t) * kernel(t, n)`.
pub fn predict_sigma0(
    t: &MpComplex,
    n: usize,
    params: &CurveParams,
    opts: &ChiEvalOptions,
) -> Result<PredictorResult> {
    let nn = require_degree(n, 1)?;
    if !in_domain_d(t, params) {
        return Err(Error::Domain(format!(
            "t = {} is outside D = {{|t - 1/R| < 1/R, Re t > R mu^2/2}}",
            t
        )));
    }
    let prec = opts.precision_bits + 8;
    let c = params.consts(prec);
    let t = t.with_prec(prec);
    let k = kernel(&t, &Float::with_val(prec, nn), params, opts)?;
    let mu_n = Float::with_val(prec, rug::ops::Pow::pow(&c.mu, nn));
    let scale = mu_n / Float::with_val(prec, nn).sqrt();
    let value = (&prefactor(&t, &c) * &k).scale(&scale).with_prec(opts.precision_bits);
    Ok(PredictorResult {
        value,
        validity_region: vec![RegionLabel::Sigma0],
        claimed_error_order: ErrorOrder::OneOverN,
    })
}

/// `arccos(x_mu / 2)`, the angle of `x_mu` on the interval `[-2, 2]`.
pub fn interval_end_angle(params: &CurveParams) -> f64 {
    (params.x_mu / 2.0).acos()
}

/// `sqrt(n+1) (2/R)^{n+1} cos^n(theta/2)`, the common scale of
/// [`predict_interval`] and its error term.
pub fn interval_envelope(theta: &Float, n: usize, params: &CurveParams) -> Result<Float> {
    let nn = require_degree(n, 0)?;
    let prec = theta.prec();
    let c = params.consts(prec);
    let half = Float::with_val(prec, theta / 2u32).cos();
    let pw = Float::with_val(prec, rug::ops::Pow::pow(&c.rho, nn + 1));
    let cn = Float::with_val(prec, rug::ops::Pow::pow(&half, nn));
    Ok(Float::with_val(prec, n as u64 + 1).sqrt() * pw * cn)
}

/// Interval formula at `z = 2 cos(theta)`, `0 <= theta <= arccos(x_mu/2)`,
/// computed at 128 bits.
pub fn predict_interval(theta: f64, n: usize, params: &CurveParams) -> Result<PredictorResult> {
    predict_interval_prec(&Float::with_val(128, theta), n, params)
}

/// [`predict_interval`] at the precision of `theta`.
pub fn predict_interval_prec(
    theta: &Float,
    n: usize,
    params: &CurveParams,
) -> Result<PredictorResult> {
    let end = interval_end_angle(params);
    let th = theta.to_f64();
    let slack = 1e-12;
    if !(th >= 0.0 && th <= end + slack) {
        return Err(Error::Domain(format!(
            "theta must lie in [0, arccos(x_mu/2)] = [0, {end}], got {th}"
        )));
    }
    let prec = theta.prec();
    let env = interval_envelope(theta, n, params)?;
    let factor = if theta.is_zero() {
        Float::with_val(prec, n as u64 + 2) / 4u32
    } else {
        let num = Float::with_val(prec, theta * (n as u64 + 2)) / 2u32;
        Float::with_val(prec, num.sin()) / (Float::with_val(prec, theta.sin_ref()) * 2u32)
    };
    Ok(PredictorResult {
        value: MpComplex::from_real(env * factor),
        validity_region: vec![RegionLabel::Sigma2],
        claimed_error_order: if (th - end).abs() <= slack {
            ErrorOrder::OneOverN
        } else {
            ErrorOrder::Geometric
        },
    })
}

/// Terms of `sum_{k >= 0} mu^{4k} G_n(mu^{4k} zeta)`,
/// `G_n(x) = mu^{-n} lambda(x)^n lambda'(x)`, with a rigorous tail bound.
struct GSeries<'a> {
    zeta: MpComplex,
    n: u32,
    c: &'a CurveConsts,
    mu_inv: Float,
    abs_zeta: f64,
}

impl<'a> GSeries<'a> {
    fn new(zeta: &MpComplex, n: u32, c: &'a CurveConsts) -> Self {
        GSeries {
            zeta: zeta.with_prec(c.prec),
            n,
            c,
            mu_inv: c.mu_inv(),
            abs_zeta: zeta.abs_f64(),
        }
    }

    /// `mu^{4k} G_n(mu^{4k} zeta)`
    fn term(&self, k: u32) -> Result<MpComplex> {
        let w = Float::with_val(self.c.prec, rug::ops::Pow::pow(&self.c.varrho, k));
        let x = self.zeta.scale(&w);
        let l = lambda_with(&x, self.c)?.scale(&self.mu_inv);
        let g = &l.powu(self.n) * &lambda_prime_with(&x, self.c)?;
        Ok(g.scale(&w))
    }

    /// `log2` of a bound on `|sum_{k > last} mu^{4k} G_n(mu^{4k} zeta)|`.
    ///
    /// With `y = |x|`, `|G_n(x)| <= ((mu + y) / (mu (1 - mu y)))^n (1 - mu^2) / (1 - mu y)^2`,
    /// increasing in `y`, so the tail is at most
    /// `mu^{4(last+1)} B(mu^{4(last+1)} |zeta|) / (1 - mu^4)`.
    fn log2_tail_after(&self, last: u32, mu: f64) -> f64 {
        let l2w = 4.0 * (last as f64 + 1.0) * mu.log2();
        let y = self.abs_zeta * l2w.exp2();
        if mu * y >= 1.0 {
            return f64::INFINITY;
        }
        let ln_b = self.n as f64 * ((mu + y) / (mu * (1.0 - mu * y))).ln() + (1.0 - mu * mu).ln()
            - 2.0 * (1.0 - mu * y).ln();
        l2w + ln_b / std::f64::consts::LN_2 - (1.0 - mu.powi(4)).log2()
    }
}

fn log2_abs(z: &MpComplex) -> f64 {
    if z.is_zero() {
        return f64::NEG_INFINITY;
    }
    let a = z.abs();
    Float::with_val(a.prec(), a.log2_ref()).to_f64()
}

/// Cap on the adaptive number of residue terms.
pub const MAX_RESIDUE_TERMS: usize = 10_000;

/// [`predict_residue_sum`] with its truncation data.
#[derive(Clone, Debug)]
pub struct ResidueSum {
    pub result: PredictorResult,
    /// Index `K` of the last term summed.
    pub last_k: usize,
    /// Bound on the truncation error relative to `|value|`.
    pub relative_tail_bound: f64,
    /// `sqrt(n+1) * pref * (-t_+ sum_k ...)` restricted to `k = 0`.
    pub leading_plus_term: MpComplex,
}

/// The residue representation at `z` in `G_1` (or on `L_1`):
/// `sqrt(n+1) (1 - mu t_+)^2 (1 - mu t_-)^2 mu^{n+1} / ((1 - mu^4)^2 (t_+ - t_-)) * (S_n(t_-) - S_n(t_+))`
/// with `S_n(zeta) = zeta sum_{k=0}^{K} mu^{4k} G_n(mu^{4k} zeta)`.
///
/// `k_fixed = Some(K)` sums exactly `K + 1` terms; `None` adds terms until the
/// tail bound drops below `2^-prec` relative to the partial value.
pub fn predict_residue_sum(
    z: &MpComplex,
    n: usize,
    params: &CurveParams,
    k_fixed: Option<usize>,
) -> Result<PredictorResult> {
    Ok(predict_residue_sum_detailed(z, n, params, k_fixed)?.result)
}

pub fn predict_residue_sum_detailed(
    z: &MpComplex,
    n: usize,
    params: &CurveParams,
    k_fixed: Option<usize>,
) -> Result<ResidueSum> {
    let nn = require_degree(n, 0)?;
    let label = classify(z, params, DEFAULT_CLASSIFY_TOL);
    if label == RegionLabel::Exterior {
        return Err(Error::Domain(format!(
            "the residue representation needs z in G_1 or on L_1; z = {z} is exterior"
        )));
    }
    let out_prec = z.prec();
    let prec = out_prec + 32;
    let z = z.with_prec(prec);
    pole_at_pm2(&sqrt_branch(&z), "the residue representation")?;
    let c = params.consts(prec);
    let (tp, tm) = t_pm(&z, params)?;
    let sp = GSeries::new(&tp, nn, &c);
    let sm = GSeries::new(&tm, nn, &c);

    // pref = sqrt(n+1) (1 - mu t_+)^2 (1 - mu t_-)^2 mu^{n+1} / ((1 - mu^4)^2 (t_+ - t_-))
    let a = (-tp.scale(&c.mu)).add_f64(1.0).square();
    let b = (-tm.scale(&c.mu)).add_f64(1.0).square();
    let one_m = Float::with_val(prec, 1u32) - &c.varrho;
    let mu_n1 = Float::with_val(prec, rug::ops::Pow::pow(&c.mu, nn + 1));
    let root = Float::with_val(prec, n as u64 + 1).sqrt();
    let k = root * mu_n1 / Float::with_val(prec, one_m.square_ref());
    let pref = (&(&a * &b) / &(&tp - &tm)).scale(&k);

    let mut sum_p = MpComplex::zero(prec);
    let mut sum_m = MpComplex::zero(prec);
    let mut leading = MpComplex::zero(prec);
    let target = -(out_prec as f64);
    let limit = k_fixed.unwrap_or(MAX_RESIDUE_TERMS);
    let mut last = 0usize;
    let mut rel_tail = f64::INFINITY;
    for kk in 0..=limit {
        let kk32 = u32::try_from(kk).map_err(|_| Error::Overflow(format!("term index {kk}")))?;
        let term_p = sp.term(kk32)?;
        sum_p += &term_p;
        sum_m += &sm.term(kk32)?;
        if kk == 0 {
            leading = -(&pref * &(&tp * &term_p));
        }
        last = kk;
        let diff = &(&tm * &sum_m) - &(&tp * &sum_p);
        let scale = log2_abs(&diff);
        let tail_p = sp.log2_tail_after(kk32, params.mu) + tp.abs_f64().log2();
        let tail_m = sm.log2_tail_after(kk32, params.mu) + tm.abs_f64().log2();
        let tail = tail_p.max(tail_m) + 1.0;
        rel_tail = (tail - scale).exp2();
        if k_fixed.is_none() && tail - scale < target {
            break;
        }
        if k_fixed.is_none() && kk == limit {
            return Err(Error::Budget(format!(
                "residue sum did not reach relative tail 2^{target} within {MAX_RESIDUE_TERMS} terms"
            )));
        }
    }
    let diff = &(&tm * &sum_m) - &(&tp * &sum_p);
    let value = (&pref * &diff).with_prec(out_prec);
    Ok(ResidueSum {
        result: PredictorResult {
            value,
            validity_region: vec![
                RegionLabel::OnL1,
                RegionLabel::Sigma0,
                RegionLabel::Sigma1,
                RegionLabel::Sigma2,
            ],
            claimed_error_order: ErrorOrder::RhoTwoN,
        },
        last_k: last,
        relative_tail_bound: rel_tail,
        leading_plus_term: leading.with_prec(out_prec),
    })
}

/// `r(z)`: `mu` on Sigma0 and `|v_+(z)|` elsewhere in `G_1`.
pub fn r_of_z(z: &MpComplex, params: &CurveParams) -> Result<f64> {
    match classify(z, params, DEFAULT_CLASSIFY_TOL) {
        RegionLabel::Exterior | RegionLabel::OnL1 => Err(Error::Domain(format!(
            "r(z) is defined on the interior G_1 only; z = {z}"
        ))),
        RegionLabel::Sigma0 => Ok(params.mu),
        _ => Ok(v_pm(z, params).0.abs_f64()),
    }
}

fn require_lemma_disk(t: &MpComplex, params: &CurveParams) -> Result<()> {
    let d = (t.to_c64() * params.r - 1.0).norm();
    if !(d < 1.0) {
        return Err(Error::Domain(format!("need |1 - R t| < 1, got {d} at t = {t}")));
    }
    Ok(())
}

/// `|LHS / RHS - 1|` with `LHS = sum_{k>=0} mu^{4k} G_{n+1}(mu^{4k} t)` and
/// `RHS = -(n+1)(1 - mu^2) chi(n t) / (n^2 t)`, at 128 bits.
pub fn lemma2_check(t: &MpComplex, n: usize, params: &CurveParams) -> Result<f64> {
    let nn = require_degree(n, 1)?;
    require_lemma_disk(t, params)?;
    let prec = 160;
    let c = params.consts(prec);
    let t = t.with_prec(prec);
    let series = GSeries::new(&t, nn + 1, &c);
    let mut lhs = MpComplex::zero(prec);
    let mut k = 0u32;
    loop {
        lhs += &series.term(k)?;
        if series.log2_tail_after(k, params.mu) - log2_abs(&lhs) < -140.0 {
            break;
        }
        k += 1;
        if k as usize > MAX_RESIDUE_TERMS {
            return Err(Error::Budget("lemma 2 series did not settle".into()));
        }
    }
    let opts = ChiEvalOptions::default();
    let x = chi(&t.scale(&Float::with_val(prec, nn)), params, &opts)?.with_prec(prec);
    let one_m = Float::with_val(prec, 1u32) - Float::with_val(prec, c.mu.square_ref());
    let coef = -(Float::with_val(prec, nn + 1) * one_m) / Float::with_val(prec, n as u64 * n as u64);
    let rhs = (&x / &t).scale(&coef);
    Ok((&(&lhs / &rhs) - &MpComplex::one(prec)).abs_f64())
}

/// Exponent `m = min(m1, m2) / 2` of the bound in [`lemma7_check`], with
/// `m1 = alpha Re t` and `m2 = min_{0<=u<=1} (1 - |1 - sigma_t(u)|)`,
/// `sigma_t(u) = alpha t / (1 - mu t u)`.
pub fn lemma7_exponent(t: &MpComplex, params: &CurveParams) -> f64 {
    let tc = t.to_c64();
    let m1 = params.alpha * tc.re;
    let m2 = (0..=1000)
        .map(|j| {
            let u = j as f64 / 1000.0;
            let sigma = params.alpha * tc / (1.0 - params.mu * tc * u);
            1.0 - (1.0 - sigma).norm()
        })
        .fold(f64::INFINITY, f64::min);
    0.5 * m1.min(m2)
}

/// `s_j = j n / count`, `j = 1..=count`.
pub fn lemma7_samples(n: usize, count: usize) -> Vec<f64> {
    (1..=count).map(|j| j as f64 * n as f64 / count as f64).collect()
}

/// `max_s n |exp(-alpha t s) - mu^{-n} lambda(t s / n)^n| / (s^2 exp(-m s))`
/// over the given samples `0 < s <= n`, with `m` from [`lemma7_exponent`].
pub fn lemma7_check(t: &MpComplex, n: usize, s_samples: &[f64], params: &CurveParams) -> Result<f64> {
    let nn = require_degree(n, 1)?;
    require_lemma_disk(t, params)?;
    if s_samples.is_empty() {
        return Err(Error::Domain("at least one s sample is required".into()));
    }
    let m = lemma7_exponent(t, params);
    let prec = 128;
    let c = params.consts(prec);
    let mu_inv = c.mu_inv();
    let t = t.with_prec(prec);
    let mut worst = 0f64;
    for &s in s_samples {
        if !(s > 0.0 && s <= n as f64) {
            return Err(Error::Domain(format!("s samples must lie in (0, n]; got {s}")));
        }
        let sf = Float::with_val(prec, s);
        let ts = t.scale(&sf);
        let e = (-ts.scale(&c.alpha)).exp();
        let x = ts.div_u64(n as u64);
        let l = lambda_with(&x, &c)?.scale(&mu_inv).powu(nn);
        let diff = (&e - &l).abs_f64();
        worst = worst.max(n as f64 * diff / (s * s * (-m * s).exp()));
    }
    Ok(worst)
}

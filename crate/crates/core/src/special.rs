//! The lacunary function `chi(t) = t * sum_k mu^{4k} exp(-(1/mu - mu) mu^{4k} t)`
//! (`k` over all integers), the limit family `f_q` built from it, integer
//! subsequences indexed by `q`, and the Fourier coefficients that separate
//! different members of the family.

use std::f64::consts::PI;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::conformal::{CurveConsts, CurveParams};
use crate::error::{Error, Result};
use crate::mp::MpComplex;
use crate::quad::integrate_doubling;

/// Evaluation controls shared by every series in this module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiEvalOptions {
    pub precision_bits: u32,
    /// Absolute truncation error allowed in one evaluation of `chi`.
    pub truncation_eps: f64,
    /// Terms allowed across both directions of the series.
    pub max_terms: usize,
}

impl Default for ChiEvalOptions {
    fn default() -> Self {
        ChiEvalOptions {
            precision_bits: 128,
            truncation_eps: 1e-30,
            max_terms: 100_000,
        }
    }
}

impl ChiEvalOptions {
    /// Validated constructor. A tolerance below `2^-(bits/4)` is accepted
    /// with a logged warning.
    pub fn new(precision_bits: u32, truncation_eps: f64, max_terms: usize) -> Result<Self> {
        if precision_bits < 16 {
            return Err(Error::Domain(format!(
                "precision_bits must be at least 16, got {precision_bits}"
            )));
        }
        if !(truncation_eps.is_finite() && truncation_eps > 0.0) {
            return Err(Error::Domain(format!(
                "truncation_eps must be positive, got {truncation_eps}"
            )));
        }
        if max_terms == 0 {
            return Err(Error::Domain("max_terms must be positive".into()));
        }
        let opts = ChiEvalOptions {
            precision_bits,
            truncation_eps,
            max_terms,
        };
        if let Some(w) = opts.precision_warning() {
            log::warn!("{w}");
        }
        Ok(opts)
    }

    pub fn precision_warning(&self) -> Option<String> {
        let floor = 2f64.powf(-(self.precision_bits as f64) / 4.0);
        (self.truncation_eps < floor).then(|| {
            format!(
                "truncation_eps {:e} is below 2^-(precision_bits/4) = {:e}",
                self.truncation_eps, floor
            )
        })
    }

    pub fn with_bits(self, precision_bits: u32) -> Self {
        ChiEvalOptions {
            precision_bits,
            ..self
        }
    }
}

fn work_consts(params: &CurveParams, opts: &ChiEvalOptions) -> CurveConsts {
    params.consts(opts.precision_bits + 8)
}

fn require_right_half(t: &MpComplex, what: &str) -> Result<()> {
    if !(t.re().is_finite() && t.im().is_finite()) || *t.re() <= 0 {
        return Err(Error::Domain(format!(
            "{what} needs Re(t) > 0, got t = {}",
            t
        )));
    }
    Ok(())
}

/// `sum_k varrho^k e^{-alpha varrho^k u}`, or with the extra factor
/// `(1 - alpha varrho^k u)` when `derivative` is set. `outer` scales the
/// truncation test.
fn lacunary_sum(
    u: &MpComplex,
    c: &CurveConsts,
    opts: &ChiEvalOptions,
    outer: f64,
    derivative: bool,
) -> Result<MpComplex> {
    let prec = c.prec;
    let eps = opts.truncation_eps;
    let varrho = c.varrho.to_f64();
    let alpha = c.alpha.to_f64();
    let abs_u = u.abs_f64();
    let re_u = u.re().to_f64();
    let mut terms = 0usize;
    let mut acc = MpComplex::zero(prec);

    let term = |s: &Float, acc: &mut MpComplex| {
        let a = MpComplex::from_real(Float::with_val(prec, &c.alpha * s));
        let x = &a * u;
        let mut v = (-x.clone()).exp().scale(s);
        if derivative {
            v = &v * &(-x).add_f64(1.0);
        }
        *acc += &v;
    };

    // k = 0, 1, 2, ...: geometric tail.
    let mut s = Float::with_val(prec, 1u32);
    loop {
        let sf = s.to_f64();
        let mut tail = sf / (1.0 - varrho);
        if derivative {
            tail *= 1.0 + alpha * sf * abs_u;
        }
        if outer * tail < eps / 4.0 {
            break;
        }
        terms += 1;
        if terms > opts.max_terms {
            return Err(Error::Budget(format!(
                "chi series needed more than {} terms",
                opts.max_terms
            )));
        }
        term(&s, &mut acc);
        s *= &c.varrho;
    }

    // k = -1, -2, ...: double-exponential decay once alpha s Re(u) is large.
    let mut s = Float::with_val(prec, c.varrho.recip_ref());
    let ratio_base = (1.0 / varrho - 1.0) * alpha * re_u;
    loop {
        let sf = s.to_f64();
        let x = alpha * sf * re_u;
        let mut bound = sf * (-x).exp();
        if derivative {
            bound *= 1.0 + alpha * sf * abs_u;
        }
        // Bound on the ratio of the next magnitude bound to this one.
        let ratio = (-(ratio_base * sf)).exp() / (varrho * varrho);
        if ratio < 0.5 && outer * 2.0 * bound < eps / 4.0 {
            break;
        }
        terms += 1;
        if terms > opts.max_terms {
            return Err(Error::Budget(format!(
                "chi series needed more than {} terms",
                opts.max_terms
            )));
        }
        term(&s, &mut acc);
        s /= &c.varrho;
    }
    Ok(acc)
}

/// `chi(t)` by direct summation of the two-sided series.
pub fn chi(t: &MpComplex, params: &CurveParams, opts: &ChiEvalOptions) -> Result<MpComplex> {
    require_right_half(t, "chi")?;
    let c = work_consts(params, opts);
    let u = t.with_prec(c.prec);
    let sum = lacunary_sum(&u, &c, opts, t.abs_f64(), false)?;
    Ok((&u * &sum).with_prec(opts.precision_bits))
}

/// `chi'(t) = sum_k mu^{4k} e^{-alpha mu^{4k} t} (1 - alpha mu^{4k} t)`.
pub fn chi_prime(t: &MpComplex, params: &CurveParams, opts: &ChiEvalOptions) -> Result<MpComplex> {
    require_right_half(t, "chi_prime")?;
    let c = work_consts(params, opts);
    let u = t.with_prec(c.prec);
    Ok(lacunary_sum(&u, &c, opts, 1.0, true)?.with_prec(opts.precision_bits))
}

/// Panels per piece are sized so that `|alpha t| * width <= PANEL_SPAN`.
const PANEL_SPAN: f64 = 4.0;
const MAX_PANELS: usize = 1 << 16;

/// `chi(gamma t)` from its integral representation
/// `(mu^3 t^2/(1+mu^2)) int_0^inf mu^{-4 frac(log_{mu^4}(s/gamma))} s e^{-alpha t s} ds`.
pub fn chi_integral(
    t: &MpComplex,
    gamma: f64,
    params: &CurveParams,
    opts: &ChiEvalOptions,
) -> Result<MpComplex> {
    require_right_half(t, "chi_integral")?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let c = work_consts(params, opts);
    let prec = c.prec;
    let u = t.with_prec(prec);
    let eps = opts.truncation_eps;

    let mu3 = Float::with_val(prec, c.mu.pow_ref_u(3));
    let one_mu2 = Float::with_val(prec, c.mu.square_ref()) + 1u32;
    let pref = u.square().scale(&Float::with_val(prec, mu3 / one_mu2));
    let pref_abs = pref.abs_f64().max(f64::MIN_POSITIVE);

    let g = Float::with_val(prec, gamma);
    let ln_g = Float::with_val(prec, g.ln_ref());
    let ln_varrho = Float::with_val(prec, c.varrho.ln_ref());
    let alpha_t = u.scale(&c.alpha);
    let alpha_t_abs = alpha_t.abs_f64();
    let re_at = alpha_t.re().to_f64();
    let varrho = c.varrho.to_f64();
    let panel_eps = eps / (64.0 * pref_abs);

    // Integrand of the piece s in (gamma varrho^{m+1}, gamma varrho^m].
    let integrand = |m: i64| {
        let ln_g = ln_g.clone();
        let ln_varrho = ln_varrho.clone();
        let alpha_t = alpha_t.clone();
        move |s: &Float| -> Result<MpComplex> {
            let log_ratio = Float::with_val(prec, s.ln_ref()) - &ln_g;
            let frac = Float::with_val(prec, log_ratio / &ln_varrho) - m;
            // mu^{-4 frac} = varrho^{-frac}
            let weight = Float::with_val(prec, -frac * &ln_varrho).exp();
            let e = (-(alpha_t.scale(s))).exp();
            Ok(e.scale(&Float::with_val(prec, weight * s)))
        }
    };

    let piece = |m: i64| -> Result<MpComplex> {
        let hi = Float::with_val(prec, &g * &Float::with_val(prec, c.varrho.pow_ref_i(m)));
        let lo = Float::with_val(prec, &hi * &c.varrho);
        let width = Float::with_val(prec, &hi - &lo);
        let panels = ((alpha_t_abs * width.to_f64() / PANEL_SPAN).ceil() as usize).max(1);
        if panels > MAX_PANELS {
            return Err(Error::Budget(format!(
                "chi_integral piece {m} needs {panels} panels"
            )));
        }
        let step = Float::with_val(prec, &width / panels as u32);
        let mut f = integrand(m);
        let mut acc = MpComplex::zero(prec);
        for j in 0..panels {
            let a = Float::with_val(prec, &step * j as u32) + &lo;
            let b = if j + 1 == panels {
                hi.clone()
            } else {
                Float::with_val(prec, &a + &step)
            };
            acc += &integrate_doubling(&mut f, &a, &b, 8, 256, panel_eps)?;
        }
        Ok(acc)
    };

    let mut acc = MpComplex::zero(prec);
    let mut pieces = 0usize;
    let count = |pieces: &mut usize| -> Result<()> {
        *pieces += 1;
        if *pieces > opts.max_terms {
            return Err(Error::Budget(format!(
                "chi_integral needed more than {} pieces",
                opts.max_terms
            )));
        }
        Ok(())
    };

    // Toward s = 0: the pieces m >= M contribute at most gamma^2 varrho^{2M}/(1+varrho).
    let mut m = 0i64;
    loop {
        let tail = gamma * gamma * varrho.powi((2 * m) as i32) / (1.0 + varrho);
        if pref_abs * tail < eps / 4.0 {
            break;
        }
        count(&mut pieces)?;
        acc += &piece(m)?;
        m += 1;
    }

    // Toward s = infinity: piece m is bounded by gamma varrho^m e^{-Re(alpha t) gamma varrho^{m+1}}/Re(alpha t).
    let mut m = -1i64;
    loop {
        let scale = gamma * varrho.powi(m as i32);
        let bound = scale * (-re_at * scale * varrho).exp() / re_at;
        let ratio = (-re_at * scale * (1.0 - varrho)).exp() / varrho;
        if ratio < 0.5 && pref_abs * 2.0 * bound < eps / 4.0 {
            break;
        }
        count(&mut pieces)?;
        acc += &piece(m)?;
        m -= 1;
    }

    Ok((&pref * &acc).with_prec(opts.precision_bits))
}

trait PowRef {
    fn pow_ref_u(&self, n: u32) -> Float;
    fn pow_ref_i(&self, n: i64) -> Float;
}

impl PowRef for Float {
    fn pow_ref_u(&self, n: u32) -> Float {
        Float::with_val(self.prec(), rug::ops::Pow::pow(self, n))
    }
    fn pow_ref_i(&self, n: i64) -> Float {
        Float::with_val(self.prec(), rug::ops::Pow::pow(self, n as i32))
    }
}

/// `(1 - mu t)^2 (1 - mu^3/t)^2 / ((1 - mu^4) R)`
pub fn prefactor(t: &MpComplex, c: &CurveConsts) -> MpComplex {
    let prec = c.prec.max(t.prec());
    let t = t.with_prec(prec);
    let a = (-t.scale(&c.mu)).add_f64(1.0).square();
    let mu3 = c.mu.pow_ref_u(3);
    let b = (-(t.recip().scale(&mu3))).add_f64(1.0).square();
    let den = Float::with_val(prec, 1u32) - &c.varrho;
    let den = den * &c.r;
    (&a * &b).scale(&Float::with_val(prec, den.recip_ref()))
}

/// Below this distance from `mu` the kernel is evaluated by
/// interpolation along the ray through `mu`.
pub const SINGULAR_BAND: f64 = 1e-6;
const RAY_STEP: f64 = 2e-6;

fn kernel_direct(
    t: &MpComplex,
    scale: &Float,
    c: &CurveConsts,
    params: &CurveParams,
    opts: &ChiEvalOptions,
) -> Result<MpComplex> {
    let mu2 = Float::with_val(c.prec, c.mu.square_ref());
    let inv = t.recip().scale(&mu2);
    let num = chi(&t.scale(scale), params, opts)? - chi(&inv.scale(scale), params, opts)?;
    Ok(num / (t - &inv))
}

/// `(chi(c t) - chi(c mu^2/t)) / (t - mu^2/t)`, continuous through `t = mu`.
pub fn kernel(
    t: &MpComplex,
    scale: &Float,
    params: &CurveParams,
    opts: &ChiEvalOptions,
) -> Result<MpComplex> {
    require_right_half(t, "kernel")?;
    let c = work_consts(params, opts);
    let t = t.with_prec(c.prec);
    let delta = t.add_real(&Float::with_val(c.prec, -&c.mu));
    let h = delta.abs_f64();
    if h >= SINGULAR_BAND {
        return Ok(kernel_direct(&t, scale, &c, params, opts)?.with_prec(opts.precision_bits));
    }
    // Cubic through four points mu + j*RAY_STEP*dir, evaluated at distance h.
    let fine = opts.with_bits(opts.precision_bits + 32);
    let cf = params.consts(fine.precision_bits + 8);
    let dir = if h == 0.0 {
        MpComplex::one(cf.prec)
    } else {
        delta.with_prec(cf.prec).scale(&Float::with_val(cf.prec, delta.abs().recip_ref()))
    };
    let mut out = MpComplex::zero(cf.prec);
    let nodes: Vec<f64> = (1..=4).map(|j| j as f64 * RAY_STEP).collect();
    for (i, hi) in nodes.iter().enumerate() {
        let p = dir.scale_f64(*hi).add_real(&cf.mu);
        let v = kernel_direct(&p, scale, &cf, params, &fine)?;
        let mut w = 1.0;
        for (j, hj) in nodes.iter().enumerate() {
            if i != j {
                w *= (h - hj) / (hi - hj);
            }
        }
        out += &v.scale_f64(w);
    }
    Ok(out.with_prec(opts.precision_bits))
}

/// `varrho^q`, i.e. `mu^{4q}`.
pub fn varrho_pow(q: f64, c: &CurveConsts) -> Float {
    let ln = Float::with_val(c.prec, c.varrho.ln_ref());
    Float::with_val(c.prec, ln * q).exp()
}

/// The limit function `f_q(t)`; `q` is reduced mod 1.
pub fn f_q(t: &MpComplex, q: f64, params: &CurveParams, opts: &ChiEvalOptions) -> Result<MpComplex> {
    if !q.is_finite() {
        return Err(Error::Domain(format!("q must be finite, got {q}")));
    }
    require_right_half(t, "f_q")?;
    let c = work_consts(params, opts);
    let scale = varrho_pow(q.rem_euclid(1.0), &c);
    let k = kernel(t, &scale, params, opts)?;
    Ok((&prefactor(t, &c) * &k).with_prec(opts.precision_bits))
}

/// Integers `n_k = round(mu^{-4(k + frac(-q))})`, `k = 1, 2, ...`, whose
/// `log_{mu^4} n_k` approaches `q` mod 1, with their distances from that
/// condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceSpec {
    pub q: f64,
    pub indices: Vec<u64>,
    /// `|exp(2 pi i (log_{mu^4} n_k - q)) - 1|`
    pub residual: Vec<f64>,
}

const SUBSEQ_BITS: u32 = 256;

fn float_to_u64(x: &Float) -> u64 {
    let two32 = Float::with_val(x.prec(), 1u64 << 32);
    let hi = Float::with_val(x.prec(), x / &two32).floor();
    let lo = Float::with_val(x.prec(), x - &Float::with_val(x.prec(), &hi * &two32));
    ((hi.to_u32_saturating().unwrap_or(0) as u64) << 32) | lo.to_u32_saturating().unwrap_or(0) as u64
}

/// `log_{mu^4} n - shift` reduced to `[-1/2, 1/2)`, flushed to 0 when it
/// vanishes to working precision.
fn centered_log_offset(n: u64, shift: f64, c: &CurveConsts) -> f64 {
    let prec = c.prec;
    let ln_n = Float::with_val(prec, n).ln();
    let ln_varrho = Float::with_val(prec, c.varrho.ln_ref());
    let x = Float::with_val(prec, ln_n / ln_varrho) - shift;
    let d = Float::with_val(prec, &x - Float::with_val(prec, x.round_ref()));
    let tiny = Float::with_val(prec, Float::u_exp(1, -(prec as i32 - 16)));
    if d.cmp_abs(&tiny) != Some(std::cmp::Ordering::Greater) {
        0.0
    } else {
        d.to_f64()
    }
}

/// Fractional part of `log_{mu^4} n` in `[0, 1)`, exact cases returned as 0.
pub fn frac_log_varrho(n: u64, params: &CurveParams) -> f64 {
    let c = params.consts(SUBSEQ_BITS);
    let d = centered_log_offset(n, 0.0, &c);
    if d == 0.0 {
        return 0.0;
    }
    let ln_n = Float::with_val(SUBSEQ_BITS, n).ln();
    let x = Float::with_val(SUBSEQ_BITS, ln_n / Float::with_val(SUBSEQ_BITS, c.varrho.ln_ref()));
    let f = Float::with_val(SUBSEQ_BITS, &x - Float::with_val(SUBSEQ_BITS, x.floor_ref()));
    f.to_f64().rem_euclid(1.0)
}

pub fn subsequence_for_q(q: f64, k_max: usize, params: &CurveParams) -> Result<SubsequenceSpec> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q must lie in [0, 1), got {q}")));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let c = params.consts(SUBSEQ_BITS);
    let ln_varrho = Float::with_val(SUBSEQ_BITS, c.varrho.ln_ref());
    let limit = Float::with_val(SUBSEQ_BITS, Float::u_exp(1, 63));
    let mut indices = Vec::with_capacity(k_max);
    let mut residual = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        // k + frac(-q), exactly
        let mut e = Float::with_val(SUBSEQ_BITS, k as u32) - q;
        if q > 0.0 {
            e += 1u32;
        }
        let x = Float::with_val(SUBSEQ_BITS, -e * &ln_varrho).exp();
        let n = Float::with_val(SUBSEQ_BITS, x.round_ref());
        if n >= limit {
            return Err(Error::Overflow(format!(
                "subsequence index {:e} at k = {k} exceeds the 64-bit range",
                x.to_f64()
            )));
        }
        let n = float_to_u64(&n).max(1);
        let d = centered_log_offset(n, q, &c);
        indices.push(n);
        residual.push(2.0 * (PI * d).sin().abs());
    }
    Ok(SubsequenceSpec {
        q,
        indices,
        residual,
    })
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(z)` (any branch; intended for exponentiation).
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let pi = Complex64::new(PI, 0.0);
        return pi.ln() - (pi * z).sin().ln() - ln_gamma_complex(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

pub fn gamma_complex(z: Complex64) -> Complex64 {
    ln_gamma_complex(z).exp()
}

/// Fourier coefficient
/// `c_n = e^{-i pi n (qq + pp)} Gamma(1 + i y) / (alpha^{1 + i y} |ln varrho|)`,
/// `y = 2 pi n / ln varrho`, `qq = q + 1/4`, `pp = p + 1/4`.
pub fn fourier_cn(n: u32, q: f64, p: f64, params: &CurveParams) -> Result<MpComplex> {
    if n == 0 {
        return Err(Error::Domain("fourier_cn needs n >= 1".into()));
    }
    let ln_varrho = params.varrho.ln();
    let y = 2.0 * PI * n as f64 / ln_varrho;
    let z = Complex64::new(1.0, y);
    let phase = Complex64::new(0.0, -PI * n as f64 * (q + p + 0.5));
    let log_c = ln_gamma_complex(z) - z * params.alpha.ln() - (-ln_varrho).ln() + phase;
    Ok(MpComplex::from_c64(53, log_c.exp()))
}

/// `max |f_q(t) - f_p(t)|` over `grid`.
pub fn fq_distinct(q: f64, p: f64, grid: &[MpComplex], params: &CurveParams) -> Result<f64> {
    fq_distinct_with(q, p, grid, params, &ChiEvalOptions::default())
}

pub fn fq_distinct_with(
    q: f64,
    p: f64,
    grid: &[MpComplex],
    params: &CurveParams,
    opts: &ChiEvalOptions,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Domain("fq_distinct needs a nonempty grid".into()));
    }
    let mut best = 0.0f64;
    for t in grid {
        let d = (f_q(t, q, params, opts)? - f_q(t, p, params, opts)?).abs_f64();
        best = best.max(d);
    }
    Ok(best)
}

/// `n` deterministic points spread over the region `D`, kept a small
/// margin away from its boundary.
pub fn d_grid(n: usize, params: &CurveParams, prec: u32) -> Vec<MpComplex> {
    let center = 1.0 / params.r;
    let radius = 0.95 / params.r;
    let cut = params.r * params.mu * params.mu / 2.0;
    let margin = 0.02 / params.r;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut m = n.max(1);
    loop {
        let pts: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let r = radius * ((i as f64 + 0.5) / m as f64).sqrt();
                let a = golden * i as f64;
                (center + r * a.cos(), r * a.sin())
            })
            .filter(|(x, _)| *x > cut + margin)
            .collect();
        if pts.len() >= n {
            return (0..n)
                .map(|i| {
                    let (x, y) = pts[i * pts.len() / n];
                    MpComplex::new(prec, x, y)
                })
                .collect();
        }
        m += m / 4 + 1;
    }
}

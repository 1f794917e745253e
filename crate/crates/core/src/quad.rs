//! Gauss–Legendre quadrature at arbitrary precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rug::Float;

use crate::error::{Error, Result};
use crate::mp::{eps_f64, MpComplex};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<Float>,
    pub weights: Vec<Float>,
}

type RuleCache = Mutex<HashMap<(usize, u32), Arc<GaussLegendre>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let mut p0 = Float::with_val(prec, 1u32);
    let mut p1 = x.clone();
    for k in 2..=n {
        // k P_k = (2k-1) x P_{k-1} - (k-1) P_{k-2}
        let mut p2 = Float::with_val(prec, x * &p1);
        p2 *= (2 * k - 1) as u32;
        p2 -= Float::with_val(prec, &p0 * (k - 1) as u32);
        p2 /= k as u32;
        p0 = p1;
        p1 = p2;
    }
    let mut dp = Float::with_val(prec, x * &p1);
    dp -= &p0;
    dp *= n as u32;
    let den = Float::with_val(prec, x.square_ref()) - 1u32;
    dp /= &den;
    (p1, dp)
}

/// The `order`-point rule at `prec` bits (memoized).
pub fn gauss_legendre(order: usize, prec: u32) -> Arc<GaussLegendre> {
    assert!(order >= 1, "quadrature order must be positive");
    if let Some(rule) = cache().lock().unwrap().get(&(order, prec)) {
        return rule.clone();
    }
    let work = prec + 16;
    let tol = eps_f64(work - 8);
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for i in 1..=order {
        let guess = (std::f64::consts::PI * (i as f64 - 0.25) / (order as f64 + 0.5)).cos();
        let mut x = Float::with_val(work, guess);
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(order, &x);
            let step = Float::with_val(work, &p / &dp);
            x -= &step;
            if step.to_f64().abs() <= tol {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(order, &x);
        let one_minus = Float::with_val(work, 1u32) - Float::with_val(work, x.square_ref());
        let w = Float::with_val(work, 2u32) / (one_minus * dp.square());
        nodes.push(Float::with_val(prec, &x));
        weights.push(Float::with_val(prec, &w));
    }
    let rule = Arc::new(GaussLegendre { nodes, weights });
    cache().lock().unwrap().insert((order, prec), rule.clone());
    rule
}

/// Fixed-order rule applied to a complex integrand on `[a, b]`.
pub fn integrate_fixed<F>(f: &mut F, a: &Float, b: &Float, order: usize) -> Result<MpComplex>
where
    F: FnMut(&Float) -> Result<MpComplex>,
{
    let prec = a.prec().max(b.prec());
    let rule = gauss_legendre(order, prec);
    let half = Float::with_val(prec, b - a) / 2u32;
    let mid = Float::with_val(prec, b + a) / 2u32;
    let mut acc = MpComplex::zero(prec);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let s = Float::with_val(prec, &half * x) + &mid;
        let v = f(&s)?;
        acc += &v.scale(w);
    }
    Ok(acc.scale(&half))
}

/// Doubles the order from `start` until two successive estimates differ by
/// less than `eps` (absolute), up to `max_order`.
pub fn integrate_doubling<F>(
    f: &mut F,
    a: &Float,
    b: &Float,
    start: usize,
    max_order: usize,
    eps: f64,
) -> Result<MpComplex>
where
    F: FnMut(&Float) -> Result<MpComplex>,
{
    let mut order = start.max(1);
    let mut prev = integrate_fixed(f, a, b, order)?;
    while order < max_order {
        order *= 2;
        let next = integrate_fixed(f, a, b, order)?;
        if (&next - &prev).abs_f64() < eps {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!(
        "Gauss-Legendre did not settle below {eps:e} by order {max_order} on [{}, {}]",
        a.to_f64(),
        b.to_f64()
    )))
}

//! Geometry of the level curve `L_1 = { w - 1 + 1/(w - 1) : |w| = R }`.
//!
//! The exterior map is `psi(w) = R w - 1 + 1/(R w - 1)`. Everything here is a
//! pure function of its inputs and a [`CurveParams`]; precision follows the
//! complex argument.

use std::f64::consts::TAU;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{eps_f64, MpComplex};

/// The curve constant `R > 2` with its derived constants in double precision.
///
/// The curve is defined by the exact binary value of `r`; [`CurveParams::consts`]
/// recomputes the derived constants at any precision from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub r: f64,
    pub mu: f64,
    pub rho: f64,
    pub x_mu: f64,
    pub alpha: f64,
    pub varrho: f64,
}

/// Derived constants at a given precision.
#[derive(Clone, Debug)]
pub struct CurveConsts {
    pub prec: u32,
    pub r: Float,
    /// `(R - sqrt(R^2 - 4)) / 2`
    pub mu: Float,
    /// `2 / R`
    pub rho: Float,
    /// `(1 + mu^2)^2 - 2`
    pub x_mu: Float,
    /// `1/mu - mu`
    pub alpha: Float,
    /// `mu^4`
    pub varrho: Float,
}

impl CurveParams {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 2.0) {
            return Err(Error::Domain(format!("curve constant R must exceed 2, got {r}")));
        }
        let c = CurveConsts::new(r, 128);
        Ok(CurveParams {
            r,
            mu: c.mu.to_f64(),
            rho: c.rho.to_f64(),
            x_mu: c.x_mu.to_f64(),
            alpha: c.alpha.to_f64(),
            varrho: c.varrho.to_f64(),
        })
    }

    pub fn consts(&self, prec: u32) -> CurveConsts {
        CurveConsts::new(self.r, prec)
    }
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams::new(2.5).expect("2.5 > 2")
    }
}

impl CurveConsts {
    fn new(r_val: f64, prec: u32) -> Self {
        let r = Float::with_val(prec, r_val);
        let disc = Float::with_val(prec, r.square_ref()) - 4u32;
        let mu = Float::with_val(prec, &r - disc.sqrt()) / 2u32;
        let rho = Float::with_val(prec, 2u32) / &r;
        let mu2 = Float::with_val(prec, mu.square_ref());
        let x_mu = Float::with_val(prec, (mu2.clone() + 1u32).square()) - 2u32;
        let alpha = Float::with_val(prec, mu.recip_ref()) - &mu;
        let varrho = mu2.square();
        CurveConsts {
            prec,
            r,
            mu,
            rho,
            x_mu,
            alpha,
            varrho,
        }
    }

    /// `1 / mu`
    pub fn mu_inv(&self) -> Float {
        Float::with_val(self.prec, self.mu.recip_ref())
    }
}

/// Classification of a point of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionLabel {
    Exterior,
    OnL1,
    Sigma1,
    Sigma2,
    Sigma0,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Exterior => "exterior",
            RegionLabel::OnL1 => "L1",
            RegionLabel::Sigma1 => "sigma1",
            RegionLabel::Sigma2 => "sigma2",
            RegionLabel::Sigma0 => "sigma0",
        }
    }
}

fn pole_guard(x: &MpComplex, what: &str) -> Result<()> {
    let bits = x.prec();
    // |x| within a few ulps of zero counts as a hit on the pole.
    if x.abs_f64() <= eps_f64(bits.saturating_sub(4)) {
        return Err(Error::Pole(what.to_string()));
    }
    Ok(())
}

/// Exterior conformal map `psi(w) = R w - 1 + 1/(R w - 1)`.
pub fn psi(w: &MpComplex, params: &CurveParams) -> Result<MpComplex> {
    let u = w.scale_f64(params.r).add_f64(-1.0);
    pole_guard(&u, "psi has a pole at w = 1/R")?;
    Ok(&u + &u.recip())
}

/// `psi'(w) = R - R/(R w - 1)^2`.
pub fn psi_prime(w: &MpComplex, params: &CurveParams) -> Result<MpComplex> {
    let u = w.scale_f64(params.r).add_f64(-1.0);
    pole_guard(&u, "psi' has a pole at w = 1/R")?;
    let inv2 = u.square().recip();
    Ok((-inv2.scale_f64(params.r)).add_f64(params.r))
}

/// The branch of `sqrt(z^2 - 4)` analytic off `[-2, 2]`, positive on
/// `(2, inf)`, with upper-half-plane boundary values on the segment.
///
/// Computed as the product `sqrt(z - 2) * sqrt(z + 2)` of principal roots.
pub fn sqrt_branch(z: &MpComplex) -> MpComplex {
    let a = z.add_f64(-2.0).sqrt();
    let b = z.add_f64(2.0).sqrt();
    &a * &b
}

/// The two solutions `(v_+, v_-)` of `psi(w) = z`, `|v_+| >= |v_-|`.
pub fn v_pm(z: &MpComplex, params: &CurveParams) -> (MpComplex, MpComplex) {
    let s = sqrt_branch(z);
    let base = z.add_f64(2.0);
    let c = params.consts(z.prec());
    let inv2r = Float::with_val(z.prec(), 2u32 * &c.r).recip();
    ((&base + &s).scale(&inv2r), (&base - &s).scale(&inv2r))
}

/// Inverse of `psi` on `Omega_rho`: `phi(z) = v_+`.
pub fn phi(z: &MpComplex, params: &CurveParams) -> Result<MpComplex> {
    let (vp, _) = v_pm(z, params);
    if vp.abs_f64() <= params.rho {
        return Err(Error::Domain(format!(
            "phi is only defined where |v_+| > rho = {}; got |v_+| = {}",
            params.rho,
            vp.abs_f64()
        )));
    }
    Ok(vp)
}

/// `phi'(z) = (1 + z / sqrt(z^2 - 4)) / (2R)`.
pub fn phi_prime(z: &MpComplex, params: &CurveParams) -> Result<MpComplex> {
    let s = sqrt_branch(z);
    pole_guard(&s, "phi' has a pole at z = +-2")?;
    let c = params.consts(z.prec());
    let inv2r = Float::with_val(z.prec(), 2u32 * &c.r).recip();
    Ok((z / &s).add_f64(1.0).scale(&inv2r))
}

/// `phi'(infinity) = 1/R`.
pub fn phi_prime_at_infinity(params: &CurveParams, prec: u32) -> Float {
    Float::with_val(prec, params.consts(prec).r.recip_ref())
}

/// Moebius involution `lambda(t) = (t - mu) / (mu t - 1)`.
pub fn lambda_map(t: &MpComplex, params: &CurveParams) -> Result<MpComplex> {
    let c = params.consts(t.prec());
    lambda_with(t, &c)
}

pub(crate) fn lambda_with(t: &MpComplex, c: &CurveConsts) -> Result<MpComplex> {
    let den = t.scale(&c.mu).add_f64(-1.0);
    pole_guard(&den, "lambda has a pole at t = 1/mu")?;
    let num = t - &MpComplex::from_real(c.mu.clone());
    Ok(&num / &den)
}

/// `lambda'(t) = (mu^2 - 1) / (mu t - 1)^2`.
pub fn lambda_prime(t: &MpComplex, params: &CurveParams) -> Result<MpComplex> {
    let c = params.consts(t.prec());
    lambda_prime_with(t, &c)
}

pub(crate) fn lambda_prime_with(t: &MpComplex, c: &CurveConsts) -> Result<MpComplex> {
    let den = t.scale(&c.mu).add_f64(-1.0);
    pole_guard(&den, "lambda' has a pole at t = 1/mu")?;
    let num = Float::with_val(c.prec, c.mu.square_ref()) - 1u32;
    Ok(den.square().recip().scale(&num))
}

/// The solutions `(t_+, t_-)` of `psi(lambda(t)) = z`, ordered so that
/// `t_+ = lambda(v_+)`.
pub fn t_pm(z: &MpComplex, params: &CurveParams) -> Result<(MpComplex, MpComplex)> {
    let prec = z.prec();
    let c = params.consts(prec);
    let r2m2 = Float::with_val(prec, c.r.square_ref()) - 2u32;
    let den = (-z).add_real(&r2m2).scale_f64(2.0);
    if den.abs_f64() <= eps_f64(prec) * (1.0 + params.r * params.r) {
        return Err(Error::Pole(format!(
            "t_pm has a pole at z = R^2 - 2 = {}",
            params.r * params.r - 2.0
        )));
    }
    let k = Float::with_val(prec, Float::with_val(prec, c.r.square_ref()) - 4u32).sqrt() * &c.r;
    let s = sqrt_branch(z).scale(&k);
    let base = (-z.scale(&r2m2)).add_f64(4.0);
    let tp = (&(&base - &s) / &den).scale(&c.mu);
    let tm = (&(&base + &s) / &den).scale(&c.mu);
    Ok((tp, tm))
}

/// Region membership per the partition `G_1 = Sigma0 + Sigma1 + Sigma2`.
pub fn classify(z: &MpComplex, params: &CurveParams, tol: f64) -> RegionLabel {
    let (vp, _) = v_pm(z, params);
    let m = vp.abs_f64();
    if m > 1.0 + tol {
        return RegionLabel::Exterior;
    }
    if (m - 1.0).abs() <= tol {
        return RegionLabel::OnL1;
    }
    let re = z.re().to_f64();
    let im = z.im().to_f64();
    if im.abs() <= tol && re > params.x_mu && re <= 2.0 + tol {
        return RegionLabel::Sigma2;
    }
    if m <= params.mu + tol {
        return RegionLabel::Sigma0;
    }
    RegionLabel::Sigma1
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-10;

/// Membership in `D = { |t - 1/R| < 1/R, Re t > R mu^2 / 2 }`.
pub fn in_domain_d(t: &MpComplex, params: &CurveParams) -> bool {
    let c = t.to_c64();
    let inv_r = 1.0 / params.r;
    (c - inv_r).norm() < inv_r && c.re > params.r * params.mu * params.mu / 2.0
}

/// The point `psi(r e^{i theta})` of the level curve `L_r`.
///
/// `theta` is reduced modulo `2 pi` in double precision first, so
/// `theta = 0` and `theta = 2 pi` produce identical results.
pub fn level_curve(r: f64, theta: f64, params: &CurveParams, prec: u32) -> Result<MpComplex> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("level curve radius must be positive, got {r}")));
    }
    let theta = theta.rem_euclid(TAU);
    let theta = if theta == TAU { 0.0 } else { theta };
    let w = MpComplex::cis(&Float::with_val(prec, theta)).scale(&Float::with_val(prec, r));
    psi(&w, params)
}

/// Closed polyline of `L_r` with `n` distinct vertices (first vertex repeated at the end).
pub fn level_curve_polyline(
    r: f64,
    n: usize,
    params: &CurveParams,
    prec: u32,
) -> Result<Vec<MpComplex>> {
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let theta = TAU * (k % n) as f64 / n as f64;
        out.push(level_curve(r, theta, params, prec)?);
    }
    Ok(out)
}

/// Angle `theta_0` where the circle `|w| = mu` meets `|w - 1/R| = 1/R`;
/// the arc `theta_0 <= theta <= 2 pi - theta_0` of `|w| = mu` maps onto the
/// boundary of `Sigma0`.
pub fn sigma0_arc_start(params: &CurveParams) -> f64 {
    (params.r * params.mu / 2.0).acos()
}

/// Polyline of the boundary of `Sigma0` (`n + 1` points from `x_mu` back to `x_mu`).
pub fn sigma0_boundary(n: usize, params: &CurveParams, prec: u32) -> Result<Vec<MpComplex>> {
    let t0 = sigma0_arc_start(params);
    let span = TAU - 2.0 * t0;
    (0..=n)
        .map(|k| level_curve(params.mu, t0 + span * k as f64 / n as f64, params, prec))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn p() -> CurveParams {
        CurveParams::default()
    }

    fn c(re: f64, im: f64) -> MpComplex {
        MpComplex::new(64, re, im)
    }

    fn close(a: &MpComplex, re: f64, im: f64, tol: f64) -> bool {
        (a.to_c64() - Complex64::new(re, im)).norm() <= tol
    }

    #[test]
    fn constants_for_default_curve() {
        let k = p().consts(256);
        assert_eq!(k.mu, 0.5);
        assert_eq!(k.rho, Float::with_val(256, 4) / 5u32);
        assert_eq!(k.x_mu, -0.4375);
        assert_eq!(k.alpha, 1.5);
        assert_eq!(k.varrho, 0.0625);
        let q = p();
        assert!((q.mu * (q.r - q.mu) - 1.0).abs() < 1e-15);
        assert!(CurveParams::new(2.0).is_err());
        assert!(CurveParams::new(f64::NAN).is_err());
        let other = CurveParams::new(3.7).unwrap();
        let k = other.consts(200);
        let check = Float::with_val(200, &k.mu * Float::with_val(200, &k.r - &k.mu)) - 1u32;
        assert!(check.abs() < 1e-58);
    }

    #[test]
    fn psi_examples() {
        assert!(close(&psi(&c(1.0, 0.0), &p()).unwrap(), 1.5 + 1.0 / 1.5, 0.0, 1e-15));
        assert!(close(&psi(&c(-1.0, 0.0), &p()).unwrap(), -3.5 - 1.0 / 3.5, 0.0, 1e-15));
        assert!(close(&psi(&c(0.0, 0.0), &p()).unwrap(), -2.0, 0.0, 0.0));
        let at_pole = MpComplex::from_real(Float::with_val(64, 2) / 5u32);
        assert!(matches!(psi(&at_pole, &p()), Err(Error::Pole(_))));
        // psi'(w) against a central difference
        let w = MpComplex::new(128, 0.9, 0.7);
        let h = MpComplex::new(128, 1e-12, 0.0);
        let fd = (&psi(&(&w + &h), &p()).unwrap() - &psi(&(&w - &h), &p()).unwrap())
            / h.scale_f64(2.0);
        assert!((&fd - &psi_prime(&w, &p()).unwrap()).abs_f64() < 1e-20);
    }

    #[test]
    fn sqrt_branch_examples() {
        assert!(close(&sqrt_branch(&c(3.0, 0.0)), 5f64.sqrt(), 0.0, 1e-15));
        assert!(close(&sqrt_branch(&c(0.0, 0.0)), 0.0, 2.0, 1e-15));
        assert!(close(&sqrt_branch(&c(-3.0, 0.0)), -(5f64.sqrt()), 0.0, 1e-15));
        // limit from above on the segment, jump below it
        let above = sqrt_branch(&c(1.0, 1e-12));
        let on = sqrt_branch(&c(1.0, 0.0));
        let below = sqrt_branch(&c(1.0, -1e-12));
        assert!((&above - &on).abs_f64() < 1e-10);
        assert!((&below + &on).abs_f64() < 1e-10);
    }

    #[test]
    fn v_pm_examples() {
        let (a, b) = v_pm(&c(3.0, 0.0), &p());
        assert!(close(&a, (5.0 + 5f64.sqrt()) / 5.0, 0.0, 1e-15));
        assert!(close(&b, (5.0 - 5f64.sqrt()) / 5.0, 0.0, 1e-15));
        let (a, b) = v_pm(&c(2.0, 0.0), &p());
        assert!(close(&a, 0.8, 0.0, 1e-15) && close(&b, 0.8, 0.0, 1e-15));
        let z = c(0.3, -1.7);
        let (a, b) = v_pm(&z, &p());
        let prod = &a * &b;
        let expect = z.add_f64(2.0).scale_f64(1.0 / 6.25);
        assert!((&prod - &expect).abs_f64() < 1e-17);
    }

    #[test]
    fn phi_examples() {
        let w = c(1.2, 0.0);
        let z = psi(&w, &p()).unwrap();
        assert!(close(&phi(&z, &p()).unwrap(), 1.2, 0.0, 1e-15));
        assert_eq!(phi_prime_at_infinity(&p(), 64), Float::with_val(64, 2) / 5u32);
        assert!(matches!(phi(&c(-1.0, 0.0), &p()), Err(Error::Domain(_))));
        assert!(matches!(phi_prime(&c(2.0, 0.0), &p()), Err(Error::Pole(_))));
        // phi' against finite differences of phi
        let z = MpComplex::new(128, 2.5, 1.0);
        let h = MpComplex::new(128, 1e-12, 0.0);
        let fd = (&phi(&(&z + &h), &p()).unwrap() - &phi(&(&z - &h), &p()).unwrap())
            / h.scale_f64(2.0);
        assert!((&fd - &phi_prime(&z, &p()).unwrap()).abs_f64() < 1e-20);
    }

    #[test]
    fn lambda_examples() {
        assert!(lambda_map(&c(0.5, 0.0), &p()).unwrap().is_zero());
        assert!(close(&lambda_map(&c(0.0, 0.0), &p()).unwrap(), 0.5, 0.0, 0.0));
        let t = c(0.3, 0.1);
        let back = lambda_map(&lambda_map(&t, &p()).unwrap(), &p()).unwrap();
        assert!((&back - &t).abs_f64() < 1e-14);
        assert!(matches!(lambda_map(&c(2.0, 0.0), &p()), Err(Error::Pole(_))));
        assert!(close(&lambda_prime(&c(0.0, 0.0), &p()).unwrap(), -0.75, 0.0, 1e-18));
    }

    #[test]
    fn t_pm_examples() {
        let (a, b) = t_pm(&c(3.0, 0.0), &p()).unwrap();
        assert!(close(&a, -3.427050983124842, 0.0, 1e-12));
        assert!(close(&b, -0.0729490168751577, 0.0, 1e-12));
        assert!(close(&(&a * &b), 0.25, 0.0, 1e-15));
        let (a, b) = t_pm(&c(0.0, 0.0), &p()).unwrap();
        assert!(close(&a, 4.0 / 17.0, -7.5 / 17.0, 1e-15));
        assert!(close(&b, 4.0 / 17.0, 7.5 / 17.0, 1e-15));
        let (a, b) = t_pm(&c(2.0, 0.0), &p()).unwrap();
        assert!(close(&a, -0.5, 0.0, 1e-15) && close(&b, -0.5, 0.0, 1e-15));
        assert!(matches!(t_pm(&c(4.25, 0.0), &p()), Err(Error::Pole(_))));
    }

    #[test]
    fn classify_examples() {
        let tol = DEFAULT_CLASSIFY_TOL;
        assert_eq!(classify(&c(1.0, 0.0), &p(), tol), RegionLabel::Sigma2);
        assert_eq!(classify(&c(-1.0, 0.0), &p(), tol), RegionLabel::Sigma0);
        assert_eq!(classify(&c(0.0, 1.5), &p(), tol), RegionLabel::Sigma1);
        assert_eq!(classify(&c(3.0, 0.0), &p(), tol), RegionLabel::Exterior);
        assert_eq!(classify(&c(-0.4375, 0.0), &p(), tol), RegionLabel::Sigma0);
        assert_eq!(classify(&c(2.0, 0.0), &p(), tol), RegionLabel::Sigma2);
        let on = psi(&MpComplex::cis(&Float::with_val(64, 1.0)), &p()).unwrap();
        assert_eq!(classify(&on, &p(), tol), RegionLabel::OnL1);
        // a boundary point of Sigma0 off the real axis
        let b = level_curve(0.5, 2.0, &p(), 64).unwrap();
        assert_eq!(classify(&b, &p(), tol), RegionLabel::Sigma0);
    }

    #[test]
    fn domain_d_examples() {
        assert!(in_domain_d(&c(0.5, 0.0), &p()));
        assert!(in_domain_d(&c(0.45, 0.2), &p()));
        assert!(!in_domain_d(&c(0.2, 0.0), &p()));
        assert!(!in_domain_d(&c(0.85, 0.0), &p()));
    }

    #[test]
    fn level_curve_examples() {
        let a = level_curve(1.0, 0.0, &p(), 64).unwrap();
        assert!(close(&a, 1.5 + 1.0 / 1.5, 0.0, 1e-15));
        let b = level_curve(1.0, std::f64::consts::PI, &p(), 64).unwrap();
        assert!(close(&b, -3.5 - 1.0 / 3.5, 0.0, 1e-15));
        for r in [0.5, 0.8, 1.0, 1.7] {
            assert_eq!(level_curve(r, 0.0, &p(), 64).unwrap(), level_curve(r, TAU, &p(), 64).unwrap());
        }
        assert!(level_curve(0.4, 0.0, &p(), 53).is_err());
        assert!(level_curve(-1.0, 0.0, &p(), 64).is_err());
    }

    #[test]
    fn sigma0_boundary_closes_at_x_mu() {
        let poly = sigma0_boundary(64, &p(), 64).unwrap();
        assert!(close(&poly[0], -0.4375, 0.0, 1e-12));
        assert!(close(poly.last().unwrap(), -0.4375, 0.0, 1e-12));
        assert!(close(&poly[32], -2.25 - 1.0 / 2.25, 0.0, 1e-12));
        for z in &poly {
            let (vp, _) = v_pm(z, &p());
            assert!((vp.abs_f64() - 0.5).abs() < 1e-12);
        }
    }
}

use carleman_core::mp::MpComplex;
use carleman_core::quad::integrate_doubling;
use carleman_core::special::*;
use carleman_core::CurveParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;

fn params() -> CurveParams {
    CurveParams::default()
}

fn opts() -> ChiEvalOptions {
    ChiEvalOptions::default()
}

fn c(re: f64, im: f64) -> MpComplex {
    MpComplex::new(128, re, im)
}

#[test]
fn chi_known_value() {
    let v = chi(&c(1.0, 0.0), &params(), &opts()).unwrap();
    // Direct sum over k = -1..6 in double precision.
    let mut s = 0.0;
    for k in -1..=6 {
        let w = 16f64.powi(-k);
        s += w * (-1.5 * w).exp();
    }
    assert!((v.re().to_f64() - s).abs() < 1e-8);
    assert!((v.re().to_f64() - 0.284181).abs() < 5e-7);
}

#[test]
fn log_periodicity() {
    let p = params();
    let o = opts();
    let mu4 = Float::with_val(128, 1) / 16u32;
    for (re, im) in [(1.0, 0.0), (0.5, 0.3), (2.0, -1.0)] {
        let t = c(re, im);
        let a = chi(&t.scale(&mu4), &p, &o).unwrap();
        let b = chi(&t, &p, &o).unwrap();
        assert!((a - b).abs_f64() < 1e-25);
    }
}

#[test]
fn chi_at_one_million_matches_reduced_argument() {
    let p = params();
    let o = opts();
    let big = chi(&c(1e6, 0.0), &p, &o).unwrap();
    let reduced = chi(&c(1e6 / 16f64.powi(5), 0.0), &p, &o).unwrap();
    assert!((&big - &reduced).abs_f64() < 1e-25);
    // Tighter tolerance, both sides.
    let fine = ChiEvalOptions::new(256, 1e-60, 100_000).unwrap();
    let big2 = chi(&MpComplex::new(256, 1e6, 0.0), &p, &fine).unwrap();
    assert!((&big2 - &big).abs_f64() < 1e-28);
}

#[test]
fn chi_prime_matches_difference_quotient() {
    let p = params();
    let o = opts();
    let t = c(0.7, 0.2);
    let h = Float::with_val(128, 1e-12);
    let tp = t.add_real(&h);
    let tm = t.add_real(&Float::with_val(128, -&h));
    let fd = (chi(&tp, &p, &o).unwrap() - chi(&tm, &p, &o).unwrap())
        .scale(&(Float::with_val(128, h.recip_ref()) / 2u32));
    let d = chi_prime(&t, &p, &o).unwrap();
    assert!((fd - d).abs_f64() < 1e-18);
}

#[test]
fn integral_form_examples() {
    let p = params();
    let o = opts();
    let a = chi_integral(&c(1.0, 0.0), 1.0, &p, &o).unwrap();
    let b = chi(&c(1.0, 0.0), &p, &o).unwrap();
    assert!((a - b).abs_f64() < 1e-10);
    let t = c(0.45, 0.2);
    let a = chi_integral(&t, 7.0, &p, &o).unwrap();
    let b = chi(&t.scale_f64(7.0), &p, &o).unwrap();
    assert!((a - b).abs_f64() < 1e-10);
}

#[test]
fn integral_form_random_samples() {
    let p = params();
    let o = opts();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let t = c(rng.gen_range(0.1..2.0), rng.gen_range(-1.5..1.5));
        let gamma = rng.gen_range(0.05..40.0);
        let a = chi_integral(&t, gamma, &p, &o).unwrap();
        let b = chi(&t.scale_f64(gamma), &p, &o).unwrap();
        assert!((a - b).abs_f64() < 1e-10, "t={t} gamma={gamma}");
    }
}

#[test]
fn integral_form_errors() {
    let p = params();
    let o = opts();
    assert!(chi_integral(&c(-1.0, 0.0), 1.0, &p, &o).unwrap_err().is_domain());
    assert!(chi_integral(&c(1.0, 0.0), 0.0, &p, &o).unwrap_err().is_domain());
}

#[test]
fn consecutive_difference_decays_like_one_over_n() {
    let p = params();
    let o = opts();
    let t = c(0.45, 0.2);
    let mut vals = Vec::new();
    let mut n = 8u32;
    while n <= 512 {
        let a = chi(&t.scale_f64(n as f64), &p, &o).unwrap();
        let b = chi(&t.scale_f64((n + 1) as f64), &p, &o).unwrap();
        vals.push(n as f64 * (a - b).abs_f64());
        n *= 2;
    }
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0 && max / min < 50.0, "{vals:?}");
}

#[test]
fn f_q_is_one_periodic() {
    let p = params();
    let o = opts();
    let t = c(0.45, 0.2);
    // 1.3 - 1 is not 0.3 in binary, hence the looser check
    let a = f_q(&t, 0.3, &p, &o).unwrap();
    let b = f_q(&t, 1.3, &p, &o).unwrap();
    assert!((&a - &b).abs_f64() < 1e-12);
    let a = f_q(&t, 0.25, &p, &o).unwrap();
    let b = f_q(&t, 1.25, &p, &o).unwrap();
    assert!((&a - &b).abs_f64() < 1e-25);
    // the unreduced kernel scale shows the same thing through chi itself
    let cc = p.consts(136);
    let k0 = kernel(&t, &varrho_pow(0.25, &cc), &p, &o).unwrap();
    let k1 = kernel(&t, &varrho_pow(1.25, &cc), &p, &o).unwrap();
    assert!((k0 - k1).abs_f64() < 1e-25);
}

#[test]
fn f_0_regression_value() {
    let v = f_q(&c(0.45, 0.2), 0.0, &params(), &opts()).unwrap();
    let z = v.to_c64();
    assert!((z.re - F0_RE).abs() < 1e-14 && (z.im - F0_IM).abs() < 1e-14, "{v}");
}

// f_0(0.45 + 0.2i) at R = 2.5, frozen from a 128-bit evaluation.
const F0_RE: f64 = 0.031_715_448_200_977_34;
const F0_IM: f64 = 0.000_609_572_358_337_508_2;

#[test]
fn f_q_is_analytic_on_d() {
    let p = params();
    let o = opts();
    let h = 1e-4;
    for t in d_grid(12, &p, 128) {
        for q in [0.0, 0.4] {
            let f = |dx: f64, dy: f64| f_q(&t.add_f64(dx).clone_add_im(dy), q, &p, &o).unwrap();
            let fx = (f(h, 0.0) - f(-h, 0.0)).scale_f64(0.5 / h);
            let fy = (f(0.0, h) - f(0.0, -h)).scale_f64(0.5 / h);
            let resid = (&fy - &(&fx * &MpComplex::i(128))).abs_f64();
            assert!(resid < 1e-6, "t={t} q={q} resid={resid}");
        }
    }
}

trait AddIm {
    fn clone_add_im(&self, dy: f64) -> MpComplex;
}

impl AddIm for MpComplex {
    fn clone_add_im(&self, dy: f64) -> MpComplex {
        self + &MpComplex::new(self.prec(), 0.0, dy)
    }
}

#[test]
fn removable_singularity_at_mu() {
    let p = params();
    let o = opts();
    let mu = p.mu;
    let a = f_q(&c(mu + 1e-7, 0.0), 0.0, &p, &o).unwrap();
    let e = 1e-7 * std::f64::consts::FRAC_1_SQRT_2;
    let b = f_q(&c(mu + e, e), 0.0, &p, &o).unwrap();
    assert!((&a - &b).abs_f64() < 1e-4);

    // Exact limit: kernel(mu) = c chi'(c mu).
    for q in [0.0, 0.3, 0.7] {
        let cc = p.consts(136);
        let s = varrho_pow(q, &cc);
        let k = kernel(&c(mu, 0.0), &s, &p, &o).unwrap();
        let arg = MpComplex::from_real(Float::with_val(136, &s * &cc.mu));
        let exact = chi_prime(&arg, &p, &o).unwrap().scale(&s);
        assert!((&k - &exact).abs_f64() < 1e-15, "q={q}: {k} vs {exact}");
        // inside the band, off the real axis
        let t = c(mu + 3e-7, -4e-7);
        let inner = kernel(&t, &s, &p, &o).unwrap();
        let outer = kernel(&c(mu + 3e-6, -4e-6), &s, &p, &o).unwrap();
        assert!((&inner - &exact).abs_f64() < 1e-5);
        assert!((&outer - &exact).abs_f64() < 1e-4);
    }
}

#[test]
fn f_q_domain_errors() {
    let e = f_q(&c(-0.1, 0.3), 0.0, &params(), &opts()).unwrap_err();
    assert!(e.is_domain());
}

#[test]
fn fourier_coefficients_nonzero_and_decaying() {
    let p = params();
    let mut any_real = false;
    let mut prev = f64::INFINITY;
    for n in 1..=10 {
        let cn = fourier_cn(n, 0.0, 0.5, &p).unwrap();
        let m = cn.abs_f64();
        assert!(m > 0.0 && m < prev);
        prev = m;
        any_real |= cn.re().to_f64().abs() > 0.0;
        // |Gamma(1 + iy)|^2 = pi y / sinh(pi y)
        let y = 2.0 * std::f64::consts::PI * n as f64 / p.varrho.ln();
        let g2 = std::f64::consts::PI * y / (std::f64::consts::PI * y).sinh();
        let expect = g2.sqrt() / (p.alpha * p.varrho.ln().abs());
        assert!((m / expect - 1.0).abs() < 1e-12, "n={n}");
    }
    assert!(any_real);
    assert!(fourier_cn(0, 0.0, 0.5, &p).unwrap_err().is_domain());
}

#[test]
fn fourier_coefficient_matches_direct_integral() {
    let p = params();
    let prec = 128;
    let cc = p.consts(prec);
    let ln_rho = Float::with_val(prec, cc.varrho.ln_ref());
    for (n, q, pp) in [(1u32, 0.0, 0.5), (2, 0.1, 0.35), (3, 0.0, 0.5)] {
        let shift = q + pp + 0.5;
        let mut f = |tau: &Float| {
            let r = Float::with_val(prec, &ln_rho * tau).exp();
            let e = (-Float::with_val(prec, &cc.alpha * &r)).exp();
            let ph = (Float::with_val(prec, tau * 2u32) - shift) * n * carleman_core::mp::pi(prec);
            Ok(MpComplex::cis(&ph).scale(&Float::with_val(prec, r * e)))
        };
        let mut total = MpComplex::zero(prec);
        let mut a = -2.0;
        while a < 40.0 {
            let lo = Float::with_val(prec, a);
            let hi = Float::with_val(prec, a + 0.5);
            total += &integrate_doubling(&mut f, &lo, &hi, 16, 256, 1e-30).unwrap();
            a += 0.5;
        }
        let cn = fourier_cn(n, q, pp, &p).unwrap();
        assert!((&total - &cn).abs_f64() < 1e-8, "n={n}: {total} vs {cn}");
    }
}

#[test]
fn fourier_coefficient_matches_g_difference_sine_integral() {
    // int_0^1 (g_a - g_b)(x) sin(2 pi n x) dx = 4 Re(c_n) sin(pi n (b - a)),
    // g_a(x) = chi(varrho^{a+x}) - chi(varrho^{a-x}), a = q + 1/4, b = p + 1/4.
    let p = params();
    let o = opts();
    let prec = 128;
    let cc = p.consts(prec);
    let ln_rho = Float::with_val(prec, cc.varrho.ln_ref());
    let pi = carleman_core::mp::pi(prec);
    let (q, pp) = (0.0, 0.5);
    let (a, b) = (q + 0.25, pp + 0.25);
    let chi_exp = |s: &Float| {
        let x = Float::with_val(prec, &ln_rho * s).exp();
        chi(&MpComplex::from_real(x), &p, &o).unwrap()
    };
    for n in 1..=3u32 {
        let mut f = |x: &Float| {
            let g = |shift: f64| {
                let plus = Float::with_val(prec, x + shift);
                let minus = Float::with_val(prec, shift - x);
                chi_exp(&plus) - chi_exp(&minus)
            };
            let s = Float::with_val(prec, x * &pi) * (2 * n);
            Ok((g(a) - g(b)).scale(&s.sin()))
        };
        let lhs = integrate_doubling(
            &mut f,
            &Float::with_val(prec, 0),
            &Float::with_val(prec, 1),
            16,
            256,
            1e-20,
        )
        .unwrap();
        let cn = fourier_cn(n, q, pp, &p).unwrap();
        let rhs = 4.0 * cn.re().to_f64() * (std::f64::consts::PI * n as f64 * (b - a)).sin();
        assert!((lhs.re().to_f64() - rhs).abs() < 1e-8, "n={n}: {lhs} vs {rhs}");
    }
}

#[test]
fn distinctness() {
    let p = params();
    let grid = d_grid(50, &p, 128);
    let d = fq_distinct(0.0, 0.5, &grid, &p).unwrap();
    assert!(d > 1e-3, "{d}");
    assert_eq!(fq_distinct(0.3, 0.3, &grid, &p).unwrap(), 0.0);
    let near = fq_distinct(0.0, 1.0 - 1e-12, &grid, &p).unwrap();
    assert!(near < 1e-6, "{near}");
    assert!(fq_distinct(0.0, 0.5, &[], &p).unwrap_err().is_domain());
}

#[test]
fn subsequence_residuals_bounded_by_rounding() {
    let p = params();
    let ln_rho = p.varrho.ln().abs();
    for q in [0.1, 0.3, 0.6, 0.9] {
        let s = subsequence_for_q(q, 10, &p).unwrap();
        assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        for (n, r) in s.indices.iter().zip(&s.residual) {
            // |n - x| <= 1/2 moves log_{mu^4} by at most 1/(2 (n - 1/2) ln 16)
            let bound = 2.0 * (std::f64::consts::PI * 0.5 / ((*n as f64 - 0.5) * ln_rho)).sin();
            assert!(*r <= bound * (1.0 + 1e-9), "q={q} n={n} r={r}");
            let fr = frac_log_varrho(*n, &p);
            let d = (fr - q + 0.5).rem_euclid(1.0) - 0.5;
            assert!(d.abs() <= 0.5 / ((*n as f64 - 0.5) * ln_rho) + 1e-12);
        }
    }
}

//! Ground truth for the orthonormal polynomials: area moments of the
//! interior `G_1` from boundary integrals, Cholesky orthonormalization,
//! evaluation and zeros.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rug::Float;

use crate::conformal::{psi, psi_prime, CurveParams};
use crate::error::{Error, Result};
use crate::mp::{exact_decimal, pi, MpComplex};

pub const CACHE_HEADER: &str = "CARLEMAN-MOMENTS v1";
/// Environment variable naming the moment cache directory.
pub const CACHE_DIR_ENV: &str = "CARLEMAN_CACHE_DIR";

/// Extra bits carried by the quadrature accumulators.
const GUARD_BITS: u32 = 32;

/// Working precision for a basis of degree `n`.
pub fn default_bits(n: usize) -> u32 {
    128 + 4 * n as u32
}

/// Trapezoidal node schedule for [`boundary_moments_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeSchedule {
    pub start: usize,
    pub budget: usize,
}

impl Default for NodeSchedule {
    fn default() -> Self {
        NodeSchedule {
            start: 256,
            budget: 1 << 20,
        }
    }
}

/// Area moments `(1/pi) int_{G_1} z^j conj(z)^k dA` for `0 <= j, k <= degree`.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub degree: usize,
    /// Row-major `(degree+1)^2` table.
    pub entries: Vec<MpComplex>,
    pub precision_bits: u32,
    pub quadrature_nodes: usize,
    pub r: f64,
}

impl MomentMatrix {
    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn entry(&self, j: usize, k: usize) -> &MpComplex {
        &self.entries[j * self.dim() + k]
    }

    /// Leading `(n+1) x (n+1)` block.
    pub fn truncate(&self, n: usize) -> Result<MomentMatrix> {
        if n > self.degree {
            return Err(Error::Index {
                index: n,
                max: self.degree,
            });
        }
        let mut entries = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for k in 0..=n {
                entries.push(self.entry(j, k).clone());
            }
        }
        Ok(MomentMatrix {
            degree: n,
            entries,
            precision_bits: self.precision_bits,
            quadrature_nodes: self.quadrature_nodes,
            r: self.r,
        })
    }

    /// `max |M_jk - conj(M_kj)| / sqrt(M_jj M_kk)`
    pub fn hermitian_defect(&self) -> Float {
        let prec = self.precision_bits;
        let mut worst = Float::with_val(prec, 0);
        for j in 0..self.dim() {
            for k in 0..j {
                let d = (self.entry(j, k) - &self.entry(k, j).conj()).abs();
                let s = self.scale(j, k);
                let rel = Float::with_val(prec, d / s);
                if rel > worst {
                    worst = rel;
                }
            }
        }
        worst
    }

    /// `max |Im M_jk| / sqrt(M_jj M_kk)`
    pub fn max_imag(&self) -> Float {
        let prec = self.precision_bits;
        let mut worst = Float::with_val(prec, 0);
        for j in 0..self.dim() {
            for k in 0..self.dim() {
                let d = Float::with_val(prec, self.entry(j, k).im().abs_ref());
                let rel = Float::with_val(prec, d / self.scale(j, k));
                if rel > worst {
                    worst = rel;
                }
            }
        }
        worst
    }

    /// Largest entrywise difference relative to the diagonal scale.
    pub fn relative_distance(&self, other: &MomentMatrix) -> Result<Float> {
        if other.degree != self.degree {
            return Err(Error::Domain("moment matrices of different degree".into()));
        }
        let prec = self.precision_bits.min(other.precision_bits);
        let mut worst = Float::with_val(prec, 0);
        for j in 0..self.dim() {
            for k in 0..self.dim() {
                let d = (self.entry(j, k) - other.entry(j, k)).abs();
                let rel = Float::with_val(prec, d / self.scale(j, k));
                if rel > worst {
                    worst = rel;
                }
            }
        }
        Ok(worst)
    }

    fn scale(&self, j: usize, k: usize) -> Float {
        let prec = self.precision_bits;
        let p = Float::with_val(prec, self.entry(j, j).re() * self.entry(k, k).re());
        p.sqrt()
    }
}

/// Boundary point `z = psi(w)` and the Jacobian factor `psi'(w) w` at `theta`.
fn boundary_node(theta: &Float, params: &CurveParams) -> Result<(MpComplex, MpComplex)> {
    let w = MpComplex::cis(theta);
    let z = psi(&w, params)?;
    let dz = &psi_prime(&w, params)? * &w;
    Ok((z, dz))
}

fn theta(prec: u32, num: usize, den: usize) -> Float {
    let mut t = pi(prec) * 2u32;
    t *= num as u64;
    t /= den as u64;
    t
}

fn tri(j: usize, k: usize) -> usize {
    k * (k + 1) / 2 + j
}

/// Conjugate-symmetric accumulator: real parts for `j <= k` only.
struct SymAcc {
    n: usize,
    s: Vec<Float>,
}

impl SymAcc {
    fn new(n: usize, prec: u32) -> Self {
        SymAcc {
            n,
            s: vec![Float::new(prec); (n + 1) * (n + 2) / 2],
        }
    }

    fn add_node(&mut self, z: &MpComplex, dz: &MpComplex, weight: u32) {
        let n = self.n;
        let prec = self.s[0].prec();
        let z = z.with_prec(prec);
        let zc = z.conj();
        let mut a = Vec::with_capacity(n + 1);
        a.push(MpComplex::one(prec));
        for j in 1..=n {
            let next = &a[j - 1] * &z;
            a.push(next);
        }
        let mut b = (&zc * &dz.with_prec(prec)).scale_f64(weight as f64);
        for k in 0..=n {
            let row = k * (k + 1) / 2;
            for (j, aj) in a.iter().enumerate().take(k + 1) {
                let acc = &mut self.s[row + j];
                *acc += aj.re() * b.re();
                *acc -= aj.im() * b.im();
            }
            b = &b * &zc;
        }
    }
}

/// General accumulator over all `(j, k)`, complex.
struct FullAcc {
    n: usize,
    s: Vec<MpComplex>,
}

impl FullAcc {
    fn new(n: usize, prec: u32) -> Self {
        FullAcc {
            n,
            s: vec![MpComplex::zero(prec); (n + 1) * (n + 1)],
        }
    }

    fn add_node(&mut self, z: &MpComplex, dz: &MpComplex) {
        let n = self.n;
        let prec = self.s[0].prec();
        let z = z.with_prec(prec);
        let zc = z.conj();
        let mut a = Vec::with_capacity(n + 1);
        a.push(MpComplex::one(prec));
        for j in 1..=n {
            let next = &a[j - 1] * &z;
            a.push(next);
        }
        let mut b = &zc * &dz.with_prec(prec);
        for k in 0..=n {
            for (j, aj) in a.iter().enumerate() {
                self.s[j * (n + 1) + k].add_mul(aj, &b);
            }
            b = &b * &zc;
        }
    }
}

/// Moments by the trapezoidal rule on `theta -> psi(e^{i theta})` using the
/// conjugation symmetry of `G_1` (entries are real).
pub fn boundary_moments(params: &CurveParams, n: usize, bits: u32) -> Result<MomentMatrix> {
    boundary_moments_with(params, n, bits, NodeSchedule::default())
}

pub fn boundary_moments_with(
    params: &CurveParams,
    n: usize,
    bits: u32,
    schedule: NodeSchedule,
) -> Result<MomentMatrix> {
    check_bits(bits)?;
    let prec = bits + GUARD_BITS;
    let tol = Float::with_val(prec, Float::u_exp(1, -(bits as i32 - 8)));
    let mut m = schedule.start.max(4).next_power_of_two();

    // Level m: theta = 2 pi i/m, i = 0..=m/2, interior nodes doubled.
    let mut acc = SymAcc::new(n, prec);
    for i in 0..=m / 2 {
        let (z, dz) = boundary_node(&theta(prec, i, m), params)?;
        let w = if i == 0 || i == m / 2 { 1 } else { 2 };
        acc.add_node(&z, &dz, w);
    }
    loop {
        if 2 * m > schedule.budget {
            return Err(Error::NonConvergence(format!(
                "moment quadrature not settled within {} nodes",
                schedule.budget
            )));
        }
        // New odd nodes theta = 2 pi (2i+1)/(2m) in (0, pi).
        let mut fresh = SymAcc::new(n, prec);
        for i in 0..m / 2 {
            let (z, dz) = boundary_node(&theta(prec, 2 * i + 1, 2 * m), params)?;
            fresh.add_node(&z, &dz, 2);
        }
        let mut worst = Float::with_val(prec, 0);
        // E_2m - E_m = (S_new - S_old) / (2m (k+1)), E_2m = (S_old + S_new)/(2m (k+1)).
        let mut diag = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let i = tri(k, k);
            diag.push(Float::with_val(prec, &acc.s[i] + &fresh.s[i]) / (2 * m * (k + 1)) as u64);
        }
        for k in 0..=n {
            for j in 0..=k {
                let i = tri(j, k);
                let mut d = Float::with_val(prec, &fresh.s[i] - &acc.s[i]);
                d /= (2 * m * (k + 1)) as u64;
                d.abs_mut();
                let s = Float::with_val(prec, &diag[j] * &diag[k]).sqrt();
                d /= &s;
                if d > worst {
                    worst = d;
                }
            }
        }
        for (a, f) in acc.s.iter_mut().zip(fresh.s) {
            *a += f;
        }
        m *= 2;
        if worst < tol {
            break;
        }
    }

    let dim = n + 1;
    let mut entries = vec![MpComplex::zero(bits); dim * dim];
    for k in 0..=n {
        for j in 0..=k {
            let v = Float::with_val(bits, &acc.s[tri(j, k)] / (m * (k + 1)) as u64);
            entries[j * dim + k] = MpComplex::from_real(v.clone());
            entries[k * dim + j] = MpComplex::from_real(v);
        }
    }
    Ok(MomentMatrix {
        degree: n,
        entries,
        precision_bits: bits,
        quadrature_nodes: m,
        r: params.r,
    })
}

/// Same quadrature without using any symmetry: every node, every `(j, k)`,
/// complex accumulation. Much slower; used to check the symmetric route.
pub fn boundary_moments_full(
    params: &CurveParams,
    n: usize,
    bits: u32,
    schedule: NodeSchedule,
) -> Result<MomentMatrix> {
    check_bits(bits)?;
    let prec = bits + GUARD_BITS;
    let tol = Float::with_val(prec, Float::u_exp(1, -(bits as i32 - 8)));
    let dim = n + 1;
    let mut m = schedule.start.max(4).next_power_of_two();
    let mut acc = FullAcc::new(n, prec);
    for i in 0..m {
        let (z, dz) = boundary_node(&theta(prec, i, m), params)?;
        acc.add_node(&z, &dz);
    }
    loop {
        if 2 * m > schedule.budget {
            return Err(Error::NonConvergence(format!(
                "moment quadrature not settled within {} nodes",
                schedule.budget
            )));
        }
        let mut fresh = FullAcc::new(n, prec);
        for i in 0..m {
            let (z, dz) = boundary_node(&theta(prec, 2 * i + 1, 2 * m), params)?;
            fresh.add_node(&z, &dz);
        }
        let scale = |k: usize| (2 * m * (k + 1)) as u64;
        let diag: Vec<Float> = (0..dim)
            .map(|k| {
                let i = k * dim + k;
                Float::with_val(prec, acc.s[i].re() + fresh.s[i].re()) / scale(k)
            })
            .collect();
        let mut worst = Float::with_val(prec, 0);
        for j in 0..dim {
            for k in 0..dim {
                let i = j * dim + k;
                let d = (&fresh.s[i] - &acc.s[i]).div_u64(scale(k)).abs();
                let s = Float::with_val(prec, &diag[j] * &diag[k]).sqrt();
                let rel = Float::with_val(prec, d / s);
                if rel > worst {
                    worst = rel;
                }
            }
        }
        for (a, f) in acc.s.iter_mut().zip(&fresh.s) {
            *a += f;
        }
        m *= 2;
        if worst < tol {
            break;
        }
    }
    let entries = (0..dim * dim)
        .map(|i| acc.s[i].div_u64((m * (i % dim + 1)) as u64).with_prec(bits))
        .collect();
    Ok(MomentMatrix {
        degree: n,
        entries,
        precision_bits: bits,
        quadrature_nodes: m,
        r: params.r,
    })
}

fn check_bits(bits: u32) -> Result<()> {
    if bits < 64 {
        return Err(Error::Domain(format!("precision_bits must be at least 64, got {bits}")));
    }
    Ok(())
}

/// Cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from)
}

pub fn cache_file_name(r: f64, n: usize, bits: u32) -> String {
    format!("moments-R{r:?}-N{n}-b{bits}-v1.txt")
}

/// Writes `m` atomically into `dir` and returns the file path.
pub fn write_moment_cache(m: &MomentMatrix, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(cache_file_name(m.r, m.degree, m.precision_bits));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        writeln!(w, "{CACHE_HEADER}")?;
        writeln!(w, "{:?}", m.r)?;
        writeln!(w, "{}", m.degree)?;
        writeln!(w, "{}", m.precision_bits)?;
        writeln!(w, "{}", m.quadrature_nodes)?;
        for e in &m.entries {
            writeln!(w, "{} {}", exact_decimal(e.re()), exact_decimal(e.im()))?;
        }
        w.flush()?;
    }
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

pub fn read_moment_cache(path: &Path) -> Result<MomentMatrix> {
    let bad = |msg: String| Error::Cache {
        path: path.to_path_buf(),
        msg,
    };
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let mut next = |what: &str| -> Result<String> {
        match lines.next() {
            Some(l) => Ok(l?),
            None => Err(bad(format!("truncated before {what}"))),
        }
    };
    let header = next("header")?;
    if header.trim() != CACHE_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let r: f64 = next("R")?.trim().parse().map_err(|e| bad(format!("R: {e}")))?;
    let degree: usize = next("N")?.trim().parse().map_err(|e| bad(format!("N: {e}")))?;
    let bits: u32 = next("bits")?.trim().parse().map_err(|e| bad(format!("bits: {e}")))?;
    let nodes: usize = next("nodes")?.trim().parse().map_err(|e| bad(format!("nodes: {e}")))?;
    let dim = degree + 1;
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim * dim {
        let line = next("entries")?;
        let mut parts = line.split_whitespace();
        let mut part = || -> Result<Float> {
            let s = parts.next().ok_or_else(|| bad(format!("entry {i} incomplete")))?;
            let v = Float::parse(s).map_err(|e| bad(format!("entry {i}: {e}")))?;
            Ok(Float::with_val(bits, v))
        };
        let re = part()?;
        let im = part()?;
        entries.push(MpComplex::from_parts(re, im));
    }
    Ok(MomentMatrix {
        degree,
        entries,
        precision_bits: bits,
        quadrature_nodes: nodes,
        r,
    })
}

/// Loads the moments from `dir` when a matching file exists, otherwise
/// builds and stores them.
pub fn cached_moments(
    params: &CurveParams,
    n: usize,
    bits: u32,
    dir: Option<&Path>,
) -> Result<MomentMatrix> {
    let Some(dir) = dir else {
        return boundary_moments(params, n, bits);
    };
    let path = dir.join(cache_file_name(params.r, n, bits));
    if path.exists() {
        let m = read_moment_cache(&path)?;
        if m.r != params.r || m.degree != n || m.precision_bits != bits {
            return Err(Error::Cache {
                path,
                msg: "key mismatch".into(),
            });
        }
        return Ok(m);
    }
    // A cache for a larger degree at the same precision also serves.
    if let Ok(rd) = fs::read_dir(dir) {
        let prefix = format!("moments-R{:?}-N", params.r);
        let suffix = format!("-b{bits}-v1.txt");
        let mut best: Option<(usize, PathBuf)> = None;
        for e in rd.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(mid) = name.strip_prefix(&prefix).and_then(|s| s.strip_suffix(&suffix)) {
                if let Ok(big) = mid.parse::<usize>() {
                    if big > n && best.as_ref().map_or(true, |(b, _)| big < *b) {
                        best = Some((big, e.path()));
                    }
                }
            }
        }
        if let Some((_, p)) = best {
            return read_moment_cache(&p)?.truncate(n);
        }
    }
    let m = boundary_moments(params, n, bits)?;
    write_moment_cache(&m, dir)?;
    Ok(m)
}

/// Orthonormal polynomials `p_0..p_N` in the monomial basis.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    pub degree: usize,
    /// Row `n` holds the `n+1` ascending coefficients of `p_n`.
    pub coeffs: Vec<Vec<MpComplex>>,
    pub kappa: Vec<Float>,
    pub precision_bits: u32,
    pub r: f64,
}

/// `M = L L^*`, then the coefficient table is `L^{-1}`.
pub fn orthonormalize(m: &MomentMatrix) -> Result<OrthoBasis> {
    let dim = m.dim();
    let prec = m.precision_bits + GUARD_BITS;
    let mut l: Vec<Vec<MpComplex>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut row: Vec<MpComplex> = Vec::with_capacity(i + 1);
        for j in 0..i {
            let mut s = m.entry(i, j).with_prec(prec);
            for k in 0..j {
                s.sub_mul(&row[k], &l[j][k].conj());
            }
            let d = l[j][j].re().clone();
            row.push(MpComplex::from_parts(
                Float::with_val(prec, s.re() / &d),
                Float::with_val(prec, s.im() / &d),
            ));
        }
        let mut s = Float::with_val(prec, m.entry(i, i).re());
        for v in &row {
            s -= v.norm_sqr();
        }
        if !(s > 0) {
            return Err(Error::CholeskyBreakdown { row: i });
        }
        row.push(MpComplex::from_real(s.sqrt()));
        l.push(row);
    }

    let mut c: Vec<Vec<MpComplex>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let inv = Float::with_val(prec, l[i][i].re().recip_ref());
        let mut row = vec![MpComplex::zero(prec); i + 1];
        row[i] = MpComplex::from_real(inv.clone());
        for j in (0..i).rev() {
            let mut s = MpComplex::zero(prec);
            for k in j..i {
                s.add_mul(&l[i][k], &c[k][j]);
            }
            row[j] = (-s).scale(&inv);
        }
        c.push(row);
    }
    let bits = m.precision_bits;
    let coeffs: Vec<Vec<MpComplex>> = c
        .iter()
        .map(|row| row.iter().map(|x| x.with_prec(bits)).collect())
        .collect();
    let kappa = coeffs.iter().enumerate().map(|(n, row)| row[n].re().clone()).collect();
    Ok(OrthoBasis {
        degree: m.degree,
        coeffs,
        kappa,
        precision_bits: bits,
        r: m.r,
    })
}

impl OrthoBasis {
    fn check(&self, n: usize) -> Result<()> {
        if n > self.degree {
            return Err(Error::Index {
                index: n,
                max: self.degree,
            });
        }
        Ok(())
    }

    pub fn coefficients(&self, n: usize) -> Result<&[MpComplex]> {
        self.check(n)?;
        Ok(&self.coeffs[n])
    }

    /// `max_{n,m} |<p_n, p_m> - delta_nm|` with the inner product taken
    /// from the moment matrix.
    pub fn gram_residual(&self, m: &MomentMatrix) -> Result<Float> {
        let dim = self.degree + 1;
        if m.degree < self.degree {
            return Err(Error::Index {
                index: self.degree,
                max: m.degree,
            });
        }
        let prec = self.precision_bits + GUARD_BITS;
        // Row n of C M.
        let cm: Vec<Vec<MpComplex>> = (0..dim)
            .map(|n| {
                (0..dim)
                    .map(|k| {
                        let mut s = MpComplex::zero(prec);
                        for (j, c) in self.coeffs[n].iter().enumerate() {
                            s.add_mul(c, m.entry(j, k));
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let mut worst = Float::with_val(prec, 0);
        for n in 0..dim {
            for q in 0..=n {
                let mut s = MpComplex::zero(prec);
                for (k, c) in self.coeffs[q].iter().enumerate() {
                    s.add_mul(&cm[n][k], &c.conj());
                }
                if n == q {
                    s = s.add_f64(-1.0);
                }
                let a = s.abs();
                if a > worst {
                    worst = a;
                }
            }
        }
        Ok(worst)
    }
}

fn horner(coeffs: &[MpComplex], z: &MpComplex, prec: u32) -> MpComplex {
    let z = z.with_prec(prec);
    let mut acc = MpComplex::zero(prec);
    for c in coeffs.iter().rev() {
        acc = &(&acc * &z) + c;
    }
    acc
}

/// `p_n(z)`, Horner at the basis precision.
pub fn eval_pn(basis: &OrthoBasis, n: usize, z: &MpComplex) -> Result<MpComplex> {
    basis.check(n)?;
    Ok(horner(&basis.coeffs[n], z, basis.precision_bits))
}

/// `p_n(z)` and `p_n'(z)`.
pub fn eval_pn_with_derivative(
    basis: &OrthoBasis,
    n: usize,
    z: &MpComplex,
) -> Result<(MpComplex, MpComplex)> {
    basis.check(n)?;
    Ok(horner_with_derivative(&basis.coeffs[n], z, basis.precision_bits))
}

fn horner_with_derivative(coeffs: &[MpComplex], z: &MpComplex, prec: u32) -> (MpComplex, MpComplex) {
    let z = z.with_prec(prec);
    let mut p = MpComplex::zero(prec);
    let mut d = MpComplex::zero(prec);
    for c in coeffs.iter().rev() {
        d = &(&d * &z) + &p;
        p = &(&p * &z) + c;
    }
    (p, d)
}

/// Monic `P_n = p_n / kappa_n`.
pub fn eval_monic(basis: &OrthoBasis, n: usize, z: &MpComplex) -> Result<MpComplex> {
    let v = eval_pn(basis, n, z)?;
    let inv = Float::with_val(basis.precision_bits, basis.kappa[n].recip_ref());
    Ok(v.scale(&inv))
}

/// `<p_n, p_m>` recomputed from boundary values alone:
/// `(1/(2 pi i)) int_{L_1} p_n(z) conj(Q_m(z)) dz` with `Q_m' = p_m`,
/// trapezoidal rule with `nodes` points.
pub fn inner_product_boundary(
    basis: &OrthoBasis,
    n: usize,
    m: usize,
    params: &CurveParams,
    nodes: usize,
) -> Result<MpComplex> {
    basis.check(n)?;
    basis.check(m)?;
    let prec = basis.precision_bits + GUARD_BITS;
    let q: Vec<MpComplex> = std::iter::once(MpComplex::zero(prec))
        .chain(
            basis.coeffs[m]
                .iter()
                .enumerate()
                .map(|(j, c)| c.with_prec(prec).div_u64(j as u64 + 1)),
        )
        .collect();
    let pn: Vec<MpComplex> = basis.coeffs[n].iter().map(|c| c.with_prec(prec)).collect();
    let mut acc = MpComplex::zero(prec);
    for i in 0..nodes {
        let (z, dz) = boundary_node(&theta(prec, i, nodes), params)?;
        let a = horner(&pn, &z, prec);
        let b = horner(&q, &z, prec).conj();
        acc.add_mul(&(&a * &b), &dz);
    }
    Ok(acc.div_u64(nodes as u64).with_prec(basis.precision_bits))
}

const ABERTH_MAX_ITERS: usize = 1000;

/// Positive root of `|a_n| x^n = sum_{j<n} |a_j| x^j`.
fn cauchy_bound(coeffs: &[MpComplex]) -> f64 {
    let n = coeffs.len() - 1;
    // log-magnitudes keep huge coefficient ranges finite
    let lead = coeffs[n].abs();
    let logs: Vec<f64> = coeffs[..n]
        .iter()
        .map(|c| {
            let r = Float::with_val(lead.prec(), c.abs() / &lead);
            if r.is_zero() {
                f64::NEG_INFINITY
            } else {
                r.ln().to_f64()
            }
        })
        .collect();
    // g(x) = ln sum_j exp(logs_j + j ln x) - n ln x, decreasing in x
    let g = |lx: f64| {
        let terms: Vec<f64> = logs.iter().enumerate().map(|(j, l)| l + j as f64 * lx).collect();
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
        mx + s.ln() - n as f64 * lx
    };
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.exp()
}

/// All roots of `p_n` by Aberth–Ehrlich iteration, then Newton polish.
pub fn pn_zeros(basis: &OrthoBasis, n: usize) -> Result<Vec<MpComplex>> {
    basis.check(n)?;
    if n == 0 {
        return Err(Error::Domain("p_0 has no zeros".into()));
    }
    let prec = basis.precision_bits;
    let coeffs = &basis.coeffs[n];
    let bound = cauchy_bound(coeffs);
    let mut z: Vec<MpComplex> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * (k as f64 + 0.25) / n as f64 + 0.4;
            MpComplex::new(prec, bound * a.cos(), bound * a.sin())
        })
        .collect();
    let tol = Float::with_val(prec, Float::u_exp(1, -(prec as i32 / 2)));
    let mut converged = vec![false; n];
    let mut iters = 0;
    while converged.iter().any(|c| !c) {
        iters += 1;
        if iters > ABERTH_MAX_ITERS {
            return Err(Error::NonConvergence(format!(
                "Aberth iteration for p_{n} did not converge in {ABERTH_MAX_ITERS} sweeps"
            )));
        }
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let (p, d) = horner_with_derivative(coeffs, &z[i], prec);
            if p.is_zero() {
                converged[i] = true;
                continue;
            }
            let ratio = &p / &d;
            let mut sum = MpComplex::zero(prec);
            for j in 0..n {
                if j != i {
                    sum += &(&z[i] - &z[j]).recip();
                }
            }
            let denom = (-(&ratio * &sum)).add_f64(1.0);
            let w = &ratio / &denom;
            let scale = Float::with_val(prec, z[i].abs().max(&Float::with_val(prec, 1)));
            z[i] -= &w;
            if Float::with_val(prec, w.abs() / scale) < tol {
                converged[i] = true;
            }
        }
    }
    let max_coeff = coeffs
        .iter()
        .map(|c| c.abs())
        .fold(Float::with_val(prec, 0), |a, b| if b > a { b } else { a });
    let resid_tol = Float::with_val(prec, &tol * &max_coeff);
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, d) = horner_with_derivative(coeffs, zi, prec);
            if p.is_zero() || d.is_zero() {
                break;
            }
            *zi -= &(&p / &d);
        }
        let r = horner(coeffs, zi, prec).abs();
        if r > resid_tol {
            return Err(Error::NonConvergence(format!(
                "root {zi} of p_{n} left residual {:e}",
                r.to_f64()
            )));
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_bound_of_simple_polynomials() {
        // z^2 - 4: bound 2
        let c = vec![
            MpComplex::new(64, -4.0, 0.0),
            MpComplex::zero(64),
            MpComplex::one(64),
        ];
        assert!((cauchy_bound(&c) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tri_index_is_dense() {
        let mut seen = vec![];
        for k in 0..5 {
            for j in 0..=k {
                seen.push(tri(j, k));
            }
        }
        assert_eq!(seen, (0..15).collect::<Vec<_>>());
    }
}

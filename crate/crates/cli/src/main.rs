use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use carleman_core::conformal::{
    classify, lambda_map, level_curve_polyline, phi, psi, sigma0_boundary, t_pm, CurveParams,
    DEFAULT_CLASSIFY_TOL,
};
use carleman_core::mp::{display_digits, format_decimal, MpComplex};
use carleman_core::oracle::{
    cache_dir_from_env, cached_moments, default_bits, eval_pn, orthonormalize, pn_zeros,
    CACHE_DIR_ENV,
};
use carleman_core::special::{chi, ChiEvalOptions};
use carleman_core::verify::{
    basis_for, run_experiment, zero_cluster_sweep_with, ExperimentConfig, VerificationReport,
};
use carleman_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_DOMAIN: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "carleman", version, about = "Bergman polynomials of a shifted Zhukovsky level curve")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Curve constant R > 2.
    #[arg(long = "R", global = true, default_value_t = 2.5, value_parser = parse_r)]
    r: f64,
    /// Working precision in bits.
    #[arg(long, global = true)]
    bits: Option<u32>,
    /// Moment cache directory.
    #[arg(long, global = true, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the conformal maps.
    Maps {
        #[command(subcommand)]
        cmd: MapsCmd,
    },
    /// Region labels on a rectangular grid (CSV).
    Classify {
        /// xmin xmax ymin ymax nx ny
        #[arg(long, num_args = 6, allow_negative_numbers = true, required = true)]
        grid: Vec<f64>,
    },
    /// chi(gamma t).
    Chi {
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Orthonormal bases.
    Ortho {
        #[command(subcommand)]
        cmd: OrthoCmd,
    },
    /// Orthonormal polynomials.
    Pn {
        #[command(subcommand)]
        cmd: PnCmd,
    },
    /// Run a verification experiment and print its report.
    Verify {
        /// carleman, sigma1, mainthm, thm4a, thm4b, thm8, residue, lemma2, chi or zero-cluster
        id: String,
        /// JSON file overriding fields of the default configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Plot data.
    Sweep {
        #[command(subcommand)]
        cmd: SweepCmd,
    },
}

#[derive(Subcommand, Debug)]
enum MapsCmd {
    Eval {
        #[arg(long = "fn", value_enum)]
        func: MapFn,
        #[arg(long, allow_hyphen_values = true)]
        z: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        w: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MapFn {
    Psi,
    Phi,
    Lambda,
    Tpm,
}

#[derive(Subcommand, Debug)]
enum OrthoCmd {
    /// Build (or load) the moments and basis up to degree n.
    Build {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Subcommand, Debug)]
enum PnCmd {
    Eval {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    Zeros {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Subcommand, Debug)]
enum SweepCmd {
    /// Polylines of L_1, the boundary of Sigma0 and the interval [x_mu, 2].
    Regions {
        #[arg(long, default_value_t = 512)]
        points: usize,
    },
    /// Polylines of the level curves L_r.
    LevelCurves {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.8, 0.9, 1.0, 1.2])]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 512)]
        points: usize,
    },
    /// Zeros of p_n and their distances to Sigma0 + [x_mu, 2].
    ZeroCluster {
        #[arg(long, value_delimiter = ',', default_values_t = vec![50])]
        n: Vec<usize>,
    },
}

fn parse_r(s: &str) -> std::result::Result<f64, String> {
    let r: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if r.is_finite() && r > 2.0 {
        Ok(r)
    } else {
        Err(format!("R must exceed 2, got {s}"))
    }
}

struct Env {
    params: CurveParams,
    bits: Option<u32>,
    cache_dir: Option<PathBuf>,
    format: Format,
}

impl Env {
    fn bits_or(&self, default: u32) -> u32 {
        self.bits.unwrap_or(default)
    }
}

fn fmt_c(z: &MpComplex) -> String {
    let d = display_digits(z.prec());
    format!("{},{}", format_decimal(z.re(), d), format_decimal(z.im(), d))
}

fn arg_point(name: &str, v: &Option<String>, bits: u32) -> Result<MpComplex> {
    match v {
        Some(s) => MpComplex::parse(bits, s),
        None => Err(Error::Parse(format!("--{name} is required for this map"))),
    }
}

fn maps_eval(env: &Env, func: MapFn, z: &Option<String>, w: &Option<String>, t: &Option<String>) -> Result<String> {
    let bits = env.bits_or(128);
    let p = &env.params;
    Ok(match func {
        MapFn::Psi => fmt_c(&psi(&arg_point("w", w, bits)?, p)?) + "\n",
        MapFn::Phi => fmt_c(&phi(&arg_point("z", z, bits)?, p)?) + "\n",
        MapFn::Lambda => fmt_c(&lambda_map(&arg_point("t", t, bits)?, p)?) + "\n",
        MapFn::Tpm => {
            let (a, b) = t_pm(&arg_point("z", z, bits)?, p)?;
            format!("{}\n{}\n", fmt_c(&a), fmt_c(&b))
        }
    })
}

fn classify_grid(env: &Env, g: &[f64]) -> Result<String> {
    let (nx, ny) = (g[4], g[5]);
    if !(nx >= 1.0 && ny >= 1.0 && nx.fract() == 0.0 && ny.fract() == 0.0) {
        return Err(Error::Parse("grid sizes nx, ny must be positive integers".into()));
    }
    let (nx, ny) = (nx as usize, ny as usize);
    let step = |lo: f64, hi: f64, k: usize, n: usize| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    let mut out = String::from("x,y,label\n");
    for j in 0..ny {
        let y = step(g[2], g[3], j, ny);
        for i in 0..nx {
            let x = step(g[0], g[1], i, nx);
            let label = classify(&MpComplex::new(64, x, y), &env.params, DEFAULT_CLASSIFY_TOL);
            writeln!(out, "{x},{y},{}", label.as_str()).unwrap();
        }
    }
    Ok(out)
}

fn basis(env: &Env, n: usize) -> Result<std::sync::Arc<carleman_core::verify::StoredBasis>> {
    let bits = env.bits_or(default_bits(n));
    basis_for(&env.params, n, bits, env.cache_dir.as_deref())
}

fn report_out(env: &Env, r: &VerificationReport) -> Result<String> {
    match env.format {
        Format::Json => Ok(r.to_json()? + "\n"),
        Format::Csv => r.to_csv(),
    }
}

fn polyline_csv(out: &mut String, name: &str, pts: &[MpComplex]) {
    for (k, z) in pts.iter().enumerate() {
        let c = z.to_c64();
        writeln!(out, "{name},{k},{},{}", c.re, c.im).unwrap();
    }
}

fn run(cli: Cli) -> Result<String> {
    let env = Env {
        params: CurveParams::new(cli.global.r)?,
        bits: cli.global.bits,
        cache_dir: cli.global.cache_dir.or_else(cache_dir_from_env),
        format: cli.global.format,
    };
    match cli.cmd {
        Command::Maps {
            cmd: MapsCmd::Eval { func, z, w, t },
        } => maps_eval(&env, func, &z, &w, &t),
        Command::Classify { grid } => classify_grid(&env, &grid),
        Command::Chi { t, gamma } => {
            let bits = env.bits_or(128);
            let opts = ChiEvalOptions::new(bits, 2f64.powi(-(bits.min(1000) as i32) + 8), 100_000)?;
            let t = MpComplex::parse(bits + 8, &t)?;
            let g = MpComplex::parse(bits + 8, &gamma.to_string())?;
            Ok(fmt_c(&chi(&(&t * &g), &env.params, &opts)?.with_prec(bits)) + "\n")
        }
        Command::Ortho {
            cmd: OrthoCmd::Build { n },
        } => {
            let bits = env.bits_or(default_bits(n));
            let m = cached_moments(&env.params, n, bits, env.cache_dir.as_deref())?;
            let b = orthonormalize(&m)?;
            let resid = b.gram_residual(&m)?;
            let info = serde_json::json!({
                "degree": n,
                "precision_bits": bits,
                "quadrature_nodes": m.quadrature_nodes,
                "area_over_pi": format_decimal(m.entry(0, 0).re(), display_digits(bits)),
                "gram_residual": format_decimal(&resid, 6),
                "cache_dir": env.cache_dir.as_ref().map(|d| d.display().to_string()),
            });
            Ok(serde_json::to_string_pretty(&info).map_err(Error::from)? + "\n")
        }
        Command::Pn {
            cmd: PnCmd::Eval { n, z },
        } => {
            let b = basis(&env, n)?;
            let z = MpComplex::parse(b.basis.precision_bits, &z)?;
            Ok(fmt_c(&eval_pn(&b.basis, n, &z)?) + "\n")
        }
        Command::Pn {
            cmd: PnCmd::Zeros { n },
        } => {
            let b = basis(&env, n)?;
            let mut out = String::from("re,im\n");
            for z in pn_zeros(&b.basis, n)? {
                out += &fmt_c(&z);
                out.push('\n');
            }
            Ok(out)
        }
        Command::Verify { id, config } => {
            let r = if id == "zero-cluster" {
                zero_cluster_sweep_with(&[50], &env.params, env.bits, env.cache_dir.as_deref())?
            } else {
                let mut cfg = match &config {
                    Some(path) => ExperimentConfig::from_json_over(&id, &std::fs::read_to_string(path)?)?,
                    None => ExperimentConfig::default_for(&id)?,
                };
                cfg.r = env.params.r;
                if env.bits.is_some() {
                    cfg.precision_bits = env.bits;
                }
                if cfg.cache_dir.is_none() {
                    cfg.cache_dir = env.cache_dir.clone();
                }
                run_experiment(&id, &cfg)?
            };
            report_out(&env, &r)
        }
        Command::Sweep { cmd } => match cmd {
            SweepCmd::Regions { points } => {
                let p = &env.params;
                let mut out = String::from("curve,index,x,y\n");
                polyline_csv(&mut out, "L1", &level_curve_polyline(1.0, points, p, 64)?);
                polyline_csv(&mut out, "sigma0_boundary", &sigma0_boundary(points, p, 64)?);
                let seg = [MpComplex::new(64, p.x_mu, 0.0), MpComplex::new(64, 2.0, 0.0)];
                polyline_csv(&mut out, "interval", &seg);
                Ok(out)
            }
            SweepCmd::LevelCurves { radii, points } => {
                let mut out = String::from("curve,index,x,y\n");
                for r in radii {
                    let name = format!("L_{r}");
                    polyline_csv(&mut out, &name, &level_curve_polyline(r, points, &env.params, 64)?);
                }
                Ok(out)
            }
            SweepCmd::ZeroCluster { n } => {
                let r = zero_cluster_sweep_with(&n, &env.params, env.bits, env.cache_dir.as_deref())?;
                report_out(&env, &r)
            }
        },
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_budget() {
        EXIT_BUDGET
    } else if matches!(e, Error::Parse(_)) {
        EXIT_USAGE
    } else {
        EXIT_DOMAIN
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let output = cli.global.output.clone();
    match run(cli) {
        Ok(text) => {
            let written = match output {
                Some(path) => std::fs::write(&path, text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_DOMAIN)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! Command-line front end. Every command prints one JSON document on stdout.
//!
//! Exit codes: 0 when every report passes, 1 when a verification fails,
//! 2 for usage or input errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::embedding::{
    check_superadditivity, control_besov, control_w1p, embedding_ratio_experiment, verify_theorem1, verify_theorem2,
    NormSpec, VerificationReport,
};
use crate::error::{Error, Result};
use crate::io;
use crate::nilpotent::{tail_experiment, GroupElement, TailConfig};
use crate::path::{SampledPath, TimeGrid};
use crate::seminorms;
use crate::variation;
use crate::volterra::{self, KernelDecomposition, L2Function, VolterraOperator};
use crate::young;

pub const SCHEMA_VERSION: u32 = 1;
/// Names the directory for output files when `--out` is not given.
pub const OUT_DIR_ENV: &str = "PATHREG_OUT_DIR";

const DEFAULTS: &str = "Defaults: generated grids have 1024 steps; fbm corpus checks start from 128 \
steps and refine --levels times. Algebraic tolerance 1e-9, quadrature agreement 0.1%, ratio \
stability 5% per refinement level. Stochastic commands (fbm --g normal, fbm corpus checks, \
ebm-tail) require --seed. Output files go to --out, else to $PATHREG_OUT_DIR, else to the \
current directory. Exit codes: 0 pass, 1 verification failure, 2 usage or input error.";

#[derive(Debug, Parser)]
#[command(name = "pathreg", version, about = "Regularity norms, variation embeddings and rough-path lifts", after_help = DEFAULTS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Besov,
    W1p,
    Holder,
    Sup,
    Qvar,
    OneVar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    Theorem1,
    Theorem2,
    Superadditivity,
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControlArg {
    W1p,
    Besov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FbmCheck {
    /// Generate a single path.
    None,
    /// Slope fits of the K₁ increment estimates.
    Step2,
    /// |Kg|_{W^{δ,2}} / |g| with refinement stability.
    Besov,
    /// |K₂g|_{W^{1,p}} / |g| with refinement stability.
    H2,
    /// Hölder and q-variation ratios plus the variation embedding.
    Corollary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norm or variation of a path CSV.
    Norm {
        #[arg(long, value_enum)]
        kind: NormArg,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Interval start (a grid point).
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        /// Interval end (a grid point).
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        path: PathBuf,
    },
    /// Embedding verifiers over one or more path CSVs.
    Verify {
        #[arg(long, value_enum)]
        theorem: TheoremArg,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        /// Control built from each path for superadditivity.
        #[arg(long, value_enum)]
        control_kind: Option<ControlArg>,
        /// External control table (s,t,omega) for superadditivity.
        #[arg(long)]
        control: Option<PathBuf>,
        /// Source norm for ratio, e.g. `w1p:p=2` or `besov:delta=0.75,p=2`.
        #[arg(long)]
        source: Option<String>,
        /// Target norm for ratio, e.g. `holder:alpha=0.25`, `qvar:q=1.5`, `sup`.
        #[arg(long)]
        target: Option<String>,
        /// Overrides the report tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        paths: Vec<PathBuf>,
    },
    /// Cameron–Martin paths of fBM and the kernel checks.
    Fbm {
        #[arg(long = "H")]
        hurst: f64,
        #[arg(long, value_enum, default_value_t = FbmCheck::None)]
        check: FbmCheck,
        /// `ones`, `zeros` or `normal` (needs --seed).
        #[arg(long, default_value = "ones")]
        g: String,
        /// Number of uniform cells carrying g.
        #[arg(long, default_value_t = 64)]
        cells: usize,
        /// Grid steps (base grid for corpus checks).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        /// Size of the random g corpus for checks.
        #[arg(long, default_value_t = 100)]
        corpus: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo moments and tails of enhanced Brownian motion.
    EbmTail {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        replicas: usize,
        #[arg(long, default_value_t = 1024)]
        steps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        /// Fit the upper tail of the Sobolev norm (needs 1000 replicas).
        #[arg(long)]
        tail_fit: bool,
    },
    /// Young integral ∫ f dg of two path CSVs on a common grid.
    Young {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        f: PathBuf,
        g: PathBuf,
    },
    /// Level-2 lift of a Euclidean path CSV.
    Lift {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        path: PathBuf,
    },
}

/// Parses and runs `args` (including the program name), writing the JSON
/// report to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((doc, pass)) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serialisable report"));
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn envelope(command: &str, pass: Option<bool>, result: impl Serialize) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": result,
    });
    if let Some(p) = pass {
        v["pass"] = json!(p);
    }
    v
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::condition(&format!("--{name} given"), format!("--{name} is required here")))
}

fn need_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::condition("--seed given", "stochastic commands require an explicit seed"))
}

fn output_file(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
        dir.join(default_name)
    })
}

fn dispatch(cmd: Command) -> Result<(Value, bool)> {
    match cmd {
        Command::Norm {
            kind,
            delta,
            p,
            q,
            alpha,
            s,
            t,
            path,
        } => cmd_norm(kind, delta, p, q, alpha, s, t, &path),
        Command::Verify {
            theorem,
            delta,
            p,
            control_kind,
            control,
            source,
            target,
            tolerance,
            paths,
        } => cmd_verify(theorem, delta, p, control_kind, control, source, target, tolerance, &paths),
        Command::Fbm {
            hurst,
            check,
            g,
            cells,
            grid,
            seed,
            delta,
            p,
            q,
            alpha,
            levels,
            corpus,
            out,
        } => cmd_fbm(FbmArgs {
            hurst,
            check,
            g,
            cells,
            grid,
            seed,
            delta,
            p,
            q,
            alpha,
            levels,
            corpus,
            out,
        }),
        Command::EbmTail {
            delta,
            p,
            replicas,
            steps,
            seed,
            dim,
            bootstrap,
            tail_fit,
        } => {
            let mut cfg = TailConfig::new(delta, p, replicas, steps, need_seed(seed)?);
            cfg.dim = dim;
            cfg.bootstrap_resamples = bootstrap;
            cfg.tail_fit = tail_fit;
            let rep = tail_experiment(&cfg)?;
            let pass = rep.passed();
            Ok((envelope("ebm-tail", Some(pass), &rep), pass))
        }
        Command::Young { p, q, out, f, g } => cmd_young(p, q, out, &f, &g),
        Command::Lift { q, out, path } => {
            let h = io::read_path_file(&path)?;
            let lift = young::level2_lift(&h, q)?;
            let file = output_file(out, "lift.csv");
            io::write_path_file(&file, lift.as_path())?;
            let end: GroupElement = lift.element(lift.len() - 1);
            let doc = json!({
                "q": q,
                "endpoint": end,
                "geometric_defect": end.geometric_defect(),
                "output": file.display().to_string(),
            });
            Ok((envelope("lift", None, doc), true))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_norm(
    kind: NormArg,
    delta: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    alpha: Option<f64>,
    s: f64,
    t: f64,
    file: &Path,
) -> Result<(Value, bool)> {
    let path = io::read_path_file(file)?;
    let iv = path.interval(s, t)?;
    let doc = match kind {
        NormArg::Besov => envelope("norm", None, seminorms::besov_seminorm(&path, need(delta, "delta")?, need(p, "p")?, iv)?),
        NormArg::W1p => envelope("norm", None, seminorms::w1p_norm(&path, need(p, "p")?, iv)?),
        NormArg::Holder => envelope("norm", None, seminorms::holder_norm(&path, need(alpha, "alpha")?, iv)?),
        NormArg::Sup => envelope("norm", None, seminorms::sup_norm(&path, iv)?),
        NormArg::Qvar => envelope("norm", None, variation::q_variation_dp(&path, need(q, "q")?, iv)?),
        NormArg::OneVar => envelope("norm", None, variation::one_variation(&path, iv)?),
    };
    Ok((doc, true))
}

/// `kind[:key=value,...]`.
pub fn parse_norm_spec(s: &str) -> Result<NormSpec> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = std::collections::BTreeMap::new();
    for kv in rest.split(',').filter(|x| !x.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::condition("key=value norm parameters", format!("{kv:?} in {s:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::condition("numeric norm parameter", format!("{kv:?} in {s:?}")))?;
        params.insert(k.trim().to_string(), v);
    }
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::condition(&format!("{k} given"), format!("norm spec {s:?} needs {k}")))
    };
    Ok(match kind.trim() {
        "besov" => NormSpec::Besov {
            delta: get("delta")?,
            p: get("p")?,
        },
        "w1p" => NormSpec::W1p { p: get("p")? },
        "holder" => NormSpec::Holder { alpha: get("alpha")? },
        "qvar" => NormSpec::QVar { q: get("q")? },
        "sup" => NormSpec::Sup,
        other => return Err(Error::condition("known norm kind", format!("{other:?}"))),
    })
}

fn with_tolerance(mut r: VerificationReport, tol: Option<f64>) -> VerificationReport {
    if let Some(t) = tol {
        r.tolerance = t;
        r.pass = r.max_violation <= t;
    }
    r
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    theorem: TheoremArg,
    delta: Option<f64>,
    p: Option<f64>,
    control_kind: Option<ControlArg>,
    control: Option<PathBuf>,
    source: Option<String>,
    target: Option<String>,
    tolerance: Option<f64>,
    files: &[PathBuf],
) -> Result<(Value, bool)> {
    if let Some(t) = tolerance {
        if !(t >= 0.0) {
            return Err(Error::condition("tolerance≥0", format!("{t}")));
        }
    }
    let load = || -> Result<Vec<SampledPath>> {
        if files.is_empty() {
            return Err(Error::condition("at least one path file", "no paths given"));
        }
        files.iter().map(|f| io::read_path_file(f)).collect()
    };
    let reports: Vec<VerificationReport> = match theorem {
        TheoremArg::Theorem1 => {
            let p = need(p, "p")?;
            load()?.iter().map(|x| verify_theorem1(x, p)).collect::<Result<_>>()?
        }
        TheoremArg::Theorem2 => {
            let (d, p) = (need(delta, "delta")?, need(p, "p")?);
            load()?.iter().map(|x| verify_theorem2(x, d, p)).collect::<Result<_>>()?
        }
        TheoremArg::Superadditivity => match (control, control_kind) {
            (Some(file), _) => vec![check_superadditivity(&io::read_control_file(&file)?)],
            (None, Some(ControlArg::W1p)) => {
                let p = need(p, "p")?;
                load()?
                    .iter()
                    .map(|x| Ok(check_superadditivity(&control_w1p(x, p)?)))
                    .collect::<Result<_>>()?
            }
            (None, Some(ControlArg::Besov)) => {
                let (d, p) = (need(delta, "delta")?, need(p, "p")?);
                load()?
                    .iter()
                    .map(|x| Ok(check_superadditivity(&control_besov(x, d, p)?)))
                    .collect::<Result<_>>()?
            }
            (None, None) => return Err(Error::condition("--control or --control-kind given", "nothing to check")),
        },
        TheoremArg::Ratio => {
            let src = parse_norm_spec(source.as_deref().ok_or_else(|| Error::condition("--source given", "ratio needs --source"))?)?;
            let tgt = parse_norm_spec(target.as_deref().ok_or_else(|| Error::condition("--target given", "ratio needs --target"))?)?;
            vec![embedding_ratio_experiment(&load()?, src, tgt)?]
        }
    };
    let reports: Vec<VerificationReport> = reports.into_iter().map(|r| with_tolerance(r, tolerance)).collect();
    let pass = reports.iter().all(|r| r.pass);
    Ok((envelope("verify", Some(pass), &reports), pass))
}

struct FbmArgs {
    hurst: f64,
    check: FbmCheck,
    g: String,
    cells: usize,
    grid: Option<usize>,
    seed: Option<u64>,
    delta: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    alpha: Option<f64>,
    levels: u32,
    corpus: usize,
    out: Option<PathBuf>,
}

fn cmd_fbm(a: FbmArgs) -> Result<(Value, bool)> {
    let kernel = KernelDecomposition::with_hurst(a.hurst)?;
    let corpus = || volterra::standard_normal_corpus(a.cells, a.corpus, need_seed(a.seed)?);
    let check_grid = || TimeGrid::uniform(a.grid.unwrap_or(128));
    let report = |r: VerificationReport| {
        let pass = r.pass;
        Ok((envelope("fbm", Some(pass), &r), pass))
    };
    match a.check {
        FbmCheck::None => {
            let g = match a.g.as_str() {
                "ones" => L2Function::constant(a.cells, 1.0)?,
                "zeros" => L2Function::constant(a.cells, 0.0)?,
                "normal" => volterra::standard_normal_corpus(a.cells, 1, need_seed(a.seed)?)?.remove(0),
                other => return Err(Error::condition("g ∈ {ones, zeros, normal}", format!("{other:?}"))),
            };
            let grid = TimeGrid::uniform(a.grid.unwrap_or(1024))?;
            let op = VolterraOperator::new(&kernel, &grid, a.cells)?;
            let h = op.apply(&g)?;
            let last = h.len() - 1;
            let file = output_file(a.out, "fbm_path.csv");
            io::write_path_file(&file, &h)?;
            let doc = json!({
                "H": a.hurst,
                "cells": a.cells,
                "grid_steps": grid.steps(),
                "g_l2_norm": g.l2_norm(),
                "h_end": h.point(last)[0],
                "k1_end": op.apply_k1(&g)?.point(last)[0],
                "k2_end": op.apply_k2(&g)?.point(last)[0],
                "quadrature_discrepancy": op.discrepancy(),
                "output": file.display().to_string(),
            });
            Ok((envelope("fbm", None, doc), true))
        }
        FbmCheck::Step2 => {
            let fit = volterra::step2_slope_fit(a.hurst, 4..=10)?;
            let target = a.hurst + 0.5;
            let pass = (fit.slope_u - target).abs() <= 0.05 && (fit.slope_s - target).abs() <= 0.05;
            Ok((envelope("fbm", Some(pass), &fit), pass))
        }
        FbmCheck::Besov => report(volterra::besov_bound_check(
            &corpus()?,
            a.hurst,
            need(a.delta, "delta")?,
            &check_grid()?,
            a.levels,
        )?),
        FbmCheck::H2 => report(volterra::h2_w1p_check(
            &corpus()?,
            a.hurst,
            need(a.p, "p")?,
            &check_grid()?,
            a.levels,
        )?),
        FbmCheck::Corollary => report(volterra::corollary_check(
            &corpus()?,
            a.hurst,
            need(a.q, "q")?,
            need(a.alpha, "alpha")?,
            &check_grid()?,
        )?),
    }
}

fn cmd_young(p: f64, q: f64, out: Option<PathBuf>, f: &Path, g: &Path) -> Result<(Value, bool)> {
    let (f, g) = (io::read_path_file(f)?, io::read_path_file(g)?);
    let yi = young::young_integral(&f, &g, p, q)?;
    let iv = f.full_interval();
    let bound = young::young_loeve_bound(&f, &g, p, q, iv)?;
    let remainder = young::young_remainder(&f, &g, iv)?;
    let file = output_file(out, "young_integral.csv");
    io::write_path_file(&file, &yi.path)?;
    let pass = remainder <= bound;
    let doc = json!({
        "integral": yi,
        "young_loeve_constant": young::young_loeve_constant(yi.theta)?,
        "young_loeve_bound": bound,
        "remainder": remainder,
        "output": file.display().to_string(),
    });
    Ok((envelope("young", Some(pass), doc), pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn norm_specs() {
        assert_eq!(parse_norm_spec("w1p:p=2").unwrap(), NormSpec::W1p { p: 2.0 });
        assert_eq!(
            parse_norm_spec("besov:delta=0.75, p=2").unwrap(),
            NormSpec::Besov { delta: 0.75, p: 2.0 }
        );
        assert_eq!(parse_norm_spec("sup").unwrap(), NormSpec::Sup);
        assert!(parse_norm_spec("besov:delta=0.75").is_err());
        assert!(parse_norm_spec("nope").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["pathreg"]).0, 2);
        assert_eq!(run_str(&["pathreg", "norm", "--kind", "sup", "/nonexistent.csv"]).0, 2);
        let (code, _, err) = run_str(&["pathreg", "fbm", "--H", "0.6"]);
        assert_eq!(code, 2);
        assert!(err.contains("0<H<1/2"), "{err}");
        assert_eq!(run_str(&["pathreg", "ebm-tail", "--delta", "0.4", "--p", "4", "--replicas", "10"]).0, 2);
    }

    #[test]
    fn help_mentions_defaults() {
        let (code, out, _) = run_str(&["pathreg", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("1024") && out.contains("--seed") && out.contains(OUT_DIR_ENV));
    }

    #[test]
    fn step2_check() {
        let (code, out, _) = run_str(&["pathreg", "fbm", "--H", "0.25", "--check", "step2"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert!((v["result"]["slope_u"].as_f64().unwrap() - 0.75).abs() < 0.05);
    }
}

//! Command-line front end.
//!
//! `run` never panics on bad input: validation failures print one
//! `E:<module>:<check>: message` line to stderr and return exit code 1;
//! failed `verify`/`bench-norms` gates return 2.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::averaging::{averaged_derivatives, AveragingPlan};
use crate::cubes::{CubeRecord, DistanceOracle};
use crate::error::{Error, Result};
use crate::extension::{averaged_t, ExtensionConfig, Extender, CLASSICAL_T};
use crate::fields::{load_points_csv, restrict, SmoothTestFunction, WhitneyField};
use crate::harness::{
    self, gate_restriction_norm, norm_growth_check, norm_growth_study, Check, FieldFamily,
    NormGrowthConfig, SuiteConfig,
};
use crate::jets::layout;

#[derive(Parser, Debug)]
#[command(name = "whitney", version, about = "Whitney extension of jets on finite point sets")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the extension and its derivatives at query points.
    Extend(ExtendArgs),
    /// Restrict a built-in smooth function to a point set.
    Restrict(RestrictArgs),
    /// List the Whitney cubes meeting a box.
    Decompose(DecomposeArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
    /// Norm-growth and restriction-norm study across dimensions.
    BenchNorms(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Classical,
    Averaged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FunctionName {
    Constant,
    Linear,
    Sine,
    Gaussian,
}

#[derive(Args, Debug)]
struct ExtendArgs {
    /// Whitney field, JSON.
    #[arg(long)]
    field: PathBuf,
    /// Query points, CSV.
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_enum, default_value = "classical")]
    mode: Mode,
    #[arg(long, default_value_t = 1024)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid origin, one value or comma-separated per coordinate (classical mode).
    #[arg(long)]
    origin: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    truncation: f64,
    /// Highest derivative order to emit (default m).
    #[arg(long)]
    alpha_max: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RestrictArgs {
    #[arg(long, value_enum)]
    function: FunctionName,
    /// Point set, CSV.
    #[arg(long)]
    set: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    set: PathBuf,
    /// `lo_1,..,lo_n,hi_1,..,hi_n`.
    #[arg(long = "box")]
    bounds: String,
    #[arg(long)]
    origin: Option<String>,
    #[arg(long, default_value_t = -6, allow_negative_numbers = true)]
    min_level: i32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Largest dimension; the study runs n = 1..=N.
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probes per kind and dimension.
    #[arg(long, default_value_t = 24)]
    probes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("E:cli:args: {first}");
            return 1;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("E:cli:jobs: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("E:{}:{}: {e}", e.module(), e.check());
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Extend(a) => extend(a),
        Command::Restrict(a) => restrict_cmd(a),
        Command::Decompose(a) => decompose(a),
        Command::Verify(a) => verify(a),
        Command::BenchNorms(a) => bench(a),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn parse_list(s: &str, name: &'static str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(name, format!("cannot parse {v:?}")))
        })
        .collect()
}

fn parse_origin(s: &Option<String>, n: usize) -> Result<Vec<f64>> {
    match s {
        None => Ok(vec![0.0; n]),
        Some(s) => {
            let v = parse_list(s, "origin")?;
            match v.len() {
                1 => Ok(vec![v[0]; n]),
                k if k == n => Ok(v),
                k => Err(Error::DimensionMismatch {
                    expected: n,
                    got: k,
                }),
            }
        }
    }
}

fn check_n(given: Option<usize>, actual: usize) -> Result<()> {
    match given {
        Some(g) if g != actual => Err(Error::DimensionMismatch {
            expected: g,
            got: actual,
        }),
        _ => Ok(()),
    }
}

fn extend(a: ExtendArgs) -> Result<i32> {
    let field = WhitneyField::load(&a.field)?;
    let n = field.dim();
    check_n(a.n, n)?;
    if let Some(m) = a.m {
        if m != field.order() {
            return Err(Error::invalid(
                "m",
                format!("field has order {}, not {m}", field.order()),
            ));
        }
    }
    let m = field.order();
    let points = load_points_csv(&a.points)?;
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let t = a.t.unwrap_or(match a.mode {
        Mode::Classical => CLASSICAL_T,
        Mode::Averaged => averaged_t(n),
    });
    let order = a.alpha_max.unwrap_or(m);
    let mut config = ExtensionConfig::new(n, m, t).with_origin(parse_origin(&a.origin, n)?);
    config.truncation = a.truncation;
    config.max_order = config.max_order.max(order);
    if a.mode == Mode::Averaged && a.samples == 0 {
        return Err(Error::ZeroSamples);
    }
    if a.mode == Mode::Averaged && a.origin.is_some() {
        return Err(Error::invalid("origin", "origins are sampled in averaged mode"));
    }
    let ext = Extender::new(field, config)?;
    let lay = layout(n, order);
    let samples = match a.mode {
        Mode::Classical => 1,
        Mode::Averaged => a.samples,
    };
    let rows = points
        .par_iter()
        .map(|x| -> Result<(Vec<f64>, Vec<f64>)> {
            if let Some(i) = ext.oracle().find(x) {
                let jet = ext.jet_derivatives(i);
                if order > m {
                    return Err(Error::PointInSet);
                }
                return Ok((jet[..lay.len()].to_vec(), vec![0.0; lay.len()]));
            }
            match a.mode {
                Mode::Classical => Ok((ext.derivatives_with_origin(x, &ext.config().origin, order)?, vec![0.0; lay.len()])),
                Mode::Averaged => {
                    let plan = AveragingPlan::for_point(&ext, x, a.samples, a.seed)?;
                    let est = averaged_derivatives(&ext, x, order, &plan)?;
                    Ok((est.mean, est.std_error))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    let mut head: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    head.extend(["alpha", "value", "N", "seed", "std_error"].map(String::from));
    w.write_record(&head)?;
    for (x, (vals, errs)) in points.iter().zip(rows) {
        for (k, alpha) in lay.indices().iter().enumerate() {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            let idx: Vec<String> = alpha.exponents().iter().map(|e| e.to_string()).collect();
            rec.push(idx.join(" "));
            rec.push(vals[k].to_string());
            rec.push(samples.to_string());
            rec.push(a.seed.to_string());
            rec.push(errs[k].to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(0)
}

fn builtin_function(name: FunctionName, n: usize, m: usize) -> SmoothTestFunction {
    match name {
        FunctionName::Constant => SmoothTestFunction::Constant(1.0),
        FunctionName::Linear => SmoothTestFunction::linear(n, 0),
        FunctionName::Sine => harness::restriction_family(m),
        FunctionName::Gaussian => SmoothTestFunction::Gaussian {
            center: vec![0.5; n],
            width: 0.6,
            scale: 1.0,
        },
    }
}

fn restrict_cmd(a: RestrictArgs) -> Result<i32> {
    let points = load_points_csv(&a.set)?;
    let n = points.first().ok_or(Error::EmptySet)?.len();
    check_n(a.n, n)?;
    let f = builtin_function(a.function, n, a.m);
    let field = restrict(&f, &points, a.m)?;
    let mut w = output(&a.out)?;
    field.write_json(&mut w)?;
    w.flush()?;
    Ok(0)
}

fn decompose(a: DecomposeArgs) -> Result<i32> {
    let points = load_points_csv(&a.set)?;
    let oracle = DistanceOracle::new(&points)?;
    let n = oracle.dim();
    let b = parse_list(&a.bounds, "box")?;
    if b.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: b.len(),
        });
    }
    let origin = parse_origin(&a.origin, n)?;
    let cubes = oracle.enumerate_whitney_cubes(&b[..n], &b[n..], &origin, a.min_level, 1 << 20)?;
    let records: Vec<CubeRecord> = cubes
        .into_iter()
        .map(|c| CubeRecord {
            level: c.cube.level(),
            anchor: c.cube.anchor().to_vec(),
            dist_to_e: c.dist_to_e,
        })
        .collect();
    let mut w = output(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &records)?;
    writeln!(w)?;
    w.flush()?;
    Ok(0)
}

fn report_checks(checks: &[Check], out: &Option<PathBuf>) -> Result<i32> {
    let mut w = output(out)?;
    for c in checks {
        writeln!(w, "{}", c.line())?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(w, "{} checks, {failed} failed", checks.len())?;
    w.flush()?;
    Ok(if failed == 0 { 0 } else { 2 })
}

fn verify(a: VerifyArgs) -> Result<i32> {
    let cfg = SuiteConfig {
        n: a.n,
        m: a.m,
        seed: a.seed,
        samples: a.samples,
    };
    if a.samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let checks = harness::verify_suite(&a.suite, &cfg)?;
    report_checks(&checks, &a.out)
}

fn bench(a: BenchArgs) -> Result<i32> {
    if a.n == 0 || a.n > 8 {
        return Err(Error::invalid("n", "dimension range must lie in 1..=8"));
    }
    if a.samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let cfg = NormGrowthConfig {
        n_values: (1..=a.n).collect(),
        m: a.m,
        families: vec![FieldFamily::Random, FieldFamily::Adversarial],
        probes: a.probes,
        samples: a.samples,
        seed: a.seed,
    };
    let mut report = norm_growth_study(&cfg)?;
    let growth = norm_growth_check(&report, a.m);
    let (restriction, rows) = gate_restriction_norm(&[a.m], &cfg.n_values, a.seed);
    if let Some(r) = rows {
        report.extend(r);
    }
    let mut w = output(&a.out)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut failed = false;
    for c in [growth, restriction] {
        eprintln!("{}", c.line());
        failed |= !c.passed;
    }
    Ok(if failed { 2 } else { 0 })
}

fn invocations(dir: &Path, tag: &str) -> Vec<(Vec<String>, PathBuf)> {
    let p = |name: &str| dir.join(name).display().to_string();
    let out = |name: &str| dir.join(format!("{tag}_{name}"));
    let cmd = |args: &[&str], o: &PathBuf| -> Vec<String> {
        let mut v = vec!["whitney".to_string()];
        v.extend(args.iter().map(|s| s.to_string()));
        v.push("--out".into());
        v.push(o.display().to_string());
        v
    };
    let field = out("field.json");
    let classical = out("classical.csv");
    let averaged = out("averaged.csv");
    let cubes = out("cubes.json");
    let bench = out("bench.csv");
    let verify = out("verify.txt");
    let set = p("set.csv");
    let points = p("points.csv");
    let field_s = field.display().to_string();
    vec![
        (
            cmd(&["restrict", "--function", "sine", "--m", "1", "--set", &set], &field),
            field.clone(),
        ),
        (
            cmd(&["extend", "--field", &field_s, "--points", &points], &classical),
            classical.clone(),
        ),
        (
            cmd(
                &[
                    "extend", "--field", &field_s, "--points", &points, "--mode", "averaged",
                    "--samples", "64", "--seed", "3",
                ],
                &averaged,
            ),
            averaged.clone(),
        ),
        (
            cmd(&["decompose", "--set", &set, "--box", "0,0,1,1", "--min-level", "-4"], &cubes),
            cubes.clone(),
        ),
        (
            cmd(
                &[
                    "bench-norms", "--n", "2", "--samples", "16", "--probes", "3", "--seed", "3",
                ],
                &bench,
            ),
            bench.clone(),
        ),
        (cmd(&["verify", "--suite", "jets", "--n", "2"], &verify), verify),
    ]
}

/// Runs every subcommand twice in-process with fixed seeds and compares
/// output files byte for byte. Timing fields are stripped from `verify`
/// reports before comparison.
pub fn determinism_check(seed: u64) -> Check {
    let start = Instant::now();
    let run_all = || -> Result<(usize, Vec<String>)> {
        let dir = tempfile::tempdir()?;
        let set = crate::fields::random_field(2, 0, 6, seed)?.points();
        crate::fields::write_points_csv(File::create(dir.path().join("set.csv"))?, &set)?;
        let queries: Vec<Vec<f64>> = vec![
            vec![0.25, 0.75],
            vec![1.5, -0.5],
            set[0].clone(),
            vec![0.9, 0.1],
        ];
        crate::fields::write_points_csv(File::create(dir.path().join("points.csv"))?, &queries)?;
        let mut compared = 0;
        let mut diffs = Vec::new();
        let first = invocations(dir.path(), "a");
        let second = invocations(dir.path(), "b");
        for ((argv_a, out_a), (argv_b, out_b)) in first.iter().zip(&second) {
            let ca = run(argv_a);
            let cb = run(argv_b);
            let read = |p: &Path| -> Result<Vec<u8>> {
                let bytes = std::fs::read(p)?;
                Ok(strip_timing(&bytes))
            };
            if ca != cb || read(out_a)? != read(out_b)? {
                diffs.push(argv_a[1].clone());
            }
            compared += 1;
        }
        Ok((compared, diffs))
    };
    let check = Check::new("cli", "determinism");
    match run_all() {
        Ok((n, diffs)) => check.done(
            diffs.is_empty(),
            format!("{n} invocations, differing: {diffs:?}"),
            "byte-identical outputs",
        ),
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

fn strip_timing(bytes: &[u8]) -> Vec<u8> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .map(|l| match l.rfind(" (") {
            Some(i) if l.ends_with("s)") => &l[..i],
            _ => l,
        })
        .collect::<Vec<_>>()
        .join("\n")
        .into_bytes()
}

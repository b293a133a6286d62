//! Experiment drivers and verification suites.
//!
//! Every acceptance gate is a function returning a [`Check`]; suites bundle
//! gates with smaller invariant checks. [`GATES`] records which suite check
//! carries each gate and is written into every report header.

use std::io::{BufRead, Write};
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    averaged_derivatives, averaged_extension, avg_psi_power_at, mean_one_dim_psi_power,
    period_at, AveragingPlan,
};
use crate::cubes::{DistanceOracle, DyadicCube};
use crate::cutoff::SigmaProfile;
use crate::error::{Error, Result};
use crate::extension::{averaged_t, ExtensionConfig, Extender, CLASSICAL_T};
use crate::fields::{
    adversarial_field, clustered_points, cm_norm, random_field, restrict, SmoothTestFunction,
    WhitneyField,
};
use crate::jets::{layout, sum_reciprocal_factorials, MultiIndex};

/// `(gate, suite, check)`.
pub const GATES: [(u8, &str, &str); 11] = [
    (1, "jets", "reciprocal_factorial_identity"),
    (2, "cutoff", "partition_of_unity"),
    (3, "cubes", "cube_geometry"),
    (4, "extension", "derivative_oracle"),
    (5, "extension", "jet_reproduction"),
    (6, "averaging", "averaging_bound"),
    (7, "averaging", "periodicity"),
    (8, "averaging", "interchange"),
    (9, "norms", "norm_growth"),
    (10, "norms", "restriction_norm"),
    (11, "cli", "determinism"),
];

pub const SUITES: [&str; 7] = ["jets", "cutoff", "cubes", "extension", "averaging", "norms", "cli"];

/// Outcome of one verification check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub gate: Option<u8>,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
    pub seconds: f64,
}

impl Check {
    pub(crate) fn new(suite: &'static str, name: &'static str) -> Self {
        let gate = GATES
            .iter()
            .find(|(_, s, c)| *s == suite && *c == name)
            .map(|g| g.0);
        Check {
            suite,
            name,
            gate,
            passed: false,
            measured: String::new(),
            tolerance: String::new(),
            seconds: 0.0,
        }
    }

    pub(crate) fn done(mut self, passed: bool, measured: String, tolerance: impl Into<String>) -> Self {
        self.passed = passed;
        self.measured = measured;
        self.tolerance = tolerance.into();
        self
    }

    pub(crate) fn timed(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }

    pub(crate) fn failed(self, err: &Error) -> Self {
        self.done(false, format!("error: {err}"), "no error")
    }

    pub fn line(&self) -> String {
        let gate = self.gate.map_or(String::new(), |g| format!(" [gate {g}]"));
        format!(
            "{} {}/{}{}: measured {}; tolerance {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            gate,
            self.measured,
            self.tolerance,
            self.seconds
        )
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn uniform_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

// Fourth-order central difference from f(x−2h), f(x−h), f(x+h), f(x+2h).
fn stencil(v: [f64; 4], h: f64) -> f64 {
    (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h)
}

const STEPS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub operator: String,
    /// Sup is taken over all `|α| ≤ alpha_order`.
    pub alpha_order: usize,
    pub probe_kind: String,
    pub sup_value: f64,
    pub fitted_exponent: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    pub seed: u64,
    #[serde(skip)]
    pub runtime: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub header: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    fn with_gate_header(lines: &[&str]) -> Self {
        let mut header: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        header.extend(
            GATES
                .iter()
                .map(|(g, s, c)| format!("gate {g} -> {s}/{c}")),
        );
        ExperimentReport {
            header,
            rows: Vec::new(),
        }
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
    }

    /// Header lines as `# ...` comments, then the CSV table.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for h in &self.header {
            writeln!(w, "# {h}")?;
        }
        let mut cw = csv::Writer::from_writer(w);
        for r in &self.rows {
            cw.serialize(r)?;
        }
        if self.rows.is_empty() {
            cw.write_record([
                "family",
                "n",
                "m",
                "t",
                "operator",
                "alpha_order",
                "probe_kind",
                "sup_value",
                "fitted_exponent",
                "N",
                "seed",
            ])?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut header = Vec::new();
        let mut body = String::new();
        for line in reader.lines() {
            let line = line?;
            match line.strip_prefix("# ") {
                Some(h) if body.is_empty() => header.push(h.to_string()),
                _ => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ExperimentReport { header, rows })
    }

    /// Slope recorded for the matching row group.
    pub fn exponent(&self, family: &str, operator: &str, kind: &str, order: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.family == family
                    && r.operator == operator
                    && r.probe_kind == kind
                    && r.alpha_order == order
            })
            .map(|r| r.fitted_exponent)
    }
}

// Fill `fitted_exponent` for every group of rows differing only in `n`.
fn fit_groups(rows: &mut [ReportRow]) {
    let keys: Vec<(String, String, String, usize, usize)> = rows
        .iter()
        .map(|r| {
            (
                r.family.clone(),
                r.operator.clone(),
                r.probe_kind.clone(),
                r.alpha_order,
                r.m,
            )
        })
        .collect();
    let mut slopes = Vec::with_capacity(rows.len());
    for key in &keys {
        let (ns, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .zip(&keys)
            .filter(|(_, k)| *k == key)
            .map(|(r, _)| (r.n as f64, r.sup_value.max(f64::MIN_POSITIVE)))
            .unzip();
        slopes.push(if ns.len() >= 2 {
            fit_log_slope(&ns, &ys)
        } else {
            f64::NAN
        });
    }
    for (r, s) in rows.iter_mut().zip(slopes) {
        r.fitted_exponent = s;
    }
}

// ---------------------------------------------------------------------------
// Norm growth

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldFamily {
    Random,
    Adversarial,
}

impl FieldFamily {
    pub fn name(self) -> &'static str {
        match self {
            FieldFamily::Random => "random",
            FieldFamily::Adversarial => "adversarial",
        }
    }

    pub fn generate(self, n: usize, m: usize, seed: u64) -> Result<WhitneyField> {
        match self {
            FieldFamily::Random => random_field(n, m, 16, seed),
            FieldFamily::Adversarial => adversarial_field(n, m, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormGrowthConfig {
    pub n_values: Vec<usize>,
    pub m: usize,
    pub families: Vec<FieldFamily>,
    /// Probes per kind (interior and corner).
    pub probes: usize,
    pub samples: usize,
    pub seed: u64,
}

/// `(interior, corner)` probe lists.
pub type ProbeSets = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Probe points for one field: Whitney-cube centres and points within
/// `t·s/2` of a full corner of a Whitney cube (origin 0, classical `t`).
pub fn growth_probes(
    field: &WhitneyField,
    family: FieldFamily,
    count: usize,
    seed: u64,
) -> Result<ProbeSets> {
    let n = field.dim();
    let oracle = DistanceOracle::new(&field.points())?;
    let zero = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interior = Vec::with_capacity(count);
    let mut corner = Vec::with_capacity(count);
    let mut attempts = 0;
    while corner.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::invalid("probes", "could not place probes"));
        }
        let z = match family {
            FieldFamily::Adversarial => (0..n).map(|_| 0.5 + rng.gen_range(-0.2..0.2)).collect(),
            FieldFamily::Random => uniform_point(&mut rng, n, 0.0, 1.0),
        };
        let (delta, _) = oracle.delta(&z)?;
        if delta == 0.0 || delta > 0.5 {
            continue;
        }
        let q = oracle.whitney_cube_at(&z, &zero)?;
        let s = q.side();
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let c = if rng.gen::<bool>() { q.lower(i) } else { q.upper(i) };
                c + rng.gen_range(-0.5..0.5) * CLASSICAL_T * s
            })
            .collect();
        if oracle.delta(&x)?.0 == 0.0 {
            continue;
        }
        interior.push(q.center());
        corner.push(x);
    }
    Ok((interior, corner))
}

// max over |α| ≤ r of |values[α]|, for r = 0..=m
fn order_sups(values: &[f64], n: usize, m: usize) -> Vec<f64> {
    let lay = layout(n, m);
    (0..=m)
        .map(|r| {
            values[..lay.prefix_len(r)]
                .iter()
                .fold(0.0, |a: f64, v| a.max(v.abs()))
        })
        .collect()
}

/// Probe sups of `|∂^α F|`, `|α| ≤ m`, for the classical operator (`t = 1/8`,
/// origin 0) and the averaged operator (`t = 1/n`), with log-log fits in `n`.
pub fn norm_growth_study(cfg: &NormGrowthConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::with_gate_header(&[
        "norm growth: sup over probes of |d^a F| for |a| <= alpha_order",
        "classical: t = 1/8, origin 0; averaged: t = min(1/n, 1/5), Monte Carlo over origins",
    ]);
    let m = cfg.m;
    for &family in &cfg.families {
        for &n in &cfg.n_values {
            let start = Instant::now();
            let field_seed = cfg.seed.wrapping_add(n as u64);
            let field = family.generate(n, m, field_seed)?;
            let (interior, corner) =
                growth_probes(&field, family, cfg.probes, cfg.seed ^ (n as u64) << 8)?;
            let classical = Extender::new(field.clone(), ExtensionConfig::classical(n, m))?;
            let averaged = Extender::new(field, ExtensionConfig::averaged(n, m))?;
            let zero = vec![0.0; n];
            for (kind, probes) in [("interior", &interior), ("corner", &corner)] {
                let mut sup_c = vec![0.0f64; m + 1];
                let mut sup_a = vec![0.0f64; m + 1];
                for x in probes {
                    let dc = classical.derivatives_with_origin(x, &zero, m)?;
                    let plan = AveragingPlan::for_point(&averaged, x, cfg.samples, cfg.seed)?;
                    let da = averaged_derivatives(&averaged, x, m, &plan)?;
                    for (s, v) in sup_c.iter_mut().zip(order_sups(&dc, n, m)) {
                        *s = s.max(v);
                    }
                    for (s, v) in sup_a.iter_mut().zip(order_sups(&da.mean, n, m)) {
                        *s = s.max(v);
                    }
                }
                let runtime = start.elapsed().as_secs_f64();
                for (operator, t, sups, samples) in [
                    ("classical", CLASSICAL_T, &sup_c, 1),
                    ("averaged", averaged_t(n), &sup_a, cfg.samples),
                ] {
                    for (r, &sup) in sups.iter().enumerate() {
                        report.rows.push(ReportRow {
                            family: family.name().into(),
                            n,
                            m,
                            t,
                            operator: operator.into(),
                            alpha_order: r,
                            probe_kind: kind.into(),
                            sup_value: sup,
                            fitted_exponent: f64::NAN,
                            samples,
                            seed: cfg.seed,
                            runtime,
                        });
                    }
                }
            }
        }
    }
    fit_groups(&mut report.rows);
    Ok(report)
}

/// `cm_norm(restrict(F, E, m))` on random `E ⊂ [0,1]^n` per `n`, with a
/// log-log fit in `n`.
pub fn restriction_norm_study(
    f: &SmoothTestFunction,
    m: usize,
    n_values: &[usize],
    set_size: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::with_gate_header(&[
        "restriction norm: cm_norm of the restriction of a unit-norm function",
    ]);
    for &n in n_values {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(n as u64));
        let points: Vec<Vec<f64>> = (0..set_size)
            .map(|_| uniform_point(&mut rng, n, 0.0, 1.0))
            .collect();
        let norm = cm_norm(&restrict(f, &points, m)?);
        report.rows.push(ReportRow {
            family: "sine_product".into(),
            n,
            m,
            t: f64::NAN,
            operator: "restriction".into(),
            alpha_order: m,
            probe_kind: "set".into(),
            sup_value: norm,
            fitted_exponent: f64::NAN,
            samples: set_size,
            seed,
            runtime: start.elapsed().as_secs_f64(),
        });
    }
    fit_groups(&mut report.rows);
    Ok(report)
}

/// The built-in unit-norm restriction family.
pub fn restriction_family(m: usize) -> SmoothTestFunction {
    SmoothTestFunction::unit_sine_product(2.0, 0.3, m)
}

// ---------------------------------------------------------------------------
// Gates

/// Gate 1: `Σ_{|β|=r} 1/β! = n^r / r!` exactly.
pub fn gate_reciprocal_factorials(n_max: usize, r_max: usize) -> Check {
    let start = Instant::now();
    let check = Check::new("jets", "reciprocal_factorial_identity");
    let mut bad = Vec::new();
    for n in 1..=n_max {
        for r in 0..=r_max {
            let expect = Ratio::new(
                (n as i128).pow(r as u32),
                crate::jets::factorial_u128(r) as i128,
            );
            match sum_reciprocal_factorials(n, r) {
                Ok(v) if v == expect => {}
                Ok(v) => bad.push(format!("n={n} r={r}: {v}")),
                Err(e) => return check.failed(&e).timed(start),
            }
        }
    }
    let example = sum_reciprocal_factorials(3, 2).map(|v| v.to_string());
    let passed = bad.is_empty() && example.as_deref().ok() == Some("9/2");
    check
        .done(
            passed,
            format!(
                "{} mismatches over n<={n_max}, r<={r_max}; n=3,r=2 -> {}",
                bad.len(),
                example.unwrap_or_default()
            ),
            "exact equality",
        )
        .timed(start)
}

/// Gate 2: `|Σ_k φ_k*(x) − 1| ≤ 1e−10` at random probes and origins.
pub fn gate_partition_of_unity(n_values: &[usize], probes: usize, seed: u64) -> Check {
    let start = Instant::now();
    let check = Check::new("cutoff", "partition_of_unity");
    let run = || -> Result<(f64, usize)> {
        let mut worst = 0.0f64;
        let mut count = 0;
        for &n in n_values {
            let field = random_field(n, 0, 10, seed.wrapping_add(n as u64))?;
            let exts = [
                Extender::new(field.clone(), ExtensionConfig::classical(n, 0))?,
                Extender::new(field, ExtensionConfig::averaged(n, 0))?,
            ];
            let errs = (0..probes)
                .into_par_iter()
                .map(|j| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32) ^ j as u64);
                    let x = uniform_point(&mut rng, n, -0.5, 1.5);
                    let b = uniform_point(&mut rng, n, 0.0, 1.0);
                    let v = exts[j % 2].partition_of_unity_with_origin(&x, &b)?;
                    Ok((v - 1.0).abs())
                })
                .collect::<Result<Vec<_>>>()?;
            count += errs.len();
            worst = errs.into_iter().fold(worst, f64::max);
        }
        Ok((worst, count))
    };
    match run() {
        Ok((worst, count)) => check.done(
            worst <= 1e-10,
            format!("max |sum - 1| = {worst:.3e} over {count} probes"),
            "1e-10",
        ),
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

/// Gate 3: Whitney brackets, neighbour side ratios and the `δ/(s√n)` window,
/// rechecked by brute force over random `(x, b)` pairs.
pub fn gate_cube_geometry(n_values: &[usize], pairs: usize, seed: u64) -> Check {
    let start = Instant::now();
    let check = Check::new("cubes", "cube_geometry");
    let results: Vec<std::result::Result<(usize, usize), String>> = (0..pairs)
        .into_par_iter()
        .map(|j| {
            let n = n_values[j % n_values.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(j as u64));
            let pts: Vec<Vec<f64>> = (0..8).map(|_| uniform_point(&mut rng, n, 0.0, 1.0)).collect();
            let oracle = DistanceOracle::new(&pts).map_err(|e| e.to_string())?;
            let x = uniform_point(&mut rng, n, -0.5, 1.5);
            let b = uniform_point(&mut rng, n, 0.0, 4.0);
            let t = if j % 2 == 0 { CLASSICAL_T } else { averaged_t(n) };
            let cubes = oracle
                .cubes_covering_support(&x, &b, t)
                .map_err(|e| e.to_string())?;
            let home = oracle.whitney_cube_at(&x, &b).map_err(|e| e.to_string())?;
            let delta = pts
                .iter()
                .map(|p| p.iter().zip(&x).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            let mut violations = 0;
            let mut checked = 0;
            if !cubes.iter().any(|c| c.cube == home) || !home.contains(&x) {
                violations += 1;
            }
            for c in &cubes {
                let dist = pts
                    .iter()
                    .map(|p| c.cube.box_distance(p))
                    .fold(f64::INFINITY, f64::min);
                let diam = c.cube.diam();
                if !(diam <= dist && dist <= 4.0 * diam) {
                    violations += 1;
                }
                let ratio = delta / (c.cube.side() * (n as f64).sqrt());
                if !(0.5..=5.5).contains(&ratio) {
                    violations += 1;
                }
                if !c.cube.expanded_contains(&x, t) {
                    violations += 1;
                }
                for d in &cubes {
                    let r = c.cube.side() / d.cube.side();
                    if !(0.25..=4.0).contains(&r) {
                        violations += 1;
                    }
                }
                checked += 1;
            }
            Ok((violations, checked))
        })
        .collect();
    let mut violations = 0;
    let mut cubes = 0;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok((v, c)) => {
                violations += v;
                cubes += c;
            }
            Err(e) => errors.push(e),
        }
    }
    check
        .done(
            violations == 0 && errors.is_empty(),
            format!(
                "{violations} violations, {} errors over {pairs} pairs ({cubes} cubes){}",
                errors.len(),
                errors.first().map_or(String::new(), |e| format!("; first: {e}"))
            ),
            "zero violations",
        )
        .timed(start)
}

/// Gate 4: analytic `∂^αF` against fourth-order central differences of the
/// analytic `∂^{α−e_i}F`, `1 ≤ |α| ≤ m+1`. Relative error is measured
/// against `max(|a|, |fd|, 1)`.
pub fn gate_derivative_oracle(dims: &[(usize, usize)], probes: usize, seed: u64) -> Check {
    let start = Instant::now();
    let check = Check::new("extension", "derivative_oracle");
    let run = || -> Result<(f64, f64, usize)> {
        let mut worst_first = 0.0f64;
        let mut worst_high = 0.0f64;
        let mut count = 0;
        for &(n, m) in dims {
            let field = random_field(n, m, 8, seed.wrapping_add((n * 10 + m) as u64))?;
            let ext = Extender::new(field, ExtensionConfig::classical(n, m))?;
            let t = ext.config().t;
            let top = layout(n, m + 1);
            let results = (0..probes)
                .into_par_iter()
                .map(|j| -> Result<(f64, f64, usize)> {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(seed ^ ((n * 10 + m) as u64) << 40 ^ j as u64);
                    let x = uniform_point(&mut rng, n, -0.25, 1.25);
                    let b = uniform_point(&mut rng, n, 0.0, 1.0);
                    let s = ext.oracle().whitney_cube_at(&x, &b)?.side();
                    let h = 1e-4 * t * s;
                    let at_x = ext.derivatives_with_origin(&x, &b, m + 1)?;
                    // derivatives up to order m at the stencil points of each axis
                    let mut around = Vec::with_capacity(n);
                    for i in 0..n {
                        let mut row = Vec::with_capacity(4);
                        for k in STEPS {
                            let mut y = x.clone();
                            y[i] += k * h;
                            row.push(ext.derivatives_with_origin(&y, &b, m)?);
                        }
                        around.push(row);
                    }
                    let lower = layout(n, m);
                    let (mut wf, mut wh, mut c) = (0.0f64, 0.0f64, 0);
                    for (pos, alpha) in top.indices().iter().enumerate().skip(1) {
                        let i = alpha.exponents().iter().position(|&a| a > 0).unwrap_or(0);
                        let beta = alpha.checked_sub(&MultiIndex::unit(n, i)).unwrap_or_else(|| alpha.clone());
                        let bp = lower.position(&beta).unwrap_or(0);
                        let vals = [
                            around[i][0][bp],
                            around[i][1][bp],
                            around[i][2][bp],
                            around[i][3][bp],
                        ];
                        let fd = stencil(vals, h);
                        let e = rel_err(at_x[pos], fd);
                        if alpha.order() == 1 {
                            wf = wf.max(e);
                        } else {
                            wh = wh.max(e);
                        }
                        c += 1;
                    }
                    Ok((wf, wh, c))
                })
                .collect::<Result<Vec<_>>>()?;
            for (wf, wh, c) in results {
                worst_first = worst_first.max(wf);
                worst_high = worst_high.max(wh);
                count += c;
            }
        }
        Ok((worst_first, worst_high, count))
    };
    match run() {
        Ok((wf, wh, count)) => check.done(
            wf <= 1e-6 && wh <= 1e-4,
            format!("max rel err {wf:.3e} at |a|=1, {wh:.3e} at |a|>=2 over {count} comparisons"),
            "1e-6 at |a|=1, 1e-4 at higher orders",
        ),
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

/// Outcome of one approach sequence for one `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproachFit {
    pub n: usize,
    pub m: usize,
    pub alpha: MultiIndex,
    pub slope: f64,
    pub max_diff: f64,
    pub points_used: usize,
}

/// `|∂^αF(x) − ∂^αP_a(x)|` along `x = a + 2^{−j}v`, `j = 3..=12`, for a field
/// restricted from a smooth function to a set clustering at `a`; log2-log2
/// slope fitted over the differences above the rounding floor.
pub fn approach_fits(n: usize, m: usize, seed: u64) -> Result<Vec<ApproachFit>> {
    let a = vec![0.5; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = uniform_point(&mut rng, n, 0.0, 1.0);
    let g = SmoothTestFunction::Gaussian {
        center,
        width: 0.6,
        scale: 1.0,
    };
    let pts = clustered_points(&a, 16, seed ^ 0x5eed);
    let field = restrict(&g, &pts, m)?.normalized();
    let ext = Extender::new(field.clone(), ExtensionConfig::classical(n, m))?;
    let mut v = uniform_point(&mut rng, n, -1.0, 1.0);
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= norm);
    let pa = field.jet(0);
    let lay = layout(n, m);
    let mut diffs = vec![Vec::new(); lay.len()];
    let zero = vec![0.0; n];
    for j in 3..=12 {
        let r = 2f64.powi(-j);
        let x: Vec<f64> = a.iter().zip(&v).map(|(ai, vi)| ai + r * vi).collect();
        let d = ext.derivatives_with_origin(&x, &zero, m)?;
        for (pos, alpha) in lay.indices().iter().enumerate() {
            let p = pa.deriv_at(alpha, &x)?;
            let floor = 1e-13 * p.abs().max(1.0);
            let diff = (d[pos] - p).abs();
            if diff > floor {
                diffs[pos].push((-(j as f64), diff.log2(), diff));
            }
        }
    }
    Ok(lay
        .indices()
        .iter()
        .zip(diffs)
        .map(|(alpha, pts)| {
            let max_diff = pts.iter().map(|p| p.2).fold(0.0, f64::max);
            let slope = if pts.len() >= 3 {
                let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                fit_slope(&xs, &ys)
            } else {
                f64::INFINITY
            };
            ApproachFit {
                n,
                m,
                alpha: alpha.clone(),
                slope,
                max_diff,
                points_used: pts.len(),
            }
        })
        .collect())
}

/// Gate 5: approach slopes `≥ (m − |α|) − 0.2` for `|α| < m`; at `|α| = m`
/// the difference stays bounded (slope `≥ −0.2`).
pub fn gate_jet_reproduction(n_values: &[usize], m_values: &[usize], seed: u64) -> Check {
    let start = Instant::now();
    let check = Check::new("extension", "jet_reproduction");
    let mut worst_margin = f64::INFINITY;
    let mut worst = String::new();
    let mut fits = 0;
    for &n in n_values {
        for &m in m_values {
            let res = match approach_fits(n, m, seed.wrapping_add((n * 10 + m) as u64)) {
                Ok(r) => r,
                Err(e) => return check.failed(&e).timed(start),
            };
            for f in res {
                let target = m as f64 - f.alpha.order() as f64 - 0.2;
                let target = if f.alpha.order() == m { -0.2 } else { target };
                let margin = f.slope - target;
                fits += 1;
                if margin < worst_margin {
                    worst_margin = margin;
                    worst = format!(
                        "n={n} m={m} a={:?} slope {:.3} (target {target:.1}, {} pts)",
                        f.alpha, f.slope, f.points_used
                    );
                }
            }
        }
    }
    check
        .done(
            worst_margin >= 0.0,
            format!("{fits} fits; tightest: {worst}"),
            "slope >= (m-|a|) - 0.2; >= -0.2 at |a|=m",
        )
        .timed(start)
}

/// Gate 6: `⟨Ψ^k⟩ ≤ (#p)^k (1 + t 2^{k+1})^n + 3σ` with `t = 1/n`, and the
/// one-dimensional mean `1 + 2t(2^k − 1)` within `3σ`.
pub fn gate_averaging_bound(
    n_values: &[usize],
    probes: usize,
    samples: usize,
    seed: u64,
) -> Check {
    let start = Instant::now();
    let check = Check::new("averaging", "averaging_bound");
    let run = || -> Result<(f64, usize, f64, f64)> {
        let mut worst = f64::NEG_INFINITY;
        let mut count = 0;
        for &n in n_values {
            let t = 1.0 / n as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(n as u64));
            let pts: Vec<Vec<f64>> = (0..10).map(|_| uniform_point(&mut rng, n, 0.0, 1.0)).collect();
            let oracle = DistanceOracle::new(&pts)?;
            for _ in 0..probes {
                let x = uniform_point(&mut rng, n, -0.5, 1.5);
                let (delta, _) = oracle.delta(&x)?;
                for k in 1..=3u32 {
                    let avg =
                        avg_psi_power_at(&x, delta, t, (1.0 / 32.0, 8.0), k, samples, seed)?;
                    let bound = (avg.p_count as f64).powi(k as i32)
                        * (1.0 + t * 2f64.powi(k as i32 + 1)).powi(n as i32);
                    // ≤ 0 passes
                    worst = worst.max((avg.mean - 3.0 * avg.std_error - bound) / bound);
                    count += 1;
                }
            }
        }
        let (mean, se) = mean_one_dim_psi_power(1, 0.1, samples, seed)?;
        Ok((worst, count, mean, se))
    };
    match run() {
        Ok((worst, count, mean, se)) => {
            let one_dim_ok = (mean - 1.2).abs() <= 3.0 * se;
            check.done(
                worst <= 0.0 && one_dim_ok,
                format!(
                    "max (mean - 3se - bound)/bound = {worst:.3} over {count} estimates; \
                     1-D mean {mean:.4} +/- {se:.4} vs 1.2"
                ),
                "estimate <= bound + 3se; 1-D within 3se",
            )
        }
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

/// Gate 7: `F_b(x) = F_{b+τe_i}(x)` with `τ = period_at(x)`.
pub fn gate_periodicity(n_values: &[usize], pairs: usize, seed: u64) -> Check {
    let start = Instant::now();
    let check = Check::new("averaging", "periodicity");
    let exts = n_values
        .iter()
        .map(|&n| {
            let field = random_field(n, 1, 8, seed.wrapping_add(n as u64))?;
            Extender::new(field, ExtensionConfig::averaged(n, 1))
        })
        .collect::<Result<Vec<_>>>();
    let exts = match exts {
        Ok(e) => e,
        Err(e) => return check.failed(&e).timed(start),
    };
    let res = (0..pairs)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let ext = &exts[j % exts.len()];
            let n = ext.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(j as u64));
            let x = uniform_point(&mut rng, n, -0.5, 1.5);
            let tau = period_at(ext, &x)?;
            let b = uniform_point(&mut rng, n, 0.0, tau);
            let i = j % n;
            let mut shifted = b.clone();
            shifted[i] += tau;
            let v = ext.value_with_origin(&x, &b)?;
            let w = ext.value_with_origin(&x, &shifted)?;
            let scale = v.abs().max(w.abs());
            Ok(if scale == 0.0 { 0.0 } else { (v - w).abs() / scale })
        })
        .collect::<Result<Vec<_>>>();
    match res {
        Ok(errs) => {
            let worst = errs.iter().copied().fold(0.0, f64::max);
            check.done(
                worst <= 1e-12,
                format!("max relative difference {worst:.3e} over {pairs} pairs"),
                "1e-12",
            )
        }
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

/// Gate 8: with common random numbers, central differences of the averaged
/// value match the averaged first derivative within
/// `max(1e−5 relative, 3σ)`.
pub fn gate_interchange(n_values: &[usize], probes: usize, samples: usize, seed: u64) -> Check {
    let start = Instant::now();
    let check = Check::new("averaging", "interchange");
    let run = || -> Result<(f64, usize)> {
        let mut worst = 0.0f64;
        for j in 0..probes {
            let n = n_values[j % n_values.len()];
            let field = random_field(n, 1, 8, seed.wrapping_add(n as u64))?;
            let ext = Extender::new(field, ExtensionConfig::averaged(n, 1))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(104_729).wrapping_add(j as u64));
            let x = uniform_point(&mut rng, n, -0.25, 1.25);
            let i = j % n;
            let (delta, _) = ext.oracle().delta(&x)?;
            let h = 1e-3 * ext.config().t * 2.0 * delta / (11.0 * (n as f64).sqrt());
            let mut stencil_pts = vec![x.clone()];
            for k in STEPS {
                let mut y = x.clone();
                y[i] += k * h;
                stencil_pts.push(y);
            }
            let plan = AveragingPlan::for_points(&ext, &stencil_pts, samples, seed)?;
            let mut vals = [0.0; 4];
            for (v, y) in vals.iter_mut().zip(&stencil_pts[1..]) {
                *v = averaged_derivatives(&ext, y, 0, &plan)?.mean[0];
            }
            let fd = stencil(vals, h);
            let (d, se) = averaged_extension(&ext, &x, &MultiIndex::unit(n, i), &plan)?;
            let tol = (1e-5 * d.abs().max(fd.abs()).max(1.0)).max(3.0 * se);
            worst = worst.max((fd - d).abs() / tol);
        }
        Ok((worst, probes))
    };
    match run() {
        Ok((worst, count)) => check.done(
            worst <= 1.0,
            format!("max |fd - d| / tol = {worst:.3} over {count} probes"),
            "max(1e-5 relative, 3se)",
        ),
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

/// Gate 9 from a finished study: the averaged operator's slopes on the
/// adversarial family stay `≤ 2.5m + 0.5`, and the classical corner slope
/// exceeds the averaged corner slope.
pub fn norm_growth_check(report: &ExperimentReport, m: usize) -> Check {
    let check = Check::new("norms", "norm_growth");
    let fam = FieldFamily::Adversarial.name();
    let avg_corner = report.exponent(fam, "averaged", "corner", m);
    let avg_interior = report.exponent(fam, "averaged", "interior", m);
    let cls_corner = report.exponent(fam, "classical", "corner", m);
    match (avg_corner, avg_interior, cls_corner) {
        (Some(ac), Some(ai), Some(cc)) => {
            let limit = 2.5 * m as f64 + 0.5;
            let passed = ac <= limit && ai <= limit && cc > ac;
            check.done(
                passed,
                format!(
                    "averaged slopes corner {ac:.3}, interior {ai:.3}; classical corner {cc:.3}"
                ),
                format!("averaged <= {limit}; classical corner > averaged corner"),
            )
        }
        _ => check.done(false, "missing rows".into(), "report complete"),
    }
}

pub fn gate_norm_growth(cfg: &NormGrowthConfig) -> (Check, Option<ExperimentReport>) {
    let start = Instant::now();
    match norm_growth_study(cfg) {
        Ok(report) => (norm_growth_check(&report, cfg.m).timed(start), Some(report)),
        Err(e) => (Check::new("norms", "norm_growth").failed(&e).timed(start), None),
    }
}

/// Gate 10: fitted exponent of the restriction norm `≤ m + 0.3`.
pub fn gate_restriction_norm(
    m_values: &[usize],
    n_values: &[usize],
    seed: u64,
) -> (Check, Option<ExperimentReport>) {
    let start = Instant::now();
    let check = Check::new("norms", "restriction_norm");
    let mut all = ExperimentReport::with_gate_header(&["restriction norm study"]);
    let mut parts = Vec::new();
    let mut passed = true;
    for &m in m_values {
        match restriction_norm_study(&restriction_family(m), m, n_values, 24, seed) {
            Ok(r) => {
                let slope = r.rows.first().map_or(f64::NAN, |row| row.fitted_exponent);
                passed &= slope <= m as f64 + 0.3;
                parts.push(format!("m={m}: {slope:.3}"));
                all.extend(r);
            }
            Err(e) => return (check.failed(&e).timed(start), None),
        }
    }
    (
        check
            .done(passed, parts.join(", "), "exponent <= m + 0.3")
            .timed(start),
        Some(all),
    )
}

// ---------------------------------------------------------------------------
// Suites

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n: 2,
            m: 1,
            seed: 7,
            samples: 4096,
        }
    }
}

fn simple(suite: &'static str, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>, tol: &str) -> Check {
    let start = Instant::now();
    let check = Check::new(suite, name);
    match f() {
        Ok((ok, measured)) => check.done(ok, measured, tol),
        Err(e) => check.failed(&e),
    }
    .timed(start)
}

fn jets_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let n = cfg.n;
    vec![
        gate_reciprocal_factorials(8, 6),
        simple(
            "jets",
            "rank_round_trip",
            || {
                let lay = layout(n, cfg.m + 2);
                let ok = lay
                    .indices()
                    .iter()
                    .enumerate()
                    .all(|(i, a)| crate::jets::rank(a) == i && crate::jets::unrank(n, i) == *a);
                Ok((ok, format!("{} indices", lay.len())))
            },
            "rank(unrank(i)) = i",
        ),
        simple(
            "jets",
            "recenter_preserves_values",
            || {
                let f = random_field(n, cfg.m, 4, cfg.seed)?;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut worst = 0.0f64;
                for j in f.jets() {
                    let c = uniform_point(&mut rng, n, -1.0, 2.0);
                    let x = uniform_point(&mut rng, n, -1.0, 2.0);
                    let moved = j.recenter(&c)?;
                    worst = worst.max(rel_err(j.eval(&x)?, moved.eval(&x)?));
                }
                Ok((worst <= 1e-12, format!("max rel err {worst:.3e}")))
            },
            "1e-12",
        ),
    ]
}

fn cutoff_suite(cfg: &SuiteConfig) -> Vec<Check> {
    vec![
        gate_partition_of_unity(&[cfg.n], 1000, cfg.seed),
        simple(
            "cutoff",
            "sigma_limits",
            || {
                let s = SigmaProfile::new(3)?;
                let lo = s.deriv(-1.0, 0)?;
                let hi = s.deriv(0.0, 0)?;
                let mid = s.deriv(-0.5, 0)?;
                Ok((
                    lo == 0.0 && hi == 1.0 && (mid - 0.5).abs() < 1e-15,
                    format!("sigma(-1)={lo}, sigma(0)={hi}, sigma(-1/2)={mid}"),
                ))
            },
            "0, 1, 1/2",
        ),
        simple(
            "cutoff",
            "lattice_cover",
            || {
                let p = crate::cutoff::CutoffParams::new(averaged_t(cfg.n), 2)?;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut min = f64::INFINITY;
                for _ in 0..1000 {
                    let x = uniform_point(&mut rng, cfg.n, -3.0, 3.0);
                    min = min.min(p.lattice_theta_sum(&x, &MultiIndex::zero(cfg.n))?);
                }
                Ok((min >= 1.0, format!("min lattice sum {min}")))
            },
            ">= 1",
        ),
    ]
}

fn cubes_suite(cfg: &SuiteConfig) -> Vec<Check> {
    vec![
        gate_cube_geometry(&[cfg.n], 1000, cfg.seed),
        simple(
            "cubes",
            "canonical_example",
            || {
                let o = DistanceOracle::new(&[vec![0.0]])?;
                let q = o.whitney_cube_at(&[1.5], &[0.0])?;
                let ok = q == DyadicCube::new(0, vec![1], vec![0.0]) && o.is_whitney(&q);
                Ok((ok, format!("level {} anchor {:?}", q.level(), q.anchor())))
            },
            "[1,2] at level 0",
        ),
    ]
}

fn extension_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let n = cfg.n.min(6);
    vec![
        gate_derivative_oracle(&[(n, cfg.m)], 100, cfg.seed),
        gate_jet_reproduction(&[n], &[cfg.m.max(1)], cfg.seed),
        simple(
            "extension",
            "single_anchor_exact",
            || {
                let f = random_field(n, cfg.m, 1, cfg.seed)?;
                let a = f.jet(0).base().to_vec();
                let ext = Extender::new(f.clone(), ExtensionConfig::classical(n, cfg.m))?;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut worst = 0.0f64;
                for _ in 0..100 {
                    let mut x = uniform_point(&mut rng, n, -0.2, 0.2);
                    x.iter_mut().zip(&a).for_each(|(xi, ai)| *xi += ai);
                    let d = ext.derivatives_with_origin(&x, &ext.config().origin, cfg.m)?;
                    for (pos, alpha) in layout(n, cfg.m).indices().iter().enumerate() {
                        worst = worst.max((d[pos] - f.jet(0).deriv_at(alpha, &x)?).abs());
                    }
                }
                Ok((worst == 0.0, format!("max abs difference {worst:.3e}")))
            },
            "exact",
        ),
    ]
}

fn averaging_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let n = cfg.n.min(8);
    vec![
        gate_averaging_bound(&[n], 10, cfg.samples, cfg.seed),
        gate_periodicity(&[n], 100, cfg.seed),
        gate_interchange(&[n.min(4)], 20, cfg.samples, cfg.seed),
    ]
}

fn norms_suite(cfg: &SuiteConfig) -> Vec<Check> {
    let study = NormGrowthConfig {
        n_values: (1..=6).collect(),
        m: cfg.m.max(1),
        families: vec![FieldFamily::Adversarial],
        probes: 20,
        samples: cfg.samples.min(1024),
        seed: cfg.seed,
    };
    vec![
        gate_norm_growth(&study).0,
        gate_restriction_norm(&[cfg.m.max(1)], &[1, 2, 3, 4, 5, 6], cfg.seed).0,
    ]
}

/// Runs a named suite; `"all"` runs every suite in order.
pub fn verify_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<Check>> {
    match name {
        "jets" => Ok(jets_suite(cfg)),
        "cutoff" => Ok(cutoff_suite(cfg)),
        "cubes" => Ok(cubes_suite(cfg)),
        "extension" => Ok(extension_suite(cfg)),
        "averaging" => Ok(averaging_suite(cfg)),
        "norms" => Ok(norms_suite(cfg)),
        "cli" => Ok(vec![crate::cli::determinism_check(cfg.seed)]),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(verify_suite(s, cfg)?);
            }
            Ok(out)
        }
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

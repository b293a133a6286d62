//! Whitney fields over finite sets, the `C^m(E)` norm, restriction of
//! analytic functions, and field generators.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{layout, Jet, MultiIndex, MAX_DEGREE};

/// A jet `P_y` of degree `m` at every point `y` of a finite set `E ⊂ R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyField {
    n: usize,
    m: usize,
    jets: Vec<Jet>,
}

impl WhitneyField {
    pub fn new(n: usize, m: usize, jets: Vec<Jet>) -> Result<Self> {
        if jets.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut seen = HashSet::with_capacity(jets.len());
        for (i, jet) in jets.iter().enumerate() {
            if jet.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: jet.dim(),
                });
            }
            if jet.degree() != m {
                return Err(Error::MalformedJet { index: i });
            }
            if jet.base().iter().any(|v| !v.is_finite())
                || jet.coeffs().iter().any(|v| !v.is_finite())
            {
                return Err(Error::MalformedJet { index: i });
            }
            // +0.0 folds -0.0 so the bit patterns compare as values
            let key: Vec<u64> = jet.base().iter().map(|v| (v + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                let first = jets
                    .iter()
                    .position(|j| j.base() == jet.base())
                    .unwrap_or(0);
                return Err(Error::DuplicatePoint { first, second: i });
            }
        }
        Ok(WhitneyField { n, m, jets })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn jet(&self, i: usize) -> &Jet {
        &self.jets[i]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.jets.iter().map(|j| j.base().to_vec()).collect()
    }

    pub fn scaled(&self, lambda: f64) -> WhitneyField {
        WhitneyField {
            n: self.n,
            m: self.m,
            jets: self.jets.iter().map(|j| j.scaled(lambda)).collect(),
        }
    }

    /// Pointwise sum of two fields on the same set.
    pub fn add(&self, other: &WhitneyField) -> Result<WhitneyField> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let jets = self
            .jets
            .iter()
            .zip(&other.jets)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        WhitneyField::new(self.n, self.m, jets)
    }

    /// Rescales so that `cm_norm = 1`. A zero field is returned unchanged.
    pub fn normalized(&self) -> WhitneyField {
        let norm = cm_norm(self);
        if norm > 0.0 {
            self.scaled(1.0 / norm)
        } else {
            self.clone()
        }
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson {
            n: self.n,
            m: self.m,
            points: self
                .jets
                .iter()
                .map(|j| PointJson {
                    y: j.base().to_vec(),
                    coeffs: j.coeffs().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_json(doc: FieldJson) -> Result<Self> {
        let jets = doc
            .points
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                if p.y.len() != doc.n {
                    return Err(Error::DimensionMismatch {
                        expected: doc.n,
                        got: p.y.len(),
                    });
                }
                Jet::new(p.y, doc.m, p.coeffs).map_err(|e| match e {
                    Error::DimensionMismatch { .. } => Error::MalformedJet { index: i },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        WhitneyField::new(doc.n, doc.m, jets)
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Self::from_json(serde_json::from_reader(reader)?)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Interchange format: `{ "n", "m", "points": [ { "y", "coeffs" } ] }` with
/// Taylor-form coefficients in graded-lex order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldJson {
    pub n: usize,
    pub m: usize,
    pub points: Vec<PointJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointJson {
    pub y: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// Reads a headerless CSV of points, one per row.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let p = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad number {s:?}", row + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = out.first() {
            if first.len() != p.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: p.len(),
                });
            }
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_points_csv(std::fs::File::open(path)?)
}

pub fn write_points_csv<W: Write>(writer: W, points: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for p in points {
        w.write_record(p.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// `‖f‖_{C^m(E)}`: the larger of `sup |∂^αP_x(x)|` and
/// `sup_{x≠y} |∂^α(P_x − P_y)(x)| / |x − y|^{m−|α|}` over `|α| ≤ m`.
pub fn cm_norm(f: &WhitneyField) -> f64 {
    let lay = layout(f.n, f.m);
    let m = f.m as i32;
    f.jets
        .par_iter()
        .enumerate()
        .map(|(i, px)| {
            let x = px.base();
            let mut best = px
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| (c * lay.factorial_of(k)).abs())
                .fold(0.0, f64::max);
            for (j, py) in f.jets.iter().enumerate() {
                if i == j {
                    continue;
                }
                let dist = x
                    .iter()
                    .zip(py.base())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let moved = py.recenter(x).expect("jets share dimension");
                for (k, (a, b)) in px.coeffs().iter().zip(moved.coeffs()).enumerate() {
                    let diff = ((a - b) * lay.factorial_of(k)).abs();
                    let q = diff / dist.powi(m - lay.order_of(k) as i32);
                    best = best.max(q);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Built-in analytic functions with closed-form derivatives of every order.
#[derive(Clone, Debug, PartialEq)]
pub enum SmoothTestFunction {
    Constant(f64),
    /// `coefficient · x^γ`.
    Monomial { exponents: Vec<u32>, coefficient: f64 },
    /// `scale · Π_i sin(ω x_i + φ)`.
    SineProduct {
        frequency: f64,
        phase: f64,
        scale: f64,
    },
    /// `scale · exp(−|x − c|² / (2w²))`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        scale: f64,
    },
}

impl SmoothTestFunction {
    /// `Π sin(ω x_i + φ)` scaled so that every derivative of order `≤ m` is
    /// bounded by 1.
    pub fn unit_sine_product(frequency: f64, phase: f64, m: usize) -> Self {
        SmoothTestFunction::SineProduct {
            frequency,
            phase,
            scale: frequency.abs().max(1.0).powi(-(m as i32)),
        }
    }

    pub fn linear(n: usize, i: usize) -> Self {
        SmoothTestFunction::Monomial {
            exponents: MultiIndex::unit(n, i).exponents().to_vec(),
            coefficient: 1.0,
        }
    }

    /// Dimension the function is tied to, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            SmoothTestFunction::Monomial { exponents, .. } => Some(exponents.len()),
            SmoothTestFunction::Gaussian { center, .. } => Some(center.len()),
            _ => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.derivative(x, &MultiIndex::zero(x.len()))
    }

    pub fn derivative(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        if alpha.dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: alpha.dim(),
            });
        }
        if let Some(n) = self.fixed_dim() {
            if n != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        if alpha.order() > MAX_DEGREE {
            return Err(Error::OrderTooHigh {
                order: alpha.order(),
                limit: MAX_DEGREE,
            });
        }
        let a = alpha.exponents();
        Ok(match self {
            SmoothTestFunction::Constant(c) => {
                if alpha.order() == 0 {
                    *c
                } else {
                    0.0
                }
            }
            SmoothTestFunction::Monomial {
                exponents,
                coefficient,
            } => {
                let mut v = *coefficient;
                for ((&xi, &g), &k) in x.iter().zip(exponents).zip(a) {
                    if k > g {
                        return Ok(0.0);
                    }
                    let falling: f64 = ((g - k + 1)..=g).map(f64::from).product();
                    v *= falling * xi.powi((g - k) as i32);
                }
                v
            }
            SmoothTestFunction::SineProduct {
                frequency,
                phase,
                scale,
            } => {
                let mut v = *scale;
                for (&xi, &k) in x.iter().zip(a) {
                    let arg = frequency * xi + phase;
                    let d = match k % 4 {
                        0 => arg.sin(),
                        1 => arg.cos(),
                        2 => -arg.sin(),
                        _ => -arg.cos(),
                    };
                    v *= frequency.powi(k as i32) * d;
                }
                v
            }
            SmoothTestFunction::Gaussian {
                center,
                width,
                scale,
            } => {
                let mut v = *scale;
                for ((&xi, &ci), &k) in x.iter().zip(center).zip(a) {
                    let u = (xi - ci) / width;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    v *= sign * hermite_he(k, u) * width.powi(-(k as i32)) * (-0.5 * u * u).exp();
                }
                v
            }
        })
    }
}

/// Probabilists' Hermite polynomial `He_k(u)`.
fn hermite_he(k: u32, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, u);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = u * cur - f64::from(j) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `F|_E`: the degree-`m` Taylor jet of `F` at every point of `E`.
pub fn restrict(f: &SmoothTestFunction, points: &[Vec<f64>], m: usize) -> Result<WhitneyField> {
    let n = points.first().ok_or(Error::EmptySet)?.len();
    let jets = points
        .iter()
        .map(|y| Jet::from_derivatives(y.clone(), m, |alpha| f.derivative(y, alpha)))
        .collect::<Result<Vec<_>>>()?;
    WhitneyField::new(n, m, jets)
}

fn random_jets(rng: &mut ChaCha8Rng, points: Vec<Vec<f64>>, m: usize) -> Result<Vec<Jet>> {
    points
        .into_iter()
        .map(|y| {
            let len = layout(y.len(), m).len();
            let coeffs = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Jet::new(y, m, coeffs)
        })
        .collect()
}

/// `size` uniform points in `[0,1]^n` with uniform random coefficients,
/// normalized to unit `C^m(E)` norm.
pub fn random_field(n: usize, m: usize, size: usize, seed: u64) -> Result<WhitneyField> {
    if size == 0 {
        return Err(Error::EmptySet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..size)
        .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let jets = random_jets(&mut rng, points, m)?;
    Ok(WhitneyField::new(n, m, jets)?.normalized())
}

/// Vertices of `{0, 1/2}^n` minus `(1/2,…,1/2)`, carrying random jets,
/// normalized. The missing vertex leaves a large Whitney cube around it whose
/// corners are shared by cubes anchored at different points, while every
/// cube near it stays within distance 1 of `E`.
pub fn adversarial_field(n: usize, m: usize, seed: u64) -> Result<WhitneyField> {
    if n == 0 || n > 12 {
        return Err(Error::CapExceeded {
            what: "adversarial grid dimension",
            value: n,
            cap: 12,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = (1usize << n) - 1;
    let points: Vec<Vec<f64>> = (0..full)
        .map(|mask| (0..n).map(|i| 0.5 * ((mask >> i) & 1) as f64).collect())
        .collect();
    let jets = random_jets(&mut rng, points, m)?;
    Ok(WhitneyField::new(n, m, jets)?.normalized())
}

/// Random points accumulating at `a`: `a + (3/4)·2^{−k}·u_k` for
/// `k = 1..=depth` with `u_k` a random unit vector. The radii avoid powers of
/// two, so approach sequences at distance `2^{−j}` never land on the set.
pub fn clustered_points(a: &[f64], depth: u32, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![a.to_vec()];
    for k in 1..=depth {
        let mut u: Vec<f64> = (0..a.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let r = 0.75 * 2f64.powi(-(k as i32));
        for (ui, ai) in u.iter_mut().zip(a) {
            *ui = ai + r * *ui / norm;
        }
        out.push(u);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn field_1d(values: &[(f64, f64)]) -> WhitneyField {
        let jets = values
            .iter()
            .map(|&(y, v)| Jet::constant(vec![y], 0, v).unwrap())
            .collect();
        WhitneyField::new(1, 0, jets).unwrap()
    }

    #[test]
    fn cm_norm_examples() {
        assert_eq!(cm_norm(&field_1d(&[(0.3, 1.0)])), 1.0);
        assert_eq!(cm_norm(&field_1d(&[(0.0, 0.0), (1.0, 1.0)])), 1.0);
    }

    // Independent pair formula for n = 1, m = 1.
    #[test]
    fn cm_norm_matches_hand_formula_in_one_dimension() {
        let jets = vec![
            Jet::new(vec![0.0], 1, vec![0.5, 2.0]).unwrap(),
            Jet::new(vec![0.5], 1, vec![1.0, -1.0]).unwrap(),
        ];
        let f = WhitneyField::new(1, 1, jets).unwrap();
        // values and slopes: 0.5, 2, 1, 1
        // P_0 − P_1 at 0: 0.5 − (1 + 0.5) = −1 → /0.5 = 2; slope diff 3
        // P_1 − P_0 at 0.5: 1 − (0.5 + 1) = −0.5 → /0.5 = 1; slope diff 3
        assert!((cm_norm(&f) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn field_validation() {
        assert!(matches!(WhitneyField::new(1, 0, vec![]), Err(Error::EmptySet)));
        let dup = vec![
            Jet::constant(vec![0.0], 0, 1.0).unwrap(),
            Jet::constant(vec![-0.0], 0, 2.0).unwrap(),
        ];
        assert!(matches!(
            WhitneyField::new(1, 0, dup),
            Err(Error::DuplicatePoint { .. })
        ));
        let wrong_degree = vec![Jet::constant(vec![0.0], 1, 1.0).unwrap()];
        assert!(WhitneyField::new(1, 0, wrong_degree).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = random_field(2, 2, 5, 9).unwrap();
        let mut buf = Vec::new();
        f.write_json(&mut buf).unwrap();
        let g = WhitneyField::read_json(&buf[..]).unwrap();
        assert_eq!(f, g);
        let bad = r#"{"n":2,"m":1,"points":[{"y":[0,0],"coeffs":[1,2]}]}"#;
        assert!(matches!(
            WhitneyField::read_json(bad.as_bytes()),
            Err(Error::MalformedJet { index: 0 })
        ));
    }

    #[test]
    fn points_csv_round_trip() {
        let pts = vec![vec![0.1, -2.5], vec![1e-9, 3.0]];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &pts).unwrap();
        assert_eq!(read_points_csv(&buf[..]).unwrap(), pts);
        assert!(read_points_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_points_csv("1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn restrict_examples() {
        let pts = vec![vec![0.2, 0.4], vec![0.9, -1.0]];
        let f = restrict(&SmoothTestFunction::Constant(2.5), &pts, 2).unwrap();
        for j in f.jets() {
            assert_eq!(j.coeffs()[0], 2.5);
            assert!(j.coeffs()[1..].iter().all(|&c| c == 0.0));
        }
        let f = restrict(&SmoothTestFunction::linear(2, 0), &pts, 1).unwrap();
        for (j, y) in f.jets().iter().zip(&pts) {
            assert_eq!(j.eval(&[3.0, 7.0]).unwrap(), 3.0);
            assert_eq!(j.derivative_at_base(&MultiIndex::unit(2, 0)).unwrap(), 1.0);
            assert_eq!(j.coeffs()[0], y[0]);
        }
        // the difference quotients vanish, only the unit slope remains
        assert_eq!(cm_norm(&f), 1.0_f64.max(pts[1][0]));
    }

    #[test]
    fn random_and_adversarial_fields_are_normalized_and_reproducible() {
        for (n, m) in [(1, 0), (2, 1), (3, 2)] {
            let f = random_field(n, m, 12, 4).unwrap();
            assert!((cm_norm(&f) - 1.0).abs() < 1e-12);
            assert_eq!(f, random_field(n, m, 12, 4).unwrap());
            let g = adversarial_field(n, m, 4).unwrap();
            assert_eq!(g.len(), (1 << n) - 1);
            assert!((cm_norm(&g) - 1.0).abs() < 1e-12);
            assert_eq!(g, adversarial_field(n, m, 4).unwrap());
        }
    }

    fn fd5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn test_function_derivatives_match_finite_differences() {
        let fams = [
            SmoothTestFunction::unit_sine_product(3.0, 0.4, 2),
            SmoothTestFunction::Gaussian {
                center: vec![0.3, -0.2, 0.5],
                width: 0.7,
                scale: 1.3,
            },
            SmoothTestFunction::Monomial {
                exponents: vec![3, 1, 2],
                coefficient: -0.5,
            },
        ];
        let x = [0.41, 0.17, -0.33];
        let h = 1e-4;
        let lay = layout(3, 3);
        for f in &fams {
            for alpha in lay.indices() {
                for i in 0..3 {
                    let next = alpha.add(&MultiIndex::unit(3, i));
                    let exact = f.derivative(&x, &next).unwrap();
                    let fd = fd5(
                        |v| {
                            let mut y = x;
                            y[i] = v;
                            f.derivative(&y, alpha).unwrap()
                        },
                        x[i],
                        h,
                    );
                    let scale = exact.abs().max(fd.abs()).max(1.0);
                    assert!(
                        (exact - fd).abs() <= 1e-8 * scale,
                        "{f:?} {next:?}: {exact} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_he(0, 2.0), 1.0);
        assert_eq!(hermite_he(1, 2.0), 2.0);
        assert_eq!(hermite_he(2, 2.0), 3.0);
        assert_eq!(hermite_he(3, 2.0), 2.0);
    }

    #[test]
    fn clustered_points_shrink_geometrically() {
        let a = [0.5, 0.5];
        let pts = clustered_points(&a, 10, 1);
        assert_eq!(pts[0], a);
        for (k, p) in pts.iter().enumerate().skip(1) {
            let r = ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt();
            assert!((r - 0.75 * 2f64.powi(-(k as i32))).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cm_norm_is_absolutely_homogeneous(seed in 0u64..1000, lambda in -5.0f64..5.0) {
            let f = random_field(2, 1, 6, seed).unwrap();
            let a = cm_norm(&f.scaled(lambda));
            prop_assert!((a - lambda.abs()).abs() <= 1e-12 * lambda.abs().max(1.0));
        }

        #[test]
        fn cm_norm_is_subadditive(seed in 0u64..1000) {
            let f = random_field(2, 2, 6, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let g_jets = random_jets(&mut rng, f.points(), 2).unwrap();
            let g = WhitneyField::new(2, 2, g_jets).unwrap();
            let sum = f.add(&g).unwrap();
            prop_assert!(cm_norm(&sum) <= (cm_norm(&f) + cm_norm(&g)) * (1.0 + 1e-12));
        }

        #[test]
        fn restrict_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.gen(), rng.gen()]).collect();
            let f = SmoothTestFunction::unit_sine_product(2.0, 0.1, 2);
            let g = SmoothTestFunction::Gaussian { center: vec![0.5, 0.5], width: 0.4, scale: 1.0 };
            let rf = restrict(&f, &pts, 2).unwrap();
            let rg = restrict(&g, &pts, 2).unwrap();
            let combo = Jet::from_derivatives(pts[0].clone(), 2, |al| {
                Ok(a * f.derivative(&pts[0], al)? + b * g.derivative(&pts[0], al)?)
            }).unwrap();
            let lin = rf.jet(0).scaled(a).add(&rg.jet(0).scaled(b)).unwrap();
            for (u, v) in combo.coeffs().iter().zip(lin.coeffs()) {
                prop_assert!((u - v).abs() <= 1e-14 * (1.0 + u.abs()));
            }
        }
    }
}

//! Multi-indices and Taylor polynomials ("jets") of bounded degree in `n`
//! variables.
//!
//! A [`Jet`] stores the polynomial `P(x) = Σ_{|α|≤m} c_α (x − y)^α` about a
//! base point `y`, with `c_α = ∂^αP(y) / α!`. Coefficients are laid out in
//! graded-lexicographic order: total degree ascending, and within a degree the
//! exponent tuples in descending lexicographic order, so the degree-one block
//! is `e_1, e_2, …, e_n`.
//!
//! Because the order is graded, the layout for degree `m` is a prefix of the
//! layout for any degree `d > m` in the same dimension. Converting a jet to a
//! different degree is therefore a truncation or a zero-pad of its
//! coefficient vector.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 16;
/// Largest supported jet / series degree.
pub const MAX_DEGREE: usize = 8;

/// Exponent tuple `α ∈ Z_{≥0}^n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit multi-index `e_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `α! = Π α_i!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial_f64(a as usize)).product()
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α{:?}", self.0)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

pub fn factorial_f64(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn factorial_u128(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of multi-indices in `n` variables with order at most `m`,
/// `C(n + m, m)`.
pub fn num_multi_indices(n: usize, m: usize) -> usize {
    binomial(n + m, m) as usize
}

// Multi-indices in `n` variables of order exactly `r`.
fn count_exact(n: usize, r: usize) -> usize {
    if n == 0 {
        return usize::from(r == 0);
    }
    binomial(n + r - 1, r) as usize
}

/// Graded-lexicographic position of `alpha` among all multi-indices of its
/// dimension. Independent of any degree cap.
pub fn rank(alpha: &MultiIndex) -> usize {
    let n = alpha.dim();
    let d = alpha.order();
    // Everything of lower total degree comes first.
    let mut pos = if d == 0 { 0 } else { binomial(n + d - 1, n) as usize };
    let mut remaining = d;
    for (i, &a) in alpha.exponents().iter().enumerate() {
        let a = a as usize;
        let tail = n - i - 1;
        for k in (a + 1)..=remaining {
            pos += count_exact(tail, remaining - k);
        }
        remaining -= a;
    }
    pos
}

/// Inverse of [`rank`] for a fixed dimension.
pub fn unrank(n: usize, mut pos: usize) -> MultiIndex {
    let mut d = 0;
    loop {
        let block = count_exact(n, d);
        if pos < block {
            break;
        }
        pos -= block;
        d += 1;
    }
    let mut exps = vec![0u32; n];
    let mut remaining = d;
    for i in 0..n {
        let tail = n - i - 1;
        if tail == 0 {
            exps[i] = remaining as u32;
            break;
        }
        let mut a = remaining;
        loop {
            let c = count_exact(tail, remaining - a);
            if pos < c {
                break;
            }
            pos -= c;
            a -= 1;
        }
        exps[i] = a as u32;
        remaining -= a;
    }
    MultiIndex(exps)
}

fn push_exact(n: usize, r: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == n {
        prefix.push(r as u32);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for a in (0..=r).rev() {
        prefix.push(a as u32);
        push_exact(n, r - a, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices of order exactly `r` in `n ≥ 1` variables, in layout
/// order.
pub fn multi_indices_of_order(n: usize, r: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(count_exact(n, r));
    if n == 0 {
        if r == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return out;
    }
    push_exact(n, r, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Enumeration of every multi-index with `|α| ≤ degree` in graded-lex order,
/// plus the tables needed for truncated series products.
pub struct Layout {
    n: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    orders: Vec<usize>,
    factorials: Vec<f64>,
    products: OnceLock<Vec<Vec<(u32, u32)>>>,
}

impl Layout {
    fn build(n: usize, degree: usize) -> Self {
        let mut indices = Vec::with_capacity(num_multi_indices(n, degree));
        for r in 0..=degree {
            indices.extend(multi_indices_of_order(n, r));
        }
        let orders = indices.iter().map(MultiIndex::order).collect();
        let factorials = indices.iter().map(MultiIndex::factorial).collect();
        Layout {
            n,
            degree,
            indices,
            orders,
            factorials,
            products: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn order_of(&self, i: usize) -> usize {
        self.orders[i]
    }

    pub fn factorial_of(&self, i: usize) -> f64 {
        self.factorials[i]
    }

    /// Number of leading entries with order at most `r`.
    pub fn prefix_len(&self, r: usize) -> usize {
        num_multi_indices(self.n, r.min(self.degree))
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dim() != self.n || alpha.order() > self.degree {
            return None;
        }
        Some(rank(alpha))
    }

    /// For each target `k`, the pairs `(i, j)` with `α_i + α_j = α_k`.
    /// Within a target the pairs are sorted by `i`, so `i = 0` comes first.
    fn product_pairs(&self) -> &[Vec<(u32, u32)>] {
        self.products.get_or_init(|| {
            let mut by_target = vec![Vec::new(); self.len()];
            for (i, a) in self.indices.iter().enumerate() {
                for (j, b) in self.indices.iter().enumerate() {
                    if self.orders[i] + self.orders[j] > self.degree {
                        continue;
                    }
                    let k = rank(&a.add(b));
                    by_target[k].push((i as u32, j as u32));
                }
            }
            by_target
        })
    }

    /// Truncated product of two series in this layout.
    pub fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let pairs = self.product_pairs();
        pairs
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|&(i, j)| a[i as usize] * b[j as usize])
                    .sum::<f64>()
            })
            .collect()
    }

    /// Adds `a · b` (truncated) into `acc`.
    pub fn mul_add_into(&self, a: &[f64], b: &[f64], acc: &mut [f64]) {
        for (k, ps) in self.product_pairs().iter().enumerate() {
            let mut s = 0.0;
            for &(i, j) in ps {
                s += a[i as usize] * b[j as usize];
            }
            acc[k] += s;
        }
    }

    /// Truncated series of `1 / s`, from
    /// `r_γ = −(1/s_0) Σ_{0<β≤γ} s_β r_{γ−β}`.
    pub fn reciprocal(&self, s: &[f64]) -> Vec<f64> {
        let pairs = self.product_pairs();
        let mut r = vec![0.0; self.len()];
        let inv0 = 1.0 / s[0];
        r[0] = inv0;
        for k in 1..self.len() {
            let mut acc = 0.0;
            for &(i, j) in &pairs[k] {
                if i != 0 {
                    acc += s[i as usize] * r[j as usize];
                }
            }
            r[k] = -acc * inv0;
        }
        r
    }
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("n", &self.n)
            .field("degree", &self.degree)
            .finish()
    }
}

type LayoutCache = RwLock<HashMap<(usize, usize), Arc<Layout>>>;

/// Shared, lazily-built layout for `(n, degree)`.
pub fn layout(n: usize, degree: usize) -> Arc<Layout> {
    static CACHE: OnceLock<LayoutCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(l) = cache.read().expect("layout cache poisoned").get(&(n, degree)) {
        return Arc::clone(l);
    }
    let mut w = cache.write().expect("layout cache poisoned");
    Arc::clone(
        w.entry((n, degree))
            .or_insert_with(|| Arc::new(Layout::build(n, degree))),
    )
}

fn check_caps(n: usize, degree: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::CapExceeded {
            what: "jet dimension",
            value: n,
            cap: MAX_DIM,
        });
    }
    if degree > MAX_DEGREE {
        return Err(Error::CapExceeded {
            what: "jet degree",
            value: degree,
            cap: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Taylor polynomial of degree `≤ m` about a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    base: Vec<f64>,
    degree: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn new(base: Vec<f64>, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_caps(base.len(), degree)?;
        let expected = num_multi_indices(base.len(), degree);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Jet {
            base,
            degree,
            coeffs,
        })
    }

    pub fn zero(base: Vec<f64>, degree: usize) -> Result<Self> {
        let len = num_multi_indices(base.len(), degree);
        Jet::new(base, degree, vec![0.0; len])
    }

    pub fn constant(base: Vec<f64>, degree: usize, value: f64) -> Result<Self> {
        let mut j = Jet::zero(base, degree)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// Builds the jet whose `α`-th derivative at the base is `derivative(α)`.
    pub fn from_derivatives<F>(base: Vec<f64>, degree: usize, mut derivative: F) -> Result<Self>
    where
        F: FnMut(&MultiIndex) -> Result<f64>,
    {
        check_caps(base.len(), degree)?;
        let lay = layout(base.len(), degree);
        let coeffs = lay
            .indices()
            .iter()
            .enumerate()
            .map(|(i, a)| Ok(derivative(a)? / lay.factorial_of(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Jet {
            base,
            degree,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn layout(&self) -> Arc<Layout> {
        layout(self.dim(), self.degree)
    }

    /// Taylor coefficient `c_α`; zero for `|α| > m`.
    pub fn coeff(&self, alpha: &MultiIndex) -> Result<f64> {
        self.check_dim(alpha.dim())?;
        if alpha.order() > self.degree {
            return Ok(0.0);
        }
        Ok(self.coeffs[rank(alpha)])
    }

    /// `∂^αP(base) = α! c_α`.
    pub fn derivative_at_base(&self, alpha: &MultiIndex) -> Result<f64> {
        Ok(self.coeff(alpha)? * alpha.factorial())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    // powers[i][k] = h_i^k for k ≤ degree
    fn powers(&self, h: &[f64]) -> Vec<Vec<f64>> {
        h.iter()
            .map(|&hi| {
                let mut p = Vec::with_capacity(self.degree + 1);
                let mut acc = 1.0;
                for _ in 0..=self.degree {
                    p.push(acc);
                    acc *= hi;
                }
                p
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let h: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let pw = self.powers(&h);
        let lay = self.layout();
        let mut sum = 0.0;
        for (c, a) in self.coeffs.iter().zip(lay.indices()) {
            if *c == 0.0 {
                continue;
            }
            let mono: f64 = a
                .exponents()
                .iter()
                .enumerate()
                .map(|(i, &e)| pw[i][e as usize])
                .product();
            sum += c * mono;
        }
        Ok(sum)
    }

    /// `∂^αP(x)` without building the differentiated jet.
    pub fn deriv_at(&self, alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
        self.check_dim(alpha.dim())?;
        self.check_dim(x.len())?;
        if alpha.order() > self.degree {
            return Ok(0.0);
        }
        let h: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let pw = self.powers(&h);
        let lay = self.layout();
        let mut sum = 0.0;
        for (c, g) in self.coeffs.iter().zip(lay.indices()) {
            if *c == 0.0 || !alpha.le(g) {
                continue;
            }
            let mut term = *c;
            for (i, (&gi, &ai)) in g.exponents().iter().zip(alpha.exponents()).enumerate() {
                term *= falling_factorial(gi, ai) * pw[i][(gi - ai) as usize];
            }
            sum += term;
        }
        Ok(sum)
    }

    /// The jet of `∂^αP`: degree `m − |α|`, same base.
    pub fn diff(&self, alpha: &MultiIndex) -> Result<Jet> {
        self.check_dim(alpha.dim())?;
        let k = alpha.order();
        if k > self.degree {
            return Err(Error::OrderTooHigh {
                order: k,
                limit: self.degree,
            });
        }
        let out = layout(self.dim(), self.degree - k);
        let coeffs = out
            .indices()
            .iter()
            .map(|d| {
                let g = d.add(alpha);
                let mult: f64 = d
                    .exponents()
                    .iter()
                    .zip(alpha.exponents())
                    .map(|(&di, &ai)| falling_factorial(di + ai, ai))
                    .product();
                self.coeffs[rank(&g)] * mult
            })
            .collect();
        Ok(Jet {
            base: self.base.clone(),
            degree: self.degree - k,
            coeffs,
        })
    }

    /// Re-expands the same polynomial about `new_base`:
    /// `d_δ = Σ_{γ≥δ} c_γ C(γ, δ) h^{γ−δ}` with `h = new_base − base`.
    pub fn recenter(&self, new_base: &[f64]) -> Result<Jet> {
        self.check_dim(new_base.len())?;
        let h: Vec<f64> = new_base.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        if h.iter().all(|&v| v == 0.0) {
            return Ok(Jet {
                base: new_base.to_vec(),
                ..self.clone()
            });
        }
        let pw = self.powers(&h);
        let lay = self.layout();
        let idx = lay.indices();
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for (gi, g) in idx.iter().enumerate() {
            let c = self.coeffs[gi];
            if c == 0.0 {
                continue;
            }
            // δ ≤ γ implies rank(δ) ≤ rank(γ)
            for (di, d) in idx[..=gi].iter().enumerate() {
                if !d.le(g) {
                    continue;
                }
                let mut term = c;
                for (i, (&ge, &de)) in g.exponents().iter().zip(d.exponents()).enumerate() {
                    term *= binomial(ge as usize, de as usize) as f64 * pw[i][(ge - de) as usize];
                }
                coeffs[di] += term;
            }
        }
        Ok(Jet {
            base: new_base.to_vec(),
            degree: self.degree,
            coeffs,
        })
    }

    /// Same polynomial family truncated or zero-padded to `degree`.
    pub fn with_degree(&self, degree: usize) -> Result<Jet> {
        check_caps(self.dim(), degree)?;
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(num_multi_indices(self.dim(), degree), 0.0);
        Ok(Jet {
            base: self.base.clone(),
            degree,
            coeffs,
        })
    }

    pub fn scaled(&self, lambda: f64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|c| c * lambda).collect(),
            ..self.clone()
        }
    }

    /// Coefficientwise `self + other`; both must share base and degree.
    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_same_frame(other)?;
        Ok(Jet {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.add(&other.scaled(-1.0))
    }

    /// Truncated product of two jets at the same base, keeping `self`'s
    /// degree.
    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_same_frame(other)?;
        let coeffs = self.layout().mul(&self.coeffs, &other.coeffs);
        Ok(Jet {
            coeffs,
            ..self.clone()
        })
    }

    /// Truncated series of `1/P`. Requires `P(base) ≠ 0`.
    pub fn reciprocal(&self) -> Result<Jet> {
        if self.coeffs[0] == 0.0 {
            return Err(Error::invalid("reciprocal", "jet vanishes at its base"));
        }
        Ok(Jet {
            coeffs: self.layout().reciprocal(&self.coeffs),
            ..self.clone()
        })
    }

    fn check_same_frame(&self, other: &Jet) -> Result<()> {
        self.check_dim(other.dim())?;
        if self.degree != other.degree {
            return Err(Error::OrderTooHigh {
                order: other.degree,
                limit: self.degree,
            });
        }
        if self.base != other.base {
            return Err(Error::invalid("base", "jets are based at different points"));
        }
        Ok(())
    }
}

fn falling_factorial(g: u32, a: u32) -> f64 {
    ((g - a + 1)..=g).map(|v| v as f64).product()
}

/// `Σ_{|β|=r} 1/β!` over multi-indices in `n` variables, summed exactly.
pub fn sum_reciprocal_factorials(n: usize, r: usize) -> Result<Ratio<i128>> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::CapExceeded {
            what: "jet dimension",
            value: n,
            cap: MAX_DIM,
        });
    }
    if r > MAX_DEGREE {
        return Err(Error::CapExceeded {
            what: "jet degree",
            value: r,
            cap: MAX_DEGREE,
        });
    }
    let mut total = Ratio::from_integer(0i128);
    for beta in multi_indices_of_order(n, r) {
        let den: i128 = beta
            .exponents()
            .iter()
            .map(|&b| factorial_u128(b as usize) as i128)
            .product();
        total += Ratio::new(1, den);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn layout_sizes_and_order() {
        let l = layout(2, 2);
        assert_eq!(l.len(), 6);
        let got: Vec<_> = l.indices().iter().map(|a| a.exponents().to_vec()).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(layout(3, 4).len(), binomial(7, 4) as usize);
    }

    #[test]
    fn eval_examples() {
        let c = Jet::constant(vec![0.3, -1.0], 2, 1.0).unwrap();
        assert_eq!(c.eval(&[5.0, 7.0]).unwrap(), 1.0);

        let p = Jet::new(vec![0.0], 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(p.eval(&[0.5]).unwrap(), 2.0);

        // x1 x2 about (1,1): 1 + (x1-1) + (x2-1) + (x1-1)(x2-1)
        let q = Jet::from_derivatives(vec![1.0, 1.0], 2, |a| {
            Ok(match a.exponents() {
                [0, 0] => 1.0,
                [1, 0] | [0, 1] => 1.0,
                [1, 1] => 1.0,
                _ => 0.0,
            })
        })
        .unwrap();
        assert!((q.eval(&[2.0, 3.0]).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let p = Jet::constant(vec![0.0, 0.0], 1, 1.0).unwrap();
        assert!(matches!(p.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn diff_examples() {
        let p = Jet::new(vec![0.0], 2, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.diff(&mi(&[0])).unwrap(), p);
        let d2 = p.diff(&mi(&[2])).unwrap();
        assert_eq!(d2.degree(), 0);
        assert_eq!(d2.coeffs(), &[2.0]);
        assert!(matches!(p.diff(&mi(&[3])), Err(Error::OrderTooHigh { .. })));

        // x1^2 x2 truncated at degree 3, ∂^(1,1) → 2 x1
        let q = Jet::from_derivatives(vec![0.0, 0.0], 3, |a| {
            Ok(if a.exponents() == [2, 1] { 2.0 } else { 0.0 })
        })
        .unwrap();
        let dq = q.diff(&mi(&[1, 1])).unwrap();
        assert_eq!(dq.degree(), 1);
        assert_eq!(dq.coeffs(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn recenter_examples() {
        let p = Jet::new(vec![0.0], 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(p.recenter(&[0.0]).unwrap().coeffs(), p.coeffs());
        let r = p.recenter(&[3.0]).unwrap();
        assert_eq!(r.coeffs(), &[7.0, 2.0]);
        assert_eq!(r.base(), &[3.0]);
    }

    #[test]
    fn reciprocal_factorial_examples() {
        assert_eq!(sum_reciprocal_factorials(3, 2).unwrap(), Ratio::new(9, 2));
        assert_eq!(sum_reciprocal_factorials(5, 0).unwrap(), Ratio::from_integer(1));
        // (3,0),(2,1),(1,2),(0,3): 1/6 + 1/2 + 1/2 + 1/6
        assert_eq!(sum_reciprocal_factorials(2, 3).unwrap(), Ratio::new(4, 3));
        assert!(sum_reciprocal_factorials(17, 2).is_err());
        assert!(sum_reciprocal_factorials(2, 9).is_err());
    }

    #[test]
    fn reciprocal_factorials_match_closed_form() {
        for n in 1..=8usize {
            for r in 0..=6usize {
                let want = Ratio::new((n as i128).pow(r as u32), factorial_u128(r) as i128);
                assert_eq!(sum_reciprocal_factorials(n, r).unwrap(), want, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn rank_unrank_round_trip_exhaustive() {
        for n in 1..=10 {
            for m in 0..=6 {
                let l = layout(n, m);
                assert_eq!(l.len(), num_multi_indices(n, m));
                for (i, a) in l.indices().iter().enumerate() {
                    assert_eq!(rank(a), i);
                    assert_eq!(&unrank(n, i), a);
                }
            }
        }
    }

    #[test]
    fn series_reciprocal_inverts() {
        let s = Jet::new(vec![0.0, 0.0], 3, vec![2.0, 0.5, -1.0, 0.3, 0.1, 0.2, 0.0, 0.4, 0.0, 1.0])
            .unwrap();
        let prod = s.mul(&s.reciprocal().unwrap()).unwrap();
        assert!((prod.coeffs()[0] - 1.0).abs() < 1e-15);
        assert!(prod.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
    }

    fn jet_strategy() -> impl Strategy<Value = (Jet, Vec<f64>)> {
        (1usize..=3, 0usize..=3).prop_flat_map(|(n, m)| {
            let len = num_multi_indices(n, m);
            (
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-2.0f64..2.0, len),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
                .prop_map(move |(b, c, nb)| (Jet::new(b, m, c).unwrap(), nb))
        })
    }

    proptest! {
        #[test]
        fn recenter_preserves_values((p, nb) in jet_strategy(), xs in proptest::collection::vec(-1.5f64..1.5, 60)) {
            let q = p.recenter(&nb).unwrap();
            for x in xs.chunks(p.dim()).take(20) {
                if x.len() < p.dim() { break; }
                let a = p.eval(x).unwrap();
                let b = q.eval(x).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn recenter_composes((p, nb) in jet_strategy(), shift in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let mid = p.recenter(&nb).unwrap();
            let target: Vec<f64> = nb.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let two_step = mid.recenter(&target).unwrap();
            let direct = p.recenter(&target).unwrap();
            for (a, b) in two_step.coeffs().iter().zip(direct.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn diff_composes((p, _nb) in jet_strategy(), seed in 0u64..1000) {
            let n = p.dim();
            let m = p.degree();
            // two small multi-indices derived from the seed
            let a = unrank(n, (seed as usize) % num_multi_indices(n, m));
            let rest = m - a.order();
            let b = unrank(n, (seed as usize / 7) % num_multi_indices(n, rest));
            let lhs = p.diff(&a).unwrap().diff(&b).unwrap();
            let rhs = p.diff(&a.add(&b)).unwrap();
            prop_assert_eq!(lhs.degree(), rhs.degree());
            // integer multipliers applied in one or two roundings
            for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
            }
        }

        #[test]
        fn deriv_at_matches_diff_then_eval((p, x) in jet_strategy(), seed in 0usize..1000) {
            let a = unrank(p.dim(), seed % num_multi_indices(p.dim(), p.degree()));
            let direct = p.deriv_at(&a, &x).unwrap();
            let via = p.diff(&a).unwrap().eval(&x).unwrap();
            prop_assert!((direct - via).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}

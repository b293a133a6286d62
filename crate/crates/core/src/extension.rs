//! The single-origin extension operator.
//!
//! For `x ∉ E` the extension is
//! `F(x) = Σ'_k P_{p_k}(x) φ_k(x) / S(x)` with `S = Σ_k φ_k`, where `k` runs
//! over the Whitney cubes whose expanded cube `Q_k*` holds `x`, `φ_k` is the
//! cutoff of `Q_k`, `p_k` its anchor point, and `Σ'` keeps only cubes with
//! `dist(Q_k, E) ≤ truncation`. On `E` the extension is the jet value.
//!
//! Derivatives are computed as one truncated Taylor series at `x`: the cube
//! cutoffs are tensor products of one-dimensional series, `1/S` comes from
//! the series reciprocal, and the products are series products. When no cube
//! is truncated the sum is rewritten as
//! `P_ref + (Σ_k (P_{p_k} − P_ref) φ_k) / S`, which is exact when all anchors
//! agree and keeps cancellation small when they do not.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cubes::{DistanceOracle, SupportCube};
use crate::cutoff::CutoffParams;
use crate::error::{Error, Result};
use crate::fields::WhitneyField;
use crate::jets::{layout, Layout, MultiIndex, MAX_DEGREE};

/// Largest dimension for which support queries are attempted; the candidate
/// search grows like `5·2^n`.
pub const MAX_QUERY_DIM: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionConfig {
    pub m: usize,
    pub t: f64,
    pub origin: Vec<f64>,
    pub truncation: f64,
    pub max_order: usize,
    pub c1p: f64,
    pub c2p: f64,
}

/// `t` used by the classical operator at every dimension.
pub const CLASSICAL_T: f64 = 0.125;

/// `1/n`, held below the admissible ceiling `1/4` in low dimension.
pub fn averaged_t(n: usize) -> f64 {
    (1.0 / n as f64).min(0.2)
}

impl ExtensionConfig {
    pub fn new(n: usize, m: usize, t: f64) -> Self {
        ExtensionConfig {
            m,
            t,
            origin: vec![0.0; n],
            truncation: 1.0,
            max_order: (m + 2).min(MAX_DEGREE),
            c1p: 1.0 / 32.0,
            c2p: 8.0,
        }
    }

    pub fn classical(n: usize, m: usize) -> Self {
        Self::new(n, m, CLASSICAL_T)
    }

    pub fn averaged(n: usize, m: usize) -> Self {
        Self::new(n, m, averaged_t(n))
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.t > 0.0 && self.t < 0.25) {
            return Err(Error::invalid("t", format!("{} is outside (0, 1/4)", self.t)));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::invalid("truncation", "must be positive"));
        }
        if !(is_power_of_two(self.c1p) && is_power_of_two(self.c2p) && self.c2p >= 2.0 * self.c1p)
        {
            return Err(Error::invalid(
                "bracket",
                "c1p and c2p must be powers of two with c2p ≥ 2·c1p",
            ));
        }
        if self.origin.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.origin.len(),
            });
        }
        if self.origin.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("origin", "must be finite"));
        }
        if self.max_order > MAX_DEGREE {
            return Err(Error::OrderTooHigh {
                order: self.max_order,
                limit: MAX_DEGREE,
            });
        }
        if n > MAX_QUERY_DIM {
            return Err(Error::CapExceeded {
                what: "query dimension",
                value: n,
                cap: MAX_QUERY_DIM,
            });
        }
        Ok(())
    }
}

pub fn is_power_of_two(x: f64) -> bool {
    x.is_normal() && x > 0.0 && (x.to_bits() & ((1u64 << 52) - 1)) == 0
}

/// Everything the operator needs at one query point: the contributing
/// cubes and the Taylor series (coefficients `∂^α/α!`) of their cutoffs and
/// of `1/S`, up to `order`.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub x: Vec<f64>,
    pub delta: f64,
    pub order: usize,
    pub cubes: Vec<SupportCube>,
    pub phi: Vec<Vec<f64>>,
    pub inv_s: Vec<f64>,
    layout: Arc<Layout>,
}

impl LocalFrame {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// `∂^α φ_k(x)` for `|α| ≤ order`.
    pub fn phi_deriv(&self, k: usize, alpha: &MultiIndex) -> Option<f64> {
        let pos = self.layout.position(alpha)?;
        Some(self.phi[k][pos] * self.layout.factorial_of(pos))
    }

    /// Series of the normalized cutoff `φ_k* = φ_k / S`.
    pub fn phi_star(&self, k: usize) -> Vec<f64> {
        self.layout.mul(&self.phi[k], &self.inv_s)
    }
}

/// The extension operator for one field, one parameter set, and any origin.
#[derive(Clone, Debug)]
pub struct Extender {
    field: WhitneyField,
    config: ExtensionConfig,
    oracle: DistanceOracle,
    cutoff: CutoffParams,
}

impl Extender {
    pub fn new(field: WhitneyField, config: ExtensionConfig) -> Result<Self> {
        config.validate(field.dim())?;
        let oracle = DistanceOracle::new(&field.points())?;
        let cutoff = CutoffParams::new(config.t, config.max_order)?;
        Ok(Extender {
            field,
            config,
            oracle,
            cutoff,
        })
    }

    pub fn field(&self) -> &WhitneyField {
        &self.field
    }

    pub fn config(&self) -> &ExtensionConfig {
        &self.config
    }

    pub fn oracle(&self) -> &DistanceOracle {
        &self.oracle
    }

    pub fn cutoff(&self) -> &CutoffParams {
        &self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x", "must be finite"));
        }
        Ok(())
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if order > self.config.max_order {
            return Err(Error::OrderTooHigh {
                order,
                limit: self.config.max_order,
            });
        }
        Ok(())
    }

    /// Contributing cubes and cutoff series at `x` for origin `b`.
    pub fn frame_with_origin(&self, x: &[f64], origin: &[f64], order: usize) -> Result<LocalFrame> {
        self.check_point(x)?;
        self.check_order(order)?;
        let n = self.dim();
        let (delta, _) = self.oracle.delta(x)?;
        if delta == 0.0 {
            return Err(Error::PointInSet);
        }
        let cubes = self
            .oracle
            .cubes_covering_support(x, origin, self.config.t)?;
        self.check_bracket(&cubes, delta)?;
        let lay = layout(n, order);
        let mut one_dim = vec![vec![0.0; order + 1]; n];
        let mut phi = Vec::with_capacity(cubes.len());
        let mut s_series = vec![0.0; lay.len()];
        for c in &cubes {
            let side = c.cube.side();
            for (i, d) in one_dim.iter_mut().enumerate() {
                let u = (x[i] - c.cube.lower(i)) / side;
                let raw = self.cutoff.theta1_derivs(u, order)?;
                let mut scale = 1.0;
                for (j, v) in raw.into_iter().enumerate() {
                    if j > 0 {
                        scale /= side * j as f64;
                    }
                    d[j] = v * scale;
                }
            }
            let series: Vec<f64> = lay
                .indices()
                .iter()
                .map(|alpha| {
                    alpha
                        .exponents()
                        .iter()
                        .zip(&one_dim)
                        .map(|(&a, d)| d[a as usize])
                        .product()
                })
                .collect();
            for (acc, v) in s_series.iter_mut().zip(&series) {
                *acc += v;
            }
            phi.push(series);
        }
        let inv_s = lay.reciprocal(&s_series);
        Ok(LocalFrame {
            x: x.to_vec(),
            delta,
            order,
            cubes,
            phi,
            inv_s,
            layout: lay,
        })
    }

    pub fn frame(&self, x: &[f64], order: usize) -> Result<LocalFrame> {
        self.frame_with_origin(x, &self.config.origin, order)
    }

    // Every p ∈ [s/4, 4s] for a contributing side s must lie inside
    // [c1p, c2p]·δ/√n.
    fn check_bracket(&self, cubes: &[SupportCube], delta: f64) -> Result<()> {
        let unit = delta / (self.dim() as f64).sqrt();
        let (lo, hi) = (self.config.c1p * unit, self.config.c2p * unit);
        for c in cubes {
            let s = c.cube.side();
            if s / 4.0 < lo || 4.0 * s > hi {
                return Err(Error::GeometryViolation {
                    check: "p_bracket",
                    detail: format!("side {s} against [{lo}, {hi}]"),
                });
            }
        }
        Ok(())
    }

    /// Taylor series of `F` at `x ∉ E` for origin `b`, all `|α| ≤ order`.
    pub fn series_with_origin(&self, x: &[f64], origin: &[f64], order: usize) -> Result<Vec<f64>> {
        let frame = self.frame_with_origin(x, origin, order)?;
        self.series_from_frame(&frame)
    }

    pub fn series(&self, x: &[f64], order: usize) -> Result<Vec<f64>> {
        self.series_with_origin(x, &self.config.origin, order)
    }

    pub fn series_from_frame(&self, frame: &LocalFrame) -> Result<Vec<f64>> {
        let lay = &frame.layout;
        let x = &frame.x;
        let truncated = frame
            .cubes
            .iter()
            .any(|c| c.dist_to_e > self.config.truncation);

        // Cutoff series summed per anchor point, in anchor order.
        let mut by_anchor: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (c, series) in frame.cubes.iter().zip(&frame.phi) {
            if c.dist_to_e > self.config.truncation {
                continue;
            }
            let acc = by_anchor
                .entry(c.anchor_point)
                .or_insert_with(|| vec![0.0; lay.len()]);
            for (a, v) in acc.iter_mut().zip(series) {
                *a += v;
            }
        }

        let reference = if truncated {
            None
        } else {
            // anchor of a cube containing x (its cutoff equals 1 there)
            frame
                .cubes
                .iter()
                .zip(&frame.phi)
                .find(|(_, s)| s[0] == 1.0)
                .or_else(|| frame.cubes.first().zip(frame.phi.first()))
                .map(|(c, _)| c.anchor_point)
        };
        let ref_jet = match reference {
            Some(r) => Some(self.anchor_series(r, x, frame.order)?),
            None => None,
        };

        let mut numer = vec![0.0; lay.len()];
        for (&a, phi_sum) in &by_anchor {
            if Some(a) == reference {
                continue;
            }
            let mut p = self.anchor_series(a, x, frame.order)?;
            if let Some(r) = &ref_jet {
                for (pi, ri) in p.iter_mut().zip(r) {
                    *pi -= ri;
                }
            }
            lay.mul_add_into(&p, phi_sum, &mut numer);
        }
        let mut out = lay.mul(&numer, &frame.inv_s);
        if let Some(r) = ref_jet {
            for (o, ri) in out.iter_mut().zip(r) {
                *o += ri;
            }
        }
        Ok(out)
    }

    // Jet at E's point `index`, re-expanded about `x` in the order-`order`
    // layout.
    fn anchor_series(&self, index: usize, x: &[f64], order: usize) -> Result<Vec<f64>> {
        let jet = self.field.jet(index).recenter(x)?.with_degree(order)?;
        Ok(jet.coeffs().to_vec())
    }

    /// `F(x)`, including the jet branch on `E`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.value_with_origin(x, &self.config.origin)
    }

    pub fn value_with_origin(&self, x: &[f64], origin: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if let Some(i) = self.oracle.find(x) {
            return Ok(self.field.jet(i).coeffs()[0]);
        }
        Ok(self.series_with_origin(x, origin, 0)?[0])
    }

    /// `∂^αF(x)` for `x ∉ E`.
    pub fn derivative(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        self.derivative_with_origin(x, &self.config.origin, alpha)
    }

    pub fn derivative_with_origin(
        &self,
        x: &[f64],
        origin: &[f64],
        alpha: &MultiIndex,
    ) -> Result<f64> {
        self.check_point(x)?;
        if alpha.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: alpha.dim(),
            });
        }
        self.check_order(alpha.order())?;
        let series = self.series_with_origin(x, origin, alpha.order())?;
        let lay = layout(self.dim(), alpha.order());
        let pos = lay.position(alpha).expect("index inside its own layout");
        Ok(series[pos] * lay.factorial_of(pos))
    }

    /// All `∂^αF(x)` for `|α| ≤ order`, graded-lex order.
    pub fn derivatives_with_origin(
        &self,
        x: &[f64],
        origin: &[f64],
        order: usize,
    ) -> Result<Vec<f64>> {
        let series = self.series_with_origin(x, origin, order)?;
        let lay = layout(self.dim(), order);
        Ok(series
            .iter()
            .enumerate()
            .map(|(i, c)| c * lay.factorial_of(i))
            .collect())
    }

    /// Values of `∂^αP_x(x)` for `|α| ≤ m` at a point of `E`.
    pub fn jet_derivatives(&self, index: usize) -> Vec<f64> {
        let jet = self.field.jet(index);
        let lay = jet.layout();
        jet.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * lay.factorial_of(i))
            .collect()
    }

    /// `Ψ_[b](x) = Σ_p Π_i (ψ((x_i − b_i)/p) + 1)` over powers of two `p` in
    /// `[c1p, c2p]·δ(x)/√n`.
    pub fn psi_b(&self, x: &[f64]) -> Result<f64> {
        self.psi_b_with_origin(x, &self.config.origin)
    }

    pub fn psi_b_with_origin(&self, x: &[f64], origin: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let (delta, _) = self.oracle.delta(x)?;
        if delta == 0.0 {
            return Err(Error::PointInSet);
        }
        let levels = self.p_levels(delta)?;
        Ok(psi_sum(x, origin, self.config.t, levels))
    }

    /// Exponents `j` with `2^j` inside the `p`-bracket at distance `δ`.
    pub fn p_levels(&self, delta: f64) -> Result<std::ops::RangeInclusive<i32>> {
        p_levels(delta, self.dim(), self.config.c1p, self.config.c2p)
    }

    /// `Σ_k |∂^α φ_k*(x)|`.
    pub fn partition_derivative_sum(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        self.partition_derivative_sum_with_origin(x, &self.config.origin, alpha)
    }

    pub fn partition_derivative_sum_with_origin(
        &self,
        x: &[f64],
        origin: &[f64],
        alpha: &MultiIndex,
    ) -> Result<f64> {
        let frame = self.frame_with_origin(x, origin, alpha.order())?;
        let pos = frame.layout.position(alpha).ok_or(Error::DimensionMismatch {
            expected: self.dim(),
            got: alpha.dim(),
        })?;
        let fact = frame.layout.factorial_of(pos);
        Ok((0..frame.cubes.len())
            .map(|k| (frame.phi_star(k)[pos] * fact).abs())
            .sum())
    }

    /// `Σ_k φ_k*(x)`.
    pub fn partition_of_unity(&self, x: &[f64]) -> Result<f64> {
        self.partition_of_unity_with_origin(x, &self.config.origin)
    }

    pub fn partition_of_unity_with_origin(&self, x: &[f64], origin: &[f64]) -> Result<f64> {
        let frame = self.frame_with_origin(x, origin, 0)?;
        Ok(frame.phi.iter().map(|p| p[0] * frame.inv_s[0]).sum())
    }
}

/// Exponents `j` with `2^j ∈ [c1p, c2p]·δ/√n`.
pub fn p_levels(
    delta: f64,
    n: usize,
    c1p: f64,
    c2p: f64,
) -> Result<std::ops::RangeInclusive<i32>> {
    let unit = delta / (n as f64).sqrt();
    let lo = c1p * unit;
    let hi = c2p * unit;
    let mut a = lo.log2().ceil() as i32;
    while 2f64.powi(a) < lo {
        a += 1;
    }
    while 2f64.powi(a - 1) >= lo {
        a -= 1;
    }
    let mut b = hi.log2().floor() as i32;
    while 2f64.powi(b) > hi {
        b -= 1;
    }
    while 2f64.powi(b + 1) <= hi {
        b += 1;
    }
    if a > b {
        return Err(Error::GeometryViolation {
            check: "p_range",
            detail: format!("no power of two in [{lo}, {hi}]"),
        });
    }
    Ok(a..=b)
}

/// `Σ_{p = 2^j, j ∈ levels} Π_i (ψ((x_i − b_i)/p) + 1)`.
pub fn psi_sum(x: &[f64], origin: &[f64], t: f64, levels: std::ops::RangeInclusive<i32>) -> f64 {
    levels
        .map(|j| {
            let p = 2f64.powi(j);
            x.iter()
                .zip(origin)
                .map(|(xi, bi)| crate::cutoff::psi((xi - bi) / p, t) + 1.0)
                .product::<f64>()
        })
        .sum()
}

/// `F(x)` for a one-off query.
pub fn eval_extension(field: &WhitneyField, x: &[f64], config: &ExtensionConfig) -> Result<f64> {
    Extender::new(field.clone(), config.clone())?.value(x)
}

/// `∂^αF(x)` for a one-off query at `x ∉ E`.
pub fn eval_extension_deriv(
    field: &WhitneyField,
    x: &[f64],
    alpha: &MultiIndex,
    config: &ExtensionConfig,
) -> Result<f64> {
    Extender::new(field.clone(), config.clone())?.derivative(x, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::random_field;
    use crate::jets::Jet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_anchor(n: usize, m: usize) -> WhitneyField {
        let len = layout(n, m).len();
        let coeffs = (0..len).map(|i| 0.3 + 0.1 * i as f64).collect();
        WhitneyField::new(n, m, vec![Jet::new(vec![0.0; n], m, coeffs).unwrap()]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ExtensionConfig::classical(2, 1).validate(2).is_ok());
        assert!(ExtensionConfig::classical(2, 1).with_t(0.25).validate(2).is_err());
        assert!(ExtensionConfig::classical(2, 1).validate(3).is_err());
        let mut c = ExtensionConfig::classical(2, 1);
        c.c1p = 0.03;
        assert!(c.validate(2).is_err());
        assert!(averaged_t(2) < 0.25 && averaged_t(8) == 0.125);
    }

    #[test]
    fn power_of_two_detection() {
        for x in [0.125, 1.0, 8.0, 2f64.powi(-30)] {
            assert!(is_power_of_two(x));
        }
        for x in [0.0, -2.0, 3.0, 0.1, f64::INFINITY] {
            assert!(!is_power_of_two(x));
        }
    }

    #[test]
    fn value_on_e_is_jet_value() {
        let f = random_field(2, 1, 5, 3).unwrap();
        let ext = Extender::new(f.clone(), ExtensionConfig::classical(2, 1)).unwrap();
        for j in f.jets() {
            assert_eq!(ext.value(j.base()).unwrap(), j.coeffs()[0]);
        }
        let p = f.jet(0).base().to_vec();
        assert!(matches!(
            ext.derivative(&p, &MultiIndex::unit(2, 0)),
            Err(Error::PointInSet)
        ));
    }

    #[test]
    fn single_anchor_reproduces_jet_exactly() {
        for n in 1..=3 {
            for m in 0..=2 {
                let f = single_anchor(n, m);
                let ext = Extender::new(f.clone(), ExtensionConfig::classical(n, m)).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 10 + m as u64);
                for _ in 0..50 {
                    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.28..0.28)).collect();
                    if x.iter().map(|v| v * v).sum::<f64>() > 0.25 {
                        continue;
                    }
                    let order = m + 1;
                    let got = ext.derivatives_with_origin(&x, &[0.0; 3][..n], order).unwrap();
                    let lay = layout(n, order);
                    for (i, alpha) in lay.indices().iter().enumerate() {
                        let expect = f.jet(0).deriv_at(alpha, &x).unwrap();
                        assert_eq!(got[i], expect, "n={n} m={m} {alpha:?} at {x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_field_extends_to_constant() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.5, 0.1], vec![0.2, 0.9]];
        let jets = pts
            .iter()
            .map(|p| Jet::constant(p.clone(), 1, 2.5).unwrap())
            .collect();
        let f = WhitneyField::new(2, 1, jets).unwrap();
        let ext = Extender::new(f, ExtensionConfig::classical(2, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = [rng.gen_range(-0.2..0.8), rng.gen_range(-0.2..1.0)];
            assert!((ext.value(&x).unwrap() - 2.5).abs() < 1e-12);
            let d = ext.derivative(&x, &MultiIndex::unit(2, 1)).unwrap();
            assert!(d.abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn partition_of_unity_and_alpha_zero_sum() {
        let f = random_field(3, 1, 8, 2).unwrap();
        let ext = Extender::new(f, ExtensionConfig::classical(3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..1.5)).collect();
            assert!((ext.partition_of_unity(&x).unwrap() - 1.0).abs() < 1e-12);
            let s = ext.partition_derivative_sum(&x, &MultiIndex::zero(3)).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_zero_matches_value() {
        let f = random_field(2, 2, 6, 8).unwrap();
        let ext = Extender::new(f, ExtensionConfig::averaged(2, 2)).unwrap();
        let x = [0.37, 1.21];
        assert_eq!(
            ext.value(&x).unwrap(),
            ext.derivative(&x, &MultiIndex::zero(2)).unwrap()
        );
        assert_eq!(
            ext.value(&x).unwrap(),
            eval_extension(ext.field(), &x, ext.config()).unwrap()
        );
    }

    #[test]
    fn order_above_cap_is_rejected() {
        let f = random_field(1, 0, 3, 8).unwrap();
        let ext = Extender::new(f, ExtensionConfig::classical(1, 0)).unwrap();
        assert!(matches!(
            ext.derivative(&[2.0], &MultiIndex::new(vec![3])),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn psi_b_examples() {
        let f = single_anchor(1, 0);
        let ext = Extender::new(f, ExtensionConfig::classical(1, 0)).unwrap();
        assert_eq!(ext.p_levels(1.0).unwrap(), -5..=3);
        // δ(8) = 8: p ∈ {1/4, …, 64}
        assert_eq!(ext.p_levels(8.0).unwrap(), -2..=6);
        // x − b = 64 sits on every p-lattice
        assert_eq!(ext.psi_b_with_origin(&[8.0], &[-56.0]).unwrap(), 18.0);
        // x − b = 64/3 stays 1/3 away from every p-lattice
        assert_eq!(ext.psi_b_with_origin(&[8.0], &[8.0 - 64.0 / 3.0]).unwrap(), 9.0);
    }

    #[test]
    fn derivative_matches_finite_differences_in_2d() {
        let f = random_field(2, 1, 6, 21).unwrap();
        let ext = Extender::new(f, ExtensionConfig::classical(2, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = [rng.gen_range(-0.3..1.3), rng.gen_range(-0.3..1.3)];
            let Ok(frame) = ext.frame(&x, 0) else { continue };
            let s = frame.cubes[0].cube.side();
            let h = 1e-4 * 0.125 * s;
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (ext.value(&xp).unwrap() - ext.value(&xm).unwrap()) / (2.0 * h);
                let a = ext.derivative(&x, &MultiIndex::unit(2, i)).unwrap();
                let scale = a.abs().max(fd.abs()).max(1.0);
                assert!((a - fd).abs() <= 1e-6 * scale, "{a} vs {fd}");
            }
        }
    }
}

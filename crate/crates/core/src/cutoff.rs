//! Smooth cutoff functions.
//!
//! `σ` is the exponential glue `σ(x) = h(x+1) / (h(x+1) + h(−x))` with
//! `h(u) = exp(−1/u)` for `u > 0` and `0` otherwise. It is `0` on `(−∞, −1]`,
//! `1` on `[0, ∞)`, nondecreasing and `C^∞`. Derivatives of `h` follow
//! `h^{(j)}(u) = R_j(1/u) e^{−1/u}` with `R_0 = 1` and
//! `R_{j+1}(v) = v² (R_j(v) − R_j'(v))`; those of `σ` come from a truncated
//! series quotient.
//!
//! `ϑ` is the interval cutoff built from `σ` (rising on `[−t, 0]`, falling on
//! `[1, 1+t]`), `Θ` its tensor product, and `φ_Q` the rescaled copy adapted to
//! a cube.

use std::sync::Arc;

use crate::cubes::DyadicCube;
use crate::error::{Error, Result};
use crate::jets::{factorial_f64, MultiIndex, MAX_DEGREE};

/// Below this argument `h` and all its derivatives are returned as exactly
/// zero. At `u = 1e−3` the true values are below `1e−380`.
pub const H_CROSSOVER: f64 = 1e-3;

/// Derivative tables for `σ` up to a fixed order.
#[derive(Debug, Clone)]
pub struct SigmaProfile {
    max_order: usize,
    // r_polys[j][p] is the coefficient of v^p in R_j
    r_polys: Vec<Vec<f64>>,
}

impl SigmaProfile {
    pub fn new(max_order: usize) -> Result<Self> {
        if max_order > MAX_DEGREE {
            return Err(Error::OrderTooHigh {
                order: max_order,
                limit: MAX_DEGREE,
            });
        }
        let mut r_polys = vec![vec![1.0]];
        for j in 0..max_order {
            let r = &r_polys[j];
            // v² R(v) − v² R'(v)
            let mut next = vec![0.0; r.len() + 2];
            for (p, &c) in r.iter().enumerate() {
                next[p + 2] += c;
                if p > 0 {
                    next[p + 1] -= p as f64 * c;
                }
            }
            r_polys.push(next);
        }
        Ok(SigmaProfile { max_order, r_polys })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `h^{(j)}(u)` for `j = 0..out.len()`.
    fn h_derivs(&self, u: f64, out: &mut [f64]) {
        if u <= H_CROSSOVER {
            out.fill(0.0);
            return;
        }
        let v = 1.0 / u;
        let e = (-v).exp();
        for (j, o) in out.iter_mut().enumerate() {
            let poly = &self.r_polys[j];
            let mut acc = 0.0;
            for &c in poly.iter().rev() {
                acc = acc * v + c;
            }
            *o = acc * e;
        }
    }

    /// `σ^{(j)}(x)` for `j = 0..=order`.
    pub fn derivs(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        if order > self.max_order {
            return Err(Error::OrderTooHigh {
                order,
                limit: self.max_order,
            });
        }
        let mut out = vec![0.0; order + 1];
        if x >= 0.0 {
            out[0] = 1.0;
            return Ok(out);
        }
        if x <= -1.0 {
            return Ok(out);
        }
        let k = order + 1;
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        self.h_derivs(x + 1.0, &mut a);
        self.h_derivs(-x, &mut b);
        // Taylor coefficients (divide by j!), with the (−1)^j chain factor on b.
        let fact: Vec<f64> = (0..k).map(factorial_f64).collect();
        let at: Vec<f64> = (0..k).map(|j| a[j] / fact[j]).collect();
        let dt: Vec<f64> = (0..k)
            .map(|j| {
                let bj = if j % 2 == 0 { b[j] } else { -b[j] };
                at[j] + bj / fact[j]
            })
            .collect();
        let mut rt = vec![0.0; k];
        rt[0] = 1.0 / dt[0];
        for j in 1..k {
            let s: f64 = (1..=j).map(|i| dt[i] * rt[j - i]).sum();
            rt[j] = -s * rt[0];
        }
        for j in 0..k {
            let s: f64 = (0..=j).map(|i| at[i] * rt[j - i]).sum();
            out[j] = s * fact[j];
        }
        Ok(out)
    }

    pub fn deriv(&self, x: f64, j: usize) -> Result<f64> {
        Ok(self.derivs(x, j)?[j])
    }

    /// Numerical `sup_x |σ^{(j)}(x)|` from a dense grid on `[−1, 0]`.
    pub fn sup_abs(&self, j: usize) -> Result<f64> {
        const GRID: usize = 20_000;
        let mut best = 0.0f64;
        for i in 0..=GRID {
            let x = -1.0 + i as f64 / GRID as f64;
            best = best.max(self.deriv(x, j)?.abs());
        }
        Ok(best)
    }
}

pub fn sigma_deriv(profile: &SigmaProfile, x: f64, j: usize) -> Result<f64> {
    profile.deriv(x, j)
}

/// Transition width `t` together with the `σ` tables.
#[derive(Debug, Clone)]
pub struct CutoffParams {
    t: f64,
    sigma: Arc<SigmaProfile>,
}

impl CutoffParams {
    pub fn new(t: f64, max_order: usize) -> Result<Self> {
        Self::with_profile(t, Arc::new(SigmaProfile::new(max_order)?))
    }

    pub fn with_profile(t: f64, sigma: Arc<SigmaProfile>) -> Result<Self> {
        if !(t > 0.0 && t < 0.25) {
            return Err(Error::invalid("t", format!("{t} is outside (0, 1/4)")));
        }
        Ok(CutoffParams { t, sigma })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn sigma(&self) -> &SigmaProfile {
        &self.sigma
    }

    pub fn max_order(&self) -> usize {
        self.sigma.max_order()
    }

    /// `ϑ^{(j)}(x)` for `j = 0..=order`.
    pub fn theta1_derivs(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        let t = self.t;
        // For t < 1/2 the rising and falling pieces never overlap, so the
        // midpoint decides which one applies (both are 1 on [0, 1]).
        let (arg, step) = if x <= 0.5 {
            (x / t, 1.0 / t)
        } else {
            ((1.0 - x) / t, -1.0 / t)
        };
        let mut d = self.sigma.derivs(arg, order)?;
        let mut f = 1.0;
        for v in d.iter_mut() {
            *v *= f;
            f *= step;
        }
        Ok(d)
    }

    pub fn theta1_deriv(&self, x: f64, j: usize) -> Result<f64> {
        Ok(self.theta1_derivs(x, j)?[j])
    }

    /// `∂^αΘ(x)` for `Θ(x) = ϑ(x_1)⋯ϑ(x_n)`.
    pub fn theta_n_deriv(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        if x.len() != alpha.dim() {
            return Err(Error::DimensionMismatch {
                expected: alpha.dim(),
                got: x.len(),
            });
        }
        let mut prod = 1.0;
        for (&xi, &ai) in x.iter().zip(alpha.exponents()) {
            prod *= self.theta1_deriv(xi, ai as usize)?;
            if prod == 0.0 {
                break;
            }
        }
        Ok(prod)
    }

    /// `∂^αφ_Q(x)` with `φ_Q(x) = Θ((x − corner)/s)`.
    pub fn phi_q_deriv(&self, x: &[f64], cube: &DyadicCube, alpha: &MultiIndex) -> Result<f64> {
        let s = cube.side();
        let u: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| (xi - cube.lower(i)) / s)
            .collect();
        Ok(self.theta_n_deriv(&u, alpha)? * s.powi(-(alpha.order() as i32)))
    }

    /// `Σ_{a∈Z^n} |∂^αΘ(x − a)|`, evaluated over the finitely many translates
    /// whose support contains `x`.
    pub fn lattice_theta_sum(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        if x.len() != alpha.dim() {
            return Err(Error::DimensionMismatch {
                expected: alpha.dim(),
                got: x.len(),
            });
        }
        let mut prod = 1.0;
        for (&xi, &ai) in x.iter().zip(alpha.exponents()) {
            prod *= self.lattice_theta1_sum(xi, ai as usize)?;
        }
        Ok(prod)
    }

    /// One-dimensional `Σ_{k∈Z} |ϑ^{(j)}(x − k)|`.
    pub fn lattice_theta1_sum(&self, x: f64, j: usize) -> Result<f64> {
        let f = x.floor();
        let mut s = 0.0;
        for k in [f - 1.0, f, f + 1.0] {
            s += self.theta1_deriv(x - k, j)?.abs();
        }
        Ok(s)
    }
}

/// Indicator of `dist(x, Z) ≤ t`.
pub fn psi(x: f64, t: f64) -> f64 {
    if (x - x.round()).abs() <= t {
        1.0
    } else {
        0.0
    }
}

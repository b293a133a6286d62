//! The origin-averaged operator: `⟨F⟩(x)` is the mean of the single-origin
//! extension over origins `b` uniform in `[0, τ)^n`, for a period `τ` of
//! `b ↦ F_b(x)`. The mean is estimated by seeded Monte Carlo.
//!
//! Sample `j` draws `u_j ∈ [0,1)^n` from its own ChaCha stream `j` of the
//! plan's seed, so results do not depend on how samples are scheduled. With
//! common random numbers every query point sees the same `u_j`; otherwise
//! the seed is mixed with the point's coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cutoff::psi;
use crate::error::{Error, Result};
use crate::extension::{is_power_of_two, p_levels, psi_sum, Extender};
use crate::jets::{layout, MultiIndex};

#[derive(Clone, Debug, PartialEq)]
pub struct AveragingPlan {
    pub tau: f64,
    pub samples: usize,
    pub seed: u64,
    pub common_random_numbers: bool,
}

/// Mean and standard error per derivative, graded-lex order.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl AveragingPlan {
    pub fn new(tau: f64, samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::ZeroSamples);
        }
        if !is_power_of_two(tau) {
            return Err(Error::InvalidPeriod { tau, local: f64::NAN });
        }
        Ok(AveragingPlan {
            tau,
            samples,
            seed,
            common_random_numbers: true,
        })
    }

    /// Plan whose period is valid at `x`.
    pub fn for_point(ext: &Extender, x: &[f64], samples: usize, seed: u64) -> Result<Self> {
        Self::new(period_at(ext, x)?, samples, seed)
    }

    /// One period valid at every listed point: the largest local period.
    pub fn for_points(
        ext: &Extender,
        points: &[Vec<f64>],
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut tau: f64 = 0.0;
        for x in points {
            tau = tau.max(period_at(ext, x)?);
        }
        if tau == 0.0 {
            return Err(Error::EmptySet);
        }
        Self::new(tau, samples, seed)
    }

    pub fn independent(mut self) -> Self {
        self.common_random_numbers = false;
        self
    }

    /// Origin of sample `j` at query point `x`.
    pub fn origin(&self, x: &[f64], j: usize) -> Vec<f64> {
        if self.samples == 1 {
            return vec![0.0; x.len()];
        }
        let seed = if self.common_random_numbers {
            self.seed
        } else {
            mix(self.seed, x)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        (0..x.len()).map(|_| self.tau * rng.gen::<f64>()).collect()
    }

    /// Fails unless `τ` is a power-of-two multiple of the local period at `x`.
    pub fn check_period(&self, ext: &Extender, x: &[f64]) -> Result<()> {
        let local = period_at(ext, x)?;
        let ratio = self.tau / local;
        if ratio < 1.0 || !is_power_of_two(ratio) {
            return Err(Error::InvalidPeriod {
                tau: self.tau,
                local,
            });
        }
        Ok(())
    }
}

// splitmix64 over the coordinate bits
fn mix(seed: u64, x: &[f64]) -> u64 {
    let mut h = seed;
    for v in x {
        h ^= (v + 0.0).to_bits();
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// `16·s₀`, with `s₀` the side of the Whitney cube of `x` for origin 0.
pub fn period_at(ext: &Extender, x: &[f64]) -> Result<f64> {
    let zero = vec![0.0; x.len()];
    Ok(16.0 * ext.oracle().whitney_cube_at(x, &zero)?.side())
}

fn mean_and_error(rows: &[Vec<f64>]) -> Estimate {
    let len = rows.first().map_or(0, Vec::len);
    let count = rows.len() as f64;
    let mut mean = vec![0.0; len];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let std_error = if rows.len() < 2 {
        vec![0.0; len]
    } else {
        let mut var = vec![0.0; len];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter()
            .map(|s| (s / (count - 1.0) / count).sqrt())
            .collect()
    };
    Estimate { mean, std_error }
}

/// Averaged `∂^αF(x)` for every `|α| ≤ order`.
pub fn averaged_derivatives(
    ext: &Extender,
    x: &[f64],
    order: usize,
    plan: &AveragingPlan,
) -> Result<Estimate> {
    if plan.samples == 0 {
        return Err(Error::ZeroSamples);
    }
    if let Some(i) = ext.oracle().find(x) {
        if order == 0 {
            let v = ext.field().jet(i).coeffs()[0];
            return Ok(Estimate {
                mean: vec![v],
                std_error: vec![0.0],
            });
        }
        return Err(Error::PointInSet);
    }
    plan.check_period(ext, x)?;
    let rows = (0..plan.samples)
        .into_par_iter()
        .map(|j| ext.derivatives_with_origin(x, &plan.origin(x, j), order))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_and_error(&rows))
}

/// Averaged `∂^αF(x)` as `(mean, std_error)`.
pub fn averaged_extension(
    ext: &Extender,
    x: &[f64],
    alpha: &MultiIndex,
    plan: &AveragingPlan,
) -> Result<(f64, f64)> {
    let est = averaged_derivatives(ext, x, alpha.order(), plan)?;
    let pos = layout(x.len(), alpha.order())
        .position(alpha)
        .ok_or(Error::DimensionMismatch {
            expected: x.len(),
            got: alpha.dim(),
        })?;
    Ok((est.mean[pos], est.std_error[pos]))
}

/// Smallest power of two at least the top of the `p`-bracket at `x`; every
/// `p` in the bracket divides it.
pub fn psi_period(ext: &Extender, x: &[f64]) -> Result<f64> {
    let (delta, _) = ext.oracle().delta(x)?;
    if delta == 0.0 {
        return Err(Error::PointInSet);
    }
    Ok(2f64.powi(*ext.p_levels(delta)?.end()))
}

/// Number of powers of two in the `p`-bracket at `x`.
pub fn p_count(ext: &Extender, x: &[f64]) -> Result<usize> {
    let (delta, _) = ext.oracle().delta(x)?;
    if delta == 0.0 {
        return Err(Error::PointInSet);
    }
    Ok(ext.p_levels(delta)?.count())
}

/// Monte Carlo estimate of `⟨Ψ_[b](x)^k⟩` together with the number of
/// powers of two in the `p`-bracket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiAverage {
    pub mean: f64,
    pub std_error: f64,
    pub p_count: usize,
}

/// `⟨Ψ_[b](x)^k⟩` over `b` uniform in `[0, τ)^n` with `τ` from
/// [`psi_period`], using the extender's `t` and bracket.
pub fn avg_psi_power(
    ext: &Extender,
    x: &[f64],
    k: u32,
    samples: usize,
    seed: u64,
) -> Result<PsiAverage> {
    let (delta, _) = ext.oracle().delta(x)?;
    if delta == 0.0 {
        return Err(Error::PointInSet);
    }
    let cfg = ext.config();
    avg_psi_power_at(x, delta, cfg.t, (cfg.c1p, cfg.c2p), k, samples, seed)
}

/// Same estimate from raw ingredients; `t` is not limited to `(0, 1/4)`.
pub fn avg_psi_power_at(
    x: &[f64],
    delta: f64,
    t: f64,
    bracket: (f64, f64),
    k: u32,
    samples: usize,
    seed: u64,
) -> Result<PsiAverage> {
    if k < 1 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    if !(delta > 0.0) {
        return Err(Error::PointInSet);
    }
    let levels = p_levels(delta, x.len(), bracket.0, bracket.1)?;
    let plan = AveragingPlan {
        tau: 2f64.powi(*levels.end()),
        samples,
        seed,
        common_random_numbers: true,
    };
    let rows = (0..samples)
        .into_par_iter()
        .map(|j| {
            let b = plan.origin(x, j);
            vec![psi_sum(x, &b, t, levels.clone()).powi(k as i32)]
        })
        .collect::<Vec<_>>();
    let est = mean_and_error(&rows);
    Ok(PsiAverage {
        mean: est.mean[0],
        std_error: est.std_error[0],
        p_count: levels.count(),
    })
}

/// Monte Carlo mean of `(1 + ψ(u))^k` over `u` uniform in `[0, 1)`.
pub fn mean_one_dim_psi_power(k: u32, t: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..samples)
        .map(|_| vec![(1.0 + psi(rng.gen::<f64>(), t)).powi(k as i32)])
        .collect();
    let est = mean_and_error(&rows);
    Ok((est.mean[0], est.std_error[0]))
}

//! Dyadic cubes, distance to `E`, and lazy queries into the Whitney
//! decomposition of `E^c`.
//!
//! A dyadic cube for origin `b` is `b + s·([a_1, a_1+1] × ⋯ × [a_n, a_n+1])`
//! with `s = 2^level`. A cube is *admissible* when `diam(Q) ≤ dist(Q, E)`.
//! Admissibility passes to subcubes, so along the chain of dyadic ancestors of
//! a point the admissible cubes form an initial segment; the Whitney cube of
//! the point is the last one. Equivalently, `Q` is a Whitney cube iff it is
//! admissible and its parent is not. This gives
//! `diam(Q) ≤ dist(Q, E) < 4·diam(Q)` for every Whitney cube.
//!
//! The partition is never materialised: every query touches only the
//! handful of levels and anchors near the query point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEVEL_MIN: i32 = -40;
pub const LEVEL_MAX: i32 = 40;

/// `2^level`, exact for the supported range.
pub fn dyadic(level: i32) -> f64 {
    2f64.powi(level)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicCube {
    level: i32,
    anchor: Vec<i64>,
    origin: Vec<f64>,
}

impl DyadicCube {
    pub fn new(level: i32, anchor: Vec<i64>, origin: Vec<f64>) -> Self {
        debug_assert_eq!(anchor.len(), origin.len());
        DyadicCube {
            level,
            anchor,
            origin,
        }
    }

    /// The level-`level` cube whose half-open box `[lower, upper)` holds `x`.
    pub fn containing(x: &[f64], level: i32, origin: &[f64]) -> Self {
        let s = dyadic(level);
        let anchor = x
            .iter()
            .zip(origin)
            .map(|(xi, bi)| ((xi - bi) / s).floor() as i64)
            .collect();
        DyadicCube::new(level, anchor, origin.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn anchor(&self) -> &[i64] {
        &self.anchor
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn side(&self) -> f64 {
        dyadic(self.level)
    }

    pub fn diam(&self) -> f64 {
        self.side() * (self.dim() as f64).sqrt()
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.origin[i] + self.anchor[i] as f64 * self.side()
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.origin[i] + (self.anchor[i] + 1) as f64 * self.side()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.origin[i] + (self.anchor[i] as f64 + 0.5) * self.side())
            .collect()
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube::new(
            self.level + 1,
            self.anchor.iter().map(|a| a.div_euclid(2)).collect(),
            self.origin.clone(),
        )
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower(i) && x[i] <= self.upper(i))
    }

    /// Membership in the closed expanded cube `Q*` of side `s(1 + 2t)`.
    pub fn expanded_contains(&self, x: &[f64], t: f64) -> bool {
        let pad = t * self.side();
        (0..self.dim()).all(|i| x[i] >= self.lower(i) - pad && x[i] <= self.upper(i) + pad)
    }

    /// Squared Euclidean distance from `p` to the closed box.
    pub fn box_distance_sq(&self, p: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            let lo = self.lower(i);
            let hi = self.upper(i);
            let d = if pi < lo {
                lo - pi
            } else if pi > hi {
                pi - hi
            } else {
                0.0
            };
            acc += d * d;
        }
        acc
    }

    pub fn box_distance(&self, p: &[f64]) -> f64 {
        self.box_distance_sq(p).sqrt()
    }

    /// Same level and the same closed box up to `tol` in every corner
    /// coordinate (origins and anchors may differ).
    pub fn same_point_set(&self, other: &DyadicCube, tol: f64) -> bool {
        self.level == other.level
            && self.dim() == other.dim()
            && (0..self.dim()).all(|i| (self.lower(i) - other.lower(i)).abs() <= tol)
    }

    /// Interiors of the two boxes overlap.
    pub fn interiors_overlap(&self, other: &DyadicCube) -> bool {
        (0..self.dim())
            .all(|i| self.lower(i) < other.upper(i) && other.lower(i) < self.upper(i))
    }

    fn sort_key(&self) -> (i32, &[i64]) {
        (self.level, &self.anchor)
    }
}

/// A Whitney cube reached by a support query, with its distance to `E` and
/// the index of its anchor point `p_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportCube {
    pub cube: DyadicCube,
    pub dist_to_e: f64,
    pub anchor_point: usize,
}

/// Row of the `decompose` dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub level: i32,
    pub anchor: Vec<i64>,
    pub dist_to_e: f64,
}

/// Exact nearest-point queries against a finite set, by linear scan.
/// Ties resolve to the smallest index.
#[derive(Clone, Debug)]
pub struct DistanceOracle {
    n: usize,
    coords: Vec<f64>,
}

impl DistanceOracle {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let n = first.len();
        if n == 0 {
            return Err(Error::invalid("n", "points must have at least one coordinate"));
        }
        let mut coords = Vec::with_capacity(n * points.len());
        for p in points {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Ok(DistanceOracle { n, coords })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.n)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }

    /// `(dist(x, E), index of the nearest point)`.
    pub fn delta(&self, x: &[f64]) -> Result<(f64, usize)> {
        self.check_dim(x.len())?;
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (i, p) in self.points().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best {
                best = d;
                arg = i;
            }
        }
        Ok((best.sqrt(), arg))
    }

    /// Index of the point of `E` equal to `x`, if any.
    pub fn find(&self, x: &[f64]) -> Option<usize> {
        self.points().position(|p| p == x)
    }

    /// `(dist(Q, E), index of a nearest point)`; the index is the anchor
    /// point `p_k` of `Q`.
    pub fn cube_distance(&self, cube: &DyadicCube) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (i, p) in self.points().enumerate() {
            let d = cube.box_distance_sq(p);
            if d < best {
                best = d;
                arg = i;
            }
        }
        (best.sqrt(), arg)
    }

    pub fn anchor_point(&self, cube: &DyadicCube) -> usize {
        self.cube_distance(cube).1
    }

    /// `diam(Q) ≤ dist(Q, E)`, scanning from `hint` and stopping at the first
    /// point closer than the diameter.
    fn admissible_from(&self, cube: &DyadicCube, hint: usize) -> bool {
        let diam_sq = cube.side() * cube.side() * self.n as f64;
        let len = self.len();
        (0..len).all(|k| cube.box_distance_sq(self.point((hint + k) % len)) >= diam_sq)
    }

    pub fn is_admissible(&self, cube: &DyadicCube) -> bool {
        self.admissible_from(cube, 0)
    }

    pub fn is_whitney(&self, cube: &DyadicCube) -> bool {
        self.admissible_from(cube, 0) && !self.admissible_from(&cube.parent(), 0)
    }

    /// The Whitney cube (for origin `b`) whose half-open box holds `x`.
    pub fn whitney_cube_at(&self, x: &[f64], origin: &[f64]) -> Result<DyadicCube> {
        self.check_dim(origin.len())?;
        let (delta, near) = self.delta(x)?;
        if delta == 0.0 {
            return Err(Error::PointInSet);
        }
        // Two levels above floor(log2(δ/√n)) the cube has diam > 2δ and
        // cannot be admissible.
        let top = (delta / (self.n as f64).sqrt()).log2().floor() as i64 + 2;
        if top > LEVEL_MAX as i64 + 1 {
            return Err(Error::LevelOutOfRange { level: top as i32 });
        }
        let mut level = top as i32 - 1;
        loop {
            if level < LEVEL_MIN {
                return Err(Error::LevelOutOfRange { level });
            }
            let q = DyadicCube::containing(x, level, origin);
            if self.admissible_from(&q, near) {
                return Ok(q);
            }
            level -= 1;
        }
    }

    /// Every Whitney cube whose closed `Q*` contains `x`, sorted by
    /// `(level, anchor)`. Checks the cube-geometry brackets on the way out.
    pub fn cubes_covering_support(
        &self,
        x: &[f64],
        origin: &[f64],
        t: f64,
    ) -> Result<Vec<SupportCube>> {
        let home = self.whitney_cube_at(x, origin)?;
        let (delta, near) = self.delta(x)?;
        let n = self.n;
        let mut found = Vec::new();
        let mut candidates: Vec<Vec<i64>> = vec![Vec::new(); n];
        for level in (home.level - 2)..=(home.level + 2) {
            let s = dyadic(level);
            for i in 0..n {
                let u = (x[i] - origin[i]) / s;
                let lo = (u - 1.0 - t).ceil() as i64;
                let hi = (u + t).floor() as i64;
                candidates[i].clear();
                candidates[i].extend(lo..=hi);
            }
            if candidates.iter().any(Vec::is_empty) {
                continue;
            }
            let mut pick = vec![0usize; n];
            loop {
                let anchor = (0..n).map(|i| candidates[i][pick[i]]).collect();
                let cube = DyadicCube::new(level, anchor, origin.to_vec());
                if cube.expanded_contains(x, t)
                    && self.admissible_from(&cube, near)
                    && !self.admissible_from(&cube.parent(), near)
                {
                    let (dist_to_e, anchor_point) = self.cube_distance(&cube);
                    found.push(SupportCube {
                        cube,
                        dist_to_e,
                        anchor_point,
                    });
                }
                // odometer
                let mut i = 0;
                loop {
                    if i == n {
                        break;
                    }
                    pick[i] += 1;
                    if pick[i] < candidates[i].len() {
                        break;
                    }
                    pick[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
        }
        found.sort_by(|a, b| a.cube.sort_key().cmp(&b.cube.sort_key()));
        check_support_geometry(&found, delta, n)?;
        Ok(found)
    }

    /// All Whitney cubes whose interior meets the box `[lo, hi]`, down to
    /// `min_level`. Enumerative; intended for `n ≤ 3`.
    pub fn enumerate_whitney_cubes(
        &self,
        lo: &[f64],
        hi: &[f64],
        origin: &[f64],
        min_level: i32,
        max_cubes: usize,
    ) -> Result<Vec<SupportCube>> {
        self.check_dim(lo.len())?;
        self.check_dim(hi.len())?;
        self.check_dim(origin.len())?;
        if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("box", "each lower bound must be below its upper bound"));
        }
        let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half_diag = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| 0.25 * (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        let max_delta = self.delta(&center)?.0 + half_diag;
        let top = ((max_delta / (self.n as f64).sqrt()).log2().ceil() as i32 + 1)
            .clamp(LEVEL_MIN, LEVEL_MAX);
        let s = dyadic(top);
        let ranges: Vec<(i64, i64)> = (0..self.n)
            .map(|i| {
                let a = ((lo[i] - origin[i]) / s).floor() as i64;
                let b = ((hi[i] - origin[i]) / s).ceil() as i64 - 1;
                (a, b)
            })
            .collect();
        let mut stack = Vec::new();
        let mut anchor: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            stack.push(DyadicCube::new(top, anchor.clone(), origin.to_vec()));
            let mut i = 0;
            while i < self.n {
                anchor[i] += 1;
                if anchor[i] <= ranges[i].1 {
                    break;
                }
                anchor[i] = ranges[i].0;
                i += 1;
            }
            if i == self.n {
                break;
            }
        }
        let bounds = DyadicBox { lo, hi };
        let mut out = Vec::new();
        while let Some(q) = stack.pop() {
            if !bounds.meets(&q) {
                continue;
            }
            if self.is_admissible(&q) {
                let (dist_to_e, anchor_point) = self.cube_distance(&q);
                out.push(SupportCube {
                    cube: q,
                    dist_to_e,
                    anchor_point,
                });
                if out.len() > max_cubes {
                    return Err(Error::CapExceeded {
                        what: "decomposition cubes",
                        value: out.len(),
                        cap: max_cubes,
                    });
                }
                continue;
            }
            if q.level <= min_level {
                continue;
            }
            for mask in 0..(1u32 << self.n) {
                let child_anchor = q
                    .anchor
                    .iter()
                    .enumerate()
                    .map(|(i, a)| 2 * a + ((mask >> i) & 1) as i64)
                    .collect();
                stack.push(DyadicCube::new(q.level - 1, child_anchor, origin.to_vec()));
            }
        }
        out.sort_by(|a, b| a.cube.sort_key().cmp(&b.cube.sort_key()));
        Ok(out)
    }
}

struct DyadicBox<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
}

impl DyadicBox<'_> {
    fn meets(&self, q: &DyadicCube) -> bool {
        (0..q.dim()).all(|i| q.lower(i) < self.hi[i] && q.upper(i) > self.lo[i])
    }
}

// Runtime brackets: diam ≤ dist ≤ 4 diam, neighbouring side ratio within
// [1/4, 4], and δ(x)/(s√n) ∈ [1/2, 11/2].
fn check_support_geometry(found: &[SupportCube], delta: f64, n: usize) -> Result<()> {
    let sqrt_n = (n as f64).sqrt();
    for c in found {
        let diam = c.cube.diam();
        if !(diam <= c.dist_to_e && c.dist_to_e <= 4.0 * diam) {
            return Err(Error::GeometryViolation {
                check: "whitney_bracket",
                detail: format!("diam {diam}, dist {}", c.dist_to_e),
            });
        }
        let ratio = delta / (c.cube.side() * sqrt_n);
        if !(0.5..=5.5).contains(&ratio) {
            return Err(Error::GeometryViolation {
                check: "delta_bracket",
                detail: format!("δ/(s√n) = {ratio}"),
            });
        }
    }
    if let (Some(lo), Some(hi)) = (
        found.iter().map(|c| c.cube.level).min(),
        found.iter().map(|c| c.cube.level).max(),
    ) {
        if hi - lo > 2 {
            return Err(Error::GeometryViolation {
                check: "side_ratio",
                detail: format!("levels {lo}..{hi}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn oracle(points: &[&[f64]]) -> DistanceOracle {
        DistanceOracle::new(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    // Brute force over levels: the largest level whose cube containing x is
    // admissible, computed independently of the descent.
    fn brute_whitney_level(e: &DistanceOracle, x: &[f64], origin: &[f64]) -> i32 {
        let mut best = None;
        for level in -30..=10 {
            let q = DyadicCube::containing(x, level, origin);
            let d = e
                .points()
                .map(|p| q.box_distance(p))
                .fold(f64::INFINITY, f64::min);
            if q.diam() <= d {
                best = Some(level);
            }
        }
        best.unwrap()
    }

    #[test]
    fn delta_examples() {
        let e = oracle(&[&[0.0]]);
        assert_eq!(e.delta(&[0.0]).unwrap(), (0.0, 0));
        assert_eq!(e.delta(&[1.5]).unwrap(), (1.5, 0));
        assert!(DistanceOracle::new(&[]).is_err());
    }

    #[test]
    fn delta_ties_go_to_first_index() {
        let e = oracle(&[&[-1.0], &[1.0]]);
        assert_eq!(e.delta(&[0.0]).unwrap().1, 0);
    }

    #[test]
    fn delta_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let e = DistanceOracle::new(&pts).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let mut best = (f64::INFINITY, 0);
            for (i, p) in pts.iter().enumerate() {
                let d = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if d < best.0 {
                    best = (d, i);
                }
            }
            assert_eq!(e.delta(&x).unwrap(), best);
        }
    }

    #[test]
    fn whitney_cube_examples() {
        let e = oracle(&[&[0.0]]);
        let q = e.whitney_cube_at(&[1.5], &[0.0]).unwrap();
        assert_eq!((q.level(), q.anchor()), (0, &[1i64][..]));
        assert_eq!((q.lower(0), q.upper(0)), (1.0, 2.0));

        // [1/16, 1/8]: diam = dist = 1/16, parent [0, 1/8] touches E
        let q = e.whitney_cube_at(&[0.1], &[0.0]).unwrap();
        assert_eq!(q.level(), -4);
        assert!(q.contains(&[0.1]));
        assert!(q.diam() <= e.cube_distance(&q).0);
        assert_eq!(q.level(), brute_whitney_level(&e, &[0.1], &[0.0]));

        assert!(matches!(e.whitney_cube_at(&[0.0], &[0.0]), Err(Error::PointInSet)));
        assert!(matches!(
            e.whitney_cube_at(&[1e-15], &[0.0]),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn whitney_cube_matches_brute_force_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let pts: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let e = DistanceOracle::new(&pts).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.5)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
                let q = e.whitney_cube_at(&x, &b).unwrap();
                assert_eq!(q.level(), brute_whitney_level(&e, &x, &b));
                assert!(e.is_whitney(&q));
            }
        }
    }

    #[test]
    fn whitney_cube_periodic_in_origin() {
        let e = oracle(&[&[0.0, 0.0], &[0.7, 0.2]]);
        let x = [1.3, 0.9];
        let b = [0.123, -0.4];
        let q = e.whitney_cube_at(&x, &b).unwrap();
        for i in 0..2 {
            let mut shifted = b.to_vec();
            shifted[i] += 16.0 * q.side();
            let q2 = e.whitney_cube_at(&x, &shifted).unwrap();
            assert!(q.same_point_set(&q2, 1e-12));
        }
    }

    #[test]
    fn origin_equivariance_is_exact() {
        let e = oracle(&[&[0.25, 0.5]]);
        let moved = oracle(&[&[0.25 + 0.5, 0.5 - 0.25]]);
        let x = [1.0, 1.375];
        let v = [0.5, -0.25];
        let b = [0.0, 0.0];
        let q = e.whitney_cube_at(&x, &b).unwrap();
        let xs = [x[0] + v[0], x[1] + v[1]];
        let q2 = moved.whitney_cube_at(&xs, &v).unwrap();
        assert_eq!(q.level(), q2.level());
        assert_eq!(q.anchor(), q2.anchor());
    }

    #[test]
    fn support_of_center_point_is_single_cube() {
        let e = oracle(&[&[0.0]]);
        let t = 0.125;
        let found = e.cubes_covering_support(&[1.5], &[0.0], t).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].cube.anchor(), &[1]);
        assert_eq!(found[0].anchor_point, 0);
    }

    // Exhaustive enumeration of all dyadic cubes at levels −2..=2 meeting
    // [0, 4]: keep the Whitney ones whose Q* holds x.
    #[test]
    fn support_near_boundary_matches_exhaustive_search() {
        let e = oracle(&[&[0.0]]);
        let t = 0.125;
        let x = [1.0 + t / 2.0];
        let mut expect = Vec::new();
        for level in -2..=2 {
            let s = dyadic(level);
            let count = (4.0 / s) as i64;
            for a in 0..count {
                let q = DyadicCube::new(level, vec![a], vec![0.0]);
                let d = q.box_distance(&[0.0]);
                let pd = q.parent().box_distance(&[0.0]);
                let whitney = q.diam() <= d && !(q.parent().diam() <= pd);
                if whitney && q.expanded_contains(&x, t) {
                    expect.push((level, a));
                }
            }
        }
        let got: Vec<_> = e
            .cubes_covering_support(&x, &[0.0], t)
            .unwrap()
            .iter()
            .map(|c| (c.cube.level(), c.cube.anchor()[0]))
            .collect();
        assert_eq!(got, expect);
        // [1,2] and its left neighbour [1/2, 1]
        assert_eq!(got, vec![(-1, 1), (0, 1)]);
    }

    #[test]
    fn anchor_point_examples() {
        let e = oracle(&[&[0.0]]);
        assert_eq!(e.anchor_point(&DyadicCube::new(0, vec![1], vec![0.0])), 0);
        let e = oracle(&[&[0.0, 0.0], &[10.0, 0.0]]);
        assert_eq!(e.anchor_point(&DyadicCube::new(-1, vec![1, 1], vec![0.0, 0.0])), 0);
        assert_eq!(e.anchor_point(&DyadicCube::new(1, vec![5, 0], vec![0.0, 0.0])), 1);
    }

    #[test]
    fn anchor_point_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..2).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let e = DistanceOracle::new(&pts).unwrap();
        for _ in 0..200 {
            let level = rng.gen_range(-5..1);
            let anchor = (0..2).map(|_| rng.gen_range(-40..40)).collect();
            let q = DyadicCube::new(level, anchor, vec![0.1, 0.2]);
            let mut best = (f64::INFINITY, 0);
            for (i, p) in pts.iter().enumerate() {
                let d = q.box_distance(p);
                if d < best.0 {
                    best = (d, i);
                }
            }
            assert_eq!(e.anchor_point(&q), best.1);
        }
    }

    #[test]
    fn covering_cubes_satisfy_brackets_and_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=4 {
            let pts: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let e = DistanceOracle::new(&pts).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.5)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.5)).collect();
                let found = e.cubes_covering_support(&x, &b, 0.2).unwrap();
                assert!(!found.is_empty());
                let qx = e.whitney_cube_at(&x, &b).unwrap();
                assert!(found.iter().any(|c| c.cube == qx));
                let qy = e.whitney_cube_at(&y, &b).unwrap();
                assert!(qx == qy || !qx.interiors_overlap(&qy));
            }
        }
    }

    #[test]
    fn enumeration_contains_unit_square_example() {
        let e = oracle(&[&[0.0, 0.0]]);
        let cubes = e
            .enumerate_whitney_cubes(&[0.0, 0.0], &[4.0, 4.0], &[0.0, 0.0], -3, 100_000)
            .unwrap();
        assert!(cubes
            .iter()
            .any(|c| c.cube.level() == 0 && c.cube.anchor() == [1, 1]));
        for c in &cubes {
            assert!(e.is_whitney(&c.cube));
            assert!(c.cube.level() >= -3);
        }
        // interiors pairwise disjoint
        for (i, a) in cubes.iter().enumerate() {
            for b in &cubes[i + 1..] {
                assert!(!a.cube.interiors_overlap(&b.cube));
            }
        }
    }
}

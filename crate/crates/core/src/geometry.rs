//! Parabolic balls and cylinders: membership, volumes, the hat dilation,
//! the intersection constructions used in the covering arguments, the
//! Vitali-type cover, and cell-counting / Monte Carlo measure oracles.

use std::f64::consts::{PI, SQRT_2};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{dist2, norm};

/// (√2 − 1)/4, the radius factor of the intersection cylinder.
pub const GAMMA: f64 = (SQRT_2 - 1.0) / 4.0;

/// Slack used when comparing against closed sets built from floating-point data.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn origin(n: usize) -> Self {
        Self { x: vec![0.0; n], t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Up,
    Down,
}

/// PB^θ_T(x₀,t₀): θ|x−x₀|² ≤ ±(t−t₀) ≤ T, the sign fixed by the orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicBall {
    pub vertex: SpaceTimePoint,
    pub height: f64,
    pub opening: f64,
    pub orientation: Orientation,
}

impl ParabolicBall {
    pub fn new(vertex: SpaceTimePoint, height: f64, opening: f64, orientation: Orientation) -> Result<Self> {
        let n = vertex.dim();
        if !(1..=3).contains(&n) {
            return domain(format!("dimension {n} not in 1..=3"));
        }
        if !vertex.is_finite() {
            return domain("non-finite vertex");
        }
        if !(height > 0.0 && height.is_finite()) {
            return domain(format!("height must be positive, got {height}"));
        }
        if !(opening > 0.0 && opening.is_finite()) {
            return domain(format!("opening must be positive, got {opening}"));
        }
        Ok(Self { vertex, height, opening, orientation })
    }

    pub fn up(vertex: SpaceTimePoint, height: f64, opening: f64) -> Result<Self> {
        Self::new(vertex, height, opening, Orientation::Up)
    }

    pub fn down(vertex: SpaceTimePoint, height: f64, opening: f64) -> Result<Self> {
        Self::new(vertex, height, opening, Orientation::Down)
    }

    pub fn dim(&self) -> usize {
        self.vertex.dim()
    }

    /// Signed elapsed time from the vertex into the ball.
    fn elapsed(&self, t: f64) -> f64 {
        match self.orientation {
            Orientation::Up => t - self.vertex.t,
            Orientation::Down => self.vertex.t - t,
        }
    }

    pub fn contains_coords(&self, x: &[f64], t: f64) -> bool {
        self.contains_coords_tol(x, t, 0.0)
    }

    pub fn contains_coords_tol(&self, x: &[f64], t: f64, tol: f64) -> bool {
        let e = self.elapsed(t);
        e <= self.height + tol && self.opening * dist2(x, &self.vertex.x) <= e + tol
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        self.contains_coords(&p.x, p.t)
    }

    pub fn contains_tol(&self, p: &SpaceTimePoint, tol: f64) -> bool {
        self.contains_coords_tol(&p.x, p.t, tol)
    }

    /// Closed time interval covered by the ball.
    pub fn time_range(&self) -> (f64, f64) {
        match self.orientation {
            Orientation::Up => (self.vertex.t, self.vertex.t + self.height),
            Orientation::Down => (self.vertex.t - self.height, self.vertex.t),
        }
    }

    /// Radius of the spatial slice at time t, if t lies in the ball's time range.
    pub fn slice_radius(&self, t: f64) -> Option<f64> {
        let e = self.elapsed(t);
        (e >= 0.0 && e <= self.height).then(|| (e / self.opening).sqrt())
    }

    /// Radius of the widest slice.
    pub fn max_radius(&self) -> f64 {
        (self.height / self.opening).sqrt()
    }

    pub fn volume(&self) -> f64 {
        pb_volume(self)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let r = self.max_radius();
        let (t0, t1) = self.time_range();
        let mut lo: Vec<f64> = self.vertex.x.iter().map(|c| c - r).collect();
        let mut hi: Vec<f64> = self.vertex.x.iter().map(|c| c + r).collect();
        lo.push(t0);
        hi.push(t1);
        BoundingBox { lo, hi }
    }

    /// Uniform sample from the ball.
    pub fn sample<R: RngExt + ?Sized>(&self, rng: &mut R) -> SpaceTimePoint {
        let n = self.dim() as f64;
        // slice volume grows like e^{n/2}, so the cdf of e is (e/T)^{1+n/2}
        let u: f64 = rng.random();
        let e = self.height * u.powf(2.0 / (n + 2.0));
        let t = match self.orientation {
            Orientation::Up => self.vertex.t + e,
            Orientation::Down => self.vertex.t - e,
        };
        let x = sample_in_ball(rng, &self.vertex.x, (e / self.opening).sqrt());
        SpaceTimePoint { x, t }
    }
}

/// Uniform point in the closed Euclidean ball B_r(c).
pub fn sample_in_ball<R: RngExt + ?Sized>(rng: &mut R, c: &[f64], r: f64) -> Vec<f64> {
    let n = c.len();
    let dir: Vec<f64> = loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let l = norm(&g);
        if l > 1e-300 {
            break g.into_iter().map(|v| v / l).collect();
        }
    };
    let v: f64 = rng.random();
    let rad = r * v.powf(1.0 / n as f64);
    c.iter().zip(dir).map(|(ci, di)| ci + rad * di).collect()
}

/// Q_r(x,t) = B_r(x) × (t − r², t].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: Vec<f64>,
    pub top_time: f64,
    pub radius: f64,
}

impl Cylinder {
    pub fn new(center: Vec<f64>, top_time: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("cylinder radius must be positive, got {radius}"));
        }
        Ok(Self { center, top_time, radius })
    }

    /// Q_r centered at the origin with top time 0.
    pub fn centered(n: usize, radius: f64) -> Self {
        Self { center: vec![0.0; n], top_time: 0.0, radius }
    }

    pub fn unit(n: usize) -> Self {
        Self::centered(n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn bottom_time(&self) -> f64 {
        self.top_time - self.radius * self.radius
    }

    /// Membership in the closure Q̄_r, with slack `tol`.
    pub fn contains_coords_tol(&self, x: &[f64], t: f64, tol: f64) -> bool {
        t <= self.top_time + tol
            && t >= self.bottom_time() - tol
            && dist2(x, &self.center).sqrt() <= self.radius + tol
    }

    pub fn contains_coords(&self, x: &[f64], t: f64) -> bool {
        self.contains_coords_tol(x, t, MEMBERSHIP_TOL)
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        self.contains_coords(&p.x, p.t)
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32) * self.radius * self.radius
    }

    pub fn sample<R: RngExt + ?Sized>(&self, rng: &mut R) -> SpaceTimePoint {
        let x = sample_in_ball(rng, &self.center, self.radius);
        let s: f64 = rng.random();
        SpaceTimePoint { x, t: self.top_time - s * self.radius * self.radius }
    }

    /// Whether the whole ball lies in the closed cylinder.
    pub fn contains_ball(&self, ball: &ParabolicBall, tol: f64) -> bool {
        let (t0, t1) = ball.time_range();
        t1 <= self.top_time + tol
            && t0 >= self.bottom_time() - tol
            && dist2(&ball.vertex.x, &self.center).sqrt() + ball.max_radius() <= self.radius + tol
    }
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// (2ω_n/(n+2)) T^{1+n/2} θ^{−n/2}.
pub fn pb_volume(ball: &ParabolicBall) -> f64 {
    let n = ball.dim() as f64;
    2.0 * unit_ball_volume(ball.dim()) / (n + 2.0)
        * ball.height.powf(1.0 + 0.5 * n)
        * ball.opening.powf(-0.5 * n)
}

pub fn pb_contains(ball: &ParabolicBall, p: &SpaceTimePoint) -> Result<bool> {
    if ball.dim() != p.dim() {
        return domain("dimension mismatch");
    }
    Ok(ball.contains(p))
}

/// η₂ = 4^{−(1+n/2)}(√2+1)^{−n}, the volume ratio of a ball to its hat.
pub fn eta2(n: usize) -> f64 {
    let nf = n as f64;
    4f64.powf(-(1.0 + 0.5 * nf)) * (SQRT_2 + 1.0).powf(-nf)
}

/// PB^{θ/(√2+1)²}_{4T}(x, t − 3T) for an up-ball PB^θ_T(x,t).
pub fn hat(ball: &ParabolicBall) -> Result<ParabolicBall> {
    if ball.orientation != Orientation::Up {
        return domain("hat is defined for up-balls only");
    }
    let s = SQRT_2 + 1.0;
    ParabolicBall::up(
        SpaceTimePoint::new(ball.vertex.x.clone(), ball.vertex.t - 3.0 * ball.height),
        4.0 * ball.height,
        ball.opening / (s * s),
    )
}

/// θ = (1+t)/(1−|x|)², the smallest opening with PB^{−θ}_{1+t}(x,t) ⊆ Q̄₁.
pub fn min_opening(x: &[f64], t: f64) -> Result<f64> {
    let r = norm(x);
    if r >= 1.0 {
        return domain(format!("|x| = {r} must be < 1"));
    }
    if !(t > -1.0 && t <= 0.0) {
        return domain(format!("t = {t} must lie in (-1, 0]"));
    }
    Ok((1.0 + t) / ((1.0 - r) * (1.0 - r)))
}

/// The down-ball of minimal opening reaching the bottom of Q₁.
pub fn min_opening_ball(x: &[f64], t: f64) -> Result<ParabolicBall> {
    let theta = min_opening(x, t)?;
    ParabolicBall::down(SpaceTimePoint::new(x.to_vec(), t), 1.0 + t, theta)
}

/// Cylinder Q_r(x₂, t₂) placed inside the intersection of a down-ball and an up-ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionCylinder {
    pub cylinder: Cylinder,
    /// Radius of the down-ball slice at t₂, in original units.
    pub r0: f64,
    /// Radius of the up-ball slice at t₂.
    pub r1: f64,
    /// Inradius of the lens formed by the two slices.
    pub r2: f64,
    /// The guaranteed lower bound γ√(T/θ).
    pub lower_bound: f64,
}

/// Places a cylinder in PB^{−θ}_{T₀}(x₀,t₀) ∩ PB^{θ}_{T}(x₁,t₁) for a point (x₁,t₁) of the down-ball.
///
/// The cylinder sits at time t₂ = t₁ + T/2, where both slices are discs. Its center is the center
/// of the largest disc inscribed in their intersection; when one disc contains the other that is
/// the center of the smaller disc.
pub fn intersection_cylinder(pb_down: &ParabolicBall, p1: &SpaceTimePoint, t_height: f64) -> Result<IntersectionCylinder> {
    if pb_down.orientation != Orientation::Down {
        return domain("intersection_cylinder expects a down-ball");
    }
    if pb_down.dim() != p1.dim() {
        return domain("dimension mismatch");
    }
    let theta = pb_down.opening;
    if theta < 0.75 {
        return domain(format!("opening {theta} below 3/4"));
    }
    if !pb_down.contains_tol(p1, MEMBERSHIP_TOL) {
        return domain("p1 is not in the down-ball");
    }
    let lag = pb_down.vertex.t - p1.t;
    if !(t_height > 0.0 && t_height <= lag * (1.0 + 1e-12)) {
        return domain(format!("need 0 < T <= t0 - t1 = {lag}, got T = {t_height}"));
    }
    let t_height = t_height.min(lag);
    let x0 = &pb_down.vertex.x;
    let x1 = &p1.x;
    let r0 = ((lag - 0.5 * t_height) / theta).sqrt();
    let r1 = (t_height / (4.0 * theta)).sqrt();
    let d = dist2(x0, x1).sqrt();
    let lens = 0.5 * (r0 + r1 - d);
    let (center, r2) = if d == 0.0 {
        (x0.clone(), r0.min(r1))
    } else if lens <= r0.min(r1) {
        let delta = (r0 - lens) / d;
        (x0.iter().zip(x1).map(|(a, b)| (1.0 - delta) * a + delta * b).collect(), lens)
    } else if r1 <= r0 {
        (x1.clone(), r1)
    } else {
        (x0.clone(), r0)
    };
    let r = r2.min(0.5 * t_height.sqrt());
    Ok(IntersectionCylinder {
        cylinder: Cylinder::new(center, p1.t + 0.5 * t_height, r)?,
        r0,
        r1,
        r2,
        lower_bound: GAMMA * (t_height / theta).sqrt(),
    })
}

/// The slab B_{r/2}(x₂) × [−1, −1+s] common to two minimal-opening down-balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub center: Vec<f64>,
    /// The lens inradius r; the slab's spatial radius is r/2.
    pub r: f64,
    /// Height above t = −1.
    pub s: f64,
    pub volume: f64,
}

impl Slab {
    pub fn contains_coords(&self, x: &[f64], t: f64) -> bool {
        t >= -1.0 && t <= -1.0 + self.s && dist2(x, &self.center).sqrt() <= 0.5 * self.r
    }

    pub fn sample<R: RngExt + ?Sized>(&self, rng: &mut R) -> SpaceTimePoint {
        let x = sample_in_ball(rng, &self.center, 0.5 * self.r);
        let u: f64 = rng.random();
        SpaceTimePoint { x, t: -1.0 + u * self.s }
    }
}

fn in_q_bar(p: &SpaceTimePoint, r: f64) -> bool {
    norm(&p.x) <= r + MEMBERSHIP_TOL && p.t <= MEMBERSHIP_TOL && p.t >= -r * r - MEMBERSHIP_TOL
}

/// Common slab of two balls produced by [`min_opening_ball`] with vertices in Q̄_{11/24}.
pub fn common_slab(pb0: &ParabolicBall, pb1: &ParabolicBall) -> Result<Slab> {
    for b in [pb0, pb1] {
        if !in_q_bar(&b.vertex, 11.0 / 24.0) {
            return domain(format!("vertex {:?} outside the closed cylinder of radius 11/24", b.vertex));
        }
    }
    common_slab_unchecked(pb0, pb1)
}

/// The slab construction without the vertex-location precondition.
///
/// Both balls must still be minimal-opening balls reaching t = −1.
pub fn common_slab_unchecked(pb0: &ParabolicBall, pb1: &ParabolicBall) -> Result<Slab> {
    for b in [pb0, pb1] {
        if b.orientation != Orientation::Down {
            return domain("common_slab expects down-balls");
        }
        let expected = min_opening(&b.vertex.x, b.vertex.t)?;
        if (b.opening - expected).abs() > 1e-9 * expected || (b.height - (1.0 + b.vertex.t)).abs() > 1e-12 {
            return domain("balls must be minimal-opening balls reaching t = -1");
        }
    }
    if pb0.dim() != pb1.dim() {
        return domain("dimension mismatch");
    }
    let (x0, x1) = (&pb0.vertex.x, &pb1.vertex.x);
    let r0 = 1.0 - norm(x0);
    let r1 = 1.0 - norm(x1);
    let d = dist2(x0, x1).sqrt();
    let (center, r) = if d == 0.0 {
        (x0.clone(), r0.min(r1))
    } else {
        let r = (0.5 * (r0 + r1 - d)).min(r0).min(r1);
        let c = x0.iter().zip(x1).map(|(a, b)| ((r1 - r) * a + (r0 - r) * b) / d).collect();
        (c, r)
    };
    // the slab's worst point over B_{r/2}(x₂) sits at distance rᵢ − r/2 from xᵢ
    let s = [(pb0, r0), (pb1, r1)]
        .iter()
        .map(|(b, ri)| {
            let reach = dist2(&center, &b.vertex.x).sqrt() + 0.5 * r;
            (1.0 + b.vertex.t) * (1.0 - (reach / ri).powi(2))
        })
        .fold(f64::INFINITY, f64::min);
    if !(s > 0.0) {
        return Err(Error::Domain("degenerate slab".into()));
    }
    let n = pb0.dim();
    let volume = unit_ball_volume(n) * (0.5 * r).powi(n as i32) * s;
    Ok(Slab { center, r, s, volume })
}

/// Exact intersection test for two closed parabolic balls.
///
/// On the common time interval the slice radii are square roots of affine functions of t, so
/// the best t for r_a(t) + r_b(t) is an endpoint or, for opposite orientations, the single
/// stationary point of a concave function.
pub fn balls_intersect(a: &ParabolicBall, b: &ParabolicBall) -> bool {
    let (a0, a1) = a.time_range();
    let (b0, b1) = b.time_range();
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo > hi {
        return false;
    }
    let d = dist2(&a.vertex.x, &b.vertex.x).sqrt();
    let reach = |t: f64| a.slice_radius(t).unwrap_or(0.0) + b.slice_radius(t).unwrap_or(0.0);
    let t_best = match (a.orientation, b.orientation) {
        (Orientation::Up, Orientation::Up) => hi,
        (Orientation::Down, Orientation::Down) => lo,
        (Orientation::Up, Orientation::Down) => {
            let ta = a.opening;
            let tb = b.opening;
            ((ta * a.vertex.t + tb * b.vertex.t) / (ta + tb)).clamp(lo, hi)
        }
        (Orientation::Down, Orientation::Up) => return balls_intersect(b, a),
    };
    reach(t_best) >= d * (1.0 - 1e-12) - MEMBERSHIP_TOL
}

/// Greedy disjoint sub-collection over dyadic height classes; returns indices into `points`.
///
/// Class k holds heights in (2^{−(k+1)}T₀, 2^{−k}T₀]; classes are visited from tallest to
/// shortest and candidates within a class in input order.
pub fn vitali_cover_indices(points: &[(SpaceTimePoint, f64)], theta: f64) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let balls = points
        .iter()
        .map(|(p, t)| ParabolicBall::up(p.clone(), *t, theta))
        .collect::<Result<Vec<_>>>()?;
    let t0 = points.iter().map(|(_, t)| *t).fold(0.0, f64::max);
    let class = |t: f64| {
        let mut k = (t0 / t).log2().floor().max(0.0) as i64;
        // repair rounding at the dyadic endpoints
        while t <= t0 * 0.5f64.powi(k as i32 + 1) {
            k += 1;
        }
        while k > 0 && t > t0 * 0.5f64.powi(k as i32) {
            k -= 1;
        }
        k
    };
    let mut order: Vec<(i64, usize)> = points.iter().enumerate().map(|(i, (_, t))| (class(*t), i)).collect();
    order.sort();
    let mut selected: Vec<usize> = Vec::new();
    for (_, i) in order {
        if selected.iter().all(|&j| !balls_intersect(&balls[i], &balls[j])) {
            selected.push(i);
        }
    }
    Ok(selected)
}

/// Disjoint up-balls whose hats cover the input vertices.
pub fn vitali_cover(points: &[(SpaceTimePoint, f64)], theta: f64) -> Result<Vec<ParabolicBall>> {
    vitali_cover_indices(points, theta)?
        .into_iter()
        .map(|i| ParabolicBall::up(points[i].0.clone(), points[i].1, theta))
        .collect()
}

/// Axis-aligned box in space-time; the last coordinate is time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.len() < 2 {
            return domain("bounding box needs matching bounds in at least 1+1 dimensions");
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return domain("degenerate bounding box");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub measure: f64,
    /// Volume of cells whose classification differs from a neighbour's.
    pub error_bound: f64,
    pub resolution: f64,
    pub cells: usize,
}

const MAX_CELLS: usize = 1 << 28;

/// Cell-counting approximation of the (n+1)-dimensional measure of `pred` inside `bbox`.
pub fn region_measure<P>(pred: P, bbox: &BoundingBox, resolution: f64) -> Result<MeasureEstimate>
where
    P: Fn(&[f64], f64) -> bool + Sync,
{
    bbox.validate()?;
    if !(resolution > 0.0) {
        return domain("resolution must be positive");
    }
    let dims = bbox.lo.len();
    let counts: Vec<usize> = bbox
        .lo
        .iter()
        .zip(&bbox.hi)
        .map(|(a, b)| ((b - a) / resolution).ceil().max(1.0) as usize)
        .collect();
    let total: usize = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c)).unwrap_or(usize::MAX);
    if total > MAX_CELLS {
        return domain(format!("{total} cells exceeds the limit {MAX_CELLS}; use a coarser resolution"));
    }
    let widths: Vec<f64> = (0..dims).map(|i| (bbox.hi[i] - bbox.lo[i]) / counts[i] as f64).collect();
    let cell_volume: f64 = widths.iter().product();
    let inside: Vec<bool> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; dims],
            |c, mut idx| {
                for d in 0..dims {
                    let i = idx % counts[d];
                    idx /= counts[d];
                    c[d] = bbox.lo[d] + (i as f64 + 0.5) * widths[d];
                }
                pred(&c[..dims - 1], c[dims - 1])
            },
        )
        .collect();
    let hits = inside.iter().filter(|&&b| b).count();
    let mut strides = vec![1usize; dims];
    for d in 1..dims {
        strides[d] = strides[d - 1] * counts[d - 1];
    }
    let boundary = (0..total)
        .into_par_iter()
        .filter(|&idx| {
            let mut rem = idx;
            for d in 0..dims {
                let i = rem % counts[d];
                rem /= counts[d];
                if i + 1 < counts[d] && inside[idx + strides[d]] != inside[idx] {
                    return true;
                }
                if i > 0 && inside[idx - strides[d]] != inside[idx] {
                    return true;
                }
            }
            false
        })
        .count();
    Ok(MeasureEstimate {
        measure: hits as f64 * cell_volume,
        error_bound: boundary as f64 * cell_volume,
        resolution,
        cells: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub measure: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Uniform Monte Carlo measure of `pred` inside `bbox`; deterministic for a given seed.
pub fn monte_carlo_measure<P>(pred: P, bbox: &BoundingBox, samples: usize, seed: u64) -> Result<MonteCarloEstimate>
where
    P: Fn(&[f64], f64) -> bool + Sync,
{
    bbox.validate()?;
    if samples == 0 {
        return domain("need at least one sample");
    }
    const CHUNK: usize = 1 << 14;
    let dims = bbox.lo.len();
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let m = CHUNK.min(samples - c * CHUNK);
            let mut p = vec![0.0; dims];
            let mut count = 0;
            for _ in 0..m {
                for d in 0..dims {
                    p[d] = rng.random_range(bbox.lo[d]..bbox.hi[d]);
                }
                if pred(&p[..dims - 1], p[dims - 1]) {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let vol = bbox.volume();
    let frac = hits as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        measure: vol * frac,
        std_error: vol * (frac * (1.0 - frac) / samples as f64).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn volume_closed_forms() {
        let b = ParabolicBall::up(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        assert!((pb_volume(&b) - 4.0 / 3.0).abs() < 1e-15);
        let b = ParabolicBall::up(pt(&[0.0, 0.0], 0.0), 1.0, 2.0).unwrap();
        assert!((pb_volume(&b) - PI / 4.0).abs() < 1e-15);
        let b = ParabolicBall::up(pt(&[0.0], 0.0), 1e-12, 1.0).unwrap();
        assert!(pb_volume(&b) < 1e-17);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn membership_examples() {
        let b = ParabolicBall::up(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        assert!(b.contains(&pt(&[0.0], 0.0)));
        assert!(!b.contains(&pt(&[0.5], 0.1)));
        assert!(b.contains(&pt(&[0.3], 0.5)));
        assert!(pb_contains(&b, &pt(&[0.0, 0.0], 0.5)).is_err());
    }

    #[test]
    fn hat_examples() {
        let b = ParabolicBall::up(pt(&[0.0, 0.0], 0.0), 1.0, 1.0).unwrap();
        let h = hat(&b).unwrap();
        assert!((h.opening - (3.0 - 2.0 * SQRT_2)).abs() < 1e-15);
        assert!((pb_volume(&b) / pb_volume(&h) - 0.010723304703363).abs() < 1e-12);
        assert!((eta2(2) - 0.010723304703363).abs() < 1e-12);
        let d = ParabolicBall::down(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        assert!(hat(&d).is_err());
    }

    #[test]
    fn min_opening_examples() {
        assert_eq!(min_opening(&[0.0], 0.0).unwrap(), 1.0);
        assert!((min_opening(&[0.3, 0.4], -0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(min_opening(&[1.0], -0.5).is_err());
    }

    #[test]
    fn intersection_cylinder_example() {
        let pb = ParabolicBall::down(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        let c = intersection_cylinder(&pb, &pt(&[0.0], -1.0), 1.0).unwrap();
        assert!((c.r0 - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((c.r1 - 0.5).abs() < 1e-15);
        assert!((c.cylinder.radius - 0.5).abs() < 1e-15);
        assert!((c.cylinder.top_time + 0.5).abs() < 1e-15);
        assert_eq!(c.cylinder.center, vec![0.0]);
    }

    #[test]
    fn intersection_cylinder_rejects_bad_input() {
        let pb = ParabolicBall::down(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        assert!(intersection_cylinder(&pb, &pt(&[0.9], -0.5), 0.1).is_err());
        assert!(intersection_cylinder(&pb, &pt(&[0.0], -0.5), 0.6).is_err());
        let thin = ParabolicBall::down(pt(&[0.0], 0.0), 1.0, 0.5).unwrap();
        assert!(intersection_cylinder(&thin, &pt(&[0.0], -0.5), 0.1).is_err());
    }

    #[test]
    fn identical_vertices_give_subcylinder_slab() {
        let b = min_opening_ball(&[0.2, 0.0], -0.1).unwrap();
        let s = common_slab(&b, &b).unwrap();
        assert!((s.r - 0.8).abs() < 1e-14);
        assert_eq!(s.center, vec![0.2, 0.0]);
    }

    #[test]
    fn slab_rejects_far_vertices() {
        let b0 = min_opening_ball(&[0.0, 0.0], -0.3).unwrap();
        let b1 = min_opening_ball(&[0.2, 0.0], -0.4).unwrap();
        assert!(common_slab(&b0, &b1).is_err());
        let s = common_slab_unchecked(&b0, &b1).unwrap();
        assert!(s.volume >= unit_ball_volume(2) / 512.0);
    }

    #[test]
    fn intersect_test_cases() {
        let a = ParabolicBall::up(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        let b = ParabolicBall::up(pt(&[1.5], 0.0), 1.0, 1.0).unwrap();
        assert!(balls_intersect(&a, &b));
        let c = ParabolicBall::up(pt(&[2.5], 0.0), 1.0, 1.0).unwrap();
        assert!(!balls_intersect(&a, &c));
        let late = ParabolicBall::up(pt(&[0.0], 1.5), 1.0, 1.0).unwrap();
        assert!(!balls_intersect(&a, &late));
        let d = ParabolicBall::down(pt(&[1.0], 1.0), 1.0, 1.0).unwrap();
        assert!(balls_intersect(&a, &d));
    }

    #[test]
    fn vitali_small_cases() {
        let single = vec![(pt(&[0.1], -0.2), 0.5)];
        assert_eq!(vitali_cover(&single, 1.0).unwrap().len(), 1);
        let two = vec![(pt(&[0.0], 0.0), 0.5), (pt(&[0.1], 0.0), 0.5)];
        let cover = vitali_cover(&two, 1.0).unwrap();
        assert_eq!(cover.len(), 1);
        let h = hat(&cover[0]).unwrap();
        assert!(two.iter().all(|(p, _)| h.contains(p)));
        assert!(vitali_cover(&[], 1.0).unwrap().is_empty());
    }

    #[test]
    fn region_measure_trivial_cases() {
        let bbox = BoundingBox { lo: vec![-1.0, -1.0], hi: vec![1.0, 0.0] };
        assert_eq!(region_measure(|_, _| false, &bbox, 0.05).unwrap().measure, 0.0);
        let full = region_measure(|_, _| true, &bbox, 0.05).unwrap();
        assert!((full.measure - 2.0).abs() < 1e-12);
        assert_eq!(full.error_bound, 0.0);
        let bad = BoundingBox { lo: vec![0.0, 0.0], hi: vec![0.0, 1.0] };
        assert!(region_measure(|_, _| true, &bad, 0.1).is_err());
    }

    #[test]
    fn region_measure_matches_volume() {
        let b = ParabolicBall::up(pt(&[0.0], 0.0), 1.0, 1.0).unwrap();
        let est = region_measure(|x, t| b.contains_coords(x, t), &b.bounding_box(), 1.0 / 128.0).unwrap();
        assert!((est.measure / pb_volume(&b) - 1.0).abs() < 0.02);
        assert!(est.error_bound > 0.0);
    }

    #[test]
    fn sampling_stays_in_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = ParabolicBall::down(pt(&[0.1, -0.2], 0.3), 0.7, 2.0).unwrap();
        let c = Cylinder::new(vec![0.0, 0.5], -0.1, 0.3).unwrap();
        for _ in 0..1000 {
            assert!(b.contains_tol(&b.sample(&mut rng), 1e-12));
            assert!(c.contains(&c.sample(&mut rng)));
        }
    }
}

//! Contact sets of concave parabolas under grid functions, the vertex-recovery
//! map and its Jacobian, and the homogeneity and measure-decay experiments.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{constant_c2, jacobian_bound};
use crate::envelope::separable_envelope;
use crate::error::{domain, Error, Result};
use crate::geometry::{ParabolicBall, SpaceTimePoint};
use crate::gridfn::{fd_expansion, GridFunction, SecondOrderExpansion, SpaceTimeGrid};
use crate::linalg;
use crate::operators::EllipticOperator;
use crate::solver::residual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Concavity {
    Concave,
    Convex,
}

/// P(x,t) = −(a/2)|x−y|² + a(t−s) (concave) or its negative (convex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactParabola {
    pub vertex: SpaceTimePoint,
    pub opening: f64,
    pub orientation: Concavity,
}

impl ContactParabola {
    pub fn concave(vertex: SpaceTimePoint, a: f64) -> Result<Self> {
        Self::new(vertex, a, Concavity::Concave)
    }

    pub fn convex(vertex: SpaceTimePoint, a: f64) -> Result<Self> {
        Self::new(vertex, a, Concavity::Convex)
    }

    pub fn new(vertex: SpaceTimePoint, a: f64, orientation: Concavity) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return domain(format!("opening {a} must be positive"));
        }
        if !vertex.is_finite() {
            return domain("vertex must be finite");
        }
        Ok(Self { vertex, opening: a, orientation })
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let v = -0.5 * self.opening * linalg::dist2(x, &self.vertex.x) + self.opening * (t - self.vertex.t);
        match self.orientation {
            Concavity::Concave => v,
            Concavity::Convex => -v,
        }
    }
}

/// A touching: the parabola with `vertex` meets the normalized function at `contact_point`.
///
/// The normalized function is `sign·(u − shift)`: u − min u for concave parabolas and
/// max u − u for convex ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub vertex: SpaceTimePoint,
    pub contact_point: SpaceTimePoint,
    pub node: (usize, usize),
    pub gap: f64,
    pub shift: f64,
    pub sign: f64,
    /// None at nodes without a full stencil or at the first time level.
    pub expansion: Option<SecondOrderExpansion>,
}

/// Largest forward difference quotient along the axes.
pub fn lipschitz(u: &GridFunction) -> f64 {
    let g = u.grid();
    let mut lip = 0.0f64;
    for j in 0..g.spatial_len() {
        for a in 0..g.n() {
            if let Some(jn) = g.neighbor(j, a, 1) {
                for k in 0..g.time_len() {
                    lip = lip.max((u.value(jn, k) - u.value(j, k)).abs());
                }
            }
        }
    }
    lip / g.h()
}

/// Gap below which a node counts as a contact: 10⁻⁸ + 2(Lip u + a)h.
pub fn contact_tolerance(u: &GridFunction, a: f64) -> f64 {
    1e-8 + 2.0 * (lipschitz(u) + a) * u.grid().h()
}

fn normalization(u: &GridFunction, orientation: Concavity) -> (f64, f64) {
    match orientation {
        Concavity::Concave => (u.min(), 1.0),
        Concavity::Convex => (u.max(), -1.0),
    }
}

/// First level at or after s. Contacts cannot happen earlier because the normalized function is
/// nonnegative while the parabola is negative before s.
fn first_level(grid: &SpaceTimeGrid, s: f64) -> usize {
    ((s - grid.t_min()) / grid.tau() - 1e-9).ceil().max(0.0) as usize
}

struct Scanner<'a> {
    u: &'a GridFunction,
    g: Vec<f64>,
    shift: f64,
    sign: f64,
    a: f64,
    tol: f64,
    coords: Vec<Vec<f64>>,
}

impl<'a> Scanner<'a> {
    fn new(u: &'a GridFunction, a: f64, orientation: Concavity, tol: f64) -> Self {
        let (shift, sign) = normalization(u, orientation);
        let grid = u.grid();
        Self {
            u,
            g: u.values().iter().map(|v| sign * (v - shift)).collect(),
            shift,
            sign,
            a,
            tol,
            coords: (0..grid.spatial_len()).map(|j| grid.coords(j)).collect(),
        }
    }

    fn record(&self, vertex: &SpaceTimePoint, j: usize, k: usize, gap: f64) -> ContactRecord {
        ContactRecord {
            vertex: vertex.clone(),
            contact_point: SpaceTimePoint::new(self.coords[j].clone(), self.u.grid().time(k)),
            node: (j, k),
            gap,
            shift: self.shift,
            sign: self.sign,
            expansion: fd_expansion(self.u, j, k).ok(),
        }
    }

    fn scan(&self, vertex: &SpaceTimePoint) -> Option<ContactRecord> {
        let grid = self.u.grid();
        let ns = grid.spatial_len();
        let q: Vec<f64> = self.coords.iter().map(|x| 0.5 * self.a * linalg::dist2(x, &vertex.x)).collect();
        for k in first_level(grid, vertex.t)..grid.time_len() {
            let slice = &self.g[k * ns..(k + 1) * ns];
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for j in 0..ns {
                let v = slice[j] + q[j];
                if v < best {
                    best = v;
                    arg = j;
                }
            }
            let gap = best - self.a * (grid.time(k) - vertex.t);
            if gap <= self.tol {
                return Some(self.record(vertex, arg, k, gap));
            }
        }
        None
    }
}

/// First grid time at which the parabola comes within the contact tolerance of the normalized u.
pub fn contact_point(u: &GridFunction, parabola: &ContactParabola) -> Option<ContactRecord> {
    let tol = contact_tolerance(u, parabola.opening);
    Scanner::new(u, parabola.opening, parabola.orientation, tol).scan(&parabola.vertex)
}

/// Contact nodes on the grid of u, with the records that produced them.
#[derive(Debug, Clone)]
pub struct ContactSet {
    pub grid: Arc<SpaceTimeGrid>,
    pub mask: Vec<bool>,
    pub records: Vec<ContactRecord>,
}

impl ContactSet {
    fn from_records(grid: Arc<SpaceTimeGrid>, records: Vec<ContactRecord>) -> Self {
        let mut mask = vec![false; grid.len()];
        for r in &records {
            mask[grid.index(r.node.0, r.node.1)] = true;
        }
        Self { grid, mask, records }
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.mask[self.grid.index(j, k)]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    /// Contact nodes as (j, k), time-major.
    pub fn nodes(&self) -> Vec<(usize, usize)> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).map(|i| self.grid.split(i)).collect()
    }

    pub fn is_subset_of(&self, other: &ContactSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

/// Union of contact points of concave parabolas with vertices in `vertices`, by per-vertex scan.
pub fn contact_set(u: &GridFunction, vertices: &[SpaceTimePoint], a: f64) -> Result<ContactSet> {
    if !(a > 0.0) {
        return domain(format!("opening {a} must be positive"));
    }
    let tol = contact_tolerance(u, a);
    let sc = Scanner::new(u, a, Concavity::Concave, tol);
    let records: Vec<ContactRecord> = vertices.par_iter().filter_map(|v| sc.scan(v)).collect();
    Ok(ContactSet::from_records(u.grid().clone(), records))
}

/// Same contact set as [`contact_set`], computed slice by slice with lower envelopes.
///
/// Vertices must be lattice points of the grid's bounding box.
pub fn contact_set_sweep(u: &GridFunction, vertices: &[SpaceTimePoint], a: f64) -> Result<ContactSet> {
    if !(a > 0.0) {
        return domain(format!("opening {a} must be positive"));
    }
    let grid = u.grid();
    let n = grid.n();
    let h = grid.h();
    let hw = grid.half_width();
    let bw = grid.box_width();
    let ns = grid.spatial_len();
    let tol = contact_tolerance(u, a);
    let sc = Scanner::new(u, a, Concavity::Concave, tol);
    let total = bw.pow(n as u32);
    let mut box_to_node = vec![usize::MAX; total];
    for j in 0..ns {
        box_to_node[grid.box_index(j)] = j;
    }
    let mut pending: Vec<(usize, usize, usize)> = Vec::with_capacity(vertices.len());
    for (i, v) in vertices.iter().enumerate() {
        let mut b = 0usize;
        for d in (0..n).rev() {
            let s = v.x[d] / h;
            let l = s.round();
            if (s - l).abs() > 1e-6 || l.abs() > hw as f64 {
                return domain(format!("vertex {:?} is not a lattice point of the grid box", v.x));
            }
            b = b * bw + (l as i32 + hw) as usize;
        }
        pending.push((first_level(grid, v.t), b, i));
    }
    pending.sort_unstable();
    let shape = vec![bw; n];
    let spacings = vec![h; n];
    let weights = vec![0.5 * a; n];
    let mut found: Vec<Option<ContactRecord>> = vec![None; vertices.len()];
    let mut live: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for k in 0..grid.time_len() {
        while next < pending.len() && pending[next].0 <= k {
            live.push((pending[next].1, pending[next].2));
            next += 1;
        }
        if live.is_empty() {
            continue;
        }
        let mut data = vec![f64::INFINITY; total];
        for j in 0..ns {
            data[grid.box_index(j)] = sc.g[k * ns + j];
        }
        let arg = separable_envelope(&mut data, &shape, &spacings, &weights);
        let t = grid.time(k);
        live.retain(|&(b, i)| {
            let gap = data[b] - a * (t - vertices[i].t);
            if gap <= tol {
                found[i] = Some(sc.record(&vertices[i], box_to_node[arg[b]], k, gap));
                false
            } else {
                true
            }
        });
    }
    Ok(ContactSet::from_records(grid.clone(), found.into_iter().flatten().collect()))
}

/// Vertex region [y_lo, y_hi] × [s_lo, s_hi] in one space dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexBox {
    pub y_lo: f64,
    pub y_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl VertexBox {
    /// The whole extent of a one-dimensional grid.
    pub fn of_grid(grid: &SpaceTimeGrid) -> Self {
        let r = grid.spatial_radius();
        Self { y_lo: -r, y_hi: r, s_lo: grid.t_min(), s_hi: grid.t_last() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    lo_open: bool,
    hi: f64,
    hi_open: bool,
}

impl Interval {
    fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, lo_open: false, hi, hi_open: false }
    }

    fn raise(&mut self, v: f64, open: bool) {
        if v > self.lo || (v == self.lo && open) {
            self.lo = v;
            self.lo_open = open;
        }
    }

    fn lower(&mut self, v: f64, open: bool) {
        if v < self.hi || (v == self.hi && open) {
            self.hi = v;
            self.hi_open = open;
        }
    }

    fn meet(mut self, o: &Interval) -> Self {
        self.raise(o.lo, o.lo_open);
        self.lower(o.hi, o.hi_open);
        self
    }

    fn is_empty(&self) -> bool {
        !(self.lo < self.hi || (self.lo == self.hi && !self.lo_open && !self.hi_open))
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Contact set in one space dimension for every vertex of `vb`, not only lattice vertices.
///
/// With y free, the touching conditions at the earlier (strict) and same-time (non-strict)
/// nodes are linear in y, and the vertex-time range is an annulus in y. The set is therefore
/// exactly monotone in the vertex region and in the opening.
pub fn contact_set_continuous(u: &GridFunction, vb: &VertexBox, a: f64) -> Result<ContactSet> {
    let grid = u.grid();
    if grid.n() != 1 {
        return domain("continuous-vertex contact sets are implemented for n = 1 only");
    }
    if !(a > 0.0) {
        return domain(format!("opening {a} must be positive"));
    }
    let ns = grid.spatial_len();
    let nt = grid.time_len();
    let (shift, sign) = normalization(u, Concavity::Concave);
    let g: Vec<f64> = u.values().iter().map(|v| v - shift).collect();
    let xs: Vec<f64> = (0..ns).map(|j| grid.coords3(j)[0]).collect();
    // prefix[k·ns + j] = min over k' < k of g(j,k') − a t_{k'}
    let mut prefix = vec![f64::INFINITY; ns * nt];
    for k in 1..nt {
        for j in 0..ns {
            prefix[k * ns + j] = prefix[(k - 1) * ns + j].min(g[(k - 1) * ns + j] - a * grid.time(k - 1));
        }
    }
    let feasible = |j: usize, k: usize| -> Option<f64> {
        let x = xs[j];
        let t = grid.time(k);
        let c = g[k * ns + j];
        let mut iv = Interval::closed(vb.y_lo, vb.y_hi);
        for (i, &xi) in xs.iter().enumerate() {
            let lift = 0.5 * a * (xi * xi - x * x);
            let re = prefix[k * ns + i] + a * t - c + lift;
            if i == j {
                if re <= 0.0 {
                    return None;
                }
                continue;
            }
            let rs = g[k * ns + i] - c + lift;
            let den = a * (xi - x);
            if den > 0.0 {
                iv.lower(re / den, true);
                iv.lower(rs / den, false);
            } else {
                iv.raise(re / den, true);
                iv.raise(rs / den, false);
            }
            if iv.is_empty() {
                return None;
            }
        }
        let q = t - c / a;
        let q_hi = 2.0 * (q - vb.s_lo);
        if q_hi < 0.0 {
            return None;
        }
        let q_lo = 2.0 * (q - vb.s_hi);
        let (r_hi, r_lo) = (q_hi.sqrt(), q_lo.max(0.0).sqrt());
        let pieces = if q_lo <= 0.0 {
            vec![Interval::closed(x - r_hi, x + r_hi)]
        } else {
            vec![Interval::closed(x - r_hi, x - r_lo), Interval::closed(x + r_lo, x + r_hi)]
        };
        pieces.iter().map(|p| p.meet(&iv)).find(|p| !p.is_empty()).map(|p| p.midpoint())
    };
    let records: Vec<ContactRecord> = (0..ns * nt)
        .into_par_iter()
        .filter_map(|idx| {
            let (j, k) = grid.split(idx);
            let y = feasible(j, k)?;
            let t = grid.time(k);
            let s = t - g[idx] / a - 0.5 * (xs[j] - y) * (xs[j] - y);
            Some(ContactRecord {
                vertex: SpaceTimePoint::new(vec![y], s),
                contact_point: SpaceTimePoint::new(vec![xs[j]], t),
                node: (j, k),
                gap: 0.0,
                shift,
                sign,
                expansion: fd_expansion(u, j, k).ok(),
            })
        })
        .collect();
    Ok(ContactSet::from_records(grid.clone(), records))
}

/// A_a over the whole grid extent: continuous vertices for n = 1, lattice vertices otherwise.
pub fn contact_set_full(u: &GridFunction, a: f64) -> Result<ContactSet> {
    let grid = u.grid();
    if grid.n() == 1 {
        return contact_set_continuous(u, &VertexBox::of_grid(grid), a);
    }
    contact_set_sweep(u, &grid_vertices(grid, |_, _| true), a)
}

/// All grid nodes satisfying `pred`, as vertices.
pub fn grid_vertices<P: Fn(&[f64], f64) -> bool>(grid: &SpaceTimeGrid, pred: P) -> Vec<SpaceTimePoint> {
    let mut out = Vec::new();
    for k in 0..grid.time_len() {
        let t = grid.time(k);
        for j in 0..grid.spatial_len() {
            let x = grid.coords(j);
            if pred(&x, t) {
                out.push(SpaceTimePoint::new(x, t));
            }
        }
    }
    out
}

/// Vertex recovered from an interior contact: y = x + ∇u/a, s = t − u/a − ½|x−y|².
pub fn transport_map(record: &ContactRecord, a: f64) -> Result<SpaceTimePoint> {
    let e = record
        .expansion
        .as_ref()
        .ok_or_else(|| Error::Boundary(format!("contact at {:?} is on the boundary", record.contact_point)))?;
    let x = &record.contact_point.x;
    let y: Vec<f64> = x.iter().zip(&e.gradient).map(|(xi, p)| xi + record.sign * p / a).collect();
    let value = record.sign * (e.value - record.shift);
    let s = record.contact_point.t - value / a - 0.5 * linalg::dist2(x, &y);
    Ok(SpaceTimePoint::new(y, s))
}

/// det(I + D²u/a)(1 − u_t/a), clamped below at 0.
pub fn abp_jacobian(record: &ContactRecord, a: f64) -> Result<f64> {
    let e = record
        .expansion
        .as_ref()
        .ok_or_else(|| Error::Boundary(format!("contact at {:?} is on the boundary", record.contact_point)))?;
    let n = e.gradient.len();
    let m = linalg::identity(n) + &e.hessian * (record.sign / a);
    let j = m.determinant() * (1.0 - record.sign * e.time_slope / a);
    Ok(j.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbpReport {
    pub vertices: usize,
    pub e_measure: f64,
    pub contact_nodes: usize,
    pub boundary_contacts: usize,
    pub contact_measure: f64,
    pub jacobian_integral: f64,
    /// ∫_{A} J / |E|; the area formula predicts at least 1.
    pub area_ratio: f64,
    pub max_jacobian: f64,
    pub jacobian_bound: f64,
    pub bound_violations: usize,
    /// |A|·(1+Λn/λ)ⁿ(1+Λn)/|E| and |A|·c₂/|E|; both should be at least 1.
    pub measure_margin: f64,
    pub measure_margin_c2: f64,
}

impl AbpReport {
    pub fn holds_within(&self, rel: f64) -> bool {
        self.area_ratio >= 1.0 - rel && self.measure_margin >= 1.0 - rel
    }
}

/// Compares |E| with the Jacobian integral over A_a(E) and with |A_a(E)|.
pub fn abp_inequality_check(u: &GridFunction, vertices: &[SpaceTimePoint], a: f64, lambda: f64, big_lambda: f64) -> Result<AbpReport> {
    if vertices.is_empty() {
        return domain("vertex set is empty");
    }
    let grid = u.grid();
    let n = grid.n();
    let cell = grid.cell_volume();
    let set = contact_set(u, vertices, a)?;
    let bound = jacobian_bound(n, lambda, big_lambda);
    let jac_tol = 1e-6 + 10.0 * (grid.h().powi(2) + grid.tau()) / a;
    let mut seen = vec![false; grid.len()];
    let (mut integral, mut max_j, mut boundary, mut violations, mut nodes) = (0.0, 0.0f64, 0, 0, 0);
    for r in &set.records {
        let idx = grid.index(r.node.0, r.node.1);
        if std::mem::replace(&mut seen[idx], true) {
            continue;
        }
        nodes += 1;
        match abp_jacobian(r, a) {
            Ok(j) => {
                integral += j * cell;
                max_j = max_j.max(j);
                if j > bound * (1.0 + jac_tol) {
                    violations += 1;
                }
            }
            Err(_) => boundary += 1,
        }
    }
    let e_measure = vertices.len() as f64 * cell;
    let contact_measure = nodes as f64 * cell;
    Ok(AbpReport {
        vertices: vertices.len(),
        e_measure,
        contact_nodes: nodes,
        boundary_contacts: boundary,
        contact_measure,
        jacobian_integral: integral,
        area_ratio: integral / e_measure,
        max_jacobian: max_j,
        jacobian_bound: bound,
        bound_violations: violations,
        measure_margin: contact_measure * bound / e_measure,
        measure_margin_c2: contact_measure * constant_c2(n, lambda, big_lambda) / e_measure,
    })
}

fn count_in<P: Fn(&[f64], f64) -> bool>(grid: &SpaceTimeGrid, mask: Option<&[bool]>, pred: P) -> usize {
    let mut c = 0;
    for k in 0..grid.time_len() {
        let t = grid.time(k);
        for j in 0..grid.spatial_len() {
            if mask.is_some_and(|m| !m[grid.index(j, k)]) {
                continue;
            }
            if pred(&grid.coords3(j)[..grid.n()], t) {
                c += 1;
            }
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityRow {
    pub dilation: f64,
    pub opening: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub vacuous: bool,
    /// Largest F − u_t over interior nodes; at most a small tolerance for a supersolution.
    pub supersolution_residual: f64,
    pub rows: Vec<HomogeneityRow>,
    /// 1/c for the smallest ladder dilation c with fraction ≥ 1/c.
    pub c1: Option<f64>,
}

/// Mass fractions |A_{c·a} ∩ pb_down ∩ pb_up| / |pb_up| for dilations c = 1, 2, 4, …
pub fn homogeneity_experiment(
    u: &GridFunction,
    f: &dyn EllipticOperator,
    pb_down: &ParabolicBall,
    pb_up: &ParabolicBall,
    a: f64,
    ladder: usize,
) -> Result<HomogeneityReport> {
    let grid = u.grid();
    let base = contact_set_full(u, a)?;
    let supersolution_residual = residual(f, u)?.max();
    let (_, top) = pb_up.time_range();
    let slice_r = pb_up.slice_radius(top).unwrap_or(0.0);
    let half = 0.5 * grid.tau() + 1e-12;
    let h = grid.h();
    let meets = count_in(grid, Some(&base.mask), |x, t| {
        (t - top).abs() <= half && linalg::dist2(x, &pb_up.vertex.x).sqrt() <= slice_r + h && pb_down.contains_coords_tol(x, t, 1e-9)
    }) > 0;
    if !meets {
        return Ok(HomogeneityReport { vacuous: true, supersolution_residual, rows: Vec::new(), c1: None });
    }
    let up_count = count_in(grid, None, |x, t| pb_up.contains_coords(x, t));
    if up_count == 0 {
        return domain("the up-ball contains no grid nodes");
    }
    let mut rows = Vec::with_capacity(ladder);
    let mut c1 = None;
    for i in 0..ladder {
        let c = 2f64.powi(i as i32);
        let set = if i == 0 { base.clone() } else { contact_set_full(u, c * a)? };
        let hit = count_in(grid, Some(&set.mask), |x, t| pb_down.contains_coords(x, t) && pb_up.contains_coords(x, t));
        let fraction = hit as f64 / up_count as f64;
        if c1.is_none() && fraction >= 1.0 / c {
            c1 = Some(1.0 / c);
        }
        rows.push(HomogeneityRow { dilation: c, opening: c * a, fraction });
    }
    Ok(HomogeneityReport { vacuous: false, supersolution_residual, rows, c1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub k: usize,
    pub opening: f64,
    pub measure: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDecayReport {
    pub rows: Vec<DecayRow>,
    pub floor: f64,
    pub nonincreasing: bool,
    pub slope: f64,
}

/// Least-squares slope of ln(max(v, floor)) against the index.
pub fn log_linear_slope(values: &[f64], floor: f64) -> f64 {
    let m = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let ys: Vec<f64> = values.iter().map(|v| v.max(floor).ln()).collect();
    let xm = (m - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / m;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        num += dx * (y - ym);
        den += dx * dx;
    }
    num / den
}

/// m_k = |pb_down ∖ A_{c₁^{−k}a}| / |pb_down| for k = 0..=k_max.
pub fn measure_decay_experiment(u: &GridFunction, pb_down: &ParabolicBall, a: f64, c1: f64, k_max: usize) -> Result<MeasureDecayReport> {
    if !(c1 > 0.0 && c1 <= 1.0) {
        return domain(format!("c₁ = {c1} must lie in (0, 1]"));
    }
    let grid = u.grid();
    let cell = grid.cell_volume();
    let total = count_in(grid, None, |x, t| pb_down.contains_coords(x, t));
    if total == 0 {
        return domain("the down-ball contains no grid nodes");
    }
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let opening = a * c1.powi(-(k as i32));
        let set = contact_set_full(u, opening)?;
        let covered = count_in(grid, Some(&set.mask), |x, t| pb_down.contains_coords(x, t));
        let missing = total - covered;
        rows.push(DecayRow { k, opening, measure: missing as f64 * cell, fraction: missing as f64 / total as f64 });
    }
    let floor = 0.5 / total as f64;
    let fr: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    Ok(MeasureDecayReport {
        nonincreasing: fr.windows(2).all(|w| w[1] <= w[0]),
        slope: log_linear_slope(&fr, floor),
        floor,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::extend;
    use crate::operators::make_pucci_minimal;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(h: f64, tau: f64) -> Arc<SpaceTimeGrid> {
        Arc::new(SpaceTimeGrid::unit(1, h, tau).unwrap())
    }

    fn bump(g: Arc<SpaceTimeGrid>) -> GridFunction {
        GridFunction::from_fn(g, |x, t| 0.02 * (-(4.0 * (x[0] - 0.2).powi(2))).exp() * (1.0 + 0.3 * t) + 0.01 * x[0]).unwrap()
    }

    #[test]
    fn zero_function_contacts_at_vertex() {
        let u = GridFunction::constant(grid1(1.0 / 16.0, 1.0 / 32.0), 0.0).unwrap();
        let p = ContactParabola::concave(SpaceTimePoint::new(vec![0.0], -0.5), 3.0).unwrap();
        let r = contact_point(&u, &p).unwrap();
        assert_eq!(r.contact_point, SpaceTimePoint::new(vec![0.0], -0.5));
        let future = ContactParabola::concave(SpaceTimePoint::new(vec![0.0], 0.5), 3.0).unwrap();
        assert!(contact_point(&u, &future).is_none());
        let ext = extend(&u, 0.0, 1.0).unwrap();
        assert_eq!(contact_point(&ext, &future).unwrap().contact_point.t, 0.5);
    }

    #[test]
    fn quadratic_contacts_at_vertex() {
        let g = grid1(1.0 / 32.0, 1.0 / 64.0);
        let u = GridFunction::from_fn(g, |x, _| 0.05 * x[0] * x[0]).unwrap();
        let p = ContactParabola::concave(SpaceTimePoint::new(vec![0.0], -0.5), 1.0).unwrap();
        let r = contact_point(&u, &p).unwrap();
        assert_eq!(r.contact_point, SpaceTimePoint::new(vec![0.0], -0.5));
    }

    #[test]
    fn zero_function_contact_set_is_everything() {
        let u = GridFunction::constant(grid1(1.0 / 8.0, 1.0 / 16.0), 0.0).unwrap();
        let vs = grid_vertices(u.grid(), |_, _| true);
        assert_eq!(contact_set(&u, &vs, 2.0).unwrap().count(), u.grid().len());
        assert_eq!(contact_set_sweep(&u, &vs, 2.0).unwrap().count(), u.grid().len());
        assert_eq!(contact_set_full(&u, 2.0).unwrap().count(), u.grid().len());
    }

    #[test]
    fn scan_and_sweep_agree() {
        let u = bump(grid1(1.0 / 32.0, 1.0 / 64.0));
        let vs = grid_vertices(u.grid(), |_, _| true);
        for a in [0.05, 0.3, 2.0] {
            let s1 = contact_set(&u, &vs, a).unwrap();
            let s2 = contact_set_sweep(&u, &vs, a).unwrap();
            assert_eq!(s1.mask, s2.mask);
            assert_eq!(s1.records.len(), s2.records.len());
        }
    }

    #[test]
    fn monotone_in_vertices_and_opening() {
        let u = bump(grid1(1.0 / 32.0, 1.0 / 64.0));
        let small = VertexBox { y_lo: -0.5, y_hi: 0.3, s_lo: -0.8, s_hi: -0.2 };
        let big = VertexBox::of_grid(u.grid());
        let mut prev: Option<ContactSet> = None;
        for a in [0.01, 0.02, 0.05, 0.1, 0.4, 1.0] {
            let s = contact_set_continuous(&u, &small, a).unwrap();
            let b = contact_set_continuous(&u, &big, a).unwrap();
            assert!(s.is_subset_of(&b));
            if let Some(p) = prev {
                assert!(p.is_subset_of(&b));
            }
            prev = Some(b);
        }
    }

    #[test]
    fn continuous_records_touch() {
        let u = bump(grid1(1.0 / 32.0, 1.0 / 64.0));
        let a = 0.2;
        let set = contact_set_full(&u, a).unwrap();
        let shift = u.min();
        let g = u.grid();
        for r in set.records.iter().step_by(37) {
            let p = ContactParabola::concave(r.vertex.clone(), a).unwrap();
            assert!((p.eval(&r.contact_point.x, r.contact_point.t) - (u.value(r.node.0, r.node.1) - shift)).abs() < 1e-12);
            for k in 0..=r.node.1 {
                for j in 0..g.spatial_len() {
                    let gap = u.value(j, k) - shift - p.eval(&g.coords(j), g.time(k));
                    assert!(gap > -1e-12);
                }
            }
        }
    }

    #[test]
    fn transport_identity_and_roundtrip() {
        let g = grid1(1.0 / 64.0, 1.0 / 128.0);
        let z = GridFunction::constant(g.clone(), 0.7).unwrap();
        let p = ContactParabola::concave(SpaceTimePoint::new(vec![0.25], -0.5), 1.0).unwrap();
        let r = contact_point(&z, &p).unwrap();
        assert_eq!(transport_map(&r, 1.0).unwrap(), SpaceTimePoint::new(vec![0.25], -0.5));
        assert_eq!(abp_jacobian(&r, 1.0).unwrap(), 1.0);

        let u = bump(g.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = 0.5;
        let h = g.h();
        for _ in 0..50 {
            let y = rng.random_range(-40..=40) as f64 * h;
            let s = g.time(rng.random_range(10..100usize));
            let v = SpaceTimePoint::new(vec![y.clamp(-0.6, 0.6)], s);
            let r = contact_point(&u, &ContactParabola::concave(v.clone(), a).unwrap()).unwrap();
            let back = transport_map(&r, a).unwrap();
            let err = (back.x[0] - v.x[0]).abs().max((back.t - v.t).abs());
            assert!(err <= 5.0 * h, "round trip error {err}");
        }
    }

    #[test]
    fn jacobian_of_quadratic() {
        let g = grid1(1.0 / 16.0, 1.0 / 32.0);
        let a = 2.0;
        let u = GridFunction::from_fn(g.clone(), |x, t| 0.25 * a * x[0] * x[0] + 0.5 * a * t).unwrap();
        let j = g.find([0, 0, 0]).unwrap();
        let rec = ContactRecord {
            vertex: SpaceTimePoint::origin(1),
            contact_point: SpaceTimePoint::new(vec![0.0], g.time(10)),
            node: (j, 10),
            gap: 0.0,
            shift: u.min(),
            sign: 1.0,
            expansion: fd_expansion(&u, j, 10).ok(),
        };
        assert!((abp_jacobian(&rec, a).unwrap() - 1.5 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn abp_on_zero_function() {
        let u = GridFunction::constant(grid1(1.0 / 32.0, 1.0 / 64.0), 0.0).unwrap();
        let vs = grid_vertices(u.grid(), |x, t| x[0].abs() <= 0.25 && (-0.5..=-0.25).contains(&t));
        let r = abp_inequality_check(&u, &vs, 1.0, 0.5, 2.0).unwrap();
        assert!((r.area_ratio - 1.0).abs() < 1e-12);
        assert_eq!(r.contact_nodes, vs.len());
    }

    #[test]
    fn experiments_on_zero_function() {
        let u = GridFunction::constant(grid1(1.0 / 16.0, 1.0 / 32.0), 0.0).unwrap();
        let f = make_pucci_minimal(0.5, 2.0, 1).unwrap();
        let down = ParabolicBall::down(SpaceTimePoint::new(vec![0.0], 0.0), 1.0, 1.0).unwrap();
        let up = ParabolicBall::up(SpaceTimePoint::new(vec![0.0], -0.75), 0.25, 1.0).unwrap();
        let rep = homogeneity_experiment(&u, &f, &down, &up, 1e-3, 3).unwrap();
        assert!(!rep.vacuous);
        assert_eq!(rep.c1, Some(1.0));
        let dec = measure_decay_experiment(&u, &down, 1e-3, 0.5, 3).unwrap();
        assert!(dec.rows.iter().all(|r| r.fraction == 0.0));
    }

    #[test]
    fn slope_of_geometric_sequence() {
        let v: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
        assert!((log_linear_slope(&v, 1e-9) - 0.5f64.ln()).abs() < 1e-12);
    }
}

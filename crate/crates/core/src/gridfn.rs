//! Space-time grids over cylinders and the discrete calculus on them:
//! oscillation, finite-difference expansions, sup/inf convolutions,
//! time extension and serialization.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::separable_envelope;
use crate::error::{domain, Error, Result};
use crate::linalg::{self, SymMat};

/// Grid parameters; the node set is {x ∈ hℤⁿ : |x| ≤ R} × {t_min + kτ ≤ t_max}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub spatial_radius: f64,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone)]
pub struct SpaceTimeGrid {
    spec: GridSpec,
    half_width: i32,
    width: usize,
    lattice: Vec<[i32; 3]>,
    lookup: Vec<u32>,
    times: usize,
}

const NONE: u32 = u32::MAX;
const TIME_SNAP: f64 = 1e-9;

impl SpaceTimeGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec { n, h, tau, spatial_radius, t_min, t_max } = spec;
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("dimension {n} not in 1..=3")));
        }
        if !(h > 0.0 && tau > 0.0 && spatial_radius > 0.0) || !(t_max >= t_min) {
            return Err(Error::Config(format!("invalid grid {spec:?}")));
        }
        let half_width = (spatial_radius / h + TIME_SNAP).floor() as i32;
        let width = 2 * half_width as usize + 1;
        let boxed = width.pow(n as u32);
        if boxed > 1 << 26 {
            return Err(Error::Config(format!("grid too large: {boxed} lattice cells")));
        }
        let mut lattice = Vec::new();
        let mut lookup = vec![NONE; boxed];
        let r2 = (spatial_radius / h) * (spatial_radius / h) * (1.0 + 1e-12);
        for b in 0..boxed {
            let mut l = [0i32; 3];
            let mut rem = b;
            for d in 0..n {
                l[d] = (rem % width) as i32 - half_width;
                rem /= width;
            }
            let s: f64 = l.iter().map(|&v| (v as f64) * (v as f64)).sum();
            if s <= r2 {
                lookup[b] = lattice.len() as u32;
                lattice.push(l);
            }
        }
        let times = ((t_max - t_min) / tau + TIME_SNAP).floor() as usize + 1;
        Ok(Self { spec, half_width, width, lattice, lookup, times })
    }

    /// Q_R grid: spatial radius R, times from −R² to 0.
    pub fn cylinder(n: usize, h: f64, tau: f64, radius: f64) -> Result<Self> {
        Self::new(GridSpec { n, h, tau, spatial_radius: radius, t_min: -radius * radius, t_max: 0.0 })
    }

    pub fn unit(n: usize, h: f64, tau: f64) -> Result<Self> {
        Self::cylinder(n, h, tau, 1.0)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn n(&self) -> usize {
        self.spec.n
    }
    pub fn h(&self) -> f64 {
        self.spec.h
    }
    pub fn tau(&self) -> f64 {
        self.spec.tau
    }
    pub fn spatial_radius(&self) -> f64 {
        self.spec.spatial_radius
    }
    pub fn half_width(&self) -> i32 {
        self.half_width
    }
    /// Side length of the lattice box holding the spatial nodes.
    pub fn box_width(&self) -> usize {
        self.width
    }
    pub fn spatial_len(&self) -> usize {
        self.lattice.len()
    }
    pub fn time_len(&self) -> usize {
        self.times
    }
    pub fn len(&self) -> usize {
        self.lattice.len() * self.times
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node (j, k); values are stored time-major.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.lattice.len() + j
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx % self.lattice.len(), idx / self.lattice.len())
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.spec.t_min + k as f64 * self.spec.tau
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.times).map(|k| self.time(k)).collect()
    }

    #[inline]
    pub fn lattice(&self, j: usize) -> [i32; 3] {
        self.lattice[j]
    }

    /// Spatial coordinates, padded with zeros to three entries.
    #[inline]
    pub fn coords3(&self, j: usize) -> [f64; 3] {
        let l = self.lattice[j];
        [l[0] as f64 * self.spec.h, l[1] as f64 * self.spec.h, l[2] as f64 * self.spec.h]
    }

    pub fn coords(&self, j: usize) -> Vec<f64> {
        self.coords3(j)[..self.spec.n].to_vec()
    }

    /// Box-array index of spatial node j (first axis fastest).
    pub fn box_index(&self, j: usize) -> usize {
        let l = self.lattice[j];
        let mut b = 0;
        for d in (0..self.spec.n).rev() {
            b = b * self.width + (l[d] + self.half_width) as usize;
        }
        b
    }

    pub fn find(&self, l: [i32; 3]) -> Option<usize> {
        let mut b = 0usize;
        for d in (0..self.spec.n).rev() {
            let v = l[d] + self.half_width;
            if v < 0 || v as usize >= self.width {
                return None;
            }
            b = b * self.width + v as usize;
        }
        for &v in &l[self.spec.n..] {
            if v != 0 {
                return None;
            }
        }
        let id = self.lookup[b];
        (id != NONE).then_some(id as usize)
    }

    /// The spatial node at x, if x is (within rounding) a lattice point of the grid.
    pub fn find_coords(&self, x: &[f64]) -> Option<usize> {
        let mut l = [0i32; 3];
        for (d, &v) in x.iter().enumerate() {
            let s = v / self.spec.h;
            let r = s.round();
            if (s - r).abs() > 1e-6 {
                return None;
            }
            l[d] = r as i32;
        }
        self.find(l)
    }

    /// Nearest spatial node by lattice rounding, if that node exists.
    pub fn nearest_spatial(&self, x: &[f64]) -> Option<usize> {
        let mut l = [0i32; 3];
        for (d, &v) in x.iter().enumerate() {
            l[d] = (v / self.spec.h).round() as i32;
        }
        self.find(l)
    }

    #[inline]
    pub fn neighbor(&self, j: usize, axis: usize, step: i32) -> Option<usize> {
        let mut l = self.lattice[j];
        l[axis] += step;
        self.find(l)
    }

    #[inline]
    pub fn diagonal(&self, j: usize, a: usize, sa: i32, b: usize, sb: i32) -> Option<usize> {
        let mut l = self.lattice[j];
        l[a] += sa;
        l[b] += sb;
        self.find(l)
    }

    /// Whether the central second-difference stencil (including diagonals) fits.
    pub fn has_full_stencil(&self, j: usize) -> bool {
        let n = self.spec.n;
        for a in 0..n {
            if self.neighbor(j, a, 1).is_none() || self.neighbor(j, a, -1).is_none() {
                return false;
            }
            for b in a + 1..n {
                for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    if self.diagonal(j, a, sa, b, sb).is_none() {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Time level equal to t within rounding.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let s = (t - self.spec.t_min) / self.spec.tau;
        let r = s.round();
        ((s - r).abs() <= 1e-6 && r >= 0.0 && (r as usize) < self.times).then_some(r as usize)
    }

    pub fn nearest_time_index(&self, t: f64) -> usize {
        let s = ((t - self.spec.t_min) / self.spec.tau).round();
        s.clamp(0.0, (self.times - 1) as f64) as usize
    }

    pub fn t_min(&self) -> f64 {
        self.spec.t_min
    }

    /// Last time level actually on the grid.
    pub fn t_last(&self) -> f64 {
        self.time(self.times - 1)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spec.h.powi(self.spec.n as i32) * self.spec.tau
    }
}

/// Sampled function on a [`SpaceTimeGrid`]; values are finite and stored time-major.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<SpaceTimeGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<SpaceTimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!("expected {} values, got {}", grid.len(), values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite value at node {i}"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F>(grid: Arc<SpaceTimeGrid>, f: F) -> Result<Self>
    where
        F: Fn(&[f64], f64) -> f64 + Sync,
    {
        let n = grid.n();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (j, k) = grid.split(idx);
                f(&grid.coords3(j)[..n], grid.time(k))
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<SpaceTimeGrid>, c: f64) -> Result<Self> {
        let len = grid.len();
        Self::new(grid, vec![c; len])
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(j, k)]
    }

    /// Values of time level k.
    pub fn slice(&self, k: usize) -> &[f64] {
        let ns = self.grid.spatial_len();
        &self.values[k * ns..(k + 1) * ns]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        if other.values.len() != self.values.len() || other.grid.spec() != self.grid.spec() {
            return domain("grid mismatch");
        }
        Self::new(self.grid.clone(), self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// Value at a spatial lattice point, linear in time between levels.
    pub fn sample(&self, x: &[f64], t: f64) -> Option<f64> {
        let j = self.grid.find_coords(x)?;
        let g = &self.grid;
        let s = ((t - g.t_min()) / g.tau()).clamp(0.0, (g.time_len() - 1) as f64);
        let k0 = s.floor() as usize;
        let k1 = (k0 + 1).min(g.time_len() - 1);
        let w = s - k0 as f64;
        Some((1.0 - w) * self.value(j, k0) + w * self.value(j, k1))
    }

    /// Max |self − other| over nodes satisfying `region`.
    pub fn max_abs_diff_in<P>(&self, other: &Self, region: P) -> Result<f64>
    where
        P: Fn(&[f64], f64) -> bool,
    {
        if other.grid.spec() != self.grid.spec() {
            return domain("grid mismatch");
        }
        let g = &self.grid;
        let mut worst: Option<f64> = None;
        for k in 0..g.time_len() {
            for j in 0..g.spatial_len() {
                if region(&g.coords3(j)[..g.n()], g.time(k)) {
                    let d = (self.value(j, k) - other.value(j, k)).abs();
                    worst = Some(worst.map_or(d, |w: f64| w.max(d)));
                }
            }
        }
        worst.ok_or_else(|| Error::Domain("region contains no grid nodes".into()))
    }

    /// Nodes satisfying `region`, as flat indices.
    pub fn nodes_in<P>(&self, region: P) -> Vec<usize>
    where
        P: Fn(&[f64], f64) -> bool,
    {
        let g = &self.grid;
        (0..g.len())
            .filter(|&idx| {
                let (j, k) = g.split(idx);
                region(&g.coords3(j)[..g.n()], g.time(k))
            })
            .collect()
    }
}

/// (min, max) over nodes in `region`.
pub fn extrema<P>(u: &GridFunction, region: P) -> Result<(f64, f64)>
where
    P: Fn(&[f64], f64) -> bool,
{
    let g = u.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for k in 0..g.time_len() {
        let t = g.time(k);
        for j in 0..g.spatial_len() {
            if region(&g.coords3(j)[..g.n()], t) {
                let v = u.value(j, k);
                lo = lo.min(v);
                hi = hi.max(v);
                any = true;
            }
        }
    }
    if any {
        Ok((lo, hi))
    } else {
        domain("region contains no grid nodes")
    }
}

/// max − min of u over the nodes in `region`.
pub fn oscillation<P>(u: &GridFunction, region: P) -> Result<f64>
where
    P: Fn(&[f64], f64) -> bool,
{
    extrema(u, region).map(|(lo, hi)| hi - lo)
}

/// Value, gradient, Hessian and backward time slope at a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderExpansion {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMat,
    pub time_slope: f64,
}

/// Central differences in space and a backward difference in time.
pub fn fd_expansion(u: &GridFunction, j: usize, k: usize) -> Result<SecondOrderExpansion> {
    let g = u.grid();
    let n = g.n();
    let h = g.h();
    if k == 0 || k >= g.time_len() {
        return Err(Error::Boundary(format!("time level {k} has no backward neighbour")));
    }
    if !g.has_full_stencil(j) {
        return Err(Error::Boundary(format!("node {:?} lacks a full stencil", g.coords(j))));
    }
    let c = u.value(j, k);
    let at = |m: Option<usize>| u.value(m.expect("stencil checked"), k);
    let mut gradient = vec![0.0; n];
    let mut hessian = linalg::zeros(n);
    for a in 0..n {
        let up = at(g.neighbor(j, a, 1));
        let dn = at(g.neighbor(j, a, -1));
        gradient[a] = (up - dn) / (2.0 * h);
        hessian[(a, a)] = (up - 2.0 * c + dn) / (h * h);
        for b in a + 1..n {
            let pp = at(g.diagonal(j, a, 1, b, 1));
            let pm = at(g.diagonal(j, a, 1, b, -1));
            let mp = at(g.diagonal(j, a, -1, b, 1));
            let mm = at(g.diagonal(j, a, -1, b, -1));
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hessian[(a, b)] = v;
            hessian[(b, a)] = v;
        }
    }
    Ok(SecondOrderExpansion {
        value: c,
        gradient,
        hessian,
        time_slope: (c - u.value(j, k - 1)) / g.tau(),
    })
}

/// u_ε(x,t) = min over nodes (ξ,τ) of u(ξ,τ) + (|ξ−x|² + (τ−t)²)/ε.
///
/// The penalty is a sum of one-dimensional quadratics, so the minimum is taken axis by axis with
/// exact lower envelopes on the lattice box (cells outside the spatial ball carry +∞).
pub fn inf_convolution(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let g = u.grid();
    let n = g.n();
    let w = g.box_width();
    let slab = w.pow(n as u32);
    let nt = g.time_len();
    let mut data = vec![f64::INFINITY; slab * nt];
    let boxes: Vec<usize> = (0..g.spatial_len()).map(|j| g.box_index(j)).collect();
    for k in 0..nt {
        for (j, &b) in boxes.iter().enumerate() {
            data[k * slab + b] = u.value(j, k);
        }
    }
    let mut shape = vec![w; n];
    shape.push(nt);
    let mut spacings = vec![g.h(); n];
    spacings.push(g.tau());
    let weights = vec![1.0 / eps; n + 1];
    separable_envelope(&mut data, &shape, &spacings, &weights);
    let mut values = vec![0.0; g.len()];
    for k in 0..nt {
        for (j, &b) in boxes.iter().enumerate() {
            values[g.index(j, k)] = data[k * slab + b];
        }
    }
    GridFunction::new(g.clone(), values)
}

/// u^ε(x,t) = max over nodes of u(ξ,τ) − (|ξ−x|² + (τ−t)²)/ε.
pub fn sup_convolution(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    inf_convolution(&u.map(|v| -v)?, eps)?.map(|v| -v)
}

/// Default slack for derivative-based checks on a grid.
pub fn default_tolerance(u: &GridFunction) -> f64 {
    let g = u.grid();
    1e-6 + 10.0 * (g.h() * g.h() + g.tau())
}

/// Whether fd Hessian eigenvalues stay ≤ b and fd u_t ≥ −b at all interior nodes of `region`.
pub fn semiconcavity_check<P>(u: &GridFunction, b: f64, region: P) -> Result<bool>
where
    P: Fn(&[f64], f64) -> bool + Sync,
{
    semiconcavity_check_tol(u, b, region, default_tolerance(u))
}

pub fn semiconcavity_check_tol<P>(u: &GridFunction, b: f64, region: P, tol: f64) -> Result<bool>
where
    P: Fn(&[f64], f64) -> bool + Sync,
{
    if !(b > 0.0) {
        return domain("opening b must be positive");
    }
    let g = u.grid();
    let ok = (0..g.len()).into_par_iter().all(|idx| {
        let (j, k) = g.split(idx);
        if k == 0 || !g.has_full_stencil(j) || !region(&g.coords3(j)[..g.n()], g.time(k)) {
            return true;
        }
        let e = fd_expansion(u, j, k).expect("interior node");
        linalg::max_eigenvalue(&e.hessian) <= b + tol && e.time_slope >= -b - tol
    });
    Ok(ok)
}

/// Constant-in-time extension by at least `below` before t_min and `above` after the last level.
pub fn extend(u: &GridFunction, below: f64, above: f64) -> Result<GridFunction> {
    if !(below >= 0.0 && above >= 0.0) {
        return domain("extension lengths must be nonnegative");
    }
    let g = u.grid();
    let kb = (below / g.tau() - TIME_SNAP).ceil().max(0.0) as usize;
    let ka = (above / g.tau() - TIME_SNAP).ceil().max(0.0) as usize;
    let mut spec = g.spec();
    spec.t_min = g.t_min() - kb as f64 * g.tau();
    spec.t_max = g.t_last() + ka as f64 * g.tau();
    let eg = Arc::new(SpaceTimeGrid::new(spec)?);
    let ns = g.spatial_len();
    let nt = g.time_len();
    let mut values = Vec::with_capacity(eg.len());
    for k in 0..eg.time_len() {
        let src = k.saturating_sub(kb).min(nt - 1);
        values.extend_from_slice(&u.values()[src * ns..(src + 1) * ns]);
    }
    GridFunction::new(eg, values)
}

const MAGIC: &[u8; 4] = b"PBGF";

/// Little-endian binary dump: magic, grid spec, values.
pub fn write_binary<W: Write>(u: &GridFunction, mut w: W) -> Result<()> {
    let s = u.grid().spec();
    w.write_all(MAGIC)?;
    w.write_all(&(s.n as u32).to_le_bytes())?;
    for v in [s.h, s.tau, s.spatial_radius, s.t_min, s.t_max] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(u.values().len() as u64).to_le_bytes())?;
    for v in u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GridFunction> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a grid function dump".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut f = [0.0; 5];
    for v in f.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let grid = Arc::new(SpaceTimeGrid::new(GridSpec {
        n,
        h: f[0],
        tau: f[1],
        spatial_radius: f[2],
        t_min: f[3],
        t_max: f[4],
    })?);
    if grid.len() != len {
        return Err(Error::Io(format!("header promises {len} values, grid has {}", grid.len())));
    }
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    GridFunction::new(grid, values)
}

/// CSV dump: a `#` metadata line, then `index,x1..xn,t,value` rows.
pub fn write_csv<W: Write>(u: &GridFunction, mut w: W) -> Result<()> {
    let g = u.grid();
    let s = g.spec();
    writeln!(w, "# n={},h={:e},tau={:e},spatial_radius={:e},t_min={:e},t_max={:e}", s.n, s.h, s.tau, s.spatial_radius, s.t_min, s.t_max)?;
    let xs: Vec<String> = (1..=s.n).map(|i| format!("x{i}")).collect();
    writeln!(w, "index,{},t,value", xs.join(","))?;
    for idx in 0..g.len() {
        let (j, k) = g.split(idx);
        let c: Vec<String> = g.coords(j).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{idx},{},{:e},{:e}", c.join(","), g.time(k), u.values()[idx])?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<GridFunction> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Io("empty csv".into()))??;
    let meta = header.strip_prefix("# ").ok_or_else(|| Error::Io("missing metadata line".into()))?;
    let mut fields = std::collections::BTreeMap::new();
    for kv in meta.split(',') {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Io(format!("bad metadata field {kv}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<f64> {
        fields
            .get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Io(format!("metadata field {k} missing or malformed")))
    };
    let grid = Arc::new(SpaceTimeGrid::new(GridSpec {
        n: get("n")? as usize,
        h: get("h")?,
        tau: get("tau")?,
        spatial_radius: get("spatial_radius")?,
        t_min: get("t_min")?,
        t_max: get("t_max")?,
    })?);
    lines.next();
    let mut values = vec![f64::NAN; grid.len()];
    for line in lines {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        let idx: usize = cols[0].parse().map_err(|_| Error::Io(format!("bad row {line}")))?;
        let v: f64 = cols[cols.len() - 1].parse().map_err(|_| Error::Io(format!("bad row {line}")))?;
        if idx >= values.len() {
            return Err(Error::Io(format!("index {idx} out of range")));
        }
        values[idx] = v;
    }
    GridFunction::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1(h: f64, tau: f64) -> Arc<SpaceTimeGrid> {
        Arc::new(SpaceTimeGrid::unit(1, h, tau).unwrap())
    }

    #[test]
    fn node_counts() {
        let g = SpaceTimeGrid::unit(2, 0.25, 0.5).unwrap();
        // lattice points of radius ≤ 4 in ℤ²
        assert_eq!(g.spatial_len(), 49);
        assert_eq!(g.time_len(), 3);
        assert_eq!(g.time(2), 0.0);
    }

    #[test]
    fn oscillation_examples() {
        let g = grid1(1.0 / 16.0, 1.0 / 16.0);
        let c = GridFunction::constant(g.clone(), 3.0).unwrap();
        assert_eq!(oscillation(&c, |_, _| true).unwrap(), 0.0);
        let u = GridFunction::from_fn(g.clone(), |x, _| x[0]).unwrap();
        assert!((oscillation(&u, |_, _| true).unwrap() - 2.0).abs() < 1e-15);
        let g3 = grid1(1.0 / 24.0, 1.0 / 72.0);
        let u = GridFunction::from_fn(g3, |x, _| x[0]).unwrap();
        let q = crate::geometry::Cylinder::centered(1, 1.0 / 3.0);
        assert!((oscillation(&u, |x, t| q.contains_coords(x, t)).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(oscillation(&u, |_, _| false).is_err());
    }

    #[test]
    fn fd_expansion_exact_on_quadratics() {
        let g = Arc::new(SpaceTimeGrid::unit(3, 0.25, 0.125).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x, t| {
            0.5 * (x[0] * x[0] - 2.0 * x[1] * x[1] + 0.6 * x[0] * x[2] + x[2] * x[2]) + 0.3 * x[0] - x[1] + 2.0 + 0.7 * t
        })
        .unwrap();
        let j = g.find([0, 0, 0]).unwrap();
        let e = fd_expansion(&u, j, 4).unwrap();
        assert!((e.hessian[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((e.hessian[(1, 1)] + 2.0).abs() < 1e-10);
        assert!((e.hessian[(0, 2)] - 0.3).abs() < 1e-10);
        assert!((e.gradient[0] - 0.3).abs() < 1e-12);
        assert!((e.gradient[1] + 1.0).abs() < 1e-12);
        assert!((e.time_slope - 0.7).abs() < 1e-12);
        assert!(fd_expansion(&u, j, 0).is_err());
        let edge = g.find([4, 0, 0]).unwrap();
        assert!(matches!(fd_expansion(&u, edge, 2), Err(Error::Boundary(_))));
    }

    #[test]
    fn fd_expansion_smooth_accuracy() {
        let h = 1.0 / 64.0;
        let tau = h * h;
        let g = Arc::new(SpaceTimeGrid::new(GridSpec { n: 1, h, tau, spatial_radius: 1.0, t_min: -0.01, t_max: 0.0 }).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x, t| x[0].sin() * (-t).exp()).unwrap();
        let j = g.find([0, 0, 0]).unwrap();
        let e = fd_expansion(&u, j, g.time_len() - 1).unwrap();
        let tol = 10.0 * (h * h + tau);
        assert!((e.gradient[0] - 1.0).abs() < tol);
        assert!(e.hessian[(0, 0)].abs() < tol);
        assert!(e.time_slope.abs() < tol);
        let j = g.find([20, 0, 0]).unwrap();
        let x = 20.0 * h;
        let e = fd_expansion(&u, j, g.time_len() - 1).unwrap();
        assert!((e.time_slope + x.sin()).abs() < tol);
        assert!((e.hessian[(0, 0)] + x.sin()).abs() < tol);
    }

    #[test]
    fn inf_convolution_of_abs() {
        let h = 1.0 / 200.0;
        let g = Arc::new(SpaceTimeGrid::new(GridSpec { n: 1, h, tau: 0.5, spatial_radius: 1.0, t_min: -0.5, t_max: 0.0 }).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x, _| x[0].abs()).unwrap();
        let ue = inf_convolution(&u, 0.2).unwrap();
        let j = g.find_coords(&[0.2]).unwrap();
        assert!((ue.value(j, 1) - 0.15).abs() < 1e-12);
        let us = sup_convolution(&u.map(|v| -v).unwrap(), 0.2).unwrap();
        assert!((us.value(j, 1) + 0.15).abs() < 1e-12);
    }

    #[test]
    fn inf_convolution_matches_brute_force() {
        let g = Arc::new(SpaceTimeGrid::unit(2, 0.2, 0.25).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x, t| (3.0 * x[0]).sin() + x[1] * t + (x[0] * x[1]).cos()).unwrap();
        let eps = 0.3;
        let ue = inf_convolution(&u, eps).unwrap();
        for idx in 0..g.len() {
            let (j, k) = g.split(idx);
            let (x, t) = (g.coords(j), g.time(k));
            let mut best = f64::INFINITY;
            for idx2 in 0..g.len() {
                let (j2, k2) = g.split(idx2);
                let c = u.values()[idx2] + (linalg::dist2(&g.coords(j2), &x) + (g.time(k2) - t).powi(2)) / eps;
                best = best.min(c);
            }
            assert!((ue.values()[idx] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn inf_convolution_is_semiconcave() {
        let h = 1.0 / 32.0;
        let g = Arc::new(SpaceTimeGrid::unit(1, h, h).unwrap());
        let u = GridFunction::from_fn(g.clone(), |x, t| (5.0 * x[0]).sin() * (1.0 + t) + x[0].abs()).unwrap();
        let eps = 0.1;
        let ue = inf_convolution(&u, eps).unwrap();
        assert!(semiconcavity_check(&ue, 2.0 / eps, |_, _| true).unwrap());
        assert!(ue.values().iter().zip(u.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn semiconcavity_examples() {
        let h = 1.0 / 64.0;
        let g = grid1(h, h);
        let smooth = GridFunction::from_fn(g.clone(), |x, t| 0.5 * x[0].sin() + 0.25 * t).unwrap();
        assert!(semiconcavity_check(&smooth, 2.0, |_, _| true).unwrap());
        let kink = GridFunction::from_fn(g.clone(), |x, _| -x[0].abs()).unwrap();
        assert!(semiconcavity_check(&kink, 0.01, |_, _| true).unwrap());
        let vee = GridFunction::from_fn(g.clone(), |x, _| x[0].abs()).unwrap();
        assert!(!semiconcavity_check(&vee, 1.0, |_, _| true).unwrap());
    }

    #[test]
    fn extension_preserves_values() {
        let g = grid1(0.25, 0.25);
        let u = GridFunction::from_fn(g.clone(), |x, t| x[0] + t).unwrap();
        let e = extend(&u, 0.5, 1.0).unwrap();
        assert_eq!(e.grid().time_len(), g.time_len() + 6);
        assert_eq!(e.min(), u.min());
        assert_eq!(e.max(), u.max());
        for k in 0..g.time_len() {
            assert_eq!(e.slice(k + 2), u.slice(k));
        }
        assert_eq!(e.slice(0), u.slice(0));
        assert_eq!(e.slice(e.grid().time_len() - 1), u.slice(g.time_len() - 1));
    }

    #[test]
    fn serialization_roundtrip() {
        let g = Arc::new(SpaceTimeGrid::unit(2, 0.25, 0.5).unwrap());
        let u = GridFunction::from_fn(g, |x, t| x[0] * 0.1 + x[1].powi(3) - t / 3.0).unwrap();
        let mut buf = Vec::new();
        write_binary(&u, &mut buf).unwrap();
        let v = read_binary(&buf[..]).unwrap();
        assert_eq!(u.values(), v.values());
        let mut csv = Vec::new();
        write_csv(&u, &mut csv).unwrap();
        let w = read_csv(&csv[..]).unwrap();
        assert_eq!(u.values(), w.values());
        assert_eq!(u.grid().spec(), w.grid().spec());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inf_convolution_monotone(a in -1.0..1.0f64, b in -1.0..1.0f64, shift in 0.0..0.5f64, eps in 0.05..1.0f64) {
            let g = grid1(1.0 / 16.0, 1.0 / 8.0);
            let u = GridFunction::from_fn(g.clone(), |x, t| a * x[0] + b * t * x[0]).unwrap();
            let v = u.map(|y| y + shift).unwrap();
            let ue = inf_convolution(&u, eps).unwrap();
            let ve = inf_convolution(&v, eps).unwrap();
            prop_assert!(ue.values().iter().zip(ve.values()).all(|(p, q)| p <= q));
        }

        #[test]
        fn inf_convolution_ordered_in_eps(e1 in 0.05..1.0f64, frac in 0.1..1.0f64) {
            let g = grid1(1.0 / 16.0, 1.0 / 8.0);
            let u = GridFunction::from_fn(g.clone(), |x, t| (4.0 * x[0]).cos() + t).unwrap();
            let e2 = e1 * frac;
            let u1 = inf_convolution(&u, e1).unwrap();
            let u2 = inf_convolution(&u, e2).unwrap();
            for i in 0..u.values().len() {
                prop_assert!(u1.values()[i] <= u2.values()[i] + 1e-15);
                prop_assert!(u2.values()[i] <= u.values()[i] + 1e-15);
            }
        }

        #[test]
        fn oscillation_monotone_under_inclusion(r1 in 0.1..1.0f64, r2 in 0.1..1.0f64) {
            let g = grid1(1.0 / 32.0, 1.0 / 32.0);
            let u = GridFunction::from_fn(g.clone(), |x, t| (3.0 * x[0] + t).sin()).unwrap();
            let (s, l) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let qs = crate::geometry::Cylinder::centered(1, s);
            let ql = crate::geometry::Cylinder::centered(1, l);
            if let (Ok(a), Ok(b)) = (oscillation(&u, |x, t| qs.contains_coords(x, t)), oscillation(&u, |x, t| ql.contains_coords(x, t))) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn sup_inf_duality(c in -1.0..1.0f64, eps in 0.05..1.0f64) {
            let g = grid1(1.0 / 16.0, 1.0 / 8.0);
            let u = GridFunction::from_fn(g.clone(), |x, t| c * x[0].abs() + t * t).unwrap();
            let s = sup_convolution(&u, eps).unwrap();
            let i = inf_convolution(&u.map(|v| -v).unwrap(), eps).unwrap();
            prop_assert!(s.values().iter().zip(i.values()).all(|(a, b)| *a == -*b));
        }
    }
}

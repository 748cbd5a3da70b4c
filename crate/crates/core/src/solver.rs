//! Explicit monotone finite-difference solver for F(D²u, Du, u, x, t) − u_t = 0,
//! residual evaluation and a discrete touching-paraboloid test.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cylinder;
use crate::gridfn::{fd_expansion, GridFunction, SpaceTimeGrid};
use crate::linalg::{self, SymMat};
use crate::operators::{make_linear, EllipticOperator};

type BoundaryFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Values prescribed on the parabolic boundary (and used for the initial slice).
#[derive(Clone)]
pub enum BoundaryData {
    Function(BoundaryFn),
    /// Samples at matching lattice points, linear in time.
    Grid(GridFunction),
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryData::Function(_) => write!(f, "BoundaryData::Function"),
            BoundaryData::Grid(g) => write!(f, "BoundaryData::Grid({:?})", g.grid().spec()),
        }
    }
}

impl BoundaryData {
    pub fn from_fn<F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        BoundaryData::Function(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        match self {
            BoundaryData::Function(f) => Ok(f(x, t)),
            BoundaryData::Grid(u) => u
                .sample(x, t)
                .ok_or_else(|| Error::Boundary(format!("boundary grid has no node at {x:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Substeps {
    /// Enough internal steps per output step to satisfy the CFL bound scaled by `cfl_factor`.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl_factor: f64,
    pub substeps: Substeps,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { cfl_factor: 0.9, substeps: Substeps::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub substeps: usize,
    pub dt: f64,
    pub dt_max: f64,
    pub active_nodes: usize,
    /// Node updates whose Hessian had to be clamped into U_δ.
    pub clamped: usize,
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction,
    pub stats: SolveStats,
}

/// Largest stable explicit step: h²/(2nΛ + |∇_pF|·h·n).
pub fn cfl_limit(f: &dyn EllipticOperator, h: f64) -> f64 {
    let c = f.constants();
    let n = f.dim() as f64;
    h * h / (2.0 * n * c.big_lambda + c.p_lipschitz * h * n)
}

/// Stencil of an active node: center, ±e_a pairs, then the four diagonals per pair a < b.
struct Stencils {
    n: usize,
    width: usize,
    nodes: Vec<usize>,
    idx: Vec<usize>,
}

impl Stencils {
    fn build(grid: &SpaceTimeGrid, domain: &Cylinder) -> Self {
        let n = grid.n();
        let width = 1 + 2 * n + 2 * n * (n - 1);
        let mut nodes = Vec::new();
        let mut idx = Vec::new();
        for j in 0..grid.spatial_len() {
            if !grid.has_full_stencil(j) {
                continue;
            }
            let x = grid.coords(j);
            if linalg::dist2(&x, &domain.center).sqrt() >= domain.radius * (1.0 - 1e-12) {
                continue;
            }
            nodes.push(j);
            idx.push(j);
            for a in 0..n {
                idx.push(grid.neighbor(j, a, 1).unwrap());
                idx.push(grid.neighbor(j, a, -1).unwrap());
            }
            for a in 0..n {
                for b in a + 1..n {
                    for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                        idx.push(grid.diagonal(j, a, sa, b, sb).unwrap());
                    }
                }
            }
        }
        Self { n, width, nodes, idx }
    }

    /// Fills (M, p) from the values `u` at stencil `s`; returns u at the center.
    fn derivatives(&self, s: usize, u: &[f64], h: f64, m: &mut SymMat, p: &mut [f64]) -> f64 {
        let st = &self.idx[s * self.width..(s + 1) * self.width];
        let c = u[st[0]];
        let n = self.n;
        for a in 0..n {
            let up = u[st[1 + 2 * a]];
            let dn = u[st[2 + 2 * a]];
            p[a] = (up - dn) / (2.0 * h);
            m[(a, a)] = (up - 2.0 * c + dn) / (h * h);
        }
        let mut q = 1 + 2 * n;
        for a in 0..n {
            for b in a + 1..n {
                let v = (u[st[q]] - u[st[q + 1]] - u[st[q + 2]] + u[st[q + 3]]) / (4.0 * h * h);
                m[(a, b)] = v;
                m[(b, a)] = v;
                q += 4;
            }
        }
        c
    }
}

struct Stepper<'a> {
    f: &'a dyn EllipticOperator,
    grid: &'a SpaceTimeGrid,
    st: Stencils,
    coords: Vec<[f64; 3]>,
}

impl Stepper<'_> {
    /// Explicit update at active node s: u + dt·F(D²u, Du, u, x, t); also reports clamping.
    fn update(&self, s: usize, u: &[f64], t: f64, dt: f64, m: &mut SymMat, p: &mut [f64]) -> Result<(f64, bool)> {
        let n = self.grid.n();
        let c = self.st.derivatives(s, u, self.grid.h(), m, p);
        let delta = self.f.constants().delta;
        let x = &self.coords[self.st.nodes[s]][..n];
        let mut clamped = false;
        let val = if delta.is_finite() && linalg::spectral_norm(m) > delta {
            let (mc, _) = linalg::clamp_norm(m, delta * (1.0 - 1e-12));
            clamped = true;
            self.f.eval(&mc, p, c, x, t)?
        } else {
            self.f.eval(m, p, c, x, t)?
        };
        Ok((c + dt * val, clamped))
    }

    /// Sign check of all partial derivatives of the update map at a few stencils of `u`.
    fn monotone(&self, u: &[f64], t: f64, dt: f64) -> bool {
        let n = self.grid.n();
        let mut m = linalg::zeros(n);
        let mut p = vec![0.0; n];
        let count = self.st.nodes.len();
        let step = (count / 16).max(1);
        let bump = 1e-7 * (1.0 + u.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let mut work = u.to_vec();
        for s in (0..count).step_by(step) {
            let Ok((base, _)) = self.update(s, &work, t, dt, &mut m, &mut p) else { continue };
            for q in 0..self.st.width {
                let node = self.st.idx[s * self.st.width + q];
                let saved = work[node];
                work[node] = saved + bump;
                let res = self.update(s, &work, t, dt, &mut m, &mut p);
                work[node] = saved;
                if let Ok((v, _)) = res {
                    if (v - base) / bump < -1e-6 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Solves F − u_t = 0 on the grid, pinning nodes outside `domain` or without a full stencil to `bdata`.
pub fn solve_parabolic(
    f: &dyn EllipticOperator,
    bdata: &BoundaryData,
    grid: Arc<SpaceTimeGrid>,
    domain: &Cylinder,
    cfg: &SolverConfig,
) -> Result<Solution> {
    if f.dim() != grid.n() || domain.dim() != grid.n() {
        return Err(Error::Config("operator, grid and domain dimensions differ".into()));
    }
    let dt_max = cfl_limit(f, grid.h());
    let tau = grid.tau();
    let substeps = match cfg.substeps {
        Substeps::Auto => {
            if !(cfg.cfl_factor > 0.0 && cfg.cfl_factor <= 1.0) {
                return Err(Error::Config(format!("CFL factor {} not in (0, 1]", cfg.cfl_factor)));
            }
            (tau / (cfg.cfl_factor * dt_max) - 1e-9).ceil().max(1.0) as usize
        }
        Substeps::Fixed(m) => {
            if m == 0 || tau / m as f64 > dt_max * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "time step {} violates the CFL bound {dt_max:e}",
                    tau / m.max(1) as f64
                )));
            }
            m
        }
    };
    let dt = tau / substeps as f64;
    let n = grid.n();
    let ns = grid.spatial_len();
    let stepper = Stepper {
        f,
        grid: &grid,
        st: Stencils::build(&grid, domain),
        coords: (0..ns).map(|j| grid.coords3(j)).collect(),
    };
    let active: Vec<bool> = {
        let mut a = vec![false; ns];
        for &j in &stepper.st.nodes {
            a[j] = true;
        }
        a
    };
    let boundary: Vec<usize> = (0..ns).filter(|&j| !active[j]).collect();
    let mut cur = vec![0.0; ns];
    for j in 0..ns {
        cur[j] = bdata.eval(&stepper.coords[j][..n], grid.t_min())?;
    }
    let monotone = stepper.monotone(&cur, grid.t_min(), dt);
    let mut values = Vec::with_capacity(grid.len());
    values.extend_from_slice(&cur);
    let mut next = cur.clone();
    let mut clamped = 0usize;
    let parallel = stepper.st.nodes.len() > 2048;
    for k in 0..grid.time_len() - 1 {
        for s in 0..substeps {
            let t = grid.time(k) + s as f64 * dt;
            let updates: Vec<Result<(f64, bool)>> = if parallel {
                (0..stepper.st.nodes.len())
                    .into_par_iter()
                    .map_init(
                        || (linalg::zeros(n), vec![0.0; n]),
                        |(m, p), i| stepper.update(i, &cur, t, dt, m, p),
                    )
                    .collect()
            } else {
                let mut m = linalg::zeros(n);
                let mut p = vec![0.0; n];
                (0..stepper.st.nodes.len()).map(|i| stepper.update(i, &cur, t, dt, &mut m, &mut p)).collect()
            };
            for (i, r) in updates.into_iter().enumerate() {
                let (v, c) = r?;
                next[stepper.st.nodes[i]] = v;
                clamped += c as usize;
            }
            let t_next = if s + 1 == substeps { grid.time(k + 1) } else { t + dt };
            for &j in &boundary {
                next[j] = bdata.eval(&stepper.coords[j][..n], t_next)?;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        values.extend_from_slice(&cur);
    }
    let active_nodes = stepper.st.nodes.len();
    Ok(Solution {
        u: GridFunction::new(grid, values)?,
        stats: SolveStats { substeps, dt, dt_max, active_nodes, clamped, monotone },
    })
}

/// [`solve_parabolic`] on the whole grid with the default configuration.
pub fn solve(f: &dyn EllipticOperator, bdata: &BoundaryData, grid: Arc<SpaceTimeGrid>) -> Result<Solution> {
    let domain = Cylinder::new(vec![0.0; grid.n()], grid.t_last(), grid.spatial_radius())?;
    solve_parabolic(f, bdata, grid, &domain, &SolverConfig::default())
}

/// Scaled interior derivative sizes of a solution over a shrunken cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorEstimates {
    pub eps: f64,
    pub grad: f64,
    pub hess: f64,
    pub dt: f64,
    pub third: f64,
    /// Maximum of the four scaled quantities: the measured C̃.
    pub c_tilde: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct LinearHeatSolution {
    pub solution: Solution,
    pub estimates: InteriorEstimates,
}

/// Solves tr(A D²h) − h_t = 0 and reports ε‖Dh‖, ε²‖D²h‖, ε²|h_t|, ε³‖D³h‖ over Q_{R−ε}.
pub fn solve_linear_heat(
    a: &SymMat,
    bdata: &BoundaryData,
    grid: Arc<SpaceTimeGrid>,
    domain: &Cylinder,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<LinearHeatSolution> {
    let n = grid.n();
    let op = make_linear(a, &vec![0.0; n], 0.0)?;
    let solution = solve_parabolic(&op, bdata, grid, domain, cfg)?;
    let estimates = interior_estimates(&solution.u, domain, eps)?;
    Ok(LinearHeatSolution { solution, estimates })
}

/// Interior estimates of u over Q_{R−ε}(center, top) for the cylinder Q_R = `domain`.
pub fn interior_estimates(u: &GridFunction, domain: &Cylinder, eps: f64) -> Result<InteriorEstimates> {
    if !(eps > 0.0 && eps < domain.radius) {
        return Err(Error::Domain(format!("ε = {eps} must lie in (0, {})", domain.radius)));
    }
    let g = u.grid();
    let n = g.n();
    let h = g.h();
    let inner = Cylinder::new(domain.center.clone(), domain.top_time, domain.radius - eps)?;
    let mut est = InteriorEstimates { eps, grad: 0.0, hess: 0.0, dt: 0.0, third: 0.0, c_tilde: 0.0, nodes: 0 };
    for k in 1..g.time_len() {
        let t = g.time(k);
        for j in 0..g.spatial_len() {
            let x = g.coords(j);
            if !inner.contains_coords(&x, t) {
                continue;
            }
            let Ok(e) = fd_expansion(u, j, k) else { continue };
            let mut third = 0.0;
            let mut ok = true;
            for a in 0..n {
                let (Some(jp), Some(jm)) = (g.neighbor(j, a, 1), g.neighbor(j, a, -1)) else {
                    ok = false;
                    break;
                };
                match (fd_expansion(u, jp, k), fd_expansion(u, jm, k)) {
                    (Ok(ep), Ok(em)) => third += ((&ep.hessian - &em.hessian) / (2.0 * h)).norm_squared(),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            est.nodes += 1;
            est.grad = est.grad.max(eps * linalg::norm(&e.gradient));
            est.hess = est.hess.max(eps * eps * linalg::spectral_norm(&e.hessian));
            est.dt = est.dt.max(eps * eps * e.time_slope.abs());
            est.third = est.third.max(eps.powi(3) * third.sqrt());
        }
    }
    if est.nodes == 0 {
        return Err(Error::Domain("no interior nodes for derivative estimates".into()));
    }
    est.c_tilde = est.grad.max(est.hess).max(est.dt).max(est.third);
    Ok(est)
}

/// Nodewise F(D²_h u, D_h u, u, x, t) − ∂_t^− u; `None` where the stencil is incomplete.
#[derive(Debug, Clone)]
pub struct ResidualField {
    pub grid: Arc<SpaceTimeGrid>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Solution,
    Subsolution,
    Supersolution,
    Neither,
}

impl ResidualField {
    pub fn valid(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    pub fn max_abs(&self) -> f64 {
        self.valid().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.valid().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.valid().fold(f64::INFINITY, f64::min)
    }

    /// Max |residual| over valid nodes in `region`.
    pub fn max_abs_in<P: Fn(&[f64], f64) -> bool>(&self, region: P) -> f64 {
        let g = &self.grid;
        self.values
            .iter()
            .enumerate()
            .filter_map(|(idx, v)| {
                let (j, k) = g.split(idx);
                v.filter(|_| region(&g.coords3(j)[..g.n()], g.time(k)))
            })
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Supersolution means F − u_t ≤ tol everywhere; subsolution means ≥ −tol.
    pub fn classify(&self, tol: f64) -> Classification {
        let sup = self.max() <= tol;
        let sub = self.min() >= -tol;
        match (sub, sup) {
            (true, true) => Classification::Solution,
            (true, false) => Classification::Subsolution,
            (false, true) => Classification::Supersolution,
            (false, false) => Classification::Neither,
        }
    }
}

pub fn residual(f: &dyn EllipticOperator, u: &GridFunction) -> Result<ResidualField> {
    let g = u.grid().clone();
    let values = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let (j, k) = g.split(idx);
            let Ok(e) = fd_expansion(u, j, k) else { return Ok(None) };
            let x = g.coords(j);
            Ok(Some(f.eval(&e.hessian, &e.gradient, e.value, &x, g.time(k))? - e.time_slope))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualField { grid: g, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchReport {
    pub samples: usize,
    /// Points where a paraboloid touching from below has F(M) − β > tol.
    pub super_violations: usize,
    /// Points where a paraboloid touching from above has F(M) − β < −tol.
    pub sub_violations: usize,
    pub worst_super: f64,
    pub worst_sub: f64,
    pub tol: f64,
}

/// Discrete touching test on the local stencil.
///
/// The candidate paraboloids share the central gradient of u and have Hessian D²_h u ∓ sI and time
/// slope ∂_t^− u. The smallest s ≥ 0 that makes the paraboloid stay below (above) u on the 3ⁿ
/// neighbourhood is computed in closed form; by ellipticity that paraboloid is the most
/// demanding member of the family.
pub fn viscosity_touch_test(f: &dyn EllipticOperator, u: &GridFunction, nodes: &[(usize, usize)], tol: f64) -> Result<TouchReport> {
    let g = u.grid();
    let n = g.n();
    let h = g.h();
    let offsets: Vec<[i32; 3]> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            let mut o = [0i32; 3];
            for d in 0..n {
                o[d] = (c % 3) as i32 - 1;
                c /= 3;
            }
            o
        })
        .filter(|o| o.iter().any(|&v| v != 0))
        .collect();
    let mut rep = TouchReport {
        samples: 0,
        super_violations: 0,
        sub_violations: 0,
        worst_super: f64::NEG_INFINITY,
        worst_sub: f64::INFINITY,
        tol,
    };
    for &(j, k) in nodes {
        let Ok(e) = fd_expansion(u, j, k) else { continue };
        rep.samples += 1;
        let base = g.lattice(j);
        let (mut s_below, mut s_above) = (0.0f64, 0.0f64);
        for o in &offsets {
            let l = [base[0] + o[0], base[1] + o[1], base[2] + o[2]];
            let Some(jn) = g.find(l) else { continue };
            let d: Vec<f64> = (0..n).map(|a| o[a] as f64 * h).collect();
            let d2: f64 = d.iter().map(|v| v * v).sum();
            let mut quad = 0.0;
            for a in 0..n {
                for b in 0..n {
                    quad += d[a] * e.hessian[(a, b)] * d[b];
                }
            }
            let lin: f64 = d.iter().zip(&e.gradient).map(|(a, b)| a * b).sum();
            let du = u.value(jn, k) - e.value;
            s_below = s_below.max((0.5 * quad + lin - du) * 2.0 / d2);
            s_above = s_above.max((du - 0.5 * quad - lin) * 2.0 / d2);
        }
        let x = g.coords(j);
        let t = g.time(k);
        let eye = linalg::identity(n);
        let below = f.eval(&(&e.hessian - &eye * s_below), &e.gradient, e.value, &x, t)? - e.time_slope;
        let above = f.eval(&(&e.hessian + &eye * s_above), &e.gradient, e.value, &x, t)? - e.time_slope;
        rep.worst_super = rep.worst_super.max(below);
        rep.worst_sub = rep.worst_sub.min(above);
        if below > tol {
            rep.super_violations += 1;
        }
        if above < -tol {
            rep.sub_violations += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::GridSpec;
    use crate::operators::{make_heat, make_pucci_minimal};

    fn unit_grid(n: usize, h: f64, tau: f64) -> Arc<SpaceTimeGrid> {
        Arc::new(SpaceTimeGrid::unit(n, h, tau).unwrap())
    }

    #[test]
    fn heat_exact_on_quadratic() {
        let f = make_heat(1).unwrap();
        let g = unit_grid(1, 1.0 / 32.0, 1.0 / 64.0);
        let b = BoundaryData::from_fn(|x, t| x[0] * x[0] + 2.0 * t);
        let s = solve(&f, &b, g).unwrap();
        let exact = GridFunction::from_fn(s.u.grid().clone(), |x, t| x[0] * x[0] + 2.0 * t).unwrap();
        assert!(s.u.max_abs_diff_in(&exact, |_, _| true).unwrap() < 1e-10);
        assert!(s.stats.monotone);
    }

    #[test]
    fn pucci_exact_on_convex_quadratic() {
        let f = make_pucci_minimal(0.5, 2.0, 1).unwrap();
        let g = unit_grid(1, 1.0 / 32.0, 1.0 / 64.0);
        let b = BoundaryData::from_fn(|x, t| 0.5 * x[0] * x[0] + 0.5 * t);
        let s = solve(&f, &b, g).unwrap();
        let exact = GridFunction::from_fn(s.u.grid().clone(), |x, t| 0.5 * x[0] * x[0] + 0.5 * t).unwrap();
        assert!(s.u.max_abs_diff_in(&exact, |_, _| true).unwrap() < 1e-10);
    }

    #[test]
    fn zero_data_gives_zero() {
        let f = make_pucci_minimal(0.5, 2.0, 2).unwrap();
        let g = unit_grid(2, 1.0 / 8.0, 1.0 / 16.0);
        let s = solve(&f, &BoundaryData::from_fn(|_, _| 0.0), g).unwrap();
        assert_eq!(s.u.sup_norm(), 0.0);
    }

    #[test]
    fn fixed_substeps_violating_cfl_is_rejected() {
        let f = make_heat(1).unwrap();
        let g = unit_grid(1, 1.0 / 16.0, 1.0 / 16.0);
        let d = Cylinder::unit(1);
        let cfg = SolverConfig { cfl_factor: 1.0, substeps: Substeps::Fixed(1) };
        assert!(matches!(solve_parabolic(&f, &BoundaryData::from_fn(|_, _| 0.0), g, &d, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn maximum_principle() {
        let f = make_heat(2).unwrap();
        let g = unit_grid(2, 1.0 / 8.0, 1.0 / 32.0);
        let b = BoundaryData::from_fn(|x, t| (5.0 * x[0] + 3.0 * t).sin() * (2.0 * x[1]).cos());
        let s = solve(&f, &b, g).unwrap();
        assert!(s.u.sup_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn residual_examples() {
        let f = make_heat(1).unwrap();
        let g = unit_grid(1, 1.0 / 16.0, 1.0 / 32.0);
        let q = GridFunction::from_fn(g.clone(), |x, t| x[0] * x[0] + 2.0 * t).unwrap();
        assert!(residual(&f, &q).unwrap().max_abs() < 1e-10);
        let shifted = GridFunction::from_fn(g, |x, t| x[0] * x[0] + 2.0 * t + 0.3 * t).unwrap();
        let r = residual(&f, &shifted).unwrap();
        assert!((r.max() + 0.3).abs() < 1e-9 && (r.min() + 0.3).abs() < 1e-9);
        assert_eq!(r.classify(1e-6), Classification::Supersolution);
    }

    #[test]
    fn touch_test_flags_concave_kink() {
        let f = make_heat(1).unwrap();
        let g = unit_grid(1, 1.0 / 16.0, 1.0 / 32.0);
        let u = GridFunction::from_fn(g.clone(), |x, _| -x[0].abs()).unwrap();
        let j = g.find([0, 0, 0]).unwrap();
        let r = viscosity_touch_test(&f, &u, &[(j, 5)], 1e-6).unwrap();
        assert_eq!(r.sub_violations, 1);
        assert_eq!(r.super_violations, 0);
        let z = GridFunction::constant(g, 0.0).unwrap();
        let r = viscosity_touch_test(&f, &z, &[(j, 5)], 1e-6).unwrap();
        assert_eq!(r.sub_violations + r.super_violations, 0);
    }

    #[test]
    fn interior_estimates_of_quadratic() {
        let g = Arc::new(SpaceTimeGrid::new(GridSpec { n: 1, h: 1.0 / 32.0, tau: 1.0 / 64.0, spatial_radius: 0.75, t_min: -0.5625, t_max: 0.0 }).unwrap());
        let d = Cylinder::centered(1, 0.75);
        let r = solve_linear_heat(&linalg::identity(1), &BoundaryData::from_fn(|x, t| x[0] * x[0] + 2.0 * t), g, &d, 0.25, &SolverConfig::default()).unwrap();
        let e = r.estimates;
        assert!((e.hess - 0.0625 * 2.0).abs() < 1e-8);
        assert!(e.third < 1e-6);
        assert!((e.dt - 0.125).abs() < 1e-8);
    }
}

//! Improvement of quadratic approximations: the rescaled problem, the linear
//! comparison solve, the s₀ correction, the level iteration and the C^{2,α} bound.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::barrier::{comparison_check, ComparisonReport};
use crate::error::{domain, Error, Result};
use crate::geometry::Cylinder;
use crate::gridfn::{fd_expansion, GridFunction, GridSpec, SpaceTimeGrid};
use crate::linalg::{self, SymMat};
use crate::operators::{df_at, EllipticOperator, Modulus, OperatorConstants, OperatorRef, QuadPoly};
use crate::solver::{solve_linear_heat, BoundaryData, InteriorEstimates, SolverConfig};

/// F̃(N, q, v, x, t) = r^{−α}[F(M + r^αN, p + rMx + r^{1+α}q, P(rx, r²t) + r^{2+α}v, rx, r²t)
/// − F(M, p + rMx, P(rx, r²t), rx, r²t)].
#[derive(Debug, Clone)]
pub struct RescaledOperator {
    inner: OperatorRef,
    poly: QuadPoly,
    r: f64,
    alpha: f64,
    consts: OperatorConstants,
}

impl RescaledOperator {
    pub fn new(inner: OperatorRef, poly: QuadPoly, r: f64, alpha: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0 && alpha > 0.0 && alpha < 1.0) {
            return domain(format!("need r ∈ (0,1] and α ∈ (0,1), got r = {r}, α = {alpha}"));
        }
        if poly.dim() != inner.dim() {
            return domain("polynomial and operator dimensions differ");
        }
        let c = inner.constants();
        let ra = r.powf(alpha);
        let consts = OperatorConstants {
            lambda: c.lambda,
            big_lambda: c.big_lambda,
            delta: c.delta / ra,
            k: c.k,
            modulus: match c.modulus {
                Modulus::Lipschitz(l) => Modulus::Lipschitz(l * ra),
                m => m,
            },
            p_lipschitz: c.p_lipschitz * r,
        };
        Ok(Self { inner, poly, r, alpha, consts })
    }
}

impl EllipticOperator for RescaledOperator {
    fn name(&self) -> String {
        format!("rescaled({}, r={})", self.inner.name(), self.r)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn constants(&self) -> &OperatorConstants {
        &self.consts
    }
    fn eval(&self, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64) -> Result<f64> {
        let (r, a) = (self.r, self.alpha);
        let ra = r.powf(a);
        let rx: Vec<f64> = x.iter().map(|v| r * v).collect();
        let rt = r * r * t;
        let base_p: Vec<f64> = self.poly.gradient(&rx);
        let base_z = self.poly.eval(&rx, rt);
        let mm = &self.poly.m + m * ra;
        let pp: Vec<f64> = base_p.iter().zip(p).map(|(b, q)| b + r * ra * q).collect();
        let hi = self.inner.eval(&mm, &pp, base_z + r * r * ra * z, &rx, rt)?;
        let lo = self.inner.eval(&self.poly.m, &base_p, base_z, &rx, rt)?;
        Ok((hi - lo) / ra)
    }
}

/// w(x,t) = (u(rx, r²t) − P(rx, r²t))/r^{2+α} on a unit grid with spacing h/r.
///
/// The time step of w is the largest power of two not exceeding min(τ/r², (h/r)²); u is
/// interpolated linearly in time where needed. Fails when ‖w‖ exceeds `bound`.
pub fn rescale_w(u: &GridFunction, poly: &QuadPoly, r: f64, alpha: f64, bound: f64) -> Result<GridFunction> {
    let g = u.grid();
    let n = g.n();
    if !(r > 0.0 && r <= g.spatial_radius() && r * r <= -g.t_min() + 1e-12) {
        return domain(format!("Q_{r} does not fit in the grid"));
    }
    let hw = g.h() / r;
    let cap = (g.tau() / (r * r)).min(hw * hw);
    let tau_w = 2f64.powi(cap.log2().floor() as i32);
    let wg = Arc::new(SpaceTimeGrid::new(GridSpec { n, h: hw, tau: tau_w, spatial_radius: 1.0, t_min: -1.0, t_max: 0.0 })?);
    let scale = r.powf(2.0 + alpha);
    let mut values = Vec::with_capacity(wg.len());
    for k in 0..wg.time_len() {
        let t = r * r * wg.time(k);
        for j in 0..wg.spatial_len() {
            let x: Vec<f64> = wg.coords(j).iter().map(|v| r * v).collect();
            let uv = u.sample(&x, t).ok_or_else(|| Error::Domain(format!("u has no node at {x:?}")))?;
            values.push((uv - poly.eval(&x, t)) / scale);
        }
    }
    let w = GridFunction::new(wg, values)?;
    let sup = w.sup_norm();
    if sup > bound {
        return Err(Error::Step(format!("‖u − P‖ on Q_{r} is {} · r^(2+α), above {bound}", sup)));
    }
    Ok(w)
}

/// Taylor polynomial of h at (0,0) from central differences and a backward time difference.
pub fn taylor_at_origin(h: &GridFunction) -> Result<QuadPoly> {
    let g = h.grid();
    let j = g.find([0, 0, 0]).ok_or_else(|| Error::Domain("grid has no spatial origin".into()))?;
    let k = g.time_index(0.0).ok_or_else(|| Error::Domain("grid has no level t = 0".into()))?;
    let e = fd_expansion(h, j, k)?;
    QuadPoly::new(e.hessian, e.gradient, e.value, e.time_slope)
}

/// Leftmost root of s ↦ F̃(M̃ + sI, p̃, z̃, 0, 0) − β̃ in [−δ̃/2, δ̃/2].
pub fn solve_s0(ft: &dyn EllipticOperator, m: &SymMat, p: &[f64], z: f64, beta: f64, delta_tilde: f64) -> Result<f64> {
    let n = ft.dim();
    let origin = vec![0.0; n];
    let eye = linalg::identity(n);
    let g = |s: f64| -> Result<f64> { Ok(ft.eval(&(m + &eye * s), p, z, &origin, 0.0)? - beta) };
    let tol = 1e-12 * beta.abs().max(1.0);
    let g0 = g(0.0)?;
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let s_max = (0.5 * delta_tilde).min(1e12 * (1.0 + beta.abs() + linalg::spectral_norm(m)));
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = 1e-3 * (1.0 + beta.abs());
    let mut far = 0.0;
    let mut gf = g0;
    while gf.signum() == g0.signum() && gf != 0.0 {
        if step > s_max {
            let ge = g(dir * s_max)?;
            if ge.signum() == g0.signum() && ge != 0.0 {
                return Err(Error::Step(format!("no sign change of F̃(M̃+sI) − β̃ on ±{s_max}: g(0) = {g0}, g(end) = {ge}")));
            }
            far = dir * s_max;
            break;
        }
        far = dir * step;
        gf = g(far)?;
        step *= 2.0;
    }
    let (mut lo, mut hi) = if dir > 0.0 { (0.0, far) } else { (far, 0.0) };
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (gl, gh) = (g(lo)?, g(hi)?);
    let s0 = if gl.abs() <= tol && gl.abs() <= gh.abs() { lo } else { hi };
    let res = g(s0)?;
    if res.abs() > tol {
        return Err(Error::Step(format!("root residual {res} above {tol} (discontinuous F̃?)")));
    }
    Ok(s0)
}

/// Constants of the iteration; ε and μ satisfy the last two conditions with equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub sigma: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub c_tilde: f64,
    pub c_practical: f64,
    pub mu: f64,
    /// ln ε; ε itself underflows for small α₀.
    pub ln_eps: f64,
    pub r0: f64,
    /// ‖u − P‖ may exceed r^{2+α} by this factor before a step is rejected.
    pub slack: f64,
    /// Margin of the cylinder on which interior derivatives are reported.
    pub interior_eps: f64,
}

impl Schedule {
    pub fn new(f: &dyn EllipticOperator, sigma: f64, alpha: f64, alpha0: f64, c_tilde: f64, c_practical: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0 && alpha > 0.0 && alpha < 1.0 && alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(Error::Config("need σ, α, α₀ in (0, 1)".into()));
        }
        if !(c_tilde * sigma.powf(alpha) < 0.25) {
            return Err(Error::Config(format!("C̃σ^α = {} is not below 1/4", c_tilde * sigma.powf(alpha))));
        }
        let s = sigma.powf(2.0 + alpha);
        let mu = s / 4.0;
        let ln_eps = (s / 16.0).ln() / alpha0;
        let mut sch = Self {
            sigma,
            alpha,
            alpha0,
            c_tilde,
            c_practical,
            mu,
            ln_eps,
            r0: 0.0,
            slack: 2.0,
            interior_eps: 0.25,
        };
        sch.r0 = (1..=200)
            .map(|m| 2f64.powi(-m))
            .find(|&r| sch.radius_conditions(f, r).iter().all(|&ok| ok))
            .ok_or_else(|| Error::Config("no dyadic r₀ ≥ 2^-200 satisfies the radius conditions".into()))?;
        Ok(sch)
    }

    pub fn eps(&self) -> f64 {
        self.ln_eps.exp()
    }

    /// The three radius conditions at r, evaluated in logarithms.
    pub fn radius_conditions(&self, f: &dyn EllipticOperator, r: f64) -> [bool; 3] {
        let c = f.constants();
        let n = f.dim() as f64;
        let (a, le) = (self.alpha, self.ln_eps);
        let ln_cd = (self.c_practical * c.delta).ln();
        let rc1 = 0.5 * (a * r.ln() - ln_cd) < le - 2f64.ln();
        let ln_sum = {
            let x = self.c_tilde.ln() - 2.0 * le;
            x.max(self.mu.ln()) + (1.0 + (-(x - self.mu.ln()).abs()).exp()).ln()
        };
        let rc2 = a * r.ln() + ln_sum < (c.delta / 2.0).ln();
        let target = (c.lambda * n * self.mu).ln();
        let rc3 = match c.modulus {
            Modulus::Zero => true,
            Modulus::Lipschitz(l) => l == 0.0 || self.c_tilde.ln() - 2.0 * le + l.ln() + a * r.ln() - 2.0 * le < target,
            Modulus::Step(v) => v == 0.0,
        };
        [rc1, rc2, rc3]
    }

    /// Smallness threshold μ₂ = r̂₀^{5/2}.
    pub fn mu2(&self) -> f64 {
        self.r0.powf(2.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqaState {
    pub level: usize,
    pub poly: QuadPoly,
    pub scale: f64,
    pub approx_error: f64,
    pub bound: f64,
}

impl IqaState {
    pub fn within(&self, slack: f64) -> bool {
        self.approx_error <= slack * self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub level: usize,
    pub r: f64,
    pub w_sup: f64,
    pub estimates: InteriorEstimates,
    pub taylor_error: f64,
    /// ‖h − P̃‖(Q_σ)/σ³.
    pub taylor_constant: f64,
    pub comparison: ComparisonReport,
    pub s0: f64,
    /// r²‖M′−M‖, r|p′−p|, |z′−z|, r²|β′−β| divided by r^{2+α}.
    pub increments: [f64; 4],
    pub measured_c: f64,
}

fn sup_in_q(u: &GridFunction, poly: &QuadPoly, rho: f64) -> f64 {
    let g = u.grid();
    let r2 = rho * rho;
    let mut m = 0.0f64;
    for k in 0..g.time_len() {
        let t = g.time(k);
        if t < -r2 * (1.0 + 1e-12) || t > 1e-12 {
            continue;
        }
        for j in 0..g.spatial_len() {
            let x = g.coords3(j);
            let x = &x[..g.n()];
            if x.iter().map(|v| v * v).sum::<f64>() <= r2 * (1.0 + 1e-12) {
                m = m.max((u.value(j, k) - poly.eval(x, t)).abs());
            }
        }
    }
    m
}

/// One improvement step from `state`; the new state lives on Q_{σr}.
pub fn iqa_step(u: &GridFunction, state: &IqaState, f: &OperatorRef, sch: &Schedule) -> Result<(IqaState, StepReport)> {
    let g = u.grid();
    let n = g.n();
    let r = state.scale;
    if r < 8.0 * g.h() {
        return Err(Error::Step(format!("r = {r} is below 8h = {}", 8.0 * g.h())));
    }
    let alpha = sch.alpha;
    let w = rescale_w(u, &state.poly, r, alpha, sch.slack)?;
    let ft = RescaledOperator::new(f.clone(), state.poly.clone(), r, alpha)?;
    let p = &state.poly;
    let a = df_at(f.as_ref(), &p.m, &p.p, p.z, &vec![0.0; n], 0.0)?;
    let wg = w.grid();
    let hgrid = Arc::new(SpaceTimeGrid::cylinder(n, wg.h(), wg.tau(), 0.75)?);
    let dom = Cylinder::centered(n, 0.75);
    let lin = solve_linear_heat(&a, &BoundaryData::Grid(w.clone()), hgrid.clone(), &dom, sch.interior_eps, &SolverConfig::default())?;
    let h = lin.solution.u;
    let pt = taylor_at_origin(&h)?;
    let taylor_error = sup_in_q(&h, &pt, sch.sigma);
    let w_on_h = GridFunction::from_fn(hgrid, |x, t| w.sample(x, t).unwrap_or(f64::NAN))?;
    let comparison = comparison_check(&ft, &w_on_h, &h, sch.mu, sch.eps(), sch.alpha0)?;
    let s0 = solve_s0(&ft, &pt.m, &pt.p, pt.z, pt.beta, ft.constants().delta)?;
    let ra = r.powf(alpha);
    let eye = linalg::identity(n);
    let dm = &pt.m + &eye * s0;
    let poly = QuadPoly::new(
        &p.m + &dm * ra,
        p.p.iter().zip(&pt.p).map(|(a, b)| a + r * ra * b).collect(),
        p.z + r * r * ra * pt.z,
        p.beta + ra * pt.beta,
    )?;
    let increments = [linalg::spectral_norm(&dm), linalg::norm(&pt.p), pt.z.abs(), pt.beta.abs()];
    let measured_c = increments.iter().cloned().fold(0.0, f64::max);
    let delta = f.constants().delta;
    if poly.size() > delta {
        return Err(Error::Step(format!("coefficients of size {} left U_δ, δ = {delta}", poly.size())));
    }
    let scale = sch.sigma * r;
    let approx_error = sup_in_q(u, &poly, scale);
    let bound = scale.powf(2.0 + alpha);
    let next = IqaState { level: state.level + 1, poly, scale, approx_error, bound };
    if !next.within(sch.slack) {
        return Err(Error::Step(format!(
            "level {}: ‖u − P′‖ on Q_σr is {approx_error:e}, above {} · {bound:e}",
            next.level, sch.slack
        )));
    }
    let report = StepReport {
        level: state.level,
        r,
        w_sup: w.sup_norm(),
        estimates: lin.estimates,
        taylor_error,
        taylor_constant: taylor_error / sch.sigma.powi(3),
        comparison,
        s0,
        increments,
        measured_c,
    };
    Ok((next, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C2AlphaBound {
    pub c2: f64,
    pub c2alpha: f64,
}

/// C = max over states of max(‖M‖, |p|, |z|, |β|), and C/(σr₀)^α.
pub fn extract_c2alpha(states: &[IqaState], sigma: f64, r0: f64, alpha: f64) -> C2AlphaBound {
    let c2 = states.iter().map(|s| s.poly.size()).fold(0.0, f64::max);
    C2AlphaBound { c2, c2alpha: c2 / (sigma * r0).powf(alpha) }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopReport {
    pub schedule: Schedule,
    pub mu2: f64,
    pub states: Vec<IqaState>,
    pub steps: Vec<StepReport>,
    pub bound: C2AlphaBound,
    /// Why the iteration ended: level budget, resolution cutoff, or a step error.
    pub stop: String,
}

/// Iterates [`iqa_step`] from P₀ = 0 while σᵏr̂₀ ≥ 8h and k < k_max.
pub fn regularity_loop(u: &GridFunction, f: &OperatorRef, sch: &Schedule, k_max: usize) -> Result<LoopReport> {
    let g = u.grid();
    let n = g.n();
    let mu2 = sch.mu2();
    let size = sup_in_q(u, &QuadPoly::zero(n), 1.0);
    if size > mu2 {
        return Err(Error::Domain(format!("‖u‖ = {size:e} exceeds the smallness threshold μ₂ = r̂₀^(5/2) = {mu2:e}")));
    }
    let r0 = sch.r0;
    let mut states = vec![IqaState {
        level: 0,
        poly: QuadPoly::zero(n),
        scale: r0,
        approx_error: sup_in_q(u, &QuadPoly::zero(n), r0),
        bound: r0.powf(2.0 + sch.alpha),
    }];
    let mut steps = Vec::new();
    let stop = loop {
        let cur = states.last().unwrap();
        if cur.level >= k_max {
            break "level budget reached".to_string();
        }
        if cur.scale < 8.0 * g.h() {
            break format!("σ^k r̂₀ = {} below 8h", cur.scale);
        }
        match iqa_step(u, cur, f, sch) {
            Ok((s, rep)) => {
                states.push(s);
                steps.push(rep);
            }
            Err(e) => break format!("step {} failed: {e}", cur.level),
        }
    };
    let bound = extract_c2alpha(&states, sch.sigma, r0, sch.alpha);
    Ok(LoopReport { schedule: sch.clone(), mu2, states, steps, bound, stop })
}

/// G(M,p,z,x,t) = F(D²φ + M, Dφ + p, φ + z, x, t) − F[φ](x,t), with φ's derivatives taken
/// from central differences at the grid node (x, t).
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    inner: OperatorRef,
    phi: GridFunction,
}

pub fn reduce_general(f: OperatorRef, phi: GridFunction) -> Result<ReducedOperator> {
    if f.dim() != phi.grid().n() {
        return domain("operator and φ dimensions differ");
    }
    Ok(ReducedOperator { inner: f, phi })
}

impl EllipticOperator for ReducedOperator {
    fn name(&self) -> String {
        format!("reduced({})", self.inner.name())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn constants(&self) -> &OperatorConstants {
        self.inner.constants()
    }
    fn eval(&self, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64) -> Result<f64> {
        let g = self.phi.grid();
        let j = g.find_coords(x).ok_or_else(|| Error::Domain(format!("{x:?} is not a node of φ's grid")))?;
        let k = g.time_index(t).ok_or_else(|| Error::Domain(format!("t = {t} is not a level of φ's grid")))?;
        let e = fd_expansion(&self.phi, j, k)?;
        let pp: Vec<f64> = e.gradient.iter().zip(p).map(|(a, b)| a + b).collect();
        let hi = self.inner.eval(&(&e.hessian + m), &pp, e.value + z, x, t)?;
        let lo = self.inner.eval(&e.hessian, &e.gradient, e.value, x, t)?;
        Ok(hi - lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_heat, make_linear, make_logdet, make_pucci_minimal};
    use crate::solver::{residual, solve};

    fn heat(n: usize) -> OperatorRef {
        Arc::new(make_heat(n).unwrap())
    }

    #[test]
    fn rescale_examples() {
        let g = Arc::new(SpaceTimeGrid::unit(1, 1.0 / 64.0, 1.0 / 256.0).unwrap());
        let p = QuadPoly::new(linalg::identity(1) * 0.2, vec![0.1], 0.05, 0.2).unwrap();
        let r: f64 = 0.25;
        let s = r.powf(2.5);
        let u = GridFunction::from_fn(g.clone(), |x, t| p.eval(x, t)).unwrap();
        assert!(rescale_w(&u, &p, r, 0.5, 1.0).unwrap().sup_norm() < 1e-12);
        let v = GridFunction::from_fn(g, |x, t| p.eval(x, t) + s).unwrap();
        let w = rescale_w(&v, &p, r, 0.5, 1.0 + 1e-9).unwrap();
        assert!(w.values().iter().all(|x| (x - 1.0).abs() < 1e-9));
        let wg = w.grid();
        for idx in (0..wg.len()).step_by(97) {
            let (j, k) = wg.split(idx);
            let x: Vec<f64> = wg.coords(j).iter().map(|c| r * c).collect();
            let t = r * r * wg.time(k);
            let back = p.eval(&x, t) + s * w.value(j, k);
            assert!((back - v.sample(&x, t).unwrap()).abs() < 1e-14);
        }
        assert!(matches!(rescale_w(&v, &p, r, 0.5, 0.5), Err(Error::Step(_))));
    }

    #[test]
    fn taylor_examples() {
        let g = Arc::new(SpaceTimeGrid::cylinder(2, 1.0 / 16.0, 1.0 / 64.0, 0.75).unwrap());
        let q = QuadPoly::new(SymMat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]), vec![0.4, -0.1], 0.7, 0.1).unwrap();
        let h = GridFunction::from_fn(g.clone(), |x, t| q.eval(x, t)).unwrap();
        let t = taylor_at_origin(&h).unwrap();
        assert!((&t.m - &q.m).amax() < 1e-10 && (t.z - 0.7).abs() < 1e-12 && (t.beta - 0.1).abs() < 1e-10);
        let z = GridFunction::constant(g, 0.0).unwrap();
        assert_eq!(taylor_at_origin(&z).unwrap(), QuadPoly::zero(2));
    }

    #[test]
    fn s0_examples() {
        let f = heat(2);
        let m = SymMat::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.1]);
        assert_eq!(solve_s0(f.as_ref(), &m, &[0.0; 2], 0.0, 0.4, f64::INFINITY).unwrap(), 0.0);
        let s = solve_s0(f.as_ref(), &m, &[0.0; 2], 0.0, 1.0, f64::INFINITY).unwrap();
        assert!((s - 0.3).abs() < 1e-12);
        let s = solve_s0(f.as_ref(), &m, &[0.0; 2], 0.0, -2.0, f64::INFINITY).unwrap();
        assert!((s + 1.2).abs() < 1e-12);
        let p = make_pucci_minimal(0.5, 2.0, 1).unwrap();
        let s = solve_s0(&p, &linalg::zeros(1), &[0.0], 0.0, 0.5 * 0.01, f64::INFINITY).unwrap();
        assert!((s - 0.01).abs() < 1e-12);
        assert!(matches!(solve_s0(&p, &linalg::zeros(1), &[0.0], 0.0, 5.0, 1.0), Err(Error::Step(_))));
    }

    #[test]
    fn schedule_guards() {
        let f = heat(1);
        let s = Schedule::new(f.as_ref(), 0.125, 0.5, 0.1, 0.5, 1e-2).unwrap();
        assert_eq!(s.r0, 0.5);
        assert!(matches!(Schedule::new(f.as_ref(), 0.9, 0.5, 0.1, 0.5, 1e-2), Err(Error::Config(_))));
        let p = make_pucci_minimal(0.5, 2.0, 1).unwrap();
        assert!(Schedule::new(&p, 0.125, 0.5, 0.1, 0.5, 1e-2).is_err());
        let l = make_logdet(1).unwrap();
        assert!(Schedule::new(&l, 0.125, 0.5, 0.1, 0.5, 1e-2).is_err());
    }

    #[test]
    fn quadratic_is_a_fixed_point() {
        let f = heat(1);
        let g = Arc::new(SpaceTimeGrid::unit(1, 1.0 / 64.0, 1.0 / 256.0).unwrap());
        let q = QuadPoly::new(linalg::identity(1) * 0.02, vec![0.01], 0.005, 0.02).unwrap();
        let u = GridFunction::from_fn(g, |x, t| q.eval(x, t)).unwrap();
        let sch = Schedule::new(f.as_ref(), 0.125, 0.5, 0.1, 0.5, 1e-2).unwrap();
        let st = IqaState { level: 0, poly: q.clone(), scale: 0.5, approx_error: 0.0, bound: 0.5f64.powf(2.5) };
        let (next, rep) = iqa_step(&u, &st, &f, &sch).unwrap();
        assert!((&next.poly.m - &q.m).amax() < 1e-10 && (next.poly.beta - q.beta).abs() < 1e-10);
        assert!((next.poly.p[0] - q.p[0]).abs() < 1e-10 && (next.poly.z - q.z).abs() < 1e-10);
        assert!(rep.s0.abs() < 1e-10);
        let lp = regularity_loop(&u, &f, &sch, 5).unwrap();
        let last = lp.states.last().unwrap();
        assert!(lp.states.len() >= 2);
        assert!((&last.poly.m - &q.m).amax() < 1e-10 && (last.poly.beta - q.beta).abs() < 1e-10);
    }

    #[test]
    fn zero_and_oversized_data() {
        let f = heat(1);
        let g = Arc::new(SpaceTimeGrid::unit(1, 1.0 / 64.0, 1.0 / 256.0).unwrap());
        let sch = Schedule::new(f.as_ref(), 0.125, 0.5, 0.1, 0.5, 1e-2).unwrap();
        let z = GridFunction::constant(g.clone(), 0.0).unwrap();
        let lp = regularity_loop(&z, &f, &sch, 5).unwrap();
        assert!(lp.states.iter().all(|s| s.poly == QuadPoly::zero(1)));
        assert_eq!(lp.bound.c2, 0.0);
        let big = GridFunction::constant(g, 1.0).unwrap();
        assert!(regularity_loop(&big, &f, &sch, 5).is_err());
    }

    #[test]
    fn c2alpha_of_single_state() {
        let st = IqaState { level: 0, poly: QuadPoly::new(linalg::identity(1) * 0.3, vec![0.1], 0.0, 0.2).unwrap(), scale: 1.0, approx_error: 0.0, bound: 1.0 };
        let b = extract_c2alpha(&[st], 0.125, 0.5, 0.5);
        assert_eq!(b.c2, 0.3);
        assert!((b.c2alpha - 0.3 / (0.0625f64).sqrt()).abs() < 1e-15);
        assert_eq!(extract_c2alpha(&[], 0.125, 0.5, 0.5).c2, 0.0);
    }

    #[test]
    fn reduced_residual_identity() {
        let a = SymMat::from_row_slice(1, 1, &[1.5]);
        let f: OperatorRef = Arc::new(make_linear(&a, &[0.2], -0.1).unwrap());
        let g = Arc::new(SpaceTimeGrid::unit(1, 1.0 / 16.0, 1.0 / 256.0).unwrap());
        let phi = GridFunction::from_fn(g.clone(), |x, t| 0.1 * (x[0] + t).sin()).unwrap();
        let u = solve(f.as_ref(), &BoundaryData::from_fn(|x, t| 0.05 * (2.0 * x[0]).cos() * (1.0 + t)), g).unwrap().u;
        let gop = reduce_general(f.clone(), phi.clone()).unwrap();
        let diff = u.zip_map(&phi, |a, b| a - b).unwrap();
        let rg = residual(&gop, &diff).unwrap();
        let ru = residual(f.as_ref(), &u).unwrap();
        let rp = residual(f.as_ref(), &phi).unwrap();
        for i in 0..rg.values.len() {
            if let (Some(a), Some(b), Some(c)) = (rg.values[i], ru.values[i], rp.values[i]) {
                assert!((a - (b - c)).abs() < 1e-12);
            }
        }
        let zero = GridFunction::constant(phi.grid().clone(), 0.0).unwrap();
        let g0 = reduce_general(f.clone(), zero).unwrap();
        let m = SymMat::from_row_slice(1, 1, &[0.3]);
        let x = phi.grid().coords(5);
        assert!((g0.eval(&m, &[0.1], 0.2, &x, -0.5).unwrap() - f.eval(&m, &[0.1], 0.2, &x, -0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn heat_solution_improves() {
        let f = heat(1);
        let g = Arc::new(SpaceTimeGrid::unit(1, 1.0 / 256.0, 1.0 / 4096.0).unwrap());
        let u = GridFunction::from_fn(g, |x, t| 0.05 * (-t).exp() * (x[0] + 0.3).sin()).unwrap();
        let sch = Schedule::new(f.as_ref(), 0.125, 0.5, 0.1, 0.5, 1e-2).unwrap();
        let lp = regularity_loop(&u, &f, &sch, 10).unwrap();
        assert!(lp.states.len() >= 3 && lp.states.iter().all(|s| s.within(2.0)));
    }
}

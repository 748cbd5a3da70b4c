//! Explicit barrier for the contact-set homogeneity argument and the comparison
//! functions h ± μ(|x|² − r²) ∓ 4ε^{α₀}.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{ParabolicBall, SpaceTimePoint, GAMMA};
use crate::gridfn::{default_tolerance, GridFunction};
use crate::linalg::{self, SymMat};
use crate::operators::{EllipticOperator, QuadPoly};
use crate::solver::residual;

/// Which β₁ to use. `Repaired` is the larger value (2Λnβ₂ + Λ + 1)/(1 − e^{−β₂/(2α)}) that
/// dominates the −2Λnβ₂ contribution of the Hessian near the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Beta1Rule {
    Stated,
    Repaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub theta: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c_prime: f64,
    pub gamma: f64,
    pub delta_slab: f64,
    pub rule: Beta1Rule,
}

pub fn barrier_params(theta: f64, lambda: f64, big_lambda: f64, n: usize) -> Result<BarrierParams> {
    barrier_params_with(theta, lambda, big_lambda, n, Beta1Rule::Stated)
}

pub fn barrier_params_with(theta: f64, lambda: f64, big_lambda: f64, n: usize, rule: Beta1Rule) -> Result<BarrierParams> {
    if !(0.75..=4.0).contains(&theta) {
        return domain(format!("θ = {theta} outside [3/4, 4]"));
    }
    if !(lambda > 0.0 && big_lambda >= lambda) || n == 0 {
        return domain("need 0 < λ ≤ Λ and n ≥ 1");
    }
    let nf = n as f64;
    let g2 = GAMMA * GAMMA / 16.0;
    let alpha = 0.5 * theta / (4.0 - g2);
    let delta_slab = g2 * alpha / theta;
    let beta2 = (1.0 / alpha + 1.0).max(big_lambda * nf / lambda);
    let denom = 1.0 - (-beta2 / (2.0 * alpha)).exp();
    let beta1 = match rule {
        Beta1Rule::Stated => (lambda * beta2 + big_lambda * nf) / denom,
        Beta1Rule::Repaired => (2.0 * big_lambda * nf * beta2 + big_lambda + 1.0) / denom,
    };
    let c_prime = (nf + 1.0) * (beta2 / alpha).exp();
    Ok(BarrierParams { theta, alpha, beta1, beta2, c_prime, gamma: GAMMA, delta_slab, rule })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMat,
    pub dt: f64,
}

fn formula(p: &BarrierParams, a: f64, t1: f64, x: &[f64], t: f64) -> BarrierValue {
    let n = x.len();
    let s = t / t1;
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let rho = x2 / t;
    let e = (-p.beta2 * rho).exp();
    let e0 = (-p.beta2 / p.alpha).exp();
    let k = a * p.c_prime * s.powf(-(p.beta1 + 1.0));
    let mut hessian = linalg::zeros(n);
    for i in 0..n {
        for j in 0..n {
            hessian[(i, j)] = k * e * 4.0 * p.beta2 * p.beta2 * x[i] * x[j] / t;
        }
        hessian[(i, i)] -= k * e * 2.0 * p.beta2;
    }
    BarrierValue {
        value: a * p.c_prime * t1 * s.powf(-p.beta1) * (e - e0),
        gradient: x.iter().map(|v| -2.0 * p.beta2 * k * e * v).collect(),
        hessian,
        dt: k * e * (p.beta2 * rho - p.beta1 * (1.0 - (p.beta2 * (rho - 1.0 / p.alpha)).exp())),
    }
}

/// φ = aC′T₁(t/T₁)^{−β₁}(e^{−β₂ρ} − e^{−β₂/α}), ρ = |x|²/t, in coordinates where the slab
/// starts at t = δ_slab·T₁.
pub fn barrier_eval(p: &BarrierParams, a: f64, t1: f64, x: &[f64], t: f64) -> Result<BarrierValue> {
    if t < p.delta_slab * t1 * (1.0 - 1e-12) {
        return domain(format!("t = {t} below the slab start {}", p.delta_slab * t1));
    }
    let rho = x.iter().map(|v| v * v).sum::<f64>() / t;
    if rho > (1.0 / p.alpha) * (1.0 + 1e-12) {
        return domain(format!("ρ = {rho} exceeds 1/α = {}", 1.0 / p.alpha));
    }
    Ok(formula(p, a, t1, x, t))
}

/// The barrier placed at cylinder center (x₂, t₂), taking unshifted coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierFrame {
    pub params: BarrierParams,
    pub a: f64,
    pub t1: f64,
    pub center: Vec<f64>,
    pub t2: f64,
    pub scale: f64,
}

impl BarrierFrame {
    pub fn new(params: BarrierParams, a: f64, t1: f64, center: Vec<f64>, t2: f64) -> Result<Self> {
        if !(a > 0.0 && t1 > 0.0) {
            return domain("a and T₁ must be positive");
        }
        Ok(Self { params, a, t1, center, t2, scale: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn shift(&self) -> f64 {
        self.t2 - self.params.delta_slab * self.t1
    }

    pub fn local(&self, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        (x.iter().zip(&self.center).map(|(a, b)| a - b).collect(), t - self.shift())
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<BarrierValue> {
        let (y, s) = self.local(x, t);
        let mut v = barrier_eval(&self.params, self.a, self.t1, &y, s)?;
        self.rescale(&mut v);
        Ok(v)
    }

    fn eval_unchecked(&self, x: &[f64], t: f64) -> BarrierValue {
        let (y, s) = self.local(x, t);
        let mut v = formula(&self.params, self.a, self.t1, &y, s);
        self.rescale(&mut v);
        v
    }

    fn rescale(&self, v: &mut BarrierValue) {
        v.value *= self.scale;
        v.gradient.iter_mut().for_each(|g| *g *= self.scale);
        v.hessian *= self.scale;
        v.dt *= self.scale;
    }

    /// Up-ball {α|x−x₂|² ≤ t − (t₂ − δT₁) ≤ T₁(1/2+δ)} on which the barrier lives.
    pub fn region_ball(&self) -> Result<ParabolicBall> {
        let p = &self.params;
        ParabolicBall::up(SpaceTimePoint::new(self.center.clone(), self.shift()), self.t1 * (0.5 + p.delta_slab), p.alpha)
    }

    /// Region ball restricted to shifted times t ≥ δT₁.
    pub fn in_slab_region(&self, x: &[f64], t: f64) -> bool {
        let (y, s) = self.local(x, t);
        let p = &self.params;
        let rho = y.iter().map(|v| v * v).sum::<f64>() / s;
        s >= p.delta_slab * self.t1 && s <= self.t1 * (0.5 + p.delta_slab) && rho <= 1.0 / p.alpha
    }

    /// Max abs errors of central-difference Hessian and time derivative against the closed forms,
    /// relative to the local derivative sizes; steps are `h` times the local space and time scales.
    pub fn fd_errors(&self, x: &[f64], t: f64, h: f64) -> (f64, f64) {
        let n = self.dim();
        let (_, s) = self.local(x, t);
        let hx = h * s.sqrt();
        let ht = h * s;
        let exact = self.eval_unchecked(x, t);
        let f = |y: &[f64], tt: f64| self.eval_unchecked(y, tt).value;
        let mut herr = 0.0f64;
        let mut xp = x.to_vec();
        for i in 0..n {
            for j in i..n {
                let fd = if i == j {
                    xp[i] = x[i] + hx;
                    let up = f(&xp, t);
                    xp[i] = x[i] - hx;
                    let dn = f(&xp, t);
                    xp[i] = x[i];
                    (up - 2.0 * exact.value + dn) / (hx * hx)
                } else {
                    let mut q = |si: f64, sj: f64| {
                        xp[i] = x[i] + si * hx;
                        xp[j] = x[j] + sj * hx;
                        let v = f(&xp, t);
                        xp[i] = x[i];
                        xp[j] = x[j];
                        v
                    };
                    (q(1.0, 1.0) - q(1.0, -1.0) - q(-1.0, 1.0) + q(-1.0, -1.0)) / (4.0 * hx * hx)
                };
                herr = herr.max((fd - exact.hessian[(i, j)]).abs());
            }
        }
        let dt_fd = (f(x, t + ht) - f(x, t - ht)) / (2.0 * ht);
        let hscale = linalg::spectral_norm(&exact.hessian).max(f64::MIN_POSITIVE);
        let tscale = exact.dt.abs().max(exact.value.abs() / s).max(f64::MIN_POSITIVE);
        (herr / hscale, (dt_fd - exact.dt).abs() / tscale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCheckReport {
    pub samples: usize,
    pub passed: bool,
    /// Smallest F(D²ψ, Dψ, ψ) − ψ_t over the samples.
    pub min_margin: f64,
    pub worst: Option<SpaceTimePoint>,
    pub max_hessian_norm: f64,
    /// Whether ‖D²φ‖ stayed within the operator's δ.
    pub hessian_within_delta: bool,
}

/// Samples the slab region and checks F(D²ψ) − ψ_t > 0 for ψ = P₁ + φ.
pub fn supersolution_sign_check(
    f: &dyn EllipticOperator,
    p1: &QuadPoly,
    frame: &BarrierFrame,
    samples: usize,
    seed: u64,
) -> Result<SignCheckReport> {
    let n = frame.dim();
    if f.dim() != n || p1.dim() != n {
        return domain("operator, polynomial and barrier dimensions differ");
    }
    let ball = frame.region_ball()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = f.constants().delta;
    let mut rep = SignCheckReport {
        samples: 0,
        passed: true,
        min_margin: f64::INFINITY,
        worst: None,
        max_hessian_norm: 0.0,
        hessian_within_delta: true,
    };
    let mut tries = 0usize;
    while rep.samples < samples {
        tries += 1;
        if tries > 1000 * samples.max(1) {
            return domain("slab region too thin to sample");
        }
        let pt = ball.sample(&mut rng);
        if !frame.in_slab_region(&pt.x, pt.t) {
            continue;
        }
        let b = frame.eval(&pt.x, pt.t)?;
        let hn = linalg::spectral_norm(&b.hessian);
        rep.max_hessian_norm = rep.max_hessian_norm.max(hn);
        if hn > delta {
            rep.hessian_within_delta = false;
        }
        let m = &p1.m + &b.hessian;
        let grad: Vec<f64> = p1.gradient(&pt.x).iter().zip(&b.gradient).map(|(a, c)| a + c).collect();
        let val = p1.eval(&pt.x, pt.t) + b.value;
        let margin = f.eval(&m, &grad, val, &pt.x, pt.t)? - (p1.beta + b.dt);
        if margin < rep.min_margin {
            rep.min_margin = margin;
            rep.worst = Some(pt);
        }
        rep.samples += 1;
    }
    rep.passed = rep.min_margin > 0.0;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sup_diff: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
    /// Nodes where h_{μ+} fails to be a subsolution or h_{μ−} a supersolution.
    pub sub_violations: usize,
    pub super_violations: usize,
}

/// ‖w − h‖ over Q_{3/4−ε} against μ + 4ε^{α₀}, with the residual signs of h_{μ±}.
pub fn comparison_check(f: &dyn EllipticOperator, w: &GridFunction, h: &GridFunction, mu: f64, eps: f64, alpha0: f64) -> Result<ComparisonReport> {
    if !(eps > 0.0 && eps < 0.75) {
        return domain(format!("ε = {eps} must lie in (0, 3/4)"));
    }
    let r = 0.75 - eps;
    let inside = |x: &[f64], t: f64| x.iter().map(|v| v * v).sum::<f64>() <= r * r * (1.0 + 1e-12) && t >= -r * r - 1e-12 && t <= 1e-12;
    let sup_diff = w.max_abs_diff_in(h, inside)?;
    let shift = 4.0 * eps.powf(alpha0);
    let slack = default_tolerance(w);
    let mut violations = [0usize; 2];
    for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
        let vals: Vec<f64> = h
            .values()
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let (j, _) = h.grid().split(idx);
                let x2: f64 = h.grid().coords3(j).iter().map(|c| c * c).sum();
                v + sign * (mu * (x2 - r * r) - shift)
            })
            .collect();
        let hm = GridFunction::new(h.grid().clone(), vals)?;
        let res = residual(f, &hm)?;
        let g = hm.grid();
        violations[i] = res
            .values
            .iter()
            .enumerate()
            .filter(|(idx, v)| {
                let (j, k) = g.split(*idx);
                inside(&g.coords3(j)[..g.n()], g.time(k)) && v.is_some_and(|v| sign * v < -slack)
            })
            .count();
    }
    let bound = mu + shift;
    Ok(ComparisonReport {
        sup_diff,
        bound,
        slack,
        holds: sup_diff <= bound + slack,
        sub_violations: violations[0],
        super_violations: violations[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::SpaceTimeGrid;
    use crate::operators::{make_heat, make_pucci_minimal};
    use std::sync::Arc;

    #[test]
    fn parameter_examples() {
        let p = barrier_params(1.0, 1.0, 1.0, 2).unwrap();
        assert!((p.alpha - 0.125021).abs() < 1e-6);
        assert!((p.beta2 - (1.0 / p.alpha + 1.0)).abs() < 1e-12);
        assert!((p.beta2 - 8.99866).abs() < 1e-5);
        for theta in [0.75, 1.0, 2.0, 4.0] {
            for n in 1..=3 {
                let p = barrier_params(theta, 0.5, 2.0, n).unwrap();
                assert!(p.beta1 > 0.0 && p.c_prime > (n + 1) as f64);
            }
        }
        assert!(barrier_params(0.5, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn values_on_boundary_and_axis() {
        let p = barrier_params(1.0, 0.5, 2.0, 1).unwrap();
        let (a, t1) = (1e-3, 0.3);
        let t = 0.2;
        let x = (t / p.alpha).sqrt();
        assert!(barrier_eval(&p, a, t1, &[x], t).unwrap().value.abs() < 1e-15 * a * p.c_prime);
        let v = barrier_eval(&p, a, t1, &[0.0], t1).unwrap().value;
        let want = a * p.c_prime * t1 * (1.0 - (-p.beta2 / p.alpha).exp());
        assert!((v - want).abs() <= 1e-12 * want);
        assert!(barrier_eval(&p, a, t1, &[x * 1.01], t).is_err());
        assert!(barrier_eval(&p, a, t1, &[0.0], 0.5 * p.delta_slab * t1).is_err());
        assert!(barrier_eval(&p, a, t1, &[0.3 * x], t).unwrap().value > 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = barrier_params(2.0, 0.5, 2.0, 2).unwrap();
        let fr = BarrierFrame::new(p, 1e-3, 0.2, vec![0.1, -0.2], -0.3).unwrap();
        let ball = fr.region_ball().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut n = 0;
        while n < 50 {
            let pt = ball.sample(&mut rng);
            if !fr.in_slab_region(&pt.x, pt.t) {
                continue;
            }
            n += 1;
            let (e1h, e1t) = fr.fd_errors(&pt.x, pt.t, 1e-2);
            let (e2h, e2t) = fr.fd_errors(&pt.x, pt.t, 5e-3);
            assert!(e1h < 1e-2 && e1t < 1e-2);
            if e1h > 1e-9 {
                assert!((e1h / e2h).log2() > 1.8, "{e1h} {e2h}");
            }
            if e1t > 1e-9 {
                assert!((e1t / e2t).log2() > 1.8, "{e1t} {e2t}");
            }
        }
    }

    fn contact_poly(n: usize, a: f64) -> QuadPoly {
        QuadPoly::new(linalg::identity(n) * -a, vec![0.0; n], 0.0, a).unwrap()
    }

    #[test]
    fn sign_check_degenerate_barrier_fails() {
        let f = make_pucci_minimal(0.5, 2.0, 1).unwrap();
        let p = barrier_params(1.0, 0.5, 2.0, 1).unwrap();
        let mut fr = BarrierFrame::new(p, 1e-3, 0.25, vec![0.0], 0.0).unwrap();
        fr.scale = 0.0;
        let r = supersolution_sign_check(&f, &contact_poly(1, 1e-3), &fr, 100, 0).unwrap();
        assert!(!r.passed);
        assert!((r.min_margin + 1e-3 * (2.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn repaired_barrier_is_a_strict_supersolution() {
        for n in 1..=2 {
            let f = make_pucci_minimal(0.5, 2.0, n).unwrap();
            for theta in [0.75, 1.0, 2.0, 4.0] {
                let p = barrier_params_with(theta, 0.5, 2.0, n, Beta1Rule::Repaired).unwrap();
                let fr = BarrierFrame::new(p, 1e-4, 0.25, vec![0.0; n], 0.0).unwrap();
                let r = supersolution_sign_check(&f, &contact_poly(n, 1e-4), &fr, 2000, 7).unwrap();
                assert!(r.passed, "θ={theta} n={n} margin {}", r.min_margin);
            }
        }
    }

    #[test]
    fn comparison_of_identical_functions() {
        let g = Arc::new(SpaceTimeGrid::unit(1, 1.0 / 16.0, 1.0 / 64.0).unwrap());
        let h = GridFunction::from_fn(g.clone(), |x, t| x[0] * x[0] + 2.0 * t).unwrap();
        let f = make_heat(1).unwrap();
        let r = comparison_check(&f, &h, &h, 0.1, 0.1, 0.5).unwrap();
        assert_eq!(r.sup_diff, 0.0);
        assert!(r.holds);
        assert_eq!(r.sub_violations + r.super_violations, 0);
        let w = h.map(|v| v + 0.05).unwrap();
        let r = comparison_check(&f, &w, &h, 0.05, 1e-6, 0.5).unwrap();
        assert!((r.sup_diff - 0.05).abs() < 1e-12 && r.holds);
    }
}

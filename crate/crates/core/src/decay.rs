//! Oscillation-decay experiments: measure decay of supersolutions, the one-step
//! oscillation ratio, the scaled profile and the general-operator variant.

use serde::{Deserialize, Serialize};

use crate::contact::{contact_point, log_linear_slope, ContactParabola};
use crate::error::{domain, Result};
use crate::geometry::{min_opening_ball, ParabolicBall, SpaceTimePoint};
use crate::gridfn::{extrema, fd_expansion, inf_convolution, GridFunction};
use crate::operators::{default_fd_step, full_gradient_norm, EllipticOperator};
use crate::solver::residual;

/// Closure of Q_ρ(0,0).
pub fn in_q(rho: f64) -> impl Fn(&[f64], f64) -> bool {
    let r2 = rho * rho;
    move |x: &[f64], t: f64| x.iter().map(|v| v * v).sum::<f64>() <= r2 * (1.0 + 1e-12) && t >= -r2 * (1.0 + 1e-12) && t <= 1e-12
}

/// osc_{Q_ρ} u / osc_{Q₁} u, or 0 when u is constant on Q₁.
pub fn oscillation_ratio(u: &GridFunction, rho: f64) -> Result<f64> {
    let (lo, hi) = extrema(u, in_q(1.0))?;
    if hi - lo <= 0.0 {
        return Ok(0.0);
    }
    let (l, h) = extrema(u, in_q(rho))?;
    Ok((h - l) / (hi - lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationTrial {
    pub osc_outer: f64,
    pub osc_inner: f64,
    pub ratio: f64,
    pub max_residual: f64,
}

/// osc_{Q_{1/3}} u / osc_{Q₁} u together with the largest |F − u_t| seen on the grid.
pub fn oscillation_decay_trial(u: &GridFunction, f: &dyn EllipticOperator) -> Result<OscillationTrial> {
    let (lo, hi) = extrema(u, in_q(1.0))?;
    let (l, h) = extrema(u, in_q(1.0 / 3.0))?;
    let ratio = if hi > lo { (h - l) / (hi - lo) } else { 0.0 };
    Ok(OscillationTrial { osc_outer: hi - lo, osc_inner: h - l, ratio, max_residual: residual(f, u)?.max_abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub rho: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub rows: Vec<ProfileRow>,
    pub rho_min: f64,
    pub alpha_fit: f64,
    /// ratio ≤ 2ρ^{α_fit} on every rung.
    pub bound_holds: bool,
    /// Nonincreasing in ρ up to 2(h+τ).
    pub monotone: bool,
}

/// Oscillation ratios on the dyadic ladder ρ = 1, 1/2, … ≥ max(√(‖u‖/(cδ)), 4h, √(2τ)).
///
/// α_fit is the least-squares slope of ln ratio against ln ρ over the rungs below 1 with a
/// positive ratio, anchored at ratio 1 for ρ = 1.
pub fn scaled_decay_profile(u: &GridFunction, c_delta: f64) -> Result<DecayProfile> {
    if !(c_delta > 0.0) {
        return domain("c·δ must be positive");
    }
    let g = u.grid();
    let rho_min = (u.sup_norm() / c_delta).sqrt();
    if rho_min > 1.0 {
        return domain(format!("‖u‖ = {} exceeds c·δ = {c_delta}", u.sup_norm()));
    }
    let floor = rho_min.max(4.0 * g.h()).max((2.0 * g.tau()).sqrt());
    let mut rows = Vec::new();
    let mut rho = 1.0;
    while rho >= floor * (1.0 - 1e-12) {
        rows.push(ProfileRow { rho, ratio: oscillation_ratio(u, rho)? });
        rho *= 0.5;
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.rho < 1.0 && r.ratio > 0.0).map(|r| (r.rho.ln(), r.ratio.ln())).collect();
    let alpha_fit = if pts.is_empty() {
        if rows.len() > 1 { f64::INFINITY } else { 0.0 }
    } else {
        pts.iter().map(|(x, y)| x * y).sum::<f64>() / pts.iter().map(|(x, _)| x * x).sum::<f64>()
    };
    let slack = 2.0 * (g.h() + g.tau());
    let bound_holds = rows.iter().all(|r| r.ratio <= 2.0 * r.rho.powf(alpha_fit.min(1e300)) + 1e-12);
    let monotone = rows.windows(2).all(|w| w[1].ratio <= w[0].ratio + slack);
    Ok(DecayProfile { rows, rho_min, alpha_fit, bound_holds, monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionTrial {
    /// u(y₀,s₀) ≤ ν·osc u + min u.
    pub precondition_met: bool,
    pub vacuous: bool,
    pub opening: f64,
    pub contact: Option<SpaceTimePoint>,
    pub ball: Option<ParabolicBall>,
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
    pub nonincreasing: bool,
    pub slope: f64,
}

/// Measure decay of the upper level sets of a supersolution around a low point (y₀, s₀) ∈ Q_{1/3}.
///
/// The input is inf-convolved with ε = 4h before contact points are sought; level sets are
/// measured on u itself.
pub fn supersolution_decay_trial(u: &GridFunction, y0s0: &SpaceTimePoint, nu: f64, c1: f64, k_max: usize) -> Result<SupersolutionTrial> {
    if !(nu > 0.0 && nu < 1.0) || !(c1 > 0.0 && c1 <= 1.0) {
        return domain("need ν ∈ (0,1) and c₁ ∈ (0,1]");
    }
    let g = u.grid();
    let (gamma, top) = extrema(u, in_q(1.0))?;
    let osc = top - gamma;
    let low = u
        .sample(&y0s0.x, y0s0.t)
        .ok_or_else(|| crate::error::Error::Domain(format!("{:?} is not a lattice point", y0s0.x)))?;
    let precondition_met = in_q(1.0 / 3.0)(&y0s0.x, y0s0.t) && low <= gamma + nu * osc;
    let vac = |opening| SupersolutionTrial {
        precondition_met,
        vacuous: true,
        opening,
        contact: None,
        ball: None,
        thresholds: Vec::new(),
        fractions: Vec::new(),
        nonincreasing: true,
        slope: 0.0,
    };
    if osc <= 0.0 {
        let mut r = vac(0.0);
        r.fractions = vec![0.0; k_max + 1];
        r.vacuous = false;
        return Ok(r);
    }
    let a = 64.0 * nu * osc;
    let smooth = inf_convolution(u, 4.0 * g.h())?;
    let vertex = SpaceTimePoint::new(y0s0.x.clone(), y0s0.t - 1.0 / 64.0);
    let Some(rec) = contact_point(&smooth, &ContactParabola::concave(vertex, a)?) else {
        return Ok(vac(a));
    };
    let pt = rec.contact_point;
    let Ok(ball) = min_opening_ball(&pt.x, pt.t) else {
        return Ok(vac(a));
    };
    let nodes = u.nodes_in(|x, t| ball.contains_coords(x, t));
    if nodes.is_empty() {
        return domain("the contact ball holds no grid nodes");
    }
    let mut thresholds = Vec::new();
    let mut fractions = Vec::new();
    for k in 0..=k_max {
        let level = 64.0 * nu * c1.powi(-(k as i32));
        if level > 0.5 {
            break;
        }
        let thr = gamma + level * osc;
        let above = nodes.iter().filter(|&&i| u.values()[i] > thr).count();
        thresholds.push(thr);
        fractions.push(above as f64 / nodes.len() as f64);
    }
    let floor = 0.5 / nodes.len() as f64;
    Ok(SupersolutionTrial {
        precondition_met,
        vacuous: false,
        opening: a,
        contact: Some(pt),
        ball: Some(ball),
        nonincreasing: fractions.windows(2).all(|w| w[1] <= w[0]),
        slope: log_linear_slope(&fractions, floor),
        thresholds,
        fractions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralTrial {
    pub oscillation: OscillationTrial,
    pub residual_bound: f64,
    pub grad_p: f64,
    pub grad_z: f64,
    /// |F[u] − u_t| ≤ ν₀cδ, ‖∇_pF‖ ≤ 1 and ‖∇_zF‖ ≤ ν₀ at the sampled nodes.
    pub preconditions_hold: bool,
}

/// [`oscillation_decay_trial`] for F(D²u, Du, u, x, t) with the smallness conditions checked
/// at every `stride`-th interior node.
pub fn general_decay_trial(u: &GridFunction, f: &dyn EllipticOperator, nu0: f64, c_delta: f64, stride: usize) -> Result<GeneralTrial> {
    let oscillation = oscillation_decay_trial(u, f)?;
    let g = u.grid();
    let eta = default_fd_step(f);
    let (mut gp, mut gz) = (0.0f64, 0.0f64);
    for idx in (0..g.len()).step_by(stride.max(1)) {
        let (j, k) = g.split(idx);
        let Ok(e) = fd_expansion(u, j, k) else { continue };
        let (_, p, z) = full_gradient_norm(f, &e.hessian, &e.gradient, e.value, &g.coords(j), g.time(k), eta)?;
        gp = gp.max(p);
        gz = gz.max(z);
    }
    let residual_bound = nu0 * c_delta;
    Ok(GeneralTrial {
        preconditions_hold: oscillation.max_residual <= residual_bound && gp <= 1.0 + 1e-9 && gz <= nu0 + 1e-9,
        oscillation,
        residual_bound,
        grad_p: gp,
        grad_z: gz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::SpaceTimeGrid;
    use crate::operators::{make_general_example, make_heat};
    use crate::solver::{solve, BoundaryData};
    use std::sync::Arc;

    fn grid(h: f64, tau: f64) -> Arc<SpaceTimeGrid> {
        Arc::new(SpaceTimeGrid::unit(1, h, tau).unwrap())
    }

    #[test]
    fn linear_function_ratios() {
        let u = GridFunction::from_fn(grid(1.0 / 64.0, 1.0 / 256.0), |x, _| 1e-3 * x[0]).unwrap();
        let f = make_heat(1).unwrap();
        assert!((oscillation_decay_trial(&u, &f).unwrap().ratio - 1.0 / 3.0).abs() < 0.02);
        let p = scaled_decay_profile(&u, 1.0).unwrap();
        for r in &p.rows {
            assert!((r.ratio - r.rho).abs() < 1e-12);
        }
        assert!((p.alpha_fit - 1.0).abs() < 1e-12);
        assert_eq!(p.rows[0].ratio, 1.0);
    }

    #[test]
    fn constant_function_ratio_is_zero() {
        let u = GridFunction::constant(grid(1.0 / 16.0, 1.0 / 64.0), 0.4).unwrap();
        assert_eq!(oscillation_ratio(&u, 1.0 / 3.0).unwrap(), 0.0);
        let t = supersolution_decay_trial(&u, &SpaceTimePoint::new(vec![0.0], -0.05), 0.001, 0.5, 3).unwrap();
        assert!(t.fractions.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn heat_solution_decays() {
        let g = grid(1.0 / 32.0, 1.0 / 128.0);
        let b = BoundaryData::from_fn(|x, t| 1e-3 * (3.0 * x[0] + 1.0).sin() * (1.0 + t));
        let u = solve(&make_heat(1).unwrap(), &b, g).unwrap().u;
        let tr = oscillation_decay_trial(&u, &make_heat(1).unwrap()).unwrap();
        assert!(tr.ratio < 0.95 && tr.ratio >= 0.0);
        let p = scaled_decay_profile(&u, 1e-2).unwrap();
        assert!(p.alpha_fit > 0.0 && p.bound_holds);
    }

    #[test]
    fn supersolution_trial_with_late_lateral_data() {
        let g = grid(1.0 / 32.0, 1.0 / 128.0);
        let b = BoundaryData::from_fn(|x, t| 1e-2 * (t + 0.1).max(0.0) * x[0] * x[0]);
        let u = solve(&make_heat(1).unwrap(), &b, g).unwrap().u;
        let y0 = SpaceTimePoint::new(vec![0.0], -0.109375);
        let tr = supersolution_decay_trial(&u, &y0, 1e-3, 0.5, 8).unwrap();
        assert!(tr.precondition_met && !tr.vacuous && tr.nonincreasing);
        assert!(tr.fractions[0] <= 1.0);
        let far = supersolution_decay_trial(&u, &SpaceTimePoint::new(vec![0.3125], 0.0), 1e-3, 0.5, 8).unwrap();
        assert!(!far.precondition_met);
    }

    #[test]
    fn general_trial_flags_large_zero_order_term() {
        let g = grid(1.0 / 16.0, 1.0 / 256.0);
        let b = BoundaryData::from_fn(|x, _| 1e-3 * x[0]);
        let small = make_general_example(1, 0.01).unwrap();
        let u = solve(&small, &b, g.clone()).unwrap().u;
        let t = general_decay_trial(&u, &small, 0.05, 1e-2, 7).unwrap();
        assert!(t.grad_z <= 0.05 && t.oscillation.ratio < 1.0);
        let big = make_general_example(1, 3.0).unwrap();
        let t = general_decay_trial(&u, &big, 0.05, 1e-2, 7).unwrap();
        assert!(!t.preconditions_hold);
    }
}

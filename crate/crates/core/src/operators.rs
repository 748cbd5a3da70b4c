//! Elliptic operators F(M, p, z, x, t) with declared structural constants,
//! sampling checks of the structural hypotheses, and matrix-slot derivatives.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gridfn::{fd_expansion, GridFunction};
use crate::linalg::{self, SymMat};

/// Practical stand-in for the astronomically small theoretical smallness constant.
pub const DEFAULT_C_PRACTICAL: f64 = 1e-2;

const ZEROS: [f64; 3] = [0.0; 3];

/// Modulus of continuity of the matrix-slot gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Modulus {
    Zero,
    Lipschitz(f64),
    /// ω(0) = 0 and ω(s) = c for s > 0.
    Step(f64),
}

impl Modulus {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Modulus::Zero => 0.0,
            Modulus::Lipschitz(l) => l * s,
            Modulus::Step(c) => {
                if s > 0.0 {
                    c
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConstants {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Radius of the neighbourhood U_δ; +∞ when the operator is global.
    pub delta: f64,
    /// Bound on the Euclidean norm of the full gradient.
    pub k: f64,
    pub modulus: Modulus,
    /// Bound on |∇_p F|, used by the CFL condition.
    pub p_lipschitz: f64,
}

impl OperatorConstants {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0 && self.big_lambda >= 1.0) {
            return domain(format!("need 0 < λ ≤ 1 ≤ Λ, got λ = {}, Λ = {}", self.lambda, self.big_lambda));
        }
        if !(self.delta > 0.0) {
            return domain("δ must be positive");
        }
        Ok(())
    }

    /// min(δ, 1): the amplitude scale used when δ is infinite.
    pub fn effective_delta(&self) -> f64 {
        self.delta.min(1.0)
    }
}

pub trait EllipticOperator: Send + Sync + Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn constants(&self) -> &OperatorConstants;
    fn eval(&self, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64) -> Result<f64>;

    /// F(M, 0, 0, 0, 0).
    fn eval_m(&self, m: &SymMat) -> Result<f64> {
        let n = self.dim();
        self.eval(m, &ZEROS[..n], 0.0, &ZEROS[..n], 0.0)
    }
}

pub type OperatorRef = Arc<dyn EllipticOperator>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extremal {
    Minimal,
    Maximal,
}

/// Pucci extremal operators M⁻ and M⁺.
#[derive(Debug, Clone)]
pub struct Pucci {
    n: usize,
    kind: Extremal,
    consts: OperatorConstants,
}

impl Pucci {
    pub fn new(kind: Extremal, lambda: f64, big_lambda: f64, n: usize) -> Result<Self> {
        check_dim(n)?;
        let consts = OperatorConstants {
            lambda,
            big_lambda,
            delta: f64::INFINITY,
            k: (n as f64).sqrt() * big_lambda,
            modulus: Modulus::Step(big_lambda - lambda),
            p_lipschitz: 0.0,
        };
        consts.validate()?;
        Ok(Self { n, kind, consts })
    }

    /// The same operator with a finite declared δ.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return domain("δ must be positive");
        }
        self.consts.delta = delta;
        Ok(self)
    }

    pub fn apply(&self, m: &SymMat) -> f64 {
        let ev = linalg::eigenvalues(m);
        let (lo, hi) = match self.kind {
            Extremal::Minimal => (self.consts.lambda, self.consts.big_lambda),
            Extremal::Maximal => (self.consts.big_lambda, self.consts.lambda),
        };
        ev[..self.n].iter().map(|&e| if e > 0.0 { lo * e } else { hi * e }).sum()
    }
}

impl EllipticOperator for Pucci {
    fn name(&self) -> String {
        match self.kind {
            Extremal::Minimal => "pucci-min".into(),
            Extremal::Maximal => "pucci-max".into(),
        }
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn constants(&self) -> &OperatorConstants {
        &self.consts
    }
    fn eval(&self, m: &SymMat, _p: &[f64], _z: f64, _x: &[f64], _t: f64) -> Result<f64> {
        Ok(self.apply(m))
    }
}

pub fn make_pucci_minimal(lambda: f64, big_lambda: f64, n: usize) -> Result<Pucci> {
    Pucci::new(Extremal::Minimal, lambda, big_lambda, n)
}

pub fn make_pucci_maximal(lambda: f64, big_lambda: f64, n: usize) -> Result<Pucci> {
    Pucci::new(Extremal::Maximal, lambda, big_lambda, n)
}

/// F(M, p, z) = tr(AM) + b·p + c z.
#[derive(Debug, Clone)]
pub struct Linear {
    a: SymMat,
    b: Vec<f64>,
    c: f64,
    consts: OperatorConstants,
}

impl Linear {
    pub fn matrix(&self) -> &SymMat {
        &self.a
    }
}

impl EllipticOperator for Linear {
    fn name(&self) -> String {
        "linear".into()
    }
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn constants(&self) -> &OperatorConstants {
        &self.consts
    }
    fn eval(&self, m: &SymMat, p: &[f64], z: f64, _x: &[f64], _t: f64) -> Result<f64> {
        let tr = self.a.component_mul(m).sum();
        Ok(tr + self.b.iter().zip(p).map(|(u, v)| u * v).sum::<f64>() + self.c * z)
    }
}

/// tr(AM) + b·p + cz, declaring λ = min(1, λ_min(A)) and Λ = max(1, λ_max(A)).
pub fn make_linear(a: &SymMat, b: &[f64], c: f64) -> Result<Linear> {
    let n = a.nrows();
    check_dim(n)?;
    if a.ncols() != n || b.len() != n {
        return domain("shape mismatch in linear operator");
    }
    if (a - a.transpose()).amax() > 1e-12 {
        return domain("A must be symmetric");
    }
    let lo = linalg::min_eigenvalue(a);
    let hi = linalg::max_eigenvalue(a);
    if !(lo > 0.0) {
        return domain(format!("A is not positive definite (smallest eigenvalue {lo})"));
    }
    make_linear_with_bounds(a, b, c, lo.min(1.0), hi.max(1.0))
}

/// As [`make_linear`] but with prescribed ellipticity bounds that A must respect.
pub fn make_linear_with_bounds(a: &SymMat, b: &[f64], c: f64, lambda: f64, big_lambda: f64) -> Result<Linear> {
    let n = a.nrows();
    check_dim(n)?;
    if b.len() != n {
        return domain("shape mismatch in linear operator");
    }
    let lo = linalg::min_eigenvalue(a);
    let hi = linalg::max_eigenvalue(a);
    if lo < lambda * (1.0 - 1e-12) || hi > big_lambda * (1.0 + 1e-12) {
        return domain(format!("A has spectrum [{lo}, {hi}] outside [{lambda}, {big_lambda}]"));
    }
    let consts = OperatorConstants {
        lambda,
        big_lambda,
        delta: f64::INFINITY,
        k: (a.norm_squared() + b.iter().map(|v| v * v).sum::<f64>() + c * c).sqrt(),
        modulus: Modulus::Zero,
        p_lipschitz: linalg::norm(b),
    };
    consts.validate()?;
    Ok(Linear { a: linalg::symmetrize(a), b: b.to_vec(), c, consts })
}

/// The heat operator tr M.
pub fn make_heat(n: usize) -> Result<Linear> {
    make_linear(&linalg::identity(n), &vec![0.0; n], 0.0)
}

/// tr M + r p₁ + r² z, the lower-order perturbation of the heat operator.
pub fn make_general_example(n: usize, r: f64) -> Result<Linear> {
    let mut b = vec![0.0; n];
    b[0] = r;
    make_linear(&linalg::identity(n), &b, r * r)
}

/// log det(I + M) on ‖M‖ ≤ 1/2.
#[derive(Debug, Clone)]
pub struct LogDet {
    n: usize,
    consts: OperatorConstants,
}

impl EllipticOperator for LogDet {
    fn name(&self) -> String {
        "logdet".into()
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn constants(&self) -> &OperatorConstants {
        &self.consts
    }
    fn eval(&self, m: &SymMat, _p: &[f64], _z: f64, _x: &[f64], _t: f64) -> Result<f64> {
        let ev = linalg::eigenvalues(m);
        let norm = ev[..self.n].iter().fold(0.0f64, |a, e| a.max(e.abs()));
        if norm > 0.5 * (1.0 + 1e-12) {
            return domain(format!("log det evaluated at ‖M‖ = {norm} > 1/2"));
        }
        Ok(ev[..self.n].iter().map(|e| e.ln_1p()).sum())
    }
}

pub fn make_logdet(n: usize) -> Result<LogDet> {
    check_dim(n)?;
    Ok(LogDet {
        n,
        consts: OperatorConstants {
            lambda: 2.0 / 3.0,
            big_lambda: 2.0,
            delta: 0.5,
            k: 2.0 * (n as f64).sqrt(),
            modulus: Modulus::Lipschitz(4.0),
            p_lipschitz: 0.0,
        },
    })
}

/// An operator evaluated as-is but advertising different constants.
#[derive(Debug, Clone)]
pub struct Redeclared {
    inner: OperatorRef,
    consts: OperatorConstants,
}

impl Redeclared {
    pub fn new(inner: OperatorRef, consts: OperatorConstants) -> Self {
        Self { inner, consts }
    }
}

impl EllipticOperator for Redeclared {
    fn name(&self) -> String {
        format!("{}(redeclared)", self.inner.name())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn constants(&self) -> &OperatorConstants {
        &self.consts
    }
    fn eval(&self, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64) -> Result<f64> {
        self.inner.eval(m, p, z, x, t)
    }
}

/// G(M, p, z, x, t) = −F(−M, −p, −z, x, t); maps subsolutions of F to supersolutions of G.
#[derive(Debug, Clone)]
pub struct Dual {
    inner: OperatorRef,
}

impl Dual {
    pub fn new(inner: OperatorRef) -> Self {
        Self { inner }
    }
}

impl EllipticOperator for Dual {
    fn name(&self) -> String {
        format!("dual({})", self.inner.name())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn constants(&self) -> &OperatorConstants {
        self.inner.constants()
    }
    fn eval(&self, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64) -> Result<f64> {
        let mp: Vec<f64> = p.iter().map(|v| -v).collect();
        Ok(-self.inner.eval(&(-m), &mp, -z, x, t)?)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        domain(format!("dimension {n} not in 1..=3"))
    }
}

/// ½xᵀMx + p·x + z + βt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadPoly {
    pub m: SymMat,
    pub p: Vec<f64>,
    pub z: f64,
    pub beta: f64,
}

impl QuadPoly {
    pub fn new(m: SymMat, p: Vec<f64>, z: f64, beta: f64) -> Result<Self> {
        if m.nrows() != p.len() || m.ncols() != p.len() {
            return domain("shape mismatch in quadratic polynomial");
        }
        Ok(Self { m: linalg::symmetrize(&m), p, z, beta })
    }

    pub fn zero(n: usize) -> Self {
        Self { m: linalg::zeros(n), p: vec![0.0; n], z: 0.0, beta: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let n = self.dim();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += x[i] * self.m[(i, j)] * x[j];
            }
        }
        0.5 * q + self.p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.z + self.beta * t
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.p[i] + (0..n).map(|j| self.m[(i, j)] * x[j]).sum::<f64>()).collect()
    }

    /// Largest coefficient size max(‖M‖, |p|, |z|, |β|).
    pub fn size(&self) -> f64 {
        linalg::spectral_norm(&self.m).max(linalg::norm(&self.p)).max(self.z.abs()).max(self.beta.abs())
    }
}

/// Default finite-difference step for matrix-slot derivatives.
pub fn default_fd_step(f: &dyn EllipticOperator) -> f64 {
    1e-4 * f.constants().effective_delta()
}

/// Central-difference gradient of F in the matrix slot, symmetrized.
pub fn df_at(f: &dyn EllipticOperator, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64) -> Result<SymMat> {
    df_at_step(f, m, p, z, x, t, default_fd_step(f))
}

pub fn df_at_step(f: &dyn EllipticOperator, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64, eta: f64) -> Result<SymMat> {
    let n = f.dim();
    if m.nrows() != n {
        return domain("matrix dimension mismatch");
    }
    let mut d = linalg::zeros(n);
    let mut e = m.clone();
    for i in 0..n {
        for j in i..n {
            let s = if i == j { eta } else { 0.5 * eta };
            e[(i, j)] += s;
            if i != j {
                e[(j, i)] += s;
            }
            let up = f.eval(&e, p, z, x, t).map_err(|err| stencil_error(err))?;
            e[(i, j)] -= 2.0 * s;
            if i != j {
                e[(j, i)] -= 2.0 * s;
            }
            let dn = f.eval(&e, p, z, x, t).map_err(|err| stencil_error(err))?;
            e[(i, j)] = m[(i, j)];
            e[(j, i)] = m[(j, i)];
            let v = (up - dn) / (2.0 * eta);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

fn stencil_error(err: Error) -> Error {
    match err {
        Error::Domain(m) => Error::Domain(format!("derivative stencil leaves the domain: {m}")),
        other => other,
    }
}

/// Euclidean norm of the full finite-difference gradient of F at one point.
pub fn full_gradient_norm(f: &dyn EllipticOperator, m: &SymMat, p: &[f64], z: f64, x: &[f64], t: f64, eta: f64) -> Result<(f64, f64, f64)> {
    let dm = df_at_step(f, m, p, z, x, t, eta)?;
    let n = f.dim();
    let mut pp = p.to_vec();
    let mut grad_p = 0.0;
    for i in 0..n {
        pp[i] = p[i] + eta;
        let up = f.eval(m, &pp, z, x, t)?;
        pp[i] = p[i] - eta;
        let dn = f.eval(m, &pp, z, x, t)?;
        pp[i] = p[i];
        grad_p += ((up - dn) / (2.0 * eta)).powi(2);
    }
    let gz = (f.eval(m, p, z + eta, x, t)? - f.eval(m, p, z - eta, x, t)?) / (2.0 * eta);
    let mut xx = x.to_vec();
    let mut grad_xt = 0.0;
    for i in 0..n {
        xx[i] = x[i] + eta;
        let up = f.eval(m, p, z, &xx, t)?;
        xx[i] = x[i] - eta;
        let dn = f.eval(m, p, z, &xx, t)?;
        xx[i] = x[i];
        grad_xt += ((up - dn) / (2.0 * eta)).powi(2);
    }
    grad_xt += ((f.eval(m, p, z, x, t + eta)? - f.eval(m, p, z, x, t - eta)?) / (2.0 * eta)).powi(2);
    let total = (dm.norm_squared() + grad_p + gz * gz + grad_xt).sqrt();
    Ok((total, grad_p.sqrt(), gz.abs()))
}

/// Outcome of one sampled hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub skipped: usize,
    /// Smallest slack observed (negative means violated).
    pub worst_margin: f64,
    pub witness: Option<String>,
}

impl HypothesisCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), passed: true, checked: 0, skipped: 0, worst_margin: f64::INFINITY, witness: None }
    }

    fn record(&mut self, margin: f64, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if margin < self.worst_margin {
            self.worst_margin = margin;
            if margin < 0.0 {
                self.passed = false;
                self.witness = Some(witness());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub operator: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct BasePoint {
    m: SymMat,
    p: Vec<f64>,
    z: f64,
    x: Vec<f64>,
    t: f64,
    residual: f64,
}

fn base_points(f: &dyn EllipticOperator, phi: &GridFunction) -> Vec<BasePoint> {
    let g = phi.grid();
    let mut out = Vec::new();
    for k in 1..g.time_len() {
        for j in 0..g.spatial_len() {
            if !g.has_full_stencil(j) {
                continue;
            }
            let e = fd_expansion(phi, j, k).expect("interior node");
            let x = g.coords(j);
            let t = g.time(k);
            let residual = match f.eval(&e.hessian, &e.gradient, e.value, &x, t) {
                Ok(v) => v - e.time_slope,
                Err(_) => f64::NAN,
            };
            out.push(BasePoint { m: e.hessian, p: e.gradient, z: e.value, x, t, residual });
        }
    }
    out
}

/// Samples the structural hypotheses around φ.
///
/// H1 monotonicity, H2 ellipticity λ tr N ≤ F(M+N) − F(M) ≤ Λ tr N for N ≥ 0, H3 the residual of φ,
/// H4 the gradient bound K and H5 the modulus of the matrix-slot gradient. Perturbations of size up
/// to min(δ, 1)/2 are drawn around the fd data of φ at random interior nodes.
pub fn verify_hypotheses(f: &dyn EllipticOperator, phi: &GridFunction, samples: usize, seed: u64) -> HypothesisReport {
    let c = f.constants().clone();
    let n = f.dim();
    let g = phi.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases = base_points(f, phi);
    let rho = 0.5 * c.effective_delta();
    let eta = default_fd_step(f);
    let fd_tol = 1e-6;
    let mut h1 = HypothesisCheck::new("H1");
    let mut h2 = HypothesisCheck::new("H2");
    let mut h3 = HypothesisCheck::new("H3");
    let mut h4 = HypothesisCheck::new("H4");
    let mut h5 = HypothesisCheck::new("H5");
    let h3_tol = 10.0 * (g.h() * g.h() + g.tau()) + 1e-9;
    for b in &bases {
        if b.residual.is_nan() {
            h3.skipped += 1;
            continue;
        }
        let r = b.residual;
        h3.record(h3_tol - r.abs(), || format!("|F[φ] − φ_t| = {r:e} at x = {:?}, t = {}", b.x, b.t));
    }
    if bases.is_empty() {
        h3.witness = Some("no interior nodes".into());
    }
    let origin = BasePoint { m: linalg::zeros(n), p: vec![0.0; n], z: 0.0, x: vec![0.0; n], t: 0.0, residual: 0.0 };
    for _ in 0..samples {
        let b = if bases.is_empty() { &origin } else { &bases[rng.random_range(0..bases.len())] };
        let m = &b.m + linalg::random_symmetric(&mut rng, n, rho);
        let p: Vec<f64> = b.p.iter().map(|v| v + rng.random_range(-rho..=rho)).collect();
        let z = b.z + rng.random_range(-rho..=rho);
        let nn = linalg::random_psd(&mut rng, n, rho);
        let mn = &m + &nn;
        let (f0, f1) = match (f.eval(&m, &p, z, &b.x, b.t), f.eval(&mn, &p, z, &b.x, b.t)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                h1.skipped += 1;
                h2.skipped += 1;
                continue;
            }
        };
        let tol = 1e-12 * (1.0 + f0.abs() + f1.abs());
        let inc = f1 - f0;
        let tr = nn.trace();
        h1.record(inc + tol, || format!("F(M+N) − F(M) = {inc:e} for M = {m:?}, N = {nn:?}"));
        let lower = inc - c.lambda * tr + tol;
        let upper = c.big_lambda * tr - inc + tol;
        h2.record(lower.min(upper), || {
            format!("F(M+N) − F(M) = {inc:e} outside [λ tr N, Λ tr N] = [{:e}, {:e}] for M = {m:?}, N = {nn:?}", c.lambda * tr, c.big_lambda * tr)
        });
        if let Ok((gnorm, _, _)) = full_gradient_norm(f, &m, &p, z, &b.x, b.t, eta) {
            let margin = c.k * (1.0 + 1e-6) + fd_tol - gnorm;
            h4.record(margin, || format!("|∇F| = {gnorm} > K = {} at M = {m:?}", c.k));
        } else {
            h4.skipped += 1;
        }
        let m2 = &b.m + linalg::random_symmetric(&mut rng, n, rho);
        match (df_at(f, &m, &p, z, &b.x, b.t), df_at(f, &m2, &p, z, &b.x, b.t)) {
            (Ok(da), Ok(db)) => {
                let gap = linalg::spectral_norm(&(&da - &db));
                let dist = linalg::spectral_norm(&(&m - &m2));
                // difference quotients straddling an eigenvalue kink blur the jump slightly
                let margin = c.modulus.eval(dist) + fd_tol + 1e-4 * c.big_lambda - gap;
                h5.record(margin, || format!("‖DF(A) − DF(B)‖ = {gap:e} > ω({dist:e})"));
            }
            _ => h5.skipped += 1,
        }
    }
    HypothesisReport { operator: f.name(), samples, seed, checks: vec![h1, h2, h3, h4, h5] }
}

/// Whether ‖M‖ ≤ δ follows when M ≥ −aI and F(M) ≤ a; vacuously true when the premises fail.
pub fn eigenbound_check(f: &dyn EllipticOperator, m: &SymMat, a: f64) -> Result<bool> {
    eigenbound_check_with(f, m, a, DEFAULT_C_PRACTICAL)
}

pub fn eigenbound_check_with(f: &dyn EllipticOperator, m: &SymMat, a: f64, c_practical: f64) -> Result<bool> {
    let delta = f.constants().delta;
    if !(a > 0.0 && a < c_practical * delta) {
        return domain(format!("a = {a} must lie in (0, {c_practical}·δ)"));
    }
    if linalg::min_eigenvalue(m) < -a {
        return Ok(true);
    }
    match f.eval_m(m) {
        Ok(v) if v <= a => Ok(linalg::spectral_norm(m) <= delta),
        Ok(_) => Ok(true),
        Err(_) => Ok(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::SpaceTimeGrid;
    use nalgebra::DMatrix;

    fn diag(v: &[f64]) -> SymMat {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    fn zero_phi(n: usize) -> GridFunction {
        let g = Arc::new(SpaceTimeGrid::unit(n, 0.25, 0.25).unwrap());
        GridFunction::constant(g, 0.0).unwrap()
    }

    #[test]
    fn pucci_examples() {
        let f = make_pucci_minimal(0.5, 2.0, 1).unwrap();
        assert_eq!(f.eval_m(&diag(&[3.0])).unwrap(), 1.5);
        assert_eq!(f.eval_m(&diag(&[-3.0])).unwrap(), -6.0);
        let f = make_pucci_minimal(0.5, 2.0, 3).unwrap();
        assert!((f.eval_m(&linalg::identity(3)).unwrap() - 1.5).abs() < 1e-14);
        let f = make_pucci_minimal(0.5, 2.0, 2).unwrap();
        assert!((f.eval_m(&diag(&[1.0, -1.0])).unwrap() - (0.5 - 2.0)).abs() < 1e-14);
        let g = make_pucci_maximal(0.5, 2.0, 2).unwrap();
        assert!((g.eval_m(&diag(&[1.0, -1.0])).unwrap() - (2.0 - 0.5)).abs() < 1e-14);
        assert!(make_pucci_minimal(1.5, 2.0, 1).is_err());
    }

    #[test]
    fn linear_examples() {
        let f = make_linear(&diag(&[1.0, 2.0]), &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(f.eval_m(&linalg::identity(2)).unwrap(), 3.0);
        assert!(make_linear(&diag(&[1.0, -2.0]), &[0.0, 0.0], 0.0).is_err());
        assert!(make_linear_with_bounds(&diag(&[1.0, 3.0]), &[0.0, 0.0], 0.0, 1.0, 2.0).is_err());
        let g = make_general_example(1, 0.1).unwrap();
        assert!((g.eval(&diag(&[1.0]), &[2.0], 3.0, &[0.0], 0.0).unwrap() - (1.0 + 0.2 + 0.03)).abs() < 1e-15);
    }

    #[test]
    fn logdet_examples() {
        let f = make_logdet(1).unwrap();
        assert_eq!(f.eval_m(&linalg::zeros(1)).unwrap(), 0.0);
        assert!((f.eval_m(&diag(&[0.1])).unwrap() - 0.09531017980432493).abs() < 1e-15);
        assert!(f.eval_m(&diag(&[0.6])).is_err());
    }

    #[test]
    fn df_examples() {
        let a = diag(&[1.0, 2.0]);
        let f = make_linear(&a, &[0.0, 0.0], 0.0).unwrap();
        let d = df_at(&f, &linalg::identity(2), &[0.0, 0.0], 0.0, &[0.0, 0.0], 0.0).unwrap();
        assert!((d - a).amax() < 1e-9);
        let p = make_pucci_minimal(0.5, 2.0, 2).unwrap();
        let d = df_at(&p, &linalg::identity(2), &[0.0, 0.0], 0.0, &[0.0, 0.0], 0.0).unwrap();
        assert!((d - linalg::identity(2) * 0.5).amax() < 1e-9);
        let l = make_logdet(3).unwrap();
        let d = df_at(&l, &linalg::zeros(3), &[0.0; 3], 0.0, &[0.0; 3], 0.0).unwrap();
        assert!((d - linalg::identity(3)).amax() < 1e-8);
        let m = diag(&[0.5, 0.0, 0.0]);
        assert!(df_at(&l, &m, &[0.0; 3], 0.0, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn builtins_pass_hypotheses() {
        for n in 1..=3 {
            let ops: Vec<OperatorRef> = vec![
                Arc::new(make_pucci_minimal(0.5, 2.0, n).unwrap()),
                Arc::new(make_pucci_maximal(0.5, 2.0, n).unwrap()),
                Arc::new(make_heat(n).unwrap()),
                Arc::new(make_general_example(n, 0.3).unwrap()),
                Arc::new(make_logdet(n).unwrap()),
            ];
            for f in ops {
                let r = verify_hypotheses(f.as_ref(), &zero_phi(n), 2000, 7);
                assert!(r.passed(), "{} n={n}: {:?}", f.name(), r.checks);
            }
        }
    }

    #[test]
    fn logdet_with_small_lambda_fails_h2() {
        let l: OperatorRef = Arc::new(make_logdet(2).unwrap());
        let mut c = l.constants().clone();
        c.big_lambda = 1.0;
        let bad = Redeclared::new(l, c);
        let r = verify_hypotheses(&bad, &zero_phi(2), 2000, 11);
        let h2 = r.check("H2").unwrap();
        assert!(!h2.passed);
        assert!(h2.witness.is_some());
    }

    #[test]
    fn eigenbound_examples() {
        let p = make_pucci_minimal(0.5, 2.0, 2).unwrap().with_delta(1.0).unwrap();
        assert!(eigenbound_check(&p, &linalg::zeros(2), 1e-3).unwrap());
        assert!(eigenbound_check(&p, &(linalg::identity(2) * 0.5), 1e-3).unwrap());
        assert!(eigenbound_check(&p, &linalg::zeros(2), 0.5).is_err());
    }

    #[test]
    fn dual_flips_pucci() {
        let p: OperatorRef = Arc::new(make_pucci_minimal(0.5, 2.0, 2).unwrap());
        let q = make_pucci_maximal(0.5, 2.0, 2).unwrap();
        let d = Dual::new(p);
        let m = diag(&[1.0, -3.0]);
        assert!((d.eval_m(&m).unwrap() - q.eval_m(&m).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn quadpoly_eval() {
        let q = QuadPoly::new(diag(&[2.0, 4.0]), vec![1.0, -1.0], 0.5, 3.0).unwrap();
        assert!((q.eval(&[1.0, 2.0], -0.5) - (0.5 * (2.0 + 16.0) + 1.0 - 2.0 + 0.5 - 1.5)).abs() < 1e-14);
    }
}

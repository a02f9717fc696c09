//! Nonlinear edge systems for the equilibrium configuration at fixed
//! parameters, and the damped Newton solver around them.
//!
//! For each support scenario the Cauchy transform identity
//! `(-nu_hat + phi')(z) = sqrt(R(z))` pins the edge positions through three
//! matching conditions: the `z^0` and `z^-1` coefficients of the expansion
//! of `sqrt(R)` at infinity must equal `beta` and `gamma - t`, and the
//! residue of `sqrt(R)` at the pole `-v` must equal `gamma`. A two-cut
//! configuration additionally satisfies the vanishing gap integral. The
//! first two conditions are generated from truncated series products rather
//! than transcribed closed forms; the unit tests pin the resulting
//! polynomial identities.
//!
//! Unknown layouts:
//!
//! * hard edge: `[a1, s, p]` where `s, p` are the sum and product of the
//!   two remaining density zeros (covers both the real-pair and the
//!   conjugate-pair case, and stays regular through their collision);
//! * soft edge: `[b1, a2, a3]`;
//! * two-cut: `[a1, b1, a2, a3]`.
//!
//! For reference, the generated conditions reduce to these closed forms
//! (all verified against the series construction in the unit tests; the
//! pole sits at `-v`):
//!
//! * hard edge (`S = [0, a1]`, zeros `b1, b2` with `s = b1+b2`,
//!   `p = b1 b2`):
//!   - `a1 + 2s + 2v + 2 beta = 0`
//!   - `a1^2 - 8(p + s v + v^2) - 4 a1 (s + v) = 8(t - gamma)`
//!   - `(v^2 + s v + p) sqrt((v + a1)/v) = gamma`
//! * soft edge (`S = [a2, a3]`, zero `b1`):
//!   - `a2 + a3 + 2 b1 + 2v + 2 beta = 0`
//!   - `(a2 - a3)^2 - 4 (v + b1)(a2 + a3 + 2v) = 8(t - gamma)`
//!   - `(v + b1) sqrt((v + a2)(v + a3)) = gamma`
//! * two-cut (`S = [0, a1] u [a2, a3]`, zero `b1` in the gap):
//!   - `a1 + a2 + a3 + 2 b1 + 2v + 2 beta = 0`
//!   - `a1^2 + a2^2 + a3^2 - 2(a1 a2 + a1 a3 + a2 a3)
//!      - 4 (v + b1)(a1 + a2 + a3) - 8 v (v + b1) = 8(t - gamma)`
//!   - `(v + b1) sqrt((v + a1)(v + a2)(v + a3)/v) = gamma`
//!   - `int_{a1}^{a2} (x - b1)/(x + v) sqrt((x - a1)(a2 - x)(a3 - x)/x) dx = 0`

use crate::model::{
    classify_region, critical_points, BPair, FieldParams, ModelError, PhaseRegion, Scenario,
    SupportConfig,
};
use crate::quad::{
    self, compat_integral, gap_integral, gap_integral_scale, min_density, QuadError, QuadSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("newton did not converge after {iterations} iterations (residual {residual_norm})")]
    MaxIterations { iterations: usize, residual_norm: f64 },
    #[error("singular jacobian near a transition point")]
    SingularJacobian,
    #[error("iterate left the scenario domain")]
    DomainExit,
    #[error("no scenario yields a valid configuration at beta={beta}, gamma={gamma}, t={t}")]
    NoValidScenario { beta: f64, gamma: f64, t: f64 },
    #[error("unknown vector has length {got}, scenario needs {expected}")]
    ScenarioMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Series expansion of sqrt(R) at infinity
// ---------------------------------------------------------------------------

const SERIES_LEN: usize = 8;

/// Truncated expansion at infinity: `sum_j c[j] z^(lead - j)`.
#[derive(Debug, Clone, Copy)]
struct TailSeries {
    lead: i32,
    c: [f64; SERIES_LEN],
}

impl TailSeries {
    fn from_poly(coeffs: &[f64]) -> Self {
        let mut c = [0.0; SERIES_LEN];
        c[..coeffs.len()].copy_from_slice(coeffs);
        TailSeries { lead: coeffs.len() as i32 - 1, c }
    }

    /// `1/(z + v) = z^-1 (1 - v/z + v^2/z^2 - ...)`.
    fn inv_pole(v: f64) -> Self {
        let mut c = [0.0; SERIES_LEN];
        let mut term = 1.0;
        for slot in c.iter_mut() {
            *slot = term;
            term *= -v;
        }
        TailSeries { lead: -1, c }
    }

    /// `sqrt(1 - a/z) = sum_k binom(1/2, k) (-a)^k z^-k`.
    fn sqrt_one_minus(a: f64) -> Self {
        let mut c = [0.0; SERIES_LEN];
        let mut binom = 1.0;
        let mut pow = 1.0;
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = binom * pow;
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            pow *= -a;
        }
        TailSeries { lead: 0, c }
    }

    fn mul(&self, rhs: &TailSeries) -> TailSeries {
        let mut c = [0.0; SERIES_LEN];
        for i in 0..SERIES_LEN {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..SERIES_LEN - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        TailSeries { lead: self.lead + rhs.lead, c }
    }

    fn coeff(&self, power: i32) -> f64 {
        let idx = self.lead - power;
        if (0..SERIES_LEN as i32).contains(&idx) {
            self.c[idx as usize]
        } else {
            0.0
        }
    }

    fn abs(&self) -> TailSeries {
        let mut c = self.c;
        for v in c.iter_mut() {
            *v = v.abs();
        }
        TailSeries { lead: self.lead, c }
    }
}

fn sqrt_r_series(scenario: Scenario, u: &[f64], v: f64) -> (TailSeries, TailSeries) {
    match scenario {
        Scenario::OneCutHard => {
            let (a1, s, p) = (u[0], u[1], u[2]);
            let b = TailSeries::from_poly(&[1.0, -s, p]);
            let pole = TailSeries::inv_pole(v);
            let edge = TailSeries::sqrt_one_minus(a1);
            (b.mul(&pole).mul(&edge), b.abs().mul(&pole.abs()).mul(&edge.abs()))
        }
        Scenario::OneCutSoft => {
            let (b1, a2, a3) = (u[0], u[1], u[2]);
            let b = TailSeries::from_poly(&[1.0, -b1]);
            let pole = TailSeries::inv_pole(v);
            let z = TailSeries::from_poly(&[1.0, 0.0]);
            let e2 = TailSeries::sqrt_one_minus(a2);
            let e3 = TailSeries::sqrt_one_minus(a3);
            (
                b.mul(&pole).mul(&z).mul(&e2).mul(&e3),
                b.abs().mul(&pole.abs()).mul(&z).mul(&e2.abs()).mul(&e3.abs()),
            )
        }
        Scenario::TwoCut => {
            let (a1, b1, a2, a3) = (u[0], u[1], u[2], u[3]);
            let b = TailSeries::from_poly(&[1.0, -b1]);
            let pole = TailSeries::inv_pole(v);
            let z = TailSeries::from_poly(&[1.0, 0.0]);
            let e1 = TailSeries::sqrt_one_minus(a1);
            let e2 = TailSeries::sqrt_one_minus(a2);
            let e3 = TailSeries::sqrt_one_minus(a3);
            (
                b.mul(&pole).mul(&z).mul(&e1).mul(&e2).mul(&e3),
                b.abs().mul(&pole.abs()).mul(&z).mul(&e1.abs()).mul(&e2.abs()).mul(&e3.abs()),
            )
        }
    }
}

/// Residue of `sqrt(R)` at `z = -v`, with the branch making
/// `sqrt(R) ~ z` at `+infinity`. `None` outside the square-root domain.
fn pole_residue(scenario: Scenario, u: &[f64], v: f64) -> Option<f64> {
    match scenario {
        Scenario::OneCutHard => {
            let (a1, s, p) = (u[0], u[1], u[2]);
            let arg = (v + a1) / v;
            (arg > 0.0).then(|| (v * v + s * v + p) * arg.sqrt())
        }
        Scenario::OneCutSoft => {
            let (b1, a2, a3) = (u[0], u[1], u[2]);
            let arg = (v + a2) * (v + a3);
            (arg > 0.0).then(|| (v + b1) * arg.sqrt())
        }
        Scenario::TwoCut => {
            let (a1, b1, a2, a3) = (u[0], u[1], u[2], u[3]);
            let arg = (v + a1) * (v + a2) * (v + a3) / v;
            (arg > 0.0).then(|| (v + b1) * arg.sqrt())
        }
    }
}

pub fn unknown_count(scenario: Scenario) -> usize {
    match scenario {
        Scenario::OneCutHard | Scenario::OneCutSoft => 3,
        Scenario::TwoCut => 4,
    }
}

/// Raw residuals together with their magnitude scales;
/// `raw[i] / scale[i]` is the normalized residual used for convergence.
#[derive(Debug, Clone)]
pub struct ResidualEval {
    pub raw: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ResidualEval {
    pub fn normalized(&self) -> Vec<f64> {
        self.raw.iter().zip(&self.scale).map(|(r, s)| r / s).collect()
    }

    pub fn norm(&self) -> f64 {
        self.raw.iter().zip(&self.scale).map(|(r, s)| (r / s).abs()).fold(0.0, f64::max)
    }
}

/// Matching conditions for a scenario at the given unknowns: the `z^0`
/// coefficient, the `z^-1` coefficient, the pole residue, and (two-cut
/// only) the gap integral.
pub fn residuals(
    scenario: Scenario,
    u: &[f64],
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<ResidualEval, SolveError> {
    let n = unknown_count(scenario);
    if u.len() != n {
        return Err(SolveError::ScenarioMismatch { expected: n, got: u.len() });
    }
    if !u.iter().all(|x| x.is_finite()) {
        return Err(SolveError::DomainExit);
    }
    let v = p.pole();
    let (series, series_abs) = sqrt_r_series(scenario, u, v);
    let residue = pole_residue(scenario, u, v).ok_or(SolveError::DomainExit)?;

    let mut raw = vec![
        series.coeff(0) - p.beta,
        series.coeff(-1) - (p.gamma - p.t),
        residue - p.gamma,
    ];
    let mut scale = vec![
        1.0 + p.beta.abs() + series_abs.coeff(0),
        1.0 + p.gamma.abs() + p.t + series_abs.coeff(-1),
        1.0 + p.gamma.abs() + residue.abs(),
    ];

    if scenario == Scenario::TwoCut {
        let (a1, b1, a2, a3) = (u[0], u[1], u[2], u[3]);
        if !(0.0 < a1 && a1 < a2 && a2 < a3) {
            return Err(SolveError::DomainExit);
        }
        let g = gap_integral(a1, b1, a2, a3, v, spec)?;
        let g_scale = gap_integral_scale(a1, a2, a3, v, spec)?;
        raw.push(g);
        scale.push((1.0 + b1.abs()) * g_scale.max(1e-300));
    }
    Ok(ResidualEval { raw, scale })
}

// ---------------------------------------------------------------------------
// Newton
// ---------------------------------------------------------------------------

/// Validity of a converged configuration as an equilibrium measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidityFlags {
    /// Scenario ordering constraints hold.
    pub ordering: bool,
    /// Density nonnegative on 256 support samples.
    pub density_nonneg: bool,
    /// Phase inequality integrals (where applicable) nonnegative.
    pub inequality_ok: bool,
}

impl ValidityFlags {
    pub fn valid(&self) -> bool {
        self.ordering && self.density_nonneg && self.inequality_ok
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub config: SupportConfig,
    pub unknowns: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub flags: ValidityFlags,
    /// Residual norm before each accepted step (then the final norm).
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn scenario(&self) -> Scenario {
        self.config.scenario()
    }
}

pub fn config_from_unknowns(scenario: Scenario, u: &[f64]) -> SupportConfig {
    match scenario {
        Scenario::OneCutHard => {
            SupportConfig::OneCutHard { a1: u[0], b: BPair::from_sum_product(u[1], u[2]) }
        }
        Scenario::OneCutSoft => SupportConfig::OneCutSoft { b1: u[0], a2: u[1], a3: u[2] },
        Scenario::TwoCut => SupportConfig::TwoCut { a1: u[0], b1: u[1], a2: u[2], a3: u[3] },
    }
}

pub fn unknowns_from_config(cfg: &SupportConfig) -> Vec<f64> {
    match *cfg {
        SupportConfig::OneCutHard { a1, b } => {
            let (s, p) = b.sum_product();
            vec![a1, s, p]
        }
        SupportConfig::OneCutSoft { b1, a2, a3 } => vec![b1, a2, a3],
        SupportConfig::TwoCut { a1, b1, a2, a3 } => vec![a1, b1, a2, a3],
    }
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        let col_scale = a.iter().map(|r| r[col].abs()).fold(0.0, f64::max);
        if a[piv][col].abs() < 1e-14 * (1.0 + col_scale) {
            return Err(SolveError::SingularJacobian);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL_RES: f64 = 1e-10;
const NEWTON_TOL_STEP: f64 = 1e-12;
const NEWTON_MAX_DAMPING: u32 = 30;

/// The matching conditions are symmetric under swapping the two soft
/// edges; keep them ordered so the iterate stays in one chart.
fn canonicalize(scenario: Scenario, u: &mut [f64]) {
    match scenario {
        Scenario::OneCutSoft => {
            if u[1] > u[2] {
                u.swap(1, 2);
            }
        }
        Scenario::TwoCut => {
            if u[2] > u[3] {
                u.swap(2, 3);
            }
        }
        Scenario::OneCutHard => {}
    }
}

/// Damped Newton iteration on the scenario residuals with a
/// central-difference Jacobian.
pub fn newton_solve(
    scenario: Scenario,
    guess: &[f64],
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    let n = unknown_count(scenario);
    if guess.len() != n {
        return Err(SolveError::ScenarioMismatch { expected: n, got: guess.len() });
    }
    let mut u = guess.to_vec();
    canonicalize(scenario, &mut u);
    let mut eval = residuals(scenario, &u, p, spec)?;
    let mut norm = eval.norm();
    let mut history = vec![norm];
    let fd_step = f64::EPSILON.cbrt();

    for iter in 0..NEWTON_MAX_ITER {
        if norm < NEWTON_TOL_RES {
            return finish(scenario, u, norm, iter, history, p, spec);
        }

        let mut jac = vec![vec![0.0; n]; n];
        for col in 0..n {
            let h = fd_step * (1.0 + u[col].abs());
            let mut up = u.clone();
            let mut dn = u.clone();
            up[col] += h;
            dn[col] -= h;
            match (residuals(scenario, &up, p, spec), residuals(scenario, &dn, p, spec)) {
                (Ok(rp), Ok(rn)) => {
                    let (np, nn) = (rp.normalized(), rn.normalized());
                    for row in 0..n {
                        jac[row][col] = (np[row] - nn[row]) / (2.0 * h);
                    }
                }
                (Ok(rp), Err(_)) => {
                    let (np, n0) = (rp.normalized(), eval.normalized());
                    for row in 0..n {
                        jac[row][col] = (np[row] - n0[row]) / h;
                    }
                }
                (Err(_), Ok(rn)) => {
                    let (n0, nn) = (eval.normalized(), rn.normalized());
                    for row in 0..n {
                        jac[row][col] = (n0[row] - nn[row]) / h;
                    }
                }
                (Err(_), Err(_)) => return Err(SolveError::DomainExit),
            }
        }

        let step = solve_linear(jac, eval.normalized())?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_DAMPING {
            let mut trial: Vec<f64> = u.iter().zip(&step).map(|(x, d)| x - lambda * d).collect();
            canonicalize(scenario, &mut trial);
            if let Ok(te) = residuals(scenario, &trial, p, spec) {
                let tn = te.norm();
                if tn < norm * (1.0 - 1e-4 * lambda) || tn < NEWTON_TOL_RES {
                    let step_size = step
                        .iter()
                        .zip(&u)
                        .map(|(d, x)| (lambda * d / (1.0 + x.abs())).abs())
                        .fold(0.0, f64::max);
                    u = trial;
                    eval = te;
                    norm = tn;
                    history.push(norm);
                    accepted = true;
                    if norm < NEWTON_TOL_RES && step_size < NEWTON_TOL_STEP {
                        return finish(scenario, u, norm, iter + 1, history, p, spec);
                    }
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SolveError::MaxIterations { iterations: iter, residual_norm: norm });
        }
    }
    if norm < NEWTON_TOL_RES {
        return finish(scenario, u, norm, NEWTON_MAX_ITER, history, p, spec);
    }
    Err(SolveError::MaxIterations { iterations: NEWTON_MAX_ITER, residual_norm: norm })
}

fn finish(
    scenario: Scenario,
    mut u: Vec<f64>,
    mut norm: f64,
    iterations: usize,
    mut history: Vec<f64>,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    // One undamped polish step: quadratic convergence drives the algebraic
    // residual lines to rounding level.
    if norm > 1e-14 {
        if let Ok((trial, tn)) = polish_step(scenario, &u, p, spec) {
            if tn < norm {
                u = trial;
                norm = tn;
                history.push(norm);
            }
        }
    }
    let config = config_from_unknowns(scenario, &u);
    let flags = validate(&config, p, spec)?;
    Ok(SolveReport {
        config,
        unknowns: u,
        residual_norm: norm,
        iterations,
        flags,
        residual_history: history,
    })
}

fn polish_step(
    scenario: Scenario,
    u: &[f64],
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<(Vec<f64>, f64), SolveError> {
    let n = u.len();
    let eval = residuals(scenario, u, p, spec)?;
    let fd_step = f64::EPSILON.cbrt();
    let mut jac = vec![vec![0.0; n]; n];
    for col in 0..n {
        let h = fd_step * (1.0 + u[col].abs());
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[col] += h;
        dn[col] -= h;
        let rp = residuals(scenario, &up, p, spec)?;
        let rn = residuals(scenario, &dn, p, spec)?;
        let (np, nn) = (rp.normalized(), rn.normalized());
        for row in 0..n {
            jac[row][col] = (np[row] - nn[row]) / (2.0 * h);
        }
    }
    let step = solve_linear(jac, eval.normalized())?;
    let mut trial: Vec<f64> = u.iter().zip(&step).map(|(x, d)| x - d).collect();
    canonicalize(scenario, &mut trial);
    let te = residuals(scenario, &trial, p, spec)?;
    Ok((trial, te.norm()))
}

/// Validity checks for a converged configuration: ordering, sampled density
/// nonnegativity, and the applicable phase inequality integral.
pub fn validate(
    cfg: &SupportConfig,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<ValidityFlags, SolveError> {
    let v = p.pole();
    let tol = 1e-9;
    let (ordering, inequality_ok) = match *cfg {
        SupportConfig::OneCutHard { a1, b } => {
            let mut ordering = a1 > 0.0;
            let mut ineq = true;
            if let BPair::Real { b1, b2 } = b {
                // A real density zero strictly inside (0, a1) makes the
                // density negative on a sliver that sampling can miss;
                // reject analytically. (This is where the continued
                // post-merge branch fails below the gap closure.)
                let tol_in = 1e-9 * (1.0 + a1);
                for root in [b1, b2] {
                    if root > tol_in && root < a1 - tol_in {
                        ordering = false;
                    }
                }
                if ordering && b1 > a1 && b2 > b1 {
                    let f = quad::saturation_functional(cfg, p, spec)?;
                    ineq = f >= -tol * (1.0 + f.abs());
                }
            }
            (ordering, ineq)
        }
        SupportConfig::OneCutSoft { b1, a2, a3 } => {
            let ordering = 0.0 < a2 && a2 < a3 && b1 < a2;
            let mut ineq = true;
            if ordering && b1 > 0.0 {
                let c = compat_integral(b1, a2, a3, v, spec)?;
                ineq = c >= -tol * (1.0 + c.abs());
            }
            (ordering, ineq)
        }
        SupportConfig::TwoCut { a1, b1, a2, a3 } => {
            (0.0 < a1 && a1 < b1 && b1 < a2 && a2 < a3, true)
        }
    };
    let density_nonneg = if ordering {
        let lo = min_density(cfg, p, 256);
        lo >= -1e-12 * (1.0 + lo.abs())
    } else {
        false
    };
    Ok(ValidityFlags { ordering, density_nonneg, inequality_ok })
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// Nascent-edge offset used when reseeding across a transition.
pub(crate) const SEED_EPS: f64 = 1e-6;

/// Hard-edge seed for small masses: the density zeros start at the critical
/// points of the field (sum `-(beta+1)`, product `beta+gamma` in reduced
/// units) and `a1` grows from zero.
fn seed_hard_small_t(p: &FieldParams) -> Vec<f64> {
    let denom = (p.beta + p.gamma).max(1e-3);
    let a1 = (2.0 * p.t / denom).clamp(SEED_EPS, 1.0);
    vec![a1, -(p.beta + 1.0), p.beta + p.gamma]
}

/// Hard-edge seed from the wide-support asymptotics: the support edge of
/// the quadratic-field measure, one zero near `-1`, the other balancing the
/// trace.
fn seed_hard_large_t(p: &FieldParams) -> Vec<f64> {
    let a1 =
        (-2.0 * p.beta + 2.0 * (p.beta * p.beta + 6.0 * (p.t - p.gamma)).max(1.0).sqrt()) / 3.0;
    let s = -p.beta - 1.0 - 0.5 * a1;
    let pr = p.gamma / (1.0 + a1).sqrt() - 1.0 - s;
    vec![a1.max(SEED_EPS), s, pr]
}

/// Soft-edge seed: the cut is born at the upper critical point with a width
/// set by the local mass balance; the zero starts at the lower critical
/// point.
fn seed_soft_small_t(p: &FieldParams) -> Option<Vec<f64>> {
    let (ym, yp) = critical_points(p.beta, p.gamma);
    if yp.im != 0.0 || yp.re <= 0.0 {
        return None;
    }
    let slope = (yp.re - ym.re).max(1e-6);
    let w = (8.0 * p.t * (yp.re + 1.0) / slope).sqrt().min(yp.re);
    Some(vec![ym.re, yp.re - 0.5 * w, yp.re + 0.5 * w])
}

pub(crate) fn seed_hard_after_origin_attach(soft: &SupportConfig) -> Vec<f64> {
    let (b1, a3) = match *soft {
        SupportConfig::OneCutSoft { b1, a3, .. } => (b1, a3),
        _ => unreachable!(),
    };
    let eps = SEED_EPS * (1.0 + b1.abs());
    vec![a3, b1 - eps, -eps * b1]
}

pub(crate) fn seed_hard_after_triple_root(soft: &SupportConfig) -> Vec<f64> {
    let a3 = match *soft {
        SupportConfig::OneCutSoft { a3, .. } => a3,
        _ => unreachable!(),
    };
    vec![a3, -2.0 * SEED_EPS, SEED_EPS * SEED_EPS]
}

pub(crate) fn seed_twocut_after_origin_birth(soft: &SupportConfig, a1_new: f64) -> Vec<f64> {
    let (b1, a2, a3) = match *soft {
        SupportConfig::OneCutSoft { b1, a2, a3 } => (b1, a2, a3),
        _ => unreachable!(),
    };
    vec![a1_new, b1, a2, a3]
}

pub(crate) fn seed_twocut_after_interior_birth(hard: &SupportConfig, width: f64) -> Vec<f64> {
    let (a1, b1, b2) = match *hard {
        SupportConfig::OneCutHard { a1, b: BPair::Real { b1, b2 } } => (a1, b1, b2),
        _ => unreachable!(),
    };
    vec![a1, b1, b2 - 0.5 * width, b2 + 0.5 * width]
}

pub(crate) fn seed_hard_after_merge(two: &SupportConfig, im: f64) -> Vec<f64> {
    let (a1, b1, a2, a3) = match *two {
        SupportConfig::TwoCut { a1, b1, a2, a3 } => (a1, b1, a2, a3),
        _ => unreachable!(),
    };
    let c = (a1 + b1 + a2) / 3.0;
    vec![a3, 2.0 * c, c * c + im * im]
}

pub(crate) fn seed_soft_after_origin_detach(hard: &SupportConfig) -> Vec<f64> {
    let (a1, b) = match *hard {
        SupportConfig::OneCutHard { a1, b } => (a1, b),
        _ => unreachable!(),
    };
    let (b1, b2) = match b {
        BPair::Real { b1, b2 } => (b1, b2),
        BPair::Conj { re, .. } => (re, re),
    };
    // The root nearest the origin is absorbed; the other becomes the single
    // zero of the detached configuration.
    let far = if b1.abs() < b2.abs() { b2 } else { b1 };
    vec![far, SEED_EPS * (1.0 + a1), a1]
}

pub(crate) fn seed_twocut_after_gap_open(hard: &SupportConfig, width: f64) -> Vec<f64> {
    let (a1, c) = match *hard {
        SupportConfig::OneCutHard { a1, b: BPair::Conj { re, .. } } => (a1, re),
        SupportConfig::OneCutHard { a1, b: BPair::Real { b1, b2 } } => (a1, 0.5 * (b1 + b2)),
        _ => unreachable!(),
    };
    vec![c - 0.5 * width, c, c + 0.5 * width, a1]
}

// ---------------------------------------------------------------------------
// Cold solve
// ---------------------------------------------------------------------------

fn try_seeds(
    scenario: Scenario,
    seeds: &[Vec<f64>],
    p: &FieldParams,
    spec: &QuadSpec,
) -> Option<SolveReport> {
    for seed in seeds {
        if let Ok(rep) = newton_solve(scenario, seed, p, spec) {
            if rep.flags.valid() {
                return Some(rep);
            }
        }
    }
    None
}

/// Locate a sign change of `f` in mass along a one-cut branch by bisection
/// with Newton re-solves; returns the crossing mass and the solve there.
fn bisect_on_branch<F>(
    scenario: Scenario,
    u_start: Vec<f64>,
    mut t_lo: f64,
    mut t_hi: f64,
    p0: &FieldParams,
    spec: &QuadSpec,
    f: F,
) -> Result<(f64, SolveReport), SolveError>
where
    F: Fn(&SolveReport, &FieldParams) -> Result<f64, SolveError>,
{
    let mut u = u_start;
    let mut last = None;
    for _ in 0..80 {
        let t_mid = 0.5 * (t_lo + t_hi);
        let p = p0.with_mass(t_mid);
        let rep = newton_solve(scenario, &u, &p, spec)?;
        u = rep.unknowns.clone();
        let val = f(&rep, &p)?;
        if val > 0.0 {
            t_lo = t_mid;
        } else {
            t_hi = t_mid;
        }
        last = Some(rep);
        if (t_hi - t_lo) < 1e-11 * (1.0 + t_hi) {
            break;
        }
    }
    Ok((0.5 * (t_lo + t_hi), last.unwrap()))
}

/// Solve the reduced (`v = 1`) problem from scratch, including masses inside
/// a two-cut window, by following the scenario sequence of the region.
fn solve_cold_reduced(p: &FieldParams, spec: &QuadSpec) -> Result<SolveReport, SolveError> {
    let region = classify_region(p.beta, p.gamma);
    let hard_seeds = [seed_hard_small_t(p), seed_hard_large_t(p)];
    let soft_seed = seed_soft_small_t(p);

    let starts_soft = matches!(
        region,
        PhaseRegion::B
            | PhaseRegion::CMinus
            | PhaseRegion::BoundaryTripleRootCurve
            | PhaseRegion::BoundaryPhiZeroCurve
    ) && soft_seed.is_some();

    if starts_soft {
        if let Some(rep) = try_seeds(Scenario::OneCutSoft, &[soft_seed.clone().unwrap()], p, spec)
        {
            return Ok(rep);
        }
    }
    if let Some(rep) = try_seeds(Scenario::OneCutHard, &hard_seeds, p, spec) {
        return Ok(rep);
    }

    // Track the small-mass branch up to the target, switching configuration
    // at the phase boundaries along the way.
    let t_small = (0.01 * p.t).min(0.01);
    let p_small = p.with_mass(t_small);
    if starts_soft {
        let seed = seed_soft_small_t(&p_small).unwrap();
        let rep0 = newton_solve(Scenario::OneCutSoft, &seed, &p_small, spec)?;
        track_soft_branch(rep0, t_small, p, spec)
    } else {
        let rep0 =
            newton_solve(Scenario::OneCutHard, &seed_hard_small_t(&p_small), &p_small, spec)?;
        track_hard_branch(rep0, t_small, p, spec)
    }
}

fn no_valid(p: &FieldParams) -> SolveError {
    SolveError::NoValidScenario { beta: p.beta, gamma: p.gamma, t: p.t }
}

/// Step a branch toward `t_target` with stride backoff; returns the report
/// and the mass actually reached.
fn branch_step(
    scenario: Scenario,
    u: &[f64],
    t_cur: f64,
    t_target: f64,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<(SolveReport, f64), SolveError> {
    let ratio: f64 = 1.25;
    let t_next = if t_target / t_cur < ratio { t_target } else { t_cur * ratio };
    match newton_solve(scenario, u, &p.with_mass(t_next), spec) {
        Ok(r) => Ok((r, t_next)),
        Err(_) => {
            let t_half = t_cur * (t_next / t_cur).sqrt();
            let r = newton_solve(scenario, u, &p.with_mass(t_half), spec)?;
            Ok((r, t_half))
        }
    }
}

/// Follow a detached-cut branch from `t_from` to `p.t`, handling the origin
/// attachment, the birth of a cut at the origin, and the origin triple
/// root.
fn track_soft_branch(
    rep0: SolveReport,
    t_from: f64,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    let mut t_cur = t_from;
    let mut rep = rep0;
    for _ in 0..600 {
        if (t_cur - p.t).abs() <= 1e-12 * p.t {
            return if rep.flags.valid() { Ok(rep) } else { Err(no_valid(p)) };
        }
        let (next, t_reached) =
            branch_step(Scenario::OneCutSoft, &rep.unknowns, t_cur, p.t, p, spec)?;
        if next.flags.valid() {
            rep = next;
            t_cur = t_reached;
            continue;
        }
        let (b1, a2) = (next.unknowns[0], next.unknowns[1]);
        if a2 <= 0.0 && b1 <= 0.0 {
            // Soft edge reached the origin (or the triple root on the
            // critical curve): switch to the hard-edge branch.
            let (t0, at_t0) = bisect_on_branch(
                Scenario::OneCutSoft,
                rep.unknowns.clone(),
                t_cur,
                t_reached,
                p,
                spec,
                |r, _| Ok(r.unknowns[1]),
            )?;
            if p.t <= t0 {
                return Err(no_valid(p));
            }
            let seed = if at_t0.unknowns[0].abs() < 1e-4 {
                seed_hard_after_triple_root(&at_t0.config)
            } else {
                seed_hard_after_origin_attach(&at_t0.config)
            };
            let t_restart = (t0 * 1.0005).min(p.t);
            let rep_h = newton_solve(Scenario::OneCutHard, &seed, &p.with_mass(t_restart), spec)?;
            return track_hard_branch(rep_h, t_restart, p, spec);
        }
        if b1 > 0.0 {
            // Compatibility integral crossed zero: a cut is born at the
            // origin and the two-cut window opens.
            let (t1, at_t1) = bisect_on_branch(
                Scenario::OneCutSoft,
                rep.unknowns.clone(),
                t_cur,
                t_reached,
                p,
                spec,
                |r, pp| {
                    Ok(compat_integral(r.unknowns[0], r.unknowns[1], r.unknowns[2], pp.pole(), spec)?)
                },
            )?;
            if p.t <= t1 {
                return Err(no_valid(p));
            }
            return track_twocut_from_origin_birth(at_t1.config, t1, p, spec);
        }
        return Err(no_valid(p));
    }
    Err(no_valid(p))
}

/// Follow a hard-edge branch upward in mass, handling the birth of a
/// detached cut when the saturation integral crosses zero.
fn track_hard_branch(
    rep0: SolveReport,
    t_from: f64,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    let mut t_cur = t_from;
    let mut rep = rep0;
    for _ in 0..600 {
        if (t_cur - p.t).abs() <= 1e-12 * p.t {
            return if rep.flags.valid() { Ok(rep) } else { Err(no_valid(p)) };
        }
        let (next, t_reached) =
            branch_step(Scenario::OneCutHard, &rep.unknowns, t_cur, p.t, p, spec)?;
        if next.flags.valid() {
            rep = next;
            t_cur = t_reached;
            continue;
        }
        // The saturation integral turned negative: locate the birth mass.
        let (t1, at_t1) = bisect_on_branch(
            Scenario::OneCutHard,
            rep.unknowns.clone(),
            t_cur,
            t_reached,
            p,
            spec,
            |r, pp| match r.config {
                SupportConfig::OneCutHard { a1, b: BPair::Real { b1, .. } } if b1 > a1 => {
                    Ok(quad::saturation_functional(&r.config, pp, spec)?)
                }
                _ => Ok(1.0),
            },
        )?;
        if p.t <= t1 {
            return Err(no_valid(p));
        }
        return track_twocut_from_interior_birth(at_t1.config, t1, p, spec);
    }
    Err(no_valid(p))
}

fn track_twocut_from_origin_birth(
    soft_at_birth: SupportConfig,
    t1: f64,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    // Right after the birth the new hard cut grows linearly in mass; step a
    // short distance past the event before reseeding.
    let mut dt = 1e-5 * (1.0 + t1);
    for _ in 0..12 {
        let seed = seed_twocut_after_origin_birth(&soft_at_birth, SEED_EPS);
        if t1 + dt <= p.t {
            if let Ok(r) = newton_solve(Scenario::TwoCut, &seed, &p.with_mass(t1 + dt), spec) {
                if r.flags.valid() {
                    return advance_twocut(r, t1 + dt, p, spec);
                }
            }
        } else {
            if let Ok(r) = newton_solve(Scenario::TwoCut, &seed, p, spec) {
                if r.flags.valid() {
                    return Ok(r);
                }
            }
        }
        dt *= 2.0;
    }
    Err(no_valid(p))
}

fn track_twocut_from_interior_birth(
    hard_at_birth: SupportConfig,
    t1: f64,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    let mut width = 1e-4 * (1.0 + hard_at_birth.rightmost());
    for _ in 0..12 {
        let seed = seed_twocut_after_interior_birth(&hard_at_birth, width);
        let t_seed = (t1 + width * width).min(p.t);
        if let Ok(r) = newton_solve(Scenario::TwoCut, &seed, &p.with_mass(t_seed), spec) {
            if r.flags.valid() {
                return advance_twocut(r, t_seed, p, spec);
            }
        }
        width *= 2.0;
    }
    Err(no_valid(p))
}

fn advance_twocut(
    rep0: SolveReport,
    t_from: f64,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    let mut rep = rep0;
    let mut t_cur = t_from;
    for _ in 0..800 {
        if (t_cur - p.t).abs() <= 1e-12 * p.t {
            return if rep.flags.valid() { Ok(rep) } else { Err(no_valid(p)) };
        }
        let gap = rep.unknowns[2] - rep.unknowns[0];
        if gap < 1e-7 * (1.0 + rep.unknowns[2].abs()) {
            // The gap has closed: continue on the merged hard-edge branch.
            let seed = seed_hard_after_merge(&rep.config, 1e-5);
            let t_restart = (t_cur * (1.0 + 1e-6)).min(p.t);
            let rep_h = newton_solve(Scenario::OneCutHard, &seed, &p.with_mass(t_restart), spec)?;
            return track_hard_branch(rep_h, t_restart, p, spec);
        }
        let t_next = (t_cur * 1.02).min(p.t);
        match newton_solve(Scenario::TwoCut, &rep.unknowns, &p.with_mass(t_next), spec) {
            Ok(r) if r.flags.valid() => {
                rep = r;
                t_cur = t_next;
            }
            _ => {
                let t_half = t_cur + 0.25 * (t_next - t_cur);
                match newton_solve(Scenario::TwoCut, &rep.unknowns, &p.with_mass(t_half), spec) {
                    Ok(r) if r.flags.valid() => {
                        rep = r;
                        t_cur = t_half;
                    }
                    _ => {
                        let seed = seed_hard_after_merge(&rep.config, 1e-4);
                        let t_restart = (t_cur * (1.0 + 1e-5)).min(p.t);
                        let rep_h = newton_solve(
                            Scenario::OneCutHard,
                            &seed,
                            &p.with_mass(t_restart),
                            spec,
                        )?;
                        return track_hard_branch(rep_h, t_restart, p, spec);
                    }
                }
            }
        }
    }
    Err(no_valid(p))
}

/// Solve for the equilibrium configuration at the given parameters.
///
/// The problem is reduced to unit charge position by scaling, solved there
/// (following the scenario sequence of the `(beta, gamma)` region when
/// direct seeding fails), scaled back, and polished on the original
/// residuals.
pub fn solve_at(
    p: &FieldParams,
    hint: Option<Scenario>,
    spec: &QuadSpec,
) -> Result<SolveReport, SolveError> {
    let (pu, len_scale) = p.to_unit_pole();

    let reduced = if let Some(scn) = hint {
        let direct = match scn {
            Scenario::OneCutHard => try_seeds(
                Scenario::OneCutHard,
                &[seed_hard_small_t(&pu), seed_hard_large_t(&pu)],
                &pu,
                spec,
            ),
            Scenario::OneCutSoft => seed_soft_small_t(&pu)
                .and_then(|s| try_seeds(Scenario::OneCutSoft, &[s], &pu, spec)),
            Scenario::TwoCut => None,
        };
        match direct {
            Some(rep) => rep,
            None => solve_cold_reduced(&pu, spec)?,
        }
    } else {
        solve_cold_reduced(&pu, spec)?
    };

    if len_scale == 1.0 {
        return Ok(reduced);
    }
    let scaled = scale_unknowns(reduced.scenario(), &reduced.unknowns, len_scale);
    newton_solve(reduced.scenario(), &scaled, p, spec)
}

/// Map reduced-problem unknowns to charge position `v` (`x -> v x`).
pub fn scale_unknowns(scenario: Scenario, u: &[f64], len_scale: f64) -> Vec<f64> {
    match scenario {
        Scenario::OneCutHard => {
            vec![u[0] * len_scale, u[1] * len_scale, u[2] * len_scale * len_scale]
        }
        _ => u.iter().map(|x| x * len_scale).collect(),
    }
}

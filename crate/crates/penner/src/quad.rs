//! Singular-endpoint quadrature for the density, period and functional
//! integrals of the half-line problem.
//!
//! Endpoint singularities are removed by substitution instead of adaptive
//! splitting: `x = a1 sin^2(theta)` absorbs the hard-edge weight
//! `sqrt((a1-x)/x)`, `x = m - h cos(theta)` absorbs a soft-edge weight
//! `sqrt((x-a)(b-x))` (and turns the reciprocal weight into plain
//! `d theta`). What remains is smooth and handled by Gauss-Legendre panels,
//! accepted only after a node-doubling check. A geometric panel grading is
//! applied near the origin when the charge sits close to it, where the
//! `1/(x+v)` factor develops a boundary layer.

use crate::model::{density, BPair, FieldParams, SupportConfig};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {estimate}, last correction {delta}")]
    NonConvergence { estimate: f64, delta: f64 },
    #[error("invalid quadrature spec: {0}")]
    BadSpec(String),
    #[error("configuration violates the ordering required by this integral: {0}")]
    BadOrdering(String),
}

/// Panel order, refinement budget and acceptance tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Gauss-Legendre nodes per panel; even, at least 16.
    pub order: usize,
    /// Maximum node doublings before giving up.
    pub refine_limit: u32,
    /// Mixed absolute/relative acceptance tolerance.
    pub tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { order: 64, refine_limit: 8, tol: 1e-11 }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if self.order < 16 || !self.order.is_multiple_of(2) {
            return Err(QuadError::BadSpec(format!("order {} (need even, >= 16)", self.order)));
        }
        if !(self.tol > 0.0) {
            return Err(QuadError::BadSpec(format!("tol {}", self.tol)));
        }
        Ok(())
    }
}

type NodeTable = HashMap<usize, Arc<Vec<(f64, f64)>>>;

fn gl_cache() -> &'static Mutex<NodeTable> {
    static CACHE: OnceLock<Mutex<NodeTable>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> Arc<Vec<(f64, f64)>> {
    if let Some(hit) = gl_cache().lock().unwrap().get(&n) {
        return hit.clone();
    }
    let mut rule = Vec::with_capacity(n);
    for k in 1..=n {
        let mut x = (PI * (k as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    let arc = Arc::new(rule);
    gl_cache().lock().unwrap().insert(n, arc.clone());
    arc
}

fn integrate_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in rule.iter() {
        acc += w * f(mid + half * x);
    }
    acc * half
}

fn integrate_panels<F: Fn(f64) -> f64>(f: &F, pts: &[f64], n: usize) -> f64 {
    pts.windows(2).map(|w| integrate_panel(f, w[0], w[1], n)).sum()
}

/// Integrate a smooth function over the panels `pts`, doubling the node
/// count until two consecutive estimates agree to the spec tolerance.
pub fn integrate_converged<F: Fn(f64) -> f64>(
    f: &F,
    pts: &[f64],
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    spec.validate()?;
    let mut n = spec.order;
    let mut prev = integrate_panels(f, pts, n);
    let mut delta = f64::INFINITY;
    for _ in 0..spec.refine_limit {
        n *= 2;
        let cur = integrate_panels(f, pts, n);
        delta = (cur - prev).abs();
        if delta <= spec.tol * (1.0 + cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(QuadError::NonConvergence { estimate: prev, delta })
}

/// Panel boundaries over `[a, b]` geometrically refined toward `a` with an
/// initial panel of width `layer`.
fn graded_toward_start(a: f64, b: f64, layer: f64) -> Vec<f64> {
    let span = b - a;
    let mut pts = vec![a];
    let mut w = layer.max(span * 1e-13).min(span);
    let mut x = a;
    while x + w < b && pts.len() < 48 {
        x += w;
        pts.push(x);
        w *= 3.0;
    }
    pts.push(b);
    pts
}

fn graded_toward_end(a: f64, b: f64, layer: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = graded_toward_start(0.0, b - a, layer).iter().map(|d| b - d).collect();
    pts.reverse();
    pts
}

/// Panels over a hard-cut angle range `[0, hi]`; graded near `theta = 0`
/// when the pole at `-v` sits close to the origin relative to the cut.
fn hard_cut_panels(a1: f64, v: f64, hi: f64) -> Vec<f64> {
    if a1 <= 0.0 {
        return vec![0.0, hi];
    }
    let layer = (v / a1).sqrt();
    if v < 0.05 && layer < 0.3 {
        graded_toward_start(0.0, hi, layer)
    } else {
        vec![0.0, 0.5 * hi, hi]
    }
}

// ---------------------------------------------------------------------------
// Mass integrals
// ---------------------------------------------------------------------------

/// Smooth part of the density on the hard cut `[0, a1]`, i.e. the factor
/// multiplying `sqrt((a1-x)/x)/pi`.
fn hard_smooth(cfg: &SupportConfig, v: f64, x: f64) -> f64 {
    match *cfg {
        SupportConfig::OneCutHard { b, .. } => {
            let (s, p) = b.sum_product();
            (x * x - s * x + p) / (x + v)
        }
        SupportConfig::TwoCut { b1, a2, a3, .. } => {
            (b1 - x) / (x + v) * ((a2 - x) * (a3 - x)).max(0.0).sqrt()
        }
        SupportConfig::OneCutSoft { .. } => unreachable!("soft configuration has no hard cut"),
    }
}

/// Smooth part of the density on the soft cut, the factor multiplying
/// `sqrt((x-lo)(hi-x))/pi`.
fn soft_smooth(cfg: &SupportConfig, v: f64, x: f64) -> f64 {
    match *cfg {
        SupportConfig::OneCutSoft { b1, .. } => (x - b1) / (x + v),
        SupportConfig::TwoCut { a1, b1, .. } => {
            (x - b1) / (x + v) * ((x - a1) / x).max(0.0).sqrt()
        }
        SupportConfig::OneCutHard { .. } => unreachable!("hard configuration has no soft cut"),
    }
}

/// Mass on the hard cut up to `x_hi <= a1`.
fn hard_cut_mass(
    cfg: &SupportConfig,
    p: &FieldParams,
    a1: f64,
    x_hi: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    if a1 <= 0.0 || x_hi <= 0.0 {
        return Ok(0.0);
    }
    let v = p.pole();
    let theta_hi = (x_hi.min(a1) / a1).sqrt().min(1.0).asin();
    let f = |theta: f64| {
        let sn = theta.sin();
        let cs = theta.cos();
        let x = a1 * sn * sn;
        2.0 * a1 / PI * hard_smooth(cfg, v, x) * cs * cs
    };
    integrate_converged(&f, &hard_cut_panels(a1, v, theta_hi), spec)
}

/// Mass on the soft cut `[lo, hi]` up to `x_hi`.
fn soft_cut_mass(
    cfg: &SupportConfig,
    p: &FieldParams,
    lo: f64,
    hi: f64,
    x_hi: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    if x_hi <= lo || hi <= lo {
        return Ok(0.0);
    }
    let v = p.pole();
    let m = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let theta_hi = ((m - x_hi.min(hi)) / h).clamp(-1.0, 1.0).acos();
    let f = |theta: f64| {
        let x = soft_x(lo, h, theta);
        let sn = theta.sin();
        h * h / PI * soft_smooth(cfg, v, x) * sn * sn
    };
    integrate_converged(&f, &[0.0, 0.5 * theta_hi, theta_hi], spec)
}

/// Total mass `int nu'` of a configuration.
pub fn mass_integral(
    cfg: &SupportConfig,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    partial_mass(cfg, p, f64::INFINITY, spec)
}

/// Mass of the configuration on `(-inf, x0]`.
pub fn partial_mass(
    cfg: &SupportConfig,
    p: &FieldParams,
    x0: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    match *cfg {
        SupportConfig::OneCutHard { a1, .. } => hard_cut_mass(cfg, p, a1, x0.min(a1), spec),
        SupportConfig::OneCutSoft { a2, a3, .. } => soft_cut_mass(cfg, p, a2, a3, x0, spec),
        SupportConfig::TwoCut { a1, a2, a3, .. } => {
            let left = hard_cut_mass(cfg, p, a1, x0.min(a1), spec)?;
            let right = soft_cut_mass(cfg, p, a2, a3, x0, spec)?;
            Ok(left + right)
        }
    }
}

// ---------------------------------------------------------------------------
// Gap integrals
// ---------------------------------------------------------------------------

fn gap_geometry(a1: f64, a2: f64) -> (f64, f64) {
    (0.5 * (a1 + a2), 0.5 * (a2 - a1))
}

/// `x(theta) = lo - h + 2h sin^2(theta/2) + h = lo + 2h sin^2(theta/2)`:
/// the `m - h cos(theta)` parametrization evaluated without cancellation
/// at the left endpoint.
fn soft_x(lo: f64, h: f64, theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    lo + 2.0 * h * s * s
}

fn gap_panels(a1: f64, a2: f64) -> Vec<f64> {
    // Boundary layer at theta = 0 when the gap starts near the origin and
    // the 1/sqrt(x) factor varies fast there.
    let h = 0.5 * (a2 - a1);
    if a1 >= 0.0 && h > 0.0 && a1 < 0.05 * h {
        graded_toward_start(0.0, PI, (a1.max(1e-300) / h).sqrt())
    } else {
        vec![0.0, 0.5 * PI, PI]
    }
}

/// Two-cut equilibrium (gap) integral
/// `int_{a1}^{a2} (x-b1)/(x+v) sqrt((x-a1)(a2-x)(a3-x)/x) dx`;
/// zero exactly at the two-cut equilibrium.
pub fn gap_integral(
    a1: f64,
    b1: f64,
    a2: f64,
    a3: f64,
    v: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let (_, h) = gap_geometry(a1, a2);
    let f = |theta: f64| {
        let x = soft_x(a1, h, theta);
        let sn = theta.sin();
        h * h * (x - b1) / (x + v) * ((a3 - x) / x).max(0.0).sqrt() * sn * sn
    };
    integrate_converged(&f, &gap_panels(a1, a2), spec)
}

/// Same integrand with `|x - b1|` replaced by 1: the magnitude scale used
/// to normalize the gap residual.
pub fn gap_integral_scale(
    a1: f64,
    a2: f64,
    a3: f64,
    v: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let (_, h) = gap_geometry(a1, a2);
    let f = |theta: f64| {
        let x = soft_x(a1, h, theta);
        let sn = theta.sin();
        h * h / (x + v) * ((a3 - x) / x).max(0.0).sqrt() * sn * sn
    };
    integrate_converged(&f, &gap_panels(a1, a2), spec)
}

/// Gap condition of a two-cut configuration (ordering-checked front end of
/// [`gap_integral`]).
pub fn gap_condition(
    cfg: &SupportConfig,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    match *cfg {
        SupportConfig::TwoCut { a1, b1, a2, a3 } => {
            if !(0.0 < a1 && a1 < b1 && b1 < a2 && a2 < a3) {
                return Err(QuadError::BadOrdering(format!(
                    "need 0 < a1 < b1 < a2 < a3, got ({a1}, {b1}, {a2}, {a3})"
                )));
            }
            gap_integral(a1, b1, a2, a3, p.pole(), spec)
        }
        _ => Err(QuadError::BadOrdering("gap condition needs a two-cut configuration".into())),
    }
}

/// The interior zero `b1` of a two-cut density as the gap-weighted ratio
/// `int x w / int w` with `w = sqrt((x-a1)(a2-x)(a3-x)/x)/(x+v)`.
pub fn b1_from_gap(
    a1: f64,
    a2: f64,
    a3: f64,
    v: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    if !(0.0 < a1 && a1 < a2 && a2 < a3 && v > 0.0) {
        return Err(QuadError::BadOrdering(format!(
            "need 0 < a1 < a2 < a3 and v > 0, got ({a1}, {a2}, {a3}; v={v})"
        )));
    }
    let (_, h) = gap_geometry(a1, a2);
    let w = |theta: f64| {
        let x = soft_x(a1, h, theta);
        let sn = theta.sin();
        h * h / (x + v) * ((a3 - x) / x).max(0.0).sqrt() * sn * sn
    };
    let panels = gap_panels(a1, a2);
    let num = integrate_converged(&|th: f64| soft_x(a1, h, th) * w(th), &panels, spec)?;
    let den = integrate_converged(&w, &panels, spec)?;
    Ok(num / den)
}

/// Zero of the two-cut mass-flow numerator: the point `xi in (a1, a2)` with
/// `int_{a1}^{a2} (x - xi) / sqrt(x(x-a1)(a2-x)(a3-x)) dx = 0`.
pub fn xi_robin(a1: f64, a2: f64, a3: f64, spec: &QuadSpec) -> Result<f64, QuadError> {
    if !(0.0 < a1 && a1 < a2 && a2 < a3) {
        return Err(QuadError::BadOrdering(format!(
            "need 0 < a1 < a2 < a3, got ({a1}, {a2}, {a3})"
        )));
    }
    let (_, h) = gap_geometry(a1, a2);
    let w = |theta: f64| {
        let x = soft_x(a1, h, theta);
        1.0 / (x * (a3 - x)).max(f64::MIN_POSITIVE).sqrt()
    };
    let panels = gap_panels(a1, a2);
    let num = integrate_converged(&|th: f64| soft_x(a1, h, th) * w(th), &panels, spec)?;
    let den = integrate_converged(&w, &panels, spec)?;
    Ok(num / den)
}

/// Moments `M_j = int_{a1}^{a2} (x+v)^{j-2} / sqrt(x(x-a1)(a2-x)(a3-x)) dx`
/// for `j = 0, 1, 2`, used to place the zeros of the charge-flow numerator.
pub fn gap_pole_moments(
    a1: f64,
    a2: f64,
    a3: f64,
    v: f64,
    spec: &QuadSpec,
) -> Result<[f64; 3], QuadError> {
    if !(0.0 < a1 && a1 < a2 && a2 < a3 && v > 0.0) {
        return Err(QuadError::BadOrdering(format!(
            "need 0 < a1 < a2 < a3 and v > 0, got ({a1}, {a2}, {a3}; v={v})"
        )));
    }
    let (_, h) = gap_geometry(a1, a2);
    let panels = gap_panels(a1, a2);
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let f = |theta: f64| {
            let x = soft_x(a1, h, theta);
            (x + v).powi(j as i32 - 2) / (x * (a3 - x)).max(f64::MIN_POSITIVE).sqrt()
        };
        *slot = integrate_converged(&f, &panels, spec)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Phase-validity functionals
// ---------------------------------------------------------------------------

/// `int_{a1}^{b2} (x-b1)(x-b2)/(x+v) sqrt((x-a1)/x) dx` for a hard-edge
/// configuration with a real pair above the cut (`a1 < b1 < b2`). Positive
/// while the one-cut phase is valid, zero at the birth of a detached cut.
pub fn saturation_functional(
    cfg: &SupportConfig,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let (a1, b1, b2) = match *cfg {
        SupportConfig::OneCutHard { a1, b: BPair::Real { b1, b2 } } if a1 < b1 && b1 < b2 => {
            (a1, b1, b2)
        }
        _ => {
            return Err(QuadError::BadOrdering(
                "saturation functional needs a hard cut with a real pair above it".into(),
            ))
        }
    };
    let v = p.pole();
    let span = b2 - a1;
    let f = |theta: f64| {
        let sn = theta.sin();
        let cs = theta.cos();
        let x = a1 + span * sn * sn;
        2.0 * span.powi(2) * span.sqrt() * (x - b1) * (x - b2) / ((x + v) * x.sqrt())
            * sn
            * sn
            * cs
    };
    let panels = if a1 < 0.05 * span {
        graded_toward_start(0.0, 0.5 * PI, (a1.max(1e-300) / span).sqrt())
    } else {
        vec![0.0, 0.25 * PI, 0.5 * PI]
    };
    integrate_converged(&f, &panels, spec)
}

/// `int_0^{a2} (x-b1)/(x+v) sqrt((a2-x)(a3-x)) dx` for a detached cut with
/// `0 < b1 < a2`. Positive while the phase is valid, zero at the birth of a
/// cut at the origin.
pub fn compat_functional(
    cfg: &SupportConfig,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let (b1, a2, a3) = match *cfg {
        SupportConfig::OneCutSoft { b1, a2, a3 } if b1 < a2 && a2 < a3 => (b1, a2, a3),
        _ => {
            return Err(QuadError::BadOrdering(
                "compatibility functional needs a detached cut with b1 < a2".into(),
            ))
        }
    };
    compat_integral(b1, a2, a3, p.pole(), spec)
}

pub(crate) fn compat_integral(
    b1: f64,
    a2: f64,
    a3: f64,
    v: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    // x = a2 cos^2(theta) resolves the sqrt(a2 - x) endpoint factor.
    let f = |theta: f64| {
        let sn = theta.sin();
        let cs = theta.cos();
        let x = a2 * cs * cs;
        2.0 * a2 * a2.sqrt() * (x - b1) / (x + v) * (a3 - x).max(0.0).sqrt() * sn * sn * cs
    };
    let panels = if v < 0.05 * a2 {
        // The integrand varies fastest where x ~ v, i.e. theta near pi/2.
        graded_toward_end(0.0, 0.5 * PI, (v / a2).sqrt())
    } else {
        vec![0.0, 0.25 * PI, 0.5 * PI]
    };
    integrate_converged(&f, &panels, spec)
}

// ---------------------------------------------------------------------------
// Effective potential
// ---------------------------------------------------------------------------

/// One cut expressed as a pulled-back angular density: `x(theta)` with
/// measure weight `w(theta) d theta` equal to `nu'(x) dx`.
struct AngularCut {
    hi: f64,
    x_of: Box<dyn Fn(f64) -> f64>,
    w_of: Box<dyn Fn(f64) -> f64>,
    theta_of: Box<dyn Fn(f64) -> f64>,
}

fn angular_cuts(cfg: &SupportConfig, p: &FieldParams) -> Vec<AngularCut> {
    let v = p.pole();
    let mut cuts = Vec::new();
    let cfg = *cfg;
    match cfg {
        SupportConfig::OneCutHard { a1, .. } | SupportConfig::TwoCut { a1, .. } => {
            if a1 > 0.0 {
                cuts.push(AngularCut {
                    hi: 0.5 * PI,
                    x_of: Box::new(move |th| a1 * th.sin().powi(2)),
                    w_of: Box::new(move |th| {
                        let x = a1 * th.sin().powi(2);
                        2.0 * a1 / PI * hard_smooth(&cfg, v, x) * th.cos().powi(2)
                    }),
                    theta_of: Box::new(move |x| (x / a1).clamp(0.0, 1.0).sqrt().asin()),
                });
            }
        }
        SupportConfig::OneCutSoft { .. } => {}
    }
    let soft = match cfg {
        SupportConfig::OneCutSoft { a2, a3, .. } => Some((a2, a3)),
        SupportConfig::TwoCut { a2, a3, .. } => Some((a2, a3)),
        SupportConfig::OneCutHard { .. } => None,
    };
    if let Some((lo, hi)) = soft {
        let m = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        cuts.push(AngularCut {
            hi: PI,
            x_of: Box::new(move |th| soft_x(lo, h, th)),
            w_of: Box::new(move |th| {
                let x = soft_x(lo, h, th);
                h * h / PI * soft_smooth(&cfg, v, x) * th.sin().powi(2)
            }),
            theta_of: Box::new(move |x| ((m - x) / h).clamp(-1.0, 1.0).acos()),
        });
    }
    cuts
}

/// Logarithmic potential `V(x0) = -int log|x0 - s| d nu(s)` of the
/// configuration's density.
pub fn log_potential(
    cfg: &SupportConfig,
    p: &FieldParams,
    x0: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let mut acc = 0.0;
    for cut in angular_cuts(cfg, p) {
        let f = |theta: f64| {
            let d = (x0 - (cut.x_of)(theta)).abs().max(1e-300);
            -(cut.w_of)(theta) * d.ln()
        };
        let lo_x = (cut.x_of)(0.0);
        let hi_x = (cut.x_of)(cut.hi);
        let inside = x0 >= lo_x.min(hi_x) && x0 <= lo_x.max(hi_x);
        let pts = if inside {
            let th0 = (cut.theta_of)(x0);
            let mut pts = graded_toward_end(0.0, th0, 1e-12);
            pts.extend(graded_toward_start(th0, cut.hi, 1e-12).into_iter().skip(1));
            pts
        } else {
            // Still grade toward the nearest endpoint for x0 just outside.
            let d_lo = (x0 - lo_x).abs();
            let d_hi = (x0 - hi_x).abs();
            if d_lo < d_hi {
                graded_toward_start(0.0, cut.hi, 1e-10)
            } else {
                graded_toward_end(0.0, cut.hi, 1e-10)
            }
        };
        acc += integrate_converged(&f, &pts, spec)?;
    }
    Ok(acc)
}

/// Effective potential `W(x) = phi(x) + V(x)` normalized so that the value
/// at the leftmost support point is zero. Constant (zero) on the support of
/// an equilibrium configuration, positive off it.
pub fn potential_w(
    cfg: &SupportConfig,
    p: &FieldParams,
    x: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let x_ref = cfg.leftmost();
    let w_ref = p.field(x_ref) + log_potential(cfg, p, x_ref, spec)?;
    Ok(p.field(x) + log_potential(cfg, p, x, spec)? - w_ref)
}

/// Interior sample points of the support, proportionally allocated across
/// cuts, avoiding the endpoints.
pub fn support_samples(cfg: &SupportConfig, n: usize) -> Vec<f64> {
    let ivs = cfg.support();
    let total: f64 = ivs.iter().map(|iv| iv[1] - iv[0]).sum();
    let mut out = Vec::with_capacity(n);
    for iv in &ivs {
        let len = iv[1] - iv[0];
        let k = ((n as f64 * len / total).round() as usize).max(2);
        for j in 0..k {
            let frac = (j as f64 + 0.5) / k as f64;
            out.push(iv[0] + frac * len);
        }
    }
    out
}

/// Spread `max W - min W` over interior support samples; small for a valid
/// equilibrium configuration.
pub fn w_spread_on_support(
    cfg: &SupportConfig,
    p: &FieldParams,
    samples: usize,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for x in support_samples(cfg, samples) {
        let w = potential_w(cfg, p, x, spec)?;
        min = min.min(w);
        max = max.max(w);
    }
    Ok(max - min)
}

/// Smallest signed density over interior support samples.
pub fn min_density(cfg: &SupportConfig, p: &FieldParams, samples: usize) -> f64 {
    support_samples(cfg, samples)
        .into_iter()
        .map(|x| density(cfg, p, x))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BPair, FieldParams, SupportConfig};

    fn spec() -> QuadSpec {
        QuadSpec::default()
    }

    fn remark_soft_cfg() -> (SupportConfig, FieldParams) {
        let s7 = 7f64.sqrt();
        (
            SupportConfig::OneCutSoft { b1: 0.0, a2: 3.0 - s7, a3: 3.0 + s7 },
            FieldParams::new(-4.0, 3.0, 2.5).unwrap(),
        )
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(16);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        let w_sum: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((w_sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn soft_cut_mass_matches_closed_form() {
        // (1/pi) int x/(x+1) sqrt((x-a2)(a3-x)) dx over [3-s7, 3+s7]
        // equals h^2/2 - ((m+1) - sqrt((m+1)^2 - h^2)) = 3.5 - 1 = 2.5.
        let (cfg, p) = remark_soft_cfg();
        let m = mass_integral(&cfg, &p, &spec()).unwrap();
        assert!((m - 2.5).abs() < 1e-10, "mass = {m}");
    }

    #[test]
    fn hard_cut_mass_matches_closed_form() {
        // g = (x^2+1)/(x+1): mass = a^2/8 - a/2 + 2 (sqrt(1+a) - 1) at a = 4.
        let cfg = SupportConfig::OneCutHard { a1: 4.0, b: BPair::Conj { re: 0.0, im: 1.0 } };
        let p = FieldParams::new(0.0, 1.0, 1.0).unwrap();
        let m = mass_integral(&cfg, &p, &spec()).unwrap();
        let expect = 2.0 * (5f64.sqrt() - 1.0);
        assert!((m - expect).abs() < 1e-10, "mass = {m}, expect {expect}");
    }

    #[test]
    fn zero_length_hard_cut_has_zero_mass() {
        let cfg = SupportConfig::OneCutHard { a1: 0.0, b: BPair::Real { b1: -0.5, b2: -2.0 } };
        let p = FieldParams::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(mass_integral(&cfg, &p, &spec()).unwrap(), 0.0);
    }

    #[test]
    fn partial_mass_is_monotone_and_exhaustive() {
        let (cfg, p) = remark_soft_cfg();
        let total = mass_integral(&cfg, &p, &spec()).unwrap();
        let mut prev = 0.0;
        for k in 1..=8 {
            let x = 0.3 + k as f64 * 0.7;
            let m = partial_mass(&cfg, &p, x, &spec()).unwrap();
            assert!(m >= prev - 1e-12);
            prev = m;
        }
        let all = partial_mass(&cfg, &p, 10.0, &spec()).unwrap();
        assert!((all - total).abs() < 1e-12);
    }

    #[test]
    fn gap_condition_moves_against_b1() {
        // For any fixed gap geometry the integral is strictly decreasing in
        // b1, so perturbing b1 away from the equilibrium value flips sign.
        let sp = spec();
        let b = b1_from_gap(1.0, 4.0, 9.0, 1.0, &sp).unwrap();
        assert!(b > 1.0 && b < 4.0);
        let at = |bb: f64| gap_integral(1.0, bb, 4.0, 9.0, 1.0, &sp).unwrap();
        assert!(at(b).abs() < 1e-9);
        assert!(at(b + 0.1) < -1e-6);
        assert!(at(b - 0.1) > 1e-6);
    }

    #[test]
    fn xi_robin_symmetric_smoke() {
        // With the x and (a3 - x) factors suppressed the weight is symmetric
        // on (1, 2) and the balance point is the midpoint.
        let sp = spec();
        let (m, h) = (1.5, 0.5);
        let w = |_th: f64| 1.0;
        let num = integrate_converged(&|th: f64| (m - h * th.cos()) * w(th), &[0.0, PI], &sp)
            .unwrap();
        let den = integrate_converged(&w, &[0.0, PI], &sp).unwrap();
        assert!((num / den - 1.5).abs() < 1e-12);
    }

    #[test]
    fn xi_robin_stays_in_gap_and_converges() {
        let lo = QuadSpec { order: 16, ..spec() };
        let hi = QuadSpec { order: 64, ..spec() };
        let a = xi_robin(1.0, 4.0, 9.0, &lo).unwrap();
        let b = xi_robin(1.0, 4.0, 9.0, &hi).unwrap();
        assert!(a > 1.0 && a < 4.0);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn xi_robin_rejects_bad_ordering() {
        assert!(matches!(xi_robin(4.0, 1.0, 9.0, &spec()), Err(QuadError::BadOrdering(_))));
    }

    #[test]
    fn pole_moments_are_positive_and_ordered() {
        let [m0, m1, m2] = gap_pole_moments(1.0, 4.0, 9.0, 1.0, &spec()).unwrap();
        assert!(m0 > 0.0 && m1 > 0.0 && m2 > 0.0);
        // (x+v) >= 2 on the gap, so each extra power grows the moment.
        assert!(m1 > m0 && m2 > m1);
    }

    #[test]
    fn compat_positive_at_reference_configuration() {
        let (cfg, p) = remark_soft_cfg();
        // b1 = 0 sits at the scenario boundary; the integral is positive.
        let val = compat_integral(0.0, 3.0 - 7f64.sqrt(), 3.0 + 7f64.sqrt(), p.pole(), &spec())
            .unwrap();
        assert!(val > 0.0);
        let _ = cfg;
    }

    #[test]
    fn potential_is_flat_on_support_and_higher_off_it() {
        let (cfg, p) = remark_soft_cfg();
        let sp = spec();
        let spread = w_spread_on_support(&cfg, &p, 24, &sp).unwrap();
        assert!(spread < 1e-8, "spread = {spread}");
        // Off support (left of a2) the potential exceeds the support value.
        let off = potential_w(&cfg, &p, 0.1, &sp).unwrap();
        assert!(off > 1e-4, "off-support W = {off}");
        let beyond = potential_w(&cfg, &p, 7.0, &sp).unwrap();
        let further = potential_w(&cfg, &p, 8.0, &sp).unwrap();
        assert!(beyond > 0.0 && further > beyond);
    }

    #[test]
    fn density_samples_nonnegative_for_valid_configuration() {
        let (cfg, p) = remark_soft_cfg();
        assert!(min_density(&cfg, &p, 256) >= -1e-12);
    }

    #[test]
    fn limit_part_masses_match_quadrature() {
        use crate::model::{limit_measure_v0, AcPart};
        let sp = spec();
        for (beta, gamma, t) in [(-3.0, 1.0, 3.0), (0.0, 1.0, 3.0), (-1.0, 0.5, 4.0)] {
            let p = FieldParams::new(beta, gamma, t).unwrap();
            let m = limit_measure_v0(&p).unwrap();
            let ac = m.ac.unwrap();
            let numeric = match ac {
                AcPart::SoftEdge { a2, a3 } => {
                    let (mid, h) = (0.5 * (a2 + a3), 0.5 * (a3 - a2));
                    integrate_converged(
                        &|th: f64| h * h / PI * th.sin().powi(2),
                        &[0.0, PI],
                        &sp,
                    )
                    .unwrap()
                    .max(0.0)
                        + 0.0 * mid
                }
                AcPart::HardEdge { a1, b2 } => integrate_converged(
                    &|th: f64| {
                        let sn = th.sin();
                        let x = a1 * sn * sn;
                        2.0 * a1 / PI * (x - b2) * th.cos().powi(2)
                    },
                    &[0.0, 0.5 * PI],
                    &sp,
                )
                .unwrap(),
            };
            assert!(
                (numeric - ac.mass()).abs() < 1e-9 * (1.0 + ac.mass()),
                "({beta},{gamma},{t}): quadrature {numeric} vs closed form {}",
                ac.mass()
            );
            assert!((m.atom_mass + numeric - t).abs() < 1e-9 * (1.0 + t));
        }
    }
}

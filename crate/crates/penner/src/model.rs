//! Domain types for the equilibrium problem on `[0, +inf)` in the external
//! field `phi(x) = x^2/2 + beta*x + gamma*log(x + v)`.
//!
//! The default charge position is `v = 1` (the reduced field). A measure of
//! mass `t` in this field has a density of one of three shapes:
//!
//! * hard-edge one-cut on `[0, a1]`:
//!   `nu'(x) = (x-b1)(x-b2)/(pi (x+v)) * sqrt((a1-x)/x)`,
//! * soft-edge one-cut on `[a2, a3]`:
//!   `nu'(x) = (x-b1)/(pi (x+v)) * sqrt((x-a2)(a3-x))`,
//! * two-cut on `[0, a1] U [a2, a3]`:
//!   `nu'(x) = |x-b1|/(pi (x+v)) * sqrt(|(x-a1)(x-a2)(a3-x)|/x)`.
//!
//! This module holds the parameter/support types, the `(beta, gamma)` phase
//! plane classification, scaling maps, and the closed-form `v -> 0` limits.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("gamma must be nonzero")]
    GammaZero,
    #[error("total mass t must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("charge position v must be positive, got {0}")]
    NonPositiveCharge(f64),
    #[error("transition loci require beta < -1, got {0}")]
    BetaNotBelowMinusOne(f64),
    #[error("no admissible negative root of the edge quartic at beta={beta}, gamma={gamma}, t={t}")]
    NoAdmissibleRoot { beta: f64, gamma: f64, t: f64 },
    #[error("the detached-support limit requires gamma < 0, got {0}")]
    GammaNotNegative(f64),
    #[error("the pinned-origin limit requires gamma > 0, got {0}")]
    GammaNotPositive(f64),
}

/// External-field and mass parameters.
///
/// `v` is the position of the logarithmic charge (the pole of `phi'` sits at
/// `-v`); `None` means the reduced field with `v = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    pub beta: f64,
    pub gamma: f64,
    pub t: f64,
    pub v: Option<f64>,
}

impl FieldParams {
    pub fn new(beta: f64, gamma: f64, t: f64) -> Result<Self, ModelError> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(ModelError::GammaZero);
        }
        if !(t > 0.0) {
            return Err(ModelError::NonPositiveMass(t));
        }
        Ok(FieldParams { beta, gamma, t, v: None })
    }

    pub fn with_charge_at(beta: f64, gamma: f64, t: f64, v: f64) -> Result<Self, ModelError> {
        if !(v > 0.0) {
            return Err(ModelError::NonPositiveCharge(v));
        }
        let mut p = Self::new(beta, gamma, t)?;
        p.v = Some(v);
        Ok(p)
    }

    pub fn with_mass(&self, t: f64) -> Self {
        FieldParams { t, ..*self }
    }

    pub fn with_pole(&self, v: f64) -> Self {
        FieldParams { v: Some(v), ..*self }
    }

    /// Charge position (1 for the reduced field).
    pub fn pole(&self) -> f64 {
        self.v.unwrap_or(1.0)
    }

    /// `phi(x) = x^2/2 + beta x + gamma log(x+v)`.
    pub fn field(&self, x: f64) -> f64 {
        0.5 * x * x + self.beta * x + self.gamma * (x + self.pole()).ln()
    }

    /// `phi'(x) = x + beta + gamma/(x+v)`.
    pub fn field_deriv(&self, x: f64) -> f64 {
        x + self.beta + self.gamma / (x + self.pole())
    }

    pub fn field_deriv2(&self, x: f64) -> f64 {
        let u = x + self.pole();
        1.0 - self.gamma / (u * u)
    }

    /// Equivalent parameters with the charge moved to `-1` (`x -> v*x`
    /// scaling). Returns the reduced parameters and the length scale `v`:
    /// roots of the reduced problem times `v` are roots of this one.
    pub fn to_unit_pole(&self) -> (FieldParams, f64) {
        let v = self.pole();
        (
            FieldParams {
                beta: self.beta / v,
                gamma: self.gamma / (v * v),
                t: self.t / (v * v),
                v: None,
            },
            v,
        )
    }
}

/// Map the symmetric real-line problem `x^4/4 + b x^2 + c log(x^2+v)` of
/// total mass `t_real` to the reduced half-line parameters.
pub fn rescale(b: f64, c: f64, v: f64, t_real: f64) -> Result<FieldParams, ModelError> {
    if !(v > 0.0) {
        return Err(ModelError::NonPositiveCharge(v));
    }
    FieldParams::new(2.0 * b / v, 2.0 * c / (v * v), t_real / (v * v))
}

/// Inverse of [`rescale`]: recover `(b, c, t_real)` for a given charge
/// position `v`.
pub fn unrescale(p: &FieldParams, v: f64) -> Result<(f64, f64, f64), ModelError> {
    if !(v > 0.0) {
        return Err(ModelError::NonPositiveCharge(v));
    }
    Ok((p.beta * v / 2.0, p.gamma * v * v / 2.0, p.t * v * v))
}

/// The two non-support zeros of a hard-edge density: either a real pair
/// (with `b1` the root closer to `[0, a1]`) or a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BPair {
    Real { b1: f64, b2: f64 },
    Conj { re: f64, im: f64 },
}

impl BPair {
    /// Build from the symmetric functions `s = b1+b2`, `p = b1*b2`.
    pub fn from_sum_product(s: f64, p: f64) -> Self {
        let disc = s * s - 4.0 * p;
        if disc >= 0.0 {
            let r = disc.sqrt();
            let lo = 0.5 * (s - r);
            let hi = 0.5 * (s + r);
            // b1 is the root closer to [0, a1]: the larger one when both are
            // at or below the origin, the smaller one when both lie above.
            if hi <= 0.0 || lo < 0.0 {
                BPair::Real { b1: hi, b2: lo }
            } else {
                BPair::Real { b1: lo, b2: hi }
            }
        } else {
            BPair::Conj { re: 0.5 * s, im: 0.5 * (-disc).sqrt() }
        }
    }

    pub fn sum_product(&self) -> (f64, f64) {
        match *self {
            BPair::Real { b1, b2 } => (b1 + b2, b1 * b2),
            BPair::Conj { re, im } => (2.0 * re, re * re + im * im),
        }
    }

    pub fn roots(&self) -> (Complex64, Complex64) {
        match *self {
            BPair::Real { b1, b2 } => (Complex64::new(b1, 0.0), Complex64::new(b2, 0.0)),
            BPair::Conj { re, im } => (Complex64::new(re, im), Complex64::new(re, -im)),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, BPair::Real { .. })
    }
}

/// Scenario tag for a support configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    OneCutHard,
    OneCutSoft,
    TwoCut,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::OneCutHard => "one-cut-hard",
            Scenario::OneCutSoft => "one-cut-soft",
            Scenario::TwoCut => "two-cut",
        }
    }
}

/// Support of the measure together with the remaining zeros of its density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportConfig {
    /// `S = [0, a1]`, origin a hard edge.
    OneCutHard { a1: f64, b: BPair },
    /// `S = [a2, a3]` with `0 < a2`; `b1 < a2`.
    OneCutSoft { b1: f64, a2: f64, a3: f64 },
    /// `S = [0, a1] U [a2, a3]` with `0 < a1 < b1 < a2 < a3`.
    TwoCut { a1: f64, b1: f64, a2: f64, a3: f64 },
}

impl SupportConfig {
    pub fn scenario(&self) -> Scenario {
        match self {
            SupportConfig::OneCutHard { .. } => Scenario::OneCutHard,
            SupportConfig::OneCutSoft { .. } => Scenario::OneCutSoft,
            SupportConfig::TwoCut { .. } => Scenario::TwoCut,
        }
    }

    /// Support intervals, left to right.
    pub fn support(&self) -> Vec<[f64; 2]> {
        match *self {
            SupportConfig::OneCutHard { a1, .. } => vec![[0.0, a1]],
            SupportConfig::OneCutSoft { a2, a3, .. } => vec![[a2, a3]],
            SupportConfig::TwoCut { a1, a2, a3, .. } => vec![[0.0, a1], [a2, a3]],
        }
    }

    pub fn rightmost(&self) -> f64 {
        match *self {
            SupportConfig::OneCutHard { a1, .. } => a1,
            SupportConfig::OneCutSoft { a3, .. } => a3,
            SupportConfig::TwoCut { a3, .. } => a3,
        }
    }

    pub fn leftmost(&self) -> f64 {
        match *self {
            SupportConfig::OneCutHard { .. } | SupportConfig::TwoCut { .. } => 0.0,
            SupportConfig::OneCutSoft { a2, .. } => a2,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.support().iter().any(|iv| x >= iv[0] && x <= iv[1])
    }
}

/// Density `nu'(x)` of the configuration at `x` (zero off the support).
///
/// The signed closed forms are used, so an invalid configuration (a `b` root
/// inside the support, say) shows up as a negative value.
pub fn density(cfg: &SupportConfig, p: &FieldParams, x: f64) -> f64 {
    use std::f64::consts::PI;
    let v = p.pole();
    if !cfg.contains(x) {
        return 0.0;
    }
    match *cfg {
        SupportConfig::OneCutHard { a1, b } => {
            let (s, pr) = b.sum_product();
            let q = x * x - s * x + pr;
            if x <= 0.0 || x >= a1 {
                if x == 0.0 { f64::INFINITY } else { 0.0 }
            } else {
                q / (PI * (x + v)) * ((a1 - x) / x).sqrt()
            }
        }
        SupportConfig::OneCutSoft { b1, a2, a3 } => {
            if x <= a2 || x >= a3 {
                0.0
            } else {
                (x - b1) / (PI * (x + v)) * ((x - a2) * (a3 - x)).sqrt()
            }
        }
        SupportConfig::TwoCut { a1, b1, a2, a3 } => {
            if x > 0.0 && x < a1 {
                (b1 - x) / (PI * (x + v)) * ((a1 - x) * (a2 - x) * (a3 - x) / x).sqrt()
            } else if x > a2 && x < a3 {
                (x - b1) / (PI * (x + v)) * ((x - a1) * (x - a2) * (a3 - x) / x).sqrt()
            } else if x == 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        }
    }
}

/// Critical points `y_- <= y_+` of the reduced field: roots of
/// `(y + beta)(y + 1) + gamma`. Conjugate pair when
/// `gamma > ((beta-1)/2)^2`.
pub fn critical_points(beta: f64, gamma: f64) -> (Complex64, Complex64) {
    let center = -(beta + 1.0) / 2.0;
    let rad2 = (beta - 1.0) * (beta - 1.0) / 4.0 - gamma;
    if rad2 >= 0.0 {
        let r = rad2.sqrt();
        (Complex64::new(center - r, 0.0), Complex64::new(center + r, 0.0))
    } else {
        let r = (-rad2).sqrt();
        (Complex64::new(center, -r), Complex64::new(center, r))
    }
}

/// `phi(y_+)` for real `y_+`, via `2 phi(y_+) = (beta-1) y_+ +
/// 2 gamma log(y_+ + 1) - beta - gamma` (valid at critical points).
pub fn phi_at_upper_critical(beta: f64, gamma: f64) -> Option<f64> {
    let (_, yp) = critical_points(beta, gamma);
    if yp.im != 0.0 || yp.re <= -1.0 {
        return None;
    }
    Some(0.5 * ((beta - 1.0) * yp.re + 2.0 * gamma * (yp.re + 1.0).ln() - beta - gamma))
}

/// Phase-plane region of `(beta, gamma)`. Boundary tags are returned only
/// within `1e-12` (mixed abs/rel) of the defining curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRegion {
    A,
    B,
    CPlus,
    CMinus,
    BoundaryBisector,
    BoundaryTripleRootCurve,
    BoundaryTypeIiiCurve,
    BoundaryPhiZeroCurve,
}

impl PhaseRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseRegion::A => "A",
            PhaseRegion::B => "B",
            PhaseRegion::CPlus => "C+",
            PhaseRegion::CMinus => "C-",
            PhaseRegion::BoundaryBisector => "boundary:bisector",
            PhaseRegion::BoundaryTripleRootCurve => "boundary:triple-root",
            PhaseRegion::BoundaryTypeIiiCurve => "boundary:type-iii",
            PhaseRegion::BoundaryPhiZeroCurve => "boundary:phi-zero",
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(
            self,
            PhaseRegion::BoundaryBisector
                | PhaseRegion::BoundaryTripleRootCurve
                | PhaseRegion::BoundaryTypeIiiCurve
                | PhaseRegion::BoundaryPhiZeroCurve
        )
    }
}

const REGION_TOL: f64 = 1e-12;

/// Classify `(beta, gamma)`.
///
/// For `beta >= -1` the bisector `gamma = -beta` separates A (above) from B
/// (below). For `beta < -1` the curves `gamma = sqrt(-1-2 beta)` (below: B)
/// and `gamma = ((3-2 beta)/5)^{5/2}` (above: A) bound the C wedge, which is
/// split into C+/C- by the sign of `phi(y_+)`; complex critical points put
/// the origin at the field minimum, which is the C+ side.
pub fn classify_region(beta: f64, gamma: f64) -> PhaseRegion {
    let scale = 1.0 + beta.abs() + gamma.abs();
    if beta >= -1.0 {
        let d = gamma + beta;
        if d.abs() <= REGION_TOL * scale {
            return PhaseRegion::BoundaryBisector;
        }
        return if d > 0.0 { PhaseRegion::A } else { PhaseRegion::B };
    }
    let g_triple = (-1.0 - 2.0 * beta).sqrt();
    let g_iii = ((3.0 - 2.0 * beta) / 5.0).powf(2.5);
    if (gamma - g_triple).abs() <= REGION_TOL * scale {
        return PhaseRegion::BoundaryTripleRootCurve;
    }
    if (gamma - g_iii).abs() <= REGION_TOL * scale {
        return PhaseRegion::BoundaryTypeIiiCurve;
    }
    if gamma < g_triple {
        return PhaseRegion::B;
    }
    if gamma > g_iii {
        return PhaseRegion::A;
    }
    match phi_at_upper_critical(beta, gamma) {
        None => PhaseRegion::CPlus,
        Some(phi_plus) => {
            if phi_plus.abs() <= REGION_TOL * scale {
                PhaseRegion::BoundaryPhiZeroCurve
            } else if phi_plus > 0.0 {
                PhaseRegion::CPlus
            } else {
                PhaseRegion::CMinus
            }
        }
    }
}

/// Closed-form transition data on the `beta < -1` boundary curves: the
/// triple-root curve `gamma = sqrt(-1-2 beta)` with its critical mass, and
/// the soft-collision curve `gamma = ((3-2 beta)/5)^{5/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionLoci {
    pub gamma_triple_root: f64,
    pub gamma_type_iii: f64,
    /// Mass at which the triple root forms at the origin, valid on
    /// `gamma = sqrt(-1-2 beta)`.
    pub t_triple_root: f64,
}

pub fn transition_loci(beta: f64) -> Result<TransitionLoci, ModelError> {
    if !(beta < -1.0) {
        return Err(ModelError::BetaNotBelowMinusOne(beta));
    }
    let g = (-1.0 - 2.0 * beta).sqrt();
    Ok(TransitionLoci {
        gamma_triple_root: g,
        gamma_type_iii: ((3.0 - 2.0 * beta) / 5.0).powf(2.5),
        t_triple_root: (beta + 1.0) * (beta + 1.0) / 2.0 + beta + g,
    })
}

/// Mass at which the conjugate pair collides with the soft edge, valid on
/// `gamma = ((3-2 beta)/5)^{5/2}`, where the collision sits at
/// `a1 = -2(beta+1)/5`.
pub fn t_type_iii(beta: f64) -> Result<f64, ModelError> {
    if !(beta < -1.0) {
        return Err(ModelError::BetaNotBelowMinusOne(beta));
    }
    let gamma = ((3.0 - 2.0 * beta) / 5.0).powf(2.5);
    Ok(gamma + beta - 0.3 * (beta + 1.0) * (beta + 1.0))
}

/// Negative root of `3y^4 + 4 beta y^3 + (beta^2 + 2(gamma - t)) y^2
/// - gamma^2 = 0` together with the detached support `[a2, a3]` it induces.
///
/// This is the `v -> 0` configuration for a repulsive charge (`gamma < 0`):
/// the admissible root is the negative one whose induced edges are real with
/// `0 < a2 < a3`; when several qualify the one below `-beta` is taken.
pub fn quartic_b1_recipe(p: &FieldParams) -> Result<(f64, f64, f64), ModelError> {
    if !(p.gamma < 0.0) {
        return Err(ModelError::GammaNotNegative(p.gamma));
    }
    let (beta, gamma, t) = (p.beta, p.gamma, p.t);
    let c2 = beta * beta + 2.0 * (gamma - t);
    let poly = |y: f64| ((3.0 * y + 4.0 * beta) * y + c2) * y * y - gamma * gamma;
    let dpoly = |y: f64| ((12.0 * y + 12.0 * beta) * y + 2.0 * c2) * y;

    // Stationary points of the quartic bound its monotone pieces; bracket a
    // sign change on each piece and polish by bisection + Newton.
    let mut stat = vec![0.0];
    let disc = 36.0 * beta * beta - 24.0 * c2;
    if disc >= 0.0 {
        let r = disc.sqrt();
        stat.push((-6.0 * beta - r) / 12.0);
        stat.push((-6.0 * beta + r) / 12.0);
    }
    stat.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let bound = 1.0 + (4.0 * beta.abs()).max(c2.abs()).max(gamma * gamma) / 3.0;
    let mut nodes = vec![-bound.max(stat[0].abs() + 1.0)];
    nodes.extend(stat.iter().copied());
    nodes.push(bound.max(stat.last().unwrap().abs() + 1.0));

    let mut roots = Vec::new();
    for w in nodes.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        if lo >= hi {
            continue;
        }
        let (flo, fhi) = (poly(lo), poly(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo * fhi > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = poly(mid);
            if fm == 0.0 || hi - lo < 1e-15 * (1.0 + mid.abs()) {
                lo = mid;
                hi = mid;
                break;
            }
            if flo * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..8 {
            let d = dpoly(y);
            if d == 0.0 {
                break;
            }
            y -= poly(y) / d;
        }
        roots.push(y);
    }

    let edges = |y: f64| -> Option<(f64, f64)> {
        let rad = 2.0 * (t - gamma) - 2.0 * y * y - 2.0 * beta * y;
        if rad < 0.0 {
            return None;
        }
        let r = rad.sqrt();
        let a2 = -(y + beta) - r;
        let a3 = -(y + beta) + r;
        (a2 > 0.0).then_some((a2, a3))
    };

    let mut admissible: Vec<(f64, f64, f64)> = roots
        .iter()
        .filter(|&&y| y < 0.0)
        .filter_map(|&y| edges(y).map(|(a2, a3)| (y, a2, a3)))
        .collect();
    if admissible.len() > 1 {
        admissible.retain(|&(y, _, _)| y < -beta);
    }
    match admissible.as_slice() {
        [(b1, a2, a3)] => Ok((*b1, *a2, *a3)),
        _ => Err(ModelError::NoAdmissibleRoot { beta, gamma, t }),
    }
}

/// Absolutely continuous part of a `v -> 0` limit measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcPart {
    /// Density `(x - b2) sqrt((a1-x)/x) / pi` on `[0, a1]`, `b2 <= 0`.
    HardEdge { a1: f64, b2: f64 },
    /// Semicircle `sqrt((x-a2)(a3-x)) / pi` on `[a2, a3]`.
    SoftEdge { a2: f64, a3: f64 },
}

impl AcPart {
    /// Closed-form mass of the part.
    pub fn mass(&self) -> f64 {
        match *self {
            AcPart::HardEdge { a1, b2 } => a1 * a1 / 8.0 - b2 * a1 / 2.0,
            AcPart::SoftEdge { a2, a3 } => (a3 - a2) * (a3 - a2) / 8.0,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            AcPart::HardEdge { a1, b2 } => {
                if x <= 0.0 || x >= a1 {
                    0.0
                } else {
                    (x - b2) * ((a1 - x) / x).sqrt() / PI
                }
            }
            AcPart::SoftEdge { a2, a3 } => {
                if x <= a2 || x >= a3 {
                    0.0
                } else {
                    ((x - a2) * (a3 - x)).sqrt() / PI
                }
            }
        }
    }
}

/// `v -> 0` limit of the equilibrium measure for an attractive charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureLimit {
    /// Dirac mass at the origin.
    pub atom_mass: f64,
    pub ac: Option<AcPart>,
}

impl MeasureLimit {
    pub fn total_mass(&self) -> f64 {
        self.atom_mass + self.ac.map_or(0.0, |a| a.mass())
    }
}

/// Limit of the equilibrium measure as `v -> 0` with `gamma > 0`: an atom
/// of mass `min(t, gamma)` at the origin plus, when `t > gamma`, the
/// equilibrium measure of mass `t - gamma` in the purely quadratic field.
///
/// The a.c. branch is selected by validity of its roots: the detached
/// interval needs `a2 = -beta - sqrt(2(t-gamma)) >= 0`, otherwise the
/// hard-edge pair applies (the two coincide on the seam).
pub fn limit_measure_v0(p: &FieldParams) -> Result<MeasureLimit, ModelError> {
    if !(p.gamma > 0.0) {
        return Err(ModelError::GammaNotPositive(p.gamma));
    }
    let (beta, gamma, t) = (p.beta, p.gamma, p.t);
    if t <= gamma {
        return Ok(MeasureLimit { atom_mass: t, ac: None });
    }
    let excess = t - gamma;
    let a2 = -beta - (2.0 * excess).sqrt();
    let ac = if a2 >= 0.0 {
        AcPart::SoftEdge { a2, a3: -beta + (2.0 * excess).sqrt() }
    } else {
        let r = (beta * beta + 6.0 * excess).sqrt();
        AcPart::HardEdge { a1: (-2.0 * beta + 2.0 * r) / 3.0, b2: (-2.0 * beta - r) / 3.0 }
    };
    Ok(MeasureLimit { atom_mass: gamma, ac: Some(ac) })
}

/// Image of a half-line configuration under `x = y^2`: the symmetric
/// real-line support, with density `lambda'(y) = |y| nu'(y^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLineSupport {
    /// Intervals left to right.
    pub intervals: Vec<[f64; 2]>,
}

impl RealLineSupport {
    pub fn cut_count(&self) -> usize {
        self.intervals.len()
    }
}

pub fn halfline_to_realline(cfg: &SupportConfig) -> RealLineSupport {
    let intervals = match *cfg {
        SupportConfig::OneCutHard { a1, .. } => {
            let r = a1.max(0.0).sqrt();
            vec![[-r, r]]
        }
        SupportConfig::OneCutSoft { a2, a3, .. } => {
            let (l, r) = (a2.max(0.0).sqrt(), a3.max(0.0).sqrt());
            vec![[-r, -l], [l, r]]
        }
        SupportConfig::TwoCut { a1, a2, a3, .. } => {
            let (m, l, r) = (a1.max(0.0).sqrt(), a2.max(0.0).sqrt(), a3.max(0.0).sqrt());
            vec![[-r, -l], [-m, m], [l, r]]
        }
    };
    RealLineSupport { intervals }
}

/// `lambda'(y) = |y| nu'(y^2)` on the real line.
pub fn realline_density(cfg: &SupportConfig, p: &FieldParams, y: f64) -> f64 {
    y.abs() * density(cfg, p, y * y)
}

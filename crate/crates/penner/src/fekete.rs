//! Discrete validation oracle: weighted Fekete points on the half-line.
//!
//! `n` particles minimizing
//! `sum_{i<j} -log|z_i - z_j| + (n/t) sum_i phi(z_i)` have an empirical
//! measure approximating `nu_t / t`, independently of the continuum edge
//! systems. The minimization is coordinate-wise damped Newton with
//! projection onto `z >= 0`.

use crate::model::{FieldParams, ModelError};
use crate::quad::{partial_mass, QuadError, QuadSpec};
use crate::solver::{solve_at, SolveError};
use crate::SupportConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeketeError {
    #[error("descent did not reach gradient tolerance after {sweeps} sweeps (max |g| = {grad})")]
    NonConvergence { sweeps: usize, grad: f64 },
    #[error("need at least 8 particles, got {0}")]
    TooFewParticles(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// A locally minimal particle configuration.
#[derive(Debug, Clone)]
pub struct ParticleConfig {
    /// Sorted positions, all `>= 0`.
    pub points: Vec<f64>,
    pub energy: f64,
    pub sweeps: usize,
    /// Energy after each accepted sweep (non-increasing).
    pub energy_trace: Vec<f64>,
}

const MIN_SEPARATION: f64 = 1e-14;
const GRAD_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 20_000;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn unit_f64(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn energy(points: &[f64], p: &FieldParams) -> f64 {
    let n = points.len();
    let weight = n as f64 / p.t;
    let mut e = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            e -= (points[i] - points[j]).abs().max(MIN_SEPARATION).ln();
        }
        e += weight * p.field(points[i]);
    }
    e
}

fn gradient_at(points: &[f64], i: usize, p: &FieldParams) -> (f64, f64) {
    let weight = points.len() as f64 / p.t;
    let mut g = weight * p.field_deriv(points[i]);
    let mut h = weight * p.field_deriv2(points[i]);
    for (j, &zj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let mut d = points[i] - zj;
        if d.abs() < MIN_SEPARATION {
            d = MIN_SEPARATION;
        }
        g -= 1.0 / d;
        h += 1.0 / (d * d);
    }
    (g, h)
}

/// Energy change from moving particle `i` to `znew` (O(n)).
fn energy_delta(points: &[f64], i: usize, znew: f64, p: &FieldParams) -> f64 {
    let weight = points.len() as f64 / p.t;
    let mut d = weight * (p.field(znew) - p.field(points[i]));
    for (j, &zj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        d -= (znew - zj).abs().max(MIN_SEPARATION).ln();
        d += (points[i] - zj).abs().max(MIN_SEPARATION).ln();
    }
    d
}

/// Quantile initialization from the continuum configuration when one is
/// available, else uniform over a window set by the field minimum.
fn initial_points(
    n: usize,
    p: &FieldParams,
    seed: u64,
    spec: &QuadSpec,
) -> Result<Vec<f64>, FeketeError> {
    let mut state = seed ^ 0x517cc1b727220a95;
    if let Ok(rep) = solve_at(p, None, spec) {
        let cfg = rep.config;
        let total = p.t;
        let right = cfg.rightmost();
        let left = cfg.leftmost();
        let mut pts = Vec::with_capacity(n);
        for i in 0..n {
            let target = (i as f64 + 0.5) / n as f64 * total;
            // Invert the distribution function by bisection.
            let (mut lo, mut hi) = (left, right);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if partial_mass(&cfg, p, mid, spec)? < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let jitter = (unit_f64(&mut state) - 0.5) * 1e-4 * (right - left).max(1e-6);
            pts.push((0.5 * (lo + hi) + jitter).max(0.0));
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return Ok(pts);
    }
    let (_, yp) = crate::model::critical_points(p.beta, p.gamma);
    let hi = (yp.re.max(0.0) + 2.0).max(2.0 * p.t.sqrt());
    let mut pts: Vec<f64> = (0..n)
        .map(|i| (i as f64 + 0.5 + 0.2 * (unit_f64(&mut state) - 0.5)) / n as f64 * hi)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(pts)
}

/// Minimize the discrete weighted energy by coordinate Newton sweeps from
/// a quantile initialization; `seed` only jitters the start.
pub fn minimize_energy(
    n: usize,
    p: &FieldParams,
    seed: u64,
    spec: &QuadSpec,
) -> Result<ParticleConfig, FeketeError> {
    if n < 8 {
        return Err(FeketeError::TooFewParticles(n));
    }
    let mut pts = initial_points(n, p, seed, spec)?;
    let mut e = energy(&pts, p);
    let mut trace = vec![e];

    for sweep in 1..=MAX_SWEEPS {
        let mut max_grad = 0.0f64;
        for i in 0..n {
            let (g, h) = gradient_at(&pts, i, p);
            // A particle blocked at the conductor boundary satisfies the
            // one-sided condition with an inward-pointing gradient.
            let blocked = pts[i] == 0.0 && g > 0.0;
            if !blocked {
                max_grad = max_grad.max(g.abs());
            }
            if blocked || g.abs() < 0.1 * GRAD_TOL {
                continue;
            }
            let mut step = if h > 0.0 { -g / h } else { -g.signum() * 0.1 };
            if h > 0.0 && step.abs() <= 1e-7 * (1.0 + pts[i].abs()) {
                // Polish regime: the energy decrement is below rounding,
                // trust the Newton step directly.
                pts[i] = (pts[i] + step).max(0.0);
                continue;
            }
            // Globalized regime: accept only energy-decreasing moves.
            for _ in 0..40 {
                let znew = (pts[i] + step).max(0.0);
                let de = energy_delta(&pts, i, znew, p);
                if de <= 1e-13 * (1.0 + e.abs()) {
                    if znew != pts[i] {
                        e += de.min(0.0);
                        pts[i] = znew;
                    }
                    break;
                }
                step *= 0.5;
            }
        }
        trace.push(e);
        if max_grad < GRAD_TOL {
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let e_final = energy(&pts, p);
            return Ok(ParticleConfig {
                points: pts,
                energy: e_final,
                sweeps: sweep,
                energy_trace: trace,
            });
        }
    }
    let grad = (0..n).map(|i| gradient_at(&pts, i, p).0.abs()).fold(0.0, f64::max);
    Err(FeketeError::NonConvergence { sweeps: MAX_SWEEPS, grad })
}

/// Kolmogorov distance between the empirical distribution of the particles
/// and the continuum distribution `x -> nu([0, x]) / t`.
pub fn ks_distance(
    points: &[f64],
    cfg: &SupportConfig,
    p: &FieldParams,
    spec: &QuadSpec,
) -> Result<f64, FeketeError> {
    let n = points.len() as f64;
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = partial_mass(cfg, p, x, spec)? / p.t;
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    Ok(d)
}

/// Fraction of particles inside `[lo, hi]`.
pub fn occupancy(points: &[f64], lo: f64, hi: f64) -> f64 {
    points.iter().filter(|&&x| x >= lo && x <= hi).count() as f64 / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BPair;

    fn spec() -> QuadSpec {
        QuadSpec::default()
    }

    #[test]
    fn energy_decreases_and_distribution_matches() {
        let p = FieldParams::new(0.0, 1.0, 1.0).unwrap();
        let out = minimize_energy(40, &p, 7, &spec()).unwrap();
        for w in out.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy rose: {} -> {}", w[0], w[1]);
        }
        assert!(out.points.iter().all(|&x| x >= 0.0));
        let rep = solve_at(&p, None, &spec()).unwrap();
        let d = ks_distance(&out.points, &rep.config, &p, &spec()).unwrap();
        assert!(d < 3.0 / (40f64).sqrt(), "KS distance = {d}");
    }

    #[test]
    fn near_quadratic_well_centers_on_its_minimum() {
        // Almost-pure quadratic confinement: the cloud centers on the
        // scalar minimizer of the field.
        let p = FieldParams::new(-2.0, 1e-9, 1.0).unwrap();
        let out = minimize_energy(8, &p, 3, &spec()).unwrap();
        let mean = out.points.iter().sum::<f64>() / out.points.len() as f64;
        assert!((mean - 2.0).abs() < 0.3, "mean = {mean}");
        let mid = 0.5 * (out.points[3] + out.points[4]);
        assert!((mid - 2.0).abs() < 0.3, "median = {mid}");
    }

    #[test]
    fn hard_edge_clusters_particles_at_inverse_square_rate() {
        // At a hard edge the leftmost particle pins to the conductor
        // boundary and the first positive one approaches it like 1/n^2.
        let p = FieldParams::new(0.0, 1.0, 1.0).unwrap();
        let mut firsts = Vec::new();
        for n in [50usize, 100, 200] {
            let out = minimize_energy(n, &p, 11, &spec()).unwrap();
            assert!(out.points[0] < out.points[1]);
            assert!(out.points[0] < 1e-6, "leftmost = {}", out.points[0]);
            firsts.push((n, out.points[1]));
        }
        assert!(firsts[1].1 < firsts[0].1 && firsts[2].1 < firsts[1].1, "{firsts:?}");
        for (n, z1) in firsts {
            let scaled = z1 * (n * n) as f64;
            assert!(scaled > 0.3 && scaled < 6.0, "n={n}: z1*n^2 = {scaled}");
        }
    }

    #[test]
    fn two_cut_gap_is_particle_free() {
        let p = FieldParams::new(-4.0, 3.0, 2.59).unwrap();
        let rep = solve_at(&p, None, &spec()).unwrap();
        let (a1, a2) = match rep.config {
            SupportConfig::TwoCut { a1, a2, .. } => (a1, a2),
            ref other => panic!("expected two-cut, got {other:?}"),
        };
        let out = minimize_energy(100, &p, 5, &spec()).unwrap();
        let margin = 0.15 * (a2 - a1);
        let inside =
            out.points.iter().filter(|&&x| x > a1 + margin && x < a2 - margin).count();
        assert_eq!(inside, 0, "{inside} particles in the gap");
        let frac = occupancy(&out.points, 0.0, 0.5 * (a1 + a2));
        let mass_frac = partial_mass(&rep.config, &p, a1, &spec()).unwrap() / p.t;
        assert!((frac - mass_frac).abs() < 0.05, "occupancy {frac} vs mass {mass_frac}");
        let d = ks_distance(&out.points, &rep.config, &p, &spec()).unwrap();
        assert!(d < 0.3, "KS distance = {d}");
    }

    #[test]
    fn rejects_tiny_configurations() {
        let p = FieldParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            minimize_energy(4, &p, 1, &spec()),
            Err(FeketeError::TooFewParticles(4))
        ));
    }

    #[test]
    fn max_particle_tracks_the_support_edge() {
        let p = FieldParams::new(0.0, 1.0, 1.0).unwrap();
        let rep = solve_at(&p, None, &spec()).unwrap();
        let a1 = match rep.config {
            SupportConfig::OneCutHard { a1, b: BPair::Conj { .. } } => a1,
            ref other => panic!("unexpected {other:?}"),
        };
        // The soft-edge deficit shrinks like n^(-2/3).
        let mut tops = Vec::new();
        for n in [50usize, 100, 200] {
            let out = minimize_energy(n, &p, 13, &spec()).unwrap();
            let top = *out.points.last().unwrap();
            assert!(top < a1, "max particle {top} beyond edge {a1}");
            let deficit = (a1 - top) / a1;
            assert!(
                deficit < 1.5 * (n as f64).powf(-2.0 / 3.0),
                "n={n}: deficit {deficit}"
            );
            tops.push(top);
        }
        assert!(tops[1] > tops[0] && tops[2] > tops[1], "tops: {tops:?}");
    }
}

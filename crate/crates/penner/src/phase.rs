//! Phase diagrams over the `(beta, gamma)` plane: per-point phase
//! sequences, grid sweeps, analytic boundary curves, and the critical
//! coupling of the symmetric quartic-log model.

use crate::flow::{evolve_t, EventKind, FlowError, FlowOptions, Trajectory};
use crate::model::{
    classify_region, FieldParams, ModelError, PhaseRegion, Scenario, SupportConfig,
};
use crate::quad::QuadSpec;
use crate::solver::{newton_solve, solve_at, SolveError};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("the configuration did not stabilize below mass {0}")]
    NotAbsorbed(f64),
    #[error("no sign change of a2 on the coupling bracket [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
}

/// Phase data of one `(beta, gamma)` point: region label, transition
/// times, and the real-line cut-count sequence as the mass grows.
#[derive(Debug, Clone)]
pub struct PhaseCell {
    pub beta: f64,
    pub gamma: f64,
    pub region: PhaseRegion,
    /// Events in mass order.
    pub times: Vec<(EventKind, f64)>,
    /// Cut counts of the symmetric real-line picture, phase by phase.
    pub sequence: Vec<u8>,
    /// Set instead of data when the cell failed (grid sweeps keep going).
    pub error: Option<String>,
}

/// Absorbing state of the mass flow: a hard-edge cut whose remaining
/// density zeros sit at or left of the origin can never change its cut
/// count again (their real part only decreases).
fn is_absorbed(cfg: &SupportConfig) -> bool {
    match *cfg {
        SupportConfig::OneCutHard { b, .. } => {
            let (s, p) = b.sum_product();
            let disc = s * s - 4.0 * p;
            if disc >= 0.0 {
                0.5 * (s + disc.sqrt()) <= 0.0
            } else {
                0.5 * s <= 0.0
            }
        }
        _ => false,
    }
}

fn realline_cuts(scenario: Scenario) -> u8 {
    match scenario {
        Scenario::OneCutHard => 1,
        Scenario::OneCutSoft => 2,
        Scenario::TwoCut => 3,
    }
}

fn sequence_of(traj: &Trajectory) -> Vec<u8> {
    let mut seq = vec![realline_cuts(traj.samples[0].1.scenario())];
    for ev in &traj.events {
        if ev.pre_scenario != ev.post_scenario {
            seq.push(realline_cuts(ev.post_scenario));
        }
    }
    seq
}

/// Run the mass flow until the terminal hard-edge phase is stable and
/// report the region, the cut-count sequence, and the transition times.
pub fn phase_sequence(beta: f64, gamma: f64, spec: &QuadSpec) -> Result<PhaseCell, PhaseError> {
    let region = classify_region(beta, gamma);
    let p = FieldParams::new(beta, gamma, 1.0)?;
    let opts = FlowOptions { output_points: 16, ..FlowOptions::default() };
    let mut t_hi = 8.0;
    loop {
        let traj = evolve_t(&p, 0.01, t_hi, &opts, spec)?;
        if is_absorbed(traj.final_config()) {
            let times = traj.events.iter().map(|e| (e.kind, e.time)).collect();
            return Ok(PhaseCell {
                beta,
                gamma,
                region,
                times,
                sequence: sequence_of(&traj),
                error: None,
            });
        }
        t_hi *= 4.0;
        if t_hi > 4096.0 {
            return Err(PhaseError::NotAbsorbed(t_hi));
        }
    }
}

/// Expected cut-count sequence for an open region.
pub fn expected_sequence(region: PhaseRegion) -> Option<&'static [u8]> {
    match region {
        PhaseRegion::A => Some(&[1]),
        PhaseRegion::B => Some(&[2, 1]),
        PhaseRegion::CPlus => Some(&[1, 3, 1]),
        PhaseRegion::CMinus => Some(&[2, 3, 1]),
        _ => None,
    }
}

/// Evaluate [`phase_sequence`] over a grid, fanning out to `jobs` worker
/// threads. Failures are recorded per cell rather than aborting the sweep;
/// cells come back in row-major `(gamma outer, beta inner)` order.
pub fn phase_grid(
    beta_range: (f64, f64),
    gamma_range: (f64, f64),
    nx: usize,
    ny: usize,
    jobs: usize,
    spec: &QuadSpec,
) -> Vec<PhaseCell> {
    let betas: Vec<f64> = linspace(beta_range.0, beta_range.1, nx);
    let gammas: Vec<f64> = linspace(gamma_range.0, gamma_range.1, ny);
    let points: Vec<(f64, f64)> =
        gammas.iter().flat_map(|&g| betas.iter().map(move |&b| (b, g))).collect();

    let results: Mutex<Vec<Option<PhaseCell>>> = Mutex::new(vec![None; points.len()]);
    let cursor = AtomicUsize::new(0);
    let workers = jobs.max(1).min(points.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::Relaxed);
                if idx >= points.len() {
                    break;
                }
                let (beta, gamma) = points[idx];
                let cell = match phase_sequence(beta, gamma, spec) {
                    Ok(cell) => cell,
                    Err(err) => PhaseCell {
                        beta,
                        gamma,
                        region: classify_region(beta, gamma),
                        times: Vec::new(),
                        sequence: Vec::new(),
                        error: Some(err.to_string()),
                    },
                };
                results.lock().unwrap()[idx] = Some(cell);
            });
        }
    });

    results.into_inner().unwrap().into_iter().map(|c| c.expect("all cells done")).collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// One sampled boundary curve of the phase plane.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    pub name: &'static str,
    pub points: Vec<(f64, f64)>,
}

/// Sample the analytic region boundaries over a `beta` range: the bisector
/// (for `beta >= -1`), the triple-root and soft-collision curves (for
/// `beta < -1`), and the zero curve of `phi(y_+)` splitting the wedge.
pub fn boundary_curves(beta_lo: f64, beta_hi: f64, n: usize) -> Vec<BoundaryCurve> {
    let betas = linspace(beta_lo, beta_hi, n.max(2));
    let mut bisector = Vec::new();
    let mut triple = Vec::new();
    let mut soft_collision = Vec::new();
    let mut phi_zero = Vec::new();
    for &b in &betas {
        if b >= -1.0 {
            bisector.push((b, -b));
        } else {
            let g_lo = (-1.0 - 2.0 * b).sqrt();
            let g_hi = ((3.0 - 2.0 * b) / 5.0).powf(2.5);
            triple.push((b, g_lo));
            soft_collision.push((b, g_hi));
            // The phi(y+) = 0 curve lies inside the wedge; the proxy is
            // positive on the upper (C+) side, where the critical points
            // may also turn complex.
            let side = |g: f64| crate::model::phi_at_upper_critical(b, g).unwrap_or(1.0);
            let (mut lo, mut hi) = (g_lo, g_hi);
            if side(lo) < 0.0 && side(hi) > 0.0 {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if side(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                phi_zero.push((b, 0.5 * (lo + hi)));
            }
        }
    }
    let mut out = Vec::new();
    for (name, points) in [
        ("bisector", bisector),
        ("triple-root", triple),
        ("type-iii", soft_collision),
        ("phi-zero", phi_zero),
    ] {
        if !points.is_empty() {
            out.push(BoundaryCurve { name, points });
        }
    }
    out
}

/// Critical coupling of the symmetric quartic-log model
/// `x^4/2 - log(x^2 + v)/2` with unit mass: the `v` at which the left edge
/// of the detached half-line support reaches the origin. Found by
/// bisection on the sign of `a2` along the detached branch, with Newton
/// continuation between probes.
pub fn find_vc(spec: &QuadSpec) -> Result<f64, PhaseError> {
    find_vc_in(0.2, 0.4, spec)
}

pub fn find_vc_in(mut lo: f64, mut hi: f64, spec: &QuadSpec) -> Result<f64, PhaseError> {
    let params_at = |v: f64| {
        let g = -1.0 / (2.0 * v * v);
        FieldParams::new(0.0, g, -g)
    };

    // Anchor the branch at the small-v end, where the detached
    // configuration is the valid one.
    let p_lo = params_at(lo)?;
    let rep = solve_at(&p_lo, Some(Scenario::OneCutSoft), spec)?;
    if rep.scenario() != Scenario::OneCutSoft {
        return Err(PhaseError::BracketFailure { lo, hi });
    }
    let mut u = rep.unknowns.clone();
    let mut v_of_u = lo;
    let bracket = (lo, hi);

    // Walk the branch to a probe point, halving the stride on failure.
    let probe = |target: f64, u: &mut Vec<f64>, v_of_u: &mut f64| -> Result<f64, PhaseError> {
        for _ in 0..200 {
            let step = target - *v_of_u;
            if step.abs() < 1e-15 {
                break;
            }
            let mut stride = step;
            loop {
                let v_try = *v_of_u + stride;
                match newton_solve(Scenario::OneCutSoft, u, &params_at(v_try)?, spec) {
                    Ok(r) => {
                        *u = r.unknowns.clone();
                        *v_of_u = v_try;
                        break;
                    }
                    Err(_) => {
                        stride *= 0.5;
                        if stride.abs() < 1e-12 {
                            return Err(PhaseError::BracketFailure {
                                lo: bracket.0,
                                hi: bracket.1,
                            });
                        }
                    }
                }
            }
        }
        Ok(u[1])
    };

    let a2_lo = probe(lo, &mut u, &mut v_of_u)?;
    let a2_hi = probe(hi, &mut u, &mut v_of_u)?;
    if !(a2_lo > 0.0 && a2_hi < 0.0) {
        return Err(PhaseError::BracketFailure { lo, hi });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let a2 = probe(mid, &mut u, &mut v_of_u)?;
        if a2 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::halfline_to_realline;

    fn spec() -> QuadSpec {
        QuadSpec::default()
    }

    #[test]
    fn region_a_sequence_is_single_cut() {
        let cell = phase_sequence(0.0, 1.0, &spec()).unwrap();
        assert_eq!(cell.region, PhaseRegion::A);
        assert_eq!(cell.sequence, vec![1]);
        assert!(cell.times.is_empty());
    }

    #[test]
    fn region_b_sequence_two_then_one() {
        let cell = phase_sequence(0.0, -5.0, &spec()).unwrap();
        assert_eq!(cell.region, PhaseRegion::B);
        assert_eq!(cell.sequence, vec![2, 1]);
        assert_eq!(cell.times.len(), 1);
        assert_eq!(cell.times[0].0, EventKind::OriginSoftToHard);
    }

    #[test]
    fn region_c_minus_full_sequence() {
        let cell = phase_sequence(-4.0, 3.0, &spec()).unwrap();
        assert_eq!(cell.region, PhaseRegion::CMinus);
        assert_eq!(cell.sequence, vec![2, 3, 1]);
        let birth = cell.times.iter().find(|(k, _)| *k == EventKind::TypeIBirth).unwrap();
        let merge = cell.times.iter().find(|(k, _)| *k == EventKind::TypeIIMerge).unwrap();
        assert!((birth.1 - 2.58).abs() < 0.01);
        assert!((merge.1 - 2.60).abs() < 0.01);
    }

    #[test]
    fn region_c_plus_full_sequence() {
        // Complex critical points inside the wedge: one cut, then a
        // detached birth, then the merge.
        let cell = phase_sequence(-4.4, 8.0, &spec()).unwrap();
        assert_eq!(cell.region, PhaseRegion::CPlus);
        assert_eq!(cell.sequence, vec![1, 3, 1]);
    }

    #[test]
    fn boundary_curve_samples_classify_on_their_curves() {
        for curve in boundary_curves(-6.0, 2.0, 33) {
            for &(b, g) in &curve.points {
                let r = classify_region(b, g);
                assert!(r.is_boundary(), "({b}, {g}) on {} classified {r:?}", curve.name);
            }
        }
    }

    #[test]
    fn small_grid_covers_and_matches() {
        let cells = phase_grid((-6.0, 2.0), (-6.0, 8.0), 3, 3, 2, &spec());
        assert_eq!(cells.len(), 9);
        for cell in &cells {
            if cell.error.is_none() {
                if let Some(want) = expected_sequence(cell.region) {
                    assert_eq!(cell.sequence, want, "at ({}, {})", cell.beta, cell.gamma);
                }
            }
        }
    }

    #[test]
    fn critical_coupling_value() {
        let vc = find_vc(&spec()).unwrap();
        assert!((vc - 0.269593).abs() < 1e-5, "vc = {vc}");
    }

    #[test]
    fn coupling_side_checks() {
        // Below the critical coupling the detached edge is positive (split
        // support on the real line); above, the valid configuration is the
        // pinned one.
        let sp = spec();
        let at = |v: f64| {
            let g = -1.0 / (2.0 * v * v);
            let p = FieldParams::new(0.0, g, -g).unwrap();
            solve_at(&p, None, &sp).unwrap()
        };
        let below = at(0.2);
        assert_eq!(below.scenario(), Scenario::OneCutSoft);
        assert!(below.unknowns[1] > 0.0);
        let above = at(0.4);
        assert_eq!(above.scenario(), Scenario::OneCutHard);
    }

    #[test]
    fn halfline_picture_matches_sequence_counts() {
        let hard = SupportConfig::OneCutHard {
            a1: 1.0,
            b: crate::model::BPair::Conj { re: 0.0, im: 1.0 },
        };
        assert_eq!(halfline_to_realline(&hard).cut_count(), 1);
        let soft = SupportConfig::OneCutSoft { b1: 0.0, a2: 1.0, a3: 2.0 };
        assert_eq!(halfline_to_realline(&soft).cut_count(), 2);
        let two = SupportConfig::TwoCut { a1: 0.5, b1: 0.7, a2: 1.0, a3: 2.0 };
        assert_eq!(halfline_to_realline(&two).cut_count(), 3);
    }
}

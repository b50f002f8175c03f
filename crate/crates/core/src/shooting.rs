//! Shooting on the initial velocity.
//!
//! The endpoint map `V_T(v) = x_v(T)` is continuous in `v` once `|v|`
//! exceeds `||m||_1`, so Dirichlet solutions in one dimension are located by
//! scanning `V_T` for sign changes and bisecting. Scaling a velocity by the
//! explicit factor
//!
//! ```text
//! c > ||m||_1 / |v| + 6 r / (|v| t1(v))
//! ```
//!
//! (with `t1(v)` the first impact time) adds at least two impacts, and
//! between two velocities whose impact counts differ by two or more the
//! endpoint changes sign. [`enumerate_solutions`] alternates these two steps
//! to produce solutions with ever more impacts along a ray of velocities.

use nalgebra::Vector2;
use rayon::prelude::*;
use thiserror::Error;

use crate::integrator::{
    first_impact, integrate_cauchy, IntegratorError, Problem, Trajectory, TrajectoryStatus,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error("operation needs a one-dimensional table, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("invalid velocity range [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("bracket [{lo}, {hi}] lost: shots inside it failed ({status})")]
    BracketLost { lo: f64, hi: f64, status: String },
    #[error(
        "bisection collapsed at v = {v} with residual {residual:e}; the endpoint map jumps here"
    )]
    NoConvergence { v: f64, residual: f64 },
    #[error("escalation needs a nonzero velocity")]
    ZeroVelocity,
    #[error("escalation needs a trajectory with at least one impact")]
    NoImpact,
    #[error("requested extra impact count {0} is not even")]
    OddTarget(usize),
    #[error("escalation failed to add {target} impacts after {doublings} doublings")]
    EscalationFailed { target: usize, doublings: usize },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bisection stops once the bracket is this narrow.
    pub tol_v: f64,
    /// Largest accepted `|x_v(T)|`.
    pub tol_residual: f64,
    /// Grid density of [`enumerate_solutions`], in cells per decade of `|v|`.
    pub cells_per_decade: usize,
    /// Velocities closer than this are the same solution.
    pub distinct: f64,
    pub max_doublings: usize,
    pub max_levels: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_v: 1e-12,
            tol_residual: 1e-8,
            cells_per_decade: 256,
            distinct: 1e-6,
            max_doublings: 20,
            max_levels: 40,
        }
    }
}

/// One evaluation of the endpoint map.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotResult {
    pub v: Vector2<f64>,
    pub endpoint: Vector2<f64>,
    pub impact_count: usize,
    pub impact_times: Vec<f64>,
    pub status: TrajectoryStatus,
}

impl ShotResult {
    pub fn completed(&self) -> bool {
        self.status.is_completed()
    }
}

/// A Dirichlet solution `x(0) = x(T) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSolution {
    pub v: Vector2<f64>,
    pub trajectory: Trajectory,
    pub residual: f64,
}

impl DirichletSolution {
    pub fn impact_count(&self) -> usize {
        self.trajectory.impacts.len()
    }
}

fn embed(problem: &Problem, v: Vector2<f64>) -> Vector2<f64> {
    if problem.dim() == 1 {
        Vector2::new(v.x, 0.0)
    } else {
        v
    }
}

fn shot_from(v: Vector2<f64>, traj: &Trajectory) -> ShotResult {
    ShotResult {
        v,
        endpoint: traj.end_position(),
        impact_count: traj.impacts.len(),
        impact_times: traj.impact_times(),
        status: traj.status,
    }
}

/// `V_T(v)`: integrates from the origin with velocity `v`.
pub fn endpoint_map(problem: &Problem, v: Vector2<f64>) -> ShotResult {
    let v = embed(problem, v);
    match integrate_cauchy(problem, Vector2::zeros(), v) {
        Ok(traj) => shot_from(v, &traj),
        // the origin is interior and T > 0 by construction, so this is unreachable
        Err(err) => unreachable!("origin start rejected: {err}"),
    }
}

/// Scalar shot for one-dimensional tables.
pub fn shoot(problem: &Problem, v: f64) -> ShotResult {
    endpoint_map(problem, Vector2::new(v, 0.0))
}

pub fn count_impacts(problem: &Problem, v: Vector2<f64>) -> usize {
    endpoint_map(problem, v).impact_count
}

/// Velocities `lo < hi` with endpoints of opposite sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub end_lo: f64,
    pub end_hi: f64,
}

/// Grid cell dropped because a shot at one of its ends did not complete.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedCell {
    pub lo: f64,
    pub hi: f64,
    pub status: TrajectoryStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BracketScan {
    pub brackets: Vec<Bracket>,
    /// Grid velocities whose endpoint is exactly zero.
    pub exact_roots: Vec<f64>,
    pub failed: Vec<FailedCell>,
    /// Set when part of the range lies at or below `||m||_1`, where
    /// continuity of the endpoint map is not guaranteed.
    pub below_continuity: bool,
}

fn require_1d(problem: &Problem) -> Result<(), ShootingError> {
    match problem.dim() {
        1 => Ok(()),
        d => Err(ShootingError::NotOneDimensional(d)),
    }
}

/// Scans `V_T` on `n_grid` uniform cells of `[v_min, v_max]` and of
/// `[-v_max, -v_min]`, returning cells where the endpoint changes sign.
pub fn find_brackets(
    problem: &Problem,
    v_min: f64,
    v_max: f64,
    n_grid: usize,
) -> Result<BracketScan, ShootingError> {
    require_1d(problem)?;
    if !(v_min.is_finite() && v_max.is_finite() && 0.0 <= v_min && v_min < v_max) || n_grid < 2 {
        return Err(ShootingError::BadRange(v_min, v_max));
    }
    let mut scan = scan_interval(problem, -v_max, -v_min, n_grid);
    let positive = scan_interval(problem, v_min, v_max, n_grid);
    scan.brackets.extend(positive.brackets);
    scan.exact_roots.extend(positive.exact_roots);
    scan.failed.extend(positive.failed);
    scan.exact_roots.dedup();
    scan.below_continuity = v_min <= problem.m_l1();
    Ok(scan)
}

/// Scan of a single signed interval `lo < hi`.
fn scan_interval(problem: &Problem, lo: f64, hi: f64, cells: usize) -> BracketScan {
    let shots: Vec<ShotResult> = (0..=cells)
        .into_par_iter()
        .map(|k| {
            let v = if k == cells {
                hi
            } else {
                lo + (hi - lo) * k as f64 / cells as f64
            };
            shoot(problem, v)
        })
        .collect();
    let mut scan = BracketScan::default();
    for shot in &shots {
        if shot.completed() && shot.endpoint.x == 0.0 {
            scan.exact_roots.push(shot.v.x);
        }
    }
    for pair in shots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if !a.completed() || !b.completed() {
            let status = if a.completed() { b.status } else { a.status };
            scan.failed.push(FailedCell {
                lo: a.v.x,
                hi: b.v.x,
                status,
            });
            continue;
        }
        let (ea, eb) = (a.endpoint.x, b.endpoint.x);
        if ea * eb < 0.0 {
            scan.brackets.push(Bracket {
                lo: a.v.x,
                hi: b.v.x,
                end_lo: ea,
                end_hi: eb,
            });
        }
    }
    scan
}

/// Bisection on the sign of `V_T` inside a bracket, down to `tol_v`.
pub fn bisect_solution(
    problem: &Problem,
    bracket: &Bracket,
    opts: &SolverOptions,
) -> Result<DirichletSolution, ShootingError> {
    require_1d(problem)?;
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let (mut end_lo, mut end_hi) = (bracket.end_lo, bracket.end_hi);
    let mut best = if end_lo.abs() <= end_hi.abs() {
        (lo, end_lo)
    } else {
        (hi, end_hi)
    };
    // each iteration halves the bracket; the cap only guards against tol_v = 0
    for _ in 0..200 {
        if hi - lo <= opts.tol_v || best.1 == 0.0 {
            break;
        }
        let (v, end) = match probe(problem, lo, hi) {
            Some(hit) => hit,
            None => {
                let status = shoot(problem, 0.5 * (lo + hi)).status;
                return Err(ShootingError::BracketLost {
                    lo,
                    hi,
                    status: status.label().to_string(),
                });
            }
        };
        if end.abs() < best.1.abs() {
            best = (v, end);
        }
        if end == 0.0 {
            break;
        }
        if (end < 0.0) == (end_lo < 0.0) {
            lo = v;
            end_lo = end;
        } else {
            hi = v;
            end_hi = end;
        }
    }
    let _ = end_hi;
    let (v, _) = best;
    if best.1.abs() > opts.tol_residual {
        return Err(ShootingError::NoConvergence {
            v,
            residual: best.1.abs(),
        });
    }
    let trajectory = integrate_cauchy(problem, Vector2::zeros(), Vector2::new(v, 0.0))?;
    let residual = trajectory.end_position().x.abs();
    Ok(DirichletSolution {
        v: Vector2::new(v, 0.0),
        trajectory,
        residual,
    })
}

/// Completed shot at the midpoint of `[lo, hi]`, or at one of the quarter
/// points when the midpoint grazes.
fn probe(problem: &Problem, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let w = hi - lo;
    [0.5, 0.25, 0.75].iter().find_map(|&frac| {
        let v = lo + frac * w;
        let shot = shoot(problem, v);
        shot.completed().then_some((v, shot.endpoint.x))
    })
}

/// Outcome of [`scaling_escalation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Escalation {
    pub factor: f64,
    pub velocity: Vector2<f64>,
    pub base_impacts: usize,
    pub impacts: usize,
}

/// Scales `v` so that the trajectory gains at least `target_extra` impacts.
///
/// The factor comes from the explicit bound above, applied `target_extra / 2`
/// times; if shooting shows it fell short, it is doubled until the count is
/// reached.
pub fn scaling_escalation(
    problem: &Problem,
    v: Vector2<f64>,
    target_extra: usize,
    opts: &SolverOptions,
) -> Result<Escalation, ShootingError> {
    let v = embed(problem, v);
    if !target_extra.is_multiple_of(2) {
        return Err(ShootingError::OddTarget(target_extra));
    }
    if v.norm() == 0.0 {
        return Err(ShootingError::ZeroVelocity);
    }
    let base = endpoint_map(problem, v);
    if let Some(err) = base.status.into_error() {
        return Err(err.into());
    }
    if base.impact_count == 0 {
        return Err(ShootingError::NoImpact);
    }
    let target = base.impact_count + target_extra;
    if target_extra == 0 {
        return Ok(Escalation {
            factor: 1.0,
            velocity: v,
            base_impacts: base.impact_count,
            impacts: base.impact_count,
        });
    }

    let r = 0.5 * problem.table.diameter();
    let m = problem.m_l1();
    let mut factor = 1.0;
    let mut w = v;
    for _ in 0..target_extra / 2 {
        let t1 = first_impact(problem, Vector2::zeros(), w, 0.0)?.t;
        let speed = w.norm();
        let bound = m / speed + 6.0 * r / (speed * t1);
        let c = 1.01 * bound.max(1.0);
        factor *= c;
        w = v * factor;
    }

    for doubling in 0..=opts.max_doublings {
        let shot = endpoint_map(problem, w);
        if shot.completed() && shot.impact_count >= target {
            return Ok(Escalation {
                factor,
                velocity: w,
                base_impacts: base.impact_count,
                impacts: shot.impact_count,
            });
        }
        if doubling < opts.max_doublings {
            factor *= 2.0;
            w = v * factor;
        }
    }
    Err(ShootingError::EscalationFailed {
        target: target_extra,
        doublings: opts.max_doublings,
    })
}

/// Solutions found by [`enumerate_solutions`] or [`solve_in_range`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Enumeration {
    /// Sorted by `|v|`.
    pub solutions: Vec<DirichletSolution>,
    /// The resting solution `v = 0`, when it solves the problem.
    pub trivial: Option<DirichletSolution>,
    pub diagnostics: Vec<String>,
}

fn trivial_solution(problem: &Problem, opts: &SolverOptions) -> Option<DirichletSolution> {
    let traj = integrate_cauchy(problem, Vector2::zeros(), Vector2::zeros()).ok()?;
    let residual = traj.end_position().norm();
    (traj.status.is_completed() && residual <= opts.tol_residual).then(|| DirichletSolution {
        v: Vector2::zeros(),
        trajectory: traj,
        residual,
    })
}

fn solve_brackets(
    problem: &Problem,
    scan: &BracketScan,
    opts: &SolverOptions,
    out: &mut Vec<DirichletSolution>,
    diagnostics: &mut Vec<String>,
) {
    let results: Vec<_> = scan
        .brackets
        .par_iter()
        .map(|b| (b, bisect_solution(problem, b, opts)))
        .collect();
    for (b, res) in results {
        match res {
            Ok(sol) => out.push(sol),
            Err(err) => diagnostics.push(format!("bracket [{}, {}]: {err}", b.lo, b.hi)),
        }
    }
    for &v in &scan.exact_roots {
        if let Ok(trajectory) = integrate_cauchy(problem, Vector2::zeros(), Vector2::new(v, 0.0)) {
            out.push(DirichletSolution {
                v: Vector2::new(v, 0.0),
                residual: trajectory.end_position().x.abs(),
                trajectory,
            });
        }
    }
    for cell in &scan.failed {
        diagnostics.push(format!(
            "cell [{}, {}] skipped: {}",
            cell.lo,
            cell.hi,
            cell.status.label()
        ));
    }
}

fn sort_and_dedup(solutions: &mut Vec<DirichletSolution>, distinct: f64) {
    solutions.sort_by(|a, b| {
        a.v.norm()
            .total_cmp(&b.v.norm())
            .then(a.v.x.total_cmp(&b.v.x))
    });
    let mut kept: Vec<DirichletSolution> = Vec::with_capacity(solutions.len());
    for sol in solutions.drain(..) {
        if kept.iter().all(|k| (k.v - sol.v).norm() > distinct) {
            kept.push(sol);
        }
    }
    *solutions = kept;
}

/// Every solution with `v_min <= |v| <= v_max` detectable on an `n_grid`-cell
/// scan of each sign.
pub fn solve_in_range(
    problem: &Problem,
    v_min: f64,
    v_max: f64,
    n_grid: usize,
    opts: &SolverOptions,
) -> Result<Enumeration, ShootingError> {
    let scan = find_brackets(problem, v_min, v_max, n_grid)?;
    let mut result = Enumeration {
        trivial: trivial_solution(problem, opts),
        ..Enumeration::default()
    };
    if scan.below_continuity {
        result.diagnostics.push(format!(
            "range starts at {v_min} <= ||m||_1 = {}: sign changes there may be jumps",
            problem.m_l1()
        ));
    }
    solve_brackets(
        problem,
        &scan,
        opts,
        &mut result.solutions,
        &mut result.diagnostics,
    );
    sort_and_dedup(&mut result.solutions, opts.distinct);
    Ok(result)
}

/// Up to `max_count` solutions with initial velocity on the ray
/// `{s * direction : s > 0}`, smallest speeds first.
///
/// The ray is cut into levels `s_0 < s_1 < ...` where each `s_{i+1}` is the
/// escalation of `s_i` by two impacts; every level is scanned for sign changes
/// and the brackets bisected.
pub fn enumerate_solutions(
    problem: &Problem,
    direction: f64,
    max_count: usize,
    opts: &SolverOptions,
) -> Result<Enumeration, ShootingError> {
    require_1d(problem)?;
    let sign = if direction < 0.0 { -1.0 } else { 1.0 };
    let horizon = problem.horizon();
    let diameter = problem.table.diameter();
    let mut result = Enumeration {
        trivial: trivial_solution(problem, opts),
        ..Enumeration::default()
    };
    if max_count == 0 {
        return Ok(result);
    }

    let s_start = 1e-3 * diameter / horizon;
    let mut lo = s_start;
    // first speed whose trajectory reaches the boundary
    let mut seed = s_start;
    for _ in 0..64 {
        let shot = shoot(problem, sign * seed);
        if shot.completed() && shot.impact_count > 0 {
            break;
        }
        seed *= 2.0;
    }

    for level in 0..opts.max_levels {
        let hi = if level == 0 && seed > lo {
            seed
        } else {
            match scaling_escalation(problem, Vector2::new(sign * lo, 0.0), 2, opts) {
                Ok(esc) => esc.velocity.x.abs(),
                Err(err) => {
                    result
                        .diagnostics
                        .push(format!("escalation from |v| = {lo} failed: {err}"));
                    break;
                }
            }
        };
        let by_decade = (opts.cells_per_decade as f64 * (hi / lo).log10()).ceil();
        let by_impacts = (8.0 * (hi - lo) * horizon / diameter).ceil();
        let cells = by_decade.max(by_impacts).max(16.0) as usize;
        let scan = if sign < 0.0 {
            scan_interval(problem, -hi, -lo, cells)
        } else {
            scan_interval(problem, lo, hi, cells)
        };
        solve_brackets(
            problem,
            &scan,
            opts,
            &mut result.solutions,
            &mut result.diagnostics,
        );
        sort_and_dedup(&mut result.solutions, opts.distinct);
        if result.solutions.len() >= max_count {
            result.solutions.truncate(max_count);
            return Ok(result);
        }
        lo = hi;
    }
    result.diagnostics.push(format!(
        "found {} of {max_count} requested solutions",
        result.solutions.len()
    ));
    Ok(result)
}

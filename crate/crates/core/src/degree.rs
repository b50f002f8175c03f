//! Planar machinery: attainable sets on speed shells, the winding number of
//! the shell map `theta -> V_T(d (cos theta, sin theta))`, degree sweeps over
//! `d`, uniform-motion solutions along normal rays, and a probe of how close
//! fast motion stays to uniform motion.
//!
//! A nonzero winding at speed `d` certifies a solution with `|v| < d`; a
//! change of winding between two speeds certifies one in the annulus between
//! them. An endpoint too close to the origin makes the winding undefined and
//! is itself a solution candidate.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{DynamicsError, ForceField};
use crate::geometry::{BilliardTable, TableKind, PROFILE_GRID};
use crate::integrator::{
    integrate_cauchy, IntegratorError, IntegratorOptions, Problem, TrajectoryStatus,
};
use crate::shooting::{endpoint_map, DirichletSolution};

/// Default relative distance below which the origin counts as hit.
pub const DEFAULT_DEGREE_TOL: f64 = 1e-6;

/// Mesh doublings allowed when the curve jumps by more than a quarter turn.
pub const MAX_DOUBLINGS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegreeError {
    #[error("operation needs a two-dimensional table, got dimension {0}")]
    NotTwoDimensional(usize),
    #[error("need at least 8 shell samples, got {0}")]
    TooFewSamples(usize),
    #[error("speed must be nonnegative and finite, got {0}")]
    BadSpeed(f64),
    #[error(
        "attainable curve passes within {min_dist:e} of the origin at d = {d}: winding undefined"
    )]
    OriginTooClose { d: f64, min_dist: f64 },
    #[error("angular mesh still too coarse after {MAX_DOUBLINGS} doublings at d = {0}")]
    MeshBudgetExceeded(f64),
    #[error("accumulated angle {turns} turns is not close to an integer at d = {d}")]
    NonIntegerWinding { d: f64, turns: f64 },
    #[error("no completed shell samples at d = {0}")]
    NoCompletedSamples(f64),
    #[error("reduction needs a two-dimensional ball")]
    NotABall,
    #[error("zero force: every line through the origin is invariant")]
    ZeroForce,
    #[error("normal-ray solutions exist only for f = 0")]
    NonZeroForce,
    #[error(transparent)]
    Field(#[from] DynamicsError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

/// One point of the attainable set `A_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttainableSample {
    pub theta: f64,
    pub d: f64,
    pub endpoint: Vector2<f64>,
    pub status: TrajectoryStatus,
}

fn require_2d(problem: &Problem) -> Result<(), DegreeError> {
    match problem.dim() {
        2 => Ok(()),
        d => Err(DegreeError::NotTwoDimensional(d)),
    }
}

fn shell_sample(problem: &Problem, d: f64, theta: f64) -> AttainableSample {
    let shot = endpoint_map(problem, d * Vector2::new(theta.cos(), theta.sin()));
    AttainableSample {
        theta,
        d,
        endpoint: shot.endpoint,
        status: shot.status,
    }
}

/// Shoots `n_samples` equally spaced directions on the shell `|v| = d`.
pub fn attainable_set(
    problem: &Problem,
    d: f64,
    n_samples: usize,
) -> Result<Vec<AttainableSample>, DegreeError> {
    require_2d(problem)?;
    if !(d.is_finite() && d >= 0.0) {
        return Err(DegreeError::BadSpeed(d));
    }
    if n_samples < 8 {
        return Err(DegreeError::TooFewSamples(n_samples));
    }
    Ok((0..n_samples)
        .into_par_iter()
        .map(|k| shell_sample(problem, d, TAU * k as f64 / n_samples as f64))
        .collect())
}

/// Winding of the closed shell curve around the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingResult {
    pub d: f64,
    pub winding: i64,
    pub min_dist_to_origin: f64,
    pub samples_used: usize,
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Signed angle swept by the closed polygon `points` around the origin, in turns.
pub fn turns_around_origin(points: &[Vector2<f64>]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (p, q) = (points[i], points[(i + 1) % n]);
            wrap_angle(q.y.atan2(q.x) - p.y.atan2(p.x))
        })
        .sum::<f64>()
        / TAU
}

/// Winding number of `theta -> endpoint` over the given samples (any cyclic
/// order). Where consecutive endpoints are more than a quarter turn apart the
/// shell is re-shot at the midpoint angle, up to [`MAX_DOUBLINGS`] times.
/// Failed samples are dropped.
pub fn winding_number(
    problem: &Problem,
    samples: &[AttainableSample],
) -> Result<WindingResult, DegreeError> {
    require_2d(problem)?;
    let d = samples.first().map_or(0.0, |s| s.d);
    let mut ring: Vec<AttainableSample> = samples
        .iter()
        .filter(|s| s.status.is_completed())
        .cloned()
        .collect();
    if ring.is_empty() {
        return Err(DegreeError::NoCompletedSamples(d));
    }
    let tol = DEFAULT_DEGREE_TOL * problem.table.diameter();

    for pass in 0..=MAX_DOUBLINGS {
        let min_dist = ring
            .iter()
            .map(|s| s.endpoint.norm())
            .fold(f64::INFINITY, f64::min);
        if min_dist <= tol {
            return Err(DegreeError::OriginTooClose { d, min_dist });
        }
        let n = ring.len();
        let coarse: Vec<usize> = (0..n)
            .filter(|&i| {
                let (p, q) = (ring[i].endpoint, ring[(i + 1) % n].endpoint);
                wrap_angle(q.y.atan2(q.x) - p.y.atan2(p.x)).abs() > 0.5 * PI
            })
            .collect();
        if coarse.is_empty() {
            let points: Vec<Vector2<f64>> = ring.iter().map(|s| s.endpoint).collect();
            let turns = turns_around_origin(&points);
            let winding = turns.round();
            if (turns - winding).abs() >= 0.05 {
                return Err(DegreeError::NonIntegerWinding { d, turns });
            }
            return Ok(WindingResult {
                d,
                winding: winding as i64,
                min_dist_to_origin: min_dist,
                samples_used: n,
            });
        }
        if pass == MAX_DOUBLINGS {
            break;
        }
        let mids: Vec<(usize, AttainableSample)> = coarse
            .par_iter()
            .map(|&i| {
                let (a, b) = (ring[i].theta, ring[(i + 1) % n].theta);
                let gap = (b - a).rem_euclid(TAU);
                let gap = if gap == 0.0 { TAU } else { gap };
                (i, shell_sample(problem, d, (a + 0.5 * gap).rem_euclid(TAU)))
            })
            .collect();
        // insert from the back so earlier indices stay valid
        for (i, sample) in mids.into_iter().rev() {
            if sample.status.is_completed() {
                ring.insert(i + 1, sample);
            }
        }
    }
    Err(DegreeError::MeshBudgetExceeded(d))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepFlag {
    /// Endpoint curve touches the origin: a solution candidate at this speed.
    OriginTooClose,
    /// Winding differs from the previous grid speed: a solution exists in
    /// the annulus between the two speeds.
    WindingChange { from: i64, to: i64 },
    /// Winding could not be computed for another reason.
    Failed(String),
}

impl SweepFlag {
    pub fn label(&self) -> String {
        match self {
            SweepFlag::OriginTooClose => "origin_too_close".into(),
            SweepFlag::WindingChange { .. } => "winding_change".into(),
            SweepFlag::Failed(reason) => format!("failed:{reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub d: f64,
    pub winding: Option<i64>,
    pub min_dist: f64,
    pub flags: Vec<SweepFlag>,
}

/// Winding at each speed of an increasing grid, with solution flags.
pub fn degree_sweep(
    problem: &Problem,
    d_grid: &[f64],
    n_samples: usize,
) -> Result<Vec<SweepEntry>, DegreeError> {
    require_2d(problem)?;
    if d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DegreeError::BadSpeed(f64::NAN));
    }
    let mut entries: Vec<SweepEntry> = Vec::with_capacity(d_grid.len());
    let mut previous: Option<i64> = None;
    for &d in d_grid {
        let samples = attainable_set(problem, d, n_samples)?;
        let min_sampled = samples
            .iter()
            .filter(|s| s.status.is_completed())
            .map(|s| s.endpoint.norm())
            .fold(f64::INFINITY, f64::min);
        let entry = match winding_number(problem, &samples) {
            Ok(w) => {
                let mut flags = Vec::new();
                if let Some(prev) = previous {
                    if prev != w.winding {
                        flags.push(SweepFlag::WindingChange {
                            from: prev,
                            to: w.winding,
                        });
                    }
                }
                previous = Some(w.winding);
                SweepEntry {
                    d,
                    winding: Some(w.winding),
                    min_dist: w.min_dist_to_origin,
                    flags,
                }
            }
            Err(DegreeError::OriginTooClose { min_dist, .. }) => SweepEntry {
                d,
                winding: None,
                min_dist,
                flags: vec![SweepFlag::OriginTooClose],
            },
            Err(err) => SweepEntry {
                d,
                winding: None,
                min_dist: min_sampled,
                flags: vec![SweepFlag::Failed(err.to_string())],
            },
        };
        entries.push(entry);
    }
    Ok(entries)
}

/// A constant-force ball problem restricted to the invariant line through
/// the origin along the force.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub line: Problem,
    pub plane: Problem,
    /// Unit vector `a / |a|`.
    pub direction: Vector2<f64>,
}

impl ReducedProblem {
    pub fn embed_velocity(&self, s: f64) -> Vector2<f64> {
        s * self.direction
    }

    /// Re-integrates a one-dimensional solution in the plane.
    pub fn lift(&self, solution: &DirichletSolution) -> Result<DirichletSolution, DegreeError> {
        let v = self.embed_velocity(solution.v.x);
        let trajectory = integrate_cauchy(&self.plane, Vector2::zeros(), v)?;
        Ok(DirichletSolution {
            v,
            residual: trajectory.end_position().norm(),
            trajectory,
        })
    }
}

/// With `f = a` constant on a disc, the line `a2 x - a1 y = 0` is invariant,
/// so the problem reduces to `s'' = |a|` on `[-r, r]`.
pub fn reduce_constant_force(
    table: &BilliardTable,
    a: Vector2<f64>,
    horizon: f64,
    options: IntegratorOptions,
) -> Result<ReducedProblem, DegreeError> {
    let r = match table.kind() {
        TableKind::Ball { r, dim: 2 } => *r,
        _ => return Err(DegreeError::NotABall),
    };
    let norm = a.norm();
    if norm == 0.0 {
        return Err(DegreeError::ZeroForce);
    }
    let line_table = BilliardTable::interval(r).map_err(|_| DegreeError::NotABall)?;
    let line_field = ForceField::constant(&[norm], horizon)?;
    let plane_field = ForceField::constant(&[a.x, a.y], horizon)?;
    Ok(ReducedProblem {
        line: Problem::with_options(line_table, line_field, options)?,
        plane: Problem::with_options(table.clone(), plane_field, options)?,
        direction: a / norm,
    })
}

/// Straight-line solutions of the force-free problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRays {
    pub solutions: Vec<DirichletSolution>,
    /// Set for discs, where every direction works; one representative is returned.
    pub continuum: bool,
    /// Critical angles whose candidate failed verification.
    pub rejected: Vec<(f64, String)>,
}

/// Residual accepted for a normal-ray candidate.
pub const NORMAL_RAY_TOL: f64 = 1e-8;

/// For `f = 0`, the ray from the origin to a boundary point `z` is
/// perpendicular to `∂K` exactly where the radial profile is critical; then
/// `x(t) = v t` with `v = 2 z / T` bounces once at `T / 2` and returns.
pub fn normal_ray_solutions(problem: &Problem) -> Result<NormalRays, DegreeError> {
    require_2d(problem)?;
    if !problem.field.is_zero() {
        return Err(DegreeError::NonZeroForce);
    }
    let horizon = problem.horizon();
    let angles = match problem.table.kind() {
        TableKind::Ball { .. } => None,
        TableKind::StarShaped2D { profile } => {
            let grid: Vec<f64> = (0..PROFILE_GRID)
                .map(|j| profile.derivative(TAU * j as f64 / PROFILE_GRID as f64))
                .collect();
            let scale = (0..PROFILE_GRID)
                .map(|j| profile.radius(TAU * j as f64 / PROFILE_GRID as f64))
                .fold(0.0, f64::max);
            if grid.iter().all(|g| g.abs() <= 1e-12 * scale) {
                None
            } else {
                Some(critical_angles(|t| profile.derivative(t), &grid))
            }
        }
        TableKind::Interval { .. } => unreachable!("checked two-dimensional"),
    };
    let (angles, continuum) = match angles {
        Some(a) => (a, false),
        None => (vec![0.0], true),
    };

    let mut out = NormalRays {
        solutions: Vec::new(),
        continuum,
        rejected: Vec::new(),
    };
    for theta in angles {
        let z = problem.table.boundary_point(theta);
        let v = (2.0 / horizon) * z;
        let trajectory = integrate_cauchy(problem, Vector2::zeros(), v)?;
        let residual = trajectory.end_position().norm();
        let ok = trajectory.status.is_completed()
            && trajectory.impacts.len() == 1
            && residual <= NORMAL_RAY_TOL;
        if ok {
            out.solutions.push(DirichletSolution {
                v,
                trajectory,
                residual,
            });
        } else {
            out.rejected.push((
                theta,
                format!(
                    "status {}, {} impacts, residual {residual:e}",
                    trajectory.status.label(),
                    trajectory.impacts.len()
                ),
            ));
        }
    }
    Ok(out)
}

/// Zeros of a periodic function sampled on a uniform grid of `[0, 2pi)`,
/// refined by bisection to 1e-10.
fn critical_angles<F: Fn(f64) -> f64>(g: F, grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let step = TAU / n as f64;
    let mut roots: Vec<f64> = Vec::new();
    for j in 0..n {
        let (a, b) = (grid[j], grid[(j + 1) % n]);
        let theta = j as f64 * step;
        if a == 0.0 {
            roots.push(theta);
        } else if a * b < 0.0 {
            let (mut lo, mut hi) = (theta, theta + step);
            let mut g_lo = a;
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let g_mid = g(mid);
                if g_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (g_mid < 0.0) == (g_lo < 0.0) {
                    lo = mid;
                    g_lo = g_mid;
                } else {
                    hi = mid;
                }
            }
            roots.push((0.5 * (lo + hi)).rem_euclid(TAU));
        }
    }
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        let dup = merged.iter().any(|&m| {
            let gap = (r - m).rem_euclid(TAU);
            gap.min(TAU - gap) < 1e-6
        });
        if !dup {
            merged.push(r);
        }
    }
    merged
}

/// Deviation of one shot from uniform and from force-free motion.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionDeviation {
    pub theta: f64,
    pub first_impact: Option<f64>,
    /// `sup |x(t) - v t|` over `[0, t1]`.
    pub until_first_impact: f64,
    /// `sup |x(t) - y(t)|` over `[0, T]`, `y` the force-free billiard motion.
    pub full_horizon: f64,
    pub status: TrajectoryStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub d: f64,
    pub directions: Vec<DirectionDeviation>,
    pub max_until_first_impact: f64,
    pub max_full_horizon: f64,
}

/// Time samples per regime.
pub const DEVIATION_SAMPLES: usize = 1000;

/// Compares motion at speed `d` in `n_dirs` directions with uniform motion
/// (up to the first impact) and with the force-free billiard flow (over the
/// whole horizon).
pub fn uniform_deviation(
    problem: &Problem,
    d: f64,
    n_dirs: usize,
) -> Result<DeviationReport, DegreeError> {
    if !(d.is_finite() && d > 0.0) {
        return Err(DegreeError::BadSpeed(d));
    }
    let free_field = ForceField::zero(problem.dim(), problem.horizon())?;
    let free = Problem::with_options(problem.table.clone(), free_field, problem.options)?;
    let n_dirs = if problem.dim() == 1 { 2 } else { n_dirs.max(1) };

    let directions: Vec<DirectionDeviation> = (0..n_dirs)
        .into_par_iter()
        .map(|k| -> Result<DirectionDeviation, DegreeError> {
            let theta = TAU * k as f64 / n_dirs as f64;
            let v = if problem.dim() == 1 {
                Vector2::new(if k == 0 { d } else { -d }, 0.0)
            } else {
                d * Vector2::new(theta.cos(), theta.sin())
            };
            let forced = integrate_cauchy(problem, Vector2::zeros(), v)?;
            let flow = integrate_cauchy(&free, Vector2::zeros(), v)?;
            let first = forced.impacts.first().map(|i| i.t);
            let t1 = first.unwrap_or(forced.end_time());
            let until_first_impact = (0..=DEVIATION_SAMPLES)
                .filter_map(|j| {
                    let t = t1 * j as f64 / DEVIATION_SAMPLES as f64;
                    forced.state_at(t).map(|(x, _)| (x - v * t).norm())
                })
                .fold(0.0, f64::max);
            let t_end = forced.end_time().min(flow.end_time());
            let full_horizon = (0..=DEVIATION_SAMPLES)
                .filter_map(|j| {
                    let t = t_end * j as f64 / DEVIATION_SAMPLES as f64;
                    let (x, _) = forced.state_at(t)?;
                    let (y, _) = flow.state_at(t)?;
                    Some((x - y).norm())
                })
                .fold(0.0, f64::max);
            let status = if flow.status.is_completed() {
                forced.status
            } else {
                flow.status
            };
            Ok(DirectionDeviation {
                theta,
                first_impact: first,
                until_first_impact,
                full_horizon,
                status,
            })
        })
        .collect::<Result<_, _>>()?;
    let max_until_first_impact = directions
        .iter()
        .map(|r| r.until_first_impact)
        .fold(0.0, f64::max);
    let max_full_horizon = directions
        .iter()
        .map(|r| r.full_horizon)
        .fold(0.0, f64::max);
    Ok(DeviationReport {
        d,
        directions,
        max_until_first_impact,
        max_full_horizon,
    })
}

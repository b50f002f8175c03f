//! Impulsive Cauchy problem `x'' = f(t, x)` with elastic reflection on `∂K`.
//!
//! Smooth arcs are integrated with the Dormand-Prince 5(4) pair. Every
//! accepted step is scanned for an exit from `K` by sampling the continuous
//! extension; the exit time is then refined by bisection, re-taking a
//! single Runge-Kutta step from the start of the step to each trial time, so
//! the localized impact carries the full fifth-order accuracy of the scheme.
//! The position is snapped radially onto `∂K` and the velocity reflected.

use nalgebra::{Vector2, Vector4};
use thiserror::Error;

use crate::dynamics::{ForceField, ImpactLaw};
use crate::geometry::BilliardTable;

/// State `(x1, x2, v1, v2)`.
pub type State = Vector4<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("table is {table}-dimensional but the force field is {field}-dimensional")]
    DimensionMismatch { table: usize, field: usize },
    #[error("initial point must lie in the interior of the table (signed distance {0:e})")]
    StartNotInterior(f64),
    #[error("start time {0} is outside [0, T)")]
    BadStartTime(f64),
    #[error("no impact before the horizon")]
    NoImpactBeforeT,
    #[error("grazing contact with the boundary at t = {0}")]
    GrazingAborted(f64),
    #[error("impact budget exceeded at t = {0}")]
    ImpactBudgetExceeded(f64),
    #[error("step size control failed at t = {0}")]
    StepFailure(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_impacts: usize,
    pub max_steps: usize,
    /// Dense-output samples per step used to detect boundary crossings.
    pub event_samples: usize,
    /// Two impacts closer than this are treated as a grazing double contact.
    pub min_impact_separation: f64,
    pub law: ImpactLaw,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            max_impacts: 10_000,
            max_steps: 2_000_000,
            event_samples: 8,
            min_impact_separation: 1e-12,
            law: ImpactLaw::default(),
        }
    }
}

/// A table, a force field and integration settings.
#[derive(Debug, Clone)]
pub struct Problem {
    pub table: BilliardTable,
    pub field: ForceField,
    pub options: IntegratorOptions,
}

impl Problem {
    pub fn new(table: BilliardTable, field: ForceField) -> Result<Self, IntegratorError> {
        Self::with_options(table, field, IntegratorOptions::default())
    }

    pub fn with_options(
        table: BilliardTable,
        field: ForceField,
        options: IntegratorOptions,
    ) -> Result<Self, IntegratorError> {
        if table.dim() != field.dim() {
            return Err(IntegratorError::DimensionMismatch {
                table: table.dim(),
                field: field.dim(),
            });
        }
        Ok(Self {
            table,
            field,
            options,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.field.horizon()
    }

    pub fn m_l1(&self) -> f64 {
        self.field.m_l1(&self.table)
    }

    fn deriv(&self, t: f64, y: &State) -> State {
        let a = self.field.eval(t, &Vector2::new(y[0], y[1]));
        Vector4::new(y[2], y[3], a.x, a.y)
    }
}

// Dormand-Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [State; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> State {
        if self.h == 0.0 {
            return self.coeffs[0];
        }
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)))
    }
}

struct StepOutput {
    y: State,
    k_end: State,
    err: f64,
    dense: DenseStep,
}

fn rk_step(problem: &Problem, t: f64, y: &State, k1: &State, h: f64) -> StepOutput {
    let k2 = problem.deriv(t + C2 * h, &(y + h * A21 * k1));
    let k3 = problem.deriv(t + C3 * h, &(y + h * (A31 * k1 + A32 * k2)));
    let k4 = problem.deriv(t + C4 * h, &(y + h * (A41 * k1 + A42 * k2 + A43 * k3)));
    let k5 = problem.deriv(
        t + C5 * h,
        &(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)),
    );
    let k6 = problem.deriv(
        t + h,
        &(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
    );
    let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
    let k7 = problem.deriv(t + h, &y_new);

    let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    let opts = &problem.options;
    let active: &[usize] = if problem.dim() == 1 {
        &[0, 2]
    } else {
        &[0, 1, 2, 3]
    };
    let err = (active
        .iter()
        .map(|&i| {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            (err_vec[i] / sc).powi(2)
        })
        .sum::<f64>()
        / active.len() as f64)
        .sqrt();

    let ydiff = y_new - y;
    let bspl = h * k1 - ydiff;
    let dense = DenseStep {
        t0: t,
        h,
        coeffs: [
            *y,
            ydiff,
            bspl,
            ydiff - h * k7 - bspl,
            h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
        ],
    };
    StepOutput {
        y: y_new,
        k_end: k7,
        err,
        dense,
    }
}

/// Boundary contact: time, contact point, velocities before and after.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRecord {
    pub t: f64,
    pub point: Vector2<f64>,
    pub v_in: Vector2<f64>,
    pub v_out: Vector2<f64>,
    /// `+1` at `x = a`, `-1` at `x = -a` for one-dimensional tables, `0` otherwise.
    pub side: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    GrazingAborted(f64),
    ImpactBudgetExceeded(f64),
    StepFailure(f64),
}

impl TrajectoryStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TrajectoryStatus::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryStatus::Completed => "completed",
            TrajectoryStatus::GrazingAborted(_) => "grazing",
            TrajectoryStatus::ImpactBudgetExceeded(_) => "impact_budget",
            TrajectoryStatus::StepFailure(_) => "step_failure",
        }
    }

    pub fn into_error(self) -> Option<IntegratorError> {
        match self {
            TrajectoryStatus::Completed => None,
            TrajectoryStatus::GrazingAborted(t) => Some(IntegratorError::GrazingAborted(t)),
            TrajectoryStatus::ImpactBudgetExceeded(t) => {
                Some(IntegratorError::ImpactBudgetExceeded(t))
            }
            TrajectoryStatus::StepFailure(t) => Some(IntegratorError::StepFailure(t)),
        }
    }
}

/// Smooth arc between two impacts (or the ends of the time interval).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: Vec<DenseStep>,
}

impl Segment {
    pub fn state_at(&self, t: f64) -> State {
        let idx = self
            .steps
            .partition_point(|s| s.t1() < t)
            .min(self.steps.len().saturating_sub(1));
        match self.steps.get(idx) {
            Some(step) => step.eval(t),
            None => Vector4::zeros(),
        }
    }

    pub fn start_state(&self) -> State {
        self.steps
            .first()
            .map(|s| s.eval(s.t0))
            .unwrap_or_else(Vector4::zeros)
    }

    pub fn end_state(&self) -> State {
        self.steps
            .last()
            .map(|s| s.eval(s.t1()))
            .unwrap_or_else(Vector4::zeros)
    }
}

/// Piecewise smooth solution with its impacts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub segments: Vec<Segment>,
    pub impacts: Vec<ImpactRecord>,
    pub status: TrajectoryStatus,
    end_time: f64,
    end_state: State,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn end_position(&self) -> Vector2<f64> {
        Vector2::new(self.end_state[0], self.end_state[1])
    }

    pub fn end_velocity(&self) -> Vector2<f64> {
        Vector2::new(self.end_state[2], self.end_state[3])
    }

    pub fn start_time(&self) -> f64 {
        self.segments.first().map_or(self.end_time, |s| s.t_start)
    }

    pub fn impact_times(&self) -> Vec<f64> {
        self.impacts.iter().map(|i| i.t).collect()
    }

    /// Position and velocity at `t`; at an impact time the pre-impact
    /// velocity is returned.
    pub fn state_at(&self, t: f64) -> Option<(Vector2<f64>, Vector2<f64>)> {
        if t < self.start_time() || t > self.end_time {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|s| s.t_end < t)
            .min(self.segments.len().checked_sub(1)?);
        let y = self.segments[idx].state_at(t);
        Some((Vector2::new(y[0], y[1]), Vector2::new(y[2], y[3])))
    }

    /// `n + 1` equally spaced samples `(t, x, v)` over the integrated interval.
    pub fn sample(&self, n: usize) -> Vec<(f64, Vector2<f64>, Vector2<f64>)> {
        let t0 = self.start_time();
        let n = n.max(1);
        (0..=n)
            .filter_map(|k| {
                let t = t0 + (self.end_time - t0) * k as f64 / n as f64;
                self.state_at(t).map(|(x, v)| (t, x, v))
            })
            .collect()
    }
}

/// First boundary contact of the free arc started at `t_from`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstImpact {
    pub t: f64,
    pub point: Vector2<f64>,
    pub v_in: Vector2<f64>,
}

/// Integrates from `x0` with velocity `v` at `t = 0` up to the horizon.
pub fn integrate_cauchy(
    problem: &Problem,
    x0: Vector2<f64>,
    v: Vector2<f64>,
) -> Result<Trajectory, IntegratorError> {
    integrate_from(problem, x0, v, 0.0, None)
}

/// Earliest boundary contact after `t_from` for the motion started at
/// `(x0, v)` at time `t_from`.
pub fn first_impact(
    problem: &Problem,
    x0: Vector2<f64>,
    v: Vector2<f64>,
    t_from: f64,
) -> Result<FirstImpact, IntegratorError> {
    let traj = integrate_from(problem, x0, v, t_from, Some(1))?;
    if let Some(impact) = traj.impacts.first() {
        return Ok(FirstImpact {
            t: impact.t,
            point: impact.point,
            v_in: impact.v_in,
        });
    }
    match traj.status.into_error() {
        Some(err) => Err(err),
        None => Err(IntegratorError::NoImpactBeforeT),
    }
}

/// General driver: integrates from `(x0, v)` at `t_from`; stops at the horizon
/// or after `stop_after` impacts.
pub fn integrate_from(
    problem: &Problem,
    x0: Vector2<f64>,
    v: Vector2<f64>,
    t_from: f64,
    stop_after: Option<usize>,
) -> Result<Trajectory, IntegratorError> {
    let horizon = problem.horizon();
    if !(0.0..horizon).contains(&t_from) {
        return Err(IntegratorError::BadStartTime(t_from));
    }
    let (x0, v) = if problem.dim() == 1 {
        (Vector2::new(x0.x, 0.0), Vector2::new(v.x, 0.0))
    } else {
        (x0, v)
    };
    let sd0 = problem.table.signed_distance(&x0);
    if sd0 >= 0.0 {
        return Err(IntegratorError::StartNotInterior(sd0));
    }
    Ok(Driver::new(problem, x0, v, t_from).run(stop_after))
}

struct Driver<'a> {
    problem: &'a Problem,
    t: f64,
    y: State,
    k1: State,
    h: f64,
    segments: Vec<Segment>,
    current: Segment,
    impacts: Vec<ImpactRecord>,
}

impl<'a> Driver<'a> {
    fn new(problem: &'a Problem, x0: Vector2<f64>, v: Vector2<f64>, t0: f64) -> Self {
        let y = Vector4::new(x0.x, x0.y, v.x, v.y);
        let k1 = problem.deriv(t0, &y);
        let remaining = problem.horizon() - t0;
        let mut driver = Self {
            problem,
            t: t0,
            y,
            k1,
            h: 0.0,
            segments: Vec::new(),
            current: Segment {
                t_start: t0,
                t_end: t0,
                steps: Vec::new(),
            },
            impacts: Vec::new(),
        };
        driver.h = driver.max_step().min(0.05 * remaining);
        driver
    }

    /// Caps the step so the chord of one step stays short against the table.
    fn max_step(&self) -> f64 {
        let speed = Vector2::new(self.y[2], self.y[3]).norm();
        let remaining = self.problem.horizon() - self.t;
        if speed > 0.0 {
            remaining.min(0.25 * self.problem.table.diameter() / speed)
        } else {
            remaining
        }
    }

    fn sd(&self, y: &State) -> f64 {
        self.problem
            .table
            .signed_distance(&Vector2::new(y[0], y[1]))
    }

    fn run(mut self, stop_after: Option<usize>) -> Trajectory {
        let horizon = self.problem.horizon();
        let opts = self.problem.options;
        let mut steps_taken = 0usize;
        let status = loop {
            let remaining = horizon - self.t;
            if remaining <= 4.0 * f64::EPSILON * horizon {
                break TrajectoryStatus::Completed;
            }
            steps_taken += 1;
            if steps_taken > opts.max_steps {
                break TrajectoryStatus::StepFailure(self.t);
            }
            let mut h = self.h.min(self.max_step());
            // avoid leaving a sliver before the horizon
            if h > 0.5 * remaining && h < remaining {
                h = if h > 0.9 * remaining {
                    remaining
                } else {
                    0.5 * remaining
                };
            }
            if h <= 1e-14 * horizon.max(self.t.abs()) && h < remaining {
                break TrajectoryStatus::StepFailure(self.t);
            }
            let step = rk_step(self.problem, self.t, &self.y, &self.k1, h);
            if !step.err.is_finite() {
                self.h = 0.2 * h;
                continue;
            }
            if step.err > 1.0 {
                self.h = h * (0.9 * step.err.powf(-0.2)).max(0.2);
                continue;
            }
            let growth = if step.err == 0.0 {
                5.0
            } else {
                (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0)
            };

            match self.locate_exit(&step.dense, h) {
                Some(t_hit) => {
                    if let Err(status) = self.impact(t_hit) {
                        break status;
                    }
                    if self.impacts.len() > opts.max_impacts {
                        break TrajectoryStatus::ImpactBudgetExceeded(self.t);
                    }
                    if stop_after.is_some_and(|n| self.impacts.len() >= n) {
                        break TrajectoryStatus::Completed;
                    }
                    self.h = h;
                }
                None => {
                    self.current.steps.push(step.dense);
                    self.t = if h == remaining { horizon } else { self.t + h };
                    self.y = step.y;
                    self.k1 = step.k_end;
                    self.h = h * growth;
                }
            }
        };
        self.current.t_end = self.t;
        self.segments.push(self.current);
        Trajectory {
            dim: self.problem.dim(),
            segments: self.segments,
            impacts: self.impacts,
            status,
            end_time: self.t,
            end_state: self.y,
        }
    }

    /// Finds the earliest time in the step at which the trajectory leaves `K`.
    fn locate_exit(&self, dense: &DenseStep, h: f64) -> Option<f64> {
        let n = self.problem.options.event_samples.max(1);
        let mut lo = self.t;
        for j in 1..=n {
            let hi = if j == n {
                self.t + h
            } else {
                self.t + h * j as f64 / n as f64
            };
            if self.sd(&dense.eval(hi)) > 0.0 {
                if let Some(t_hit) = self.bisect_exit(lo, hi) {
                    return Some(t_hit);
                }
            }
            lo = hi;
        }
        None
    }

    /// Bisection on the sign of the signed distance, evaluated on a fresh
    /// Runge-Kutta step from the current state to each trial time. Returns
    /// `None` if the re-taken step does not confirm the exit.
    fn bisect_exit(&self, mut lo: f64, mut hi: f64) -> Option<f64> {
        let g = |tau: f64| {
            if tau == self.t {
                return self.sd(&self.y);
            }
            let out = rk_step(self.problem, self.t, &self.y, &self.k1, tau - self.t);
            self.sd(&out.y)
        };
        if g(hi) <= 0.0 {
            return None;
        }
        if g(lo) > 0.0 {
            // only possible right after a reflection pointing outward
            return Some(lo);
        }
        let tol = 1e-13 * self.problem.horizon().max(1.0);
        for _ in 0..60 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Advances to `t_hit`, snaps onto the boundary and reflects.
    fn impact(&mut self, t_hit: f64) -> Result<(), TrajectoryStatus> {
        let opts = self.problem.options;
        let table = &self.problem.table;
        let last = self.impacts.last().map_or(self.current.t_start, |i| i.t);
        if !self.impacts.is_empty() && t_hit - last < opts.min_impact_separation {
            return Err(TrajectoryStatus::GrazingAborted(t_hit));
        }
        let dt = t_hit - self.t;
        let y_hit = if dt > 0.0 {
            let out = rk_step(self.problem, self.t, &self.y, &self.k1, dt);
            self.current.steps.push(out.dense);
            out.y
        } else {
            self.y
        };
        self.t = t_hit;
        let point = table.project_to_boundary(&Vector2::new(y_hit[0], y_hit[1]));
        let v_in = Vector2::new(y_hit[2], y_hit[3]);
        let normal = table.normal_unchecked(&point);
        self.y = Vector4::new(point.x, point.y, v_in.x, v_in.y);

        let v_out = opts
            .law
            .apply(&normal, &v_in)
            .map_err(|_| TrajectoryStatus::GrazingAborted(t_hit))?;

        let mut closed = std::mem::replace(
            &mut self.current,
            Segment {
                t_start: t_hit,
                t_end: t_hit,
                steps: Vec::new(),
            },
        );
        closed.t_end = t_hit;
        self.segments.push(closed);

        let side = if self.problem.dim() == 1 {
            if point.x > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        };
        self.impacts.push(ImpactRecord {
            t: t_hit,
            point,
            v_in,
            v_out,
            side,
        });
        self.y = Vector4::new(point.x, point.y, v_out.x, v_out.y);
        self.k1 = self.problem.deriv(t_hit, &self.y);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Monomial;
    use approx::assert_abs_diff_eq;

    fn v1(x: f64) -> Vector2<f64> {
        Vector2::new(x, 0.0)
    }

    fn ex21() -> Problem {
        Problem::new(
            BilliardTable::interval(0.125).unwrap(),
            ForceField::constant(&[2.0], 1.0).unwrap(),
        )
        .unwrap()
    }

    fn ex22() -> Problem {
        Problem::new(
            BilliardTable::interval(0.375).unwrap(),
            ForceField::polynomial(vec![Monomial::new(0, 1, &[0], 6.0)], 1, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        // x'' = -x inside a table large enough to never be hit
        let problem = Problem::new(
            BilliardTable::interval(10.0).unwrap(),
            ForceField::polynomial(vec![Monomial::new(0, 0, &[1], -1.0)], 1, 3.0).unwrap(),
        )
        .unwrap();
        let traj = integrate_cauchy(&problem, v1(1.0), v1(0.5)).unwrap();
        assert!(traj.impacts.is_empty());
        for (t, x, v) in traj.sample(200) {
            assert_abs_diff_eq!(x.x, t.cos() + 0.5 * t.sin(), epsilon = 1e-8);
            assert_abs_diff_eq!(v.x, -t.sin() + 0.5 * t.cos(), epsilon = 1e-8);
        }
        assert_abs_diff_eq!(
            traj.end_position().x,
            3f64.cos() + 0.5 * 3f64.sin(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn example_22_single_bounce() {
        let traj = integrate_cauchy(&ex22(), Vector2::zeros(), v1(-1.0)).unwrap();
        assert!(traj.status.is_completed());
        assert_eq!(traj.impacts.len(), 1);
        let hit = &traj.impacts[0];
        assert_abs_diff_eq!(hit.t, 0.5, epsilon = 1e-9);
        assert_eq!(hit.point.x, -0.375);
        assert_eq!(hit.side, -1);
        assert_abs_diff_eq!(traj.end_position().x, 0.25, epsilon = 1e-8);
        // closed form after the bounce: t^3 - t/2 - 1/4
        for (t, x, _) in traj.sample(50) {
            let exact = if t <= 0.5 {
                t.powi(3) - t
            } else {
                t.powi(3) - 0.5 * t - 0.25
            };
            assert_abs_diff_eq!(x.x, exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn example_22_upper_barrier_at_rest_start() {
        let hit = first_impact(&ex22(), Vector2::zeros(), v1(0.0), 0.0).unwrap();
        assert_abs_diff_eq!(hit.t, 0.375f64.cbrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(hit.t, 0.7211, epsilon = 1e-4);
        assert_eq!(hit.point.x, 0.375);
    }

    #[test]
    fn example_21_first_impacts() {
        let hit = first_impact(&ex21(), Vector2::zeros(), v1(-0.8568), 0.0).unwrap();
        assert_abs_diff_eq!(hit.t, 0.186475, epsilon = 1e-5);
        // quadratic oracle: t^2 - 1.76579 t + 1/8 = 0, smaller root
        let b: f64 = 1.76579;
        let oracle = (b - (b * b - 0.5).sqrt()) / 2.0;
        let hit = first_impact(&ex21(), Vector2::zeros(), v1(-b), 0.0).unwrap();
        assert_abs_diff_eq!(hit.t, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.t, 0.0739, epsilon = 1e-4);
        assert_eq!(hit.point.x, -0.125);
    }

    #[test]
    fn example_21_three_bounce_solution() {
        let traj = integrate_cauchy(&ex21(), Vector2::zeros(), v1(-0.8568)).unwrap();
        let times = traj.impact_times();
        assert_eq!(times.len(), 3);
        for (got, want) in times.iter().zip([0.186475, 0.5, 0.813525]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-3);
        }
        assert!(traj.end_position().x.abs() < 1e-4);
    }

    #[test]
    fn ball_free_flight_first_impact() {
        let problem = Problem::new(
            BilliardTable::ball(1.0, 2).unwrap(),
            ForceField::zero(2, 1.0).unwrap(),
        )
        .unwrap();
        let hit = first_impact(&problem, Vector2::zeros(), Vector2::new(2.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(hit.t, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.point.x, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rest_state_stays_at_origin() {
        for table in [
            BilliardTable::interval(0.2).unwrap(),
            BilliardTable::ball(1.0, 2).unwrap(),
        ] {
            let problem =
                Problem::new(table.clone(), ForceField::zero(table.dim(), 1.0).unwrap()).unwrap();
            let traj = integrate_cauchy(&problem, Vector2::zeros(), Vector2::zeros()).unwrap();
            assert!(traj.impacts.is_empty());
            assert_eq!(traj.end_position(), Vector2::zeros());
            assert_eq!(
                first_impact(&problem, Vector2::zeros(), Vector2::zeros(), 0.0),
                Err(IntegratorError::NoImpactBeforeT)
            );
        }
    }

    #[test]
    fn rejects_bad_starts() {
        let problem = ex21();
        assert!(matches!(
            integrate_cauchy(&problem, v1(0.125), v1(1.0)),
            Err(IntegratorError::StartNotInterior(_))
        ));
        assert!(matches!(
            integrate_from(&problem, Vector2::zeros(), v1(1.0), 1.5, None),
            Err(IntegratorError::BadStartTime(_))
        ));
        let mismatch = Problem::new(
            BilliardTable::interval(1.0).unwrap(),
            ForceField::zero(2, 1.0).unwrap(),
        );
        assert!(matches!(
            mismatch,
            Err(IntegratorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn impact_budget_is_enforced() {
        let mut problem = Problem::new(
            BilliardTable::interval(0.01).unwrap(),
            ForceField::zero(1, 1.0).unwrap(),
        )
        .unwrap();
        problem.options.max_impacts = 10;
        let traj = integrate_cauchy(&problem, Vector2::zeros(), v1(10.0)).unwrap();
        assert!(matches!(
            traj.status,
            TrajectoryStatus::ImpactBudgetExceeded(_)
        ));
    }

    #[test]
    fn trajectory_invariants_in_ball() {
        let problem = Problem::new(
            BilliardTable::ball(1.0, 2).unwrap(),
            ForceField::constant(&[0.3, -0.2], 2.0).unwrap(),
        )
        .unwrap();
        let traj =
            integrate_cauchy(&problem, Vector2::new(0.1, 0.2), Vector2::new(3.0, 1.3)).unwrap();
        assert!(traj.status.is_completed());
        assert_eq!(traj.impacts.len(), 3);
        let tol = problem.table.boundary_tolerance();
        for w in traj.segments.windows(2) {
            let (a, b) = (w[0].end_state(), w[1].start_state());
            assert!((Vector2::new(a[0] - b[0], a[1] - b[1])).norm() <= 1e-9);
        }
        for w in traj.impacts.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        for hit in &traj.impacts {
            let n = problem.table.outer_normal(&hit.point).unwrap();
            let expected = hit.v_in - 2.0 * hit.v_in.dot(&n) * n;
            assert!((hit.v_out - expected).norm() <= 1e-9);
            assert!((hit.v_in.norm() - hit.v_out.norm()).abs() <= 1e-9);
        }
        for (_, x, _) in traj.sample(2000) {
            assert!(problem.table.signed_distance(&x) <= tol);
        }
    }
}

//! Billiard tables: compact regions containing the origin whose boundary
//! reflects trajectories.
//!
//! Three shapes are supported: a symmetric interval `[-a, a]`, a ball of
//! radius `r` in one or two dimensions, and a planar star-shaped region
//! described by a radial profile `theta -> rho(theta)`.
//!
//! Points are always [`Vector2`]; one-dimensional tables only look at the
//! first coordinate and keep the second one at zero.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;
use thiserror::Error;

/// Grid used for profile validation and for the diameter bound.
pub const PROFILE_GRID: usize = 4096;

/// Step of the central difference used when a profile has no analytic derivative.
pub const PROFILE_FD_STEP: f64 = 1e-6;

/// Default boundary tolerance, relative to the table diameter.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {point:?} is not on the boundary (signed distance {distance:e})")]
    NotOnBoundary { point: [f64; 2], distance: f64 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
}

/// Trigonometric polynomial `c0 + sum_k (a_k cos k theta + b_k sin k theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub constant: f64,
    /// `(harmonic, cosine coefficient, sine coefficient)` triples.
    pub harmonics: Vec<(u32, f64, f64)>,
}

impl TrigPolynomial {
    pub fn new(constant: f64, harmonics: Vec<(u32, f64, f64)>) -> Self {
        Self {
            constant,
            harmonics,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.harmonics
            .iter()
            .fold(self.constant, |acc, &(k, a, b)| {
                let kt = f64::from(k) * theta;
                acc + a * kt.cos() + b * kt.sin()
            })
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        self.harmonics.iter().fold(0.0, |acc, &(k, a, b)| {
            let kf = f64::from(k);
            let kt = kf * theta;
            acc + kf * (b * kt.cos() - a * kt.sin())
        })
    }
}

/// Radial profile of a star-shaped table.
#[derive(Clone)]
pub enum RadialProfile {
    /// Analytic derivative available.
    Trig(TrigPolynomial),
    /// Arbitrary 2π-periodic function; the derivative is a central difference.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Trig(p) => f.debug_tuple("Trig").field(p).finish(),
            RadialProfile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl RadialProfile {
    pub fn custom<F>(rho: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        RadialProfile::Custom(Arc::new(rho))
    }

    pub fn radius(&self, theta: f64) -> f64 {
        match self {
            RadialProfile::Trig(p) => p.eval(theta),
            RadialProfile::Custom(rho) => rho(theta),
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match self {
            RadialProfile::Trig(p) => p.derivative(theta),
            RadialProfile::Custom(rho) => {
                (rho(theta + PROFILE_FD_STEP) - rho(theta - PROFILE_FD_STEP))
                    / (2.0 * PROFILE_FD_STEP)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum TableKind {
    Interval { a: f64 },
    Ball { r: f64, dim: usize },
    StarShaped2D { profile: RadialProfile },
}

/// A billiard table `K`, centred at the origin.
#[derive(Debug, Clone)]
pub struct BilliardTable {
    kind: TableKind,
    diameter: f64,
    boundary_tol: f64,
}

impl BilliardTable {
    pub fn interval(a: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(GeometryError::InvalidTable(format!(
                "interval half-width must be positive, got {a}"
            )));
        }
        Ok(Self::with_kind(TableKind::Interval { a }, 2.0 * a))
    }

    pub fn ball(r: f64, dim: usize) -> Result<Self, GeometryError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(GeometryError::InvalidTable(format!(
                "ball radius must be positive, got {r}"
            )));
        }
        if !(1..=2).contains(&dim) {
            return Err(GeometryError::InvalidTable(format!(
                "ball dimension must be 1 or 2, got {dim}"
            )));
        }
        Ok(Self::with_kind(TableKind::Ball { r, dim }, 2.0 * r))
    }

    /// Builds a star-shaped table, checking positivity and periodicity of the
    /// profile on a [`PROFILE_GRID`]-point grid.
    pub fn star_shaped(profile: RadialProfile) -> Result<Self, GeometryError> {
        let mut rho_max = f64::NEG_INFINITY;
        let mut rho_min = f64::INFINITY;
        for j in 0..PROFILE_GRID {
            let rho = profile.radius(TAU * j as f64 / PROFILE_GRID as f64);
            if !rho.is_finite() {
                return Err(GeometryError::InvalidTable(format!(
                    "profile is not finite at grid point {j}"
                )));
            }
            rho_max = rho_max.max(rho);
            rho_min = rho_min.min(rho);
        }
        if rho_min <= 0.0 {
            return Err(GeometryError::InvalidTable(format!(
                "profile must stay positive, minimum on grid is {rho_min}"
            )));
        }
        let gap = (profile.radius(0.0) - profile.radius(TAU)).abs();
        if gap > 1e-12 * rho_max.max(1.0) {
            return Err(GeometryError::InvalidTable(format!(
                "profile is not 2pi-periodic: rho(0) - rho(2pi) = {gap:e}"
            )));
        }
        Ok(Self::with_kind(
            TableKind::StarShaped2D { profile },
            2.0 * rho_max,
        ))
    }

    fn with_kind(kind: TableKind, diameter: f64) -> Self {
        Self {
            kind,
            diameter,
            boundary_tol: DEFAULT_BOUNDARY_TOL * diameter,
        }
    }

    /// Overrides the absolute boundary tolerance with `rel * diameter`.
    pub fn with_boundary_tolerance(mut self, rel: f64) -> Self {
        self.boundary_tol = rel * self.diameter;
        self
    }

    pub fn kind(&self) -> &TableKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            TableKind::Interval { .. } => 1,
            TableKind::Ball { dim, .. } => dim,
            TableKind::StarShaped2D { .. } => 2,
        }
    }

    /// Absolute tolerance used to decide whether a point lies on `∂K`.
    pub fn boundary_tolerance(&self) -> f64 {
        self.boundary_tol
    }

    /// Exact for intervals and balls; `2 max rho` on the profile grid otherwise.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Proxy signed distance: negative inside, zero on the boundary, positive
    /// outside. For star-shaped tables this is the radial gap
    /// `|x| - rho(angle x)`, which has the right sign and zero set but is not
    /// the Euclidean distance.
    pub fn signed_distance(&self, x: &Vector2<f64>) -> f64 {
        match &self.kind {
            TableKind::Interval { a } => x.x.abs() - a,
            TableKind::Ball { r, dim: 1 } => x.x.abs() - r,
            TableKind::Ball { r, .. } => x.norm() - r,
            TableKind::StarShaped2D { profile } => x.norm() - profile.radius(x.y.atan2(x.x)),
        }
    }

    pub fn contains(&self, x: &Vector2<f64>) -> bool {
        self.signed_distance(x) <= self.boundary_tol
    }

    pub fn outer_normal(&self, y: &Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
        let distance = self.signed_distance(y);
        if distance.abs() > self.boundary_tol {
            return Err(GeometryError::NotOnBoundary {
                point: [y.x, y.y],
                distance,
            });
        }
        Ok(self.normal_unchecked(y))
    }

    /// Outward normal at the boundary point in the direction of `y`, without
    /// the on-boundary check.
    pub(crate) fn normal_unchecked(&self, y: &Vector2<f64>) -> Vector2<f64> {
        match &self.kind {
            TableKind::Interval { .. } | TableKind::Ball { dim: 1, .. } => {
                Vector2::new(y.x.signum(), 0.0)
            }
            TableKind::Ball { .. } => y.normalize(),
            TableKind::StarShaped2D { profile } => {
                let theta = y.y.atan2(y.x);
                profile_normal(profile, theta)
            }
        }
    }

    /// Radial projection of `x` onto `∂K`.
    pub fn project_to_boundary(&self, x: &Vector2<f64>) -> Vector2<f64> {
        match &self.kind {
            TableKind::Interval { a } => Vector2::new(a.copysign(x.x), 0.0),
            TableKind::Ball { r, dim: 1 } => Vector2::new(r.copysign(x.x), 0.0),
            TableKind::Ball { r, .. } => x * (r / x.norm()),
            TableKind::StarShaped2D { profile } => {
                let theta = x.y.atan2(x.x);
                profile.radius(theta) * Vector2::new(theta.cos(), theta.sin())
            }
        }
    }

    /// Boundary point hit by the ray from the origin in direction `theta`.
    pub fn boundary_point(&self, theta: f64) -> Vector2<f64> {
        let dir = Vector2::new(theta.cos(), theta.sin());
        match &self.kind {
            TableKind::Interval { a } => Vector2::new(a.copysign(dir.x), 0.0),
            TableKind::Ball { r, dim: 1 } => Vector2::new(r.copysign(dir.x), 0.0),
            TableKind::Ball { r, .. } => dir * *r,
            TableKind::StarShaped2D { profile } => dir * profile.radius(theta),
        }
    }
}

fn profile_normal(profile: &RadialProfile, theta: f64) -> Vector2<f64> {
    let rho = profile.radius(theta);
    let drho = profile.derivative(theta);
    let (s, c) = theta.sin_cos();
    Vector2::new(rho * c + drho * s, rho * s - drho * c).normalize()
}

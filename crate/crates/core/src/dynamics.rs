//! Right-hand sides `f(t, x)` and the elastic impact law.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::geometry::BilliardTable;

/// Sampling resolution per axis used for the sup bounds.
pub const BOUND_GRID: usize = 64;

/// Multiplicative safety margin on grid-sampled sup bounds.
pub const DEFAULT_BOUND_INFLATION: f64 = 1.1;

pub const MAX_TOTAL_DEGREE: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("grazing impact: normal velocity {normal_speed:e} against speed {speed:e}")]
    GrazingImpact { normal_speed: f64, speed: f64 },
    #[error("invalid force field: {0}")]
    InvalidField(String),
}

/// One term `coef * t^t_exp * x1^e1 * x2^e2` of the `coord`-th component of `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coord: usize,
    pub t_exp: u32,
    pub x_exp: [u32; 2],
    pub coef: f64,
}

impl Monomial {
    pub fn new(coord: usize, t_exp: u32, x_exp: &[u32], coef: f64) -> Self {
        let mut exps = [0; 2];
        for (slot, &e) in exps.iter_mut().zip(x_exp) {
            *slot = e;
        }
        Self {
            coord,
            t_exp,
            x_exp: exps,
            coef,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.t_exp + self.x_exp[0] + self.x_exp[1]
    }

    fn eval(&self, t: f64, x: &Vector2<f64>) -> f64 {
        self.coef * powu(t, self.t_exp) * powu(x.x, self.x_exp[0]) * powu(x.y, self.x_exp[1])
    }

    /// Partial derivative with respect to `x_j`.
    fn partial(&self, j: usize, t: f64, x: &Vector2<f64>) -> f64 {
        let e = self.x_exp[j];
        if e == 0 {
            return 0.0;
        }
        let mut exps = self.x_exp;
        exps[j] -= 1;
        self.coef * f64::from(e) * powu(t, self.t_exp) * powu(x.x, exps[0]) * powu(x.y, exps[1])
    }
}

fn powu(base: f64, exp: u32) -> f64 {
    // powi(0.0, 0) is 1, which is what monomials need
    base.powi(exp as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForceForm {
    Constant(Vector2<f64>),
    Polynomial(Vec<Monomial>),
}

/// `f(t, x)` on `[0, T]`, restricted to constants and polynomials in `(t, x)`
/// so that its bounds can be certified.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    form: ForceForm,
    dim: usize,
    horizon: f64,
    inflation: f64,
}

impl ForceField {
    pub fn constant(value: &[f64], horizon: f64) -> Result<Self, DynamicsError> {
        let dim = check_dim(value.len())?;
        if value.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::InvalidField("non-finite constant".into()));
        }
        let mut a = Vector2::zeros();
        a.as_mut_slice()[..dim].copy_from_slice(value);
        Self::build(ForceForm::Constant(a), dim, horizon)
    }

    pub fn zero(dim: usize, horizon: f64) -> Result<Self, DynamicsError> {
        Self::constant(&vec![0.0; dim], horizon)
    }

    pub fn polynomial(
        terms: Vec<Monomial>,
        dim: usize,
        horizon: f64,
    ) -> Result<Self, DynamicsError> {
        let dim = check_dim(dim)?;
        for (i, term) in terms.iter().enumerate() {
            if term.coord >= dim {
                return Err(DynamicsError::InvalidField(format!(
                    "term {i}: coordinate {} out of range for dimension {dim}",
                    term.coord
                )));
            }
            if dim == 1 && term.x_exp[1] != 0 {
                return Err(DynamicsError::InvalidField(format!(
                    "term {i}: exponent of x2 given in dimension 1"
                )));
            }
            if term.total_degree() > MAX_TOTAL_DEGREE {
                return Err(DynamicsError::InvalidField(format!(
                    "term {i}: total degree {} exceeds {MAX_TOTAL_DEGREE}",
                    term.total_degree()
                )));
            }
            if !term.coef.is_finite() {
                return Err(DynamicsError::InvalidField(format!(
                    "term {i}: non-finite coefficient"
                )));
            }
        }
        Self::build(ForceForm::Polynomial(terms), dim, horizon)
    }

    fn build(form: ForceForm, dim: usize, horizon: f64) -> Result<Self, DynamicsError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(DynamicsError::InvalidField(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            form,
            dim,
            horizon,
            inflation: DEFAULT_BOUND_INFLATION,
        })
    }

    /// Replaces the 10% safety factor applied to sampled sup bounds.
    pub fn with_bound_inflation(mut self, factor: f64) -> Self {
        self.inflation = factor;
        self
    }

    pub fn form(&self) -> &ForceForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Same field on a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self, DynamicsError> {
        Self::build(self.form.clone(), self.dim, horizon)
            .map(|f| f.with_bound_inflation(self.inflation))
    }

    pub fn is_zero(&self) -> bool {
        match &self.form {
            ForceForm::Constant(a) => a.iter().all(|&c| c == 0.0),
            ForceForm::Polynomial(terms) => terms.iter().all(|m| m.coef == 0.0),
        }
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.form {
            ForceForm::Constant(_) => true,
            ForceForm::Polynomial(terms) => terms.iter().all(|m| m.t_exp == 0 || m.coef == 0.0),
        }
    }

    pub fn eval(&self, t: f64, x: &Vector2<f64>) -> Vector2<f64> {
        match &self.form {
            ForceForm::Constant(a) => *a,
            ForceForm::Polynomial(terms) => {
                let mut out = Vector2::zeros();
                for m in terms {
                    out[m.coord] += m.eval(t, x);
                }
                out
            }
        }
    }

    /// Jacobian `df/dx`; rows beyond `dim` are zero.
    pub fn jacobian(&self, t: f64, x: &Vector2<f64>) -> Matrix2<f64> {
        let mut jac = Matrix2::zeros();
        if let ForceForm::Polynomial(terms) = &self.form {
            for m in terms {
                for j in 0..self.dim {
                    jac[(m.coord, j)] += m.partial(j, t, x);
                }
            }
        }
        jac
    }

    /// Inflated sup of `|f(t, x)|` over `[0, T] x {|x| <= diameter / 2}`.
    pub fn sup_bound(&self, table: &BilliardTable) -> f64 {
        if let ForceForm::Constant(a) = &self.form {
            return a.norm() * self.inflation;
        }
        self.grid_sup(table, |t, x| self.eval(t, x).norm()) * self.inflation
    }

    /// `||m||_1 = T * m_bar` with `m_bar` from [`ForceField::sup_bound`].
    pub fn m_l1(&self, table: &BilliardTable) -> f64 {
        self.horizon * self.sup_bound(table)
    }

    /// Inflated sup of the Frobenius norm of `df/dx`, an upper bound for the
    /// Lipschitz constant in `x`.
    pub fn lipschitz_bound(&self, table: &BilliardTable) -> f64 {
        if let ForceForm::Constant(_) = &self.form {
            return 0.0;
        }
        self.grid_sup(table, |t, x| self.jacobian(t, x).norm()) * self.inflation
    }

    fn grid_sup<F: Fn(f64, &Vector2<f64>) -> f64>(&self, table: &BilliardTable, g: F) -> f64 {
        let radius = 0.5 * table.diameter();
        let node = |k: usize| -radius + 2.0 * radius * k as f64 / (BOUND_GRID - 1) as f64;
        let mut sup = 0.0_f64;
        for it in 0..BOUND_GRID {
            let t = self.horizon * it as f64 / (BOUND_GRID - 1) as f64;
            for i in 0..BOUND_GRID {
                if self.dim == 1 {
                    sup = sup.max(g(t, &Vector2::new(node(i), 0.0)));
                    continue;
                }
                for j in 0..BOUND_GRID {
                    let x = Vector2::new(node(i), node(j));
                    if x.norm() <= radius {
                        sup = sup.max(g(t, &x));
                    }
                }
            }
            if self.dim == 2 {
                // the square grid misses most of the rim; sample it explicitly
                for k in 0..4 * BOUND_GRID {
                    let phi = std::f64::consts::TAU * k as f64 / (4 * BOUND_GRID) as f64;
                    sup = sup.max(g(t, &(radius * Vector2::new(phi.cos(), phi.sin()))));
                }
            }
        }
        sup
    }
}

fn check_dim(dim: usize) -> Result<usize, DynamicsError> {
    if (1..=2).contains(&dim) {
        Ok(dim)
    } else {
        Err(DynamicsError::InvalidField(format!(
            "dimension must be 1 or 2, got {dim}"
        )))
    }
}

/// Elastic impact law `I(y, v) = -2 <v, n(y)> n(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactLaw {
    pub graze_rel: f64,
    pub graze_abs: f64,
}

impl Default for ImpactLaw {
    fn default() -> Self {
        Self {
            graze_rel: 1e-8,
            graze_abs: 1e-12,
        }
    }
}

impl ImpactLaw {
    /// Reflected velocity `v - 2 <v, n> n`. Near-tangential contacts, where the
    /// motion could slide along the boundary, are rejected.
    pub fn apply(
        &self,
        normal: &Vector2<f64>,
        v_in: &Vector2<f64>,
    ) -> Result<Vector2<f64>, DynamicsError> {
        let normal_speed = v_in.dot(normal);
        let speed = v_in.norm();
        if normal_speed.abs() < self.graze_rel * speed.max(self.graze_abs) {
            return Err(DynamicsError::GrazingImpact {
                normal_speed,
                speed,
            });
        }
        Ok(v_in - 2.0 * normal_speed * normal)
    }
}

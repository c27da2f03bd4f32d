use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fespace::DofMap;
use crate::linalg::DistVector;

/// Scalar coefficient of the physical point.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Vector coefficient of the physical point, written into the output slice.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A finite-element field used as a coefficient, e.g. the advection velocity.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<DofMap>,
    values: Arc<Vec<f64>>,
}

impl FeFunction {
    /// Wraps a vector in the global numbering of `space`.
    pub fn new(space: Arc<DofMap>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_dofs() {
            return Err(Error::Dimension(format!(
                "field has {} values, its space {} DoFs",
                values.len(),
                space.n_dofs()
            )));
        }
        Ok(FeFunction { space, values: Arc::new(values) })
    }

    /// Gathers a distributed vector.
    pub fn from_dist(space: Arc<DofMap>, v: &DistVector) -> Result<Self> {
        Self::new(space, v.to_global())
    }

    pub fn space(&self) -> &Arc<DofMap> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn same(&self, other: &FeFunction) -> bool {
        Arc::ptr_eq(&self.values, &other.values) && Arc::ptr_eq(&self.space, &other.space)
    }
}

/// Weak-form expression, built with the functions and operators of this
/// module and compiled once before the element loop.
///
/// ```
/// use pfem::assembly::{dot, grad, test, trial};
/// let (u, v) = (trial(), test());
/// let a = 2.0 * dot(grad(u.clone()), grad(v.clone())) + 0.5 * u * v;
/// ```
#[derive(Clone)]
pub enum Expr {
    Trial,
    Test,
    Const(f64),
    Function(ScalarFn),
    VectorFunction(VectorFn, usize),
    Field(FeFunction),
    Grad(Box<Expr>),
    Div(Box<Expr>),
    Dot(Box<Expr>, Box<Expr>),
    /// Product; a scalar factor broadcasts, a matrix times a vector contracts.
    Mul(Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Component(Box<Expr>, usize),
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Trial => write!(f, "u"),
            Expr::Test => write!(f, "v"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Function(_) => write!(f, "f(x)"),
            Expr::VectorFunction(_, n) => write!(f, "F{n}(x)"),
            Expr::Field(_) => write!(f, "field"),
            Expr::Grad(e) => write!(f, "grad({e:?})"),
            Expr::Div(e) => write!(f, "div({e:?})"),
            Expr::Dot(a, b) => write!(f, "dot({a:?}, {b:?})"),
            Expr::Mul(a, b) => write!(f, "({a:?} * {b:?})"),
            Expr::Add(a, b) => write!(f, "({a:?} + {b:?})"),
            Expr::Neg(e) => write!(f, "-{e:?}"),
            Expr::Component(e, i) => write!(f, "{e:?}[{i}]"),
        }
    }
}

pub fn trial() -> Expr {
    Expr::Trial
}

pub fn test() -> Expr {
    Expr::Test
}

pub fn constant(c: f64) -> Expr {
    Expr::Const(c)
}

pub fn function(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Expr {
    Expr::Function(Arc::new(f))
}

/// Vector coefficient with `n` components.
pub fn vector_function(n: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Expr {
    Expr::VectorFunction(Arc::new(f), n)
}

pub fn field(f: &FeFunction) -> Expr {
    Expr::Field(f.clone())
}

pub fn grad(e: Expr) -> Expr {
    Expr::Grad(Box::new(e))
}

pub fn div(e: Expr) -> Expr {
    Expr::Div(Box::new(e))
}

pub fn dot(a: Expr, b: Expr) -> Expr {
    Expr::Dot(Box::new(a), Box::new(b))
}

pub fn component(e: Expr, i: usize) -> Expr {
    Expr::Component(Box::new(e), i)
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, rhs: f64) -> Expr {
        Expr::Const(rhs) * self
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Const(self) * rhs
    }
}

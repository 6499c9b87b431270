use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain invariant violated: {0}")]
    InvalidDomain(String),
    #[error("point ({t}, {x:?}) is not on the boundary")]
    NotOnBoundary { t: f64, x: Vec<f64> },
    #[error("boundary speed {speed} at t = {t} is not below 1 - margin = {limit}")]
    LuminalBoundary { t: f64, speed: f64, limit: f64 },
    #[error("parameter regime violated: {0}")]
    InvalidParams(String),
    #[error("weight evaluated outside the cone exterior (f_p = {0})")]
    OutsideConeExterior(f64),
    #[error("degenerate weight denominator (1 + eps*u = {plus}, 1 - eps*v = {minus})")]
    DegenerateDenominator { plus: f64, minus: f64 },
    #[error("region `{0}` is empty")]
    EmptyRegion(&'static str),
    #[error("time step {dt} exceeds CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("solution blew up at step {step} (max |u| = {magnitude:e})")]
    UnstableBlowup { step: usize, magnitude: f64 },
    #[error("field does not vanish on the boundary (max |u| = {0:e})")]
    BoundaryConditionViolation(f64),
    #[error("conjugate gradient stopped at relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
}

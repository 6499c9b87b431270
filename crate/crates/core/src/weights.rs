//! The Carleman weight
//!
//! ```text
//! zeta = { f/((1+eps u)(1-eps v)) * exp[2b f^(1/2) / ((1+eps u)(1-eps v))^(1/2)] }^(2a)
//! ```
//!
//! evaluated in log space, its parameter regime and a finite-difference check
//! of the bound `|grad zeta| <~ a R zeta / f`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{MovingDomain, ObservationFrame, Point};
use crate::rng::{seeded, Draw};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlemanParams {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub r: f64,
}

impl CarlemanParams {
    /// Observability choice `eps = delta^2 / R`, `b = delta / R`.
    pub fn observability(a: f64, delta: f64, sigma: f64, r: f64) -> Self {
        Self {
            a,
            b: delta / r,
            eps: delta * delta / r,
            delta,
            sigma,
            r,
        }
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    /// `a >= n^2`, `b R <= 1`, `eps <= b`, `delta` in (0, 1), `sigma >= 0`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let n2 = (dim * dim) as f64;
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !self.a.is_finite() || self.a < n2 {
            return fail(format!("a = {} is below n^2 = {n2}", self.a));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return fail(format!("R = {} must be positive", self.r));
        }
        if !(self.b >= 0.0) || self.b * self.r > 1.0 + 1e-12 {
            return fail(format!("b = {} needs 0 <= b*R <= 1 (R = {})", self.b, self.r));
        }
        if !(self.eps >= 0.0) || self.eps > self.b * (1.0 + 1e-12) {
            return fail(format!("eps = {} must lie in [0, b = {}]", self.eps, self.b));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta = {} not in (0, 1)", self.delta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma = {} must be nonnegative", self.sigma));
        }
        Ok(())
    }
}

/// Lower bound for the large parameter:
/// `max(n^2, R+, delta^(-1/3) R+^(4/3) M0^(2/3), delta^(-2) R-^(-2) R+^4 M1^2)`
/// with `M0 = sup |V|` and `M1 = sup |X|`.
pub fn a_floor(dim: usize, delta: f64, r_plus: f64, r_minus: f64, m0: f64, m1: f64) -> f64 {
    let n2 = (dim * dim) as f64;
    let potential = delta.powf(-1.0 / 3.0) * r_plus.powf(4.0 / 3.0) * m0.powf(2.0 / 3.0);
    let transport = if m1 == 0.0 {
        0.0
    } else {
        r_plus.powi(4) * m1 * m1 / (delta * delta * r_minus * r_minus)
    };
    n2.max(r_plus).max(potential).max(transport)
}

/// `log zeta / (2a)`; `-inf` on the cone.
pub fn log_zeta_unit(frame: &ObservationFrame, params: &CarlemanParams, pt: &Point) -> Result<f64> {
    let c = frame.null_coords(pt);
    if c.f_p < 0.0 {
        return Err(Error::OutsideConeExterior(c.f_p));
    }
    let plus = 1.0 + params.eps * c.u_p;
    let minus = 1.0 - params.eps * c.v_p;
    if plus <= 0.0 || minus <= 0.0 {
        return Err(Error::DegenerateDenominator { plus, minus });
    }
    if c.f_p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ratio = c.f_p / (plus * minus);
    Ok(c.f_p.ln() - plus.ln() - minus.ln() + 2.0 * params.b * ratio.sqrt())
}

/// `log zeta`.
pub fn log_zeta(frame: &ObservationFrame, params: &CarlemanParams, pt: &Point) -> Result<f64> {
    Ok(2.0 * params.a * log_zeta_unit(frame, params, pt)?)
}

pub fn zeta(frame: &ObservationFrame, params: &CarlemanParams, pt: &Point) -> Result<f64> {
    Ok(log_zeta(frame, params, pt)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeBoundReport {
    pub a: f64,
    pub samples: usize,
    pub f_min: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// Draws `sample_count` points of `U ∩ {f_p > f_min}` and reports
/// `|grad zeta| f_p / (a R zeta)` with the gradient taken by central
/// differences in `(t, x)`.
pub fn check_derivative_bound(
    domain: &MovingDomain,
    frame: &ObservationFrame,
    params: &CarlemanParams,
    f_min: f64,
    sample_count: usize,
    seed: u64,
) -> Result<DerivativeBoundReport> {
    let points = sample_cone_exterior(domain, frame, f_min, sample_count, seed)?;
    let mut max_ratio: f64 = 0.0;
    let mut sum = 0.0;
    for pt in &points {
        let ratio = derivative_ratio(frame, params, pt)?;
        max_ratio = max_ratio.max(ratio);
        sum += ratio;
    }
    Ok(DerivativeBoundReport {
        a: params.a,
        samples: points.len(),
        f_min,
        max_ratio,
        mean_ratio: sum / points.len() as f64,
    })
}

/// `|grad zeta| f_p / (a R zeta)` at one point.
pub fn derivative_ratio(frame: &ObservationFrame, params: &CarlemanParams, pt: &Point) -> Result<f64> {
    let step = 1e-6;
    let center = log_zeta(frame, params, pt)?;
    let f = frame.f_p(pt);
    let mut grad_sq = 0.0;
    for axis in 0..=frame.dim {
        let shifted = |s: f64| {
            let mut q = *pt;
            if axis == 0 {
                q.t += s;
            } else {
                q.x[axis - 1] += s;
            }
            q
        };
        let up = log_zeta(frame, params, &shifted(step))?;
        let down = log_zeta(frame, params, &shifted(-step))?;
        // (zeta(+h) - zeta(-h)) / (2h zeta(0))
        let g = ((up - center).exp() - (down - center).exp()) / (2.0 * step);
        grad_sq += g * g;
    }
    Ok(grad_sq.sqrt() * f / (params.a * params.r))
}

/// Uniform samples of the mapped domain restricted to `f_p > f_min`.
pub fn sample_cone_exterior(
    domain: &MovingDomain,
    frame: &ObservationFrame,
    f_min: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Point>> {
    let mut rng = seeded(seed);
    let (t0, t1) = domain.window();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::EmptyRegion("U ∩ D_p"));
        }
        let t = rng.uniform(t0, t1);
        let mut x = [0.0; 3];
        for (d, xd) in x.iter_mut().enumerate().take(domain.dim()) {
            *xd = domain.lower(d).value(t) + rng.unit() * domain.width(d, t);
        }
        let pt = Point { t, x };
        if frame.f_p(&pt) > f_min {
            out.push(pt);
        }
    }
    Ok(out)
}

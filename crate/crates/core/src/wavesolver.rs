//! Finite differences for
//!
//! ```text
//! -phi_tt + phi_xx + c_t phi_t + c_x phi_x + c_0 phi = s
//! ```
//!
//! on a moving interval, solved on the reference interval `xi in [0, 1]`
//! through `phi(t, x) = w(t, xi)`, `xi = (x - alpha)/L`. With
//! `mu = xi_t = -(alpha' + xi L')/L` the equation becomes
//!
//! ```text
//! -w_tt - 2 mu w_txi + (1/L^2 - mu^2) w_xixi + B w_xi + c_t w_t + c_0 w = s
//! B = -(mu_t + mu mu_xi) + c_t mu + c_x/L
//! ```
//!
//! Every term is centred at the current level. The mixed derivative couples
//! the new level through a tridiagonal solve, so a step is "explicit up to a
//! tridiagonal system".

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::MovingDomain;
use crate::grid::{GridSpec, Mesh};
use crate::rng::{Draw, SeededRng};

pub const CFL_SAFETY: f64 = 0.8;
pub const BLOWUP_LIMIT: f64 = 1e12;

/// `X = (X^t, X^x)`, the control potential `q` and the adjoint potential `V`.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub xt: Expr,
    pub xx: Vec<Expr>,
    pub q: Expr,
    pub v: Expr,
}

/// Sup norms of the coefficients over a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientBounds {
    pub sup_v: f64,
    pub sup_x: f64,
    pub sup_q: f64,
    /// `1 + sup |V|`
    pub m0: f64,
    /// `1 + sup |X|`
    pub m1: f64,
}

impl CoefficientSet {
    pub fn zero(dim: usize) -> Self {
        Self {
            xt: Expr::zero(),
            xx: vec![Expr::zero(); dim],
            q: Expr::zero(),
            v: Expr::zero(),
        }
    }

    pub fn parse(xt: &str, xx: &[&str], q: &str, v: &str) -> Result<Self> {
        let dim = xx.len();
        Ok(Self {
            xt: Expr::parse(xt, dim)?,
            xx: xx.iter().map(|s| Expr::parse(s, dim)).collect::<std::result::Result<_, _>>()?,
            q: Expr::parse(q, dim)?,
            v: Expr::parse(v, dim)?,
        })
    }

    pub fn is_free(&self) -> bool {
        let zero = |e: &Expr| e.as_number() == Some(0.0);
        zero(&self.xt) && self.xx.iter().all(zero) && zero(&self.q) && zero(&self.v)
    }

    pub fn bounds(&self, mesh: &Mesh) -> Result<CoefficientBounds> {
        let mut sup_v: f64 = 0.0;
        let mut sup_x: f64 = 0.0;
        let mut sup_q: f64 = 0.0;
        for n in 0..mesh.levels() {
            let t = mesh.time(n);
            for j in 0..mesh.slice_len {
                let x = mesh.x(n, j);
                let x = &x[..mesh.dim];
                sup_v = sup_v.max(self.v.eval(t, x).abs());
                sup_q = sup_q.max(self.q.eval(t, x).abs());
                let xt = self.xt.eval(t, x);
                let xs: f64 = self.xx.iter().map(|e| e.eval(t, x).powi(2)).sum();
                sup_x = sup_x.max((xt * xt + xs).sqrt());
            }
        }
        if !(sup_v.is_finite() && sup_x.is_finite() && sup_q.is_finite()) {
            return Err(Error::InvalidInput("coefficients are not finite on the mesh".into()));
        }
        Ok(CoefficientBounds {
            sup_v,
            sup_x,
            sup_q,
            m0: 1.0 + sup_v,
            m1: 1.0 + sup_x,
        })
    }
}

/// Which of the two systems is stepped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// `-phi_tt + phi_xx + X.grad phi + V phi = s`
    Adjoint,
    /// `-y_tt + y_xx - X.grad y + q y = s`
    Controlled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From `tau-` upwards.
    Forward,
    /// From `tau+` downwards.
    Backward,
}

/// Data at the starting end of a sweep, as nodal values (boundary nodes
/// included, and required to be zero).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Value and physical time derivative; the second level is produced by a
    /// second order Taylor step.
    Cauchy { value: Vec<f64>, velocity: Vec<f64> },
    /// The first two levels of the sweep.
    Levels { first: Vec<f64>, second: Vec<f64> },
}

impl InitialData {
    pub fn zero(len: usize) -> Self {
        InitialData::Cauchy {
            value: vec![0.0; len],
            velocity: vec![0.0; len],
        }
    }
}

/// Nodal values on every level of a mesh.
#[derive(Debug, Clone)]
pub struct SpacetimeField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    /// Whether the field is meant to vanish on the lateral boundary.
    pub dirichlet: bool,
}

impl SpacetimeField {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let len = mesh.len();
        Self {
            mesh,
            values: vec![0.0; len],
            dirichlet: true,
        }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.len());
        for n in 0..mesh.levels() {
            let t = mesh.time(n);
            for j in 0..mesh.slice_len {
                values.push(f(t, &mesh.x(n, j)[..mesh.dim]));
            }
        }
        Self {
            mesh,
            values,
            dirichlet: false,
        }
    }

    pub fn value(&self, n: usize, j: usize) -> f64 {
        self.values[self.mesh.global(n, j)]
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let s = self.mesh.slice_len;
        &self.values[n * s..(n + 1) * s]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|value|` on lateral boundary nodes.
    pub fn boundary_max(&self) -> f64 {
        let mesh = &self.mesh;
        let mut out: f64 = 0.0;
        for n in 0..mesh.levels() {
            for j in 0..mesh.slice_len {
                if mesh.is_boundary(j) {
                    out = out.max(self.value(n, j).abs());
                }
            }
        }
        out
    }

    /// Derivative along the reference time axis (fixed `xi`), second order.
    pub fn dt_fixed_ref(&self, n: usize, j: usize) -> f64 {
        let nt = self.mesh.grid.nt;
        let k = self.mesh.k;
        let v = |m: usize| self.value(m, j);
        if nt == 1 {
            return (v(1) - v(0)) / k;
        }
        if n == 0 {
            (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * k)
        } else if n == nt {
            (3.0 * v(nt) - 4.0 * v(nt - 1) + v(nt - 2)) / (2.0 * k)
        } else {
            (v(n + 1) - v(n - 1)) / (2.0 * k)
        }
    }

    /// `d/d xi_d` at level `n`, second order (one sided at the faces).
    pub fn dxi(&self, n: usize, j: usize, d: usize) -> f64 {
        let mesh = &self.mesh;
        let h = mesh.h_hat;
        let at = |delta: isize| self.value(n, mesh.shift(j, d, delta).expect("neighbour"));
        let i = mesh.multi_index(j)[d];
        if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if i == mesh.m - 1 {
            (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
        } else {
            (at(1) - at(-1)) / (2.0 * h)
        }
    }

    /// Physical time derivative `phi_t = w_t + sum_d mu_d w_xi_d`.
    pub fn time_derivative(&self, n: usize, j: usize) -> f64 {
        let mesh = &self.mesh;
        let idx = mesh.multi_index(j);
        let mut out = self.dt_fixed_ref(n, j);
        for d in 0..mesh.dim {
            let s = mesh.span(n, d);
            let xi = mesh.xhat(idx[d]);
            let mu = -(s.lo_d1 + xi * s.width_d1) / s.width;
            out += mu * self.dxi(n, j, d);
        }
        out
    }

    /// Physical spatial gradient.
    pub fn gradient(&self, n: usize, j: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (d, o) in out.iter_mut().enumerate().take(self.mesh.dim) {
            *o = self.dxi(n, j, d) / self.mesh.span(n, d).width;
        }
        out
    }

    /// Multilinear interpolation in `(t, xi)`; `None` outside the window or
    /// the domain.
    pub fn interpolate(&self, t: f64, x: &[f64]) -> Option<f64> {
        let mesh = &self.mesh;
        let (t0, t1) = mesh.window;
        if t < t0 || t > t1 || x.len() != mesh.dim {
            return None;
        }
        let s = ((t - t0) / mesh.k).min(mesh.grid.nt as f64);
        let n0 = (s.floor() as usize).min(mesh.grid.nt.saturating_sub(1));
        let wt = s - n0 as f64;
        let mut total = 0.0;
        for (n, tw) in [(n0, 1.0 - wt), (n0 + 1, wt)] {
            if tw == 0.0 {
                continue;
            }
            let mut base = [0usize; 3];
            let mut frac = [0.0; 3];
            for d in 0..mesh.dim {
                let span = mesh.span(n, d);
                let xi = (x[d] - span.lo) / span.width;
                if !(0.0..=1.0).contains(&xi) {
                    return None;
                }
                let q = xi / mesh.h_hat;
                let i0 = (q.floor() as usize).min(mesh.m - 2);
                base[d] = i0;
                frac[d] = q - i0 as f64;
            }
            for corner in 0..(1usize << mesh.dim) {
                let mut idx = [0usize; 3];
                let mut w = tw;
                for d in 0..mesh.dim {
                    let bit = (corner >> d) & 1;
                    idx[d] = base[d] + bit;
                    w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
                }
                if w != 0.0 {
                    total += w * self.value(n, mesh.flat_index(&idx));
                }
            }
        }
        Some(total)
    }
}

/// Kinetic plus gradient part, the weighted `L^2` part and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub gradient: f64,
    pub l2: f64,
    pub m0: f64,
    pub total: f64,
}

/// `∫_{Ω_τ} |∇_{t,x} phi|^2 + M0 phi^2` at level `n`, trapezoid rule in
/// physical coordinates. Time derivatives are nodal, the spatial gradient uses
/// the differences between neighbouring nodes (one dimensional fields) or
/// nodal differences otherwise.
pub fn energy(field: &SpacetimeField, n: usize, m0: f64) -> EnergyRecord {
    let mesh = &field.mesh;
    let mut kinetic = 0.0;
    let mut l2 = 0.0;
    let mut grad = 0.0;
    for j in 0..mesh.slice_len {
        let vol = mesh.cell_volume(n, j);
        let v = field.value(n, j);
        let vt = field.time_derivative(n, j);
        kinetic += vol * vt * vt;
        l2 += vol * v * v;
        if mesh.dim != 1 {
            let g = field.gradient(n, j);
            grad += vol * g.iter().map(|c| c * c).sum::<f64>();
        }
    }
    if mesh.dim == 1 {
        let h = mesh.spacing(n, 0);
        for i in 0..mesh.m - 1 {
            let d = (field.value(n, i + 1) - field.value(n, i)) / h;
            grad += h * d * d;
        }
    }
    EnergyRecord {
        gradient: kinetic + grad,
        l2: m0 * l2,
        m0,
        total: kinetic + grad + m0 * l2,
    }
}

/// Conserved leapfrog energy between levels `n` and `n + 1` of a free field
/// on a static interval:
/// `|(w^{n+1} - w^n)/k|^2 + <D+ w^{n+1}, D+ w^n>` in the weighted norm.
pub fn discrete_energy(field: &SpacetimeField, n: usize) -> f64 {
    let mesh = &field.mesh;
    let h = mesh.spacing(n, 0);
    let k = mesh.k;
    let (a, b) = (field.slice(n), field.slice(n + 1));
    let mut kin = 0.0;
    let mut pot = 0.0;
    for i in 0..mesh.m {
        let d = (b[i] - a[i]) / k;
        kin += h * d * d;
    }
    for i in 0..mesh.m - 1 {
        pot += h * (b[i + 1] - b[i]) / h * (a[i + 1] - a[i]) / h;
    }
    kin + pot
}

/// Pre-evaluated mapped-operator coefficients on a one dimensional mesh.
#[derive(Debug, Clone)]
pub struct Solver {
    mesh: Arc<Mesh>,
    system: System,
    mu: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    ct: Vec<f64>,
    c0: Vec<f64>,
}

/// Largest stable step `0.8 h L / (1 + |alpha' + xi L'|)` over the mesh.
pub fn cfl_limit(mesh: &Mesh) -> f64 {
    let mut limit = f64::INFINITY;
    for n in 0..mesh.levels() {
        for d in 0..mesh.dim {
            let s = mesh.span(n, d);
            let transport = s.lo_d1.abs().max(s.hi_d1().abs());
            limit = limit.min(CFL_SAFETY * mesh.h_hat * s.width / (1.0 + transport));
        }
    }
    limit
}

impl Solver {
    pub fn new(coeffs: &CoefficientSet, mesh: Arc<Mesh>, system: System) -> Result<Self> {
        if mesh.dim != 1 {
            return Err(Error::InvalidInput(format!(
                "the wave solver supports one space dimension (got {})",
                mesh.dim
            )));
        }
        let limit = cfl_limit(&mesh);
        if mesh.k > limit {
            return Err(Error::CflViolation { dt: mesh.k, limit });
        }
        let sign = match system {
            System::Adjoint => 1.0,
            System::Controlled => -1.0,
        };
        let potential = match system {
            System::Adjoint => &coeffs.v,
            System::Controlled => &coeffs.q,
        };
        let len = mesh.len();
        let (mut mu, mut a, mut b, mut ct, mut c0) =
            (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for n in 0..mesh.levels() {
            let t = mesh.time(n);
            let s = *mesh.span(n, 0);
            let l = s.width;
            for i in 0..mesh.m {
                let g = mesh.global(n, i);
                let xi = mesh.xhat(i);
                let x = [s.x(xi)];
                let speed = s.lo_d1 + xi * s.width_d1;
                let m = -speed / l;
                let m_t = -((s.lo_d2 + xi * s.width_d2) * l - speed * s.width_d1) / (l * l);
                let m_xi = -s.width_d1 / l;
                let c_t = sign * coeffs.xt.eval(t, &x);
                let c_x = sign * coeffs.xx[0].eval(t, &x);
                mu[g] = m;
                a[g] = 1.0 / (l * l) - m * m;
                b[g] = -(m_t + m * m_xi) + c_t * m + c_x / l;
                ct[g] = c_t;
                c0[g] = potential.eval(t, &x);
            }
        }
        Ok(Self { mesh, system, mu, a, b, ct, c0 })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn system(&self) -> System {
        self.system
    }

    /// Runs a sweep. `source` (optional) holds `s` on every node.
    pub fn solve(
        &self,
        initial: &InitialData,
        direction: Direction,
        source: Option<&[f64]>,
    ) -> Result<SpacetimeField> {
        let mesh = &self.mesh;
        let m = mesh.m;
        let nt = mesh.grid.nt;
        if let Some(s) = source {
            if s.len() != mesh.len() {
                return Err(Error::InvalidInput(format!(
                    "source has {} values, mesh has {}",
                    s.len(),
                    mesh.len()
                )));
            }
        }
        let (dt, level) = match direction {
            Direction::Forward => (mesh.k, Box::new(|i: usize| i) as Box<dyn Fn(usize) -> usize>),
            Direction::Backward => (-mesh.k, Box::new(move |i: usize| nt - i) as Box<dyn Fn(usize) -> usize>),
        };
        let check = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != m {
                return Err(Error::InvalidInput(format!("{what} has {} values, expected {m}", v.len())));
            }
            let edge = v[0].abs().max(v[m - 1].abs());
            if edge > 1e-12 * (1.0 + v.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
                return Err(Error::BoundaryConditionViolation(edge));
            }
            Ok(())
        };
        let mut field = SpacetimeField::zeros(mesh.clone());
        let src = |n: usize, i: usize| source.map_or(0.0, |s| s[mesh.global(n, i)]);

        let (first, second) = match initial {
            InitialData::Levels { first, second } => {
                check(first, "first level")?;
                check(second, "second level")?;
                (first.clone(), second.clone())
            }
            InitialData::Cauchy { value, velocity } => {
                check(value, "initial value")?;
                check(velocity, "initial velocity")?;
                let n = level(0);
                let h = mesh.h_hat;
                let g = |i: usize| mesh.global(n, i);
                let d1 = |v: &[f64], i: usize| (v[i + 1] - v[i - 1]) / (2.0 * h);
                let d2 = |v: &[f64], i: usize| (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
                let mut wt = vec![0.0; m];
                for i in 1..m - 1 {
                    wt[i] = velocity[i] - self.mu[g(i)] * d1(value, i);
                }
                let mut second = vec![0.0; m];
                for i in 1..m - 1 {
                    let gi = g(i);
                    let wtt = -2.0 * self.mu[gi] * d1(&wt, i)
                        + self.a[gi] * d2(value, i)
                        + self.b[gi] * d1(value, i)
                        + self.ct[gi] * wt[i]
                        + self.c0[gi] * value[i]
                        - src(n, i);
                    second[i] = value[i] + dt * wt[i] + 0.5 * dt * dt * wtt;
                }
                (value.clone(), second)
            }
        };
        field.values[mesh.global(level(0), 0)..mesh.global(level(0), 0) + m].copy_from_slice(&first);
        field.values[mesh.global(level(1), 0)..mesh.global(level(1), 0) + m].copy_from_slice(&second);

        let h = mesh.h_hat;
        let mut rhs = vec![0.0; m];
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut next = vec![0.0; m];
        for step in 1..nt {
            let (n_old, n_cur, n_new) = (level(step - 1), level(step), level(step + 1));
            let old = field.slice(n_old);
            let cur = field.slice(n_cur);
            for i in 1..m - 1 {
                let g = mesh.global(n_cur, i);
                let (mu, c_t) = (self.mu[g], self.ct[g]);
                let d1_cur = (cur[i + 1] - cur[i - 1]) / (2.0 * h);
                let d2_cur = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / (h * h);
                let d1_old = (old[i + 1] - old[i - 1]) / (2.0 * h);
                rhs[i] = -dt * dt * src(n_cur, i) + 2.0 * cur[i] - old[i]
                    + mu * dt * d1_old
                    + dt * dt * (self.a[g] * d2_cur + self.b[g] * d1_cur + self.c0[g] * cur[i])
                    - 0.5 * c_t * dt * old[i];
                diag[i] = 1.0 - 0.5 * c_t * dt;
                upper[i] = mu * dt / (2.0 * h);
                lower[i] = -mu * dt / (2.0 * h);
            }
            thomas(&lower[1..m - 1], &diag[1..m - 1], &upper[1..m - 1], &rhs[1..m - 1], &mut next[1..m - 1]);
            let magnitude = next.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if !(magnitude <= BLOWUP_LIMIT) {
                return Err(Error::UnstableBlowup { step: step + 1, magnitude });
            }
            let start = mesh.global(n_new, 0);
            field.values[start..start + m].copy_from_slice(&next);
        }
        Ok(field)
    }
}

/// Tridiagonal solve; `lower[0]` and `upper[last]` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
}

/// Random smooth Cauchy data: `sum_m c_m sin(m pi xi) / m` for the value and
/// `sum_m d_m sin(m pi xi)` for the velocity, coefficients uniform in
/// `[-1, 1)`.
pub fn smooth_random_data(mesh: &Mesh, modes: usize, rng: &mut SeededRng) -> InitialData {
    let m = mesh.m;
    let mut value = vec![0.0; m];
    let mut velocity = vec![0.0; m];
    for mode in 1..=modes {
        let c = rng.uniform(-1.0, 1.0) / mode as f64;
        let d = rng.uniform(-1.0, 1.0);
        let freq = mode as f64 * std::f64::consts::PI;
        for i in 1..m - 1 {
            let s = (freq * mesh.xhat(i)).sin();
            value[i] += c * s;
            velocity[i] += d * s;
        }
    }
    InitialData::Cauchy { value, velocity }
}

/// Adjoint sweep on a fresh mesh.
pub fn solve_adjoint(
    domain: &MovingDomain,
    coeffs: &CoefficientSet,
    grid: GridSpec,
    initial: &InitialData,
    direction: Direction,
) -> Result<SpacetimeField> {
    let mesh = Arc::new(Mesh::new(domain, grid)?);
    Solver::new(coeffs, mesh, System::Adjoint)?.solve(initial, direction, None)
}

/// Forward sweep of the controlled system with nodal source `control`.
pub fn solve_controlled(
    domain: &MovingDomain,
    coeffs: &CoefficientSet,
    grid: GridSpec,
    initial: &InitialData,
    control: Option<&[f64]>,
) -> Result<SpacetimeField> {
    let mesh = Arc::new(Mesh::new(domain, grid)?);
    Solver::new(coeffs, mesh, System::Controlled)?.solve(initial, Direction::Forward, control)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn static_unit(nx: usize, nt: usize, t1: f64) -> Arc<Mesh> {
        let dom = MovingDomain::interval("0", "1", (0.0, t1)).unwrap();
        Arc::new(Mesh::new(&dom, GridSpec::new(nx, nt).unwrap()).unwrap())
    }

    fn sine_data(mesh: &Mesh) -> InitialData {
        let value = (0..mesh.m).map(|i| (PI * mesh.xhat(i)).sin()).collect::<Vec<_>>();
        let mut value = value;
        value[mesh.m - 1] = 0.0;
        InitialData::Cauchy { value, velocity: vec![0.0; mesh.m] }
    }

    #[test]
    fn standing_wave() {
        let mut errs = vec![];
        for (nx, nt) in [(39, 80), (79, 160)] {
            let mesh = static_unit(nx, nt, 1.0);
            let solver = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Adjoint).unwrap();
            let field = solver.solve(&sine_data(&mesh), Direction::Forward, None).unwrap();
            let mut err: f64 = 0.0;
            for n in 0..mesh.levels() {
                for i in 0..mesh.m {
                    let exact = (PI * mesh.xhat(i)).sin() * (PI * mesh.time(n)).cos();
                    err = err.max((field.value(n, i) - exact).abs());
                }
            }
            errs.push(err);
        }
        assert!(errs[0] < 2e-3, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.4 && ratio < 4.6, "{ratio}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let mesh = static_unit(20, 50, 1.0);
        let solver = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Controlled).unwrap();
        let field = solver.solve(&InitialData::zero(mesh.m), Direction::Forward, None).unwrap();
        assert_eq!(field.max_abs(), 0.0);
    }

    #[test]
    fn backward_sweep_reverses_forward() {
        let dom = MovingDomain::interval("0.1*t", "1 + 0.25*t", (0.0, 1.0)).unwrap();
        let mesh = Arc::new(Mesh::new(&dom, GridSpec::new(40, 100).unwrap()).unwrap());
        let coeffs = CoefficientSet::parse("0.3", &["0.2*x1"], "0", "-0.5").unwrap();
        let solver = Solver::new(&coeffs, mesh.clone(), System::Adjoint).unwrap();
        let fwd = solver.solve(&sine_data(&mesh), Direction::Forward, None).unwrap();
        let nt = mesh.grid.nt;
        let back = solver
            .solve(
                &InitialData::Levels { first: fwd.slice(nt).to_vec(), second: fwd.slice(nt - 1).to_vec() },
                Direction::Backward,
                None,
            )
            .unwrap();
        let diff = fwd.values.iter().zip(&back.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn cfl_is_enforced() {
        let mesh = static_unit(100, 10, 1.0);
        assert!(matches!(
            Solver::new(&CoefficientSet::zero(1), mesh, System::Adjoint),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn rejects_nonzero_boundary_data() {
        let mesh = static_unit(10, 30, 1.0);
        let solver = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Adjoint).unwrap();
        let mut value = vec![0.0; mesh.m];
        value[0] = 1.0;
        let data = InitialData::Cauchy { value, velocity: vec![0.0; mesh.m] };
        assert!(matches!(
            solver.solve(&data, Direction::Forward, None),
            Err(Error::BoundaryConditionViolation(_))
        ));
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let dom = MovingDomain::interval("0", "1 + 0.25*t", (0.0, 1.0)).unwrap();
        let mesh = Arc::new(Mesh::new(&dom, GridSpec::new(10, 20).unwrap()).unwrap());
        // bilinear in (t, xi)
        let field = SpacetimeField::from_fn(mesh.clone(), |t, x| {
            let xi = x[0] / (1.0 + 0.25 * t);
            1.0 + 2.0 * t + 3.0 * xi
        });
        let v = field.interpolate(0.33, &[0.7]).unwrap();
        let xi: f64 = 0.7 / (1.0 + 0.25 * 0.33);
        // exact in xi on each level, linear in t between levels
        assert!((v - (1.0 + 0.66 + 3.0 * xi)).abs() < 1e-4);
        assert_eq!(field.interpolate(0.33, &[2.0]), None);

        let dom = MovingDomain::interval("0", "2", (0.0, 1.0)).unwrap();
        let mesh = Arc::new(Mesh::new(&dom, GridSpec::new(10, 20).unwrap()).unwrap());
        let field = SpacetimeField::from_fn(mesh, |t, x| 1.0 + 2.0 * t + 3.0 * x[0] + t * x[0]);
        let v = field.interpolate(0.33, &[0.7]).unwrap();
        assert!((v - (1.0 + 0.66 + 2.1 + 0.231)).abs() < 1e-12);
    }
}

//! Moving-boundary domains, the shifted null frame around an observation
//! point, and boundary normals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

/// Spacetime point; only the first `dim` spatial components are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub t: f64,
    pub x: [f64; 3],
}

impl Point {
    pub fn new(t: f64, x: &[f64]) -> Self {
        let mut xs = [0.0; 3];
        xs[..x.len()].copy_from_slice(x);
        Self { t, x: xs }
    }
}

/// One boundary curve `t -> c(t)` together with its first two derivatives.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    expr: Expr,
    d1: Expr,
    d2: Expr,
}

impl BoundaryCurve {
    pub fn new(expr: Expr) -> Result<Self> {
        if (0..3).any(|i| expr.depends_on(Var::X(i))) {
            return Err(Error::InvalidDomain(format!(
                "boundary curve `{expr}` may only depend on t"
            )));
        }
        let d1 = expr.derivative(Var::T)?;
        let d2 = d1.derivative(Var::T)?;
        Ok(Self { expr, d1, d2 })
    }

    pub fn parse(src: &str) -> Result<Self> {
        Self::new(Expr::parse(src, 0)?)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.expr.eval_t(t)
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.d1.eval_t(t)
    }

    pub fn accel(&self, t: f64) -> f64 {
        self.d2.eval_t(t)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

/// Time dependent box `Omega_t = prod_i (lower_i(t), upper_i(t))` over a time
/// window. For `dim >= 2` the box has corners, so it is only used for region
/// and weight evaluation.
#[derive(Debug, Clone)]
pub struct MovingDomain {
    dim: usize,
    lower: Vec<BoundaryCurve>,
    upper: Vec<BoundaryCurve>,
    window: (f64, f64),
    margin: f64,
    sample_resolution: usize,
}

pub const DEFAULT_MARGIN: f64 = 0.05;

impl MovingDomain {
    pub fn new(
        lower: Vec<BoundaryCurve>,
        upper: Vec<BoundaryCurve>,
        window: (f64, f64),
        margin: f64,
        sample_resolution: usize,
    ) -> Result<Self> {
        let dim = lower.len();
        if !(1..=3).contains(&dim) || upper.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "need 1..=3 lower/upper curve pairs, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "time window ({}, {}) is empty",
                window.0, window.1
            )));
        }
        if !(margin > 0.0 && margin < 1.0) {
            return Err(Error::InvalidDomain(format!("margin {margin} not in (0, 1)")));
        }
        let domain = Self {
            dim,
            lower,
            upper,
            window,
            margin,
            sample_resolution: sample_resolution.max(1),
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Interval `(lower(t), upper(t))` in one dimension.
    pub fn interval(lower: &str, upper: &str, window: (f64, f64)) -> Result<Self> {
        Self::product(&[lower], &[upper], window)
    }

    /// Box `Π_d (lower_d(t), upper_d(t))`.
    pub fn product(lower: &[&str], upper: &[&str], window: (f64, f64)) -> Result<Self> {
        let parse = |v: &[&str]| v.iter().map(|s| BoundaryCurve::parse(s)).collect::<Result<Vec<_>>>();
        Self::new(parse(lower)?, parse(upper)?, window, DEFAULT_MARGIN, 200)
    }

    fn validate(&self) -> Result<()> {
        let limit = 1.0 - self.margin;
        for t in self.sample_times() {
            for d in 0..self.dim {
                let (a, b) = (self.lower[d].value(t), self.upper[d].value(t));
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidDomain(format!(
                        "boundary of dimension {} is not finite at t = {t}",
                        d + 1
                    )));
                }
                if a >= b {
                    return Err(Error::InvalidDomain(format!(
                        "empty cross section in dimension {} at t = {t} ({a} >= {b})",
                        d + 1
                    )));
                }
                for c in [&self.lower[d], &self.upper[d]] {
                    let speed = c.speed(t).abs();
                    if !(speed <= limit) {
                        return Err(Error::LuminalBoundary { t, speed, limit });
                    }
                }
            }
        }
        Ok(())
    }

    /// Sample times used for invariant checks.
    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        let (t0, t1) = self.window;
        let count = ((t1 - t0) * self.sample_resolution as f64).ceil().max(1.0) as usize;
        (0..=count).map(move |i| t0 + (t1 - t0) * i as f64 / count as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn lower(&self, d: usize) -> &BoundaryCurve {
        &self.lower[d]
    }

    pub fn upper(&self, d: usize) -> &BoundaryCurve {
        &self.upper[d]
    }

    pub fn width(&self, d: usize, t: f64) -> f64 {
        self.upper[d].value(t) - self.lower[d].value(t)
    }

    /// Largest boundary speed over the sample times.
    pub fn max_boundary_speed(&self) -> f64 {
        self.sample_times()
            .flat_map(|t| {
                (0..self.dim).flat_map(move |d| {
                    [self.lower[d].speed(t).abs(), self.upper[d].speed(t).abs()]
                })
            })
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, pt: &Point) -> bool {
        (0..self.dim).all(|d| {
            let x = pt.x[d];
            x > self.lower[d].value(pt.t) && x < self.upper[d].value(pt.t)
        })
    }

    /// Euclidean distance from `x` to the closed cross section at time `t`
    /// (zero inside).
    pub fn distance_to_slice(&self, t: f64, x: &[f64; 3]) -> f64 {
        (0..self.dim)
            .map(|d| {
                let (a, b) = (self.lower[d].value(t), self.upper[d].value(t));
                let gap = (a - x[d]).max(x[d] - b).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from an interior `x` to the boundary of the cross section.
    pub fn depth_in_slice(&self, t: f64, x: &[f64; 3]) -> f64 {
        (0..self.dim)
            .map(|d| (x[d] - self.lower[d].value(t)).min(self.upper[d].value(t) - x[d]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup |y - x0|` over boundary points `y` of the slice at time `t`.
    pub fn farthest_boundary_distance(&self, t: f64, x0: &[f64; 3]) -> f64 {
        (0..self.dim)
            .map(|d| {
                let far = (self.lower[d].value(t) - x0[d])
                    .abs()
                    .max((self.upper[d].value(t) - x0[d]).abs());
                far * far
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Face of the box on which `pt` lies, within `tol`. Points on an edge or
    /// corner (several faces) are rejected.
    pub fn face_of(&self, pt: &Point, tol: f64) -> Result<Face> {
        let mut found = None;
        for d in 0..self.dim {
            let (a, b) = (self.lower[d].value(pt.t), self.upper[d].value(pt.t));
            let x = pt.x[d];
            if x < a - tol || x > b + tol {
                return Err(self.not_on_boundary(pt));
            }
            let side = if (x - a).abs() <= tol {
                Some(Side::Lower)
            } else if (x - b).abs() <= tol {
                Some(Side::Upper)
            } else {
                None
            };
            if let Some(side) = side {
                if found.is_some() {
                    return Err(self.not_on_boundary(pt));
                }
                found = Some(Face { dim: d, side });
            }
        }
        found.ok_or_else(|| self.not_on_boundary(pt))
    }

    fn not_on_boundary(&self, pt: &Point) -> Error {
        Error::NotOnBoundary {
            t: pt.t,
            x: pt.x[..self.dim].to_vec(),
        }
    }

    /// Outward Minkowski unit normal of the face at time `t`.
    pub fn face_normal(&self, face: Face, t: f64) -> Result<BoundaryNormal> {
        let curve = match face.side {
            Side::Lower => &self.lower[face.dim],
            Side::Upper => &self.upper[face.dim],
        };
        let speed = curve.speed(t);
        let limit = 1.0 - self.margin;
        if !(speed.abs() < limit) {
            return Err(Error::LuminalBoundary {
                t,
                speed: speed.abs(),
                limit,
            });
        }
        let sign = match face.side {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        };
        let norm = (1.0 - speed * speed).sqrt();
        let mut spatial = [0.0; 3];
        spatial[face.dim] = sign / norm;
        Ok(BoundaryNormal {
            nt: sign * speed / norm,
            nx: spatial,
            speed,
        })
    }

    /// Outward Minkowski unit normal at a boundary point.
    pub fn minkowski_normal(&self, pt: &Point) -> Result<BoundaryNormal> {
        let face = self.face_of(pt, 1e-9)?;
        self.face_normal(face, pt.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub dim: usize,
    pub side: Side,
}

/// Outward unit normal `N = (N^t, N^x)` (vector components) with
/// `g(N, N) = -(N^t)^2 + |N^x|^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNormal {
    pub nt: f64,
    pub nx: [f64; 3],
    /// Velocity of the boundary face, `dc/dt`.
    pub speed: f64,
}

impl BoundaryNormal {
    pub fn minkowski_norm_sq(&self) -> f64 {
        -self.nt * self.nt + self.nx.iter().map(|v| v * v).sum::<f64>()
    }

    /// Lowered-index components `N_mu = g_{mu nu} N^nu = (-N^t, N^x)`.
    pub fn covector(&self) -> (f64, [f64; 3]) {
        (-self.nt, self.nx)
    }

    /// `N h` for a function with Cartesian gradient `(dh/dt, grad_x h)`.
    pub fn apply(&self, dt: f64, grad: &[f64; 3]) -> f64 {
        self.nt * dt + (0..3).map(|i| self.nx[i] * grad[i]).sum::<f64>()
    }

    /// Induced boundary measure factor `sqrt(1 - speed^2)`.
    pub fn measure_factor(&self) -> f64 {
        (1.0 - self.speed * self.speed).sqrt()
    }
}

/// Map from the moving box onto the static unit cube,
/// `xhat_i = (x_i - lower_i(t)) / (upper_i(t) - lower_i(t))`.
#[derive(Debug, Clone, Copy)]
pub struct CylinderMap<'a> {
    domain: &'a MovingDomain,
}

impl<'a> CylinderMap<'a> {
    pub fn new(domain: &'a MovingDomain) -> Self {
        Self { domain }
    }

    pub fn forward(&self, pt: &Point) -> Point {
        let mut xs = [0.0; 3];
        for (d, out) in xs.iter_mut().enumerate().take(self.domain.dim) {
            let a = self.domain.lower[d].value(pt.t);
            *out = (pt.x[d] - a) / self.domain.width(d, pt.t);
        }
        Point { t: pt.t, x: xs }
    }

    pub fn inverse(&self, pt: &Point) -> Point {
        let mut xs = [0.0; 3];
        for (d, out) in xs.iter_mut().enumerate().take(self.domain.dim) {
            let a = self.domain.lower[d].value(pt.t);
            *out = a + pt.x[d] * self.domain.width(d, pt.t);
        }
        Point { t: pt.t, x: xs }
    }

    /// `d xhat_d / d x_d` at time `t`.
    pub fn dxhat_dx(&self, d: usize, t: f64) -> f64 {
        1.0 / self.domain.width(d, t)
    }

    /// `d xhat_d / d t` at fixed `x`, expressed at the reference coordinate.
    pub fn dxhat_dt(&self, d: usize, t: f64, xhat: f64) -> f64 {
        let a1 = self.domain.lower[d].speed(t);
        let l1 = self.domain.upper[d].speed(t) - a1;
        -(a1 + xhat * l1) / self.domain.width(d, t)
    }
}

/// Shifted null coordinates around `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullCoords {
    pub t_p: f64,
    pub r_p: f64,
    pub u_p: f64,
    pub v_p: f64,
    pub f_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationClass {
    Exterior,
    Interior,
    Boundary,
}

/// Observation point `p = (t0, x0)` and the coordinates it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationFrame {
    pub center: Point,
    pub dim: usize,
}

impl ObservationFrame {
    pub fn new(t0: f64, x0: &[f64]) -> Self {
        Self {
            center: Point::new(t0, x0),
            dim: x0.len(),
        }
    }

    pub fn x_p(&self, pt: &Point) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (d, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = pt.x[d] - self.center.x[d];
        }
        out
    }

    pub fn null_coords(&self, pt: &Point) -> NullCoords {
        let t_p = pt.t - self.center.t;
        let x_p = self.x_p(pt);
        let r_p = x_p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u_p = 0.5 * (t_p - r_p);
        let v_p = 0.5 * (t_p + r_p);
        NullCoords {
            t_p,
            r_p,
            u_p,
            v_p,
            f_p: -u_p * v_p,
        }
    }

    pub fn f_p(&self, pt: &Point) -> f64 {
        self.null_coords(pt).f_p
    }

    /// Cartesian gradient `(d/dt, grad_x)` of `f_p = (r_p^2 - t_p^2)/4`.
    pub fn grad_f(&self, pt: &Point) -> (f64, [f64; 3]) {
        let x_p = self.x_p(pt);
        (
            -0.5 * (pt.t - self.center.t),
            [0.5 * x_p[0], 0.5 * x_p[1], 0.5 * x_p[2]],
        )
    }

    /// `N f_p` for a boundary normal.
    pub fn normal_derivative_f(&self, normal: &BoundaryNormal, pt: &Point) -> f64 {
        let (dt, grad) = self.grad_f(pt);
        normal.apply(dt, &grad)
    }

    /// `N r_p`; zero at `r_p = 0`.
    pub fn normal_derivative_r(&self, normal: &BoundaryNormal, pt: &Point) -> f64 {
        let x_p = self.x_p(pt);
        let r = x_p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        (0..3).map(|d| normal.nx[d] * x_p[d] / r).sum()
    }

    /// The boundary functional `(1 - eps r_p) N f_p + eps f_p N r_p` whose
    /// positivity selects the observed part of the boundary.
    pub fn boundary_functional(&self, normal: &BoundaryNormal, pt: &Point, eps: f64) -> f64 {
        let nc = self.null_coords(pt);
        (1.0 - eps * nc.r_p) * self.normal_derivative_f(normal, pt)
            + eps * nc.f_p * self.normal_derivative_r(normal, pt)
    }

    pub fn classify(&self, domain: &MovingDomain, tol: f64) -> LocationClass {
        let dist = domain.distance_to_slice(self.center.t, &self.center.x);
        if dist > tol {
            LocationClass::Exterior
        } else if domain.depth_in_slice(self.center.t, &self.center.x) > tol {
            LocationClass::Interior
        } else {
            LocationClass::Boundary
        }
    }
}

/// Result of the time-window admissibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub r_plus: f64,
    pub r_minus: f64,
    pub window_length: f64,
    /// `(tau+ - tau-) - (R+ + R-)`; must be positive.
    pub window_gap: f64,
    /// Open interval of admissible `t0`.
    pub t0_range: (f64, f64),
    pub t0: Option<f64>,
    /// `min(t0 - tau- - R-, tau+ - t0 - R+)` when `t0` is given.
    pub t0_gap: Option<f64>,
    pub passed: bool,
}

/// Checks `tau+ - tau- > R+ + R-`, `t0 - tau- > R-` and `tau+ - t0 > R+`,
/// where `R_pm = sup |y - x0|` over boundary points at `tau_pm`.
pub fn check_admissibility(
    domain: &MovingDomain,
    frame: &ObservationFrame,
    window: (f64, f64),
) -> AdmissibilityReport {
    window_report(
        domain,
        &frame.center.x[..frame.dim],
        window,
        Some(frame.center.t),
    )
}

/// Same test as [`check_admissibility`] with an optional `t0`.
pub fn window_report(
    domain: &MovingDomain,
    x0: &[f64],
    window: (f64, f64),
    t0: Option<f64>,
) -> AdmissibilityReport {
    let x0 = Point::new(0.0, x0).x;
    let r_minus = domain.farthest_boundary_distance(window.0, &x0);
    let r_plus = domain.farthest_boundary_distance(window.1, &x0);
    let window_length = window.1 - window.0;
    let window_gap = window_length - (r_plus + r_minus);
    let t0_range = (window.0 + r_minus, window.1 - r_plus);
    let t0_gap = t0.map(|t0| (t0 - window.0 - r_minus).min(window.1 - t0 - r_plus));
    let passed = window_gap > 0.0 && t0_gap.is_none_or(|g| g > 0.0);
    AdmissibilityReport {
        r_plus,
        r_minus,
        window_length,
        window_gap,
        t0_range,
        t0,
        t0_gap,
        passed,
    }
}

/// Midpoint of the admissible `t0` interval, if it is nonempty.
pub fn auto_t0(domain: &MovingDomain, x0: &[f64], window: (f64, f64)) -> Option<f64> {
    let report = window_report(domain, x0, window, None);
    (report.window_gap > 0.0).then_some(0.5 * (report.t0_range.0 + report.t0_range.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, Draw};
    use approx::assert_relative_eq;

    #[test]
    fn null_frame_examples() {
        let frame = ObservationFrame::new(0.0, &[0.0, 0.0]);
        let c = frame.null_coords(&Point::new(0.0, &[2.0, 0.0]));
        assert_eq!((c.f_p, c.r_p, c.u_p, c.v_p), (1.0, 2.0, -1.0, 1.0));
        let c = frame.null_coords(&Point::new(2.0, &[2.0, 0.0]));
        assert_eq!(c.f_p, 0.0);

        let frame = ObservationFrame::new(1.0, &[0.5]);
        let c = frame.null_coords(&Point::new(3.0, &[1.5]));
        assert_eq!((c.t_p, c.r_p, c.u_p, c.v_p), (2.0, 1.0, 0.5, 1.5));
        assert_eq!(c.f_p, -0.75);
    }

    #[test]
    fn null_identities_and_evenness() {
        let mut rng = seeded(7);
        let frame = ObservationFrame::new(0.3, &[-0.2, 0.1, 0.4]);
        for _ in 0..1000 {
            let pt = Point::new(
                rng.uniform(-3.0, 3.0),
                &[rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)],
            );
            let c = frame.null_coords(&pt);
            assert_eq!(c.u_p * c.v_p + c.f_p, 0.0);
            assert!((c.t_p - (c.u_p + c.v_p)).abs() <= 1e-15 * (1.0 + c.t_p.abs()));
            assert!((c.r_p - (c.v_p - c.u_p)).abs() <= 1e-15 * (1.0 + c.r_p.abs()));
            let s = pt.t - frame.center.t;
            let mirrored = Point { t: frame.center.t - s, ..pt };
            let scale = 1.0 + c.t_p * c.t_p + c.r_p * c.r_p;
            assert!((frame.f_p(&mirrored) - c.f_p).abs() <= 4.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn static_wall_normals() {
        let dom = MovingDomain::interval("-1", "1", (0.0, 2.0)).unwrap();
        let n = dom.minkowski_normal(&Point::new(0.7, &[1.0])).unwrap();
        assert_eq!((n.nt, n.nx[0]), (0.0, 1.0));
        let n = dom.minkowski_normal(&Point::new(0.7, &[-1.0])).unwrap();
        assert_eq!((n.nt, n.nx[0]), (0.0, -1.0));
        assert!(matches!(
            dom.minkowski_normal(&Point::new(0.7, &[0.2])),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn moving_wall_normal() {
        let dom = MovingDomain::interval("-1", "1 + t/2", (0.0, 1.0)).unwrap();
        let pt = Point::new(0.0, &[1.0]);
        let n = dom.minkowski_normal(&pt).unwrap();
        let s = 0.75f64.sqrt();
        assert_relative_eq!(n.nt, 0.5 / s, epsilon = 1e-15);
        assert_relative_eq!(n.nx[0], 1.0 / s, epsilon = 1e-15);
        let (cov_t, cov_x) = n.covector();
        assert_relative_eq!(cov_t, -0.5 / s, epsilon = 1e-15);
        assert_relative_eq!(cov_x[0], 1.0 / s, epsilon = 1e-15);
        assert_relative_eq!(n.minkowski_norm_sq(), 1.0, epsilon = 1e-12);
        // normal is g-orthogonal to the boundary tangent (1, 1/2)
        assert!((-n.nt * 1.0 + n.nx[0] * 0.5).abs() < 1e-15);
        let frame = ObservationFrame::new(0.0, &[0.0]);
        let nf = frame.normal_derivative_f(&n, &pt);
        assert_relative_eq!(nf, 1.0 / (2.0 * s), epsilon = 1e-15);
        assert!((nf - 0.5774).abs() < 1e-4);
    }

    #[test]
    fn rejects_superluminal_and_empty_domains() {
        assert!(matches!(
            MovingDomain::interval("0", "1 + 1.5*t", (0.0, 1.0)),
            Err(Error::LuminalBoundary { .. })
        ));
        assert!(matches!(
            MovingDomain::interval("0", "1 - 0.9*t", (0.0, 2.0)),
            Err(Error::InvalidDomain(_))
        ));
        // speed 0.97 is below light speed but inside the default margin
        assert!(MovingDomain::interval("0", "1 + 0.97*t", (0.0, 1.0)).is_err());
    }

    #[test]
    fn cylinder_map_round_trip() {
        let dom = MovingDomain::new(
            vec![BoundaryCurve::parse("-1 + 0.1*sin(t)").unwrap(), BoundaryCurve::parse("-0.5").unwrap()],
            vec![BoundaryCurve::parse("1 + 0.25*t").unwrap(), BoundaryCurve::parse("0.5 + 0.2*t").unwrap()],
            (0.0, 2.0),
            DEFAULT_MARGIN,
            100,
        )
        .unwrap();
        let map = CylinderMap::new(&dom);
        let mut rng = seeded(3);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let t = rng.uniform(0.0, 2.0);
            let pt = Point::new(t, &[rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)]);
            let back = map.inverse(&map.forward(&pt));
            for d in 0..2 {
                worst = worst.max((back.x[d] - pt.x[d]).abs());
            }
            let hat = map.forward(&pt);
            let inside = (0..2).all(|d| hat.x[d] > 0.0 && hat.x[d] < 1.0);
            assert_eq!(inside, dom.contains(&pt));
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn cylinder_map_time_derivative() {
        let dom = MovingDomain::interval("0.1*t^2", "1 + 0.25*t", (0.0, 2.0)).unwrap();
        let map = CylinderMap::new(&dom);
        let (t, x) = (0.8, 0.6);
        let h = 1e-6;
        let fd = (map.forward(&Point::new(t + h, &[x])).x[0]
            - map.forward(&Point::new(t - h, &[x])).x[0])
            / (2.0 * h);
        let xhat = map.forward(&Point::new(t, &[x])).x[0];
        assert_relative_eq!(map.dxhat_dt(0, t, xhat), fd, epsilon = 1e-8);
    }

    #[test]
    fn admissibility_examples() {
        let dom = MovingDomain::interval("-1", "1", (0.0, 2.5)).unwrap();
        let rep = check_admissibility(&dom, &ObservationFrame::new(1.25, &[0.0]), (0.0, 2.5));
        assert_eq!((rep.r_plus, rep.r_minus), (1.0, 1.0));
        assert!(rep.passed);
        assert_eq!(auto_t0(&dom, &[0.0], (0.0, 2.5)), Some(1.25));
        let rep = window_report(&dom, &[0.0], (0.0, 1.5), None);
        assert!(!rep.passed);
        assert!(rep.window_gap < 0.0);

        let dom = MovingDomain::interval("-1", "1 + 0.25*t", (0.0, 4.0)).unwrap();
        let rep = window_report(&dom, &[0.0], (0.0, 4.0), None);
        assert_eq!((rep.r_minus, rep.r_plus), (1.0, 2.0));
        assert!(rep.passed);
        assert_relative_eq!(rep.window_gap, 1.0);
    }

    #[test]
    fn location_classes() {
        let dom = MovingDomain::interval("-1", "1", (0.0, 2.5)).unwrap();
        assert_eq!(ObservationFrame::new(1.0, &[0.0]).classify(&dom, 1e-12), LocationClass::Interior);
        assert_eq!(ObservationFrame::new(1.0, &[3.0]).classify(&dom, 1e-12), LocationClass::Exterior);
        assert_eq!(ObservationFrame::new(1.0, &[1.0]).classify(&dom, 1e-12), LocationClass::Boundary);
    }
}

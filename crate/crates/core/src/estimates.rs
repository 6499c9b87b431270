//! Spacetime quadrature over masked node sets and the two sides of the
//! interior Carleman estimate, the observability inequality and the energy
//! estimates, evaluated on discrete fields.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{MovingDomain, ObservationFrame};
use crate::grid::{GridSpec, Mesh};
use crate::regions::{RegionMask, RegionMasks};
use crate::rng::{Draw, SeededRng};
use crate::wavesolver::{energy, CoefficientSet, SpacetimeField};
use crate::weights::{log_zeta_unit, CarlemanParams};

/// Value and first derivatives of a trial function at one node, plus the
/// d'Alembertian `-phi_tt + Δ phi`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub phi: f64,
    pub phi_t: f64,
    pub grad: [f64; 3],
    pub box_phi: f64,
}

/// Jets on every node of a mesh.
#[derive(Debug, Clone)]
pub struct Jets {
    pub mesh: Arc<Mesh>,
    pub nodes: Vec<Jet>,
}

/// Which d'Alembertian goes into the jets of a solver field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxVariant {
    /// Second differences of the field.
    Discrete,
    /// `-X.grad phi - V phi` from the adjoint equation.
    Substituted,
}

fn time_diff(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let nt = mesh.grid.nt;
    let k = mesh.k;
    let s = mesh.slice_len;
    let mut out = vec![0.0; values.len()];
    for n in 0..=nt {
        for j in 0..s {
            let v = |m: usize| values[m * s + j];
            out[n * s + j] = if nt == 1 {
                (v(1) - v(0)) / k
            } else if n == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * k)
            } else if n == nt {
                (3.0 * v(nt) - 4.0 * v(nt - 1) + v(nt - 2)) / (2.0 * k)
            } else {
                (v(n + 1) - v(n - 1)) / (2.0 * k)
            };
        }
    }
    out
}

fn time_diff2(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let nt = mesh.grid.nt;
    let k2 = mesh.k * mesh.k;
    let s = mesh.slice_len;
    let mut out = vec![0.0; values.len()];
    if nt < 3 {
        return out;
    }
    for n in 0..=nt {
        for j in 0..s {
            let v = |m: usize| values[m * s + j];
            out[n * s + j] = if n == 0 {
                (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / k2
            } else if n == nt {
                (2.0 * v(nt) - 5.0 * v(nt - 1) + 4.0 * v(nt - 2) - v(nt - 3)) / k2
            } else {
                (v(n + 1) - 2.0 * v(n) + v(n - 1)) / k2
            };
        }
    }
    out
}

fn xi_diff(mesh: &Mesh, values: &[f64], d: usize) -> Vec<f64> {
    let h = mesh.h_hat;
    let s = mesh.slice_len;
    let mut out = vec![0.0; values.len()];
    for n in 0..mesh.levels() {
        for j in 0..s {
            let at = |delta: isize| values[n * s + mesh.shift(j, d, delta).expect("neighbour")];
            let i = mesh.multi_index(j)[d];
            out[n * s + j] = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == mesh.m - 1 {
                (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
            } else {
                (at(1) - at(-1)) / (2.0 * h)
            };
        }
    }
    out
}

fn xi_diff2(mesh: &Mesh, values: &[f64], d: usize) -> Vec<f64> {
    let h2 = mesh.h_hat * mesh.h_hat;
    let s = mesh.slice_len;
    let mut out = vec![0.0; values.len()];
    for n in 0..mesh.levels() {
        for j in 0..s {
            let at = |delta: isize| values[n * s + mesh.shift(j, d, delta).expect("neighbour")];
            let i = mesh.multi_index(j)[d];
            out[n * s + j] = if i == 0 {
                (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
            } else if i == mesh.m - 1 {
                (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / h2
            } else {
                (at(1) - 2.0 * at(0) + at(-1)) / h2
            };
        }
    }
    out
}

impl Jets {
    /// Finite-difference jets of a field (second order, one sided at the
    /// ends of the window and on the faces).
    pub fn from_field(
        field: &SpacetimeField,
        variant: BoxVariant,
        coeffs: Option<&CoefficientSet>,
    ) -> Result<Self> {
        let mesh = field.mesh.clone();
        let dim = mesh.dim;
        if mesh.m < 4 || mesh.grid.nt < 3 {
            return Err(Error::InvalidInput("mesh too coarse for jets".into()));
        }
        let w = &field.values;
        let w_t = time_diff(&mesh, w);
        let w_xi: Vec<Vec<f64>> = (0..dim).map(|d| xi_diff(&mesh, w, d)).collect();
        let mut nodes = vec![Jet::default(); w.len()];
        for n in 0..mesh.levels() {
            for j in 0..mesh.slice_len {
                let g = mesh.global(n, j);
                let idx = mesh.multi_index(j);
                let jet = &mut nodes[g];
                jet.phi = w[g];
                jet.phi_t = w_t[g];
                for d in 0..dim {
                    let s = mesh.span(n, d);
                    let mu = -(s.lo_d1 + mesh.xhat(idx[d]) * s.width_d1) / s.width;
                    jet.phi_t += mu * w_xi[d][g];
                    jet.grad[d] = w_xi[d][g] / s.width;
                }
            }
        }
        match variant {
            BoxVariant::Substituted => {
                let coeffs = coeffs.ok_or_else(|| {
                    Error::InvalidInput("substituted d'Alembertian needs coefficients".into())
                })?;
                for n in 0..mesh.levels() {
                    let t = mesh.time(n);
                    for j in 0..mesh.slice_len {
                        let x = mesh.x(n, j);
                        let jet = &mut nodes[mesh.global(n, j)];
                        let mut transport = coeffs.xt.eval(t, &x[..dim]) * jet.phi_t;
                        for d in 0..dim {
                            transport += coeffs.xx[d].eval(t, &x[..dim]) * jet.grad[d];
                        }
                        jet.box_phi = -transport - coeffs.v.eval(t, &x[..dim]) * jet.phi;
                    }
                }
            }
            BoxVariant::Discrete => {
                let w_tt = time_diff2(&mesh, w);
                let w_txi: Vec<Vec<f64>> = w_xi.iter().map(|v| time_diff(&mesh, v)).collect();
                let mut w_xixi = vec![vec![Vec::new(); dim]; dim];
                for d in 0..dim {
                    for e in 0..dim {
                        w_xixi[d][e] = if d == e {
                            xi_diff2(&mesh, w, d)
                        } else {
                            xi_diff(&mesh, &w_xi[d], e)
                        };
                    }
                }
                for n in 0..mesh.levels() {
                    for j in 0..mesh.slice_len {
                        let g = mesh.global(n, j);
                        let idx = mesh.multi_index(j);
                        let mut mu = [0.0; 3];
                        let mut mu_t = [0.0; 3];
                        let mut mu_xi = [0.0; 3];
                        let mut l = [1.0; 3];
                        for d in 0..dim {
                            let s = mesh.span(n, d);
                            let xi = mesh.xhat(idx[d]);
                            let speed = s.lo_d1 + xi * s.width_d1;
                            l[d] = s.width;
                            mu[d] = -speed / s.width;
                            mu_t[d] = -((s.lo_d2 + xi * s.width_d2) * s.width - speed * s.width_d1)
                                / (s.width * s.width);
                            mu_xi[d] = -s.width_d1 / s.width;
                        }
                        let mut phi_tt = w_tt[g];
                        let mut lap = 0.0;
                        for d in 0..dim {
                            phi_tt += 2.0 * mu[d] * w_txi[d][g] + (mu_t[d] + mu[d] * mu_xi[d]) * w_xi[d][g];
                            for e in 0..dim {
                                phi_tt += mu[d] * mu[e] * w_xixi[d][e][g];
                            }
                            lap += w_xixi[d][d][g] / (l[d] * l[d]);
                        }
                        nodes[g].box_phi = -phi_tt + lap;
                    }
                }
            }
        }
        Ok(Self { mesh, nodes })
    }

    /// Jets from a closed form `(t, x) -> Jet`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64, &[f64]) -> Jet) -> Self {
        let mut nodes = Vec::with_capacity(mesh.len());
        for n in 0..mesh.levels() {
            let t = mesh.time(n);
            for j in 0..mesh.slice_len {
                nodes.push(f(t, &mesh.x(n, j)[..mesh.dim]));
            }
        }
        Self { mesh, nodes }
    }

    pub fn scale(&self, c: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|j| Jet {
                phi: c * j.phi,
                phi_t: c * j.phi_t,
                grad: [c * j.grad[0], c * j.grad[1], c * j.grad[2]],
                box_phi: c * j.box_phi,
            })
            .collect();
        Self { mesh: self.mesh.clone(), nodes }
    }

    pub fn is_zero(&self) -> bool {
        self.nodes.iter().all(|j| j.phi == 0.0 && j.phi_t == 0.0 && j.grad == [0.0; 3])
    }
}

/// Quadrature weights on nodes with `f_p > f_min`: the trapezoid volume times
/// the fraction of four subsamples of the node's dual cell that also satisfy
/// `f_p > f_min`. Nodes outside `region` get weight 0.
pub fn cone_quadrature(
    mesh: &Mesh,
    frame: &ObservationFrame,
    f_min: f64,
    region: Option<&RegionMask>,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.len()];
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let g = mesh.global(n, j);
            if region.is_some_and(|r| !r.get(g)) {
                continue;
            }
            let pt = mesh.point(n, j);
            if frame.f_p(&pt) <= f_min {
                continue;
            }
            let mut hits = 0;
            for (st, sx) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                let mut q = pt;
                q.t += 0.25 * st * mesh.k;
                for d in 0..mesh.dim {
                    q.x[d] += 0.25 * sx * mesh.spacing(n, d);
                }
                if frame.f_p(&q) > f_min {
                    hits += 1;
                }
            }
            out[g] = mesh.node_volume(n, j) * hits as f64 / 4.0;
        }
    }
    out
}

/// Default cutoff `f_min = (largest spacing)^2`.
pub fn default_f_min(mesh: &Mesh) -> f64 {
    let h = mesh.max_spacing().max(mesh.k);
    h * h
}

/// Null coordinates and `log zeta` on the quadrature nodes, normalised so
/// that the largest weight is 1 (`zeta = exp(log_scale) * weight`).
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub params: CarlemanParams,
    pub f_min: f64,
    /// `U ∩ D_p` quadrature weights.
    pub quad: Vec<f64>,
    /// `W` quadrature weights.
    pub quad_w: Vec<f64>,
    pub weight: Vec<f64>,
    pub log_scale: f64,
    f: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    xp: Vec<[f64; 3]>,
}

impl WeightTable {
    pub fn new(
        mesh: &Mesh,
        frame: &ObservationFrame,
        params: &CarlemanParams,
        masks: &RegionMasks,
        f_min: f64,
    ) -> Result<Self> {
        let quad = cone_quadrature(mesh, frame, f_min, Some(&masks.u_dp));
        let quad_w = cone_quadrature(mesh, frame, f_min, Some(&masks.w));
        let len = mesh.len();
        let mut table = Self {
            params: *params,
            f_min,
            quad,
            quad_w,
            weight: vec![0.0; len],
            log_scale: f64::NEG_INFINITY,
            f: vec![0.0; len],
            r: vec![0.0; len],
            u: vec![0.0; len],
            v: vec![0.0; len],
            xp: vec![[0.0; 3]; len],
        };
        let mut logs = vec![f64::NEG_INFINITY; len];
        for n in 0..mesh.levels() {
            for j in 0..mesh.slice_len {
                let g = mesh.global(n, j);
                if table.quad[g] == 0.0 {
                    continue;
                }
                let pt = mesh.point(n, j);
                let c = frame.null_coords(&pt);
                table.f[g] = c.f_p;
                table.r[g] = c.r_p;
                table.u[g] = c.u_p;
                table.v[g] = c.v_p;
                table.xp[g] = frame.x_p(&pt);
                logs[g] = 2.0 * params.a * log_zeta_unit(frame, params, &pt)?;
                table.log_scale = table.log_scale.max(logs[g]);
            }
        }
        if table.log_scale == f64::NEG_INFINITY {
            return Err(Error::EmptyRegion("U ∩ D_p"));
        }
        for g in 0..len {
            if table.quad[g] > 0.0 {
                table.weight[g] = (logs[g] - table.log_scale).exp();
            }
        }
        Ok(table)
    }
}

/// The named integrals of the interior Carleman estimate (with the unknown
/// constant removed and the weight divided by `exp(log_weight_scale)`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CarlemanTerms {
    /// `eps ∫ zeta r^-1 (|u d_u phi|^2 + |v d_v phi|^2 + f |∇_tan phi|^2)`
    pub first_order: f64,
    pub u_part: f64,
    pub v_part: f64,
    pub angular_part: f64,
    /// `b a^2 ∫ zeta f^-1/2 phi^2`
    pub zeroth_order: f64,
    /// `(1/a) ∫ zeta f |□ phi|^2`
    pub box_term: f64,
    /// `a R^2 ∫_W zeta f^-1 |phi_t|^2`
    pub dt_w_term: f64,
    /// `a^4 R^4 ∫_W zeta f^-3 phi^2`
    pub phi_w_term: f64,
}

impl CarlemanTerms {
    pub fn lhs(&self) -> f64 {
        self.first_order + self.zeroth_order
    }

    pub fn rhs(&self) -> f64 {
        self.box_term + self.dt_w_term + self.phi_w_term
    }
}

/// Both sides of one inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` when both sides vanish.
    pub constant: Option<f64>,
    pub params: Option<CarlemanParams>,
    pub grid: GridSpec,
    pub terms: Option<CarlemanTerms>,
    pub log_weight_scale: Option<f64>,
}

impl EstimateReport {
    fn new(lhs: f64, rhs: f64, grid: GridSpec) -> Self {
        let constant = if lhs == 0.0 && rhs == 0.0 {
            None
        } else if rhs == 0.0 {
            Some(f64::INFINITY)
        } else {
            Some(lhs / rhs)
        };
        Self {
            lhs,
            rhs,
            constant,
            params: None,
            grid,
            terms: None,
            log_weight_scale: None,
        }
    }

    pub fn skipped(&self) -> bool {
        self.constant.is_none()
    }
}

/// Rejects trials that do not vanish on `∂U ∩ D_p`.
pub fn check_boundary_condition(jets: &Jets, frame: &ObservationFrame) -> Result<()> {
    let mesh = &jets.mesh;
    let scale = jets.nodes.iter().fold(0.0f64, |m, j| m.max(j.phi.abs()));
    let mut worst: f64 = 0.0;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            if mesh.is_boundary(j) && frame.f_p(&mesh.point(n, j)) > 0.0 {
                worst = worst.max(jets.nodes[mesh.global(n, j)].phi.abs());
            }
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::BoundaryConditionViolation(worst));
    }
    Ok(())
}

fn lhs_terms(jets: &Jets, table: &WeightTable) -> CarlemanTerms {
    let p = &table.params;
    let mut terms = CarlemanTerms::default();
    let dim = jets.mesh.dim;
    for (g, jet) in jets.nodes.iter().enumerate() {
        let q = table.quad[g];
        if q == 0.0 {
            continue;
        }
        let zw = q * table.weight[g];
        let (f, r, u, v) = (table.f[g], table.r[g], table.u[g], table.v[g]);
        let xp = table.xp[g];
        let dr: f64 = (0..dim).map(|d| xp[d] / r * jet.grad[d]).sum();
        let du = jet.phi_t - dr;
        let dv = jet.phi_t + dr;
        let tan_sq = if dim == 1 {
            0.0
        } else {
            (0..dim)
                .map(|d| (jet.grad[d] - dr * xp[d] / r).powi(2))
                .sum::<f64>()
        };
        terms.u_part += zw / r * (u * du).powi(2);
        terms.v_part += zw / r * (v * dv).powi(2);
        terms.angular_part += zw / r * f * tan_sq;
        terms.zeroth_order += zw / f.sqrt() * jet.phi * jet.phi;
    }
    terms.u_part *= p.eps;
    terms.v_part *= p.eps;
    terms.angular_part *= p.eps;
    terms.first_order = terms.u_part + terms.v_part + terms.angular_part;
    terms.zeroth_order *= p.b * p.a * p.a;
    terms
}

fn rhs_terms(jets: &Jets, table: &WeightTable, terms: &mut CarlemanTerms) {
    let p = &table.params;
    let (mut boxed, mut dt_w, mut phi_w) = (0.0, 0.0, 0.0);
    for (g, jet) in jets.nodes.iter().enumerate() {
        let q = table.quad[g];
        if q == 0.0 {
            continue;
        }
        let z = table.weight[g];
        let f = table.f[g];
        boxed += q * z * f * jet.box_phi * jet.box_phi;
        let qw = table.quad_w[g];
        if qw > 0.0 {
            dt_w += qw * z / f * jet.phi_t * jet.phi_t;
            phi_w += qw * z / f.powi(3) * jet.phi * jet.phi;
        }
    }
    terms.box_term = boxed / p.a;
    terms.dt_w_term = p.a * p.r * p.r * dt_w;
    terms.phi_w_term = p.a.powi(4) * p.r.powi(4) * phi_w;
}

/// The two left-hand integrals.
pub fn carleman_lhs(jets: &Jets, table: &WeightTable) -> CarlemanTerms {
    lhs_terms(jets, table)
}

/// The three right-hand integrals (left-hand fields left at zero).
pub fn carleman_rhs(jets: &Jets, table: &WeightTable) -> CarlemanTerms {
    let mut terms = CarlemanTerms::default();
    rhs_terms(jets, table, &mut terms);
    terms
}

/// Carleman report for one trial and one parameter set.
pub fn carleman_report(jets: &Jets, frame: &ObservationFrame, table: &WeightTable) -> Result<EstimateReport> {
    check_boundary_condition(jets, frame)?;
    let mut terms = lhs_terms(jets, table);
    rhs_terms(jets, table, &mut terms);
    let mut report = EstimateReport::new(terms.lhs(), terms.rhs(), jets.mesh.grid);
    report.params = Some(table.params);
    report.terms = Some(terms);
    report.log_weight_scale = Some(table.log_scale);
    Ok(report)
}

/// One row of the a-sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub reports: Vec<EstimateReport>,
    /// Largest ratio over non-skipped trials.
    pub max_ratio: Option<f64>,
}

/// Carleman ratios for every trial at every `a` of the sweep.
pub fn check_carleman(
    trials: &[Jets],
    frame: &ObservationFrame,
    params: &CarlemanParams,
    a_sweep: &[f64],
    masks: &RegionMasks,
    f_min: f64,
) -> Result<Vec<SweepRow>> {
    let Some(first) = trials.first() else {
        return Ok(Vec::new());
    };
    let mesh = first.mesh.clone();
    let mut rows = Vec::with_capacity(a_sweep.len());
    for &a in a_sweep {
        let p = params.with_a(a);
        p.validate(mesh.dim)?;
        let table = WeightTable::new(&mesh, frame, &p, masks, f_min)?;
        let mut reports = Vec::with_capacity(trials.len());
        for jets in trials {
            reports.push(carleman_report(jets, frame, &table)?);
        }
        let max_ratio = reports
            .iter()
            .filter_map(|r| r.constant)
            .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
        rows.push(SweepRow { a, reports, max_ratio });
    }
    Ok(rows)
}

/// `max_a C_a / min_a C_a` and `max_a C_a / C_{a_0}` over a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpread {
    pub max_constant: f64,
    pub min_constant: f64,
    pub spread: f64,
    pub growth: f64,
}

pub fn sweep_spread(rows: &[SweepRow]) -> Option<SweepSpread> {
    let constants: Vec<f64> = rows.iter().filter_map(|r| r.max_ratio).collect();
    let first = *constants.first()?;
    let max = constants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = constants.iter().copied().fold(f64::INFINITY, f64::min);
    Some(SweepSpread {
        max_constant: max,
        min_constant: min,
        spread: max / min,
        growth: max / first,
    })
}

/// `∫_{W'} (|phi_t|^2 + phi^2)` with trapezoid node volumes.
pub fn observation_integral(jets: &Jets, region: &RegionMask) -> f64 {
    let mesh = &jets.mesh;
    let mut total = 0.0;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let g = mesh.global(n, j);
            if region.get(g) {
                let jet = &jets.nodes[g];
                total += mesh.node_volume(n, j) * (jet.phi_t * jet.phi_t + jet.phi * jet.phi);
            }
        }
    }
    total
}

/// Observability check for one trial field.
#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityReport {
    pub report: EstimateReport,
    /// Slice energies `∫ |∇_{t,x} phi|^2 + phi^2` at `tau-` and `tau+`.
    pub slice_energy: (f64, f64),
    /// The same energies restricted to `D_p`.
    pub slice_energy_dp: (f64, f64),
}

fn slice_energy_in(field: &SpacetimeField, jets: &Jets, n: usize, frame: &ObservationFrame) -> f64 {
    let mesh = &field.mesh;
    let mut total = 0.0;
    for j in 0..mesh.slice_len {
        if frame.f_p(&mesh.point(n, j)) <= 0.0 {
            continue;
        }
        let jet = &jets.nodes[mesh.global(n, j)];
        let g2: f64 = jet.grad.iter().map(|c| c * c).sum();
        total += mesh.cell_volume(n, j) * (jet.phi_t * jet.phi_t + g2 + jet.phi * jet.phi);
    }
    total
}

/// Both sides of `∫_{τ±} (|∇phi|^2 + phi^2) <= C ∫_{W'} (|phi_t|^2 + phi^2)`
/// for each trial (the left side is the larger of the two slices).
pub fn check_observability(
    fields: &[SpacetimeField],
    frame: &ObservationFrame,
    masks: &RegionMasks,
) -> Result<Vec<ObservabilityReport>> {
    if masks.w_prime.is_empty() {
        return Err(Error::EmptyRegion("W'"));
    }
    let mut out = Vec::with_capacity(fields.len());
    for field in fields {
        let jets = Jets::from_field(field, BoxVariant::Discrete, None)?;
        let nt = field.mesh.grid.nt;
        let e0 = energy(field, 0, 1.0).total;
        let e1 = energy(field, nt, 1.0).total;
        let rhs = observation_integral(&jets, &masks.w_prime);
        let report = EstimateReport::new(e0.max(e1), rhs, field.mesh.grid);
        out.push(ObservabilityReport {
            report,
            slice_energy: (e0, e1),
            slice_energy_dp: (
                slice_energy_in(field, &jets, 0, frame),
                slice_energy_in(field, &jets, nt, frame),
            ),
        });
    }
    Ok(out)
}

/// Largest constant over non-skipped reports.
pub fn empirical_constant<'a>(reports: impl IntoIterator<Item = &'a EstimateReport>) -> Option<f64> {
    reports
        .into_iter()
        .filter_map(|r| r.constant)
        .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))))
}

/// Empirical constants of `E(τ1) <= C exp(C' (M0^1/2 + M1) |τ1 - τ2|) E(τ2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyConstants {
    pub m0: f64,
    pub m1: f64,
    /// Smallest `C` with `C' = 0`.
    pub c_at_zero_rate: f64,
    /// Smallest `C'` with `C = 1`.
    pub rate_at_unit_c: f64,
    pub pairs: usize,
}

/// Compares the energies of every ordered pair of levels `0, stride, 2 stride, ...`.
pub fn energy_constants(field: &SpacetimeField, m0: f64, m1: f64, stride: usize) -> Result<EnergyConstants> {
    let mesh = &field.mesh;
    let levels: Vec<usize> = (0..mesh.levels()).step_by(stride.max(1)).collect();
    let energies: Vec<f64> = levels.iter().map(|&n| energy(field, n, m0).total).collect();
    if energies.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("energy vanishes on a slice".into()));
    }
    let kappa = m0.sqrt() + m1;
    let mut c: f64 = 1.0;
    let mut rate: f64 = 0.0;
    let mut pairs = 0;
    for (a, &na) in levels.iter().enumerate() {
        for (b, &nb) in levels.iter().enumerate() {
            if a == b {
                continue;
            }
            pairs += 1;
            let ratio = energies[a] / energies[b];
            c = c.max(ratio);
            let dt = (mesh.time(na) - mesh.time(nb)).abs();
            rate = rate.max(ratio.ln() / (kappa * dt));
        }
    }
    Ok(EnergyConstants {
        m0,
        m1,
        c_at_zero_rate: c,
        rate_at_unit_c: rate,
        pairs,
    })
}

/// `∫_Γ zeta [(1 - eps r_p) N f_p + eps f_p N r_p] |N phi|^2 sqrt(1 - c'^2) dt`
/// over a one dimensional boundary mask; without `params` the bracket and the
/// weight are dropped.
pub fn boundary_integral(
    jets: &Jets,
    gamma: &RegionMask,
    domain: &MovingDomain,
    frame: &ObservationFrame,
    params: Option<&CarlemanParams>,
) -> Result<f64> {
    let mesh = &jets.mesh;
    if mesh.dim != 1 {
        return Err(Error::InvalidInput("boundary integral needs one space dimension".into()));
    }
    let mut total = 0.0;
    for n in 0..mesh.levels() {
        for j in [0, mesh.m - 1] {
            let g = mesh.global(n, j);
            if !gamma.get(g) {
                continue;
            }
            let face = mesh.face_of_node(j).expect("face node");
            let pt = mesh.point(n, j);
            let normal = domain.face_normal(face, pt.t)?;
            let jet = &jets.nodes[g];
            let dn = normal.apply(jet.phi_t, &jet.grad);
            let factor = match params {
                Some(p) => {
                    let z = crate::weights::zeta(frame, p, &pt)?;
                    z * frame.boundary_functional(&normal, &pt, p.eps)
                }
                None => 1.0,
            };
            total += mesh.face_area(n, j, face) * normal.measure_factor() * factor * dn * dn;
        }
    }
    Ok(total)
}

/// `((1 - s + |1 - s|) / 2)^3 cos t` with `s = |x - center|^2 / radius^2`.
/// C² and radial about `center`, so it vanishes on any wall outside the ball.
pub fn radial_bump(mesh: Arc<Mesh>, center: &[f64], radius: f64) -> Jets {
    let c: Vec<f64> = center.to_vec();
    let dim = mesh.dim;
    let rho2 = radius * radius;
    Jets::from_fn(mesh, move |t, x| {
        let mut r2 = 0.0;
        let mut xp = [0.0; 3];
        for d in 0..dim {
            xp[d] = x[d] - c[d];
            r2 += xp[d] * xp[d];
        }
        let w = 1.0 - r2 / rho2;
        if w <= 0.0 {
            return Jet::default();
        }
        let (cos, sin) = (t.cos(), t.sin());
        let f = w * w * w;
        let df = -3.0 * w * w;
        let mut grad = [0.0; 3];
        for d in 0..dim {
            grad[d] = df * 2.0 * xp[d] / rho2 * cos;
        }
        let lap = 6.0 * w * 4.0 * r2 / (rho2 * rho2) + df * 2.0 * dim as f64 / rho2;
        Jet {
            phi: f * cos,
            phi_t: -f * sin,
            grad,
            box_phi: (f + lap) * cos,
        }
    })
}

/// `Π_d (x_d - α_d(t)) (β_d(t) - x_d) · amp · cos(ω t + θ + κ·x)` with random
/// `ω`, `θ`, `κ`: smooth and zero on every face of the box.
pub fn manufactured_trials(mesh: &Arc<Mesh>, domain: &MovingDomain, count: usize, rng: &mut SeededRng) -> Vec<Jets> {
    let dim = mesh.dim;
    (0..count)
        .map(|_| {
            let omega = rng.uniform(0.5, 3.0);
            let theta = rng.uniform(0.0, std::f64::consts::TAU);
            let mut kappa = [0.0; 3];
            for k in kappa.iter_mut().take(dim) {
                *k = rng.uniform(-2.0, 2.0);
            }
            let amp = rng.uniform(0.5, 2.0);
            Jets::from_fn(mesh.clone(), |t, x| {
                // P, P_t, P_tt, P_x per direction.
                let mut p = [[0.0; 4]; 3];
                for d in 0..dim {
                    let (lo, hi) = (domain.lower(d), domain.upper(d));
                    let (a, a1, a2) = (lo.value(t), lo.speed(t), lo.accel(t));
                    let (b, b1, b2) = (hi.value(t), hi.speed(t), hi.accel(t));
                    p[d] = [
                        (x[d] - a) * (b - x[d]),
                        -a1 * (b - x[d]) + (x[d] - a) * b1,
                        -a2 * (b - x[d]) - 2.0 * a1 * b1 + (x[d] - a) * b2,
                        a + b - 2.0 * x[d],
                    ];
                }
                let others = |skip: &[usize]| -> f64 {
                    (0..dim).filter(|e| !skip.contains(e)).map(|e| p[e][0]).product()
                };
                let big = others(&[]);
                let mut big_t = 0.0;
                let mut big_tt = 0.0;
                let mut big_x = [0.0; 3];
                let mut big_lap = 0.0;
                for d in 0..dim {
                    big_t += p[d][1] * others(&[d]);
                    big_tt += p[d][2] * others(&[d]);
                    for e in 0..dim {
                        if e != d {
                            big_tt += p[d][1] * p[e][1] * others(&[d, e]);
                        }
                    }
                    big_x[d] = p[d][3] * others(&[d]);
                    big_lap += -2.0 * others(&[d]);
                }
                let phase = omega * t + theta + (0..dim).map(|d| kappa[d] * x[d]).sum::<f64>();
                let (g, s) = (amp * phase.cos(), amp * phase.sin());
                let k2: f64 = kappa.iter().map(|k| k * k).sum();
                let mut grad = [0.0; 3];
                let mut cross = 0.0;
                for d in 0..dim {
                    grad[d] = big_x[d] * g - big * kappa[d] * s;
                    cross += big_x[d] * -kappa[d] * s;
                }
                let phi_tt = big_tt * g - 2.0 * big_t * omega * s - big * omega * omega * g;
                let lap = big_lap * g + 2.0 * cross - big * k2 * g;
                Jet {
                    phi: big * g,
                    phi_t: big_t * g - big * omega * s,
                    grad,
                    box_phi: -phi_tt + lap,
                }
            })
        })
        .collect()
}

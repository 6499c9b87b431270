//! Interior control by duality. Adjoint final data `(phi0, phi1)` at `tau+`
//! (stored as the two top levels `phi^N = phi0`, `phi^{N-1} = phi0 - k phi1`)
//! are observed through `∫_{W'} (|phi_t|^2 + phi^2)`. The control is the
//! discrete weak form `v -> ∫_{W'} (phi_t v_t + phi v)`, applied as a nodal
//! source supported on `W'`, and the seed is found by conjugate residuals on
//! the gramian.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Var;
use crate::grid::Mesh;
use crate::regions::RegionMask;
use crate::wavesolver::{CoefficientSet, Direction, InitialData, Solver, SpacetimeField, System};

pub const DEFAULT_CG_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const MAX_CORRECTIONS: usize = 5;

/// Sparse rows of the observation map `field -> R^rows` with
/// `|O phi|^2 = ∫_{W'} (|phi_t|^2 + phi^2)`. Differences only use nodes of
/// `W'` (one sided at its rim), so the transpose is supported on `W'`.
#[derive(Debug, Clone)]
pub struct ObservationOperator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl ObservationOperator {
    pub fn new(mesh: &Mesh, mask: &RegionMask) -> Self {
        let mut rows = Vec::new();
        let k = mesh.k;
        let h = mesh.h_hat;
        let inside = |n: isize, i: isize| {
            n >= 0
                && i >= 0
                && (n as usize) < mesh.levels()
                && (i as usize) < mesh.m
                && mask.get(mesh.global(n as usize, i as usize))
        };
        for n in 0..mesh.levels() {
            let s = mesh.span(n, 0);
            for i in 0..mesh.m {
                let g = mesh.global(n, i);
                if !mask.get(g) {
                    continue;
                }
                let root = mesh.node_volume(n, i).sqrt();
                rows.push(vec![(g, root)]);
                let (ni, ii) = (n as isize, i as isize);
                let mut row = Vec::with_capacity(4);
                let mut diff = |plus: bool, minus: bool, up: usize, down: usize, step: f64, scale: f64| {
                    match (plus, minus) {
                        (true, true) => {
                            row.push((up, scale / (2.0 * step)));
                            row.push((down, -scale / (2.0 * step)));
                        }
                        (true, false) => {
                            row.push((up, scale / step));
                            row.push((g, -scale / step));
                        }
                        (false, true) => {
                            row.push((g, scale / step));
                            row.push((down, -scale / step));
                        }
                        (false, false) => {}
                    }
                };
                diff(
                    inside(ni + 1, ii),
                    inside(ni - 1, ii),
                    g + mesh.slice_len,
                    g.wrapping_sub(mesh.slice_len),
                    k,
                    root,
                );
                let mu = -(s.lo_d1 + mesh.xhat(i) * s.width_d1) / s.width;
                if mu != 0.0 {
                    diff(inside(ni, ii + 1), inside(ni, ii - 1), g + 1, g.wrapping_sub(1), h, root * mu);
                }
                rows.push(row);
            }
        }
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(g, c)| c * values[g]).sum())
            .collect()
    }

    pub fn apply_transpose(&self, obs: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (row, &v) in self.rows.iter().zip(obs) {
            for &(g, c) in row {
                out[g] += c * v;
            }
        }
        out
    }
}

/// Everything needed to apply the gramian on one configuration.
#[derive(Debug, Clone)]
pub struct HumContext {
    pub mesh: Arc<Mesh>,
    adjoint: Solver,
    forward: Solver,
    observation: ObservationOperator,
    /// Observation of every basis seed (columns).
    basis: DMatrix<f64>,
    gramian: DMatrix<f64>,
}

/// `max |V - q - d_t X^t - d_x X^x|` over the mesh; zero when the two systems
/// are formally adjoint.
pub fn duality_mismatch(coeffs: &CoefficientSet, mesh: &Mesh) -> Result<f64> {
    let dxt = coeffs.xt.derivative(Var::T)?;
    let dxx = coeffs.xx[0].derivative(Var::X(0))?;
    let mut worst: f64 = 0.0;
    for n in 0..mesh.levels() {
        let t = mesh.time(n);
        for i in 0..mesh.m {
            let x = [mesh.x(n, i)[0]];
            let gap = coeffs.v.eval(t, &x) - coeffs.q.eval(t, &x) - dxt.eval(t, &x) - dxx.eval(t, &x);
            worst = worst.max(gap.abs());
        }
    }
    Ok(worst)
}

/// Final-state error `(y(τ+) - y0, y_t(τ+) - y1)` in a discrete `H^1 x L^2`
/// norm (gradient and value of the position error, value of the velocity
/// error).
pub fn final_state_norm(mesh: &Mesh, top: &[f64], below: &[f64], target: &(Vec<f64>, Vec<f64>)) -> f64 {
    let n = mesh.grid.nt;
    let h = mesh.spacing(n, 0);
    let k = mesh.k;
    let e0: Vec<f64> = (0..mesh.m).map(|i| top[i] - target.0[i]).collect();
    let mut total = 0.0;
    for i in 0..mesh.m {
        let e1 = (top[i] - below[i]) / k - target.1[i];
        total += h * (e0[i] * e0[i] + e1 * e1);
    }
    for i in 0..mesh.m - 1 {
        let d = (e0[i + 1] - e0[i]) / h;
        total += h * d * d;
    }
    total.sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct CgRecord {
    pub iterations: usize,
    /// Relative residuals `|b - G x| / |b|`, starting with 1.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Conjugate residuals for a symmetric matrix (monotone residual norms).
pub fn conjugate_residual(
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (DVector<f64>, CgRecord) {
    let mut x = DVector::zeros(b.len());
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return (
            x,
            CgRecord {
                iterations: 0,
                residuals: vec![0.0],
                converged: true,
            },
        );
    }
    let mut r = b.clone();
    let mut ar = g * &r;
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = r.dot(&ar);
    let mut residuals = vec![1.0];
    let mut iterations = 0;
    while iterations < max_iter && residuals[residuals.len() - 1] > tol {
        let app = ap.dot(&ap);
        if !(app > 0.0) || !(rar.abs() > 0.0) {
            break;
        }
        let alpha = rar / app;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        iterations += 1;
        residuals.push(r.norm() / b_norm);
        ar = g * &r;
        let rar_new = r.dot(&ar);
        let beta = rar_new / rar;
        rar = rar_new;
        p = &r + beta * &p;
        ap = &ar + beta * &ap;
    }
    let converged = residuals[residuals.len() - 1] <= tol;
    (
        x,
        CgRecord {
            iterations,
            residuals,
            converged,
        },
    )
}

/// Result of a control synthesis.
#[derive(Debug, Clone, Serialize)]
pub struct HumState {
    /// Adjoint seed `(phi0, phi1)` on all nodes of the top level.
    pub seed: (Vec<f64>, Vec<f64>),
    pub gramian_applications: usize,
    pub cg: Vec<CgRecord>,
    /// Nodal source `F`, zero outside `W'`.
    #[serde(skip)]
    pub control: Vec<f64>,
    pub final_error: f64,
    pub uncontrolled_error: f64,
    pub final_error_ratio: f64,
    #[serde(skip)]
    pub controlled: Option<SpacetimeField>,
}

impl HumState {
    pub fn residuals(&self) -> Vec<f64> {
        self.cg.iter().flat_map(|c| c.residuals.iter().copied()).collect()
    }
}

impl HumContext {
    /// Assembles the gramian from `2 nx` adjoint solves.
    pub fn new(coeffs: &CoefficientSet, mesh: Arc<Mesh>, w_prime: &RegionMask) -> Result<Self> {
        let adjoint = Solver::new(coeffs, mesh.clone(), System::Adjoint)?;
        let forward = Solver::new(coeffs, mesh.clone(), System::Controlled)?;
        let observation = ObservationOperator::new(&mesh, w_prime);
        let nx = mesh.grid.nx;
        let mut basis = DMatrix::zeros(observation.len(), 2 * nx);
        for col in 0..2 * nx {
            let mut seed = DVector::zeros(2 * nx);
            seed[col] = 1.0;
            let field = Self::adjoint_field(&adjoint, &mesh, &seed)?;
            let obs = observation.apply(&field.values);
            basis.set_column(col, &DVector::from_vec(obs));
        }
        let gramian = basis.transpose() * &basis;
        Ok(Self {
            mesh,
            adjoint,
            forward,
            observation,
            basis,
            gramian,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.mesh.grid.nx
    }

    pub fn gramian(&self) -> &DMatrix<f64> {
        &self.gramian
    }

    pub fn observation(&self) -> &ObservationOperator {
        &self.observation
    }

    fn adjoint_field(adjoint: &Solver, mesh: &Mesh, seed: &DVector<f64>) -> Result<SpacetimeField> {
        let (phi0, phi1) = split_seed(mesh, seed);
        let below: Vec<f64> = phi0.iter().zip(&phi1).map(|(a, b)| a - mesh.k * b).collect();
        adjoint.solve(
            &InitialData::Levels { first: phi0, second: below },
            Direction::Backward,
            None,
        )
    }

    /// Adjoint solution for a seed vector `[phi0 interior, phi1 interior]`.
    pub fn adjoint_solution(&self, seed: &DVector<f64>) -> Result<SpacetimeField> {
        Self::adjoint_field(&self.adjoint, &self.mesh, seed)
    }

    /// `∫_{W'} (phi_t psi_t + phi psi)` from two adjoint solves.
    pub fn pairing(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let oa = self.observation.apply(&self.adjoint_solution(a)?.values);
        let ob = self.observation.apply(&self.adjoint_solution(b)?.values);
        Ok(oa.iter().zip(&ob).map(|(x, y)| x * y).sum())
    }

    /// Nodal source realising the weak form of the observation of `seed`.
    pub fn control_source(&self, seed: &DVector<f64>) -> Vec<f64> {
        let obs = &self.basis * seed;
        let c = self.observation.apply_transpose(obs.as_slice(), self.mesh.len());
        let scale = -1.0 / (self.mesh.k * self.mesh.k);
        c.into_iter().map(|v| scale * v).collect()
    }

    /// Riesz readout `(y^N - y^{N-1}, -k y^N)` of the two top levels.
    pub fn readout(&self, top: &[f64], below: &[f64]) -> DVector<f64> {
        let nx = self.mesh.grid.nx;
        let mut out = DVector::zeros(2 * nx);
        for i in 0..nx {
            out[i] = top[i + 1] - below[i + 1];
            out[nx + i] = -self.mesh.k * top[i + 1];
        }
        out
    }

    /// Forward path: controlled solve from rest with the source of `seed`,
    /// read out at `tau+`. Equals `G seed` for the free static problem.
    pub fn gramian_apply(&self, seed: &DVector<f64>) -> Result<DVector<f64>> {
        let source = self.control_source(seed);
        let y = self
            .forward
            .solve(&InitialData::zero(self.mesh.m), Direction::Forward, Some(&source))?;
        let nt = self.mesh.grid.nt;
        Ok(self.readout(y.slice(nt), y.slice(nt - 1)))
    }

    fn forward_solve(&self, initial: &InitialData, source: Option<&[f64]>) -> Result<SpacetimeField> {
        self.forward.solve(initial, Direction::Forward, source)
    }

    /// Steers `initial` to `target = (y0, y1)` at `tau+`.
    pub fn synthesize_control(
        &self,
        initial: &InitialData,
        target: &(Vec<f64>, Vec<f64>),
        cg_tol: f64,
        max_iter: usize,
    ) -> Result<HumState> {
        let mesh = &self.mesh;
        let nt = mesh.grid.nt;
        let target_below: Vec<f64> = target.0.iter().zip(&target.1).map(|(a, b)| a - mesh.k * b).collect();
        let target_readout = self.readout(&target.0, &target_below);
        let free = self.forward_solve(initial, None)?;
        let uncontrolled_error = final_state_norm(mesh, free.slice(nt), free.slice(nt - 1), target);
        let b = &target_readout - self.readout(free.slice(nt), free.slice(nt - 1));
        let b_norm = b.norm();

        let (mut x, record) = conjugate_residual(&self.gramian, &b, cg_tol, max_iter);
        let mut applications = record.iterations + 1;
        let mut records = vec![record];
        if !records[0].converged {
            return Err(Error::NoConvergence {
                iterations: records[0].iterations,
                residual: *records[0].residuals.last().unwrap_or(&1.0),
            });
        }
        let mut control = self.control_source(&x);
        let mut y = self.forward_solve(initial, Some(&control))?;
        for _ in 0..MAX_CORRECTIONS {
            let defect = &target_readout - self.readout(y.slice(nt), y.slice(nt - 1));
            if b_norm == 0.0 || defect.norm() <= cg_tol * b_norm {
                break;
            }
            let (dx, rec) = conjugate_residual(&self.gramian, &defect, cg_tol, max_iter);
            applications += rec.iterations + 1;
            records.push(rec);
            x += dx;
            control = self.control_source(&x);
            y = self.forward_solve(initial, Some(&control))?;
        }
        let final_error = final_state_norm(mesh, y.slice(nt), y.slice(nt - 1), target);
        let final_error_ratio = if uncontrolled_error == 0.0 {
            0.0
        } else {
            final_error / uncontrolled_error
        };
        let (phi0, phi1) = split_seed(mesh, &x);
        Ok(HumState {
            seed: (phi0, phi1),
            gramian_applications: applications,
            cg: records,
            control,
            final_error,
            uncontrolled_error,
            final_error_ratio,
            controlled: Some(y),
        })
    }
}

fn split_seed(mesh: &Mesh, seed: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let nx = mesh.grid.nx;
    let mut phi0 = vec![0.0; mesh.m];
    let mut phi1 = vec![0.0; mesh.m];
    for i in 0..nx {
        phi0[i + 1] = seed[i];
        phi1[i + 1] = seed[nx + i];
    }
    (phi0, phi1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MovingDomain, ObservationFrame};
    use crate::grid::GridSpec;
    use crate::regions::build_region_masks;
    use crate::rng::{seeded, Draw, SeededRng};
    use crate::wavesolver::smooth_random_data;
    use crate::weights::CarlemanParams;

    fn context(nx: usize, nt: usize, sigma: f64) -> (HumContext, RegionMask) {
        let dom = MovingDomain::interval("-1", "1", (0.0, 2.5)).unwrap();
        let mesh = Arc::new(Mesh::new(&dom, GridSpec::new(nx, nt).unwrap()).unwrap());
        let frame = ObservationFrame::new(1.25, &[0.0]);
        let params = CarlemanParams::observability(1.0, 0.3, sigma, 1.05);
        let masks = build_region_masks(&dom, &frame, &params, &mesh).unwrap();
        let ctx = HumContext::new(&CoefficientSet::zero(1), mesh, &masks.w_prime).unwrap();
        (ctx, masks.w_prime)
    }

    fn random_seed(n: usize, rng: &mut SeededRng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn forward_path_matches_gramian_on_static_free_problem() {
        let (ctx, _) = context(20, 42, 0.5);
        let mut rng = seeded(1);
        for _ in 0..3 {
            let x = random_seed(ctx.dim(), &mut rng);
            let lhs = ctx.gramian_apply(&x).unwrap();
            let rhs = ctx.gramian() * &x;
            assert!((&lhs - &rhs).norm() <= 1e-9 * rhs.norm(), "{} {}", (&lhs - &rhs).norm(), rhs.norm());
        }
        assert_eq!(ctx.gramian_apply(&DVector::zeros(ctx.dim())).unwrap().norm(), 0.0);
    }

    #[test]
    fn gramian_symmetric_and_positive() {
        let (ctx, _) = context(20, 42, 0.5);
        let mut rng = seeded(2);
        for _ in 0..5 {
            let a = random_seed(ctx.dim(), &mut rng);
            let b = random_seed(ctx.dim(), &mut rng);
            let ab = ctx.pairing(&a, &b).unwrap();
            let ba = ctx.pairing(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-10 * ab.abs().max(1e-300));
            assert!(ctx.pairing(&a, &a).unwrap() > 0.0);
        }
    }

    #[test]
    fn control_is_supported_in_w_prime() {
        let (ctx, mask) = context(20, 42, 0.5);
        let mut rng = seeded(3);
        let x = random_seed(ctx.dim(), &mut rng);
        let src = ctx.control_source(&x);
        for (g, v) in src.iter().enumerate() {
            if !mask.get(g) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn drives_random_data_to_rest() {
        let (ctx, _) = context(30, 63, 0.5);
        let mut rng = seeded(4);
        let data = smooth_random_data(&ctx.mesh, 6, &mut rng);
        let m = ctx.mesh.m;
        let state = ctx
            .synthesize_control(&data, &(vec![0.0; m], vec![0.0; m]), 1e-8, 500)
            .unwrap();
        assert!(state.final_error_ratio <= 1e-3, "{}", state.final_error_ratio);
        let res = state.residuals();
        for w in res.windows(2).skip(1) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) || w[1] == 1.0);
        }
    }

    #[test]
    fn free_target_needs_no_iterations() {
        let (ctx, _) = context(20, 42, 0.5);
        let mut rng = seeded(5);
        let data = smooth_random_data(&ctx.mesh, 4, &mut rng);
        let free = ctx.forward_solve(&data, None).unwrap();
        let nt = ctx.mesh.grid.nt;
        let top = free.slice(nt).to_vec();
        let vel: Vec<f64> = top.iter().zip(free.slice(nt - 1)).map(|(a, b)| (a - b) / ctx.mesh.k).collect();
        let state = ctx.synthesize_control(&data, &(top, vel), 1e-8, 500).unwrap();
        assert_eq!(state.cg[0].iterations, 0);
        assert!(state.control.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn empty_w_prime_does_not_converge() {
        let (ctx, mask) = context(20, 42, 0.0);
        assert!(mask.is_empty());
        let mut rng = seeded(6);
        let data = smooth_random_data(&ctx.mesh, 4, &mut rng);
        let m = ctx.mesh.m;
        assert!(matches!(
            ctx.synthesize_control(&data, &(vec![0.0; m], vec![0.0; m]), 1e-8, 500),
            Err(Error::NoConvergence { .. })
        ));
    }
}

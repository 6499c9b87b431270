//! Command pipelines. Each command builds the shared [`Setup`], computes its
//! quantities and returns a [`Report`] plus the CSV artifacts to write.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use movingwave_core::estimates::{
    carleman_report, check_boundary_condition, check_carleman, check_observability, default_f_min,
    empirical_constant, energy_constants, manufactured_trials, radial_bump, sweep_spread, BoxVariant, Jets,
    WeightTable,
};
use movingwave_core::geometry::{check_admissibility, AdmissibilityReport, MovingDomain, ObservationFrame};
use movingwave_core::grid::{GridSpec, Mesh};
use movingwave_core::hum::{duality_mismatch, HumContext};
use movingwave_core::regions::{build_region_masks, frame_extents, FrameExtents, RegionMasks};
use movingwave_core::rng::{seeded, Draw, SeededRng};
use movingwave_core::wavesolver::{
    discrete_energy, energy, smooth_random_data, CoefficientBounds, CoefficientSet, Direction, InitialData, Solver,
    SpacetimeField, System,
};
use movingwave_core::weights::{a_floor, CarlemanParams};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::output::{to_json, write_artifact, Cell, Csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Regions,
    Simulate,
    Adjoint,
    Energy,
    CarlemanCheck,
    Observability,
    Control,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Regions => "regions",
            Command::Simulate => "simulate",
            Command::Adjoint => "adjoint",
            Command::Energy => "energy",
            Command::CarlemanCheck => "carleman-check",
            Command::Observability => "observability",
            Command::Control => "control",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    /// Overrides `run.seed`.
    pub seed: Option<u64>,
    /// Fills `wall_time_s`; off by default so reports are reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Params {
    pub config: Config,
    pub t0: f64,
    pub carleman: CarlemanParams,
    pub a_floor: f64,
    pub extents: FrameExtents,
    pub admissibility: AdmissibilityReport,
    pub bounds: CoefficientBounds,
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct Report {
    pub command: &'static str,
    pub params: Params,
    pub grid: GridSpec,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub empirical_C: Option<f64>,
    pub ratios: Vec<f64>,
    pub residuals: Vec<f64>,
    pub final_error_ratio: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub details: Value,
}

/// Report and named CSV artifacts of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<(String, Csv)>,
}

impl Outcome {
    /// Writes `report.json` and every CSV under `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = vec![write_artifact(dir, "report.json", &to_json(&self.report))?];
        for (name, csv) in &self.files {
            paths.push(write_artifact(dir, name, csv.as_str())?);
        }
        Ok(paths)
    }
}

/// Everything derived from a validated config.
pub struct Setup {
    pub config: Config,
    pub domain: MovingDomain,
    pub coeffs: CoefficientSet,
    pub mesh: Arc<Mesh>,
    pub frame: ObservationFrame,
    pub extents: FrameExtents,
    pub params: CarlemanParams,
    pub a_floor: f64,
    pub masks: RegionMasks,
    pub admissibility: AdmissibilityReport,
    pub bounds: CoefficientBounds,
}

impl Setup {
    pub fn new(config: &Config, seed: Option<u64>) -> Result<Self> {
        let mut config = config.clone();
        if let Some(seed) = seed {
            config.run.seed = seed;
        }
        let domain = config.build_domain()?;
        let coeffs = config.build_coefficients()?;
        let mesh = Arc::new(Mesh::new(&domain, config.grid_spec()?).map_err(|e| CliError::from_core("grid", e))?);
        let frame = ObservationFrame::new(config.t0()?, &config.observation.x0);
        let extents = frame_extents(&domain, &frame, &mesh, None).map_err(|e| CliError::from_core("observation", e))?;
        let bounds = coeffs.bounds(&mesh).map_err(|e| CliError::from_core("coefficients", e))?;
        let floor = a_floor(
            domain.dim(),
            config.observation.delta,
            extents.r_plus,
            extents.r_minus,
            bounds.sup_v,
            bounds.sup_x,
        );
        let params = CarlemanParams::observability(floor, config.observation.delta, config.observation.sigma, extents.r_plus);
        params.validate(domain.dim()).map_err(|e| CliError::from_core("observation", e))?;
        let masks = build_region_masks(&domain, &frame, &params, &mesh).map_err(|e| CliError::from_core("observation", e))?;
        let admissibility = check_admissibility(&domain, &frame, config.window());
        Ok(Self {
            config,
            domain,
            coeffs,
            mesh,
            frame,
            extents,
            params,
            a_floor: floor,
            masks,
            admissibility,
            bounds,
        })
    }

    fn report(&self, command: Command) -> Report {
        Report {
            command: command.name(),
            params: Params {
                config: self.config.clone(),
                t0: self.frame.center.t,
                carleman: self.params,
                a_floor: self.a_floor,
                extents: self.extents,
                admissibility: self.admissibility,
                bounds: self.bounds,
            },
            grid: self.mesh.grid,
            lhs: None,
            rhs: None,
            empirical_C: None,
            ratios: Vec::new(),
            residuals: Vec::new(),
            final_error_ratio: None,
            wall_time_s: None,
            details: Value::Null,
        }
    }

    fn require_1d(&self, command: Command) -> Result<()> {
        if self.domain.dim() != 1 {
            return Err(CliError::validation(
                "domain.n",
                format!("`{}` solves the wave equation and needs n = 1", command.name()),
            ));
        }
        Ok(())
    }

    fn require_admissible(&self) -> Result<()> {
        let a = &self.admissibility;
        if !a.passed {
            let (lo, hi) = self.config.window();
            let message = if a.window_gap <= 0.0 {
                format!(
                    "window ({lo}, {hi}) is not admissible: length {} must exceed R+ + R- = {}",
                    a.window_length,
                    a.r_plus + a.r_minus
                )
            } else {
                format!("t0 = {} must lie in ({}, {})", self.frame.center.t, a.t0_range.0, a.t0_range.1)
            };
            return Err(CliError::validation("domain", message));
        }
        if self.masks.w_prime.is_empty() {
            return Err(CliError::validation("observation.sigma", "W' is empty"));
        }
        Ok(())
    }

    fn rng(&self) -> SeededRng {
        seeded(self.config.run.seed)
    }

    fn solve(&self, system: System, initial: &InitialData) -> Result<SpacetimeField> {
        Solver::new(&self.coeffs, self.mesh.clone(), system)
            .and_then(|s| s.solve(initial, Direction::Forward, None))
            .map_err(|e| CliError::from_core("coefficients", e))
    }

    /// Adjoint solutions from random smooth data at `tau-`.
    pub fn adjoint_trials(&self) -> Result<Vec<SpacetimeField>> {
        let mut rng = self.rng();
        (0..self.config.run.trials)
            .map(|_| {
                let data = smooth_random_data(&self.mesh, self.config.run.modes, &mut rng);
                self.solve(System::Adjoint, &data)
            })
            .collect()
    }

    /// Carleman trials: adjoint solutions for n = 1, otherwise a radial bump
    /// about `x0` (when it vanishes on the walls) and manufactured products.
    pub fn carleman_trials(&self) -> Result<Vec<Jets>> {
        if self.domain.dim() == 1 {
            return self
                .adjoint_trials()?
                .iter()
                .map(|f| {
                    Jets::from_field(f, BoxVariant::Substituted, Some(&self.coeffs))
                        .map_err(|e| CliError::from_core("grid", e))
                })
                .collect();
        }
        let mut trials = Vec::new();
        let x0 = &self.frame.center.x[..self.domain.dim()];
        let depth = self.domain.depth_in_slice(self.frame.center.t, &self.frame.center.x);
        if depth > 0.0 && self.config.run.trials > 0 {
            let bump = radial_bump(self.mesh.clone(), x0, 0.9 * depth);
            if check_boundary_condition(&bump, &self.frame).is_ok() {
                trials.push(bump);
            }
        }
        let rest = self.config.run.trials.saturating_sub(trials.len());
        trials.extend(manufactured_trials(&self.mesh, &self.domain, rest, &mut self.rng()));
        Ok(trials)
    }

    pub fn a_sweep(&self) -> Vec<f64> {
        if self.config.run.a_sweep.is_empty() {
            [1.0, 2.0, 4.0, 8.0].iter().map(|m| m * self.a_floor).collect()
        } else {
            self.config.run.a_sweep.clone()
        }
    }
}

/// Parses nothing and writes nothing: computes the outcome of `command`.
pub fn execute(command: Command, config: &Config, options: &Options) -> Result<Outcome> {
    let start = Instant::now();
    let setup = Setup::new(config, options.seed)?;
    let mut outcome = match command {
        Command::Regions => regions(&setup),
        Command::Simulate | Command::Adjoint => simulate(&setup, command),
        Command::Energy => energy_run(&setup),
        Command::CarlemanCheck => carleman(&setup),
        Command::Observability => observability(&setup),
        Command::Control => control(&setup),
    }?;
    if options.timing {
        outcome.report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(outcome)
}

fn space_header(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (1..=dim).map(|d| format!("x{d}")).collect()
    }
}

fn regions(s: &Setup) -> Result<Outcome> {
    let mesh = &s.mesh;
    let dim = mesh.dim;
    let mut header: Vec<String> = vec!["t".into(), "x_index".into()];
    header.extend(space_header(dim));
    for h in ["f_p", "Nf_p", "in_Dp", "in_Gamma", "in_W", "in_Wprime"] {
        header.push(h.into());
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    let m = &s.masks;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let g = mesh.global(n, j);
            let pt = mesh.point(n, j);
            let mut cells = vec![Cell::F(pt.t), Cell::I(j)];
            cells.extend((0..dim).map(|d| Cell::F(pt.x[d])));
            cells.push(Cell::F(s.frame.f_p(&pt)));
            let nf = m.normal_f[g];
            cells.push(if nf.is_nan() { Cell::Empty } else { Cell::F(nf) });
            cells.extend([
                Cell::B(m.dp.get(g)),
                Cell::B(m.gamma_plus.get(g)),
                Cell::B(m.w.get(g)),
                Cell::B(m.w_prime.get(g)),
            ]);
            csv.row(&cells);
        }
    }
    let mut report = s.report(Command::Regions);
    let summary = |mask: &movingwave_core::regions::RegionMask| json!({ "count": mask.count(), "measure": mask.measure });
    report.details = json!({
        "location": s.extents.location,
        "masks": {
            "Dp": summary(&m.dp),
            "U_Dp": summary(&m.u_dp),
            "Gamma_plus": summary(&m.gamma_plus),
            "Gamma_prime": summary(&m.gamma_prime),
            "O_sigma": summary(&m.o_sigma),
            "W": summary(&m.w),
            "W_prime": summary(&m.w_prime),
        },
    });
    Ok(Outcome {
        report,
        files: vec![("regions.csv".into(), csv)],
    })
}

fn field_csv(field: &SpacetimeField) -> Csv {
    let mesh = &field.mesh;
    let mut header = vec!["t".to_string()];
    header.extend(space_header(mesh.dim));
    header.push("value".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let pt = mesh.point(n, j);
            let mut cells = vec![Cell::F(pt.t)];
            cells.extend((0..mesh.dim).map(|d| Cell::F(pt.x[d])));
            cells.push(Cell::F(field.value(n, j)));
            csv.row(&cells);
        }
    }
    csv
}

fn simulate(s: &Setup, command: Command) -> Result<Outcome> {
    s.require_1d(command)?;
    let data = smooth_random_data(&s.mesh, s.config.run.modes, &mut s.rng());
    let system = if command == Command::Adjoint {
        System::Adjoint
    } else {
        System::Controlled
    };
    let field = s.solve(system, &data)?;
    let nt = s.mesh.grid.nt;
    let mut report = s.report(command);
    report.details = json!({
        "energy_initial": energy(&field, 0, s.bounds.m0),
        "energy_final": energy(&field, nt, s.bounds.m0),
        "max_abs": field.max_abs(),
    });
    Ok(Outcome {
        report,
        files: vec![("field.csv".into(), field_csv(&field))],
    })
}

fn energy_run(s: &Setup) -> Result<Outcome> {
    s.require_1d(Command::Energy)?;
    let data = smooth_random_data(&s.mesh, s.config.run.modes, &mut s.rng());
    let field = s.solve(System::Adjoint, &data)?;
    let mesh = &s.mesh;
    let mut csv = Csv::new(&["t", "gradient", "l2", "total", "discrete"]);
    let mut discrete = Vec::new();
    for n in 0..mesh.levels() {
        let e = energy(&field, n, s.bounds.m0);
        let d = if n < mesh.grid.nt {
            let v = discrete_energy(&field, n);
            discrete.push(v);
            Cell::F(v)
        } else {
            Cell::Empty
        };
        csv.row(&[Cell::F(mesh.time(n)), Cell::F(e.gradient), Cell::F(e.l2), Cell::F(e.total), d]);
    }
    let constants = energy_constants(&field, s.bounds.m0, s.bounds.m1, 1).map_err(|e| CliError::from_core("run", e))?;
    let first = discrete[0];
    let drift = discrete.iter().fold(0.0f64, |m, v| m.max((v - first).abs())) / first.abs();
    let mut report = s.report(Command::Energy);
    report.details = json!({
        "constants": constants,
        "discrete_energy_drift": drift,
        "free": s.coeffs.is_free(),
    });
    Ok(Outcome {
        report,
        files: vec![("energy.csv".into(), csv)],
    })
}

fn carleman(s: &Setup) -> Result<Outcome> {
    let trials = s.carleman_trials()?;
    if trials.is_empty() {
        return Err(CliError::validation("run.trials", "must be positive"));
    }
    let f_min = default_f_min(&s.mesh);
    let sweep = s.a_sweep();
    let rows = check_carleman(&trials, &s.frame, &s.params, &sweep, &s.masks, f_min)
        .map_err(|e| CliError::from_core("run.a_sweep", e))?;
    let mut csv = Csv::new(&[
        "a",
        "trial",
        "lhs",
        "rhs",
        "ratio",
        "first_order",
        "zeroth_order",
        "box_term",
        "dt_w_term",
        "phi_w_term",
    ]);
    let mut worst: Option<(f64, f64, f64)> = None;
    for row in &rows {
        for (i, r) in row.reports.iter().enumerate() {
            let t = r.terms.unwrap_or_default();
            let ratio = r.constant.map_or(Cell::Empty, Cell::F);
            csv.row(&[
                Cell::F(row.a),
                Cell::I(i),
                Cell::F(r.lhs),
                Cell::F(r.rhs),
                ratio,
                Cell::F(t.first_order),
                Cell::F(t.zeroth_order),
                Cell::F(t.box_term),
                Cell::F(t.dt_w_term),
                Cell::F(t.phi_w_term),
            ]);
            if let Some(c) = r.constant {
                if worst.is_none_or(|w| c > w.0) {
                    worst = Some((c, r.lhs, r.rhs));
                }
            }
        }
    }
    // Scale invariance at the first a: phi -> 3 phi.
    let p = s.params.with_a(sweep[0]);
    let table = WeightTable::new(&s.mesh, &s.frame, &p, &s.masks, f_min).map_err(|e| CliError::from_core("run", e))?;
    let mut scaling: f64 = 0.0;
    for (jets, r) in trials.iter().zip(&rows[0].reports) {
        let tripled = carleman_report(&jets.scale(3.0), &s.frame, &table).map_err(|e| CliError::from_core("run", e))?;
        if let (Some(a), Some(b)) = (r.constant, tripled.constant) {
            scaling = scaling.max((a - b).abs() / a.abs());
        }
    }
    let mut report = s.report(Command::CarlemanCheck);
    report.ratios = rows.iter().map(|r| r.max_ratio.unwrap_or(f64::NAN)).collect();
    report.empirical_C = worst.map(|w| w.0);
    report.lhs = worst.map(|w| w.1);
    report.rhs = worst.map(|w| w.2);
    report.details = json!({
        "a_sweep": sweep,
        "trials": trials.len(),
        "f_min": f_min,
        "spread": sweep_spread(&rows),
        "scaling_deviation": scaling,
    });
    Ok(Outcome {
        report,
        files: vec![("carleman.csv".into(), csv)],
    })
}

fn observability(s: &Setup) -> Result<Outcome> {
    s.require_1d(Command::Observability)?;
    s.require_admissible()?;
    let fields = s.adjoint_trials()?;
    let reports = check_observability(&fields, &s.frame, &s.masks).map_err(|e| CliError::from_core("observation", e))?;
    let mut csv = Csv::new(&["trial", "lhs", "rhs", "ratio", "energy_minus", "energy_plus"]);
    for (i, r) in reports.iter().enumerate() {
        csv.row(&[
            Cell::I(i),
            Cell::F(r.report.lhs),
            Cell::F(r.report.rhs),
            r.report.constant.map_or(Cell::Empty, Cell::F),
            Cell::F(r.slice_energy.0),
            Cell::F(r.slice_energy.1),
        ]);
    }
    let mut report = s.report(Command::Observability);
    report.ratios = reports.iter().map(|r| r.report.constant.unwrap_or(f64::NAN)).collect();
    report.empirical_C = empirical_constant(reports.iter().map(|r| &r.report));
    if let Some(worst) = reports
        .iter()
        .filter(|r| r.report.constant.is_some())
        .max_by(|a, b| a.report.constant.partial_cmp(&b.report.constant).unwrap())
    {
        report.lhs = Some(worst.report.lhs);
        report.rhs = Some(worst.report.rhs);
    }
    report.details = json!({
        "trials": reports.len(),
        "w_prime_measure": s.masks.w_prime.measure,
    });
    Ok(Outcome {
        report,
        files: vec![("observability.csv".into(), csv)],
    })
}

fn control(s: &Setup) -> Result<Outcome> {
    s.require_1d(Command::Control)?;
    s.require_admissible()?;
    let mesh = &s.mesh;
    let ctx = HumContext::new(&s.coeffs, mesh.clone(), &s.masks.w_prime).map_err(|e| CliError::from_core("coefficients", e))?;
    let mut rng = s.rng();
    let data = smooth_random_data(mesh, s.config.run.modes, &mut rng);
    let rest = (vec![0.0; mesh.m], vec![0.0; mesh.m]);
    let state = ctx
        .synthesize_control(&data, &rest, s.config.run.cg_tol, s.config.run.max_iter)
        .map_err(|e| CliError::from_core("run", e))?;

    // The pairing is symmetric by construction. The forward path (controlled
    // solve plus readout) is the independent operator whose symmetry matters.
    let (mut asymmetry, mut forward_asymmetry, mut forward_defect) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let a = DVector::from_fn(ctx.dim(), |_, _| rng.uniform(-1.0, 1.0));
        let b = DVector::from_fn(ctx.dim(), |_, _| rng.uniform(-1.0, 1.0));
        let ab = ctx.pairing(&a, &b).map_err(|e| CliError::from_core("run", e))?;
        let ba = ctx.pairing(&b, &a).map_err(|e| CliError::from_core("run", e))?;
        asymmetry = asymmetry.max((ab - ba).abs() / ab.abs().max(ba.abs()));
        let la = ctx.gramian_apply(&a).map_err(|e| CliError::from_core("run", e))?;
        let lb = ctx.gramian_apply(&b).map_err(|e| CliError::from_core("run", e))?;
        let (alb, bla) = (a.dot(&lb), b.dot(&la));
        let scale = (a.norm() * lb.norm()).max(b.norm() * la.norm());
        forward_asymmetry = forward_asymmetry.max((alb - bla).abs() / scale);
        forward_defect = forward_defect.max((&la - ctx.gramian() * &a).norm() / la.norm());
    }
    let eig = ctx.gramian().clone().symmetric_eigenvalues();
    let outside = state
        .control
        .iter()
        .enumerate()
        .filter(|(g, _)| !s.masks.w_prime.get(*g))
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let mismatch = duality_mismatch(&s.coeffs, mesh).map_err(|e| CliError::from_core("coefficients", e))?;

    let mut header = vec!["t".to_string()];
    header.extend(space_header(mesh.dim));
    header.extend(["value".into(), "in_Wprime".into()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let g = mesh.global(n, j);
            let pt = mesh.point(n, j);
            csv.row(&[Cell::F(pt.t), Cell::F(pt.x[0]), Cell::F(state.control[g]), Cell::B(s.masks.w_prime.get(g))]);
        }
    }

    let mut report = s.report(Command::Control);
    report.residuals = state.residuals();
    report.final_error_ratio = Some(state.final_error_ratio);
    report.details = json!({
        "iterations": state.cg.iter().map(|c| c.iterations).collect::<Vec<_>>(),
        "converged": state.cg.iter().all(|c| c.converged),
        "gramian_applications": state.gramian_applications,
        "final_error": state.final_error,
        "uncontrolled_error": state.uncontrolled_error,
        "gramian_asymmetry": asymmetry,
        "forward_asymmetry": forward_asymmetry,
        "forward_defect": forward_defect,
        "gramian_min_eigenvalue": eig.min(),
        "gramian_max_eigenvalue": eig.max(),
        "max_control_outside_w_prime": outside,
        "duality_mismatch": mismatch,
    });
    Ok(Outcome {
        report,
        files: vec![("control.csv".into(), csv)],
    })
}

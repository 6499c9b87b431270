//! End-to-end acceptance run. One PASS/FAIL line per criterion; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use movingwave_cli::{execute, CliError, Command, Config, Options, Outcome};
use movingwave_core::estimates::default_f_min;
use movingwave_core::geometry::{MovingDomain, ObservationFrame, Point, Side};
use movingwave_core::grid::{GridSpec, Mesh};
use movingwave_core::regions::{build_region_masks, frame_extents};
use movingwave_core::rng::{seeded, Draw};
use movingwave_core::wavesolver::{discrete_energy, energy, CoefficientSet, Direction, InitialData, Solver, System};
use movingwave_core::weights::{check_derivative_bound, CarlemanParams};
use serde_json::Value;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn config(name: &str) -> Config {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    Config::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn options() -> Options {
    Options {
        out: PathBuf::from("."),
        seed: None,
        timing: false,
    }
}

fn run(command: Command, config: &Config) -> std::result::Result<Outcome, String> {
    execute(command, config, &options()).map_err(|e| format!("{} failed: {e}", command.name()))
}

fn detail(outcome: &Outcome, key: &str) -> f64 {
    outcome.report.details[key].as_f64().unwrap_or(f64::NAN)
}

fn coordinate_identities() -> Check {
    let mut rng = seeded(2024);
    let mut worst: f64 = 0.0;
    for i in 0..100_000 {
        let dim = 1 + i % 3;
        let x0: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let frame = ObservationFrame::new(rng.uniform(-3.0, 3.0), &x0);
        let c = frame.null_coords(&Point::new(rng.uniform(-5.0, 5.0), &x));
        let scale = 1.0 + c.f_p.abs();
        for e in [c.u_p * c.v_p + c.f_p, c.t_p - (c.u_p + c.v_p), c.r_p - (c.v_p - c.u_p)] {
            worst = worst.max(e.abs() / scale);
        }
    }
    ensure(worst <= 1e-12, format!("max scaled defect {worst:.3e} over 1e5 points"))
}

/// `sin(pi x / b) cos t` with `b = 1 + t/4`, differentiated by hand.
fn manufactured(t: f64, x: f64) -> (f64, f64, f64, f64) {
    let (b, db) = (1.0 + 0.25 * t, 0.25);
    let s = PI * x / b;
    let s_t = -s * db / b;
    let s_tt = 2.0 * s * db * db / (b * b);
    let (sin, cos) = s.sin_cos();
    let u = sin * t.cos();
    let u_t = cos * s_t * t.cos() - sin * t.sin();
    let u_tt = (-sin * s_t * s_t + cos * s_tt) * t.cos() - 2.0 * cos * s_t * t.sin() - sin * t.cos();
    let u_xx = -(PI / b).powi(2) * sin * t.cos();
    (u, u_t, u_tt, u_xx)
}

fn manufactured_error(nx: usize, nt: usize) -> f64 {
    let domain = MovingDomain::interval("0", "1 + 0.25*t", (0.0, 1.0)).unwrap();
    let mesh = Arc::new(Mesh::new(&domain, GridSpec::new(nx, nt).unwrap()).unwrap());
    let at = |n: usize, i: usize| manufactured(mesh.time(n), mesh.x(n, i)[0]);
    let mut source = vec![0.0; mesh.len()];
    for n in 0..mesh.levels() {
        for i in 0..mesh.m {
            let (_, _, u_tt, u_xx) = at(n, i);
            source[mesh.global(n, i)] = u_xx - u_tt;
        }
    }
    let mut value: Vec<f64> = (0..mesh.m).map(|i| at(0, i).0).collect();
    let mut velocity: Vec<f64> = (0..mesh.m).map(|i| at(0, i).1).collect();
    for v in [&mut value, &mut velocity] {
        v[0] = 0.0;
        v[mesh.m - 1] = 0.0;
    }
    let field = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Adjoint)
        .and_then(|s| s.solve(&InitialData::Cauchy { value, velocity }, Direction::Forward, Some(&source)))
        .unwrap();
    let mut err: f64 = 0.0;
    for n in 0..mesh.levels() {
        for i in 0..mesh.m {
            err = err.max((field.value(n, i) - at(n, i).0).abs());
        }
    }
    err
}

fn solver_convergence() -> Check {
    let errs: Vec<f64> = [(50, 200), (100, 400), (200, 800), (400, 1600)]
        .iter()
        .map(|&(nx, nt)| manufactured_error(nx, nt))
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|p| (p - 2.0).abs() <= 0.2);
    ensure(ok, format!("max errors {}, observed orders {orders:.3?}", sci(&errs)))
}

fn energy_conservation() -> Check {
    let domain = MovingDomain::interval("0", "1", (0.0, 2.0)).unwrap();
    let mesh = Arc::new(Mesh::new(&domain, GridSpec::new(200, 800).unwrap()).unwrap());
    let mut value: Vec<f64> = (0..mesh.m).map(|i| (PI * mesh.x(0, i)[0]).sin()).collect();
    value[mesh.m - 1] = 0.0;
    let data = InitialData::Cauchy { value, velocity: vec![0.0; mesh.m] };
    let field = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Adjoint)
        .and_then(|s| s.solve(&data, Direction::Forward, None))
        .unwrap();
    let e0 = discrete_energy(&field, 0);
    let drift = (0..mesh.grid.nt)
        .map(|n| ((discrete_energy(&field, n) - e0) / e0).abs())
        .fold(0.0, f64::max);
    let closed = energy(&field, 0, 1.0).gradient / (PI * PI / 2.0) - 1.0;
    ensure(
        drift <= 1e-6 && closed.abs() <= 1e-4,
        format!("relative drift {drift:.3e}, gradient energy vs pi^2/2 {closed:.3e}"),
    )
}

fn derivative_bound_case(
    lower: &[&str],
    upper: &[&str],
    window: (f64, f64),
    x0: &[f64],
    t0: f64,
    grid: (usize, usize),
) -> std::result::Result<(Vec<f64>, f64), String> {
    let domain = MovingDomain::product(lower, upper, window).map_err(|e| e.to_string())?;
    let mesh = Mesh::new(&domain, GridSpec::new(grid.0, grid.1).unwrap()).map_err(|e| e.to_string())?;
    let frame = ObservationFrame::new(t0, x0);
    let r_plus = frame_extents(&domain, &frame, &mesh, None).map_err(|e| e.to_string())?.r_plus;
    let n2 = (x0.len() * x0.len()) as f64;
    let mut maxima = Vec::new();
    for m in [1.0, 2.0, 4.0, 8.0] {
        let params = CarlemanParams::observability(m * n2, 0.3, 1.0, r_plus);
        let report = check_derivative_bound(&domain, &frame, &params, default_f_min(&mesh), 10_000, 7)
            .map_err(|e| e.to_string())?;
        maxima.push(report.max_ratio);
    }
    let hi = maxima.iter().copied().fold(f64::MIN, f64::max);
    let lo = maxima.iter().copied().fold(f64::MAX, f64::min);
    Ok((maxima, hi / lo - 1.0))
}

fn weight_derivative_bound() -> Check {
    let (one, v1) = derivative_bound_case(&["-1"], &["1"], (0.0, 2.5), &[0.0], 1.25, (60, 125))?;
    let (two, v2) = derivative_bound_case(&["-1", "-1"], &["1", "1"], (0.0, 3.2), &[0.0, 0.0], 1.6, (40, 64))?;
    ensure(
        v1 < 0.1 && v2 < 0.1,
        format!("n=1 maxima {one:.4?} (variation {v1:.3}), n=2 maxima {two:.4?} (variation {v2:.3})"),
    )
}

fn carleman_check() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, expected) in [("static.json", 20), ("box2d.json", 5)] {
        let out = run(Command::CarlemanCheck, &config(name))?;
        let d = &out.report.details;
        let spread = &d["spread"];
        let growth = spread["growth"].as_f64().unwrap_or(f64::NAN);
        let literal = spread["spread"].as_f64().unwrap_or(f64::NAN);
        let scaling = detail(&out, "scaling_deviation");
        let trials = d["trials"].as_u64().unwrap_or(0) as usize;
        let finite = out.report.ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        ok &= finite && trials == expected && growth <= 2.0 && scaling <= 1e-10;
        lines.push(format!(
            "{name}: {trials} trials, max ratios {}, growth {growth:.3} (two-sided spread {literal:.2}), scaling {scaling:.1e}",
            sci(&out.report.ratios)
        ));
    }
    ensure(ok, lines.join("; "))
}

fn observability() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["static.json", "moving.json"] {
        let base = config(name);
        let mut fine = base.clone();
        fine.grid.nx = 2 * base.grid.nx;
        fine.grid.nt = 2 * base.grid.nt;
        let mut constants = Vec::new();
        for cfg in [&base, &fine] {
            let out = run(Command::Observability, cfg)?;
            let finite = out.report.ratios.len() == 20 && out.report.ratios.iter().all(|r| r.is_finite());
            ok &= finite;
            constants.push(out.report.empirical_C.unwrap_or(f64::NAN));
        }
        let stable = constants[0].max(constants[1]) / constants[0].min(constants[1]);
        ok &= stable <= 2.0;
        lines.push(format!("{name}: C {:.4} -> {:.4} under refinement", constants[0], constants[1]));
    }
    let mut short = config("static.json");
    short.domain.tau_plus = 1.5;
    short.observation.t0 = movingwave_cli::config::T0::Value(0.75);
    match execute(Command::Observability, &short, &options()) {
        Err(e @ CliError::Validation { .. }) if e.exit_code() == 2 => lines.push(format!("window (0, 1.5) rejected: {e}")),
        Err(e) => {
            ok = false;
            lines.push(format!("window (0, 1.5): wrong error {e}"));
        }
        Ok(_) => {
            ok = false;
            lines.push("window (0, 1.5) accepted".into());
        }
    }
    let gate = movingwave_core::geometry::window_report(
        &config("static.json").build_domain().map_err(|e| e.to_string())?,
        &[0.0],
        (0.0, 1.5),
        None,
    );
    ok &= (gate.r_plus + gate.r_minus - 2.0).abs() < 1e-12;
    ensure(ok, lines.join("; "))
}

fn control() -> Check {
    let out = run(Command::Control, &config("static.json"))?;
    let d = &out.report.details;
    let iterations: u64 = d["iterations"].as_array().map_or(u64::MAX, |a| a.iter().filter_map(Value::as_u64).sum());
    let residual = out.report.residuals.last().copied().unwrap_or(f64::NAN);
    let ratio = out.report.final_error_ratio.unwrap_or(f64::NAN);
    let sym = detail(&out, "gramian_asymmetry").max(detail(&out, "forward_asymmetry"));
    let outside = detail(&out, "max_control_outside_w_prime");
    let monotone = out.report.residuals.windows(2).all(|w| w[1] <= w[0]);
    ensure(
        sym <= 1e-10
            && d["converged"] == Value::Bool(true)
            && residual <= 1e-8
            && iterations <= 500
            && ratio <= 1e-3
            && outside == 0.0
            && monotone,
        format!(
            "asymmetry {sym:.1e}, {iterations} iterations to residual {residual:.2e}, final error ratio {ratio:.2e}, max |control| outside W' {outside:e}"
        ),
    )
}

fn static_reduction_case(lower: &[&str], upper: &[&str], window: (f64, f64), x0: &[f64], t0: f64, nx: usize, nt: usize) -> std::result::Result<usize, String> {
    let domain = MovingDomain::product(lower, upper, window).map_err(|e| e.to_string())?;
    let mesh = Mesh::new(&domain, GridSpec::new(nx, nt).unwrap()).map_err(|e| e.to_string())?;
    let frame = ObservationFrame::new(t0, x0);
    let params = CarlemanParams { a: 1.0, b: 0.3, eps: 0.0, delta: 0.3, sigma: 0.5, r: 3.0 };
    let masks = build_region_masks(&domain, &frame, &params, &mesh).map_err(|e| e.to_string())?;
    let mut count = 0;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let Some(face) = mesh.face_of_node(j) else {
                continue;
            };
            let pt = mesh.point(n, j);
            let nu = if face.side == Side::Upper { 1.0 } else { -1.0 };
            let radial = (pt.x[face.dim] - x0[face.dim]) * nu;
            let f0 = (0..x0.len()).map(|d| (pt.x[d] - x0[d]).powi(2)).sum::<f64>() - (pt.t - t0).powi(2);
            let expected = radial > 0.0 && f0 > 0.0;
            if masks.gamma_plus.get(mesh.global(n, j)) != expected {
                return Err(format!("x0 = {x0:?}: mismatch at t = {}, x = {:?}", pt.t, &pt.x[..x0.len()]));
            }
            count += expected as usize;
        }
    }
    Ok(count)
}

fn static_reduction() -> Check {
    let mut counts = Vec::new();
    for x0 in [0.0, 0.4, 1.5, -2.0] {
        counts.push(static_reduction_case(&["-1"], &["1"], (0.0, 2.5), &[x0], 1.25, 60, 125)?);
    }
    for x0 in [[0.0, 0.0], [1.4, 0.3]] {
        counts.push(static_reduction_case(&["-1", "-1"], &["1", "1"], (0.0, 3.2), &x0, 1.6, 24, 40)?);
    }
    ensure(
        counts.iter().all(|&c| c > 0),
        format!("Gamma+ equals the half-space mask cell for cell; face nodes {counts:?}"),
    )
}

fn determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_movingwave");
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/static.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for command in ["regions", "simulate", "adjoint", "energy", "carleman-check", "observability", "control"] {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = dir.path().join(format!("{command}-{run}"));
            let status = std::process::Command::new(bin)
                .args([command, "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .args(["--seed", "11"])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{command}: {}", String::from_utf8_lossy(&status.stderr)));
            }
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .map_err(|e| e.to_string())?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| e.to_string())?;
            files.sort();
            let contents: Vec<(String, Vec<u8>)> = files
                .iter()
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
                .collect();
            outputs.push(contents);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{command}: outputs differ between runs"));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{compared} files byte-identical across two runs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("coordinate identities", coordinate_identities),
        ("solver convergence", solver_convergence),
        ("energy conservation", energy_conservation),
        ("weight derivative bound", weight_derivative_bound),
        ("carleman check", carleman_check),
        ("observability", observability),
        ("hum control", control),
        ("static reduction", static_reduction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, text) = match result {
            Ok(text) => ("PASS", text),
            Err(text) => {
                failed += 1;
                ("FAIL", text)
            }
        };
        println!("{tag} {}. {name} ({secs:.2} s): {text}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

use std::sync::Arc;

use movingwave_core::expr::{Expr, Var};
use movingwave_core::geometry::MovingDomain;
use movingwave_core::grid::{GridSpec, Mesh};
use movingwave_core::wavesolver::{
    discrete_energy, energy, CoefficientSet, Direction, InitialData, Solver, System,
};

const EXACT: &str = "sin(3.141592653589793*x1/(1 + 0.25*t))*cos(t)";

fn manufactured_error(nx: usize, nt: usize) -> f64 {
    let dom = MovingDomain::interval("0", "1 + 0.25*t", (0.0, 1.0)).unwrap();
    let mesh = Arc::new(Mesh::new(&dom, GridSpec::new(nx, nt).unwrap()).unwrap());
    let exact = Expr::parse(EXACT, 1).unwrap();
    let et = exact.derivative(Var::T).unwrap();
    let ett = et.derivative(Var::T).unwrap();
    let exx = exact.derivative(Var::X(0)).unwrap().derivative(Var::X(0)).unwrap();
    let mut source = vec![0.0; mesh.len()];
    for n in 0..mesh.levels() {
        for i in 0..mesh.m {
            let (t, x) = (mesh.time(n), mesh.x(n, i));
            source[mesh.global(n, i)] = -ett.eval(t, &x[..1]) + exx.eval(t, &x[..1]);
        }
    }
    let mut value: Vec<f64> = (0..mesh.m).map(|i| exact.eval(0.0, &mesh.x(0, i)[..1])).collect();
    let mut velocity: Vec<f64> = (0..mesh.m).map(|i| et.eval(0.0, &mesh.x(0, i)[..1])).collect();
    for v in [&mut value, &mut velocity] {
        v[0] = 0.0;
        v[mesh.m - 1] = 0.0;
    }
    let solver = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Adjoint).unwrap();
    let field = solver
        .solve(&InitialData::Cauchy { value, velocity }, Direction::Forward, Some(&source))
        .unwrap();
    let mut err: f64 = 0.0;
    for n in 0..mesh.levels() {
        for i in 0..mesh.m {
            let e = exact.eval(mesh.time(n), &mesh.x(n, i)[..1]);
            err = err.max((field.value(n, i) - e).abs());
        }
    }
    err
}

#[test]
fn manufactured_solution_on_moving_interval_is_second_order() {
    let errs: Vec<f64> = [(50, 200), (100, 400), (200, 800)]
        .iter()
        .map(|&(nx, nt)| manufactured_error(nx, nt))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.4..=4.6).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn free_wave_energy() {
    let dom = MovingDomain::interval("0", "1", (0.0, 2.0)).unwrap();
    let mesh = Arc::new(Mesh::new(&dom, GridSpec::new(200, 800).unwrap()).unwrap());
    let pi = std::f64::consts::PI;
    let mut value: Vec<f64> = (0..mesh.m).map(|i| (pi * mesh.xhat(i)).sin()).collect();
    value[mesh.m - 1] = 0.0;
    let data = InitialData::Cauchy { value, velocity: vec![0.0; mesh.m] };
    let solver = Solver::new(&CoefficientSet::zero(1), mesh.clone(), System::Adjoint).unwrap();
    let field = solver.solve(&data, Direction::Forward, None).unwrap();
    let e0 = discrete_energy(&field, 0);
    let drift = (0..mesh.grid.nt)
        .map(|n| ((discrete_energy(&field, n) - e0) / e0).abs())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-6, "{drift}");
    let worst = (0..mesh.levels())
        .map(|n| (energy(&field, n, 1.0).gradient / (pi * pi / 2.0) - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

use std::f64::consts::PI;
use std::sync::Arc;

use movingwave_core::estimates::{
    carleman_report, check_boundary_condition, check_carleman, default_f_min, manufactured_trials,
    radial_bump, BoxVariant, Jets, WeightTable,
};
use movingwave_core::geometry::{MovingDomain, ObservationFrame, Point};
use movingwave_core::grid::{GridSpec, Mesh};
use movingwave_core::regions::{build_region_masks, frame_extents};
use movingwave_core::rng::seeded;
use movingwave_core::wavesolver::SpacetimeField;
use movingwave_core::weights::{log_zeta, CarlemanParams};

fn static_box(nx: usize, nt: usize) -> (MovingDomain, Arc<Mesh>, ObservationFrame, f64) {
    let domain = MovingDomain::product(&["-1", "-1"], &["1", "1"], (0.0, 3.2)).unwrap();
    let mesh = Arc::new(Mesh::new(&domain, GridSpec::new(nx, nt).unwrap()).unwrap());
    let frame = ObservationFrame::new(1.6, &[0.0, 0.0]);
    let r_plus = frame_extents(&domain, &frame, &mesh, None).unwrap().r_plus;
    (domain, mesh, frame, r_plus)
}

#[test]
fn manufactured_jets_agree_with_differences() {
    let domain = MovingDomain::product(&["-1 + 0.1*t", "-1"], &["1", "1 + 0.1*sin(t)"], (0.0, 2.0)).unwrap();
    let mut errs = Vec::new();
    for (nx, nt) in [(30, 60), (60, 120)] {
        let mesh = Arc::new(Mesh::new(&domain, GridSpec::new(nx, nt).unwrap()).unwrap());
        let exact = &manufactured_trials(&mesh, &domain, 1, &mut seeded(9))[0];
        let field = SpacetimeField {
            mesh: mesh.clone(),
            values: exact.nodes.iter().map(|j| j.phi).collect(),
            dirichlet: true,
        };
        let fd = Jets::from_field(&field, BoxVariant::Discrete, None).unwrap();
        let scale = exact.nodes.iter().fold(0.0f64, |m, j| m.max(j.box_phi.abs()));
        let mut worst = 0.0f64;
        for n in 2..mesh.levels() - 2 {
            for j in 0..mesh.slice_len {
                if mesh.is_boundary(j) {
                    continue;
                }
                let g = mesh.global(n, j);
                let (a, b) = (&exact.nodes[g], &fd.nodes[g]);
                worst = worst
                    .max((a.phi_t - b.phi_t).abs())
                    .max((a.grad[0] - b.grad[0]).abs())
                    .max((a.grad[1] - b.grad[1]).abs())
                    .max((a.box_phi - b.box_phi).abs());
            }
        }
        errs.push(worst / scale);
    }
    assert!(errs[1] < 2e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn manufactured_trials_vanish_on_the_walls() {
    let (domain, mesh, frame, _) = static_box(24, 40);
    for jets in manufactured_trials(&mesh, &domain, 4, &mut seeded(3)) {
        check_boundary_condition(&jets, &frame).unwrap();
        assert!(!jets.is_zero());
    }
    check_boundary_condition(&radial_bump(mesh, &[0.0, 0.0], 0.9), &frame).unwrap();
}

/// `eps ∫ zeta r^-1 (u (phi_t ∓ phi_r))^2` in polar coordinates on a fine
/// midpoint grid, for the bump `(1 - r^2/rho^2)^3 cos t`.
fn polar_parts(frame: &ObservationFrame, params: &CarlemanParams, f_min: f64, log_scale: f64, rho: f64) -> (f64, f64) {
    let (nt, nr) = (3200, 900);
    let (dt, dr) = (3.2 / nt as f64, rho / nr as f64);
    let (mut up, mut vp) = (0.0, 0.0);
    for a in 0..nt {
        let t = (a as f64 + 0.5) * dt;
        for b in 0..nr {
            let r = (b as f64 + 0.5) * dr;
            let pt = Point::new(t, &[r, 0.0]);
            let c = frame.null_coords(&pt);
            if c.f_p <= f_min {
                continue;
            }
            let z = (log_zeta(frame, params, &pt).unwrap() - log_scale).exp();
            let w = 1.0 - r * r / (rho * rho);
            let phi_t = -w.powi(3) * t.sin();
            let phi_r = -6.0 * w * w * r / (rho * rho) * t.cos();
            let jac = 2.0 * PI * r * dr * dt;
            up += jac * z / r * (c.u_p * (phi_t - phi_r)).powi(2);
            vp += jac * z / r * (c.v_p * (phi_t + phi_r)).powi(2);
        }
    }
    (params.eps * up, params.eps * vp)
}

#[test]
fn radial_bump_matches_polar_quadrature() {
    let (domain, mesh, frame, r_plus) = static_box(90, 144);
    let params = CarlemanParams::observability(4.0, 0.3, 1.0, r_plus);
    let masks = build_region_masks(&domain, &frame, &params, &mesh).unwrap();
    let f_min = default_f_min(&mesh);
    let table = WeightTable::new(&mesh, &frame, &params, &masks, f_min).unwrap();
    let report = carleman_report(&radial_bump(mesh, &[0.0, 0.0], 0.9), &frame, &table).unwrap();
    let terms = report.terms.unwrap();
    assert!(terms.angular_part <= 1e-12 * (terms.u_part + terms.v_part), "{terms:?}");
    let (u, v) = polar_parts(&frame, &params, f_min, table.log_scale, 0.9);
    assert!((terms.u_part - u).abs() <= 0.01 * u, "{} vs {u}", terms.u_part);
    assert!((terms.v_part - v).abs() <= 0.01 * v, "{} vs {v}", terms.v_part);
}

#[test]
fn two_dimensional_ratios_are_finite_and_scale_free() {
    let (domain, mesh, frame, r_plus) = static_box(40, 64);
    let params = CarlemanParams::observability(4.0, 0.3, 1.0, r_plus);
    let masks = build_region_masks(&domain, &frame, &params, &mesh).unwrap();
    let mut trials = vec![radial_bump(mesh.clone(), &[0.0, 0.0], 0.9)];
    trials.extend(manufactured_trials(&mesh, &domain, 4, &mut seeded(21)));
    let rows = check_carleman(&trials, &frame, &params, &[4.0, 8.0, 16.0, 32.0], &masks, default_f_min(&mesh)).unwrap();
    for row in &rows {
        let c = row.max_ratio.unwrap();
        assert!(c.is_finite() && c > 0.0);
    }
    let tripled: Vec<Jets> = trials.iter().map(|j| j.scale(3.0)).collect();
    let again = check_carleman(&tripled, &frame, &params, &[4.0], &masks, default_f_min(&mesh)).unwrap();
    for (a, b) in rows[0].reports.iter().zip(&again[0].reports) {
        let (a, b) = (a.constant.unwrap(), b.constant.unwrap());
        assert!((a - b).abs() <= 1e-10 * a);
    }
}

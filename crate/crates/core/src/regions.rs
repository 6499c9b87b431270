//! Node masks for `D_p`, `U ∩ D_p`, the observed boundary `Γ+` (and its
//! `eps = 0` limit `Γ'`), the sigma-neighbourhood `O_sigma(Γ+)`, `W` and the
//! enlarged set `W'`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{LocationClass, MovingDomain, ObservationFrame};
use crate::grid::Mesh;
use crate::weights::CarlemanParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionKind {
    Dp,
    UDp,
    GammaPlus,
    GammaPrime,
    OSigma,
    W,
    WPrime,
}

impl RegionKind {
    pub fn label(self) -> &'static str {
        match self {
            RegionKind::Dp => "D_p",
            RegionKind::UDp => "U ∩ D_p",
            RegionKind::GammaPlus => "Γ+",
            RegionKind::GammaPrime => "Γ'",
            RegionKind::OSigma => "O_sigma",
            RegionKind::W => "W",
            RegionKind::WPrime => "W'",
        }
    }
}

/// Indicator over all spacetime nodes of a mesh (`mesh.global(n, j)`).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub kind: RegionKind,
    pub nodes: Vec<bool>,
    /// Spacetime volume, or boundary area for the `Γ` masks.
    pub measure: f64,
}

impl RegionMask {
    pub fn count(&self) -> usize {
        self.nodes.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.nodes.iter().any(|&b| b)
    }

    pub fn get(&self, g: usize) -> bool {
        self.nodes[g]
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.nodes.iter().zip(&other.nodes).all(|(&a, &b)| !a || b)
    }
}

#[derive(Debug, Clone)]
pub struct RegionMasks {
    pub dp: RegionMask,
    pub u_dp: RegionMask,
    pub gamma_plus: RegionMask,
    pub gamma_prime: RegionMask,
    pub o_sigma: RegionMask,
    pub w: RegionMask,
    pub w_prime: RegionMask,
    /// `N f_p` at face nodes (NaN elsewhere).
    pub normal_f: Vec<f64>,
}

impl RegionMasks {
    /// `EmptyRegion` when no boundary node is observed.
    pub fn require_gamma(&self) -> Result<()> {
        if self.gamma_plus.is_empty() {
            Err(Error::EmptyRegion("Γ+"))
        } else {
            Ok(())
        }
    }
}

fn volume_measure(mesh: &Mesh, nodes: &[bool]) -> f64 {
    let mut total = 0.0;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            if nodes[mesh.global(n, j)] {
                total += mesh.node_volume(n, j);
            }
        }
    }
    total
}

/// Builds every mask on the nodes of `mesh`. A face node (edge and corner
/// nodes excluded) belongs to `Γ+` when `f_p > 0` and
/// `(1 - eps r_p) N f_p + eps f_p N r_p > 0` there.
pub fn build_region_masks(
    domain: &MovingDomain,
    frame: &ObservationFrame,
    params: &CarlemanParams,
    mesh: &Mesh,
) -> Result<RegionMasks> {
    if frame.dim != domain.dim() {
        return Err(Error::InvalidInput(format!(
            "observation point has dimension {}, domain has {}",
            frame.dim,
            domain.dim()
        )));
    }
    let total = mesh.len();
    let mut dp = vec![false; total];
    let mut u_dp = vec![false; total];
    let mut gamma_plus = vec![false; total];
    let mut gamma_prime = vec![false; total];
    let mut normal_f = vec![f64::NAN; total];
    let mut gamma_area = 0.0;
    let mut gamma_prime_area = 0.0;

    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let g = mesh.global(n, j);
            let pt = mesh.point(n, j);
            let f = frame.f_p(&pt);
            dp[g] = f > 0.0;
            u_dp[g] = f > 0.0;
            let Some(face) = mesh.face_of_node(j) else {
                continue;
            };
            let normal = domain.face_normal(face, pt.t)?;
            let nf = frame.normal_derivative_f(&normal, &pt);
            normal_f[g] = nf;
            if f <= 0.0 {
                continue;
            }
            let area = mesh.face_area(n, j, face) * normal.measure_factor();
            if frame.boundary_functional(&normal, &pt, params.eps) > 0.0 {
                gamma_plus[g] = true;
                gamma_area += area;
            }
            if nf > 0.0 {
                gamma_prime[g] = true;
                gamma_prime_area += area;
            }
        }
    }

    let o_sigma = dilate_in_space(mesh, &gamma_plus, params.sigma);
    let w: Vec<bool> = (0..total).map(|g| o_sigma[g] && u_dp[g]).collect();
    let w_prime = dilate_spacetime(mesh, &w);

    let mask = |kind, nodes: Vec<bool>, measure| RegionMask { kind, nodes, measure };
    Ok(RegionMasks {
        dp: mask(RegionKind::Dp, dp.clone(), volume_measure(mesh, &dp)),
        u_dp: mask(RegionKind::UDp, u_dp.clone(), volume_measure(mesh, &u_dp)),
        gamma_plus: mask(RegionKind::GammaPlus, gamma_plus, gamma_area),
        gamma_prime: mask(RegionKind::GammaPrime, gamma_prime, gamma_prime_area),
        o_sigma: mask(RegionKind::OSigma, o_sigma.clone(), volume_measure(mesh, &o_sigma)),
        w: mask(RegionKind::W, w.clone(), volume_measure(mesh, &w)),
        w_prime: mask(RegionKind::WPrime, w_prime.clone(), volume_measure(mesh, &w_prime)),
        normal_f,
    })
}

/// Interior nodes within Euclidean distance `< sigma` of a marked node on the
/// same time slice.
pub fn dilate_in_space(mesh: &Mesh, seeds: &[bool], sigma: f64) -> Vec<bool> {
    let mut out = vec![false; mesh.len()];
    if !(sigma > 0.0) {
        return out;
    }
    for n in 0..mesh.levels() {
        let reach: Vec<isize> = (0..3)
            .map(|d| {
                if d < mesh.dim {
                    (sigma / mesh.spacing(n, d)).ceil() as isize + 1
                } else {
                    0
                }
            })
            .collect();
        for j in 0..mesh.slice_len {
            if !seeds[mesh.global(n, j)] {
                continue;
            }
            let centre = mesh.x(n, j);
            let idx = mesh.multi_index(j);
            let lo = |d: usize| (idx[d] as isize - reach[d]).max(0) as usize;
            let hi = |d: usize| {
                if d < mesh.dim {
                    (idx[d] as isize + reach[d]).min(mesh.m as isize - 1) as usize
                } else {
                    0
                }
            };
            for i2 in lo(2)..=hi(2) {
                for i1 in lo(1)..=hi(1) {
                    for i0 in lo(0)..=hi(0) {
                        let jj = mesh.flat_index(&[i0, i1, i2]);
                        if mesh.is_boundary(jj) {
                            continue;
                        }
                        let x = mesh.x(n, jj);
                        let dist_sq: f64 = (0..mesh.dim).map(|d| (x[d] - centre[d]).powi(2)).sum();
                        if dist_sq < sigma * sigma {
                            out[mesh.global(n, jj)] = true;
                        }
                    }
                }
            }
        }
    }
    out
}

/// One-node Chebyshev dilation in `(t, index)`, restricted to interior nodes
/// on levels `1..nt`.
pub fn dilate_spacetime(mesh: &Mesh, seeds: &[bool]) -> Vec<bool> {
    let mut out = vec![false; mesh.len()];
    let nt = mesh.grid.nt;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            if !seeds[mesh.global(n, j)] {
                continue;
            }
            let idx = mesh.multi_index(j);
            let range = |d: usize| {
                if d < mesh.dim {
                    idx[d].saturating_sub(1)..=(idx[d] + 1).min(mesh.m - 1)
                } else {
                    0..=0
                }
            };
            for nn in n.saturating_sub(1).max(1)..=(n + 1).min(nt - 1) {
                for i2 in range(2) {
                    for i1 in range(1) {
                        for i0 in range(0) {
                            let jj = mesh.flat_index(&[i0, i1, i2]);
                            if !mesh.is_boundary(jj) {
                                out[mesh.global(nn, jj)] = true;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `R+` and `R-` for an observation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameExtents {
    pub location: LocationClass,
    /// Largest `r_p` over nodes of closure(U) ∩ D_p plus one grid spacing.
    pub r_plus: f64,
    /// Exterior: distance from `x0` to the slice at `t0`. Otherwise the twin
    /// offset (half the distance between twin points).
    pub r_minus: f64,
}

/// Default twin offset for interior points: half the depth of `x0` in its
/// slice.
pub fn frame_extents(
    domain: &MovingDomain,
    frame: &ObservationFrame,
    mesh: &Mesh,
    twin_offset: Option<f64>,
) -> Result<FrameExtents> {
    let mut r_max: f64 = 0.0;
    let mut any = false;
    for n in 0..mesh.levels() {
        for j in 0..mesh.slice_len {
            let c = frame.null_coords(&mesh.point(n, j));
            if c.f_p > 0.0 {
                any = true;
                r_max = r_max.max(c.r_p);
            }
        }
    }
    if !any {
        return Err(Error::EmptyRegion("U ∩ D_p"));
    }
    let spacing = mesh.max_spacing().max(mesh.k);
    let location = frame.classify(domain, 1e-12);
    let t0 = frame.center.t;
    let r_minus = match location {
        LocationClass::Exterior => domain.distance_to_slice(t0, &frame.center.x),
        _ => match twin_offset {
            Some(d) if d > 0.0 => d,
            Some(d) => {
                return Err(Error::InvalidInput(format!("twin offset {d} must be positive")))
            }
            None => (0.5 * domain.depth_in_slice(t0, &frame.center.x)).max(spacing),
        },
    };
    Ok(FrameExtents {
        location,
        r_plus: r_max + spacing,
        r_minus,
    })
}

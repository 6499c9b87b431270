//! Spacetime node layout over a moving box: a uniform grid on the reference
//! cube pushed forward through the cylinder map at every time level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Face, MovingDomain, Point, Side};

/// `nx` interior nodes per spatial direction, `nt` time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nt: usize,
}

impl GridSpec {
    pub fn new(nx: usize, nt: usize) -> Result<Self> {
        if nx == 0 || nt == 0 {
            return Err(Error::InvalidInput(format!(
                "grid needs nx >= 1 and nt >= 1 (got {nx}, {nt})"
            )));
        }
        Ok(Self { nx, nt })
    }

    /// Reference spacing `1/(nx+1)`.
    pub fn h_hat(&self) -> f64 {
        1.0 / (self.nx + 1) as f64
    }

    pub fn k(&self, window: (f64, f64)) -> f64 {
        (window.1 - window.0) / self.nt as f64
    }
}

/// Boundary curve samples at every time level.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Span {
    pub lo: f64,
    pub width: f64,
    pub lo_d1: f64,
    pub width_d1: f64,
    pub lo_d2: f64,
    pub width_d2: f64,
}

impl Span {
    fn at(domain: &MovingDomain, d: usize, t: f64) -> Self {
        let (a, b) = (domain.lower(d), domain.upper(d));
        Self {
            lo: a.value(t),
            width: b.value(t) - a.value(t),
            lo_d1: a.speed(t),
            width_d1: b.speed(t) - a.speed(t),
            lo_d2: a.accel(t),
            width_d2: b.accel(t) - a.accel(t),
        }
    }

    pub fn x(&self, xhat: f64) -> f64 {
        self.lo + xhat * self.width
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width
    }

    pub fn hi_d1(&self) -> f64 {
        self.lo_d1 + self.width_d1
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub grid: GridSpec,
    pub window: (f64, f64),
    pub k: f64,
    pub h_hat: f64,
    /// Nodes per direction including the two boundary nodes.
    pub m: usize,
    pub slice_len: usize,
    spans: Vec<Span>,
}

impl Mesh {
    pub fn new(domain: &MovingDomain, grid: GridSpec) -> Result<Self> {
        let grid = GridSpec::new(grid.nx, grid.nt)?;
        let dim = domain.dim();
        let window = domain.window();
        let k = grid.k(window);
        let m = grid.nx + 2;
        let mut spans = Vec::with_capacity((grid.nt + 1) * dim);
        for n in 0..=grid.nt {
            let t = window.0 + n as f64 * k;
            for d in 0..dim {
                spans.push(Span::at(domain, d, t));
            }
        }
        Ok(Self {
            dim,
            grid,
            window,
            k,
            h_hat: grid.h_hat(),
            m,
            slice_len: m.pow(dim as u32),
            spans,
        })
    }

    pub fn levels(&self) -> usize {
        self.grid.nt + 1
    }

    pub fn len(&self) -> usize {
        self.levels() * self.slice_len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.grid.nt {
            self.window.1
        } else {
            self.window.0 + n as f64 * self.k
        }
    }

    pub fn xhat(&self, i: usize) -> f64 {
        i as f64 * self.h_hat
    }

    pub fn span(&self, n: usize, d: usize) -> &Span {
        &self.spans[n * self.dim + d]
    }

    /// Physical spacing in direction `d` at level `n`.
    pub fn spacing(&self, n: usize, d: usize) -> f64 {
        self.span(n, d).width * self.h_hat
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.levels())
            .flat_map(|n| (0..self.dim).map(move |d| (n, d)))
            .map(|(n, d)| self.spacing(n, d))
            .fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.levels())
            .flat_map(|n| (0..self.dim).map(move |d| (n, d)))
            .map(|(n, d)| self.spacing(n, d))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn multi_index(&self, j: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = j;
        for o in out.iter_mut().take(self.dim) {
            *o = rest % self.m;
            rest /= self.m;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize; 3]) -> usize {
        (0..self.dim).rev().fold(0, |acc, d| acc * self.m + idx[d])
    }

    /// Global index of node `j` at level `n`.
    pub fn global(&self, n: usize, j: usize) -> usize {
        n * self.slice_len + j
    }

    pub fn x(&self, n: usize, j: usize) -> [f64; 3] {
        let idx = self.multi_index(j);
        let mut out = [0.0; 3];
        for d in 0..self.dim {
            out[d] = self.span(n, d).x(self.xhat(idx[d]));
        }
        out
    }

    pub fn point(&self, n: usize, j: usize) -> Point {
        Point {
            t: self.time(n),
            x: self.x(n, j),
        }
    }

    pub fn is_boundary(&self, j: usize) -> bool {
        let idx = self.multi_index(j);
        (0..self.dim).any(|d| idx[d] == 0 || idx[d] == self.m - 1)
    }

    /// The face containing node `j` if it lies on exactly one face.
    /// Edge and corner nodes return `None`.
    pub fn face_of_node(&self, j: usize) -> Option<Face> {
        let idx = self.multi_index(j);
        let mut face = None;
        for d in 0..self.dim {
            let side = if idx[d] == 0 {
                Side::Lower
            } else if idx[d] == self.m - 1 {
                Side::Upper
            } else {
                continue;
            };
            if face.is_some() {
                return None;
            }
            face = Some(Face { dim: d, side });
        }
        face
    }

    fn end_factor(i: usize, last: usize) -> f64 {
        if i == 0 || i == last {
            0.5
        } else {
            1.0
        }
    }

    /// Trapezoid (dual cell) spatial volume of node `j` at level `n`.
    pub fn cell_volume(&self, n: usize, j: usize) -> f64 {
        let idx = self.multi_index(j);
        (0..self.dim)
            .map(|d| self.spacing(n, d) * Self::end_factor(idx[d], self.m - 1))
            .product()
    }

    /// Trapezoid spacetime volume of node `j` at level `n`.
    pub fn node_volume(&self, n: usize, j: usize) -> f64 {
        self.k * Self::end_factor(n, self.grid.nt) * self.cell_volume(n, j)
    }

    /// Trapezoid area element of a face node (times `dt`, without the
    /// boundary speed factor).
    pub fn face_area(&self, n: usize, j: usize, face: Face) -> f64 {
        let idx = self.multi_index(j);
        let spatial: f64 = (0..self.dim)
            .filter(|&d| d != face.dim)
            .map(|d| self.spacing(n, d) * Self::end_factor(idx[d], self.m - 1))
            .product();
        self.k * Self::end_factor(n, self.grid.nt) * spatial
    }

    /// Neighbouring node of `j` shifted by `delta` in direction `d`, if any.
    pub fn shift(&self, j: usize, d: usize, delta: isize) -> Option<usize> {
        let idx = self.multi_index(j);
        let target = idx[d] as isize + delta;
        if target < 0 || target >= self.m as isize {
            return None;
        }
        let stride = self.m.pow(d as u32);
        Some((j as isize + delta * stride as isize) as usize)
    }
}

//! Uniform grids on the unit interval and unit square with homogeneous
//! Dirichlet boundary values eliminated.
//!
//! Discrete gradients are piecewise constant: one value per cell in 1D and
//! one per triangle in 2D (each square split along its anti-diagonal), which
//! is the lowest-order Lagrange element on a structured mesh.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::vecspace::Point;

/// One sparse row of a discrete gradient component.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct GradElement {
    /// Cell length (1D) or triangle area (2D).
    pub measure: f64,
    /// Gradient components; `rows.len()` is the spatial dimension.
    pub rows: Vec<SparseRow>,
}

impl GradElement {
    /// Gradient of `v` on this element, padded to two components.
    #[inline]
    pub fn gradient(&self, v: &Point) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, row) in self.rows.iter().enumerate() {
            g[k] = row.iter().map(|&(i, c)| c * v[i]).sum();
        }
        g
    }
}

/// Piecewise-constant discrete gradient on a grid of interior nodes.
#[derive(Debug, Clone)]
pub struct GradientOperator {
    dim: usize,
    spatial_dim: usize,
    h: f64,
    elements: Vec<GradElement>,
}

impl GradientOperator {
    /// `n` interior nodes on (0, 1), mesh size `1/(n+1)`.
    pub fn interval(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one interior node".into(),
            ));
        }
        let h = 1.0 / (n as f64 + 1.0);
        let mut elements = Vec::with_capacity(n + 1);
        for c in 0..=n {
            let mut row = Vec::with_capacity(2);
            if c >= 1 {
                row.push((c - 1, -1.0 / h));
            }
            if c < n {
                row.push((c, 1.0 / h));
            }
            elements.push(GradElement {
                measure: h,
                rows: vec![row],
            });
        }
        Ok(Self {
            dim: n,
            spatial_dim: 1,
            h,
            elements,
        })
    }

    /// `n x n` interior nodes on the unit square, node `(i, j)` stored at `j*n + i`.
    pub fn square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one interior node".into(),
            ));
        }
        let h = 1.0 / (n as f64 + 1.0);
        let node = |i: isize, j: isize| -> Option<usize> {
            if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                None
            } else {
                Some(j as usize * n + i as usize)
            }
        };
        let diff = |plus: Option<usize>, minus: Option<usize>| -> SparseRow {
            let mut row = Vec::with_capacity(2);
            if let Some(p) = plus {
                row.push((p, 1.0 / h));
            }
            if let Some(m) = minus {
                row.push((m, -1.0 / h));
            }
            row
        };
        let area = 0.5 * h * h;
        let mut elements = Vec::with_capacity(2 * (n + 1) * (n + 1));
        for b in 0..=n as isize {
            for a in 0..=n as isize {
                let v00 = node(a - 1, b - 1);
                let v10 = node(a, b - 1);
                let v01 = node(a - 1, b);
                let v11 = node(a, b);
                elements.push(GradElement {
                    measure: area,
                    rows: vec![diff(v10, v00), diff(v01, v00)],
                });
                elements.push(GradElement {
                    measure: area,
                    rows: vec![diff(v11, v01), diff(v11, v10)],
                });
            }
        }
        Ok(Self {
            dim: n * n,
            spatial_dim: 2,
            h,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    pub fn elements(&self) -> &[GradElement] {
        &self.elements
    }

    /// Stiffness matrix `sum_e |e| G_e^T G_e` (the 3-point / 5-point Laplacian).
    pub fn stiffness(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.dim, self.dim);
        for e in &self.elements {
            for row in &e.rows {
                for &(i, ci) in row {
                    for &(j, cj) in row {
                        k[(i, j)] += e.measure * ci * cj;
                    }
                }
            }
        }
        k
    }

    /// Lumped load vector `h^d f(x_i)`.
    pub fn load(&self, f: impl Fn(&[f64]) -> f64) -> Point {
        let w = self.h.powi(self.spatial_dim as i32);
        Point::from_iterator(self.dim, (0..self.dim).map(|i| w * f(&self.node_coords(i))))
    }

    /// Physical coordinates of interior node `i`.
    pub fn node_coords(&self, i: usize) -> Vec<f64> {
        match self.spatial_dim {
            1 => vec![(i as f64 + 1.0) * self.h],
            _ => {
                let n = (self.dim as f64).sqrt().round() as usize;
                vec![
                    ((i % n) as f64 + 1.0) * self.h,
                    ((i / n) as f64 + 1.0) * self.h,
                ]
            }
        }
    }

    /// Elements whose gradient depends on at least one node in `nodes`.
    pub fn elements_touching(&self, nodes: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.dim];
        for &i in nodes {
            mark[i] = true;
        }
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.rows.iter().any(|r| r.iter().any(|&(i, _)| mark[i])))
            .map(|(k, _)| k)
            .collect()
    }
}

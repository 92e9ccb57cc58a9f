//! Sampled scalar fields on spherical equiangular and planar square grids.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    SphereEquiangular,
    PlanarSquare,
    BsLattice,
}

/// Row layout of an equiangular sphere grid.
///
/// Row `i` sits at colatitude `(i + ½)·π/rows` and owns the band
/// `[i·π/rows, (i+1)·π/rows]`; column `j` sits at longitude `2πj/cols`.
/// The poles are carried separately as two cap values.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGeometry {
    pub thetas: Vec<f64>,
    /// Probability measure of one cell in each row; all cells sum to 1.
    pub cell_measure: Vec<f64>,
    /// Field values at the north and south pole.
    pub caps: [f64; 2],
}

impl SphereGeometry {
    pub fn new(rows: usize, cols: usize, caps: [f64; 2]) -> Self {
        let dtheta = PI / rows as f64;
        let thetas = (0..rows).map(|i| (i as f64 + 0.5) * dtheta).collect();
        let cell_measure = (0..rows)
            .map(|i| {
                let top = (i as f64 * dtheta).cos();
                let bottom = ((i + 1) as f64 * dtheta).cos();
                0.5 * (top - bottom) / cols as f64
            })
            .collect();
        SphereGeometry {
            thetas,
            cell_measure,
            caps,
        }
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.thetas.len() as f64
    }
}

/// Square planar grid: cell `(i, j)` sits at `(x0 + j·h, y0 + i·h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarGeometry {
    pub spacing: f64,
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridGeometry {
    Sphere(SphereGeometry),
    Planar(PlanarGeometry),
}

/// Gradient components on the same nodes as the values.
///
/// On the sphere these are `(∂θ f, (1/sin θ) ∂φ f)`, on the plane `(∂x F, ∂y F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGrids {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub values: Vec<f64>,
    pub geometry: GridGeometry,
    pub gradient: Option<GradientGrids>,
}

impl ScalarGrid {
    pub fn topology(&self) -> Topology {
        match self.geometry {
            GridGeometry::Sphere(_) => Topology::SphereEquiangular,
            GridGeometry::Planar(_) => Topology::PlanarSquare,
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn sphere(&self) -> Option<&SphereGeometry> {
        match &self.geometry {
            GridGeometry::Sphere(s) => Some(s),
            GridGeometry::Planar(_) => None,
        }
    }

    pub fn planar(&self) -> Option<&PlanarGeometry> {
        match &self.geometry {
            GridGeometry::Planar(p) => Some(p),
            GridGeometry::Sphere(_) => None,
        }
    }

    /// Unit vector of a sphere node.
    pub fn node_vector(&self, row: usize, col: usize) -> [f64; 3] {
        let geo = self.sphere().expect("sphere grid");
        let theta = geo.thetas[row];
        let phi = 2.0 * PI * col as f64 / self.cols as f64;
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Planar coordinates of a node.
    pub fn node_position(&self, row: usize, col: usize) -> [f64; 2] {
        let p = self.planar().expect("planar grid");
        [p.x0 + col as f64 * p.spacing, p.y0 + row as f64 * p.spacing]
    }

    /// Measure of one cell in a row (sphere: probability measure; plane: h²).
    pub fn cell_measure(&self, row: usize) -> f64 {
        match &self.geometry {
            GridGeometry::Sphere(s) => s.cell_measure[row],
            GridGeometry::Planar(p) => p.spacing * p.spacing,
        }
    }

    /// The same grid for `-f`.
    pub fn negated(&self) -> ScalarGrid {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v = -*v);
        if let GridGeometry::Sphere(s) = &mut g.geometry {
            s.caps = [-s.caps[0], -s.caps[1]];
        }
        if let Some(gr) = &mut g.gradient {
            gr.first.iter_mut().for_each(|v| *v = -*v);
            gr.second.iter_mut().for_each(|v| *v = -*v);
        }
        g
    }
}

//! Planar random waves with covariance close to `J₀(|u - v|)` and their
//! nodal counts on a disk.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::census::{count_components, planar_disk_counts, trace_loops, CensusResult};
use crate::error::{Error, Result};
use crate::field::DEFAULT_CELL_BUDGET;
use crate::grid::{GridGeometry, PlanarGeometry, ScalarGrid};
use crate::rng::{trial_rng, Provenance, Stream};

pub const DEFAULT_WAVES: usize = 256;
pub const DEFAULT_RADIUS: f64 = 40.0;
pub const DEFAULT_SPACING: f64 = 0.25;
/// Width of the evaluation margin around `D(R)`.
pub const MARGIN: f64 = 2.0;

/// `F(u) = √(2/M) Σ cos(k_j·u + φ_j)` with unit wave vectors `k_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSpec {
    pub directions: Vec<[f64; 2]>,
    pub phases: Vec<f64>,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl PlaneWaveSpec {
    /// Explicit waves; any count ≥ 1.
    pub fn from_waves(directions: Vec<[f64; 2]>, phases: Vec<f64>) -> Result<Self> {
        if directions.is_empty() || directions.len() != phases.len() {
            return Err(Error::InvalidParameter(
                "need matching, nonempty directions and phases".into(),
            ));
        }
        let amplitude = (2.0 / directions.len() as f64).sqrt();
        Ok(PlaneWaveSpec {
            directions,
            phases,
            amplitude,
            provenance: None,
        })
    }

    pub fn waves(&self) -> usize {
        self.directions.len()
    }

    pub fn eval(&self, u: [f64; 2]) -> f64 {
        let s: f64 = self
            .directions
            .iter()
            .zip(&self.phases)
            .map(|(k, p)| (k[0] * u[0] + k[1] * u[1] + p).cos())
            .sum();
        self.amplitude * s
    }

    /// The same field on a grid rotated by `angle` (directions rotated by `-angle`).
    pub fn rotated(&self, angle: f64) -> PlaneWaveSpec {
        let (s, c) = (-angle).sin_cos();
        let directions = self
            .directions
            .iter()
            .map(|k| [c * k[0] - s * k[1], s * k[0] + c * k[1]])
            .collect();
        PlaneWaveSpec {
            directions,
            ..self.clone()
        }
    }

    /// Samples on the square grid `x0 + j·h`, `y0 + i·h`.
    pub fn eval_grid(&self, rows: usize, cols: usize, geo: PlanarGeometry) -> ScalarGrid {
        let m = self.waves();
        let h = geo.spacing;
        // e^{i k_x x_j} per wave and column
        let mut ex_re = vec![0.0; m * cols];
        let mut ex_im = vec![0.0; m * cols];
        for (w, k) in self.directions.iter().enumerate() {
            for j in 0..cols {
                let (s, c) = (k[0] * (geo.x0 + j as f64 * h)).sin_cos();
                ex_re[j * m + w] = c;
                ex_im[j * m + w] = s;
            }
        }
        let mut values = vec![0.0; rows * cols];
        let mut by_re = vec![0.0; m];
        let mut by_im = vec![0.0; m];
        for i in 0..rows {
            let y = geo.y0 + i as f64 * h;
            for (w, (k, p)) in self.directions.iter().zip(&self.phases).enumerate() {
                let (s, c) = (k[1] * y + p).sin_cos();
                by_re[w] = c;
                by_im[w] = s;
            }
            let row = &mut values[i * cols..(i + 1) * cols];
            for (j, out) in row.iter_mut().enumerate() {
                let er = &ex_re[j * m..(j + 1) * m];
                let ei = &ex_im[j * m..(j + 1) * m];
                let mut acc = 0.0;
                for w in 0..m {
                    acc += er[w] * by_re[w] - ei[w] * by_im[w];
                }
                *out = self.amplitude * acc;
            }
        }
        ScalarGrid {
            rows,
            cols,
            values,
            geometry: GridGeometry::Planar(geo),
            gradient: None,
        }
    }
}

/// `m` waves with i.i.d. uniform directions and phases.
pub fn sample_plane_wave<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<PlaneWaveSpec> {
    if m < 8 {
        return Err(Error::InvalidParameter(format!("wave count {m} below 8")));
    }
    let mut directions = Vec::with_capacity(m);
    let mut phases = Vec::with_capacity(m);
    for _ in 0..m {
        let a: f64 = rng.random_range(0.0..2.0 * PI);
        directions.push([a.cos(), a.sin()]);
        phases.push(rng.random_range(0.0..2.0 * PI));
    }
    PlaneWaveSpec::from_waves(directions, phases)
}

/// Plane-wave field of trial `index`.
pub fn sample_plane_trial(m: usize, master_seed: u64, index: u64) -> Result<PlaneWaveSpec> {
    let mut rng = trial_rng(master_seed, Stream::PlaneWave, m as u64, index);
    let mut spec = sample_plane_wave(m, &mut rng)?;
    spec.provenance = Some(Provenance {
        master_seed,
        trial_index: index,
    });
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarCensus {
    pub radius: f64,
    pub spacing: f64,
    pub margin: f64,
    /// Closed loops contained in `D(R)`.
    pub n_star: usize,
    /// Loops (closed or not) meeting `D(R)`.
    pub n_cross: usize,
    /// Loops of diameter at most `d` meeting `D(R)`.
    pub n_d: usize,
    pub d: f64,
    /// Domains whose smallest grid cell lies in `D(R)`.
    pub n_anchored: usize,
    /// `n_star / (πR²)`.
    pub nu_star: f64,
    /// `n_anchored / (πR²)`. Domains cut by the window edge can be counted
    /// once per piece, so this runs high unless the margin is wide.
    pub nu_anchored: f64,
    pub census: CensusResult,
}

/// Census of `F` on the square covering `D(R + 2)`.
pub fn planar_census(spec: &PlaneWaveSpec, radius: f64, spacing: f64) -> Result<PlanarCensus> {
    planar_census_with(spec, radius, spacing, 2.0, DEFAULT_CELL_BUDGET)
}

pub fn planar_census_with(
    spec: &PlaneWaveSpec,
    radius: f64,
    spacing: f64,
    d: f64,
    budget: usize,
) -> Result<PlanarCensus> {
    planar_census_window(spec, radius, spacing, d, MARGIN, budget)
}

/// As [`planar_census_with`] on the square covering `D(R + margin)`.
pub fn planar_census_window(
    spec: &PlaneWaveSpec,
    radius: f64,
    spacing: f64,
    d: f64,
    margin: f64,
    budget: usize,
) -> Result<PlanarCensus> {
    if radius.is_nan() || radius < 10.0 {
        return Err(Error::InvalidParameter(format!("radius {radius} below 10")));
    }
    if !(spacing > 0.0 && spacing <= 0.3) {
        return Err(Error::InvalidParameter(format!(
            "spacing {spacing} outside (0, 0.3]"
        )));
    }
    if margin.is_nan() || margin < MARGIN {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} below {MARGIN}"
        )));
    }
    let half = radius + margin;
    let side = (2.0 * half / spacing).ceil() as usize + 1;
    if side * side > budget {
        return Err(Error::CellBudget {
            cells: side * side,
            budget,
        });
    }
    let geo = PlanarGeometry {
        spacing,
        x0: -half,
        y0: -half,
    };
    let grid = spec.eval_grid(side, side, geo);
    let census = count_components(&grid)?;
    let loops = trace_loops(&grid, &census);
    let (n_star, n_cross) = planar_disk_counts(&loops, [0.0, 0.0], radius);
    let r2 = radius * radius;
    let mut n_d = 0;
    for l in &loops {
        let dc = l.center[0].hypot(l.center[1]);
        if l.radius > d || dc - l.radius > radius {
            continue;
        }
        let meets = l.points.iter().any(|p| p[0] * p[0] + p[1] * p[1] <= r2);
        if meets && max_spread(&l.points) <= d {
            n_d += 1;
        }
    }
    let n_anchored = census
        .anchors
        .iter()
        .filter(|&&k| {
            let p = grid.node_position(k / side, k % side);
            p[0] * p[0] + p[1] * p[1] <= r2
        })
        .count();
    let area = PI * r2;
    Ok(PlanarCensus {
        radius,
        spacing,
        margin,
        n_star,
        n_cross,
        n_d,
        d,
        n_anchored,
        nu_star: n_star as f64 / area,
        nu_anchored: n_anchored as f64 / area,
        census: census.result.summary(),
    })
}

fn max_spread(pts: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    best
}

/// Comparison of the spherical constant with `4π·ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub a_hat: f64,
    pub a_se: f64,
    pub nu_hat: f64,
    pub nu_se: f64,
    pub planar_a: f64,
    pub difference: f64,
    pub combined_se: f64,
    pub z: f64,
}

pub fn sphere_plane_consistency(a_hat: f64, a_se: f64, nu_hat: f64, nu_se: f64) -> Consistency {
    let planar_a = 4.0 * PI * nu_hat;
    let combined_se = a_se.hypot(4.0 * PI * nu_se);
    let difference = a_hat - planar_a;
    let z = if combined_se > 0.0 {
        difference.abs() / combined_se
    } else if difference == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Consistency {
        a_hat,
        a_se,
        nu_hat,
        nu_se,
        planar_a,
        difference,
        combined_se,
        z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::bessel_j0;

    #[test]
    fn unit_variance_and_j0_covariance() {
        let trials = 4000;
        let u = [0.3, -1.1];
        let sep = 2.404826;
        let v = [u[0] + sep * 0.6, u[1] + sep * 0.8];
        let w = [u[0] + 1.0, u[1]];
        let (mut var, mut cov, mut cov1) = (0.0, 0.0, 0.0);
        for i in 0..trials {
            let s = sample_plane_trial(64, 3, i).unwrap();
            let (fu, fv, fw) = (s.eval(u), s.eval(v), s.eval(w));
            var += fu * fu;
            cov += fu * fv;
            cov1 += fu * fw;
        }
        let t = trials as f64;
        assert!((var / t - 1.0).abs() < 0.05, "{}", var / t);
        assert!((cov / t).abs() < 0.04, "{}", cov / t);
        assert!((cov1 / t - bessel_j0(1.0)).abs() < 0.04);
    }

    #[test]
    fn grid_matches_point_evaluation() {
        let s = sample_plane_trial(32, 1, 0).unwrap();
        let geo = PlanarGeometry {
            spacing: 0.25,
            x0: -3.0,
            y0: 1.0,
        };
        let g = s.eval_grid(20, 30, geo);
        for (i, j) in [(0, 0), (7, 13), (19, 29)] {
            let p = g.node_position(i, j);
            assert!((g.value(i, j) - s.eval(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn single_wave_gives_parallel_lines() {
        let a: f64 = 0.37;
        let s = PlaneWaveSpec::from_waves(vec![[a.cos(), a.sin()]], vec![0.9]).unwrap();
        let r = 20.0;
        let c = planar_census(&s, r, 0.2).unwrap();
        assert_eq!(c.n_star, 0);
        assert!(
            (c.n_cross as f64 - 2.0 * r / PI).abs() <= 2.0,
            "{}",
            c.n_cross
        );
        assert!(c.n_star <= c.n_cross);
    }

    #[test]
    fn guards() {
        let mut rng = trial_rng(0, Stream::Auxiliary, 0, 0);
        assert!(sample_plane_wave(7, &mut rng).is_err());
        let s = sample_plane_wave(8, &mut rng).unwrap();
        assert!(planar_census(&s, 9.0, 0.25).is_err());
        assert!(planar_census(&s, 10.0, 0.31).is_err());
        assert!(matches!(
            planar_census_with(&s, 40.0, 0.1, 2.0, 1000),
            Err(Error::CellBudget { .. })
        ));
    }

    #[test]
    fn consistency_arithmetic() {
        let r = sphere_plane_consistency(4.0 * PI * 0.005, 0.001, 0.005, 0.0001);
        assert_eq!(r.z, 0.0);
        let se = 0.001f64.hypot(4.0 * PI * 0.0001);
        let r = sphere_plane_consistency(4.0 * PI * 0.005 + 3.0 * se, 0.001, 0.005, 0.0001);
        assert!((r.z - 3.0).abs() < 0.01);
    }
}

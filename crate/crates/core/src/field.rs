//! Random Gaussian spherical harmonics: coefficients, point and grid
//! evaluation, and rotated zonal barriers.
//!
//! The basis is the real one built on [`crate::legendre`] rows:
//! `Y_0 = p_0`, `Y_m = p_m cos mφ` and `Y_{-m} = p_m sin mφ` for `m = 1..=n`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GradientGrids, GridGeometry, ScalarGrid, SphereGeometry};
use crate::legendre::{self, assoc_legendre_row_theta, LegendreRow};
use crate::rng::{trial_rng, Provenance, Stream};

/// Points closer than this to a pole get no gradient.
pub const POLE_EPS: f64 = 1e-8;

/// Default upper bound on the number of grid cells.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 26;

/// Grids for degrees below this use the row count of this degree.
pub const MIN_GRID_DEGREE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoeffs {
    pub degree: usize,
    /// `coeffs[k + n]` multiplies `Y_k`, `k = -n..=n`.
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl HarmonicCoeffs {
    pub fn new(degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 2 * degree + 1 {
            return Err(Error::InvalidParameter(format!(
                "degree {degree} needs {} coefficients, got {}",
                2 * degree + 1,
                coeffs.len()
            )));
        }
        Ok(HarmonicCoeffs {
            degree,
            coeffs,
            provenance: None,
        })
    }

    pub fn zeros(degree: usize) -> Self {
        HarmonicCoeffs {
            degree,
            coeffs: vec![0.0; 2 * degree + 1],
            provenance: None,
        }
    }

    /// The zonal harmonic `√(2n+1) P_n(cos θ)`, unit norm.
    pub fn zonal(degree: usize) -> Self {
        let mut c = Self::zeros(degree);
        c.coeffs[degree] = 1.0;
        c
    }

    #[inline]
    pub fn get(&self, k: i64) -> f64 {
        self.coeffs[(k + self.degree as i64) as usize]
    }

    #[inline]
    pub fn set(&mut self, k: i64, v: f64) {
        let n = self.degree as i64;
        self.coeffs[(k + n) as usize] = v;
    }

    /// Squared L² norm under the probability measure.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        HarmonicCoeffs {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            provenance: self.provenance,
        }
    }

    pub fn try_add(&self, other: &HarmonicCoeffs) -> Result<Self> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                left: self.degree,
                right: other.degree,
            });
        }
        Ok(HarmonicCoeffs {
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
            provenance: None,
        })
    }

    /// Cosine and sine coefficients of order `m` (`b_0 = 0`).
    #[inline]
    fn order(&self, m: usize) -> (f64, f64) {
        if m == 0 {
            (self.get(0), 0.0)
        } else {
            (self.get(m as i64), self.get(-(m as i64)))
        }
    }
}

/// `2n + 1` i.i.d. Gaussians of variance `1/(2n+1)`.
pub fn sample_coeffs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HarmonicCoeffs {
    let sd = 1.0 / ((2 * n + 1) as f64).sqrt();
    let coeffs = (0..2 * n + 1)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    HarmonicCoeffs {
        degree: n,
        coeffs,
        provenance: None,
    }
}

/// Coefficients of trial `index` under `master_seed`.
pub fn sample_trial(n: usize, master_seed: u64, index: u64) -> HarmonicCoeffs {
    let mut rng = trial_rng(master_seed, Stream::Harmonic, n as u64, index);
    let mut c = sample_coeffs(n, &mut rng);
    c.provenance = Some(Provenance {
        master_seed,
        trial_index: index,
    });
    c
}

/// A point on the unit sphere by colatitude and longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub const NORTH: SpherePoint = SpherePoint {
        theta: 0.0,
        phi: 0.0,
    };
    pub const SOUTH: SpherePoint = SpherePoint {
        theta: PI,
        phi: 0.0,
    };

    pub fn new(theta: f64, phi: f64) -> Self {
        let theta = theta.clamp(0.0, PI);
        let phi = if theta == 0.0 || theta == PI {
            0.0
        } else {
            phi.rem_euclid(2.0 * PI)
        };
        SpherePoint { theta, phi }
    }

    pub fn from_vector(v: [f64; 3]) -> Self {
        let rho = (v[0] * v[0] + v[1] * v[1]).sqrt();
        SpherePoint::new(rho.atan2(v[2]), v[1].atan2(v[0]))
    }

    pub fn to_vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Great-circle distance.
    pub fn angle_to(self, other: SpherePoint) -> f64 {
        angle_between(self.to_vector(), other.to_vector())
    }

    /// Uniformly distributed point.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        SpherePoint::new(z.acos(), phi)
    }

    /// Point at angular distance `dist` from `self` in direction `bearing`
    /// (measured from the local south-pointing θ direction towards φ).
    pub fn offset(self, dist: f64, bearing: f64) -> Self {
        let p = self.to_vector();
        let (e_theta, e_phi) = tangent_frame(self);
        let (sb, cb) = bearing.sin_cos();
        let t = [
            cb * e_theta[0] + sb * e_phi[0],
            cb * e_theta[1] + sb * e_phi[1],
            cb * e_theta[2] + sb * e_phi[2],
        ];
        let (sd, cd) = dist.sin_cos();
        SpherePoint::from_vector([
            cd * p[0] + sd * t[0],
            cd * p[1] + sd * t[1],
            cd * p[2] + sd * t[2],
        ])
    }

    pub fn is_near_pole(self) -> bool {
        self.theta < POLE_EPS || self.theta > PI - POLE_EPS
    }
}

/// `count` nearly uniform points (golden-angle spiral).
pub fn fibonacci_sphere(count: usize) -> Vec<SpherePoint> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            SpherePoint::new(z.acos(), golden * k as f64)
        })
        .collect()
}

/// Orthonormal tangent frame `(e_θ, e_φ)`; at the poles the frame of `φ = 0`.
pub fn tangent_frame(p: SpherePoint) -> ([f64; 3], [f64; 3]) {
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

pub fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}

/// Field value and gradient in the `(e_θ, e_φ)` frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub value: f64,
    /// `(∂θ f, (1/sin θ) ∂φ f)`; `None` within [`POLE_EPS`] of a pole.
    pub gradient: Option<[f64; 2]>,
}

/// Evaluates harmonics of one degree at one fixed point; the Legendre row is
/// computed once.
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    point: SpherePoint,
    row: LegendreRow,
    cos_m: Vec<f64>,
    sin_m: Vec<f64>,
}

impl PointEvaluator {
    pub fn new(n: usize, point: SpherePoint) -> Self {
        let row = assoc_legendre_row_theta(n, point.theta);
        let cos_m = (0..=n).map(|m| (m as f64 * point.phi).cos()).collect();
        let sin_m = (0..=n).map(|m| (m as f64 * point.phi).sin()).collect();
        PointEvaluator {
            point,
            row,
            cos_m,
            sin_m,
        }
    }

    pub fn value(&self, c: &HarmonicCoeffs) -> f64 {
        debug_assert_eq!(c.degree, self.row.degree);
        let mut acc = 0.0;
        for m in 0..=c.degree {
            let (a, b) = c.order(m);
            acc += self.row.values[m] * (a * self.cos_m[m] + b * self.sin_m[m]);
        }
        acc
    }

    pub fn sample(&self, c: &HarmonicCoeffs) -> FieldSample {
        let value = self.value(c);
        if self.point.is_near_pole() {
            return FieldSample {
                value,
                gradient: None,
            };
        }
        let sin_t = self.point.theta.sin();
        let mut d_theta = 0.0;
        let mut d_phi = 0.0;
        for m in 0..=c.degree {
            let (a, b) = c.order(m);
            d_theta += self.row.dvalues[m] * (a * self.cos_m[m] + b * self.sin_m[m]);
            d_phi += m as f64 * self.row.values[m] * (b * self.cos_m[m] - a * self.sin_m[m]);
        }
        FieldSample {
            value,
            gradient: Some([d_theta, d_phi / sin_t]),
        }
    }

    /// Values of all `2n + 1` basis functions, ordered like the coefficients.
    pub fn basis_values(&self) -> Vec<f64> {
        let n = self.row.degree;
        let mut out = vec![0.0; 2 * n + 1];
        out[n] = self.row.values[0];
        for m in 1..=n {
            out[n + m] = self.row.values[m] * self.cos_m[m];
            out[n - m] = self.row.values[m] * self.sin_m[m];
        }
        out
    }
}

/// Exact basis sum at one point.
pub fn eval_point(c: &HarmonicCoeffs, x: SpherePoint) -> FieldSample {
    PointEvaluator::new(c.degree, x).sample(c)
}

/// Covariance kernel `E f(x) f(y) = P_n(cos Θ(x, y))`.
pub fn covariance(n: usize, x: SpherePoint, y: SpherePoint) -> f64 {
    let c = dot(x.to_vector(), y.to_vector()).clamp(-1.0, 1.0);
    legendre::legendre_p(n, c).expect("clamped argument")
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Rows and columns of an equiangular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereGridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl SphereGridSpec {
    /// `s·n` rows and `2·s·n` columns rounded up to a power of two, with
    /// degrees below [`MIN_GRID_DEGREE`] gridded as that degree.
    pub fn for_degree(n: usize, oversample: usize) -> Self {
        let rows = oversample.max(1) * n.max(MIN_GRID_DEGREE);
        let cols = (2 * rows).next_power_of_two();
        SphereGridSpec { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Precomputed Legendre table and FFT plan for synthesizing degree-`n`
/// harmonics on one grid. Immutable and shareable across workers.
pub struct GridPlan {
    degree: usize,
    spec: SphereGridSpec,
    geometry: SphereGeometry,
    legendre: Vec<f64>,
    dlegendre: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridPlan")
            .field("degree", &self.degree)
            .field("spec", &self.spec)
            .finish()
    }
}

impl GridPlan {
    pub fn new(n: usize, spec: SphereGridSpec) -> Result<Self> {
        Self::with_budget(n, spec, DEFAULT_CELL_BUDGET)
    }

    pub fn for_degree(n: usize, oversample: usize) -> Result<Self> {
        Self::new(n, SphereGridSpec::for_degree(n, oversample))
    }

    pub fn with_budget(n: usize, spec: SphereGridSpec, budget: usize) -> Result<Self> {
        if spec.cols < 8 {
            return Err(Error::DegenerateGrid { cols: spec.cols });
        }
        if spec.cells() > budget {
            return Err(Error::CellBudget {
                cells: spec.cells(),
                budget,
            });
        }
        if spec.cols <= 2 * n || spec.rows < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid {}x{} cannot resolve degree {n}",
                spec.rows, spec.cols
            )));
        }
        let geometry = SphereGeometry::new(spec.rows, spec.cols, [0.0, 0.0]);
        let width = n + 1;
        let mut legendre_tab = vec![0.0; spec.rows * width];
        let mut dlegendre = vec![0.0; spec.rows * width];
        for (i, &theta) in geometry.thetas.iter().enumerate() {
            let (s, c) = theta.sin_cos();
            legendre::fill_row(
                n,
                c,
                s,
                &mut legendre_tab[i * width..(i + 1) * width],
                &mut dlegendre[i * width..(i + 1) * width],
            );
        }
        let fft = FftPlanner::new().plan_fft_inverse(spec.cols);
        Ok(GridPlan {
            degree: n,
            spec,
            geometry,
            legendre: legendre_tab,
            dlegendre,
            fft,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn spec(&self) -> SphereGridSpec {
        self.spec
    }

    pub fn thetas(&self) -> &[f64] {
        &self.geometry.thetas
    }

    /// Values on the grid.
    pub fn eval(&self, c: &HarmonicCoeffs) -> Result<ScalarGrid> {
        self.evaluate(c, false)
    }

    /// Values plus `(∂θ f, (1/sin θ) ∂φ f)` grids.
    pub fn eval_with_gradient(&self, c: &HarmonicCoeffs) -> Result<ScalarGrid> {
        self.evaluate(c, true)
    }

    fn evaluate(&self, c: &HarmonicCoeffs, gradient: bool) -> Result<ScalarGrid> {
        if c.degree != self.degree {
            return Err(Error::DegreeMismatch {
                left: c.degree,
                right: self.degree,
            });
        }
        let SphereGridSpec { rows, cols } = self.spec;
        let n = self.degree;
        let mut values = vec![0.0; rows * cols];
        self.synthesize(c, &self.legendre, Weighting::Plain, &mut values);
        let grads = if gradient {
            let mut d_theta = vec![0.0; rows * cols];
            let mut d_phi = vec![0.0; rows * cols];
            self.synthesize(c, &self.dlegendre, Weighting::Plain, &mut d_theta);
            self.synthesize(c, &self.legendre, Weighting::PhiDerivative, &mut d_phi);
            for (i, &theta) in self.geometry.thetas.iter().enumerate() {
                let inv = 1.0 / theta.sin();
                d_phi[i * cols..(i + 1) * cols]
                    .iter_mut()
                    .for_each(|v| *v *= inv);
            }
            Some(GradientGrids {
                first: d_theta,
                second: d_phi,
            })
        } else {
            None
        };
        let pole = c.get(0) * ((2 * n + 1) as f64).sqrt();
        let south = if n.is_multiple_of(2) { pole } else { -pole };
        let mut geometry = self.geometry.clone();
        geometry.caps = [pole, south];
        Ok(ScalarGrid {
            rows,
            cols,
            values,
            geometry: GridGeometry::Sphere(geometry),
            gradient: grads,
        })
    }

    /// Fourier synthesis of each row; two real rows share one complex FFT.
    fn synthesize(&self, c: &HarmonicCoeffs, table: &[f64], weighting: Weighting, out: &mut [f64]) {
        let SphereGridSpec { rows, cols } = self.spec;
        let n = self.degree;
        let width = n + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); cols];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let half_spectrum = |row: usize, m: usize| -> Complex64 {
            let p = table[row * width + m];
            let (a, b) = c.order(m);
            let (a, b) = match weighting {
                Weighting::Plain => (a, b),
                Weighting::PhiDerivative => (m as f64 * b, -(m as f64) * a),
            };
            // a cos mφ + b sin mφ = Re[(a - i b) e^{imφ}], split over ±m
            if m == 0 {
                Complex64::new(p * a, 0.0)
            } else {
                Complex64::new(0.5 * p * a, -0.5 * p * b)
            }
        };
        let mut row = 0;
        while row < rows {
            let second = if row + 1 < rows { Some(row + 1) } else { None };
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            let i = Complex64::new(0.0, 1.0);
            for m in 0..=n {
                let s1 = half_spectrum(row, m);
                let s2 = second.map_or(Complex64::new(0.0, 0.0), |r| half_spectrum(r, m));
                if m == 0 {
                    buf[0] = s1 + i * s2;
                } else {
                    buf[m] = s1 + i * s2;
                    buf[cols - m] = s1.conj() + i * s2.conj();
                }
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (j, z) in buf.iter().enumerate() {
                out[row * cols + j] = z.re;
                if let Some(r) = second {
                    out[r * cols + j] = z.im;
                }
            }
            row += 2;
        }
    }
}

#[derive(Clone, Copy)]
enum Weighting {
    Plain,
    PhiDerivative,
}

/// One-shot grid evaluation.
pub fn eval_grid(
    c: &HarmonicCoeffs,
    spec: SphereGridSpec,
    with_gradient: bool,
) -> Result<ScalarGrid> {
    let plan = GridPlan::new(c.degree, spec)?;
    if with_gradient {
        plan.eval_with_gradient(c)
    } else {
        plan.eval(c)
    }
}

/// Zonal harmonic recentered at `center`: `b(y) = √(2n+1) P_n(cos Θ(center, y))`.
#[derive(Debug, Clone, Copy)]
pub struct Barrier {
    pub degree: usize,
    pub center: SpherePoint,
    center_vec: [f64; 3],
}

/// Barrier function of degree `n` centered at `center`.
pub fn barrier(n: usize, center: SpherePoint) -> Result<Barrier> {
    if n < 2 {
        return Err(Error::InvalidParameter("barrier needs n >= 2".into()));
    }
    Ok(Barrier {
        degree: n,
        center,
        center_vec: center.to_vector(),
    })
}

impl Barrier {
    pub fn eval(&self, y: SpherePoint) -> f64 {
        let c = dot(self.center_vec, y.to_vector()).clamp(-1.0, 1.0);
        ((2 * self.degree + 1) as f64).sqrt()
            * legendre::legendre_p(self.degree, c).expect("clamped")
    }

    /// Value at angular distance `dist` from the center.
    pub fn radial(&self, dist: f64) -> f64 {
        legendre::zonal(self.degree, dist).0
    }

    /// Expansion in the basis via the addition theorem: `ξ_k = Y_k(center)/√(2n+1)`.
    pub fn coefficients(&self) -> HarmonicCoeffs {
        let basis = PointEvaluator::new(self.degree, self.center).basis_values();
        let s = 1.0 / ((2 * self.degree + 1) as f64).sqrt();
        HarmonicCoeffs {
            degree: self.degree,
            coeffs: basis.into_iter().map(|v| v * s).collect(),
            provenance: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_trial(12, 99, 5);
        let b = sample_trial(12, 99, 5);
        assert_eq!(a, b);
        assert_eq!(a.coeffs.len(), 25);
        assert_ne!(a, sample_trial(12, 99, 6));
        assert_eq!(
            a.provenance,
            Some(Provenance {
                master_seed: 99,
                trial_index: 5
            })
        );
    }

    #[test]
    fn zonal_at_pole() {
        for n in [1usize, 7, 60] {
            let s = eval_point(&HarmonicCoeffs::zonal(n), SpherePoint::NORTH);
            assert!((s.value - ((2 * n + 1) as f64).sqrt()).abs() < 1e-12);
            assert!(s.gradient.is_none());
        }
        let s = eval_point(&HarmonicCoeffs::zeros(1), SpherePoint::new(1.0, 2.0));
        assert_eq!(s.value, 0.0);
        assert_eq!(s.gradient, Some([0.0, 0.0]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_coeffs(23, &mut rng);
        let p = SpherePoint::new(1.2, 0.7);
        let g = eval_point(&c, p).gradient.unwrap();
        let h = 1e-6;
        let ft = (eval_point(&c, SpherePoint::new(p.theta + h, p.phi)).value
            - eval_point(&c, SpherePoint::new(p.theta - h, p.phi)).value)
            / (2.0 * h);
        let fp = (eval_point(&c, SpherePoint::new(p.theta, p.phi + h)).value
            - eval_point(&c, SpherePoint::new(p.theta, p.phi - h)).value)
            / (2.0 * h * p.theta.sin());
        assert!((ft - g[0]).abs() < 1e-5 * g[0].abs().max(1.0));
        assert!((fp - g[1]).abs() < 1e-5 * g[1].abs().max(1.0));
    }

    #[test]
    fn grid_matches_point_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 40] {
            let c = sample_coeffs(n, &mut rng);
            let plan = GridPlan::for_degree(n, 4).unwrap();
            let grid = plan.eval_with_gradient(&c).unwrap();
            let grads = grid.gradient.as_ref().unwrap();
            for _ in 0..100 {
                let i = rng.random_range(0..grid.rows);
                let j = rng.random_range(0..grid.cols);
                let p = SpherePoint::new(plan.thetas()[i], 2.0 * PI * j as f64 / grid.cols as f64);
                let s = eval_point(&c, p);
                assert!((s.value - grid.value(i, j)).abs() < 1e-10);
                let g = s.gradient.unwrap();
                let k = grid.index(i, j);
                assert!((g[0] - grads.first[k]).abs() < 1e-9 * (n as f64));
                assert!((g[1] - grads.second[k]).abs() < 1e-9 * (n as f64));
            }
            let caps = grid.sphere().unwrap().caps;
            assert!((caps[0] - eval_point(&c, SpherePoint::NORTH).value).abs() < 1e-10);
            assert!((caps[1] - eval_point(&c, SpherePoint::SOUTH).value).abs() < 1e-10);
        }
    }

    #[test]
    fn zonal_grid_is_constant_along_rows() {
        let grid = eval_grid(
            &HarmonicCoeffs::zonal(9),
            SphereGridSpec::for_degree(9, 4),
            false,
        )
        .unwrap();
        for i in 0..grid.rows {
            let v0 = grid.value(i, 0);
            assert!((0..grid.cols).all(|j| (grid.value(i, j) - v0).abs() < 1e-12));
        }
    }

    #[test]
    fn grid_guards() {
        assert!(matches!(
            GridPlan::new(1, SphereGridSpec { rows: 4, cols: 4 }),
            Err(Error::DegenerateGrid { .. })
        ));
        assert!(matches!(
            GridPlan::with_budget(50, SphereGridSpec::for_degree(50, 8), 1000),
            Err(Error::CellBudget { .. })
        ));
    }

    #[test]
    fn barrier_representations_agree() {
        let center = SpherePoint::new(0.9, 4.0);
        let b = barrier(30, center).unwrap();
        let coeffs = b.coefficients();
        assert!((coeffs.norm() - 1.0).abs() < 1e-9);
        assert!((b.eval(center) - 61f64.sqrt()).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let y = SpherePoint::random(&mut rng);
            assert!((b.eval(y) - eval_point(&coeffs, y).value).abs() < 1e-9);
        }
        let north = barrier(30, SpherePoint::NORTH).unwrap().coefficients();
        let zonal = HarmonicCoeffs::zonal(30);
        assert!(north
            .coeffs
            .iter()
            .zip(&zonal.coeffs)
            .all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(barrier(1, center).is_err());
    }

    #[test]
    fn barrier_dip_matches_bessel_minimum() {
        let n = 100;
        let b = barrier(n, SpherePoint::NORTH).unwrap();
        let theta = 3.831_705_970_207_512 / (n as f64 + 0.5);
        // oracle: direct Legendre evaluation
        let direct = (201f64).sqrt() * legendre::legendre_p(n, theta.cos()).unwrap();
        assert!((b.radial(theta) - direct).abs() < 1e-10);
        assert!(direct <= -0.40 * (n as f64).sqrt());
        assert!((direct / 201f64.sqrt() + 0.4028).abs() < 2e-3);
    }

    #[test]
    fn offsets_land_at_requested_distance() {
        let p = SpherePoint::new(0.4, 1.0);
        for bearing in [0.0, 1.0, 3.0, 5.5] {
            let q = p.offset(0.2, bearing);
            assert!((p.angle_to(q) - 0.2).abs() < 1e-12);
        }
        let q = SpherePoint::NORTH.offset(0.3, 0.0);
        assert!((q.theta - 0.3).abs() < 1e-12);
    }
}

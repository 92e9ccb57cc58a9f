//! Measurable versions of the lower-bound ingredients: the barrier and its
//! event, the maximum estimate, the stability census, perturbation stability,
//! the integral-geometry sandwich and the conditioned zonal construction.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::census::{count_components, disk_counts, trace_loops, NodalLoop};
use crate::error::{Error, Result};
use crate::exec::map_trials;
use crate::field::{
    angle_between, barrier, dot, fibonacci_sphere, sample_coeffs, sample_trial, GridPlan,
    HarmonicCoeffs, PointEvaluator, SpherePoint,
};
use crate::grid::ScalarGrid;
use crate::legendre::zonal;
use crate::rng::{trial_rng, Stream};
use crate::stats::bootstrap_mean;

/// Location of the first minimum of `J₀` (the first zero of `J₁`).
pub const J0_MIN_SCALE: f64 = 3.831_705_970_207_512;

/// Points on every sampled circle.
pub const CIRCLE_SAMPLES: usize = 64;

/// Interior rings used when maximizing over a disk.
pub const DISK_RINGS: usize = 8;

/// Angular radius of the barrier circle at scale `rho`.
pub fn barrier_radius(n: usize, rho: f64) -> f64 {
    rho / (n as f64 + 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub n: usize,
    pub rho: f64,
    pub radius: f64,
    pub center_value: f64,
    /// Largest barrier value on the circle.
    pub boundary_max: f64,
    /// Largest `c₁` with `b(x) ≥ c₁√n` and `b ≤ -c₁√n` on the circle.
    pub c1_hat: f64,
}

/// Evaluates the barrier centered at a generic point on its center and on the
/// circle of radius `rho/(n + ½)`.
pub fn barrier_verify(n: usize, rho: f64) -> Result<BarrierCheck> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!(
            "barrier check needs n >= 10, got {n}"
        )));
    }
    let center = SpherePoint::new(1.1, 0.4);
    let b = barrier(n, center)?;
    let radius = barrier_radius(n, rho);
    let center_value = b.eval(center);
    let boundary_max = (0..CIRCLE_SAMPLES)
        .map(|k| b.eval(center.offset(radius, 2.0 * PI * k as f64 / CIRCLE_SAMPLES as f64)))
        .fold(f64::NEG_INFINITY, f64::max);
    let sqrt_n = (n as f64).sqrt();
    let c1_hat = (center_value / sqrt_n).min(-boundary_max / sqrt_n);
    Ok(BarrierCheck {
        n,
        rho,
        radius,
        center_value,
        boundary_max,
        c1_hat,
    })
}

/// Basis values on the disk of radius `radius` around the north pole: the
/// center, [`DISK_RINGS`] interior rings and the boundary circle, each ring
/// with [`CIRCLE_SAMPLES`] points.
#[derive(Debug, Clone)]
pub struct DiskProbe {
    pub n: usize,
    pub radius: f64,
    width: usize,
    center: Vec<f64>,
    /// Boundary rows first, then interior rows.
    rows: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskValues {
    pub center: f64,
    pub boundary_max: f64,
    pub max_abs: f64,
}

impl DiskProbe {
    pub fn new(n: usize, radius: f64) -> Self {
        let width = 2 * n + 1;
        let center = PointEvaluator::new(n, SpherePoint::NORTH).basis_values();
        let mut rows = Vec::with_capacity(width * CIRCLE_SAMPLES * (DISK_RINGS + 1));
        let mut radii = vec![radius];
        radii.extend((1..=DISK_RINGS).map(|r| radius * r as f64 / (DISK_RINGS + 1) as f64));
        for (ring, r) in radii.into_iter().enumerate() {
            // interior rings are staggered by half a step
            let shift = if ring == 0 { 0.0 } else { 0.5 };
            for k in 0..CIRCLE_SAMPLES {
                let p = SpherePoint::new(r, 2.0 * PI * (k as f64 + shift) / CIRCLE_SAMPLES as f64);
                rows.extend(PointEvaluator::new(n, p).basis_values());
            }
        }
        DiskProbe {
            n,
            radius,
            width,
            center,
            rows,
        }
    }

    pub fn measure(&self, c: &HarmonicCoeffs) -> DiskValues {
        let center = dot_slice(&self.center, &c.coeffs);
        let mut boundary_max = f64::NEG_INFINITY;
        let mut max_abs = center.abs();
        for (i, row) in self.rows.chunks_exact(self.width).enumerate() {
            let v = dot_slice(row, &c.coeffs);
            if i < CIRCLE_SAMPLES {
                boundary_max = boundary_max.max(v);
            }
            max_abs = max_abs.max(v.abs());
        }
        DiskValues {
            center,
            boundary_max,
            max_abs,
        }
    }
}

fn dot_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest sampled `C₀` with empirical `P{max |f| ≥ C₀} ≤ 1/3` on the disk
/// of radius `rho/(n + ½)`.
pub fn calibrate_max(n: usize, rho: f64, trials: usize, seed: u64, workers: usize) -> Result<f64> {
    if trials < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: trials,
        });
    }
    let probe = DiskProbe::new(n, barrier_radius(n, rho));
    let idx: Vec<u64> = (0..trials as u64).collect();
    let mut maxima = map_trials(&idx, workers, |&i| {
        let mut rng = trial_rng(seed, Stream::Calibration, n as u64, i);
        probe.measure(&sample_coeffs(n, &mut rng)).max_abs
    });
    maxima.sort_by(f64::total_cmp);
    let k = (2 * trials).div_ceil(3).min(trials - 1);
    Ok(maxima[k])
}

/// Empirical `P{max over the disk |f| ≥ c0}`.
pub fn max_exceedance_rate(
    n: usize,
    rho: f64,
    c0: f64,
    trials: usize,
    seed: u64,
    workers: usize,
) -> f64 {
    let probe = DiskProbe::new(n, barrier_radius(n, rho));
    let idx: Vec<u64> = (0..trials as u64).collect();
    let hits = map_trials(&idx, workers, |&i| {
        let mut rng = trial_rng(seed, Stream::Auxiliary, n as u64, i);
        probe.measure(&sample_coeffs(n, &mut rng)).max_abs >= c0
    });
    hits.iter().filter(|&&h| h).count() as f64 / trials.max(1) as f64
}

/// 95% Wilson score interval for `k` successes in `t` trials.
pub fn wilson_interval(k: usize, t: usize) -> [f64; 2] {
    if t == 0 {
        return [0.0, 1.0];
    }
    let z = 1.959_963_984_540_054_f64;
    let (k, t) = (k as f64, t as f64);
    let z2 = z * z;
    let center = (k + 0.5 * z2) / (t + z2);
    let half = z / (t + z2) * (k * (t - k) / t + 0.25 * z2).sqrt();
    [(center - half).max(0.0), (center + half).min(1.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierEventReport {
    pub n: usize,
    pub rho: f64,
    pub c0: f64,
    pub trials: usize,
    /// Conditional Monte Carlo estimate of the event probability.
    pub kappa_hat: f64,
    /// Bootstrap standard error and 95% percentile interval.
    pub kappa_se: f64,
    pub ci: [f64; 2],
    /// Events seen among plain samples of `f` (the naive count).
    pub plain_events: usize,
    /// Realized event fields checked with a census.
    pub loop_checked: usize,
    /// Checked events whose census shows no loop inside the disk.
    pub loop_violations: usize,
}

/// Gaussian upper tail `P{Z ≥ t}`.
pub fn normal_tail(t: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(t / std::f64::consts::SQRT_2)
}

/// Probability of `{f(x) ≥ C₀, f ≤ -C₀ on ∂D(x, rho/(n+½))}` at the north pole.
///
/// Writing `f = u·Y₀/√(2n+1) + f_x` with `u = f(x)` standard normal and `f_x`
/// independent of `u` and vanishing at the pole, the event is
/// `u ≥ max(C₀, (C₀ + max_∂ f_x)/|P_n(cos r)|)` whenever `P_n(cos r) < 0`.
/// Each trial samples `f_x` and contributes the exact Gaussian tail of that
/// threshold, an unbiased estimate with far smaller variance than counting
/// events. Plain events are counted as well. The first `check` trials are
/// turned into event fields (`u` just above its threshold) and censused at
/// `oversample` to confirm a loop inside the disk.
#[allow(clippy::too_many_arguments)]
pub fn barrier_event_rate(
    n: usize,
    rho: f64,
    c0: f64,
    trials: usize,
    seed: u64,
    oversample: usize,
    check: usize,
    workers: usize,
) -> Result<BarrierEventReport> {
    if trials < 1000 {
        return Err(Error::InsufficientSamples {
            needed: 1000,
            got: trials,
        });
    }
    let radius = barrier_radius(n, rho);
    let dip = zonal(n, radius).0 / ((2 * n + 1) as f64).sqrt();
    if dip >= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "barrier is not negative at radius {radius}"
        )));
    }
    let probe = DiskProbe::new(n, radius);
    let root = ((2 * n + 1) as f64).sqrt();
    let threshold = |c: &HarmonicCoeffs| -> (f64, DiskValues) {
        let mut rest = c.clone();
        rest.set(0, 0.0);
        let v = probe.measure(&rest);
        (c0.max((c0 + v.boundary_max) / -dip), probe.measure(c))
    };
    let idx: Vec<u64> = (0..trials as u64).collect();
    let per_trial = map_trials(&idx, workers, |&i| {
        let (t, plain) = threshold(&sample_trial(n, seed, i));
        (
            normal_tail(t),
            plain.center >= c0 && plain.boundary_max <= -c0,
            t,
        )
    });
    let contributions: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let kappa = bootstrap_mean(&contributions, seed, n as u64);
    let plain_events = per_trial.iter().filter(|p| p.1).count();

    let plan = GridPlan::for_degree(n, oversample)?;
    let slack = PI / plan.spec().rows as f64;
    let mut loop_violations = 0;
    let loop_checked = check.min(trials);
    for (i, p) in per_trial.iter().enumerate().take(loop_checked) {
        let mut c = sample_trial(n, seed, i as u64);
        // u = f(north) = ξ₀ √(2n+1)
        c.set(0, (p.2 + 1e-6) / root);
        let v = probe.measure(&c);
        debug_assert!(v.center >= c0 && v.boundary_max <= -c0);
        let grid = plan.eval(&c)?;
        let census = count_components(&grid)?;
        let loops = trace_loops(&grid, &census);
        let (inside, _) = disk_counts(&loops, SpherePoint::NORTH, radius + slack);
        if inside == 0 {
            loop_violations += 1;
        }
    }
    Ok(BarrierEventReport {
        n,
        rho,
        c0,
        trials,
        kappa_hat: kappa.value,
        kappa_se: kappa.se,
        ci: kappa.ci,
        plain_events,
        loop_checked,
        loop_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub alpha: f64,
    pub beta: f64,
    /// Disk radius in units of `1/n`.
    pub radius: f64,
    pub delta: f64,
}

impl StabilityParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.alpha > 0.0 && p.beta > 0.0 && p.radius > 0.0 && p.delta > 0.0) {
            return Err(Error::InvalidParameter(
                "stability parameters must be positive".into(),
            ));
        }
        if p.alpha / p.beta >= p.radius {
            return Err(Error::InvalidParameter(format!(
                "alpha/beta = {} must be below R = {}",
                p.alpha / p.beta,
                p.radius
            )));
        }
        Ok(())
    }
}

/// Disk centers for radius `R/n`: a Fibonacci lattice of `⌈4(n/R)²⌉` points.
pub fn disk_centers(n: usize, radius: f64) -> Vec<SpherePoint> {
    let count = (4.0 * (n as f64 / radius).powi(2)).ceil().max(1.0) as usize;
    fibonacci_sphere(count)
}

/// Disk centers sorted by colatitude, for banded proximity queries.
struct CenterIndex {
    thetas: Vec<f64>,
    vectors: Vec<[f64; 3]>,
}

impl CenterIndex {
    fn new(centers: &[SpherePoint]) -> Self {
        // the Fibonacci lattice is already ordered by colatitude
        debug_assert!(centers.windows(2).all(|w| w[0].theta <= w[1].theta));
        CenterIndex {
            thetas: centers.iter().map(|c| c.theta).collect(),
            vectors: centers.iter().map(|c| c.to_vector()).collect(),
        }
    }

    /// Calls `visit(j)` for every center within angle `reach` of `(theta, v)`.
    fn near(&self, theta: f64, v: [f64; 3], reach: f64, mut visit: impl FnMut(usize)) {
        let cos_reach = reach.cos();
        let lo = self.thetas.partition_point(|&t| t < theta - reach);
        let hi = self.thetas.partition_point(|&t| t <= theta + reach);
        for j in lo..hi {
            if dot(self.vectors[j], v) >= cos_reach {
                visit(j);
            }
        }
    }
}

/// For each disk center, whether `3D_j` holds a node with `|f| < α` and
/// `|∇f| < βn`.
fn unstable_disks(
    grid: &ScalarGrid,
    n: usize,
    p: &StabilityParams,
    index: &CenterIndex,
) -> Result<Vec<bool>> {
    let grad = grid.gradient.as_ref().ok_or(Error::MissingGradient)?;
    let geo = grid
        .sphere()
        .ok_or_else(|| Error::InvalidParameter("stability census needs a sphere grid".into()))?;
    let reach = 3.0 * p.radius / n as f64;
    let gmax = p.beta * n as f64;
    let mut unstable = vec![false; index.thetas.len()];
    for i in 0..grid.rows {
        let theta = geo.thetas[i];
        for j in 0..grid.cols {
            let k = i * grid.cols + j;
            if grid.values[k].abs() < p.alpha && grad.first[k].hypot(grad.second[k]) < gmax {
                index.near(theta, grid.node_vector(i, j), reach, |c| unstable[c] = true);
            }
        }
    }
    Ok(unstable)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub disks: usize,
    pub unstable: usize,
    pub fraction: f64,
    /// `fraction > δR²`.
    pub exceptional: bool,
}

/// Fraction of unstable disks for a grid with gradients.
pub fn stability_census(
    grid: &ScalarGrid,
    n: usize,
    p: &StabilityParams,
) -> Result<StabilityOutcome> {
    p.validate()?;
    if grid.gradient.is_none() {
        return Err(Error::MissingGradient);
    }
    let centers = disk_centers(n, p.radius);
    let index = CenterIndex::new(&centers);
    let flags = unstable_disks(grid, n, p, &index)?;
    let unstable = flags.iter().filter(|&&u| u).count();
    let fraction = unstable as f64 / centers.len() as f64;
    Ok(StabilityOutcome {
        disks: centers.len(),
        unstable,
        fraction,
        exceptional: fraction > p.delta * p.radius * p.radius,
    })
}

/// `ξ₀ = 1` plus a Gaussian direction in the other `2n` coefficients scaled
/// to norm `rho`.
pub fn sharpness_field<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<HarmonicCoeffs> {
    if !(0.0..=0.2).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "sharpness rho {rho} outside [0, 0.2]"
        )));
    }
    let mut c = HarmonicCoeffs::zonal(n);
    if rho == 0.0 || n == 0 {
        return Ok(c);
    }
    let mut rest: Vec<f64> = (0..2 * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = rest.iter().map(|x| x * x).sum::<f64>().sqrt();
    rest.iter_mut().for_each(|x| *x *= rho / norm);
    let mut it = rest.into_iter();
    for k in -(n as i64)..=(n as i64) {
        if k != 0 {
            c.set(k, it.next().expect("2n values"));
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRecord {
    pub trial: u64,
    pub n_loop: usize,
    pub n_dom: usize,
    pub euler_ok: bool,
}

pub fn sharpness_trial(
    n: usize,
    rho: f64,
    trials: usize,
    seed: u64,
    oversample: usize,
    workers: usize,
) -> Result<Vec<SharpnessRecord>> {
    let plan = GridPlan::for_degree(n, oversample)?;
    let idx: Vec<u64> = (0..trials as u64).collect();
    map_trials(&idx, workers, |&i| {
        let mut rng = trial_rng(seed, Stream::Sharpness, n as u64, i);
        let c = sharpness_field(n, rho, &mut rng)?;
        let census = count_components(&plan.eval(&c)?)?;
        Ok(SharpnessRecord {
            trial: i,
            n_loop: census.result.n_loops,
            n_dom: census.result.n_domains,
            euler_ok: census.result.euler_ok,
        })
    })
    .into_iter()
    .collect()
}

/// A Gaussian direction of norm exactly `rho`.
pub fn sample_perturbation<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> HarmonicCoeffs {
    let c = sample_coeffs(n, rng);
    let norm = c.norm();
    if norm == 0.0 {
        return c;
    }
    c.scaled(rho / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub n_f: usize,
    pub n_fg: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Passes when `N(f) - N(f + g) < εn²`.
pub fn perturbation_stability_check(
    f: &HarmonicCoeffs,
    g: &HarmonicCoeffs,
    eps: f64,
    plan: &GridPlan,
) -> Result<PerturbationOutcome> {
    let sum = f.try_add(g)?;
    if g.norm() >= f.norm() {
        return Err(Error::InvalidParameter(format!(
            "perturbation norm {} must be below the field norm {}",
            g.norm(),
            f.norm()
        )));
    }
    let n = f.degree;
    let n_f = count_components(&plan.eval(f)?)?.result.n_loops;
    let n_fg = count_components(&plan.eval(&sum)?)?.result.n_loops;
    let threshold = eps * (n * n) as f64;
    Ok(PerturbationOutcome {
        n_f,
        n_fg,
        threshold,
        pass: (n_f as f64) - (n_fg as f64) < threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    /// Loops of `f` inside a stable disk where `max |g| < α` on `3D_j`.
    pub eligible: usize,
    pub matched: usize,
    /// No two eligible loops share a partner.
    pub injective: bool,
}

/// Matches loops of `f` in stable, weakly perturbed disks to loops of `f + g`
/// by nearest center within `α/(βn) + 2Δθ`.
pub fn persistence_check(
    f: &HarmonicCoeffs,
    g: &HarmonicCoeffs,
    p: &StabilityParams,
    plan: &GridPlan,
) -> Result<PersistenceReport> {
    p.validate()?;
    let n = f.degree;
    let sum = f.try_add(g)?;
    let fgrid = plan.eval_with_gradient(f)?;
    let ggrid = plan.eval(g)?;
    let sgrid = plan.eval(&sum)?;
    let centers = disk_centers(n, p.radius);
    let index = CenterIndex::new(&centers);
    let mut bad = unstable_disks(&fgrid, n, p, &index)?;
    let reach = 3.0 * p.radius / n as f64;
    let geo = ggrid.sphere().expect("sphere grid");
    for i in 0..ggrid.rows {
        for j in 0..ggrid.cols {
            if ggrid.values[i * ggrid.cols + j].abs() >= p.alpha {
                index.near(geo.thetas[i], ggrid.node_vector(i, j), reach, |c| {
                    bad[c] = true
                });
            }
        }
    }
    let floops = trace_loops(&fgrid, &count_components(&fgrid)?);
    let sloops = trace_loops(&sgrid, &count_components(&sgrid)?);
    let disk = p.radius / n as f64;
    let cap = p.alpha / (p.beta * n as f64) + 2.0 * geo.dtheta();
    let in_good_disk = |l: &NodalLoop| {
        let theta = SpherePoint::from_vector(l.center).theta;
        let mut inside = false;
        index.near(theta, l.center, disk, |c| {
            if !bad[c] && angle_between(index.vectors[c], l.center) + l.radius <= disk {
                inside = true;
            }
        });
        inside
    };
    let mut eligible = 0;
    let mut matched = 0;
    let mut used = vec![false; sloops.len()];
    let mut injective = true;
    for l in floops.iter().filter(|l| in_good_disk(l)) {
        eligible += 1;
        let best = sloops
            .iter()
            .enumerate()
            .map(|(k, s)| (k, angle_between(s.center, l.center)))
            .filter(|&(_, d)| d <= cap)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, _)) = best {
            matched += 1;
            if used[k] {
                injective = false;
            }
            used[k] = true;
        }
    }
    Ok(PersistenceReport {
        eligible,
        matched,
        injective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub rho: f64,
    /// `σ(D(x, ρ)) = (1 - cos ρ)/2`.
    pub s: f64,
    pub n_loop: usize,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// `(1/S)·mean N_* ≤ N ≤ (1/S)·mean N_cross` over `centers`.
pub fn sandwich(
    loops: &[NodalLoop],
    n_loop: usize,
    rho: f64,
    centers: &[SpherePoint],
) -> SandwichCheck {
    let s = 0.5 * (1.0 - rho.cos());
    let (mut star, mut cross) = (0usize, 0usize);
    for &c in centers {
        let (a, b) = disk_counts(loops, c, rho);
        star += a;
        cross += b;
    }
    let m = centers.len().max(1) as f64;
    let lower = star as f64 / m / s;
    let upper = cross as f64 / m / s;
    let nl = n_loop as f64;
    SandwichCheck {
        rho,
        s,
        n_loop,
        lower,
        upper,
        holds: lower <= nl && nl <= upper,
    }
}

/// Sandwich checks of one field at radii `scales[i]/n` with `centers` random centers.
pub fn ig_check(
    c: &HarmonicCoeffs,
    plan: &GridPlan,
    scales: &[f64],
    centers: usize,
    seed: u64,
    index: u64,
) -> Result<Vec<SandwichCheck>> {
    let grid = plan.eval(c)?;
    let census = count_components(&grid)?;
    let loops = trace_loops(&grid, &census);
    let mut rng = trial_rng(seed, Stream::Centers, c.degree as u64, index);
    let pts: Vec<SpherePoint> = (0..centers)
        .map(|_| SpherePoint::random(&mut rng))
        .collect();
    Ok(scales
        .iter()
        .map(|s| sandwich(&loops, census.result.n_loops, s / c.degree as f64, &pts))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaRefinement {
    pub coarse_area: f64,
    pub fine_area: f64,
    pub coarse_cells: usize,
    pub fine_cells: usize,
}

/// Recounts the smallest unflagged component of `c` on a grid with twice the
/// oversampling. The component is located at the fine grid through its cell
/// of largest `|f|`.
pub fn refine_smallest(c: &HarmonicCoeffs, oversample: usize) -> Result<AreaRefinement> {
    let n = c.degree;
    let coarse = GridPlan::for_degree(n, oversample)?.eval(c)?;
    let census = count_components(&coarse)?;
    let (label, comp) = census
        .result
        .components
        .iter()
        .enumerate()
        .filter(|(_, comp)| !comp.flagged && comp.cells > 0)
        .min_by(|a, b| a.1.area.total_cmp(&b.1.area))
        .ok_or_else(|| Error::InvalidParameter("no unflagged grid component".into()))?;
    let peak = (0..coarse.values.len())
        .filter(|&k| census.labels[k] as usize == label)
        .max_by(|&a, &b| coarse.values[a].abs().total_cmp(&coarse.values[b].abs()))
        .expect("component has cells");
    let p = SpherePoint::from_vector(coarse.node_vector(peak / coarse.cols, peak % coarse.cols));
    let fine = GridPlan::for_degree(n, 2 * oversample)?.eval(c)?;
    let fine_census = count_components(&fine)?;
    let geo = fine.sphere().expect("sphere grid");
    let row = ((p.theta / geo.dtheta()).floor() as usize).min(fine.rows - 1);
    let col = (p.phi / (2.0 * PI / fine.cols as f64)).round() as usize % fine.cols;
    let fine_comp =
        &fine_census.result.components[fine_census.labels[row * fine.cols + col] as usize];
    Ok(AreaRefinement {
        coarse_area: comp.area,
        fine_area: fine_comp.area,
        coarse_cells: comp.cells,
        fine_cells: fine_comp.cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversampleConvergence {
    pub ladder: Vec<usize>,
    pub n_domains: Vec<usize>,
    /// Smallest oversampling from which the count stays constant along the
    /// ladder; `None` if the last two rungs disagree.
    pub stable_from: Option<usize>,
}

/// Domain counts of one field along an oversampling ladder.
pub fn oversample_convergence(
    c: &HarmonicCoeffs,
    ladder: &[usize],
) -> Result<OversampleConvergence> {
    let n_domains = ladder
        .iter()
        .map(|&s| {
            Ok(
                count_components(&GridPlan::for_degree(c.degree, s)?.eval(c)?)?
                    .result
                    .n_domains,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let last = n_domains.last().copied();
    let mut k = n_domains.len();
    while k > 0 && Some(n_domains[k - 1]) == last {
        k -= 1;
    }
    let stable_from = (k + 1 < n_domains.len()).then(|| ladder[k]);
    Ok(OversampleConvergence {
        ladder: ladder.to_vec(),
        n_domains,
        stable_from,
    })
}

/// `min over the sphere of Y₀² + n⁻²|∇Y₀|²` sampled at `samples` colatitudes.
pub fn zonal_stability_floor(n: usize, samples: usize) -> f64 {
    let nn = (n.max(1) * n.max(1)) as f64;
    (0..=samples)
        .map(|k| {
            let (v, d) = zonal(n, PI * k as f64 / samples as f64);
            v * v + d * d / nn
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SphereGridSpec;
    use crate::legendre::bessel_j0;

    #[test]
    fn barrier_scales() {
        for n in [50usize, 100, 200] {
            let b = barrier_verify(n, J0_MIN_SCALE).unwrap();
            assert!((b.center_value - ((2 * n + 1) as f64).sqrt()).abs() < 1e-9);
            assert!(b.c1_hat > 0.5);
            // boundary ≈ J₀ minimum times √(2n+1); direct P_n is the oracle
            let direct = zonal(n, b.radius).0;
            assert!((b.boundary_max - direct).abs() < 1e-9 * direct.abs());
            let hilb = bessel_j0(J0_MIN_SCALE) * ((2 * n + 1) as f64).sqrt();
            assert!((b.boundary_max / hilb - 1.0).abs() < 0.01);
        }
        assert!(barrier_verify(9, 3.0).is_err());
    }

    #[test]
    fn probe_matches_point_evaluation() {
        let n = 30;
        let probe = DiskProbe::new(n, 0.1);
        let c = sample_trial(n, 2, 0);
        let v = probe.measure(&c);
        let center = crate::field::eval_point(&c, SpherePoint::NORTH).value;
        assert!((v.center - center).abs() < 1e-12);
        assert!(v.max_abs >= v.center.abs());
    }

    #[test]
    fn wilson_bounds() {
        let [lo, hi] = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let [lo, _] = wilson_interval(5, 1000);
        assert!(lo > 0.0);
    }

    #[test]
    fn stability_extremes() {
        let n = 20;
        let grid = crate::field::eval_grid(
            &sample_trial(n, 1, 0),
            SphereGridSpec::for_degree(n, 4),
            true,
        )
        .unwrap();
        let tiny = StabilityParams {
            alpha: 1e-12,
            beta: 1e-12,
            radius: 4.0,
            delta: 0.01,
        };
        assert_eq!(stability_census(&grid, n, &tiny).unwrap().unstable, 0);
        let huge = StabilityParams {
            alpha: 1e6,
            beta: 1e6,
            radius: 4.0,
            delta: 0.01,
        };
        assert_eq!(stability_census(&grid, n, &huge).unwrap().fraction, 1.0);
        let bad = StabilityParams {
            alpha: 1.0,
            beta: 0.01,
            radius: 4.0,
            delta: 0.01,
        };
        assert!(stability_census(&grid, n, &bad).is_err());
        let plain = crate::field::eval_grid(
            &sample_trial(n, 1, 0),
            SphereGridSpec::for_degree(n, 4),
            false,
        )
        .unwrap();
        assert!(matches!(
            stability_census(&plain, n, &tiny),
            Err(Error::MissingGradient)
        ));
    }

    #[test]
    fn sharpness_zero_rho_is_zonal() {
        let recs = sharpness_trial(30, 0.0, 2, 1, 8, 1).unwrap();
        assert!(recs.iter().all(|r| r.n_loop == 30));
        let mut rng = trial_rng(0, Stream::Sharpness, 10, 0);
        let c = sharpness_field(10, 0.1, &mut rng).unwrap();
        assert_eq!(c.get(0), 1.0);
        assert!((c.norm_sq() - 1.01).abs() < 1e-12);
        assert!(sharpness_field(10, 0.3, &mut rng).is_err());
    }

    #[test]
    fn perturbation_guards() {
        let n = 15;
        let plan = GridPlan::for_degree(n, 4).unwrap();
        let f = sample_trial(n, 3, 0);
        let zero = HarmonicCoeffs::zeros(n);
        assert!(
            perturbation_stability_check(&f, &zero, 0.01, &plan)
                .unwrap()
                .pass
        );
        assert!(perturbation_stability_check(&f, &f.scaled(-1.0), 0.01, &plan).is_err());
        assert!(matches!(
            perturbation_stability_check(&f, &HarmonicCoeffs::zeros(n + 1), 0.01, &plan),
            Err(Error::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn sandwich_holds_for_sample_fields() {
        let n = 30;
        let plan = GridPlan::for_degree(n, 8).unwrap();
        for t in 0..3 {
            let checks =
                ig_check(&sample_trial(n, 8, t), &plan, &[5.0, 10.0, 20.0], 500, 8, t).unwrap();
            for c in checks {
                assert!(c.holds, "{c:?}");
            }
        }
    }

    #[test]
    fn zonal_floor_positive() {
        for n in [10usize, 40, 160] {
            let f = zonal_stability_floor(n, 20 * n);
            assert!(f > 0.05, "{n}: {f}");
        }
    }
}

//! Nodal topology of a sampled field.
//!
//! Cells take the sign of their node value (values with magnitude below
//! [`ZERO_TIE`] count as positive). Same-sign 4-neighbors are joined; in a
//! 2×2 block with a checkerboard sign pattern the diagonal whose sign matches
//! the block average is joined, so that the labeling matches the topology of
//! the bilinear interpolant. On the sphere the two pole caps join the
//! matching-sign cells of the first and last row.
//!
//! Domains are the labeled components. On the sphere the loop count is
//! `domains - 1`; the number of distinct adjacent domain pairs is counted
//! independently and must agree (the Euler check).

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{angle_between, SpherePoint};
use crate::grid::{GridGeometry, ScalarGrid, Topology};
use crate::unionfind::UnionFind;

/// Values with `|v| < ZERO_TIE` are treated as positive.
pub const ZERO_TIE: f64 = 1e-30;

/// Components with fewer cells are kept but flagged.
pub const SMALL_COMPONENT_CELLS: usize = 3;

/// Components up to this many cells get an exact pairwise diameter.
pub const EXACT_DIAMETER_CELLS: usize = 1000;

/// Crofton calibration factor: a great circle at oversample 8 measures 2π
/// (see `tests/calibrate_crofton.rs`).
pub const CROFTON_CALIBRATION: f64 = 1.0;

#[inline]
pub fn is_positive(v: f64) -> bool {
    v > -ZERO_TIE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    /// +1 or -1.
    pub sign: i8,
    /// Probability measure on the sphere, planar area in the plane.
    pub area: f64,
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    pub touches_boundary: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusResult {
    pub topology: Topology,
    pub n_domains: usize,
    /// Sphere: `n_domains - 1`. Plane: closed loops (adjacent domain pairs
    /// not both touching the grid boundary).
    pub n_loops: usize,
    /// Distinct pairs of adjacent domains.
    pub n_adjacent_pairs: usize,
    /// Sphere only: whether `n_adjacent_pairs == n_domains - 1`.
    pub euler_ok: bool,
    pub ambiguous_saddles: usize,
    pub n_flagged: usize,
    pub n_domains_unflagged: usize,
    pub min_component_area: f64,
    /// Smallest area among unflagged components.
    pub min_unflagged_area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodal_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentRecord>,
}

impl CensusResult {
    /// Total measure of all components.
    pub fn total_area(&self) -> f64 {
        self.components.iter().map(|c| c.area).sum()
    }

    /// Copy without the per-component records.
    pub fn summary(&self) -> CensusResult {
        CensusResult {
            components: Vec::new(),
            ..self.clone()
        }
    }
}

/// Census plus the labeling it was computed from.
#[derive(Debug, Clone)]
pub struct Census {
    pub result: CensusResult,
    /// Component label of every cell, row-major.
    pub labels: Vec<u32>,
    /// Labels of the north and south cap (sphere only).
    pub cap_labels: Option<[u32; 2]>,
    /// Smallest cell index of each component (planar anchors).
    pub anchors: Vec<usize>,
}

/// Labels the same-sign components of `grid`.
pub fn count_components(grid: &ScalarGrid) -> Result<Census> {
    if grid.cols < 8 {
        return Err(Error::DegenerateGrid { cols: grid.cols });
    }
    let (rows, cols) = (grid.rows, grid.cols);
    let cells = rows * cols;
    let sphere = matches!(grid.geometry, GridGeometry::Sphere(_));
    let nodes = if sphere { cells + 2 } else { cells };
    let signs: Vec<bool> = grid.values.iter().map(|&v| is_positive(v)).collect();
    let mut uf = UnionFind::new(nodes);

    let col_pairs = if sphere { cols } else { cols - 1 };
    for i in 0..rows {
        let base = i * cols;
        for j in 0..col_pairs {
            let a = base + j;
            let b = base + (j + 1) % cols;
            if signs[a] == signs[b] {
                uf.union(a as u32, b as u32);
            }
        }
        if i + 1 < rows {
            for j in 0..cols {
                let a = base + j;
                let b = a + cols;
                if signs[a] == signs[b] {
                    uf.union(a as u32, b as u32);
                }
            }
        }
    }

    let mut ambiguous = 0usize;
    for i in 0..rows.saturating_sub(1) {
        for j in 0..col_pairs {
            let a = i * cols + j;
            let b = i * cols + (j + 1) % cols;
            let c = a + cols;
            let d = b + cols;
            if signs[a] == signs[d] && signs[b] == signs[c] && signs[a] != signs[b] {
                ambiguous += 1;
                let mean =
                    0.25 * (grid.values[a] + grid.values[b] + grid.values[c] + grid.values[d]);
                if is_positive(mean) == signs[a] {
                    uf.union(a as u32, d as u32);
                } else {
                    uf.union(b as u32, c as u32);
                }
            }
        }
    }

    let mut caps_sign = [true, true];
    if let GridGeometry::Sphere(geo) = &grid.geometry {
        caps_sign = [is_positive(geo.caps[0]), is_positive(geo.caps[1])];
        let north = cells as u32;
        let south = cells as u32 + 1;
        let last = (rows - 1) * cols;
        for j in 0..cols {
            if signs[j] == caps_sign[0] {
                uf.union(north, j as u32);
            }
            if signs[last + j] == caps_sign[1] {
                uf.union(south, (last + j) as u32);
            }
        }
    }

    let (mut labels, n_components) = uf.compact_labels();
    let cap_labels = if sphere {
        let caps = [labels[cells], labels[cells + 1]];
        labels.truncate(cells);
        Some(caps)
    } else {
        None
    };

    let mut components = vec![
        ComponentRecord {
            sign: 1,
            area: 0.0,
            cells: 0,
            diameter: None,
            touches_boundary: false,
            flagged: false
        };
        n_components
    ];
    let mut anchors = vec![usize::MAX; n_components];
    for i in 0..rows {
        let measure = grid.cell_measure(i);
        let edge_row = i == 0 || i + 1 == rows;
        for j in 0..cols {
            let k = i * cols + j;
            let l = labels[k] as usize;
            let comp = &mut components[l];
            if comp.cells == 0 {
                comp.sign = if signs[k] { 1 } else { -1 };
                anchors[l] = k;
            }
            comp.cells += 1;
            comp.area += measure;
            if !sphere && (edge_row || j == 0 || j + 1 == cols) {
                comp.touches_boundary = true;
            }
        }
    }
    if let Some(caps) = cap_labels {
        for (c, &l) in caps.iter().enumerate() {
            let comp = &mut components[l as usize];
            if comp.cells == 0 {
                comp.sign = if caps_sign[c] { 1 } else { -1 };
            }
        }
    }
    for comp in components.iter_mut() {
        comp.flagged = comp.cells < SMALL_COMPONENT_CELLS;
    }

    let pairs = adjacent_pairs(grid, &labels, cap_labels);
    let n_adjacent_pairs = pairs.len();
    let n_loops = if sphere {
        n_components.saturating_sub(1)
    } else {
        pairs
            .iter()
            .filter(|&&(a, b)| {
                !(components[a as usize].touches_boundary
                    && components[b as usize].touches_boundary)
            })
            .count()
    };
    let euler_ok = !sphere || n_adjacent_pairs + 1 == n_components;
    let n_flagged = components.iter().filter(|c| c.flagged).count();
    let min_component_area = components
        .iter()
        .map(|c| c.area)
        .fold(f64::INFINITY, f64::min);
    let min_unflagged_area = components
        .iter()
        .filter(|c| !c.flagged)
        .map(|c| c.area)
        .fold(f64::INFINITY, f64::min);

    let result = CensusResult {
        topology: grid.topology(),
        n_domains: n_components,
        n_loops,
        n_adjacent_pairs,
        euler_ok,
        ambiguous_saddles: ambiguous,
        n_flagged,
        n_domains_unflagged: n_components - n_flagged,
        min_component_area,
        min_unflagged_area,
        nodal_length: None,
        components,
    };
    Ok(Census {
        result,
        labels,
        cap_labels,
        anchors,
    })
}

/// Distinct unordered pairs of 4-adjacent (or cap-adjacent) labels.
fn adjacent_pairs(
    grid: &ScalarGrid,
    labels: &[u32],
    caps: Option<[u32; 2]>,
) -> HashSet<(u32, u32)> {
    let (rows, cols) = (grid.rows, grid.cols);
    let sphere = caps.is_some();
    let mut pairs = HashSet::new();
    let mut last = (u32::MAX, u32::MAX);
    let mut push = |a: u32, b: u32, pairs: &mut HashSet<(u32, u32)>| {
        if a != b {
            let key = if a < b { (a, b) } else { (b, a) };
            if key != last {
                pairs.insert(key);
                last = key;
            }
        }
    };
    let col_pairs = if sphere { cols } else { cols - 1 };
    for i in 0..rows {
        for j in 0..col_pairs {
            push(
                labels[i * cols + j],
                labels[i * cols + (j + 1) % cols],
                &mut pairs,
            );
        }
        if i + 1 < rows {
            for j in 0..cols {
                push(labels[i * cols + j], labels[(i + 1) * cols + j], &mut pairs);
            }
        }
    }
    if let Some([north, south]) = caps {
        for j in 0..cols {
            push(north, labels[j], &mut pairs);
            push(south, labels[(rows - 1) * cols + j], &mut pairs);
        }
    }
    pairs
}

/// Census with per-component diameters and the nodal length estimate.
pub fn full_census(grid: &ScalarGrid) -> Result<Census> {
    let mut census = count_components(grid)?;
    component_geometry(grid, &mut census);
    census.result.nodal_length = Some(nodal_length(grid));
    Ok(census)
}

/// Fills in the diameter of every component.
///
/// Distances are great-circle (sphere) or Euclidean (plane) between cell
/// centers. Components up to [`EXACT_DIAMETER_CELLS`] cells are measured
/// exactly; larger ones are pruned to their boundary cells and then to the
/// extreme points along a fixed fan of directions before the pairwise pass.
pub fn component_geometry(grid: &ScalarGrid, census: &mut Census) {
    let (rows, cols) = (grid.rows, grid.cols);
    let n = census.result.components.len();
    let sphere = grid.sphere().is_some();
    // bucket cells by label
    let mut starts = vec![0usize; n + 1];
    for &l in &census.labels {
        starts[l as usize + 1] += 1;
    }
    for i in 0..n {
        starts[i + 1] += starts[i];
    }
    let mut fill = starts.clone();
    let mut order = vec![0u32; census.labels.len()];
    for (k, &l) in census.labels.iter().enumerate() {
        order[fill[l as usize]] = k as u32;
        fill[l as usize] += 1;
    }
    let point = |k: usize| -> [f64; 3] {
        let (i, j) = (k / cols, k % cols);
        if sphere {
            grid.node_vector(i, j)
        } else {
            let p = grid.node_position(i, j);
            [p[0], p[1], 0.0]
        }
    };
    let is_boundary = |k: usize| -> bool {
        let (i, j) = (k / cols, k % cols);
        let l = census.labels[k];
        let mut neighbors = [usize::MAX; 4];
        if sphere {
            neighbors[0] = i * cols + (j + 1) % cols;
            neighbors[1] = i * cols + (j + cols - 1) % cols;
        } else {
            if j + 1 < cols {
                neighbors[0] = k + 1;
            }
            if j > 0 {
                neighbors[1] = k - 1;
            }
        }
        if i + 1 < rows {
            neighbors[2] = k + cols;
        }
        if i > 0 {
            neighbors[3] = k - cols;
        }
        if !sphere && (i == 0 || j == 0 || i + 1 == rows || j + 1 == cols) {
            return true;
        }
        if sphere && (i == 0 || i + 1 == rows) {
            return true;
        }
        neighbors
            .iter()
            .any(|&q| q != usize::MAX && census.labels[q] != l)
    };
    let directions = fan(sphere, 64);
    for c in 0..n {
        let members = &order[starts[c]..starts[c + 1]];
        let pts: Vec<[f64; 3]> = if members.len() <= EXACT_DIAMETER_CELLS {
            members.iter().map(|&k| point(k as usize)).collect()
        } else {
            let boundary: Vec<[f64; 3]> = members
                .iter()
                .filter(|&&k| is_boundary(k as usize))
                .map(|&k| point(k as usize))
                .collect();
            extreme_points(&boundary, &directions)
        };
        let chord = max_pairwise_distance(&pts);
        let d = if sphere {
            2.0 * (0.5 * chord).min(1.0).asin()
        } else {
            chord
        };
        census.result.components[c].diameter = Some(d);
    }
}

fn fan(sphere: bool, count: usize) -> Vec<[f64; 3]> {
    if sphere {
        crate::field::fibonacci_sphere(count)
            .into_iter()
            .map(|p| p.to_vector())
            .collect()
    } else {
        (0..count)
            .map(|k| {
                let a = PI * k as f64 / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect()
    }
}

fn extreme_points(pts: &[[f64; 3]], directions: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut keep = Vec::with_capacity(2 * directions.len());
    for d in directions {
        let proj = |p: &[f64; 3]| p[0] * d[0] + p[1] * d[1] + p[2] * d[2];
        let mut lo = (f64::INFINITY, 0usize);
        let mut hi = (f64::NEG_INFINITY, 0usize);
        for (idx, p) in pts.iter().enumerate() {
            let v = proj(p);
            if v < lo.0 {
                lo = (v, idx);
            }
            if v > hi.0 {
                hi = (v, idx);
            }
        }
        keep.push(lo.1);
        keep.push(hi.1);
    }
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter()
        .filter(|&i| i < pts.len())
        .map(|i| pts[i])
        .collect()
}

fn max_pairwise_distance(pts: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let d = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
            best = best.max(d);
        }
    }
    best.sqrt()
}

/// Crofton-style nodal length from sign changes along rows and columns.
///
/// Each sign change between neighboring nodes is a crossing of a grid line.
/// A crossing is weighted by the line spacing divided by `|t₁| + |t₂|`, where
/// `t` is the local unit tangent of the nodal line estimated from finite
/// differences of the sampled values; summed over a curve this is unbiased for
/// every orientation. Returns radians on the sphere, planar units otherwise.
pub fn nodal_length(grid: &ScalarGrid) -> f64 {
    let (rows, cols) = (grid.rows, grid.cols);
    let v = |i: usize, j: usize| grid.values[i * cols + j];
    let (row_gap, col_gap): (f64, Box<dyn Fn(f64) -> f64>) = match &grid.geometry {
        GridGeometry::Sphere(geo) => {
            let dphi = 2.0 * PI / cols as f64;
            (geo.dtheta(), Box::new(move |theta: f64| theta.sin() * dphi))
        }
        GridGeometry::Planar(p) => {
            let h = p.spacing;
            (h, Box::new(move |_| h))
        }
    };
    let sphere = grid.sphere().is_some();
    let theta_of = |i: f64| -> f64 {
        match &grid.geometry {
            GridGeometry::Sphere(geo) => (i + 0.5) * geo.dtheta(),
            GridGeometry::Planar(_) => 0.0,
        }
    };
    let right = |j: usize| {
        if sphere {
            Some((j + 1) % cols)
        } else if j + 1 < cols {
            Some(j + 1)
        } else {
            None
        }
    };
    let left = |j: usize| {
        if sphere {
            Some((j + cols - 1) % cols)
        } else if j > 0 {
            Some(j - 1)
        } else {
            None
        }
    };
    // derivative across rows at node (i, j)
    let d_rows = |i: usize, j: usize| -> f64 {
        let up = if i > 0 { i - 1 } else { i };
        let down = if i + 1 < rows { i + 1 } else { i };
        if up == down {
            return 0.0;
        }
        (v(down, j) - v(up, j)) / ((down - up) as f64 * row_gap)
    };
    let d_cols = |i: usize, j: usize, gap: f64| -> f64 {
        let (a, b) = (left(j).unwrap_or(j), right(j).unwrap_or(j));
        let steps = if sphere {
            2.0
        } else {
            (b as f64 - a as f64).abs()
        };
        if steps == 0.0 {
            return 0.0;
        }
        (v(i, b) - v(i, a)) / (steps * gap)
    };
    let weight = |spacing: f64, g_rows: f64, g_cols: f64| -> f64 {
        let norm = g_rows.hypot(g_cols);
        if norm == 0.0 {
            return spacing;
        }
        // tangent ⟂ gradient: |t_rows| = |g_cols|/|g|, |t_cols| = |g_rows|/|g|
        spacing * norm / (g_rows.abs() + g_cols.abs())
    };
    let mut total = 0.0;
    for i in 0..rows {
        let gap_i = col_gap(theta_of(i as f64));
        for j in 0..cols {
            if let Some(jr) = right(j) {
                if is_positive(v(i, j)) != is_positive(v(i, jr)) {
                    // crosses the row line through row i
                    let g_cols = (v(i, jr) - v(i, j)) / gap_i;
                    let g_rows = 0.5 * (d_rows(i, j) + d_rows(i, jr));
                    total += weight(row_gap, g_rows, g_cols);
                }
            }
            if i + 1 < rows && is_positive(v(i, j)) != is_positive(v(i + 1, j)) {
                // crosses the column line through column j
                let gap_mid = col_gap(theta_of(i as f64 + 0.5));
                let g_rows = (v(i + 1, j) - v(i, j)) / row_gap;
                let g_cols = 0.5
                    * (d_cols(i, j, gap_i) + d_cols(i + 1, j, col_gap(theta_of((i + 1) as f64))));
                total += weight(gap_mid, g_rows, g_cols);
            }
        }
    }
    CROFTON_CALIBRATION * total
}

/// One nodal loop (or open arc, in the plane) as the set of edge midpoints
/// separating two adjacent domains.
#[derive(Debug, Clone)]
pub struct NodalLoop {
    pub domains: (u32, u32),
    /// False for planar arcs whose two domains both touch the grid boundary.
    pub closed: bool,
    /// Unit vectors on the sphere; `[x, y, 0]` in the plane.
    pub points: Vec<[f64; 3]>,
    /// Normalized mean point (sphere) or centroid (plane).
    pub center: [f64; 3],
    /// Largest distance from `center` to a point.
    pub radius: f64,
}

/// Extracts the loops of a census.
pub fn trace_loops(grid: &ScalarGrid, census: &Census) -> Vec<NodalLoop> {
    let (rows, cols) = (grid.rows, grid.cols);
    let sphere = grid.sphere().is_some();
    let labels = &census.labels;
    let mut index: std::collections::HashMap<(u32, u32), usize> = std::collections::HashMap::new();
    let mut loops: Vec<NodalLoop> = Vec::new();
    let mut add = |a: u32, b: u32, p: [f64; 3], loops: &mut Vec<NodalLoop>| {
        if a == b {
            return;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        let idx = *index.entry(key).or_insert_with(|| {
            let comps = &census.result.components;
            let closed = sphere
                || !(comps[key.0 as usize].touches_boundary
                    && comps[key.1 as usize].touches_boundary);
            loops.push(NodalLoop {
                domains: key,
                closed,
                points: Vec::new(),
                center: [0.0; 3],
                radius: 0.0,
            });
            loops.len() - 1
        });
        loops[idx].points.push(p);
    };
    let dphi = 2.0 * PI / cols as f64;
    let sphere_point = |theta: f64, phi: f64| SpherePoint::new(theta, phi).to_vector();
    let plane_point = |i: f64, j: f64| {
        let p = grid.planar().expect("planar");
        [p.x0 + j * p.spacing, p.y0 + i * p.spacing, 0.0]
    };
    let thetas: Vec<f64> = grid.sphere().map(|g| g.thetas.clone()).unwrap_or_default();
    let col_pairs = if sphere { cols } else { cols - 1 };
    for i in 0..rows {
        for j in 0..col_pairs {
            let (a, b) = (labels[i * cols + j], labels[i * cols + (j + 1) % cols]);
            if a != b {
                let p = if sphere {
                    sphere_point(thetas[i], (j as f64 + 0.5) * dphi)
                } else {
                    plane_point(i as f64, j as f64 + 0.5)
                };
                add(a, b, p, &mut loops);
            }
        }
        if i + 1 < rows {
            for j in 0..cols {
                let (a, b) = (labels[i * cols + j], labels[(i + 1) * cols + j]);
                if a != b {
                    let p = if sphere {
                        sphere_point(0.5 * (thetas[i] + thetas[i + 1]), j as f64 * dphi)
                    } else {
                        plane_point(i as f64 + 0.5, j as f64)
                    };
                    add(a, b, p, &mut loops);
                }
            }
        }
    }
    if let (Some([north, south]), true) = (census.cap_labels, sphere) {
        let t0 = thetas[0];
        for j in 0..cols {
            add(
                north,
                labels[j],
                sphere_point(0.5 * t0, j as f64 * dphi),
                &mut loops,
            );
            add(
                south,
                labels[(rows - 1) * cols + j],
                sphere_point(PI - 0.5 * t0, j as f64 * dphi),
                &mut loops,
            );
        }
    }
    for l in loops.iter_mut() {
        let mut c = [0.0; 3];
        for p in &l.points {
            c[0] += p[0];
            c[1] += p[1];
            c[2] += p[2];
        }
        if sphere {
            let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            c = if norm > 1e-12 {
                [c[0] / norm, c[1] / norm, c[2] / norm]
            } else {
                l.points[0]
            };
            l.radius = l
                .points
                .iter()
                .map(|p| angle_between(c, *p))
                .fold(0.0, f64::max);
        } else {
            let k = l.points.len() as f64;
            c = [c[0] / k, c[1] / k, 0.0];
            l.radius = l
                .points
                .iter()
                .map(|p| (p[0] - c[0]).hypot(p[1] - c[1]))
                .fold(0.0, f64::max);
        }
        l.center = c;
    }
    loops
}

/// Number of closed loops inside, and of loops meeting, the spherical disk
/// of angular radius `rho` around `center`.
pub fn disk_counts(loops: &[NodalLoop], center: SpherePoint, rho: f64) -> (usize, usize) {
    let cv = center.to_vector();
    let cos_rho = rho.cos();
    count_in_disk(
        loops,
        |p| angle_between(cv, p),
        |p| crate::field::dot(cv, p) >= cos_rho,
        rho,
    )
}

/// Planar analogue of [`disk_counts`] for the Euclidean disk `D(center, r)`.
pub fn planar_disk_counts(loops: &[NodalLoop], center: [f64; 2], r: f64) -> (usize, usize) {
    let dist = |p: [f64; 3]| (p[0] - center[0]).hypot(p[1] - center[1]);
    count_in_disk(loops, dist, |p| dist(p) <= r, r)
}

fn count_in_disk(
    loops: &[NodalLoop],
    dist: impl Fn([f64; 3]) -> f64,
    inside: impl Fn([f64; 3]) -> bool,
    r: f64,
) -> (usize, usize) {
    let mut star = 0;
    let mut cross = 0;
    for l in loops {
        let dc = dist(l.center);
        if dc - l.radius > r {
            continue;
        }
        if dc + l.radius <= r {
            cross += 1;
            if l.closed {
                star += 1;
            }
            continue;
        }
        let mut any = false;
        let mut all = true;
        for &p in &l.points {
            if inside(p) {
                any = true;
            } else {
                all = false;
            }
            if any && !all {
                break;
            }
        }
        if any {
            cross += 1;
            if all && l.closed {
                star += 1;
            }
        }
    }
    (star, cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{eval_grid, sample_coeffs, GridPlan, HarmonicCoeffs, SphereGridSpec};
    use crate::grid::PlanarGeometry;
    use crate::legendre::legendre_zeros;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planar(rows: usize, cols: usize, f: impl Fn(f64, f64) -> f64) -> ScalarGrid {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(j as f64, i as f64));
            }
        }
        ScalarGrid {
            rows,
            cols,
            values,
            geometry: GridGeometry::Planar(PlanarGeometry {
                spacing: 1.0,
                x0: 0.0,
                y0: 0.0,
            }),
            gradient: None,
        }
    }

    #[test]
    fn degree_one_splits_sphere_in_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let c = sample_coeffs(1, &mut rng);
            let g = eval_grid(&c, SphereGridSpec::for_degree(1, 8), false).unwrap();
            let census = count_components(&g).unwrap();
            assert_eq!(census.result.n_domains, 2);
            assert_eq!(census.result.n_loops, 1);
            assert!(census.result.euler_ok);
            assert!((census.result.total_area() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zonal_bands() {
        for n in [5usize, 10, 23] {
            let g = eval_grid(
                &HarmonicCoeffs::zonal(n),
                SphereGridSpec::for_degree(n, 4),
                false,
            )
            .unwrap();
            let census = count_components(&g).unwrap();
            assert_eq!(census.result.n_domains, n + 1);
            assert_eq!(census.result.n_loops, n);
        }
    }

    #[test]
    fn polar_cap_area_matches_first_zero() {
        let n = 10;
        let g = eval_grid(
            &HarmonicCoeffs::zonal(n),
            SphereGridSpec::for_degree(n, 8),
            false,
        )
        .unwrap();
        let census = count_components(&g).unwrap();
        let cap = census.cap_labels.unwrap()[0] as usize;
        let theta1 = legendre_zeros(n).unwrap()[0];
        let exact = (1.0 - theta1.cos()) / 2.0;
        let area = census.result.components[cap].area;
        // the cap boundary is resolved to within one row
        let tol = 0.5 * (theta1.sin() * PI / 80.0);
        assert!((area - exact).abs() < tol, "{area} vs {exact}");
    }

    #[test]
    fn hemisphere_geometry() {
        let mut c = HarmonicCoeffs::zeros(1);
        c.set(0, 1.0);
        let g = eval_grid(&c, SphereGridSpec::for_degree(1, 8), false).unwrap();
        let census = full_census(&g).unwrap();
        for comp in &census.result.components {
            assert!((comp.area - 0.5).abs() < 1e-12);
            assert!((comp.diameter.unwrap() - PI).abs() < 0.05);
        }
    }

    #[test]
    fn sign_flip_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = sample_coeffs(30, &mut rng);
        let plan = GridPlan::for_degree(30, 4).unwrap();
        let g = plan.eval(&c).unwrap();
        let a = count_components(&g).unwrap();
        let b = count_components(&g.negated()).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.result.n_domains, b.result.n_domains);
        for (x, y) in a.result.components.iter().zip(&b.result.components) {
            assert_eq!(x.sign, -y.sign);
            assert_eq!(x.cells, y.cells);
        }
    }

    #[test]
    fn checkerboard_saddle_uses_block_mean() {
        // a single saddle: + on the main diagonal dominates
        let g = planar(8, 8, |x, y| {
            let (u, v) = (x - 3.5, y - 3.5);
            u * v + 0.1
        });
        let census = count_components(&g).unwrap();
        assert_eq!(census.result.ambiguous_saddles, 1);
        assert_eq!(census.result.n_domains, 3);
        let neg = census
            .result
            .components
            .iter()
            .filter(|c| c.sign < 0)
            .count();
        assert_eq!(neg, 2);
    }

    #[test]
    fn planar_closed_loops() {
        // two bumps inside a negative sea
        let g = planar(40, 40, |x, y| {
            let a = (-((x - 10.0).powi(2) + (y - 10.0).powi(2)) / 10.0).exp();
            let b = (-((x - 28.0).powi(2) + (y - 25.0).powi(2)) / 10.0).exp();
            a + b - 0.5
        });
        let census = count_components(&g).unwrap();
        assert_eq!(census.result.n_domains, 3);
        assert_eq!(census.result.n_loops, 2);
        let loops = trace_loops(&g, &census);
        assert_eq!(loops.len(), 2);
        let (star, cross) = planar_disk_counts(&loops, [10.0, 10.0], 6.0);
        assert_eq!((star, cross), (1, 1));
        let (star, cross) = planar_disk_counts(&loops, [19.0, 18.0], 30.0);
        assert_eq!((star, cross), (2, 2));
        let (star, cross) = planar_disk_counts(&loops, [10.0, 10.0], 1.0);
        assert_eq!((star, cross), (0, 0));
    }

    #[test]
    fn degenerate_grid_rejected() {
        let g = planar(4, 4, |x, _| x - 1.5);
        assert!(matches!(
            count_components(&g),
            Err(Error::DegenerateGrid { .. })
        ));
    }

    #[test]
    fn sphere_disk_counts_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = sample_coeffs(12, &mut rng);
        let g = eval_grid(&c, SphereGridSpec::for_degree(12, 8), false).unwrap();
        let census = count_components(&g).unwrap();
        let loops = trace_loops(&g, &census);
        assert_eq!(loops.len(), census.result.n_loops);
        let p = SpherePoint::new(1.0, 1.0);
        let (star, cross) = disk_counts(&loops, p, PI - 1e-9);
        assert_eq!(cross, census.result.n_loops);
        assert_eq!(star, census.result.n_loops);
        let (star, _) = disk_counts(&loops, p, 1e-4);
        assert_eq!(star, 0);
    }
}

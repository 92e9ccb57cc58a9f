//! Random crossing lattice: nodal lines drawn along lattice edges.
//!
//! Nodal lines run along the edges of an `L × L` square lattice of saddles.
//! Each saddle is resolved by pairing its four arms either as `N–E, S–W`
//! (bit set) or `N–W, S–E` (bit clear). With a free boundary every arm that
//! leaves the lattice ends on the outer boundary curve, and everything
//! attached to it counts as one loop; with a periodic boundary arms wrap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{trial_rng, Stream};
use crate::unionfind::UnionFind;

/// Provenance label attached to every lattice report.
pub const MODEL_LABEL: &str = "external";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Free,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingLattice {
    pub side: usize,
    /// Row-major; `true` pairs `N–E` and `S–W`.
    pub bits: Vec<bool>,
    pub boundary: Boundary,
}

const N: usize = 0;
const E: usize = 1;
const S: usize = 2;
const W: usize = 3;

impl CrossingLattice {
    pub fn new(side: usize, bits: Vec<bool>, boundary: Boundary) -> Result<Self> {
        if side == 0 || bits.len() != side * side {
            return Err(Error::MalformedLattice(format!(
                "{} bits for side {side}",
                bits.len()
            )));
        }
        Ok(CrossingLattice {
            side,
            bits,
            boundary,
        })
    }

    pub fn uniform(side: usize, bit: bool, boundary: Boundary) -> Self {
        CrossingLattice {
            side,
            bits: vec![bit; side * side],
            boundary,
        }
    }

    pub fn complement(&self) -> Self {
        CrossingLattice {
            bits: self.bits.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    /// Bits reversed left to right (no change of resolution).
    pub fn mirrored(&self) -> Self {
        let l = self.side;
        let bits = (0..l * l)
            .map(|k| self.bits[(k / l) * l + (l - 1 - k % l)])
            .collect();
        CrossingLattice {
            bits,
            ..self.clone()
        }
    }

    /// Free-boundary sub-lattice with corner `(row, col)`.
    pub fn window(&self, row: usize, col: usize, side: usize) -> Result<Self> {
        if row + side > self.side || col + side > self.side || side == 0 {
            return Err(Error::InvalidParameter("window outside lattice".into()));
        }
        let bits = (0..side * side)
            .map(|k| self.bits[(row + k / side) * self.side + col + k % side])
            .collect();
        Ok(CrossingLattice {
            side,
            bits,
            boundary: Boundary::Free,
        })
    }

    /// Arm paired with `arm` at site `v`.
    #[inline]
    fn partner(&self, v: usize, arm: usize) -> usize {
        if self.bits[v] {
            [E, N, W, S][arm]
        } else {
            [W, S, E, N][arm]
        }
    }

    /// Neighbor across `arm`, or `None` off a free boundary.
    #[inline]
    fn across(&self, v: usize, arm: usize) -> Option<usize> {
        let l = self.side;
        let (i, j) = (v / l, v % l);
        let periodic = self.boundary == Boundary::Periodic;
        let (ni, nj) = match arm {
            N if i > 0 => (i - 1, j),
            N if periodic => (l - 1, j),
            S if i + 1 < l => (i + 1, j),
            S if periodic => (0, j),
            W if j > 0 => (i, j - 1),
            W if periodic => (i, l - 1),
            E if j + 1 < l => (i, j + 1),
            E if periodic => (i, 0),
            _ => return None,
        };
        Some(ni * l + nj)
    }
}

/// I.i.d. fair resolution bits.
pub fn sample_lattice<R: Rng + ?Sized>(
    side: usize,
    rng: &mut R,
    boundary: Boundary,
) -> Result<CrossingLattice> {
    if side < 4 {
        return Err(Error::InvalidParameter(format!(
            "lattice side {side} below 4"
        )));
    }
    let bits = (0..side * side).map(|_| rng.random::<bool>()).collect();
    CrossingLattice::new(side, bits, boundary)
}

pub fn sample_lattice_trial(
    side: usize,
    boundary: Boundary,
    master_seed: u64,
    index: u64,
) -> Result<CrossingLattice> {
    let mut rng = trial_rng(master_seed, Stream::Lattice, side as u64, index);
    sample_lattice(side, &mut rng, boundary)
}

/// Number of loops, by following arms from saddle to saddle.
pub fn count_loops(lat: &CrossingLattice) -> Result<usize> {
    let l = lat.side;
    let mut seen = vec![false; 4 * l * l];
    let limit = 4 * l * l + 1;
    let opposite = |a: usize| (a + 2) % 4;
    let mut loops = 0;
    let mut touches_boundary = false;

    // Walks from half-edge (v, arm) out through `arm`; returns true when the
    // walk ends on the free boundary, false when it closes up.
    let walk = |start_v: usize, start_arm: usize, seen: &mut [bool]| -> Result<bool> {
        let (mut v, mut arm) = (start_v, start_arm);
        for _ in 0..limit {
            seen[4 * v + arm] = true;
            let Some(w) = lat.across(v, arm) else {
                return Ok(true);
            };
            let inbound = opposite(arm);
            seen[4 * w + inbound] = true;
            let out = lat.partner(w, inbound);
            if w == start_v && out == start_arm {
                return Ok(false);
            }
            v = w;
            arm = out;
        }
        Err(Error::MalformedLattice(format!(
            "trace from site {start_v} did not close"
        )))
    };

    if lat.boundary == Boundary::Free {
        for v in 0..l * l {
            for arm in 0..4 {
                if lat.across(v, arm).is_none() && !seen[4 * v + arm] {
                    touches_boundary = true;
                    // walk inward from the boundary stub
                    let inner = lat.partner(v, arm);
                    seen[4 * v + arm] = true;
                    if !walk(v, inner, &mut seen)? {
                        return Err(Error::MalformedLattice(
                            "boundary arc closed on itself".into(),
                        ));
                    }
                }
            }
        }
    }
    for v in 0..l * l {
        for arm in 0..4 {
            if !seen[4 * v + arm] {
                // `arm`'s partner is unseen as well; close the loop
                let entry = lat.partner(v, arm);
                seen[4 * v + entry] = true;
                if walk(v, arm, &mut seen)? {
                    return Err(Error::MalformedLattice(
                        "interior trace reached the boundary".into(),
                    ));
                }
                loops += 1;
            }
        }
    }
    Ok(loops + usize::from(touches_boundary))
}

/// Loop count by union-find over lattice edges (an independent check of
/// [`count_loops`]).
pub fn count_loops_union_find(lat: &CrossingLattice) -> usize {
    let l = lat.side;
    let free = lat.boundary == Boundary::Free;
    // horizontal edge (i, c): between column c-1 and c (free: c = 0..=l, stubs at 0 and l;
    // periodic: c = 0..l, edge c joins column c-1 mod l and c)
    let hcols = if free { l + 1 } else { l };
    let vrows = hcols;
    let h = |i: usize, c: usize| i * hcols + c;
    let vbase = l * hcols;
    let vert = |r: usize, j: usize| vbase + r * l + j;
    let total = vbase + vrows * l;
    let outer = total;
    let mut uf = UnionFind::new(total + 1);
    for i in 0..l {
        for j in 0..l {
            let (w, e) = if free {
                (h(i, j), h(i, j + 1))
            } else {
                (h(i, j), h(i, (j + 1) % l))
            };
            let (n, s) = if free {
                (vert(i, j), vert(i + 1, j))
            } else {
                (vert(i, j), vert((i + 1) % l, j))
            };
            let (a, b, c, d) = if lat.bits[i * l + j] {
                (n, e, s, w)
            } else {
                (n, w, s, e)
            };
            uf.union(a as u32, b as u32);
            uf.union(c as u32, d as u32);
        }
    }
    if free {
        for i in 0..l {
            uf.union(outer as u32, h(i, 0) as u32);
            uf.union(outer as u32, h(i, l) as u32);
            uf.union(outer as u32, vert(0, i) as u32);
            uf.union(outer as u32, vert(l, i) as u32);
        }
        let (_, k) = uf.compact_labels();
        k
    } else {
        let (_, k) = uf.compact_labels();
        // the unused outer node is its own class
        k - 1
    }
}

/// Loops per site.
pub fn loop_density(lat: &CrossingLattice) -> Result<f64> {
    Ok(count_loops(lat)? as f64 / (lat.side * lat.side) as f64)
}

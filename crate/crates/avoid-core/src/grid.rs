//! Rasterized periodic sets on tori and the avoidance certificates built on
//! them.
//!
//! A `GridIndicator` is a boolean raster over the torus `(R / L Z)^dim` at
//! resolution `k`: cell `(i, j)` occupies the half-open cube of side `L/k` at
//! offset `(i, j) * L/k`, tiled `L Z^dim`-periodically. Half-open cells and
//! the strict-interior distance band make avoidance of a finite distance set
//! decidable: if no pair of occupied cells has center distance strictly
//! inside `(d - cellDiag, d + cellDiag)` for any forbidden `d` (images over
//! the torus included), then the continuous union of cells avoids every `d`.
//! All band comparisons are done in exact rational arithmetic.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::distance::DistanceSet;
use crate::error::{AvoidError, Result};
use crate::rat::{ceil_int, frac, rat, rat_string, sqrt_in_open_band, sqrt_within_tol, to_f64, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlackMode {
    /// Strict-interior band `(d - cellDiag, d + cellDiag)` around every
    /// forbidden distance; an empty result certifies the continuous set.
    Conservative,
    /// Center-to-center distance within `tol = 2^-40 * L` of a forbidden
    /// distance.
    ExactCenter,
}

/// One offending pair of occupied cells (possibly a cell with one of its own
/// periodic translates, `a == b`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub a: usize,
    pub b: usize,
    /// Which periodic image of `b` realizes the match, in whole periods.
    pub image: [i64; 2],
    /// The forbidden distance matched, as an exact rational string.
    pub forbidden: String,
    pub center_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridIndicator {
    dim: usize,
    period: Rat,
    k: usize,
    cells: BitVec,
}

impl GridIndicator {
    pub fn new(dim: usize, period: Rat, k: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(AvoidError::Precondition(format!(
                "dim must be 1 or 2, got {dim}"
            )));
        }
        if k == 0 {
            return Err(AvoidError::ZeroResolution);
        }
        if !period.is_positive() {
            return Err(AvoidError::BadPeriod);
        }
        let len = k.pow(dim as u32);
        Ok(Self {
            dim,
            period,
            k,
            cells: BitVec::zeros(len),
        })
    }

    pub fn full(dim: usize, period: Rat, k: usize) -> Result<Self> {
        let mut g = Self::new(dim, period, k)?;
        for i in 0..g.cells.len() {
            g.cells.set(i, true);
        }
        Ok(g)
    }

    pub fn from_cells(dim: usize, period: Rat, k: usize, occupied: &[usize]) -> Result<Self> {
        let mut g = Self::new(dim, period, k)?;
        for &c in occupied {
            if c >= g.cells.len() {
                return Err(AvoidError::Precondition(format!(
                    "cell index {c} out of range"
                )));
            }
            g.cells.set(c, true);
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> &Rat {
        &self.period
    }

    pub fn resolution(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &BitVec {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut BitVec {
        &mut self.cells
    }

    pub fn cell_width(&self) -> Rat {
        &self.period / rat(self.k as i128)
    }

    pub fn period_f64(&self) -> f64 {
        to_f64(&self.period)
    }

    pub fn cell_width_f64(&self) -> f64 {
        to_f64(&self.cell_width())
    }

    /// Squared full cell diagonal `dim * (L/k)^2`.
    pub fn cell_diag_sq(&self) -> Rat {
        let cw = self.cell_width();
        rat(self.dim as i128) * &cw * &cw
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.k && (self.dim == 2 || y == 0) && y < self.k.max(1));
        if self.dim == 1 {
            x
        } else {
            x * self.k + y
        }
    }

    #[inline]
    pub fn coords(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.k, flat % self.k]
        }
    }

    pub fn get(&self, flat: usize) -> bool {
        self.cells.get(flat)
    }

    pub fn set(&mut self, flat: usize, v: bool) {
        self.cells.set(flat, v);
    }

    pub fn density(&self) -> Rat {
        frac(self.cells.count_ones() as i128, self.cells.len() as i128)
    }

    pub fn occupied(&self) -> Vec<usize> {
        self.cells.iter_ones().collect()
    }

    /// Raster whose bit at `c` equals this raster's bit at `c + s` (torus
    /// wrap). Used for pair-correlation counts.
    pub fn shifted(&self, s: [i64; 2]) -> GridIndicator {
        let k = self.k as i64;
        let mut out = GridIndicator::new(self.dim, self.period.clone(), self.k).unwrap();
        for o in self.cells.iter_ones() {
            let [x, y] = self.coords(o);
            let nx = (x as i64 - s[0]).rem_euclid(k) as usize;
            let c = if self.dim == 1 {
                nx
            } else {
                let ny = (y as i64 - s[1]).rem_euclid(k) as usize;
                nx * self.k + ny
            };
            out.cells.set(c, true);
        }
        out
    }

    /// #{cells c : A(c) and A(c + s)}
    pub fn count_pairs_with_shift(&self, s: [i64; 2]) -> usize {
        self.cells.and_count(&self.shifted(s).cells)
    }

    /// Refine by an integer factor per axis; the continuous set is unchanged.
    pub fn refined(&self, factor: usize) -> Result<GridIndicator> {
        if factor == 0 {
            return Err(AvoidError::ZeroResolution);
        }
        let k2 = self.k * factor;
        if k2.pow(self.dim as u32) > (1usize << 26) {
            return Err(AvoidError::TooLarge(format!(
                "refined raster would have {} cells",
                k2.pow(self.dim as u32)
            )));
        }
        let mut out = GridIndicator::new(self.dim, self.period.clone(), k2)?;
        for o in self.cells.iter_ones() {
            let [x, y] = self.coords(o);
            for fx in 0..factor {
                if self.dim == 1 {
                    out.set(x * factor + fx, true);
                } else {
                    for fy in 0..factor {
                        let c = (x * factor + fx) * k2 + (y * factor + fy);
                        out.set(c, true);
                    }
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// offset band tables

/// A forbidden-distance match for a fixed cell-offset, torus images included.
#[derive(Debug, Clone)]
pub struct BandMatch {
    pub forbidden: Rat,
    pub image: [i64; 2],
    pub dist_sq: Rat,
}

fn image_range(d: &DistanceSet, grid: &GridIndicator) -> i64 {
    // images u with |delta + u*k| possibly within diam + slack of a match;
    // one extra period is always enough slack
    let cw = grid.cell_width();
    let bound_cells = ceil_int(&(d.diam() / &cw)) as i64 + 2 * grid.dim as i64 + 2;
    bound_cells / grid.k as i64 + 1
}

/// For every wrapped cell offset `delta` (flat index), the list of forbidden
/// distances matched under `mode`, with the realizing image.
pub fn offset_matches(
    grid: &GridIndicator,
    d: &DistanceSet,
    mode: SlackMode,
) -> Vec<Vec<BandMatch>> {
    let k = grid.k as i64;
    let cw = grid.cell_width();
    let cw2 = &cw * &cw;
    let diag_sq = grid.cell_diag_sq();
    let tol = &grid.period * frac(1, 1i128 << 40);
    let urange = image_range(d, grid);
    let mut table = vec![Vec::new(); grid.len()];
    for (flat, matches) in table.iter_mut().enumerate() {
        let [dx, dy] = grid.coords(flat);
        let axes: &[i64] = if grid.dim == 1 {
            &[dx as i64]
        } else {
            &[dx as i64, dy as i64]
        };
        let mut images: Vec<[i64; 2]> = Vec::new();
        for ux in -urange..=urange {
            if grid.dim == 1 {
                images.push([ux, 0]);
            } else {
                for uy in -urange..=urange {
                    images.push([ux, uy]);
                }
            }
        }
        for image in images {
            let mut a2 = Rat::zero();
            for (ai, &delta) in axes.iter().enumerate() {
                let comp = rat((delta + image[ai] * k) as i128);
                a2 += &comp * &comp * &cw2;
            }
            for v in d.values() {
                let hit = match mode {
                    SlackMode::Conservative => sqrt_in_open_band(&a2, v, &diag_sq),
                    SlackMode::ExactCenter => sqrt_within_tol(&a2, v, &tol),
                };
                if hit {
                    matches.push(BandMatch {
                        forbidden: v.clone(),
                        image,
                        dist_sq: a2.clone(),
                    });
                }
            }
        }
    }
    table
}

/// Per-offset conflict bits in conservative mode: `true` at wrapped offset
/// `delta` when two occupied cells at that offset would invalidate the
/// certificate. This is the Cayley-graph connection set of the avoidance
/// problem.
pub fn conservative_conflicts(grid: &GridIndicator, d: &DistanceSet) -> BitVec {
    let table = offset_matches(grid, d, SlackMode::Conservative);
    let mut bits = BitVec::zeros(grid.len());
    for (i, m) in table.iter().enumerate() {
        if !m.is_empty() {
            bits.set(i, true);
        }
    }
    bits
}

/// All offending unordered occupied-cell pairs of `a` under `mode`,
/// including cells paired with their own periodic translates.
pub fn torus_violations(a: &GridIndicator, d: &DistanceSet, mode: SlackMode) -> Vec<Violation> {
    let table = offset_matches(a, d, mode);
    let occ = a.occupied();
    let k = a.k as i64;
    let mut out = Vec::new();
    for (i, &ca) in occ.iter().enumerate() {
        for &cb in &occ[i..] {
            let [ax, ay] = a.coords(ca);
            let [bx, by] = a.coords(cb);
            let dx = (bx as i64 - ax as i64).rem_euclid(k) as usize;
            let dy = (by as i64 - ay as i64).rem_euclid(k) as usize;
            let flat = if a.dim == 1 { dx } else { dx * a.k + dy };
            for m in &table[flat] {
                if ca == cb {
                    // a cell with itself: images u and -u describe the same
                    // unordered pair; keep the lexicographically nonnegative one
                    let first_nonzero = m.image.iter().find(|&&c| c != 0);
                    if let Some(&c) = first_nonzero {
                        if c < 0 {
                            continue;
                        }
                    }
                }
                out.push(Violation {
                    a: ca,
                    b: cb,
                    image: m.image,
                    forbidden: rat_string(&m.forbidden),
                    center_distance: to_f64(&m.dist_sq).sqrt(),
                });
            }
        }
    }
    out.sort_by(|p, q| (p.a, p.b, p.image).cmp(&(q.a, q.b, q.image)));
    out
}

/// Conservative check of a bounded window (no torus wrap, no images): pairs
/// of occupied cells, including intra-cell point pairs, against the strict
/// band. Used as the precondition of `periodize`.
pub fn window_violations(a: &GridIndicator, d: &DistanceSet) -> Vec<Violation> {
    let cw = a.cell_width();
    let cw2 = &cw * &cw;
    let diag_sq = a.cell_diag_sq();
    let occ = a.occupied();
    let mut out = Vec::new();
    for (i, &ca) in occ.iter().enumerate() {
        for &cb in &occ[i..] {
            let [ax, ay] = a.coords(ca);
            let [bx, by] = a.coords(cb);
            let dx = rat(bx as i128 - ax as i128);
            let dy = rat(by as i128 - ay as i128);
            let mut a2 = &dx * &dx * &cw2;
            if a.dim == 2 {
                a2 += &dy * &dy * &cw2;
            }
            for v in d.values() {
                if sqrt_in_open_band(&a2, v, &diag_sq) {
                    out.push(Violation {
                        a: ca,
                        b: cb,
                        image: [0, 0],
                        forbidden: rat_string(v),
                        center_distance: to_f64(&a2).sqrt(),
                    });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// constructions

/// The periodization of Lemma-style tiling: given a window raster that is
/// D-avoiding as a bounded set, tile it with period `R + diam D` rounded up
/// to whole cells (plus `dim - 1` cells of extra margin so the band
/// certificate goes through in higher dimension). The result passes the
/// conservative torus check by construction.
pub fn periodize(window: &GridIndicator, d: &DistanceSet) -> Result<GridIndicator> {
    let viol = window_violations(window, d);
    if !viol.is_empty() {
        return Err(AvoidError::Precondition(format!(
            "window is not conservatively D-avoiding ({} offending pairs)",
            viol.len()
        )));
    }
    let cw = window.cell_width();
    let pad = ceil_int(&(d.diam() / &cw)) as usize + (window.dim - 1);
    let k2 = window.k + pad;
    let period2 = &cw * rat(k2 as i128);
    let mut out = GridIndicator::new(window.dim, period2, k2)?;
    for o in window.cells.iter_ones() {
        let [x, y] = window.coords(o);
        let c = if window.dim == 1 { x } else { x * k2 + y };
        out.set(c, true);
    }
    Ok(out)
}

/// Replace every occupied coarse cell by a centered sub-block of side
/// fraction `1 - 3^(1/dim) * eps`, rounded down to whole fine cells, on the
/// refinement of the grid to resolution `k^2`.
pub fn shrink_cells(a: &GridIndicator, eps: f64) -> Result<GridIndicator> {
    if eps <= 0.0 {
        return Err(AvoidError::Precondition("eps must be positive".into()));
    }
    let eps = eps.min(0.1);
    let k = a.k;
    let k2 = k * k;
    if k2.pow(a.dim as u32) > (1usize << 26) {
        return Err(AvoidError::TooLarge(format!(
            "shrink output would have {} cells",
            k2.pow(a.dim as u32)
        )));
    }
    let fraction = 1.0 - 3f64.powf(1.0 / a.dim as f64) * eps;
    let b = ((fraction * k as f64).floor() as usize).min(k);
    let off = (k - b) / 2;
    let mut out = GridIndicator::new(a.dim, a.period.clone(), k2)?;
    for o in a.cells.iter_ones() {
        let [x, y] = a.coords(o);
        for fx in 0..b {
            let gx = x * k + off + fx;
            if a.dim == 1 {
                out.set(gx, true);
            } else {
                for fy in 0..b {
                    let gy = y * k + off + fy;
                    out.set(gx * k2 + gy, true);
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// serialization

#[derive(Serialize, Deserialize)]
struct RawGrid {
    dim: usize,
    period: String,
    k: usize,
    /// Run-length encoding: comma-separated run lengths of alternating
    /// cell values, starting with unset cells.
    cells: String,
}

fn rle_encode(bits: &BitVec) -> String {
    let mut runs: Vec<usize> = Vec::new();
    let mut current = false;
    let mut run = 0usize;
    for i in 0..bits.len() {
        let v = bits.get(i);
        if v == current {
            run += 1;
        } else {
            runs.push(run);
            current = v;
            run = 1;
        }
    }
    runs.push(run);
    runs.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn rle_decode(s: &str, len: usize) -> Result<BitVec> {
    let mut bits = BitVec::zeros(len);
    let mut pos = 0usize;
    let mut value = false;
    for part in s.split(',') {
        let run: usize = part
            .trim()
            .parse()
            .map_err(|_| AvoidError::Parse(format!("bad run length '{part}'")))?;
        if value {
            for i in pos..pos + run {
                if i >= len {
                    return Err(AvoidError::Parse("run-length data overflows raster".into()));
                }
                bits.set(i, true);
            }
        }
        pos += run;
        value = !value;
    }
    if pos != len {
        return Err(AvoidError::Parse(format!(
            "run lengths sum to {pos}, raster has {len} cells"
        )));
    }
    Ok(bits)
}

impl GridIndicator {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "period": rat_string(&self.period),
            "k": self.k,
            "cells": rle_encode(&self.cells),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: RawGrid = serde_json::from_value(v.clone())
            .map_err(|e| AvoidError::Parse(format!("bad raster JSON: {e}")))?;
        let period = crate::rat::parse_rat(&raw.period)?;
        let mut g = GridIndicator::new(raw.dim, period, raw.k)?;
        g.cells = rle_decode(&raw.cells, g.cells.len())?;
        Ok(g)
    }

    /// Plain-text PBM (P1) raster for eyeballing 2-d indicators.
    pub fn to_pbm(&self) -> Result<String> {
        if self.dim != 2 {
            return Err(AvoidError::Precondition("PBM export is 2-d only".into()));
        }
        let mut s = format!("P1\n{} {}\n", self.k, self.k);
        for y in 0..self.k {
            let row: Vec<&str> = (0..self.k)
                .map(|x| if self.get(x * self.k + y) { "1" } else { "0" })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        Ok(s)
    }
}

// ---------------------------------------------------------------------------

/// Two-sided bounds on an `m(D)` query with their certificates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub lower_exact: Option<String>,
    pub upper_exact: Option<String>,
    pub lower_certificate: serde_json::Value,
    pub upper_certificate: serde_json::Value,
    pub method: String,
}

impl BoundsReport {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lower)
            || !(0.0..=1.0).contains(&self.upper)
            || self.lower > self.upper
        {
            return Err(AvoidError::Precondition(format!(
                "bounds out of order: {} .. {}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::frac;

    fn ds(vals: &[i64]) -> DistanceSet {
        DistanceSet::from_integers(vals).unwrap()
    }

    #[test]
    fn density_basics() {
        let g = GridIndicator::full(2, rat(1), 4).unwrap();
        assert_eq!(g.density(), rat(1));
        let e = GridIndicator::new(1, rat(1), 8).unwrap();
        assert_eq!(e.density(), rat(0));
        let mut q = GridIndicator::new(2, rat(1), 4).unwrap();
        for c in [0, 5, 10, 15] {
            q.set(c, true);
        }
        assert_eq!(q.density(), frac(1, 4));
    }

    #[test]
    fn violations_single_and_pair() {
        // k=8, L=2, D={1}: cells 0 and 4 have center distance exactly 1
        let a = GridIndicator::from_cells(1, rat(2), 8, &[0, 4]).unwrap();
        let d = ds(&[1]);
        let cons = torus_violations(&a, &d, SlackMode::Conservative);
        assert!(cons.iter().any(|v| v.a == 0 && v.b == 4));
        let exact = torus_violations(&a, &d, SlackMode::ExactCenter);
        assert!(exact.iter().any(|v| v.a == 0 && v.b == 4));

        // a single cell alone has no violation (self translates at distance 2)
        let single = GridIndicator::from_cells(1, rat(2), 8, &[0]).unwrap();
        assert!(torus_violations(&single, &d, SlackMode::Conservative).is_empty());

        // empty grid, any D
        let empty = GridIndicator::new(2, rat(2), 8).unwrap();
        assert!(torus_violations(&empty, &ds(&[1, 2]), SlackMode::Conservative).is_empty());
    }

    #[test]
    fn violations_enumerated_by_hand() {
        // dim=1, L=3, k=3, A={cell 0}, D={1}: self translates at distance 3
        // only; strict band (0, 2) misses 3 in conservative mode, and the
        // exact-center band misses everything.
        let a = GridIndicator::from_cells(1, rat(3), 3, &[0]).unwrap();
        let d = ds(&[1]);
        assert!(torus_violations(&a, &d, SlackMode::ExactCenter).is_empty());
        assert!(torus_violations(&a, &d, SlackMode::Conservative).is_empty());
        // but D={3} is violated by the translate
        let d3 = ds(&[3]);
        let v = torus_violations(&a, &d3, SlackMode::ExactCenter);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].a, v[0].b), (0, 0));
        assert_eq!(v[0].image, [1, 0]);
    }

    #[test]
    fn exact_center_subset_of_conservative() {
        // band containment: every exact-center violation is a conservative one
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
            let k = rng.gen_range(2..10usize);
            let mut g = GridIndicator::new(dim, rat(rng.gen_range(1..4)), k).unwrap();
            for i in 0..g.len() {
                if rng.gen_bool(0.3) {
                    g.set(i, true);
                }
            }
            let d = ds(&[rng.gen_range(1..3)]);
            let exact = torus_violations(&g, &d, SlackMode::ExactCenter);
            let cons = torus_violations(&g, &d, SlackMode::Conservative);
            for v in &exact {
                assert!(
                    cons.iter()
                        .any(|w| w.a == v.a && w.b == v.b && w.image == v.image),
                    "exact-center violation missing from conservative set"
                );
            }
        }
    }

    #[test]
    fn conservative_empty_survives_refinement() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let d = ds(&[1]);
        let mut checked = 0;
        for _ in 0..40 {
            let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
            let k = rng.gen_range(3..8usize);
            let mut g = GridIndicator::new(dim, rat(3), k).unwrap();
            for i in 0..g.len() {
                if rng.gen_bool(0.2) {
                    g.set(i, true);
                }
            }
            if !torus_violations(&g, &d, SlackMode::Conservative).is_empty() {
                continue;
            }
            let fine = g.refined(2).unwrap();
            assert!(
                torus_violations(&fine, &d, SlackMode::Conservative).is_empty(),
                "doubling the resolution exposed a violation"
            );
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn periodize_unit_window() {
        // window [0,1) fully occupied, D={1} -> period-2 tiling of density 1/2
        let w = GridIndicator::full(1, rat(1), 4).unwrap();
        let d = ds(&[1]);
        let t = periodize(&w, &d).unwrap();
        assert_eq!(t.resolution(), 8);
        assert_eq!(*t.period(), rat(2));
        assert_eq!(t.density(), frac(1, 2));
        assert!(torus_violations(&t, &d, SlackMode::Conservative).is_empty());
    }

    #[test]
    fn periodize_half_window() {
        // R=2, window [0,0.5) occupied, D={1} -> period 3, density 1/6
        let w = GridIndicator::from_cells(1, rat(2), 4, &[0]).unwrap();
        let d = ds(&[1]);
        let t = periodize(&w, &d).unwrap();
        assert_eq!(*t.period(), rat(3));
        assert_eq!(t.density(), frac(1, 6));
        assert!(torus_violations(&t, &d, SlackMode::Conservative).is_empty());
    }

    #[test]
    fn periodize_empty_window() {
        let w = GridIndicator::new(2, rat(2), 4).unwrap();
        let t = periodize(&w, &ds(&[1])).unwrap();
        assert_eq!(t.density(), rat(0));
    }

    #[test]
    fn periodize_rejects_bad_window() {
        // two cells at center distance 1 inside the window
        let w = GridIndicator::from_cells(1, rat(2), 4, &[0, 2]).unwrap();
        assert!(matches!(
            periodize(&w, &ds(&[1])),
            Err(AvoidError::Precondition(_))
        ));
    }

    #[test]
    fn periodize_never_beats_known_optimum() {
        // density(periodize(window, {1})) <= m({1}) = 1/2 on the line
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let d = ds(&[1]);
        for _ in 0..30 {
            let k = rng.gen_range(2..12usize);
            let mut w = GridIndicator::new(1, rat(2), k).unwrap();
            for i in 0..k {
                if rng.gen_bool(0.5) {
                    w.set(i, true);
                    if !window_violations(&w, &d).is_empty() {
                        w.set(i, false);
                    }
                }
            }
            let t = periodize(&w, &d).unwrap();
            assert!(t.density() <= frac(1, 2));
        }
    }

    #[test]
    fn shrink_hand_count() {
        // dim=1, k=4, one cell, eps=0.1: fraction 0.7, block of 2 of 4 fine
        // cells, density 1/4 -> 1/8
        let a = GridIndicator::from_cells(1, rat(1), 4, &[1]).unwrap();
        let s = shrink_cells(&a, 0.1).unwrap();
        assert_eq!(s.resolution(), 16);
        assert_eq!(s.density(), frac(1, 8));
        // centered: cells 4..8 of the refinement hold the block at 5..7
        assert!(s.get(5) && s.get(6));
        assert!(!s.get(4) && !s.get(7));
    }

    #[test]
    fn shrink_identity_and_empty() {
        // eps so small the fraction rounds to a full cell: refined input
        let a = GridIndicator::from_cells(1, rat(1), 4, &[2]).unwrap();
        let s = shrink_cells(&a, 1e-18).unwrap();
        assert_eq!(s.density(), a.density());
        let e = GridIndicator::new(2, rat(1), 3).unwrap();
        assert_eq!(shrink_cells(&e, 0.05).unwrap().density(), rat(0));
        assert!(shrink_cells(&a, 0.0).is_err());
    }

    #[test]
    fn shrink_density_bound() {
        // density(out) = density(in) * (b/k)^dim with
        // b = floor((1 - 3^(1/dim) eps) k); never increases, and stays above
        // the granularity estimate (1-3^(1/dim)eps)^dim (1-3/k) for k >= 4
        for (dim, k) in [(1usize, 4usize), (1, 10), (2, 4), (2, 6)] {
            let mut a = GridIndicator::new(dim, rat(1), k).unwrap();
            for i in 0..a.len() {
                if i % 3 == 0 {
                    a.set(i, true);
                }
            }
            let eps = 0.1;
            let s = shrink_cells(&a, eps).unwrap();
            assert!(s.density() <= a.density());
            let shrink = 1.0 - 3f64.powf(1.0 / dim as f64) * eps;
            let floor = to_f64(&a.density()) * shrink.powi(dim as i32) * (1.0 - 3.0 / k as f64);
            assert!(to_f64(&s.density()) >= floor - 1e-12);
        }
    }

    #[test]
    fn shrink_preserves_certificates() {
        // cells {0,1} on L=3, k=6: center distance 1/2 sits on the band edge
        // (strictly outside the open band), wrap distances clear it too
        let d = ds(&[1]);
        let a = GridIndicator::from_cells(1, rat(3), 6, &[0, 1]).unwrap();
        assert!(torus_violations(&a, &d, SlackMode::Conservative).is_empty());
        let s = shrink_cells(&a, 0.1).unwrap();
        assert!(torus_violations(&s, &d, SlackMode::Conservative).is_empty());
    }

    #[test]
    fn rle_roundtrip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
            let k = rng.gen_range(1..12usize);
            let mut g = GridIndicator::new(dim, frac(7, 2), k).unwrap();
            for i in 0..g.len() {
                if rng.gen_bool(0.4) {
                    g.set(i, true);
                }
            }
            let j = g.to_json();
            let back = GridIndicator::from_json(&j).unwrap();
            assert_eq!(g, back);
        }
        assert!(GridIndicator::from_json(&serde_json::json!({
            "dim": 1, "period": "1", "k": 4, "cells": "1,1"
        }))
        .is_err());
    }

    #[test]
    fn pbm_shape() {
        let g = GridIndicator::from_cells(2, rat(1), 3, &[0, 4, 8]).unwrap();
        let pbm = g.to_pbm().unwrap();
        assert!(pbm.starts_with("P1\n3 3\n"));
        assert_eq!(pbm.lines().count(), 5);
    }
}

//! The zooming-out operator on rasters.
//!
//! `Z_delta(eps) A` keeps the cells whose delta-cube occupancy fraction
//! strictly exceeds eps. The cube `Q(center(c), delta)` of a cell center is
//! sampled exactly: for a window of `w = delta * k / L` cells per axis the
//! overlap weights are whole cells, except that an even `w` clips the two
//! boundary cells of the axis at exactly half a cell. Counting half-cells
//! with integer weight 1 (interior cells weight 2) keeps every threshold
//! comparison in exact integer arithmetic, and makes the two containment
//! lemmas checked below hold on the nose for aligned parameters.

use num_traits::Signed;

use crate::error::{AvoidError, Result};
use crate::grid::GridIndicator;
use crate::rat::{rat, Rat};

#[derive(Debug, Clone, PartialEq)]
pub struct ZoomParams {
    /// Window side, same length units as the grid period.
    pub delta: Rat,
    /// Density threshold in (0, 1].
    pub eps: Rat,
}

impl ZoomParams {
    pub fn new(delta: Rat, eps: Rat) -> Result<Self> {
        if !delta.is_positive() {
            return Err(AvoidError::Precondition("delta must be positive".into()));
        }
        if !eps.is_positive() || eps > rat(1) {
            return Err(AvoidError::Precondition("eps must be in (0, 1]".into()));
        }
        Ok(Self { delta, eps })
    }

    /// The window width in whole cells on `grid`; errors when delta is not a
    /// whole number of cells (misaligned parameters are refused rather than
    /// silently rounded).
    pub fn window_cells(&self, grid: &GridIndicator) -> Result<usize> {
        let w = &self.delta / grid.cell_width();
        if *w.denom() != 1 || *w.numer() < 1 {
            return Err(AvoidError::Misaligned(format!(
                "delta = {} is not a positive whole number of cells (cell width {})",
                self.delta,
                grid.cell_width()
            )));
        }
        Ok(*w.numer() as usize)
    }
}

// circular segment sum of len cells starting at `start` (any sign), with
// whole extra cycles counted by multiplicity
fn circular_sum(prefix: &[i64], total: i64, k: usize, start: i64, len: usize) -> i64 {
    let q = (len / k) as i64;
    let r = len % k;
    let s = start.rem_euclid(k as i64) as usize;
    let seg = if s + r <= k {
        prefix[s + r] - prefix[s]
    } else {
        (prefix[k] - prefix[s]) + prefix[s + r - k]
    };
    q * total + seg
}

/// Weighted sliding sums along one axis: interior cells weight 2, the two
/// boundary cells of an even window weight 1; every axis contributes total
/// weight `2w`.
fn axis_weighted_sums(values: &[i64], k: usize, stride: usize, count: usize, w: usize) -> Vec<i64> {
    // gathers `count` independent circular rows of length k, each laid out
    // with the given stride, and returns sums in the same layout
    let mut out = vec![0i64; values.len()];
    let mut prefix = vec![0i64; k + 1];
    for row in 0..count {
        let base = if stride == 1 { row * k } else { row };
        let at = |i: usize| values[base + i * stride];
        for i in 0..k {
            prefix[i + 1] = prefix[i] + at(i);
        }
        let total = prefix[k];
        for i in 0..k {
            let c = i as i64;
            let s = if w % 2 == 1 {
                let h = (w as i64 - 1) / 2;
                2 * circular_sum(&prefix, total, k, c - h, w)
            } else {
                let h = w as i64 / 2;
                circular_sum(&prefix, total, k, c - h, w + 1)
                    + circular_sum(&prefix, total, k, c - h + 1, w - 1)
            };
            out[base + i * stride] = s;
        }
    }
    out
}

/// Exact integer cube-occupancy sums: entry at cell `c` equals
/// `2^dim * |Q(center(c), w * L/k) intersect A| / cellVolume`.
pub(crate) fn weighted_window_sums(a: &GridIndicator, w: usize) -> Vec<i64> {
    let k = a.resolution();
    let mut vals: Vec<i64> = (0..a.len()).map(|i| a.get(i) as i64).collect();
    if a.dim() == 1 {
        vals = axis_weighted_sums(&vals, k, 1, 1, w);
    } else {
        // along y (stride 1 within each row), then along x (stride k)
        vals = axis_weighted_sums(&vals, k, 1, k, w);
        vals = axis_weighted_sums(&vals, k, k, k, w);
    }
    vals
}

/// `Z_delta(eps) A` on the same grid.
pub fn zoom_out(a: &GridIndicator, p: &ZoomParams) -> Result<GridIndicator> {
    let w = p.window_cells(a)?;
    let sums = weighted_window_sums(a, w);
    let dim = a.dim() as u32;
    // occupied fraction > eps  <=>  sum * q > p * 2^dim * w^dim
    let rhs_scale = rat(1i128 << dim) * rat(w as i128).pow(dim as i32);
    let threshold = &p.eps * &rhs_scale;
    let mut out = GridIndicator::new(a.dim(), a.period().clone(), a.resolution())?;
    for (i, &s) in sums.iter().enumerate() {
        if rat(s as i128) > threshold {
            out.set(i, true);
        }
    }
    Ok(out)
}

/// Cellwise dilation by all shifts with `|s_i| <= radius`.
fn dilate(a: &GridIndicator, radius: usize) -> GridIndicator {
    if radius == 0 {
        return a.clone();
    }
    let w = 2 * radius + 1;
    let sums = weighted_window_sums(a, w);
    let mut out = GridIndicator::new(a.dim(), a.period().clone(), a.resolution()).unwrap();
    for (i, &s) in sums.iter().enumerate() {
        if s > 0 {
            out.set(i, true);
        }
    }
    out
}

/// Executable form of the dilation lemma: `Z_delta(eps) A` dilated by the
/// cube `Q(0, (t-1) delta)` (rounded down to whole cells) is contained in
/// `Z_{t delta}(t^-dim eps) A`. Requires `t delta` to be a whole number of
/// cells.
pub fn check_zm_a(a: &GridIndicator, p: &ZoomParams, t: f64) -> Result<bool> {
    if t < 1.0 {
        return Err(AvoidError::Precondition("t must be >= 1".into()));
    }
    let w = p.window_cells(a)?;
    let tw_f = t * w as f64;
    let tw = tw_f.round();
    if (tw_f - tw).abs() > 1e-9 {
        return Err(AvoidError::Misaligned(format!(
            "t * delta = {tw_f} cells is not grid-aligned"
        )));
    }
    let big_w = tw as usize;
    let dim = a.dim() as i32;
    let small = zoom_out(a, p)?;
    let radius = (big_w - w) / 2;
    let dilated = dilate(&small, radius);
    // t^-dim eps = eps * w^dim / W^dim, exactly
    let eps_big = &p.eps * rat(w as i128).pow(dim) / rat(big_w as i128).pow(dim);
    let big = zoom_out(
        a,
        &ZoomParams::new(rat(big_w as i128) * a.cell_width(), eps_big)?,
    )?;
    Ok(dilated.cells().subset_of(big.cells()))
}

/// Executable form of the composition lemma:
/// `Z_{d1}(e1) Z_{d2}(e2) A` is contained in `Z_{d1+d2}(e')` with
/// `e' = e1 e2 d1^dim d2^dim / ((d1+d2)^dim min(d1,d2)^dim)`.
pub fn check_zm_b(a: &GridIndicator, p1: &ZoomParams, p2: &ZoomParams) -> Result<bool> {
    let w1 = p1.window_cells(a)?;
    let w2 = p2.window_cells(a)?;
    let dim = a.dim() as i32;
    let inner = zoom_out(a, p2)?;
    let composed = zoom_out(&inner, p1)?;
    let wsum = w1 + w2;
    let wmin = w1.min(w2);
    let eps_combined = &p1.eps * &p2.eps * rat(w1 as i128).pow(dim) * rat(w2 as i128).pow(dim)
        / (rat(wsum as i128).pow(dim) * rat(wmin as i128).pow(dim));
    let single = zoom_out(
        a,
        &ZoomParams {
            delta: rat(wsum as i128) * a.cell_width(),
            eps: eps_combined,
        },
    )?;
    Ok(composed.cells().subset_of(single.cells()))
}

/// Symmetric box filter (the exact cube average `g * Q_delta` sampled at
/// cell centers) on a real-valued raster.
pub(crate) fn box_filter_f64(values: &[f64], dim: usize, k: usize, w: usize) -> Vec<f64> {
    // reuse the integer machinery's structure with f64 prefix sums
    fn axis(values: &[f64], k: usize, stride: usize, count: usize, w: usize) -> Vec<f64> {
        let mut out = vec![0f64; values.len()];
        let mut prefix = vec![0f64; k + 1];
        for row in 0..count {
            let base = if stride == 1 { row * k } else { row };
            for i in 0..k {
                prefix[i + 1] = prefix[i] + values[base + i * stride];
            }
            let total = prefix[k];
            let circ = |start: i64, len: usize| -> f64 {
                let q = (len / k) as f64;
                let r = len % k;
                let s = start.rem_euclid(k as i64) as usize;
                let seg = if s + r <= k {
                    prefix[s + r] - prefix[s]
                } else {
                    (prefix[k] - prefix[s]) + prefix[s + r - k]
                };
                q * total + seg
            };
            for i in 0..k {
                let c = i as i64;
                let s = if w % 2 == 1 {
                    let h = (w as i64 - 1) / 2;
                    2.0 * circ(c - h, w)
                } else {
                    let h = w as i64 / 2;
                    circ(c - h, w + 1) + circ(c - h + 1, w - 1)
                };
                out[base + i * stride] = s / (2.0 * w as f64);
            }
        }
        out
    }
    let mut vals = values.to_vec();
    if dim == 1 {
        vals = axis(&vals, k, 1, 1, w);
    } else {
        vals = axis(&vals, k, 1, k, w);
        vals = axis(&vals, k, k, k, w);
    }
    vals
}

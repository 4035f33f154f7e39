//! Saturation functionals for discretized admissible measures.
//!
//! An admissible measure is a symmetric probability measure with compact
//! support avoiding the origin whose Fourier transform vanishes at infinity.
//! Here measures are finite atom lists (the continuous measure is the
//! large-atom-count limit), so the pair-correlation integral
//! `I_sigma(A) = integral A(x) A(x+y) dsigma(y) dx` becomes an exact
//! weighted count of occupied-cell pairs at the atom offsets rounded to
//! whole cells. Weights are exact rationals; `I` values are exact rationals
//! times the cell volume, which makes identities like superadditivity over
//! far-apart unions hold on the nose.
//!
//! The Fourier-side error bounds (the cube-kernel convolution lemma and the
//! zooming-out inequality) are evaluated with the measure as discretized:
//! the spectral sup over the realized torus frequencies is computed from the
//! rounded atoms, which keeps the right-hand sides honest upper bounds for
//! exactly the quantity on the left.

use std::f64::consts::PI;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{AvoidError, Result};
use crate::grid::GridIndicator;
use crate::rat::{frac, rat_string, to_f64, Rat};
use crate::zoom::{box_filter_f64, zoom_out, ZoomParams};

/// Closed-form or empirical control of `sup_{|xi|>T} |sigma_hat(xi)|`.
#[derive(Debug, Clone)]
pub enum FourierDecay {
    /// Envelope for the circle of radius r in the plane, whose transform is
    /// the radial Bessel function J0(2 pi r |xi|): every point beyond z is
    /// within pi of a local extremum m >= z - pi, and |J0(m)| <= sqrt(2/(pi m)).
    CircleEnvelope { radius: f64 },
    /// No closed form; only grid-spectrum sups are available.
    None,
}

#[derive(Debug, Clone)]
pub struct AdmissibleMeasure {
    dim: usize,
    atoms: Vec<(Vec<f64>, Rat)>,
    support_radius_min: f64,
    support_radius_max: f64,
    decay: FourierDecay,
}

impl AdmissibleMeasure {
    /// Validates the admissibility invariants: exact symmetry (for every
    /// atom (x, w) the atom (-x, w) is present), weights summing to one, and
    /// a support bounded away from the origin.
    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, Rat)>, decay: FourierDecay) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(AvoidError::Precondition(
                "measure dim must be 1 or 2".into(),
            ));
        }
        if atoms.is_empty() {
            return Err(AvoidError::Precondition("measure needs atoms".into()));
        }
        let mut total = Rat::zero();
        for (x, w) in &atoms {
            if x.len() != dim {
                return Err(AvoidError::Precondition("atom dimension mismatch".into()));
            }
            if w < &Rat::zero() {
                return Err(AvoidError::Precondition("negative atom weight".into()));
            }
            total += w;
            let neg: Vec<f64> = x.iter().map(|c| -c).collect();
            if !atoms.iter().any(|(y, wy)| *y == neg && wy == w) {
                return Err(AvoidError::Precondition(
                    "measure is not symmetric around 0".into(),
                ));
            }
        }
        if total != Rat::one() {
            return Err(AvoidError::Precondition(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        let norms: Vec<f64> = atoms
            .iter()
            .map(|(x, _)| x.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect();
        let rmin = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = norms.iter().cloned().fold(0.0, f64::max);
        if rmin <= 0.0 {
            return Err(AvoidError::Precondition(
                "support must avoid the origin".into(),
            ));
        }
        Ok(Self {
            dim,
            atoms,
            support_radius_min: rmin,
            support_radius_max: rmax,
            decay,
        })
    }

    /// Equally weighted atoms at angles 2 pi j / n on the circle of the
    /// given radius. Antipodal atoms are exact negations so the symmetry
    /// invariant holds bit for bit; n must be even (and at least 4).
    pub fn circle(radius: f64, n_atoms: usize) -> Result<Self> {
        if n_atoms < 4 || n_atoms % 2 != 0 {
            return Err(AvoidError::Precondition(
                "circle measure needs an even atom count >= 4".into(),
            ));
        }
        if radius <= 0.0 {
            return Err(AvoidError::Precondition("radius must be positive".into()));
        }
        let half = n_atoms / 2;
        let w = frac(1, n_atoms as i128);
        let mut atoms = Vec::with_capacity(n_atoms);
        for j in 0..half {
            let th = 2.0 * PI * j as f64 / n_atoms as f64;
            atoms.push((vec![radius * th.cos(), radius * th.sin()], w.clone()));
        }
        for j in 0..half {
            let pos = atoms[j].0.clone();
            atoms.push((vec![-pos[0], -pos[1]], w.clone()));
        }
        Self::new(2, atoms, FourierDecay::CircleEnvelope { radius })
    }

    /// The two-atom measure (delta_{-r} + delta_{r})/2 on the line; its
    /// transform cos(2 pi r xi) does not decay, so only grid sups apply.
    pub fn two_point(radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(AvoidError::Precondition("radius must be positive".into()));
        }
        Self::new(
            1,
            vec![(vec![radius], frac(1, 2)), (vec![-radius], frac(1, 2))],
            FourierDecay::None,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(Vec<f64>, Rat)] {
        &self.atoms
    }

    pub fn support_radius_min(&self) -> f64 {
        self.support_radius_min
    }

    /// diam sigma = max |x| over the support
    pub fn support_radius_max(&self) -> f64 {
        self.support_radius_max
    }

    /// `sigma_hat(xi)` for the exact (unrounded) atoms; real by symmetry.
    pub fn transform(&self, xi: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|(x, w)| {
                let dot: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
                to_f64(w) * (2.0 * PI * dot).cos()
            })
            .sum()
    }

    /// Closed-form bound on `sup_{|xi|>T} |sigma_hat|`, when one exists.
    pub fn decay_bound(&self, t: f64) -> Option<f64> {
        match self.decay {
            FourierDecay::CircleEnvelope { radius } => {
                let z = 2.0 * PI * radius * t;
                if z <= PI + 1e-9 {
                    Some(1.0)
                } else {
                    Some((2.0 / (PI * (z - PI))).sqrt().min(1.0))
                }
            }
            FourierDecay::None => None,
        }
    }
}

fn rounded_shift(pos: &[f64], cw: f64) -> ([i64; 2], f64) {
    let mut s = [0i64; 2];
    let mut dev2 = 0.0;
    for (i, &c) in pos.iter().enumerate() {
        let cells = c / cw;
        s[i] = cells.round() as i64;
        let d = c - s[i] as f64 * cw;
        dev2 += d * d;
    }
    (s, dev2.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationValue {
    pub value: f64,
    /// exact value as a rational string (cell volume times the exact
    /// weighted pair count)
    pub value_exact: String,
    /// (resolution, period, atom count)
    pub discretization: (usize, String, usize),
    /// largest Euclidean displacement of an atom to its grid shift
    pub error_bound: f64,
    #[serde(skip)]
    pub value_rat: Rat,
}

fn cell_volume(a: &GridIndicator) -> Rat {
    let cw = a.cell_width();
    let mut v = Rat::one();
    for _ in 0..a.dim() {
        v *= &cw;
    }
    v
}

fn check_measure_fits(a: &GridIndicator, sigma: &AdmissibleMeasure) -> Result<()> {
    if a.dim() != sigma.dim() {
        return Err(AvoidError::Precondition(format!(
            "raster dim {} != measure dim {}",
            a.dim(),
            sigma.dim()
        )));
    }
    if sigma.support_radius_max >= a.period_f64() / 2.0 {
        return Err(AvoidError::Precondition(format!(
            "measure support radius {} must be < half period {}",
            sigma.support_radius_max,
            a.period_f64() / 2.0
        )));
    }
    Ok(())
}

/// `I_sigma(A)`: the exact weighted count of occupied pairs at the rounded
/// atom offsets, times the cell volume. In strict mode an atom whose
/// rounding displaces it by more than half a cell (Euclidean) is an error.
pub fn i_sigma(
    a: &GridIndicator,
    sigma: &AdmissibleMeasure,
    strict: bool,
) -> Result<SaturationValue> {
    check_measure_fits(a, sigma)?;
    let cw = a.cell_width_f64();
    let mut weighted = Rat::zero();
    let mut max_dev = 0.0f64;
    for (pos, w) in &sigma.atoms {
        let (s, dev) = rounded_shift(pos, cw);
        if strict && dev > cw / 2.0 {
            return Err(AvoidError::Precondition(format!(
                "atom {pos:?} rounds {dev:.6} away (more than half a cell) in strict mode"
            )));
        }
        max_dev = max_dev.max(dev);
        let count = a.count_pairs_with_shift(s);
        weighted += w * Rat::from_integer(count as i128);
    }
    let value_rat = weighted * cell_volume(a);
    Ok(SaturationValue {
        value: to_f64(&value_rat),
        value_exact: rat_string(&value_rat),
        discretization: (a.resolution(), rat_string(a.period()), sigma.atoms.len()),
        error_bound: max_dev,
        value_rat,
    })
}

/// `I_{sigma1 OR sigma2}(A)`: the triple correlation
/// `sum over atom pairs of w1 w2 #{c : A(c), A(c+s1), A(c+s2)}` times the
/// cell volume. Zero whenever A avoids either support around every point.
pub fn i_or(
    a: &GridIndicator,
    s1: &AdmissibleMeasure,
    s2: &AdmissibleMeasure,
    strict: bool,
) -> Result<SaturationValue> {
    check_measure_fits(a, s1)?;
    check_measure_fits(a, s2)?;
    let cw = a.cell_width_f64();
    let mut max_dev = 0.0f64;
    let mut shifts2 = Vec::with_capacity(s2.atoms.len());
    for (pos, w) in &s2.atoms {
        let (s, dev) = rounded_shift(pos, cw);
        if strict && dev > cw / 2.0 {
            return Err(AvoidError::Precondition("atom rounding too coarse".into()));
        }
        max_dev = max_dev.max(dev);
        shifts2.push((a.shifted(s), w.clone()));
    }
    let mut weighted = Rat::zero();
    for (pos, w1) in &s1.atoms {
        let (s, dev) = rounded_shift(pos, cw);
        if strict && dev > cw / 2.0 {
            return Err(AvoidError::Precondition("atom rounding too coarse".into()));
        }
        max_dev = max_dev.max(dev);
        let sh1 = a.shifted(s);
        for (sh2, w2) in &shifts2 {
            let count = a.cells().and3_count(sh1.cells(), sh2.cells());
            weighted += w1 * w2 * Rat::from_integer(count as i128);
        }
    }
    let value_rat = weighted * cell_volume(a);
    Ok(SaturationValue {
        value: to_f64(&value_rat),
        value_exact: rat_string(&value_rat),
        discretization: (
            a.resolution(),
            rat_string(a.period()),
            s1.atoms.len() + s2.atoms.len(),
        ),
        error_bound: max_dev,
        value_rat,
    })
}

/// Absolute values of the discretized measure's transform on the torus
/// frequency grid, arranged for `sup over |xi| > T` queries.
#[derive(Debug, Clone)]
pub struct GridSpectrum {
    /// (|xi|, |sigma_hat_grid|) sorted by |xi|
    entries: Vec<(f64, f64)>,
    suffix_max: Vec<f64>,
}

impl GridSpectrum {
    pub fn sup_above(&self, t: f64) -> f64 {
        let idx = self.entries.partition_point(|e| e.0 <= t);
        if idx >= self.entries.len() {
            0.0
        } else {
            self.suffix_max[idx]
        }
    }
}

/// Evaluates the rounded-atom transform on every torus frequency
/// `xi = m/L`, `m` in the centered representative box.
pub fn grid_spectrum(sigma: &AdmissibleMeasure, a: &GridIndicator) -> Result<GridSpectrum> {
    check_measure_fits(a, sigma)?;
    let k = a.resolution() as i64;
    let l = a.period_f64();
    let cw = a.cell_width_f64();
    let shifts: Vec<([i64; 2], f64)> = sigma
        .atoms
        .iter()
        .map(|(pos, w)| (rounded_shift(pos, cw).0, to_f64(w)))
        .collect();
    let centered = |m: i64| -> i64 {
        if m > k / 2 {
            m - k
        } else {
            m
        }
    };
    let freqs: Vec<[i64; 2]> = if a.dim() == 1 {
        (0..k).map(|m| [centered(m), 0]).collect()
    } else {
        let mut v = Vec::with_capacity((k * k) as usize);
        for mx in 0..k {
            for my in 0..k {
                v.push([centered(mx), centered(my)]);
            }
        }
        v
    };
    let mut entries: Vec<(f64, f64)> = Vec::with_capacity(freqs.len());
    for m in freqs {
        let xi = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt() / l;
        let mut val = 0.0;
        for (s, w) in &shifts {
            let dot = (m[0] * s[0] + m[1] * s[1]) as f64;
            val += w * (2.0 * PI * dot / k as f64).cos();
        }
        entries.push((xi, val.abs()));
    }
    entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut suffix_max = vec![0.0; entries.len()];
    let mut run = 0.0f64;
    for i in (0..entries.len()).rev() {
        run = run.max(entries[i].1);
        suffix_max[i] = run;
    }
    Ok(GridSpectrum {
        entries,
        suffix_max,
    })
}

/// The documented absolute constant in
/// `|Q_delta_hat(xi) - 1| <= c1 delta^2 |xi|^2`: per axis `pi^2/3` is ample
/// for the symmetric cell-overlap filter, summed over axes.
pub fn c1_constant(dim: usize) -> f64 {
    dim as f64 * PI * PI / 3.0
}

/// The symmetric box filter's frequency multiplier on the grid (per-axis
/// product, real by symmetry).
pub fn box_multiplier(dim: usize, k: usize, w: usize, m: [i64; 2]) -> f64 {
    let axis = |mi: i64| -> f64 {
        let mut num = 0.0;
        if w % 2 == 1 {
            let h = (w as i64 - 1) / 2;
            for o in -h..=h {
                num += 2.0 * (2.0 * PI * (mi * o) as f64 / k as f64).cos();
            }
        } else {
            let h = w as i64 / 2;
            for o in -h..=h {
                let wt = if o == -h || o == h { 1.0 } else { 2.0 };
                num += wt * (2.0 * PI * (mi * o) as f64 / k as f64).cos();
            }
        }
        num / (2.0 * w as f64)
    };
    let mut b = axis(m[0]);
    if dim == 2 {
        b *= axis(m[1]);
    }
    b
}

fn grid_to_f64(a: &GridIndicator) -> Vec<f64> {
    (0..a.len()).map(|i| a.get(i) as u8 as f64).collect()
}

fn l2_norm(values: &[f64], cellvol: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * cellvol).sqrt()
}

/// `I(f, h)` for a bit raster f and a real raster h: the smeared correlation
/// `sum_c f(c) (sum_j w_j h(c + s_j)) cellvol`.
fn i_cross(f: &GridIndicator, h: &[f64], sigma: &AdmissibleMeasure) -> f64 {
    let k = f.resolution() as i64;
    let cw = f.cell_width_f64();
    let cellvol = cw.powi(f.dim() as i32);
    let mut smeared = vec![0.0f64; h.len()];
    for (pos, w) in &sigma.atoms {
        let (s, _) = rounded_shift(pos, cw);
        let wf = to_f64(w);
        if f.dim() == 1 {
            for (c, sm) in smeared.iter_mut().enumerate() {
                let j = (c as i64 + s[0]).rem_euclid(k) as usize;
                *sm += wf * h[j];
            }
        } else {
            let ku = f.resolution();
            for x in 0..ku {
                let jx = (x as i64 + s[0]).rem_euclid(k) as usize;
                for y in 0..ku {
                    let jy = (y as i64 + s[1]).rem_euclid(k) as usize;
                    smeared[x * ku + y] += wf * h[jx * ku + jy];
                }
            }
        }
    }
    let mut total = 0.0;
    for c in f.cells().iter_ones() {
        total += smeared[c];
    }
    total * cellvol
}

/// Both sides of the cube-kernel convolution bound:
/// `lhs = |I(f, g) - I(f, g * Q_delta)|`,
/// `rhs = (c1 delta^2 T^2 + 2 sup_{|xi|>T} |sigma_hat|) ||f||_2 ||g||_2`,
/// with the spectral sup taken over the realized grid frequencies.
pub fn convlem_gap(
    f: &GridIndicator,
    g: &GridIndicator,
    sigma: &AdmissibleMeasure,
    delta_cells: usize,
    t: f64,
    spectrum: &GridSpectrum,
) -> Result<(f64, f64)> {
    check_measure_fits(f, sigma)?;
    if delta_cells == 0 {
        return Err(AvoidError::Precondition(
            "delta must be at least one cell".into(),
        ));
    }
    if f.resolution() != g.resolution() || f.dim() != g.dim() || f.period() != g.period() {
        return Err(AvoidError::Precondition(
            "f and g live on different grids".into(),
        ));
    }
    let cw = f.cell_width_f64();
    let cellvol = cw.powi(f.dim() as i32);
    let g_plain = grid_to_f64(g);
    let g_box = box_filter_f64(&g_plain, g.dim(), g.resolution(), delta_cells);
    let i_plain = i_cross(f, &g_plain, sigma);
    let i_box = i_cross(f, &g_box, sigma);
    let lhs = (i_plain - i_box).abs();
    let delta_len = delta_cells as f64 * cw;
    let c1 = c1_constant(f.dim());
    let norm_f = l2_norm(&grid_to_f64(f), cellvol);
    let norm_g = l2_norm(&g_plain, cellvol);
    let rhs = (c1 * delta_len * delta_len * t * t + 2.0 * spectrum.sup_above(t)) * norm_f * norm_g;
    Ok((lhs, rhs))
}

/// Both sides of the zooming-out inequality with `T = delta^{-1/2}`:
/// `I_sigma(A) >= eps^2 I_sigma(Z_delta(eps) A) - 2 (c1 delta^2 T^2 + 2 sup) L^dim`.
/// Returns `(I_sigma(A), right-hand side)`.
pub fn zoomingout_inequality(
    a: &GridIndicator,
    sigma: &AdmissibleMeasure,
    delta_cells: usize,
    eps: Rat,
    spectrum: &GridSpectrum,
) -> Result<(f64, f64)> {
    check_measure_fits(a, sigma)?;
    if delta_cells == 0 {
        return Err(AvoidError::Precondition(
            "delta must be at least one cell".into(),
        ));
    }
    let cw = a.cell_width_f64();
    let delta_len = delta_cells as f64 * cw;
    let params = ZoomParams::new(
        a.cell_width() * Rat::from_integer(delta_cells as i128),
        eps.clone(),
    )?;
    let z = zoom_out(a, &params)?;
    let i_a = i_sigma(a, sigma, false)?.value;
    let i_z = i_sigma(&z, sigma, false)?.value;
    let t = 1.0 / delta_len.sqrt();
    let c1 = c1_constant(a.dim());
    let vol = a.period_f64().powi(a.dim() as i32);
    let err = 2.0 * (c1 * delta_len * delta_len * t * t + 2.0 * spectrum.sup_above(t)) * vol;
    let eps_f = to_f64(&eps);
    Ok((i_a, eps_f * eps_f * i_z - err))
}

//! Certified two-sided bounds on m(D) for finite integer distance sets.
//!
//! Lower bounds come from independence ratios of circulant graphs (a maximum
//! independent set of C_n(D mod n) lifts to a D-avoiding n-periodic set of
//! the same density); upper bounds from windowed averaging (any window of
//! length n of a D-avoiding set is independent in the graph on [0..n-1] with
//! edges at differences in D). All densities are exact rationals.

use std::collections::BTreeSet;

use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::distance::DistanceSet;
use crate::error::{AvoidError, Result};
use crate::rat::{frac, rat_string, to_f64, Rat};
use crate::solver::{mis_with_witness, mis_size, ConflictGraph, VertexSet};

/// Default node budget per independence-number computation.
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone)]
pub struct CirculantInstance {
    pub n: usize,
    /// Nonzero residues, closed under negation mod n.
    pub connections: BTreeSet<usize>,
    /// Some forbidden distance is a multiple of n; every residue class then
    /// contains a forbidden pair and no vertex is selectable.
    pub zero_loop: bool,
}

impl CirculantInstance {
    pub fn new(n: usize, d: &DistanceSet) -> Result<Self> {
        if n == 0 {
            return Err(AvoidError::Precondition("period n must be >= 1".into()));
        }
        let vals = d.integer_values()?;
        let mut connections = BTreeSet::new();
        let mut zero_loop = false;
        for v in vals {
            let r = (v as usize) % n;
            if r == 0 {
                zero_loop = true;
            } else {
                connections.insert(r);
                connections.insert(n - r);
            }
        }
        Ok(Self {
            n,
            connections,
            zero_loop,
        })
    }

    pub fn graph(&self) -> Result<ConflictGraph> {
        let mut g = ConflictGraph::new(self.n)?;
        for i in 0..self.n {
            for &c in &self.connections {
                g.add_edge(i, (i + c) % self.n);
            }
        }
        Ok(g)
    }
}

/// Maximum independent set of the circulant graph plus the deterministic
/// witness (smallest bitmask value among maximum sets).
pub fn alpha_circulant(inst: &CirculantInstance, budget: u64) -> Result<(usize, Vec<usize>, u64)> {
    if inst.zero_loop {
        return Ok((0, Vec::new(), 0));
    }
    let g = inst.graph()?;
    let (alpha, witness, visited) = mis_with_witness(&g, &VertexSet::all(inst.n), budget)?;
    Ok((alpha, witness.to_vec(), visited))
}

/// Independence number of the windowed distance graph on [0..n-1].
pub fn alpha_interval(n: usize, d: &DistanceSet, budget: u64) -> Result<usize> {
    if n == 0 {
        return Err(AvoidError::Precondition("window n must be >= 1".into()));
    }
    let vals = d.integer_values()?;
    let mut g = ConflictGraph::new(n)?;
    for i in 0..n {
        for &v in &vals {
            let j = i + v as usize;
            if j < n {
                g.add_edge(i, j);
            }
        }
    }
    let (alpha, _) = mis_size(&g, &VertexSet::all(n), budget)?;
    Ok(alpha)
}

/// Checks a lower-bound certificate in O(n^2): the witness must be
/// independent in C_n(D).
pub fn verify_circulant_witness(n: usize, d: &DistanceSet, witness: &[usize]) -> bool {
    let Ok(vals) = d.integer_values() else {
        return false;
    };
    if n == 0 {
        return false;
    }
    let residues: BTreeSet<usize> = vals.iter().map(|&v| (v as usize) % n).collect();
    for (i, &a) in witness.iter().enumerate() {
        if a >= n {
            return false;
        }
        if residues.contains(&0) {
            return false; // every vertex carries a loop; only the empty witness is valid
        }
        for &b in &witness[i + 1..] {
            let diff = (b + n - a) % n;
            if residues.contains(&diff) || residues.contains(&((n - diff) % n)) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct OneDimBounds {
    pub distances: Vec<String>,
    pub n_max: usize,
    /// max over n <= n_max of alpha(C_n)/n
    pub lower: String,
    /// min over n <= n_max of alpha(I_n)/n
    pub upper: String,
    pub lower_float: f64,
    pub upper_float: f64,
    /// period and independent residues realizing the lower bound
    pub lower_witness_n: usize,
    pub lower_witness: Vec<usize>,
    pub upper_witness_n: usize,
    /// lower == upper: the bracket pins m(D) exactly
    pub exact: bool,
    pub nodes_visited: u64,
    #[serde(skip)]
    pub lower_rat: Rat,
    #[serde(skip)]
    pub upper_rat: Rat,
}

/// Certified bracket lower <= m(D) <= upper from all periods/windows up to
/// n_max. The per-n searches are independent; the reduction is a
/// deterministic max/min with ties broken toward smaller n, so results do
/// not depend on thread count.
pub fn bounds_1d(d: &DistanceSet, n_max: usize, budget: u64) -> Result<OneDimBounds> {
    let vals = d.integer_values()?;
    let need = *vals.iter().max().unwrap() as usize + 1;
    if n_max < need {
        return Err(AvoidError::Precondition(format!(
            "n_max must be at least max(D)+1 = {need}"
        )));
    }
    let per_n: Vec<Result<(usize, (usize, Vec<usize>, u64), usize)>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let inst = CirculantInstance::new(n, d)?;
            let circ = alpha_circulant(&inst, budget)?;
            let int = alpha_interval(n, d, budget)?;
            Ok((n, circ, int))
        })
        .collect();

    let mut lower = Rat::from_integer(0);
    let mut lower_witness_n = 0usize;
    let mut lower_witness = Vec::new();
    let mut upper = Rat::one();
    let mut upper_witness_n = 0usize;
    let mut nodes = 0u64;
    for row in per_n {
        let (n, (ac, wit, used), ai) = row?;
        nodes = nodes.saturating_add(used);
        let lo = frac(ac as i128, n as i128);
        if lo > lower || lower_witness_n == 0 {
            lower = lo;
            lower_witness_n = n;
            lower_witness = wit;
        }
        let hi = frac(ai as i128, n as i128);
        if hi < upper || upper_witness_n == 0 {
            upper = hi;
            upper_witness_n = n;
        }
    }
    if lower > upper {
        return Err(AvoidError::Precondition(format!(
            "soundness violation: lower {lower} > upper {upper}"
        )));
    }
    Ok(OneDimBounds {
        distances: d.to_strings(),
        n_max,
        lower: rat_string(&lower),
        upper: rat_string(&upper),
        lower_float: to_f64(&lower),
        upper_float: to_f64(&upper),
        lower_witness_n,
        lower_witness,
        upper_witness_n,
        exact: lower == upper,
        nodes_visited: nodes,
        lower_rat: lower,
        upper_rat: upper,
    })
}

/// The k-neighborhood D^k = {x in Z : |x - y| <= k for some y in D}.
pub fn neighborhood(d: &DistanceSet, k: i64) -> Result<DistanceSet> {
    if k < 0 {
        return Err(AvoidError::Precondition("k must be >= 0".into()));
    }
    let vals = d.integer_values()?;
    let min = *vals.iter().min().unwrap();
    if k >= min {
        return Err(AvoidError::Precondition(format!(
            "k = {k} >= min(D) = {min} would introduce nonpositive distances"
        )));
    }
    let mut out = BTreeSet::new();
    for v in vals {
        for x in v - k..=v + k {
            out.insert(x);
        }
    }
    DistanceSet::from_integers(&out.into_iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum ProductVerdict {
    /// certified upper bound beats the certified product reference
    Verified,
    /// not resolvable at this n_max (or the solver hit its budget)
    Undecided(String),
    /// this t is incompatible with k (neighborhood would reach 0)
    Invalid(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductRow {
    pub t: i64,
    pub lower: String,
    pub upper: String,
    /// certified lower bound on m(D1) m(D2)
    pub reference: String,
    pub verdict: ProductVerdict,
    #[serde(skip)]
    pub upper_rat: Option<Rat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductExperiment {
    pub k: i64,
    pub n_max: usize,
    pub m1_lower: String,
    pub m2_lower: String,
    pub rows: Vec<ProductRow>,
}

/// Thickened-union experiment: per t, certified bounds on
/// m(D1 union (t D2)^k) against the certified product reference.
/// The hypothesis `k even, diam D1 - k m(D1) <= -1` is checked with the
/// certified lower bound for m(D1).
pub fn product_experiment_1d(
    d1: &DistanceSet,
    d2: &DistanceSet,
    k: i64,
    t_list: &[i64],
    n_max: usize,
    budget: u64,
) -> Result<ProductExperiment> {
    if k < 0 || k % 2 != 0 {
        return Err(AvoidError::Precondition(format!(
            "k must be even and nonnegative, got {k}"
        )));
    }
    let b1 = bounds_1d(d1, n_max, budget)?;
    let b2 = bounds_1d(d2, n_max, budget)?;
    // diam D1 - k * lower(m(D1)) <= -1, in exact arithmetic
    let hypothesis = d1.diam() - Rat::from_integer(k as i128) * &b1.lower_rat;
    if hypothesis > Rat::from_integer(-1) {
        return Err(AvoidError::Precondition(format!(
            "hypothesis failed: diam(D1) - k*m(D1) = {} > -1 (k = {k} too small)",
            hypothesis
        )));
    }
    let reference = &b1.lower_rat * &b2.lower_rat;
    let rows: Vec<ProductRow> = t_list
        .iter()
        .map(|&t| {
            if t < 1 {
                return ProductRow {
                    t,
                    lower: String::new(),
                    upper: String::new(),
                    reference: rat_string(&reference),
                    verdict: ProductVerdict::Invalid("t must be >= 1".into()),
                    upper_rat: None,
                };
            }
            let scaled = match d2.scale(&Rat::from_integer(t as i128)) {
                Ok(s) => s,
                Err(e) => {
                    return ProductRow {
                        t,
                        lower: String::new(),
                        upper: String::new(),
                        reference: rat_string(&reference),
                        verdict: ProductVerdict::Invalid(e.to_string()),
                        upper_rat: None,
                    }
                }
            };
            let combined = match neighborhood(&scaled, k).and_then(|nb| d1.union(&nb)) {
                Ok(c) => c,
                Err(e) => {
                    return ProductRow {
                        t,
                        lower: String::new(),
                        upper: String::new(),
                        reference: rat_string(&reference),
                        verdict: ProductVerdict::Invalid(e.to_string()),
                        upper_rat: None,
                    }
                }
            };
            match bounds_1d(&combined, n_max, budget) {
                Ok(b) => {
                    let verdict = if b.upper_rat < reference {
                        ProductVerdict::Verified
                    } else {
                        ProductVerdict::Undecided(format!("upper {} >= reference at n_max {n_max}", b.upper))
                    };
                    ProductRow {
                        t,
                        lower: b.lower,
                        upper: b.upper.clone(),
                        reference: rat_string(&reference),
                        verdict,
                        upper_rat: Some(b.upper_rat),
                    }
                }
                Err(AvoidError::SolverLimit { n, visited }) => ProductRow {
                    t,
                    lower: String::new(),
                    upper: String::new(),
                    reference: rat_string(&reference),
                    verdict: ProductVerdict::Undecided(format!(
                        "solver limit at n = {n} after {visited} nodes"
                    )),
                    upper_rat: None,
                },
                Err(e) => ProductRow {
                    t,
                    lower: String::new(),
                    upper: String::new(),
                    reference: rat_string(&reference),
                    verdict: ProductVerdict::Invalid(e.to_string()),
                    upper_rat: None,
                },
            }
        })
        .collect();
    Ok(ProductExperiment {
        k,
        n_max,
        m1_lower: rat_string(&b1.lower_rat),
        m2_lower: rat_string(&b2.lower_rat),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, rat};

    fn ds(vals: &[i64]) -> DistanceSet {
        DistanceSet::from_integers(vals).unwrap()
    }

    const B: u64 = 1 << 24;

    #[test]
    fn alpha_circulant_small() {
        // n=6, D={1}: alternating set
        let inst = CirculantInstance::new(6, &ds(&[1])).unwrap();
        let (a, w, _) = alpha_circulant(&inst, B).unwrap();
        assert_eq!(a, 3);
        assert_eq!(w, vec![0, 2, 4]);
        // n=5, D={1}: brute force over 32 subsets says 2
        let inst = CirculantInstance::new(5, &ds(&[1])).unwrap();
        assert_eq!(alpha_circulant(&inst, B).unwrap().0, 2);
        // n=9, D={1,2}: {0,3,6}
        let inst = CirculantInstance::new(9, &ds(&[1, 2])).unwrap();
        let (a, w, _) = alpha_circulant(&inst, B).unwrap();
        assert_eq!(a, 3);
        assert_eq!(w, vec![0, 3, 6]);
        assert!(verify_circulant_witness(9, &ds(&[1, 2]), &w));
    }

    #[test]
    fn zero_loop_period() {
        // d divisible by n: no residue is selectable
        let inst = CirculantInstance::new(3, &ds(&[6])).unwrap();
        assert!(inst.zero_loop);
        assert_eq!(alpha_circulant(&inst, B).unwrap().0, 0);
    }

    #[test]
    fn alpha_interval_small() {
        assert_eq!(alpha_interval(2, &ds(&[1]), B).unwrap(), 1);
        assert_eq!(alpha_interval(3, &ds(&[1, 2]), B).unwrap(), 1);
        assert_eq!(alpha_interval(1, &ds(&[1, 7]), B).unwrap(), 1);
    }

    #[test]
    fn bounds_close_for_small_sets() {
        let b = bounds_1d(&ds(&[1]), 4, B).unwrap();
        assert_eq!((b.lower.as_str(), b.upper.as_str()), ("1/2", "1/2"));
        assert!(b.exact);
        assert!(verify_circulant_witness(
            b.lower_witness_n,
            &ds(&[1]),
            &b.lower_witness
        ));

        let b = bounds_1d(&ds(&[1, 2]), 6, B).unwrap();
        assert_eq!((b.lower.as_str(), b.upper.as_str()), ("1/3", "1/3"));

        let b = bounds_1d(&ds(&[1, 5]), 10, B).unwrap();
        assert_eq!((b.lower.as_str(), b.upper.as_str()), ("1/2", "1/2"));
    }

    #[test]
    fn bounds_monotone_in_n_max() {
        let d = ds(&[2, 3]);
        let mut prev_lower = rat(0);
        let mut prev_upper = rat(1);
        for n_max in 4..=14 {
            let b = bounds_1d(&d, n_max, B).unwrap();
            assert!(b.lower_rat >= prev_lower);
            assert!(b.upper_rat <= prev_upper);
            assert!(b.lower_rat <= b.upper_rat);
            prev_lower = b.lower_rat;
            prev_upper = b.upper_rat;
        }
    }

    /// independent oracle: max density of an n-periodic D-avoiding set over
    /// all periods n <= cap, by subset enumeration over residues
    fn periodic_oracle(d: &DistanceSet, cap: usize) -> Rat {
        let vals = d.integer_values().unwrap();
        let mut best = rat(0);
        for n in 1..=cap {
            'mask: for mask in 1u32..(1 << n) {
                let cells: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                for &a in &cells {
                    for &b in &cells {
                        for &v in &vals {
                            if (v as usize) % n == (b + n - a) % n {
                                continue 'mask;
                            }
                        }
                    }
                }
                let dens = frac(cells.len() as i128, n as i128);
                if dens > best {
                    best = dens;
                }
            }
        }
        best
    }

    #[test]
    fn sandwich_matches_periodic_oracle() {
        for vals in [vec![1], vec![1, 2], vec![2], vec![1, 2, 3]] {
            let d = ds(&vals);
            let oracle = periodic_oracle(&d, 12);
            let b = bounds_1d(&d, 12, B).unwrap();
            assert_eq!(b.lower_rat, oracle, "lower vs oracle for {vals:?}");
            assert!(b.exact, "gap should close for {vals:?}");
        }
    }

    #[test]
    fn scale_invariance_on_closed_instances() {
        // once the bracket is exact, scaling D and n_max together reproduces
        // the same rationals
        for (vals, n_max) in [
            (vec![1], 4usize),
            (vec![1, 2], 6),
            (vec![2], 4),
            (vec![1, 2, 3], 8),
        ] {
            let d = ds(&vals);
            let base = bounds_1d(&d, n_max, B).unwrap();
            for c in [2i64, 3] {
                let scaled_vals: Vec<i64> = vals.iter().map(|v| v * c).collect();
                let sd = ds(&scaled_vals);
                let sb = bounds_1d(&sd, n_max * c as usize, B).unwrap();
                assert_eq!(sb.lower_rat, base.lower_rat, "{vals:?} x{c}");
                assert_eq!(sb.upper_rat, base.upper_rat, "{vals:?} x{c}");
            }
        }
    }

    #[test]
    fn neighborhood_examples() {
        assert_eq!(
            neighborhood(&ds(&[5]), 1).unwrap().integer_values().unwrap(),
            vec![4, 5, 6]
        );
        assert_eq!(
            neighborhood(&ds(&[5]), 0).unwrap().integer_values().unwrap(),
            vec![5]
        );
        assert_eq!(
            neighborhood(&ds(&[3, 10]), 2)
                .unwrap()
                .integer_values()
                .unwrap(),
            vec![1, 2, 3, 4, 5, 8, 9, 10, 11, 12]
        );
        assert!(neighborhood(&ds(&[3]), 3).is_err());
    }

    #[test]
    fn product_hypothesis_check() {
        // k=0: 1 - 0 > -1, refused with the failed inequality named
        let err = product_experiment_1d(&ds(&[1]), &ds(&[1]), 0, &[10], 8, B).unwrap_err();
        match err {
            AvoidError::Precondition(msg) => assert!(msg.contains("-1")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn product_strict_gap_small_t() {
        // D1=D2={1}, k=4, t=10, n_max=30: upper < 1/4 strictly
        let exp = product_experiment_1d(&ds(&[1]), &ds(&[1]), 4, &[10], 30, B).unwrap();
        let row = &exp.rows[0];
        assert_eq!(row.verdict, ProductVerdict::Verified);
        assert_eq!(row.reference, "1/4");
        let upper = row.upper_rat.clone().unwrap();
        assert!(upper < frac(1, 4));
        // probe oracle value: min window ratio is 3/19
        assert_eq!(row.upper, "3/19");
    }

    #[test]
    fn product_degenerate_t() {
        // t=1 with k >= t*min(D2) is reported per-row, not a global error
        let exp = product_experiment_1d(&ds(&[1]), &ds(&[1]), 4, &[1, 10], 20, B).unwrap();
        assert!(matches!(exp.rows[0].verdict, ProductVerdict::Invalid(_)));
        assert!(!matches!(exp.rows[1].verdict, ProductVerdict::Invalid(_)));
        // t=1 with a wide D2 stays well-formed: combined = D1 u D2^k
        let exp2 = product_experiment_1d(&ds(&[1]), &ds(&[10]), 4, &[1], 22, B).unwrap();
        assert!(!matches!(exp2.rows[0].verdict, ProductVerdict::Invalid(_)));
        assert!(!exp2.rows[0].upper.is_empty());
    }
}

//! Exact maximum-independent-set solver on small graphs (up to 256
//! vertices), used for circulant and windowed distance graphs and for the
//! exhaustive granular enumeration.
//!
//! Branch and bound with a greedy clique-cover bound. Witnesses are pinned
//! deterministically: among all maximum independent sets, the one whose
//! bitmask (bit i = vertex i) has the smallest integer value is returned,
//! found by deciding vertices from the highest index down with feasibility
//! queries. Results are independent of thread count by construction.

use crate::error::{AvoidError, Result};

pub const MAX_VERTICES: usize = 256;
const WORDS: usize = MAX_VERTICES / 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VertexSet {
    words: [u64; WORDS],
}

impl VertexSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(n: usize) -> Self {
        let mut s = Self::default();
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn and(&self, o: &VertexSet) -> VertexSet {
        let mut r = *self;
        for (a, b) in r.words.iter_mut().zip(&o.words) {
            *a &= b;
        }
        r
    }

    pub fn and_count(&self, o: &VertexSet) -> usize {
        self.words
            .iter()
            .zip(&o.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn minus(&self, o: &VertexSet) -> VertexSet {
        let mut r = *self;
        for (a, b) in r.words.iter_mut().zip(&o.words) {
            *a &= !b;
        }
        r
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConflictGraph {
    n: usize,
    adj: Vec<VertexSet>,
}

impl ConflictGraph {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_VERTICES {
            return Err(AvoidError::TooLarge(format!(
                "solver handles at most {MAX_VERTICES} vertices, got {n}"
            )));
        }
        Ok(Self {
            n,
            adj: vec![VertexSet::empty(); n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.adj[a].insert(b);
        self.adj[b].insert(a);
    }

    pub fn neighbors(&self, v: usize) -> &VertexSet {
        &self.adj[v]
    }

    pub fn is_independent(&self, s: &VertexSet) -> bool {
        s.iter().all(|v| self.adj[v].and_count(s) == 0)
    }
}

struct Search<'a> {
    g: &'a ConflictGraph,
    best: usize,
    nodes: u64,
    budget: u64,
    stop_at: Option<usize>,
}

impl<'a> Search<'a> {
    /// greedy clique cover of p: an upper bound on alpha(G[p])
    fn cover_bound(&self, p: &VertexSet) -> usize {
        let mut cliques: Vec<VertexSet> = Vec::new();
        // common: the set of vertices adjacent to ALL members of the clique
        let mut commons: Vec<VertexSet> = Vec::new();
        for v in p.iter() {
            let mut placed = false;
            for (c, common) in cliques.iter_mut().zip(commons.iter_mut()) {
                if common.contains(v) {
                    c.insert(v);
                    *common = common.and(&self.g.adj[v]);
                    placed = true;
                    break;
                }
            }
            if !placed {
                let mut c = VertexSet::empty();
                c.insert(v);
                cliques.push(c);
                commons.push(self.g.adj[v]);
            }
        }
        cliques.len()
    }

    fn bb(&mut self, p: VertexSet, cur: usize) -> Result<()> {
        if self.nodes >= self.budget {
            return Err(AvoidError::SolverLimit {
                n: self.g.n,
                visited: self.nodes,
            });
        }
        self.nodes += 1;
        if let Some(t) = self.stop_at {
            if self.best >= t {
                return Ok(());
            }
        }
        if p.is_empty() {
            if cur > self.best {
                self.best = cur;
            }
            return Ok(());
        }
        if cur + self.cover_bound(&p) <= self.best {
            return Ok(());
        }
        // pivot: max degree within p
        let mut pivot = usize::MAX;
        let mut pivot_deg = usize::MAX;
        for v in p.iter() {
            let d = self.g.adj[v].and_count(&p);
            if pivot == usize::MAX || d > pivot_deg {
                pivot = v;
                pivot_deg = d;
            }
        }
        // include pivot
        let mut incl = p.minus(&self.g.adj[pivot]);
        incl.remove(pivot);
        self.bb(incl, cur + 1)?;
        // exclude pivot
        let mut excl = p;
        excl.remove(pivot);
        self.bb(excl, cur)
    }
}

/// alpha(G[p]) with a node budget.
pub fn mis_size(g: &ConflictGraph, p: &VertexSet, budget: u64) -> Result<(usize, u64)> {
    let mut s = Search {
        g,
        best: 0,
        nodes: 0,
        budget,
        stop_at: None,
    };
    s.bb(*p, 0)?;
    Ok((s.best, s.nodes))
}

/// Does G[p] contain an independent set of size >= target?
fn mis_at_least(g: &ConflictGraph, p: &VertexSet, target: usize, budget: u64) -> Result<(bool, u64)> {
    if target == 0 {
        return Ok((true, 0));
    }
    let mut s = Search {
        g,
        best: 0,
        nodes: 0,
        budget,
        stop_at: Some(target),
    };
    s.bb(*p, 0)?;
    Ok((s.best >= target, s.nodes))
}

/// alpha over `p` plus the witness of that size whose bitmask value is
/// smallest (vertices decided from the highest index down).
pub fn mis_with_witness(
    g: &ConflictGraph,
    p: &VertexSet,
    budget: u64,
) -> Result<(usize, VertexSet, u64)> {
    let (alpha, mut used) = mis_size(g, p, budget)?;
    if alpha == 0 {
        return Ok((0, VertexSet::empty(), used));
    }
    let mut allowed = *p;
    let mut required = VertexSet::empty();
    for i in (0..g.n).rev() {
        if !allowed.contains(i) || required.contains(i) {
            continue;
        }
        // candidates that could extend `required` if i is excluded
        let mut cand = allowed;
        cand.remove(i);
        for r in required.iter() {
            cand = cand.minus(&g.adj[r]);
            cand.remove(r);
        }
        let target = alpha - required.count();
        let (feasible, nodes) = mis_at_least(g, &cand, target, budget.saturating_sub(used))?;
        used = used.saturating_add(nodes);
        if feasible {
            allowed.remove(i);
        } else {
            required.insert(i);
        }
    }
    debug_assert_eq!(required.count(), alpha);
    debug_assert!(g.is_independent(&required));
    Ok((alpha, required, used))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> ConflictGraph {
        let mut g = ConflictGraph::new(n).unwrap();
        for i in 0..n {
            g.add_edge(i, (i + 1) % n);
        }
        g
    }

    #[test]
    fn cycles() {
        for (n, want) in [(3, 1), (4, 2), (5, 2), (6, 3), (9, 4)] {
            let g = cycle(n);
            let (a, w, _) = mis_with_witness(&g, &VertexSet::all(n), 1 << 20).unwrap();
            assert_eq!(a, want, "C_{n}");
            assert!(g.is_independent(&w));
            assert_eq!(w.count(), want);
        }
    }

    #[test]
    fn witness_is_min_mask() {
        // C_6: both {0,2,4} and {1,3,5} are maximum; min mask is {0,2,4}
        let g = cycle(6);
        let (_, w, _) = mis_with_witness(&g, &VertexSet::all(6), 1 << 20).unwrap();
        assert_eq!(w.to_vec(), vec![0, 2, 4]);
    }

    #[test]
    fn brute_force_agreement() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let n = rng.gen_range(1..14usize);
            let mut g = ConflictGraph::new(n).unwrap();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.35) {
                        g.add_edge(a, b);
                    }
                }
            }
            // exhaustive oracle with min-mask tie break
            let mut best = 0usize;
            let mut best_mask = 0u64;
            for mask in 0u64..(1 << n) {
                let mut ok = true;
                for a in 0..n {
                    if mask >> a & 1 == 1 {
                        for b in g.adj[a].iter() {
                            if mask >> b & 1 == 1 {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        break;
                    }
                }
                if ok && (mask.count_ones() as usize) > best {
                    best = mask.count_ones() as usize;
                    best_mask = mask;
                }
            }
            let (a, w, _) = mis_with_witness(&g, &VertexSet::all(n), 1 << 22).unwrap();
            assert_eq!(a, best);
            let wmask: u64 = w.to_vec().iter().map(|&i| 1u64 << i).sum();
            assert_eq!(wmask, best_mask, "witness tie-break mismatch n={n}");
        }
    }

    #[test]
    fn budget_errors() {
        let g = cycle(30);
        assert!(matches!(
            mis_size(&g, &VertexSet::all(30), 3),
            Err(AvoidError::SolverLimit { .. })
        ));
    }
}

//! Exact and greedy solvers for set cover and maximum independent set.
//!
//! Both exact searches visit candidate solutions in lexicographic order of
//! their sorted index lists and only accept strict improvements, so the
//! optimum they return is the lexicographically least one.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::bitset::BitSet;

/// Search limits shared by the exact solvers and enumerations.
#[derive(Clone, Debug, PartialEq)]
pub struct Budget {
    /// Branch-and-bound nodes per exact search.
    pub nodes: u64,
    /// Largest number of distinct members an iterated cover may have.
    pub member_cap: usize,
    /// Largest number of subsets enumerated when collecting minimum subcovers.
    pub enumeration: u64,
    /// `Auto` mode solves covering numbers exactly up to this many points.
    pub exact_points: usize,
    /// `Auto` mode solves minimum subcovers exactly up to this many members.
    pub exact_members: usize,
    /// `Auto` mode solves separated sets exactly up to this many points.
    pub exact_independent_points: usize,
    /// Pairs sampled by preimage-gap bounds.
    pub pairs: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            nodes: 1_000_000,
            member_cap: 100_000,
            enumeration: 1_000_000,
            exact_points: 25,
            exact_members: 24,
            exact_independent_points: 50,
            pairs: 100_000,
        }
    }
}

/// Which solver to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolveMode {
    Exact,
    Greedy,
    /// Exact below the size thresholds in [`Budget`], greedy above.
    #[default]
    Auto,
}

impl SolveMode {
    pub(crate) fn use_exact(self, small: bool) -> bool {
        match self {
            SolveMode::Exact => true,
            SolveMode::Greedy => false,
            SolveMode::Auto => small,
        }
    }
}

/// The node budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct OutOfBudget;

/// A set-cover instance over `{0..universe}`.
pub(crate) struct SetCover {
    universe: usize,
    sets: Vec<BitSet>,
}

impl SetCover {
    pub(crate) fn new(universe: usize, sets: Vec<BitSet>) -> Self {
        SetCover { universe, sets }
    }

    /// Largest uncovered gain first, ties to the lowest index.
    pub(crate) fn greedy(&self) -> Vec<usize> {
        let mut uncovered = BitSet::full(self.universe);
        let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
            self.sets.iter().enumerate().map(|(i, s)| (s.count(), Reverse(i))).collect();
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            let Some((_, Reverse(i))) = heap.pop() else { break };
            let gain = self.sets[i].intersection_count(&uncovered);
            if gain == 0 {
                continue;
            }
            // Gains only shrink, so a fresh gain that still beats every stale
            // key in the heap is the true maximum.
            if let Some(&top) = heap.peek() {
                if (gain, Reverse(i)) < top {
                    heap.push((gain, Reverse(i)));
                    continue;
                }
            }
            chosen.push(i);
            uncovered.difference_with(&self.sets[i]);
        }
        chosen.sort_unstable();
        chosen
    }

    /// Minimum cover, lexicographically least among minima.
    pub(crate) fn exact(&self, node_budget: u64) -> Result<Vec<usize>, OutOfBudget> {
        let m = self.sets.len();
        let mut reach = vec![BitSet::new(self.universe); m + 1];
        let mut max_size = vec![0usize; m + 1];
        for i in (0..m).rev() {
            let mut u = reach[i + 1].clone();
            u.union_with(&self.sets[i]);
            reach[i] = u;
            max_size[i] = max_size[i + 1].max(self.sets[i].count());
        }
        if !reach[0].is_full() {
            return Ok(Vec::new());
        }
        let greedy = self.greedy();
        let mut search = CoverSearch {
            sets: &self.sets,
            reach,
            max_size,
            best: greedy.len() + 1,
            best_pick: greedy,
            pick: Vec::new(),
            nodes: 0,
            budget: node_budget,
        };
        let uncovered = BitSet::full(self.universe);
        search.run(0, &uncovered)?;
        Ok(search.best_pick)
    }
}

struct CoverSearch<'a> {
    sets: &'a [BitSet],
    reach: Vec<BitSet>,
    max_size: Vec<usize>,
    best: usize,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl CoverSearch<'_> {
    fn run(&mut self, i: usize, uncovered: &BitSet) -> Result<(), OutOfBudget> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(OutOfBudget);
        }
        let left = uncovered.count();
        if left == 0 {
            if self.pick.len() < self.best {
                self.best = self.pick.len();
                self.best_pick = self.pick.clone();
            }
            return Ok(());
        }
        if i == self.sets.len() || !uncovered.is_subset(&self.reach[i]) {
            return Ok(());
        }
        let width = self.max_size[i].max(1);
        if self.pick.len() + left.div_ceil(width) >= self.best {
            return Ok(());
        }
        if self.sets[i].intersects(uncovered) {
            let mut next = uncovered.clone();
            next.difference_with(&self.sets[i]);
            self.pick.push(i);
            self.run(i + 1, &next)?;
            self.pick.pop();
        }
        self.run(i + 1, uncovered)
    }
}

/// Lowest index first: take a vertex unless it is adjacent to one already taken.
pub(crate) fn greedy_independent_set(adjacency: &[BitSet]) -> Vec<usize> {
    let n = adjacency.len();
    let mut blocked = BitSet::new(n);
    let mut out = Vec::new();
    for (v, adj) in adjacency.iter().enumerate() {
        if !blocked.contains(v) {
            out.push(v);
            blocked.union_with(adj);
            blocked.insert(v);
        }
    }
    out
}

/// Maximum independent set, lexicographically least among maxima.
/// `adjacency[v]` must not contain `v`.
pub(crate) fn exact_independent_set(adjacency: &[BitSet], node_budget: u64) -> Result<Vec<usize>, OutOfBudget> {
    let n = adjacency.len();
    let greedy = greedy_independent_set(adjacency);
    let mut search = MisSearch {
        adjacency,
        best: greedy.len().saturating_sub(1),
        best_pick: greedy,
        pick: Vec::new(),
        nodes: 0,
        budget: node_budget,
    };
    search.run(&BitSet::full(n))?;
    Ok(search.best_pick)
}

struct MisSearch<'a> {
    adjacency: &'a [BitSet],
    best: usize,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl MisSearch<'_> {
    /// Greedy partition of `candidates` into cliques; an independent set
    /// meets each clique at most once.
    fn clique_cover_bound(&self, candidates: &BitSet) -> usize {
        let mut rest = candidates.clone();
        let mut cliques = 0;
        while let Some(v) = rest.first() {
            rest.remove(v);
            let mut common = rest.intersection(&self.adjacency[v]);
            while let Some(u) = common.first() {
                rest.remove(u);
                common.remove(u);
                common.intersect_with(&self.adjacency[u]);
            }
            cliques += 1;
        }
        cliques
    }

    fn run(&mut self, candidates: &BitSet) -> Result<(), OutOfBudget> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(OutOfBudget);
        }
        let Some(v) = candidates.first() else {
            if self.pick.len() > self.best {
                self.best = self.pick.len();
                self.best_pick = self.pick.clone();
            }
            return Ok(());
        };
        if self.pick.len() + self.clique_cover_bound(candidates) <= self.best {
            return Ok(());
        }
        let mut with = candidates.clone();
        with.remove(v);
        with.difference_with(&self.adjacency[v]);
        self.pick.push(v);
        self.run(&with)?;
        self.pick.pop();
        let mut without = candidates.clone();
        without.remove(v);
        self.run(&without)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(n: usize, members: &[&[usize]]) -> Vec<BitSet> {
        members.iter().map(|m| BitSet::from_indices(n, m.iter().copied())).collect()
    }

    /// All index subsets in order of size, then lexicographically.
    fn brute_min_cover(n: usize, s: &[BitSet]) -> Vec<usize> {
        let m = s.len();
        let mut best: Option<Vec<usize>> = None;
        for mask in 0u32..(1 << m) {
            let pick: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            let mut u = BitSet::new(n);
            for &i in &pick {
                u.union_with(&s[i]);
            }
            if u.is_full() {
                let better = match &best {
                    None => true,
                    Some(b) => pick.len() < b.len() || (pick.len() == b.len() && pick < *b),
                };
                if better {
                    best = Some(pick);
                }
            }
        }
        best.unwrap()
    }

    fn brute_mis(adj: &[BitSet]) -> Vec<usize> {
        let n = adj.len();
        let mut best: Vec<usize> = Vec::new();
        for mask in 0u32..(1 << n) {
            let pick: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let ok = pick.iter().all(|&a| pick.iter().all(|&b| !adj[a].contains(b)));
            if ok && (pick.len() > best.len() || (pick.len() == best.len() && pick < best)) {
                best = pick;
            }
        }
        best
    }

    #[test]
    fn exact_cover_matches_brute_force() {
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..200 {
            let n = 1 + (next() % 9) as usize;
            let m = 1 + (next() % 8) as usize;
            let mut s: Vec<BitSet> =
                (0..m).map(|_| BitSet::from_indices(n, (0..n).filter(|_| next() % 3 == 0))).collect();
            s.push(BitSet::from_indices(n, (0..n).filter(|_| next() % 2 == 0)));
            let mut all = BitSet::new(n);
            for x in &s {
                all.union_with(x);
            }
            for x in 0..n {
                if !all.contains(x) {
                    s[0].insert(x);
                }
            }
            let inst = SetCover::new(n, s.clone());
            assert_eq!(inst.exact(1_000_000).unwrap(), brute_min_cover(n, &s));
            assert!(inst.greedy().len() >= brute_min_cover(n, &s).len());
        }
    }

    #[test]
    fn greedy_cover_breaks_ties_low() {
        let s = sets(4, &[&[0, 1], &[2, 3], &[0, 1, 2, 3]]);
        assert_eq!(SetCover::new(4, s).greedy(), vec![2]);
        let s = sets(4, &[&[0, 1], &[2, 3], &[1, 2]]);
        assert_eq!(SetCover::new(4, s).greedy(), vec![0, 1]);
    }

    #[test]
    fn exact_mis_matches_brute_force() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..200 {
            let n = 1 + (next() % 12) as usize;
            let mut adj = vec![BitSet::new(n); n];
            for a in 0..n {
                for b in a + 1..n {
                    if next() % 3 == 0 {
                        adj[a].insert(b);
                        adj[b].insert(a);
                    }
                }
            }
            assert_eq!(exact_independent_set(&adj, 1_000_000).unwrap(), brute_mis(&adj));
            assert!(greedy_independent_set(&adj).len() <= brute_mis(&adj).len());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let n = 40;
        let s: Vec<BitSet> = (0..n).map(|i| BitSet::from_indices(n, [i, (i + 1) % n])).collect();
        assert_eq!(SetCover::new(n, s).exact(10), Err(OutOfBudget));
    }
}
